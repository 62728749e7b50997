//! Equilibria, phase portraits and orbit classification of the reduced flow.

pub mod critical;
pub mod portrait;

pub use critical::{
    base_saddle, center_energy, find_critical_points, find_critical_points_with, saddle_energy, saddle_points,
    CriticalSearch, EquilibriumKind, EquilibriumReport,
};
pub use portrait::{
    classify_state, classify_state_with, closed_orbit, enclosure_family, portrait, portrait_seeds, reconstruct,
    ClosedOrbit, Family, OrbitRecord, OrbitSample, PortraitSettings, Reconstruction, YPoint,
};
