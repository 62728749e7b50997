//! Planar point-vortex dynamics and the reduction of the four-vortex system
//! with strengths `(−Γ/3, −Γ/3, −Γ/3, Γ)` to a flow on the sphere.
//!
//! The chain runs from configurations in the plane through chart
//! coordinates on the momentum level set, the Hopf map to the sphere, the
//! invariant polynomials of the permutation action and finally a cylinder.

// Negated comparisons reject NaN along with out-of-range values. Index
// loops are kept where several arrays share the index.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod extended;
pub mod integrator;
pub mod io;
pub mod reduction;
pub mod verify;

pub use analysis::{EquilibriumKind, EquilibriumReport, Family, OrbitRecord, PortraitSettings, YPoint};
pub use dynamics::{MomentumValue, PlanarConfig, Point, Strengths, SystemParams};
pub use error::{Error, Result};
pub use extended::Extended;
pub use integrator::{IntegrationSettings, Trajectory, TrajectoryStatus};
pub use reduction::{ChartPoint, CylinderPoint, DeformedPoint, InvariantPoint, ReducedCoordinates, SpherePoint, S3};
