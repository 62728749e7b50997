//! Closed orbits of the reduced flow and the phase portrait on the cylinder.

use std::cell::Cell;
use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::Serialize;

use super::critical::{center_energy, saddle_energy};
use crate::dynamics::SystemParams;
use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::integrator::ode::{Crossing, Event, OdeOptions, Output, Termination};
use crate::integrator::{integrate, IntegrationSettings, Trajectory};
use crate::reduction::{
    cylinder, cylinder_stereographic, deform, dot, integrate_reduced, invariants, lift_sphere_point,
    norm2, reduce_config, reduced_hamiltonian_of, reduced_vector_field_of, ReducedCoordinates,
    SpherePoint,
};

/// Orbit families of the reduced flow on the quotient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Family {
    /// Contractible loops around the center image.
    Center,
    /// Loops around the `+∞` end of the cylinder.
    PlusCollision,
    /// Loops around the `−∞` end.
    MinusCollision,
    /// Within the homoclinic band of the saddle energy.
    NearHomoclinic,
    /// No return found before the time limit.
    Truncated,
}

impl Family {
    pub fn tag(self) -> &'static str {
        match self {
            Family::Center => "center-family",
            Family::PlusCollision => "plus-collision-family",
            Family::MinusCollision => "minus-collision-family",
            Family::NearHomoclinic => "near-homoclinic",
            Family::Truncated => "truncated",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Point of the quotient: the family of its orbit and its energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YPoint {
    pub family: Family,
    pub energy: Extended,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitSample {
    pub t: f64,
    pub w: [f64; 3],
    /// Cylinder height as written to the portrait.
    pub h: Extended,
    pub theta: f64,
    /// Stereographic height, used for orbit topology.
    pub h_topology: Extended,
}

impl OrbitSample {
    fn at(t: f64, w: [f64; 3]) -> Self {
        let q = deform(&invariants(w));
        let c = cylinder(&q);
        OrbitSample { t, w, h: c.h, theta: c.theta, h_topology: cylinder_stereographic(&q).h }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitRecord {
    pub id: usize,
    pub start: SpherePoint,
    pub energy: f64,
    pub family: Family,
    /// First return time in the quotient.
    pub period: Option<f64>,
    /// Distance between start and first return in invariant coordinates.
    pub closure: Option<f64>,
    pub samples: Vec<OrbitSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortraitSettings {
    pub orbits: usize,
    pub t_max: f64,
    /// Orbits with `|H − H_s|` below this are tagged near-homoclinic.
    pub homoclinic_band: f64,
    pub samples_per_orbit: usize,
    /// Seeds stay where every `l_ij` exceeds this.
    pub collision_clamp: f64,
    pub ode: OdeOptions,
}

impl Default for PortraitSettings {
    fn default() -> Self {
        Self {
            orbits: 40,
            t_max: 2000.0,
            homoclinic_band: 1e-6,
            samples_per_orbit: 512,
            collision_clamp: 1e-3,
            ode: OdeOptions::default(),
        }
    }
}

/// A located first return.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedOrbit {
    pub period: f64,
    pub closure: f64,
}

fn invariant_vector(w: [f64; 3]) -> [f64; 3] {
    let p = invariants(w);
    [p.p1, p.p2, p.p3]
}

/// Time derivative of `(p1, p2, p3)` along the reduced flow.
fn invariant_velocity(w: [f64; 3], params: &SystemParams) -> [f64; 3] {
    let [w1, w2, w3] = w;
    let x = reduced_vector_field_of(w, params);
    let jac = [
        [0.0, 0.0, 2.0 * w3],
        [6.0 * w1 * w2, 3.0 * (w1 * w1 - w2 * w2), 0.0],
        [
            3.0 * w3 * (w2 * w2 - w1 * w1),
            6.0 * w1 * w2 * w3,
            w1 * (3.0 * w2 * w2 - w1 * w1),
        ],
    ];
    jac.map(|row| dot(row, x))
}

/// Poincaré plane through the starting invariant point, crossed in the
/// direction of motion; a crossing counts only close to the start.
struct FirstReturn {
    p0: [f64; 3],
    normal: [f64; 3],
    extent: Cell<f64>,
    accept_fraction: f64,
    found: Option<(f64, f64)>,
}

impl Event for FirstReturn {
    fn value(&self, y: &[f64]) -> f64 {
        let p = invariant_vector([y[0], y[1], y[2]]);
        let d = [p[0] - self.p0[0], p[1] - self.p0[1], p[2] - self.p0[2]];
        self.extent.set(self.extent.get().max(norm2(d).sqrt()));
        dot(d, self.normal)
    }

    fn crossing(&self) -> Crossing {
        Crossing::Rising
    }

    fn on_root(&mut self, t: f64, y: &[f64]) -> bool {
        let p = invariant_vector([y[0], y[1], y[2]]);
        let d = [p[0] - self.p0[0], p[1] - self.p0[1], p[2] - self.p0[2]];
        let dist = norm2(d).sqrt();
        if dist <= self.accept_fraction * self.extent.get() {
            self.found = Some((t, dist));
            true
        } else {
            false
        }
    }
}

/// First return of the reduced orbit through `w0` to its starting point in
/// the quotient, or `None` if there is none before `t_max` or `w0` is an
/// equilibrium.
pub fn closed_orbit(w0: &SpherePoint, params: &SystemParams, t_max: f64, opts: OdeOptions) -> Result<Option<ClosedOrbit>> {
    let w = w0.coords();
    let v = invariant_velocity(w, params);
    let speed = norm2(v).sqrt();
    if speed == 0.0 || !speed.is_finite() {
        return Ok(None);
    }
    let mut event = FirstReturn {
        p0: invariant_vector(w),
        normal: v.map(|c| c / speed),
        extent: Cell::new(0.0),
        accept_fraction: 1e-3,
        found: None,
    };
    let (_, term) = integrate_reduced(w0, params, t_max, &Output::Grid(t_max), opts, &mut [&mut event])?;
    Ok(match (term, event.found) {
        (Termination::Event { .. }, Some((period, closure))) => Some(ClosedOrbit { period, closure }),
        _ => None,
    })
}

fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Family of a closed orbit from its samples on the stereographic cylinder.
///
/// Loops with zero net `θ` winding that encircle the center image `(0, 0)`
/// are the center family. Loops with net winding one are collision loops;
/// they pass above the center image at `θ ≡ 0` for the `+∞` end.
pub fn enclosure_family(samples: &[OrbitSample]) -> Option<Family> {
    let mut pts = Vec::with_capacity(samples.len());
    let mut phi = 0.0;
    for (k, s) in samples.iter().enumerate() {
        let h = s.h_topology.finite()?;
        phi = if k == 0 { wrap_angle(s.theta) } else { phi + wrap_angle(s.theta - samples[k - 1].theta) };
        pts.push((h, phi));
    }
    if pts.len() < 3 {
        return None;
    }
    let net = (pts[pts.len() - 1].1 - pts[0].1) / TAU;
    if net.abs() > 0.5 {
        for pair in pts.windows(2) {
            let (h0, a0) = pair[0];
            let (h1, a1) = pair[1];
            let m0 = (a0 / TAU).floor();
            let m1 = (a1 / TAU).floor();
            if m0 != m1 {
                let level = m0.max(m1) * TAU;
                let h = h0 + (h1 - h0) * (level - a0) / (a1 - a0);
                return Some(if h > 0.0 { Family::PlusCollision } else { Family::MinusCollision });
            }
        }
        return None;
    }
    let mut total = 0.0;
    for pair in pts.windows(2) {
        let a0 = pair[0].1.atan2(pair[0].0);
        let a1 = pair[1].1.atan2(pair[1].0);
        total += wrap_angle(a1 - a0);
    }
    ((total / TAU).round().abs() == 1.0).then_some(Family::Center)
}

/// Regular samples of one period (or of `[0, t_end]`).
fn orbit_samples(w0: &SpherePoint, params: &SystemParams, t_end: f64, count: usize, opts: OdeOptions) -> Result<Vec<OrbitSample>> {
    let dt = t_end / count.max(1) as f64;
    let (states, _) = integrate_reduced(w0, params, t_end, &Output::Grid(dt), opts, &mut [])?;
    Ok(states.into_iter().map(|(t, w)| OrbitSample::at(t, w)).collect())
}

/// Classifies the quotient point of `w` by integrating its orbit once.
pub fn classify_state(w: &SpherePoint, params: &SystemParams) -> Result<YPoint> {
    classify_state_with(w, params, 1e-9, 1e4)
}

pub fn classify_state_with(w: &SpherePoint, params: &SystemParams, band: f64, t_max: f64) -> Result<YPoint> {
    let energy = reduced_hamiltonian_of(w.coords(), params);
    let h = match energy {
        Extended::PlusInfinity => return Ok(YPoint { family: Family::PlusCollision, energy }),
        Extended::MinusInfinity => return Ok(YPoint { family: Family::MinusCollision, energy }),
        Extended::Finite(h) => h,
    };
    if (h - saddle_energy(params)).abs() < band {
        return Ok(YPoint { family: Family::NearHomoclinic, energy });
    }
    let opts = OdeOptions::default();
    match closed_orbit(w, params, t_max, opts)? {
        None => {
            if norm2(reduced_vector_field_of(w.coords(), params)) == 0.0 || (h - center_energy(params)).abs() < 1e-12 {
                Ok(YPoint { family: Family::Center, energy })
            } else {
                Err(Error::NoReturn(t_max))
            }
        }
        Some(orbit) => {
            let samples = orbit_samples(w, params, orbit.period, 1024, opts)?;
            let family = enclosure_family(&samples).unwrap_or(Family::Truncated);
            Ok(YPoint { family, energy })
        }
    }
}

fn meridian(s: f64) -> [f64; 3] {
    [0.0, s, -(1.0 - s * s).max(0.0).sqrt()]
}

fn meridian_energy(s: f64, params: &SystemParams) -> f64 {
    reduced_hamiltonian_of(meridian(s), params).to_f64()
}

/// Solves `H(meridian(s)) = target` on `[a, b]`, where `H` is monotone.
fn meridian_at_energy(target: f64, mut a: f64, mut b: f64, params: &SystemParams) -> f64 {
    let increasing = meridian_energy(b, params) > meridian_energy(a, params);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        if (meridian_energy(m, params) < target) == increasing {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Seeds on the meridian `w1 = 0, w3 < 0`, spread evenly in energy over the
/// three families, plus one seed on each side of the saddle energy.
///
/// Along the meridian `H` falls from the center at `s = 0` to the saddle at
/// `s = √3 − 1` and rises again to the `+∞` end at `s = 1`; it rises from
/// the `−∞` end at `s = −1` to the center.
pub fn portrait_seeds(params: &SystemParams, settings: &PortraitSettings) -> Vec<(SpherePoint, f64)> {
    let n = settings.orbits;
    let s_saddle = 3f64.sqrt() - 1.0;
    let s_plus = 1.0 - settings.collision_clamp / 6.0;
    let s_minus = -1.0 + settings.collision_clamp / 2.0;
    let (hc, hs) = (center_energy(params), saddle_energy(params));
    let h_plus = meridian_energy(s_plus, params);
    let h_minus = meridian_energy(s_minus, params);

    let extra = n.min(2);
    let rest = n - extra;
    let n_center = rest / 3;
    let n_plus = (rest - n_center) / 2;
    let n_minus = rest - n_center - n_plus;

    let mut seeds = Vec::with_capacity(n);
    for k in 1..=n_center {
        let e = hs + (hc - hs) * k as f64 / (n_center + 1) as f64;
        seeds.push(meridian_at_energy(e, 0.0, s_saddle, params));
    }
    for k in 1..=n_plus {
        let e = hs + (h_plus - hs) * k as f64 / n_plus as f64;
        seeds.push(meridian_at_energy(e, s_saddle, s_plus, params));
    }
    for k in 1..=n_minus {
        let e = hs - (hs - h_minus) * k as f64 / n_minus as f64;
        seeds.push(meridian_at_energy(e, s_minus, 0.0, params));
    }
    let near = [1e-7, -1e-7];
    for d in near.iter().take(extra) {
        let (a, b) = if *d > 0.0 { (s_saddle, s_plus) } else { (s_minus, 0.0) };
        seeds.push(meridian_at_energy(hs + d, a, b, params));
    }
    seeds
        .into_iter()
        .map(|s| {
            let w = SpherePoint::normalized(meridian(s)).expect("meridian point");
            (w, reduced_hamiltonian_of(w.coords(), params).to_f64())
        })
        .collect()
}

fn trace_orbit(id: usize, start: SpherePoint, energy: f64, params: &SystemParams, settings: &PortraitSettings) -> Result<OrbitRecord> {
    let closed = closed_orbit(&start, params, settings.t_max, settings.ode)?;
    let near = (energy - saddle_energy(params)).abs() < settings.homoclinic_band;
    let (period, closure, samples, family) = match closed {
        Some(c) => {
            let samples = orbit_samples(&start, params, c.period, settings.samples_per_orbit, settings.ode)?;
            let family = if near {
                Family::NearHomoclinic
            } else {
                enclosure_family(&samples).unwrap_or(Family::Truncated)
            };
            (Some(c.period), Some(c.closure), samples, family)
        }
        None => {
            let samples = orbit_samples(&start, params, settings.t_max, 8 * settings.samples_per_orbit, settings.ode)?;
            (None, None, samples, if near { Family::NearHomoclinic } else { Family::Truncated })
        }
    };
    Ok(OrbitRecord { id, start, energy, family, period, closure, samples })
}

/// Traces `settings.orbits` reduced orbits, in parallel on the current
/// rayon pool. The result does not depend on the pool size.
pub fn portrait(params: &SystemParams, settings: &PortraitSettings) -> Result<Vec<OrbitRecord>> {
    if !(settings.t_max > 0.0) || settings.samples_per_orbit == 0 {
        return Err(Error::InvalidParameter("portrait needs t_max > 0 and at least one sample".into()));
    }
    portrait_seeds(params, settings)
        .into_par_iter()
        .enumerate()
        .map(|(id, (w, e))| trace_orbit(id, w, e, params, settings))
        .collect()
}

/// A full-space trajectory together with its reduced image.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub trajectory: Trajectory,
    pub reduced: Vec<(f64, ReducedCoordinates)>,
}

/// Lifts `w0` to the level set, integrates the vortex equations and reduces
/// every sample.
pub fn reconstruct(w0: &SpherePoint, params: &SystemParams, settings: &IntegrationSettings) -> Result<Reconstruction> {
    let config = lift_sphere_point(w0, params);
    let trajectory = integrate(&config, settings)?;
    let reduced = trajectory
        .times()
        .iter()
        .zip(trajectory.states())
        .map(|(t, c)| Ok((*t, reduce_config(c, params, 1e-6)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Reconstruction { trajectory, reduced })
}
