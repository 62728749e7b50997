//! Reduction of the 4-vortex system at the momentum `μe`.
//!
//! The chain is
//!
//! ```text
//! PlanarConfig --to_chart--> ChartPoint --hopf--> HopfImage (w4 = 1: SpherePoint)
//!   --invariants--> InvariantPoint --deform--> DeformedPoint --cylinder--> CylinderPoint
//! ```
//!
//! The first two steps quotient by `SE(2)`, the invariant polynomials
//! quotient by the permutations of the three outer vortices.

use std::f64::consts::{PI, TAU};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, PlanarConfig, SystemParams};
use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::integrator::ode::{Dop853, Event, OdeOptions, Output, Termination};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Default momentum tolerance of [`to_chart`].
pub const MOMENTUM_TOLERANCE: f64 = 1e-8;

/// Width of the polar cap excluded from the `v1 = 0` section.
pub const NORTH_POLE_MARGIN: f64 = 1e-6;

/// Orthonormal basis of zero-sum outer positions. Rows are
/// `(x1, y1, x2, y2, x3, y3)`, columns span the chart coordinates
/// `(u1, v1, u2, v2)`.
pub fn basis_matrix() -> [[f64; 4]; 6] {
    let h = SQRT3 / 2.0;
    let rows = [
        [1.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 1.0],
        [-0.5, -h, -0.5, h],
        [h, -0.5, -h, -0.5],
        [-0.5, h, -0.5, -h],
        [-h, -0.5, h, -0.5],
    ];
    rows.map(|r| r.map(|v| v / SQRT3))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub u1: f64,
    pub v1: f64,
    pub u2: f64,
    pub v2: f64,
}

impl ChartPoint {
    pub fn as_array(&self) -> [f64; 4] {
        [self.u1, self.v1, self.u2, self.v2]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self { u1: a[0], v1: a[1], u2: a[2], v2: a[3] }
    }

    pub fn norm_squared(&self) -> f64 {
        self.as_array().iter().map(|v| v * v).sum()
    }
}

/// Hopf variables; `w1² + w2² + w3² = w4²`, `w4 ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfImage {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
}

impl HopfImage {
    pub fn cone_residual(&self) -> f64 {
        self.w1 * self.w1 + self.w2 * self.w2 + self.w3 * self.w3 - self.w4 * self.w4
    }

    pub fn w(&self) -> [f64; 3] {
        [self.w1, self.w2, self.w3]
    }
}

impl From<HopfImage> for [f64; 3] {
    fn from(h: HopfImage) -> Self {
        h.w()
    }
}

/// A point of the reduced space, the unit 2-sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct SpherePoint([f64; 3]);

impl SpherePoint {
    pub const SOUTH_POLE: SpherePoint = SpherePoint([0.0, 0.0, -1.0]);
    pub const NORTH_POLE: SpherePoint = SpherePoint([0.0, 0.0, 1.0]);

    /// Accepts `w` if it lies on the unit sphere within `1e-12`.
    pub fn new(w: [f64; 3]) -> Result<Self> {
        let n2 = norm2(w);
        if !((n2 - 1.0).abs() <= 1e-12) {
            return Err(Error::InvalidParameter(format!("|w|² = {n2} is not 1")));
        }
        Ok(Self(w))
    }

    /// Radial projection of a nonzero vector onto the sphere.
    pub fn normalized(v: [f64; 3]) -> Result<Self> {
        let n = norm2(v).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidParameter(format!("cannot normalize {v:?}")));
        }
        Ok(Self(v.map(|c| c / n)))
    }

    pub fn coords(&self) -> [f64; 3] {
        self.0
    }

    /// Great-circle distance.
    pub fn angle_to(&self, other: &SpherePoint) -> f64 {
        let c = cross(self.0, other.0);
        norm2(c).sqrt().atan2(dot(self.0, other.0))
    }
}

impl TryFrom<[f64; 3]> for SpherePoint {
    type Error = Error;

    fn try_from(w: [f64; 3]) -> Result<Self> {
        Self::new(w)
    }
}

impl From<SpherePoint> for [f64; 3] {
    fn from(w: SpherePoint) -> Self {
        w.0
    }
}

/// The six linear functionals with `(α²/2)·l_ij = |z_i − z_j|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LFunctionals {
    pub l12: f64,
    pub l13: f64,
    pub l23: f64,
    pub l41: f64,
    pub l42: f64,
    pub l43: f64,
}

impl LFunctionals {
    pub fn min(&self) -> f64 {
        [self.l12, self.l13, self.l23, self.l41, self.l42, self.l43]
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    /// Value for the unordered pair `(i, j)` of vortex labels `1..=4`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i.min(j), i.max(j)) {
            (1, 2) => self.l12,
            (1, 3) => self.l13,
            (2, 3) => self.l23,
            (1, 4) => self.l41,
            (2, 4) => self.l42,
            (3, 4) => self.l43,
            _ => panic!("no functional for pair ({i}, {j})"),
        }
    }
}

/// Invariant polynomials of the permutation action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantPoint {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
}

impl InvariantPoint {
    /// `p1((p1 − p4)³ + p2²) + p3²`, zero on the image.
    pub fn relation_residual(&self) -> f64 {
        let d = self.p1 - self.p4;
        self.p1 * (d * d * d + self.p2 * self.p2) + self.p3 * self.p3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeformedPoint {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

/// `(h, θ)` on the cylinder, `θ ∈ [0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderPoint {
    pub h: Extended,
    pub theta: f64,
}

/// Linear functionals as `(gradient in (w1, w2), offset, weight in H)`.
/// Outer–central distances enter the Hamiltonian cubed, outer–outer
/// distances inverted.
fn l_table() -> [([f64; 2], f64, f64); 6] {
    [
        ([-3.0 * SQRT3, 3.0], 6.0, -1.0), // l12
        ([3.0 * SQRT3, 3.0], 6.0, -1.0),  // l13
        ([0.0, -6.0], 6.0, -1.0),         // l23
        ([0.0, 2.0], 2.0, 3.0),           // l41
        ([-SQRT3, -1.0], 2.0, 3.0),       // l42
        ([SQRT3, -1.0], 2.0, 3.0),        // l43
    ]
}

fn to_chart_raw(config: &PlanarConfig) -> ([f64; 6], f64) {
    let z = config.positions();
    let c = z[3];
    let mut outer = [0.0; 6];
    for i in 0..3 {
        outer[2 * i] = z[i][0] - c[0];
        outer[2 * i + 1] = z[i][1] - c[1];
    }
    let sx = outer[0] + outer[2] + outer[4];
    let sy = outer[1] + outer[3] + outer[5];
    (outer, sx.hypot(sy))
}

fn project_outer(outer: &[f64; 6]) -> ChartPoint {
    let e = basis_matrix();
    let mut u = [0.0; 4];
    for (k, uk) in u.iter_mut().enumerate() {
        *uk = (0..6).map(|r| e[r][k] * outer[r]).sum();
    }
    ChartPoint::from_array(u)
}

/// Chart coordinates of a 4-vortex configuration on the `μe` level set.
pub fn to_chart(config: &PlanarConfig, params: &SystemParams) -> Result<ChartPoint> {
    to_chart_with_tolerance(config, params, MOMENTUM_TOLERANCE)
}

pub fn to_chart_with_tolerance(config: &PlanarConfig, params: &SystemParams, tol: f64) -> Result<ChartPoint> {
    if config.len() != 4 {
        return Err(Error::InvalidParameter(format!("expected 4 vortices, got {}", config.len())));
    }
    let found = dynamics::momentum(config);
    let expected = params.mu_e();
    let residual = found.distance(&expected);
    if !(residual <= tol) {
        return Err(Error::MomentumMismatch {
            expected: expected.as_array(),
            found: found.as_array(),
            residual,
        });
    }
    let (outer, centroid) = to_chart_raw(config);
    // |J_tr| = |Γ|·|centroid|/3 on four vortices with these strengths.
    if !(centroid <= 3.0 * tol / params.gamma().abs() + 1e-12 * params.alpha()) {
        return Err(Error::CentroidResidual(centroid));
    }
    Ok(project_outer(&outer))
}

/// Lifts chart coordinates to a configuration with the central vortex at
/// the origin.
pub fn lift(c: &ChartPoint, params: &SystemParams) -> PlanarConfig {
    let e = basis_matrix();
    let u = c.as_array();
    let outer: Vec<f64> = (0..6).map(|r| (0..4).map(|k| e[r][k] * u[k]).sum()).collect();
    let positions = vec![[outer[0], outer[1]], [outer[2], outer[3]], [outer[4], outer[5]], [0.0, 0.0]];
    PlanarConfig::new(positions, params.strengths()).expect("finite lift of finite chart point")
}

pub fn hopf(c: &ChartPoint, params: &SystemParams) -> HopfImage {
    let k = 1.0 / (3.0 * params.alpha() * params.alpha());
    let ChartPoint { u1, v1, u2, v2 } = *c;
    let a = u1 * u1 + v1 * v1;
    let b = u2 * u2 + v2 * v2;
    HopfImage {
        w1: 2.0 * k * (u1 * v2 - u2 * v1),
        w2: 2.0 * k * (u1 * u2 + v1 * v2),
        w3: -k * (a - b),
        w4: k * (a + b),
    }
}

/// The `v1 = 0` section of the Hopf map, defined away from the north pole.
pub fn section(w: &SpherePoint, params: &SystemParams) -> Result<ChartPoint> {
    let [w1, w2, w3] = w.coords();
    if w3 >= 1.0 - NORTH_POLE_MARGIN {
        return Err(Error::NearNorthPole(w3));
    }
    let c = params.alpha() * (1.5f64).sqrt();
    let r = (1.0 - w3).sqrt();
    Ok(ChartPoint { u1: c * r, v1: 0.0, u2: c * w2 / r, v2: c * w1 / r })
}

/// Section valid on the whole sphere except the south pole cap: maps `w` by
/// `σ_(23)`, sections there and exchanges outer vortices 2 and 3.
pub fn section_rotated(w: &SpherePoint, params: &SystemParams) -> Result<ChartPoint> {
    let swapped = S3::T23.act(w);
    let c = section(&swapped, params)?;
    let config = S3::T23.permute(&lift(&c, params));
    let (outer, _) = to_chart_raw(&config);
    Ok(project_outer(&outer))
}

/// A configuration on the `μe` level set whose reduced image is `w`.
pub fn lift_sphere_point(w: &SpherePoint, params: &SystemParams) -> PlanarConfig {
    let chart = match section(w, params) {
        Ok(c) => c,
        Err(_) => section_rotated(w, params).expect("rotated section covers the north pole"),
    };
    lift(&chart, params)
}

pub fn l_functionals(w: &SpherePoint) -> LFunctionals {
    l_functionals_of(w.coords())
}

pub(crate) fn l_functionals_of(w: [f64; 3]) -> LFunctionals {
    let [w1, w2, _] = w;
    LFunctionals {
        l12: -3.0 * (SQRT3 * w1 - w2 - 2.0),
        l13: 3.0 * (SQRT3 * w1 + w2 + 2.0),
        l23: -6.0 * (w2 - 1.0),
        l41: 2.0 * (w2 + 1.0),
        l42: -(SQRT3 * w1 + w2 - 2.0),
        l43: SQRT3 * w1 - w2 + 2.0,
    }
}

fn energy_scale(params: &SystemParams) -> f64 {
    params.gamma() * params.gamma() / (36.0 * PI)
}

/// `H = (Γ²/36π) ln((α²/2)⁶ (l41 l42 l43)³ / (l12 l13 l23))`.
pub fn reduced_hamiltonian_w(w: &SpherePoint, params: &SystemParams) -> Extended {
    reduced_hamiltonian_of(w.coords(), params)
}

pub(crate) fn reduced_hamiltonian_of(w: [f64; 3], params: &SystemParams) -> Extended {
    let l = l_functionals_of(w);
    let central = [l.l41, l.l42, l.l43];
    let outer = [l.l12, l.l13, l.l23];
    if central.iter().any(|v| *v <= 0.0) {
        return Extended::MinusInfinity;
    }
    if outer.iter().any(|v| *v <= 0.0) {
        return Extended::PlusInfinity;
    }
    let a2 = params.alpha() * params.alpha() / 2.0;
    let log = 6.0 * a2.ln() + 3.0 * central.iter().map(|v| v.ln()).sum::<f64>()
        - outer.iter().map(|v| v.ln()).sum::<f64>();
    Extended::Finite(energy_scale(params) * log)
}

/// Ambient gradient of the l-form Hamiltonian (third component zero).
pub fn reduced_gradient(w: [f64; 3], params: &SystemParams) -> [f64; 3] {
    let k = energy_scale(params);
    let mut g = [0.0; 3];
    for (a, b, c) in l_table() {
        let l = a[0] * w[0] + a[1] * w[1] + b;
        g[0] += c * a[0] / l;
        g[1] += c * a[1] / l;
    }
    [k * g[0], k * g[1], 0.0]
}

/// Ambient Hessian of the l-form Hamiltonian.
pub fn reduced_hessian(w: [f64; 3], params: &SystemParams) -> [[f64; 3]; 3] {
    let k = energy_scale(params);
    let mut hess = [[0.0; 3]; 3];
    for (a, b, c) in l_table() {
        let l = a[0] * w[0] + a[1] * w[1] + b;
        for i in 0..2 {
            for j in 0..2 {
                hess[i][j] -= k * c * a[i] * a[j] / (l * l);
            }
        }
    }
    hess
}

/// Minimum distance in the l-functionals below which the reduced vector
/// field is refused.
pub const COLLISION_MARGIN: f64 = 1e-8;

/// Hamiltonian vector field of the reduced energy for the area form
/// `(Γα²/4)·ω_{S²}`: `X = (4/Γα²) w × ∇H`.
pub fn reduced_vector_field(w: &SpherePoint, params: &SystemParams) -> Result<[f64; 3]> {
    let min_l = l_functionals(w).min();
    if !(min_l > COLLISION_MARGIN) {
        return Err(Error::NearCollision { min_l, threshold: COLLISION_MARGIN });
    }
    Ok(reduced_vector_field_of(w.coords(), params))
}

pub(crate) fn reduced_vector_field_of(w: [f64; 3], params: &SystemParams) -> [f64; 3] {
    let k = 4.0 / (params.gamma() * params.alpha() * params.alpha());
    cross(w, reduced_gradient(w, params)).map(|v| k * v)
}

/// Elements of the permutation group of the outer vortices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum S3 {
    E,
    T12,
    T13,
    T23,
    C123,
    C132,
}

/// `hopf∘to_chart` intertwines the relabeling action with `σ_g` itself
/// rather than with `σ_{g⁻¹}`. Fixed by the brute-force check over all six
/// elements in this module's tests.
pub const SIGMA_IS_HOMOMORPHISM: bool = true;

impl S3 {
    pub const ALL: [S3; 6] = [S3::E, S3::T12, S3::T13, S3::T23, S3::C123, S3::C132];

    /// Image of outer label `i ∈ {0, 1, 2}`.
    pub fn image(self, i: usize) -> usize {
        let map = match self {
            S3::E => [0, 1, 2],
            S3::T12 => [1, 0, 2],
            S3::T13 => [2, 1, 0],
            S3::T23 => [0, 2, 1],
            S3::C123 => [1, 2, 0],
            S3::C132 => [2, 0, 1],
        };
        map[i]
    }

    pub fn inverse(self) -> S3 {
        match self {
            S3::C123 => S3::C132,
            S3::C132 => S3::C123,
            g => g,
        }
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(self, other: S3) -> S3 {
        let images = [0, 1, 2].map(|i| self.image(other.image(i)));
        *S3::ALL
            .iter()
            .find(|g| [0, 1, 2].map(|i| g.image(i)) == images)
            .expect("S3 is closed")
    }

    /// The representation `σ_g ∈ SO(3)` on the reduced sphere.
    pub fn matrix(self) -> [[f64; 3]; 3] {
        let h = SQRT3 / 2.0;
        match self {
            S3::E => [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            S3::T12 => [[0.5, -h, 0.0], [-h, -0.5, 0.0], [0.0, 0.0, -1.0]],
            S3::T13 => [[0.5, h, 0.0], [h, -0.5, 0.0], [0.0, 0.0, -1.0]],
            S3::T23 => [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]],
            S3::C123 => [[-0.5, -h, 0.0], [h, -0.5, 0.0], [0.0, 0.0, 1.0]],
            S3::C132 => [[-0.5, h, 0.0], [-h, -0.5, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn act(self, w: &SpherePoint) -> SpherePoint {
        SpherePoint(mat_vec(&self.matrix(), w.coords()))
    }

    /// Relabels outer vortices: vortex `i` moves to slot `g(i)`.
    pub fn permute(self, config: &PlanarConfig) -> PlanarConfig {
        let z = config.positions();
        let mut out = z.to_vec();
        for i in 0..3 {
            out[self.image(i)] = z[i];
        }
        PlanarConfig::new(out, config.strengths().clone()).expect("permutation keeps positions finite")
    }
}

pub fn permutation_matrix(g: S3) -> [[f64; 3]; 3] {
    g.matrix()
}

/// Invariant polynomials, computed through `p̃1 = w3`,
/// `p̃2 + i p̃3 = (−w2 + i w1)³`, `p̃4 = |w|²`.
pub fn invariants(w: impl Into<[f64; 3]>) -> InvariantPoint {
    let [w1, w2, w3] = w.into();
    let t1 = w3;
    // (a + ib)³ with a = −w2, b = w1
    let (a, b) = (-w2, w1);
    let t2 = a * a * a - 3.0 * a * b * b;
    let t3 = 3.0 * a * a * b - b * b * b;
    let t4 = w1 * w1 + w2 * w2 + w3 * w3;
    InvariantPoint { p1: t1 * t1, p2: t2, p3: t1 * t3, p4: t4 }
}

/// Tolerance on the quotient relation accepted by [`reduced_hamiltonian_p`].
pub const RELATION_TOLERANCE: f64 = 1e-8;

/// `H = (Γ²/36π) ln(α¹²/(2⁴3³) · (1 + 3p1 − p2)³/(1 + 3p1 + p2))`.
pub fn reduced_hamiltonian_p(p: &InvariantPoint, params: &SystemParams) -> Result<Extended> {
    let residual = p.relation_residual();
    if !(residual.abs() <= RELATION_TOLERANCE) || !((p.p4 - 1.0).abs() <= RELATION_TOLERANCE) {
        return Err(Error::RelationViolation { residual, p4: p.p4 });
    }
    let num = 1.0 + 3.0 * p.p1 - p.p2;
    let den = 1.0 + 3.0 * p.p1 + p.p2;
    if num <= 0.0 {
        return Ok(Extended::MinusInfinity);
    }
    if den <= 0.0 {
        return Ok(Extended::PlusInfinity);
    }
    let log = 12.0 * params.alpha().ln() - 4.0 * 2f64.ln() - 3.0 * 3f64.ln() + 3.0 * num.ln() - den.ln();
    Ok(Extended::Finite(energy_scale(params) * log))
}

pub fn deform(p: &InvariantPoint) -> DeformedPoint {
    DeformedPoint {
        q1: p.p1 - (1.0 - p.p2 * p.p2) / 4.0,
        q2: p.p2,
        q3: p.p3,
    }
}

fn angle_of(q: &DeformedPoint) -> f64 {
    let t = q.q3.atan2(q.q1);
    let t = if t < 0.0 { t + TAU } else { t + 0.0 };
    // t + TAU rounds to TAU for tiny negative t; −0 becomes +0 above.
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Cylinder coordinates `h = ½ ln((q1² + q3²)/(q2 + |q|))`, `θ = atan2(q3, q1)`.
///
/// On the axis `q1 = q3 = 0` (the collision states) `h` is `−∞` for
/// `q2 > 0` and `+∞` for `q2 < 0`.
pub fn cylinder(q: &DeformedPoint) -> CylinderPoint {
    let r2 = q.q1 * q.q1 + q.q3 * q.q3;
    let norm = (r2 + q.q2 * q.q2).sqrt();
    let h = if r2 == 0.0 {
        axis_height(q.q2)
    } else {
        Extended::Finite(0.5 * (r2 / (q.q2 + norm)).ln())
    };
    CylinderPoint { h, theta: angle_of(q) }
}

/// Radial projection to the unit sphere followed by stereographic
/// projection from `(0, −1, 0)`; `h` is the log of the planar radius.
///
/// Unlike [`cylinder`], this sends neighbourhoods of both collision states
/// to the ends `h → ±∞`, so it is the chart used for orbit topology.
pub fn cylinder_stereographic(q: &DeformedPoint) -> CylinderPoint {
    let r2 = q.q1 * q.q1 + q.q3 * q.q3;
    let norm = (r2 + q.q2 * q.q2).sqrt();
    let h = if r2 == 0.0 {
        axis_height(q.q2)
    } else {
        // (1 − n2)/(1 + n2) = (|q| − q2)/(|q| + q2) = r²/(|q| + q2)²
        let d = norm + q.q2;
        Extended::Finite(0.5 * r2.ln() - d.ln())
    };
    CylinderPoint { h, theta: angle_of(q) }
}

fn axis_height(q2: f64) -> Extended {
    if q2 > 0.0 {
        Extended::MinusInfinity
    } else {
        Extended::PlusInfinity
    }
}

/// Uniform point of the `μe` level set, lifted with the central vortex at
/// the origin. Deterministic in `seed`.
pub fn sample_level_set(params: &SystemParams, seed: u64) -> PlanarConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = [0.0; 4];
    loop {
        for v in u.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let n: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-8 {
            let s = 3f64.sqrt() * params.alpha() / n;
            u.iter_mut().for_each(|v| *v *= s);
            break;
        }
    }
    lift(&ChartPoint::from_array(u), params)
}

/// Uniform random point on the reduced sphere.
pub fn sample_sphere(rng: &mut impl rand::Rng) -> SpherePoint {
    loop {
        let v: [f64; 3] = [0; 3].map(|_| StandardNormal.sample(rng));
        if norm2(v) > 1e-12 {
            return SpherePoint::normalized(v).expect("nonzero vector");
        }
    }
}

/// The reduced chain evaluated at one sphere point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedCoordinates {
    pub w: [f64; 3],
    pub p: InvariantPoint,
    pub q: DeformedPoint,
    pub cylinder: CylinderPoint,
    pub energy: Extended,
}

pub fn reduce_point(w: [f64; 3], params: &SystemParams) -> ReducedCoordinates {
    let p = invariants(w);
    let q = deform(&p);
    ReducedCoordinates {
        w,
        p,
        q,
        cylinder: cylinder(&q),
        energy: reduced_hamiltonian_of(w, params),
    }
}

/// Sends a level-set configuration through `to_chart∘hopf` and the rest of
/// the chain. `w` is the raw Hopf image, not renormalized.
pub fn reduce_config(config: &PlanarConfig, params: &SystemParams, tol: f64) -> Result<ReducedCoordinates> {
    let chart = to_chart_with_tolerance(config, params, tol)?;
    Ok(reduce_point(hopf(&chart, params).w(), params))
}

/// Sampled reduced states `(t, w)`.
pub type ReducedTrack = Vec<(f64, [f64; 3])>;

/// Integrates the reduced flow from `w0`, reporting states on `output`.
pub fn integrate_reduced(
    w0: &SpherePoint,
    params: &SystemParams,
    t_end: f64,
    output: &Output,
    opts: OdeOptions,
    events: &mut [&mut dyn Event],
) -> Result<(ReducedTrack, Termination)> {
    let p = *params;
    let rhs = move |y: &[f64], dy: &mut [f64]| {
        let v = reduced_vector_field_of([y[0], y[1], y[2]], &p);
        dy.copy_from_slice(&v);
    };
    let mut solver = Dop853::new(rhs, 3, opts);
    let mut out = Vec::new();
    let term = solver.solve(0.0, &w0.coords(), t_end, output, events, |t, y| out.push((t, [y[0], y[1], y[2]])))?;
    Ok((out, term))
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn norm2(a: [f64; 3]) -> f64 {
    dot(a, a)
}

pub(crate) fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{canonical_relative_equilibrium, mirror_relative_equilibrium, saddle_relative_equilibrium};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn unit() -> SystemParams {
        SystemParams::new(3.0, 1.0).unwrap()
    }

    fn saddle_w() -> SpherePoint {
        let w2 = SQRT3 - 1.0;
        SpherePoint::new([0.0, w2, -(1.0 - w2 * w2).sqrt()]).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn basis_is_orthonormal_with_zero_centroid() {
        let e = basis_matrix();
        for i in 0..4 {
            for j in 0..4 {
                let d: f64 = (0..6).map(|r| e[r][i] * e[r][j]).sum();
                assert_abs_diff_eq!(d, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-15);
            }
            assert_abs_diff_eq!(e[0][i] + e[2][i] + e[4][i], 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(e[1][i] + e[3][i] + e[5][i], 0.0, epsilon = 1e-15);
        }
        let col1 = [1.0, 0.0, -0.5, SQRT3 / 2.0, -0.5, -SQRT3 / 2.0].map(|v| v / SQRT3);
        assert!(close(&e.map(|r| r[0]), &col1, 1e-16));
    }

    #[test]
    fn chart_of_distinguished_configs() {
        let p = unit();
        let c = to_chart(&canonical_relative_equilibrium(&p), &p).unwrap();
        assert!(close(&c.as_array(), &[SQRT3, 0.0, 0.0, 0.0], 1e-15));
        let m = to_chart(&mirror_relative_equilibrium(&p), &p).unwrap();
        assert!(close(&m.as_array(), &[0.0, 0.0, SQRT3, 0.0], 1e-15));
        for phi in [0.3, 1.0, 2.5, -4.0] {
            let r = to_chart(&canonical_relative_equilibrium(&p).rotated(phi), &p).unwrap();
            assert_abs_diff_eq!(r.norm_squared(), 3.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn chart_rejects_wrong_momentum() {
        let p = unit();
        let c = canonical_relative_equilibrium(&p).scaled(1.1);
        assert!(matches!(to_chart(&c, &p), Err(Error::MomentumMismatch { .. })));
        let mut state = canonical_relative_equilibrium(&p).to_flat();
        state[6] = 0.01;
        let shifted = PlanarConfig::from_flat(&state, p.strengths()).unwrap();
        assert!(matches!(to_chart(&shifted, &p), Err(Error::MomentumMismatch { .. })));
    }

    #[test]
    fn hopf_examples() {
        let p = unit();
        let s = hopf(&ChartPoint::from_array([SQRT3, 0.0, 0.0, 0.0]), &p);
        assert!(close(&[s.w1, s.w2, s.w3, s.w4], &[0.0, 0.0, -1.0, 1.0], 1e-15));
        let n = hopf(&ChartPoint::from_array([0.0, 0.0, SQRT3, 0.0]), &p);
        assert!(close(&[n.w1, n.w2, n.w3, n.w4], &[0.0, 0.0, 1.0, 1.0], 1e-15));
        let a = 1.5f64.sqrt();
        let e = hopf(&ChartPoint::from_array([a, 0.0, 0.0, a]), &p);
        assert!(close(&[e.w1, e.w2, e.w3, e.w4], &[1.0, 0.0, 0.0, 1.0], 1e-15));
    }

    #[test]
    fn section_examples() {
        let p = unit();
        let s = section(&SpherePoint::SOUTH_POLE, &p).unwrap();
        assert!(close(&s.as_array(), &[SQRT3, 0.0, 0.0, 0.0], 1e-15));
        let lifted = lift(&s, &p);
        let canon = canonical_relative_equilibrium(&p);
        assert!(close(&lifted.to_flat(), &canon.to_flat(), 1e-15));

        let e = section(&SpherePoint::new([1.0, 0.0, 0.0]).unwrap(), &p).unwrap();
        let a = 1.5f64.sqrt();
        assert!(close(&e.as_array(), &[a, 0.0, 0.0, a], 1e-15));

        assert!(matches!(section(&SpherePoint::NORTH_POLE, &p), Err(Error::NearNorthPole(_))));
    }

    #[test]
    fn rotated_section_covers_north_pole() {
        let p = unit();
        let c = section_rotated(&SpherePoint::NORTH_POLE, &p).unwrap();
        let h = hopf(&c, &p);
        assert!(close(&[h.w1, h.w2, h.w3, h.w4], &[0.0, 0.0, 1.0, 1.0], 1e-15));
        let lifted = lift_sphere_point(&SpherePoint::NORTH_POLE, &p);
        assert!(close(&lifted.to_flat(), &mirror_relative_equilibrium(&p).to_flat(), 1e-15));
    }

    #[test]
    fn l_functional_examples() {
        let l = l_functionals(&SpherePoint::SOUTH_POLE);
        assert_eq!([l.l12, l.l13, l.l23, l.l41, l.l42, l.l43], [6.0, 6.0, 6.0, 2.0, 2.0, 2.0]);
        assert_eq!(l_functionals(&SpherePoint::new([0.0, 1.0, 0.0]).unwrap()).l23, 0.0);

        let s = l_functionals(&saddle_w());
        assert_abs_diff_eq!(s.l41, 2.0 * SQRT3, epsilon = 1e-14);
        assert_abs_diff_eq!(s.l42, 3.0 - SQRT3, epsilon = 1e-14);
        assert_abs_diff_eq!(s.l43, 3.0 - SQRT3, epsilon = 1e-14);
        assert_abs_diff_eq!(s.l12, 3.0 * (SQRT3 + 1.0), epsilon = 1e-14);
        assert_abs_diff_eq!(s.l13, 3.0 * (SQRT3 + 1.0), epsilon = 1e-14);
        assert_abs_diff_eq!(s.l23, 6.0 * (2.0 - SQRT3), epsilon = 1e-14);
        assert_abs_diff_eq!(s.l23 / 2.0, 6.0 - 3.0 * SQRT3, epsilon = 1e-14);
    }

    #[test]
    fn saddle_lift_is_the_unstable_equilibrium() {
        let p = unit();
        let lifted = lift_sphere_point(&saddle_w(), &p);
        let expected = saddle_relative_equilibrium(&p);
        // Same configuration up to rotation: compare pairwise distances.
        for i in 0..4 {
            for j in 0..4 {
                let d = |c: &PlanarConfig| {
                    let a = c.positions()[i];
                    let b = c.positions()[j];
                    (a[0] - b[0]).hypot(a[1] - b[1])
                };
                assert_abs_diff_eq!(d(&lifted), d(&expected), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn reduced_energy_examples() {
        let p = unit();
        let hc = -3.0 * 3f64.ln() / (4.0 * PI);
        assert_abs_diff_eq!(reduced_hamiltonian_w(&SpherePoint::SOUTH_POLE, &p).unwrap(), hc, epsilon = 1e-15);
        assert_eq!(reduced_hamiltonian_w(&SpherePoint::new([0.0, 1.0, 0.0]).unwrap(), &p), Extended::PlusInfinity);
        assert_eq!(reduced_hamiltonian_w(&SpherePoint::new([0.0, -1.0, 0.0]).unwrap(), &p), Extended::MinusInfinity);

        let pole = invariants(SpherePoint::SOUTH_POLE);
        assert_abs_diff_eq!(reduced_hamiltonian_p(&pole, &p).unwrap().unwrap(), hc, epsilon = 1e-15);
        let plus = InvariantPoint { p1: 0.0, p2: -1.0, p3: 0.0, p4: 1.0 };
        assert_eq!(reduced_hamiltonian_p(&plus, &p).unwrap(), Extended::PlusInfinity);

        let hs = reduced_hamiltonian_p(&invariants(saddle_w()), &p).unwrap().unwrap();
        let full = dynamics::hamiltonian(&saddle_relative_equilibrium(&p)).unwrap();
        assert_abs_diff_eq!(hs, full, epsilon = 1e-14);
        // (1/4π) ln((1/64)(24√3 − 36)³/108)
        let closed = ((24.0 * SQRT3 - 36.0).powi(3) / 64.0 / 108.0).ln() / (4.0 * PI);
        assert_abs_diff_eq!(hs, closed, epsilon = 1e-14);
    }

    #[test]
    fn p_form_rejects_off_relation_points() {
        let bad = InvariantPoint { p1: 0.5, p2: 0.5, p3: 0.5, p4: 1.0 };
        assert!(matches!(reduced_hamiltonian_p(&bad, &unit()), Err(Error::RelationViolation { .. })));
        let off_sphere = InvariantPoint { p1: 0.0, p2: 0.0, p3: 0.0, p4: 2.0 };
        assert!(reduced_hamiltonian_p(&off_sphere, &unit()).is_err());
    }

    #[test]
    fn permutation_matrices() {
        assert_eq!(permutation_matrix(S3::T23), [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]]);
        for g in S3::ALL {
            let m = g.matrix();
            let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            assert_abs_diff_eq!(det, 1.0, epsilon = 1e-15);
        }
        let c = S3::C123.matrix();
        let mut v = [[0.0; 3]; 3];
        for (i, row) in v.iter_mut().enumerate() {
            let mut e = [0.0; 3];
            e[i] = 1.0;
            let r = mat_vec(&c, mat_vec(&c, mat_vec(&c, e)));
            *row = r;
        }
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(v[i][j], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn s3_group_structure() {
        for g in S3::ALL {
            assert_eq!(g.compose(g.inverse()), S3::E);
        }
        assert_eq!(S3::C123.compose(S3::C123), S3::C132);
        assert_eq!(S3::T12.compose(S3::T23), S3::C123);
    }

    /// Brute-force determination of the composition convention: compare
    /// `hopf∘to_chart(g·config)` with both `σ_g w` and `σ_{g⁻¹} w`.
    #[test]
    fn sigma_convention_oracle() {
        let p = unit();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut hom_err: f64 = 0.0;
        let mut anti_err: f64 = 0.0;
        for _ in 0..50 {
            let config = sample_level_set(&p, rng.random());
            let w = hopf(&to_chart(&config, &p).unwrap(), &p).w();
            for g in S3::ALL {
                let wg = hopf(&to_chart(&g.permute(&config), &p).unwrap(), &p).w();
                let direct = mat_vec(&g.matrix(), w);
                let inverse = mat_vec(&g.inverse().matrix(), w);
                hom_err = hom_err.max((0..3).map(|k| (wg[k] - direct[k]).abs()).fold(0.0, f64::max));
                anti_err = anti_err.max((0..3).map(|k| (wg[k] - inverse[k]).abs()).fold(0.0, f64::max));
            }
        }
        let homomorphism = hom_err < 1e-12;
        let anti = anti_err < 1e-12;
        assert!(homomorphism != anti, "exactly one convention must fit ({hom_err:e}, {anti_err:e})");
        assert_eq!(homomorphism, SIGMA_IS_HOMOMORPHISM);
    }

    #[test]
    fn invariant_examples() {
        let s = invariants(SpherePoint::SOUTH_POLE);
        assert_eq!([s.p1, s.p2, s.p3, s.p4], [1.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.relation_residual(), 0.0);
        let c = invariants([0.0, 1.0, 0.0]);
        assert_eq!([c.p1, c.p2, c.p3, c.p4], [0.0, -1.0, 0.0, 1.0]);
        let d = invariants(saddle_w());
        assert_abs_diff_eq!(d.p1, 2.0 * SQRT3 - 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.p2, 10.0 - 6.0 * SQRT3, epsilon = 1e-15);
        assert_abs_diff_eq!(d.p3, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.p4, 1.0, epsilon = 1e-15);
        assert!(d.relation_residual().abs() < 1e-14);
    }

    #[test]
    fn invariants_match_direct_polynomials() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let w: [f64; 3] = [0; 3].map(|_| rng.random_range(-1.5..1.5));
            let [w1, w2, w3] = w;
            let p = invariants(w);
            assert_abs_diff_eq!(p.p1, w3 * w3, epsilon = 1e-14);
            assert_abs_diff_eq!(p.p2, w2 * (3.0 * w1 * w1 - w2 * w2), epsilon = 1e-13);
            assert_abs_diff_eq!(p.p3, w1 * w3 * (3.0 * w2 * w2 - w1 * w1), epsilon = 1e-13);
            assert_abs_diff_eq!(p.p4, w1 * w1 + w2 * w2 + w3 * w3, epsilon = 1e-14);
        }
    }

    #[test]
    fn deform_examples() {
        for s in [1.0, -1.0] {
            let q = deform(&InvariantPoint { p1: 0.0, p2: s, p3: 0.0, p4: 1.0 });
            assert_eq!([q.q1, q.q2, q.q3], [0.0, s, 0.0]);
        }
        let q = deform(&invariants(SpherePoint::SOUTH_POLE));
        assert_eq!([q.q1, q.q2, q.q3], [0.75, 0.0, 0.0]);
        let d = deform(&invariants(saddle_w()));
        // p1 − (1 − p2²)/4 with p1 = 2√3 − 3, p2 = 10 − 6√3
        let p2 = 10.0 - 6.0 * SQRT3;
        assert_abs_diff_eq!(d.q1, 2.0 * SQRT3 - 3.0 - (1.0 - p2 * p2) / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.q1, 0.252577388071436, epsilon = 1e-14);
    }

    #[test]
    fn cylinder_examples() {
        let c = cylinder(&DeformedPoint { q1: 0.75, q2: 0.0, q3: 0.0 });
        assert_eq!(c.theta, 0.0);
        assert_abs_diff_eq!(c.h.unwrap(), 0.5 * 0.75f64.ln(), epsilon = 1e-15);

        let s = cylinder(&deform(&invariants(saddle_w())));
        assert_abs_diff_eq!(s.theta, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.h.unwrap(), -0.0760592553532459, epsilon = 1e-13);

        assert_eq!(cylinder(&DeformedPoint { q1: 0.0, q2: 1.0, q3: 0.0 }).h, Extended::MinusInfinity);
        assert_eq!(cylinder(&DeformedPoint { q1: 0.0, q2: -1.0, q3: 0.0 }).h, Extended::PlusInfinity);

        let back = cylinder(&DeformedPoint { q1: -0.1, q2: 0.0, q3: -1e-3 });
        assert!(back.theta > PI && back.theta < TAU);
    }

    #[test]
    fn stereographic_cylinder_has_infinite_ends() {
        let center = cylinder_stereographic(&DeformedPoint { q1: 0.75, q2: 0.0, q3: 0.0 });
        assert_abs_diff_eq!(center.h.unwrap(), 0.0, epsilon = 1e-15);
        let mut last = f64::NEG_INFINITY;
        for eps in [1e-2, 1e-4, 1e-6] {
            let up = cylinder_stereographic(&DeformedPoint { q1: eps, q2: -1.0, q3: 0.0 }).h.unwrap();
            assert!(up > last);
            last = up;
            let down = cylinder_stereographic(&DeformedPoint { q1: eps, q2: 1.0, q3: 0.0 }).h.unwrap();
            assert!(down < -3.0);
        }
        assert!(last > 10.0);
    }

    #[test]
    fn vector_field_examples() {
        let p = unit();
        let v = reduced_vector_field(&SpherePoint::SOUTH_POLE, &p).unwrap();
        assert!(norm2(v).sqrt() < 1e-16);
        for sign in [1.0, -1.0] {
            let w2 = SQRT3 - 1.0;
            let w = SpherePoint::new([0.0, w2, sign * (1.0 - w2 * w2).sqrt()]).unwrap();
            assert!(norm2(reduced_vector_field(&w, &p).unwrap()).sqrt() < 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let w = sample_sphere(&mut rng);
            if let Ok(x) = reduced_vector_field(&w, &p) {
                assert!(dot(x, w.coords()).abs() < 1e-14);
            }
        }
        assert!(matches!(
            reduced_vector_field(&SpherePoint::new([0.0, 1.0, 0.0]).unwrap(), &p),
            Err(Error::NearCollision { .. })
        ));
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let p = unit();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h = 1e-5;
        for _ in 0..50 {
            let w = sample_sphere(&mut rng).coords();
            if l_functionals_of(w).min() < 0.1 {
                continue;
            }
            let g = reduced_gradient(w, &p);
            let hess = reduced_hessian(w, &p);
            for i in 0..2 {
                let mut a = w;
                let mut b = w;
                a[i] += h;
                b[i] -= h;
                let fd = (reduced_hamiltonian_of(a, &p).unwrap() - reduced_hamiltonian_of(b, &p).unwrap()) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-7 * (1.0 + g[i].abs()));
                let ga = reduced_gradient(a, &p);
                let gb = reduced_gradient(b, &p);
                for j in 0..2 {
                    let fd2 = (ga[j] - gb[j]) / (2.0 * h);
                    assert!((fd2 - hess[i][j]).abs() < 1e-6 * (1.0 + hess[i][j].abs()));
                }
            }
        }
    }

    #[test]
    fn level_set_samples() {
        let p = SystemParams::new(2.0, 1.3).unwrap();
        for seed in 0..20 {
            let c = sample_level_set(&p, seed);
            assert!(dynamics::momentum(&c).distance(&p.mu_e()) < 1e-12);
            let z = c.positions();
            assert!((z[0][0] + z[1][0] + z[2][0]).abs() < 1e-14);
            assert!((z[0][1] + z[1][1] + z[2][1]).abs() < 1e-14);
            assert_eq!(c, sample_level_set(&p, seed));
        }
        assert_ne!(sample_level_set(&p, 1), sample_level_set(&p, 2));
    }

    #[test]
    fn sphere_point_validation() {
        assert!(SpherePoint::new([1.0, 1.0, 0.0]).is_err());
        assert!(SpherePoint::normalized([0.0; 3]).is_err());
        let w = SpherePoint::normalized([3.0, 0.0, 4.0]).unwrap();
        assert_eq!(w.coords(), [0.6, 0.0, 0.8]);
        let back: SpherePoint = serde_json::from_str(&serde_json::to_string(&w).unwrap()).unwrap();
        assert_eq!(back, w);
        assert!(serde_json::from_str::<SpherePoint>("[1.0, 1.0, 1.0]").is_err());
    }
}
