//! Full phase-space model of `N` point vortices in the plane.
//!
//! Positions are stored as `[x, y]` pairs. The symplectic form is
//! `Σ Γ_n dx_n ∧ dy_n`, so Hamilton's equations read
//! `Γ_n ẋ_n = ∂H/∂y_n`, `Γ_n ẏ_n = −∂H/∂x_n`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Circulation `Γ` and ring radius `α` of the composite-particle system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    gamma: f64,
    alpha: f64,
}

impl SystemParams {
    pub fn new(gamma: f64, alpha: f64) -> Result<Self> {
        if !gamma.is_finite() || gamma == 0.0 {
            return Err(Error::InvalidParameter(format!("gamma must be finite and nonzero, got {gamma}")));
        }
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::InvalidParameter(format!("alpha must be finite and positive, got {alpha}")));
        }
        Ok(Self { gamma, alpha })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Momentum of the stable relative equilibrium, `(Γα²/2, 0, 0)`.
    pub fn mu_e(&self) -> MomentumValue {
        MomentumValue {
            rot: self.gamma * self.alpha * self.alpha / 2.0,
            tr: [0.0, 0.0],
        }
    }

    /// Rotation rate of the stable relative equilibrium, `Γ/(3πα²)`.
    pub fn theta_dot_e(&self) -> f64 {
        self.gamma / (3.0 * PI * self.alpha * self.alpha)
    }

    /// Strengths `(−Γ/3, −Γ/3, −Γ/3, Γ)`.
    pub fn strengths(&self) -> Strengths {
        let g = self.gamma;
        Strengths(vec![-g / 3.0, -g / 3.0, -g / 3.0, g])
    }
}

impl Default for SystemParams {
    fn default() -> Self {
        Self { gamma: 3.0, alpha: 1.0 }
    }
}

/// Vortex circulations, all nonzero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Strengths(Vec<f64>);

impl Strengths {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("at least one vortex is required".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v == 0.0) {
            return Err(Error::InvalidParameter(format!("strengths must be finite and nonzero, got {v}")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// A point of the full phase space: vortex positions with their strengths.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarConfig {
    positions: Vec<Point>,
    strengths: Strengths,
}

impl PlanarConfig {
    pub fn new(positions: Vec<Point>, strengths: Strengths) -> Result<Self> {
        if positions.len() != strengths.len() {
            return Err(Error::InvalidParameter(format!(
                "{} positions for {} strengths",
                positions.len(),
                strengths.len()
            )));
        }
        if positions.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("positions must be finite".into()));
        }
        Ok(Self { positions, strengths })
    }

    /// Builds a configuration from a flat `[x1, y1, x2, y2, ...]` state.
    pub fn from_flat(state: &[f64], strengths: Strengths) -> Result<Self> {
        let positions = state.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        Self::new(positions, strengths)
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn strengths(&self) -> &Strengths {
        &self.strengths
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.positions.iter().flatten().copied().collect()
    }

    pub fn translated(&self, by: Point) -> Self {
        Self {
            positions: self.positions.iter().map(|p| [p[0] + by[0], p[1] + by[1]]).collect(),
            strengths: self.strengths.clone(),
        }
    }

    /// Rotates every position counterclockwise by `angle` about the origin.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            positions: self.positions.iter().map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]]).collect(),
            strengths: self.strengths.clone(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            positions: self.positions.iter().map(|p| [factor * p[0], factor * p[1]]).collect(),
            strengths: self.strengths.clone(),
        }
    }

    /// Smallest pairwise distance and the pair attaining it.
    pub fn min_distance(&self) -> Option<(f64, (usize, usize))> {
        min_pair_distance(&self.to_flat())
    }
}

/// `(rot, tr)` in the identification of `se(2)*` with `R³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumValue {
    pub rot: f64,
    pub tr: [f64; 2],
}

impl MomentumValue {
    pub fn as_array(&self) -> [f64; 3] {
        [self.rot, self.tr[0], self.tr[1]]
    }

    /// Max-norm distance to another momentum value.
    pub fn distance(&self, other: &MomentumValue) -> f64 {
        let a = self.as_array();
        let b = other.as_array();
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }
}

fn dist2(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

pub(crate) fn min_pair_distance(flat: &[f64]) -> Option<(f64, (usize, usize))> {
    let n = flat.len() / 2;
    let mut best: Option<(f64, (usize, usize))> = None;
    for i in 0..n {
        for j in i + 1..n {
            let d = dist2([flat[2 * i], flat[2 * i + 1]], [flat[2 * j], flat[2 * j + 1]]).sqrt();
            if best.is_none_or(|(b, _)| d < b) {
                best = Some((d, (i, j)));
            }
        }
    }
    best
}

fn check_distinct(config: &PlanarConfig) -> Result<()> {
    let p = config.positions();
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if dist2(p[i], p[j]) == 0.0 {
                return Err(Error::Collision(i, j));
            }
        }
    }
    Ok(())
}

/// `H = −(1/4π) Σ_{m<n} Γ_n Γ_m ln|z_n − z_m|²`.
pub fn hamiltonian(config: &PlanarConfig) -> Result<f64> {
    check_distinct(config)?;
    let p = config.positions();
    let g = config.strengths().as_slice();
    let mut sum = 0.0;
    for n in 0..p.len() {
        for m in 0..n {
            sum += g[n] * g[m] * dist2(p[n], p[m]).ln();
        }
    }
    Ok(-sum / (4.0 * PI))
}

/// `J = −Σ Γ_n (|z_n|²/2, i z_n)`; the complex translational part is
/// returned as the real pair `(Σ Γ_n y_n, −Σ Γ_n x_n)`.
pub fn momentum(config: &PlanarConfig) -> MomentumValue {
    let mut rot = 0.0;
    let mut tx = 0.0;
    let mut ty = 0.0;
    for (p, g) in config.positions().iter().zip(config.strengths().as_slice()) {
        rot -= g * (p[0] * p[0] + p[1] * p[1]) / 2.0;
        tx += g * p[1];
        ty -= g * p[0];
    }
    MomentumValue { rot, tr: [tx, ty] }
}

/// `ż_n = (i/2π) Σ_{m≠n} Γ_m (z_n − z_m)/|z_n − z_m|²`.
pub fn velocity_field(config: &PlanarConfig) -> Result<Vec<Point>> {
    check_distinct(config)?;
    let flat = config.to_flat();
    let mut out = vec![0.0; flat.len()];
    velocity_into(config.strengths().as_slice(), &flat, &mut out);
    Ok(out.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
}

/// Velocity on flat state vectors; no collision check.
pub(crate) fn velocity_into(strengths: &[f64], state: &[f64], out: &mut [f64]) {
    let n = strengths.len();
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let dx = state[2 * i] - state[2 * j];
            let dy = state[2 * i + 1] - state[2 * j + 1];
            let inv = 1.0 / (2.0 * PI * (dx * dx + dy * dy));
            // i·(dx + i dy) = (−dy, dx)
            out[2 * i] -= strengths[j] * dy * inv;
            out[2 * i + 1] += strengths[j] * dx * inv;
            out[2 * j] += strengths[i] * dy * inv;
            out[2 * j + 1] -= strengths[i] * dx * inv;
        }
    }
}

/// Central vortex at the origin, three outer vortices on the circle of
/// radius `α` at angles `0, ±2π/3`.
pub fn canonical_relative_equilibrium(params: &SystemParams) -> PlanarConfig {
    let a = params.alpha();
    let s = 3f64.sqrt() / 2.0;
    PlanarConfig {
        positions: vec![[a, 0.0], [-a / 2.0, a * s], [-a / 2.0, -a * s], [0.0, 0.0]],
        strengths: params.strengths(),
    }
}

/// The canonical equilibrium with `z2` and `z3` exchanged.
pub fn mirror_relative_equilibrium(params: &SystemParams) -> PlanarConfig {
    let c = canonical_relative_equilibrium(params);
    let p = c.positions();
    PlanarConfig {
        positions: vec![p[0], p[2], p[1], p[3]],
        strengths: params.strengths(),
    }
}

/// The unstable relative equilibrium whose reduced image is the saddle
/// `(0, √3−1, −√(2√3−3))`.
pub fn saddle_relative_equilibrium(params: &SystemParams) -> PlanarConfig {
    let a = params.alpha();
    let r4 = 3f64.powf(0.25);
    let im = a / (2.0 * 2f64.sqrt()) * (3f64.sqrt() - 3.0);
    PlanarConfig {
        positions: vec![[a * r4, 0.0], [-a / 2.0 * r4, im], [-a / 2.0 * r4, -im], [0.0, 0.0]],
        strengths: params.strengths(),
    }
}

/// On-disk configuration: `{"gamma", "alpha", "strengths"?, "positions"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    pub gamma: f64,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strengths: Option<Vec<f64>>,
    pub positions: Vec<Point>,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<(SystemParams, PlanarConfig)> {
        let file: ConfigFile = serde_json::from_str(text)?;
        file.into_parts()
    }

    pub fn into_parts(self) -> Result<(SystemParams, PlanarConfig)> {
        let params = SystemParams::new(self.gamma, self.alpha)?;
        let strengths = match self.strengths {
            Some(s) => Strengths::new(s)?,
            None => params.strengths(),
        };
        Ok((params, PlanarConfig::new(self.positions, strengths)?))
    }

    pub fn from_parts(params: &SystemParams, config: &PlanarConfig) -> Self {
        Self {
            gamma: params.gamma(),
            alpha: params.alpha(),
            strengths: Some(config.strengths().as_slice().to_vec()),
            positions: config.positions().to_vec(),
        }
    }
}
