//! Critical points of the reduced Hamiltonian on the sphere.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::dynamics::SystemParams;
use crate::reduction::{
    self, cross, dot, l_functionals_of, norm2, reduced_gradient, reduced_hamiltonian_of, SpherePoint, S3,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquilibriumKind {
    Center,
    Saddle,
    /// A zero tangential Hessian eigenvalue; not classified.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    #[serde(rename = "w")]
    pub point: SpherePoint,
    pub kind: EquilibriumKind,
    pub energy: f64,
    pub hessian_eigs: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalSearch {
    /// Seeds in the polar direction.
    pub n_theta: usize,
    /// Seeds in the azimuthal direction.
    pub n_phi: usize,
    /// Great-circle distance below which two roots are merged.
    pub dedup_distance: f64,
    pub max_iterations: usize,
}

impl Default for CriticalSearch {
    fn default() -> Self {
        Self { n_theta: 32, n_phi: 64, dedup_distance: 1e-6, max_iterations: 80 }
    }
}

/// Orthonormal basis of the tangent plane at `w`.
pub fn tangent_basis(w: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let axis = if w[0].abs() <= w[1].abs() && w[0].abs() <= w[2].abs() {
        [1.0, 0.0, 0.0]
    } else if w[1].abs() <= w[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let e1 = cross(axis, w);
    let n = norm2(e1).sqrt();
    let e1 = e1.map(|v| v / n);
    (e1, cross(w, e1))
}

/// Gradient of the reduced energy in the tangent basis at `w`.
pub fn tangential_gradient(w: [f64; 3], params: &SystemParams) -> [f64; 2] {
    let g = reduced_gradient(w, params);
    let (e1, e2) = tangent_basis(w);
    [dot(g, e1), dot(g, e2)]
}

/// Riemannian Hessian `Pᵀ∇²H P − (w·∇H) I` in the tangent basis at `w`.
pub fn tangential_hessian(w: [f64; 3], params: &SystemParams) -> [[f64; 2]; 2] {
    let hess = reduction::reduced_hessian(w, params);
    let radial = dot(w, reduced_gradient(w, params));
    let (e1, e2) = tangent_basis(w);
    let basis = [e1, e2];
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        let hv = reduction::mat_vec(&hess, basis[i]);
        for j in 0..2 {
            out[j][i] = dot(basis[j], hv) - if i == j { radial } else { 0.0 };
        }
    }
    out
}

fn symmetric_eigenvalues(m: [[f64; 2]; 2]) -> [f64; 2] {
    let a = m[0][0];
    let d = m[1][1];
    let b = 0.5 * (m[0][1] + m[1][0]);
    let mean = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    [mean - r, mean + r]
}

fn energy_scale(params: &SystemParams) -> f64 {
    params.gamma() * params.gamma() / (36.0 * std::f64::consts::PI)
}

fn classify(w: SpherePoint, params: &SystemParams) -> EquilibriumReport {
    let eigs = symmetric_eigenvalues(tangential_hessian(w.coords(), params));
    let tol = 1e-9 * energy_scale(params);
    let kind = if eigs.iter().any(|e| e.abs() <= tol) {
        EquilibriumKind::Degenerate
    } else if eigs[0].signum() == eigs[1].signum() {
        EquilibriumKind::Center
    } else {
        EquilibriumKind::Saddle
    };
    EquilibriumReport {
        point: w,
        kind,
        energy: reduced_hamiltonian_of(w.coords(), params).to_f64(),
        hessian_eigs: eigs,
    }
}

/// Projected Newton on the tangential gradient with backtracking.
fn newton(seed: [f64; 3], params: &SystemParams, max_iterations: usize) -> Option<[f64; 3]> {
    let tol = 1e-13 * energy_scale(params);
    let norm = |g: [f64; 2]| g[0].hypot(g[1]);
    let mut w = seed;
    let mut g = tangential_gradient(w, params);
    for _ in 0..max_iterations {
        if norm(g) <= tol {
            return Some(w);
        }
        let h = tangential_hessian(w, params);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let d = [
            -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
            -(-h[1][0] * g[0] + h[0][0] * g[1]) / det,
        ];
        let (e1, e2) = tangent_basis(w);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = [0, 1, 2].map(|k| w[k] + step * (d[0] * e1[k] + d[1] * e2[k]));
            let n = norm2(trial).sqrt();
            let trial = trial.map(|v| v / n);
            if l_functionals_of(trial).min() > 1e-9 {
                let gt = tangential_gradient(trial, params);
                if norm(gt) < norm(g) {
                    w = trial;
                    g = gt;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            return (norm(g) <= 1e3 * tol).then_some(w);
        }
    }
    (norm(g) <= tol).then_some(w)
}

/// Grid-seeded projected Newton search; duplicates merged.
pub fn find_critical_points(params: &SystemParams) -> Vec<EquilibriumReport> {
    find_critical_points_with(params, &CriticalSearch::default())
}

pub fn find_critical_points_with(params: &SystemParams, search: &CriticalSearch) -> Vec<EquilibriumReport> {
    let mut roots: Vec<SpherePoint> = Vec::new();
    let mut failures = 0usize;
    for i in 0..search.n_theta {
        let theta = std::f64::consts::PI * (i as f64 + 0.5) / search.n_theta as f64;
        for j in 0..search.n_phi {
            let phi = std::f64::consts::TAU * (j as f64 + 0.5) / search.n_phi as f64;
            let seed = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
            if l_functionals_of(seed).min() <= 1e-6 {
                continue;
            }
            match newton(seed, params, search.max_iterations).and_then(|w| SpherePoint::normalized(w).ok()) {
                Some(w) => {
                    if !roots.iter().any(|r| r.angle_to(&w) < search.dedup_distance) {
                        roots.push(w);
                    }
                }
                None => {
                    failures += 1;
                    debug!("Newton did not converge from seed {seed:?}");
                }
            }
        }
    }
    if failures > 0 {
        debug!("{failures} seeds failed to converge");
    }
    let mut reports: Vec<EquilibriumReport> = roots.into_iter().map(|w| classify(w, params)).collect();
    reports.sort_by(|a, b| {
        let key = |r: &EquilibriumReport| (r.kind != EquilibriumKind::Center, r.point.coords());
        let (ka, wa) = key(a);
        let (kb, wb) = key(b);
        ka.cmp(&kb).then_with(|| {
            wa.iter()
                .zip(&wb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    reports
}

/// The saddle `(0, √3 − 1, −√(2√3 − 3))`.
pub fn base_saddle() -> SpherePoint {
    let w2 = 3f64.sqrt() - 1.0;
    SpherePoint::normalized([0.0, w2, -(1.0 - w2 * w2).sqrt()]).expect("unit vector")
}

/// The six saddles: the permutation orbit of [`base_saddle`].
pub fn saddle_points() -> Vec<SpherePoint> {
    let base = base_saddle();
    S3::ALL.iter().map(|g| g.act(&base)).collect()
}

/// Reduced energy shared by the six saddles.
pub fn saddle_energy(params: &SystemParams) -> f64 {
    reduced_hamiltonian_of(base_saddle().coords(), params).to_f64()
}

/// Reduced energy of the two poles, the maximum of the center family.
pub fn center_energy(params: &SystemParams) -> f64 {
    reduced_hamiltonian_of(SpherePoint::SOUTH_POLE.coords(), params).to_f64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::{invariants, reduced_hamiltonian_w};
    use approx::assert_abs_diff_eq;

    fn unit() -> SystemParams {
        SystemParams::new(3.0, 1.0).unwrap()
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        for w in [[0.0, 0.0, 1.0], [0.6, 0.0, 0.8], [0.0, -1.0, 0.0], [0.48, 0.6, 0.64]] {
            let (a, b) = tangent_basis(w);
            assert_abs_diff_eq!(dot(a, a), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(dot(b, b), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(dot(a, b), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(dot(a, w), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(dot(b, w), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn census_of_critical_points() {
        let p = unit();
        let found = find_critical_points(&p);
        assert_eq!(found.len(), 8);
        let centers: Vec<_> = found.iter().filter(|r| r.kind == EquilibriumKind::Center).collect();
        let saddles: Vec<_> = found.iter().filter(|r| r.kind == EquilibriumKind::Saddle).collect();
        assert_eq!(centers.len(), 2);
        assert_eq!(saddles.len(), 6);
        for c in &centers {
            assert_abs_diff_eq!(c.point.coords()[2].abs(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(c.energy, center_energy(&p), epsilon = 1e-12);
        }
        for s in &saddles {
            let nearest = saddle_points().iter().map(|x| x.angle_to(&s.point)).fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-8);
        }
        assert!(center_energy(&p) > saddle_energy(&p));
    }

    #[test]
    fn hessian_signs_match_finite_differences() {
        let p = unit();
        let step = 1e-5;
        for w in [SpherePoint::SOUTH_POLE, SpherePoint::NORTH_POLE].into_iter().chain(saddle_points()) {
            let c = w.coords();
            let (e1, e2) = tangent_basis(c);
            let h = |a: f64, b: f64| {
                let v = [0, 1, 2].map(|k| c[k] + a * e1[k] + b * e2[k]);
                let n = norm2(v).sqrt();
                reduced_hamiltonian_w(&SpherePoint::normalized(v.map(|x| x / n)).unwrap(), &p).unwrap()
            };
            let h0 = h(0.0, 0.0);
            let haa = (h(step, 0.0) - 2.0 * h0 + h(-step, 0.0)) / (step * step);
            let hbb = (h(0.0, step) - 2.0 * h0 + h(0.0, -step)) / (step * step);
            let hab = (h(step, step) - h(step, -step) - h(-step, step) + h(-step, -step)) / (4.0 * step * step);
            let fd = symmetric_eigenvalues([[haa, hab], [hab, hbb]]);
            let an = symmetric_eigenvalues(tangential_hessian(c, &p));
            for k in 0..2 {
                assert!((fd[k] - an[k]).abs() < 1e-4 * (1.0 + an[k].abs()), "{fd:?} vs {an:?}");
            }
            let is_pole = c[2].abs() > 0.99;
            assert_eq!(fd[0].signum() == fd[1].signum(), is_pole);
        }
    }

    #[test]
    fn saddle_energy_values() {
        let p = unit();
        let closed = ((24.0 * 3f64.sqrt() - 36.0).powi(3) / 64.0 / 108.0).ln() / (4.0 * std::f64::consts::PI);
        assert_abs_diff_eq!(saddle_energy(&p), closed, epsilon = 1e-14);
        for s in saddle_points() {
            assert_abs_diff_eq!(reduced_hamiltonian_w(&s, &p).unwrap(), saddle_energy(&p), epsilon = 1e-14);
        }
        let p2 = SystemParams::new(3.0, 2.0).unwrap();
        let shift = 9.0 / (3.0 * std::f64::consts::PI) * 2f64.ln();
        assert_abs_diff_eq!(saddle_energy(&p2) - saddle_energy(&p), shift, epsilon = 1e-14);
    }

    #[test]
    fn collapsed_images() {
        let p = unit();
        let found = find_critical_points(&p);
        let mut images: Vec<[f64; 3]> = Vec::new();
        for r in &found {
            let q = invariants(r.point);
            let v = [q.p1, q.p2, q.p3];
            if !images.iter().any(|u| u.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-8)) {
                images.push(v);
            }
        }
        assert_eq!(images.len(), 2);
    }
}
