//! Seeded property suites over the whole chain, as run by `vortexred verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::critical::{tangent_basis, tangential_hessian};
use crate::analysis::{closed_orbit, find_critical_points, find_critical_points_with, saddle_points, CriticalSearch};
use crate::dynamics::{
    canonical_relative_equilibrium, hamiltonian, momentum, velocity_field, PlanarConfig, SystemParams,
};
use crate::integrator::ode::{OdeOptions, Output};
use crate::integrator::{integrate, invariant_drift, IntegrationSettings, TrajectoryStatus};
use crate::reduction::{
    hopf, integrate_reduced, invariants, l_functionals, lift, reduce_config, reduced_hamiltonian_p,
    reduced_hamiltonian_w, sample_level_set, sample_sphere, section, to_chart, ChartPoint, SpherePoint, S3,
};
use crate::Strengths;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Suite = fn(u64) -> std::result::Result<String, String>;

fn verdict(ok: bool, detail: String) -> std::result::Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rng_for(seed: u64, suite: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ suite)
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

fn max_abs3(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).abs()).fold(0.0, f64::max)
}

fn unit() -> SystemParams {
    SystemParams::new(3.0, 1.0).expect("valid parameters")
}

/// Four vortices with the distinguished strengths, well separated.
fn random_config(rng: &mut ChaCha8Rng, params: &SystemParams) -> PlanarConfig {
    loop {
        let positions = (0..4).map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
        let c = PlanarConfig::new(positions, params.strengths()).expect("finite positions");
        if c.min_distance().is_some_and(|(d, _)| d > 0.05) {
            return c;
        }
    }
}

fn flow_sphere_point(rng: &mut ChaCha8Rng) -> SpherePoint {
    loop {
        let w = sample_sphere(rng);
        if w.coords()[2] <= 0.99 && l_functionals(&w).min() > 1e-2 {
            return w;
        }
    }
}

fn momentum_translation(seed: u64) -> std::result::Result<String, String> {
    let p = unit();
    let mut rng = rng_for(seed, 1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let c = random_config(&mut rng, &p);
        let b = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let j = momentum(&c);
        let jt = momentum(&c.translated(b));
        // Σ Γ = 0: the translational part is fixed, the rotational part
        // picks up the coadjoint shift.
        let expected = j.rot + b[0] * j.tr[1] - b[1] * j.tr[0];
        worst = worst.max((jt.rot - expected).abs()).max(max_abs3(jt.as_array(), [jt.rot, j.tr[0], j.tr[1]]));
        let on_level = sample_level_set(&p, rng.random());
        worst = worst.max(momentum(&on_level).distance(&momentum(&on_level.translated(b))));
    }
    verdict(worst <= 1e-12, format!("max deviation {worst:.1e}"))
}

fn energy_along_flow(seed: u64) -> std::result::Result<String, String> {
    let p = unit();
    let mut rng = rng_for(seed, 2);
    let step = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let c = random_config(&mut rng, &p);
        let v = velocity_field(&c).map_err(|e| e.to_string())?;
        let shifted = |s: f64| {
            let pos = c.positions().iter().zip(&v).map(|(z, u)| [z[0] + s * u[0], z[1] + s * u[1]]).collect();
            hamiltonian(&PlanarConfig::new(pos, c.strengths().clone()).unwrap()).unwrap()
        };
        worst = worst.max(((shifted(step) - shifted(-step)) / (2.0 * step)).abs());
    }
    verdict(worst < 1e-7, format!("max |dH/dt| {worst:.1e}"))
}

fn gradient_consistency(seed: u64) -> std::result::Result<String, String> {
    let p = unit();
    let mut rng = rng_for(seed, 3);
    let step = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let c = random_config(&mut rng, &p);
        let v = velocity_field(&c).map_err(|e| e.to_string())?;
        let flat = c.to_flat();
        let h_at = |k: usize, s: f64| {
            let mut f = flat.clone();
            f[k] += s;
            hamiltonian(&PlanarConfig::from_flat(&f, c.strengths().clone()).unwrap()).unwrap()
        };
        for n in 0..4 {
            let g = c.strengths().as_slice()[n];
            let dx = (h_at(2 * n, step) - h_at(2 * n, -step)) / (2.0 * step);
            let dy = (h_at(2 * n + 1, step) - h_at(2 * n + 1, -step)) / (2.0 * step);
            worst = worst.max(rel(g * v[n][0], dy)).max(rel(g * v[n][1], -dx));
        }
    }
    verdict(worst < 1e-6, format!("max relative error {worst:.1e}"))
}

fn canonical_velocity(_seed: u64) -> std::result::Result<String, String> {
    let mut worst: f64 = 0.0;
    for (g, a) in [(3.0, 1.0), (-1.5, 0.7), (6.0, 2.0)] {
        let p = SystemParams::new(g, a).map_err(|e| e.to_string())?;
        let c = canonical_relative_equilibrium(&p);
        let v = velocity_field(&c).map_err(|e| e.to_string())?;
        for (z, u) in c.positions().iter().zip(&v) {
            let expected = [-p.theta_dot_e() * z[1], p.theta_dot_e() * z[0]];
            worst = worst.max((u[0] - expected[0]).abs()).max((u[1] - expected[1]).abs());
        }
    }
    verdict(worst <= 1e-14, format!("max deviation {worst:.1e}"))
}

fn conservation(seed: u64) -> std::result::Result<String, String> {
    let p = unit();
    let mut rng = rng_for(seed, 5);
    let (mut dh, mut dj) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let c = sample_level_set(&p, rng.random());
        let traj = integrate(&c, &IntegrationSettings::new(&p, 20.0)).map_err(|e| e.to_string())?;
        if traj.status() != TrajectoryStatus::Completed {
            return Err(format!("run stopped early: {:?}", traj.status()));
        }
        let d = invariant_drift(&traj);
        dh = dh.max(d.energy);
        dj = dj.max(d.max_momentum());
    }
    verdict(dh <= 1e-9 && dj <= 1e-9, format!("max |dH| {dh:.1e}, max |dJ| {dj:.1e}"))
}

fn tolerance_monotone(seed: u64) -> std::result::Result<String, String> {
    let p = unit();
    let mut rng = rng_for(seed, 6);
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..5 {
        let c = sample_level_set(&p, rng.random());
        let drift = |tol: f64| -> std::result::Result<f64, String> {
            let s = IntegrationSettings::new(&p, 20.0).with_tolerances(tol, tol);
            let d = invariant_drift(&integrate(&c, &s).map_err(|e| e.to_string())?);
            Ok(d.energy.max(d.max_momentum()))
        };
        let coarse = drift(1e-12)?;
        let fine = drift(5e-13)?;
        worst_ratio = worst_ratio.max(fine / coarse);
    }
    verdict(worst_ratio <= 2.0, format!("worst fine/coarse drift ratio {worst_ratio:.2} (default tolerance halved)"))
}

fn collision_termination(_seed: u64) -> std::result::Result<String, String> {
    let p = unit();
    let eps = 1e-6;
    // Self-similar collapse, shrunk so the closest pair starts at 2·eps.
    let c = PlanarConfig::new(
        vec![[-1.0, 0.0], [1.0, 0.0], [1.0, 2f64.sqrt()]],
        Strengths::new(vec![2.0, 2.0, -1.0]).unwrap(),
    )
    .unwrap();
    let d0 = c.min_distance().map(|(d, _)| d).unwrap_or(1.0);
    let c = c.scaled(2.0 * eps / d0);
    let mut settings = IntegrationSettings::new(&p, 100.0);
    settings.collision_epsilon = eps;
    let traj = integrate(&c, &settings).map_err(|e| e.to_string())?;
    let finite = traj.states().iter().all(|s| s.to_flat().iter().all(|v| v.is_finite()));
    match traj.status() {
        TrajectoryStatus::Collision { pair, t } => {
            verdict(finite, format!("pair {pair:?} within {eps:e} at t = {t:.3e}"))
        }
        other => Err(format!("expected a collision, got {other:?}")),
    }
}

fn reduction_round_trip(seed: u64) -> std::result::Result<String, String> {
    let p = unit();
    let mut rng = rng_for(seed, 8);
    let mut worst = [0.0f64; 4];
    let mut n = 0;
    while n < 1000 {
        let w = sample_sphere(&mut rng);
        if w.coords()[2] > 0.99 {
            continue;
        }
        n += 1;
        let chart = section(&w, &p).map_err(|e| e.to_string())?;
        let img = hopf(&chart, &p);
        worst[0] = worst[0].max(max_abs3(img.w(), w.coords())).max((img.w4 - 1.0).abs());
        let config = lift(&chart, &p);
        let h = reduced_hamiltonian_w(&w, &p).unwrap();
        worst[1] = worst[1].max(rel(hamiltonian(&config).map_err(|e| e.to_string())?, h));
        let l = l_functionals(&w);
        if l.min() > 1e-3 {
            let hp = reduced_hamiltonian_p(&invariants(w), &p).map_err(|e| e.to_string())?.unwrap();
            worst[2] = worst[2].max(rel(hp, h));
        }
        let z = config.positions();
        for (i, j) in [(1, 2), (1, 3), (2, 3), (1, 4), (2, 4), (3, 4)] {
            let d2 = (z[i - 1][0] - z[j - 1][0]).powi(2) + (z[i - 1][1] - z[j - 1][1]).powi(2);
            worst[3] = worst[3].max(rel(0.5 * l.get(i, j), d2));
        }
    }
    verdict(
        worst[0] <= 1e-12 && worst[1] <= 1e-10 && worst[2] <= 1e-10 && worst[3] <= 1e-10,
        format!(
            "round trip {:.1e}, energy {:.1e}, forms {:.1e}, distances {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn equivariance(seed: u64) -> std::result::Result<String, String> {
    let p = unit();
    let mut rng = rng_for(seed, 9);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let c = sample_level_set(&p, rng.random());
        let w = SpherePoint::normalized(hopf(&to_chart(&c, &p).map_err(|e| e.to_string())?, &p).w())
            .map_err(|e| e.to_string())?;
        for g in S3::ALL {
            let moved = hopf(&to_chart(&g.permute(&c), &p).map_err(|e| e.to_string())?, &p).w();
            worst = worst.max(max_abs3(moved, g.act(&w).coords()));
        }
    }
    verdict(worst <= 1e-12, format!("max deviation {worst:.1e}"))
}

fn permutation_invariance(seed: u64) -> std::result::Result<String, String> {
    let p = unit();
    let mut rng = rng_for(seed, 10);
    let (mut dp, mut dh) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let w = sample_sphere(&mut rng);
        let q = invariants(w);
        let h = reduced_hamiltonian_w(&w, &p).unwrap();
        for g in S3::ALL {
            let gw = g.act(&w);
            let qg = invariants(gw);
            dp = dp.max(max_abs3([q.p1, q.p2, q.p3], [qg.p1, qg.p2, qg.p3]));
            dh = dh.max((reduced_hamiltonian_w(&gw, &p).unwrap() - h).abs());
        }
    }
    let hs: Vec<f64> = saddle_points().iter().map(|s| reduced_hamiltonian_w(s, &p).unwrap()).collect();
    let spread = hs.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b)) - hs.iter().fold(f64::INFINITY, |a, b| a.min(*b));
    verdict(
        dp <= 1e-12 && dh <= 1e-12 && spread <= 1e-12,
        format!("p {dp:.1e}, H {dh:.1e}, saddle energy spread {spread:.1e}"),
    )
}

fn cone_relation(seed: u64) -> std::result::Result<String, String> {
    let p = unit();
    let mut rng = rng_for(seed, 11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let scale: f64 = rng.random_range(0.1..10.0);
        let c = ChartPoint::from_array([0; 4].map(|_| scale * rng.random_range(-1.0..1.0)));
        let img = hopf(&c, &p);
        worst = worst.max(img.cone_residual().abs() / (img.w4 * img.w4).max(1e-300));
    }
    verdict(worst <= 1e-12, format!("max relative residual {worst:.1e}"))
}

fn flow_oracle(seed: u64) -> std::result::Result<String, String> {
    let p = unit();
    let mut rng = rng_for(seed, 12);
    let dt = 0.05;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let w0 = flow_sphere_point(&mut rng);
        let c = lift(&section(&w0, &p).map_err(|e| e.to_string())?, &p);
        let traj = integrate(&c, &IntegrationSettings::new(&p, 1.0).with_sample_interval(dt)).map_err(|e| e.to_string())?;
        let (red, _) =
            integrate_reduced(&w0, &p, 1.0, &Output::Grid(dt), OdeOptions::default(), &mut []).map_err(|e| e.to_string())?;
        if red.len() != traj.len() {
            return Err(format!("{} reduced vs {} full samples", red.len(), traj.len()));
        }
        for ((_, w), state) in red.iter().zip(traj.states()) {
            let projected = reduce_config(state, &p, 1e-6).map_err(|e| e.to_string())?.w;
            worst = worst.max(max_abs3(*w, projected));
        }
    }
    verdict(worst <= 1e-6, format!("sup-norm difference {worst:.1e}"))
}

fn critical_census(_seed: u64) -> std::result::Result<String, String> {
    let p = unit();
    let coarse = find_critical_points(&p).len();
    let fine = find_critical_points_with(&p, &CriticalSearch { n_theta: 96, n_phi: 192, ..CriticalSearch::default() }).len();
    verdict(coarse == 8 && fine == 8, format!("{coarse} points on the default grid, {fine} on a 3x refined grid"))
}

fn orbit_invariants(seed: u64) -> std::result::Result<String, String> {
    let p = unit();
    let mut rng = rng_for(seed, 14);
    let (mut dh, mut rel_res) = (0.0f64, 0.0f64);
    for _ in 0..10 {
        let w0 = flow_sphere_point(&mut rng);
        let h0 = reduced_hamiltonian_w(&w0, &p).unwrap();
        let (states, _) = integrate_reduced(&w0, &p, 20.0, &Output::Steps, OdeOptions::default(), &mut [])
            .map_err(|e| e.to_string())?;
        for (_, w) in states {
            let h = crate::reduction::reduced_hamiltonian_of(w, &p).to_f64();
            dh = dh.max((h - h0).abs());
            rel_res = rel_res.max(invariants(w).relation_residual().abs());
        }
    }
    verdict(dh <= 1e-8 && rel_res <= 1e-10, format!("energy drift {dh:.1e}, relation residual {rel_res:.1e}"))
}

fn hessian_signs(_seed: u64) -> std::result::Result<String, String> {
    let p = unit();
    let step = 1e-5;
    let mut bad = Vec::new();
    let points: Vec<(SpherePoint, bool)> = [SpherePoint::SOUTH_POLE, SpherePoint::NORTH_POLE]
        .into_iter()
        .map(|w| (w, true))
        .chain(saddle_points().into_iter().map(|w| (w, false)))
        .collect();
    for (w, is_center) in &points {
        let c = w.coords();
        let (e1, e2) = tangent_basis(c);
        let h = |a: f64, b: f64| {
            let v = [0, 1, 2].map(|k| c[k] + a * e1[k] + b * e2[k]);
            reduced_hamiltonian_w(&SpherePoint::normalized(v).unwrap(), &p).unwrap()
        };
        let h0 = h(0.0, 0.0);
        let haa = (h(step, 0.0) - 2.0 * h0 + h(-step, 0.0)) / (step * step);
        let hbb = (h(0.0, step) - 2.0 * h0 + h(0.0, -step)) / (step * step);
        let hab = (h(step, step) - h(step, -step) - h(-step, step) + h(-step, -step)) / (4.0 * step * step);
        let det = haa * hbb - hab * hab;
        let analytic = tangential_hessian(c, &p);
        let det_an = analytic[0][0] * analytic[1][1] - analytic[0][1] * analytic[1][0];
        if (det > 0.0) != *is_center || (det_an > 0.0) != *is_center {
            bad.push(format!("{:?}", c));
        }
    }
    verdict(bad.is_empty(), if bad.is_empty() { "poles definite, saddles indefinite".into() } else { bad.join("; ") })
}

fn period_consistency(seed: u64) -> std::result::Result<String, String> {
    let p = unit();
    let mut rng = rng_for(seed, 16);
    let base = OdeOptions { rel_tol: 1e-11, abs_tol: 1e-11, ..OdeOptions::default() };
    let halved = OdeOptions { rel_tol: 5e-12, abs_tol: 5e-12, ..base };
    let hs = reduced_hamiltonian_w(&saddle_points()[0], &p).unwrap();
    let mut worst: f64 = 0.0;
    let mut n = 0;
    while n < 8 {
        let w0 = flow_sphere_point(&mut rng);
        if (reduced_hamiltonian_w(&w0, &p).unwrap() - hs).abs() < 1e-3 {
            continue;
        }
        n += 1;
        let a = closed_orbit(&w0, &p, 500.0, base).map_err(|e| e.to_string())?;
        let b = closed_orbit(&w0, &p, 500.0, halved).map_err(|e| e.to_string())?;
        match (a, b) {
            (Some(a), Some(b)) => worst = worst.max(rel(a.period, b.period)),
            _ => return Err(format!("no return from {:?}", w0.coords())),
        }
    }
    verdict(worst < 1e-6, format!("max relative period change {worst:.1e}"))
}

/// Every suite, in a fixed order.
pub const SUITES: [(&str, Suite); 16] = [
    ("momentum-translation", momentum_translation),
    ("energy-along-flow", energy_along_flow),
    ("gradient-consistency", gradient_consistency),
    ("canonical-velocity", canonical_velocity),
    ("conservation", conservation),
    ("tolerance-monotone", tolerance_monotone),
    ("collision-termination", collision_termination),
    ("reduction-round-trip", reduction_round_trip),
    ("equivariance", equivariance),
    ("permutation-invariance", permutation_invariance),
    ("cone-relation", cone_relation),
    ("flow-oracle", flow_oracle),
    ("critical-census", critical_census),
    ("orbit-invariants", orbit_invariants),
    ("hessian-signs", hessian_signs),
    ("period-consistency", period_consistency),
];

/// Runs every suite with `seed`; deterministic in `seed`.
pub fn run_all(seed: u64) -> Vec<SuiteResult> {
    SUITES
        .iter()
        .map(|(name, suite)| {
            let (passed, detail) = match suite(seed) {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            SuiteResult { name, passed, detail }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_are_deterministic_in_the_seed() {
        assert_eq!(cone_relation(3), cone_relation(3));
        assert_eq!(equivariance(5), equivariance(5));
    }
}
