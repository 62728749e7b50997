use approx::assert_abs_diff_eq;

use vortexred::analysis::{
    base_saddle, center_energy, classify_state, find_critical_points, portrait, reconstruct, saddle_energy,
    saddle_points, Family, PortraitSettings,
};
use vortexred::dynamics::{hamiltonian, saddle_relative_equilibrium};
use vortexred::reduction::{cylinder, deform, invariants};
use vortexred::{Extended, IntegrationSettings, SpherePoint, SystemParams};

fn unit() -> SystemParams {
    SystemParams::new(3.0, 1.0).unwrap()
}

fn max_track_motion(w0: &SpherePoint) -> f64 {
    let p = unit();
    let rec = reconstruct(w0, &p, &IntegrationSettings::new(&p, 10.0).with_sample_interval(0.5)).unwrap();
    rec.reduced
        .iter()
        .map(|(_, r)| (0..3).map(|k| (r.w[k] - w0.coords()[k]).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

#[test]
fn relative_equilibria_reconstruct_to_fixed_points() {
    assert!(max_track_motion(&SpherePoint::SOUTH_POLE) < 1e-8);
    assert!(max_track_motion(&base_saddle()) < 1e-8);
}

#[test]
fn classification_examples() {
    let p = unit();
    let south = classify_state(&SpherePoint::SOUTH_POLE, &p).unwrap();
    assert_eq!(south.family, Family::Center);
    assert_abs_diff_eq!(south.energy.unwrap(), center_energy(&p), epsilon = 1e-14);

    let s = 0.9999f64;
    let near_plus = SpherePoint::normalized([0.0, s, -(1.0 - s * s).sqrt()]).unwrap();
    let y = classify_state(&near_plus, &p).unwrap();
    assert!(y.energy.unwrap() > 0.0);
    assert_eq!(y.family, Family::PlusCollision);

    let saddle = classify_state(&base_saddle(), &p).unwrap();
    assert_eq!(saddle.family, Family::NearHomoclinic);
    assert_abs_diff_eq!(saddle.energy.unwrap(), saddle_energy(&p), epsilon = 1e-14);

    let plus = classify_state(&SpherePoint::new([0.0, 1.0, 0.0]).unwrap(), &p).unwrap();
    assert_eq!((plus.family, plus.energy), (Family::PlusCollision, Extended::PlusInfinity));
}

#[test]
fn saddle_energy_matches_the_planar_saddle() {
    let p = unit();
    let full = hamiltonian(&saddle_relative_equilibrium(&p)).unwrap();
    assert_abs_diff_eq!(full, saddle_energy(&p), epsilon = 1e-10);
    assert_eq!(saddle_points().len(), 6);
}

#[test]
fn center_image_on_the_printed_cylinder() {
    let c = cylinder(&deform(&invariants(SpherePoint::SOUTH_POLE)));
    assert_abs_diff_eq!(c.h.unwrap(), 0.5 * (0.75f64).ln(), epsilon = 1e-14);
    assert_abs_diff_eq!(c.theta, 0.0, epsilon = 1e-14);
}

#[test]
fn equilibria_serialize_with_expected_fields() {
    let reports = find_critical_points(&unit());
    let json: serde_json::Value = serde_json::to_value(&reports).unwrap();
    let first = &json.as_array().unwrap()[0];
    for key in ["w", "kind", "energy", "hessian_eigs"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
    assert_eq!(first["kind"], "center");
}

#[test]
fn portrait_does_not_depend_on_the_thread_count() {
    let p = unit();
    let settings = PortraitSettings { orbits: 12, ..PortraitSettings::default() };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| portrait(&p, &settings).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one, four);
    assert_eq!(one.len(), 12);
    assert!(one.iter().all(|o| o.samples.iter().all(|s| s.theta.is_finite())));
}

#[test]
fn families_order_by_energy() {
    let p = unit();
    let (hs, hc) = (saddle_energy(&p), center_energy(&p));
    for o in portrait(&p, &PortraitSettings::default()).unwrap() {
        match o.family {
            Family::Center => assert!(o.energy > hs && o.energy < hc),
            Family::PlusCollision => assert!(o.energy > hs),
            Family::MinusCollision => assert!(o.energy < hs),
            Family::NearHomoclinic => assert!((o.energy - hs).abs() < 1e-6),
            Family::Truncated => panic!("orbit {} did not close", o.id),
        }
    }
}
