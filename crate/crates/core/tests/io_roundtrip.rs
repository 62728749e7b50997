use vortexred::integrator::integrate;
use vortexred::io::{read_trajectory_csv, write_reduced_csv, CoordinateSelection};
use vortexred::reduction::{reduce_config, sample_level_set};
use vortexred::{IntegrationSettings, SystemParams};

#[test]
fn trajectory_csv_round_trips_exactly() {
    let p = SystemParams::default();
    let c = sample_level_set(&p, 11);
    let traj = integrate(&c, &IntegrationSettings::new(&p, 2.0).with_sample_interval(0.25)).unwrap();
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).unwrap();
    let table = read_trajectory_csv(buf.as_slice()).unwrap();
    assert_eq!(table.times, traj.times());
    for (row, state) in table.states.iter().zip(traj.states()) {
        assert_eq!(row, &state.to_flat());
    }
}

#[test]
fn reprojection_is_idempotent_at_printed_precision() {
    let p = SystemParams::default();
    let c = sample_level_set(&p, 12);
    let traj = integrate(&c, &IntegrationSettings::new(&p, 1.0).with_sample_interval(0.5)).unwrap();
    let rows = |configs: &[vortexred::PlanarConfig], times: &[f64]| {
        times.iter().zip(configs).map(|(t, s)| (*t, reduce_config(s, &p, 1e-6).unwrap())).collect::<Vec<_>>()
    };
    let first = rows(traj.states(), traj.times());
    let mut a = Vec::new();
    write_reduced_csv(&mut a, &first, CoordinateSelection::ALL).unwrap();

    let mut buf = Vec::new();
    traj.write_csv(&mut buf).unwrap();
    let table = read_trajectory_csv(buf.as_slice()).unwrap();
    let second = rows(&table.configs(&p.strengths()).unwrap(), &table.times);
    let mut b = Vec::new();
    write_reduced_csv(&mut b, &second, CoordinateSelection::ALL).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(!text.contains("inf"));
}
