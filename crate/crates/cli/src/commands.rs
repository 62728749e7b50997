use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use log::warn;

use vortexred::analysis::{self, PortraitSettings};
use vortexred::dynamics::{
    canonical_relative_equilibrium, momentum, saddle_relative_equilibrium, ConfigFile,
};
use vortexred::integrator::{integrate, invariant_drift};
use vortexred::io::{fmt17, read_trajectory_csv, write_portrait_csv, write_reduced_csv, CoordinateSelection, PortraitRow};
use vortexred::reduction::{reduce_config, reduced_hamiltonian_w, sample_level_set, MOMENTUM_TOLERANCE};
use vortexred::{Error, IntegrationSettings, PlanarConfig, SpherePoint, SystemParams, TrajectoryStatus};

use crate::{EquilibriaArgs, PortraitArgs, ProjectArgs, SimulateArgs, VerifyArgs};

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Canonical,
    Saddle,
    Sample(u64),
    File(String),
}

pub fn parse_init(s: &str) -> std::result::Result<Init, String> {
    match s.split_once(':') {
        None if s == "canonical" => Ok(Init::Canonical),
        None if s == "saddle" => Ok(Init::Saddle),
        Some(("sample", n)) => n.parse().map(Init::Sample).map_err(|_| format!("bad sample seed {n:?}")),
        Some(("file", path)) if !path.is_empty() => Ok(Init::File(path.to_string())),
        _ => Err(format!("expected canonical, saddle, sample:SEED or file:PATH, got {s:?}")),
    }
}

pub fn parse_coords(s: &str) -> std::result::Result<CoordinateSelection, String> {
    let mut sel = CoordinateSelection { w: false, p: false, q: false, cyl: false };
    for part in s.split(',').map(str::trim) {
        match part {
            "w" => sel.w = true,
            "p" => sel.p = true,
            "q" => sel.q = true,
            "cyl" => sel.cyl = true,
            "all" => sel = CoordinateSelection::ALL,
            other => return Err(format!("unknown coordinate set {other:?}; use w, p, q, cyl or all")),
        }
    }
    Ok(sel)
}

/// Caps the rayon pool at `VORTEXRED_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("VORTEXRED_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .with_context(|| format!("VORTEXRED_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    Ok(())
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot write to {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(())
}

fn write_output(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, body),
        None => {
            let mut buf = Vec::new();
            body(&mut buf)?;
            let mut out = io::stdout().lock();
            match out.write_all(&buf).and_then(|()| out.flush()) {
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
                other => Ok(other?),
            }
        }
    }
}

fn initial_config(init: &Init, params: &SystemParams) -> Result<(SystemParams, PlanarConfig)> {
    Ok(match init {
        Init::Canonical => (*params, canonical_relative_equilibrium(params)),
        Init::Saddle => (*params, saddle_relative_equilibrium(params)),
        Init::Sample(seed) => (*params, sample_level_set(params, *seed)),
        Init::File(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
            ConfigFile::from_json(&text).with_context(|| format!("parsing {path}"))?
        }
    })
}

pub fn simulate(params: &SystemParams, args: SimulateArgs) -> Result<ExitCode> {
    let (params, config) = initial_config(&args.init, params)?;
    if config.len() != 4 || momentum(&config).distance(&params.mu_e()) > MOMENTUM_TOLERANCE {
        warn!("initial configuration is not on the reduction level set; `project` will reject this trajectory");
    }
    let mut settings = IntegrationSettings::new(&params, args.t_end).with_tolerances(args.rtol, args.atol);
    settings.sample_interval = args.dt;
    if let Some(eps) = args.collision_epsilon {
        settings.collision_epsilon = eps;
    }
    if args.project {
        settings.project = Some(params);
    }
    let traj = integrate(&config, &settings)?;
    write_atomic(&args.out, |w| Ok(traj.write_csv(w)?))?;

    let drift = invariant_drift(&traj);
    println!("samples {}", traj.len());
    println!("energy drift {}", fmt17(drift.energy));
    println!(
        "momentum drift {} {} {}",
        fmt17(drift.momentum[0]),
        fmt17(drift.momentum[1]),
        fmt17(drift.momentum[2])
    );
    match traj.status() {
        TrajectoryStatus::Completed => {
            println!("status completed");
            Ok(ExitCode::SUCCESS)
        }
        TrajectoryStatus::Collision { pair, t } => {
            println!("status collision of vortices {} and {} at t = {}", pair.0 + 1, pair.1 + 1, fmt17(t));
            Ok(ExitCode::from(2))
        }
    }
}

pub fn project(params: &SystemParams, args: ProjectArgs) -> Result<ExitCode> {
    let file = fs::File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let table = read_trajectory_csv(file)?;
    let configs = table.configs(&params.strengths())?;
    let mut rows = Vec::with_capacity(configs.len());
    for (t, c) in table.times.iter().zip(&configs) {
        match reduce_config(c, params, args.tolerance) {
            Ok(r) => rows.push((*t, r)),
            Err(Error::MomentumMismatch { residual, .. }) => {
                bail!("momentum mismatch at t = {} (residual {residual:.3e})", fmt17(*t))
            }
            Err(Error::CentroidResidual(d)) => {
                bail!("momentum mismatch at t = {} (centroid offset {d:.3e})", fmt17(*t))
            }
            Err(e) => return Err(e.into()),
        }
    }
    write_atomic(&args.out, |w| Ok(write_reduced_csv(w, &rows, args.coords)?))?;
    Ok(ExitCode::SUCCESS)
}

pub fn equilibria(params: &SystemParams, args: EquilibriaArgs) -> Result<ExitCode> {
    let reports = analysis::find_critical_points(params);
    write_output(args.out.as_deref(), |w| {
        serde_json::to_writer_pretty(&mut *w, &reports)?;
        writeln!(w)?;
        Ok(())
    })?;
    let centers = reports.iter().filter(|r| r.kind == analysis::EquilibriumKind::Center).count();
    let saddles = reports.iter().filter(|r| r.kind == analysis::EquilibriumKind::Saddle).count();
    eprintln!("{} critical points: {centers} centers, {saddles} saddles", reports.len());
    Ok(ExitCode::SUCCESS)
}

pub fn portrait(params: &SystemParams, args: PortraitArgs) -> Result<ExitCode> {
    if args.orbits == 0 {
        bail!("--orbits must be at least 1");
    }
    let settings = PortraitSettings {
        orbits: args.orbits,
        t_max: args.t_max,
        samples_per_orbit: args.samples,
        ..PortraitSettings::default()
    };
    let orbits = analysis::portrait(params, &settings)?;
    let rows = orbits.iter().flat_map(|o| {
        o.samples.iter().map(move |s| PortraitRow {
            orbit_id: o.id,
            t: s.t,
            h: s.h,
            theta: s.theta,
            energy: SpherePoint::normalized(s.w)
                .map(|w| reduced_hamiltonian_w(&w, params).to_f64())
                .unwrap_or(f64::NAN),
            family: o.family.tag(),
        })
    });
    write_output(args.out.as_deref(), |w| Ok(write_portrait_csv(w, rows)?))?;

    let closed = orbits.iter().filter(|o| o.closure.is_some_and(|c| c < 1e-5)).count();
    eprintln!("{closed} of {} orbits closed within 1e-5", orbits.len());
    for family in [
        analysis::Family::Center,
        analysis::Family::PlusCollision,
        analysis::Family::MinusCollision,
        analysis::Family::NearHomoclinic,
        analysis::Family::Truncated,
    ] {
        let n = orbits.iter().filter(|o| o.family == family).count();
        if n > 0 {
            eprintln!("  {family}: {n}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let results = vortexred::verify::run_all(args.seed);
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in &results {
        println!("{} {:width$}  {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("failing properties: {}", failed.join(", "));
        Ok(ExitCode::from(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_sources() {
        assert_eq!(parse_init("canonical"), Ok(Init::Canonical));
        assert_eq!(parse_init("saddle"), Ok(Init::Saddle));
        assert_eq!(parse_init("sample:42"), Ok(Init::Sample(42)));
        assert_eq!(parse_init("file:a/b.json"), Ok(Init::File("a/b.json".into())));
        assert!(parse_init("sample:x").is_err());
        assert!(parse_init("file:").is_err());
        assert!(parse_init("random").is_err());
    }

    #[test]
    fn coordinate_lists() {
        let sel = parse_coords("w,cyl").unwrap();
        assert!(sel.w && sel.cyl && !sel.p && !sel.q);
        assert_eq!(parse_coords("all").unwrap(), CoordinateSelection::ALL);
        assert!(parse_coords("w,z").is_err());
    }
}
