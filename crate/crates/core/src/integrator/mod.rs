//! Time integration of the full vortex flow.

pub mod ode;
mod tableau;

use std::io::Write;

use crate::dynamics::{self, MomentumValue, PlanarConfig, SystemParams};
use crate::error::{Error, Result};
use crate::io::fmt17;
use ode::{Crossing, Dop853, Event, OdeOptions, Output, Termination};

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub collision_epsilon: f64,
    pub t_end: f64,
    /// Report only multiples of this interval instead of every step.
    pub sample_interval: Option<f64>,
    /// Re-impose the reduction momentum after every reported sample.
    pub project: Option<SystemParams>,
}

impl IntegrationSettings {
    pub fn new(params: &SystemParams, t_end: f64) -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            collision_epsilon: 1e-6 * params.alpha(),
            t_end,
            sample_interval: None,
            project: None,
        }
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_sample_interval(mut self, dt: f64) -> Self {
        self.sample_interval = Some(dt);
        self
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("collision_epsilon", self.collision_epsilon),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.t_end.is_finite() || self.t_end < 0.0 {
            return Err(Error::InvalidParameter(format!("t_end must be finite and nonnegative, got {}", self.t_end)));
        }
        if let Some(dt) = self.sample_interval {
            if !(dt > 0.0) {
                return Err(Error::InvalidParameter(format!("sample interval must be positive, got {dt}")));
            }
        }
        Ok(())
    }
}

/// Energy and momentum of one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub energy: f64,
    pub momentum: MomentumValue,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectoryStatus {
    Completed,
    Collision { pair: (usize, usize), t: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<PlanarConfig>,
    diagnostics: Vec<Diagnostics>,
    status: TrajectoryStatus,
}

impl Trajectory {
    /// Builds a trajectory from samples, recomputing the diagnostics.
    pub fn from_samples(times: Vec<f64>, states: Vec<PlanarConfig>, status: TrajectoryStatus) -> Result<Self> {
        if times.len() != states.len() || times.is_empty() {
            return Err(Error::InvalidParameter("trajectory needs matching, nonempty times and states".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("trajectory times must be strictly increasing".into()));
        }
        let diagnostics = states
            .iter()
            .map(|s| {
                Ok(Diagnostics {
                    energy: dynamics::hamiltonian(s)?,
                    momentum: dynamics::momentum(s),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { times, states, diagnostics, status })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[PlanarConfig] {
        &self.states
    }

    pub fn diagnostics(&self) -> &[Diagnostics] {
        &self.diagnostics
    }

    pub fn status(&self) -> TrajectoryStatus {
        self.status
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> (f64, &PlanarConfig) {
        let i = self.times.len() - 1;
        (self.times[i], &self.states[i])
    }

    /// Writes `t,x1,y1,...,H,Jrot,Jtx,Jty` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.states[0].len();
        let mut header = vec!["t".to_string()];
        for k in 1..=n {
            header.push(format!("x{k}"));
            header.push(format!("y{k}"));
        }
        header.extend(["H", "Jrot", "Jtx", "Jty"].map(String::from));
        w.write_record(&header)?;
        for ((t, s), d) in self.times.iter().zip(&self.states).zip(&self.diagnostics) {
            let mut row = vec![fmt17(*t)];
            row.extend(s.to_flat().into_iter().map(fmt17));
            row.push(fmt17(d.energy));
            row.extend(d.momentum.as_array().into_iter().map(fmt17));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Largest deviations from the initial energy and momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftReport {
    pub energy: f64,
    /// Componentwise `(rot, tr_x, tr_y)`.
    pub momentum: [f64; 3],
}

impl DriftReport {
    pub fn max_momentum(&self) -> f64 {
        self.momentum.iter().copied().fold(0.0, f64::max)
    }
}

pub fn invariant_drift(traj: &Trajectory) -> DriftReport {
    let d0 = traj.diagnostics[0];
    let j0 = d0.momentum.as_array();
    let mut report = DriftReport { energy: 0.0, momentum: [0.0; 3] };
    for d in &traj.diagnostics {
        report.energy = report.energy.max((d.energy - d0.energy).abs());
        for (k, j) in d.momentum.as_array().iter().enumerate() {
            report.momentum[k] = report.momentum[k].max((j - j0[k]).abs());
        }
    }
    report
}

struct CollisionWatch {
    epsilon: f64,
    hit: Option<((usize, usize), f64)>,
}

impl Event for CollisionWatch {
    fn value(&self, y: &[f64]) -> f64 {
        dynamics::min_pair_distance(y).map_or(f64::INFINITY, |(d, _)| d) - self.epsilon
    }

    fn crossing(&self) -> Crossing {
        Crossing::Falling
    }

    fn on_root(&mut self, t: f64, y: &[f64]) -> bool {
        if let Some((_, pair)) = dynamics::min_pair_distance(y) {
            self.hit = Some((pair, t));
        }
        true
    }
}

/// Moves the central vortex to the outer centroid and rescales the outer ring
/// so that the momentum equals `mu_e` again.
pub fn project_to_level_set(state: &mut [f64], params: &SystemParams) {
    debug_assert_eq!(state.len(), 8);
    let cx = (state[0] + state[2] + state[4]) / 3.0;
    let cy = (state[1] + state[3] + state[5]) / 3.0;
    let spread: f64 = (0..3).map(|i| (state[2 * i] - cx).powi(2) + (state[2 * i + 1] - cy).powi(2)).sum();
    let target = 3.0 * params.alpha() * params.alpha();
    let s = (target / spread).sqrt();
    for i in 0..3 {
        state[2 * i] = cx + s * (state[2 * i] - cx);
        state[2 * i + 1] = cy + s * (state[2 * i + 1] - cy);
    }
    state[6] = cx;
    state[7] = cy;
}

/// Integrates the vortex equations from `config` until `settings.t_end` or
/// until two vortices come within `collision_epsilon`.
pub fn integrate(config: &PlanarConfig, settings: &IntegrationSettings) -> Result<Trajectory> {
    settings.validate()?;
    let strengths = config.strengths().clone();
    let start = config.to_flat();

    if let Some((d, pair)) = config.min_distance() {
        if d <= settings.collision_epsilon {
            return Trajectory::from_samples(vec![0.0], vec![config.clone()], TrajectoryStatus::Collision { pair, t: 0.0 });
        }
    }
    if settings.project.is_some() && config.len() != 4 {
        return Err(Error::InvalidParameter("level-set projection needs exactly four vortices".into()));
    }

    let g = strengths.as_slice().to_vec();
    let rhs = move |y: &[f64], dy: &mut [f64]| dynamics::velocity_into(&g, y, dy);
    let opts = OdeOptions {
        rel_tol: settings.rel_tol,
        abs_tol: settings.abs_tol,
        max_step: settings.max_step,
        ..OdeOptions::default()
    };
    let output = match settings.sample_interval {
        Some(dt) => Output::Grid(dt),
        None => Output::Steps,
    };
    let mut watch = CollisionWatch { epsilon: settings.collision_epsilon, hit: None };

    let mut times = Vec::new();
    let mut states = Vec::new();
    let termination = match settings.project {
        None => {
            let mut solver = Dop853::new(rhs, start.len(), opts);
            solver.solve(0.0, &start, settings.t_end, &output, &mut [&mut watch], |t, y| {
                times.push(t);
                states.push(y.to_vec());
            })?
        }
        Some(params) => {
            // Restart after every reported sample from the projected state.
            let dt = settings.sample_interval.unwrap_or(settings.t_end.clamp(f64::MIN_POSITIVE, 1.0));
            let mut y = start.clone();
            let mut t = 0.0;
            times.push(0.0);
            states.push(y.clone());
            let mut term = Termination::Completed;
            while t < settings.t_end {
                let t_next = (t + dt).min(settings.t_end);
                let mut solver = Dop853::new(&rhs, start.len(), opts);
                let mut end = None;
                term = solver.solve(t, &y, t_next, &Output::Steps, &mut [&mut watch], |s, state| {
                    end = Some((s, state.to_vec()))
                })?;
                let (s, mut state) = end.expect("solver reports at least one state");
                if term == Termination::Completed {
                    project_to_level_set(&mut state, &params);
                }
                times.push(s);
                states.push(state.clone());
                y = state;
                t = s;
                if term != Termination::Completed {
                    break;
                }
            }
            term
        }
    };

    let status = match (termination, watch.hit) {
        (Termination::Event { .. }, Some((pair, t))) => TrajectoryStatus::Collision { pair, t },
        _ => TrajectoryStatus::Completed,
    };
    let configs = states
        .iter()
        .map(|s| PlanarConfig::from_flat(s, strengths.clone()))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::from_samples(times, configs, status)
}
