//! Adaptive DOP853 driver for autonomous systems `y' = f(y)`.
//!
//! Steps are controlled by a PI controller on the mixed 5th/3rd order error
//! estimate. Output between step endpoints (sample grids, event location)
//! is produced by re-stepping from the last accepted state with a shorter
//! step, which keeps the full order of the method.

use super::tableau::{A, B, E3, E5, STAGES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
    /// Accuracy of located event times, relative to the step length or
    /// to `max(|t|, 1)`, whichever is smaller.
    pub event_time_tol: f64,
    pub safety: f64,
    pub fac_min: f64,
    pub fac_max: f64,
    /// Integral gain of the PI controller.
    pub beta: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            max_steps: 5_000_000,
            event_time_tol: 1e-10,
            safety: 0.9,
            fac_min: 0.2,
            fac_max: 6.0,
            beta: 0.04,
        }
    }
}

/// Sign-change direction that triggers an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    Rising,
    Falling,
    Either,
}

impl Crossing {
    fn matches(self, before: f64, after: f64) -> bool {
        let rising = before < 0.0 && after >= 0.0;
        let falling = before > 0.0 && after <= 0.0;
        match self {
            Crossing::Rising => rising,
            Crossing::Falling => falling,
            Crossing::Either => rising || falling,
        }
    }
}

/// A scalar event function watched along the solution.
pub trait Event {
    fn value(&self, y: &[f64]) -> f64;

    fn crossing(&self) -> Crossing;

    /// Called at each located root. Returning `true` stops the integration.
    fn on_root(&mut self, t: f64, y: &[f64]) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Completed,
    Event { index: usize, t: f64 },
}

/// Where the driver reports states.
#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    /// Initial state and every accepted step.
    Steps,
    /// Initial state and the multiples of the interval up to `t_end`.
    Grid(f64),
    /// Accepted steps plus the listed times.
    StepsAnd(Vec<f64>),
}

pub struct Dop853<F> {
    rhs: F,
    opts: OdeOptions,
    k: Vec<Vec<f64>>,
    stage: Vec<f64>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

struct Trial {
    y: Vec<f64>,
    f: Vec<f64>,
    err: f64,
}

impl<F> Dop853<F>
where
    F: Fn(&[f64], &mut [f64]),
{
    pub fn new(rhs: F, dim: usize, opts: OdeOptions) -> Self {
        Self {
            rhs,
            opts,
            k: vec![vec![0.0; dim]; STAGES + 1],
            stage: vec![0.0; dim],
            steps_accepted: 0,
            steps_rejected: 0,
        }
    }

    pub fn options(&self) -> &OdeOptions {
        &self.opts
    }

    /// One step of size `h` from `y` (with `f0 = f(y)`).
    fn trial(&mut self, y: &[f64], f0: &[f64], h: f64) -> Trial {
        let n = y.len();
        self.k[0].copy_from_slice(f0);
        for s in 1..STAGES {
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s][j] * self.k[j][i];
                }
                self.stage[i] = y[i] + h * acc;
            }
            (self.rhs)(&self.stage, &mut self.k[s]);
        }
        let mut y_new = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for s in 0..STAGES {
                acc += B[s] * self.k[s][i];
            }
            y_new[i] = y[i] + h * acc;
        }
        let mut f_new = vec![0.0; n];
        (self.rhs)(&y_new, &mut f_new);
        self.k[STAGES].copy_from_slice(&f_new);

        let mut e5 = 0.0;
        let mut e3 = 0.0;
        for i in 0..n {
            let scale = self.opts.abs_tol + y[i].abs().max(y_new[i].abs()) * self.opts.rel_tol;
            let mut d5 = 0.0;
            let mut d3 = 0.0;
            for s in 0..=STAGES {
                d5 += E5[s] * self.k[s][i];
                d3 += E3[s] * self.k[s][i];
            }
            e5 += (d5 / scale).powi(2);
            e3 += (d3 / scale).powi(2);
        }
        let err = if e5 == 0.0 && e3 == 0.0 {
            0.0
        } else {
            h.abs() * e5 / ((e5 + 0.01 * e3) * n as f64).sqrt()
        };
        let err = if y_new.iter().chain(&f_new).all(|v| v.is_finite()) { err } else { f64::INFINITY };
        Trial { y: y_new, f: f_new, err }
    }

    /// State at `t0 + tau` from `(y0, f0)` without error control.
    pub fn advance(&mut self, y0: &[f64], f0: &[f64], tau: f64) -> Vec<f64> {
        if tau == 0.0 {
            return y0.to_vec();
        }
        self.trial(y0, f0, tau).y
    }

    fn initial_step(&self, y: &[f64], f0: &[f64], span: f64) -> f64 {
        let n = y.len();
        let scale = |i: usize| self.opts.abs_tol + y[i].abs() * self.opts.rel_tol;
        let d0 = (0..n).map(|i| (y[i] / scale(i)).powi(2)).sum::<f64>().sqrt();
        let d1 = (0..n).map(|i| (f0[i] / scale(i)).powi(2)).sum::<f64>().sqrt();
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(self.opts.max_step).min(span);
        let y1: Vec<f64> = (0..n).map(|i| y[i] + h0 * f0[i]).collect();
        let mut f1 = vec![0.0; n];
        (self.rhs)(&y1, &mut f1);
        let d2 = (0..n).map(|i| ((f1[i] - f0[i]) / scale(i)).powi(2)).sum::<f64>().sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (1e-6f64).max(h0 * 1e-3)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 8.0)
        };
        (100.0 * h0).min(h1).min(self.opts.max_step).min(span)
    }

    /// Integrates from `(t0, y0)` to `t_end > t0`.
    ///
    /// `sink` receives every reported state in increasing time order,
    /// starting with the initial state.
    pub fn solve(
        &mut self,
        t0: f64,
        y0: &[f64],
        t_end: f64,
        output: &Output,
        events: &mut [&mut dyn Event],
        mut sink: impl FnMut(f64, &[f64]),
    ) -> Result<Termination> {
        let mut t = t0;
        let mut y = y0.to_vec();
        let mut f = vec![0.0; y.len()];
        (self.rhs)(&y, &mut f);
        sink(t, &y);
        if t_end <= t0 {
            return Ok(Termination::Completed);
        }

        let mut g_prev: Vec<f64> = events.iter().map(|e| e.value(&y)).collect();
        let mut pending: Vec<f64> = match output {
            Output::Steps => Vec::new(),
            Output::Grid(dt) => {
                let count = ((t_end - t0) / dt).floor() as usize;
                (1..=count).map(|k| t0 + k as f64 * dt).filter(|&s| s <= t_end).collect()
            }
            Output::StepsAnd(times) => {
                let mut v: Vec<f64> = times.iter().copied().filter(|&s| s > t0 && s <= t_end).collect();
                v.sort_by(f64::total_cmp);
                v
            }
        };
        pending.reverse();
        let report_steps = !matches!(output, Output::Grid(_));

        let mut h = self.initial_step(&y, &f, t_end - t0);
        let mut err_old: f64 = 1e-4;
        let mut rejected_last = false;

        loop {
            if self.steps_accepted + self.steps_rejected >= self.opts.max_steps {
                return Err(Error::TooManySteps(self.opts.max_steps));
            }
            let last = t + h * 1.01 >= t_end;
            if last {
                h = t_end - t;
            }
            if h <= f64::EPSILON * t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t });
            }
            let trial = self.trial(&y, &f, h);
            if !(trial.err <= 1.0) {
                self.steps_rejected += 1;
                let fac = if trial.err.is_finite() {
                    (self.opts.safety * trial.err.powf(-1.0 / 8.0)).max(self.opts.fac_min)
                } else {
                    self.opts.fac_min
                };
                h *= fac.min(1.0);
                rejected_last = true;
                continue;
            }
            self.steps_accepted += 1;
            let t_new = if last { t_end } else { t + h };

            // Earliest event root inside (t, t_new].
            let g_new: Vec<f64> = events.iter().map(|e| e.value(&trial.y)).collect();
            let mut root: Option<(usize, f64, Vec<f64>)> = None;
            for (idx, event) in events.iter().enumerate() {
                if !event.crossing().matches(g_prev[idx], g_new[idx]) {
                    continue;
                }
                let (tau, y_root) = self.locate(&y, &f, h, t, &**event, g_prev[idx]);
                if root.as_ref().is_none_or(|r| t + tau < r.1) {
                    root = Some((idx, t + tau, y_root));
                }
            }

            if let Some((idx, t_root, y_root)) = root {
                while let Some(&s) = pending.last() {
                    if s >= t_root {
                        break;
                    }
                    let ys = self.advance(&y, &f, s - t);
                    sink(s, &ys);
                    pending.pop();
                }
                if events[idx].on_root(t_root, &y_root) {
                    sink(t_root, &y_root);
                    return Ok(Termination::Event { index: idx, t: t_root });
                }
            }

            while let Some(&s) = pending.last() {
                if s > t_new {
                    break;
                }
                pending.pop();
                if s == t_new {
                    if !report_steps {
                        sink(s, &trial.y);
                    }
                    continue;
                }
                let ys = self.advance(&y, &f, s - t);
                sink(s, &ys);
            }
            if report_steps {
                sink(t_new, &trial.y);
            }

            t = t_new;
            y = trial.y;
            f = trial.f;
            g_prev = g_new;
            if last {
                return Ok(Termination::Completed);
            }

            let err = trial.err.max(1e-10);
            let mut fac = self.opts.safety * err.powf(-(1.0 / 8.0 - 0.2 * self.opts.beta)) * err_old.powf(self.opts.beta);
            fac = fac.clamp(self.opts.fac_min, self.opts.fac_max);
            if rejected_last {
                fac = fac.min(1.0);
            }
            err_old = err;
            rejected_last = false;
            h = (h * fac).min(self.opts.max_step);
        }
    }

    /// Bisection on the sub-step length for a sign change of `event`.
    fn locate(&mut self, y: &[f64], f: &[f64], h: f64, t: f64, event: &dyn Event, g0: f64) -> (f64, Vec<f64>) {
        let tol = self.opts.event_time_tol * h.abs().min(t.abs().max(1.0));
        let mut lo = 0.0;
        let mut hi = h;
        let mut y_hi = self.advance(y, f, h);
        let side = g0.signum();
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let y_mid = self.advance(y, f, mid);
            let g = event.value(&y_mid);
            if g.signum() == side && g != 0.0 {
                lo = mid;
            } else {
                hi = mid;
                y_hi = y_mid;
            }
        }
        (hi, y_hi)
    }
}
