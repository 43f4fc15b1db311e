//! Online transmission-length control.
//!
//! Every `M` slots each link nudges its payload-length exponent by the gap
//! between its empirical arrival and service rates, plus a soft penalty
//! that pulls the exponent back toward the window `[r_min, r_max]`:
//!
//! ```text
//! r_k(i) = r_k(i-1) + alpha(i) * (lambda'_k(i) + delta - s'_k(i) + h(r_k(i-1)))
//! ```
//!
//! With `delta = 0` this drives service rates to the arrival rates; a small
//! positive `delta` over-serves by that margin so queues drain. The penalty
//! is softer than projection but still confines the iterates to
//! `[r_min - 2, r_max + 2 * lambda_bar]` for any step sizes `<= 1` and any
//! empirical rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::ConflictGraph;
use crate::sim::{run_with_hook, Metrics, PeriodHook, PeriodRecord, SimConfig};
use crate::stationary::{Analyzer, LengthExponents, ProtocolParams};

/// Step-size schedule over period indices `i = 1, 2, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    /// `alpha(i) = c / (a + i / d)`.
    Harmonic { c: f64, a: f64, d: f64 },
    /// `alpha(i) = 1 / i`.
    Reciprocal,
    /// Fixed `alpha`.
    Constant(f64),
}

impl StepSchedule {
    pub fn alpha(&self, period: u32) -> f64 {
        let i = period.max(1) as f64;
        match self {
            StepSchedule::Harmonic { c, a, d } => c / (a + i / d),
            StepSchedule::Reciprocal => 1.0 / i,
            StepSchedule::Constant(alpha) => *alpha,
        }
    }

    /// Decreasing schedules must start at or below one; constants must lie
    /// in (0, 1].
    pub fn validate(&self) -> Result<()> {
        match self {
            StepSchedule::Harmonic { c, a, d } => {
                if !(*c > 0.0 && *a >= 0.0 && *d > 0.0) {
                    return Err(Error::InvalidConfig(
                        "harmonic schedule needs c > 0, a >= 0, d > 0".into(),
                    ));
                }
                if self.alpha(1) > 1.0 {
                    return Err(Error::InvalidConfig(format!(
                        "alpha(1) = {} must be <= 1",
                        self.alpha(1)
                    )));
                }
            }
            StepSchedule::Reciprocal => {}
            StepSchedule::Constant(alpha) => {
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "constant step {alpha} must lie in (0,1]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Controller parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub r_min: f64,
    pub r_max: f64,
    /// Extra rate the controller pretends to serve (0 targets the arrival
    /// rates exactly; > 0 gives queues negative drift).
    pub delta: f64,
    pub schedule: StepSchedule,
    /// Update period `M`, in slots.
    pub update_period: u32,
    /// Cap on the instantaneous per-period arrival rate.
    pub lambda_bar: f64,
    pub initial_r: Vec<f64>,
}

impl ControllerConfig {
    pub fn validate(&self, num_links: usize) -> Result<()> {
        if !(self.r_min < self.r_max) {
            return Err(Error::InvalidConfig(format!(
                "r_min {} must be below r_max {}",
                self.r_min, self.r_max
            )));
        }
        if self.delta < 0.0 {
            return Err(Error::InvalidConfig("delta must be >= 0".into()));
        }
        self.schedule.validate()?;
        if self.update_period == 0 {
            return Err(Error::InvalidConfig("update_period must be >= 1".into()));
        }
        if !(self.lambda_bar > 0.0) {
            return Err(Error::InvalidConfig("lambda_bar must be positive".into()));
        }
        if self.initial_r.len() != num_links {
            return Err(Error::DimensionMismatch {
                what: "initial exponents",
                expected: num_links,
                got: self.initial_r.len(),
            });
        }
        if let Some(bad) = self
            .initial_r
            .iter()
            .find(|&&r| !(self.r_min..=self.r_max).contains(&r))
        {
            return Err(Error::InvalidConfig(format!(
                "initial exponent {bad} outside [{}, {}]",
                self.r_min, self.r_max
            )));
        }
        Ok(())
    }

    /// Iterate bounds guaranteed by the soft penalty: any admissible run
    /// keeps every exponent inside this interval.
    pub fn iterate_bounds(&self) -> (f64, f64) {
        (
            self.r_min - 2.0,
            self.r_max + 2.0 * (self.lambda_bar + self.delta),
        )
    }
}

/// Soft window penalty: zero inside `[r_min, r_max]`, linear pull-back
/// outside.
pub fn penalty(y: f64, r_min: f64, r_max: f64) -> f64 {
    if y < r_min {
        r_min - y
    } else if y > r_max {
        r_max - y
    } else {
        0.0
    }
}

/// One controller update for all links; no clamping beyond the penalty.
pub fn update(
    r_prev: &[f64],
    lambda_emp: &[f64],
    s_emp: &[f64],
    alpha: f64,
    cfg: &ControllerConfig,
) -> Result<Vec<f64>> {
    if lambda_emp.len() != r_prev.len() || s_emp.len() != r_prev.len() {
        return Err(Error::DimensionMismatch {
            what: "controller update vectors",
            expected: r_prev.len(),
            got: lambda_emp.len().max(s_emp.len()),
        });
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("step size {alpha} must be in (0,1]")));
    }
    Ok(r_prev
        .iter()
        .zip(lambda_emp.iter().zip(s_emp))
        .map(|(&r, (&l, &s))| r + alpha * (l + cfg.delta - s + penalty(r, cfg.r_min, cfg.r_max)))
        .collect())
}

/// Per-period trajectory of an adaptive run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub periods: Vec<PeriodRecord>,
}

impl Trajectory {
    /// Mean exponents over the last `fraction` of the run.
    pub fn tail_mean_r(&self, fraction: f64) -> Vec<f64> {
        let n = self.periods.len();
        let start = ((1.0 - fraction) * n as f64).floor() as usize;
        let tail = &self.periods[start.min(n.saturating_sub(1))..];
        let k = tail.first().map_or(0, |p| p.r.len());
        let mut mean = vec![0.0; k];
        for p in tail {
            for (m, &ri) in mean.iter_mut().zip(&p.r) {
                *m += ri;
            }
        }
        for m in &mut mean {
            *m /= tail.len() as f64;
        }
        mean
    }

    /// Mean payload lengths over the last `fraction` of the run.
    pub fn tail_mean_payload(&self, fraction: f64) -> Vec<f64> {
        let n = self.periods.len();
        let start = ((1.0 - fraction) * n as f64).floor() as usize;
        let tail = &self.periods[start.min(n.saturating_sub(1))..];
        let k = tail.first().map_or(0, |p| p.t_payload.len());
        let mut mean = vec![0.0; k];
        for p in tail {
            for (m, &ti) in mean.iter_mut().zip(&p.t_payload) {
                *m += ti;
            }
        }
        for m in &mut mean {
            *m /= tail.len() as f64;
        }
        mean
    }
}

struct Controller<'a> {
    cfg: &'a ControllerConfig,
}

impl PeriodHook for Controller<'_> {
    fn on_period_end(&mut self, period: u32, lambda_emp: &[f64], s_emp: &[f64], r: &mut [f64]) {
        let alpha = self.cfg.schedule.alpha(period);
        for (k, rk) in r.iter_mut().enumerate() {
            *rk += alpha
                * (lambda_emp[k] + self.cfg.delta - s_emp[k]
                    + penalty(*rk, self.cfg.r_min, self.cfg.r_max));
        }
    }
}

/// Couple the simulator with the controller for `n_periods` periods of
/// `ctrl.update_period` slots each. `sim.r` and `sim.packet_slots` are
/// overridden by the controller's initial exponents and period.
pub fn run_adaptive(
    sim: &SimConfig,
    ctrl: &ControllerConfig,
    n_periods: u32,
) -> Result<(Trajectory, Metrics)> {
    ctrl.validate(sim.num_links())?;
    if n_periods == 0 {
        return Err(Error::InvalidConfig("n_periods must be >= 1".into()));
    }
    let mut cfg = sim.clone();
    cfg.r = LengthExponents(ctrl.initial_r.clone());
    cfg.packet_slots = ctrl.update_period;
    cfg.n_slots = ctrl.update_period as u64 * n_periods as u64;
    let mut hook = Controller { cfg: ctrl };
    let metrics = run_with_hook(&cfg, &mut hook)?;
    Ok((
        Trajectory {
            periods: metrics.periods.clone(),
        },
        metrics,
    ))
}

/// Deterministic fluid limit of the controller: the same iteration with
/// the exact stationary service rates substituted for the empirical ones.
/// Returns the exponent trajectory endpoint after `n_iters` updates.
pub fn run_ode_limit(
    graph: &ConflictGraph,
    params: &ProtocolParams,
    lambda: &[f64],
    ctrl: &ControllerConfig,
    n_iters: u32,
) -> Result<Vec<f64>> {
    ctrl.validate(graph.num_links())?;
    let analyzer = Analyzer::new(graph, params.clone())?;
    let mut r = ctrl.initial_r.clone();
    for i in 1..=n_iters {
        let rates = analyzer.service_rates(&LengthExponents(r.clone()))?;
        let alpha = ctrl.schedule.alpha(i);
        for (k, rk) in r.iter_mut().enumerate() {
            *rk += alpha
                * (lambda[k] + ctrl.delta - rates[k] + penalty(*rk, ctrl.r_min, ctrl.r_max));
        }
        let (lo, hi) = ctrl.iterate_bounds();
        debug_assert!(
            r.iter().all(|&v| v >= lo - 1e-9 && v <= hi + 1e-9),
            "iterate escaped the penalty bounds"
        );
    }
    Ok(r)
}
