//! Gradient projection with optional heavy-ball terms.
//!
//! ```text
//! a_{k+1} = Pr(a_k - α g_k + β (a_k - a_{k-1}) + γ (a_{k-1} - a_{k-2}))
//! ```
//!
//! `Pr` clamps into the envelope box. One-step (1S) uses `β = γ = 0`,
//! two-step (2S) `γ = 0`. Missing history is filled with `a_0`, so 2S starts
//! with one 1S step and 3S with one 1S and one 2S step.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adjoint::{gradient_from_forward, GradientRule};
use crate::control::{flat_bounds, project_box, PConstControl};
use crate::error::{input, Error, Result};
use crate::model::ChainModel;
use crate::objective::{evaluate_pconst, CauchyCounter, Evaluated, ObjectiveConfig, ObjectiveKind, Terms};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GpmForm {
    #[serde(rename = "1S")]
    OneStep,
    #[serde(rename = "2S")]
    TwoStep,
    #[serde(rename = "3S")]
    ThreeStep,
}

impl GpmForm {
    pub fn label(self) -> &'static str {
        match self {
            GpmForm::OneStep => "1S",
            GpmForm::TwoStep => "2S",
            GpmForm::ThreeStep => "3S",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StoppingRule {
    ObjectiveBelow { threshold: f64 },
    /// `F(ψ(T)) < final_below` and `∫F dt < integral_below`.
    KeepingPair { final_below: f64, integral_below: f64 },
    /// `‖a - Pr(a - α g)‖ / ‖a‖ < epsilon` (absolute when `a = 0`).
    StationarityBelow { epsilon: f64 },
    IterationCap,
}

impl StoppingRule {
    /// Short human-readable form, e.g. `F(ψ(T)) < 1e-3 ∧ ∫F dt < 8e-3`.
    pub fn describe(&self) -> String {
        match *self {
            StoppingRule::ObjectiveBelow { threshold } => format!("f < {threshold:e}"),
            StoppingRule::KeepingPair { final_below, integral_below } => {
                format!("F(ψ(T)) < {final_below:e} ∧ ∫F dt < {integral_below:e}")
            }
            StoppingRule::StationarityBelow { epsilon } => format!("‖a - Pr(a - α g)‖/‖a‖ < {epsilon:e}"),
            StoppingRule::IterationCap => "iteration cap".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpmConfig {
    pub form: GpmForm,
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub gamma: f64,
    pub max_iters: usize,
    #[serde(default)]
    pub stopping: Vec<StoppingRule>,
    #[serde(default)]
    pub rule: GradientRule,
    /// Abort after this many consecutive increases of the objective.
    #[serde(default = "default_divergence_window")]
    pub divergence_window: usize,
}

fn default_divergence_window() -> usize {
    50
}

impl GpmConfig {
    pub fn new(form: GpmForm, alpha: f64, beta: f64, gamma: f64, max_iters: usize) -> Self {
        Self {
            form,
            alpha,
            beta,
            gamma,
            max_iters,
            stopping: vec![StoppingRule::IterationCap],
            rule: GradientRule::Midpoint,
            divergence_window: default_divergence_window(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        for (name, v) in [("beta", self.beta), ("gamma", self.gamma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.form == GpmForm::OneStep && self.beta != 0.0 {
            return Err(Error::Config("1S does not use beta".into()));
        }
        if self.form != GpmForm::ThreeStep && self.gamma != 0.0 {
            return Err(Error::Config(format!("{} does not use gamma", self.form.label())));
        }
        if self.divergence_window == 0 {
            return Err(Error::Config("divergence_window must be >= 1".into()));
        }
        for rule in &self.stopping {
            let ok = match *rule {
                StoppingRule::ObjectiveBelow { threshold } => threshold.is_finite(),
                StoppingRule::KeepingPair { final_below, integral_below } => {
                    final_below.is_finite() && integral_below.is_finite()
                }
                StoppingRule::StationarityBelow { epsilon } => epsilon.is_finite() && epsilon >= 0.0,
                StoppingRule::IterationCap => true,
            };
            if !ok {
                return Err(Error::Config(format!("bad stopping threshold in {rule:?}")));
            }
        }
        Ok(())
    }

    fn momentum(&self) -> (f64, f64) {
        match self.form {
            GpmForm::OneStep => (0.0, 0.0),
            GpmForm::TwoStep => (self.beta, 0.0),
            GpmForm::ThreeStep => (self.beta, self.gamma),
        }
    }
}

/// One projected iterate; `β`, `γ` are zeroed as the form requires.
pub fn gpm_step(
    config: &GpmConfig,
    a_k: &[f64],
    a_km1: &[f64],
    a_km2: &[f64],
    grad: &[f64],
    bounds: &[f64],
) -> Result<Vec<f64>> {
    let n = a_k.len();
    if [a_km1.len(), a_km2.len(), grad.len(), bounds.len()].iter().any(|&x| x != n) {
        return input("gpm_step: vector lengths differ");
    }
    let (beta, gamma) = config.momentum();
    let raw: Vec<f64> = (0..n)
        .map(|s| a_k[s] - config.alpha * grad[s] + beta * (a_k[s] - a_km1[s]) + gamma * (a_km1[s] - a_km2[s]))
        .collect();
    project_box(&raw, bounds)
}

/// `‖a - Pr(a - α g)‖₂`.
pub fn stationarity_residual(a: &[f64], grad: &[f64], alpha: f64, bounds: &[f64]) -> Result<f64> {
    if grad.len() != a.len() {
        return input("stationarity_residual: vector lengths differ");
    }
    let moved: Vec<f64> = a.iter().zip(grad).map(|(x, g)| x - alpha * g).collect();
    let p = project_box(&moved, bounds)?;
    Ok(a.iter().zip(&p).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub k: usize,
    pub value: f64,
    pub terms: Terms,
    /// `‖a_k - Pr(a_k - α g_k)‖₂`.
    pub stationarity: f64,
    /// Cauchy problems solved up to and including the evaluation of `a_k`.
    pub cauchy_count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ObjectiveBelow,
    KeepingPair,
    StationarityBelow,
    IterationCap,
    Diverged,
    NonFinite,
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub rows: Vec<IterationRow>,
    pub final_control: PConstControl,
    pub stop: StopReason,
    /// Set when the run was aborted.
    pub diagnostic: Option<String>,
    pub wall_time: f64,
}

impl RunRecord {
    pub fn last(&self) -> &IterationRow {
        self.rows.last().expect("a record holds at least the initial evaluation")
    }

    /// Cauchy problems behind the last iterate.
    pub fn complexity(&self) -> u64 {
        self.last().cauchy_count
    }

    pub fn converged(&self) -> bool {
        matches!(
            self.stop,
            StopReason::ObjectiveBelow | StopReason::KeepingPair | StopReason::StationarityBelow
        )
    }
}

fn value_rule_met(rules: &[StoppingRule], value: f64, terms: &Terms) -> Option<StopReason> {
    rules.iter().find_map(|r| match *r {
        StoppingRule::ObjectiveBelow { threshold } if value < threshold => Some(StopReason::ObjectiveBelow),
        StoppingRule::KeepingPair { final_below, integral_below }
            if terms.final_infidelity < final_below && terms.integral < integral_below =>
        {
            Some(StopReason::KeepingPair)
        }
        _ => None,
    })
}

/// Runs the projected iteration from `initial` until a stopping rule fires.
///
/// Rules are checked after every evaluation in declared order; the iteration
/// cap `max_iters` always applies. The returned record reports the
/// stationarity residual of every row; the residual of the final row costs one
/// backward sweep that is not charged to the complexity ledger unless a
/// stationarity rule asked for it.
pub fn run_gpm(
    model: &ChainModel,
    objective: &ObjectiveConfig,
    initial: &PConstControl,
    config: &GpmConfig,
) -> Result<RunRecord> {
    config.validate()?;
    objective.validate()?;
    if !matches!(objective.kind, ObjectiveKind::TransferF1 | ObjectiveKind::KeepingF2) {
        return input(format!("GPM needs f1 or f2, got {:?}", objective.kind));
    }
    if !initial.is_feasible(model) {
        return input("initial control violates the envelope box");
    }
    let start = Instant::now();
    let bounds = flat_bounds(model);
    let counter = CauchyCounter::new();
    let uses_stationarity = config
        .stopping
        .iter()
        .any(|r| matches!(r, StoppingRule::StationarityBelow { .. }));

    let mut rows = Vec::new();
    let mut a = initial.to_flat();
    let mut a_km1 = a.clone();
    let mut a_km2 = a.clone();
    let mut control = initial.clone();
    let mut increases = 0usize;

    let abort = |rows: Vec<IterationRow>, control: PConstControl, stop: StopReason, msg: String| RunRecord {
        rows,
        final_control: control,
        stop,
        diagnostic: Some(msg),
        wall_time: start.elapsed().as_secs_f64(),
    };

    let mut current: Evaluated = match evaluate_pconst(model, &control, objective, &counter) {
        Ok(e) => e,
        Err(Error::NonFinite(msg)) => {
            return Ok(abort(rows, control, StopReason::NonFinite, format!("initial evaluation: {msg}")))
        }
        Err(e) => return Err(e),
    };
    let mut k = 0usize;
    loop {
        let value = current.evaluation.value;
        let terms = current.evaluation.terms;
        let mut stop = value_rule_met(&config.stopping, value, &terms);
        if stop.is_none() && k >= config.max_iters {
            stop = Some(StopReason::IterationCap);
        }
        if stop.is_none() && increases >= config.divergence_window {
            stop = Some(StopReason::Diverged);
        }

        // a stopped run still reports the residual of its last row
        let charged = stop.is_none() || uses_stationarity;
        let scratch = CauchyCounter::new();
        let ledger = if charged { &counter } else { &scratch };
        let trajectory = current.trajectory;
        let gradient = gradient_from_forward(model, &control, objective, config.rule, trajectory, ledger);
        // the backward sweep is charged even when its output is non-finite
        let count_at_row = counter.get() - u64::from(charged);
        let grad = match gradient {
            Ok(r) => r.grad,
            Err(Error::NonFinite(msg)) => {
                rows.push(IterationRow {
                    k,
                    value,
                    terms,
                    stationarity: f64::NAN,
                    cauchy_count: count_at_row,
                });
                return Ok(abort(rows, control, StopReason::NonFinite, format!("iteration {k}: {msg}")));
            }
            Err(e) => return Err(e),
        };
        let stationarity = stationarity_residual(&a, &grad, config.alpha, &bounds)?;
        rows.push(IterationRow {
            k,
            value,
            terms,
            stationarity,
            cauchy_count: count_at_row,
        });
        if stop.is_none() {
            let rel = if norm(&a) > 0.0 { stationarity / norm(&a) } else { stationarity };
            stop = config.stopping.iter().find_map(|r| match *r {
                StoppingRule::StationarityBelow { epsilon } if rel < epsilon => Some(StopReason::StationarityBelow),
                _ => None,
            });
        }
        if let Some(stop) = stop {
            let diagnostic = (stop == StopReason::Diverged).then(|| {
                format!("objective increased for {} consecutive iterations", config.divergence_window)
            });
            return Ok(RunRecord {
                rows,
                final_control: control,
                stop,
                diagnostic,
                wall_time: start.elapsed().as_secs_f64(),
            });
        }

        let next = gpm_step(config, &a, &a_km1, &a_km2, &grad, &bounds)?;
        let next_control = PConstControl::from_flat(&next)?;
        if !next_control.is_feasible(model) {
            return Err(Error::Input(format!("iterate {} left the box", k + 1)));
        }
        let evaluated = match evaluate_pconst(model, &next_control, objective, &counter) {
            Ok(e) => e,
            Err(Error::NonFinite(msg)) => {
                return Ok(abort(rows, control, StopReason::NonFinite, format!("iteration {}: {msg}", k + 1)))
            }
            Err(e) => return Err(e),
        };
        increases = if evaluated.evaluation.value > value { increases + 1 } else { 0 };
        a_km2 = std::mem::replace(&mut a_km1, std::mem::replace(&mut a, next));
        control = next_control;
        current = evaluated;
        k += 1;
    }
}
