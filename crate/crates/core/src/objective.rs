//! Objective functions for transfer, keeping, free-final-time transfer and
//! GA keeping, with the bookkeeping terms reported alongside each value.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::control::{rescale_free_time, sample_sin_class, PConstControl, SinClassParams};
use crate::error::{input, Error, Result};
use crate::linalg::{inner, StateVector};
use crate::model::{ChainModel, CHANNELS};
use crate::propagator::{propagate_forward, propagate_nodes, propagate_final, Trajectory};

/// Counts solved Cauchy problems (full forward or backward sweeps).
#[derive(Debug, Default)]
pub struct CauchyCounter(AtomicU64);

impl CauchyCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&self, n: u64) {
        self.0.fetch_add(n, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// `f₁`: terminal infidelity plus control energy.
    TransferF1,
    /// `f₂`: terminal infidelity, integrated infidelity, control energy.
    KeepingF2,
    /// `f̆₃`: free-final-time transfer over the sinusoidal class.
    FreeTF3,
    /// `f₄`: worst node infidelity over the sinusoidal class.
    GaKeepingF4,
}

/// Objective selection and weights; all weights are non-negative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub kind: ObjectiveKind,
    #[serde(default)]
    pub p_psi: f64,
    #[serde(default)]
    pub p_u: [f64; CHANNELS],
    #[serde(default)]
    pub p_x: f64,
    #[serde(default)]
    pub p_t: f64,
    #[serde(default)]
    pub p_y: f64,
}

impl ObjectiveConfig {
    pub fn new(kind: ObjectiveKind) -> Self {
        Self {
            kind,
            p_psi: 0.0,
            p_u: [0.0; CHANNELS],
            p_x: 0.0,
            p_t: 0.0,
            p_y: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = [self.p_psi, self.p_u[0], self.p_u[1], self.p_x, self.p_t, self.p_y];
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return input("objective weights must be finite and >= 0");
        }
        Ok(())
    }
}

/// Breakdown of an objective value. Diagnostic terms are filled whenever the
/// trajectory makes them available, regardless of objective kind.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Terms {
    /// `F(ψ(T); ψ_g)`.
    pub final_infidelity: f64,
    /// Trapezoid `∫₀^T F(ψ(t); ψ_g) dt` over the grid nodes.
    pub integral: f64,
    /// `max_{j ≥ 1} F(ψ(t_j); ψ_g)`.
    pub max_node: f64,
    /// Control-dependent penalty (energy, ℓ₁ on controls, or ℓ₁ on genes).
    pub control_penalty: f64,
    /// `P_T T`.
    pub time_penalty: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: f64,
    pub terms: Terms,
}

/// `F = 1 - |⟨ψ_g, ψ⟩|²`, clamped to `[0, 1]`.
///
/// Evaluated as `‖ψ - ⟨ψ_g, ψ⟩ψ_g‖²`, equal for unit vectors; the direct
/// form loses all relative precision when `F` is small, which swamps
/// finite-difference checks.
pub fn infidelity(psi: &StateVector, psig: &StateVector) -> f64 {
    let z = inner(psig, psi);
    psi.iter()
        .zip(psig.iter())
        .map(|(p, g)| (p - g * z).norm_sqr())
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// `Σ_l P_{u_l} Σ_j Δt_j S_{l,j} c_{l,j}²`.
pub fn control_energy(model: &ChainModel, control: &PConstControl, p_u: [f64; CHANNELS]) -> f64 {
    let grid = model.grid();
    (0..CHANNELS)
        .map(|l| {
            if p_u[l] == 0.0 {
                return 0.0;
            }
            let s = model.shape(l);
            p_u[l]
                * control
                    .channel(l)
                    .iter()
                    .enumerate()
                    .map(|(j, c)| grid.step(j) * s[j] * c * c)
                    .sum::<f64>()
        })
        .sum()
}

fn node_statistics(model: &ChainModel, nodes: &[StateVector]) -> (f64, f64, f64) {
    let psig = model.psig().vector();
    let f: Vec<f64> = nodes.iter().map(|p| infidelity(p, psig)).collect();
    let integral = f
        .iter()
        .zip(model.grid().trapezoid_weights())
        .map(|(x, w)| x * w)
        .sum();
    let max_node = f[1..].iter().copied().fold(0.0, f64::max);
    (f[f.len() - 1], integral, max_node)
}

fn finite(e: Evaluation) -> Result<Evaluation> {
    if e.value.is_finite() {
        Ok(e)
    } else {
        Err(Error::NonFinite(format!("objective value {}", e.value)))
    }
}

/// Objective value plus the forward trajectory that produced it.
#[derive(Clone, Debug)]
pub struct Evaluated {
    pub evaluation: Evaluation,
    pub trajectory: Trajectory,
}

/// Evaluates `f₁` or `f₂` with one forward sweep and keeps the trajectory.
pub fn evaluate_pconst(
    model: &ChainModel,
    control: &PConstControl,
    objective: &ObjectiveConfig,
    counter: &CauchyCounter,
) -> Result<Evaluated> {
    let trajectory = propagate_forward(model, control)?;
    counter.add(1);
    let (final_infidelity, integral, max_node) = node_statistics(model, &trajectory.nodes);
    let penalty = control_energy(model, control, objective.p_u);
    let value = match objective.kind {
        ObjectiveKind::TransferF1 => final_infidelity + penalty,
        ObjectiveKind::KeepingF2 => final_infidelity + objective.p_psi * integral + penalty,
        other => return input(format!("{other:?} is not defined on piecewise-constant controls")),
    };
    let evaluation = finite(Evaluation {
        value,
        terms: Terms {
            final_infidelity,
            integral,
            max_node,
            control_penalty: penalty,
            time_penalty: 0.0,
        },
    })?;
    Ok(Evaluated {
        evaluation,
        trajectory,
    })
}

pub fn eval_f1(
    model: &ChainModel,
    control: &PConstControl,
    objective: &ObjectiveConfig,
    counter: &CauchyCounter,
) -> Result<Evaluation> {
    let mut o = objective.clone();
    o.kind = ObjectiveKind::TransferF1;
    Ok(evaluate_pconst(model, control, &o, counter)?.evaluation)
}

pub fn eval_f2(
    model: &ChainModel,
    control: &PConstControl,
    objective: &ObjectiveConfig,
    counter: &CauchyCounter,
) -> Result<Evaluation> {
    let mut o = objective.clone();
    o.kind = ObjectiveKind::KeepingF2;
    Ok(evaluate_pconst(model, control, &o, counter)?.evaluation)
}

/// `f̆₃(x, T)`: infidelity of the rescaled propagation at `τ = 1`, plus
/// `P_x Σ_{j=1}^{M-1} Σ_l |ŭ_l(τ_j)|` (interior intervals) and `P_T T`.
pub fn eval_f3_free_t(
    tau_model: &ChainModel,
    params: &SinClassParams,
    time_range: (f64, f64),
    objective: &ObjectiveConfig,
    counter: &CauchyCounter,
) -> Result<Evaluation> {
    let ft = rescale_free_time(params, tau_model, time_range)?;
    let psi = propagate_final(tau_model, &ft.control, ft.time_scale)?;
    counter.add(1);
    let f = infidelity(&psi, tau_model.psig().vector());
    let l1: f64 = (0..CHANNELS)
        .map(|l| ft.control.channel(l).iter().skip(1).map(|c| c.abs()).sum::<f64>())
        .sum();
    let terms = Terms {
        final_infidelity: f,
        integral: 0.0,
        max_node: 0.0,
        control_penalty: objective.p_x * l1,
        time_penalty: objective.p_t * ft.time_scale,
    };
    finite(Evaluation {
        value: f + terms.control_penalty + terms.time_penalty,
        terms,
    })
}

/// `f₄(y)`: worst node infidelity of the sampled sinusoidal control plus
/// `P_y Σ|y_s|`.
pub fn eval_f4(
    model: &ChainModel,
    params: &SinClassParams,
    objective: &ObjectiveConfig,
    counter: &CauchyCounter,
) -> Result<Evaluation> {
    let control = sample_sin_class(params, model.grid(), [model.envelope(0), model.envelope(1)])?;
    let nodes = propagate_nodes(model, &control, 1.0)?;
    counter.add(1);
    let (final_infidelity, integral, max_node) = node_statistics(model, &nodes);
    let l1: f64 = params
        .gamma
        .iter()
        .chain(&params.omega)
        .chain(&params.phase)
        .flatten()
        .map(|x| x.abs())
        .sum();
    let terms = Terms {
        final_infidelity,
        integral,
        max_node,
        control_penalty: objective.p_y * l1,
        time_penalty: 0.0,
    };
    finite(Evaluation {
        value: max_node + terms.control_penalty,
        terms,
    })
}
