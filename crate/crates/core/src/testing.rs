//! Shared fixtures for unit tests.

use rand::Rng;

use crate::control::PConstControl;
use crate::linalg::QuantumState;
use crate::model::{build_xx_chain, envelope_values, ChainModel, ModelParts, OperatorSet, TimeGrid};
use crate::objective::{evaluate_pconst, CauchyCounter, ObjectiveConfig};

/// Transfer along an XX chain (J = 1), end fields, `b̄ = 5`, `q = 8`, `S = 25`,
/// `ψ₀ = e₁`, `ψ_g = e_N`.
pub(crate) fn xx_model(levels: usize, t_final: f64, intervals: usize) -> ChainModel {
    let grid = TimeGrid::uniform(t_final, intervals).unwrap();
    ChainModel::new(ModelParts {
        drift: build_xx_chain(levels, 1.0).unwrap(),
        operators: OperatorSet::EndFields.build(levels).unwrap(),
        sigma: vec![1.0; intervals],
        envelopes: [
            envelope_values(5.0, 8, &grid).unwrap(),
            envelope_values(5.0, 8, &grid).unwrap(),
        ],
        shapes: [vec![25.0; intervals], vec![25.0; intervals]],
        psi0: QuantumState::basis(levels, 0).unwrap(),
        psig: QuantumState::basis(levels, levels - 1).unwrap(),
        grid,
    })
    .unwrap()
}

/// Keeping on three sites: `T = 0.5`, `ψ₀ = ψ_g = e₃`, `b̄ = (5, 3)`.
pub(crate) fn keeping_model(intervals: usize) -> ChainModel {
    let grid = TimeGrid::uniform(0.5, intervals).unwrap();
    ChainModel::new(ModelParts {
        drift: build_xx_chain(3, 1.0).unwrap(),
        operators: OperatorSet::EndFields.build(3).unwrap(),
        sigma: vec![1.0; intervals],
        envelopes: [
            envelope_values(5.0, 8, &grid).unwrap(),
            envelope_values(3.0, 8, &grid).unwrap(),
        ],
        shapes: [vec![25.0; intervals], vec![25.0; intervals]],
        psi0: QuantumState::basis(3, 2).unwrap(),
        psig: QuantumState::basis(3, 2).unwrap(),
        grid,
    })
    .unwrap()
}

/// Uniform sample of the admissible box.
pub(crate) fn random_control<R: Rng>(model: &ChainModel, rng: &mut R) -> PConstControl {
    let m = model.intervals();
    let mut c = PConstControl::zeros(m);
    for l in 0..2 {
        for j in 0..m {
            let nu = model.envelope(l)[j];
            c.channel_mut(l)[j] = if nu > 0.0 { rng.random_range(-nu..=nu) } else { 0.0 };
        }
    }
    c
}

/// Central differences of the objective in every flat coordinate.
pub(crate) fn central_difference(
    model: &ChainModel,
    control: &PConstControl,
    objective: &ObjectiveConfig,
    eps: f64,
) -> Vec<f64> {
    let counter = CauchyCounter::new();
    let a = control.to_flat();
    let f = |x: &[f64]| {
        let c = PConstControl::from_flat(x).unwrap();
        evaluate_pconst(model, &c, objective, &counter).unwrap().evaluation.value
    };
    (0..a.len())
        .map(|k| {
            let mut p = a.clone();
            let mut q = a.clone();
            p[k] += eps;
            q[k] -= eps;
            (f(&p) - f(&q)) / (2.0 * eps)
        })
        .collect()
}
