//! Exact propagation under piecewise-constant controls.
//!
//! On interval `j` the generator is constant, so `ψ(t_{j+1}) = e^{-iH_jΔt_j} ψ(t_j)`.
//! The forward sweep takes two half-steps per interval, which yields the
//! midpoint states used by the gradient at no extra cost.

use crate::control::PConstControl;
use crate::error::{input, Result};
use crate::linalg::{Spectrum, StateVector};
use crate::model::ChainModel;

/// States at every node and interval midpoint of one forward sweep, plus the
/// per-interval spectra so the backward sweep can reuse them.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub nodes: Vec<StateVector>,
    pub midpoints: Vec<StateVector>,
    spectra: Vec<Spectrum>,
    time_scale: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &StateVector {
        &self.nodes[self.nodes.len() - 1]
    }

    pub fn spectrum(&self, j: usize) -> &Spectrum {
        &self.spectra[j]
    }

    /// Multiplier on the generator (`1` except for free-final-time runs).
    pub fn time_scale(&self) -> f64 {
        self.time_scale
    }
}

fn check_control(model: &ChainModel, control: &PConstControl, time_scale: f64) -> Result<()> {
    if control.intervals() != model.intervals() {
        return input(format!(
            "control has {} intervals, model grid has {}",
            control.intervals(),
            model.intervals()
        ));
    }
    if !control.is_finite() {
        return input("control has non-finite values");
    }
    if !(time_scale.is_finite() && time_scale > 0.0) {
        return input(format!("time scale must be positive, got {time_scale}"));
    }
    Ok(())
}

/// Forward sweep from `ψ₀` over the model grid.
pub fn propagate_forward(model: &ChainModel, control: &PConstControl) -> Result<Trajectory> {
    propagate_forward_scaled(model, control, 1.0)
}

/// Forward sweep of `dψ/dτ = -i·scale·H ψ` (free-final-time form when the
/// grid is `[0, 1]` and `scale = T`).
pub fn propagate_forward_scaled(
    model: &ChainModel,
    control: &PConstControl,
    time_scale: f64,
) -> Result<Trajectory> {
    check_control(model, control, time_scale)?;
    let m = model.intervals();
    let grid = model.grid();
    let mut nodes = Vec::with_capacity(m + 1);
    let mut midpoints = Vec::with_capacity(m);
    let mut spectra = Vec::with_capacity(m);
    let mut psi = model.psi0().vector().clone();
    nodes.push(psi.clone());
    for j in 0..m {
        let spec = model.interval_hamiltonian(j, control.at(j)).spectrum();
        let half = 0.5 * time_scale * grid.step(j);
        let mid = spec.evolve(half, &psi);
        psi = spec.evolve(half, &mid);
        midpoints.push(mid);
        nodes.push(psi.clone());
        spectra.push(spec);
    }
    Ok(Trajectory {
        nodes,
        midpoints,
        spectra,
        time_scale,
    })
}

/// Node states only, one full step per interval; nothing is cached.
pub fn propagate_nodes(
    model: &ChainModel,
    control: &PConstControl,
    time_scale: f64,
) -> Result<Vec<StateVector>> {
    check_control(model, control, time_scale)?;
    let grid = model.grid();
    let mut psi = model.psi0().vector().clone();
    let mut nodes = Vec::with_capacity(model.intervals() + 1);
    nodes.push(psi.clone());
    for j in 0..model.intervals() {
        let spec = model.interval_hamiltonian(j, control.at(j)).spectrum();
        psi = spec.evolve(time_scale * grid.step(j), &psi);
        nodes.push(psi.clone());
    }
    Ok(nodes)
}

/// Final state `ψ(t_M)` only.
pub fn propagate_final(
    model: &ChainModel,
    control: &PConstControl,
    time_scale: f64,
) -> Result<StateVector> {
    check_control(model, control, time_scale)?;
    let grid = model.grid();
    let mut psi = model.psi0().vector().clone();
    for j in 0..model.intervals() {
        let spec = model.interval_hamiltonian(j, control.at(j)).spectrum();
        psi = spec.evolve(time_scale * grid.step(j), &psi);
    }
    Ok(psi)
}
