//! Adjoint-state gradients of `f₁` (transfer) and `f₂` (keeping) with respect
//! to the piecewise-constant control vector.
//!
//! Component `s ↔ (l, j)` of the gradient is the integral over `[t_j, t_{j+1}]`
//! of the density
//!
//! ```text
//! G_l(t) = -Im⟨η(t), σ_j V_l ψ(t)⟩ + 2 P_{u_l} S_{l,j} c_{l,j}
//! ```
//!
//! where `ψ` is the forward state and `η` the adjoint state, obtained by a
//! backward sweep from the transversality vector `η(T)`. Inner products are
//! conjugate-linear in the first slot. Two quadratures are offered:
//!
//! * [`GradientRule::Midpoint`]: `Δt_j · G_l(t̄_j)` at the interval midpoint,
//!   with the keeping source integrated by the trapezoid rule over each half
//!   interval. Second-order accurate in `Δt`.
//! * [`GradientRule::Exact`]: the interval integral evaluated in closed form
//!   in the eigenbasis of the interval Hamiltonian. This is the exact gradient
//!   of the discretized objective (keeping integral by trapezoid over nodes).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::control::PConstControl;
use crate::error::{input, Error, Result};
use crate::linalg::{inner, Spectrum, StateVector, C64};
use crate::model::{ChainModel, CHANNELS};
use crate::objective::{evaluate_pconst, CauchyCounter, ObjectiveConfig, ObjectiveKind};
use crate::propagator::Trajectory;

/// Scale `κ` in `η(T) = κ ⟨ψ_g, ψ(T)⟩ ψ_g`. With `⟨a, b⟩ = Σ conj(a) b` and
/// `F = 1 - |⟨ψ_g, ψ⟩|²`, differentiating gives `κ = 2`; the finite-difference
/// tests pin this value.
pub const TRANSVERSALITY_SCALE: f64 = 2.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientRule {
    #[default]
    Midpoint,
    Exact,
}

/// Adjoint states from one backward sweep.
#[derive(Clone, Debug)]
pub struct AdjointSweep {
    /// `η(t_j)` at every node.
    pub nodes: Vec<StateVector>,
    /// `η(t̄_j)` at every interval midpoint.
    pub midpoints: Vec<StateVector>,
    /// Left limit `η(t_{j+1}⁻)` seen from inside interval `j`; differs from
    /// `nodes[j + 1]` only by the node share of the keeping source.
    right_limits: Vec<StateVector>,
}

#[derive(Clone, Debug)]
pub struct GradientResult {
    /// Channel-major gradient, aligned with [`PConstControl::to_flat`].
    pub grad: Vec<f64>,
    pub forward: Trajectory,
    pub adjoint: AdjointSweep,
    /// Cauchy problems solved by this call.
    pub cauchy_count: u64,
}

/// Transversality vector `κ ⟨ψ_g, ψ(T)⟩ ψ_g`.
pub fn adjoint_terminal_transfer(psi_t: &StateVector, psig: &StateVector) -> StateVector {
    psig * (inner(psig, psi_t) * TRANSVERSALITY_SCALE)
}

fn check_forward(model: &ChainModel, fwd: &Trajectory) -> Result<()> {
    let m = model.intervals();
    if fwd.nodes.len() != m + 1 || fwd.midpoints.len() != m {
        return Err(Error::Input("forward sweep does not match the model grid".into()));
    }
    if fwd.time_scale() != 1.0 {
        return input("gradients are defined for unscaled propagation only");
    }
    Ok(())
}

fn sweep(model: &ChainModel, fwd: &Trajectory, eta_t: StateVector, p_psi: f64) -> Result<AdjointSweep> {
    check_forward(model, fwd)?;
    if eta_t.len() != model.levels() {
        return input("terminal adjoint has the wrong dimension");
    }
    let m = model.intervals();
    let grid = model.grid();
    let g = model.psig().vector();
    let keeping = p_psi != 0.0;
    // 2 P_ψ ⟨ψ_g, ψ⟩ ψ_g: the source density of the inhomogeneous adjoint
    let source = |psi: &StateVector, w: f64| g * (inner(g, psi) * (2.0 * p_psi * w));

    let mut nodes = vec![StateVector::zeros(0); m + 1];
    let mut midpoints = vec![StateVector::zeros(0); m];
    let mut right_limits = vec![StateVector::zeros(0); m];
    nodes[m] = eta_t;
    for j in (0..m).rev() {
        let spec = fwd.spectrum(j);
        let h = grid.step(j);
        let next = &nodes[j + 1];
        let (right, mid, node) = if keeping {
            let right = next + source(&fwd.nodes[j + 1], 0.5 * h);
            let mid = spec.evolve(-0.5 * h, &(next + source(&fwd.nodes[j + 1], 0.25 * h)))
                + source(&fwd.midpoints[j], 0.25 * h);
            let node = spec.evolve(-h, &right) + source(&fwd.nodes[j], 0.5 * h);
            (right, mid, node)
        } else {
            (next.clone(), spec.evolve(-0.5 * h, next), spec.evolve(-h, next))
        };
        right_limits[j] = right;
        midpoints[j] = mid;
        nodes[j] = node;
    }
    Ok(AdjointSweep {
        nodes,
        midpoints,
        right_limits,
    })
}

/// Homogeneous backward sweep `η(t_j) = e^{iH_jΔt_j} η(t_{j+1})`.
pub fn backward_sweep_transfer(model: &ChainModel, fwd: &Trajectory, eta_t: StateVector) -> Result<AdjointSweep> {
    sweep(model, fwd, eta_t, 0.0)
}

/// Backward sweep with the keeping source `2 P_ψ ⟨ψ_g, ψ(t)⟩ ψ_g`, integrated
/// by the trapezoid rule on each (half) interval.
pub fn backward_sweep_keeping(
    model: &ChainModel,
    fwd: &Trajectory,
    eta_t: StateVector,
    p_psi: f64,
) -> Result<AdjointSweep> {
    if !(p_psi.is_finite() && p_psi >= 0.0) {
        return input("P_psi must be finite and >= 0");
    }
    sweep(model, fwd, eta_t, p_psi)
}

/// `sin(x)/x` with the removable singularity filled in.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `∫_{t_j}^{t_{j+1}} -Im⟨η(t), W ψ(t)⟩ dt` for `ψ(t_j + s) = e^{-iHs} ψ_left`
/// and `η(t_j + s) = e^{-iH(s - h)} η_right`, in closed form:
/// in eigen-coordinates the integrand is `Σ conj(e_a) W̃_ab p_b e^{i(λ_a-λ_b)s} e^{-iλ_a h}`,
/// whose integral is `h e^{-i(λ_a+λ_b)h/2} sinc((λ_a-λ_b)h/2)` per pair.
fn exact_interval_integral(spec: &Spectrum, w_rot: &DMatrix<C64>, p: &StateVector, e: &StateVector, h: f64) -> f64 {
    let lam = spec.eigenvalues();
    let n = lam.len();
    let mut acc = C64::new(0.0, 0.0);
    for a in 0..n {
        let ea = e[a].conj();
        for b in 0..n {
            let phase = -0.5 * (lam[a] + lam[b]) * h;
            let weight = h * sinc(0.5 * (lam[a] - lam[b]) * h);
            acc += ea * w_rot[(a, b)] * p[b] * C64::new(phase.cos(), phase.sin()) * weight;
        }
    }
    -acc.im
}

/// Single gradient component `(l, j)`.
#[allow(clippy::too_many_arguments)]
pub fn gradient_component(
    model: &ChainModel,
    control: &PConstControl,
    fwd: &Trajectory,
    adj: &AdjointSweep,
    l: usize,
    j: usize,
    p_u: [f64; CHANNELS],
    rule: GradientRule,
) -> Result<f64> {
    if l >= CHANNELS || j >= model.intervals() || control.intervals() != model.intervals() {
        return input(format!("gradient index (l = {l}, j = {j}) out of range"));
    }
    check_forward(model, fwd)?;
    let h = model.grid().step(j);
    let w = model.control_derivative(j, l);
    let dynamic = match rule {
        GradientRule::Midpoint => -inner(&adj.midpoints[j], &w.apply(&fwd.midpoints[j])).im * h,
        GradientRule::Exact => {
            let spec = fwd.spectrum(j);
            exact_interval_integral(
                spec,
                &spec.rotate(w.matrix()),
                &spec.to_eigenbasis(&fwd.nodes[j]),
                &spec.to_eigenbasis(&adj.right_limits[j]),
                h,
            )
        }
    };
    Ok(dynamic + h * 2.0 * p_u[l] * model.shape(l)[j] * control.channel(l)[j])
}

fn assemble(
    model: &ChainModel,
    control: &PConstControl,
    fwd: &Trajectory,
    adj: &AdjointSweep,
    p_u: [f64; CHANNELS],
    rule: GradientRule,
) -> Vec<f64> {
    let m = model.intervals();
    let grid = model.grid();
    let mut grad = vec![0.0; CHANNELS * m];
    for j in 0..m {
        let h = grid.step(j);
        let (p, e, spec) = match rule {
            GradientRule::Exact => {
                let spec = fwd.spectrum(j);
                (
                    spec.to_eigenbasis(&fwd.nodes[j]),
                    spec.to_eigenbasis(&adj.right_limits[j]),
                    Some(spec),
                )
            }
            GradientRule::Midpoint => (StateVector::zeros(0), StateVector::zeros(0), None),
        };
        for l in 0..CHANNELS {
            let w = model.control_derivative(j, l);
            let dynamic = match spec {
                None => -inner(&adj.midpoints[j], &w.apply(&fwd.midpoints[j])).im * h,
                Some(spec) => exact_interval_integral(spec, &spec.rotate(w.matrix()), &p, &e, h),
            };
            grad[l * m + j] = dynamic + h * 2.0 * p_u[l] * model.shape(l)[j] * control.channel(l)[j];
        }
    }
    grad
}

/// Gradient from an already computed forward sweep (one backward sweep).
pub fn gradient_from_forward(
    model: &ChainModel,
    control: &PConstControl,
    objective: &ObjectiveConfig,
    rule: GradientRule,
    forward: Trajectory,
    counter: &CauchyCounter,
) -> Result<GradientResult> {
    let eta_t = adjoint_terminal_transfer(forward.final_state(), model.psig().vector());
    let adjoint = match objective.kind {
        ObjectiveKind::TransferF1 => backward_sweep_transfer(model, &forward, eta_t)?,
        ObjectiveKind::KeepingF2 => backward_sweep_keeping(model, &forward, eta_t, objective.p_psi)?,
        other => return input(format!("no adjoint gradient for {other:?}")),
    };
    counter.add(1);
    let grad = assemble(model, control, &forward, &adjoint, objective.p_u, rule);
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient".into()));
    }
    Ok(GradientResult {
        grad,
        forward,
        adjoint,
        cauchy_count: 1,
    })
}

/// Full gradient: one forward and one backward sweep.
pub fn grad_f(
    model: &ChainModel,
    control: &PConstControl,
    objective: &ObjectiveConfig,
    rule: GradientRule,
    counter: &CauchyCounter,
) -> Result<GradientResult> {
    if !matches!(objective.kind, ObjectiveKind::TransferF1 | ObjectiveKind::KeepingF2) {
        return input(format!("no adjoint gradient for {:?}", objective.kind));
    }
    let evaluated = evaluate_pconst(model, control, objective, counter)?;
    let mut result = gradient_from_forward(model, control, objective, rule, evaluated.trajectory, counter)?;
    result.cauchy_count = 2;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::HermitianMatrix;
    use crate::objective::evaluate_pconst;
    use crate::propagator::propagate_forward;
    use crate::testing::{central_difference, keeping_model, random_control, xx_model};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn transfer_cfg(p_u: f64) -> ObjectiveConfig {
        let mut c = ObjectiveConfig::new(ObjectiveKind::TransferF1);
        c.p_u = [p_u; 2];
        c
    }

    /// Richardson-extrapolated central differences; f64 rounding makes a bare
    /// `1e-6` step too noisy for small components.
    fn richardson(model: &ChainModel, control: &PConstControl, cfg: &ObjectiveConfig) -> Vec<f64> {
        let a = central_difference(model, control, cfg, 1e-4);
        let b = central_difference(model, control, cfg, 2e-4);
        a.iter().zip(&b).map(|(x, y)| (4.0 * x - y) / 3.0).collect()
    }

    fn keeping_cfg(p_psi: f64, p_u: f64) -> ObjectiveConfig {
        let mut c = ObjectiveConfig::new(ObjectiveKind::KeepingF2);
        c.p_psi = p_psi;
        c.p_u = [p_u; 2];
        c
    }

    #[test]
    fn terminal_vector_cases() {
        let g = crate::linalg::QuantumState::basis(3, 2).unwrap().into_vector();
        let perp = crate::linalg::QuantumState::basis(3, 0).unwrap().into_vector();
        assert!(adjoint_terminal_transfer(&perp, &g).norm() == 0.0);
        assert_eq!(adjoint_terminal_transfer(&g, &g), &g * C64::new(TRANSVERSALITY_SCALE, 0.0));
    }

    #[test]
    fn transfer_sweep_zero_hamiltonian_is_constant() {
        let mut parts = xx_model(3, 1.0, 8).into_parts();
        parts.drift = HermitianMatrix::zeros(3);
        let model = ChainModel::new(parts).unwrap();
        let fwd = propagate_forward(&model, &PConstControl::zeros(8)).unwrap();
        let eta = StateVector::from_fn(3, |k, _| C64::new(k as f64, 1.0));
        let adj = backward_sweep_transfer(&model, &fwd, eta.clone()).unwrap();
        for v in adj.nodes.iter().chain(&adj.midpoints) {
            assert_eq!(v, &eta);
        }
    }

    #[test]
    fn transfer_sweep_preserves_norm_and_splits() {
        let model = xx_model(3, std::f64::consts::PI, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let control = random_control(&model, &mut rng);
        let fwd = propagate_forward(&model, &control).unwrap();
        let eta_t = StateVector::from_fn(3, |k, _| C64::new(0.3 * k as f64, -0.2));
        let adj = backward_sweep_transfer(&model, &fwd, eta_t.clone()).unwrap();
        for v in adj.nodes.iter().chain(&adj.midpoints) {
            assert!((v.norm() - eta_t.norm()).abs() < 1e-10);
        }
        // midpoint = node value moved back half an interval, via two quarter steps
        for j in 0..16 {
            let spec = fwd.spectrum(j);
            let q = 0.25 * model.grid().step(j);
            let two_quarters = spec.evolve(-q, &spec.evolve(-q, &adj.nodes[j + 1]));
            assert!((&adj.midpoints[j] - two_quarters).norm() < 1e-12);
        }
    }

    #[test]
    fn keeping_sweep_without_weight_is_transfer_sweep() {
        let model = keeping_model(20);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let control = random_control(&model, &mut rng);
        let fwd = propagate_forward(&model, &control).unwrap();
        let eta_t = adjoint_terminal_transfer(fwd.final_state(), model.psig().vector());
        let a = backward_sweep_transfer(&model, &fwd, eta_t.clone()).unwrap();
        let b = backward_sweep_keeping(&model, &fwd, eta_t, 0.0).unwrap();
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.midpoints, b.midpoints);
    }

    #[test]
    fn keeping_source_vanishes_off_goal() {
        // with ψ_g = e₃ and V acting on site 1 only, a trajectory that never
        // reaches site 3 (H₀ = 0) has zero overlap and thus zero source
        let mut parts = keeping_model(10).into_parts();
        parts.drift = HermitianMatrix::zeros(3);
        parts.psi0 = crate::linalg::QuantumState::basis(3, 0).unwrap();
        let model = ChainModel::new(parts).unwrap();
        let control = PConstControl::constant(10, [0.4, 0.0]);
        let fwd = propagate_forward(&model, &control).unwrap();
        let eta_t = StateVector::from_fn(3, |k, _| C64::new(1.0, k as f64));
        let a = backward_sweep_transfer(&model, &fwd, eta_t.clone()).unwrap();
        let b = backward_sweep_keeping(&model, &fwd, eta_t, 1.0).unwrap();
        for (x, y) in a.nodes.iter().zip(&b.nodes) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn keeping_midpoint_adjoint_refines_at_second_order() {
        // a control piecewise constant on the coarse grid is represented
        // exactly on refinements; only the source quadrature changes
        let coarse = 25;
        let base = keeping_model(coarse);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c0 = random_control(&base, &mut rng);
        let adjoint_at_coarse_midpoints = |refine: usize| -> Vec<StateVector> {
            let model = keeping_model(coarse * refine);
            let u: Vec<Vec<f64>> = (0..CHANNELS)
                .map(|l| (0..coarse * refine).map(|j| c0.channel(l)[j / refine]).collect())
                .collect();
            let control = PConstControl::new(u[0].clone(), u[1].clone()).unwrap();
            let fwd = propagate_forward(&model, &control).unwrap();
            let eta_t = adjoint_terminal_transfer(fwd.final_state(), model.psig().vector());
            let adj = backward_sweep_keeping(&model, &fwd, eta_t, 1.0).unwrap();
            (0..coarse)
                .map(|j| {
                    if refine == 1 {
                        adj.midpoints[j].clone()
                    } else {
                        adj.nodes[j * refine + refine / 2].clone()
                    }
                })
                .collect()
        };
        let a = adjoint_at_coarse_midpoints(1);
        let b = adjoint_at_coarse_midpoints(2);
        let c = adjoint_at_coarse_midpoints(4);
        let d = |x: &[StateVector], y: &[StateVector]| x.iter().zip(y).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        let ratio = d(&a, &b) / d(&b, &c);
        assert!(ratio > 3.0, "refinement ratio {ratio}");
    }

    #[test]
    fn hermitian_expectation_gives_zero_component() {
        // η = ψ at the midpoint: ⟨ψ, Vψ⟩ is real, so the dynamic part vanishes
        let model = xx_model(3, 1.0, 4);
        let control = PConstControl::constant(4, [0.3, -0.2]);
        let fwd = propagate_forward(&model, &control).unwrap();
        let adj = AdjointSweep {
            nodes: fwd.nodes.clone(),
            midpoints: fwd.midpoints.clone(),
            right_limits: fwd.nodes[1..].to_vec(),
        };
        for j in 0..4 {
            let g = gradient_component(&model, &control, &fwd, &adj, 0, j, [0.0; 2], GradientRule::Midpoint).unwrap();
            assert!(g.abs() < 1e-15);
        }
    }

    #[test]
    fn penalty_only_component() {
        let mut parts = xx_model(3, 1.0, 4).into_parts();
        parts.operators = [HermitianMatrix::zeros(3), HermitianMatrix::zeros(3)];
        let model = ChainModel::new(parts).unwrap();
        let control = PConstControl::constant(4, [0.3, -0.2]);
        let r = grad_f(&model, &control, &transfer_cfg(0.01), GradientRule::Midpoint, &CauchyCounter::new()).unwrap();
        for j in 0..4 {
            assert!((r.grad[j] - 2.0 * 0.01 * 25.0 * 0.3 * 0.25).abs() < 1e-15);
            assert!((r.grad[4 + j] + 2.0 * 0.01 * 25.0 * 0.2 * 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn component_agrees_with_assembled_vector() {
        let model = keeping_model(12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let control = random_control(&model, &mut rng);
        let cfg = keeping_cfg(1.0, 6.5e-5);
        for rule in [GradientRule::Midpoint, GradientRule::Exact] {
            let r = grad_f(&model, &control, &cfg, rule, &CauchyCounter::new()).unwrap();
            for l in 0..2 {
                for j in 0..12 {
                    let g = gradient_component(&model, &control, &r.forward, &r.adjoint, l, j, cfg.p_u, rule).unwrap();
                    assert_eq!(g, r.grad[l * 12 + j]);
                }
            }
        }
    }

    #[test]
    fn exact_rule_matches_finite_differences() {
        for (seed, cfg) in [(10, transfer_cfg(0.0)), (11, transfer_cfg(6.5e-5)), (12, keeping_cfg(1.0, 0.0)), (13, keeping_cfg(1.0, 6.5e-5))] {
            let model = if cfg.kind == ObjectiveKind::TransferF1 { xx_model(3, std::f64::consts::PI, 8) } else { keeping_model(8) };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let control = random_control(&model, &mut rng);
            let r = grad_f(&model, &control, &cfg, GradientRule::Exact, &CauchyCounter::new()).unwrap();
            let fd = richardson(&model, &control, &cfg);
            for (a, b) in r.grad.iter().zip(&fd) {
                if b.abs() < 1e-3 {
                    assert!((a - b).abs() < 1e-9, "{a} vs {b}");
                } else {
                    assert!(((a - b) / b).abs() < 1e-6, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn exact_rule_handles_single_interval_and_nonuniform_grid() {
        let model = xx_model(3, 1.3, 1);
        let control = PConstControl::constant(1, [0.0, 0.0]);
        let cfg = transfer_cfg(0.0);
        let r = grad_f(&model, &control, &cfg, GradientRule::Exact, &CauchyCounter::new()).unwrap();
        let fd = richardson(&model, &control, &cfg);
        for (a, b) in r.grad.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-9);
        }

        let mut parts = keeping_model(6).into_parts();
        parts.grid = crate::model::TimeGrid::from_nodes(vec![0.0, 0.02, 0.1, 0.15, 0.3, 0.41, 0.5]).unwrap();
        let model = ChainModel::new(parts).unwrap();
        let control = PConstControl::new(vec![0.1, -0.4, 0.9, 0.3, -0.2, 0.05], vec![0.0, 0.2, -0.7, 0.4, 0.1, 0.0]).unwrap();
        let cfg = keeping_cfg(1.0, 6.5e-5);
        let r = grad_f(&model, &control, &cfg, GradientRule::Exact, &CauchyCounter::new()).unwrap();
        let fd = richardson(&model, &control, &cfg);
        for (a, b) in r.grad.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-9 || ((a - b) / b).abs() < 1e-6);
        }
    }

    #[test]
    fn midpoint_rule_on_degenerate_grid() {
        // M = 1: one component per channel, Δt · G(T/2)
        let model = xx_model(3, 1.0, 1);
        let control = PConstControl::constant(1, [0.2, 0.1]);
        let r = grad_f(&model, &control, &transfer_cfg(0.0), GradientRule::Midpoint, &CauchyCounter::new()).unwrap();
        let fwd = &r.forward;
        let eta_mid = fwd.spectrum(0).evolve(-0.5, &adjoint_terminal_transfer(fwd.final_state(), model.psig().vector()));
        for l in 0..2 {
            let want = -inner(&eta_mid, &model.operator(l).apply(&fwd.midpoints[0])).im;
            assert!((r.grad[l] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn increment_is_second_order() {
        let model = xx_model(3, std::f64::consts::PI, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let control = random_control(&model, &mut rng);
        let cfg = transfer_cfg(6.5e-5);
        let counter = CauchyCounter::new();
        let r = grad_f(&model, &control, &cfg, GradientRule::Exact, &counter).unwrap();
        let a = control.to_flat();
        let mut d: Vec<f64> = (0..a.len()).map(|k| ((k * 7 + 3) % 11) as f64 - 5.0).collect();
        let n = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        d.iter_mut().for_each(|x| *x /= n);
        let f0 = evaluate_pconst(&model, &control, &cfg, &counter).unwrap().evaluation.value;
        let slope: f64 = r.grad.iter().zip(&d).map(|(g, x)| g * x).sum();
        let remainder = |eps: f64| {
            let moved: Vec<f64> = a.iter().zip(&d).map(|(x, y)| x + eps * y).collect();
            let c = PConstControl::from_flat(&moved).unwrap();
            let f = evaluate_pconst(&model, &c, &cfg, &counter).unwrap().evaluation.value;
            (f - f0 - eps * slope).abs()
        };
        let (r1, r2) = (remainder(1e-2), remainder(5e-3));
        assert!(r1 / r2 > 3.5 && r1 / r2 < 4.5, "ratio {}", r1 / r2);
    }

    #[test]
    fn counter_and_kind_contract() {
        let model = xx_model(3, 1.0, 4);
        let counter = CauchyCounter::new();
        let control = PConstControl::zeros(4);
        grad_f(&model, &control, &transfer_cfg(0.0), GradientRule::Midpoint, &counter).unwrap();
        assert_eq!(counter.get(), 2);
        grad_f(&model, &control, &transfer_cfg(0.0), GradientRule::Exact, &counter).unwrap();
        assert_eq!(counter.get(), 4);
        let bad = ObjectiveConfig::new(ObjectiveKind::GaKeepingF4);
        assert!(grad_f(&model, &control, &bad, GradientRule::Midpoint, &counter).is_err());
        assert_eq!(counter.get(), 4);
    }
}
