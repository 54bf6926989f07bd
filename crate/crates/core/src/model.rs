//! Spin-chain dynamics: drift, control coupling, envelopes and the time grid.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::linalg::{HermitianMatrix, QuantumState, C64};

/// Number of control channels `u = (u₁, u₂)`.
pub const CHANNELS: usize = 2;

/// Strictly increasing time nodes `0 = t₀ < … < t_M = T`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    uniform: bool,
}

impl TimeGrid {
    pub fn uniform(final_time: f64, intervals: usize) -> Result<Self> {
        if intervals == 0 {
            return input("grid needs at least one interval");
        }
        if !(final_time.is_finite() && final_time > 0.0) {
            return input(format!("final time must be positive, got {final_time}"));
        }
        let step = final_time / intervals as f64;
        let mut nodes: Vec<f64> = (0..=intervals).map(|j| j as f64 * step).collect();
        nodes[intervals] = final_time;
        Self::from_nodes(nodes)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return input("grid needs at least two nodes");
        }
        if nodes[0] != 0.0 {
            return input("grid must start at t = 0");
        }
        if nodes.iter().any(|t| !t.is_finite()) || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return input("grid nodes must be finite and strictly increasing");
        }
        let m = nodes.len() - 1;
        let mean = nodes[m] / m as f64;
        let uniform = nodes.windows(2).all(|w| ((w[1] - w[0]) - mean).abs() < 1e-12);
        Ok(Self { nodes, uniform })
    }

    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn final_time(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn step(&self, j: usize) -> f64 {
        self.nodes[j + 1] - self.nodes[j]
    }

    pub fn midpoint(&self, j: usize) -> f64 {
        0.5 * (self.nodes[j] + self.nodes[j + 1])
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.intervals()).map(|j| self.midpoint(j)).collect()
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Composite trapezoid weights over the nodes.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let m = self.intervals();
        let mut w = vec![0.0; m + 1];
        for j in 0..m {
            let h = 0.5 * self.step(j);
            w[j] += h;
            w[j + 1] += h;
        }
        w
    }
}

/// Drift Hamiltonian of the single-excitation XX chain: zero diagonal,
/// nearest-neighbour hopping `coupling`.
pub fn build_xx_chain(levels: usize, coupling: f64) -> Result<HermitianMatrix> {
    if levels < 2 {
        return input(format!("chain needs at least 2 sites, got {levels}"));
    }
    if !coupling.is_finite() {
        return input("coupling must be finite");
    }
    let mut h = DMatrix::<f64>::zeros(levels, levels);
    for m in 0..levels - 1 {
        h[(m, m + 1)] = coupling;
        h[(m + 1, m)] = coupling;
    }
    HermitianMatrix::from_real(h)
}

/// Pulse envelope `ν_j = b̄ sin^q(π t̄_j / T)` sampled at interval midpoints.
pub fn envelope_values(b_bar: f64, q: u32, grid: &TimeGrid) -> Result<Vec<f64>> {
    if !(b_bar.is_finite() && b_bar >= 0.0) {
        return input(format!("envelope amplitude must be >= 0, got {b_bar}"));
    }
    if q == 0 || !q.is_multiple_of(2) {
        return input(format!("envelope exponent must be a positive even integer, got {q}"));
    }
    let t_final = grid.final_time();
    Ok(grid
        .midpoints()
        .into_iter()
        .map(|t| b_bar * (std::f64::consts::PI * t / t_final).sin().powi(q as i32))
        .collect())
}

/// Built-in choices for the control operators `V₁, V₂`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorSet {
    /// Local fields on the first and last sites.
    EndFields,
    /// Modulation of the first and last hopping bonds.
    EndBonds,
}

impl OperatorSet {
    pub fn build(self, levels: usize) -> Result<[HermitianMatrix; CHANNELS]> {
        if levels < 2 {
            return input("operators need at least 2 sites");
        }
        let n = levels;
        let mut v1 = DMatrix::<f64>::zeros(n, n);
        let mut v2 = DMatrix::<f64>::zeros(n, n);
        match self {
            OperatorSet::EndFields => {
                v1[(0, 0)] = 1.0;
                v2[(n - 1, n - 1)] = 1.0;
            }
            OperatorSet::EndBonds => {
                v1[(0, 1)] = 1.0;
                v1[(1, 0)] = 1.0;
                v2[(n - 2, n - 1)] = 1.0;
                v2[(n - 1, n - 2)] = 1.0;
            }
        }
        Ok([HermitianMatrix::from_real(v1)?, HermitianMatrix::from_real(v2)?])
    }
}

/// Raw ingredients of a [`ChainModel`], validated by [`ChainModel::new`].
#[derive(Clone, Debug)]
pub struct ModelParts {
    pub drift: HermitianMatrix,
    pub operators: [HermitianMatrix; CHANNELS],
    /// Per-interval modulation `σ_j`.
    pub sigma: Vec<f64>,
    /// Per-channel, per-interval bounds `ν_{l,j}`.
    pub envelopes: [Vec<f64>; CHANNELS],
    /// Per-channel, per-interval penalty shapes `S_{l,j}`.
    pub shapes: [Vec<f64>; CHANNELS],
    pub psi0: QuantumState,
    pub psig: QuantumState,
    pub grid: TimeGrid,
}

/// The controlled system `dψ/dt = -i (H₀ + σ(t)(u₁V₁ + u₂V₂)) ψ` on a grid.
///
/// Immutable once built.
#[derive(Clone, Debug)]
pub struct ChainModel {
    drift: HermitianMatrix,
    operators: [HermitianMatrix; CHANNELS],
    sigma: Vec<f64>,
    envelopes: [Vec<f64>; CHANNELS],
    shapes: [Vec<f64>; CHANNELS],
    psi0: QuantumState,
    psig: QuantumState,
    grid: TimeGrid,
}

impl ChainModel {
    pub fn new(parts: ModelParts) -> Result<Self> {
        let n = parts.drift.dim();
        let m = parts.grid.intervals();
        if parts.operators.iter().any(|v| v.dim() != n) {
            return Err(Error::ModelValidation("control operator dimension mismatch".into()));
        }
        if parts.psi0.dim() != n || parts.psig.dim() != n {
            return Err(Error::ModelValidation("boundary state dimension mismatch".into()));
        }
        if parts.sigma.len() != m || parts.sigma.iter().any(|s| !s.is_finite()) {
            return Err(Error::ModelValidation(format!("sigma needs {m} finite values")));
        }
        for l in 0..CHANNELS {
            for (what, vals) in [("envelope", &parts.envelopes[l]), ("shape", &parts.shapes[l])] {
                if vals.len() != m {
                    return Err(Error::ModelValidation(format!(
                        "channel {} {what} has {} values, grid has {m} intervals",
                        l + 1,
                        vals.len()
                    )));
                }
                if vals.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                    return Err(Error::ModelValidation(format!(
                        "channel {} {what} values must be finite and >= 0",
                        l + 1
                    )));
                }
            }
        }
        Ok(Self {
            drift: parts.drift,
            operators: parts.operators,
            sigma: parts.sigma,
            envelopes: parts.envelopes,
            shapes: parts.shapes,
            psi0: parts.psi0,
            psig: parts.psig,
            grid: parts.grid,
        })
    }

    pub fn into_parts(self) -> ModelParts {
        ModelParts {
            drift: self.drift,
            operators: self.operators,
            sigma: self.sigma,
            envelopes: self.envelopes,
            shapes: self.shapes,
            psi0: self.psi0,
            psig: self.psig,
            grid: self.grid,
        }
    }

    pub fn levels(&self) -> usize {
        self.drift.dim()
    }

    pub fn intervals(&self) -> usize {
        self.grid.intervals()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn drift(&self) -> &HermitianMatrix {
        &self.drift
    }

    pub fn operator(&self, l: usize) -> &HermitianMatrix {
        &self.operators[l]
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn envelope(&self, l: usize) -> &[f64] {
        &self.envelopes[l]
    }

    pub fn shape(&self, l: usize) -> &[f64] {
        &self.shapes[l]
    }

    pub fn psi0(&self) -> &QuantumState {
        &self.psi0
    }

    pub fn psig(&self) -> &QuantumState {
        &self.psig
    }

    /// `H₁ = σ_j (u₁V₁ + u₂V₂)` on interval `j`.
    pub fn control_hamiltonian(&self, j: usize, u: [f64; CHANNELS]) -> Result<HermitianMatrix> {
        if j >= self.intervals() {
            return input(format!("interval {j} out of range (M = {})", self.intervals()));
        }
        let s = self.sigma[j];
        Ok(HermitianMatrix::real_combination(
            self.levels(),
            &[(s * u[0], &self.operators[0]), (s * u[1], &self.operators[1])],
        ))
    }

    /// `σ_j V_l`, the derivative of `H₁` in `u_l` on interval `j`.
    pub fn control_derivative(&self, j: usize, l: usize) -> HermitianMatrix {
        self.operators[l].scaled(self.sigma[j])
    }

    /// Full Hamiltonian `H₀ + H₁` on interval `j` (no bounds check).
    pub(crate) fn interval_hamiltonian(&self, j: usize, u: [f64; CHANNELS]) -> HermitianMatrix {
        let s = self.sigma[j];
        HermitianMatrix::real_combination(
            self.levels(),
            &[
                (1.0, &self.drift),
                (s * u[0], &self.operators[0]),
                (s * u[1], &self.operators[1]),
            ],
        )
    }
}

/// Complex entry helper for hand-built operators.
pub fn complex_matrix(re: &DMatrix<f64>, im: Option<&DMatrix<f64>>) -> Result<DMatrix<C64>> {
    match im {
        None => Ok(re.map(|x| C64::new(x, 0.0))),
        Some(im) if im.shape() == re.shape() => Ok(re.zip_map(im, C64::new)),
        Some(_) => input("real and imaginary parts differ in shape"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::xx_model;

    #[test]
    fn two_site_chain_is_pauli_x() {
        let h = build_xx_chain(2, 1.0).unwrap();
        let m = h.matrix();
        assert_eq!(m[(0, 1)], C64::new(1.0, 0.0));
        assert_eq!(m[(1, 0)], C64::new(1.0, 0.0));
        assert_eq!(m[(0, 0)], C64::new(0.0, 0.0));
        assert_eq!(m[(1, 1)], C64::new(0.0, 0.0));
    }

    #[test]
    fn three_site_chain_spectrum() {
        // characteristic polynomial of [[0,1,0],[1,0,1],[0,1,0]] is -λ(λ² - 2)
        let h = build_xx_chain(3, 1.0).unwrap();
        let mut ev = h.spectrum().eigenvalues().to_vec();
        ev.sort_by(f64::total_cmp);
        let s2 = 2f64.sqrt();
        for (got, want) in ev.iter().zip([-s2, 0.0, s2]) {
            assert!((got - want).abs() < 1e-14);
        }
        for n in 2..12 {
            let h = build_xx_chain(n, 0.7).unwrap();
            assert!(crate::linalg::hermitian_defect(h.matrix()) < 1e-12);
        }
        assert!(build_xx_chain(1, 1.0).is_err());
    }

    #[test]
    fn control_hamiltonian_is_linear() {
        let model = xx_model(3, 1.0, 4);
        let zero = model.control_hamiltonian(0, [0.0, 0.0]).unwrap();
        assert!(zero.matrix().iter().all(|z| z.norm() == 0.0));
        let h = model.control_hamiltonian(1, [1.0, 0.0]).unwrap();
        assert_eq!(h.matrix(), model.operator(0).matrix());
        assert!(model.control_hamiltonian(4, [1.0, 0.0]).is_err());

        let mut parts = model.into_parts();
        parts.sigma[2] = 2.0;
        let model = ChainModel::new(parts).unwrap();
        let h = model.control_hamiltonian(2, [1.0, 1.0]).unwrap();
        let want = (model.operator(0).matrix() + model.operator(1).matrix()) * C64::new(2.0, 0.0);
        assert_eq!(h.matrix(), &want);
        assert!(crate::linalg::hermitian_defect(h.matrix()) < 1e-12);
    }

    #[test]
    fn envelope_shape() {
        let grid = TimeGrid::uniform(2.0, 2).unwrap();
        // midpoints at T/4 and 3T/4
        let nu = envelope_values(5.0, 2, &grid).unwrap();
        assert!((nu[0] - 2.5).abs() < 1e-12 && (nu[1] - 2.5).abs() < 1e-12);

        let grid = TimeGrid::uniform(1.0, 101).unwrap();
        let nu = envelope_values(5.0, 8, &grid).unwrap();
        assert!((nu[50] - 5.0).abs() < 1e-12);
        assert!(nu[0] < 1e-10 && nu[100] < 1e-10);
        assert!(nu.iter().all(|&x| (0.0..=5.0).contains(&x)));
        assert!(envelope_values(0.0, 8, &grid).unwrap().iter().all(|&x| x == 0.0));
        assert!(envelope_values(1.0, 3, &grid).is_err());
        assert!(envelope_values(-1.0, 8, &grid).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::from_nodes(vec![0.0, 1.0, 1.0]).is_err());
        assert!(TimeGrid::from_nodes(vec![0.1, 1.0]).is_err());
        assert!(TimeGrid::uniform(0.0, 3).is_err());
        let g = TimeGrid::from_nodes(vec![0.0, 0.5, 2.0]).unwrap();
        assert!(!g.is_uniform());
        assert_eq!(g.trapezoid_weights(), vec![0.25, 1.0, 0.75]);
        let g = TimeGrid::uniform(std::f64::consts::PI, 1570).unwrap();
        assert!(g.is_uniform());
        assert_eq!(g.final_time(), std::f64::consts::PI);
    }

    #[test]
    fn model_rejects_bad_parts() {
        let mut parts = xx_model(3, 1.0, 4).into_parts();
        parts.envelopes[0].pop();
        assert!(ChainModel::new(parts).is_err());
        let mut parts = xx_model(3, 1.0, 4).into_parts();
        parts.shapes[1][0] = -1.0;
        assert!(ChainModel::new(parts).is_err());
        let mut parts = xx_model(3, 1.0, 4).into_parts();
        parts.psig = QuantumState::basis(2, 0).unwrap();
        assert!(ChainModel::new(parts).is_err());
    }
}
