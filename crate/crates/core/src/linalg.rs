//! Hermitian matrices, state vectors and spectral matrix exponentials.
//!
//! Every generator in this crate has the form `-i H` with `H` Hermitian, so
//! exponentials are taken in the eigenbasis of `H`. The resulting map is
//! unitary up to rounding, and one decomposition serves every application on
//! the same interval (forward half-steps, backward half-steps, interval
//! integrals of the gradient density).

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};
pub use nalgebra::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type StateVector = DVector<C64>;

/// Max-norm tolerance on `A - A†` for a matrix to count as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Tolerance on `| ‖ψ‖ - 1 |` for boundary states.
pub const NORM_TOL: f64 = 1e-10;

const I: C64 = C64::new(0.0, 1.0);

/// Conjugate-linear inner product `⟨a, b⟩ = Σ conj(a_m) b_m`.
#[inline]
pub fn inner(a: &StateVector, b: &StateVector) -> C64 {
    a.dotc(b)
}

fn check_finite(m: &DMatrix<C64>, what: &str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Input(format!("{what} has non-finite entries")))
    }
}

/// Max-norm of `A - A†`.
pub fn hermitian_defect(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

/// A square complex matrix validated to be Hermitian.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    entries: DMatrix<C64>,
    real: bool,
}

impl HermitianMatrix {
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.nrows() != entries.ncols() {
            return Err(Error::Input(format!(
                "matrix must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        check_finite(&entries, "matrix")?;
        let defect = hermitian_defect(&entries);
        if defect >= HERMITIAN_TOL {
            return Err(Error::ModelValidation(format!(
                "matrix is not Hermitian (max |A - A†| = {defect:e})"
            )));
        }
        Ok(Self::from_trusted(entries))
    }

    pub fn from_real(entries: DMatrix<f64>) -> Result<Self> {
        Self::new(entries.map(|x| C64::new(x, 0.0)))
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: DMatrix::zeros(dim, dim),
            real: true,
        }
    }

    /// Skips validation; callers guarantee Hermiticity (e.g. real linear
    /// combinations of Hermitian matrices).
    fn from_trusted(entries: DMatrix<C64>) -> Self {
        let real = entries.iter().all(|z| z.im == 0.0);
        Self { entries, real }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    /// True when every entry has exactly zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.real
    }

    /// `Σ w_k A_k` over Hermitian terms with real weights; stays Hermitian.
    pub fn real_combination(dim: usize, terms: &[(f64, &HermitianMatrix)]) -> Self {
        let mut acc = DMatrix::<C64>::zeros(dim, dim);
        for (w, m) in terms {
            if *w != 0.0 {
                acc.zip_apply(&m.entries, |a, b| *a += b * *w);
            }
        }
        Self::from_trusted(acc)
    }

    pub fn scaled(&self, w: f64) -> Self {
        Self::from_trusted(self.entries.map(|z| z * w))
    }

    pub fn apply(&self, v: &StateVector) -> StateVector {
        &self.entries * v
    }

    pub fn spectrum(&self) -> Spectrum {
        if self.real {
            let re = self.entries.map(|z| z.re);
            let eig = SymmetricEigen::new(re);
            Spectrum {
                values: eig.eigenvalues.iter().copied().collect(),
                basis: Basis::Real(eig.eigenvectors),
            }
        } else {
            let eig = SymmetricEigen::new(self.entries.clone());
            Spectrum {
                values: eig.eigenvalues.iter().map(|x| x.real()).collect(),
                basis: Basis::Complex(eig.eigenvectors),
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Basis {
    Real(DMatrix<f64>),
    Complex(DMatrix<C64>),
}

/// Eigendecomposition `H = Q diag(λ) Q†` of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct Spectrum {
    values: Vec<f64>,
    basis: Basis,
}

impl Spectrum {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `Q† v`: coordinates of `v` in the eigenbasis.
    pub fn to_eigenbasis(&self, v: &StateVector) -> StateVector {
        let n = self.dim();
        match &self.basis {
            Basis::Real(q) => StateVector::from_fn(n, |k, _| {
                let mut acc = C64::new(0.0, 0.0);
                for m in 0..n {
                    acc += v[m] * q[(m, k)];
                }
                acc
            }),
            Basis::Complex(q) => q.ad_mul(v),
        }
    }

    /// `Q w`: back from eigenbasis coordinates.
    pub fn from_eigenbasis(&self, w: &StateVector) -> StateVector {
        let n = self.dim();
        match &self.basis {
            Basis::Real(q) => StateVector::from_fn(n, |m, _| {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..n {
                    acc += w[k] * q[(m, k)];
                }
                acc
            }),
            Basis::Complex(q) => q * w,
        }
    }

    /// `Q† W Q` for an operator `W` given in the site basis.
    pub fn rotate(&self, w: &DMatrix<C64>) -> DMatrix<C64> {
        match &self.basis {
            Basis::Real(q) => {
                let qc = q.map(|x| C64::new(x, 0.0));
                qc.ad_mul(w) * qc
            }
            Basis::Complex(q) => q.ad_mul(w) * q,
        }
    }

    /// `e^{-i z H} v` for a complex scale `z`; unitary when `z` is real.
    pub fn exp_apply(&self, z: C64, v: &StateVector) -> StateVector {
        let mut w = self.to_eigenbasis(v);
        for (wk, &lam) in w.iter_mut().zip(&self.values) {
            *wk *= (-I * z * lam).exp();
        }
        self.from_eigenbasis(&w)
    }

    /// `e^{-i τ H} v` for real duration `τ` (negative `τ` runs backward).
    pub fn evolve(&self, tau: f64, v: &StateVector) -> StateVector {
        let mut w = self.to_eigenbasis(v);
        for (wk, &lam) in w.iter_mut().zip(&self.values) {
            let (s, c) = (-lam * tau).sin_cos();
            *wk *= C64::new(c, s);
        }
        self.from_eigenbasis(&w)
    }
}

/// Computes `e^{-i·scale·H} v` for a raw matrix `H`, validating Hermiticity.
pub fn hermitian_expm_apply(h: &DMatrix<C64>, scale: C64, v: &StateVector) -> Result<StateVector> {
    let h = HermitianMatrix::new(h.clone())?;
    if v.len() != h.dim() {
        return Err(Error::Input(format!(
            "vector length {} does not match matrix dimension {}",
            v.len(),
            h.dim()
        )));
    }
    if !(scale.re.is_finite() && scale.im.is_finite()) || v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Input("non-finite scale or vector".into()));
    }
    Ok(h.spectrum().exp_apply(scale, v))
}

/// A unit-norm state vector (used for boundary states ψ₀ and ψ_g).
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState(StateVector);

impl QuantumState {
    pub fn new(amplitudes: StateVector) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::Input("empty state vector".into()));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Input("state has non-finite amplitudes".into()));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() >= NORM_TOL {
            return Err(Error::ModelValidation(format!("state is not normalized (norm = {norm})")));
        }
        Ok(Self(amplitudes))
    }

    /// Excitation localized at `site` (zero-based).
    pub fn basis(dim: usize, site: usize) -> Result<Self> {
        if site >= dim {
            return Err(Error::Input(format!("site {site} out of range for dimension {dim}")));
        }
        let mut v = StateVector::zeros(dim);
        v[site] = C64::new(1.0, 0.0);
        Ok(Self(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn vector(&self) -> &StateVector {
        &self.0
    }

    pub fn into_vector(self) -> StateVector {
        self.0
    }
}
