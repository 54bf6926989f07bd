//! Independent reference evaluation of `f₁`/`f₂` in double-double arithmetic.
//!
//! Propagators come from a scaled-and-squared Taylor series, with no
//! eigendecomposition, so the code shares nothing with the library beyond
//! reading model data. Central differences at step `1e-6` built on these
//! values carry rounding noise far below `1e-12`.
#![allow(dead_code)]

use spinctl_core::control::PConstControl;
use spinctl_core::model::ChainModel;
use spinctl_core::objective::{ObjectiveConfig, ObjectiveKind};
use twofloat::TwoFloat;

#[derive(Clone, Copy, Debug)]
pub struct Cdd {
    re: TwoFloat,
    im: TwoFloat,
}

impl Cdd {
    const ZERO: Cdd = Cdd { re: TwoFloat::from_f64(0.0), im: TwoFloat::from_f64(0.0) };

    fn new(re: f64, im: f64) -> Self {
        Cdd { re: re.into(), im: im.into() }
    }
    fn add(self, o: Cdd) -> Cdd {
        Cdd { re: self.re + o.re, im: self.im + o.im }
    }
    fn mul(self, o: Cdd) -> Cdd {
        Cdd {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }
    fn scale(self, s: TwoFloat) -> Cdd {
        Cdd { re: self.re * s, im: self.im * s }
    }
    fn norm_sqr(self) -> TwoFloat {
        self.re * self.re + self.im * self.im
    }
    fn conj(self) -> Cdd {
        Cdd { re: self.re, im: -self.im }
    }
}

type Mat = Vec<Vec<Cdd>>;

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|k| (0..n).fold(Cdd::ZERO, |acc, m| acc.add(a[i][m].mul(b[m][k]))))
                .collect()
        })
        .collect()
}

fn matvec(a: &Mat, v: &[Cdd]) -> Vec<Cdd> {
    a.iter()
        .map(|row| row.iter().zip(v).fold(Cdd::ZERO, |acc, (x, y)| acc.add(x.mul(*y))))
        .collect()
}

/// `exp(-i h H)` for Hermitian `H` given entrywise.
fn expm_minus_i(h_mat: &Mat, h: TwoFloat) -> Mat {
    let n = h_mat.len();
    let norm: f64 = h_mat
        .iter()
        .map(|r| r.iter().map(|z| z.norm_sqr().hi().sqrt()).sum::<f64>())
        .fold(0.0, f64::max)
        * h.hi().abs();
    let mut squarings = 0;
    while norm / 2f64.powi(squarings) > 0.25 {
        squarings += 1;
    }
    let s = h / TwoFloat::from(2f64.powi(squarings));
    // A = -i s H
    let a: Mat = h_mat
        .iter()
        .map(|r| r.iter().map(|z| Cdd { re: z.im * s, im: -(z.re * s) }).collect())
        .collect();
    let ident: Mat = (0..n)
        .map(|i| (0..n).map(|k| if i == k { Cdd::new(1.0, 0.0) } else { Cdd::ZERO }).collect())
        .collect();
    let mut sum = ident.clone();
    let mut term = ident;
    for k in 1..=30 {
        term = matmul(&term, &a);
        let inv = TwoFloat::from(1.0) / TwoFloat::from(k as f64);
        term = term.iter().map(|r| r.iter().map(|z| z.scale(inv)).collect()).collect();
        sum = sum
            .iter()
            .zip(&term)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p.add(*q)).collect())
            .collect();
    }
    for _ in 0..squarings {
        sum = matmul(&sum, &sum);
    }
    sum
}

fn to_mat(m: &nalgebra::DMatrix<spinctl_core::linalg::C64>) -> Mat {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|k| Cdd::new(m[(i, k)].re, m[(i, k)].im)).collect())
        .collect()
}

fn infidelity_dd(psi: &[Cdd], g: &[Cdd]) -> TwoFloat {
    let z = g.iter().zip(psi).fold(Cdd::ZERO, |acc, (a, b)| acc.add(a.conj().mul(*b)));
    TwoFloat::from(1.0) - z.norm_sqr()
}

/// `f₁` or `f₂` for a piecewise-constant control, in double-double.
pub fn objective_dd(model: &ChainModel, flat: &[f64], cfg: &ObjectiveConfig) -> TwoFloat {
    let control = PConstControl::from_flat(flat).unwrap();
    let m = model.intervals();
    let h0 = to_mat(model.drift().matrix());
    let v = [to_mat(model.operator(0).matrix()), to_mat(model.operator(1).matrix())];
    let to_vec = |s: &spinctl_core::linalg::QuantumState| -> Vec<Cdd> {
        s.vector().iter().map(|z| Cdd::new(z.re, z.im)).collect()
    };
    let g = to_vec(model.psig());
    let mut psi = to_vec(model.psi0());
    let nodes = model.grid().nodes();
    let mut node_f = vec![infidelity_dd(&psi, &g)];
    let mut penalty = TwoFloat::from(0.0);
    for j in 0..m {
        let u = control.at(j);
        let sig = TwoFloat::from(model.sigma()[j]);
        let hj: Mat = (0..h0.len())
            .map(|i| {
                (0..h0.len())
                    .map(|k| {
                        h0[i][k]
                            .add(v[0][i][k].scale(sig * TwoFloat::from(u[0])))
                            .add(v[1][i][k].scale(sig * TwoFloat::from(u[1])))
                    })
                    .collect()
            })
            .collect();
        let dt = TwoFloat::from(nodes[j + 1]) - TwoFloat::from(nodes[j]);
        psi = matvec(&expm_minus_i(&hj, dt), &psi);
        node_f.push(infidelity_dd(&psi, &g));
        for (l, &ul) in u.iter().enumerate() {
            let c = TwoFloat::from(ul);
            penalty += TwoFloat::from(cfg.p_u[l]) * dt * TwoFloat::from(model.shape(l)[j]) * c * c;
        }
    }
    let mut value = node_f[m] + penalty;
    if cfg.kind == ObjectiveKind::KeepingF2 {
        let mut integral = TwoFloat::from(0.0);
        for j in 0..m {
            let dt = TwoFloat::from(nodes[j + 1]) - TwoFloat::from(nodes[j]);
            integral += dt * (node_f[j] + node_f[j + 1]) / TwoFloat::from(2.0);
        }
        value += TwoFloat::from(cfg.p_psi) * integral;
    }
    value
}

/// Central differences with step `eps`, using the exactly representable
/// difference of the perturbed coordinates as denominator.
pub fn central_difference_dd(model: &ChainModel, control: &PConstControl, cfg: &ObjectiveConfig, eps: f64) -> Vec<f64> {
    let a = control.to_flat();
    (0..a.len())
        .map(|k| {
            let mut p = a.clone();
            let mut q = a.clone();
            p[k] += eps;
            q[k] -= eps;
            let step = TwoFloat::from(p[k]) - TwoFloat::from(q[k]);
            ((objective_dd(model, &p, cfg) - objective_dd(model, &q, cfg)) / step).hi()
        })
        .collect()
}

pub mod fixtures {
    use rand::Rng;
    use spinctl_core::control::PConstControl;
    use spinctl_core::linalg::QuantumState;
    use spinctl_core::model::{build_xx_chain, envelope_values, ChainModel, ModelParts, OperatorSet, TimeGrid};

    fn chain(levels: usize, t_final: f64, intervals: usize, b_bar: [f64; 2], goal_start: bool) -> ChainModel {
        let grid = TimeGrid::uniform(t_final, intervals).unwrap();
        let start = if goal_start { levels - 1 } else { 0 };
        ChainModel::new(ModelParts {
            drift: build_xx_chain(levels, 1.0).unwrap(),
            operators: OperatorSet::EndFields.build(levels).unwrap(),
            sigma: vec![1.0; intervals],
            envelopes: [
                envelope_values(b_bar[0], 8, &grid).unwrap(),
                envelope_values(b_bar[1], 8, &grid).unwrap(),
            ],
            shapes: [vec![25.0; intervals], vec![25.0; intervals]],
            psi0: QuantumState::basis(levels, start).unwrap(),
            psig: QuantumState::basis(levels, levels - 1).unwrap(),
            grid,
        })
        .unwrap()
    }

    /// Transfer `e₁ → e_N` on an XX chain.
    pub fn transfer(levels: usize, t_final: f64, intervals: usize) -> ChainModel {
        chain(levels, t_final, intervals, [5.0, 5.0], false)
    }

    /// Keeping `e₃` on three sites over `[0, 0.5]`.
    pub fn keeping(intervals: usize) -> ChainModel {
        chain(3, 0.5, intervals, [5.0, 3.0], true)
    }

    pub fn random_control<R: Rng>(model: &ChainModel, rng: &mut R) -> PConstControl {
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
}
