//! Control representations and the box geometry of the feasible set.

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::model::{ChainModel, CHANNELS};

/// Piecewise-constant control: one value per channel and interval.
///
/// The flat decision vector is channel-major: `a = (c_{1,1..M}, c_{2,1..M})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PConstControl {
    values: [Vec<f64>; CHANNELS],
}

impl PConstControl {
    pub fn new(u1: Vec<f64>, u2: Vec<f64>) -> Result<Self> {
        if u1.len() != u2.len() || u1.is_empty() {
            return input(format!(
                "channels must be non-empty and of equal length ({} vs {})",
                u1.len(),
                u2.len()
            ));
        }
        Ok(Self { values: [u1, u2] })
    }

    pub fn zeros(intervals: usize) -> Self {
        Self::constant(intervals, [0.0, 0.0])
    }

    pub fn constant(intervals: usize, u: [f64; CHANNELS]) -> Self {
        Self {
            values: [vec![u[0]; intervals], vec![u[1]; intervals]],
        }
    }

    pub fn from_flat(a: &[f64]) -> Result<Self> {
        if a.is_empty() || !a.len().is_multiple_of(CHANNELS) {
            return input(format!("flat control length {} is not a positive multiple of 2", a.len()));
        }
        let m = a.len() / CHANNELS;
        Self::new(a[..m].to_vec(), a[m..].to_vec())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut a = Vec::with_capacity(CHANNELS * self.intervals());
        for ch in &self.values {
            a.extend_from_slice(ch);
        }
        a
    }

    pub fn intervals(&self) -> usize {
        self.values[0].len()
    }

    pub fn at(&self, j: usize) -> [f64; CHANNELS] {
        [self.values[0][j], self.values[1][j]]
    }

    pub fn channel(&self, l: usize) -> &[f64] {
        &self.values[l]
    }

    pub fn channel_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.values[l]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flatten().all(|x| x.is_finite())
    }

    /// `|c_{l,j}| ≤ ν_{l,j}` for every component.
    pub fn is_feasible(&self, model: &ChainModel) -> bool {
        self.intervals() == model.intervals()
            && (0..CHANNELS).all(|l| {
                self.values[l]
                    .iter()
                    .zip(model.envelope(l))
                    .all(|(c, nu)| c.abs() <= *nu)
            })
    }

    /// Clamp every component into the model's envelope box.
    pub fn clamped(mut self, model: &ChainModel) -> Result<Self> {
        if self.intervals() != model.intervals() {
            return input("control and model grid sizes differ");
        }
        for l in 0..CHANNELS {
            for (c, nu) in self.values[l].iter_mut().zip(model.envelope(l)) {
                *c = c.clamp(-nu, *nu);
            }
        }
        Ok(self)
    }
}

/// Flattened box half-widths `ν` aligned with [`PConstControl::to_flat`].
pub fn flat_bounds(model: &ChainModel) -> Vec<f64> {
    let mut b = Vec::with_capacity(CHANNELS * model.intervals());
    for l in 0..CHANNELS {
        b.extend_from_slice(model.envelope(l));
    }
    b
}

/// Componentwise clamp of `a` into `[-ν_s, ν_s]`.
pub fn project_box(a: &[f64], bounds: &[f64]) -> Result<Vec<f64>> {
    if a.len() != bounds.len() {
        return input(format!("vector length {} vs bounds length {}", a.len(), bounds.len()));
    }
    Ok(a.iter().zip(bounds).map(|(x, nu)| x.clamp(-nu, *nu)).collect())
}

/// Sinusoidal control class `u_l(t) = Σ_i γ_{l,i} sin(ω_{l,i} t + φ_{l,i})`,
/// optionally carrying a free final time `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinClassParams {
    pub gamma: [Vec<f64>; CHANNELS],
    pub omega: [Vec<f64>; CHANNELS],
    /// Phases; all zero unless the search box enables them.
    #[serde(default = "no_phases")]
    pub phase: [Vec<f64>; CHANNELS],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_time: Option<f64>,
}

fn no_phases() -> [Vec<f64>; CHANNELS] {
    [Vec::new(), Vec::new()]
}

impl SinClassParams {
    pub fn new(gamma: [Vec<f64>; CHANNELS], omega: [Vec<f64>; CHANNELS]) -> Result<Self> {
        let terms = gamma[0].len();
        if gamma.iter().chain(&omega).any(|v| v.len() != terms) {
            return input("all gamma/omega lists must have the same length");
        }
        Ok(Self {
            gamma,
            omega,
            phase: [vec![0.0; terms], vec![0.0; terms]],
            final_time: None,
        })
    }

    pub fn with_final_time(mut self, t: f64) -> Self {
        self.final_time = Some(t);
        self
    }

    pub fn terms(&self) -> usize {
        self.gamma[0].len()
    }

    fn phase_of(&self, l: usize, i: usize) -> f64 {
        self.phase[l].get(i).copied().unwrap_or(0.0)
    }

    /// `u_l(t)` before any clamping.
    pub fn value(&self, l: usize, t: f64) -> f64 {
        (0..self.terms())
            .map(|i| self.gamma[l][i] * (self.omega[l][i] * t + self.phase_of(l, i)).sin())
            .sum()
    }
}

/// Search box `Q_y` for [`SinClassParams`], and the gene layout the GA sees:
/// `(γ_{1,1}, ω_{1,1}[, φ_{1,1}], …, γ_{2,M}, ω_{2,M}[, φ_{2,M}][, T])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinClassBox {
    pub terms: usize,
    pub gamma: [(f64, f64); CHANNELS],
    pub omega: [(f64, f64); CHANNELS],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_time: Option<(f64, f64)>,
}

impl SinClassBox {
    fn genes_per_term(&self) -> usize {
        if self.phase.is_some() {
            3
        } else {
            2
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut all: Vec<(f64, f64)> = self.gamma.iter().chain(&self.omega).copied().collect();
        all.extend(self.phase);
        all.extend(self.final_time);
        if self.terms == 0 {
            return input("sinusoidal class needs at least one term");
        }
        if all.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
            return input("every box range must be finite with lo <= hi");
        }
        if let Some((lo, _)) = self.final_time {
            if lo <= 0.0 {
                return input("final-time range must be positive");
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        CHANNELS * self.terms * self.genes_per_term() + usize::from(self.final_time.is_some())
    }

    /// Per-gene `(lo, hi)` bounds.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b = Vec::with_capacity(self.dim());
        for l in 0..CHANNELS {
            for _ in 0..self.terms {
                b.push(self.gamma[l]);
                b.push(self.omega[l]);
                if let Some(p) = self.phase {
                    b.push(p);
                }
            }
        }
        b.extend(self.final_time);
        b
    }

    pub fn decode(&self, genes: &[f64]) -> Result<SinClassParams> {
        if genes.len() != self.dim() {
            return input(format!("expected {} genes, got {}", self.dim(), genes.len()));
        }
        let g = self.genes_per_term();
        let mut gamma = [Vec::new(), Vec::new()];
        let mut omega = [Vec::new(), Vec::new()];
        let mut phase = [Vec::new(), Vec::new()];
        for l in 0..CHANNELS {
            for i in 0..self.terms {
                let base = (l * self.terms + i) * g;
                gamma[l].push(genes[base]);
                omega[l].push(genes[base + 1]);
                phase[l].push(if g == 3 { genes[base + 2] } else { 0.0 });
            }
        }
        Ok(SinClassParams {
            gamma,
            omega,
            phase,
            final_time: self.final_time.map(|_| genes[genes.len() - 1]),
        })
    }

    pub fn encode(&self, params: &SinClassParams) -> Result<Vec<f64>> {
        if params.terms() != self.terms {
            return input("term count differs from box");
        }
        let mut genes = Vec::with_capacity(self.dim());
        for l in 0..CHANNELS {
            for i in 0..self.terms {
                genes.push(params.gamma[l][i]);
                genes.push(params.omega[l][i]);
                if self.phase.is_some() {
                    genes.push(params.phase_of(l, i));
                }
            }
        }
        if self.final_time.is_some() {
            match params.final_time {
                Some(t) => genes.push(t),
                None => return input("box has a final-time gene but params carry no T"),
            }
        }
        Ok(genes)
    }

    pub fn contains(&self, params: &SinClassParams) -> bool {
        match self.encode(params) {
            Ok(genes) => genes
                .iter()
                .zip(self.bounds())
                .all(|(x, (lo, hi))| lo <= *x && *x <= hi),
            Err(_) => false,
        }
    }
}

/// Samples the sinusoidal class at interval midpoints and clamps into the
/// envelopes, giving a feasible piecewise-constant control.
pub fn sample_sin_class(
    params: &SinClassParams,
    grid: &crate::model::TimeGrid,
    envelopes: [&[f64]; CHANNELS],
) -> Result<PConstControl> {
    let m = grid.intervals();
    if envelopes.iter().any(|e| e.len() != m) {
        return input("envelope length differs from grid");
    }
    let mids = grid.midpoints();
    let channel = |l: usize| -> Vec<f64> {
        mids.iter()
            .zip(envelopes[l])
            .map(|(&t, &nu)| params.value(l, t).clamp(-nu, nu))
            .collect()
    };
    PConstControl::new(channel(0), channel(1))
}

/// A free-final-time control expressed on the normalized grid `τ ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FreeTimeControl {
    /// `T`, the factor multiplying the generator.
    pub time_scale: f64,
    /// `ŭ_l(τ_j) = u_l(T τ_j)` clamped to the envelopes.
    pub control: PConstControl,
}

/// Rewrites a sinusoidal control on `[0, T]` as a control on the unit grid
/// of `tau_model`; propagating that with generator scale `T` reproduces the
/// original dynamics on `[0, T]`.
pub fn rescale_free_time(
    params: &SinClassParams,
    tau_model: &ChainModel,
    time_range: (f64, f64),
) -> Result<FreeTimeControl> {
    let t = match params.final_time {
        Some(t) => t,
        None => return input("free-final-time control needs T"),
    };
    if !(t.is_finite() && time_range.0 <= t && t <= time_range.1) {
        return input(format!("T = {t} outside [{}, {}]", time_range.0, time_range.1));
    }
    let grid = tau_model.grid();
    if (grid.final_time() - 1.0).abs() > 1e-12 {
        return input("free-final-time model must use the unit grid [0, 1]");
    }
    let mids = grid.midpoints();
    let channel = |l: usize| -> Vec<f64> {
        mids.iter()
            .zip(tau_model.envelope(l))
            .map(|(&tau, &nu)| params.value(l, t * tau).clamp(-nu, nu))
            .collect()
    };
    Ok(FreeTimeControl {
        time_scale: t,
        control: PConstControl::new(channel(0), channel(1))?,
    })
}
