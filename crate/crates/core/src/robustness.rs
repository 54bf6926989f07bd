//! Monte Carlo robustness of a fixed control under additive Gaussian noise.
//!
//! Each run draws `n_{l,j} ~ Normal(0, σ)` for every channel and interval,
//! propagates `u + n` with the frozen final time and records the final
//! infidelity `W`. Run `p` of ladder entry `s` uses its own ChaCha stream,
//! so results do not depend on scheduling or on the parallel backend.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::control::PConstControl;
use crate::error::{input, Result};
use crate::model::{ChainModel, CHANNELS};
use crate::objective::infidelity;
use crate::par;
use crate::propagator::propagate_final;

/// Runs per σ at desk scale.
pub const DESK_RUNS: usize = 1_000;
/// Runs per σ at full scale.
pub const FULL_RUNS: usize = 10_000;

fn default_runs() -> usize {
    DESK_RUNS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseStudyConfig {
    /// Noise standard deviations, in control units.
    pub sigmas: Vec<f64>,
    #[serde(default = "default_runs")]
    pub runs_per_sigma: usize,
    /// Set from the run-level seed when loaded from a config file.
    #[serde(skip)]
    pub rng_seed: u64,
    /// Clip `u + n` back into the envelopes. Off by default.
    #[serde(default)]
    pub clamp_to_envelope: bool,
}

impl NoiseStudyConfig {
    pub fn new(sigmas: Vec<f64>, runs_per_sigma: usize, rng_seed: u64) -> Self {
        Self {
            sigmas,
            runs_per_sigma,
            rng_seed,
            clamp_to_envelope: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigmas.is_empty() {
            return input("noise study needs at least one sigma");
        }
        if self.sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return input("noise sigmas must be finite and >= 0");
        }
        if self.runs_per_sigma == 0 {
            return input("runs_per_sigma must be >= 1");
        }
        if self.sigmas.len() > u32::MAX as usize || self.runs_per_sigma > u32::MAX as usize {
            return input("noise study too large");
        }
        Ok(())
    }
}

/// One line of the statistics table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub sigma: f64,
    pub min_y: f64,
    pub max_y: f64,
    pub min_w: f64,
    pub max_w: f64,
    pub mean_w: f64,
    pub median_w: f64,
}

/// Raw outcome for one σ.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaRuns {
    pub sigma: f64,
    /// `W` of each successful run, in run order.
    pub w: Vec<f64>,
    /// Indices of runs whose propagation failed.
    pub failed: Vec<usize>,
    pub min_y: f64,
    pub max_y: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseStudy {
    /// Noiseless final infidelity of the base control.
    pub baseline: f64,
    pub runs: Vec<SigmaRuns>,
    pub rows: Vec<NoiseRow>,
}

struct RunOutcome {
    w: Option<f64>,
    min_y: f64,
    max_y: f64,
}

fn stream_rng(seed: u64, sigma_index: usize, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((sigma_index as u64) << 32) | run as u64);
    rng
}

fn one_run(
    model: &ChainModel,
    base: &PConstControl,
    time_scale: f64,
    sigma: f64,
    clamp: bool,
    mut rng: ChaCha8Rng,
) -> RunOutcome {
    // sigma was validated, so Normal::new cannot fail
    let normal = Normal::new(0.0, sigma).expect("validated sigma");
    let mut control = base.clone();
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for l in 0..CHANNELS {
        let env = model.envelope(l);
        for (j, u) in control.channel_mut(l).iter_mut().enumerate() {
            let n: f64 = normal.sample(&mut rng);
            min_y = min_y.min(n);
            max_y = max_y.max(n);
            *u += n;
            if clamp {
                *u = u.clamp(-env[j], env[j]);
            }
        }
    }
    let w = propagate_final(model, &control, time_scale)
        .ok()
        .map(|psi| infidelity(&psi, model.psig().vector()))
        .filter(|w| w.is_finite());
    RunOutcome { w, min_y, max_y }
}

/// Exact median by full sort; `NaN` for an empty sample.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

fn summarize(runs: &SigmaRuns) -> NoiseRow {
    let w = &runs.w;
    let (min_w, max_w) = w
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let mean_w = if w.is_empty() {
        f64::NAN
    } else {
        w.iter().sum::<f64>() / w.len() as f64
    };
    NoiseRow {
        sigma: runs.sigma,
        min_y: runs.min_y,
        max_y: runs.max_y,
        min_w,
        max_w,
        mean_w,
        median_w: median(w),
    }
}

/// Noise study around `base` propagated with generator scale `time_scale`
/// (the frozen `T` for a free-final-time model on the unit grid, `1` for a
/// fixed-time model).
pub fn noise_study(
    model: &ChainModel,
    base: &PConstControl,
    time_scale: f64,
    config: &NoiseStudyConfig,
) -> Result<NoiseStudy> {
    config.validate()?;
    if !base.is_feasible(model) {
        return input("base control violates the envelopes");
    }
    let baseline = infidelity(&propagate_final(model, base, time_scale)?, model.psig().vector());
    let mut runs = Vec::with_capacity(config.sigmas.len());
    for (s, &sigma) in config.sigmas.iter().enumerate() {
        let idx: Vec<usize> = (0..config.runs_per_sigma).collect();
        let outcomes = par::map(&idx, |&p| {
            one_run(
                model,
                base,
                time_scale,
                sigma,
                config.clamp_to_envelope,
                stream_rng(config.rng_seed, s, p),
            )
        });
        let mut entry = SigmaRuns {
            sigma,
            w: Vec::with_capacity(outcomes.len()),
            failed: Vec::new(),
            min_y: f64::INFINITY,
            max_y: f64::NEG_INFINITY,
        };
        for (p, o) in outcomes.into_iter().enumerate() {
            entry.min_y = entry.min_y.min(o.min_y);
            entry.max_y = entry.max_y.max(o.max_y);
            match o.w {
                Some(w) => entry.w.push(w),
                None => entry.failed.push(p),
            }
        }
        runs.push(entry);
    }
    let rows = runs.iter().map(summarize).collect();
    Ok(NoiseStudy { baseline, runs, rows })
}
