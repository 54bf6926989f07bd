//! TOML run configuration and the shipped presets.
//!
//! A run file has a `[model]`, `[control]` and `[objective]` section, exactly
//! one optimizer (`[gpm]`, or `[ga]` with its `[search]` box) and an optional
//! `[noise]` study on the optimized control. Sites are numbered from 1.

use serde::{Deserialize, Serialize};

use crate::control::{sample_sin_class, PConstControl, SinClassBox, SinClassParams};
use crate::error::{Error, Result};
use crate::ga::GaConfig;
use crate::gpm::GpmConfig;
use crate::linalg::QuantumState;
use crate::model::{build_xx_chain, envelope_values, ChainModel, ModelParts, OperatorSet, TimeGrid, CHANNELS};
use crate::objective::{ObjectiveConfig, ObjectiveKind};
use crate::robustness::NoiseStudyConfig;

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

/// `σ(t)`: one constant or one value per interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    Constant(f64),
    Values(Vec<f64>),
}

impl Default for SigmaSpec {
    fn default() -> Self {
        SigmaSpec::Constant(1.0)
    }
}

fn default_shape() -> [f64; CHANNELS] {
    [1.0; CHANNELS]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub levels: usize,
    pub coupling: f64,
    pub operators: OperatorSet,
    /// `T`; must be `1` for free-final-time runs, whose grid is in `τ`.
    pub final_time: f64,
    pub intervals: usize,
    pub b_bar: [f64; CHANNELS],
    pub q: [u32; CHANNELS],
    /// Constant penalty shapes `C_S`.
    #[serde(default = "default_shape")]
    pub shape: [f64; CHANNELS],
    #[serde(default)]
    pub sigma: SigmaSpec,
    pub initial_site: usize,
    pub goal_site: usize,
}

impl ModelConfig {
    pub fn build(&self) -> Result<ChainModel> {
        let n = self.levels;
        for (what, site) in [("initial_site", self.initial_site), ("goal_site", self.goal_site)] {
            if site == 0 || site > n {
                return config_err(format!("model.{what} = {site} outside 1..={n}"));
            }
        }
        let grid = TimeGrid::uniform(self.final_time, self.intervals)?;
        let m = grid.intervals();
        let sigma = match &self.sigma {
            SigmaSpec::Constant(s) => vec![*s; m],
            SigmaSpec::Values(v) => v.clone(),
        };
        let env = |l: usize| envelope_values(self.b_bar[l], self.q[l], &grid);
        ChainModel::new(ModelParts {
            drift: build_xx_chain(n, self.coupling)?,
            operators: self.operators.build(n)?,
            sigma,
            envelopes: [env(0)?, env(1)?],
            shapes: [vec![self.shape[0]; m], vec![self.shape[1]; m]],
            psi0: QuantumState::basis(n, self.initial_site - 1)?,
            psig: QuantumState::basis(n, self.goal_site - 1)?,
            grid,
        })
    }
}

/// One channel of the trapezoid profile: `offset` outside the ramps,
/// `offset + left` at the second knot, `offset + right` at the third,
/// linear in between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapezoidChannel {
    pub left: f64,
    pub right: f64,
    #[serde(default)]
    pub offset: f64,
}

impl TrapezoidChannel {
    fn value(&self, knots: [f64; 4], t: f64) -> f64 {
        let [t1, t2, t3, t4] = knots;
        let lin = |a: f64, b: f64| (t - a) / (b - a);
        let bump = if t < t1 || t >= t4 {
            0.0
        } else if t < t2 {
            self.left * lin(t1, t2)
        } else if t < t3 {
            self.left + (self.right - self.left) * lin(t2, t3)
        } else {
            self.right * (1.0 - lin(t3, t4))
        };
        self.offset + bump
    }
}

fn default_knots() -> [f64; 4] {
    [0.1, 0.2, 0.8, 0.9]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialControl {
    Zero,
    Constant {
        u: [f64; CHANNELS],
    },
    Trapezoid {
        /// Knot times as fractions of `T`.
        #[serde(default = "default_knots")]
        knots: [f64; 4],
        channels: [TrapezoidChannel; CHANNELS],
    },
    /// Sine class sampled at midpoints and clipped to the envelopes.
    SinClass {
        gamma: [Vec<f64>; CHANNELS],
        omega: [Vec<f64>; CHANNELS],
    },
    Values {
        u1: Vec<f64>,
        u2: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    pub initial: InitialControl,
    /// Mirror the initial guess, `u ↦ -u`.
    #[serde(default)]
    pub negate: bool,
    /// Clip the initial guess into the envelopes instead of rejecting it.
    #[serde(default)]
    pub clamp_to_envelope: bool,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            initial: InitialControl::Zero,
            negate: false,
            clamp_to_envelope: false,
        }
    }
}

impl ControlConfig {
    pub fn build(&self, model: &ChainModel) -> Result<PConstControl> {
        let m = model.intervals();
        let grid = model.grid();
        let mut c = match &self.initial {
            InitialControl::Zero => PConstControl::zeros(m),
            InitialControl::Constant { u } => PConstControl::constant(m, *u),
            InitialControl::Trapezoid { knots, channels } => {
                if knots.windows(2).any(|w| w[1] <= w[0]) || knots[0] < 0.0 || knots[3] > 1.0 {
                    return config_err("trapezoid knots must increase within [0, 1]");
                }
                let t_final = grid.final_time();
                let k = knots.map(|x| x * t_final);
                let ch = |l: usize| grid.midpoints().iter().map(|&t| channels[l].value(k, t)).collect();
                PConstControl::new(ch(0), ch(1))?
            }
            InitialControl::SinClass { gamma, omega } => {
                let p = SinClassParams::new(gamma.clone(), omega.clone())?;
                sample_sin_class(&p, grid, [model.envelope(0), model.envelope(1)])?
            }
            InitialControl::Values { u1, u2 } => PConstControl::new(u1.clone(), u2.clone())?,
        };
        if c.intervals() != m {
            return config_err(format!("initial control has {} intervals, model has {m}", c.intervals()));
        }
        if self.negate {
            for l in 0..CHANNELS {
                c.channel_mut(l).iter_mut().for_each(|u| *u = -*u);
            }
        }
        if self.clamp_to_envelope {
            c = c.clamped(model)?;
        }
        if !c.is_feasible(model) {
            return config_err("initial control violates the envelopes (set control.clamp_to_envelope to clip it)");
        }
        Ok(c)
    }
}

/// Which optimizer a config selects.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Gpm,
    Ga,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Seed for the GA and the noise study.
    #[serde(default)]
    pub rng_seed: u64,
    /// Output root; overrides the environment default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    pub model: ModelConfig,
    #[serde(default)]
    pub control: ControlConfig,
    pub objective: ObjectiveConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gpm: Option<GpmConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ga: Option<GaConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SinClassBox>,
    /// GA milestone thresholds on the tracked metric.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub milestones: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseStudyConfig>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn optimizer(&self) -> Result<OptimizerKind> {
        match (&self.gpm, &self.ga) {
            (Some(_), None) => Ok(OptimizerKind::Gpm),
            (None, Some(_)) => Ok(OptimizerKind::Ga),
            _ => config_err("exactly one of [gpm] and [ga] must be present"),
        }
    }

    /// GA settings with the run seed applied.
    pub fn ga_config(&self) -> Option<GaConfig> {
        self.ga.clone().map(|mut g| {
            g.rng_seed = self.rng_seed;
            g
        })
    }

    /// Noise settings with the run seed applied.
    pub fn noise_config(&self) -> Option<NoiseStudyConfig> {
        self.noise.clone().map(|mut n| {
            n.rng_seed = self.rng_seed;
            n
        })
    }

    /// Checks every section and returns the model and initial control.
    pub fn prepare(&self) -> Result<(ChainModel, PConstControl)> {
        let model = self.model.build()?;
        self.objective.validate()?;
        let kind = self.objective.kind;
        let free_t = kind == ObjectiveKind::FreeTF3;
        if free_t && (self.model.final_time - 1.0).abs() > 1e-12 {
            return config_err("free-final-time runs use model.final_time = 1 (the τ grid)");
        }
        match self.optimizer()? {
            OptimizerKind::Gpm => {
                let gpm = self.gpm.as_ref().expect("checked");
                gpm.validate()?;
                if !matches!(kind, ObjectiveKind::TransferF1 | ObjectiveKind::KeepingF2) {
                    return config_err("[gpm] needs the transfer_f1 or keeping_f2 objective");
                }
                if self.search.is_some() || !self.milestones.is_empty() {
                    return config_err("[search] and milestones belong to [ga] runs");
                }
            }
            OptimizerKind::Ga => {
                self.ga_config().expect("checked").validate()?;
                let Some(search) = &self.search else {
                    return config_err("[ga] needs a [search] box");
                };
                search.validate()?;
                match kind {
                    ObjectiveKind::GaKeepingF4 if search.final_time.is_none() => {}
                    ObjectiveKind::FreeTF3 if search.final_time.is_some() => {}
                    ObjectiveKind::GaKeepingF4 => return config_err("ga_keeping_f4 search must not carry final_time"),
                    ObjectiveKind::FreeTF3 => return config_err("free_t_f3 search needs a final_time range"),
                    _ => return config_err("[ga] needs the ga_keeping_f4 or free_t_f3 objective"),
                }
            }
        }
        if let Some(noise) = self.noise_config() {
            noise.validate()?;
        }
        let initial = self.control.build(&model)?;
        Ok((model, initial))
    }
}

/// Built-in presets, as shipped TOML text.
pub const PRESETS: &[(&str, &str)] = &[
    ("example1_case1", include_str!("../presets/example1_case1.toml")),
    ("example1_case2", include_str!("../presets/example1_case2.toml")),
    ("example1_case3", include_str!("../presets/example1_case3.toml")),
    ("example1_case4", include_str!("../presets/example1_case4.toml")),
    ("example1_case5", include_str!("../presets/example1_case5.toml")),
    ("example1_case6", include_str!("../presets/example1_case6.toml")),
    ("example2_gpm_1s", include_str!("../presets/example2_gpm_1s.toml")),
    ("example2_gpm_2s", include_str!("../presets/example2_gpm_2s.toml")),
    ("example2_gpm_3s", include_str!("../presets/example2_gpm_3s.toml")),
    ("example2_ga", include_str!("../presets/example2_ga.toml")),
    ("example3_ga", include_str!("../presets/example3_ga.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset_text(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::Config(format!("unknown preset {name:?}; known: {}", preset_names().collect::<Vec<_>>().join(", "))))
}

pub fn preset(name: &str) -> Result<RunConfig> {
    RunConfig::from_toml(preset_text(name)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses_and_prepares() {
        for name in preset_names() {
            let cfg = preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.name, name);
            cfg.prepare().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn toml_round_trip() {
        for name in preset_names() {
            let cfg = preset(name).unwrap();
            assert_eq!(RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg, "{name}");
        }
    }

    #[test]
    fn negated_cases_mirror_the_initial_guess() {
        for (a, b) in [("example1_case1", "example1_case4"), ("example1_case3", "example1_case6")] {
            let (_, ua) = preset(a).unwrap().prepare().unwrap();
            let (_, ub) = preset(b).unwrap().prepare().unwrap();
            let neg: Vec<f64> = ua.to_flat().iter().map(|x| -x).collect();
            assert_eq!(ub.to_flat(), neg);
        }
    }

    #[test]
    fn trapezoid_profile() {
        let ch = TrapezoidChannel { left: -0.2, right: 0.2, offset: -0.1 };
        let k = [1.0, 2.0, 8.0, 9.0];
        assert_eq!(ch.value(k, 0.5), -0.1);
        assert!((ch.value(k, 1.5) - (-0.2)).abs() < 1e-15);
        assert!((ch.value(k, 5.0) - (-0.1)).abs() < 1e-15);
        assert!((ch.value(k, 8.5) - 0.0).abs() < 1e-15);
        assert_eq!(ch.value(k, 9.5), -0.1);
    }

    #[test]
    fn malformed_configs_are_rejected() {
        let base = preset_text("example2_gpm_3s").unwrap();
        let err = RunConfig::from_toml(&base.replace("alpha", "alpah")).unwrap_err().to_string();
        assert!(err.contains("alpah"), "{err}");
        assert!(err.contains("line"), "{err}");

        let mut cfg = preset("example2_gpm_3s").unwrap();
        cfg.ga = Some(GaConfig::new(10, 5, 0));
        assert!(cfg.prepare().is_err());

        let mut cfg = preset("example2_gpm_3s").unwrap();
        cfg.model.goal_site = 4;
        assert!(cfg.prepare().is_err());

        let mut cfg = preset("example1_case1").unwrap();
        cfg.control.clamp_to_envelope = false;
        cfg.control.initial = InitialControl::Constant { u: [0.5, 0.0] };
        let err = cfg.prepare().unwrap_err().to_string();
        assert!(err.contains("envelope"), "{err}");

        let mut cfg = preset("example3_ga").unwrap();
        cfg.model.final_time = 25.0;
        assert!(cfg.prepare().is_err());
    }

    #[test]
    fn ga_presets_track_milestones() {
        assert_eq!(preset("example2_ga").unwrap().milestones, vec![0.01, 0.005]);
        assert_eq!(preset("example3_ga").unwrap().milestones, vec![0.1, 0.05, 0.02]);
    }

    #[test]
    fn run_seed_reaches_ga_and_noise() {
        let mut cfg = preset("example3_ga").unwrap();
        cfg.rng_seed = 42;
        assert_eq!(cfg.ga_config().unwrap().rng_seed, 42);
        assert_eq!(cfg.noise_config().unwrap().rng_seed, 42);
    }
}
