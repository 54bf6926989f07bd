//! Executes a [`RunConfig`] end to end.

use std::time::Instant;

use crate::config::{OptimizerKind, RunConfig};
use crate::control::{rescale_free_time, sample_sin_class, PConstControl};
use crate::error::Result;
use crate::ga::{ga_free_time, ga_keeping, SinClassRun};
use crate::gpm::{run_gpm, RunRecord};
use crate::linalg::StateVector;
use crate::model::ChainModel;
use crate::objective::{Evaluation, ObjectiveKind};
use crate::propagator::propagate_nodes;
use crate::robustness::{noise_study, NoiseStudy};

#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum OptimizerRun {
    Gpm(RunRecord),
    Ga(SinClassRun),
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub model: ChainModel,
    pub optimizer: OptimizerRun,
    /// Best control, on the model grid (the `τ` grid for free-`T` runs).
    pub control: PConstControl,
    /// Generator scale: the found `T` for free-`T` runs, otherwise `1`.
    pub time_scale: f64,
    pub evaluation: Evaluation,
    /// Solved Cauchy problems (GPM ledger) or objective evaluations (GA).
    pub complexity: u64,
    /// Forward-sweep node states under `control`.
    pub nodes: Vec<StateVector>,
    pub noise: Option<NoiseStudy>,
    pub wall_time: f64,
}

impl RunOutcome {
    /// Physical node times `t_j`.
    pub fn node_times(&self) -> Vec<f64> {
        self.model.grid().nodes().iter().map(|t| t * self.time_scale).collect()
    }

    /// Physical interval midpoints.
    pub fn midpoint_times(&self) -> Vec<f64> {
        self.model.grid().midpoints().iter().map(|t| t * self.time_scale).collect()
    }

    pub fn stop_label(&self) -> String {
        match &self.optimizer {
            OptimizerRun::Gpm(r) => format!("{:?}", r.stop),
            OptimizerRun::Ga(_) => "GenerationLimit".into(),
        }
    }
}

/// Validates and runs `config`; the noise study, if configured, uses the
/// optimized control.
pub fn execute(config: &RunConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    let (model, initial) = config.prepare()?;
    let (optimizer, control, time_scale, evaluation, complexity) = match config.optimizer()? {
        OptimizerKind::Gpm => {
            let gpm = config.gpm.as_ref().expect("checked by prepare");
            let rec = run_gpm(&model, &config.objective, &initial, gpm)?;
            let last = rec.last();
            let eval = Evaluation {
                value: last.value,
                terms: last.terms,
            };
            let (c, n) = (rec.final_control.clone(), rec.complexity());
            (OptimizerRun::Gpm(rec), c, 1.0, eval, n)
        }
        OptimizerKind::Ga => {
            let ga = config.ga_config().expect("checked by prepare");
            let search = config.search.as_ref().expect("checked by prepare");
            if config.objective.kind == ObjectiveKind::FreeTF3 {
                let run = ga_free_time(&model, search, &config.objective, &ga, &config.milestones)?;
                let range = search.final_time.expect("checked by prepare");
                let ft = rescale_free_time(&run.params, &model, range)?;
                let (eval, n) = (run.evaluation, run.ga.evaluations);
                (OptimizerRun::Ga(run), ft.control, ft.time_scale, eval, n)
            } else {
                let run = ga_keeping(&model, search, &config.objective, &ga, &config.milestones)?;
                let c = sample_sin_class(&run.params, model.grid(), [model.envelope(0), model.envelope(1)])?;
                let (eval, n) = (run.evaluation, run.ga.evaluations);
                (OptimizerRun::Ga(run), c, 1.0, eval, n)
            }
        }
    };
    let nodes = propagate_nodes(&model, &control, time_scale)?;
    let noise = match config.noise_config() {
        Some(n) => Some(noise_study(&model, &control, time_scale, &n)?),
        None => None,
    };
    Ok(RunOutcome {
        config: config.clone(),
        model,
        optimizer,
        control,
        time_scale,
        evaluation,
        complexity,
        nodes,
        noise,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
