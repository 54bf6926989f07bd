//! Real-coded genetic algorithm over a box.
//!
//! Generational scheme with the defaults of the widely used Python
//! `geneticalgorithm` package:
//! * sort by fitness, keep `elitism_count` best, fill the parent pool by
//!   roulette on rescaled fitness;
//! * parents enter the crossover pool with `crossover_probability`;
//! * each pair gives two children by uniform crossover; the first is mutated
//!   uniformly in the box, the second uniformly between its parents' genes;
//! * parents carry their fitness over, so only children are evaluated.
//!
//! Selection and variation run serially from one seeded RNG; children of a
//! generation are evaluated as a batch through [`crate::par::map`], so results
//! are identical for the rayon and sequential backends.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{SinClassBox, SinClassParams};
use crate::error::{input, Error, Result};
use crate::model::ChainModel;
use crate::objective::{eval_f3_free_t, eval_f4, CauchyCounter, Evaluation, ObjectiveConfig, ObjectiveKind};
use crate::par;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    pub max_num_iteration: usize,
    #[serde(default = "default_mutation")]
    pub mutation_probability: f64,
    #[serde(default = "default_crossover")]
    pub crossover_probability: f64,
    #[serde(default = "default_elitism")]
    pub elitism_count: usize,
    #[serde(default = "default_parents")]
    pub parents_fraction: f64,
    /// Set from the run-level seed when loaded from a config file.
    #[serde(skip)]
    pub rng_seed: u64,
}

fn default_mutation() -> f64 {
    0.1
}
fn default_crossover() -> f64 {
    0.5
}
fn default_elitism() -> usize {
    1
}
fn default_parents() -> f64 {
    0.3
}

impl GaConfig {
    pub fn new(population_size: usize, max_num_iteration: usize, rng_seed: u64) -> Self {
        Self {
            population_size,
            max_num_iteration,
            mutation_probability: default_mutation(),
            crossover_probability: default_crossover(),
            elitism_count: default_elitism(),
            parents_fraction: default_parents(),
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::Config("population_size must be >= 2".into()));
        }
        for (name, p) in [
            ("mutation_probability", self.mutation_probability),
            ("crossover_probability", self.crossover_probability),
            ("parents_fraction", self.parents_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.elitism_count >= self.population_size {
            return Err(Error::Config("elitism_count must be < population_size".into()));
        }
        if self.elitism_count > self.parent_count() {
            return Err(Error::Config("elitism_count exceeds the parent pool".into()));
        }
        Ok(())
    }

    /// Parent-pool size, bumped so that the children come in pairs.
    pub fn parent_count(&self) -> usize {
        let pop = self.population_size;
        let mut p = ((self.parents_fraction * pop as f64) as usize).clamp(1, pop);
        if !(pop - p).is_multiple_of(2) {
            p += 1;
        }
        p
    }

    /// Objective evaluations of a full run.
    pub fn evaluation_budget(&self) -> u64 {
        (self.population_size + self.max_num_iteration * (self.population_size - self.parent_count())) as u64
    }
}

/// Value minimized by the GA plus a tracked metric for milestone logging.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scored {
    pub value: f64,
    pub metric: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRow {
    pub generation: usize,
    pub best_value: f64,
    pub best_metric: f64,
    /// Objective evaluations so far (each one Cauchy problem).
    pub evaluations: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Milestone {
    pub threshold: f64,
    /// Evaluation count at the first individual whose metric fell below
    /// `threshold`; `None` if never reached.
    pub evaluations: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct GaResult {
    pub best: Vec<f64>,
    pub best_value: f64,
    pub best_metric: f64,
    pub history: Vec<GenerationRow>,
    pub milestones: Vec<Milestone>,
    pub evaluations: u64,
    /// Individuals whose objective failed or was non-finite.
    pub quarantined: u64,
    pub wall_time: f64,
}

#[derive(Clone, Debug)]
struct Individual {
    genes: Vec<f64>,
    score: Scored,
}

const WORST: Scored = Scored {
    value: f64::INFINITY,
    metric: f64::INFINITY,
};

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo < hi {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn by_value(a: &Individual, b: &Individual) -> std::cmp::Ordering {
    a.score.value.total_cmp(&b.score.value)
}

/// Minimizes `objective` over the box `bounds`.
///
/// Failed or non-finite evaluations are quarantined with infinite fitness.
/// `milestones` are thresholds on [`Scored::metric`] whose first crossing is
/// logged with the evaluation count at which it happened.
pub fn run_ga<F>(bounds: &[(f64, f64)], config: &GaConfig, milestones: &[f64], objective: F) -> Result<GaResult>
where
    F: Fn(&[f64]) -> Result<Scored> + Sync + Send,
{
    config.validate()?;
    if bounds.is_empty() {
        return input("GA needs at least one gene");
    }
    if bounds.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
        return input("GA bounds must be finite with lo <= hi");
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut evaluations = 0u64;
    let mut quarantined = 0u64;
    let mut reached: Vec<Milestone> = milestones
        .iter()
        .map(|&threshold| Milestone {
            threshold,
            evaluations: None,
        })
        .collect();

    let mut evaluate = |batch: Vec<Vec<f64>>, evaluations: &mut u64, quarantined: &mut u64| -> Vec<Individual> {
        let scores = par::map(&batch, |g| match objective(g) {
            Ok(s) if s.value.is_finite() => s,
            _ => WORST,
        });
        batch
            .into_iter()
            .zip(scores)
            .map(|(genes, score)| {
                *evaluations += 1;
                if score.value.is_infinite() {
                    *quarantined += 1;
                }
                for m in reached.iter_mut() {
                    if m.evaluations.is_none() && score.metric < m.threshold {
                        m.evaluations = Some(*evaluations);
                    }
                }
                Individual { genes, score }
            })
            .collect()
    };

    if bounds.iter().all(|(lo, hi)| lo == hi) {
        let point: Vec<f64> = bounds.iter().map(|b| b.0).collect();
        let only = evaluate(vec![point], &mut evaluations, &mut quarantined).remove(0);
        return Ok(GaResult {
            history: vec![GenerationRow {
                generation: 0,
                best_value: only.score.value,
                best_metric: only.score.metric,
                evaluations,
            }],
            best: only.genes,
            best_value: only.score.value,
            best_metric: only.score.metric,
            milestones: reached,
            evaluations,
            quarantined,
            wall_time: start.elapsed().as_secs_f64(),
        });
    }

    let pop_size = config.population_size;
    let n_parents = config.parent_count();
    let initial: Vec<Vec<f64>> = (0..pop_size)
        .map(|_| bounds.iter().map(|&(lo, hi)| uniform(&mut rng, lo, hi)).collect())
        .collect();
    let mut pop = evaluate(initial, &mut evaluations, &mut quarantined);
    pop.sort_by(by_value);
    let mut best = pop[0].clone();
    let mut history = vec![GenerationRow {
        generation: 0,
        best_value: best.score.value,
        best_metric: best.score.metric,
        evaluations,
    }];

    for generation in 1..=config.max_num_iteration {
        // roulette weights: larger for smaller objective, all positive
        let finite_max = pop.iter().map(|i| i.score.value).filter(|v| v.is_finite()).fold(f64::MIN, f64::max);
        let min = pop[0].score.value;
        let shift = if min < 0.0 { -min } else { 0.0 };
        let weights: Vec<f64> = pop
            .iter()
            .map(|i| {
                if i.score.value.is_finite() {
                    finite_max + shift - (i.score.value + shift) + 1.0
                } else {
                    0.0
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();

        let mut parents: Vec<Individual> = pop[..config.elitism_count].to_vec();
        while parents.len() < n_parents {
            let pick = if total > 0.0 && total.is_finite() {
                let mut r = rng.random::<f64>() * total;
                let mut idx = pop.len() - 1;
                for (k, w) in weights.iter().enumerate() {
                    if r < *w {
                        idx = k;
                        break;
                    }
                    r -= w;
                }
                idx
            } else {
                rng.random_range(0..pop.len())
            };
            parents.push(pop[pick].clone());
        }
        let mut pool: Vec<usize> = (0..parents.len())
            .filter(|_| rng.random::<f64>() <= config.crossover_probability)
            .collect();
        if pool.is_empty() {
            pool = (0..parents.len()).collect();
        }

        let mut children = Vec::with_capacity(pop_size - n_parents);
        while children.len() + n_parents < pop_size {
            let p1 = &parents[pool[rng.random_range(0..pool.len())]].genes;
            let p2 = &parents[pool[rng.random_range(0..pool.len())]].genes;
            let mut c1 = p1.clone();
            let mut c2 = p2.clone();
            for s in 0..bounds.len() {
                if rng.random::<f64>() < 0.5 {
                    std::mem::swap(&mut c1[s], &mut c2[s]);
                }
            }
            for (s, &(lo, hi)) in bounds.iter().enumerate() {
                if rng.random::<f64>() < config.mutation_probability {
                    c1[s] = uniform(&mut rng, lo, hi);
                }
            }
            for (s, &(lo, hi)) in bounds.iter().enumerate() {
                if rng.random::<f64>() < config.mutation_probability {
                    let (a, b) = (p1[s].min(p2[s]), p1[s].max(p2[s]));
                    c2[s] = if a < b { uniform(&mut rng, a, b) } else { uniform(&mut rng, lo, hi) };
                }
            }
            children.push(c1);
            if children.len() + n_parents < pop_size {
                children.push(c2);
            }
        }
        let mut next = parents;
        next.extend(evaluate(children, &mut evaluations, &mut quarantined));
        next.sort_by(by_value);
        pop = next;
        if pop[0].score.value < best.score.value {
            best = pop[0].clone();
        }
        history.push(GenerationRow {
            generation,
            best_value: best.score.value,
            best_metric: best.score.metric,
            evaluations,
        });
    }

    Ok(GaResult {
        best: best.genes,
        best_value: best.score.value,
        best_metric: best.score.metric,
        history,
        milestones: reached,
        evaluations,
        quarantined,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Decoded outcome of a GA run over the sinusoidal class.
#[derive(Clone, Debug)]
pub struct SinClassRun {
    pub ga: GaResult,
    pub params: SinClassParams,
    pub evaluation: Evaluation,
}

fn finish(
    ga: GaResult,
    space: &SinClassBox,
    rescore: impl Fn(&SinClassParams) -> Result<Evaluation>,
) -> Result<SinClassRun> {
    let params = space.decode(&ga.best)?;
    let evaluation = rescore(&params)?;
    Ok(SinClassRun { ga, params, evaluation })
}

/// Minimizes `f₄` over the sinusoidal box; milestones track `max_j F`.
pub fn ga_keeping(
    model: &ChainModel,
    space: &SinClassBox,
    objective: &ObjectiveConfig,
    config: &GaConfig,
    milestones: &[f64],
) -> Result<SinClassRun> {
    space.validate()?;
    objective.validate()?;
    if objective.kind != ObjectiveKind::GaKeepingF4 {
        return input("ga_keeping needs the f4 objective");
    }
    if space.final_time.is_some() {
        return input("keeping search box must not carry a final-time gene");
    }
    let scratch = CauchyCounter::new();
    let ga = run_ga(&space.bounds(), config, milestones, |genes| {
        let e = eval_f4(model, &space.decode(genes)?, objective, &scratch)?;
        Ok(Scored {
            value: e.value,
            metric: e.terms.max_node,
        })
    })?;
    finish(ga, space, |p| eval_f4(model, p, objective, &CauchyCounter::new()))
}

/// Minimizes `f̆₃` over `(x, T)`; `tau_model` lives on the unit grid.
/// Milestones track the final infidelity.
pub fn ga_free_time(
    tau_model: &ChainModel,
    space: &SinClassBox,
    objective: &ObjectiveConfig,
    config: &GaConfig,
    milestones: &[f64],
) -> Result<SinClassRun> {
    space.validate()?;
    objective.validate()?;
    if objective.kind != ObjectiveKind::FreeTF3 {
        return input("ga_free_time needs the free-T f3 objective");
    }
    let Some(range) = space.final_time else {
        return input("free-T search box needs a final-time range");
    };
    let scratch = CauchyCounter::new();
    let ga = run_ga(&space.bounds(), config, milestones, |genes| {
        let e = eval_f3_free_t(tau_model, &space.decode(genes)?, range, objective, &scratch)?;
        Ok(Scored {
            value: e.value,
            metric: e.terms.final_infidelity,
        })
    })?;
    finish(ga, space, |p| eval_f3_free_t(tau_model, p, range, objective, &CauchyCounter::new()))
}
