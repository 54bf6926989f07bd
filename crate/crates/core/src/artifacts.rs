//! Run directories: summary, iteration log, controls, populations, noise.
//!
//! Floats are written as `{:.16e}` (17 significant digits), so every value
//! reads back bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::control::{PConstControl, SinClassParams};
use crate::error::{Error, Result};
use crate::ga::Milestone;
use crate::model::CHANNELS;
use crate::robustness::NoiseStudy;
use crate::runner::{OptimizerRun, RunOutcome};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "SPINCTL_OUTPUT_ROOT";
const DEFAULT_ROOT: &str = "runs";

pub const SUMMARY_FILE: &str = "summary.toml";
pub const ITERATIONS_FILE: &str = "iterations.csv";
pub const CONTROLS_FILE: &str = "controls.csv";
pub const POPULATIONS_FILE: &str = "populations.csv";
pub const NOISE_FILE: &str = "noise.csv";
pub const NOISE_RAW_FILE: &str = "noise_raw.csv";

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Explicit root, else the config's `output_dir`, else the environment
/// variable, else `./runs`.
pub fn output_root(explicit: Option<&Path>, config: &RunConfig) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Some(d) = &config.output_dir {
        return PathBuf::from(d);
    }
    std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_ROOT))
}

/// Creates `<root>/<name>-<UTC timestamp>`, adding a counter rather than
/// reusing an existing directory.
pub fn create_run_dir(root: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(root)?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
    let base = format!("{name}-{stamp}");
    for k in 1.. {
        let dir = if k == 1 {
            root.join(&base)
        } else {
            root.join(format!("{base}-{k}"))
        };
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    /// `GPM-1S`, `GPM-2S`, `GPM-3S` or `GA`.
    pub method: String,
    pub objective: f64,
    pub final_infidelity: f64,
    pub integral_infidelity: f64,
    pub max_node_infidelity: f64,
    pub control_penalty: f64,
    pub time_penalty: f64,
    pub complexity: u64,
    pub stop: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopping_rule: Option<String>,
    /// Physical final time.
    pub final_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sin_class: Option<SinClassParams>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub milestones: Vec<Milestone>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_baseline: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub code_version: String,
    pub parallel_backend: String,
    pub created: String,
    pub wall_time: f64,
    pub result: ResultSummary,
    pub config: RunConfig,
}

impl Summary {
    pub fn from_outcome(out: &RunOutcome) -> Self {
        let t = out.evaluation.terms;
        let (method, stopping_rule, sin_class, milestones) = match &out.optimizer {
            OptimizerRun::Gpm(_) => {
                let gpm = out.config.gpm.as_ref().expect("gpm run has a gpm section");
                let rule = gpm.stopping.iter().map(|r| r.describe()).collect::<Vec<_>>().join(" ∨ ");
                (format!("GPM-{}", gpm.form.label()), Some(rule).filter(|r| !r.is_empty()), None, Vec::new())
            }
            OptimizerRun::Ga(run) => ("GA".to_string(), None, Some(run.params.clone()), run.ga.milestones.clone()),
        };
        Summary {
            name: out.config.name.clone(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            parallel_backend: crate::par::BACKEND.to_string(),
            created: chrono::Utc::now().to_rfc3339(),
            wall_time: out.wall_time,
            result: ResultSummary {
                method,
                objective: out.evaluation.value,
                final_infidelity: t.final_infidelity,
                integral_infidelity: t.integral,
                max_node_infidelity: t.max_node,
                control_penalty: t.control_penalty,
                time_penalty: t.time_penalty,
                complexity: out.complexity,
                stop: out.stop_label(),
                stopping_rule,
                final_time: out.model.grid().final_time() * out.time_scale,
                sin_class,
                milestones,
                noise_baseline: out.noise.as_ref().map(|n| n.baseline),
            },
            config: out.config.clone(),
        }
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(SUMMARY_FILE))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

pub fn write_iterations(out: &RunOutcome, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    match &out.optimizer {
        OptimizerRun::Gpm(rec) => {
            w.write_record([
                "k",
                "value",
                "final_infidelity",
                "integral_infidelity",
                "max_node_infidelity",
                "control_penalty",
                "time_penalty",
                "stationarity",
                "cauchy_count",
            ])?;
            for r in &rec.rows {
                let t = r.terms;
                w.write_record([
                    r.k.to_string(),
                    fmt(r.value),
                    fmt(t.final_infidelity),
                    fmt(t.integral),
                    fmt(t.max_node),
                    fmt(t.control_penalty),
                    fmt(t.time_penalty),
                    fmt(r.stationarity),
                    r.cauchy_count.to_string(),
                ])?;
            }
        }
        OptimizerRun::Ga(run) => {
            w.write_record(["generation", "best_value", "best_metric", "evaluations"])?;
            for r in &run.ga.history {
                w.write_record([
                    r.generation.to_string(),
                    fmt(r.best_value),
                    fmt(r.best_metric),
                    r.evaluations.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_controls(out: &RunOutcome, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t_mid", "u1", "u2", "nu1_lower", "nu1_upper", "nu2_lower", "nu2_upper"])?;
    let (e1, e2) = (out.model.envelope(0), out.model.envelope(1));
    for (j, t) in out.midpoint_times().into_iter().enumerate() {
        let u = out.control.at(j);
        w.write_record([fmt(t), fmt(u[0]), fmt(u[1]), fmt(-e1[j]), fmt(e1[j]), fmt(-e2[j]), fmt(e2[j])])?;
    }
    w.flush()?;
    Ok(())
}

/// Node times and `|ψ_m|²` for every site.
pub fn write_populations(out: &RunOutcome, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let n = out.model.levels();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|m| format!("p{m}")));
    w.write_record(&header)?;
    for (t, psi) in out.node_times().into_iter().zip(&out.nodes) {
        let mut row = vec![fmt(t)];
        row.extend(psi.iter().map(|z| fmt(z.norm_sqr())));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_noise(study: &NoiseStudy, dir: &Path, raw: bool) -> Result<()> {
    let mut w = writer(&dir.join(NOISE_FILE))?;
    w.write_record(["sigma", "min_Y", "max_Y", "min_W", "max_W", "mean_W", "median_W"])?;
    for r in &study.rows {
        w.write_record([r.sigma, r.min_y, r.max_y, r.min_w, r.max_w, r.mean_w, r.median_w].map(fmt))?;
    }
    w.flush()?;
    if raw {
        let mut w = writer(&dir.join(NOISE_RAW_FILE))?;
        w.write_record(["sigma", "sample", "W"])?;
        for s in &study.runs {
            for (p, x) in s.w.iter().enumerate() {
                w.write_record([fmt(s.sigma), p.to_string(), fmt(*x)])?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

/// Writes every artifact of `out` into a fresh directory under `root`.
pub fn write_run(out: &RunOutcome, root: &Path, raw_noise: bool) -> Result<PathBuf> {
    let dir = create_run_dir(root, &out.config.name)?;
    write_run_into(out, &dir, raw_noise)?;
    Ok(dir)
}

/// Writes every artifact of `out` into an existing directory.
pub fn write_run_into(out: &RunOutcome, dir: &Path, raw_noise: bool) -> Result<()> {
    write_iterations(out, &dir.join(ITERATIONS_FILE))?;
    write_controls(out, &dir.join(CONTROLS_FILE))?;
    write_populations(out, &dir.join(POPULATIONS_FILE))?;
    if let Some(n) = &out.noise {
        write_noise(n, dir, raw_noise)?;
    }
    let summary = toml::to_string(&Summary::from_outcome(out)).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(dir.join(SUMMARY_FILE), summary)?;
    Ok(())
}

/// Control stored in a run directory.
pub fn read_control(dir: &Path) -> Result<PConstControl> {
    let mut r = csv::Reader::from_path(dir.join(CONTROLS_FILE))?;
    let mut u: [Vec<f64>; CHANNELS] = [Vec::new(), Vec::new()];
    for rec in r.records() {
        let rec = rec?;
        for (l, col) in [(0, 1), (1, 2)] {
            let field = rec.get(col).ok_or_else(|| Error::Input("short controls row".into()))?;
            let x: f64 = field
                .parse()
                .map_err(|_| Error::Input(format!("bad control value {field:?}")))?;
            u[l].push(x);
        }
    }
    let [u1, u2] = u;
    PConstControl::new(u1, u2)
}

/// One line of a comparison table.
#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub run: String,
    pub summary: Summary,
}

pub const COMPARE_HEADER: [&str; 10] = [
    "run",
    "method",
    "complexity",
    "complexity_pct",
    "objective",
    "final_infidelity",
    "integral_infidelity",
    "max_node_infidelity",
    "final_time",
    "stop",
];

/// Reads the summaries of `dirs`; complexity is also reported as a share of
/// the largest one.
pub fn compare(dirs: &[PathBuf]) -> Result<Vec<CompareRow>> {
    dirs.iter()
        .map(|d| {
            Ok(CompareRow {
                run: d.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
                summary: Summary::read(d)?,
            })
        })
        .collect()
}

pub fn write_compare<W: std::io::Write>(rows: &[CompareRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COMPARE_HEADER)?;
    let top = rows.iter().map(|r| r.summary.result.complexity).max().unwrap_or(0).max(1) as f64;
    for row in rows {
        let r = &row.summary.result;
        w.write_record([
            row.run.clone(),
            r.method.clone(),
            r.complexity.to_string(),
            format!("{:.1}", 100.0 * r.complexity as f64 / top),
            fmt(r.objective),
            fmt(r.final_infidelity),
            fmt(r.integral_infidelity),
            fmt(r.max_node_infidelity),
            fmt(r.final_time),
            r.stop.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
