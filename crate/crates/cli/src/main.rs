use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use spinctl_core::artifacts::{self, Summary};
use spinctl_core::config::{self, RunConfig};
use spinctl_core::robustness::{noise_study, NoiseStudyConfig, DESK_RUNS, FULL_RUNS};
use spinctl_core::runner::{execute, RunOutcome};
use spinctl_core::Error;

/// Optimal-control experiments on spin chains.
#[derive(Parser)]
#[command(name = "spinctl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunOpts {
    /// Output root (default: config output_dir, then $SPINCTL_OUTPUT_ROOT, then ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Also dump every noisy-run infidelity.
    #[arg(long)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a run config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Execute a built-in preset.
    Preset {
        /// Preset name; omit with --list.
        name: Option<String>,
        /// List preset names.
        #[arg(long)]
        list: bool,
        /// Print the preset's config instead of running it.
        #[arg(long)]
        show: bool,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Check a config (file or preset) without running it.
    Validate {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
    },
    /// Monte Carlo noise study on the control stored in a run directory.
    NoiseStudy {
        #[arg(long)]
        run: PathBuf,
        /// Noise standard deviations (default: the run's noise section, else 0.05,0.1,0.15,0.2).
        #[arg(long, value_delimiter = ',')]
        sigmas: Option<Vec<f64>>,
        /// Runs per sigma.
        #[arg(long, conflicts_with = "full")]
        runs: Option<usize>,
        /// Full-scale sample size (10^4 runs per sigma).
        #[arg(long)]
        full: bool,
        /// Clip noisy controls into the envelopes.
        #[arg(long)]
        clamp: bool,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Tabulate several run directories (globs allowed) as CSV.
    Compare {
        #[arg(required = true)]
        dirs: Vec<String>,
        /// Write to a file instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn load_config(path: &Path) -> Result<RunConfig, Error> {
    let text = fs::read_to_string(path)?;
    RunConfig::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn run_and_write(mut cfg: RunConfig, opts: &RunOpts) -> Result<(), Error> {
    if let Some(s) = opts.seed {
        cfg.rng_seed = s;
    }
    let root = artifacts::output_root(opts.out.as_deref(), &cfg);
    let out = execute(&cfg)?;
    let dir = artifacts::write_run(&out, &root, opts.verbose)?;
    report(&out, &dir);
    Ok(())
}

fn report(out: &RunOutcome, dir: &Path) {
    let s = Summary::from_outcome(out);
    let r = &s.result;
    println!("run directory: {}", dir.display());
    println!(
        "{} {}: objective {:.6e}, F(T) {:.6e}, integral {:.6e}, max node {:.6e}",
        s.name, r.method, r.objective, r.final_infidelity, r.integral_infidelity, r.max_node_infidelity
    );
    println!("complexity {}, stop {}, T {:.6}, wall {:.2}s", r.complexity, r.stop, r.final_time, s.wall_time);
    if let Some(rule) = &r.stopping_rule {
        println!("stopping rule: {rule}");
    }
    for m in &r.milestones {
        match m.evaluations {
            Some(n) => println!("milestone {:e}: reached after {n} evaluations", m.threshold),
            None => println!("milestone {:e}: not reached", m.threshold),
        }
    }
    if let Some(n) = &out.noise {
        print_noise_rows(n);
    }
}

fn print_noise_rows(n: &spinctl_core::robustness::NoiseStudy) {
    println!("noise baseline W = {:.6e}", n.baseline);
    println!("sigma,min_Y,max_Y,min_W,max_W,mean_W,median_W");
    for r in &n.rows {
        println!(
            "{},{:.4},{:.4},{:.4e},{:.4e},{:.4e},{:.4e}",
            r.sigma, r.min_y, r.max_y, r.min_w, r.max_w, r.mean_w, r.median_w
        );
    }
}

#[derive(Serialize)]
struct NoiseRecord<'a> {
    source_run: String,
    final_time: f64,
    baseline: f64,
    failed_runs: usize,
    rng_seed: u64,
    noise: &'a NoiseStudyConfig,
}

fn noise_cmd(
    run: &Path,
    sigmas: Option<Vec<f64>>,
    runs: Option<usize>,
    full: bool,
    clamp: bool,
    opts: &RunOpts,
) -> Result<(), Error> {
    let summary = Summary::read(run)?;
    let cfg = summary.config;
    let (model, _) = cfg.prepare()?;
    let control = artifacts::read_control(run)?;
    let time_scale = summary.result.final_time / model.grid().final_time();
    let from_cfg = cfg.noise_config();
    let mut study = from_cfg.unwrap_or_else(|| NoiseStudyConfig::new(vec![0.05, 0.1, 0.15, 0.2], DESK_RUNS, cfg.rng_seed));
    if let Some(s) = sigmas {
        study.sigmas = s;
    }
    if let Some(r) = runs {
        study.runs_per_sigma = r;
    }
    if full {
        study.runs_per_sigma = FULL_RUNS;
        let exps = study.sigmas.len() * FULL_RUNS * model.intervals();
        eprintln!("warning: full scale needs about {exps} matrix exponentials");
    }
    if clamp {
        study.clamp_to_envelope = true;
    }
    if let Some(s) = opts.seed {
        study.rng_seed = s;
    }
    let result = noise_study(&model, &control, time_scale, &study)?;
    let root = artifacts::output_root(opts.out.as_deref(), &cfg);
    let dir = artifacts::create_run_dir(&root, &format!("{}-noise", cfg.name))?;
    artifacts::write_noise(&result, &dir, opts.verbose)?;
    let record = NoiseRecord {
        source_run: run.display().to_string(),
        final_time: summary.result.final_time,
        baseline: result.baseline,
        failed_runs: result.runs.iter().map(|r| r.failed.len()).sum(),
        rng_seed: study.rng_seed,
        noise: &study,
    };
    let text = toml::to_string(&record).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(dir.join("noise.toml"), text)?;
    println!("noise directory: {}", dir.display());
    print_noise_rows(&result);
    Ok(())
}

fn expand(patterns: &[String]) -> Result<Vec<PathBuf>, Error> {
    let mut dirs = Vec::new();
    for p in patterns {
        let matches: Vec<PathBuf> = glob::glob(p)
            .map_err(|e| Error::Input(format!("bad pattern {p:?}: {e}")))?
            .filter_map(|m| m.ok())
            .filter(|m| m.is_dir())
            .collect();
        if matches.is_empty() {
            return Err(Error::Input(format!("no run directory matches {p:?}")));
        }
        dirs.extend(matches);
    }
    Ok(dirs)
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, opts } => run_and_write(load_config(&config)?, &opts),
        Command::Preset { name, list, show, opts } => {
            if list {
                for n in config::preset_names() {
                    println!("{n}");
                }
                return Ok(());
            }
            let name = name.ok_or_else(|| Error::Input("preset name required (or --list)".into()))?;
            if show {
                print!("{}", config::preset_text(&name)?);
                return Ok(());
            }
            run_and_write(config::preset(&name)?, &opts)
        }
        Command::Validate { config, preset } => {
            let cfg = match (config, preset) {
                (Some(path), _) => load_config(&path)?,
                (None, Some(name)) => config::preset(&name)?,
                (None, None) => unreachable!("clap requires one of them"),
            };
            let (model, control) = cfg.prepare()?;
            println!(
                "{}: ok ({} sites, {} intervals, {} control values)",
                cfg.name,
                model.levels(),
                model.intervals(),
                control.to_flat().len()
            );
            Ok(())
        }
        Command::NoiseStudy {
            run,
            sigmas,
            runs,
            full,
            clamp,
            opts,
        } => noise_cmd(&run, sigmas, runs, full, clamp, &opts),
        Command::Compare { dirs, output } => {
            let rows = artifacts::compare(&expand(&dirs)?)?;
            match output {
                Some(path) => artifacts::write_compare(&rows, fs::File::create(path)?),
                None => artifacts::write_compare(&rows, std::io::stdout().lock()),
            }
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
