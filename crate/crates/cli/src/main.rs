//! `sdlc`: generate datasets, run the learners and the oracle checks, and
//! summarize reports.
//!
//! Exit codes: 0 when everything ran and passed, 2 when an oracle check
//! failed, 1 on any execution error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use sdlc_core::arbitrary_learner::{strong_run, BoostParams};
use sdlc_core::baselines::random_order_run;
use sdlc_core::dataset::{gen_arbitrary, gen_uniform_sphere, ArbitraryFamily, LabeledDataset};
use sdlc_core::forster::{default_max_iters, forster_transform};
use sdlc_core::harness::{run_experiment, ExperimentConfig, Mode, Report};
use sdlc_core::protocol::Transcript;
use sdlc_core::sphere_learner::{make_schedule, run_sphere};
use sdlc_core::RngStream;

#[derive(Parser)]
#[command(name = "sdlc", version, about = "Self-directed learning of halfspaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use this single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file or directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Run once on this dataset and write the transcript instead of running
    /// the configured grid.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Sphere,
    Clustered,
    LowMargin,
    SubspaceDegenerate,
    Grid,
}

#[derive(Subcommand)]
enum Command {
    /// Write a labeled dataset as JSON lines (or CSV when the name ends in .csv).
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "sphere")]
        family: Family,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Self-directed learner for uniform data on the sphere.
    RunSphere(RunArgs),
    /// Boosted weak learner for arbitrary separable data.
    RunArbitrary(RunArgs),
    /// Margin perceptron fed in a uniformly random order.
    Baseline(RunArgs),
    /// Monte-Carlo oracle table; exits with 2 if any row fails.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Print the cell table, fits and oracle rows of a saved report.
    Report {
        /// A `report.json` written by another subcommand.
        report: PathBuf,
    },
    /// Put a dataset in radially isotropic position and print the result.
    Forster {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Target slack; defaults to 1/(2d).
        #[arg(long)]
        delta: Option<f64>,
    },
}

enum Outcome {
    Pass,
    CheckFailed,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_config(common: &Common, mode: Mode) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    cfg.mode = mode;
    if let Some(s) = common.seed {
        cfg.seeds = vec![s];
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Generate { common, family, d, n } => generate(&common, family, d, n),
        Command::RunSphere(args) => run(args, Mode::Sphere),
        Command::RunArbitrary(args) => run(args, Mode::Arbitrary),
        Command::Baseline(args) => run(args, Mode::Baseline),
        Command::Verify { common, trials } => {
            let mut cfg = load_config(&common, Mode::Verify)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            cfg.validate()?;
            let report = run_experiment(&cfg)?;
            report.write_to(&cfg.out)?;
            print_report(&report, &mut io::stdout().lock())?;
            Ok(if report.oracles_pass() { Outcome::Pass } else { Outcome::CheckFailed })
        }
        Command::Report { report } => {
            let report = Report::load(&report).with_context(|| format!("reading {}", report.display()))?;
            print_report(&report, &mut io::stdout().lock())?;
            if report.failed_runs() > 0 {
                bail!("{} runs in the report failed", report.failed_runs());
            }
            Ok(if report.oracles_pass() { Outcome::Pass } else { Outcome::CheckFailed })
        }
        Command::Forster { common, data, delta } => forster(&common, &data, delta),
    }
}

fn generate(common: &Common, family: Family, d: Option<usize>, n: Option<usize>) -> Result<Outcome> {
    let cfg = load_config(common, Mode::Sphere)?;
    let d = d.unwrap_or(cfg.d[0]);
    let n = n.unwrap_or(cfg.n[0]);
    let rng = RngStream::new(cfg.seeds[0], 0);
    let ds = match family {
        Family::Sphere => gen_uniform_sphere(n, d, &rng)?,
        other => {
            let fam = match other {
                Family::Clustered => ArbitraryFamily::Clustered,
                Family::LowMargin => ArbitraryFamily::LowMargin,
                Family::SubspaceDegenerate => ArbitraryFamily::SubspaceDegenerate,
                _ => ArbitraryFamily::Grid,
            };
            gen_arbitrary(fam, n, d, &cfg.family_params, &rng)?
        }
    };
    let Some(out) = &common.out else {
        bail!("generate needs --out");
    };
    let mut w = BufWriter::new(File::create(out).with_context(|| format!("creating {}", out.display()))?);
    if out.extension().is_some_and(|e| e == "csv") {
        ds.write_csv(&mut w)?;
    } else {
        ds.write_jsonl(&mut w)?;
    }
    w.flush()?;
    Ok(Outcome::Pass)
}

fn run(args: RunArgs, mode: Mode) -> Result<Outcome> {
    let cfg = load_config(&args.common, mode)?;
    if let Some(data) = &args.data {
        let ds = LabeledDataset::load(data).with_context(|| format!("reading {}", data.display()))?;
        let transcript = run_single(&cfg, mode, &ds)?;
        let doc = json!({ "summary": transcript.summary(), "records": transcript.records });
        write_json(args.common.out.as_deref(), &doc)?;
        return Ok(Outcome::Pass);
    }
    let report = run_experiment(&cfg)?;
    report.write_to(&cfg.out)?;
    print_report(&report, &mut io::stdout().lock())?;
    if report.failed_runs() > 0 {
        bail!("{} of {} runs failed; see {}", report.failed_runs(), report.runs.len(), cfg.out.join("report.json").display());
    }
    Ok(Outcome::Pass)
}

fn run_single(cfg: &ExperimentConfig, mode: Mode, ds: &LabeledDataset) -> Result<Transcript> {
    let seed = cfg.seeds[0];
    Ok(match mode {
        Mode::Sphere => {
            let schedule = make_schedule(ds.len(), ds.dim(), cfg.delta, cfg.c_prime)?;
            run_sphere(ds, &schedule, cfg.c_init, &RngStream::new(seed, 1))?.transcript
        }
        Mode::Baseline => random_order_run(ds, None, &RngStream::new(seed, 2))?,
        Mode::Arbitrary => {
            let params = BoostParams {
                c_hat: cfg.c_hat,
                alpha_hat: cfg.alpha_hat,
            };
            strong_run(ds, cfg.eps, cfg.delta, &params, &RngStream::new(seed, 3))?.transcript
        }
        Mode::Verify => unreachable!("verify has no single-dataset form"),
    })
}

fn forster(common: &Common, data: &Path, delta: Option<f64>) -> Result<Outcome> {
    let ds = LabeledDataset::load(data).with_context(|| format!("reading {}", data.display()))?;
    let d = ds.dim();
    let delta = delta.unwrap_or(1.0 / (2.0 * d as f64));
    let out = forster_transform(ds.points(), delta, default_max_iters(d, delta))?;
    let doc = json!({
        "k": out.k(),
        "fraction": out.fraction,
        "iterations": out.iterations,
        "rip": out.rip,
        "retained": out.retained_indices.len(),
        "subspace_basis": out.subspace_basis,
        "a": out.a,
    });
    write_json(common.out.as_deref(), &doc)?;
    Ok(Outcome::Pass)
}

fn write_json(out: Option<&Path>, doc: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(doc)?;
    match out {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => writeln!(io::stdout().lock(), "{text}")?,
    }
    Ok(())
}

fn print_report(report: &Report, w: &mut impl Write) -> Result<()> {
    if !report.cells.is_empty() {
        writeln!(w, "{:<10} {:>4} {:>9} {:>5} {:>10} {:>9} {:>8} {:>9}", "mode", "d", "n", "runs", "mistakes", "stderr", "median", "coverage")?;
        for c in &report.cells {
            match (c.mistakes, c.coverage) {
                (Some(m), Some(cov)) => writeln!(
                    w,
                    "{:<10} {:>4} {:>9} {:>5} {:>10.2} {:>9.2} {:>8.1} {:>9.4}",
                    c.mode.as_str(),
                    c.d,
                    c.n,
                    c.runs - c.failures,
                    m.mean,
                    m.std_err,
                    m.median,
                    cov.mean
                )?,
                _ => writeln!(w, "{:<10} {:>4} {:>9} all {} runs failed", c.mode.as_str(), c.d, c.n, c.runs)?,
            }
        }
    }
    for f in &report.fits {
        writeln!(
            w,
            "fit {} d={}: ln n  a={:.3} b={:.3} R²={:.4} | ln ln n  a={:.3} b={:.3} R²={:.4}",
            f.mode.as_str(),
            f.d,
            f.fit.ln.a,
            f.fit.ln.b,
            f.fit.ln.r2,
            f.fit.lnln.a,
            f.fit.lnln.b,
            f.fit.lnln.r2
        )?;
    }
    for o in &report.oracles {
        writeln!(
            w,
            "{} {:<24} {:<48} stat={:.6} bound={:.6} se={:.2e}",
            if o.pass { "PASS" } else { "FAIL" },
            o.name,
            o.params,
            o.statistic,
            o.bound,
            o.std_err
        )?;
    }
    Ok(())
}
