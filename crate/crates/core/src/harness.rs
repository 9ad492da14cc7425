//! Experiment grids, aggregation, scaling fits and the oracle table.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::arbitrary_learner::{strong_run, BoostParams, DEFAULT_C_HAT};
use crate::baselines::random_order_run;
use crate::dataset::{gen_arbitrary, gen_uniform_sphere, ArbitraryFamily, ArbitraryParams};
use crate::error::{Error, Result};
use crate::geometry::{sample_sphere, unit_at_angle, RngStream, Vector};
use crate::margin_perceptron::{decay_bound, large_margin_update_bound, mp_update, Hypothesis};
use crate::oracles::{
    mc_disagreement_mass, mc_max_margin_tail, mc_sample_max_margin, simulate_superlinear, superlinear_trajectory,
    TailCase, TailCheckResult,
};
use crate::sphere_learner::{make_schedule, run_sphere, DEFAULT_C_INIT, DEFAULT_C_PRIME};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Sphere,
    Arbitrary,
    Baseline,
    Verify,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Sphere => "sphere",
            Mode::Arbitrary => "arbitrary",
            Mode::Baseline => "baseline",
            Mode::Verify => "verify",
        }
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Vec<usize>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(usize),
        Many(Vec<usize>),
    }
    Ok(match OneOrMany::deserialize(de)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

/// One experiment, read from a single JSON document. `d` and `n` take either a
/// number or a list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(deserialize_with = "one_or_many")]
    pub d: Vec<usize>,
    #[serde(deserialize_with = "one_or_many")]
    pub n: Vec<usize>,
    pub delta: f64,
    pub eps: f64,
    pub seeds: Vec<u64>,
    pub c_prime: f64,
    pub c_init: f64,
    pub c_hat: f64,
    pub alpha_hat: Option<f64>,
    /// Data family for `arbitrary` mode.
    pub family: ArbitraryFamily,
    pub family_params: ArbitraryParams,
    /// Monte-Carlo trials per oracle row in `verify` mode.
    pub trials: usize,
    /// Output directory for `report.json` and `runs.csv`.
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Sphere,
            d: vec![10],
            n: vec![1000],
            delta: 0.1,
            eps: 0.01,
            seeds: vec![0],
            c_prime: DEFAULT_C_PRIME,
            c_init: DEFAULT_C_INIT,
            c_hat: DEFAULT_C_HAT,
            alpha_hat: None,
            family: ArbitraryFamily::LowMargin,
            family_params: ArbitraryParams::default(),
            trials: 1000,
            out: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.mode != Mode::Verify && (self.d.is_empty() || self.n.is_empty()) {
            return bad("d and n grids must be nonempty".into());
        }
        if self.d.contains(&0) {
            return bad("dimensions must be positive".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must be nonempty".into());
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        for (name, p) in [("delta", self.delta), ("eps", self.eps)] {
            if !(p > 0.0 && p < 1.0) {
                return bad(format!("{name} = {p} must lie in (0, 1)"));
            }
        }
        if let Some(a) = self.alpha_hat {
            if !(a > 0.0 && a < 1.0) {
                return bad(format!("alpha_hat = {a} must lie in (0, 1)"));
            }
        }
        for (name, c) in [("c_prime", self.c_prime), ("c_init", self.c_init), ("c_hat", self.c_hat)] {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("{name} = {c} must be positive"));
            }
        }
        if self.mode == Mode::Verify && self.trials < 10 {
            return bad("verify mode needs at least 10 trials".into());
        }
        Ok(())
    }
}

/// Outcome of one (cell, seed) pair. `runtime_ms` is the only nondeterministic
/// field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub mode: Mode,
    pub d: usize,
    pub n: usize,
    pub seed: u64,
    pub mistakes: Option<usize>,
    pub coverage: Option<f64>,
    pub runtime_ms: f64,
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub median: f64,
    pub std_err: f64,
}

impl Stats {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            (sorted[mid - 1] + sorted[mid]) / 2.0
        };
        let std_err = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, median, std_err })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub mode: Mode,
    pub d: usize,
    pub n: usize,
    pub runs: usize,
    pub failures: usize,
    pub mistakes: Option<Stats>,
    pub coverage: Option<Stats>,
    pub runtime_ms: Option<Stats>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub a: f64,
    pub b: f64,
    pub r2: f64,
}

/// Fits `M = a + b·ln n` and `M = a' + b'·ln ln n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub ln: LinearFit,
    pub lnln: LinearFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitEntry {
    pub mode: Mode,
    pub d: usize,
    pub fit: ScalingFit,
}

/// One row of the oracle table: an empirical statistic against its bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub name: String,
    pub params: String,
    pub statistic: f64,
    pub bound: f64,
    pub std_err: f64,
    pub trials: usize,
    pub pass: bool,
}

impl OracleRow {
    fn from_tail(name: &str, params: String, t: &TailCheckResult) -> Self {
        Self {
            name: name.into(),
            params,
            statistic: t.empirical_prob,
            bound: t.analytic_bound,
            std_err: t.std_err,
            trials: t.trials,
            pass: t.pass,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub cells: Vec<CellSummary>,
    pub fits: Vec<FitEntry>,
    pub oracles: Vec<OracleRow>,
    pub runs: Vec<RunRecord>,
}

impl Report {
    pub fn failed_runs(&self) -> usize {
        self.runs.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn oracles_pass(&self) -> bool {
        self.oracles.iter().all(|o| o.pass)
    }

    /// Zeroes every timing field so two reports can be compared exactly.
    pub fn without_runtime(&self) -> Self {
        let mut r = self.clone();
        for run in &mut r.runs {
            run.runtime_ms = 0.0;
        }
        for cell in &mut r.cells {
            cell.runtime_ms = None;
        }
        r
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Columns `mode,d,n,seed,mistakes,coverage,runtime_ms`; failed runs leave
    /// the metric columns empty.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "mode,d,n,seed,mistakes,coverage,runtime_ms")?;
        for r in &self.runs {
            let m = r.mistakes.map(|v| v.to_string()).unwrap_or_default();
            let c = r.coverage.map(|v| v.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{},{},{},{:.3}", r.mode.as_str(), r.d, r.n, r.seed, m, c, r.runtime_ms)?;
        }
        Ok(())
    }

    /// Writes `report.json` and `runs.csv` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.to_json()?)?;
        let mut csv = Vec::new();
        self.write_csv(&mut csv)?;
        fs::write(dir.join("runs.csv"), csv)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

fn simple_regression(xs: &[f64], ys: &[f64]) -> LinearFit {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let sst: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    // A constant target is fit perfectly by convention.
    let r2 = if sst <= f64::EPSILON * my.abs().max(1.0) { 1.0 } else { 1.0 - sse / sst };
    LinearFit { a, b, r2 }
}

/// Least-squares fits of mistakes against `ln n` and `ln ln n`. Needs at least
/// three distinct `n`, all at least 2.
pub fn fit_scaling(points: &[(usize, f64)]) -> Result<ScalingFit> {
    let mut ns: Vec<usize> = points.iter().map(|p| p.0).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 3 {
        return Err(Error::DegenerateFit(format!("need 3 distinct n values, got {}", ns.len())));
    }
    if ns[0] < 2 {
        return Err(Error::DegenerateFit("ln ln n needs n ≥ 2".into()));
    }
    if points.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::DegenerateFit("non-finite mistake count".into()));
    }
    let ln: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let lnln: Vec<f64> = ln.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    Ok(ScalingFit {
        ln: simple_regression(&ln, &ys),
        lnln: simple_regression(&lnln, &ys),
    })
}

/// Runs one (cell, seed) pair and returns `(mistakes, coverage)`.
///
/// Data come from stream 0 of the seed, so sphere and baseline runs with the
/// same seed see the same points.
pub fn run_cell(cfg: &ExperimentConfig, mode: Mode, d: usize, n: usize, seed: u64) -> Result<(usize, f64)> {
    let data_rng = RngStream::new(seed, 0);
    match mode {
        Mode::Sphere => {
            let ds = gen_uniform_sphere(n, d, &data_rng)?;
            let schedule = make_schedule(n, d, cfg.delta, cfg.c_prime)?;
            let run = run_sphere(&ds, &schedule, cfg.c_init, &RngStream::new(seed, 1))?;
            Ok((run.transcript.mistakes(), run.transcript.len() as f64 / n as f64))
        }
        Mode::Baseline => {
            let ds = gen_uniform_sphere(n, d, &data_rng)?;
            let t = random_order_run(&ds, None, &RngStream::new(seed, 2))?;
            Ok((t.mistakes(), t.len() as f64 / n as f64))
        }
        Mode::Arbitrary => {
            let ds = gen_arbitrary(cfg.family, n, d, &cfg.family_params, &data_rng)?;
            let params = BoostParams {
                c_hat: cfg.c_hat,
                alpha_hat: cfg.alpha_hat,
            };
            let run = strong_run(&ds, cfg.eps, cfg.delta, &params, &RngStream::new(seed, 3))?;
            Ok((run.mistakes(), run.coverage))
        }
        Mode::Verify => Err(Error::InvalidConfig("verify mode has no learner cells".into())),
    }
}

/// Executes every (cell, seed) pair in parallel. Cell failures are recorded
/// and the run continues.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    if cfg.mode == Mode::Verify {
        let seed = cfg.seeds[0];
        return Ok(Report {
            config: cfg.clone(),
            cells: Vec::new(),
            fits: Vec::new(),
            oracles: verify_grid(cfg.trials, seed)?,
            runs: Vec::new(),
        });
    }

    let jobs: Vec<(usize, usize, u64)> = cfg
        .d
        .iter()
        .flat_map(|&d| cfg.n.iter().flat_map(move |&n| cfg.seeds.iter().map(move |&s| (d, n, s))))
        .collect();
    let runs: Vec<RunRecord> = jobs
        .into_par_iter()
        .map(|(d, n, seed)| {
            let start = Instant::now();
            let outcome = run_cell(cfg, cfg.mode, d, n, seed);
            let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            log::debug!("{} d={d} n={n} seed={seed}: {outcome:?}", cfg.mode.as_str());
            let (mistakes, coverage, error) = match outcome {
                Ok((m, c)) => (Some(m), Some(c), None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            RunRecord {
                mode: cfg.mode,
                d,
                n,
                seed,
                mistakes,
                coverage,
                runtime_ms,
                error,
            }
        })
        .collect();

    let mut cells = Vec::new();
    for &d in &cfg.d {
        for &n in &cfg.n {
            let in_cell: Vec<&RunRecord> = runs.iter().filter(|r| r.d == d && r.n == n).collect();
            let ok: Vec<&RunRecord> = in_cell.iter().copied().filter(|r| r.error.is_none()).collect();
            let pick = |f: &dyn Fn(&RunRecord) -> f64| Stats::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            cells.push(CellSummary {
                mode: cfg.mode,
                d,
                n,
                runs: in_cell.len(),
                failures: in_cell.len() - ok.len(),
                mistakes: pick(&|r| r.mistakes.unwrap_or(0) as f64),
                coverage: pick(&|r| r.coverage.unwrap_or(0.0)),
                runtime_ms: pick(&|r| r.runtime_ms),
            });
        }
    }

    let mut fits = Vec::new();
    for &d in &cfg.d {
        let points: Vec<(usize, f64)> = cells
            .iter()
            .filter(|c| c.d == d)
            .filter_map(|c| c.mistakes.map(|s| (c.n, s.mean)))
            .collect();
        if let Ok(fit) = fit_scaling(&points) {
            fits.push(FitEntry { mode: cfg.mode, d, fit });
        }
    }

    Ok(Report {
        config: cfg.clone(),
        cells,
        fits,
        oracles: Vec::new(),
        runs,
    })
}

/// A mistake triple: a hidden normal `w*`, a hypothesis `w` at angle below
/// π/2 from it, and a unit point `x` on which they disagree.
pub fn sample_mistake_triple<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<(Vector, Hypothesis, Vector)> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let w_star = sample_sphere(d, rng)?;
    let theta = rng.random_range(0.05..FRAC_PI_2);
    let scale = rng.random_range(0.1..10.0);
    let w = Hypothesis::new(unit_at_angle(&w_star, theta, rng)?.scaled(scale))?;
    loop {
        let x = sample_sphere(d, rng)?;
        if w.predict(&x) != crate::geometry::sign_label(w_star.dot(&x)) {
            return Ok((w_star, w, x));
        }
    }
}

/// Outcome of one synthetic large-margin sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LargeMarginSequence {
    pub updates: usize,
    pub bound: f64,
}

/// Feeds margin-perceptron updates on mistakes of margin at least `beta·‖w‖`,
/// starting from correlation exactly `alpha`, until no such mistake exists.
pub fn large_margin_sequence<R: Rng + ?Sized>(d: usize, alpha: f64, beta: f64, rng: &mut R) -> Result<LargeMarginSequence> {
    if d < 3 {
        return Err(Error::InvalidDimension(d));
    }
    let bound = large_margin_update_bound(alpha, beta)?;
    let w_star = sample_sphere(d, rng)?;
    let mut h = Hypothesis::new(unit_at_angle(&w_star, alpha.acos(), rng)?)?;
    let cap = 10 * (bound.ceil() as usize + 1);
    let mut updates = 0;
    while updates < cap {
        let w_hat = h.w().normalized()?;
        let cos = w_hat.dot(&w_star).clamp(-1.0, 1.0);
        let sin = (1.0 - cos * cos).sqrt();
        if sin <= beta {
            break;
        }
        let e = w_star.sub_scaled(cos, &w_hat).normalized()?;
        let g = sample_sphere(d, rng)?;
        let z = g.sub_scaled(g.dot(&w_hat), &w_hat);
        let z = z.sub_scaled(z.dot(&e), &e).normalized()?;
        // In the (ŵ, e) plane a point with ŵ-coordinate m disagrees with w*
        // iff its e-coordinate is below −m·cotθ, which needs m < sinθ.
        let m = rng.random_range(beta..sin);
        let b_max = (1.0 - m * m).sqrt();
        let b_min = m * cos / sin;
        let b = -rng.random_range(b_min..=b_max);
        let rest = (1.0 - m * m - b * b).max(0.0).sqrt();
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let coords: Vec<f64> = (0..d)
            .map(|i| sign * (m * w_hat[i] + b * e[i] + rest * z[i]))
            .collect();
        let x = Vector::new(coords)?.normalized()?;
        h = mp_update(&h, &x)?;
        updates += 1;
    }
    Ok(LargeMarginSequence { updates, bound })
}

/// The oracle table of `verify` mode.
pub fn verify_grid(trials: usize, seed: u64) -> Result<Vec<OracleRow>> {
    let root = RngStream::new(seed, 7);
    let mut rows = Vec::new();

    let mut rng = root.child(0);
    let (mut law, mut mono) = (0usize, 0usize);
    for _ in 0..trials {
        let (w_star, w, x) = sample_mistake_triple(8, &mut rng)?;
        let theta = w.angle_to(&w_star)?;
        let r = w.score(&x).abs() / (w.norm() * theta.sin());
        let after = mp_update(&w, &x)?;
        let (t0, t1) = (w.tan_to(&w_star)?, after.tan_to(&w_star)?);
        if t1 * t1 > decay_bound(theta, r.min(1.0))? + 1e-9 {
            law += 1;
        }
        if t1 > t0 * (1.0 + 1e-12) {
            mono += 1;
        }
    }
    for (name, bad) in [("decay_law", law), ("tan_monotone", mono)] {
        rows.push(OracleRow {
            name: name.into(),
            params: "d=8".into(),
            statistic: bad as f64 / trials as f64,
            bound: 0.0,
            std_err: 0.0,
            trials,
            pass: bad == 0,
        });
    }

    let n = 10_000;
    for (i, theta) in [0.1, FRAC_PI_4, FRAC_PI_2].into_iter().enumerate() {
        let res = mc_disagreement_mass(5, theta, n, trials, &root.child(10 + i as u64))?;
        rows.push(OracleRow {
            name: "disagreement_mean".into(),
            params: format!("d=5 theta={theta:.4} n={n}"),
            statistic: res.mean_count,
            bound: res.expected_mean,
            std_err: res.mean_std_err,
            trials,
            pass: res.mean_ok,
        });
        rows.push(OracleRow::from_tail("disagreement_tail", format!("d=5 theta={theta:.4} n={n}"), &res.tail));
    }

    let tails = [
        (5, 1.0, 4, 0.5, TailCase::Moderate),
        (4, 1.0, 32, 0.5, TailCase::NearMaximal),
    ];
    for (i, (d, theta, m, param, case)) in tails.into_iter().enumerate() {
        let t = mc_max_margin_tail(d, theta, m, param, case, trials, &root.child(20 + i as u64))?;
        rows.push(OracleRow::from_tail(
            "max_margin_tail",
            format!("d={d} theta={theta} m={m} param={param} case={case:?}"),
            &t,
        ));
    }

    for (i, case) in [TailCase::Moderate, TailCase::NearMaximal].into_iter().enumerate() {
        let (d, theta, n, s) = (4, 0.5, 10_000, 4.0);
        let sample_trials = trials.min(400);
        let t = mc_sample_max_margin(d, theta, n, s, case, None, sample_trials, &root.child(30 + i as u64))?;
        rows.push(OracleRow::from_tail(
            "sample_max_margin",
            format!("d={d} theta={theta} n={n} s={s} case={case:?}"),
            &t,
        ));
    }

    let sim = simulate_superlinear(0.125, 1e-6, 1.0, 2.0 / 3.0, 0.1, trials, &root.child(40))?;
    rows.push(OracleRow::from_tail(
        "superlinear_failure",
        format!("rho=0.125 kappa=1e-6 M=1 delta=0.1 T={}", sim.horizon),
        &sim.tail,
    ));
    let traj = superlinear_trajectory(0.5, 0.01, 1.0, 2)?;
    let dev = (traj[1] - 0.1).abs().max((traj[2] - 0.1f64.sqrt() * 0.1).abs());
    rows.push(OracleRow {
        name: "superlinear_recurrence".into(),
        params: "rho=0.5 kappa=0.01 xi0=1".into(),
        statistic: dev,
        bound: 1e-12,
        std_err: 0.0,
        trials: 1,
        pass: dev <= 1e-12,
    });

    let mut rng = root.child(50);
    let mut over = 0;
    let seq_trials = trials.min(1000);
    for _ in 0..seq_trials {
        let s = large_margin_sequence(6, 0.2, 0.3, &mut rng)?;
        if s.updates as f64 > s.bound.ceil() {
            over += 1;
        }
    }
    rows.push(OracleRow {
        name: "large_margin_updates".into(),
        params: format!("d=6 alpha=0.2 beta=0.3 bound={:.0}", large_margin_update_bound(0.2, 0.3)?.ceil()),
        statistic: over as f64 / seq_trials as f64,
        bound: 0.0,
        std_err: 0.0,
        trials: seq_trials,
        pass: over == 0,
    });

    Ok(rows)
}
