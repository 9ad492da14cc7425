//! Self-directed learning on arbitrary point sets.
//!
//! The weak learner moves a dense subspace of the data into approximately
//! radially isotropic position, which guarantees every direction a soft
//! margin on a `1/(4k)` share of the points, and then runs max-margin
//! margin-perceptron sweeps from a random start until one sweep labels that
//! share. The strong learner repeats it on whatever is still unlabeled.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::forster::{default_max_iters, forster_transform, ForsterOutput};
use crate::geometry::{sample_sphere, RngStream, Vector};
use crate::margin_perceptron::{mp_update, Hypothesis};
use crate::protocol::{LabelOracle, Phase, Transcript};

pub const DEFAULT_C_HAT: f64 = 0.3;

/// Number of sweeps of the weak learner in working dimension `k`:
/// `max(2, floor(5k·ln k) + 1)`. Each sweep updates at most once, so this
/// also bounds its mistakes. In one dimension the second sweep starts from a
/// consistent sign, so one mistake is the most it can make.
pub fn sweep_budget(k: usize) -> usize {
    let k = k as f64;
    ((5.0 * k * k.ln()).floor() as usize + 1).max(2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// One sweep labeled at least `|U|/(4k)` points.
    Coverage,
    /// The sweep budget ran out first.
    Budget,
}

/// One update of the weak learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakUpdate {
    pub sweep: usize,
    /// Zero-based position of the offending point in the sweep order.
    pub position: usize,
    /// `|w·x| / ‖w‖` in the working frame.
    pub normalized_margin: f64,
    /// Whether the point had been labeled by an earlier sweep, in which case
    /// the update cost no prediction.
    pub known_label: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeakRunResult {
    /// Every point whose label the run learned, with that label, in the
    /// order the labels became known.
    pub labeled_set: Vec<(usize, i8)>,
    /// Size of `C` in the final sweep.
    pub last_sweep_size: usize,
    pub mistakes: usize,
    pub sweeps: usize,
    pub terminated_by: Termination,
    pub k: usize,
    /// `|U|`, the number of retained points.
    pub retained: usize,
    /// Whether `w⁽⁰⁾·v ≥ 1/(2√k)` for the unit target normal `v` in the
    /// working frame; `None` without a visible ground truth.
    pub initial_correlation_ok: Option<bool>,
    pub updates: Vec<WeakUpdate>,
}

/// Runs the weak learner on the points `active` (global indices into
/// `points`), revealing labels through `oracle`.
///
/// `truth` only feeds the instrumentation fields.
pub fn weak_run(
    points: &[Vector],
    active: &[usize],
    oracle: &mut LabelOracle<'_>,
    rng: &RngStream,
    truth: Option<&Vector>,
) -> Result<WeakRunResult> {
    if active.is_empty() {
        return Err(Error::InvalidSize("weak learner called on an empty set".into()));
    }
    let d = points[active[0]].dim();
    let delta = 1.0 / (2.0 * d as f64);
    let subset: Vec<Vector> = active.iter().map(|&i| points[i].clone()).collect();
    let forster = forster_transform(&subset, delta, default_max_iters(d, delta))?;
    let global: Vec<usize> = forster.retained_indices.iter().map(|&j| active[j]).collect();
    let mut init_rng = rng.child(0);
    let w0 = Hypothesis::new(sample_sphere(forster.k(), &mut init_rng)?)?;
    sweep_loop(&forster, &global, w0, oracle, truth)
}

fn sweep_loop(
    forster: &ForsterOutput,
    global: &[usize],
    w0: Hypothesis,
    oracle: &mut LabelOracle<'_>,
    truth: Option<&Vector>,
) -> Result<WeakRunResult> {
    let u = &forster.transformed_points;
    let k = forster.k();
    let n_u = u.len();
    let target = n_u as f64 / (4.0 * k as f64);

    let initial_correlation_ok = match truth {
        Some(w_star) => {
            let v = forster.pull_back_normal(w_star)?.normalized()?;
            Some(w0.w().dot(&v) >= 1.0 / (2.0 * (k as f64).sqrt()))
        }
        None => None,
    };

    let mut w = w0;
    let mut labeled_set = Vec::new();
    let mut updates = Vec::new();
    let mut mistakes = 0;
    let budget = sweep_budget(k);
    let mut last_sweep_size = 0;
    let mut order: Vec<(usize, f64)> = Vec::with_capacity(n_u);

    for sweep in 0..budget {
        order.clear();
        order.extend((0..n_u).map(|j| (j, w.score(&u[j]).abs())));
        order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));

        let mut c_size = 0usize;
        let mut updated = false;
        for (position, &(j, margin)) in order.iter().enumerate() {
            let x = &u[j];
            let guess = w.predict(x);
            let (label, known) = match oracle.known_label(global[j]) {
                Some(y) => (y, true),
                None => {
                    let y = oracle.predict(global[j], guess, margin, Phase::Weak)?;
                    labeled_set.push((global[j], y));
                    (y, false)
                }
            };
            // Mistakes carry the corrected label, so C gains a point either way.
            c_size += 1;
            if label != guess {
                if !known {
                    mistakes += 1;
                }
                updates.push(WeakUpdate {
                    sweep,
                    position,
                    normalized_margin: margin / w.norm(),
                    known_label: known,
                });
                w = if k == 1 {
                    // On the line the projection annihilates w; flipping is
                    // the only consistent update.
                    Hypothesis::new(w.w().neg())?
                } else {
                    mp_update(&w, x)?
                };
                updated = true;
                break;
            }
        }
        last_sweep_size = c_size;
        if c_size as f64 >= target || !updated {
            return Ok(WeakRunResult {
                labeled_set,
                last_sweep_size,
                mistakes,
                sweeps: sweep + 1,
                terminated_by: Termination::Coverage,
                k,
                retained: n_u,
                initial_correlation_ok,
                updates,
            });
        }
    }
    Ok(WeakRunResult {
        labeled_set,
        last_sweep_size,
        mistakes,
        sweeps: budget,
        terminated_by: Termination::Budget,
        k,
        retained: n_u,
        initial_correlation_ok,
        updates,
    })
}

/// Round and retry counts for boosting the weak learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostBudget {
    pub eps: f64,
    pub delta: f64,
    pub alpha: f64,
    pub c: f64,
    /// `ceil(ln(1/ε)/ln(1/α))`.
    pub runs_outer: usize,
    /// `ceil((1/c)·ln(runs_outer/δ))`.
    pub retries_per_round: usize,
    /// Mistake bound of one weak run in dimension `d`.
    pub per_run_cap: usize,
    pub mistake_cap: usize,
}

pub fn compute_boost_budget(d: usize, eps: f64, delta: f64, c_hat: f64, alpha_hat: f64) -> Result<BoostBudget> {
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let open_unit = |v: f64| v > 0.0 && v < 1.0;
    if !open_unit(eps) || !open_unit(delta) || !open_unit(alpha_hat) || !(c_hat > 0.0 && c_hat <= 1.0) {
        return Err(Error::OutOfRange(format!(
            "need eps, delta, alpha in (0, 1) and c in (0, 1]; got {eps}, {delta}, {alpha_hat}, {c_hat}"
        )));
    }
    let runs_outer = (((1.0 / eps).ln() / (1.0 / alpha_hat).ln()).ceil() as usize).max(1);
    let retries_per_round = (((runs_outer as f64 / delta).ln() / c_hat).ceil() as usize).max(1);
    let per_run_cap = sweep_budget(d);
    Ok(BoostBudget {
        eps,
        delta,
        alpha: alpha_hat,
        c: c_hat,
        runs_outer,
        retries_per_round,
        per_run_cap,
        mistake_cap: retries_per_round * runs_outer * per_run_cap,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostParams {
    pub c_hat: f64,
    /// Residual fraction per successful round; `None` means `1 − 1/(4d)`.
    pub alpha_hat: Option<f64>,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            c_hat: DEFAULT_C_HAT,
            alpha_hat: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub attempt: usize,
    pub remaining_before: usize,
    pub k: Option<usize>,
    pub retained: usize,
    pub labeled: usize,
    pub mistakes: usize,
    pub terminated_by: Option<Termination>,
    /// Set when the attempt failed before predicting anything.
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct StrongRun {
    pub transcript: Transcript,
    pub rounds: Vec<RoundSummary>,
    pub budget: Option<BoostBudget>,
    /// Fraction of points predicted.
    pub coverage: f64,
    /// True when the budget ran out before `1 − ε` coverage.
    pub partial: bool,
}

impl StrongRun {
    pub fn mistakes(&self) -> usize {
        self.transcript.mistakes()
    }
}

/// Boosts the weak learner until at most an `eps` fraction of `ds` is
/// unlabeled. Each round re-runs the whole weak learner, Forster step included,
/// on the remaining points; every revealed point is removed whether or not the
/// attempt succeeded.
pub fn strong_run(ds: &LabeledDataset, eps: f64, delta: f64, params: &BoostParams, rng: &RngStream) -> Result<StrongRun> {
    let n = ds.len();
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::OutOfRange(format!("eps = {eps} must lie in (0, 1]")));
    }
    let mut oracle = LabelOracle::new(ds.labels());
    let allowed_left = (eps * n as f64).floor() as usize;
    if eps >= 1.0 {
        return Ok(StrongRun {
            transcript: oracle.into_transcript(),
            rounds: Vec::new(),
            budget: None,
            coverage: 0.0,
            partial: false,
        });
    }
    let d = ds.dim();
    let alpha = params.alpha_hat.unwrap_or(1.0 - 1.0 / (4.0 * d as f64));
    let budget = compute_boost_budget(d, eps, delta, params.c_hat, alpha)?;
    let points = ds.points();
    let truth = ds.ground_truth();

    let mut remaining: Vec<usize> = (0..n).collect();
    let mut rounds = Vec::new();
    let mut attempt_id = 0u64;
    let mut partial = false;

    'rounds: for round in 0..budget.runs_outer {
        if remaining.len() <= allowed_left {
            break;
        }
        let mut failures = 0;
        loop {
            let before = remaining.len();
            let run = weak_run(points, &remaining, &mut oracle, &rng.child(attempt_id), truth);
            attempt_id += 1;
            let summary = match &run {
                Ok(r) => RoundSummary {
                    round,
                    attempt: failures,
                    remaining_before: before,
                    k: Some(r.k),
                    retained: r.retained,
                    labeled: r.labeled_set.len(),
                    mistakes: r.mistakes,
                    terminated_by: Some(r.terminated_by),
                    error: None,
                },
                Err(e) => {
                    log::debug!("weak learner attempt failed: {e}");
                    RoundSummary {
                        round,
                        attempt: failures,
                        remaining_before: before,
                        k: None,
                        retained: 0,
                        labeled: 0,
                        mistakes: 0,
                        terminated_by: None,
                        error: Some(e.to_string()),
                    }
                }
            };
            rounds.push(summary);
            remaining.retain(|&i| !oracle.is_revealed(i));
            let success = matches!(&run, Ok(r) if r.terminated_by == Termination::Coverage);
            if success {
                break;
            }
            failures += 1;
            if failures >= budget.retries_per_round || remaining.is_empty() {
                partial = remaining.len() > allowed_left;
                break 'rounds;
            }
        }
    }
    if remaining.len() > allowed_left {
        partial = true;
    }
    let transcript = oracle.into_transcript();
    let coverage = transcript.len() as f64 / n as f64;
    Ok(StrongRun {
        transcript,
        rounds,
        budget: Some(budget),
        coverage,
        partial,
    })
}
