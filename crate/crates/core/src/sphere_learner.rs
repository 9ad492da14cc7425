//! The two-arm self-directed learner for points drawn from the sphere.
//!
//! A short reflection-perceptron warm start produces a hypothesis within a
//! constant angle of the target. The remaining points are dealt into `2k`
//! buckets; arm `w` runs one max-margin pass on each of the first `k`, arm `v`
//! on each of the last `k`, and finally each arm labels whatever the other arm
//! left unpredicted.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{split_buckets, LabeledDataset};
use crate::error::{Error, Result};
use crate::geometry::{sample_sphere, RngStream, Vector};
use crate::margin_perceptron::{margin_perceptron_pass, Hypothesis, UpdateRecord};
use crate::protocol::{LabelOracle, Phase, Transcript};

pub const DEFAULT_C_PRIME: f64 = 4.0;
pub const DEFAULT_C_INIT: f64 = 10.0;

/// Update budget and bucket layout for one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereSchedule {
    /// Update budget per arm, after clamping.
    pub t: usize,
    /// Buckets per arm; equal to `t`.
    pub k: usize,
    /// Nominal bucket size `floor(n / 2k)`.
    pub bucket_size: usize,
    /// The budget before clamping to the data size.
    pub t_unclamped: usize,
    pub c_prime: f64,
    pub delta: f64,
}

/// `T = ceil(c'·d·max(ln ln n, 1)·ln(1/δ))`, clamped so that `2T ≤ n/2`.
pub fn make_schedule(n: usize, d: usize, delta: f64, c_prime: f64) -> Result<SphereSchedule> {
    if n < 4 {
        return Err(Error::InvalidSize(format!("the bucket schedule needs n ≥ 4, got {n}")));
    }
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::OutOfRange(format!("delta = {delta} must lie in (0, 1/2]")));
    }
    if !(c_prime > 0.0 && c_prime.is_finite()) {
        return Err(Error::OutOfRange(format!("c_prime = {c_prime} must be positive")));
    }
    let lnln = (n as f64).ln().ln().max(1.0);
    let raw = (c_prime * d as f64 * lnln * (1.0 / delta).ln()).ceil().max(1.0);
    let t_unclamped = raw as usize;
    // Half the data is left for the warm start and slack, so every bucket has
    // at least two points.
    let t = t_unclamped.min(n / 4).max(1);
    Ok(SphereSchedule {
        t,
        k: t,
        bucket_size: n / (2 * t),
        t_unclamped,
        c_prime,
        delta,
    })
}

/// Knobs of the sphere learner that are not part of the bucket schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SphereParams {
    pub delta: f64,
    pub c_prime: f64,
    pub c_init: f64,
}

impl Default for SphereParams {
    fn default() -> Self {
        Self {
            delta: 0.1,
            c_prime: DEFAULT_C_PRIME,
            c_init: DEFAULT_C_INIT,
        }
    }
}

/// Size of the warm-start prefix: `ceil(min(n/4, 50·d·ln(1/δ)))`, at least 1.
pub fn init_prefix_len(n: usize, d: usize, delta: f64) -> usize {
    let cap = 50.0 * d as f64 * (1.0 / delta).ln();
    ((n as f64 / 4.0).min(cap).ceil() as usize).clamp(1, n.max(1))
}

/// Mistake budget of the warm start: `ceil(c_init·d·ln(1/δ))`, at least 1.
pub fn init_mistake_budget(d: usize, delta: f64, c_init: f64) -> usize {
    ((c_init * d as f64 * (1.0 / delta).ln()).ceil() as usize).max(1)
}

/// Outcome of the warm start.
#[derive(Clone, Debug)]
pub struct InitOutcome {
    pub hypothesis: Hypothesis,
    pub mistakes: usize,
    /// Prefix indices that were predicted; the rest stay unlabeled.
    pub predicted: Vec<usize>,
}

/// Reflection perceptron `w ← w − 2(w·x)x` over `prefix` in the given order,
/// starting from `w0`, until `budget` mistakes have been made.
pub fn initialize_hypothesis(
    points: &[Vector],
    prefix: &[usize],
    w0: Hypothesis,
    budget: usize,
    oracle: &mut LabelOracle<'_>,
) -> Result<InitOutcome> {
    if prefix.is_empty() {
        return Err(Error::InvalidSize("initialization prefix is empty".into()));
    }
    let mut h = w0;
    let mut mistakes = 0;
    let mut predicted = Vec::new();
    for &i in prefix {
        if mistakes >= budget {
            break;
        }
        let x = &points[i];
        let s = h.score(x);
        let guess = h.predict(x);
        let label = oracle.predict(i, guess, s.abs(), Phase::Init)?;
        predicted.push(i);
        if label != guess {
            mistakes += 1;
            // Reflection keeps the norm fixed.
            h = Hypothesis::new(h.w().sub_scaled(2.0 * s, x))?;
        }
    }
    Ok(InitOutcome {
        hypothesis: h,
        mistakes,
        predicted,
    })
}

/// Full record of one run of the sphere learner.
#[derive(Clone, Debug)]
pub struct SphereRun {
    pub transcript: Transcript,
    pub schedule: SphereSchedule,
    pub init: Hypothesis,
    pub w: Hypothesis,
    pub v: Hypothesis,
    pub updates_w: Vec<UpdateRecord>,
    pub updates_v: Vec<UpdateRecord>,
    /// The `2k` buckets as dataset indices: the first `k` train `w`, the rest
    /// train `v`. Empty after a fallback.
    pub buckets: Vec<Vec<usize>>,
    /// True when the remainder was too small for `2k` buckets.
    pub fallback: bool,
}

impl SphereRun {
    pub fn mistakes(&self) -> usize {
        self.transcript.mistakes()
    }
}

/// Runs the learner on `ds`. Labels are read only through the prediction
/// oracle; the hidden normal, when present, feeds update diagnostics only.
pub fn run_sphere(ds: &LabeledDataset, schedule: &SphereSchedule, c_init: f64, rng: &RngStream) -> Result<SphereRun> {
    let n = ds.len();
    if n < 4 {
        return Err(Error::InvalidSize(format!("run_sphere needs n ≥ 4, got {n}")));
    }
    let d = ds.dim();
    let points = ds.points();
    let truth = ds.ground_truth();
    let mut oracle = LabelOracle::new(ds.labels());

    let mut order_rng = rng.child(0);
    let mut init_rng = rng.child(1);
    let mut bucket_rng = rng.child(2);

    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut order_rng);
    let prefix_len = init_prefix_len(n, d, schedule.delta);
    let w0 = Hypothesis::new(sample_sphere(d, &mut init_rng)?)?;
    let budget = init_mistake_budget(d, schedule.delta, c_init);
    let init = initialize_hypothesis(points, &perm[..prefix_len], w0, budget, &mut oracle)?;

    let remainder: Vec<usize> = perm.into_iter().filter(|&i| !oracle.is_revealed(i)).collect();
    let k = schedule.k;

    if remainder.len() < 2 * k {
        let (w, updates) = max_margin_fallback(points, remainder, init.hypothesis.clone(), &mut oracle, truth)?;
        return Ok(SphereRun {
            transcript: oracle.into_transcript(),
            schedule: schedule.clone(),
            init: init.hypothesis.clone(),
            v: w.clone(),
            w,
            updates_w: updates,
            updates_v: Vec::new(),
            buckets: Vec::new(),
            fallback: true,
        });
    }

    let buckets = split_buckets(remainder.len(), 2 * k, &mut bucket_rng)?.buckets;
    let buckets: Vec<Vec<usize>> = buckets
        .into_iter()
        .map(|b| b.into_iter().map(|j| remainder[j]).collect())
        .collect();

    let mut w = init.hypothesis.clone();
    let mut v = init.hypothesis.clone();
    let mut updates_w = Vec::new();
    let mut updates_v = Vec::new();
    for t in 0..k {
        let out = margin_perceptron_pass(points, &buckets[t], &w, &mut oracle, Phase::TrainW, truth)?;
        w = out.hypothesis;
        updates_w.extend(out.update);
        let out = margin_perceptron_pass(points, &buckets[k + t], &v, &mut oracle, Phase::TrainV, truth)?;
        v = out.hypothesis;
        updates_v.extend(out.update);
    }

    // Each arm labels only the buckets the other arm trained on.
    for t in 0..k {
        cross_label(points, &buckets[k + t], &w, &mut oracle)?;
        cross_label(points, &buckets[t], &v, &mut oracle)?;
    }

    Ok(SphereRun {
        transcript: oracle.into_transcript(),
        schedule: schedule.clone(),
        init: init.hypothesis,
        w,
        v,
        updates_w,
        updates_v,
        buckets,
        fallback: false,
    })
}

fn cross_label(points: &[Vector], bucket: &[usize], h: &Hypothesis, oracle: &mut LabelOracle<'_>) -> Result<()> {
    for &i in bucket {
        if !oracle.is_revealed(i) {
            let s = h.score(&points[i]);
            oracle.predict(i, h.predict(&points[i]), s.abs(), Phase::CrossLabel)?;
        }
    }
    Ok(())
}

/// Single-arm max-margin learner: repeated passes over the shrinking set,
/// re-sorting after every update.
fn max_margin_fallback(
    points: &[Vector],
    mut rest: Vec<usize>,
    mut h: Hypothesis,
    oracle: &mut LabelOracle<'_>,
    truth: Option<&Vector>,
) -> Result<(Hypothesis, Vec<UpdateRecord>)> {
    let mut updates = Vec::new();
    while !rest.is_empty() {
        let out = margin_perceptron_pass(points, &rest, &h, oracle, Phase::Fallback, truth)?;
        h = out.hypothesis;
        match out.update {
            Some(u) => updates.push(u),
            None => break,
        }
        rest.retain(|&i| !oracle.is_revealed(i));
    }
    Ok((h, updates))
}
