//! Monte-Carlo checks of the probabilistic facts behind the sphere learner.
//!
//! These only use sampling and angle primitives, never learner code, so they
//! stay an independent cross-check.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{in_disagreement, sample_sphere, unit_at_angle, RngStream, Vector};

/// Empirical tail frequency against an analytic bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCheckResult {
    pub empirical_prob: f64,
    pub analytic_bound: f64,
    pub trials: usize,
    pub std_err: f64,
    pub pass: bool,
}

impl TailCheckResult {
    pub fn from_counts(failures: usize, trials: usize, analytic_bound: f64) -> Self {
        let p = failures as f64 / trials as f64;
        let std_err = (p * (1.0 - p) / trials as f64).sqrt();
        Self {
            empirical_prob: p,
            analytic_bound,
            trials,
            std_err,
            pass: p <= analytic_bound + 3.0 * std_err,
        }
    }

    /// Bounds of at least 1 say nothing.
    pub fn is_vacuous(&self) -> bool {
        self.analytic_bound >= 1.0
    }
}

fn check_trials(trials: usize, min: usize) -> Result<()> {
    if trials < min {
        return Err(Error::InvalidInput(format!("need at least {min} trials, got {trials}")));
    }
    Ok(())
}

/// A pair of unit vectors at angle `theta`.
fn pair_at_angle(d: usize, theta: f64, rng: &mut RngStream) -> Result<(Vector, Vector)> {
    let u = sample_sphere(d, rng)?;
    let v = unit_at_angle(&u, theta, rng)?;
    Ok((u, v))
}

/// Runs `trials` independent trials in parallel, each on its own child stream.
fn par_trials<T: Send>(rng: &RngStream, trials: usize, f: impl Fn(&mut RngStream) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..trials)
        .into_par_iter()
        .map(|t| f(&mut rng.child(t as u64)))
        .collect()
}

/// Mean and tail of the number of sphere samples in a disagreement region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisagreementMassResult {
    pub mean_count: f64,
    pub expected_mean: f64,
    pub mean_std_err: f64,
    /// `|mean − nθ/π| ≤ 3·std_err`.
    pub mean_ok: bool,
    /// Frequency of counts above `nθ/π + √(2(θ/π)·n·ln 100)`, against 1%.
    pub tail: TailCheckResult,
}

pub fn mc_disagreement_mass(d: usize, theta: f64, n: usize, trials: usize, rng: &RngStream) -> Result<DisagreementMassResult> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::OutOfRange(format!("theta = {theta} must lie in (0, π)")));
    }
    check_trials(trials, 100)?;
    let p = theta / PI;
    let expected = n as f64 * p;
    let threshold = expected + (2.0 * p * n as f64 * 100f64.ln()).sqrt();
    let counts = par_trials(rng, trials, |r| {
        let (u, v) = pair_at_angle(d, theta, r)?;
        let mut c = 0usize;
        for _ in 0..n {
            if in_disagreement(&sample_sphere(d, r)?, &u, &v) {
                c += 1;
            }
        }
        Ok(c as f64)
    })?;
    let mean = counts.iter().sum::<f64>() / trials as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (trials as f64 - 1.0);
    let se = (var / trials as f64).sqrt();
    let exceed = counts.iter().filter(|&&c| c > threshold).count();
    Ok(DisagreementMassResult {
        mean_count: mean,
        expected_mean: expected,
        mean_std_err: se,
        mean_ok: (mean - expected).abs() <= 3.0 * se,
        tail: TailCheckResult::from_counts(exceed, trials, 0.01),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailCase {
    /// Threshold `α·sin(θ/2)`, reachable with many samples at moderate margin.
    Moderate,
    /// Threshold `(1−β)·sinθ`, close to the largest possible margin.
    NearMaximal,
}

impl TailCase {
    pub fn from_index(case: u8) -> Result<Self> {
        match case {
            1 => Ok(Self::Moderate),
            2 => Ok(Self::NearMaximal),
            other => Err(Error::InvalidInput(format!("case must be 1 or 2, got {other}"))),
        }
    }
}

/// Rejection sampling below this acceptance rate is refused.
const MIN_ACCEPTANCE_THETA: f64 = 1e-4;

/// Tail of `max |u·x|` over `m` samples drawn from the sphere conditioned on
/// the disagreement region of `u` and `v`, at angle `theta`.
///
/// `param` is `α` for [`TailCase::Moderate`] and `β` for
/// [`TailCase::NearMaximal`].
pub fn mc_max_margin_tail(
    d: usize,
    theta: f64,
    m: usize,
    param: f64,
    case: TailCase,
    trials: usize,
    rng: &RngStream,
) -> Result<TailCheckResult> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if m == 0 {
        return Err(Error::InvalidSize("m must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&param) {
        return Err(Error::OutOfRange(format!("parameter {param} must lie in [0, 1]")));
    }
    if !(theta > 0.0 && theta <= PI) {
        return Err(Error::OutOfRange(format!("theta = {theta} must lie in (0, π]")));
    }
    if theta < MIN_ACCEPTANCE_THETA {
        return Err(Error::InfeasibleParameters(format!(
            "rejection acceptance θ/π = {:.2e} is too small",
            theta / PI
        )));
    }
    check_trials(trials, 1)?;
    let half_d = d as f64 / 2.0;
    let (threshold, bound) = match case {
        TailCase::Moderate => (
            param * (theta / 2.0).sin(),
            (-(m as f64) * (1.0 - param * param).powf(half_d - 1.0) / 2.0).exp(),
        ),
        TailCase::NearMaximal => (
            (1.0 - param) * theta.sin(),
            (-(m as f64) * (param / 2.0).powf(half_d) / 2.0).exp(),
        ),
    };
    let misses = par_trials(rng, trials, |r| {
        let (u, v) = pair_at_angle(d, theta, r)?;
        let mut best = 0.0f64;
        let mut got = 0;
        while got < m {
            let x = sample_sphere(d, r)?;
            if in_disagreement(&x, &u, &v) {
                best = best.max(u.dot(&x).abs());
                got += 1;
            }
        }
        Ok(best <= threshold)
    })?;
    let fails = misses.into_iter().filter(|&b| b).count();
    Ok(TailCheckResult::from_counts(fails, trials, bound))
}

/// Threshold and the `c` used for the unconditioned sample-max check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMaxSetup {
    pub threshold: f64,
    pub c: Option<f64>,
    pub bound: f64,
}

/// Smallest admissible `c` for the moderate case: `max(2, 4·ln(nθ/(4πs))/d)`.
pub fn smallest_admissible_c(d: usize, theta: f64, n: usize, s: f64) -> f64 {
    let ratio = n as f64 * theta / (4.0 * PI * s);
    (4.0 * ratio.ln() / d as f64).max(2.0)
}

/// Validates the parameter regime and returns the threshold and the
/// `2e^{−s/2}` bound.
pub fn sample_max_setup(d: usize, theta: f64, n: usize, s: f64, case: TailCase, c: Option<f64>) -> Result<SampleMaxSetup> {
    if !(s >= 1.0) || n == 0 {
        return Err(Error::RegimeViolation(format!("need n ≥ 1 and s ≥ 1 (n = {n}, s = {s})")));
    }
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::OutOfRange(format!("theta = {theta} must lie in (0, π)")));
    }
    let q = 4.0 * PI * s / (n as f64 * theta);
    if q > 1.0 {
        return Err(Error::RegimeViolation(format!("4πs/(nθ) = {q:.4} exceeds 1")));
    }
    let bound = 2.0 * (-s / 2.0).exp();
    match case {
        TailCase::Moderate => {
            let c = c.unwrap_or_else(|| smallest_admissible_c(d, theta, n, s));
            if c < 2.0 {
                return Err(Error::RegimeViolation(format!("c = {c} is below 2")));
            }
            let floor = (-(d as f64) * c / 4.0).exp();
            // Relative slack for the boundary case of the smallest admissible c.
            if floor > q * (1.0 + 1e-12) {
                return Err(Error::RegimeViolation(format!(
                    "e^(-dc/4) = {floor:.4e} exceeds 4πs/(nθ) = {q:.4e}"
                )));
            }
            let threshold = ((1.0 / q).ln() / (2.0 * c * d as f64)).sqrt() * theta.sin();
            Ok(SampleMaxSetup {
                threshold,
                c: Some(c),
                bound,
            })
        }
        TailCase::NearMaximal => Ok(SampleMaxSetup {
            threshold: (1.0 - q.powf(2.0 / d as f64)) * theta.sin(),
            c: None,
            bound,
        }),
    }
}

/// Tail of `max |u·x|·1{x ∈ C}` over `n` plain sphere samples, against
/// `2e^{−s/2}`.
pub fn mc_sample_max_margin(
    d: usize,
    theta: f64,
    n: usize,
    s: f64,
    case: TailCase,
    c: Option<f64>,
    trials: usize,
    rng: &RngStream,
) -> Result<TailCheckResult> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    check_trials(trials, 1)?;
    let setup = sample_max_setup(d, theta, n, s, case, c)?;
    let misses = par_trials(rng, trials, |r| {
        let (u, v) = pair_at_angle(d, theta, r)?;
        let mut best = 0.0f64;
        for _ in 0..n {
            let x = sample_sphere(d, r)?;
            if in_disagreement(&x, &u, &v) {
                best = best.max(u.dot(&x).abs());
            }
        }
        Ok(best <= setup.threshold)
    })?;
    let fails = misses.into_iter().filter(|&b| b).count();
    Ok(TailCheckResult::from_counts(fails, trials, setup.bound))
}

/// Number of steps after which the decay process is below `e²κ` with
/// probability `1 − δ`:
/// `ceil(1.5·((1/ρ)·max(ln ln(1/κ), ln ln(M+1)) + ln(e/δ)))`.
pub fn superlinear_horizon(rho: f64, kappa: f64, m: f64, delta: f64) -> Result<usize> {
    check_decay_params(rho, kappa)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::OutOfRange(format!("delta = {delta} must lie in (0, 1)")));
    }
    let lnln = (1.0 / kappa).ln().ln().max((m + 1.0).ln().ln());
    let t = 1.5 * (lnln / rho + (std::f64::consts::E / delta).ln());
    Ok(t.ceil().max(0.0) as usize)
}

fn check_decay_params(rho: f64, kappa: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) || !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::OutOfRange(format!("rho = {rho} and kappa = {kappa} must lie in (0, 1)")));
    }
    Ok(())
}

#[inline]
fn decay_step(xi: f64, rho: f64, kappa: f64) -> f64 {
    xi.min(xi.powf(1.0 - rho) * kappa.powf(rho))
}

/// The process when every step decays: `ξ_{t+1} = min(ξ_t, ξ_t^{1−ρ}κ^ρ)`.
/// Returns `ξ_0, …, ξ_steps`.
pub fn superlinear_trajectory(rho: f64, kappa: f64, xi0: f64, steps: usize) -> Result<Vec<f64>> {
    check_decay_params(rho, kappa)?;
    let mut out = Vec::with_capacity(steps + 1);
    let mut xi = xi0;
    out.push(xi);
    for _ in 0..steps {
        xi = decay_step(xi, rho, kappa);
        out.push(xi);
    }
    Ok(out)
}

/// Result of [`simulate_superlinear`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperlinearResult {
    pub horizon: usize,
    /// Failure frequency `Pr[ξ_T > e²κ]` against `δ`.
    pub tail: TailCheckResult,
}

/// Slowest process allowed by the decay hypotheses: start at `M`, decay with
/// probability `p_decay`, otherwise stay put.
pub fn simulate_superlinear(
    rho: f64,
    kappa: f64,
    m: f64,
    p_decay: f64,
    delta: f64,
    trials: usize,
    rng: &RngStream,
) -> Result<SuperlinearResult> {
    if !(p_decay >= 2.0 / 3.0 && p_decay <= 1.0) {
        return Err(Error::OutOfRange(format!("p_decay = {p_decay} must lie in [2/3, 1]")));
    }
    if !(m >= 0.0) {
        return Err(Error::OutOfRange(format!("M = {m} must be nonnegative")));
    }
    check_trials(trials, 1)?;
    let horizon = superlinear_horizon(rho, kappa, m, delta)?;
    let target = std::f64::consts::E.powi(2) * kappa;
    let fails = par_trials(rng, trials, |r| {
        let mut xi = m;
        for _ in 0..horizon {
            if r.random::<f64>() < p_decay {
                xi = decay_step(xi, rho, kappa);
            }
        }
        Ok(xi > target)
    })?
    .into_iter()
    .filter(|&b| b)
    .count();
    Ok(SuperlinearResult {
        horizon,
        tail: TailCheckResult::from_counts(fails, trials, delta),
    })
}
