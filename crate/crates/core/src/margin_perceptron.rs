//! The margin-perceptron update `w ← w − (w·x)x`, its angular decay law, and
//! the single-bucket max-margin pass.

use std::cmp::Ordering;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle, sign_label, tan_theta, Vector};
use crate::protocol::{LabelOracle, Phase};

/// Norms below this are treated as an annihilated hypothesis.
pub const DEGENERACY_THRESHOLD: f64 = 1e-300;

/// A nonzero weight vector with its cached Euclidean norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    w: Vector,
    norm: f64,
}

impl Hypothesis {
    pub fn new(w: Vector) -> Result<Self> {
        let norm = w.norm();
        if !(norm >= DEGENERACY_THRESHOLD) {
            return Err(Error::DegenerateHypothesis {
                norm,
                threshold: DEGENERACY_THRESHOLD,
            });
        }
        Ok(Self { w, norm })
    }

    pub fn w(&self) -> &Vector {
        &self.w
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dim(&self) -> usize {
        self.w.dim()
    }

    pub fn into_vector(self) -> Vector {
        self.w
    }

    #[inline]
    pub fn score(&self, x: &Vector) -> f64 {
        self.w.dot(x)
    }

    /// `sign(w·x)` with ties going to `+1`.
    #[inline]
    pub fn predict(&self, x: &Vector) -> i8 {
        sign_label(self.score(x))
    }

    /// Angle to a reference direction, typically the hidden normal.
    pub fn angle_to(&self, other: &Vector) -> Result<f64> {
        angle(&self.w, other)
    }

    pub fn tan_to(&self, other: &Vector) -> Result<f64> {
        tan_theta(&self.w, other)
    }
}

/// One margin-perceptron update. The caller decides that `x` was a mistake.
pub fn mp_update(h: &Hypothesis, x: &Vector) -> Result<Hypothesis> {
    let s = h.score(x);
    Hypothesis::new(h.w.sub_scaled(s, x))
}

/// Upper bound `(1 − r²)·tan²θ` on the squared tangent after an update whose
/// margin is at least `r·sinθ·‖w‖`.
pub fn decay_bound(theta: f64, r: f64) -> Result<f64> {
    if !(0.0..FRAC_PI_2).contains(&theta) {
        return Err(Error::OutOfRange(format!("theta = {theta} must lie in [0, π/2)")));
    }
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::OutOfRange(format!("r = {r} must lie in [0, 1]")));
    }
    let t = theta.tan();
    Ok((1.0 - r * r) * t * t)
}

/// Number of updates after which a hypothesis that starts with correlation at
/// least `alpha` and gains margin `beta·‖w‖` on every mistake must be aligned:
/// `(2/β²)·ln(1/α)`.
pub fn large_margin_update_bound(alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) || !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::OutOfRange(format!(
            "alpha = {alpha} and beta = {beta} must both lie in (0, 1]"
        )));
    }
    Ok(2.0 / (beta * beta) * (1.0 / alpha).ln())
}

/// Diagnostics for one update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub point_index: usize,
    /// `|w·x|` before the update.
    pub margin: f64,
    /// `margin / (‖w‖·sinθ)`, when the hidden normal is visible.
    pub r: Option<f64>,
    pub tan_before: Option<f64>,
    pub tan_after: Option<f64>,
}

impl UpdateRecord {
    pub fn new(point_index: usize, before: &Hypothesis, after: &Hypothesis, x: &Vector, truth: Option<&Vector>) -> Self {
        let margin = before.score(x).abs();
        let (r, tan_before, tan_after) = match truth {
            Some(w_star) => {
                let r = before
                    .angle_to(w_star)
                    .ok()
                    .map(|th| margin / (before.norm() * th.sin()));
                (r, before.tan_to(w_star).ok(), after.tan_to(w_star).ok())
            }
            None => (None, None, None),
        };
        Self {
            point_index,
            margin,
            r,
            tan_before,
            tan_after,
        }
    }
}

/// Result of one pass over a bucket.
#[derive(Clone, Debug)]
pub struct PassOutcome {
    pub hypothesis: Hypothesis,
    /// Indices predicted during the pass, in prediction order.
    pub predicted: Vec<usize>,
    pub update: Option<UpdateRecord>,
}

/// Orders `indices` by decreasing `|w·x|`, breaking ties by lower index.
pub fn order_by_margin(h: &Hypothesis, points: &[Vector], indices: &[usize]) -> Vec<(usize, f64)> {
    let mut keyed: Vec<(usize, f64)> = indices.iter().map(|&i| (i, h.score(&points[i]).abs())).collect();
    keyed.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    keyed
}

/// Predicts the bucket `indices` in decreasing-margin order and stops at the
/// first mistake, which triggers exactly one update.
///
/// `truth` is only used for the update diagnostics, never for predictions.
pub fn margin_perceptron_pass(
    points: &[Vector],
    indices: &[usize],
    h: &Hypothesis,
    oracle: &mut LabelOracle<'_>,
    phase: Phase,
    truth: Option<&Vector>,
) -> Result<PassOutcome> {
    if indices.is_empty() {
        return Err(Error::InvalidSize("margin-perceptron pass over an empty bucket".into()));
    }
    let mut predicted = Vec::new();
    for (i, margin) in order_by_margin(h, points, indices) {
        let x = &points[i];
        let guess = h.predict(x);
        let label = oracle.predict(i, guess, margin, phase)?;
        predicted.push(i);
        if label != guess {
            let next = mp_update(h, x)?;
            let update = UpdateRecord::new(i, h, &next, x, truth);
            return Ok(PassOutcome {
                hypothesis: next,
                predicted,
                update: Some(update),
            });
        }
    }
    Ok(PassOutcome {
        hypothesis: h.clone(),
        predicted,
        update: None,
    })
}
