//! Learners that do not choose their examples: a uniformly random order and a
//! greedy worst-case order.

use std::cmp::Ordering;

use rand::seq::SliceRandom;

use crate::dataset::LabeledDataset;
use crate::error::Result;
use crate::geometry::{RngStream, Vector};
use crate::margin_perceptron::{mp_update, Hypothesis};
use crate::protocol::{LabelOracle, Phase, Transcript};

/// An online learner that sees points in an order it does not control.
pub trait OnlineLearner {
    fn hypothesis(&self) -> Option<&Hypothesis>;

    fn predict(&self, x: &Vector) -> i8 {
        self.hypothesis().map_or(1, |h| h.predict(x))
    }

    /// Feeds the revealed label; returns whether the hypothesis changed.
    fn observe(&mut self, x: &Vector, label: i8) -> Result<bool>;
}

/// Margin perceptron that updates on every mistake. Without a starting
/// hypothesis it predicts `+1` until its first mistake, then starts from
/// `y·x`.
#[derive(Clone, Debug, Default)]
pub struct MarginPerceptronLearner {
    h: Option<Hypothesis>,
}

impl MarginPerceptronLearner {
    pub fn new(initial: Option<Hypothesis>) -> Self {
        Self { h: initial }
    }
}

impl OnlineLearner for MarginPerceptronLearner {
    fn hypothesis(&self) -> Option<&Hypothesis> {
        self.h.as_ref()
    }

    fn observe(&mut self, x: &Vector, label: i8) -> Result<bool> {
        if self.predict(x) == label {
            return Ok(false);
        }
        self.h = Some(match &self.h {
            Some(h) => mp_update(h, x)?,
            None => Hypothesis::new(x.scaled(label as f64))?,
        });
        Ok(true)
    }
}

fn margin_of(learner: &impl OnlineLearner, x: &Vector) -> f64 {
    learner.hypothesis().map_or(0.0, |h| h.score(x).abs())
}

/// Presents the points in a uniformly random order to a margin perceptron.
pub fn random_order_run(ds: &LabeledDataset, initial: Option<Hypothesis>, rng: &RngStream) -> Result<Transcript> {
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut rng.child(0));
    let mut learner = MarginPerceptronLearner::new(initial);
    let mut oracle = LabelOracle::new(ds.labels());
    for i in order {
        let x = &ds.points()[i];
        let label = oracle.predict(i, learner.predict(x), margin_of(&learner, x), Phase::RandomOrder)?;
        learner.observe(x, label)?;
    }
    Ok(oracle.into_transcript())
}

/// Always feeds the unpredicted point of smallest `|w·x|` (ties by index).
/// The order is recomputed only after the hypothesis changes.
pub fn greedy_adversarial_order<L: OnlineLearner>(ds: &LabeledDataset, learner: &mut L) -> Result<Transcript> {
    let points = ds.points();
    let mut oracle = LabelOracle::new(ds.labels());
    let mut rest: Vec<usize> = (0..ds.len()).collect();
    while !rest.is_empty() {
        let mut keyed: Vec<(usize, f64)> = rest.iter().map(|&i| (i, margin_of(learner, &points[i]))).collect();
        keyed.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
        let mut consumed = 0;
        for &(i, margin) in &keyed {
            let x = &points[i];
            let label = oracle.predict(i, learner.predict(x), margin, Phase::AdversarialOrder)?;
            consumed += 1;
            if learner.observe(x, label)? {
                break;
            }
        }
        rest = keyed[consumed..].iter().map(|&(i, _)| i).collect();
    }
    Ok(oracle.into_transcript())
}
