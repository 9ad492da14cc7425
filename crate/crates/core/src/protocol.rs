//! The prediction protocol: a learner picks a point, commits to a label, and
//! only then sees the truth. [`LabelOracle`] enforces that order and keeps the
//! [`Transcript`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Init,
    TrainW,
    TrainV,
    CrossLabel,
    Fallback,
    Weak,
    RandomOrder,
    AdversarialOrder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub index: usize,
    pub prediction: i8,
    pub truth: i8,
    /// `|w·x|` of the hypothesis that made the prediction.
    pub margin: f64,
    pub phase: Phase,
}

impl PredictionRecord {
    pub fn is_mistake(&self) -> bool {
        self.prediction != self.truth
    }
}

/// Ordered log of predictions. Mistake counts are always derived from the
/// records.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub records: Vec<PredictionRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptSummary {
    pub predictions: usize,
    pub mistakes: usize,
}

impl Transcript {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn mistakes(&self) -> usize {
        self.records.iter().filter(|r| r.is_mistake()).count()
    }

    pub fn mistakes_in(&self, phase: Phase) -> usize {
        self.records
            .iter()
            .filter(|r| r.phase == phase && r.is_mistake())
            .count()
    }

    pub fn summary(&self) -> TranscriptSummary {
        TranscriptSummary {
            predictions: self.len(),
            mistakes: self.mistakes(),
        }
    }

    /// True when every index in `0..n` was predicted exactly once.
    pub fn covers_exactly_once(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        for r in &self.records {
            if r.index >= n || seen[r.index] {
                return false;
            }
            seen[r.index] = true;
        }
        seen.into_iter().all(|s| s)
    }
}

/// Hands out each label only in exchange for a prediction on that index, and
/// at most once per index.
#[derive(Debug)]
pub struct LabelOracle<'a> {
    labels: &'a [i8],
    revealed: Vec<bool>,
    transcript: Transcript,
}

impl<'a> LabelOracle<'a> {
    pub fn new(labels: &'a [i8]) -> Self {
        Self {
            labels,
            revealed: vec![false; labels.len()],
            transcript: Transcript::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Records the prediction and returns the revealed truth.
    pub fn predict(&mut self, index: usize, prediction: i8, margin: f64, phase: Phase) -> Result<i8> {
        if index >= self.labels.len() {
            return Err(Error::InvalidInput(format!(
                "index {index} out of range for {} points",
                self.labels.len()
            )));
        }
        if self.revealed[index] {
            return Err(Error::AlreadyPredicted(index));
        }
        self.revealed[index] = true;
        let truth = self.labels[index];
        self.transcript.records.push(PredictionRecord {
            index,
            prediction,
            truth,
            margin,
            phase,
        });
        Ok(truth)
    }

    pub fn is_revealed(&self, index: usize) -> bool {
        self.revealed[index]
    }

    /// The label of an already-predicted index; `None` until it is predicted.
    pub fn known_label(&self, index: usize) -> Option<i8> {
        self.revealed[index].then(|| self.labels[index])
    }

    pub fn revealed_count(&self) -> usize {
        self.transcript.len()
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }
}
