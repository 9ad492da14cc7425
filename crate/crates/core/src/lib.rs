//! Self-directed learning of homogeneous halfspaces.
//!
//! The crate contains two learners that pick the order in which they predict:
//! a two-arm max-margin margin-perceptron for points on the unit sphere, and a
//! boosted weak learner for arbitrary point sets that first places the data in
//! approximately radially isotropic position. Random-order and greedy
//! worst-order baselines, Monte-Carlo checks of the probabilistic facts the
//! learners rely on, and an experiment harness complete the picture.

pub mod arbitrary_learner;
pub mod baselines;
pub mod dataset;
pub mod error;
pub mod forster;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod margin_perceptron;
pub mod oracles;
pub mod protocol;
pub mod sphere_learner;

pub use error::{Error, Result};
pub use geometry::{RngStream, Vector};
