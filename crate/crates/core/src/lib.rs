//! Open-set cross-network node classification.
//!
//! A labeled source network and an unlabeled target network share `K` known
//! classes; the target additionally contains private classes that are folded
//! into a single `K+1`-th "unknown" class. The pipeline trains a graph
//! attention encoder, a `K+1`-way neighborhood-aggregation classifier and a
//! domain discriminator in two stages:
//!
//! 1. **separation**: the encoder and classifier play an adversarial game on
//!    the unknown-class probability of target nodes, carving a rough
//!    known/unknown boundary;
//! 2. **adaptation**: target nodes receive pseudo-labels where k-means
//!    clusters and classifier predictions agree, and a per-node signed
//!    gradient-reversal coefficient aligns known-class nodes with the source
//!    while pushing pseudo-unknown nodes away from it.
//!
//! Modules:
//! - [`graph`]: attributed graphs, dataset IO, label spaces, homophily and a
//!   stochastic block model generator,
//! - [`diff`]: a small dense reverse-mode tape, gradient reversal, Adam and a
//!   finite-difference gradient checker,
//! - [`model`]: encoder, classifier, discriminator and the four losses,
//! - [`pseudo`]: centroid initialization, k-means, agreement pseudo-labels and
//!   signed coefficients,
//! - [`trainer`]: the separate-adapt training loop and checkpoints,
//! - [`eval`]: open-set metrics, reports and embedding export,
//! - [`cli`]: the batch command-line front end.

pub mod cli;
pub mod diff;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod pseudo;
pub mod trainer;

pub use error::{Error, Result};
