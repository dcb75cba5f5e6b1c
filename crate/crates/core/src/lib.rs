//! Wavefront-parallel global alignment, anchor-based genome comparison and
//! scatter-gather database search over a simulated cluster.
//!
//! Alignment scores are generic over the signed integer type (see
//! [`align::Score`]); the aliases below fix the common `i32` and `i64`
//! instantiations.

pub mod align;
pub mod chaining;
pub mod cli;
pub mod dbsearch;
pub mod dotplot;
pub mod harness;
pub mod memfind;
pub mod seqio;
pub mod synth;
pub mod wavefront;

pub use seqio::{Alphabet, AlphabetKind, Sequence};

/// Match/mismatch/gap scores with `i32` arithmetic.
pub type ScoringScheme = align::Scoring<i32>;
/// Full score table with `i32` cells.
pub type AlignmentMatrix = align::ScoreMatrix<i32>;
/// Global alignment scored in `i32`.
pub type AlignmentResult = align::Alignment<i32>;

/// `i64` variants for very long sequences or large score magnitudes.
pub type WideScoringScheme = align::Scoring<i64>;
pub type WideAlignmentMatrix = align::ScoreMatrix<i64>;
pub type WideAlignmentResult = align::Alignment<i64>;
