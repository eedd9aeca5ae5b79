//! Discriminative prototype learning under dynamic time warping.
//!
//! Provides an exact DTW kernel with alignment backtracking and path
//! subgradients, class-specific prototype sets with medoid and DBA
//! initialization, a discriminative training engine for time series
//! classification, a weakly supervised segmentation engine driven by
//! ordering transcripts, and the data/persistence layer behind the CLI.

pub mod data;
pub mod dtw;
pub mod error;
pub mod model;
pub mod optim;
pub mod prototype;
pub mod sequence;
pub mod synth;
pub mod tsc;
pub mod weak_seg;

pub use dtw::{Alignment, BandConstraint, DtwResult};
pub use error::DpDtwError;
pub use model::{LossRecord, Model, ModelMode};
pub use prototype::{OrderingSequence, Prototype, PrototypeSet, Transcript};
pub use sequence::Sequence;
