//! Spatio-temporal action localization trained from point annotations.
//!
//! The crate covers the full desk-scale pipeline:
//!
//! * [`geometry`] — boxes, tubes, point tracks, and the point/tube overlap
//!   measure that scores how well a tube proposal matches sparse clicks;
//! * [`mining`] — a seeded linear max-margin solver and the alternating
//!   proposal-mining loop that trains per-action localizers from video
//!   labels plus points;
//! * [`pseudo`] — automatically generated point tracks ("pseudo-points")
//!   that rescope proposal selection at inference, with a weighting scheme
//!   that calibrates each cue against the training annotations;
//! * [`eval`] — top-detection labeling, average precision, AUC, and the
//!   five-way detection error diagnosis;
//! * [`data`] — dataset manifest and file formats, plus a seeded synthetic
//!   generator and the perturbation suite behind the experiment sweeps;
//! * [`pipeline`] — train/infer/evaluate orchestration shared by the CLI
//!   and the experiment sweeps in [`experiments`].
//!
//! All randomness flows through [`rng::DetRng`]; identical seeds give
//! byte-identical artifacts.

pub mod data;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod geometry;
pub mod mining;
pub mod pipeline;
pub mod pseudo;
pub mod report;
pub mod rng;

#[cfg(any(test, feature = "oracles"))]
pub mod oracles;

pub use error::{Error, Result};
pub use geometry::{Box2D, MatchMode, Point, PointTrack, Tube, VideoMeta};
