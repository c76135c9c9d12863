//! Quantitative tooling around myocardial scar segmentation.
//!
//! The crate covers the full evaluation path for binary scar masks on 2-D
//! slices: file I/O and resampling ([`grid`], [`io`], [`manifest`],
//! [`resample`]), overlap and size-based metrics ([`metrics`]), the
//! soft-label combined loss and its gradient ([`loss`]), seeded data
//! augmentation ([`augment`]), lesion morphology and scar mass
//! ([`morphology`]), half-maximum threshold labeling ([`fwhm`]) and
//! cohort-level statistics ([`stats`]).

pub mod augment;
pub mod error;
pub mod fwhm;
pub mod grid;
pub mod io;
pub mod loss;
pub mod manifest;
pub mod metrics;
pub mod morphology;
pub mod resample;
pub mod stats;

pub use error::{Error, Result};
pub use grid::{BoundingBox, Field, Image, Mask, PixelGeometry, ScoreMap};
pub use manifest::CaseRecord;
