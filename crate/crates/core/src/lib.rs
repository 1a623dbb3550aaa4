//! Daily incident heatmaps and spatio-temporal forecasting.
//!
//! The pipeline: parse geolocated incident CSVs into day-indexed
//! records ([`ingest`]), rasterize each day onto a fixed grid and smooth
//! with a Gaussian kernel ([`raster`]), stack consecutive smoothed days
//! into supervised windows ([`dataset`]), train one of four forecasters
//! ([`models`], [`training`]) — a ConvLSTM stack, an attention-pooled
//! ConvLSTM stack, a time-distributed encoder-decoder, or the
//! adversarial generator/critic pair — and score predictions on a held
//! out chronological split ([`eval`]).
//!
//! All numerics run on the from-scratch 64-bit engine in [`tensor`];
//! every differentiable operation ships with a backward rule that is
//! verified against central finite differences.

// Validation deliberately writes `!(x > 0.0)` instead of `x <= 0.0`:
// the negated form also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod models;
pub mod pgm;
pub mod raster;
pub mod synth;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
