//! Minimal-width relative confidence bands around wind power point forecasts.
//!
//! Bands are trained by a mixed-integer program that keeps each regular
//! training day's off-band energy under a budget `theta` while allowing a
//! fraction `1 - lambda` of days to be discarded as atypical. Trained bands are
//! assessed out of sample and bands of two providers can be blended by a
//! convex combination.

pub mod band;
pub mod combination;
pub mod datagen;
pub mod error;
pub mod evaluation;
pub mod ingestion;
pub mod lp;
pub mod optimizer;

pub use band::{
    band_limits, band_width, offband_energy, offband_energy_of, BandCoefficients, BandLimits,
    BandWidth, DayRecord, MeanProfile, DEFAULT_HORIZON,
};
pub use error::{Error, Result};
