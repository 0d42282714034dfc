//! Domain types and closed-form band mathematics.
//!
//! All series are plant load factors (PLF): generated power divided by the
//! installed capacity, so every sample lies in `[0, 1]`. A band is described by
//! per-hour relative half-widths `x_t >= 0`; around a forecast `p` it spans
//! `[max(0, (1 - x_t) p_t), min(1, (1 + x_t) p_t)]`.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, validation, Result};

/// Absolute tolerance used when checking values against their bounds.
pub const BOUND_TOL: f64 = 1e-9;

/// Default horizon: hourly samples `t = 0..72`.
pub const DEFAULT_HORIZON: usize = 72;

fn check_unit_interval(what: &str, values: &[f64]) -> Result<()> {
    for (t, &v) in values.iter().enumerate() {
        if !v.is_finite() || v < -BOUND_TOL || v > 1.0 + BOUND_TOL {
            return Err(validation(format!(
                "{what}[{t}] = {v} lies outside [0, 1]"
            )));
        }
    }
    Ok(())
}

fn clamp_unit(values: Vec<f64>) -> Vec<f64> {
    values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect()
}

/// One day's forecast and realized generation over the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    pub day_id: NaiveDate,
    pub forecast: Vec<f64>,
    pub actual: Vec<f64>,
}

impl DayRecord {
    /// Builds a record, checking shapes and ranges. Values within
    /// [`BOUND_TOL`] of the unit interval are clamped onto it.
    pub fn new(day_id: NaiveDate, forecast: Vec<f64>, actual: Vec<f64>) -> Result<Self> {
        check_len("day record actuals", forecast.len(), actual.len())?;
        if forecast.len() < 2 {
            return Err(validation(format!(
                "day {day_id}: horizon must be at least 2, got {}",
                forecast.len()
            )));
        }
        check_unit_interval("forecast", &forecast)?;
        check_unit_interval("actual", &actual)?;
        Ok(Self {
            day_id,
            forecast: clamp_unit(forecast),
            actual: clamp_unit(actual),
        })
    }

    pub fn horizon(&self) -> usize {
        self.forecast.len()
    }

    /// Whether the forecast starts at the measured state (`p_0 == w_0`).
    pub fn is_assimilated(&self) -> bool {
        self.forecast[0] == self.actual[0]
    }

    /// Errors unless the forecast starts at the measured state.
    pub fn check_assimilated(&self) -> Result<()> {
        if self.is_assimilated() {
            Ok(())
        } else {
            Err(validation(format!(
                "day {}: forecast[0] = {} differs from actual[0] = {}",
                self.day_id, self.forecast[0], self.actual[0]
            )))
        }
    }

    /// Absolute deviation `|w_t - p_t|` per hour.
    pub fn deviations(&self) -> Vec<f64> {
        self.forecast
            .iter()
            .zip(&self.actual)
            .map(|(p, w)| (w - p).abs())
            .collect()
    }

    /// Time-normalized mean absolute deviation, the off-band energy of a
    /// zero-width band.
    pub fn mean_abs_deviation(&self) -> f64 {
        self.deviations().iter().sum::<f64>() / self.horizon() as f64
    }
}

/// Per-hour relative half-widths together with the parameters they were
/// trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandCoefficients {
    pub x: Vec<f64>,
    pub theta: f64,
    pub lambda: f64,
}

impl BandCoefficients {
    pub fn new(x: Vec<f64>, theta: f64, lambda: f64) -> Result<Self> {
        for (t, &v) in x.iter().enumerate() {
            if !v.is_finite() || v < -BOUND_TOL {
                return Err(validation(format!("coefficient x[{t}] = {v} must be >= 0")));
            }
        }
        check_parameter("theta", theta)?;
        check_parameter("lambda", lambda)?;
        Ok(Self {
            x: x.into_iter().map(|v| v.max(0.0)).collect(),
            theta,
            lambda,
        })
    }

    /// The degenerate band of zero width.
    pub fn zeros(horizon: usize) -> Self {
        Self {
            x: vec![0.0; horizon],
            theta: 0.0,
            lambda: 1.0,
        }
    }

    pub fn horizon(&self) -> usize {
        self.x.len()
    }
}

pub(crate) fn check_parameter(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(validation(format!("{name} = {value} must lie in [0, 1]")))
    }
}

/// Mean actual PLF per hour over a reference set of days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanProfile {
    pub w_bar: Vec<f64>,
}

impl MeanProfile {
    pub fn new(w_bar: Vec<f64>) -> Result<Self> {
        check_unit_interval("mean profile", &w_bar)?;
        Ok(Self {
            w_bar: clamp_unit(w_bar),
        })
    }

    /// Arithmetic mean of the actual trajectories of `days`.
    pub fn from_days<'a, I>(days: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a DayRecord>,
    {
        let mut sum: Vec<f64> = Vec::new();
        let mut count = 0usize;
        for day in days {
            if count == 0 {
                sum = vec![0.0; day.horizon()];
            }
            check_len("mean profile source", sum.len(), day.horizon())?;
            for (s, w) in sum.iter_mut().zip(&day.actual) {
                *s += w;
            }
            count += 1;
        }
        if count == 0 {
            return Err(validation("mean profile needs at least one day"));
        }
        Self::new(sum.into_iter().map(|s| s / count as f64).collect())
    }

    pub fn horizon(&self) -> usize {
        self.w_bar.len()
    }
}

/// Lower and upper band limits, truncated to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandLimits {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BandLimits {
    pub fn horizon(&self) -> usize {
        self.lower.len()
    }

    /// Sum of per-hour widths.
    pub fn absolute_width(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| hi - lo)
            .sum()
    }
}

/// Absolute and horizon-normalized width of a band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandWidth {
    pub absolute: f64,
    pub relative: f64,
}

pub(crate) fn limits_from_slices(forecast: &[f64], x: &[f64]) -> BandLimits {
    let (lower, upper) = forecast
        .iter()
        .zip(x)
        .map(|(&p, &xt)| (((1.0 - xt) * p).max(0.0), ((1.0 + xt) * p).min(1.0)))
        .unzip();
    BandLimits { lower, upper }
}

/// Band limits around `forecast`.
pub fn band_limits(forecast: &[f64], coeffs: &BandCoefficients) -> Result<BandLimits> {
    check_len("band limits", coeffs.horizon(), forecast.len())?;
    Ok(limits_from_slices(forecast, &coeffs.x))
}

pub(crate) fn offband_from_slices(actual: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let total: f64 = actual
        .iter()
        .zip(lower.iter().zip(upper))
        .map(|(&w, (&lo, &hi))| (w - hi).max(0.0) + (lo - w).max(0.0))
        .sum();
    total / actual.len() as f64
}

/// Time-normalized energy of `actual` falling outside `limits`.
pub fn offband_energy_of(actual: &[f64], limits: &BandLimits) -> Result<f64> {
    check_len("off-band energy", limits.horizon(), actual.len())?;
    check_len("off-band energy", limits.lower.len(), limits.upper.len())?;
    Ok(offband_from_slices(actual, &limits.lower, &limits.upper))
}

/// Off-band energy of `day`'s realized generation against `limits`, i.e. the
/// complement of the band's reliability on that day.
pub fn offband_energy(day: &DayRecord, limits: &BandLimits) -> Result<f64> {
    offband_energy_of(&day.actual, limits)
}

/// Width of the band around `forecast`: the absolute sum of per-hour widths
/// and that sum normalized by the horizon length.
pub fn band_width(forecast: &[f64], coeffs: &BandCoefficients) -> Result<BandWidth> {
    let limits = band_limits(forecast, coeffs)?;
    let absolute = limits.absolute_width();
    Ok(BandWidth {
        absolute,
        relative: absolute / forecast.len() as f64,
    })
}
