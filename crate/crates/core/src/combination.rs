//! Convex combination of two providers' forecasts and bands.
//!
//! Limits are mixed before truncation and truncated once, so the untruncated
//! width of a mix is exactly the mix of the providers' untruncated widths.

use std::cmp::Ordering;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::band::{BandCoefficients, BandLimits, DayRecord};
use crate::error::{check_len, validation, Error, Result};
use crate::evaluation::{evaluate_limits, EvalReport};

/// Widths closer than this are considered tied during the α search.
pub const WIDTH_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedBand {
    pub day_id: NaiveDate,
    pub alpha: f64,
    pub forecast: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl CombinedBand {
    pub fn limits(&self) -> BandLimits {
        BandLimits {
            lower: self.lower.clone(),
            upper: self.upper.clone(),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(validation(format!("alpha {alpha} must lie in [0, 1]")))
    }
}

fn check_pair(day1: &DayRecord, day2: &DayRecord) -> Result<()> {
    if day1.day_id != day2.day_id {
        return Err(validation(format!(
            "cannot combine different days {} and {}",
            day1.day_id, day2.day_id
        )));
    }
    check_len("second provider horizon", day1.horizon(), day2.horizon())?;
    if day1.actual != day2.actual {
        return Err(validation(format!(
            "providers disagree on the actuals of {}",
            day1.day_id
        )));
    }
    Ok(())
}

/// Band for the forecast `α p̂ + (1 - α) p̌` on one day.
pub fn combine(
    day1: &DayRecord,
    coeffs1: &BandCoefficients,
    day2: &DayRecord,
    coeffs2: &BandCoefficients,
    alpha: f64,
) -> Result<CombinedBand> {
    check_alpha(alpha)?;
    check_pair(day1, day2)?;
    check_len("first provider coefficients", day1.horizon(), coeffs1.horizon())?;
    check_len("second provider coefficients", day2.horizon(), coeffs2.horizon())?;
    let beta = 1.0 - alpha;
    let horizon = day1.horizon();
    let mut forecast = Vec::with_capacity(horizon);
    let mut lower = Vec::with_capacity(horizon);
    let mut upper = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let (p1, x1) = (day1.forecast[t], coeffs1.x[t]);
        let (p2, x2) = (day2.forecast[t], coeffs2.x[t]);
        forecast.push(alpha * p1 + beta * p2);
        lower.push((alpha * ((1.0 - x1) * p1) + beta * ((1.0 - x2) * p2)).max(0.0));
        upper.push((alpha * ((1.0 + x1) * p1) + beta * ((1.0 + x2) * p2)).min(1.0));
    }
    Ok(CombinedBand {
        day_id: day1.day_id,
        alpha,
        forecast,
        lower,
        upper,
    })
}

/// Combines every day of two aligned day sets.
pub fn combine_days(
    days1: &[DayRecord],
    coeffs1: &BandCoefficients,
    days2: &[DayRecord],
    coeffs2: &BandCoefficients,
    alpha: f64,
) -> Result<Vec<CombinedBand>> {
    check_len("aligned days", days1.len(), days2.len())?;
    days1
        .iter()
        .zip(days2)
        .map(|(d1, d2)| combine(d1, coeffs1, d2, coeffs2, alpha))
        .collect()
}

/// Evaluates the combined band at one `α` against the shared actuals.
pub fn evaluate_combination(
    days1: &[DayRecord],
    coeffs1: &BandCoefficients,
    days2: &[DayRecord],
    coeffs2: &BandCoefficients,
    alpha: f64,
    theta: f64,
) -> Result<EvalReport> {
    let bands = combine_days(days1, coeffs1, days2, coeffs2, alpha)?;
    let limits: Vec<BandLimits> = bands.iter().map(CombinedBand::limits).collect();
    evaluate_limits(days1, &limits, theta, coeffs1.lambda)
}

/// `{0.00, 0.01, …, 1.00}`.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..=100).map(|i| f64::from(i) / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaPoint {
    pub alpha: f64,
    pub atypical_fraction: f64,
    pub mean_rel_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSearch {
    pub theta: f64,
    pub atypical_budget: f64,
    /// `None` when no grid point meets the budget.
    pub selected: Option<AlphaPoint>,
    /// One entry per distinct grid point, by increasing `α`.
    pub diagnostics: Vec<AlphaPoint>,
}

impl AlphaSearch {
    /// `alpha,atypical_fraction,mean_rel_width` per grid point.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["alpha", "atypical_fraction", "mean_rel_width"])?;
        for p in &self.diagnostics {
            writer.write_record([
                p.alpha.to_string(),
                p.atypical_fraction.to_string(),
                p.mean_rel_width.to_string(),
            ])?;
        }
        writer.flush().map_err(|source| Error::Io {
            path: "alpha diagnostics".into(),
            source,
        })?;
        Ok(())
    }
}

/// Preference order among feasible points: narrower, then fewer atypical
/// days, then larger `α`.
fn preference(a: &AlphaPoint, b: &AlphaPoint) -> Ordering {
    if (a.mean_rel_width - b.mean_rel_width).abs() > WIDTH_TIE_TOL {
        return a.mean_rel_width.total_cmp(&b.mean_rel_width);
    }
    a.atypical_fraction
        .total_cmp(&b.atypical_fraction)
        .then_with(|| b.alpha.total_cmp(&a.alpha))
}

/// Searches `alpha_grid` for the narrowest combined band whose atypical
/// fraction (threshold `θ`) stays within `atypical_budget`.
pub fn alpha_search(
    days1: &[DayRecord],
    coeffs1: &BandCoefficients,
    days2: &[DayRecord],
    coeffs2: &BandCoefficients,
    alpha_grid: &[f64],
    theta: f64,
    atypical_budget: f64,
) -> Result<AlphaSearch> {
    if days1.is_empty() {
        return Err(validation("α search needs at least one aligned day"));
    }
    if alpha_grid.is_empty() {
        return Err(validation("α grid is empty"));
    }
    for &a in alpha_grid {
        check_alpha(a)?;
    }
    if !(0.0..=1.0).contains(&atypical_budget) {
        return Err(validation(format!(
            "atypical budget {atypical_budget} must lie in [0, 1]"
        )));
    }
    let mut grid = alpha_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let diagnostics = grid
        .iter()
        .map(|&alpha| {
            let report = evaluate_combination(days1, coeffs1, days2, coeffs2, alpha, theta)?;
            Ok(AlphaPoint {
                alpha,
                atypical_fraction: report.atypical_fraction,
                mean_rel_width: report.mean_rel_width,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // With tolerance-based ties the preference is not transitive, so pick
    // the narrowest first and then break ties among points close to it.
    let feasible: Vec<&AlphaPoint> = diagnostics
        .iter()
        .filter(|p| p.atypical_fraction <= atypical_budget)
        .collect();
    let selected = feasible
        .iter()
        .map(|p| p.mean_rel_width)
        .min_by(f64::total_cmp)
        .and_then(|narrowest| {
            feasible
                .iter()
                .filter(|p| p.mean_rel_width - narrowest <= WIDTH_TIE_TOL)
                .min_by(|a, b| preference(a, b))
                .map(|p| **p)
        });

    Ok(AlphaSearch {
        theta,
        atypical_budget,
        selected,
        diagnostics,
    })
}
