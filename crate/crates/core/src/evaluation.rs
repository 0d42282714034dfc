//! Out-of-sample assessment of trained bands.
//!
//! A day is atypical when its off-band energy strictly exceeds the threshold
//! (by default the `θ` the band was trained with). Widths are reported both as
//! the per-day sum of hourly widths and normalized by the horizon.

use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::band::{band_limits, offband_energy, BandCoefficients, BandLimits, DayRecord};
use crate::error::{check_len, validation, Error, Result};
use crate::optimizer::{self, BandProblem, BandSolution, SolveStatus, SolverOptions};

/// Quantile levels reported with every histogram.
pub const QUANTILE_LEVELS: [f64; 3] = [0.5, 0.66, 0.75];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayEvaluation {
    pub day_id: NaiveDate,
    pub offband_energy: f64,
    /// Sum over hours of `upper - lower`.
    pub abs_width: f64,
    pub is_atypical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Classification threshold.
    pub theta: f64,
    pub lambda: f64,
    pub n_days: usize,
    pub horizon: usize,
    pub atypical_fraction: f64,
    /// Mean over days of the absolute width (PLF·hours).
    pub mean_abs_width: f64,
    /// `mean_abs_width / T`.
    pub mean_rel_width: f64,
    pub per_day: Vec<DayEvaluation>,
}

/// Summary fields of an [`EvalReport`], without the per-day rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub theta: f64,
    pub lambda: f64,
    pub n_days: usize,
    pub horizon: usize,
    pub atypical_days: usize,
    pub atypical_fraction: f64,
    pub mean_abs_width: f64,
    pub mean_rel_width: f64,
}

impl EvalReport {
    pub fn summary(&self) -> EvalSummary {
        EvalSummary {
            theta: self.theta,
            lambda: self.lambda,
            n_days: self.n_days,
            horizon: self.horizon,
            atypical_days: self.per_day.iter().filter(|d| d.is_atypical).count(),
            atypical_fraction: self.atypical_fraction,
            mean_abs_width: self.mean_abs_width,
            mean_rel_width: self.mean_rel_width,
        }
    }

    pub fn indicators(&self) -> AtypicalIndicators {
        AtypicalIndicators {
            day_ids: self.per_day.iter().map(|d| d.day_id).collect(),
            flags: self.per_day.iter().map(|d| d.is_atypical).collect(),
        }
    }

    /// One row per day: `day_id,offband_energy,abs_width,rel_width,is_atypical`.
    pub fn write_per_day_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["day_id", "offband_energy", "abs_width", "rel_width", "is_atypical"])?;
        for day in &self.per_day {
            writer.write_record([
                day.day_id.to_string(),
                day.offband_energy.to_string(),
                day.abs_width.to_string(),
                (day.abs_width / self.horizon as f64).to_string(),
                u8::from(day.is_atypical).to_string(),
            ])?;
        }
        writer.flush().map_err(|source| Error::Io {
            path: "evaluation output".into(),
            source,
        })?;
        Ok(())
    }
}

/// Classifies and measures `days` against bands already built for them.
pub fn evaluate_limits(
    days: &[DayRecord],
    limits: &[BandLimits],
    theta: f64,
    lambda: f64,
) -> Result<EvalReport> {
    if days.is_empty() {
        return Err(validation("cannot evaluate an empty set of days"));
    }
    check_len("band limits per day", days.len(), limits.len())?;
    if !(theta.is_finite() && theta >= 0.0) {
        return Err(validation(format!("threshold {theta} must be a non-negative number")));
    }
    let horizon = days[0].horizon();
    let mut per_day = Vec::with_capacity(days.len());
    for (day, lim) in days.iter().zip(limits) {
        check_len("day horizon", horizon, day.horizon())?;
        let energy = offband_energy(day, lim)?;
        per_day.push(DayEvaluation {
            day_id: day.day_id,
            offband_energy: energy,
            abs_width: lim.absolute_width(),
            is_atypical: energy > theta,
        });
    }
    let n = per_day.len() as f64;
    let atypical = per_day.iter().filter(|d| d.is_atypical).count() as f64;
    let mean_abs_width = per_day.iter().map(|d| d.abs_width).sum::<f64>() / n;
    Ok(EvalReport {
        theta,
        lambda,
        n_days: per_day.len(),
        horizon,
        atypical_fraction: atypical / n,
        mean_abs_width,
        mean_rel_width: mean_abs_width / horizon as f64,
        per_day,
    })
}

/// Evaluates a trained band on `days`. The atypical threshold is the band's
/// own `θ` unless `threshold` overrides it; the override changes only the
/// classification, never the widths.
pub fn evaluate_set(
    days: &[DayRecord],
    coeffs: &BandCoefficients,
    threshold: Option<f64>,
) -> Result<EvalReport> {
    let limits = days
        .iter()
        .map(|d| band_limits(&d.forecast, coeffs))
        .collect::<Result<Vec<_>>>()?;
    evaluate_limits(days, &limits, threshold.unwrap_or(coeffs.theta), coeffs.lambda)
}

/// Per-day atypical flags (`true` = atypical).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtypicalIndicators {
    pub day_ids: Vec<NaiveDate>,
    pub flags: Vec<bool>,
}

impl AtypicalIndicators {
    pub fn new(day_ids: Vec<NaiveDate>, flags: Vec<bool>) -> Result<Self> {
        check_len("atypical flags", day_ids.len(), flags.len())?;
        Ok(Self { day_ids, flags })
    }

    /// Training-side indicators: the days a solution discarded.
    pub fn from_solution(days: &[DayRecord], solution: &BandSolution) -> Result<Self> {
        check_len("training days", solution.regular.len(), days.len())?;
        Ok(Self {
            day_ids: days.iter().map(|d| d.day_id).collect(),
            flags: solution.regular.iter().map(|&r| !r).collect(),
        })
    }

    pub fn rate(&self) -> f64 {
        self.flags.iter().filter(|&&f| f).count() as f64 / self.flags.len().max(1) as f64
    }
}

/// φ coefficient from the marginal rates `p1`, `p2` and the joint rate `p11`:
/// `(p11 - p1 p2) / sqrt(p1 (1 - p1) p2 (1 - p2))`, clamped to `[-1, 1]`.
pub fn phi_from_rates(p1: f64, p2: f64, p11: f64) -> Result<f64> {
    for (name, v) in [("p1", p1), ("p2", p2), ("p11", p11)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(validation(format!("rate {name} = {v} must lie in [0, 1]")));
        }
    }
    if p11 > p1.min(p2) + 1e-12 {
        return Err(validation(format!(
            "joint rate {p11} exceeds a marginal rate ({p1}, {p2})"
        )));
    }
    let denom = (p1 * (1.0 - p1) * p2 * (1.0 - p2)).sqrt();
    if denom == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "an indicator is constant, so its variance is zero",
        ));
    }
    Ok(((p11 - p1 * p2) / denom).clamp(-1.0, 1.0))
}

/// φ correlation between two indicator vectors over the same days.
pub fn phi_correlation(a: &AtypicalIndicators, b: &AtypicalIndicators) -> Result<f64> {
    check_len("indicator vectors", a.flags.len(), b.flags.len())?;
    check_len("indicator days", a.day_ids.len(), a.flags.len())?;
    check_len("indicator days", b.day_ids.len(), b.flags.len())?;
    if a.day_ids != b.day_ids {
        return Err(validation("indicator vectors cover different days"));
    }
    let n = a.flags.len();
    if n < 2 {
        return Err(validation("φ correlation needs at least two days"));
    }
    let mut n1 = 0usize;
    let mut n2 = 0usize;
    let mut n11 = 0usize;
    for (&x, &y) in a.flags.iter().zip(&b.flags) {
        n1 += usize::from(x);
        n2 += usize::from(y);
        n11 += usize::from(x && y);
    }
    let n = n as f64;
    phi_from_rates(n1 as f64 / n, n2 as f64 / n, n11 as f64 / n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// Share of the total of all values that falls in this bin.
    pub mass_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: Vec<HistogramBin>,
    /// Nearest-rank quantiles at [`QUANTILE_LEVELS`], as `(level, value)`.
    pub quantiles: Vec<(f64, f64)>,
}

/// Nearest-rank quantile of sorted values: the `⌈q n⌉`-th smallest.
pub fn nearest_rank(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(validation("quantile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(validation(format!("quantile level {q} must lie in [0, 1]")));
    }
    // The small offset keeps products like 0.66 * 100 from rounding up.
    let rank = ((q * sorted.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(sorted.len()) - 1])
}

/// Equal-width histogram over `[min, max]` with mass shares and the
/// reference quantiles. When every value is zero, mass shares fall back to
/// count shares.
pub fn histogram(values: &[f64], n_bins: usize) -> Result<Histogram> {
    if values.is_empty() {
        return Err(validation("histogram of an empty sample"));
    }
    if n_bins == 0 {
        return Err(validation("a histogram needs at least one bin"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(validation("histogram values must be finite"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let n_bins = if max > min { n_bins } else { 1 };
    let width = (max - min) / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    let mut sums = vec![0.0f64; n_bins];
    for &v in values {
        let i = if width > 0.0 {
            (((v - min) / width) as usize).min(n_bins - 1)
        } else {
            0
        };
        counts[i] += 1;
        sums[i] += v;
    }
    let total: f64 = sums.iter().sum();
    let n = values.len() as f64;
    let bins = (0..n_bins)
        .map(|i| HistogramBin {
            lo: min + width * i as f64,
            hi: if i + 1 == n_bins { max } else { min + width * (i + 1) as f64 },
            count: counts[i],
            mass_share: if total != 0.0 {
                sums[i] / total
            } else {
                counts[i] as f64 / n
            },
        })
        .collect();
    let quantiles = QUANTILE_LEVELS
        .iter()
        .map(|&q| Ok((q, nearest_rank(&sorted, q)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Histogram { bins, quantiles })
}

/// One point of the width-versus-θ curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub theta: f64,
    /// `None` when the solve failed; `error` then says why.
    pub objective: Option<f64>,
    pub mean_abs_width: Option<f64>,
    pub mean_rel_width: Option<f64>,
    pub status: Option<SolveStatus>,
    pub error: Option<String>,
}

/// Trains one band per `θ` on the same days, mean profile and `λ`, and
/// reports the mean width over those training days. Each solve starts from
/// the day selection of the previous point, which stays feasible as `θ`
/// grows. A failed point is recorded and the curve continues.
pub fn pareto_curve(
    template: &BandProblem,
    theta_grid: &[f64],
    options: &SolverOptions,
) -> Result<Vec<ParetoPoint>> {
    if theta_grid.is_empty() {
        return Err(validation("θ grid is empty"));
    }
    if theta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(validation("θ grid must be strictly increasing"));
    }
    let mut previous: Option<Vec<bool>> = None;
    let mut points = Vec::with_capacity(theta_grid.len());
    for &theta in theta_grid {
        let problem = BandProblem {
            theta,
            ..template.clone()
        };
        match optimizer::solve_from(&problem, options, previous.as_deref()) {
            Ok(sol) => {
                let report = evaluate_set(&problem.days, &sol.coefficients, None)?;
                points.push(ParetoPoint {
                    theta,
                    objective: Some(sol.objective),
                    mean_abs_width: Some(report.mean_abs_width),
                    mean_rel_width: Some(report.mean_rel_width),
                    status: Some(sol.status),
                    error: None,
                });
                previous = Some(sol.regular);
            }
            Err(e) => points.push(ParetoPoint {
                theta,
                objective: None,
                mean_abs_width: None,
                mean_rel_width: None,
                status: None,
                error: Some(e.to_string()),
            }),
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn date(offset: u64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2016, 5, 1).unwrap() + chrono::Days::new(offset)
    }

    fn day(offset: u64, p: &[f64], w: &[f64]) -> DayRecord {
        DayRecord::new(date(offset), p.to_vec(), w.to_vec()).unwrap()
    }

    #[test]
    fn perfect_forecasts() {
        let days = vec![day(0, &[0.3, 0.4], &[0.3, 0.4]), day(1, &[0.5, 0.1], &[0.5, 0.1])];
        let r = evaluate_set(&days, &BandCoefficients::zeros(2), None).unwrap();
        assert_eq!(r.atypical_fraction, 0.0);
        assert_eq!(r.mean_abs_width, 0.0);
        assert_eq!(r.mean_rel_width, 0.0);
    }

    #[test]
    fn single_atypical_day() {
        let days = vec![day(0, &[0.5, 0.5], &[0.7, 0.5])];
        let coeffs = BandCoefficients::new(vec![0.0, 0.0], 0.05, 1.0).unwrap();
        let r = evaluate_set(&days, &coeffs, None).unwrap();
        assert!((r.per_day[0].offband_energy - 0.1).abs() < 1e-12);
        assert_eq!(r.atypical_fraction, 1.0);
        // Equality with the threshold counts as regular.
        let r = evaluate_set(&days, &coeffs, Some(0.1)).unwrap();
        assert_eq!(r.atypical_fraction, 0.0);
    }

    #[test]
    fn empty_set_is_rejected() {
        assert!(evaluate_set(&[], &BandCoefficients::zeros(2), None).is_err());
    }

    #[test]
    fn threshold_override_changes_only_flags() {
        let days = vec![
            day(0, &[0.5, 0.4, 0.3], &[0.7, 0.4, 0.35]),
            day(1, &[0.2, 0.4, 0.6], &[0.2, 0.3, 0.6]),
        ];
        let coeffs = BandCoefficients::new(vec![0.1, 0.1, 0.1], 0.01, 1.0).unwrap();
        let a = evaluate_set(&days, &coeffs, None).unwrap();
        let b = evaluate_set(&days, &coeffs, Some(0.5)).unwrap();
        assert_eq!(a.mean_abs_width, b.mean_abs_width);
        for (x, y) in a.per_day.iter().zip(&b.per_day) {
            assert_eq!(x.abs_width, y.abs_width);
            assert_eq!(x.offband_energy, y.offband_energy);
        }
        assert!(a.atypical_fraction > b.atypical_fraction);
    }

    fn indicators(flags: &[u8]) -> AtypicalIndicators {
        AtypicalIndicators::new(
            (0..flags.len() as u64).map(date).collect(),
            flags.iter().map(|&f| f == 1).collect(),
        )
        .unwrap()
    }

    #[test]
    fn phi_examples() {
        let a = indicators(&[1, 0, 1, 0]);
        assert!((phi_correlation(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let b = indicators(&[0, 1, 0, 1]);
        assert!((phi_correlation(&a, &b).unwrap() + 1.0).abs() < 1e-12);
        let phi = phi_from_rates(0.163, 0.204, 0.071).unwrap();
        assert!((phi - 0.256).abs() <= 0.02, "phi {phi}");
    }

    #[test]
    fn phi_rejects_degenerate_inputs() {
        let constant = indicators(&[0, 0, 0, 0]);
        let a = indicators(&[1, 0, 1, 0]);
        assert!(matches!(
            phi_correlation(&constant, &a),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(phi_correlation(&indicators(&[1]), &indicators(&[1])).is_err());
        let shifted = AtypicalIndicators::new((1..5).map(date).collect(), a.flags.clone()).unwrap();
        assert!(phi_correlation(&a, &shifted).is_err());
    }

    #[test]
    fn histogram_examples() {
        let h = histogram(&[1.0, 1.0, 2.0], 2).unwrap();
        assert_eq!(h.bins.len(), 2);
        assert_eq!((h.bins[0].count, h.bins[1].count), (2, 1));
        assert!((h.bins[0].mass_share - 0.5).abs() < 1e-12);
        assert!((h.bins[1].mass_share - 0.5).abs() < 1e-12);

        let flat = histogram(&[0.3; 5], 4).unwrap();
        assert_eq!(flat.bins.iter().filter(|b| b.count > 0).count(), 1);
        assert_eq!(flat.bins[0].mass_share, 1.0);

        let zeros = histogram(&[0.0; 3], 2).unwrap();
        assert_eq!(zeros.bins[0].mass_share, 1.0);
        assert!(histogram(&[], 3).is_err());
        assert!(histogram(&[1.0], 0).is_err());
    }

    #[test]
    fn nearest_rank_quantiles() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(nearest_rank(&v, 0.5).unwrap(), 50.0);
        assert_eq!(nearest_rank(&v, 0.66).unwrap(), 66.0);
        assert_eq!(nearest_rank(&v, 0.75).unwrap(), 75.0);
        assert_eq!(nearest_rank(&[4.0, 7.0], 0.5).unwrap(), 4.0);
        assert_eq!(nearest_rank(&[4.0, 7.0], 0.0).unwrap(), 4.0);
    }

    #[test]
    fn report_csv_layout() {
        let days = vec![day(0, &[0.5, 0.5], &[0.7, 0.5])];
        let coeffs = BandCoefficients::new(vec![0.2, 0.0], 0.05, 0.9).unwrap();
        let r = evaluate_set(&days, &coeffs, None).unwrap();
        let mut buf = Vec::new();
        r.write_per_day_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "day_id,offband_energy,abs_width,rel_width,is_atypical");
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields[0], "2016-05-01");
        let nums: Vec<f64> = fields[1..4].iter().map(|f| f.parse().unwrap()).collect();
        assert!((nums[0] - 0.05).abs() < 1e-12);
        assert!((nums[1] - 0.2).abs() < 1e-12);
        assert!((nums[2] - 0.1).abs() < 1e-12);
        assert_eq!(fields[4], "0");
        assert_eq!(lines.len(), 2);
    }

    proptest! {
        #[test]
        fn phi_is_symmetric_and_bounded(a in prop::collection::vec(any::<bool>(), 2..40), seed: u64) {
            let b: Vec<bool> = a.iter().enumerate().map(|(i, &x)| x ^ ((seed >> (i % 64)) & 1 == 1)).collect();
            let ids: Vec<NaiveDate> = (0..a.len() as u64).map(date).collect();
            let ia = AtypicalIndicators::new(ids.clone(), a).unwrap();
            let ib = AtypicalIndicators::new(ids, b).unwrap();
            match (phi_correlation(&ia, &ib), phi_correlation(&ib, &ia)) {
                (Ok(x), Ok(y)) => {
                    prop_assert!((x - y).abs() < 1e-12);
                    prop_assert!((-1.0..=1.0).contains(&x));
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "asymmetric failure"),
            }
        }

        #[test]
        fn histogram_totals(values in prop::collection::vec(0.0f64..10.0, 1..200), bins in 1usize..20) {
            let h = histogram(&values, bins).unwrap();
            prop_assert_eq!(h.bins.iter().map(|b| b.count).sum::<usize>(), values.len());
            let mass: f64 = h.bins.iter().map(|b| b.mass_share).sum();
            prop_assert!((mass - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn classification_ignores_day_order(
            errs in prop::collection::vec(prop::collection::vec(-0.2f64..0.2, 4), 1..12),
            rot in 0usize..12,
        ) {
            let days: Vec<DayRecord> = errs.iter().enumerate().map(|(i, e)| {
                let p = vec![0.4, 0.5, 0.3, 0.6];
                let w: Vec<f64> = p.iter().zip(e).map(|(p, e)| (p + e).clamp(0.0, 1.0)).collect();
                day(i as u64, &p, &w)
            }).collect();
            let coeffs = BandCoefficients::new(vec![0.1; 4], 0.02, 1.0).unwrap();
            let a = evaluate_set(&days, &coeffs, None).unwrap();
            let mut rotated = days.clone();
            rotated.rotate_left(rot % days.len());
            let b = evaluate_set(&rotated, &coeffs, None).unwrap();
            prop_assert_eq!(a.atypical_fraction, b.atypical_fraction);
            let mut fa: Vec<_> = a.per_day.iter().map(|d| (d.day_id, d.is_atypical)).collect();
            let mut fb: Vec<_> = b.per_day.iter().map(|d| (d.day_id, d.is_atypical)).collect();
            fa.sort();
            fb.sort();
            prop_assert_eq!(fa, fb);
        }
    }
}
