//! Deterministic synthetic actuals and provider forecasts.
//!
//! Actual PLF follows a clamped mean-reverting recursion
//! `w_{t+1} = clamp(w_t + κ (μ - w_t) + σ ε_t, 0, 1)`. A provider forecast is
//! `min(1, w_t exp(b + s e_t))` with an AR(1) error `e_t` of unit stationary
//! variance started at zero, so forecasts start at the measured state. On
//! injected atypical days the error scale `s` is multiplied. Every day draws
//! from its own stream derived from the seed, the stream id and the day index.

use chrono::NaiveDate;
use rand::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::{SplitMix64, Xoshiro256PlusPlus};
use serde::{Deserialize, Serialize};

use crate::band::DayRecord;
use crate::error::{validation, Result};
use crate::ingestion::SeriesRow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessParams {
    /// Long-run mean PLF `μ`.
    pub mean_level: f64,
    /// Mean-reversion rate `κ` per hour, in `(0, 1]`.
    pub reversion: f64,
    /// Hourly innovation scale `σ`.
    pub noise: f64,
}

impl Default for ProcessParams {
    fn default() -> Self {
        Self {
            mean_level: 0.35,
            reversion: 0.08,
            noise: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderParams {
    pub name: String,
    /// Log-scale bias `b`.
    pub bias: f64,
    /// Log-scale error magnitude `s`.
    pub error_scale: f64,
    /// Hour-to-hour autocorrelation of the error, in `[0, 1)`.
    pub error_autocorr: f64,
    pub atypical_prob: f64,
    pub atypical_multiplier: f64,
    /// Start forecasts at the measured state.
    pub assimilate: bool,
}

impl ProviderParams {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.to_string(),
            bias: 0.0,
            error_scale: 0.1,
            error_autocorr: 0.9,
            atypical_prob: 0.1,
            atypical_multiplier: 4.0,
            assimilate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub n_days: usize,
    pub horizon: usize,
    pub start_date: NaiveDate,
    pub process: ProcessParams,
    pub providers: Vec<ProviderParams>,
}

impl Default for GenConfig {
    fn default() -> Self {
        let mut second = ProviderParams::named("provider_b");
        second.error_scale = 0.13;
        Self {
            seed: 2016,
            n_days: 394,
            horizon: crate::DEFAULT_HORIZON,
            start_date: NaiveDate::from_ymd_opt(2016, 1, 1).expect("valid date"),
            process: ProcessParams::default(),
            providers: vec![ProviderParams::named("provider_a"), second],
        }
    }
}

fn check_prob(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(validation(format!("{name} = {v} must lie in [0, 1]")))
    }
}

fn check_scale(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(validation(format!("{name} = {v} must be a finite non-negative number")))
    }
}

impl ProcessParams {
    fn validate(&self) -> Result<()> {
        check_prob("mean level", self.mean_level)?;
        check_scale("noise", self.noise)?;
        if !(self.reversion > 0.0 && self.reversion <= 1.0) {
            return Err(validation(format!(
                "reversion = {} must lie in (0, 1]",
                self.reversion
            )));
        }
        Ok(())
    }
}

impl ProviderParams {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(validation("provider name is empty"));
        }
        if !self.bias.is_finite() {
            return Err(validation("provider bias must be finite"));
        }
        check_scale("error scale", self.error_scale)?;
        check_scale("atypical multiplier", self.atypical_multiplier)?;
        check_prob("atypical probability", self.atypical_prob)?;
        if !(0.0..1.0).contains(&self.error_autocorr) {
            return Err(validation(format!(
                "error autocorrelation = {} must lie in [0, 1)",
                self.error_autocorr
            )));
        }
        Ok(())
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 2 {
            return Err(validation("horizon must be at least 2"));
        }
        if self.n_days == 0 {
            return Err(validation("n_days must be positive"));
        }
        self.process.validate()?;
        for p in &self.providers {
            p.validate()?;
        }
        Ok(())
    }

    pub fn day_id(&self, index: usize) -> NaiveDate {
        self.start_date + chrono::Days::new(index as u64)
    }
}

/// A generated daily series.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    pub day_id: NaiveDate,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderSeries {
    pub name: String,
    pub days: Vec<DailySeries>,
    /// Whether each day had its error scale inflated.
    pub atypical: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub actuals: Vec<DailySeries>,
    pub providers: Vec<ProviderSeries>,
}

impl SyntheticDataset {
    /// Day records pairing provider `index`'s forecasts with the actuals.
    pub fn day_records(&self, index: usize) -> Result<Vec<DayRecord>> {
        let provider = self
            .providers
            .get(index)
            .ok_or_else(|| validation(format!("no provider with index {index}")))?;
        provider
            .days
            .iter()
            .zip(&self.actuals)
            .map(|(f, a)| DayRecord::new(f.day_id, f.values.clone(), a.values.clone()))
            .collect()
    }
}

const ACTUALS_STREAM: u64 = 0;

/// Independent generator for one (stream, day) pair.
fn day_rng(seed: u64, stream: u64, day: usize) -> Xoshiro256PlusPlus {
    let mut mixer = SplitMix64::seed_from_u64(seed);
    let base = mixer.next_u64();
    let mut mixer = SplitMix64::seed_from_u64(base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let stream_base = mixer.next_u64();
    Xoshiro256PlusPlus::seed_from_u64(stream_base.wrapping_add(day as u64))
}

fn normal(rng: &mut Xoshiro256PlusPlus) -> f64 {
    StandardNormal.sample(rng)
}

/// Actual PLF trajectories, one per day.
pub fn generate_actuals(config: &GenConfig) -> Result<Vec<DailySeries>> {
    config.validate()?;
    let p = &config.process;
    let persistence = 1.0 - p.reversion;
    let stationary = p.noise / (1.0 - persistence * persistence).sqrt();
    Ok((0..config.n_days)
        .map(|d| {
            let mut rng = day_rng(config.seed, ACTUALS_STREAM, d);
            let mut w = (p.mean_level + stationary * normal(&mut rng)).clamp(0.0, 1.0);
            let mut values = Vec::with_capacity(config.horizon);
            values.push(w);
            for _ in 1..config.horizon {
                w = (w + p.reversion * (p.mean_level - w) + p.noise * normal(&mut rng))
                    .clamp(0.0, 1.0);
                values.push(w);
            }
            DailySeries {
                day_id: config.day_id(d),
                values,
            }
        })
        .collect())
}

/// Forecasts of one provider for the given actuals. `stream` separates the
/// error draws of different providers under the same seed.
pub fn generate_provider(
    actuals: &[DailySeries],
    params: &ProviderParams,
    seed: u64,
    stream: u64,
) -> Result<ProviderSeries> {
    params.validate()?;
    let phi = params.error_autocorr;
    let innovation = (1.0 - phi * phi).sqrt();
    let mut atypical = Vec::with_capacity(actuals.len());
    let days = actuals
        .iter()
        .enumerate()
        .map(|(d, actual)| {
            let mut rng = day_rng(seed, stream, d);
            let draw = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            let is_atypical = draw < params.atypical_prob;
            atypical.push(is_atypical);
            let scale = params.error_scale
                * if is_atypical {
                    params.atypical_multiplier
                } else {
                    1.0
                };
            let mut e = if params.assimilate { 0.0 } else { normal(&mut rng) };
            let values = actual
                .values
                .iter()
                .enumerate()
                .map(|(t, &w)| {
                    if t > 0 {
                        e = phi * e + innovation * normal(&mut rng);
                    }
                    if t == 0 && params.assimilate {
                        w
                    } else {
                        (w * (params.bias + scale * e).exp()).min(1.0)
                    }
                })
                .collect();
            DailySeries {
                day_id: actual.day_id,
                values,
            }
        })
        .collect();
    Ok(ProviderSeries {
        name: params.name.clone(),
        days,
        atypical,
    })
}

/// Actuals plus every configured provider.
pub fn generate(config: &GenConfig) -> Result<SyntheticDataset> {
    let actuals = generate_actuals(config)?;
    let providers = config
        .providers
        .iter()
        .enumerate()
        .map(|(i, params)| generate_provider(&actuals, params, config.seed, i as u64 + 1))
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticDataset { actuals, providers })
}

/// Flattens daily series into ingestion rows.
pub fn to_rows(series: &[DailySeries]) -> Vec<SeriesRow> {
    series
        .iter()
        .flat_map(|s| {
            s.values.iter().enumerate().map(move |(t, &value)| SeriesRow {
                day_id: s.day_id,
                t,
                value,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n_days: usize) -> GenConfig {
        GenConfig {
            n_days,
            ..GenConfig::default()
        }
    }

    #[test]
    fn zero_noise_is_constant() {
        let mut cfg = small(5);
        cfg.process.noise = 0.0;
        for day in generate_actuals(&cfg).unwrap() {
            assert!(day.values.iter().all(|&v| v == 0.35));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&small(20)).unwrap();
        let b = generate(&small(20)).unwrap();
        assert_eq!(a, b);
        let mut other = small(20);
        other.seed += 1;
        assert_ne!(a.actuals, generate(&other).unwrap().actuals);
    }

    #[test]
    fn mean_level_is_respected() {
        let actuals = generate_actuals(&small(200)).unwrap();
        let all: Vec<f64> = actuals.iter().flat_map(|d| d.values.clone()).collect();
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        assert!((mean - 0.35).abs() <= 0.05, "mean {mean}");
        assert!(all.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn perfect_provider_reproduces_actuals() {
        let actuals = generate_actuals(&small(10)).unwrap();
        let mut params = ProviderParams::named("perfect");
        params.error_scale = 0.0;
        let p = generate_provider(&actuals, &params, 1, 1).unwrap();
        for (f, a) in p.days.iter().zip(&actuals) {
            assert_eq!(f.values, a.values);
        }
    }

    #[test]
    fn atypical_injection_rate() {
        let actuals = generate_actuals(&small(2000)).unwrap();
        let mut params = ProviderParams::named("a");
        params.atypical_prob = 0.0;
        let p = generate_provider(&actuals, &params, 1, 1).unwrap();
        assert!(p.atypical.iter().all(|&a| !a));

        params.atypical_prob = 0.1;
        let a = generate_provider(&actuals, &params, 1, 1).unwrap();
        let b = generate_provider(&actuals, &params, 1, 2).unwrap();
        let n = actuals.len() as f64;
        let rate = |v: &[bool]| v.iter().filter(|&&x| x).count() as f64 / n;
        let joint = a.atypical.iter().zip(&b.atypical).filter(|(x, y)| **x && **y).count() as f64 / n;
        assert!((rate(&a.atypical) - 0.1).abs() < 0.02);
        assert!((joint - 0.01).abs() < 0.006, "joint {joint}");
    }

    #[test]
    fn assimilated_forecasts_start_at_actual() {
        let data = generate(&small(30)).unwrap();
        for provider in &data.providers {
            for (f, a) in provider.days.iter().zip(&data.actuals) {
                assert_eq!(f.values[0], a.values[0]);
                assert!(f.values.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn rejects_invalid_config() {
        let mut cfg = small(3);
        cfg.providers[0].atypical_prob = 1.5;
        assert!(generate(&cfg).is_err());
        let mut cfg = small(3);
        cfg.horizon = 1;
        assert!(generate(&cfg).is_err());
        let mut cfg = small(3);
        cfg.process.noise = -0.1;
        assert!(generate_actuals(&cfg).is_err());
    }
}
