//! CSV ingestion, PLF normalization, start-state assimilation, provider
//! alignment and the seeded train/test split.
//!
//! Series files have the header `day_id,t,value` with ISO-8601 dates, integer
//! hours ahead and decimal values. Capacity files have the header
//! `day_id,capacity_mw`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use rand::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::band::{DayRecord, BOUND_TOL};
use crate::error::{validation, Error, LineProblem, Result};

pub const SERIES_HEADER: [&str; 3] = ["day_id", "t", "value"];
pub const CAPACITY_HEADER: [&str; 2] = ["day_id", "capacity_mw"];
/// Hours over which a forecast is blended into the measured start state.
pub const DEFAULT_ASSIMILATION_WINDOW: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    /// Values are already plant load factors in `[0, 1]`.
    Plf,
    /// Values are megawatts and need a capacity file.
    Mw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub day_id: NaiveDate,
    pub t: usize,
    pub value: f64,
}

/// Rows of one series file, validated but not yet normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub name: String,
    pub units: Units,
    pub horizon: usize,
    pub rows: Vec<SeriesRow>,
    /// Installed MW per day, required for [`Units::Mw`].
    pub capacity: Option<BTreeMap<NaiveDate, f64>>,
}

/// PLF values per day and hour; `None` marks a missing hour.
#[derive(Debug, Clone, PartialEq)]
pub struct PlfSeries {
    pub name: String,
    pub horizon: usize,
    pub days: BTreeMap<NaiveDate, Vec<Option<f64>>>,
}

impl PlfSeries {
    pub fn from_complete<I>(name: &str, horizon: usize, days: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NaiveDate, Vec<f64>)>,
    {
        let mut map = BTreeMap::new();
        for (day_id, values) in days {
            crate::error::check_len(&format!("series {name} on {day_id}"), horizon, values.len())?;
            if map.insert(day_id, values.into_iter().map(Some).collect()).is_some() {
                return Err(validation(format!("series {name} repeats day {day_id}")));
            }
        }
        Ok(Self {
            name: name.to_string(),
            horizon,
            days: map,
        })
    }

    /// The day's values when every hour is present.
    pub fn complete_day(&self, day_id: &NaiveDate) -> Option<Vec<f64>> {
        self.days.get(day_id)?.iter().copied().collect()
    }

    pub fn complete_days(&self) -> usize {
        self.days
            .values()
            .filter(|v| v.iter().all(Option::is_some))
            .count()
    }
}

fn source_name(path: &Path) -> String {
    path.display().to_string()
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|source| Error::Io {
        path: source_name(path),
        source,
    })
}

fn check_header(
    reader: &mut csv::Reader<impl Read>,
    expected: &[&str],
    source: &str,
) -> Result<()> {
    let header = reader.headers()?.clone();
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    if found != expected {
        return Err(Error::Parse {
            source_name: source.to_string(),
            problems: vec![LineProblem {
                line: 1,
                message: format!(
                    "unknown header `{}`, expected `{}`",
                    found.join(","),
                    expected.join(",")
                ),
            }],
        });
    }
    Ok(())
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn parse_date(field: &str) -> std::result::Result<NaiveDate, String> {
    NaiveDate::parse_from_str(field, "%Y-%m-%d").map_err(|_| format!("`{field}` is not an ISO-8601 date"))
}

fn parse_value(field: &str) -> std::result::Result<f64, String> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("`{field}` is not a finite number")),
    }
}

/// Parses a series file. Every malformed line is reported, not only the first.
pub fn parse_csv(path: &Path, units: Units, horizon: usize) -> Result<RawSeries> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut raw = parse_csv_reader(open(path)?, &source_name(path), units, horizon)?;
    raw.name = name;
    Ok(raw)
}

/// [`parse_csv`] over any reader; `source` names it in error reports.
pub fn parse_csv_reader<R: Read>(
    input: R,
    source: &str,
    units: Units,
    horizon: usize,
) -> Result<RawSeries> {
    if horizon < 2 {
        return Err(validation("horizon must be at least 2"));
    }
    let mut reader = csv_reader(input);
    check_header(&mut reader, &SERIES_HEADER, source)?;
    let mut rows = Vec::new();
    let mut problems = Vec::new();
    let mut seen: BTreeMap<(NaiveDate, usize), u64> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let mut fail = |message: String| problems.push(LineProblem { line, message });
        if record.len() != 3 {
            fail(format!("expected 3 fields, found {}", record.len()));
            continue;
        }
        let day_id = match parse_date(&record[0]) {
            Ok(d) => d,
            Err(e) => {
                fail(e);
                continue;
            }
        };
        let t = match record[1].parse::<usize>() {
            Ok(t) if t < horizon => t,
            Ok(t) => {
                fail(format!("hour {t} is outside 0..={}", horizon - 1));
                continue;
            }
            Err(_) => {
                fail(format!("`{}` is not a non-negative integer hour", &record[1]));
                continue;
            }
        };
        let value = match parse_value(&record[2]) {
            Ok(v) => v,
            Err(e) => {
                fail(e);
                continue;
            }
        };
        let in_range = match units {
            Units::Plf => (-BOUND_TOL..=1.0 + BOUND_TOL).contains(&value),
            Units::Mw => value >= 0.0,
        };
        if !in_range {
            let range = match units {
                Units::Plf => "[0, 1]",
                Units::Mw => "[0, inf)",
            };
            fail(format!("value {value} is outside {range}"));
            continue;
        }
        if let Some(first) = seen.insert((day_id, t), line) {
            fail(format!("duplicate entry for {day_id} hour {t} (first on line {first})"));
            continue;
        }
        rows.push(SeriesRow { day_id, t, value });
    }
    if !problems.is_empty() {
        return Err(Error::Parse {
            source_name: source.to_string(),
            problems,
        });
    }
    Ok(RawSeries {
        name: source.to_string(),
        units,
        horizon,
        rows,
        capacity: None,
    })
}

/// Parses a `day_id,capacity_mw` file.
pub fn parse_capacity(path: &Path) -> Result<BTreeMap<NaiveDate, f64>> {
    parse_capacity_reader(open(path)?, &source_name(path))
}

pub fn parse_capacity_reader<R: Read>(input: R, source: &str) -> Result<BTreeMap<NaiveDate, f64>> {
    let mut reader = csv_reader(input);
    check_header(&mut reader, &CAPACITY_HEADER, source)?;
    let mut capacity = BTreeMap::new();
    let mut problems = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let parsed = if record.len() != 2 {
            Err(format!("expected 2 fields, found {}", record.len()))
        } else {
            parse_date(&record[0]).and_then(|d| {
                let v = parse_value(&record[1])?;
                if v > 0.0 {
                    Ok((d, v))
                } else {
                    Err(format!("capacity {v} must be positive"))
                }
            })
        };
        match parsed {
            Ok((d, v)) => {
                if capacity.insert(d, v).is_some() {
                    problems.push(LineProblem {
                        line,
                        message: format!("duplicate capacity for {d}"),
                    });
                }
            }
            Err(message) => problems.push(LineProblem { line, message }),
        }
    }
    if !problems.is_empty() {
        return Err(Error::Parse {
            source_name: source.to_string(),
            problems,
        });
    }
    Ok(capacity)
}

/// Converts to PLF by dividing by the day's installed capacity, or passes PLF
/// values through.
pub fn normalize_plf(raw: &RawSeries) -> Result<PlfSeries> {
    let mut days: BTreeMap<NaiveDate, Vec<Option<f64>>> = BTreeMap::new();
    for row in &raw.rows {
        let plf = match raw.units {
            Units::Plf => row.value.clamp(0.0, 1.0),
            Units::Mw => {
                let capacity = raw
                    .capacity
                    .as_ref()
                    .and_then(|c| c.get(&row.day_id))
                    .ok_or_else(|| {
                        validation(format!(
                            "series {}: no installed capacity for {}",
                            raw.name, row.day_id
                        ))
                    })?;
                if row.value > *capacity {
                    return Err(validation(format!(
                        "series {}: {} MW on {} hour {} exceeds capacity {} MW",
                        raw.name, row.value, row.day_id, row.t, capacity
                    )));
                }
                row.value / capacity
            }
        };
        days.entry(row.day_id).or_insert_with(|| vec![None; raw.horizon])[row.t] = Some(plf);
    }
    Ok(PlfSeries {
        name: raw.name.clone(),
        horizon: raw.horizon,
        days,
    })
}

/// Blends the first `window` hours of a forecast toward the measured start
/// `w0`: `p'_t = clamp(p_t + (w0 - p_0) max(0, (A - t) / A), 0, 1)`, with
/// `p'_0 = w0` exactly. This linear blend stands in for a provider's own
/// assimilation procedure.
pub fn assimilate(forecast: &[f64], w0: f64, window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(validation("assimilation window must be at least one hour"));
    }
    if forecast.len() <= window {
        return Err(validation(format!(
            "forecast of {} hours is not longer than the assimilation window {window}",
            forecast.len()
        )));
    }
    if !(0.0..=1.0).contains(&w0) {
        return Err(validation(format!("start state {w0} is outside [0, 1]")));
    }
    let correction = w0 - forecast[0];
    let a = window as f64;
    let mut out: Vec<f64> = forecast
        .iter()
        .enumerate()
        .map(|(t, &p)| {
            if t < window {
                (p + correction * (a - t as f64) / a).clamp(0.0, 1.0)
            } else {
                p
            }
        })
        .collect();
    out[0] = w0;
    Ok(out)
}

/// Why a day was left out of an aligned dataset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum DropCause {
    MissingActuals,
    IncompleteActuals,
    MissingForecast(String),
    IncompleteForecast(String),
}

impl std::fmt::Display for DropCause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DropCause::MissingActuals => write!(f, "no actuals"),
            DropCause::IncompleteActuals => write!(f, "incomplete actuals"),
            DropCause::MissingForecast(p) => write!(f, "no forecast from {p}"),
            DropCause::IncompleteForecast(p) => write!(f, "incomplete forecast from {p}"),
        }
    }
}

/// Days complete in every provider and in the actuals.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedDataset {
    pub day_ids: Vec<NaiveDate>,
    /// Records per provider, ordered like `day_ids` and sharing its actuals.
    pub providers: BTreeMap<String, Vec<DayRecord>>,
    /// Every dropped day with all of its causes.
    pub dropped: BTreeMap<NaiveDate, Vec<DropCause>>,
}

impl AlignedDataset {
    pub fn provider(&self, name: &str) -> Result<&[DayRecord]> {
        self.providers
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| validation(format!("unknown provider {name}")))
    }

    /// Number of dropped days per cause.
    pub fn drop_counts(&self) -> BTreeMap<DropCause, usize> {
        let mut counts = BTreeMap::new();
        for cause in self.dropped.values().flatten() {
            *counts.entry(cause.clone()).or_insert(0) += 1;
        }
        counts
    }

    /// The same days restricted to `ids`, in dataset order.
    pub fn subset(&self, ids: &BTreeSet<NaiveDate>) -> AlignedDataset {
        let keep: Vec<bool> = self.day_ids.iter().map(|d| ids.contains(d)).collect();
        let pick = |v: &[DayRecord]| -> Vec<DayRecord> {
            v.iter().zip(&keep).filter(|(_, k)| **k).map(|(r, _)| r.clone()).collect()
        };
        AlignedDataset {
            day_ids: self.day_ids.iter().zip(&keep).filter(|(_, k)| **k).map(|(d, _)| *d).collect(),
            providers: self.providers.iter().map(|(n, v)| (n.clone(), pick(v))).collect(),
            dropped: BTreeMap::new(),
        }
    }
}

/// Keeps the days on which the actuals and every provider are complete,
/// optionally assimilating each forecast into the measured start state.
pub fn align(
    providers: &[PlfSeries],
    actuals: &PlfSeries,
    assimilation_window: Option<usize>,
) -> Result<AlignedDataset> {
    if providers.is_empty() {
        return Err(validation("alignment needs at least one provider"));
    }
    let mut names = BTreeSet::new();
    for p in providers {
        if p.horizon != actuals.horizon {
            return Err(Error::Dimension {
                context: format!("horizon of provider {}", p.name),
                expected: actuals.horizon,
                found: p.horizon,
            });
        }
        if !names.insert(p.name.clone()) {
            return Err(validation(format!("provider {} given twice", p.name)));
        }
    }

    let mut all_days: BTreeSet<NaiveDate> = actuals.days.keys().copied().collect();
    for p in providers {
        all_days.extend(p.days.keys().copied());
    }

    let mut day_ids = Vec::new();
    let mut records: BTreeMap<String, Vec<DayRecord>> =
        providers.iter().map(|p| (p.name.clone(), Vec::new())).collect();
    let mut dropped = BTreeMap::new();
    for day in all_days {
        let mut causes = Vec::new();
        let actual = match actuals.days.get(&day) {
            None => {
                causes.push(DropCause::MissingActuals);
                None
            }
            Some(_) => {
                let complete = actuals.complete_day(&day);
                if complete.is_none() {
                    causes.push(DropCause::IncompleteActuals);
                }
                complete
            }
        };
        let mut forecasts = Vec::with_capacity(providers.len());
        for p in providers {
            match p.days.get(&day) {
                None => causes.push(DropCause::MissingForecast(p.name.clone())),
                Some(_) => match p.complete_day(&day) {
                    None => causes.push(DropCause::IncompleteForecast(p.name.clone())),
                    Some(f) => forecasts.push(f),
                },
            }
        }
        if !causes.is_empty() {
            causes.sort();
            dropped.insert(day, causes);
            continue;
        }
        let actual = actual.expect("complete actuals");
        for (p, forecast) in providers.iter().zip(forecasts) {
            let forecast = match assimilation_window {
                Some(window) => assimilate(&forecast, actual[0], window)?,
                None => forecast,
            };
            let record = DayRecord::new(day, forecast, actual.clone())?;
            records.get_mut(&p.name).expect("provider entry").push(record);
        }
        day_ids.push(day);
    }

    if day_ids.is_empty() {
        let diagnostics: Vec<String> = std::iter::once(format!(
            "actuals: {} complete days",
            actuals.complete_days()
        ))
        .chain(
            providers
                .iter()
                .map(|p| format!("{}: {} complete days", p.name, p.complete_days())),
        )
        .collect();
        return Err(validation(format!(
            "no day is complete in every series ({})",
            diagnostics.join("; ")
        )));
    }
    Ok(AlignedDataset {
        day_ids,
        providers: records,
        dropped,
    })
}

/// Requested size of the training set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainSize {
    Count(usize),
    /// Fraction of the dataset, rounded down.
    Fraction(f64),
}

impl TrainSize {
    pub fn resolve(self, total: usize) -> Result<usize> {
        let n = match self {
            TrainSize::Count(n) => n,
            TrainSize::Fraction(f) => {
                if !(f.is_finite() && (0.0..=1.0).contains(&f)) {
                    return Err(validation(format!("train fraction {f} must lie in [0, 1]")));
                }
                (f * total as f64 + 1e-9).floor() as usize
            }
        };
        if n == 0 {
            return Err(validation("the training set would be empty"));
        }
        if n >= total {
            return Err(validation(format!(
                "training size {n} must be smaller than the dataset size {total}"
            )));
        }
        Ok(n)
    }
}

/// Seeded random partition of `items` into a training set of the requested
/// size and the remaining test set, each kept in input order.
///
/// The permutation is a Fisher–Yates shuffle of the indices driven by a
/// SplitMix64 stream, drawing each index as `(r · (i + 1)) >> 64`, so a split
/// depends only on the seed and the dataset size.
pub fn split_train_test<T: Clone>(items: &[T], size: TrainSize, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    let n_train = size.resolve(items.len())?;
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..items.len()).collect();
    for i in (1..order.len()).rev() {
        let j = ((rng.next_u64() as u128 * (i as u128 + 1)) >> 64) as usize;
        order.swap(i, j);
    }
    let mut in_train = vec![false; items.len()];
    for &i in &order[..n_train] {
        in_train[i] = true;
    }
    let (mut train, mut test) = (Vec::with_capacity(n_train), Vec::new());
    for (item, keep) in items.iter().zip(in_train) {
        if keep {
            train.push(item.clone());
        } else {
            test.push(item.clone());
        }
    }
    Ok((train, test))
}

/// Writes rows in the series format; values use the shortest representation
/// that parses back to the same number.
pub fn write_series_csv<W: Write>(out: W, rows: &[SeriesRow]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(SERIES_HEADER)?;
    for row in rows {
        writer.write_record([
            row.day_id.format("%Y-%m-%d").to_string(),
            row.t.to_string(),
            row.value.to_string(),
        ])?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: "series output".into(),
        source,
    })?;
    Ok(())
}

pub fn write_series_file(path: &Path, rows: &[SeriesRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: source_name(path),
        source,
    })?;
    write_series_csv(std::io::BufWriter::new(file), rows)
}
