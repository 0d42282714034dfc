//! Loading, aligning and splitting the input series.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use log::info;
use sha2::{Digest, Sha256};

use windband::ingestion::{self, AlignedDataset, PlfSeries};
use windband::DayRecord;

use crate::args::{DataArgs, SplitArgs};
use crate::CliResult;

pub struct LoadedData {
    pub dataset: AlignedDataset,
    /// Provider names of the requested forecasts, in request order.
    pub names: Vec<String>,
    /// SHA-256 over the input files, in argument order.
    pub data_sha256: String,
}

fn read_bytes(path: &Path) -> windband::Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| windband::Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn load_series(path: &Path, args: &DataArgs, hasher: &mut Sha256) -> CliResult<PlfSeries> {
    let bytes = read_bytes(path)?;
    hasher.update((bytes.len() as u64).to_le_bytes());
    hasher.update(&bytes);
    let mut raw = ingestion::parse_csv(path, args.units(), args.horizon)?;
    if let Some(capacity) = &args.capacity {
        raw.capacity = Some(ingestion::parse_capacity(capacity)?);
    }
    Ok(ingestion::normalize_plf(&raw)?)
}

/// Parses the actuals and `forecasts` (plus `--align-with` files) and keeps
/// the days every series covers completely.
pub fn load(args: &DataArgs, forecasts: &[PathBuf]) -> CliResult<LoadedData> {
    let mut hasher = Sha256::new();
    let actuals = load_series(&args.actuals, args, &mut hasher)?;
    let mut providers = Vec::new();
    for path in forecasts.iter().chain(&args.align_with) {
        providers.push(load_series(path, args, &mut hasher)?);
    }
    if let Some(capacity) = &args.capacity {
        let bytes = read_bytes(capacity)?;
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    let names = providers[..forecasts.len()]
        .iter()
        .map(|p| p.name.clone())
        .collect();
    let dataset = ingestion::align(&providers, &actuals, args.assimilation())?;
    for (cause, count) in dataset.drop_counts() {
        info!("dropped {count} day(s): {cause}");
    }
    if dataset.day_ids.is_empty() {
        return Err(windband::Error::Validation(
            "no day is covered completely by the actuals and every provider".into(),
        )
        .into());
    }
    Ok(LoadedData {
        dataset,
        names,
        data_sha256: hex::encode(hasher.finalize()),
    })
}

/// Training day ids of the seeded split over the aligned days.
pub fn training_days(dataset: &AlignedDataset, split: &SplitArgs) -> CliResult<BTreeSet<NaiveDate>> {
    let (train, _) = ingestion::split_train_test(&dataset.day_ids, split.size(), split.seed)?;
    Ok(train.into_iter().collect())
}

/// Splits `records` by membership of their day in `train`.
pub fn partition(records: &[DayRecord], train: &BTreeSet<NaiveDate>) -> (Vec<DayRecord>, Vec<DayRecord>) {
    records.iter().cloned().partition(|r| train.contains(&r.day_id))
}
