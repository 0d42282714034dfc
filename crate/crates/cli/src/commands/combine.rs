use std::collections::BTreeSet;

use serde::Serialize;

use windband::combination::{self, AlphaPoint};
use windband::evaluation::{self, EvalSummary};
use windband::DayRecord;

use super::{num, BandFile};
use crate::args::CombineArgs;
use crate::data;
use crate::output::OutputDir;
use crate::{CliError, CliResult};

/// Agreement of the two providers' atypical days on the test set.
#[derive(Serialize)]
struct Independence {
    p1: f64,
    p2: f64,
    p11: f64,
    /// `None` when a provider's indicator is constant.
    phi: Option<f64>,
}

#[derive(Serialize)]
struct CombineFile {
    providers: [String; 2],
    data_sha256: String,
    theta: f64,
    atypical_budget: f64,
    grid_points: usize,
    feasible: bool,
    /// Best grid point on the training days.
    selected: Option<AlphaPoint>,
    /// The selected combination on the test days.
    test: Option<EvalSummary>,
    /// Each provider's own band on the test days.
    provider_tests: [EvalSummary; 2],
    independence: Independence,
}

fn independence(
    a: &evaluation::EvalReport,
    b: &evaluation::EvalReport,
) -> CliResult<Independence> {
    let ia = a.indicators();
    let ib = b.indicators();
    let n = ia.flags.len() as f64;
    let p11 = ia.flags.iter().zip(&ib.flags).filter(|(x, y)| **x && **y).count() as f64 / n;
    let phi = match evaluation::phi_correlation(&ia, &ib) {
        Ok(phi) => Some(phi),
        Err(windband::Error::UndefinedCorrelation(reason)) => {
            log::warn!("φ correlation undefined: {reason}");
            None
        }
        Err(e) => return Err(e.into()),
    };
    Ok(Independence {
        p1: ia.rate(),
        p2: ib.rate(),
        p11,
        phi,
    })
}

pub fn combine(args: &CombineArgs) -> CliResult<()> {
    let out = OutputDir::prepare(&args.output)?;
    let bands = [BandFile::load(&args.band[0])?, BandFile::load(&args.band[1])?];
    for band in &bands {
        band.check_horizon(args.data.horizon)?;
    }
    if bands[0].provenance.train_day_ids != bands[1].provenance.train_day_ids {
        return Err(windband::Error::Validation(
            "the two bands were trained on different days; train both with the same \
             data, --align-with files and seed"
                .into(),
        )
        .into());
    }
    let coeffs = [bands[0].coefficients()?, bands[1].coefficients()?];
    let loaded = data::load(&args.data, &args.forecast)?;
    let records: [&[DayRecord]; 2] = [
        loaded.dataset.provider(&loaded.names[0])?,
        loaded.dataset.provider(&loaded.names[1])?,
    ];
    let train: BTreeSet<_> = bands[0].provenance.train_day_ids.iter().copied().collect();
    let (train1, test1) = data::partition(records[0], &train);
    let (train2, test2) = data::partition(records[1], &train);

    let theta = args.theta.unwrap_or(bands[0].theta);
    let grid = match (&args.alpha, &args.alpha_grid) {
        (Some(a), _) => vec![*a],
        (None, Some(grid)) => grid.clone(),
        (None, None) => combination::default_alpha_grid(),
    };
    let search = combination::alpha_search(
        &train1,
        &coeffs[0],
        &train2,
        &coeffs[1],
        &grid,
        theta,
        args.budget_atypical,
    )?;
    out.write_with("alpha_grid.csv", |w| Ok(search.write_csv(w)?))?;

    let own1 = evaluation::evaluate_set(&test1, &coeffs[0], Some(theta))?;
    let own2 = evaluation::evaluate_set(&test2, &coeffs[1], Some(theta))?;
    let mut test = None;
    if let Some(chosen) = &search.selected {
        let report = combination::evaluate_combination(
            &test1,
            &coeffs[0],
            &test2,
            &coeffs[1],
            chosen.alpha,
            theta,
        )?;
        out.write_with("combined_days.csv", |w| Ok(report.write_per_day_csv(w)?))?;
        let bands = combination::combine_days(&test1, &coeffs[0], &test2, &coeffs[1], chosen.alpha)?;
        let mut rows = Vec::new();
        for band in &bands {
            for t in 0..band.forecast.len() {
                rows.push(vec![
                    band.day_id.to_string(),
                    t.to_string(),
                    num(band.forecast[t]),
                    num(band.lower[t]),
                    num(band.upper[t]),
                ]);
            }
        }
        out.write_csv(
            "combined_limits.csv",
            &["day_id", "t", "forecast", "lower", "upper"],
            &rows,
        )?;
        test = Some(report.summary());
    }

    out.write_json(
        "combine.json",
        &CombineFile {
            providers: [loaded.names[0].clone(), loaded.names[1].clone()],
            data_sha256: loaded.data_sha256.clone(),
            theta,
            atypical_budget: args.budget_atypical,
            grid_points: search.diagnostics.len(),
            feasible: search.selected.is_some(),
            selected: search.selected,
            test,
            independence: independence(&own1, &own2)?,
            provider_tests: [own1.summary(), own2.summary()],
        },
    )?;

    match &search.selected {
        Some(p) => {
            eprintln!(
                "alpha {} : {:.1}% atypical, mean relative width {:.1}% on training days",
                p.alpha,
                100.0 * p.atypical_fraction,
                100.0 * p.mean_rel_width
            );
            Ok(())
        }
        None => Err(CliError::NoFeasibleAlpha(format!(
            "no α among {} grid points keeps the atypical fraction within {}; \
             diagnostics are in alpha_grid.csv",
            search.diagnostics.len(),
            args.budget_atypical
        ))),
    }
}
