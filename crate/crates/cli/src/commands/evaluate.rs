use serde::Serialize;

use windband::band::band_limits;
use windband::evaluation::{self, EvalReport, EvalSummary, Histogram};

use super::{num, BandFile};
use crate::args::EvaluateArgs;
use crate::data;
use crate::output::OutputDir;
use crate::CliResult;

#[derive(Serialize)]
struct EvaluationFile {
    provider: String,
    band_provider: String,
    data_sha256: String,
    days: &'static str,
    #[serde(flatten)]
    summary: EvalSummary,
    offband_quantiles: Vec<(f64, f64)>,
    rel_width_quantiles: Vec<(f64, f64)>,
}

fn histogram_rows(quantity: &str, h: &Histogram, rows: &mut Vec<Vec<String>>) {
    for (i, bin) in h.bins.iter().enumerate() {
        rows.push(vec![
            quantity.to_string(),
            i.to_string(),
            num(bin.lo),
            num(bin.hi),
            bin.count.to_string(),
            num(bin.mass_share),
        ]);
    }
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult<()> {
    let out = OutputDir::prepare(&args.output)?;
    let band = BandFile::load(&args.band)?;
    band.check_horizon(args.data.horizon)?;
    let coeffs = band.coefficients()?;
    let loaded = data::load(&args.data, std::slice::from_ref(&args.forecast))?;
    let name = &loaded.names[0];
    if *name != band.provider {
        log::warn!("band was trained on {} but is evaluated on {name}", band.provider);
    }
    let records = loaded.dataset.provider(name)?;
    let days = if args.all_days {
        records.to_vec()
    } else {
        let train = band.provenance.train_day_ids.iter().copied().collect();
        data::partition(records, &train).1
    };

    let report: EvalReport = evaluation::evaluate_set(&days, &coeffs, args.theta)?;
    let offband: Vec<f64> = report.per_day.iter().map(|d| d.offband_energy).collect();
    let widths: Vec<f64> = report
        .per_day
        .iter()
        .map(|d| d.abs_width / report.horizon as f64)
        .collect();
    let h_offband = evaluation::histogram(&offband, args.bins)?;
    let h_width = evaluation::histogram(&widths, args.bins)?;

    out.write_with("eval_days.csv", |w| Ok(report.write_per_day_csv(w)?))?;
    out.write_json(
        "eval_summary.json",
        &EvaluationFile {
            provider: name.clone(),
            band_provider: band.provider.clone(),
            data_sha256: loaded.data_sha256.clone(),
            days: if args.all_days { "all" } else { "test" },
            summary: report.summary(),
            offband_quantiles: h_offband.quantiles.clone(),
            rel_width_quantiles: h_width.quantiles.clone(),
        },
    )?;
    let mut rows = Vec::new();
    histogram_rows("offband_energy", &h_offband, &mut rows);
    histogram_rows("rel_width", &h_width, &mut rows);
    out.write_csv(
        "histograms.csv",
        &["quantity", "bin", "lo", "hi", "count", "mass_share"],
        &rows,
    )?;

    if !args.no_day_bands {
        let dir = out.subdir("bands")?;
        for day in &days {
            let limits = band_limits(&day.forecast, &coeffs)?;
            let rows: Vec<Vec<String>> = (0..day.horizon())
                .map(|t| {
                    vec![
                        t.to_string(),
                        num(day.forecast[t]),
                        num(day.actual[t]),
                        num(limits.lower[t]),
                        num(limits.upper[t]),
                    ]
                })
                .collect();
            dir.write_csv(
                &format!("bands_{}.csv", day.day_id),
                &["t", "forecast", "actual", "lower", "upper"],
                &rows,
            )?;
        }
    }

    let s = report.summary();
    eprintln!(
        "evaluated {name} on {} days: {:.1}% atypical, mean relative width {:.1}%",
        s.n_days,
        100.0 * s.atypical_fraction,
        100.0 * s.mean_rel_width
    );
    Ok(())
}
