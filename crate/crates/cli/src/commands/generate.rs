use windband::datagen::{self, GenConfig};
use windband::ingestion;

use crate::args::GenerateArgs;
use crate::output::{read_json, OutputDir};
use crate::CliResult;

pub fn generate(args: &GenerateArgs) -> CliResult<()> {
    let out = OutputDir::prepare(&args.output)?;
    let mut config = match &args.config {
        Some(path) => read_json::<GenConfig>(path)?,
        None => GenConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(days) = args.days {
        config.n_days = days;
    }
    if let Some(horizon) = args.horizon {
        config.horizon = horizon;
    }
    if let Some(start) = args.start_date {
        config.start_date = start;
    }
    let data = datagen::generate(&config)?;

    ingestion::write_series_file(&out.path("actuals.csv"), &datagen::to_rows(&data.actuals))?;
    for provider in &data.providers {
        ingestion::write_series_file(
            &out.path(&format!("{}.csv", provider.name)),
            &datagen::to_rows(&provider.days),
        )?;
    }
    let mut header = vec!["day_id"];
    header.extend(data.providers.iter().map(|p| p.name.as_str()));
    let rows: Vec<Vec<String>> = data
        .actuals
        .iter()
        .enumerate()
        .map(|(d, day)| {
            let mut row = vec![day.day_id.to_string()];
            row.extend(data.providers.iter().map(|p| u8::from(p.atypical[d]).to_string()));
            row
        })
        .collect();
    out.write_csv("injected_atypical.csv", &header, &rows)?;
    out.write_json("generator.json", &config)?;
    eprintln!(
        "generated {} days × {} hours for {} provider(s) in {}",
        config.n_days,
        config.horizon,
        data.providers.len(),
        args.output.out.display()
    );
    Ok(())
}
