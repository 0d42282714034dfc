use windband::evaluation;
use windband::optimizer::{self, MeanSource, SolveStatus};

use super::num;
use crate::args::ParetoArgs;
use crate::data;
use crate::output::OutputDir;
use crate::{CliError, CliResult};

pub fn pareto(args: &ParetoArgs) -> CliResult<()> {
    let out = OutputDir::prepare(&args.output)?;
    let loaded = data::load(&args.data, std::slice::from_ref(&args.forecast))?;
    let records = loaded.dataset.provider(&loaded.names[0])?;
    let train_ids = data::training_days(&loaded.dataset, &args.split)?;
    let (train_days, _) = data::partition(records, &train_ids);
    let first_theta = *args
        .theta_grid
        .first()
        .ok_or_else(|| CliError::Usage("the θ grid is empty".into()))?;
    let template =
        optimizer::build_instance(train_days, MeanSource::Training, first_theta, args.lambda)?;
    let points = evaluation::pareto_curve(&template, &args.theta_grid, &args.solver.options())?;

    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                num(p.theta),
                match p.status {
                    Some(SolveStatus::Optimal) => "optimal".to_string(),
                    Some(SolveStatus::IterationLimit) => "iteration-limit".to_string(),
                    None => "failed".to_string(),
                },
                opt(p.objective),
                opt(p.mean_abs_width),
                opt(p.mean_rel_width),
                p.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    out.write_csv(
        "pareto.csv",
        &["theta", "status", "objective", "mean_abs_width", "mean_rel_width", "error"],
        &rows,
    )?;

    let failed = points.iter().filter(|p| p.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} of {} θ values had no feasible band", points.len());
    }
    let limited = points
        .iter()
        .filter(|p| p.status == Some(SolveStatus::IterationLimit))
        .count();
    if limited > 0 {
        return Err(CliError::Limit(format!(
            "{limited} of {} θ values stopped at the search budget; pareto.csv marks them",
            points.len()
        )));
    }
    Ok(())
}
