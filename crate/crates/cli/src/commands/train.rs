use std::time::Instant;

use windband::band::{band_limits, offband_energy};
use windband::optimizer::{self, MeanSource, SolveStatus};

use super::{num, BandFile, Provenance, SolverReport};
use crate::args::TrainArgs;
use crate::data;
use crate::output::OutputDir;
use crate::{CliError, CliResult};

pub fn train(args: &TrainArgs) -> CliResult<()> {
    let out = OutputDir::prepare(&args.output)?;
    let loaded = data::load(&args.data, std::slice::from_ref(&args.forecast))?;
    let name = &loaded.names[0];
    let records = loaded.dataset.provider(name)?;
    let train_ids = data::training_days(&loaded.dataset, &args.split)?;
    let (train_days, _) = data::partition(records, &train_ids);

    let problem =
        optimizer::build_instance(train_days, MeanSource::Training, args.theta, args.lambda)?;
    let options = args.solver.options();
    let started = Instant::now();
    let solution = optimizer::solve(&problem, &options)?;
    eprintln!(
        "trained {name} on {} days in {:.2}s: {:?}, objective {:.6}, {} nodes",
        problem.num_days(),
        started.elapsed().as_secs_f64(),
        solution.status,
        solution.objective,
        solution.nodes
    );

    let band = BandFile {
        provider: name.clone(),
        horizon: problem.horizon(),
        theta: args.theta,
        lambda: args.lambda,
        x: solution.coefficients.x.clone(),
        provenance: Provenance {
            data_sha256: loaded.data_sha256.clone(),
            seed: args.split.seed,
            aligned_days: loaded.dataset.day_ids.len(),
            assimilation_window: args.data.assimilation(),
            train_day_ids: problem.days.iter().map(|d| d.day_id).collect(),
        },
        solver: SolverReport {
            status: solution.status,
            objective: solution.objective,
            best_bound: solution.best_bound.is_finite().then_some(solution.best_bound),
            nodes: solution.nodes,
            regular_days: solution.num_regular(),
            discarded_day_ids: solution
                .atypical_days()
                .into_iter()
                .map(|d| problem.days[d].day_id)
                .collect(),
            formulation: options.formulation,
            tolerance: options.tolerance,
            node_limit: args.solver.node_limit,
            time_limit_seconds: args.solver.time_limit,
            x_cap: options.x_cap,
            warnings: solution.warnings.clone(),
        },
    };
    out.write_json("band.json", &band)?;

    let horizon = problem.horizon() as f64;
    let mut rows = Vec::with_capacity(problem.num_days());
    for (day, regular) in problem.days.iter().zip(&solution.regular) {
        let limits = band_limits(&day.forecast, &solution.coefficients)?;
        let width = limits.absolute_width();
        rows.push(vec![
            day.day_id.to_string(),
            u8::from(*regular).to_string(),
            num(offband_energy(day, &limits)?),
            num(width),
            num(width / horizon),
        ]);
    }
    out.write_csv(
        "train_report.csv",
        &["day_id", "regular", "offband_energy", "abs_width", "rel_width"],
        &rows,
    )?;

    if solution.status == SolveStatus::IterationLimit {
        return Err(CliError::Limit(format!(
            "search stopped at its budget after {} nodes; band.json holds the best band found \
             (objective {:.6}, bound {})",
            solution.nodes,
            solution.objective,
            band.solver
                .best_bound
                .map_or_else(|| "none".to_string(), |b| format!("{b:.6}"))
        )));
    }
    Ok(())
}
