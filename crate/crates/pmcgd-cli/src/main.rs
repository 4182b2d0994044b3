//! Batch front end for robust model-based clustering: CSV in, JSON report
//! out, optional SVG scatter plot, plus bundled benchmark experiments.

mod error;
mod ingest;
mod replicate;
mod report;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use pmcgd::classify::label_observations;
use pmcgd::ecm::FitConfig;
use pmcgd::selection::{sweep, SweepGrid};
use pmcgd::StructureId;

use error::{from_fit_error, CliError};
use report::Report;

#[derive(Parser)]
#[command(
    name = "pmcgd",
    version,
    about = "Robust clustering with parsimonious mixtures of contaminated Gaussian distributions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit every requested (structure, G) pair to a CSV dataset, rank the
    /// models by BIC, and write a JSON report.
    Sweep(SweepArgs),
    /// Run one of the bundled benchmark experiments end to end.
    Replicate(ReplicateArgs),
}

#[derive(Args)]
struct CommonFitArgs {
    /// Aitken convergence tolerance.
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    /// Upper bound for the inflation parameters.
    #[arg(long = "eta-max", default_value_t = 1000.0)]
    eta_max: f64,
    /// Lower bound for the per-component good proportions.
    #[arg(long = "alpha-min", default_value_t = 0.5)]
    alpha_min: f64,
    /// Iteration cap per fit.
    #[arg(long = "max-iter", default_value_t = 500)]
    max_iter: usize,
    /// Seed for every random choice; identical invocations give identical
    /// reports.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random restarts for the Gaussian warm start.
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Good-probability threshold below which a point is flagged bad.
    #[arg(long = "bad-threshold", default_value_t = 0.5)]
    bad_threshold: f64,
    /// Report destination (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    /// SVG scatter destination (2-D data only).
    #[arg(long)]
    plot: Option<PathBuf>,
}

impl CommonFitArgs {
    fn fit_config(&self) -> Result<FitConfig, CliError> {
        let cfg = FitConfig {
            epsilon: self.epsilon,
            eta_star: self.eta_max,
            alpha_star: self.alpha_min,
            max_iter: self.max_iter,
            seed: self.seed,
            restarts: self.restarts,
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.bad_threshold) {
            return Err(CliError::Usage(format!(
                "--bad-threshold must lie in [0, 1], got {}",
                self.bad_threshold
            )));
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SweepArgs {
    /// Input CSV file.
    #[arg(long)]
    input: PathBuf,
    /// Feature columns as comma-separated names or 0-based indices
    /// (default: every column except the label).
    #[arg(long)]
    columns: Option<String>,
    /// Optional label column (name or index) for confusion tables.
    #[arg(long = "label-column")]
    label_column: Option<String>,
    /// Covariance structures: "all" or a comma list such as "EVE,VVV".
    #[arg(long, default_value = "all")]
    structures: String,
    /// Smallest number of components.
    #[arg(long = "g-min", default_value_t = 1)]
    g_min: usize,
    /// Largest number of components.
    #[arg(long = "g-max", default_value_t = 3)]
    g_max: usize,
    #[command(flatten)]
    common: CommonFitArgs,
}

#[derive(Args)]
struct ReplicateArgs {
    /// Which experiment to run.
    #[arg(value_enum)]
    experiment: Experiment,
    /// Dataset CSV (required for crabs and wine).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Number of seeds for the synthetic experiment.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[command(flatten)]
    common: CommonFitArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    /// Two rotated ellipses plus uniform box noise, over several seeds.
    SyntheticNoise,
    /// Single-cell perturbation study on the blue crabs data (columns RW,
    /// CL, sex).
    Crabs,
    /// Full sweep on the wine data (13 features plus a cultivar label).
    Wine,
}

fn parse_structures(spec: &str) -> Result<Vec<StructureId>, CliError> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(StructureId::ALL.to_vec());
    }
    spec.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.parse::<StructureId>()
                .map_err(|e| CliError::Usage(e.to_string()))
        })
        .collect()
}

fn write_report(report: &Report, output: Option<&PathBuf>) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Fit(format!("report serialization failed: {e}")))?;
    match output {
        Some(path) => std::fs::write(path, json.as_bytes())
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn write_plot(
    points: &[(f64, f64)],
    observations: &[report::ObservationReport],
    path: &PathBuf,
) -> Result<(), CliError> {
    let labels: Vec<pmcgd::classify::ObservationLabel> = observations
        .iter()
        .map(|o| pmcgd::classify::ObservationLabel {
            row_id: o.row_id,
            cluster: o.cluster,
            is_bad: o.is_bad,
            z_max: o.z_max,
            v_at_map: o.v_at_map,
        })
        .collect();
    let svg = svg::render_scatter(points, &labels);
    std::fs::write(path, svg.as_bytes())
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn run_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let cfg = args.common.fit_config()?;
    let structures = parse_structures(&args.structures)?;
    if args.g_min == 0 || args.g_max < args.g_min {
        return Err(CliError::Usage(format!(
            "invalid component range {}..={}",
            args.g_min, args.g_max
        )));
    }
    let ingest = ingest::ingest_csv(
        &args.input,
        args.columns.as_deref(),
        args.label_column.as_deref(),
    )?;
    eprintln!(
        "loaded {} rows x {} features ({})",
        ingest.data.n_rows(),
        ingest.data.n_cols(),
        ingest.feature_names.join(", ")
    );
    let grid = SweepGrid::new(
        structures,
        (args.g_min..=args.g_max).collect(),
        cfg.clone(),
    )
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let ranked = sweep(&ingest.data, &grid).map_err(from_fit_error)?;
    let labels = label_observations(
        ingest.data.row_ids(),
        &ranked.best().result.posteriors,
        args.common.bad_threshold,
    )
    .map_err(from_fit_error)?;
    let truth = ingest
        .truth
        .as_ref()
        .map(|(classes, ids)| (classes.as_slice(), ids.as_slice()));
    let report = report::build_report(cfg.seed, &ranked, &labels, truth).map_err(from_fit_error)?;
    eprintln!(
        "best model: {} G={} (BIC {:.1}), {} fits ranked, {} failed",
        report.best.structure,
        report.best.g,
        report.best.bic,
        report.ranking.len(),
        report.failures.len()
    );
    if let Some(plot_path) = &args.common.plot {
        if ingest.data.n_cols() != 2 {
            return Err(CliError::Usage(format!(
                "--plot needs exactly 2 feature columns, found {}",
                ingest.data.n_cols()
            )));
        }
        let points: Vec<(f64, f64)> = (0..ingest.data.n_rows())
            .map(|i| (ingest.data.values()[(i, 0)], ingest.data.values()[(i, 1)]))
            .collect();
        write_plot(&points, &report.observations, plot_path)?;
    }
    write_report(&report, args.common.output.as_ref())
}

fn run_replicate(args: &ReplicateArgs) -> Result<(), CliError> {
    let cfg = args.common.fit_config()?;
    let need_input = || {
        args.input.clone().ok_or_else(|| {
            CliError::Usage("--input is required for this experiment".into())
        })
    };
    let (report, points) = match args.experiment {
        Experiment::SyntheticNoise => {
            let (report, points) = replicate::synthetic_noise(&cfg, args.seeds)?;
            (report, Some(points))
        }
        Experiment::Crabs => (replicate::crabs(&need_input()?, &cfg)?, None),
        Experiment::Wine => (replicate::wine(&need_input()?, &cfg)?, None),
    };
    if let Some(summary) = &report.replication {
        eprintln!("{}", replicate::summary_line(summary));
    }
    if let Some(plot_path) = &args.common.plot {
        match points {
            Some(points) => write_plot(&points, &report.observations, plot_path)?,
            None => {
                return Err(CliError::Usage(
                    "--plot is only available for the synthetic-noise experiment".into(),
                ))
            }
        }
    }
    write_report(&report, args.common.output.as_ref())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) =>
        {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    let outcome = match &cli.command {
        Command::Sweep(args) => run_sweep(args),
        Command::Replicate(args) => run_replicate(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
