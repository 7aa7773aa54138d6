//! Batch CLI for GP-based RSS positioning experiments.
//!
//! Subcommands: `simulate` (emit RSS matrices), `train` (emit serialized
//! models), `predict` (models + test RSS -> predictions CSV), `sweep` (the
//! full Monte-Carlo experiment), `report` (re-aggregate and re-plot from an
//! existing detail.csv). Exit codes: 0 success, 1 configuration error, 2
//! numerical error, 3 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use gp_locate::error::Error;
use gp_locate::predict::{
    cgp_predict, nagp_predict, write_predictions_csv, Method, TestNoiseModel,
};
use gp_locate::rng::{derive_seed, StreamKind};
use gp_locate::scenario::{
    apply_sensitivity_threshold, generate_rss, place_rrh_and_users, read_locations_csv,
    write_locations_csv, RssMatrix,
};
use gp_locate::train::TrainedModel;
use gp_locate::ScenarioConfig;

use gp_locate_cli::experiment::{run_experiment, train_scenario, SweepPlan, DEFAULT_RESTARTS};
use gp_locate_cli::report::{emit_report, report_from_detail};

#[derive(Parser)]
#[command(
    name = "gp-locate",
    version,
    about = "GP positioning from uplink RSS: simulate, train, predict, sweep, report"
)]
struct Cli {
    /// Scenario configuration file (JSON); defaults to the bundled
    /// urban-micro desk scenario.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configuration's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Predictors to run (comma separated: cgp,nagp).
    #[arg(long, global = true, value_delimiter = ',', default_value = "cgp,nagp")]
    methods: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write placements, the noise-free training RSS matrix, and one
    /// shadowed, thresholded test RSS matrix per configured variance.
    Simulate,
    /// Train the x- and y-axis models and serialize them.
    Train {
        /// Random restarts per axis.
        #[arg(long, default_value_t = DEFAULT_RESTARTS)]
        restarts: usize,
    },
    /// Predict test-user locations from a test RSS CSV using trained models.
    Predict {
        /// Directory containing model_x.json and model_y.json.
        #[arg(long)]
        models: PathBuf,
        /// Test RSS matrix CSV (header row of antenna indices).
        #[arg(long)]
        test_rss: PathBuf,
        /// Optional true locations CSV (x,y header) for the truth columns.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Test-input noise variance for the noisy-input predictor;
        /// defaults to the first configured shadowing variance.
        #[arg(long)]
        sigma_z2: Option<f64>,
        /// Monte-Carlo samples per user; defaults to the configured count.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Run the full experiment and emit detail/aggregate CSVs and plots.
    Sweep {
        /// Antenna counts to sweep (comma separated); defaults to the
        /// configured num_rrh. Each count uses the first M placed RRHs.
        #[arg(long, value_delimiter = ',')]
        m_values: Option<Vec<usize>>,
        /// Random restarts per (M, axis) training run.
        #[arg(long, default_value_t = DEFAULT_RESTARTS)]
        restarts: usize,
    },
    /// Re-aggregate and re-plot from an existing detail.csv.
    Report {
        /// Path to a detail.csv produced by `sweep`.
        #[arg(long)]
        detail: PathBuf,
    },
}

fn init_thread_pool() {
    if let Ok(raw) = std::env::var("GP_LOCATE_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

fn exit_code_for(e: &Error) -> ExitCode {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Contract(_) | Error::Parse(_) => {
            ExitCode::from(1)
        }
        Error::Numerical { .. } => ExitCode::from(2),
        Error::Io(_) => ExitCode::from(3),
    }
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig, Error> {
    let mut config = match &cli.config {
        Some(path) => {
            if !path.exists() {
                return Err(Error::config(format!(
                    "configuration file {} does not exist",
                    path.display()
                )));
            }
            ScenarioConfig::from_json_file(path)?
        }
        None => ScenarioConfig::urban_micro_desk(),
    };
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn parse_methods(raw: &[String]) -> Result<Vec<Method>, Error> {
    let mut methods = Vec::new();
    for item in raw {
        let m: Method = item.parse()?;
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    if methods.is_empty() {
        return Err(Error::config("at least one method is required"));
    }
    methods.sort_by_key(|m| *m == Method::Nagp);
    Ok(methods)
}

fn cmd_simulate(config: &ScenarioConfig, out: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(out)?;
    let (rrh, train_locs, test_locs) = place_rrh_and_users(config, config.master_seed)?;
    write_locations_csv(&rrh, out.join("rrh.csv"))?;
    write_locations_csv(&train_locs, out.join("train_locations.csv"))?;
    write_locations_csv(&test_locs, out.join("test_locations.csv"))?;
    let train_rss = generate_rss(&train_locs, &rrh, 0.0, config, config.master_seed)?;
    train_rss.write_csv(out.join("train_rss.csv"))?;
    for (si, &sigma) in config.shadowing_variances.iter().enumerate() {
        let seed = derive_seed(config.master_seed, StreamKind::TrialShadow, si as u64, 0);
        let shadowed = generate_rss(&test_locs, &rrh, sigma, config, seed)?;
        let thresholded = apply_sensitivity_threshold(&shadowed, config);
        thresholded.write_csv(out.join(format!("test_rss_sz{sigma}.csv")))?;
    }
    println!(
        "wrote placements, train_rss.csv, and {} test matrices to {}",
        config.shadowing_variances.len(),
        out.display()
    );
    Ok(())
}

fn cmd_train(config: &ScenarioConfig, out: &Path, restarts: usize) -> Result<(), Error> {
    std::fs::create_dir_all(out)?;
    let scenario = train_scenario(config, config.num_rrh, restarts)?;
    let path_x = out.join("model_x.json");
    let path_y = out.join("model_y.json");
    scenario.model_x.save_json(&path_x)?;
    scenario.model_y.save_json(&path_y)?;
    for (axis, model) in [("x", &scenario.model_x), ("y", &scenario.model_y)] {
        println!(
            "{axis}: lml={:.3} iterations={} converged={} jitter={:.3e}",
            model.final_lml, model.optim.iterations, model.optim.converged, model.jitter
        );
    }
    println!("wrote {} and {}", path_x.display(), path_y.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_predict(
    config: &ScenarioConfig,
    out: &Path,
    methods: &[Method],
    models: &Path,
    test_rss: &Path,
    truth: Option<&Path>,
    sigma_z2: Option<f64>,
    samples: Option<usize>,
) -> Result<(), Error> {
    let path_x = models.join("model_x.json");
    let path_y = models.join("model_y.json");
    for p in [&path_x, &path_y] {
        if !p.exists() {
            return Err(Error::config(format!(
                "trained model {} not found; run `gp-locate train --out {}` first",
                p.display(),
                models.display()
            )));
        }
    }
    if !test_rss.exists() {
        return Err(Error::config(format!(
            "test RSS file {} does not exist",
            test_rss.display()
        )));
    }
    let model_x = TrainedModel::load_json(&path_x)?;
    let model_y = TrainedModel::load_json(&path_y)?;
    let rss = RssMatrix::read_csv(test_rss)?;
    let truth_locs = truth.map(read_locations_csv).transpose()?;

    std::fs::create_dir_all(out)?;
    let sigma = sigma_z2.unwrap_or(config.shadowing_variances[0]);
    let s = samples.unwrap_or(config.mc_samples);
    for &method in methods {
        let pred = match method {
            Method::Cgp => cgp_predict(&model_x, &model_y, &rss)?,
            Method::Nagp => {
                let noise = TestNoiseModel::uniform(sigma, rss.num_users(), rss.num_antennas())?;
                let seed = derive_seed(config.master_seed, StreamKind::TrialPredict, 0, 0);
                nagp_predict(&model_x, &model_y, &rss, &noise, s, seed)?
            }
        };
        let name = match method {
            Method::Cgp => "predictions_cgp.csv",
            Method::Nagp => "predictions_nagp.csv",
        };
        let path = out.join(name);
        write_predictions_csv(&pred, truth_locs.as_deref(), &path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_sweep(
    config: &ScenarioConfig,
    out: &Path,
    methods: Vec<Method>,
    m_values: Option<Vec<usize>>,
    restarts: usize,
) -> Result<(), Error> {
    let plan = SweepPlan {
        m_values: m_values.unwrap_or_else(|| vec![config.num_rrh]),
        methods,
        restarts,
    };
    let result = run_experiment(config, &plan)?;
    let written = emit_report(&result, out)?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    println!(
        "{} detail rows, {} aggregate cells",
        result.rows.len(),
        result.aggregates.len()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    let config = load_config(&cli)?;
    let methods = parse_methods(&cli.methods)?;
    match cli.command {
        Command::Simulate => cmd_simulate(&config, &cli.out),
        Command::Train { restarts } => cmd_train(&config, &cli.out, restarts),
        Command::Predict {
            models,
            test_rss,
            truth,
            sigma_z2,
            samples,
        } => cmd_predict(
            &config,
            &cli.out,
            &methods,
            &models,
            &test_rss,
            truth.as_deref(),
            sigma_z2,
            samples,
        ),
        Command::Sweep { m_values, restarts } => {
            cmd_sweep(&config, &cli.out, methods, m_values, restarts)
        }
        Command::Report { detail } => {
            if !detail.exists() {
                return Err(Error::config(format!(
                    "detail file {} does not exist; run `gp-locate sweep` first",
                    detail.display()
                )));
            }
            report_from_detail(&detail, &cli.out).map(|written| {
                for path in &written {
                    println!("wrote {}", path.display());
                }
            })
        }
    }
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; anything else is a
            // usage error reported on the diagnostic stream.
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
