//! Full experiment orchestration: geometry, per-antenna-count training,
//! Monte-Carlo sweeps over shadowing variance for both predictors, and
//! metric aggregation.
//!
//! One placement (at the configured RRH count) serves every antenna count in
//! the sweep: the M-antenna system uses the first M RRHs, so curves over M
//! differ only in antenna count, never in geometry. Training is noise-free
//! and therefore independent of the shadowing variance; each (M, axis) model
//! is trained once and reused across the whole sweep and by both predictors.
//! Every random stream is keyed by purpose and indices, so trials can run in
//! parallel without changing a single output byte.

use rayon::prelude::*;

use gp_locate::error::{Error, Result};
use gp_locate::metrics::{bcrlb_rmse, coverage_2sigma, lpd, rmse, MetricsReport};
use gp_locate::predict::{
    cgp_predict, nagp_predict, two_sigma_bars, Method, PredictiveDistribution, TestNoiseModel,
};
use gp_locate::rng::{derive_seed, StreamKind};
use gp_locate::scenario::{
    apply_sensitivity_threshold, generate_rss, place_rrh_and_users, Location2D, RssMatrix,
};
use gp_locate::train::{train, AxisTag, TrainedModel};
use gp_locate::ScenarioConfig;

/// Default number of random training restarts per (M, axis) model.
pub const DEFAULT_RESTARTS: usize = 5;

/// What to sweep: antenna counts, predictors, and training restarts.
#[derive(Debug, Clone)]
pub struct SweepPlan {
    /// Antenna counts, each at most `config.num_rrh`; the M-antenna system
    /// uses the first M placed RRHs.
    pub m_values: Vec<usize>,
    pub methods: Vec<Method>,
    pub restarts: usize,
}

impl SweepPlan {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        SweepPlan {
            m_values: vec![config.num_rrh],
            methods: vec![Method::Cgp, Method::Nagp],
            restarts: DEFAULT_RESTARTS,
        }
    }

    pub fn validate(&self, config: &ScenarioConfig) -> Result<()> {
        if self.m_values.is_empty() {
            return Err(Error::config("at least one antenna count is required"));
        }
        for &m in &self.m_values {
            if m == 0 || m > config.num_rrh {
                return Err(Error::config(format!(
                    "antenna count {m} outside 1..={} (num_rrh)",
                    config.num_rrh
                )));
            }
        }
        let mut sorted = self.m_values.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.m_values.len() {
            return Err(Error::config("antenna counts must be unique"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("at least one method is required"));
        }
        if self.restarts == 0 {
            return Err(Error::config("restarts must be >= 1"));
        }
        Ok(())
    }
}

/// Per-trial mean 2-sigma bar widths, kept alongside the metric rows for
/// the error-bar plots (not part of the detail CSV schema).
#[derive(Debug, Clone)]
pub struct TrialBars {
    pub method: Method,
    pub m: usize,
    pub sigma_z_sq: f64,
    pub trial: usize,
    pub mean_bar2_x: f64,
    pub mean_bar2_y: f64,
}

/// Mean and standard error over trials for one (method, M, sigma_z^2) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub method: Method,
    pub m: usize,
    pub sigma_z_sq: f64,
    pub n_trials: usize,
    pub rmse_m_mean: f64,
    pub rmse_m_se: f64,
    pub lpd_mean: f64,
    pub lpd_se: f64,
    pub coverage_2sigma_mean: f64,
    pub coverage_2sigma_se: f64,
    pub bcrlb_m_mean: f64,
    pub bcrlb_m_se: f64,
}

/// All rows of one experiment run plus the aggregates recomputable from
/// them.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<MetricsReport>,
    pub bars: Vec<TrialBars>,
    pub aggregates: Vec<AggregateRow>,
}

fn method_rank(m: Method) -> u8 {
    match m {
        Method::Cgp => 0,
        Method::Nagp => 1,
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean +- standard error per (method, M, sigma_z^2) cell, in canonical row
/// order. Pure function of the detail rows.
pub fn aggregate_rows(rows: &[MetricsReport]) -> Vec<AggregateRow> {
    let mut sorted: Vec<&MetricsReport> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        method_rank(a.method)
            .cmp(&method_rank(b.method))
            .then(a.m.cmp(&b.m))
            .then(a.sigma_z_sq.total_cmp(&b.sigma_z_sq))
            .then(a.trial.cmp(&b.trial))
    });
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let key = (sorted[i].method, sorted[i].m, sorted[i].sigma_z_sq);
        let mut j = i;
        while j < sorted.len() && (sorted[j].method, sorted[j].m, sorted[j].sigma_z_sq) == key {
            j += 1;
        }
        let cell = &sorted[i..j];
        let (rmse_m_mean, rmse_m_se) =
            mean_and_se(&cell.iter().map(|r| r.rmse_m).collect::<Vec<_>>());
        let (lpd_mean, lpd_se) = mean_and_se(&cell.iter().map(|r| r.lpd).collect::<Vec<_>>());
        let (coverage_2sigma_mean, coverage_2sigma_se) =
            mean_and_se(&cell.iter().map(|r| r.coverage_2sigma).collect::<Vec<_>>());
        let (bcrlb_m_mean, bcrlb_m_se) =
            mean_and_se(&cell.iter().map(|r| r.bcrlb_m).collect::<Vec<_>>());
        out.push(AggregateRow {
            method: key.0,
            m: key.1,
            sigma_z_sq: key.2,
            n_trials: cell.len(),
            rmse_m_mean,
            rmse_m_se,
            lpd_mean,
            lpd_se,
            coverage_2sigma_mean,
            coverage_2sigma_se,
            bcrlb_m_mean,
            bcrlb_m_se,
        });
        i = j;
    }
    out
}

/// Trained models and scenario geometry for one antenna count.
pub struct TrainedScenario {
    pub rrh: Vec<Location2D>,
    pub train_locs: Vec<Location2D>,
    pub test_locs: Vec<Location2D>,
    pub train_rss: RssMatrix,
    pub model_x: TrainedModel,
    pub model_y: TrainedModel,
}

/// Place geometry, build the noise-free training matrix for the first `m`
/// antennas, and train both axis models.
pub fn train_scenario(
    config: &ScenarioConfig,
    m: usize,
    restarts: usize,
) -> Result<TrainedScenario> {
    let (rrh, train_locs, test_locs) = place_rrh_and_users(config, config.master_seed)?;
    let train_rss_full = generate_rss(&train_locs, &rrh, 0.0, config, config.master_seed)?;
    let train_rss = train_rss_full.take_antennas(m)?;
    let labels_x: Vec<f64> = train_locs.iter().map(|p| p.x).collect();
    let labels_y: Vec<f64> = train_locs.iter().map(|p| p.y).collect();
    let seed_x = derive_seed(config.master_seed, StreamKind::TrainRun, m as u64, 0);
    let seed_y = derive_seed(config.master_seed, StreamKind::TrainRun, m as u64, 1);
    let (model_x, model_y) = rayon::join(
        || {
            train(
                &train_rss,
                &labels_x,
                config.coord_noise_var,
                restarts,
                seed_x,
                AxisTag::X,
            )
        },
        || {
            train(
                &train_rss,
                &labels_y,
                config.coord_noise_var,
                restarts,
                seed_y,
                AxisTag::Y,
            )
        },
    );
    Ok(TrainedScenario {
        rrh,
        train_locs,
        test_locs,
        train_rss,
        model_x: model_x?,
        model_y: model_y?,
    })
}

struct TrialOutput {
    rows: Vec<MetricsReport>,
    bars: Vec<TrialBars>,
}

fn with_cell_context<T>(r: Result<T>, m: usize, sigma: f64, trial: usize) -> Result<T> {
    r.map_err(|e| match e {
        Error::Numerical {
            reason,
            jitter_attempted,
        } => Error::Numerical {
            reason: format!("(M={m}, sigma_z2={sigma}, trial={trial}) {reason}"),
            jitter_attempted,
        },
        Error::Config(msg) => {
            Error::Config(format!("(M={m}, sigma_z2={sigma}, trial={trial}) {msg}"))
        }
        Error::Domain(msg) => {
            Error::Domain(format!("(M={m}, sigma_z2={sigma}, trial={trial}) {msg}"))
        }
        other => other,
    })
}

fn mean_bars(pred: &PredictiveDistribution) -> (f64, f64) {
    let bars = two_sigma_bars(pred);
    let n = bars.len() as f64;
    (
        bars.iter().map(|b| b.0).sum::<f64>() / n,
        bars.iter().map(|b| b.1).sum::<f64>() / n,
    )
}

fn run_trial(
    config: &ScenarioConfig,
    plan: &SweepPlan,
    scenario: &TrainedScenario,
    m: usize,
    sigma_idx: usize,
    trial: usize,
) -> Result<TrialOutput> {
    let sigma = config.shadowing_variances[sigma_idx];
    let shadow_seed = derive_seed(
        config.master_seed,
        StreamKind::TrialShadow,
        sigma_idx as u64,
        trial as u64,
    );
    // Shadowing is drawn once over the full placement and sliced, so every
    // antenna count sees the same noise realization.
    let shadowed_full = generate_rss(
        &scenario.test_locs,
        &scenario.rrh,
        sigma,
        config,
        shadow_seed,
    )?;
    let test_rss = apply_sensitivity_threshold(&shadowed_full.take_antennas(m)?, config);

    // NaGP always runs: its variances supply the RMSE lower bound shared by
    // both methods' rows.
    let pred_seed = derive_seed(
        config.master_seed,
        StreamKind::TrialPredict,
        sigma_idx as u64,
        trial as u64,
    );
    let noise = TestNoiseModel::uniform(sigma, scenario.test_locs.len(), m)?;
    let nagp = nagp_predict(
        &scenario.model_x,
        &scenario.model_y,
        &test_rss,
        &noise,
        config.mc_samples,
        pred_seed,
    )?;
    let bcrlb_m = bcrlb_rmse(&nagp)?;

    let mut rows = Vec::new();
    let mut bars = Vec::new();
    for &method in &plan.methods {
        let pred = match method {
            Method::Cgp => cgp_predict(&scenario.model_x, &scenario.model_y, &test_rss)?,
            Method::Nagp => nagp.clone(),
        };
        rows.push(MetricsReport {
            method,
            m,
            sigma_z_sq: sigma,
            trial,
            rmse_m: rmse(&scenario.test_locs, &pred)?,
            lpd: lpd(&scenario.test_locs, &pred)?,
            coverage_2sigma: coverage_2sigma(&scenario.test_locs, &pred)?,
            bcrlb_m,
            seed: shadow_seed,
        });
        let (bx, by) = mean_bars(&pred);
        bars.push(TrialBars {
            method,
            m,
            sigma_z_sq: sigma,
            trial,
            mean_bar2_x: bx,
            mean_bar2_y: by,
        });
    }
    Ok(TrialOutput { rows, bars })
}

/// Run the whole sweep: for each antenna count, train both axis models once,
/// then for each shadowing variance and trial generate shadowed,
/// sensitivity-thresholded test RSS and evaluate every requested method.
/// Fully deterministic from `config.master_seed`.
pub fn run_experiment(config: &ScenarioConfig, plan: &SweepPlan) -> Result<SweepResult> {
    config.validate()?;
    plan.validate(config)?;

    let mut rows = Vec::new();
    let mut bars = Vec::new();
    for &m in &plan.m_values {
        let scenario = train_scenario(config, m, plan.restarts)?;
        let cells: Vec<(usize, usize)> = (0..config.shadowing_variances.len())
            .flat_map(|si| (0..config.mc_trials).map(move |t| (si, t)))
            .collect();
        let outputs: Vec<Result<TrialOutput>> = cells
            .par_iter()
            .map(|&(si, t)| {
                with_cell_context(
                    run_trial(config, plan, &scenario, m, si, t),
                    m,
                    config.shadowing_variances[si],
                    t,
                )
            })
            .collect();
        for out in outputs {
            let out = out?;
            rows.extend(out.rows);
            bars.extend(out.bars);
        }
    }

    let sort_key =
        |method: Method, m: usize, s: f64, t: usize| (method_rank(method), m, s.to_bits(), t);
    rows.sort_by(|a, b| {
        sort_key(a.method, a.m, a.sigma_z_sq, a.trial).cmp(&sort_key(
            b.method,
            b.m,
            b.sigma_z_sq,
            b.trial,
        ))
    });
    bars.sort_by(|a, b| {
        sort_key(a.method, a.m, a.sigma_z_sq, a.trial).cmp(&sort_key(
            b.method,
            b.m,
            b.sigma_z_sq,
            b.trial,
        ))
    });
    let aggregates = aggregate_rows(&rows);
    Ok(SweepResult {
        rows,
        bars,
        aggregates,
    })
}
