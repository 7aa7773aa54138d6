//! Location predictors: conventional GP conditioning (CGP) and the
//! noisy-input Monte-Carlo moment-matching predictor (NaGP).
//!
//! CGP treats the observed test RSS vectors as exact. NaGP draws S samples
//! around each observed vector from the shadowing distribution, pushes each
//! sample through the CGP equations, and matches the first two moments of
//! the resulting equal-weight Gaussian mixture: the reported mean is the
//! average of the per-sample means, and the reported variance is the spread
//! of the per-sample means (1/S normalization) plus the average per-sample
//! variance.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{covariance, kernel_matrix};
use crate::rng::{stream, StreamKind};
use crate::scenario::{Location2D, RssMatrix};
use crate::train::{AxisTag, TrainedModel};

/// Negative predictive variances caused by floating-point cancellation are
/// clamped to zero down to this bound; anything lower is a numerical error.
const NEGATIVE_VARIANCE_TOL: f64 = -1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Cgp,
    Nagp,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Cgp => write!(f, "CGP"),
            Method::Nagp => write!(f, "NaGP"),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cgp" => Ok(Method::Cgp),
            "nagp" => Ok(Method::Nagp),
            other => Err(Error::config(format!(
                "unknown method {other:?} (expected cgp or nagp)"
            ))),
        }
    }
}

/// Per-user record of the S per-sample CGP means and variances, retained by
/// NaGP for audit.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleLedger {
    pub means_x: Vec<f64>,
    pub vars_x: Vec<f64>,
    pub means_y: Vec<f64>,
    pub vars_y: Vec<f64>,
}

/// Per-test-user Gaussian marginals for both coordinate axes.
#[derive(Debug, Clone)]
pub struct PredictiveDistribution {
    pub means_x: Vec<f64>,
    pub means_y: Vec<f64>,
    pub vars_x: Vec<f64>,
    pub vars_y: Vec<f64>,
    pub method: Method,
    /// NaGP only: per-user sample ledger.
    pub ledger: Option<Vec<SampleLedger>>,
    /// NaGP only: sample count S.
    pub num_samples: Option<usize>,
    /// NaGP only: sampling seed.
    pub seed: Option<u64>,
    /// Number of small negative variances clamped to zero.
    pub clamped_negatives: usize,
}

impl PredictiveDistribution {
    pub fn num_users(&self) -> usize {
        self.means_x.len()
    }
}

/// Per-user diagonal covariance of the test-input noise, one non-negative
/// dB^2 entry per antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct TestNoiseModel {
    per_user: Vec<Vec<f64>>,
}

impl TestNoiseModel {
    /// Every user and antenna gets the same variance (the scenario
    /// shadowing variance, assumed known at the central unit).
    pub fn uniform(sigma_z_sq: f64, num_users: usize, num_antennas: usize) -> Result<Self> {
        if sigma_z_sq.is_nan() || sigma_z_sq < 0.0 {
            return Err(Error::domain("noise variance must be >= 0"));
        }
        Ok(TestNoiseModel {
            per_user: vec![vec![sigma_z_sq; num_antennas]; num_users],
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if !rows.iter().flatten().all(|v| *v >= 0.0) {
            return Err(Error::domain("noise variances must all be >= 0"));
        }
        Ok(TestNoiseModel { per_user: rows })
    }

    pub fn row(&self, user: usize) -> &[f64] {
        &self.per_user[user]
    }

    pub fn num_users(&self) -> usize {
        self.per_user.len()
    }
}

fn check_models(mx: &TrainedModel, my: &TrainedModel, test: &RssMatrix) -> Result<()> {
    if mx.axis != AxisTag::X || my.axis != AxisTag::Y {
        return Err(Error::contract(
            "predictors take the x-axis model first and the y-axis model second",
        ));
    }
    if mx.train_inputs != my.train_inputs {
        return Err(Error::contract(
            "the x and y models must share the same training inputs",
        ));
    }
    if test.num_antennas() != mx.num_antennas() {
        return Err(Error::domain(format!(
            "test RSS has {} antennas, models were trained with {}",
            test.num_antennas(),
            mx.num_antennas()
        )));
    }
    Ok(())
}

/// CGP marginals for every row of `rows` under one axis model: mean is the
/// cross-kernel row against the training weights, variance is the self
/// covariance (including the measurement-error term) minus the quadratic
/// form through the training-kernel factorization.
fn predict_axis(model: &TrainedModel, rows: &RssMatrix) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let k = kernel_matrix(rows, &model.train_inputs, &model.hyper, false)?;
    let means_v = &k * model.weights();
    let v = model.solve(&k.transpose());
    let n = rows.num_users();
    let mut means = Vec::with_capacity(n);
    let mut vars = Vec::with_capacity(n);
    let mut clamped = 0;
    for l in 0..n {
        let row = rows.row(l);
        let prior = covariance(row, row, &model.hyper, true)?;
        let quad = k.row(l).transpose().dot(&v.column(l));
        let mut var = prior - quad;
        if var < 0.0 {
            if var >= NEGATIVE_VARIANCE_TOL {
                var = 0.0;
                clamped += 1;
            } else {
                return Err(Error::numerical(
                    format!("predictive variance {var} below cancellation tolerance"),
                    None,
                ));
            }
        }
        means.push(means_v[l]);
        vars.push(var);
    }
    Ok((means, vars, clamped))
}

/// Conventional GP prediction: condition on the observed test RSS as if it
/// were noise-free.
pub fn cgp_predict(
    model_x: &TrainedModel,
    model_y: &TrainedModel,
    test_rss: &RssMatrix,
) -> Result<PredictiveDistribution> {
    check_models(model_x, model_y, test_rss)?;
    let (means_x, vars_x, cx) = predict_axis(model_x, test_rss)?;
    let (means_y, vars_y, cy) = predict_axis(model_y, test_rss)?;
    Ok(PredictiveDistribution {
        means_x,
        means_y,
        vars_x,
        vars_y,
        method: Method::Cgp,
        ledger: None,
        num_samples: None,
        seed: None,
        clamped_negatives: cx + cy,
    })
}

/// Noisy-input prediction by Monte-Carlo moment matching. Samples are drawn
/// centered at the observed noisy vectors, per-user streams are derived from
/// `(seed, user index)`, and the per-sample CGP evaluations share the exact
/// code path of [`cgp_predict`].
pub fn nagp_predict(
    model_x: &TrainedModel,
    model_y: &TrainedModel,
    test_rss: &RssMatrix,
    noise: &TestNoiseModel,
    num_samples: usize,
    seed: u64,
) -> Result<PredictiveDistribution> {
    check_models(model_x, model_y, test_rss)?;
    if num_samples == 0 {
        return Err(Error::domain("NaGP requires at least one sample"));
    }
    let n = test_rss.num_users();
    let m = test_rss.num_antennas();
    if noise.num_users() != n {
        return Err(Error::domain(format!(
            "noise model covers {} users, test RSS has {n}",
            noise.num_users()
        )));
    }
    if noise.per_user.iter().any(|r| r.len() != m) {
        return Err(Error::domain(format!(
            "noise model rows must have {m} antennas"
        )));
    }

    // All samples of all users in one matrix: user-major, sample-minor.
    let mut sample_data = Vec::with_capacity(n * num_samples * m);
    for l in 0..n {
        let observed = test_rss.row(l);
        let sigmas: Vec<f64> = noise.row(l).iter().map(|v| v.sqrt()).collect();
        let mut rng = stream(seed, StreamKind::NagpUser, l as u64, 0);
        for _ in 0..num_samples {
            for (p, sig) in observed.iter().zip(&sigmas) {
                let e = if *sig > 0.0 {
                    sig * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                sample_data.push(p + e);
            }
        }
    }
    let samples = RssMatrix::from_vec(n * num_samples, m, sample_data)?;

    let (sm_x, sv_x, cx) = predict_axis(model_x, &samples)?;
    let (sm_y, sv_y, cy) = predict_axis(model_y, &samples)?;

    let s_f = num_samples as f64;
    let mut means_x = Vec::with_capacity(n);
    let mut means_y = Vec::with_capacity(n);
    let mut vars_x = Vec::with_capacity(n);
    let mut vars_y = Vec::with_capacity(n);
    let mut ledger = Vec::with_capacity(n);
    for l in 0..n {
        let range = l * num_samples..(l + 1) * num_samples;
        let lx = &sm_x[range.clone()];
        let ly = &sm_y[range.clone()];
        let vx = &sv_x[range.clone()];
        let vy = &sv_y[range.clone()];

        let mean_x = lx.iter().sum::<f64>() / s_f;
        let mean_y = ly.iter().sum::<f64>() / s_f;
        let spread_x = lx.iter().map(|v| (v - mean_x) * (v - mean_x)).sum::<f64>() / s_f;
        let spread_y = ly.iter().map(|v| (v - mean_y) * (v - mean_y)).sum::<f64>() / s_f;
        let avg_var_x = vx.iter().sum::<f64>() / s_f;
        let avg_var_y = vy.iter().sum::<f64>() / s_f;

        means_x.push(mean_x);
        means_y.push(mean_y);
        vars_x.push(spread_x + avg_var_x);
        vars_y.push(spread_y + avg_var_y);
        ledger.push(SampleLedger {
            means_x: lx.to_vec(),
            vars_x: vx.to_vec(),
            means_y: ly.to_vec(),
            vars_y: vy.to_vec(),
        });
    }

    Ok(PredictiveDistribution {
        means_x,
        means_y,
        vars_x,
        vars_y,
        method: Method::Nagp,
        ledger: Some(ledger),
        num_samples: Some(num_samples),
        seed: Some(seed),
        clamped_negatives: cx + cy,
    })
}

/// Per-user half-widths of the 2-sigma confidence intervals, (2 sqrt(var_x),
/// 2 sqrt(var_y)).
pub fn two_sigma_bars(pred: &PredictiveDistribution) -> Vec<(f64, f64)> {
    pred.vars_x
        .iter()
        .zip(&pred.vars_y)
        .map(|(vx, vy)| (2.0 * vx.sqrt(), 2.0 * vy.sqrt()))
        .collect()
}

/// Export predictions as CSV. Truth columns are left empty when unknown.
pub fn write_predictions_csv(
    pred: &PredictiveDistribution,
    truth: Option<&[Location2D]>,
    path: impl AsRef<Path>,
) -> Result<()> {
    if let Some(t) = truth {
        if t.len() != pred.num_users() {
            return Err(Error::domain(format!(
                "{} truth locations for {} predictions",
                t.len(),
                pred.num_users()
            )));
        }
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        out,
        "user_id,true_x,true_y,mean_x,mean_y,var_x,var_y,bar2_x,bar2_y,method,S,seed"
    )?;
    let bars = two_sigma_bars(pred);
    for l in 0..pred.num_users() {
        let (tx, ty) = match truth {
            Some(t) => (t[l].x.to_string(), t[l].y.to_string()),
            None => (String::new(), String::new()),
        };
        let s = pred.num_samples.map(|v| v.to_string()).unwrap_or_default();
        let seed = pred.seed.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{l},{tx},{ty},{},{},{},{},{},{},{},{s},{seed}",
            pred.means_x[l],
            pred.means_y[l],
            pred.vars_x[l],
            pred.vars_y[l],
            bars[l].0,
            bars[l].1,
            pred.method,
        )?;
    }
    out.flush()?;
    Ok(())
}
