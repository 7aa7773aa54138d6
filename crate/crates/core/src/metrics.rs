//! Prediction-quality metrics: RMSE, log-predictive density, 2-sigma
//! coverage, and the Bayesian Cramer-Rao lower bound on RMSE.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predict::{Method, PredictiveDistribution};
use crate::scenario::Location2D;

/// One trial's metrics with the cell it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: Method,
    /// Number of RRH antennas used.
    pub m: usize,
    /// Shadowing variance of the test RSS, dB^2.
    pub sigma_z_sq: f64,
    pub trial: usize,
    pub rmse_m: f64,
    /// Nats per user.
    pub lpd: f64,
    /// Fraction of users whose true location falls inside the per-axis
    /// 2-sigma intervals on both axes.
    pub coverage_2sigma: f64,
    pub bcrlb_m: f64,
    /// Shadowing seed of the trial.
    pub seed: u64,
}

fn check_lengths(truth: &[Location2D], pred: &PredictiveDistribution) -> Result<()> {
    if truth.is_empty() {
        return Err(Error::domain("metrics require at least one test user"));
    }
    if truth.len() != pred.num_users() {
        return Err(Error::domain(format!(
            "{} truth locations for {} predictions",
            truth.len(),
            pred.num_users()
        )));
    }
    Ok(())
}

/// Root-mean-squared positioning error in meters: the per-user squared
/// errors on both axes averaged over users, under a square root.
pub fn rmse(truth: &[Location2D], pred: &PredictiveDistribution) -> Result<f64> {
    check_lengths(truth, pred)?;
    let sum: f64 = truth
        .iter()
        .enumerate()
        .map(|(l, t)| {
            let ex = t.x - pred.means_x[l];
            let ey = t.y - pred.means_y[l];
            ex * ex + ey * ey
        })
        .sum();
    Ok((sum / truth.len() as f64).sqrt())
}

/// Average log-density of the true locations under the per-user predictive
/// marginals, in nats per user. Penalizes overconfident variances.
pub fn lpd(truth: &[Location2D], pred: &PredictiveDistribution) -> Result<f64> {
    check_lengths(truth, pred)?;
    let n = truth.len() as f64;
    let mut acc = 0.0;
    for (l, t) in truth.iter().enumerate() {
        let (vx, vy) = (pred.vars_x[l], pred.vars_y[l]);
        if vx <= 0.0 || vy <= 0.0 {
            return Err(Error::domain(format!(
                "user {l} has a degenerate predictive variance (vx={vx}, vy={vy})"
            )));
        }
        let ex = t.x - pred.means_x[l];
        let ey = t.y - pred.means_y[l];
        acc += vx.ln() + vy.ln() + ex * ex / vx + ey * ey / vy;
    }
    Ok(-(2.0 * PI).ln() - acc / (2.0 * n))
}

/// Fraction of users whose true coordinates lie within the closed per-axis
/// intervals mean +- 2 sqrt(var) on both axes.
pub fn coverage_2sigma(truth: &[Location2D], pred: &PredictiveDistribution) -> Result<f64> {
    check_lengths(truth, pred)?;
    let inside = truth
        .iter()
        .enumerate()
        .filter(|(l, t)| {
            let bx = 2.0 * pred.vars_x[*l].sqrt();
            let by = 2.0 * pred.vars_y[*l].sqrt();
            (t.x - pred.means_x[*l]).abs() <= bx && (t.y - pred.means_y[*l]).abs() <= by
        })
        .count();
    Ok(inside as f64 / truth.len() as f64)
}

/// Bayesian Cramer-Rao lower bound on the achievable RMSE: the square root
/// of the averaged trace of the predictive covariances of both axes. Only
/// the noisy-input predictor's variances give a valid bound, so this
/// operation rejects CGP input; the same bound applies to both methods.
pub fn bcrlb_rmse(pred_nagp: &PredictiveDistribution) -> Result<f64> {
    if pred_nagp.method != Method::Nagp {
        return Err(Error::contract(
            "the RMSE lower bound must be computed from NaGP predictive variances; \
             CGP variances understate the input noise",
        ));
    }
    let n = pred_nagp.num_users();
    if n == 0 {
        return Err(Error::domain("bound requires at least one test user"));
    }
    let trace: f64 = pred_nagp.vars_x.iter().sum::<f64>() + pred_nagp.vars_y.iter().sum::<f64>();
    Ok((trace / n as f64).sqrt())
}
