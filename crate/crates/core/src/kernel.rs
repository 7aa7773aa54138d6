//! Composite covariance function over RSS vectors and kernel-matrix
//! construction.
//!
//! The covariance of two users' coordinates given their RSS vectors is a
//! weighted sum of a squared-exponential term with per-antenna length
//! scales, an inner-product term, and a label measurement-error term that
//! applies only on the diagonal of a same-set kernel matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::RssMatrix;

/// Kernel free parameters plus the known label measurement-error variance.
///
/// `alpha`, every `beta`, and `gamma` must be positive; positivity is kept
/// by optimizing their logarithms. `sigma_er_sq` is fixed, not optimized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Squared-exponential variance weight (label units squared).
    pub alpha: f64,
    /// Per-antenna length-scale parameters (dB^2), length M.
    pub beta: Vec<f64>,
    /// Inner-product weight (label units squared per dB^2).
    pub gamma: f64,
    /// Known label measurement-error variance (label units squared).
    pub sigma_er_sq: f64,
}

impl Hyperparameters {
    pub fn new(alpha: f64, beta: Vec<f64>, gamma: f64, sigma_er_sq: f64) -> Result<Self> {
        let h = Hyperparameters {
            alpha,
            beta,
            gamma,
            sigma_er_sq,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::domain("alpha must be positive and finite"));
        }
        if self.beta.is_empty() {
            return Err(Error::domain("beta must have one entry per antenna"));
        }
        if self.beta.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(Error::domain("every beta must be positive and finite"));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::domain("gamma must be positive and finite"));
        }
        if !(self.sigma_er_sq >= 0.0 && self.sigma_er_sq.is_finite()) {
            return Err(Error::domain("sigma_er_sq must be >= 0 and finite"));
        }
        Ok(())
    }

    pub fn num_antennas(&self) -> usize {
        self.beta.len()
    }

    /// Free parameters in log space, ordered [ln alpha, ln beta_1..M, ln gamma].
    pub fn to_log_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.beta.len() + 2);
        v.push(self.alpha.ln());
        v.extend(self.beta.iter().map(|b| b.ln()));
        v.push(self.gamma.ln());
        v
    }

    pub fn from_log_vec(log_params: &[f64], sigma_er_sq: f64) -> Result<Self> {
        if log_params.len() < 3 {
            return Err(Error::domain("need at least [alpha, beta_1, gamma]"));
        }
        let m = log_params.len() - 2;
        Hyperparameters::new(
            log_params[0].exp(),
            log_params[1..1 + m].iter().map(|v| v.exp()).collect(),
            log_params[1 + m].exp(),
            sigma_er_sq,
        )
    }
}

/// Covariance of two coordinate values given their RSS vectors.
///
/// `same_index` marks a diagonal entry of a same-set kernel matrix; only
/// there does the measurement-error term apply. Cross entries between
/// training and test sets never carry it.
pub fn covariance(p: &[f64], q: &[f64], h: &Hyperparameters, same_index: bool) -> Result<f64> {
    let m = h.num_antennas();
    if p.len() != m || q.len() != m {
        return Err(Error::domain(format!(
            "RSS vectors must have length {m}, got {} and {}",
            p.len(),
            q.len()
        )));
    }
    let mut quad = 0.0;
    let mut dot = 0.0;
    for i in 0..m {
        let d = p[i] - q[i];
        quad += d * d / h.beta[i];
        dot += p[i] * q[i];
    }
    let mut v = h.alpha * (-0.5 * quad).exp() + h.gamma * dot;
    if same_index {
        v += h.sigma_er_sq;
    }
    Ok(v)
}

/// Kernel matrix between two RSS sets: entry (i, j) is the covariance of
/// row i of `a` and row j of `b`, with the measurement-error term on the
/// diagonal when both rows come from the same set.
pub fn kernel_matrix(
    a: &RssMatrix,
    b: &RssMatrix,
    h: &Hyperparameters,
    same_set: bool,
) -> Result<DMatrix<f64>> {
    let m = h.num_antennas();
    if a.num_antennas() != m || b.num_antennas() != m {
        return Err(Error::domain(format!(
            "kernel inputs must have {m} columns, got {} and {}",
            a.num_antennas(),
            b.num_antennas()
        )));
    }
    let (na, nb) = (a.num_users(), b.num_users());
    let mut out = DMatrix::<f64>::zeros(na, nb);
    if same_set {
        if na != nb {
            return Err(Error::domain(
                "same-set kernel requires equal row counts".to_string(),
            ));
        }
        for i in 0..na {
            for j in 0..=i {
                let v = covariance(a.row(i), b.row(j), h, i == j)?;
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
    } else {
        for i in 0..na {
            let pi = a.row(i);
            for j in 0..nb {
                out[(i, j)] = covariance(pi, b.row(j), h, false)?;
            }
        }
    }
    Ok(out)
}
