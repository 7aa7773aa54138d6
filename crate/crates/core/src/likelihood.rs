//! Marginal likelihood of the training labels under the zero-mean GP prior,
//! with closed-form gradients in the kernel parameters.
//!
//! All factorizations go through an escalating-jitter Cholesky: the kernel
//! matrix is attempted as-is, then with a diagonal jitter starting at
//! 1e-8 * mean(diag) and escalating by 10x up to 1e-2 * mean(diag).

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::kernel::Hyperparameters;
use crate::scenario::RssMatrix;

const JITTER_START_REL: f64 = 1e-8;
const JITTER_MAX_REL: f64 = 1e-2;

/// Factor a symmetric positive-definite matrix, escalating diagonal jitter
/// on failure. Returns the factorization and the jitter that was applied.
pub(crate) fn cholesky_with_jitter(phi: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical(
            "kernel matrix has non-finite entries",
            None,
        ));
    }
    if let Some(ch) = phi.clone().cholesky() {
        return Ok((ch, 0.0));
    }
    let n = phi.nrows();
    let mean_diag = (0..n).map(|i| phi[(i, i)]).sum::<f64>() / n as f64;
    let mut rel = JITTER_START_REL;
    while rel <= JITTER_MAX_REL {
        let jitter = rel * mean_diag;
        let mut jittered = phi.clone();
        for i in 0..n {
            jittered[(i, i)] += jitter;
        }
        if let Some(ch) = jittered.cholesky() {
            return Ok((ch, jitter));
        }
        rel *= 10.0;
    }
    Err(Error::numerical(
        "Cholesky factorization failed after maximum jitter escalation",
        Some(JITTER_MAX_REL * mean_diag),
    ))
}

/// Training data with the parts of the kernel that do not depend on the
/// hyperparameters precomputed.
pub(crate) struct LmlProblem {
    pub rows: RssMatrix,
    pub labels: DVector<f64>,
    /// Inner-product Gram matrix P P^T of the training RSS rows.
    pub gram: DMatrix<f64>,
}

impl LmlProblem {
    pub fn new(inputs: &RssMatrix, labels: &[f64]) -> Result<Self> {
        let n = inputs.num_users();
        if labels.len() != n {
            return Err(Error::domain(format!(
                "expected {n} labels, got {}",
                labels.len()
            )));
        }
        if labels.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("labels must be finite"));
        }
        let mut gram = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let pi = inputs.row(i);
            for j in 0..=i {
                let dot: f64 = pi.iter().zip(inputs.row(j)).map(|(a, b)| a * b).sum();
                gram[(i, j)] = dot;
                gram[(j, i)] = dot;
            }
        }
        Ok(LmlProblem {
            rows: inputs.clone(),
            labels: DVector::from_column_slice(labels),
            gram,
        })
    }

    pub fn num_points(&self) -> usize {
        self.rows.num_users()
    }

    /// Training kernel matrix and its squared-exponential part (needed again
    /// by the gradient).
    pub fn build_phi(&self, h: &Hyperparameters) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let m = h.num_antennas();
        if self.rows.num_antennas() != m {
            return Err(Error::domain(format!(
                "hyperparameters describe {m} antennas, training data has {}",
                self.rows.num_antennas()
            )));
        }
        let n = self.num_points();
        let inv_beta: Vec<f64> = h.beta.iter().map(|b| 1.0 / b).collect();
        let mut se = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let pi = self.rows.row(i);
            for j in 0..=i {
                let pj = self.rows.row(j);
                let mut quad = 0.0;
                for ((a, b), ib) in pi.iter().zip(pj).zip(&inv_beta) {
                    let d = a - b;
                    quad += d * d * ib;
                }
                let v = h.alpha * (-0.5 * quad).exp();
                se[(i, j)] = v;
                se[(j, i)] = v;
            }
        }
        let mut phi = se.clone();
        phi.zip_apply(&self.gram, |p, g| *p += h.gamma * g);
        for i in 0..n {
            phi[(i, i)] += h.sigma_er_sq;
        }
        Ok((phi, se))
    }
}

/// Factorized state at one hyperparameter setting; everything the gradient
/// needs besides the problem itself.
pub(crate) struct LmlState {
    pub se: DMatrix<f64>,
    pub chol: Cholesky<f64, Dyn>,
    pub psi: DVector<f64>,
    pub jitter: f64,
    pub lml: f64,
}

pub(crate) fn evaluate(problem: &LmlProblem, h: &Hyperparameters) -> Result<LmlState> {
    let (phi, se) = problem.build_phi(h)?;
    let (chol, jitter) = cholesky_with_jitter(&phi)?;
    let psi = chol.solve(&problem.labels);
    let n = problem.num_points() as f64;
    let fit = problem.labels.dot(&psi);
    let log_det = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>();
    let lml = -0.5 * fit - 0.5 * log_det - 0.5 * n * (2.0 * PI).ln();
    Ok(LmlState {
        se,
        chol,
        psi,
        jitter,
        lml,
    })
}

/// Gradient of the log marginal likelihood in the linear parameters,
/// ordered [alpha, beta_1..M, gamma]. Uses the trace identity
/// dL/dtheta_j = 1/2 tr((psi psi^T - Phi^{-1}) dPhi/dtheta_j).
pub(crate) fn gradient_linear(
    problem: &LmlProblem,
    h: &Hyperparameters,
    state: &LmlState,
) -> Vec<f64> {
    let n = problem.num_points();
    let m = h.num_antennas();

    // W = psi psi^T - Phi^{-1}, then H = W .* SE reused for both the alpha
    // sum and the beta accumulations.
    let mut w = state.chol.inverse();
    {
        let psi = state.psi.as_slice();
        let ws = w.as_mut_slice();
        for j in 0..n {
            let pj = psi[j];
            for (wij, pi) in ws[j * n..(j + 1) * n].iter_mut().zip(psi) {
                *wij = pi * pj - *wij;
            }
        }
    }
    let mut sum_wg = 0.0;
    for (wv, gv) in w.iter().zip(problem.gram.iter()) {
        sum_wg += wv * gv;
    }
    // Turn W into H = W .* SE in place.
    for (wv, sv) in w.iter_mut().zip(state.se.iter()) {
        *wv *= sv;
    }
    let h_mat = w;
    let sum_we: f64 = h_mat.iter().sum();

    let mut beta_acc = vec![0.0_f64; m];
    let h_slice = h_mat.as_slice();
    for j in 0..n {
        let pj = problem.rows.row(j);
        let h_col = &h_slice[j * n..(j + 1) * n];
        for (off, hval) in h_col[j + 1..].iter().enumerate() {
            let hij = 2.0 * hval;
            let pi = problem.rows.row(j + 1 + off);
            for ((acc, a), b) in beta_acc.iter_mut().zip(pi).zip(pj) {
                let d = a - b;
                *acc += hij * d * d;
            }
        }
    }

    let mut grad = Vec::with_capacity(m + 2);
    grad.push(0.5 * sum_we / h.alpha);
    for (acc, b) in beta_acc.iter().zip(&h.beta) {
        grad.push(acc / (4.0 * b * b));
    }
    grad.push(0.5 * sum_wg);
    grad
}

/// Log marginal likelihood of `labels` under the GP prior with kernel
/// parameters `h`, computed through the jittered Cholesky factorization.
pub fn log_marginal_likelihood(
    h: &Hyperparameters,
    inputs: &RssMatrix,
    labels: &[f64],
) -> Result<f64> {
    h.validate()?;
    let problem = LmlProblem::new(inputs, labels)?;
    Ok(evaluate(&problem, h)?.lml)
}

/// Gradient of the log marginal likelihood with respect to the linear
/// kernel parameters, ordered [alpha, beta_1..M, gamma].
pub fn lml_gradient(h: &Hyperparameters, inputs: &RssMatrix, labels: &[f64]) -> Result<Vec<f64>> {
    h.validate()?;
    let problem = LmlProblem::new(inputs, labels)?;
    let state = evaluate(&problem, h)?;
    Ok(gradient_linear(&problem, h, &state))
}
