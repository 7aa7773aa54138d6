//! Hyperparameter training by conjugate-gradient ascent of the log marginal
//! likelihood, and the resulting per-axis model.
//!
//! The free parameters are optimized in log space (which keeps them
//! positive) with Polak-Ribiere updates, periodic restarts, and a
//! backtracking line search. Several random initializations run
//! independently and the best final likelihood wins; restarts may run in
//! parallel without changing the result.

use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Hyperparameters;
use crate::likelihood::{evaluate, gradient_linear, LmlProblem};
use crate::rng::{stream, StreamKind};
use crate::scenario::RssMatrix;

const MAX_ITERATIONS: usize = 500;
const GRAD_TOL_REL: f64 = 1e-4;
/// Sufficient-decrease and curvature constants of the strong-Wolfe line
/// search (the loose curvature bound suits conjugate-gradient directions).
const WOLFE_C1: f64 = 1e-4;
const WOLFE_C2: f64 = 0.1;
const STEP_MAX: f64 = 1e4;
/// Box for the log-space parameters (|ln theta| <= 34.5, theta within
/// 1e-15..1e15). Kernels outside this range are numerically meaningless.
const LOG_PARAM_BOUND: f64 = 34.5;

/// Initialization ranges for the log-space parameters, bracketing the data
/// scales of the urban-micro scenario (labels 0..200 m, RSS -160..-26 dBm).
const LOG_ALPHA_RANGE: (f64, f64) = (0.0, 4.0 * std::f64::consts::LN_10);
const LOG_BETA_RANGE: (f64, f64) = (0.0, 4.0 * std::f64::consts::LN_10);
const LOG_GAMMA_RANGE: (f64, f64) = (-6.0 * std::f64::consts::LN_10, 0.0);

/// Which coordinate axis a model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisTag {
    X,
    Y,
}

impl std::fmt::Display for AxisTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AxisTag::X => write!(f, "x"),
            AxisTag::Y => write!(f, "y"),
        }
    }
}

/// Outcome of the optimizer run that produced a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimReport {
    /// Whether the gradient-norm tolerance was met before the iteration cap.
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// A trained per-axis GP model: learned kernel parameters with the cached
/// training-kernel factorization and weight vector.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub hyper: Hyperparameters,
    pub train_inputs: RssMatrix,
    pub train_labels: Vec<f64>,
    pub axis: AxisTag,
    pub final_lml: f64,
    /// Diagonal jitter added to factor the training kernel.
    pub jitter: f64,
    pub optim: OptimReport,
    chol: Cholesky<f64, Dyn>,
    weights: DVector<f64>,
}

impl TrainedModel {
    /// Build a model at a fixed hyperparameter setting without running the
    /// optimizer (the kernel is factored and the weight vector solved).
    pub fn from_hyperparameters(
        hyper: &Hyperparameters,
        inputs: &RssMatrix,
        labels: &[f64],
        axis: AxisTag,
    ) -> Result<TrainedModel> {
        hyper.validate()?;
        let problem = LmlProblem::new(inputs, labels)?;
        let state = evaluate(&problem, hyper)?;
        let grad_norm = {
            let lin = gradient_linear(&problem, hyper, &state);
            let theta = [&[hyper.alpha][..], &hyper.beta, &[hyper.gamma]].concat();
            lin.iter()
                .zip(&theta)
                .map(|(g, t)| (g * t) * (g * t))
                .sum::<f64>()
                .sqrt()
        };
        Ok(TrainedModel {
            hyper: hyper.clone(),
            train_inputs: inputs.clone(),
            train_labels: labels.to_vec(),
            axis,
            final_lml: state.lml,
            jitter: state.jitter,
            optim: OptimReport {
                converged: false,
                iterations: 0,
                grad_norm,
            },
            chol: state.chol,
            weights: state.psi,
        })
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// Solve (Phi + jitter I) x = b against the cached factorization.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn num_antennas(&self) -> usize {
        self.train_inputs.num_antennas()
    }

    pub fn num_train(&self) -> usize {
        self.train_inputs.num_users()
    }
}

struct RunOutcome {
    theta_log: Vec<f64>,
    lml: f64,
    report: OptimReport,
}

/// Objective value (f = -lml) and its log-space gradient at one point.
fn eval_fg(
    problem: &LmlProblem,
    theta_log: &[f64],
    sigma_er_sq: f64,
) -> Result<(f64, DVector<f64>)> {
    let h = Hyperparameters::from_log_vec(theta_log, sigma_er_sq)?;
    let state = evaluate(problem, &h)?;
    let lin = gradient_linear(problem, &h, &state);
    let mut g = DVector::<f64>::zeros(lin.len());
    g[0] = -lin[0] * h.alpha;
    for (k, b) in h.beta.iter().enumerate() {
        g[k + 1] = -lin[k + 1] * b;
    }
    let last = lin.len() - 1;
    g[last] = -lin[last] * h.gamma;
    Ok((-state.lml, g))
}

/// A fully evaluated trial point on the search line.
struct LinePoint {
    t: f64,
    x: DVector<f64>,
    f: f64,
    g: DVector<f64>,
    /// Directional derivative g . d along the (unclamped) direction.
    dphi: f64,
}

/// One endpoint of the zoom interval; `point` is None for the origin and
/// for trial points whose evaluation failed (treated as f = +inf).
struct Bound {
    t: f64,
    f: f64,
    dphi: f64,
    point: Option<LinePoint>,
}

impl Bound {
    fn from_point(p: LinePoint) -> Self {
        Bound {
            t: p.t,
            f: p.f,
            dphi: p.dphi,
            point: Some(p),
        }
    }

    fn failed(t: f64) -> Self {
        Bound {
            t,
            f: f64::INFINITY,
            dphi: f64::NAN,
            point: None,
        }
    }
}

fn point_at(
    problem: &LmlProblem,
    sigma_er_sq: f64,
    x0: &DVector<f64>,
    d: &DVector<f64>,
    t: f64,
) -> Option<LinePoint> {
    let mut x = x0 + d * t;
    for v in x.iter_mut() {
        *v = v.clamp(-LOG_PARAM_BOUND, LOG_PARAM_BOUND);
    }
    let (f, g) = eval_fg(problem, x.as_slice(), sigma_er_sq).ok()?;
    let dphi = g.dot(d);
    Some(LinePoint { t, x, f, g, dphi })
}

/// Strong-Wolfe line search (bracket and zoom). Returns a point with
/// sufficient decrease; when the curvature condition is attainable within
/// the evaluation budget the returned point satisfies it too.
fn wolfe_search(
    problem: &LmlProblem,
    sigma_er_sq: f64,
    x0: &DVector<f64>,
    d: &DVector<f64>,
    f0: f64,
    slope0: f64,
    t_first: f64,
) -> Option<LinePoint> {
    let sufficient = |p: &LinePoint| p.f <= f0 + WOLFE_C1 * p.t * slope0;
    let curvature = |p: &LinePoint| p.dphi.abs() <= WOLFE_C2 * slope0.abs();

    let origin = Bound {
        t: 0.0,
        f: f0,
        dphi: slope0,
        point: None,
    };

    let zoom = |mut lo: Bound, mut hi: Bound| -> Option<LinePoint> {
        for _ in 0..30 {
            let width = (hi.t - lo.t).abs();
            if width <= 1e-12 * lo.t.abs().max(1.0) {
                break;
            }
            let (a, b) = (lo.t, hi.t);
            let lo_t = a.min(b);
            let hi_t = a.max(b);
            // Quadratic interpolation through (lo.f, lo.dphi, hi.f), with a
            // safeguarded fallback to bisection.
            let mut mid = if hi.f.is_finite() {
                let denom = 2.0 * (hi.f - lo.f - lo.dphi * (b - a));
                if denom.abs() > 1e-300 {
                    a - lo.dphi * (b - a) * (b - a) / denom
                } else {
                    f64::NAN
                }
            } else {
                f64::NAN
            };
            let guard_lo = lo_t + 0.1 * (hi_t - lo_t);
            let guard_hi = hi_t - 0.1 * (hi_t - lo_t);
            if !(mid.is_finite() && mid >= guard_lo && mid <= guard_hi) {
                mid = 0.5 * (lo_t + hi_t);
            }
            match point_at(problem, sigma_er_sq, x0, d, mid) {
                Some(p) => {
                    if !sufficient(&p) || p.f >= lo.f {
                        hi = Bound::from_point(p);
                    } else if curvature(&p) {
                        return Some(p);
                    } else {
                        if p.dphi * (hi.t - lo.t) >= 0.0 {
                            hi = Bound {
                                t: lo.t,
                                f: lo.f,
                                dphi: lo.dphi,
                                point: lo.point.take(),
                            };
                        }
                        lo = Bound::from_point(p);
                    }
                }
                None => hi = Bound::failed(mid),
            }
        }
        lo.point
    };

    // Bracketing: expand until the minimum is straddled.
    let mut prev: Option<LinePoint> = None;
    let mut t = t_first.clamp(1e-10, STEP_MAX);
    for _ in 0..12 {
        match point_at(problem, sigma_er_sq, x0, d, t) {
            Some(p) => {
                let worse_than_prev = prev.as_ref().is_some_and(|q| p.f >= q.f);
                if !sufficient(&p) || worse_than_prev {
                    let lo = prev.map_or(
                        Bound {
                            t: 0.0,
                            f: f0,
                            dphi: slope0,
                            point: None,
                        },
                        Bound::from_point,
                    );
                    return zoom(lo, Bound::from_point(p));
                }
                if curvature(&p) {
                    return Some(p);
                }
                if p.dphi >= 0.0 {
                    let hi = prev.map_or(origin, Bound::from_point);
                    return zoom(Bound::from_point(p), hi);
                }
                if t >= STEP_MAX {
                    return Some(p);
                }
                prev = Some(p);
                t = (2.5 * t).min(STEP_MAX);
            }
            None => {
                let lo = prev.map_or(origin, Bound::from_point);
                return zoom(lo, Bound::failed(t));
            }
        }
    }
    prev
}

fn cg_maximize(problem: &LmlProblem, sigma_er_sq: f64, theta0: Vec<f64>) -> Result<RunOutcome> {
    let dim = theta0.len();
    let mut x = DVector::from_vec(theta0);
    let (mut f, mut g) = eval_fg(problem, x.as_slice(), sigma_er_sq)?;
    let mut d = -&g;
    let mut iterations = 0;
    let mut converged = g.norm() <= GRAD_TOL_REL * (1.0 + f.abs());
    let mut step_hint = 1.0_f64;

    while !converged && iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut slope = g.dot(&d);
        if slope >= 0.0 {
            d = -&g;
            slope = -g.norm_squared();
        }

        let mut accepted = wolfe_search(problem, sigma_er_sq, &x, &d, f, slope, step_hint);
        if accepted.is_none() && d != -&g {
            // The conjugate direction stalled; retry along steepest ascent.
            d = -&g;
            slope = -g.norm_squared();
            accepted = wolfe_search(problem, sigma_er_sq, &x, &d, f, slope, 1.0);
        }
        let Some(p) = accepted else {
            break; // no admissible step along the gradient
        };
        step_hint = (2.0 * p.t).clamp(1e-6, STEP_MAX);

        // Polak-Ribiere with non-negativity restart, plus a periodic reset
        // every `dim` iterations.
        let beta = if iterations % dim == 0 {
            0.0
        } else {
            (p.g.dot(&p.g) - p.g.dot(&g)).max(0.0) / g.dot(&g)
        };
        let mut d_new = -&p.g + &d * beta;
        if d_new.dot(&p.g) >= 0.0 {
            d_new = -&p.g;
        }

        x = p.x;
        f = p.f;
        g = p.g;
        d = d_new;
        converged = g.norm() <= GRAD_TOL_REL * (1.0 + f.abs());
    }

    Ok(RunOutcome {
        theta_log: x.as_slice().to_vec(),
        lml: -f,
        report: OptimReport {
            converged,
            iterations,
            grad_norm: g.norm(),
        },
    })
}

fn random_init(m: usize, seed: u64, restart: usize) -> Vec<f64> {
    let mut rng = stream(seed, StreamKind::TrainRestart, restart as u64, 0);
    let mut theta = Vec::with_capacity(m + 2);
    theta.push(rng.random_range(LOG_ALPHA_RANGE.0..LOG_ALPHA_RANGE.1));
    for _ in 0..m {
        theta.push(rng.random_range(LOG_BETA_RANGE.0..LOG_BETA_RANGE.1));
    }
    theta.push(rng.random_range(LOG_GAMMA_RANGE.0..LOG_GAMMA_RANGE.1));
    theta
}

/// Train one coordinate-axis model: run `restarts` conjugate-gradient
/// ascents from random log-space initializations and keep the best final
/// likelihood. Deterministic for a fixed `(seed, restarts)`.
pub fn train(
    inputs: &RssMatrix,
    labels: &[f64],
    sigma_er_sq: f64,
    restarts: usize,
    seed: u64,
    axis: AxisTag,
) -> Result<TrainedModel> {
    if inputs.num_users() < 2 {
        return Err(Error::domain("training requires at least 2 points"));
    }
    if restarts == 0 {
        return Err(Error::domain("restarts must be >= 1"));
    }
    if sigma_er_sq.is_nan() || sigma_er_sq < 0.0 {
        return Err(Error::domain("sigma_er_sq must be >= 0"));
    }
    let problem = LmlProblem::new(inputs, labels)?;
    let m = inputs.num_antennas();

    let outcomes: Vec<Result<RunOutcome>> = (0..restarts)
        .into_par_iter()
        .map(|r| cg_maximize(&problem, sigma_er_sq, random_init(m, seed, r)))
        .collect();

    let mut best: Option<RunOutcome> = None;
    let mut last_err = None;
    for outcome in outcomes {
        match outcome {
            Ok(run) => {
                let better = best.as_ref().is_none_or(|b| run.lml > b.lml);
                if better {
                    best = Some(run);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let best = match best {
        Some(b) => b,
        None => {
            return Err(
                last_err.unwrap_or_else(|| Error::numerical("all training restarts failed", None))
            )
        }
    };

    let hyper = Hyperparameters::from_log_vec(&best.theta_log, sigma_er_sq)?;
    let state = evaluate(&problem, &hyper)?;
    Ok(TrainedModel {
        hyper,
        train_inputs: inputs.clone(),
        train_labels: labels.to_vec(),
        axis,
        final_lml: state.lml,
        jitter: state.jitter,
        optim: best.report,
        chol: state.chol,
        weights: state.psi,
    })
}

// --- serialization ---------------------------------------------------------

const MODEL_FILE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    axis: AxisTag,
    alpha: f64,
    beta: Vec<f64>,
    gamma: f64,
    sigma_er_sq: f64,
    jitter: f64,
    final_lml: f64,
    converged: bool,
    iterations: usize,
    grad_norm: f64,
    train_checksum: String,
    train_rows: usize,
    train_cols: usize,
    train_inputs: Vec<f64>,
    train_labels: Vec<f64>,
}

fn fnv1a64(chunks: &[&[f64]], dims: &[usize]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
        }
    };
    for d in dims {
        eat(&(*d as u64).to_le_bytes());
    }
    for chunk in chunks {
        for v in *chunk {
            eat(&v.to_bits().to_le_bytes());
        }
    }
    hash
}

fn training_checksum(inputs: &RssMatrix, labels: &[f64]) -> String {
    let hash = fnv1a64(
        &[inputs.as_slice(), labels],
        &[inputs.num_users(), inputs.num_antennas()],
    );
    format!("{hash:016x}")
}

impl TrainedModel {
    /// Serialize to a self-describing JSON file. Kernel factorizations are
    /// not stored; they are recomputed on load.
    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = ModelFile {
            version: MODEL_FILE_VERSION,
            axis: self.axis,
            alpha: self.hyper.alpha,
            beta: self.hyper.beta.clone(),
            gamma: self.hyper.gamma,
            sigma_er_sq: self.hyper.sigma_er_sq,
            jitter: self.jitter,
            final_lml: self.final_lml,
            converged: self.optim.converged,
            iterations: self.optim.iterations,
            grad_norm: self.optim.grad_norm,
            train_checksum: training_checksum(&self.train_inputs, &self.train_labels),
            train_rows: self.train_inputs.num_users(),
            train_cols: self.train_inputs.num_antennas(),
            train_inputs: self.train_inputs.as_slice().to_vec(),
            train_labels: self.train_labels.clone(),
        };
        let text = serde_json::to_string_pretty(&file).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<TrainedModel> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let file: ModelFile = serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.as_ref().display())))?;
        if file.version != MODEL_FILE_VERSION {
            return Err(Error::config(format!(
                "unsupported model file version {}",
                file.version
            )));
        }
        let inputs = RssMatrix::from_vec(file.train_rows, file.train_cols, file.train_inputs)?;
        let checksum = training_checksum(&inputs, &file.train_labels);
        if checksum != file.train_checksum {
            return Err(Error::config(format!(
                "model file training-data checksum mismatch: stored {}, computed {checksum}",
                file.train_checksum
            )));
        }
        let hyper = Hyperparameters::new(file.alpha, file.beta, file.gamma, file.sigma_er_sq)?;
        let problem = LmlProblem::new(&inputs, &file.train_labels)?;
        let state = evaluate(&problem, &hyper)?;
        Ok(TrainedModel {
            hyper,
            train_inputs: inputs,
            train_labels: file.train_labels,
            axis: file.axis,
            final_lml: state.lml,
            jitter: state.jitter,
            optim: OptimReport {
                converged: file.converged,
                iterations: file.iterations,
                grad_norm: file.grad_norm,
            },
            chol: state.chol,
            weights: state.psi,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::kernel_matrix;
    use crate::likelihood::log_marginal_likelihood;
    use approx::assert_abs_diff_eq;

    fn synthetic_inputs(n: usize, m: usize, seed: u64) -> RssMatrix {
        let mut rng = stream(seed, StreamKind::TestLayout, 1, 1);
        let data: Vec<f64> = (0..n * m)
            .map(|_| rng.random::<f64>() * 6.0 - 3.0)
            .collect();
        RssMatrix::from_vec(n, m, data).unwrap()
    }

    /// Draw labels from the GP prior at a known parameter setting.
    fn labels_from(h: &Hyperparameters, inputs: &RssMatrix, seed: u64) -> Vec<f64> {
        let phi = kernel_matrix(inputs, inputs, h, true).unwrap();
        let chol = phi.cholesky().unwrap();
        let mut rng = stream(seed, StreamKind::TestLayout, 2, 2);
        let z = DVector::from_fn(inputs.num_users(), |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        (chol.l() * z).as_slice().to_vec()
    }

    #[test]
    fn recovers_at_least_the_generating_likelihood() {
        let inputs = synthetic_inputs(16, 2, 5);
        let h_star = Hyperparameters::new(3.0, vec![2.0, 5.0], 0.01, 0.2).unwrap();
        let labels = labels_from(&h_star, &inputs, 9);
        let model = train(&inputs, &labels, 0.2, 4, 77, AxisTag::X).unwrap();
        let lml_star = log_marginal_likelihood(&h_star, &inputs, &labels).unwrap();
        assert!(
            model.final_lml >= lml_star - 1e-6,
            "trained lml {} below generating lml {}",
            model.final_lml,
            lml_star
        );
    }

    #[test]
    fn improves_on_its_own_initialization() {
        let inputs = synthetic_inputs(12, 2, 6);
        let h_star = Hyperparameters::new(2.0, vec![3.0, 3.0], 0.02, 0.3).unwrap();
        let labels = labels_from(&h_star, &inputs, 10);
        for restart in 0..3 {
            let theta0 = random_init(2, 123, restart);
            let h0 = Hyperparameters::from_log_vec(&theta0, 0.3).unwrap();
            let lml0 = log_marginal_likelihood(&h0, &inputs, &labels).unwrap();
            let problem = LmlProblem::new(&inputs, &labels).unwrap();
            let run = cg_maximize(&problem, 0.3, theta0).unwrap();
            assert!(run.lml >= lml0 - 1e-12, "restart {restart} regressed");
        }
    }

    #[test]
    fn stopping_contract_reported() {
        let inputs = synthetic_inputs(10, 2, 7);
        let h_star = Hyperparameters::new(2.0, vec![4.0, 1.5], 0.05, 0.5).unwrap();
        let labels = labels_from(&h_star, &inputs, 11);
        let model = train(&inputs, &labels, 0.5, 2, 3, AxisTag::Y).unwrap();
        let r = model.optim;
        assert!(
            r.grad_norm <= GRAD_TOL_REL * (1.0 + model.final_lml.abs())
                || r.iterations == MAX_ITERATIONS
                || !r.converged,
            "neither tolerance met nor cap reached: {r:?}"
        );
        if r.converged {
            assert!(r.grad_norm <= GRAD_TOL_REL * (1.0 + model.final_lml.abs()));
        }
    }

    #[test]
    fn training_is_deterministic() {
        let inputs = synthetic_inputs(10, 2, 8);
        let h_star = Hyperparameters::new(2.0, vec![2.0, 2.0], 0.02, 0.4).unwrap();
        let labels = labels_from(&h_star, &inputs, 12);
        let a = train(&inputs, &labels, 0.4, 3, 42, AxisTag::X).unwrap();
        let b = train(&inputs, &labels, 0.4, 3, 42, AxisTag::X).unwrap();
        assert_eq!(a.hyper.alpha.to_bits(), b.hyper.alpha.to_bits());
        assert_eq!(a.hyper.gamma.to_bits(), b.hyper.gamma.to_bits());
        for (x, y) in a.hyper.beta.iter().zip(&b.hyper.beta) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(a.final_lml.to_bits(), b.final_lml.to_bits());
    }

    #[test]
    fn model_factorization_is_consistent() {
        let inputs = synthetic_inputs(12, 3, 9);
        let h_star = Hyperparameters::new(4.0, vec![2.0, 2.0, 6.0], 0.01, 0.3).unwrap();
        let labels = labels_from(&h_star, &inputs, 13);
        let model = train(&inputs, &labels, 0.3, 2, 5, AxisTag::X).unwrap();

        // chol * chol^T reconstructs Phi + jitter I within 1e-8 relative.
        let mut phi = kernel_matrix(&inputs, &inputs, &model.hyper, true).unwrap();
        for i in 0..phi.nrows() {
            phi[(i, i)] += model.jitter;
        }
        let l = model.chol.l();
        let rec = &l * l.transpose();
        for (a, b) in rec.iter().zip(phi.iter()) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
        }

        // Phi psi reproduces the labels within 1e-6 relative.
        let reproduced = &phi * model.weights();
        let scale = model
            .train_labels
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()));
        for (a, b) in reproduced.iter().zip(&model.train_labels) {
            assert!(
                (a - b).abs() <= 1e-6 * scale.max(1.0),
                "Phi psi = {a} vs label {b}"
            );
        }
    }

    #[test]
    fn rejects_undersized_problems() {
        let inputs = synthetic_inputs(1, 2, 10);
        assert!(matches!(
            train(&inputs, &[1.0], 0.1, 2, 1, AxisTag::X),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn serialization_round_trip_preserves_model() {
        let inputs = synthetic_inputs(8, 2, 11);
        let h_star = Hyperparameters::new(2.0, vec![2.0, 2.0], 0.05, 0.6).unwrap();
        let labels = labels_from(&h_star, &inputs, 14);
        let model = train(&inputs, &labels, 0.6, 2, 9, AxisTag::Y).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save_json(&path).unwrap();
        let back = TrainedModel::load_json(&path).unwrap();

        assert_eq!(back.axis, AxisTag::Y);
        assert_eq!(back.hyper.alpha.to_bits(), model.hyper.alpha.to_bits());
        assert_eq!(back.hyper.gamma.to_bits(), model.hyper.gamma.to_bits());
        assert_eq!(back.jitter.to_bits(), model.jitter.to_bits());
        assert_abs_diff_eq!(back.final_lml, model.final_lml, epsilon = 1e-9);
        for (a, b) in back.weights().iter().zip(model.weights().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn corrupted_model_file_is_rejected() {
        let inputs = synthetic_inputs(8, 2, 12);
        let h_star = Hyperparameters::new(2.0, vec![2.0, 2.0], 0.05, 0.6).unwrap();
        let labels = labels_from(&h_star, &inputs, 15);
        let model = train(&inputs, &labels, 0.6, 2, 9, AxisTag::X).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save_json(&path).unwrap();
        let tampered = std::fs::read_to_string(&path)
            .unwrap()
            .replacen(
                "\"train_labels\": [\n    ",
                "\"train_labels\": [\n    9999.0, ",
                1,
            )
            .replacen(&format!("{}", labels[0]), "", 1);
        std::fs::write(&path, tampered).unwrap();
        match TrainedModel::load_json(&path) {
            Err(Error::Config(msg)) => assert!(msg.contains("checksum")),
            Err(Error::Parse(_)) => {} // also acceptable: the edit broke the JSON
            other => panic!("expected rejection, got {other:?}"),
        }
    }
}
