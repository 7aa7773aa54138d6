//! Multivariate Gaussian utilities: a validated (mean, covariance) pair,
//! density evaluation, and the product-of-Gaussian-expressions identity
//! N(a; u, A) N(a; u0, A0) = N(u; u0, A + A0) N(a; u1, A1).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const EIGEN_TOL: f64 = 1e-10;

/// A Gaussian in n dimensions with a symmetric positive-semidefinite
/// covariance (validated on construction).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNd {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianNd {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::domain(format!(
                "covariance must be {n}x{n}, got {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        let scale = cov.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        for i in 0..n {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > SYMMETRY_TOL * scale.max(1.0) {
                    return Err(Error::domain("covariance must be symmetric"));
                }
            }
        }
        let eigen = nalgebra::SymmetricEigen::new(cov.clone());
        let max_ev = eigen.eigenvalues.iter().fold(0.0_f64, |acc, v| acc.max(*v));
        if eigen
            .eigenvalues
            .iter()
            .any(|ev| *ev < -EIGEN_TOL * max_ev.max(1.0))
        {
            return Err(Error::domain(
                "covariance must be positive semidefinite".to_string(),
            ));
        }
        Ok(GaussianNd { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Density at `a`, via the Cholesky factorization of the covariance.
    pub fn pdf(&self, a: &DVector<f64>) -> Result<f64> {
        let n = self.dim();
        if a.len() != n {
            return Err(Error::domain("evaluation point has wrong dimension"));
        }
        let chol = self
            .cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::numerical("singular covariance in pdf", None))?;
        let diff = a - &self.mean;
        let quad = diff.dot(&chol.solve(&diff));
        let log_det = 2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|v| v.ln())
                .sum::<f64>();
        Ok((-0.5 * quad - 0.5 * log_det - 0.5 * n as f64 * (2.0 * PI).ln()).exp())
    }
}

/// Result of multiplying two Gaussian expressions in the same variable.
#[derive(Debug, Clone)]
pub struct GaussianProduct {
    /// The Gaussian part in the original variable: N(a; u1, A1) with
    /// A1 = (A^{-1} + A0^{-1})^{-1} and u1 = A1 (A^{-1} u + A0^{-1} u0).
    pub combined: GaussianNd,
    /// The leading scalar factor expressed as a Gaussian N(.; u0, A + A0);
    /// its value is that density evaluated at `leading_point` = u.
    pub leading: GaussianNd,
    pub leading_point: DVector<f64>,
}

impl GaussianProduct {
    /// Numeric value of the leading scalar factor N(u; u0, A + A0).
    pub fn leading_value(&self) -> Result<f64> {
        self.leading.pdf(&self.leading_point)
    }
}

fn inverse_pd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|ch| ch.inverse())
        .ok_or_else(|| Error::numerical("singular covariance", None))
}

/// Product of the Gaussian expressions N(a; u, A) and N(a; u0, A0).
pub fn gaussian_product(g1: &GaussianNd, g2: &GaussianNd) -> Result<GaussianProduct> {
    if g1.dim() != g2.dim() {
        return Err(Error::domain("Gaussian dimensions must match"));
    }
    let a_inv = inverse_pd(&g1.cov)?;
    let a0_inv = inverse_pd(&g2.cov)?;
    let a1 = inverse_pd(&(&a_inv + &a0_inv))?;
    // Symmetrize away factorization roundoff before validating.
    let a1 = (&a1 + a1.transpose()) * 0.5;
    let u1 = &a1 * (&a_inv * &g1.mean + &a0_inv * &g2.mean);
    let combined = GaussianNd::new(u1, a1)?;
    let leading = GaussianNd::new(g2.mean.clone(), &g1.cov + &g2.cov)?;
    Ok(GaussianProduct {
        combined,
        leading,
        leading_point: g1.mean.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamKind};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn scalar(mean: f64, var: f64) -> GaussianNd {
        GaussianNd::new(
            DVector::from_vec(vec![mean]),
            DMatrix::from_vec(1, 1, vec![var]),
        )
        .unwrap()
    }

    #[test]
    fn standard_scalar_product() {
        let p = gaussian_product(&scalar(0.0, 1.0), &scalar(0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(p.combined.cov[(0, 0)], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.combined.mean[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.leading.mean[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.leading.cov[(0, 0)], 2.0, epsilon = 1e-15);
        // Leading factor is N(0; 0, 2) = 1/sqrt(4 pi).
        assert_abs_diff_eq!(
            p.leading_value().unwrap(),
            1.0 / (4.0 * PI).sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn pointwise_identity_on_random_scalars() {
        let mut rng = stream(2024, StreamKind::NagpUser, 0, 0);
        for _ in 0..100 {
            let g1 = scalar(rng.random::<f64>() * 4.0 - 2.0, 0.2 + rng.random::<f64>());
            let g2 = scalar(rng.random::<f64>() * 4.0 - 2.0, 0.2 + rng.random::<f64>());
            let p = gaussian_product(&g1, &g2).unwrap();
            let a = DVector::from_vec(vec![rng.random::<f64>() * 6.0 - 3.0]);
            // Direct pdf-product oracle.
            let lhs = g1.pdf(&a).unwrap() * g2.pdf(&a).unwrap();
            let rhs = p.leading_value().unwrap() * p.combined.pdf(&a).unwrap();
            let rel = (lhs - rhs).abs() / lhs.abs().max(1e-300);
            assert!(rel < 1e-12, "pointwise identity off by {rel}");
        }
    }

    #[test]
    fn pointwise_identity_in_two_dimensions() {
        let mut rng = stream(55, StreamKind::NagpUser, 1, 0);
        for _ in 0..25 {
            let rand_cov = |rng: &mut rand_chacha::ChaCha8Rng| {
                let a = rng.random::<f64>() + 0.5;
                let b = rng.random::<f64>() + 0.5;
                let c = rng.random::<f64>() * 0.3;
                DMatrix::from_vec(2, 2, vec![a, c, c, b])
            };
            let g1 = GaussianNd::new(
                DVector::from_vec(vec![rng.random(), rng.random()]),
                rand_cov(&mut rng),
            )
            .unwrap();
            let g2 = GaussianNd::new(
                DVector::from_vec(vec![rng.random(), rng.random()]),
                rand_cov(&mut rng),
            )
            .unwrap();
            let p = gaussian_product(&g1, &g2).unwrap();
            let a = DVector::from_vec(vec![rng.random::<f64>() * 2.0, rng.random::<f64>() * 2.0]);
            let lhs = g1.pdf(&a).unwrap() * g2.pdf(&a).unwrap();
            let rhs = p.leading_value().unwrap() * p.combined.pdf(&a).unwrap();
            assert!(
                (lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1e-300),
                "2-d identity violated: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn equal_means_are_a_fixed_point() {
        let g1 = scalar(1.7, 0.9);
        let g2 = scalar(1.7, 3.4);
        let p = gaussian_product(&g1, &g2).unwrap();
        assert_abs_diff_eq!(p.combined.mean[0], 1.7, epsilon = 1e-12);
    }

    #[test]
    fn rejects_asymmetric_covariance() {
        let cov = DMatrix::from_vec(2, 2, vec![1.0, 0.5, 0.1, 1.0]);
        assert!(GaussianNd::new(DVector::zeros(2), cov).is_err());
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let cov = DMatrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]);
        assert!(GaussianNd::new(DVector::zeros(2), cov).is_err());
    }

    #[test]
    fn singular_covariance_is_numerical_error() {
        let g1 = GaussianNd::new(DVector::zeros(1), DMatrix::from_vec(1, 1, vec![0.0])).unwrap();
        let g2 = scalar(0.0, 1.0);
        assert!(matches!(
            gaussian_product(&g1, &g2),
            Err(Error::Numerical { .. })
        ));
    }
}
