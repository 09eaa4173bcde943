use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::kernel::{sq_dist, KernelParams};
use super::GpError;

/// Jitter added to the diagonal when the plain factorization fails; tried in
/// increasing order.
const JITTERS: [f64; 7] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

pub(crate) fn sq_dist_matrix(x: &[Vec<f64>]) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { sq_dist(&x[i], &x[j]) })
}

/// Cholesky factor of K + σ_n²I built from precomputed squared distances,
/// escalating diagonal jitter up to 1e-4 if needed. Returns the factor and
/// the jitter used.
pub(crate) fn factorize(d2: &DMatrix<f64>, params: &KernelParams) -> Result<(Cholesky<f64, Dyn>, f64), GpError> {
    let n = d2.nrows();
    let mut k = d2.map(|v| params.at_sq_dist(v));
    for i in 0..n {
        k[(i, i)] += params.noise;
    }
    if let Some(c) = Cholesky::new(k.clone()) {
        return Ok((c, 0.0));
    }
    for &j in &JITTERS {
        let mut kj = k.clone();
        for i in 0..n {
            kj[(i, i)] += j;
        }
        if let Some(c) = Cholesky::new(kj) {
            return Ok((c, j));
        }
    }
    Err(GpError::NotPositiveDefinite)
}

pub(crate) fn lml_from_factor(chol: &Cholesky<f64, Dyn>, y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let l = chol.l_dirty();
    let z = l.solve_lower_triangular(y).expect("triangular solve");
    let logdet: f64 = (0..y.len()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
    -0.5 * z.dot(&z) - 0.5 * logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

fn check_shapes(x: &[Vec<f64>], y: &[f64]) -> Result<(), GpError> {
    if x.is_empty() {
        return Err(GpError::Empty);
    }
    if x.len() != y.len() {
        return Err(GpError::Shape(format!("{} inputs but {} targets", x.len(), y.len())));
    }
    let d = x[0].len();
    if x.iter().any(|p| p.len() != d) {
        return Err(GpError::Shape("inputs differ in dimension".into()));
    }
    if y.iter().chain(x.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(GpError::Shape("non-finite training data".into()));
    }
    Ok(())
}

/// log p(y | X, θ) = −½ yᵀ(K+σ_n²I)⁻¹y − ½ log|K+σ_n²I| − (n/2) log 2π
pub fn log_marginal_likelihood(x: &[Vec<f64>], y: &[f64], params: &KernelParams) -> Result<f64, GpError> {
    check_shapes(x, y)?;
    let (chol, _) = factorize(&sq_dist_matrix(x), params)?;
    Ok(lml_from_factor(&chol, &DVector::from_column_slice(y)))
}

/// Zero-mean GP posterior conditioned on `(x, y)`.
#[derive(Debug, Clone)]
pub struct GpModel {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    params: KernelParams,
    chol: Cholesky<f64, Dyn>,
    alpha_vec: DVector<f64>,
    jitter: f64,
    /// Set when hyperparameter fitting failed and defaults were used.
    pub fit_fallback: bool,
}

impl GpModel {
    /// Condition on data with fixed hyperparameters.
    pub fn condition(x: Vec<Vec<f64>>, y: Vec<f64>, params: KernelParams) -> Result<Self, GpError> {
        check_shapes(&x, &y)?;
        if !params.is_valid() {
            return Err(GpError::Shape(format!("invalid kernel parameters {params:?}")));
        }
        let (chol, jitter) = factorize(&sq_dist_matrix(&x), &params)?;
        let alpha_vec = chol.solve(&DVector::from_column_slice(&y));
        Ok(Self { x, y, params, chol, alpha_vec, jitter, fit_fallback: false })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        lml_from_factor(&self.chol, &DVector::from_column_slice(&self.y))
    }

    /// Posterior mean and predictive variance (including observation
    /// noise) at `xs`. Variance is clamped at zero.
    pub fn predict(&self, xs: &[f64]) -> (f64, f64) {
        let kstar = DVector::from_iterator(self.n(), self.x.iter().map(|xi| self.params.at_sq_dist(sq_dist(xi, xs))));
        let mean = kstar.dot(&self.alpha_vec);
        let v = self.chol.l_dirty().solve_lower_triangular(&kstar).expect("triangular solve");
        let var = (self.params.prior_variance() + self.jitter - v.dot(&v)).max(0.0);
        (mean, var)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense-inverse oracle: explicit inverse and determinant, no
    /// triangular factorization.
    fn dense_lml(x: &[Vec<f64>], y: &[f64], p: &KernelParams) -> f64 {
        let n = x.len();
        let mut k = DMatrix::from_fn(n, n, |i, j| super::super::rq_kernel(&x[i], &x[j], p));
        for i in 0..n {
            k[(i, i)] += p.noise;
        }
        let det = k.clone().determinant();
        let inv = k.try_inverse().unwrap();
        let yv = DVector::from_column_slice(y);
        -0.5 * (yv.transpose() * inv * &yv)[(0, 0)] - 0.5 * det.ln() - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    #[test]
    fn scalar_closed_forms() {
        // K11 + σ_n² = 1
        let p = KernelParams::new(1.0, 1.0, 1.0, 1e-8);
        let p = KernelParams { sigma: (1.0f64 - 1e-8).sqrt(), ..p };
        let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        let a = log_marginal_likelihood(&[vec![0.0]], &[0.0], &p).unwrap();
        assert!((a + half_log_2pi).abs() < 1e-12);
        assert!((a - -0.9189385332046727).abs() < 1e-9);
        let b = log_marginal_likelihood(&[vec![0.0]], &[1.0], &p).unwrap();
        assert!((b - (-0.5 - half_log_2pi)).abs() < 1e-12);
    }

    #[test]
    fn matches_dense_oracle() {
        let x = vec![vec![0.0, 0.1], vec![0.5, -0.3], vec![1.2, 0.7], vec![-0.4, 0.9], vec![0.3, 0.3]];
        let y = vec![0.3, -1.2, 0.8, 0.05, -0.4];
        let p = KernelParams::new(1.3, 0.7, 1.5, 1e-3);
        let a = log_marginal_likelihood(&x, &y, &p).unwrap();
        assert!((a - dense_lml(&x, &y, &p)).abs() < 1e-8);
    }

    #[test]
    fn interpolates_at_noise_floor() {
        let x = vec![vec![0.0], vec![1.0], vec![2.5]];
        let y = vec![0.4, -0.7, 1.1];
        let p = KernelParams::new(1.0, 1.0, 1.0, 1e-8);
        let gp = GpModel::condition(x.clone(), y.clone(), p).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let (m, v) = gp.predict(xi);
            assert!((m - yi).abs() < 1e-6);
            assert!(v <= 1e-6);
        }
    }

    #[test]
    fn far_query_recovers_prior() {
        let p = KernelParams::new(0.8, 0.5, 2.0, 1e-3);
        let gp = GpModel::condition(vec![vec![0.0], vec![0.3]], vec![1.0, 2.0], p).unwrap();
        let (m, v) = gp.predict(&[1e6]);
        assert!(m.abs() < 1e-9);
        assert!((v - (0.64 + 1e-3)).abs() < 1e-9);
    }

    #[test]
    fn shape_errors() {
        let p = KernelParams::default();
        assert!(matches!(log_marginal_likelihood(&[], &[], &p), Err(GpError::Empty)));
        assert!(log_marginal_likelihood(&[vec![0.0]], &[1.0, 2.0], &p).is_err());
    }

    #[test]
    fn duplicate_inputs_still_factorize() {
        let p = KernelParams::new(1.0, 1.0, 1.0, 1e-8);
        let gp = GpModel::condition(vec![vec![0.5]; 4], vec![1.0, 1.1, 0.9, 1.0], p).unwrap();
        assert!(gp.predict(&[0.5]).0.is_finite());
    }
}
