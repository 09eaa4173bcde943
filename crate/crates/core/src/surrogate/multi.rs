use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fit, FitOptions, GpError, GpModel, KernelParams};

/// Independent per-objective GPs over shared inputs. Equivalent to a joint
/// model whose covariance is block diagonal across objectives.
#[derive(Debug, Clone)]
pub struct MultiGp {
    pub per_objective: Vec<GpModel>,
    pub names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl Prediction {
    pub fn std(&self) -> Vec<f64> {
        self.var.iter().map(|v| v.sqrt()).collect()
    }
}

impl MultiGp {
    pub fn n_objectives(&self) -> usize {
        self.per_objective.len()
    }

    pub fn n_train(&self) -> usize {
        self.per_objective[0].n()
    }

    pub fn params(&self) -> Vec<KernelParams> {
        self.per_objective.iter().map(|m| *m.params()).collect()
    }

    pub fn predict(&self, x: &[f64]) -> Prediction {
        let (mean, var) = self.per_objective.iter().map(|m| m.predict(x)).unzip();
        Prediction { mean, var }
    }
}

/// Fit one GP per column of `y` (rows are samples). `warm` optionally holds
/// previous per-objective parameters used as extra optimizer starts.
pub fn fit_multi<R: Rng + ?Sized>(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    names: &[String],
    opts: &FitOptions,
    warm: Option<&[KernelParams]>,
    rng: &mut R,
) -> Result<MultiGp, GpError> {
    if x.is_empty() {
        return Err(GpError::Empty);
    }
    if y.len() != x.len() {
        return Err(GpError::Shape(format!("{} inputs but {} target rows", x.len(), y.len())));
    }
    let p = y[0].len();
    if p == 0 || y.iter().any(|r| r.len() != p) {
        return Err(GpError::Shape("target rows must share a nonzero width".into()));
    }
    if !names.is_empty() && names.len() != p {
        return Err(GpError::Shape(format!("{} names for {p} objectives", names.len())));
    }
    // one shared stream seed: identical columns get identical fits
    let seed: u64 = rng.gen();
    let mut per_objective = Vec::with_capacity(p);
    for k in 0..p {
        let mut sub = ChaCha8Rng::seed_from_u64(seed);
        let col: Vec<f64> = y.iter().map(|r| r[k]).collect();
        let extra: Vec<KernelParams> = warm.and_then(|w| w.get(k)).copied().into_iter().collect();
        per_objective.push(fit(x, &col, opts, &extra, &mut sub)?);
    }
    let names = if names.is_empty() { (0..p).map(|k| format!("obj{k}")).collect() } else { names.to_vec() };
    Ok(MultiGp { per_objective, names })
}

pub fn predict_multi(m: &MultiGp, x: &[f64]) -> Prediction {
    m.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::rq_kernel;
    use nalgebra::{DMatrix, DVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Explicit (np × np) block-diagonal joint covariance, solved densely.
    fn joint_oracle(x: &[Vec<f64>], y: &[Vec<f64>], params: &[KernelParams], q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = x.len();
        let p = params.len();
        let mut k = DMatrix::zeros(n * p, n * p);
        let mut ks = DMatrix::zeros(n * p, p);
        let mut yy = DVector::zeros(n * p);
        for o in 0..p {
            for i in 0..n {
                for j in 0..n {
                    k[(o * n + i, o * n + j)] = rq_kernel(&x[i], &x[j], &params[o]);
                }
                k[(o * n + i, o * n + i)] += params[o].noise;
                ks[(o * n + i, o)] = rq_kernel(&x[i], q, &params[o]);
                yy[o * n + i] = y[i][o];
            }
        }
        let inv = k.try_inverse().unwrap();
        let mean = ks.transpose() * &inv * yy;
        let cov = -(ks.transpose() * inv * &ks);
        let var = (0..p).map(|o| cov[(o, o)] + params[o].prior_variance()).collect();
        (mean.iter().copied().collect(), var)
    }

    #[test]
    fn block_diagonal_matches_joint_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let x: Vec<Vec<f64>> = (0..4).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
            let y: Vec<Vec<f64>> = (0..4).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
            let opts = FitOptions { restarts: 2, max_evals: 60, ..Default::default() };
            let m = fit_multi(&x, &y, &[], &opts, None, &mut rng).unwrap();
            let q = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let pr = m.predict(&q);
            let (mean, var) = joint_oracle(&x, &y, &m.params(), &q);
            for o in 0..2 {
                assert!((pr.mean[o] - mean[o]).abs() < 1e-10, "{} vs {}", pr.mean[o], mean[o]);
                assert!((pr.var[o] - var[o].max(0.0)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn duplicated_columns_predict_identically() {
        let x = vec![vec![0.0], vec![0.4], vec![1.0]];
        let y = vec![vec![0.2, 0.2], vec![-0.1, -0.1], vec![0.5, 0.5]];
        let opts = FitOptions { restarts: 3, max_evals: 80, ..Default::default() };
        let m = fit_multi(&x, &y, &[], &opts, None, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let q = [0.7];
        let pr = m.predict(&q);
        assert_eq!(pr.mean[0], pr.mean[1]);
        assert_eq!(pr.var[0], pr.var[1]);
    }

    #[test]
    fn single_objective_matches_single_path() {
        let x = vec![vec![0.0, 1.0], vec![0.4, 0.1], vec![1.0, -0.5]];
        let y = vec![vec![0.2], vec![-0.1], vec![0.5]];
        let opts = FitOptions { restarts: 2, max_evals: 50, ..Default::default() };
        let m = fit_multi(&x, &y, &["e".into()], &opts, None, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let seed: u64 = ChaCha8Rng::seed_from_u64(5).gen();
        let s = fit(&x, &[0.2, -0.1, 0.5], &opts, &[], &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert_eq!(m.params()[0], *s.params());
        let q = [0.3, 0.3];
        assert_eq!(m.predict(&q).mean[0], s.predict(&q).0);
    }

    #[test]
    fn rejects_ragged_targets() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![vec![0.0, 1.0], vec![1.0]];
        assert!(fit_multi(&x, &y, &[], &FitOptions::default(), None, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
