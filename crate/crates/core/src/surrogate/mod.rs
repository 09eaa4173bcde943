//! Gaussian-process surrogate over candidate embeddings.

mod gp;
mod kernel;
mod multi;
mod simplex;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use gp::{log_marginal_likelihood, GpModel};
pub use kernel::{rq_kernel, sq_dist, KernelParams, NOISE_FLOOR};
pub use multi::{fit_multi, predict_multi, MultiGp, Prediction};
pub use simplex::{nelder_mead, SimplexResult};

use crate::lowdisc::shifted_halton;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GpError {
    #[error("no training data")]
    Empty,
    #[error("kernel matrix is not positive definite after jitter escalation")]
    NotPositiveDefinite,
    #[error("shape error: {0}")]
    Shape(String),
}

/// Box constraints on kernel hyperparameters (natural scale).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamBounds {
    pub sigma: (f64, f64),
    pub ell: (f64, f64),
    pub alpha: (f64, f64),
    pub noise: (f64, f64),
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self { sigma: (1e-3, 1e2), ell: (1e-2, 1e2), alpha: (1e-2, 1e3), noise: (NOISE_FLOOR, 1.0) }
    }
}

impl ParamBounds {
    fn log_box(&self) -> [(f64, f64); 4] {
        let l = |(a, b): (f64, f64)| (a.ln(), b.ln());
        [l(self.sigma), l(self.ell), l(self.alpha), l(self.noise)]
    }

    pub fn clamp(&self, p: KernelParams) -> KernelParams {
        KernelParams::new(
            p.sigma.clamp(self.sigma.0, self.sigma.1),
            p.ell.clamp(self.ell.0, self.ell.1),
            p.alpha.clamp(self.alpha.0, self.alpha.1),
            p.noise.clamp(self.noise.0, self.noise.1),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub bounds: ParamBounds,
    pub restarts: usize,
    /// Likelihood evaluations allowed per restart.
    pub max_evals: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { bounds: ParamBounds::default(), restarts: 8, max_evals: 200 }
    }
}

/// Maximize the log marginal likelihood over log-hyperparameters. Restarts
/// start from shifted Halton points inside the log box, plus any `extra`
/// starting points (clamped into bounds). n = 1 uses default parameters.
pub fn fit<R: Rng + ?Sized>(
    x: &[Vec<f64>],
    y: &[f64],
    opts: &FitOptions,
    extra: &[KernelParams],
    rng: &mut R,
) -> Result<GpModel, GpError> {
    if x.is_empty() {
        return Err(GpError::Empty);
    }
    let default = opts.bounds.clamp(KernelParams::default());
    if x.len() == 1 {
        return GpModel::condition(x.to_vec(), y.to_vec(), default);
    }
    // validate shapes before any optimization
    gp::log_marginal_likelihood(x, y, &default).or_else(|e| match e {
        GpError::NotPositiveDefinite => Ok(0.0),
        other => Err(other),
    })?;

    let d2 = gp::sq_dist_matrix(x);
    let yv = DVector::from_column_slice(y);
    let lo_hi = opts.bounds.log_box();
    let objective = |v: &[f64]| -> f64 {
        let p = KernelParams::from_log(v);
        match gp::factorize(&d2, &p) {
            Ok((chol, _)) => {
                let l = gp::lml_from_factor(&chol, &yv);
                if l.is_finite() {
                    -l
                } else {
                    f64::INFINITY
                }
            }
            Err(_) => f64::INFINITY,
        }
    };

    let mut starts: Vec<[f64; 4]> = extra.iter().map(|p| opts.bounds.clamp(*p).to_log()).collect();
    for u in shifted_halton(opts.restarts, 4, rng) {
        let mut s = [0.0; 4];
        for k in 0..4 {
            s[k] = lo_hi[k].0 + u[k] * (lo_hi[k].1 - lo_hi[k].0);
        }
        starts.push(s);
    }

    let mut best: Option<(f64, [f64; 4])> = None;
    for s in &starts {
        let res = nelder_mead(objective, s, &lo_hi, opts.max_evals);
        if res.value.is_finite() && best.is_none_or(|(b, _)| res.value < b) {
            let mut v = [0.0; 4];
            v.copy_from_slice(&res.x);
            best = Some((res.value, v));
        }
    }
    match best {
        Some((_, v)) => GpModel::condition(x.to_vec(), y.to_vec(), KernelParams::from_log(&v)),
        None => {
            log::warn!("GP hyperparameter fit failed on all restarts; using defaults");
            let mut m = GpModel::condition(x.to_vec(), y.to_vec(), default)?;
            m.fit_fallback = true;
            Ok(m)
        }
    }
}
