use serde::{Deserialize, Serialize};

/// Smallest observation-noise variance the GP will use.
pub const NOISE_FLOOR: f64 = 1e-8;

/// Rational-quadratic kernel hyperparameters plus observation noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Signal scale σ; the prior variance is σ².
    pub sigma: f64,
    /// Length scale ℓ.
    pub ell: f64,
    /// Shape α; α → ∞ recovers the squared exponential.
    pub alpha: f64,
    /// Observation noise variance σ_n².
    pub noise: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self { sigma: 1.0, ell: 1.0, alpha: 1.0, noise: 1e-6 }
    }
}

impl KernelParams {
    pub fn new(sigma: f64, ell: f64, alpha: f64, noise: f64) -> Self {
        Self { sigma, ell, alpha, noise: noise.max(NOISE_FLOOR) }
    }

    pub fn is_valid(&self) -> bool {
        self.sigma > 0.0 && self.ell > 0.0 && self.alpha > 0.0 && self.noise >= NOISE_FLOOR
    }

    /// Kernel value at squared distance `d2`.
    #[inline]
    pub fn at_sq_dist(&self, d2: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        let base = d2 / (2.0 * self.alpha * self.ell * self.ell);
        s2 * (-self.alpha * base.ln_1p()).exp()
    }

    pub fn prior_variance(&self) -> f64 {
        self.sigma * self.sigma + self.noise
    }

    pub(crate) fn to_log(self) -> [f64; 4] {
        [self.sigma.ln(), self.ell.ln(), self.alpha.ln(), self.noise.ln()]
    }

    pub(crate) fn from_log(v: &[f64]) -> Self {
        Self::new(v[0].exp(), v[1].exp(), v[2].exp(), v[3].exp())
    }
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// σ²(1 + ‖x−x′‖²/(2αℓ²))^(−α)
pub fn rq_kernel(x: &[f64], x2: &[f64], params: &KernelParams) -> f64 {
    assert_eq!(x.len(), x2.len(), "rq_kernel: dimension mismatch");
    params.at_sq_dist(sq_dist(x, x2))
}
