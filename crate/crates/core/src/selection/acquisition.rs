use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Lower confidence bound in "larger is better" form: −μ + βσ.
pub fn lcb(mean: f64, std: f64, beta: f64) -> f64 {
    -mean + beta * std
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Expected improvement below `f_best` with margin `xi`.
pub fn ei(mean: f64, std: f64, f_best: f64, xi: f64) -> f64 {
    let imp = f_best - mean - xi;
    if std <= 0.0 {
        return imp.max(0.0);
    }
    let z = imp / std;
    (imp * normal_cdf(z) + std * normal_pdf(z)).max(0.0)
}

fn nearest<'a>(x: &[f64], set: &'a [Vec<f64>]) -> Option<(&'a [f64], f64)> {
    set.iter()
        .map(|p| (p.as_slice(), crate::surrogate::sq_dist(x, p)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(p, d)| (p, d.sqrt()))
}

/// Down-weights points near previously diverged embeddings:
/// min(1, ‖x−x_div‖ / (δ‖x_conv−x_div‖)) with x_div the nearest diverged and
/// x_conv the nearest converged embedding to `x`.
///
/// # Panics
/// If both sets are empty or `delta` is outside (0, 1].
pub fn convergence_weight(x: &[f64], converged: &[Vec<f64>], diverged: &[Vec<f64>], delta: f64) -> f64 {
    assert!(delta > 0.0 && delta <= 1.0, "delta must lie in (0, 1]");
    assert!(!(converged.is_empty() && diverged.is_empty()), "convergence_weight needs history");
    let Some((x_div, d_x)) = nearest(x, diverged) else {
        return 1.0;
    };
    if d_x == 0.0 {
        return 0.0;
    }
    let Some((x_conv, _)) = nearest(x, converged) else {
        return 1.0;
    };
    let span = crate::surrogate::sq_dist(x_conv, x_div).sqrt();
    if span == 0.0 {
        return 1.0;
    }
    (d_x / (delta * span)).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lcb_examples() {
        assert_eq!(lcb(1.0, 0.5, 2.0), 0.0);
        assert_eq!(lcb(0.0, 1.0, 5.0), 5.0);
    }

    #[test]
    fn ei_standard_normal_matches_monte_carlo() {
        let v = ei(0.0, 1.0, 0.0, 0.0);
        assert!((v - 0.398942).abs() < 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let u: f64 = 1.0 - rng.gen::<f64>();
            let w: f64 = rng.gen();
            let s = (-2.0 * u.ln()).sqrt() * (2.0 * PI * w).cos();
            acc += (0.0 - s).max(0.0);
        }
        let mc = acc / n as f64;
        assert!((mc - v).abs() / v < 0.02, "mc {mc} vs {v}");
    }

    #[test]
    fn ei_deterministic_cases() {
        assert_eq!(ei(-1.0, 0.0, 0.0, 0.0), 1.0);
        assert_eq!(ei(1.0, 0.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn weight_examples() {
        let conv = vec![vec![1.0, 0.0]];
        let div = vec![vec![0.0, 0.0]];
        assert_eq!(convergence_weight(&[0.6, 0.0], &conv, &div, 0.5), 1.0);
        assert!((convergence_weight(&[0.2, 0.0], &conv, &div, 0.5) - 0.4).abs() < 1e-12);
        assert_eq!(convergence_weight(&[0.0, 0.0], &conv, &div, 0.5), 0.0);
        assert_eq!(convergence_weight(&[0.0, 0.0], &conv, &[], 0.5), 1.0);
    }

    #[test]
    #[should_panic]
    fn weight_without_history_panics() {
        convergence_weight(&[0.0], &[], &[], 0.5);
    }
}
