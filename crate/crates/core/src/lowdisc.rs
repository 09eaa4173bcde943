//! Halton low-discrepancy points.

use rand::Rng;

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Van der Corput radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += f * (index % b) as f64;
        index /= b;
        f *= inv;
    }
    out
}

/// `count` points of the `dim`-dimensional Halton sequence in `[0, 1)^dim`,
/// skipping index 0 (the origin).
///
/// Panics if `dim` exceeds the number of tabulated primes (16).
pub fn halton(count: usize, dim: usize) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "halton: dimension {dim} not supported");
    (1..=count as u64)
        .map(|i| (0..dim).map(|d| radical_inverse(i, PRIMES[d])).collect())
        .collect()
}

/// Halton points with a random Cranley-Patterson shift drawn from `rng`, so
/// different seeds give different but equally well-spread point sets.
pub fn shifted_halton<R: Rng + ?Sized>(count: usize, dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let shift: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    let mut pts = halton(count, dim);
    for p in pts.iter_mut() {
        for (v, s) in p.iter_mut().zip(&shift) {
            *v = (*v + s).fract();
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_two_prefix() {
        let xs: Vec<f64> = (1..=4).map(|i| radical_inverse(i, 2)).collect();
        assert_eq!(xs, vec![0.5, 0.25, 0.75, 0.125]);
    }

    #[test]
    fn points_lie_in_unit_cube() {
        let mut rng = rand::rngs::mock::StepRng::new(3, 7);
        for p in shifted_halton(50, 3, &mut rng) {
            assert!(p.iter().all(|&v| (0.0..1.0).contains(&v)));
        }
    }
}
