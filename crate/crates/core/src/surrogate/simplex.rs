/// Outcome of a bounded Nelder–Mead search.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

fn project(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Minimize `f` from `start` with a Nelder–Mead simplex whose vertices are
/// projected into the box `bounds`. Stops after `max_evals` evaluations or
/// when the simplex values agree to 1e-10.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, start: &[f64], bounds: &[(f64, f64)], max_evals: usize) -> SimplexResult {
    let n = start.len();
    assert_eq!(bounds.len(), n);
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut x0 = start.to_vec();
    project(&mut x0, bounds);
    let mut simplex = vec![x0.clone()];
    for k in 0..n {
        let mut v = x0.clone();
        let step = 0.1 * (bounds[k].1 - bounds[k].0).max(1e-8);
        v[k] = if v[k] + step <= bounds[k].1 { v[k] + step } else { v[k] - step };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

    while evals.get() < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        if values[0].is_finite() && spread.abs() <= 1e-10 * (1.0 + values[0].abs()) {
            break;
        }

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for k in 0..n {
                centroid[k] += v[k] / n as f64;
            }
        }
        let along = |t: f64| {
            let mut p: Vec<f64> = (0..n).map(|k| centroid[k] + t * (simplex[n][k] - centroid[k])).collect();
            project(&mut p, bounds);
            p
        };

        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let xc = along(-0.5);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    for k in 0..n {
                        simplex[i][k] = simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k]);
                    }
                    values[i] = eval(&simplex[i]);
                }
            }
        }
    }

    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    SimplexResult { x: simplex[best].clone(), value: values[best], evals: evals.get() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum() {
        let r = nelder_mead(|x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 0.5).powi(2), &[0.0, 0.0], &[(-5.0, 5.0); 2], 500);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] + 0.5).abs() < 1e-4);
    }

    #[test]
    fn respects_bounds() {
        let r = nelder_mead(|x| x[0], &[0.5], &[(0.0, 1.0)], 200);
        assert!(r.x[0] >= 0.0 && r.x[0] < 1e-6);
    }

    #[test]
    fn never_worse_than_start() {
        let f = |x: &[f64]| (x[0] * 3.0).sin() + x[1].powi(2);
        let start = [0.3, -0.2];
        let r = nelder_mead(f, &start, &[(-2.0, 2.0); 2], 40);
        assert!(r.value <= f(&start));
    }
}
