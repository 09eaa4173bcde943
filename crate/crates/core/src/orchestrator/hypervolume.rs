use crate::symreg::nondominated_sort;

/// Nondominated subset (minimization) of `points`, duplicates removed.
pub fn pareto_front(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if points.is_empty() {
        return Vec::new();
    }
    let fronts = nondominated_sort(points);
    let mut front: Vec<Vec<f64>> = fronts[0].iter().map(|&i| points[i].clone()).collect();
    front.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    front.dedup();
    front
}

fn clip(points: &[Vec<f64>], reference: &[f64]) -> Vec<Vec<f64>> {
    points.iter().filter(|p| p.iter().zip(reference).all(|(x, r)| x < r)).cloned().collect()
}

/// Area dominated by `points` inside the box bounded by `reference`, by a
/// sweep over the first objective.
fn hv_2d(points: &[Vec<f64>], reference: &[f64]) -> f64 {
    let mut pts = clip(points, reference);
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut area = 0.0;
    let mut ceiling = reference[1];
    for p in pts {
        if p[1] < ceiling {
            area += (reference[0] - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    area
}

/// Slicing along the last objective, recursing into p − 1 dimensions.
fn hv_slice(points: &[Vec<f64>], reference: &[f64]) -> f64 {
    let p = reference.len();
    let pts = clip(points, reference);
    if pts.is_empty() {
        return 0.0;
    }
    if p == 1 {
        return reference[0] - pts.iter().map(|q| q[0]).fold(f64::INFINITY, f64::min);
    }
    if p == 2 {
        return hv_2d(&pts, reference);
    }
    let mut levels: Vec<f64> = pts.iter().map(|q| q[p - 1]).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    levels.push(reference[p - 1]);
    let mut total = 0.0;
    for w in levels.windows(2) {
        let below: Vec<Vec<f64>> = pts.iter().filter(|q| q[p - 1] <= w[0]).map(|q| q[..p - 1].to_vec()).collect();
        total += hv_slice(&below, &reference[..p - 1]) * (w[1] - w[0]);
    }
    total
}

/// Hypervolume dominated by `points` (minimization) up to `reference`.
pub fn hypervolume(points: &[Vec<f64>], reference: &[f64]) -> f64 {
    hv_slice(points, reference)
}

/// Exact hypervolume by inclusion–exclusion over all subsets. Exponential;
/// intended as a cross-check for small fronts.
pub fn hypervolume_inclusion_exclusion(points: &[Vec<f64>], reference: &[f64]) -> f64 {
    let pts = clip(points, reference);
    let n = pts.len();
    assert!(n <= 20, "inclusion-exclusion limited to 20 points");
    let mut total = 0.0;
    for mask in 1u32..(1 << n) {
        let mut corner = vec![f64::NEG_INFINITY; reference.len()];
        for (i, p) in pts.iter().enumerate() {
            if mask & (1 << i) != 0 {
                for (c, v) in corner.iter_mut().zip(p) {
                    *c = c.max(*v);
                }
            }
        }
        let vol: f64 = corner.iter().zip(reference).map(|(c, r)| r - c).product();
        total += if mask.count_ones() % 2 == 1 { vol } else { -vol };
    }
    total
}

/// Normalization box: (ideal, reference) as componentwise min and max.
pub fn bounding_box(points: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let p = points[0].len();
    let lo = (0..p).map(|k| points.iter().map(|q| q[k]).fold(f64::INFINITY, f64::min)).collect();
    let hi = (0..p).map(|k| points.iter().map(|q| q[k]).fold(f64::NEG_INFINITY, f64::max)).collect();
    (lo, hi)
}

/// HV(front, reference) / Π(reference − ideal); 0 for a degenerate box.
pub fn coverage_in_box(front: &[Vec<f64>], ideal: &[f64], reference: &[f64]) -> f64 {
    let vol: f64 = reference.iter().zip(ideal).map(|(r, i)| r - i).product();
    if front.is_empty() || !(vol > 0.0) {
        return 0.0;
    }
    (hypervolume(front, reference) / vol).clamp(0.0, 1.0)
}

/// Coverage of a front within its own bounding box.
///
/// # Panics
/// On an empty front or non-finite points.
pub fn hypervolume_coverage(front: &[Vec<f64>]) -> f64 {
    assert!(!front.is_empty(), "hypervolume_coverage needs at least one point");
    assert!(front.iter().flatten().all(|v| v.is_finite()), "non-finite objective vector");
    let (ideal, reference) = bounding_box(front);
    coverage_in_box(front, &ideal, &reference)
}
