use super::Candidate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankInfo {
    pub rank: usize,
    pub crowding: f64,
}

fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Fast nondominated sort for minimization. Returns fronts of indices into
/// `objs`, best front first; indices within a front are ascending.
pub fn nondominated_sort(objs: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = objs.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut dom_count = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&objs[i], &objs[j]) {
                dominated_by_me[i].push(j);
                dom_count[j] += 1;
            } else if dominates(&objs[j], &objs[i]) {
                dominated_by_me[j].push(i);
                dom_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dom_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                dom_count[j] -= 1;
                if dom_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// NSGA-II crowding distance of each member of `front` (same order).
/// Boundary members get infinity.
pub fn crowding_distance(objs: &[Vec<f64>], front: &[usize]) -> Vec<f64> {
    let m = front.len();
    let mut dist = vec![0.0; m];
    if m <= 2 {
        return vec![f64::INFINITY; m];
    }
    let p = objs[front[0]].len();
    let mut order: Vec<usize> = (0..m).collect();
    for k in 0..p {
        order.sort_by(|&a, &b| {
            objs[front[a]][k]
                .total_cmp(&objs[front[b]][k])
                .then(front[a].cmp(&front[b]))
        });
        let lo = objs[front[order[0]]][k];
        let hi = objs[front[order[m - 1]]][k];
        dist[order[0]] = f64::INFINITY;
        dist[order[m - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 || !range.is_finite() {
            continue;
        }
        for w in 1..m - 1 {
            let gap = objs[front[order[w + 1]]][k] - objs[front[order[w - 1]]][k];
            dist[order[w]] += gap / range;
        }
    }
    dist
}

/// Rank a population: nondominated fronts over converged candidates, with
/// every diverged (sentinel) candidate placed in one extra front behind them.
pub fn rank_population(pop: &[Candidate]) -> Vec<RankInfo> {
    let mut out = vec![RankInfo { rank: 0, crowding: 0.0 }; pop.len()];
    let converged: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].converged).collect();
    let objs: Vec<Vec<f64>> = converged.iter().map(|&i| pop[i].objectives.clone()).collect();
    let fronts = nondominated_sort(&objs);
    for (r, front) in fronts.iter().enumerate() {
        let crowd = crowding_distance(&objs, front);
        for (k, &local) in front.iter().enumerate() {
            out[converged[local]] = RankInfo { rank: r, crowding: crowd[k] };
        }
    }
    let last = fronts.len();
    for (i, c) in pop.iter().enumerate() {
        if !c.converged {
            out[i] = RankInfo { rank: last, crowding: 0.0 };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symreg::{Genotype, Provenance};

    fn brute_fronts(objs: &[Vec<f64>]) -> Vec<usize> {
        // rank = longest chain of dominators, by repeated peeling.
        let n = objs.len();
        let mut rank = vec![usize::MAX; n];
        let mut r = 0;
        while rank.contains(&usize::MAX) {
            let remaining: Vec<usize> = (0..n).filter(|&i| rank[i] == usize::MAX).collect();
            let layer: Vec<usize> = remaining
                .iter()
                .copied()
                .filter(|&i| !remaining.iter().any(|&j| dominates(&objs[j], &objs[i])))
                .collect();
            for i in layer {
                rank[i] = r;
            }
            r += 1;
        }
        rank
    }

    #[test]
    fn small_example() {
        let objs = vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![3.0, 3.0]];
        assert_eq!(nondominated_sort(&objs), vec![vec![0, 1], vec![2]]);
    }

    fn multisets(len: usize, from: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == len {
            out.push(prefix.clone());
            return;
        }
        for k in from..9 {
            prefix.push(k);
            multisets(len, k, prefix, out);
            prefix.pop();
        }
    }

    #[test]
    fn exhaustive_agreement_with_brute_force() {
        // every multiset of up to 8 points from the grid {0,1,2}^2
        let grid: Vec<Vec<f64>> = (0..9).map(|k| vec![(k / 3) as f64, (k % 3) as f64]).collect();
        let mut checked = 0;
        for size in 1..=8 {
            let mut all = Vec::new();
            multisets(size, 0, &mut Vec::new(), &mut all);
            for idx in all {
                let objs: Vec<Vec<f64>> = idx.iter().map(|&k| grid[k].clone()).collect();
                let mut rank = vec![0; size];
                for (r, f) in nondominated_sort(&objs).iter().enumerate() {
                    for &i in f {
                        rank[i] = r;
                    }
                }
                assert_eq!(rank, brute_fronts(&objs), "{objs:?}");
                checked += 1;
            }
        }
        assert_eq!(checked, 24309);
    }

    fn cand(id: u64, objs: Vec<f64>, converged: bool) -> Candidate {
        let mut c = Candidate::new(id, 0, vec![Genotype::parse("I1", 0).unwrap()]).unwrap();
        c.set_outcome(objs, converged, Provenance::Expensive);
        c
    }

    #[test]
    fn single_candidate() {
        let r = rank_population(&[cand(0, vec![1.0, 1.0], true)]);
        assert_eq!(r[0].rank, 0);
        assert!(r[0].crowding.is_infinite());
    }

    #[test]
    fn sentinel_goes_last() {
        let pop = vec![
            cand(0, vec![9999.0, 9999.0], false),
            cand(1, vec![1.0, 2.0], true),
            cand(2, vec![2.0, 1.0], true),
            cand(3, vec![3.0, 3.0], true),
        ];
        let r = rank_population(&pop);
        assert_eq!(r[0].rank, 2);
        assert_eq!((r[1].rank, r[2].rank, r[3].rank), (0, 0, 1));
    }

    #[test]
    fn crowding_interior_point() {
        let objs = vec![vec![0.0, 4.0], vec![1.0, 1.0], vec![4.0, 0.0]];
        let d = crowding_distance(&objs, &[0, 1, 2]);
        assert!(d[0].is_infinite() && d[2].is_infinite());
        assert!((d[1] - 2.0).abs() < 1e-12);
    }
}
