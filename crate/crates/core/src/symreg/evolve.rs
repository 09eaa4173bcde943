use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{crossover, mutate, rank_population, Candidate, RankInfo, SymRegConfig, SymRegError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    pub population: usize,
    pub offspring: usize,
    /// Probability that a slot's genotypes are recombined.
    pub crossover_rate: f64,
    /// Per-position point mutation probability.
    pub mutation_rate: f64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self { population: 96, offspring: 48, crossover_rate: 0.9, mutation_rate: 0.06 }
    }
}

fn crowded_cmp(a: (&RankInfo, u64), b: (&RankInfo, u64)) -> Ordering {
    a.0.rank
        .cmp(&b.0.rank)
        .then_with(|| b.0.crowding.total_cmp(&a.0.crowding))
        .then_with(|| a.1.cmp(&b.1))
}

fn tournament<R: Rng + ?Sized>(pop: &[Candidate], ranks: &[RankInfo], rng: &mut R) -> usize {
    let i = rng.gen_range(0..pop.len());
    let j = rng.gen_range(0..pop.len());
    match crowded_cmp((&ranks[i], pop[i].id), (&ranks[j], pop[j].id)) {
        Ordering::Greater => j,
        _ => i,
    }
}

/// Breed `evo.offspring` new candidates from a ranked population by binary
/// tournament on (rank, crowding), per-slot one-point crossover and point
/// mutation. New candidates get ids `next_id, next_id + 1, ...`.
pub fn evolve_generation<R: Rng + ?Sized>(
    pop: &[Candidate],
    ranks: &[RankInfo],
    generation: usize,
    next_id: &mut u64,
    rng: &mut R,
    symreg: &SymRegConfig,
    evo: &EvolutionConfig,
) -> Result<Vec<Candidate>, SymRegError> {
    if pop.is_empty() {
        return Err(SymRegError::Config("cannot breed from an empty population".into()));
    }
    assert_eq!(pop.len(), ranks.len());
    let sets = symreg.symbol_sets();
    let mut out = Vec::with_capacity(evo.offspring);
    while out.len() < evo.offspring {
        let a = &pop[tournament(pop, ranks, rng)];
        let b = &pop[tournament(pop, ranks, rng)];
        let mut ga = Vec::with_capacity(sets.len());
        let mut gb = Vec::with_capacity(sets.len());
        for (k, set) in sets.iter().enumerate() {
            let (x, y) = if rng.gen::<f64>() < evo.crossover_rate {
                crossover(&a.genotypes[k], &b.genotypes[k], rng)
            } else {
                (a.genotypes[k].clone(), b.genotypes[k].clone())
            };
            ga.push(mutate(&x, set, evo.mutation_rate, rng));
            gb.push(mutate(&y, set, evo.mutation_rate, rng));
        }
        for genes in [ga, gb] {
            if out.len() < evo.offspring {
                out.push(Candidate::new(*next_id, generation, genes)?);
                *next_id += 1;
            }
        }
    }
    Ok(out)
}

/// Environmental selection over parents and offspring: keep the best `size`
/// by (rank, crowding, id). The first front survives whenever it fits.
pub fn survive(mut merged: Vec<Candidate>, size: usize) -> Vec<Candidate> {
    if merged.len() <= size {
        return merged;
    }
    let ranks = rank_population(&merged);
    let mut order: Vec<usize> = (0..merged.len()).collect();
    order.sort_by(|&i, &j| crowded_cmp((&ranks[i], merged[i].id), (&ranks[j], merged[j].id)));
    let mut keep = vec![false; merged.len()];
    for &i in order.iter().take(size) {
        keep[i] = true;
    }
    let mut k = 0;
    merged.retain(|_| {
        let r = keep[k];
        k += 1;
        r
    });
    merged
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symreg::{eval_tree, ConstantsPool, Provenance, SlotConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> SymRegConfig {
        SymRegConfig {
            head_len: 5,
            slots: vec![SlotConfig { name: "f".into(), terminals: vec!["x".into()] }],
            ..SymRegConfig::default()
        }
    }

    fn score(c: &mut Candidate, pool: &ConstantsPool) {
        // target x^2 + x on x in {-1, -0.5, 0, 0.5, 1}
        let mut sse = 0.0;
        for k in 0..5 {
            let x = -1.0 + 0.5 * k as f64;
            let v = eval_tree(&c.trees[0], &[("x", x)], pool).unwrap();
            sse += (v - (x * x + x)).powi(2);
        }
        c.set_outcome(vec![sse], true, Provenance::Expensive);
    }

    fn initial(rng: &mut ChaCha8Rng, n: usize) -> Vec<Candidate> {
        (0..n).map(|i| cfg().random_candidate(i as u64, 0, rng).unwrap()).collect()
    }

    #[test]
    fn deterministic_and_sized() {
        let evo = EvolutionConfig { population: 20, offspring: 11, ..Default::default() };
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let pool = cfg().pool(9);
            let mut pop = initial(&mut rng, 20);
            pop.iter_mut().for_each(|c| score(c, &pool));
            let ranks = rank_population(&pop);
            let mut next = 20;
            evolve_generation(&pop, &ranks, 1, &mut next, &mut rng, &cfg(), &evo).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.len(), 11);
        let ga: Vec<_> = a.iter().map(|c| c.genotypes.clone()).collect();
        let gb: Vec<_> = b.iter().map(|c| c.genotypes.clone()).collect();
        assert_eq!(ga, gb);
        assert_eq!(a.last().unwrap().id, 30);
    }

    #[test]
    fn elitism_gives_monotone_best() {
        let evo = EvolutionConfig { population: 30, offspring: 15, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pool = cfg().pool(1);
        let mut pop = initial(&mut rng, 30);
        pop.iter_mut().for_each(|c| score(c, &pool));
        let mut next = 30;
        let best = |p: &[Candidate]| p.iter().map(|c| c.objectives[0]).fold(f64::INFINITY, f64::min);
        let mut prev = best(&pop);
        for gen in 1..=30 {
            let ranks = rank_population(&pop);
            let mut kids = evolve_generation(&pop, &ranks, gen, &mut next, &mut rng, &cfg(), &evo).unwrap();
            kids.iter_mut().for_each(|c| score(c, &pool));
            pop.extend(kids);
            pop = survive(pop, 30);
            let b = best(&pop);
            assert!(b <= prev, "generation {gen}: {b} > {prev}");
            prev = b;
        }
    }
}
