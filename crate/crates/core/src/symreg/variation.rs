use rand::seq::SliceRandom;
use rand::Rng;

use super::{Genotype, SymRegError, Symbol, SymbolSet};

/// Random genotype: head drawn uniformly from every symbol, tail uniformly
/// from the leaves.
pub fn random_genotype<R: Rng + ?Sized>(
    rng: &mut R,
    set: &SymbolSet,
    head_len: usize,
) -> Result<Genotype, SymRegError> {
    set.validate()?;
    let all = set.all();
    let leaves = set.leaves();
    let tail = set.tail_len(head_len);
    let mut symbols = Vec::with_capacity(head_len + tail);
    for _ in 0..head_len {
        symbols.push(all.choose(rng).expect("non-empty").clone());
    }
    for _ in 0..tail {
        symbols.push(leaves.choose(rng).expect("non-empty").clone());
    }
    Genotype::new(symbols, head_len, set.max_arity())
}

/// Point mutation: every position is redrawn with probability `rate` from
/// the symbols allowed at that position.
pub fn mutate<R: Rng + ?Sized>(g: &Genotype, set: &SymbolSet, rate: f64, rng: &mut R) -> Genotype {
    let rate = rate.clamp(0.0, 1.0);
    if rate == 0.0 {
        return g.clone();
    }
    let all = set.all();
    let leaves = set.leaves();
    let symbols: Vec<Symbol> = g
        .symbols()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if rng.gen::<f64>() < rate {
                let pool = if i < g.head_len() { &all } else { &leaves };
                pool.choose(rng).expect("non-empty").clone()
            } else {
                s.clone()
            }
        })
        .collect();
    Genotype::from_parts(symbols, g.head_len())
}

/// One-point crossover at a position shared by both parents. Both parents
/// must have the same layout, so the children keep the head/tail classes.
pub fn crossover<R: Rng + ?Sized>(a: &Genotype, b: &Genotype, rng: &mut R) -> (Genotype, Genotype) {
    assert_eq!(a.len(), b.len(), "crossover: parents differ in length");
    assert_eq!(a.head_len(), b.head_len(), "crossover: parents differ in head length");
    if a.len() < 2 {
        return (a.clone(), b.clone());
    }
    let cut = rng.gen_range(1..a.len());
    let mut ca = a.symbols()[..cut].to_vec();
    ca.extend_from_slice(&b.symbols()[cut..]);
    let mut cb = b.symbols()[..cut].to_vec();
    cb.extend_from_slice(&a.symbols()[cut..]);
    (Genotype::from_parts(ca, a.head_len()), Genotype::from_parts(cb, a.head_len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symreg::{decode, Operator};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set() -> SymbolSet {
        SymbolSet::new(vec![Operator::Add, Operator::Sub, Operator::Mul], &["I1", "I2"], 5)
    }

    #[test]
    fn seeded_draws_repeat() {
        let a = random_genotype(&mut ChaCha8Rng::seed_from_u64(7), &set(), 8).unwrap();
        let b = random_genotype(&mut ChaCha8Rng::seed_from_u64(7), &set(), 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn length_follows_tail_formula() {
        let s = SymbolSet::new(vec![Operator::Add, Operator::Mul], &["I1"], 0);
        let g = random_genotype(&mut ChaCha8Rng::seed_from_u64(1), &s, 4).unwrap();
        assert_eq!(g.len(), 9);
    }

    #[test]
    fn empty_leaf_set_is_config_error() {
        let s = SymbolSet::new(vec![Operator::Add], &[], 0);
        assert!(matches!(
            random_genotype(&mut ChaCha8Rng::seed_from_u64(1), &s, 3),
            Err(SymRegError::Config(_))
        ));
    }

    #[test]
    fn head_symbols_are_uniform() {
        // 3 operators + 2 terminals + 5 constants = 10 symbols.
        let s = set();
        let all = s.all();
        let mut counts = vec![0usize; all.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 10_000;
        for _ in 0..draws {
            let g = random_genotype(&mut rng, &s, 1).unwrap();
            let k = all.iter().position(|x| x == &g.symbols()[0]).unwrap();
            counts[k] += 1;
        }
        let p = 1.0 / all.len() as f64;
        let mean = draws as f64 * p;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() < 5.0 * sd, "count {c} vs {mean}±{sd}");
        }
    }

    #[test]
    fn zero_rate_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_genotype(&mut rng, &set(), 8).unwrap();
        assert_eq!(mutate(&g, &set(), 0.0, &mut rng), g);
    }

    #[test]
    fn full_rate_keeps_tail_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = random_genotype(&mut rng, &set(), 8).unwrap();
        let m = mutate(&g, &set(), 1.0, &mut rng);
        assert!(m.symbols()[8..].iter().all(|s| s.is_leaf()));
        decode(&m).unwrap();
    }

    #[test]
    fn self_crossover_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_genotype(&mut rng, &set(), 8).unwrap();
        let (a, b) = crossover(&g, &g, &mut rng);
        assert_eq!(a, g);
        assert_eq!(b, g);
    }
}
