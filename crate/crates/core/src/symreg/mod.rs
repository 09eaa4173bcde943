//! Gene expression programming engine.
//!
//! Candidates are fixed-length linear genotypes with a head (any symbol) and
//! a tail (leaves only). A genotype decodes into an expression tree by a
//! depth-first pre-order read. Trees are scored elsewhere; this module only
//! ranks them and breeds the next generation.

mod canonical;
mod evolve;
mod expr;
mod parse;
mod ranking;
mod variation;

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use canonical::canonical_key;
pub use evolve::{evolve_generation, survive, EvolutionConfig};
pub use expr::{decode, decode_prefix, eval_tree, CompiledExpr, ExprTree, FeatureRow};
pub use parse::parse_expr;
pub use ranking::{crowding_distance, nondominated_sort, rank_population, RankInfo};
pub use variation::{crossover, mutate, random_genotype};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymRegError {
    #[error("structural error at position {position}: {reason}")]
    Structural { position: usize, reason: String },
    #[error("unknown terminal `{0}`")]
    UnknownTerminal(String),
    #[error("constant index {index} outside pool of {len}")]
    ConstantIndex { index: usize, len: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot parse expression `{input}`: {reason}")]
    Parse { input: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Operator {
    #[serde(rename = "+")]
    Add,
    #[serde(rename = "-")]
    Sub,
    #[serde(rename = "*")]
    Mul,
    #[serde(rename = "neg")]
    Neg,
}

impl Operator {
    pub fn arity(self) -> usize {
        match self {
            Operator::Neg => 1,
            _ => 2,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Operator::Add => "+",
            Operator::Sub => "-",
            Operator::Mul => "*",
            Operator::Neg => "neg",
        }
    }

    #[inline]
    pub(crate) fn apply2(self, a: f64, b: f64) -> f64 {
        match self {
            Operator::Add => a + b,
            Operator::Sub => a - b,
            Operator::Mul => a * b,
            Operator::Neg => -a,
        }
    }
}

/// One gene position.
///
/// `Literal` never appears in evolved genotypes; it exists so hand-written
/// reference expressions (e.g. `0.945 - 2.108*J1`) share the tree type.
#[derive(Debug, Clone, PartialEq)]
pub enum Symbol {
    Op(Operator),
    Terminal(Arc<str>),
    Constant(usize),
    Literal(f64),
}

impl Symbol {
    pub fn terminal(name: &str) -> Self {
        Symbol::Terminal(Arc::from(name))
    }

    pub fn arity(&self) -> usize {
        match self {
            Symbol::Op(op) => op.arity(),
            _ => 0,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.arity() == 0
    }

    /// Parse a single genotype token: `+ - * neg`, `c<k>` for pool constants,
    /// a number for a literal, anything else is a terminal name.
    pub fn from_token(tok: &str) -> Result<Self, SymRegError> {
        let sym = match tok {
            "+" => Symbol::Op(Operator::Add),
            "-" => Symbol::Op(Operator::Sub),
            "*" | "×" => Symbol::Op(Operator::Mul),
            "neg" => Symbol::Op(Operator::Neg),
            "" => {
                return Err(SymRegError::Parse {
                    input: tok.into(),
                    reason: "empty token".into(),
                })
            }
            t => {
                if let Some(idx) = t.strip_prefix('c').and_then(|r| r.parse::<usize>().ok()) {
                    Symbol::Constant(idx)
                } else if let Ok(v) = t.parse::<f64>() {
                    Symbol::Literal(v)
                } else {
                    Symbol::terminal(t)
                }
            }
        };
        Ok(sym)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Op(op) => f.write_str(op.token()),
            Symbol::Terminal(name) => f.write_str(name),
            Symbol::Constant(i) => write!(f, "c{i}"),
            Symbol::Literal(v) => write!(f, "{v:?}"),
        }
    }
}

/// The alphabet available to one expression slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolSet {
    pub operators: Vec<Operator>,
    pub terminals: Vec<Arc<str>>,
    pub n_constants: usize,
}

impl SymbolSet {
    pub fn new(operators: Vec<Operator>, terminals: &[&str], n_constants: usize) -> Self {
        Self {
            operators,
            terminals: terminals.iter().map(|t| Arc::from(*t)).collect(),
            n_constants,
        }
    }

    pub fn max_arity(&self) -> usize {
        self.operators.iter().map(|o| o.arity()).max().unwrap_or(0)
    }

    pub fn leaves(&self) -> Vec<Symbol> {
        self.terminals
            .iter()
            .map(|t| Symbol::Terminal(t.clone()))
            .chain((0..self.n_constants).map(Symbol::Constant))
            .collect()
    }

    pub fn all(&self) -> Vec<Symbol> {
        self.operators
            .iter()
            .map(|&o| Symbol::Op(o))
            .chain(self.leaves())
            .collect()
    }

    /// Tail length that guarantees every genotype with `head_len` head
    /// positions closes into a complete tree.
    pub fn tail_len(&self, head_len: usize) -> usize {
        tail_len(head_len, self.max_arity())
    }

    pub fn validate(&self) -> Result<(), SymRegError> {
        if self.leaves().is_empty() {
            return Err(SymRegError::Config(
                "symbol set has no terminals or constants".into(),
            ));
        }
        Ok(())
    }
}

pub fn tail_len(head_len: usize, max_arity: usize) -> usize {
    head_len * max_arity.saturating_sub(1) + 1
}

/// Fixed-length linear genotype: `head_len` head positions followed by a tail
/// holding only leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct Genotype {
    symbols: Vec<Symbol>,
    head_len: usize,
}

impl Genotype {
    /// Build a genotype, checking the tail holds only leaves and has the
    /// length required by `max_arity`.
    pub fn new(symbols: Vec<Symbol>, head_len: usize, max_arity: usize) -> Result<Self, SymRegError> {
        let expected = head_len + tail_len(head_len, max_arity);
        if symbols.len() != expected {
            return Err(SymRegError::Structural {
                position: symbols.len(),
                reason: format!("length {} but head {head_len} requires {expected}", symbols.len()),
            });
        }
        let g = Self { symbols, head_len };
        g.check_tail()?;
        Ok(g)
    }

    /// Build without the tail-length check. Decoding still rejects operators
    /// in the tail, which is how malformed genotypes are reported.
    pub fn from_parts(symbols: Vec<Symbol>, head_len: usize) -> Self {
        Self { symbols, head_len }
    }

    /// Parse whitespace separated tokens, e.g. `"* + I1 I1 I2"`.
    pub fn parse(tokens: &str, head_len: usize) -> Result<Self, SymRegError> {
        let symbols = tokens
            .split_whitespace()
            .map(Symbol::from_token)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_parts(symbols, head_len))
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn head_len(&self) -> usize {
        self.head_len
    }

    pub fn tail_len(&self) -> usize {
        self.symbols.len().saturating_sub(self.head_len)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub(crate) fn check_tail(&self) -> Result<(), SymRegError> {
        match self
            .symbols
            .iter()
            .enumerate()
            .skip(self.head_len)
            .find(|(_, s)| !s.is_leaf())
        {
            Some((position, s)) => Err(SymRegError::Structural {
                position,
                reason: format!("operator `{s}` in tail"),
            }),
            None => Ok(()),
        }
    }

    pub fn tokens(&self) -> Vec<String> {
        self.symbols.iter().map(|s| s.to_string()).collect()
    }
}

impl fmt::Display for Genotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tokens().join(" "))
    }
}

/// Per-run pool of numeric constants referenced by `Symbol::Constant`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsPool {
    pub values: Vec<f64>,
    pub seed: u64,
}

impl ConstantsPool {
    pub const DEFAULT_SIZE: usize = 5;

    /// Draw `n` values uniformly from `[lo, hi)`.
    pub fn from_seed(seed: u64, n: usize, lo: f64, hi: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC057_A775);
        let values = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
        Self { values, seed }
    }

    pub fn with_values(values: Vec<f64>) -> Self {
        Self { values, seed: 0 }
    }

    pub fn get(&self, index: usize) -> Result<f64, SymRegError> {
        self.values
            .get(index)
            .copied()
            .ok_or(SymRegError::ConstantIndex { index, len: self.values.len() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Not scored yet.
    Pending,
    Expensive,
    Surrogate,
}

/// One individual: a genotype per expression slot plus everything learned
/// about it so far.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub id: u64,
    pub generation: usize,
    pub genotypes: Vec<Genotype>,
    pub trees: Vec<ExprTree>,
    pub phenotype_keys: Vec<String>,
    /// Raw (unnormalized) embedding; `None` until embedded.
    pub embedding: Option<Vec<f64>>,
    pub objectives: Vec<f64>,
    pub provenance: Provenance,
    pub converged: bool,
}

impl Candidate {
    pub fn new(id: u64, generation: usize, genotypes: Vec<Genotype>) -> Result<Self, SymRegError> {
        let trees = genotypes.iter().map(decode).collect::<Result<Vec<_>, _>>()?;
        let phenotype_keys = trees.iter().map(canonical_key).collect();
        Ok(Self {
            id,
            generation,
            genotypes,
            trees,
            phenotype_keys,
            embedding: None,
            objectives: Vec::new(),
            provenance: Provenance::Pending,
            converged: true,
        })
    }

    /// Joined per-slot keys; two candidates with the same joint key encode
    /// the same model.
    pub fn joint_key(&self) -> String {
        self.phenotype_keys.join(" | ")
    }

    pub fn set_outcome(&mut self, objectives: Vec<f64>, converged: bool, provenance: Provenance) {
        self.objectives = objectives;
        self.converged = converged;
        self.provenance = provenance;
    }

    pub fn mark_diverged(&mut self, n_objectives: usize, provenance: Provenance) {
        self.set_outcome(vec![crate::DIVERGED; n_objectives], false, provenance);
    }
}

/// Per-slot configuration: a name (e.g. `g` or `alpha`) and the terminals
/// that slot may use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotConfig {
    pub name: String,
    pub terminals: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SymRegConfig {
    pub head_len: usize,
    pub operators: Vec<Operator>,
    pub slots: Vec<SlotConfig>,
    pub n_constants: usize,
    pub constant_range: (f64, f64),
}

impl Default for SymRegConfig {
    fn default() -> Self {
        Self {
            head_len: 8,
            operators: vec![Operator::Add, Operator::Sub, Operator::Mul],
            slots: vec![
                SlotConfig { name: "g".into(), terminals: vec!["I1".into(), "J1".into()] },
                SlotConfig { name: "alpha".into(), terminals: vec!["I1".into(), "J1".into()] },
            ],
            n_constants: ConstantsPool::DEFAULT_SIZE,
            constant_range: (-2.0, 2.0),
        }
    }
}

impl SymRegConfig {
    pub fn symbol_sets(&self) -> Vec<SymbolSet> {
        self.slots
            .iter()
            .map(|s| SymbolSet {
                operators: self.operators.clone(),
                terminals: s.terminals.iter().map(|t| Arc::from(t.as_str())).collect(),
                n_constants: self.n_constants,
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), SymRegError> {
        if self.slots.is_empty() {
            return Err(SymRegError::Config("no expression slots".into()));
        }
        for set in self.symbol_sets() {
            set.validate()?;
        }
        Ok(())
    }

    pub fn pool(&self, seed: u64) -> ConstantsPool {
        ConstantsPool::from_seed(seed, self.n_constants, self.constant_range.0, self.constant_range.1)
    }

    /// A fresh random candidate with one genotype per slot.
    pub fn random_candidate<R: Rng + ?Sized>(
        &self,
        id: u64,
        generation: usize,
        rng: &mut R,
    ) -> Result<Candidate, SymRegError> {
        let genotypes = self
            .symbol_sets()
            .iter()
            .map(|set| random_genotype(rng, set, self.head_len))
            .collect::<Result<Vec<_>, _>>()?;
        Candidate::new(id, generation, genotypes)
    }
}
