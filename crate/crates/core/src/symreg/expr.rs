use std::fmt;

use super::{ConstantsPool, Genotype, Operator, SymRegError, Symbol};

/// Decoded phenotype. Internal nodes are operators with exactly `arity`
/// children; leaves are terminals, pool constants or literals.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprTree {
    pub node: Symbol,
    pub children: Vec<ExprTree>,
}

impl ExprTree {
    pub fn leaf(node: Symbol) -> Self {
        Self { node, children: Vec::new() }
    }

    pub fn op(op: Operator, children: Vec<ExprTree>) -> Self {
        debug_assert_eq!(children.len(), op.arity());
        Self { node: Symbol::Op(op), children }
    }

    /// Pre-order symbol sequence; re-encodes the consumed genotype prefix.
    pub fn preorder(&self) -> Vec<Symbol> {
        let mut out = Vec::with_capacity(self.size());
        self.push_preorder(&mut out);
        out
    }

    fn push_preorder(&self, out: &mut Vec<Symbol>) {
        out.push(self.node.clone());
        for c in &self.children {
            c.push_preorder(out);
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    /// Terminal names used anywhere in the tree, sorted and deduplicated.
    pub fn terminals(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .preorder()
            .into_iter()
            .filter_map(|s| match s {
                Symbol::Terminal(n) => Some(n.to_string()),
                _ => None,
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Resolve terminal names against `columns` and constants against
    /// `pool` into a flat program for fast repeated evaluation.
    pub fn compile<S: AsRef<str>>(
        &self,
        columns: &[S],
        pool: &ConstantsPool,
    ) -> Result<CompiledExpr, SymRegError> {
        let mut nodes = Vec::with_capacity(self.size());
        for sym in self.preorder() {
            let node = match sym {
                Symbol::Op(op) => Node::Op(op),
                Symbol::Terminal(name) => {
                    let idx = columns
                        .iter()
                        .position(|c| c.as_ref() == &*name)
                        .ok_or_else(|| SymRegError::UnknownTerminal(name.to_string()))?;
                    Node::Var(idx)
                }
                Symbol::Constant(i) => Node::Value(pool.get(i)?),
                Symbol::Literal(v) => Node::Value(v),
            };
            nodes.push(node);
        }
        Ok(CompiledExpr { nodes })
    }
}

impl fmt::Display for ExprTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Symbol::Op(Operator::Neg) => write!(f, "(-{})", self.children[0]),
            Symbol::Op(op) => write!(f, "({} {} {})", self.children[0], op.token(), self.children[1]),
            leaf => write!(f, "{leaf}"),
        }
    }
}

/// Decode a genotype by depth-first pre-order reading. Symbols left over
/// once the tree closes are ignored.
pub fn decode(g: &Genotype) -> Result<ExprTree, SymRegError> {
    decode_prefix(g).map(|(tree, _)| tree)
}

/// Like [`decode`], also returning how many symbols were consumed.
pub fn decode_prefix(g: &Genotype) -> Result<(ExprTree, usize), SymRegError> {
    g.check_tail()?;
    let symbols = g.symbols();
    if symbols.is_empty() {
        return Err(SymRegError::Structural { position: 0, reason: "empty genotype".into() });
    }
    let mut pos = 0;
    let tree = build(symbols, &mut pos)?;
    Ok((tree, pos))
}

fn build(symbols: &[Symbol], pos: &mut usize) -> Result<ExprTree, SymRegError> {
    let sym = symbols.get(*pos).ok_or_else(|| SymRegError::Structural {
        position: *pos,
        reason: "genotype ended before the tree closed".into(),
    })?;
    *pos += 1;
    let children = (0..sym.arity())
        .map(|_| build(symbols, pos))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExprTree { node: sym.clone(), children })
}

/// A named row of feature values.
pub trait FeatureRow {
    fn value(&self, name: &str) -> Option<f64>;
}

impl FeatureRow for std::collections::HashMap<String, f64> {
    fn value(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl FeatureRow for std::collections::BTreeMap<String, f64> {
    fn value(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl FeatureRow for [(&str, f64)] {
    fn value(&self, name: &str) -> Option<f64> {
        self.iter().find(|(n, _)| *n == name).map(|&(_, v)| v)
    }
}

impl<const N: usize> FeatureRow for [(&str, f64); N] {
    fn value(&self, name: &str) -> Option<f64> {
        self.as_slice().value(name)
    }
}

/// Evaluate a tree on one named row. Non-finite intermediate values
/// propagate.
pub fn eval_tree<R: FeatureRow + ?Sized>(
    t: &ExprTree,
    row: &R,
    pool: &ConstantsPool,
) -> Result<f64, SymRegError> {
    match &t.node {
        Symbol::Terminal(name) => row.value(name).ok_or_else(|| SymRegError::UnknownTerminal(name.to_string())),
        Symbol::Constant(i) => pool.get(*i),
        Symbol::Literal(v) => Ok(*v),
        Symbol::Op(Operator::Neg) => Ok(-eval_tree(&t.children[0], row, pool)?),
        Symbol::Op(op) => {
            let a = eval_tree(&t.children[0], row, pool)?;
            let b = eval_tree(&t.children[1], row, pool)?;
            Ok(op.apply2(a, b))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Node {
    Op(Operator),
    Var(usize),
    Value(f64),
}

/// Expression with terminals resolved to column indices; evaluation is
/// allocation free.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledExpr {
    nodes: Vec<Node>,
}

impl CompiledExpr {
    /// Evaluate on a row laid out in the column order used to compile.
    #[inline]
    pub fn eval(&self, row: &[f64]) -> f64 {
        self.eval_at(0, row).0
    }

    fn eval_at(&self, i: usize, row: &[f64]) -> (f64, usize) {
        match self.nodes[i] {
            Node::Var(k) => (row[k], i + 1),
            Node::Value(v) => (v, i + 1),
            Node::Op(Operator::Neg) => {
                let (a, next) = self.eval_at(i + 1, row);
                (-a, next)
            }
            Node::Op(op) => {
                let (a, next) = self.eval_at(i + 1, row);
                let (b, next) = self.eval_at(next, row);
                (op.apply2(a, b), next)
            }
        }
    }

    /// True when the expression reads no variables.
    pub fn is_constant(&self) -> bool {
        !self.nodes.iter().any(|n| matches!(n, Node::Var(_)))
    }
}
