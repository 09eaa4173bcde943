//! Canonical phenotype keys.
//!
//! With only `+ - * neg` available every phenotype is a polynomial in its
//! leaves. Expanding it with exact integer coefficients, with terminals,
//! pool constants and literals kept as opaque atoms, gives a key in which
//! operand order, constant folding (`c0 - c0`) and like terms (`x + x`) no
//! longer matter. Equal keys imply equal values on every row.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{ExprTree, Operator, Symbol};

/// Expanded polynomials larger than this fall back to a raw pre-order key.
const MAX_TERMS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Atom {
    Terminal(String),
    Constant(usize),
    /// f64 bits; ordering is by bit pattern, which is only used for sorting.
    Literal(u64),
}

impl Atom {
    fn render(&self, out: &mut String) {
        match self {
            Atom::Terminal(n) => out.push_str(n),
            Atom::Constant(i) => {
                let _ = write!(out, "c{i}");
            }
            Atom::Literal(bits) => {
                let _ = write!(out, "{:?}", f64::from_bits(*bits));
            }
        }
    }
}

/// Sorted atom -> power map.
type Monomial = Vec<(Atom, u32)>;

#[derive(Debug, Clone, Default)]
struct Poly {
    terms: BTreeMap<Monomial, i128>,
}

impl Poly {
    fn atom(a: Atom) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![(a, 1)], 1);
        Self { terms }
    }

    fn add(mut self, other: &Poly, sign: i128) -> Option<Poly> {
        for (m, c) in &other.terms {
            let e = self.terms.entry(m.clone()).or_insert(0);
            *e = e.checked_add(c.checked_mul(sign)?)?;
            if *e == 0 {
                self.terms.remove(m);
            }
        }
        Some(self)
    }

    fn neg(mut self) -> Option<Poly> {
        for c in self.terms.values_mut() {
            *c = c.checked_neg()?;
        }
        Some(self)
    }

    fn mul(&self, other: &Poly) -> Option<Poly> {
        if self.terms.len().saturating_mul(other.terms.len()) > MAX_TERMS * 4 {
            return None;
        }
        let mut out = Poly::default();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m = mul_monomials(ma, mb);
                let c = ca.checked_mul(*cb)?;
                let e = out.terms.entry(m).or_insert(0);
                *e = e.checked_add(c)?;
            }
        }
        out.terms.retain(|_, c| *c != 0);
        if out.terms.len() > MAX_TERMS {
            return None;
        }
        Some(out)
    }
}

fn mul_monomials(a: &Monomial, b: &Monomial) -> Monomial {
    let mut out: Monomial = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j >= b.len() || (i < a.len() && a[i].0 < b[j].0) {
            out.push(a[i].clone());
            i += 1;
        } else if i >= a.len() || b[j].0 < a[i].0 {
            out.push(b[j].clone());
            j += 1;
        } else {
            out.push((a[i].0.clone(), a[i].1 + b[j].1));
            i += 1;
            j += 1;
        }
    }
    out
}

fn to_poly(t: &ExprTree) -> Option<Poly> {
    match &t.node {
        Symbol::Terminal(n) => Some(Poly::atom(Atom::Terminal(n.to_string()))),
        Symbol::Constant(i) => Some(Poly::atom(Atom::Constant(*i))),
        Symbol::Literal(v) if *v == 0.0 => Some(Poly::default()),
        Symbol::Literal(v) => Some(Poly::atom(Atom::Literal(v.to_bits()))),
        Symbol::Op(Operator::Neg) => to_poly(&t.children[0])?.neg(),
        Symbol::Op(op) => {
            let a = to_poly(&t.children[0])?;
            let b = to_poly(&t.children[1])?;
            match op {
                Operator::Add => a.add(&b, 1),
                Operator::Sub => a.add(&b, -1),
                Operator::Mul => a.mul(&b),
                Operator::Neg => unreachable!(),
            }
        }
    }
}

fn degree(m: &Monomial) -> u32 {
    m.iter().map(|(_, p)| p).sum()
}

fn render(poly: &Poly) -> String {
    if poly.terms.is_empty() {
        return "0".into();
    }
    let mut terms: Vec<(&Monomial, &i128)> = poly.terms.iter().collect();
    // Highest degree first, then atom order.
    terms.sort_by(|a, b| degree(b.0).cmp(&degree(a.0)).then_with(|| a.0.cmp(b.0)));
    let mut out = String::new();
    for (k, (mono, &coef)) in terms.into_iter().enumerate() {
        let neg = coef < 0;
        let mag = coef.unsigned_abs();
        if k == 0 {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        let mut first = true;
        if mag != 1 || mono.is_empty() {
            let _ = write!(out, "{mag}");
            first = false;
        }
        for (atom, pow) in mono {
            if !first {
                out.push('*');
            }
            first = false;
            atom.render(&mut out);
            if *pow > 1 {
                let _ = write!(out, "^{pow}");
            }
        }
    }
    out
}

/// Algebraically normalized, deterministic key for a phenotype.
pub fn canonical_key(t: &ExprTree) -> String {
    match to_poly(t) {
        Some(p) => render(&p),
        None => {
            let toks: Vec<String> = t.preorder().iter().map(|s| s.to_string()).collect();
            format!("raw:{}", toks.join(" "))
        }
    }
}
