use super::{ExprTree, Operator, SymRegError, Symbol};

/// Parse an infix expression such as `0.945 - 2.108*J1` or `(I1 + c0) * I2`.
///
/// Supports `+`, `-`, `*`, unary minus, parentheses, numeric literals,
/// pool constants written `c<k>`, and terminal names.
pub fn parse_expr(input: &str) -> Result<ExprTree, SymRegError> {
    let tokens = tokenize(input)?;
    let mut p = Parser { input, tokens, pos: 0 };
    let tree = p.expr()?;
    if p.pos != p.tokens.len() {
        return Err(p.error(format!("unexpected `{}`", p.tokens[p.pos])));
    }
    Ok(tree)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "{v}"),
            Tok::Ident(s) => f.write_str(s),
            Tok::Plus => f.write_str("+"),
            Tok::Minus => f.write_str("-"),
            Tok::Star => f.write_str("*"),
            Tok::LParen => f.write_str("("),
            Tok::RParen => f.write_str(")"),
        }
    }
}

fn tokenize(input: &str) -> Result<Vec<Tok>, SymRegError> {
    let chars: Vec<char> = input.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1
            }
            '-' | '−' => {
                out.push(Tok::Minus);
                i += 1
            }
            '*' | '×' => {
                out.push(Tok::Star);
                i += 1
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                // exponent part
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let v = text.parse::<f64>().map_err(|_| SymRegError::Parse {
                    input: input.into(),
                    reason: format!("bad number `{text}`"),
                })?;
                out.push(Tok::Num(v));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Tok::Ident(chars[start..i].iter().collect()));
            }
            other => {
                return Err(SymRegError::Parse {
                    input: input.into(),
                    reason: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    input: &'a str,
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, reason: String) -> SymRegError {
        SymRegError::Parse { input: self.input.into(), reason }
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn expr(&mut self) -> Result<ExprTree, SymRegError> {
        let mut lhs = self.term()?;
        while let Some(op) = match self.peek() {
            Some(Tok::Plus) => Some(Operator::Add),
            Some(Tok::Minus) => Some(Operator::Sub),
            _ => None,
        } {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = ExprTree::op(op, vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<ExprTree, SymRegError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Star) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = ExprTree::op(Operator::Mul, vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<ExprTree, SymRegError> {
        if let Some(Tok::Minus) = self.peek() {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(match inner.node {
                Symbol::Literal(v) => ExprTree::leaf(Symbol::Literal(-v)),
                _ => ExprTree::op(Operator::Neg, vec![inner]),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<ExprTree, SymRegError> {
        let tok = self.tokens.get(self.pos).cloned().ok_or_else(|| self.error("unexpected end".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(ExprTree::leaf(Symbol::Literal(v))),
            Tok::Ident(name) => Ok(ExprTree::leaf(Symbol::from_token(&name)?)),
            Tok::LParen => {
                let inner = self.expr()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => Err(self.error("missing `)`".into())),
                }
            }
            other => Err(self.error(format!("unexpected `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symreg::{eval_tree, ConstantsPool};

    #[test]
    fn parses_reference_shapes() {
        let pool = ConstantsPool::with_values(vec![3.0]);
        let row = [("I1", 0.5), ("J1", 0.25)];
        let cases = [
            ("-0.1 - I1", -0.6),
            ("0.945 - 2.108*J1", 0.945 - 2.108 * 0.25),
            ("(I1 + c0) * -J1", -(0.5 + 3.0) * 0.25),
            ("2 - J1*(J1 - 2.0)", 2.0 - 0.25 * (0.25 - 2.0)),
            ("1e-1 * I1", 0.05),
        ];
        for (text, want) in cases {
            let t = parse_expr(text).unwrap();
            let got = eval_tree(&t, &row, &pool).unwrap();
            assert!((got - want).abs() < 1e-15, "{text}: {got} vs {want}");
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_expr("I1 +").is_err());
        assert!(parse_expr("(I1").is_err());
        assert!(parse_expr("I1 $ 2").is_err());
        assert!(parse_expr("I1 I2").is_err());
    }
}
