//! Small arithmetic grammar for propensity expressions.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' ['-'] integer)?
//! atom  := number | identifier | '(' expr ')'
//! ```
//! `×` and `÷` are accepted as aliases of `*` and `/`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '+' | '-' | '*' | '/' | '^' | '(' | ')' => {
                out.push(Token::Op(c));
                i += 1;
            }
            '×' => {
                out.push(Token::Op('*'));
                i += 1;
            }
            '÷' => {
                out.push(Token::Op('/'));
                i += 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
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
                let v = text.parse::<f64>().map_err(|_| Error::Expr(format!("bad number `{text}`")))?;
                out.push(Token::Num(v));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token::Ident(chars[start..i].iter().collect()));
            }
            other => return Err(Error::Expr(format!("unexpected character `{other}` in `{src}`"))),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Token::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn err(&self, what: &str) -> Error {
        Error::Expr(format!("{what} at token {} in `{}`", self.pos, self.src))
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' { Expr::Add(lhs.into(), rhs.into()) } else { Expr::Sub(lhs.into(), rhs.into()) };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' { Expr::Mul(lhs.into(), rhs.into()) } else { Expr::Div(lhs.into(), rhs.into()) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(Expr::Neg(self.unary()?.into()));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek_op() != Some('^') {
            return Ok(base);
        }
        self.pos += 1;
        let negative = self.peek_op() == Some('-');
        if negative {
            self.pos += 1;
        }
        match self.tokens.get(self.pos) {
            Some(Token::Num(v)) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => {
                self.pos += 1;
                let e = *v as i32;
                Ok(Expr::Pow(base.into(), if negative { -e } else { e }))
            }
            _ => Err(self.err("exponent must be an integer literal")),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.tokens.get(self.pos).cloned() {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                Ok(Expr::Var(name))
            }
            Some(Token::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek_op() != Some(')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            _ => Err(self.err("expected a number, name or `(`")),
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0, src };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(p.err("trailing input"));
        }
        Ok(e)
    }

    /// Resolves names: species become coordinate lookups, constants are folded in.
    pub fn bind(&self, species: &[String], constants: &BTreeMap<String, f64>) -> Result<BoundExpr> {
        use Expr::*;
        Ok(match self {
            Num(v) => BoundExpr::Const(*v),
            Var(name) => {
                if let Some(k) = species.iter().position(|s| s == name) {
                    BoundExpr::Coord(k)
                } else if let Some(&v) = constants.get(name) {
                    BoundExpr::Const(v)
                } else {
                    return Err(Error::Expr(format!("unknown name `{name}`")));
                }
            }
            Neg(a) => BoundExpr::Neg(a.bind(species, constants)?.into()),
            Add(a, b) => BoundExpr::Add(a.bind(species, constants)?.into(), b.bind(species, constants)?.into()),
            Sub(a, b) => BoundExpr::Sub(a.bind(species, constants)?.into(), b.bind(species, constants)?.into()),
            Mul(a, b) => BoundExpr::Mul(a.bind(species, constants)?.into(), b.bind(species, constants)?.into()),
            Div(a, b) => BoundExpr::Div(a.bind(species, constants)?.into(), b.bind(species, constants)?.into()),
            Pow(a, e) => BoundExpr::Pow(a.bind(species, constants)?.into(), *e),
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Expr::*;
        match self {
            Num(v) => write!(f, "{v:?}"),
            Var(n) => write!(f, "{n}"),
            Neg(a) => write!(f, "(-{a})"),
            Add(a, b) => write!(f, "({a} + {b})"),
            Sub(a, b) => write!(f, "({a} - {b})"),
            Mul(a, b) => write!(f, "({a} * {b})"),
            Div(a, b) => write!(f, "({a} / {b})"),
            Pow(a, e) => write!(f, "({a}^{e})"),
        }
    }
}

/// Expression with names resolved against a species ordering.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundExpr {
    Const(f64),
    Coord(usize),
    Neg(Box<BoundExpr>),
    Add(Box<BoundExpr>, Box<BoundExpr>),
    Sub(Box<BoundExpr>, Box<BoundExpr>),
    Mul(Box<BoundExpr>, Box<BoundExpr>),
    Div(Box<BoundExpr>, Box<BoundExpr>),
    Pow(Box<BoundExpr>, i32),
}

impl BoundExpr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        use BoundExpr::*;
        match self {
            Const(v) => *v,
            Coord(k) => x[*k],
            Neg(a) => -a.eval(x),
            Add(a, b) => a.eval(x) + b.eval(x),
            Sub(a, b) => a.eval(x) - b.eval(x),
            Mul(a, b) => a.eval(x) * b.eval(x),
            Div(a, b) => a.eval(x) / b.eval(x),
            Pow(a, e) => a.eval(x).powi(*e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, vars: &[(&str, f64)]) -> f64 {
        let species: Vec<String> = vars.iter().map(|(n, _)| n.to_string()).collect();
        let x: Vec<f64> = vars.iter().map(|(_, v)| *v).collect();
        Expr::parse(src).unwrap().bind(&species, &BTreeMap::new()).unwrap().eval(&x)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2 * 3", &[]), 7.0);
        assert_eq!(eval("(1 + 2) * 3", &[]), 9.0);
        assert_eq!(eval("8 / 4 / 2", &[]), 1.0);
        assert_eq!(eval("10 - 3 - 2", &[]), 5.0);
        assert_eq!(eval("-2^2", &[]), -4.0);
        assert_eq!(eval("2^-1", &[]), 0.5);
        assert_eq!(eval("3 × 4 ÷ 6", &[]), 2.0);
    }

    #[test]
    fn scientific_literals_and_names() {
        assert_eq!(eval("7.5e-6 * gen * s", &[("gen", 100.0), ("s", 2.0)]), 7.5e-6 * 200.0);
        assert_eq!(eval("c / ((65 + y^2) * (65 + z^2))", &[("c", 4225.0), ("y", 0.0), ("z", 0.0)]), 1.0);
    }

    #[test]
    fn constants_fold() {
        let mut k = BTreeMap::new();
        k.insert("k5".to_string(), 1000.0);
        let e = Expr::parse("k5*tem").unwrap().bind(&["tem".into()], &k).unwrap();
        assert_eq!(e.eval(&[30.0]), 30000.0);
    }

    #[test]
    fn errors() {
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("(1 + 2").is_err());
        assert!(Expr::parse("x ^ 1.5").is_err());
        assert!(Expr::parse("x $ 2").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("y").unwrap().bind(&["x".into()], &BTreeMap::new()).is_err());
    }

    #[test]
    fn display_reparses_to_same_value() {
        let e = Expr::parse("a*b - c/(1+a)^2").unwrap();
        let again = Expr::parse(&e.to_string()).unwrap();
        let sp: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let x = [1.5, -2.0, 3.25];
        let k = BTreeMap::new();
        assert_eq!(e.bind(&sp, &k).unwrap().eval(&x), again.bind(&sp, &k).unwrap().eval(&x));
    }
}
