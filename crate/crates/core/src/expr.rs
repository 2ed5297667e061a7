//! Scalar expression language for chart coefficients, energies and curves.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = primary [ "^" unary ] ;
//! primary = number | variable | func "(" expr ")" | "(" expr ")" ;
//! func    = "sqrt" | "exp" | "log" | "sin" | "cos" ;
//! ```
//!
//! Variables are `x1..x{2m+1}`, `v1..v{2m}` and (for curves) `t`; which ones
//! are legal is fixed by a [`VarScope`]. Evaluation is generic over
//! [`Scalar`], so the same tree yields plain values or jets.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::jets::{Coord, JetError, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: found {found}, expected one of {}", expected.join(", "))]
    Syntax { offset: usize, found: String, expected: Vec<String> },
    #[error("unknown identifier `{name}` at byte {offset}; permitted: {}", permitted.join(", "))]
    UnknownIdentifier { name: String, offset: usize, permitted: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable {0}")]
    Unbound(Coord),
    #[error(transparent)]
    Domain(#[from] JetError),
}

/// Which variables an expression may mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarScope {
    pub m: usize,
    pub base: bool,
    pub fiber: bool,
    pub param: bool,
}

impl VarScope {
    pub fn base(m: usize) -> Self {
        VarScope { m, base: true, fiber: false, param: false }
    }

    pub fn total(m: usize) -> Self {
        VarScope { m, base: true, fiber: true, param: false }
    }

    pub fn curve() -> Self {
        VarScope { m: 0, base: false, fiber: false, param: true }
    }

    fn resolve(&self, name: &str) -> Option<Coord> {
        if name == "t" {
            return self.param.then_some(Coord::Param);
        }
        let (head, digits) = name.split_at(1);
        if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let k: usize = digits.parse().ok()?;
        match head {
            "x" if self.base && k <= 2 * self.m + 1 => Some(Coord::Base(k - 1)),
            "v" if self.fiber && k <= 2 * self.m => Some(Coord::Fiber(k - 1)),
            _ => None,
        }
    }

    fn permitted(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.base {
            out.extend((1..=2 * self.m + 1).map(|k| format!("x{k}")));
        }
        if self.fiber {
            out.extend((1..=2 * self.m).map(|k| format!("v{k}")));
        }
        if self.param {
            out.push("t".into());
        }
        out.extend(FUNCS.iter().map(|f| format!("{}()", f.name())));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
}

const FUNCS: [Func; 5] = [Func::Sqrt, Func::Exp, Func::Log, Func::Sin, Func::Cos];

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Coord),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Values bound to the variables of an expression.
#[derive(Debug, Clone, Copy)]
pub struct Bindings<'a, T> {
    pub x: &'a [T],
    pub v: &'a [T],
    pub t: Option<&'a T>,
}

impl<'a, T> Bindings<'a, T> {
    pub fn base(x: &'a [T]) -> Self {
        Bindings { x, v: &[], t: None }
    }

    pub fn total(x: &'a [T], v: &'a [T]) -> Self {
        Bindings { x, v, t: None }
    }

    pub fn param(t: &'a T) -> Self {
        Bindings { x: &[], v: &[], t: Some(t) }
    }

    fn get(&self, c: Coord) -> Option<&'a T> {
        match c {
            Coord::Base(i) => self.x.get(i),
            Coord::Fiber(a) => self.v.get(a),
            Coord::Param => self.t,
        }
    }
}

impl Expr {
    pub fn parse(text: &str, scope: &VarScope) -> Result<Expr, ParseError> {
        let tokens = lex(text)?;
        let mut p = Parser { tokens, pos: 0, scope };
        let e = p.expr()?;
        match p.peek() {
            Tok::End => Ok(e),
            _ => Err(p.unexpected(&["operator", "end of input"])),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Coord> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Coord>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(c) => {
                out.insert(*c);
            }
            Expr::Neg(e) | Expr::Call(_, e) => e.collect_vars(out),
            Expr::Bin(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    /// Constant value if the expression mentions no variables.
    pub fn constant_value(&self) -> Option<f64> {
        if !self.free_vars().is_empty() {
            return None;
        }
        self.evaluate::<f64>(&Bindings { x: &[], v: &[], t: None }).ok()
    }

    pub fn evaluate<T: Scalar>(&self, env: &Bindings<'_, T>) -> Result<T, EvalError> {
        Ok(match self {
            Expr::Num(c) => T::from_f64(*c),
            Expr::Var(c) => env.get(*c).cloned().ok_or(EvalError::Unbound(*c))?,
            Expr::Neg(e) => -e.evaluate(env)?,
            Expr::Call(f, e) => {
                let a = e.evaluate(env)?;
                match f {
                    Func::Sqrt => a.sqrt()?,
                    Func::Exp => a.exp(),
                    Func::Log => a.ln()?,
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                }
            }
            Expr::Bin(op, l, r) => {
                if *op == BinOp::Pow {
                    return self.evaluate_pow(l, r, env);
                }
                let a = l.evaluate(env)?;
                let b = r.evaluate(env)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a.div(&b)?,
                    BinOp::Pow => unreachable!(),
                }
            }
        })
    }

    fn evaluate_pow<T: Scalar>(&self, l: &Expr, r: &Expr, env: &Bindings<'_, T>) -> Result<T, EvalError> {
        let base = l.evaluate(env)?;
        let exponent = match r {
            Expr::Num(c) => Some(*c),
            _ => r.constant_value(),
        };
        match exponent {
            Some(p) if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 => Ok(base.powi(p as i32)?),
            Some(p) => Ok(base.powf(p)?),
            None => {
                let e = r.evaluate(env)?;
                Ok((e * base.ln()?).exp())
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => write!(f, "{c}"),
            Expr::Var(c) => write!(f, "{c}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
            Expr::Bin(op, l, r) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({l} {sym} {r})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(c) => write!(f, "number {c}"),
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Op(c) => write!(f, "`{c}`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::End => write!(f, "end of input"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = &text[start..i];
            let value = lit.parse::<f64>().map_err(|_| ParseError::Syntax {
                offset: start,
                found: format!("malformed number `{lit}`"),
                expected: vec!["number".into()],
            })?;
            out.push((Tok::Num(value), start));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
        } else {
            let tok = match c {
                b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                _ => {
                    let ch = text[start..].chars().next().unwrap_or('?');
                    return Err(ParseError::Syntax {
                        offset: start,
                        found: format!("character `{ch}`"),
                        expected: vec!["number".into(), "variable".into(), "operator".into(), "parenthesis".into()],
                    });
                }
            };
            i += 1;
            out.push((tok, start));
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser<'s> {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    scope: &'s VarScope,
}

const OPERAND: [&str; 4] = ["number", "variable", "function", "`(`"];

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        ParseError::Syntax {
            offset: self.offset(),
            found: self.peek().to_string(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(c) => {
                self.bump();
                Ok(Expr::Num(c))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(func) = FUNCS.iter().copied().find(|f| f.name() == name) {
                    self.bump();
                    if *self.peek() != Tok::LParen {
                        return Err(self.unexpected(&["`(`"]));
                    }
                    self.bump();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                match self.scope.resolve(&name) {
                    Some(c) => {
                        self.bump();
                        Ok(Expr::Var(c))
                    }
                    None => Err(ParseError::UnknownIdentifier { name, offset, permitted: self.scope.permitted() }),
                }
            }
            _ => Err(self.unexpected(&OPERAND)),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&["`)`", "operator"]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::{extract, seed_variable, Jet, JetContext};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn total(m: usize) -> VarScope {
        VarScope::total(m)
    }

    #[test]
    fn parses_sum_of_squares() {
        let e = Expr::parse("v1^2 + v2^2", &total(2)).unwrap();
        let sq = |a| Expr::Bin(BinOp::Pow, Box::new(Expr::Var(Coord::Fiber(a))), Box::new(Expr::Num(2.0)));
        assert_eq!(e, Expr::Bin(BinOp::Add, Box::new(sq(0)), Box::new(sq(1))));
    }

    #[test]
    fn parses_negated_variable() {
        let e = Expr::parse("-x2", &VarScope::base(2)).unwrap();
        assert_eq!(e, Expr::Neg(Box::new(Expr::Var(Coord::Base(1)))));
    }

    #[test]
    fn malformed_input_points_at_star() {
        let err = Expr::parse("v1 + * v2", &total(2)).unwrap_err();
        match err {
            ParseError::Syntax { offset, found, .. } => {
                assert_eq!(offset, 5);
                assert_eq!(found, "`*`");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_identifier_lists_permitted() {
        let err = Expr::parse("x6 + 1", &VarScope::base(2)).unwrap_err();
        match err {
            ParseError::UnknownIdentifier { name, permitted, .. } => {
                assert_eq!(name, "x6");
                assert!(permitted.contains(&"x5".to_string()));
                assert!(!permitted.contains(&"v1".to_string()));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(Expr::parse("abs(v1)", &total(2)).is_err());
        assert!(Expr::parse("v1", &VarScope::base(2)).is_err());
        assert!(Expr::parse("x01", &VarScope::base(2)).is_err());
    }

    #[test]
    fn precedence_and_associativity() {
        let s = total(2);
        let eval = |t: &str| Expr::parse(t, &s).unwrap().evaluate::<f64>(&Bindings::total(&[0.0; 5], &[0.0; 4])).unwrap();
        assert_eq!(eval("-2^2"), -4.0);
        assert_eq!(eval("2^3^2"), 512.0);
        assert_eq!(eval("8/4/2"), 1.0);
        assert_eq!(eval("1-2-3"), -4.0);
        assert_eq!(eval("2*3+4*5"), 26.0);
        assert_eq!(eval("(1+2)*3"), 9.0);
        assert_eq!(eval("2^-1"), 0.5);
        assert_eq!(eval("1.5e1 + 2E-1"), 15.2);
    }

    #[test]
    fn evaluates_examples() {
        let s = total(2);
        let e = Expr::parse("v1^2+v2^2+v3^2+v4^2", &s).unwrap();
        assert_eq!(e.evaluate::<f64>(&Bindings::total(&[0.0; 5], &[1.0, 0.0, 0.0, 0.0])).unwrap(), 1.0);
        let e = Expr::parse("exp(2*x2)*v1^2", &s).unwrap();
        assert_eq!(e.evaluate::<f64>(&Bindings::total(&[0.0; 5], &[3.0, 0.0, 0.0, 0.0])).unwrap(), 9.0);
    }

    #[test]
    fn jet_evaluation_gives_constant_hessian() {
        let e = Expr::parse("v1^2", &total(2)).unwrap();
        let ctx = JetContext::new(vec![Coord::Fiber(0)]);
        let v1 = seed_variable(&ctx, Coord::Fiber(0), 3.0, 2).unwrap();
        let zero = Jet::constant(0.0);
        let v = [v1, zero.clone(), zero.clone(), zero];
        let x: Vec<Jet<f64>> = vec![Jet::constant(0.0); 5];
        let out = e.evaluate(&Bindings::total(&x, &v)).unwrap();
        assert_eq!(extract(&out, &[Coord::Fiber(0), Coord::Fiber(0)]).unwrap(), 2.0);
    }

    #[test]
    fn evaluation_errors() {
        let s = total(2);
        let x = [0.0; 5];
        let v = [1.0, 0.0, 0.0, 0.0];
        let env = Bindings::total(&x, &v);
        assert!(matches!(Expr::parse("log(x1)", &s).unwrap().evaluate(&env), Err(EvalError::Domain(_))));
        assert!(matches!(Expr::parse("1/x1", &s).unwrap().evaluate(&env), Err(EvalError::Domain(_))));
        assert!(matches!(Expr::parse("sqrt(x1-1)", &s).unwrap().evaluate(&env), Err(EvalError::Domain(_))));
        assert!(matches!(Expr::parse("(x1-1)^0.5", &s).unwrap().evaluate(&env), Err(EvalError::Domain(_))));
        assert_eq!(Expr::parse("(x1-1)^3", &s).unwrap().evaluate(&env).unwrap(), -1.0);
        let base_only = Bindings::base(&x);
        assert_eq!(
            Expr::parse("v3", &s).unwrap().evaluate(&base_only).unwrap_err(),
            EvalError::Unbound(Coord::Fiber(2))
        );
    }

    #[test]
    fn free_variables() {
        let e = Expr::parse("exp(2*x2)*v1^2 + x2*v4", &total(2)).unwrap();
        let vars: Vec<Coord> = e.free_vars().into_iter().collect();
        assert_eq!(vars, vec![Coord::Base(1), Coord::Fiber(0), Coord::Fiber(3)]);
    }

    fn arb_expr() -> impl Strategy<Value = String> {
        let leaf = prop_oneof![
            (0.1f64..3.0).prop_map(|c| format!("{c}")),
            (1usize..=5).prop_map(|k| format!("x{k}")),
            (1usize..=4).prop_map(|k| format!("v{k}")),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} * {b}")),
                (inner.clone(), 1u32..4).prop_map(|(a, k)| format!("({a})^{k}")),
                inner.clone().prop_map(|a| format!("sin({a})")),
                inner.clone().prop_map(|a| format!("exp(0.3*{a})")),
                inner.clone().prop_map(|a| format!("sqrt(1 + ({a})^2)")),
                inner.prop_map(|a| format!("-{a}")),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(text in arb_expr()) {
            let s = total(2);
            let e = Expr::parse(&text, &s).unwrap();
            let again = Expr::parse(&e.to_string(), &s).unwrap();
            prop_assert_eq!(&e, &again);
            prop_assert_eq!(Expr::parse(&text, &s).unwrap(), e);
        }

        #[test]
        fn jet_first_derivatives_match_finite_differences(
            text in arb_expr(),
            pt in proptest::collection::vec(-0.8f64..0.8, 9),
        ) {
            let s = total(2);
            let e = Expr::parse(&text, &s).unwrap();
            let dirs: Vec<Coord> = (0..5).map(Coord::Base).chain((0..4).map(Coord::Fiber)).collect();
            let ctx = JetContext::new(dirs.clone());
            let seeds: Vec<Jet<f64>> = (0..9).map(|i| Jet::seed(&ctx, i, pt[i], 1).unwrap()).collect();
            let jet = e.evaluate(&Bindings::total(&seeds[..5], &seeds[5..])).unwrap();
            let f = |p: &[f64]| e.evaluate::<f64>(&Bindings::total(&p[..5], &p[5..])).unwrap();
            let h = 1e-5;
            for d in 0..9 {
                let mut up = pt.clone();
                let mut dn = pt.clone();
                up[d] += h;
                dn[d] -= h;
                let fd = (f(&up) - f(&dn)) / (2.0 * h);
                let ad = jet.partial(&[d]).unwrap();
                let scale = fd.abs().max(ad.abs()).max(1.0);
                prop_assert!((fd - ad).abs() <= 1e-6 * scale, "d={} fd={} ad={}", d, fd, ad);
            }
            assert_relative_eq!(jet.value(), f(&pt), max_relative = 1e-14, epsilon = 1e-14);
        }
    }
}
