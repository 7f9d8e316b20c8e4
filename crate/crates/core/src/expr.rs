//! A small arithmetic expression language with symbolic differentiation.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?          // right associative
//! atom    := number | ident | ident '(' expr ')' | '(' expr ')'
//! number  := digits ['.' digits] [('e' | 'E') ['+' | '-'] digits]
//! ```
//!
//! Identifiers are either one of the declared variables, the constants `pi`
//! and `e`, or one of the functions `exp`, `ln`, `sqrt`, `tanh`, `sin`,
//! `cos`, `abs`.
//!
//! ```
//! use volctl::expr::Expr;
//!
//! let g = Expr::parse("exp(-x^2)", &["x"]).unwrap();
//! let g2 = g.derivative(0).unwrap().derivative(0).unwrap();
//! let x = 0.7_f64;
//! let expected = (4.0 * x * x - 2.0) * (-x * x).exp();
//! assert!((g2.eval(&[x]) - expected).abs() < 1e-12);
//! ```

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("column {column}: {message}")]
    Parse { column: usize, message: String },

    #[error("column {column}: unknown identifier `{name}`")]
    UnknownIdentifier { column: usize, name: String },

    #[error("`{0}` is not differentiable everywhere and a derivative is required")]
    NonDifferentiable(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sqrt,
    Tanh,
    Sin,
    Cos,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Abs => "abs",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Tanh => v.tanh(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Abs => v.abs(),
        }
    }
}

/// Expression tree. Variables are indices into the name list given to
/// [`Expr::parse`].
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str, vars: &[&str]) -> Result<Expr, ExprError> {
        let tokens = lex(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            vars,
            len: src.len(),
        };
        let e = p.expr()?;
        if let Some(tok) = p.tokens.get(p.pos) {
            return Err(ExprError::Parse {
                column: tok.column,
                message: format!("unexpected {}", tok.kind),
            });
        }
        Ok(e)
    }

    pub fn eval(&self, vars: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => vars[*i],
            Expr::Neg(a) => -a.eval(vars),
            Expr::Add(a, b) => a.eval(vars) + b.eval(vars),
            Expr::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Expr::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Expr::Div(a, b) => a.eval(vars) / b.eval(vars),
            Expr::Pow(a, b) => {
                let base = a.eval(vars);
                match **b {
                    Expr::Num(k) if k.fract() == 0.0 && k.abs() < 64.0 => base.powi(k as i32),
                    _ => base.powf(b.eval(vars)),
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(vars)),
        }
    }

    /// Whether the expression mentions variable `var`.
    pub fn depends_on(&self, var: usize) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(i) => *i == var,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(var),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.depends_on(var) || b.depends_on(var),
        }
    }

    /// Symbolic partial derivative with respect to variable `var`.
    pub fn derivative(&self, var: usize) -> Result<Expr, ExprError> {
        use Expr::*;
        if !self.depends_on(var) {
            return Ok(Num(0.0));
        }
        let d = match self {
            Num(_) => Num(0.0),
            Var(i) => Num(if *i == var { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.derivative(var)?),
            Add(a, b) => add(a.derivative(var)?, b.derivative(var)?),
            Sub(a, b) => sub(a.derivative(var)?, b.derivative(var)?),
            Mul(a, b) => add(
                mul(a.derivative(var)?, (**b).clone()),
                mul((**a).clone(), b.derivative(var)?),
            ),
            Div(a, b) => {
                // (a'b - ab') / b^2
                let num = sub(
                    mul(a.derivative(var)?, (**b).clone()),
                    mul((**a).clone(), b.derivative(var)?),
                );
                div(num, pow((**b).clone(), Num(2.0)))
            }
            Pow(a, b) => {
                if !b.depends_on(var) {
                    // c a^(c-1) a'
                    let c = (**b).clone();
                    mul(
                        mul(c.clone(), pow((**a).clone(), sub(c, Num(1.0)))),
                        a.derivative(var)?,
                    )
                } else {
                    // a^b (b' ln a + b a'/a)
                    let inner = add(
                        mul(b.derivative(var)?, call(Func::Ln, (**a).clone())),
                        div(mul((**b).clone(), a.derivative(var)?), (**a).clone()),
                    );
                    mul(self.clone(), inner)
                }
            }
            Call(f, a) => {
                let da = a.derivative(var)?;
                let inner = (**a).clone();
                let outer = match f {
                    Func::Exp => call(Func::Exp, inner),
                    Func::Ln => div(Num(1.0), inner),
                    Func::Sqrt => div(Num(0.5), call(Func::Sqrt, inner)),
                    Func::Tanh => sub(Num(1.0), pow(call(Func::Tanh, inner), Num(2.0))),
                    Func::Sin => call(Func::Cos, inner),
                    Func::Cos => neg(call(Func::Sin, inner)),
                    Func::Abs => return Err(ExprError::NonDifferentiable("abs")),
                };
                mul(outer, da)
            }
        };
        Ok(d)
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
        (Expr::Num(z), other) | (other, Expr::Num(z)) if z == 0.0 => other,
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

#[allow(clippy::redundant_guards)]
fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
        (other, Expr::Num(z)) if z == 0.0 => other,
        (Expr::Num(z), other) if z == 0.0 => neg(other),
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

#[allow(clippy::redundant_guards)]
fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
        (Expr::Num(z), _) | (_, Expr::Num(z)) if z == 0.0 => Expr::Num(0.0),
        (Expr::Num(o), other) | (other, Expr::Num(o)) if o == 1.0 => other,
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

#[allow(clippy::redundant_guards)]
fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(z), _) if z == 0.0 => Expr::Num(0.0),
        (other, Expr::Num(o)) if o == 1.0 => other,
        (a, b) => Expr::Div(Box::new(a), Box::new(b)),
    }
}

#[allow(clippy::redundant_guards)]
fn pow(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (_, Expr::Num(z)) if z == 0.0 => Expr::Num(1.0),
        (other, Expr::Num(o)) if o == 1.0 => other,
        (a, b) => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(f.apply(v)),
        other => Expr::Call(f, Box::new(other)),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "${i}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    Op(char),
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Num(v) => write!(f, "number {v}"),
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Op(c) => write!(f, "`{c}`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    /// 1-based column of the first character.
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let column = i + 1;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
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
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| ExprError::Parse {
                column,
                message: format!("malformed number `{text}`"),
            })?;
            out.push(Token {
                kind: TokenKind::Num(v),
                column,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                kind: TokenKind::Ident(src[start..i].to_string()),
                column,
            });
        } else if "+-*/^()".contains(c) {
            out.push(Token {
                kind: TokenKind::Op(c),
                column,
            });
            i += 1;
        } else {
            return Err(ExprError::Parse {
                column,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    vars: &'a [&'a str],
    len: usize,
}

impl Parser<'_> {
    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos).map(|t| &t.kind) {
            Some(TokenKind::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn eof_error(&self) -> ExprError {
        ExprError::Parse {
            column: self.len + 1,
            message: "unexpected end of expression".into(),
        }
    }

    fn expect(&mut self, op: char) -> Result<(), ExprError> {
        match self.tokens.get(self.pos) {
            Some(Token {
                kind: TokenKind::Op(c),
                ..
            }) if *c == op => {
                self.pos += 1;
                Ok(())
            }
            Some(tok) => Err(ExprError::Parse {
                column: tok.column,
                message: format!("expected `{op}`, found {}", tok.kind),
            }),
            None => Err(self.eof_error()),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.peek_op() == Some('+') {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let tok = self.tokens.get(self.pos).cloned().ok_or_else(|| self.eof_error())?;
        self.pos += 1;
        match tok.kind {
            TokenKind::Num(v) => Ok(Expr::Num(v)),
            TokenKind::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            TokenKind::Ident(name) => {
                if let Some(idx) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Expr::Var(idx));
                }
                match name.as_str() {
                    "pi" => return Ok(Expr::Num(std::f64::consts::PI)),
                    "e" => return Ok(Expr::Num(std::f64::consts::E)),
                    _ => {}
                }
                let func = Func::from_name(&name).ok_or(ExprError::UnknownIdentifier {
                    column: tok.column,
                    name: name.clone(),
                })?;
                self.expect('(')?;
                let arg = self.expr()?;
                self.expect(')')?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            other => Err(ExprError::Parse {
                column: tok.column,
                message: format!("unexpected {other}"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd2(e: &Expr, x: f64) -> f64 {
        let h = 1e-4;
        (e.eval(&[x + h]) - 2.0 * e.eval(&[x]) + e.eval(&[x - h])) / (h * h)
    }

    const PROBES: [f64; 5] = [-1.7, -0.4, 0.0, 0.3, 2.2];

    #[test]
    fn tanh_second_derivative() {
        let f = Expr::parse("tanh(x)", &["x"]).unwrap();
        let f2 = f.derivative(0).unwrap().derivative(0).unwrap();
        for x in PROBES {
            let t = x.tanh();
            let closed = -2.0 * t * (1.0 - t * t);
            assert!((f2.eval(&[x]) - closed).abs() < 1e-12);
            assert!((f2.eval(&[x]) - fd2(&f, x)).abs() < 1e-5);
        }
    }

    #[test]
    fn gaussian_second_derivative() {
        let g = Expr::parse("exp(-x^2)", &["x"]).unwrap();
        let g2 = g.derivative(0).unwrap().derivative(0).unwrap();
        for x in PROBES {
            let closed = (4.0 * x * x - 2.0) * (-x * x).exp();
            assert!((g2.eval(&[x]) - closed).abs() < 1e-12);
            assert!((g2.eval(&[x]) - fd2(&g, x)).abs() < 1e-5);
        }
    }

    #[test]
    fn precedence_and_associativity() {
        let e = Expr::parse("2 + 3 * 4 ^ 2 ^ 0.5 - -1", &[]).unwrap();
        let expected = 2.0 + 3.0 * 4f64.powf(2f64.powf(0.5)) + 1.0;
        assert!((e.eval(&[]) - expected).abs() < 1e-12);
        let e = Expr::parse("-x^2", &["x"]).unwrap();
        assert_eq!(e.eval(&[3.0]), -9.0);
        let e = Expr::parse("1.5e-1 * pi / 2", &[]).unwrap();
        assert!((e.eval(&[]) - 0.15 * std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn two_variables() {
        let e = Expr::parse("x*y + sin(y)", &["x", "y"]).unwrap();
        let dxy = e.derivative(0).unwrap().derivative(1).unwrap();
        assert_eq!(dxy.eval(&[0.3, 0.9]), 1.0);
        let dyy = e.derivative(1).unwrap().derivative(1).unwrap();
        assert!((dyy.eval(&[0.3, 0.9]) + 0.9f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn variable_exponent() {
        let e = Expr::parse("x^x", &["x"]).unwrap();
        let d = e.derivative(0).unwrap();
        let x: f64 = 1.3;
        assert!((d.eval(&[x]) - x.powf(x) * (x.ln() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn errors_carry_columns() {
        assert_eq!(
            Expr::parse("1 + foo(x)", &["x"]),
            Err(ExprError::UnknownIdentifier {
                column: 5,
                name: "foo".into()
            })
        );
        match Expr::parse("(x + 1", &["x"]) {
            Err(ExprError::Parse { column, .. }) => assert_eq!(column, 7),
            other => panic!("unexpected {other:?}"),
        }
        match Expr::parse("x $ 2", &["x"]) {
            Err(ExprError::Parse { column, .. }) => assert_eq!(column, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Expr::parse("y", &["x"]).is_err());
    }

    #[test]
    fn abs_is_not_differentiable() {
        let e = Expr::parse("abs(x) + 1", &["x"]).unwrap();
        assert_eq!(e.eval(&[-2.0]), 3.0);
        assert_eq!(
            e.derivative(0),
            Err(ExprError::NonDifferentiable("abs"))
        );
        // constant abs is fine
        let e = Expr::parse("abs(-2) * x", &["x"]).unwrap();
        assert_eq!(e.derivative(0).unwrap().eval(&[1.0]), 2.0);
    }
}
