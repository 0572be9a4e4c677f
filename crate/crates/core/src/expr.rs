//! Small arithmetic expression language for custom metric coefficients.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := ("-" | "+") unary | power
//! power   := primary ("^" unary)?          right associative
//! primary := number | ident | func "(" args ")" | "(" expr ")"
//! func    := sin | cos | exp | log | sqrt | pow
//! ident   := x1 ... x{n-1} | t
//! ```
//!
//! Coordinates are ordered `x1, ..., x{n-1}, t`, so `t` is the last slot.

use std::fmt;

use thiserror::Error;

use crate::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ParseError {
    /// Byte offset into the source where parsing failed.
    pub position: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "parse error at position {}: expected {}, found {}",
            self.position,
            self.expected.join(" or "),
            self.found
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Pow,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Func::Pow => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    /// Parses `src` for an `n`-dimensional chart (identifiers `x1..x{n-1}`, `t`).
    pub fn parse(src: &str, dimension: usize) -> Result<Self, ParseError> {
        let tokens = tokenize(src)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            dimension,
            src_len: src.len(),
        };
        let expr = parser.expr()?;
        match parser.peek() {
            None => Ok(expr),
            Some(tok) => Err(parser.error_at(tok, &["operator", "end of input"])),
        }
    }

    pub fn eval<T: Real>(&self, x: &[T]) -> T {
        match self {
            Expr::Const(c) => T::lit(*c),
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => pow(a.eval(x), b.eval(x)),
            Expr::Call(f, args) => {
                let a = args[0].eval(x);
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Log => a.ln(),
                    Func::Sqrt => a.sqrt(),
                    Func::Pow => pow(a, args[1].eval(x)),
                }
            }
        }
    }
}

impl Expr {
    /// Symbolic partial derivative with respect to coordinate slot `var`,
    /// with constant folding.
    pub fn derivative(&self, var: usize) -> Expr {
        use Expr::*;
        match self {
            Const(_) => Const(0.0),
            Var(i) => Const(if *i == var { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.derivative(var)),
            Add(a, b) => add(a.derivative(var), b.derivative(var)),
            Sub(a, b) => sub(a.derivative(var), b.derivative(var)),
            Mul(a, b) => add(
                mul(a.derivative(var), (**b).clone()),
                mul((**a).clone(), b.derivative(var)),
            ),
            Div(a, b) => {
                // (a' b - a b') / b^2
                let num = sub(
                    mul(a.derivative(var), (**b).clone()),
                    mul((**a).clone(), b.derivative(var)),
                );
                div(num, pow_expr((**b).clone(), Const(2.0)))
            }
            Pow(a, b) => power_derivative(a, b, var),
            Call(f, args) => {
                let a = &args[0];
                let da = a.derivative(var);
                match f {
                    Func::Sin => mul(Call(Func::Cos, vec![a.clone()]), da),
                    Func::Cos => neg(mul(Call(Func::Sin, vec![a.clone()]), da)),
                    Func::Exp => mul(self.clone(), da),
                    Func::Log => div(da, a.clone()),
                    Func::Sqrt => div(da, mul(Const(2.0), self.clone())),
                    Func::Pow => power_derivative(a, &args[1], var),
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }
}

fn power_derivative(a: &Expr, b: &Expr, var: usize) -> Expr {
    let da = a.derivative(var);
    let db = b.derivative(var);
    if db.is_zero() {
        // b a^(b-1) a'
        let lowered = match b {
            Expr::Const(c) => pow_expr(a.clone(), Expr::Const(c - 1.0)),
            _ => pow_expr(a.clone(), sub(b.clone(), Expr::Const(1.0))),
        };
        return mul(mul(b.clone(), lowered), da);
    }
    // a^b (b' ln a + b a'/a)
    let full = pow_expr(a.clone(), b.clone());
    let inner = add(
        mul(db, Expr::Call(Func::Log, vec![a.clone()])),
        div(mul(b.clone(), da), a.clone()),
    );
    mul(full, inner)
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        (a, b) if b.is_zero() => a,
        (a, b) if a.is_zero() => b,
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
        (a, b) if b.is_zero() => a,
        (a, b) if a.is_zero() => neg(b),
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        (a, b) if a.is_zero() || b.is_zero() => Expr::Const(0.0),
        (Expr::Const(x), b) if x == 1.0 => b,
        (a, Expr::Const(y)) if y == 1.0 => a,
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (a, _) if a.is_zero() => Expr::Const(0.0),
        (a, Expr::Const(y)) if y == 1.0 => a,
        (a, b) => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow_expr(a: Expr, b: Expr) -> Expr {
    match b {
        Expr::Const(c) if c == 0.0 => Expr::Const(1.0),
        Expr::Const(c) if c == 1.0 => a,
        b => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

/// An expression together with its symbolic gradient and Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprJet {
    pub value: Expr,
    pub gradient: Vec<Expr>,
    /// Upper triangle is authoritative; `hessian[i][j] == hessian[j][i]`.
    pub hessian: Vec<Vec<Expr>>,
}

impl ExprJet {
    pub fn new(value: Expr, dimension: usize) -> Self {
        let gradient: Vec<Expr> = (0..dimension).map(|i| value.derivative(i)).collect();
        let mut hessian = vec![vec![Expr::Const(0.0); dimension]; dimension];
        for i in 0..dimension {
            for j in i..dimension {
                let d = gradient[i].derivative(j);
                hessian[i][j] = d.clone();
                hessian[j][i] = d;
            }
        }
        Self {
            value,
            gradient,
            hessian,
        }
    }

    pub fn eval<T: Real>(&self, x: &[T]) -> T {
        self.value.eval(x)
    }

    pub fn eval_gradient<T: Real>(&self, x: &[T]) -> Vec<T> {
        self.gradient.iter().map(|e| e.eval(x)).collect()
    }

    pub fn eval_hessian<T: Real>(&self, x: &[T]) -> Vec<Vec<T>> {
        let n = self.gradient.len();
        let mut out = vec![vec![T::zero(); n]; n];
        for i in 0..n {
            for j in i..n {
                let v = self.hessian[i][j].eval(x);
                out[i][j] = v;
                out[j][i] = v;
            }
        }
        out
    }
}

// Integer exponents go through powi so negative bases stay real.
fn pow<T: Real>(base: T, exponent: T) -> T {
    if exponent == exponent.round() && exponent.abs() < T::lit(1e9) {
        base.powi(exponent.to_i32().unwrap_or(0))
    } else {
        base.powf(exponent)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    pos: usize,
    text: String,
}

fn tokenize(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
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
            let value = text.parse::<f64>().map_err(|_| ParseError {
                position: start,
                expected: vec!["number".into()],
                found: format!("`{text}`"),
            })?;
            out.push(Spanned {
                tok: Tok::Num(value),
                pos: start,
                text: text.into(),
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let text = &src[start..i];
            out.push(Spanned {
                tok: Tok::Ident(text.into()),
                pos: start,
                text: text.into(),
            });
        } else if "+-*/^(),".contains(c) {
            out.push(Spanned {
                tok: Tok::Op(c),
                pos: i,
                text: c.to_string(),
            });
            i += 1;
        } else {
            return Err(ParseError {
                position: i,
                expected: vec!["number".into(), "identifier".into(), "operator".into()],
                found: format!("`{}`", src[i..].chars().next().unwrap_or(c)),
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    dimension: usize,
    src_len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eat(&mut self, op: char) -> bool {
        if matches!(self.peek(), Some(Spanned { tok: Tok::Op(c), .. }) if *c == op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error_at(&self, tok: &Spanned, expected: &[&str]) -> ParseError {
        ParseError {
            position: tok.pos,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: format!("`{}`", tok.text),
        }
    }

    fn error_eof(&self, expected: &[&str]) -> ParseError {
        ParseError {
            position: self.src_len,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: "end of input".into(),
        }
    }

    fn expect(&mut self, op: char) -> Result<(), ParseError> {
        if self.eat(op) {
            return Ok(());
        }
        let want = format!("`{op}`");
        match self.peek() {
            Some(tok) => Err(self.error_at(tok, &[&want])),
            None => Err(self.error_eof(&[&want])),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.eat('^') {
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        const EXPECTED: &[&str] = &["number", "identifier", "function", "`(`"];
        let Some(tok) = self.next() else {
            return Err(self.error_eof(EXPECTED));
        };
        match &tok.tok {
            Tok::Num(v) => Ok(Expr::Const(*v)),
            Tok::Op('(') => {
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(name) {
                    self.expect('(')?;
                    let mut args = vec![self.expr()?];
                    while args.len() < func.arity() {
                        self.expect(',')?;
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    return Ok(Expr::Call(func, args));
                }
                self.variable(name).ok_or_else(|| ParseError {
                    position: tok.pos,
                    expected: self.identifier_names(),
                    found: format!("`{}`", tok.text),
                })
            }
            Tok::Op(_) => Err(self.error_at(&tok, EXPECTED)),
        }
    }

    fn variable(&self, name: &str) -> Option<Expr> {
        if name == "t" {
            return Some(Expr::Var(self.dimension - 1));
        }
        let idx: usize = name.strip_prefix('x')?.parse().ok()?;
        (1..self.dimension)
            .contains(&idx)
            .then(|| Expr::Var(idx - 1))
    }

    fn identifier_names(&self) -> Vec<String> {
        (1..self.dimension)
            .map(|i| format!("x{i}"))
            .chain(["t", "sin", "cos", "exp", "log", "sqrt", "pow"].map(String::from))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, x: &[f64]) -> f64 {
        Expr::parse(src, x.len()).unwrap().eval(x)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2 * 3", &[0.0, 0.0, 0.0]), 7.0);
        assert_eq!(eval("2^3^2", &[0.0, 0.0, 0.0]), 512.0);
        assert_eq!(eval("-t^2", &[0.0, 0.0, 3.0]), -9.0);
        assert_eq!(eval("(1 - 2) - 3", &[0.0, 0.0, 0.0]), -4.0);
        assert_eq!(eval("8 / 4 / 2", &[0.0, 0.0, 0.0]), 1.0);
        assert_eq!(eval("2^-1", &[0.0, 0.0, 0.0]), 0.5);
    }

    #[test]
    fn coordinates_and_functions() {
        let x = [0.5, 2.0, 8.0];
        assert!((eval("t^(4/3)", &x) - 16.0).abs() < 1e-12);
        assert_eq!(eval("x1 + x2", &x), 2.5);
        assert!((eval("pow(t, 1/3) * sqrt(4)", &x) - 4.0).abs() < 1e-12);
        assert!((eval("exp(log(t))", &x) - 8.0).abs() < 1e-12);
        assert!((eval("sin(x1)^2 + cos(x1)^2", &x) - 1.0).abs() < 1e-15);
        assert_eq!(eval(" 1.5e1 ", &x), 15.0);
    }

    #[test]
    fn errors_report_position_and_expectation() {
        let err = Expr::parse("t^(4/3", 4).unwrap_err();
        assert_eq!(err.position, 6);
        assert!(err.expected.contains(&"`)`".to_string()));

        let err = Expr::parse("x4 + 1", 4).unwrap_err();
        assert_eq!(err.position, 0);
        assert!(err.expected.contains(&"x3".to_string()));

        let err = Expr::parse("1 + * 2", 4).unwrap_err();
        assert_eq!(err.position, 4);

        let err = Expr::parse("2 $ 3", 4).unwrap_err();
        assert_eq!(err.position, 2);

        let err = Expr::parse("pow(t)", 4).unwrap_err();
        assert_eq!(err.expected, vec!["`,`".to_string()]);

        let err = Expr::parse("t t", 4).unwrap_err();
        assert_eq!(err.position, 2);
    }

    #[test]
    fn symbolic_derivatives_match_central_differences() {
        let cases = [
            "t^(4/3)",
            "x1*t^2 - 3*x2/t",
            "exp(-x1^2) * sin(t) + sqrt(1 + x3^2)",
            "log(t) * cos(x1 * x2)",
            "pow(t, x1)",
            "t^x2",
        ];
        let x = [0.4, -0.7, 0.25, 1.3];
        for src in cases {
            let jet = ExprJet::new(Expr::parse(src, 4).unwrap(), 4);
            let grad: Vec<f64> = jet.eval_gradient(&x);
            let hess: Vec<Vec<f64>> = jet.eval_hessian(&x);
            for i in 0..4 {
                let h = 1e-6;
                let mut p = x;
                let mut m = x;
                p[i] += h;
                m[i] -= h;
                let fd = (jet.eval(&p) - jet.eval(&m)) / (2.0 * h);
                assert!(
                    (grad[i] - fd).abs() < 1e-7,
                    "{src} d{i}: {} vs {fd}",
                    grad[i]
                );
                for j in 0..4 {
                    let fdj = (jet.gradient[j].eval(&p) - jet.gradient[j].eval(&m)) / (2.0 * h);
                    assert!((hess[i][j] - fdj).abs() < 1e-6, "{src} d{i}d{j}");
                }
            }
        }
    }

    #[test]
    fn constant_folding_keeps_trees_small() {
        let e = Expr::parse("3*t + 2", 4).unwrap();
        assert_eq!(e.derivative(3), Expr::Const(3.0));
        assert!(e.derivative(0).is_zero());
        assert_eq!(
            Expr::parse("t^2", 4).unwrap().derivative(3).derivative(3),
            Expr::Const(2.0)
        );
    }
}
