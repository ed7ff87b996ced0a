//! Arithmetic expressions for integrands, time weights and outer functions.
//!
//! Grammar, whitespace-insensitive:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | var | func '(' expr (',' expr)? ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! is `−(x²)` and `2^-1` is `0.5`. Functions: `sin`, `cos`, `exp`, `abs`,
//! `pow(a, b)`.

use std::fmt;

use thiserror::Error;

use crate::quadrature::GrowthBound;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("division by zero")]
    DivisionByZero,
    #[error("fractional power of a negative number: {base}^{exponent}")]
    NegativeBase { base: f64, exponent: f64 },
    #[error("expected {expected} values, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("variable `{0}` is not bound")]
    Unbound(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Pow,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Pow => "pow",
        }
    }

    fn arity(self) -> usize {
        if self == Func::Pow {
            2
        } else {
            1
        }
    }
}

/// Syntax tree. Variables refer to positions in the declared list.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression together with its declared variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    vars: Vec<String>,
}

/// Parses `source` allowing only the identifiers in `vars`.
pub fn parse(source: &str, vars: &[&str]) -> Result<Expr, ExprError> {
    let mut parser = Parser { src: source.as_bytes(), pos: 0, vars };
    let root = parser.expr()?;
    parser.skip_ws();
    if parser.pos < parser.src.len() {
        return Err(parser.syntax("unexpected trailing input"));
    }
    Ok(Expr { root, vars: vars.iter().map(|s| s.to_string()).collect() })
}

/// Evaluates `e` with values looked up by variable name.
pub fn evaluate(e: &Expr, bindings: &[(&str, f64)]) -> Result<f64, ExprError> {
    let values = e
        .vars
        .iter()
        .map(|v| {
            bindings
                .iter()
                .find(|(name, _)| name == v)
                .map(|&(_, x)| x)
                .ok_or_else(|| ExprError::Unbound(v.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    e.eval(&values)
}

impl Expr {
    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// Evaluates with positional values matching [`Expr::vars`].
    pub fn eval(&self, values: &[f64]) -> Result<f64, ExprError> {
        if values.len() != self.vars.len() {
            return Err(ExprError::Arity { expected: self.vars.len(), got: values.len() });
        }
        eval_node(&self.root, values)
    }

    /// Like [`Expr::eval`] but maps evaluation errors to NaN, for use as an
    /// integrand where the quadrature reports non-finite values itself.
    pub fn eval_or_nan(&self, values: &[f64]) -> f64 {
        self.eval(values).unwrap_or(f64::NAN)
    }

    /// True if the expression never reads a variable.
    pub fn is_constant(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::Num(_) => true,
                Node::Var(_) => false,
                Node::Neg(a) => walk(a),
                Node::Bin(_, a, b) => walk(a) && walk(b),
                Node::Call(_, args) => args.iter().all(walk),
            }
        }
        walk(&self.root)
    }

    /// Conservative bound `|e| ≤ C (1 + max|x_i|)^k`.
    ///
    /// Variables named `t…` are taken to range over `[0, 1]`; all others
    /// over ℝ.
    pub fn growth_certificate(&self) -> GrowthCertificate {
        let kinds: Vec<VarKind> = self
            .vars
            .iter()
            .map(|v| if v.starts_with('t') { VarKind::Time } else { VarKind::Space })
            .collect();
        match abstract_eval(&self.root, &kinds).growth {
            Some((constant, degree)) => GrowthCertificate::Polynomial { constant, degree },
            None => GrowthCertificate::Unbounded,
        }
    }
}

/// Result of [`Expr::growth_certificate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrowthCertificate {
    Polynomial { constant: f64, degree: f64 },
    Unbounded,
}

impl GrowthCertificate {
    pub fn to_growth_bound(self) -> Option<GrowthBound> {
        match self {
            GrowthCertificate::Polynomial { constant, degree } => {
                Some(GrowthBound::polynomial(constant.max(1e-300), degree))
            }
            GrowthCertificate::Unbounded => None,
        }
    }
}

/// Syntactic growth certificate of `e`.
pub fn growth_certificate(e: &Expr) -> GrowthCertificate {
    e.growth_certificate()
}

fn eval_node(node: &Node, values: &[f64]) -> Result<f64, ExprError> {
    Ok(match node {
        Node::Num(v) => *v,
        Node::Var(i) => values[*i],
        Node::Neg(a) => -eval_node(a, values)?,
        Node::Bin(op, a, b) => {
            let x = eval_node(a, values)?;
            let y = eval_node(b, values)?;
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y == 0.0 {
                        return Err(ExprError::DivisionByZero);
                    }
                    x / y
                }
                BinOp::Pow => power(x, y)?,
            }
        }
        Node::Call(f, args) => {
            let x = eval_node(&args[0], values)?;
            match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Abs => x.abs(),
                Func::Pow => power(x, eval_node(&args[1], values)?)?,
            }
        }
    })
}

fn power(x: f64, y: f64) -> Result<f64, ExprError> {
    if x == 0.0 && y < 0.0 {
        return Err(ExprError::DivisionByZero);
    }
    if y.fract() == 0.0 && y.abs() <= i32::MAX as f64 {
        return Ok(x.powi(y as i32));
    }
    if x < 0.0 {
        return Err(ExprError::NegativeBase { base: x, exponent: y });
    }
    Ok(x.powf(y))
}

// ---------------------------------------------------------------------------
// Parser

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a [&'a str],
}

impl Parser<'_> {
    fn syntax(&self, message: &str) -> ExprError {
        ExprError::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exponent = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(_) => Err(self.syntax("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut count = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            count += digits(self);
        }
        if count == 0 {
            self.pos = start;
            return Err(self.syntax("malformed number"));
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = mark;
                return Err(self.syntax("malformed exponent"));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Node::Num)
            .ok_or(ExprError::Syntax { offset: start, message: format!("bad number `{text}`") })
    }

    fn identifier(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        if let Some(func) = Func::from_name(name) {
            if !self.eat(b'(') {
                return Err(self.syntax(&format!("expected `(` after `{name}`")));
            }
            let mut args = vec![self.expr()?];
            while self.eat(b',') {
                args.push(self.expr()?);
            }
            if !self.eat(b')') {
                return Err(self.syntax("expected `)`"));
            }
            if args.len() != func.arity() {
                return Err(ExprError::Syntax {
                    offset: start,
                    message: format!("`{name}` takes {} argument(s)", func.arity()),
                });
            }
            return Ok(Node::Call(func, args));
        }
        match self.vars.iter().position(|v| *v == name) {
            Some(i) => Ok(Node::Var(i)),
            None => Err(ExprError::UnknownIdentifier { name: name.to_string(), offset: start }),
        }
    }
}

// ---------------------------------------------------------------------------
// Printing

fn precedence(node: &Node) -> u8 {
    match node {
        Node::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Node::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Node::Neg(_) => 3,
        Node::Bin(BinOp::Pow, ..) => 4,
        Node::Num(_) | Node::Var(_) | Node::Call(..) => 5,
    }
}

struct Printer<'a> {
    node: &'a Node,
    vars: &'a [String],
}

impl Printer<'_> {
    fn child<'b>(&'b self, node: &'b Node) -> Printer<'b> {
        Printer { node, vars: self.vars }
    }

    fn wrapped(&self, f: &mut fmt::Formatter<'_>, node: &Node, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({})", self.child(node))
        } else {
            write!(f, "{}", self.child(node))
        }
    }
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            Node::Num(v) => write!(f, "{v:?}"),
            Node::Var(i) => f.write_str(&self.vars[*i]),
            Node::Neg(a) => {
                f.write_str("-")?;
                self.wrapped(f, a, precedence(a) < 3)
            }
            Node::Bin(BinOp::Pow, a, b) => {
                self.wrapped(f, a, precedence(a) < 5)?;
                f.write_str("^")?;
                self.wrapped(f, b, precedence(b) < 3)
            }
            Node::Bin(op, a, b) => {
                let own = precedence(self.node);
                self.wrapped(f, a, precedence(a) < own)?;
                write!(f, " {} ", op.symbol())?;
                self.wrapped(f, b, precedence(b) <= own)
            }
            Node::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}", self.child(a))?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", Printer { node: &self.root, vars: &self.vars })
    }
}

// ---------------------------------------------------------------------------
// Growth analysis

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarKind {
    Space,
    Time,
}

/// Value range plus an optional bound `C (1+M)^k`.
#[derive(Debug, Clone, Copy)]
struct Abstract {
    lo: f64,
    hi: f64,
    growth: Option<(f64, f64)>,
}

impl Abstract {
    fn constant(v: f64) -> Self {
        Self { lo: v, hi: v, growth: Some((v.abs(), 0.0)) }
    }

    /// Smallest |value| over the range.
    fn min_abs(&self) -> f64 {
        if self.lo > 0.0 {
            self.lo
        } else if self.hi < 0.0 {
            -self.hi
        } else {
            0.0
        }
    }

    fn max_abs(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    fn exact(&self) -> Option<f64> {
        (self.lo == self.hi && self.lo.is_finite()).then_some(self.lo)
    }
}

fn mul_bound(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

fn range_mul(a: &Abstract, b: &Abstract) -> (f64, f64) {
    let c = [mul_bound(a.lo, b.lo), mul_bound(a.lo, b.hi), mul_bound(a.hi, b.lo), mul_bound(a.hi, b.hi)];
    (
        c.iter().copied().fold(f64::INFINITY, f64::min),
        c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    )
}

fn abstract_eval(node: &Node, kinds: &[VarKind]) -> Abstract {
    match node {
        Node::Num(v) => Abstract::constant(*v),
        Node::Var(i) => match kinds[*i] {
            VarKind::Time => Abstract { lo: 0.0, hi: 1.0, growth: Some((1.0, 0.0)) },
            VarKind::Space => {
                Abstract { lo: f64::NEG_INFINITY, hi: f64::INFINITY, growth: Some((1.0, 1.0)) }
            }
        },
        Node::Neg(a) => {
            let a = abstract_eval(a, kinds);
            Abstract { lo: -a.hi, hi: -a.lo, growth: a.growth }
        }
        Node::Bin(op, a, b) => {
            let a = abstract_eval(a, kinds);
            let b = abstract_eval(b, kinds);
            match op {
                BinOp::Add | BinOp::Sub => {
                    let (lo, hi) = if *op == BinOp::Add {
                        (a.lo + b.lo, a.hi + b.hi)
                    } else {
                        (a.lo - b.hi, a.hi - b.lo)
                    };
                    let growth = match (a.growth, b.growth) {
                        (Some((c1, k1)), Some((c2, k2))) => Some((c1 + c2, k1.max(k2))),
                        _ => None,
                    };
                    Abstract { lo, hi, growth }
                }
                BinOp::Mul => {
                    let (lo, hi) = range_mul(&a, &b);
                    let growth = match (a.growth, b.growth) {
                        (Some((c1, k1)), Some((c2, k2))) => Some((c1 * c2, k1 + k2)),
                        _ => None,
                    };
                    Abstract { lo, hi, growth }
                }
                BinOp::Div => divide(&a, &b),
                BinOp::Pow => raise(&a, &b),
            }
        }
        Node::Call(func, args) => {
            let a = abstract_eval(&args[0], kinds);
            match func {
                Func::Sin | Func::Cos => Abstract { lo: -1.0, hi: 1.0, growth: Some((1.0, 0.0)) },
                Func::Abs => Abstract { lo: a.min_abs(), hi: a.max_abs(), growth: a.growth },
                Func::Exp => {
                    if a.hi.is_finite() {
                        let top = a.hi.exp();
                        Abstract { lo: a.lo.exp(), hi: top, growth: Some((top, 0.0)) }
                    } else {
                        Abstract { lo: 0.0, hi: f64::INFINITY, growth: None }
                    }
                }
                Func::Pow => raise(&a, &abstract_eval(&args[1], kinds)),
            }
        }
    }
}

fn divide(a: &Abstract, b: &Abstract) -> Abstract {
    let d = b.min_abs();
    if d <= 0.0 {
        return Abstract { lo: f64::NEG_INFINITY, hi: f64::INFINITY, growth: None };
    }
    // The range of b excludes zero, so 1/b is monotone on it.
    let inv = Abstract { lo: 1.0 / b.hi, hi: 1.0 / b.lo, growth: None };
    let (lo, hi) = range_mul(a, &inv);
    Abstract { lo, hi, growth: a.growth.map(|(c, k)| (c / d, k)) }
}

fn raise(a: &Abstract, b: &Abstract) -> Abstract {
    let unbounded = Abstract { lo: f64::NEG_INFINITY, hi: f64::INFINITY, growth: None };
    let Some(y) = b.exact() else {
        return unbounded;
    };
    let top = a.max_abs().powf(y);
    if y >= 0.0 {
        let growth = a.growth.map(|(c, k)| (c.powf(y), k * y));
        let integral = y.fract() == 0.0;
        let (lo, hi) = if integral && (y as i64) % 2 == 1 {
            (a.lo.powf(y), a.hi.powf(y))
        } else if integral || a.lo >= 0.0 {
            (a.min_abs().powf(y), top)
        } else {
            (0.0, top)
        };
        return Abstract { lo, hi, growth };
    }
    let d = a.min_abs();
    if d <= 0.0 {
        return unbounded;
    }
    let bound = d.powf(y);
    Abstract { lo: -bound, hi: bound, growth: Some((bound, 0.0)) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pow_tree() {
        let e = parse("x^2", &["x"]).unwrap();
        assert_eq!(
            e.root(),
            &Node::Bin(BinOp::Pow, Box::new(Node::Var(0)), Box::new(Node::Num(2.0)))
        );
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let e = parse("-x^2", &["x"]).unwrap();
        assert!(matches!(e.root(), Node::Neg(inner) if matches!(**inner, Node::Bin(BinOp::Pow, ..))));
        assert_eq!(e.eval(&[3.0]).unwrap(), -9.0);
    }

    #[test]
    fn power_is_right_associative() {
        let e = parse("2^3^2", &[]).unwrap();
        assert_eq!(e.eval(&[]).unwrap(), 512.0);
    }

    #[test]
    fn unknown_identifier_named() {
        assert!(parse("x1*x2 + 1", &["x1", "x2"]).is_ok());
        match parse("x1*x2 + 1", &["x"]).unwrap_err() {
            ExprError::UnknownIdentifier { name, offset } => {
                assert_eq!(name, "x1");
                assert_eq!(offset, 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_offset() {
        match parse("x + * 2", &["x"]).unwrap_err() {
            ExprError::Syntax { offset, .. } => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn certificates() {
        let cert = |s: &str| parse(s, &["x"]).unwrap().growth_certificate();
        assert_eq!(cert("x^2"), GrowthCertificate::Polynomial { constant: 1.0, degree: 2.0 });
        assert_eq!(cert("sin(x)*x"), GrowthCertificate::Polynomial { constant: 1.0, degree: 1.0 });
        assert_eq!(cert("exp(x)"), GrowthCertificate::Unbounded);
        assert_eq!(cert("1/(1+x^2)"), GrowthCertificate::Polynomial { constant: 1.0, degree: 0.0 });
        assert_eq!(cert("exp(-x^2)"), GrowthCertificate::Polynomial { constant: 1.0, degree: 0.0 });
        assert_eq!(cert("1/x"), GrowthCertificate::Unbounded);
    }

    #[test]
    fn time_variables_are_bounded() {
        let e = parse("t*x^2", &["t", "x"]).unwrap();
        assert_eq!(e.growth_certificate(), GrowthCertificate::Polynomial { constant: 1.0, degree: 2.0 });
        let w = parse("exp(t)", &["t"]).unwrap();
        assert!(matches!(w.growth_certificate(), GrowthCertificate::Polynomial { degree, .. } if degree == 0.0));
    }
}
