//! Inline objective expressions such as `0.2*x*y - cos(y)` or
//! `x1^2 - x2*y1 + exp(-y2)`.
//!
//! Grammar (usual precedence, `^` right-associative and binding tighter
//! than unary minus):
//!
//! ```text
//! expr  := term (("+" | "-") term)*
//! term  := unary (("*" | "/") unary)*
//! unary := "-" unary | power
//! power := atom ("^" unary)?
//! atom  := number | var | const | func "(" expr ")" | "(" expr ")"
//! ```
//!
//! Variables are `x1.., y1..`; bare `x` and `y` mean `x1` and `y1`.
//! Constants: `pi`, `e`. Functions: `sin cos tan exp log sqrt tanh abs`.
//! Derivatives come from finite differences.

use super::{BoxDomain, Objective};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Tanh,
    Abs,
}

impl Func {
    fn lookup(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn apply<T: Real>(self, v: T) -> T {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Tanh => v.tanh(),
            Func::Abs => v.abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    X(usize),
    Y(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn eval<T: Real>(&self, x: &[T], y: &[T]) -> T {
        match self {
            Node::Num(v) => crate::lit(*v),
            Node::X(i) => x[*i],
            Node::Y(i) => y[*i],
            Node::Neg(a) => -a.eval(x, y),
            Node::Add(a, b) => a.eval(x, y) + b.eval(x, y),
            Node::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
            Node::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            Node::Div(a, b) => a.eval(x, y) / b.eval(x, y),
            Node::Pow(a, b) => {
                let base = a.eval(x, y);
                match **b {
                    Node::Num(k) if k.fract() == 0.0 && k.abs() <= 64.0 => base.powi(k as i32),
                    _ => base.powf(b.eval(x, y)),
                }
            }
            Node::Call(f, a) => f.apply(a.eval(x, y)),
        }
    }

    fn dims(&self, dx: &mut usize, dy: &mut usize) {
        match self {
            Node::Num(_) => {}
            Node::X(i) => *dx = (*dx).max(i + 1),
            Node::Y(i) => *dy = (*dy).max(i + 1),
            Node::Neg(a) | Node::Call(_, a) => a.dims(dx, dy),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                a.dims(dx, dy);
                b.dims(dx, dy);
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error<V>(&self, message: impl Into<String>) -> Result<V> {
        Err(Error::Parse {
            column: self.pos + 1,
            message: message.into(),
        })
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

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat(b'^') {
            return Ok(Node::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            None => self.error("unexpected end of expression"),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return self.error("expected `)`");
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => self.error(format!("unexpected character `{}`", c as char)),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let s = self.src;
        let digits = |p: &mut usize| {
            while *p < s.len() && s[*p].is_ascii_digit() {
                *p += 1;
            }
        };
        digits(&mut self.pos);
        if self.pos < s.len() && s[self.pos] == b'.' {
            self.pos += 1;
            digits(&mut self.pos);
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let mut q = self.pos + 1;
            if q < s.len() && (s[q] == b'+' || s[q] == b'-') {
                q += 1;
            }
            if q < s.len() && s[q].is_ascii_digit() {
                self.pos = q;
                digits(&mut self.pos);
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).expect("ascii");
        match text.parse::<f64>() {
            Ok(v) => Ok(Node::Num(v)),
            Err(_) => {
                self.pos = start;
                self.error(format!("malformed number `{text}`"))
            }
        }
    }

    fn ident(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        if let Some(f) = Func::lookup(name) {
            if !self.eat(b'(') {
                return self.error(format!("expected `(` after `{name}`"));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return self.error("expected `)`");
            }
            return Ok(Node::Call(f, Box::new(arg)));
        }
        match name {
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            "e" => return Ok(Node::Num(std::f64::consts::E)),
            "x" => return Ok(Node::X(0)),
            "y" => return Ok(Node::Y(0)),
            _ => {}
        }
        let (head, tail) = name.split_at(1);
        let index = tail.trim_start_matches('_').parse::<usize>().ok().filter(|&i| i >= 1);
        match (head, index) {
            ("x", Some(i)) => Ok(Node::X(i - 1)),
            ("y", Some(i)) => Ok(Node::Y(i - 1)),
            _ => {
                self.pos = start;
                self.error(format!("unknown identifier `{name}`"))
            }
        }
    }
}

/// A parsed expression objective; dimensions are the highest variable
/// indices used (at least one each).
#[derive(Clone, Debug)]
pub struct ExprObjective<T: Real> {
    source: String,
    root: Node,
    dim_x: usize,
    dim_y: usize,
    domain: BoxDomain<T>,
}

impl<T: Real> ExprObjective<T> {
    pub fn parse(source: &str) -> Result<Self> {
        if !source.is_ascii() {
            let column = source.chars().take_while(|c| c.is_ascii()).count() + 1;
            return Err(Error::Parse {
                column,
                message: "non-ASCII character".into(),
            });
        }
        let mut p = Parser {
            src: source.as_bytes(),
            pos: 0,
        };
        let root = p.expr()?;
        if p.peek().is_some() {
            return p.error("trailing input");
        }
        let (mut dim_x, mut dim_y) = (1, 1);
        root.dims(&mut dim_x, &mut dim_y);
        Ok(Self {
            source: source.to_string(),
            root,
            dim_x,
            dim_y,
            domain: BoxDomain::unbounded(dim_x + dim_y),
        })
    }

    /// Replaces the (default unbounded) domain.
    pub fn with_domain(mut self, domain: BoxDomain<T>) -> Result<Self> {
        if domain.dim() != self.dim_x + self.dim_y {
            return Err(Error::DimensionMismatch(format!(
                "domain has {} coordinates, expression uses {}",
                domain.dim(),
                self.dim_x + self.dim_y
            )));
        }
        self.domain = domain;
        Ok(self)
    }

    /// Forces at least `dim_x`/`dim_y` variables.
    pub fn with_dims(mut self, dim_x: usize, dim_y: usize) -> Self {
        self.dim_x = self.dim_x.max(dim_x);
        self.dim_y = self.dim_y.max(dim_y);
        self.domain = BoxDomain::unbounded(self.dim_x + self.dim_y);
        self
    }
}

impl<T: Real> Objective<T> for ExprObjective<T> {
    fn name(&self) -> String {
        self.source.clone()
    }
    fn dim_x(&self) -> usize {
        self.dim_x
    }
    fn dim_y(&self) -> usize {
        self.dim_y
    }
    fn domain(&self) -> BoxDomain<T> {
        self.domain.clone()
    }
    fn value(&self, x: &[T], y: &[T]) -> T {
        self.root.eval(x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{catalog, gradient_at, Point};
    use proptest::prelude::*;

    fn eval(src: &str, x: &[f64], y: &[f64]) -> f64 {
        ExprObjective::<f64>::parse(src).unwrap().value(x, y)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2 * 3", &[0.0], &[0.0]), 7.0);
        assert_eq!(eval("2 ^ 3 ^ 2", &[0.0], &[0.0]), 512.0);
        assert_eq!(eval("-x^2", &[3.0], &[0.0]), -9.0);
        assert_eq!(eval("(1 - 2) - 3", &[0.0], &[0.0]), -4.0);
        assert_eq!(eval("8 / 4 / 2", &[0.0], &[0.0]), 1.0);
        assert_eq!(eval("2.5e-1 * x2 + y3", &[0.0, 4.0], &[0.0, 0.0, 1.0]), 2.0);
        assert!((eval("cos(pi) + log(e)", &[0.0], &[0.0])).abs() < 1e-15);
    }

    #[test]
    fn dimensions_are_inferred() {
        let f = ExprObjective::<f64>::parse("x1*y2 + x3").unwrap();
        assert_eq!((f.dim_x(), f.dim_y()), (3, 2));
        let f = ExprObjective::<f64>::parse("sin(x)").unwrap();
        assert_eq!((f.dim_x(), f.dim_y()), (1, 1));
    }

    #[test]
    fn errors_report_columns() {
        let e = ExprObjective::<f64>::parse("x + * y").unwrap_err();
        assert!(matches!(e, Error::Parse { column: 5, .. }), "{e:?}");
        let e = ExprObjective::<f64>::parse("x + foo").unwrap_err();
        assert!(matches!(e, Error::Parse { column: 5, .. }), "{e:?}");
        let e = ExprObjective::<f64>::parse("sin(x").unwrap_err();
        assert!(matches!(e, Error::Parse { column: 6, .. }), "{e:?}");
        assert!(ExprObjective::<f64>::parse("x y").is_err());
        assert!(ExprObjective::<f64>::parse("x0").is_err());
        assert!(ExprObjective::<f64>::parse("").is_err());
    }

    #[test]
    fn matches_catalog_entry() {
        let e = ExprObjective::<f64>::parse("0.2*x*y - cos(y)").unwrap();
        let c = catalog::<f64>("xy_cos").unwrap();
        let p = Point::from_f64(&[0.3], &[-2.0]);
        assert!((e.value(&p.x, &p.y) - c.value(&p.x, &p.y)).abs() < 1e-15);
        let ge = gradient_at(&e, &p).unwrap();
        let gc = gradient_at(c.as_ref(), &p).unwrap();
        assert!((ge.gx[0] - gc.gx[0]).abs() < 1e-8);
        assert!((ge.gy[0] - gc.gy[0]).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn polynomial_round_trip(a in -5.0f64..5.0, b in -5.0f64..5.0, x in -2.0f64..2.0, y in -2.0f64..2.0) {
            let src = format!("{a} * x^2 + ({b}) * x * y - y^2");
            let v = eval(&src, &[x], &[y]);
            let exact = a * x * x + b * x * y - y * y;
            prop_assert!((v - exact).abs() <= 1e-12 * (1.0 + exact.abs()));
        }
    }
}
