//! Expression language for drivers, obstacles and terminal values.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary ('*' unary)*
//! unary   := '-' unary | atom
//! atom    := number | var | func '(' sum (',' sum)* ')' | '(' sum ')'
//! var     := t | y | z | w
//! func    := min | max | abs
//! ```
//!
//! `w` is the cumulative increment of the node (the path value of `B`).
//! Every expression is total on the reals.

use std::fmt;

use crate::error::{Error, Result};
use crate::finprob::ScenarioTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    Y,
    Z,
    W,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Min(Vec<Expr>),
    Max(Vec<Expr>),
    Abs(Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser { src: src.as_bytes(), pos: 0 };
        let e = p.sum()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, t: f64, y: f64, z: f64, w: f64) -> f64 {
        match self {
            Expr::Num(c) => *c,
            Expr::Var(Var::T) => t,
            Expr::Var(Var::Y) => y,
            Expr::Var(Var::Z) => z,
            Expr::Var(Var::W) => w,
            Expr::Neg(a) => -a.eval(t, y, z, w),
            Expr::Add(a, b) => a.eval(t, y, z, w) + b.eval(t, y, z, w),
            Expr::Sub(a, b) => a.eval(t, y, z, w) - b.eval(t, y, z, w),
            Expr::Mul(a, b) => a.eval(t, y, z, w) * b.eval(t, y, z, w),
            Expr::Min(xs) => xs.iter().map(|x| x.eval(t, y, z, w)).fold(f64::INFINITY, f64::min),
            Expr::Max(xs) => xs.iter().map(|x| x.eval(t, y, z, w)).fold(f64::NEG_INFINITY, f64::max),
            Expr::Abs(a) => a.eval(t, y, z, w).abs(),
        }
    }

    pub fn uses(&self, v: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(u) => *u == v,
            Expr::Neg(a) | Expr::Abs(a) => a.uses(v),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.uses(v) || b.uses(v),
            Expr::Min(xs) | Expr::Max(xs) => xs.iter().any(|x| x.uses(v)),
        }
    }

    fn depends_on_state(&self) -> bool {
        self.uses(Var::Y) || self.uses(Var::Z)
    }

    /// Lipschitz constants in `y` and `z`, derived from the structure of the
    /// expression. Factors free of `(y, z)` are bounded by their largest
    /// absolute value over the nodes of `tree`. Fails for products of two
    /// state-dependent factors, which are not globally Lipschitz.
    pub fn lipschitz(&self, tree: &ScenarioTree) -> Result<(f64, f64)> {
        Ok(match self {
            Expr::Num(_) | Expr::Var(Var::T) | Expr::Var(Var::W) => (0.0, 0.0),
            Expr::Var(Var::Y) => (1.0, 0.0),
            Expr::Var(Var::Z) => (0.0, 1.0),
            Expr::Neg(a) | Expr::Abs(a) => a.lipschitz(tree)?,
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                let (x, y) = (a.lipschitz(tree)?, b.lipschitz(tree)?);
                (x.0 + y.0, x.1 + y.1)
            }
            Expr::Mul(a, b) => match (a.depends_on_state(), b.depends_on_state()) {
                (false, false) => (0.0, 0.0),
                (true, true) => {
                    return Err(Error::Config(format!("driver `{self}` is not Lipschitz in (y, z)")));
                }
                (true, false) => scale(a.lipschitz(tree)?, b.sup_over_nodes(tree)),
                (false, true) => scale(b.lipschitz(tree)?, a.sup_over_nodes(tree)),
            },
            Expr::Min(xs) | Expr::Max(xs) => {
                let mut acc = (0.0f64, 0.0f64);
                for x in xs {
                    let l = x.lipschitz(tree)?;
                    acc = (acc.0.max(l.0), acc.1.max(l.1));
                }
                acc
            }
        })
    }

    fn sup_over_nodes(&self, tree: &ScenarioTree) -> f64 {
        let mut m = 0.0f64;
        for k in 0..=tree.steps() {
            for node in tree.level(k) {
                m = m.max(self.eval(tree.time(k), 0.0, 0.0, node.position).abs());
            }
        }
        m
    }
}

fn scale((a, b): (f64, f64), c: f64) -> (f64, f64) {
    (a * c, b * c)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, name: &str, xs: &[Expr]| {
            write!(f, "{name}(")?;
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{x}")?;
            }
            write!(f, ")")
        };
        match self {
            Expr::Num(c) => write!(f, "{c}"),
            Expr::Var(Var::T) => write!(f, "t"),
            Expr::Var(Var::Y) => write!(f, "y"),
            Expr::Var(Var::Z) => write!(f, "z"),
            Expr::Var(Var::W) => write!(f, "w"),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Min(xs) => list(f, "min", xs),
            Expr::Max(xs) => list(f, "max", xs),
            Expr::Abs(a) => write!(f, "abs({a})"),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Expression { position: self.pos, message: message.to_string() }
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

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", c as char)))
        }
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.product()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.product()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.error("unexpected end of expression")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                match name {
                    "t" => Ok(Expr::Var(Var::T)),
                    "y" => Ok(Expr::Var(Var::Y)),
                    "z" => Ok(Expr::Var(Var::Z)),
                    "w" => Ok(Expr::Var(Var::W)),
                    "min" | "max" | "abs" => {
                        self.expect(b'(')?;
                        let mut args = vec![self.sum()?];
                        while self.peek() == Some(b',') {
                            self.pos += 1;
                            args.push(self.sum()?);
                        }
                        self.expect(b')')?;
                        match name {
                            "abs" if args.len() == 1 => Ok(Expr::Abs(Box::new(args.pop().unwrap()))),
                            "abs" => Err(Error::Expression { position: start, message: "abs takes one argument".into() }),
                            "min" => Ok(Expr::Min(args)),
                            _ => Ok(Expr::Max(args)),
                        }
                    }
                    _ => Err(Error::Expression { position: start, message: format!("unknown identifier `{name}`") }),
                }
            }
            Some(c) => Err(self.error(&format!("unexpected character '{}'", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(self);
            if self.pos == exp_start {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Expr::Num(v)),
            _ => Err(Error::Expression { position: start, message: format!("malformed number `{text}`") }),
        }
    }
}
