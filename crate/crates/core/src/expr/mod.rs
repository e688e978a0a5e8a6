//! Closed-form expressions in one or two variables.
//!
//! The grammar covers numbers, `pi`, the variables `x`, `x1`, `x2`, `p`,
//! `p1`, `p2` and `t`, unary `-`, `+ - * /`, `^` with a constant exponent,
//! `abs sin cos sqrt`, n-ary `min`/`max` and
//! `piecewise([lo, hi]: expr, ...)` guarded on the first variable.
//! Printing an expression and parsing the text back yields the same tree.

mod parse;
mod program;

use std::fmt;

pub use parse::parse;
pub use program::Program;

/// Maximum nesting depth accepted by the parser.
pub const MAX_DEPTH: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Abs,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extremum {
    Min,
    Max,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub body: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(String),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Extremum(Extremum, Vec<Expr>),
    Piecewise(Vec<Piece>),
}

/// Argument slot a variable name binds to.
pub fn var_slot(name: &str) -> Option<usize> {
    match name {
        "x" | "x1" | "p" | "p1" => Some(0),
        "x2" | "p2" => Some(1),
        "t" => Some(2),
        _ => None,
    }
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

impl Expr {
    pub fn num(v: f64) -> Expr {
        if v.is_sign_negative() {
            Expr::Neg(Box::new(Expr::Num(-v)))
        } else {
            Expr::Num(v)
        }
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => PREC_ADD,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => PREC_MUL,
            Expr::Neg(_) => PREC_NEG,
            Expr::Pow(..) => PREC_POW,
            _ => PREC_ATOM,
        }
    }

    /// Visits every node depth-first, parents before children.
    pub fn walk(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Num(_) | Expr::Pi | Expr::Var(_) => {}
            Expr::Neg(a) | Expr::Call(_, a) => a.walk(f),
            Expr::Bin(_, a, b) | Expr::Pow(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Expr::Extremum(_, args) => args.iter().for_each(|a| a.walk(f)),
            Expr::Piecewise(pieces) => pieces.iter().for_each(|p| p.body.walk(f)),
        }
    }

    /// Variable names in order of first appearance.
    pub fn variables(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Var(n) = e {
                if !out.contains(n) {
                    out.push(n.clone());
                }
            }
        });
        if self.has_piecewise() && out.is_empty() {
            out.push("x".to_string());
        }
        out
    }

    pub fn has_piecewise(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e, Expr::Piecewise(_)));
        found
    }

    pub fn is_constant(&self) -> bool {
        let mut constant = true;
        self.walk(&mut |e| constant &= !matches!(e, Expr::Var(_) | Expr::Piecewise(_)));
        constant
    }

    /// Evaluates a variable-free expression.
    pub fn constant_value(&self) -> Option<f64> {
        if !self.is_constant() {
            return None;
        }
        Program::compile(self).ok().map(|p| p.value::<f64>(&[]))
    }

    /// Replaces every variable bound to `slot` with `with`.
    ///
    /// Piecewise guards test the first slot directly, so substituting into it
    /// is only supported for reflections handled by [`Expr::reflected`].
    pub fn substitute(&self, slot: usize, with: &Expr) -> Expr {
        self.map_vars(&mut |name| {
            if var_slot(name) == Some(slot) {
                Some(with.clone())
            } else {
                None
            }
        })
    }

    /// Replaces variables by name, keeping those for which `f` returns `None`.
    pub fn map_vars(&self, f: &mut dyn FnMut(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Num(_) | Expr::Pi => self.clone(),
            Expr::Var(n) => f(n).unwrap_or_else(|| self.clone()),
            Expr::Neg(a) => Expr::Neg(Box::new(a.map_vars(f))),
            Expr::Call(g, a) => Expr::Call(*g, Box::new(a.map_vars(f))),
            Expr::Bin(op, a, b) => Expr::Bin(*op, Box::new(a.map_vars(f)), Box::new(b.map_vars(f))),
            Expr::Pow(a, b) => Expr::Pow(Box::new(a.map_vars(f)), b.clone()),
            Expr::Extremum(k, args) => Expr::Extremum(*k, args.iter().map(|a| a.map_vars(f)).collect()),
            Expr::Piecewise(pieces) => Expr::Piecewise(
                pieces
                    .iter()
                    .map(|p| Piece {
                        lo: p.lo,
                        hi: p.hi,
                        body: p.body.map_vars(f),
                    })
                    .collect(),
            ),
        }
    }

    /// `e(-v)` for every variable `v`.
    pub fn reflected(&self) -> Expr {
        match self {
            Expr::Num(_) | Expr::Pi => self.clone(),
            Expr::Var(_) => Expr::Neg(Box::new(self.clone())),
            Expr::Neg(a) => Expr::Neg(Box::new(a.reflected())),
            Expr::Call(g, a) => Expr::Call(*g, Box::new(a.reflected())),
            Expr::Bin(op, a, b) => Expr::Bin(*op, Box::new(a.reflected()), Box::new(b.reflected())),
            Expr::Pow(a, b) => Expr::Pow(Box::new(a.reflected()), b.clone()),
            Expr::Extremum(k, args) => Expr::Extremum(*k, args.iter().map(Expr::reflected).collect()),
            Expr::Piecewise(pieces) => Expr::Piecewise(
                pieces
                    .iter()
                    .rev()
                    .map(|p| Piece {
                        lo: -p.hi,
                        hi: -p.lo,
                        body: p.body.reflected(),
                    })
                    .collect(),
            ),
        }
    }

    pub fn negated(&self) -> Expr {
        Expr::Neg(Box::new(self.clone()))
    }

    /// Subexpressions whose zeros are potential kinks, in one variable:
    /// arguments of `abs` and `sqrt`, pairwise differences of `min`/`max`
    /// arguments and bases raised to powers below one.
    pub fn kink_sources(&self) -> Vec<Expr> {
        let mut out = Vec::new();
        self.walk(&mut |e| match e {
            Expr::Call(Func::Abs | Func::Sqrt, a) => out.push((**a).clone()),
            Expr::Extremum(_, args) => {
                for i in 0..args.len() {
                    for j in i + 1..args.len() {
                        out.push(Expr::bin(BinOp::Sub, args[i].clone(), args[j].clone()));
                    }
                }
            }
            Expr::Pow(a, b) => {
                if let Some(v) = b.constant_value() {
                    if v.fract() != 0.0 && v < 2.0 {
                        out.push((**a).clone());
                    }
                }
            }
            _ => {}
        });
        out
    }

    /// Guard endpoints of every piecewise node.
    pub fn guard_points(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Piecewise(pieces) = e {
                for p in pieces {
                    for v in [p.lo, p.hi] {
                        if v.is_finite() && !out.contains(&v) {
                            out.push(v);
                        }
                    }
                }
            }
        });
        out
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    if v == f64::INFINITY {
        write!(f, "inf")
    } else if v == f64::NEG_INFINITY {
        write!(f, "-inf")
    } else {
        write!(f, "{v:?}")
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write_number(f, *v),
            Expr::Pi => write!(f, "pi"),
            Expr::Var(n) => write!(f, "{n}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_child(f, a, a.precedence() < PREC_NEG)
            }
            Expr::Call(g, a) => write!(f, "{}({a})", g.name()),
            Expr::Bin(op, a, b) => {
                let prec = self.precedence();
                write_child(f, a, a.precedence() < prec)?;
                let sym = match op {
                    BinOp::Add => " + ",
                    BinOp::Sub => " - ",
                    BinOp::Mul => " * ",
                    BinOp::Div => " / ",
                };
                write!(f, "{sym}")?;
                write_child(f, b, b.precedence() <= prec)
            }
            Expr::Pow(a, b) => {
                write_child(f, a, a.precedence() < PREC_POW)?;
                write!(f, "^")?;
                write_child(f, b, b.precedence() <= PREC_POW)
            }
            Expr::Extremum(k, args) => {
                write!(f, "{}(", if *k == Extremum::Min { "min" } else { "max" })?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Expr::Piecewise(pieces) => {
                write!(f, "piecewise(")?;
                for (i, p) in pieces.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "[")?;
                    write_number(f, p.lo)?;
                    write!(f, ", ")?;
                    write_number(f, p.hi)?;
                    write!(f, "]: {}", p.body)?;
                }
                write!(f, ")")
            }
        }
    }
}
