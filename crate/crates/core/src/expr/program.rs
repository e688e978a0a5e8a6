use super::{var_slot, BinOp, Expr, Extremum, Func};
use crate::error::{Error, Result};
use crate::scalar::{Dual, Numeric, Plain, PowerSign, Real};

#[derive(Clone, Debug, PartialEq)]
enum Op {
    Const(f64),
    Var(usize),
    Neg,
    Abs,
    Sin,
    Cos,
    Sqrt,
    Add,
    Sub,
    Mul,
    Div,
    PowInt(i32),
    PowReal(f64, PowerSign),
    Min(usize),
    Max(usize),
    /// Pops one value per guard and keeps the one whose guard holds.
    Select(Vec<(f64, f64)>),
}

const INLINE_STACK: usize = 64;

/// Expression compiled to postfix form for fast repeated evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    ops: Vec<Op>,
    max_stack: usize,
    slots: usize,
}

/// Integer or odd-denominator rational reading of a constant exponent.
fn classify_exponent(e: &Expr) -> Result<Op> {
    let v = e
        .constant_value()
        .ok_or_else(|| Error::invalid("non-constant exponent"))?;
    if !v.is_finite() {
        return Err(Error::invalid("exponent is not finite"));
    }
    if v.fract() == 0.0 && v.abs() <= 1024.0 {
        return Ok(Op::PowInt(v as i32));
    }
    let (num, den) = match rational_parts(e) {
        Some(r) => r,
        None => return Ok(Op::PowReal(v, PowerSign::Real)),
    };
    if den % 2 == 1 {
        let sign = if num % 2 == 0 { PowerSign::Even } else { PowerSign::Odd };
        Ok(Op::PowReal(v, sign))
    } else {
        Ok(Op::PowReal(v, PowerSign::Real))
    }
}

fn rational_parts(e: &Expr) -> Option<(i64, i64)> {
    let int = |e: &Expr| -> Option<i64> {
        let v = e.constant_value()?;
        (v.fract() == 0.0 && v.abs() < 1e9).then_some(v as i64)
    };
    match e {
        Expr::Neg(a) => rational_parts(a).map(|(n, d)| (-n, d)),
        Expr::Bin(BinOp::Div, a, b) => {
            let (n, d) = (int(a)?, int(b)?);
            if d == 0 {
                return None;
            }
            let g = gcd(n.abs(), d.abs()).max(1);
            Some((n / g * d.signum(), d.abs() / g))
        }
        _ => int(e).map(|n| (n, 1)),
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Program {
    pub fn compile(expr: &Expr) -> Result<Program> {
        let mut ops = Vec::new();
        emit(expr, &mut ops)?;
        let mut depth = 0usize;
        let mut max_stack = 0usize;
        let mut slots = 0usize;
        for op in &ops {
            depth = match op {
                Op::Const(_) | Op::Var(_) => depth + 1,
                Op::Neg | Op::Abs | Op::Sin | Op::Cos | Op::Sqrt | Op::PowInt(_) | Op::PowReal(..) => depth,
                Op::Add | Op::Sub | Op::Mul | Op::Div => depth - 1,
                Op::Min(n) | Op::Max(n) => depth + 1 - n,
                Op::Select(g) => depth + 1 - g.len(),
            };
            if let Op::Var(s) = op {
                slots = slots.max(s + 1);
            }
            if matches!(op, Op::Select(_)) {
                slots = slots.max(1);
            }
            max_stack = max_stack.max(depth);
        }
        Ok(Program { ops, max_stack, slots })
    }

    /// Number of argument slots the program reads.
    pub fn slots(&self) -> usize {
        self.slots
    }

    /// Evaluates with `vars[i]` bound to slot `i`; missing slots read as zero.
    #[inline]
    pub fn eval<T: Real, N: Numeric<T>>(&self, vars: &[N]) -> N {
        if self.max_stack <= INLINE_STACK {
            let mut stack = [N::constant(T::zero()); INLINE_STACK];
            self.run(vars, &mut stack)
        } else {
            let mut stack = vec![N::constant(T::zero()); self.max_stack];
            self.run(vars, &mut stack)
        }
    }

    /// Plain evaluation; `vars` beyond the third slot are ignored.
    #[inline]
    pub fn value<T: Real>(&self, vars: &[T]) -> T {
        let mut wrapped = [Plain(T::zero()); 3];
        let n = vars.len().min(3);
        for i in 0..n {
            wrapped[i] = Plain(vars[i]);
        }
        self.eval(&wrapped[..n]).0
    }

    /// One-sided derivative at `at` along `dir`, together with the value.
    pub fn directional<T: Real>(&self, at: &[T], dir: &[T]) -> Dual<T> {
        let mut seeded = [Dual::new(T::zero(), T::zero()); 3];
        for (i, s) in seeded.iter_mut().enumerate().take(at.len().min(3)) {
            *s = Dual::new(at[i], dir.get(i).copied().unwrap_or(T::zero()));
        }
        self.eval(&seeded[..at.len().min(3)])
    }

    fn run<T: Real, N: Numeric<T>>(&self, vars: &[N], stack: &mut [N]) -> N {
        let mut sp = 0usize;
        let zero = N::constant(T::zero());
        for op in &self.ops {
            match op {
                Op::Const(c) => {
                    stack[sp] = N::constant(T::lit(*c));
                    sp += 1;
                }
                Op::Var(s) => {
                    stack[sp] = vars.get(*s).copied().unwrap_or(zero);
                    sp += 1;
                }
                Op::Neg => stack[sp - 1] = -stack[sp - 1],
                Op::Abs => stack[sp - 1] = stack[sp - 1].abs(),
                Op::Sin => stack[sp - 1] = stack[sp - 1].sin(),
                Op::Cos => stack[sp - 1] = stack[sp - 1].cos(),
                Op::Sqrt => stack[sp - 1] = stack[sp - 1].sqrt(),
                Op::PowInt(n) => stack[sp - 1] = stack[sp - 1].powi(*n),
                Op::PowReal(e, s) => stack[sp - 1] = stack[sp - 1].powr(T::lit(*e), *s),
                Op::Add | Op::Sub | Op::Mul | Op::Div => {
                    let b = stack[sp - 1];
                    let a = stack[sp - 2];
                    sp -= 1;
                    stack[sp - 1] = match op {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        _ => a / b,
                    };
                }
                Op::Min(n) | Op::Max(n) => {
                    let base = sp - n;
                    let mut acc = stack[base];
                    for v in &stack[base + 1..sp] {
                        acc = if matches!(op, Op::Min(_)) { acc.min2(*v) } else { acc.max2(*v) };
                    }
                    sp = base + 1;
                    stack[base] = acc;
                }
                Op::Select(guards) => {
                    let base = sp - guards.len();
                    let arg = vars.first().copied().unwrap_or(zero);
                    let k = select_piece(guards, arg.primal(), arg.tangent());
                    stack[base] = stack[base + k];
                    sp = base + 1;
                }
            }
        }
        stack[sp - 1]
    }
}

/// Piece whose guard holds at `v`; at a shared endpoint the piece on the
/// side `dir` points to wins.
fn select_piece<T: Real>(guards: &[(f64, f64)], v: T, dir: T) -> usize {
    let v64 = v.as_f64();
    let last = guards.len() - 1;
    if v64 < guards[0].0 {
        return 0;
    }
    for (k, &(lo, hi)) in guards.iter().enumerate() {
        if v64 >= lo && v64 <= hi {
            if v64 == hi && k < last && dir > T::zero() {
                return k + 1;
            }
            return k;
        }
    }
    last
}

fn emit(e: &Expr, ops: &mut Vec<Op>) -> Result<()> {
    match e {
        Expr::Num(v) => ops.push(Op::Const(*v)),
        Expr::Pi => ops.push(Op::Const(std::f64::consts::PI)),
        Expr::Var(name) => {
            let slot = var_slot(name).ok_or_else(|| Error::invalid(format!("unknown variable `{name}`")))?;
            ops.push(Op::Var(slot));
        }
        Expr::Neg(a) => {
            emit(a, ops)?;
            ops.push(Op::Neg);
        }
        Expr::Call(f, a) => {
            emit(a, ops)?;
            ops.push(match f {
                Func::Abs => Op::Abs,
                Func::Sin => Op::Sin,
                Func::Cos => Op::Cos,
                Func::Sqrt => Op::Sqrt,
            });
        }
        Expr::Bin(op, a, b) => {
            emit(a, ops)?;
            emit(b, ops)?;
            ops.push(match op {
                BinOp::Add => Op::Add,
                BinOp::Sub => Op::Sub,
                BinOp::Mul => Op::Mul,
                BinOp::Div => Op::Div,
            });
        }
        Expr::Pow(a, b) => {
            emit(a, ops)?;
            ops.push(classify_exponent(b)?);
        }
        Expr::Extremum(k, args) => {
            for a in args {
                emit(a, ops)?;
            }
            ops.push(match k {
                Extremum::Min => Op::Min(args.len()),
                Extremum::Max => Op::Max(args.len()),
            });
        }
        Expr::Piecewise(pieces) => {
            for p in pieces {
                emit(&p.body, ops)?;
            }
            ops.push(Op::Select(pieces.iter().map(|p| (p.lo, p.hi)).collect()));
        }
    }
    Ok(())
}
