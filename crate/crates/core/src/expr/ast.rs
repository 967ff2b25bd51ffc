use std::fmt;

use super::dual::Scalar;
use super::EvalError;

/// Elementary functions accepted by the grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "ln" => Some(Func::Ln),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }
}

/// Abstract syntax tree of a scalar expression in the coordinates `x1..xn`.
///
/// Variables are stored zero-based: `x1` is `Var(0)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Real exponent, evaluated as `exp(b ln a)` and therefore requires `a > 0`.
    Pow(Box<Expr>, Box<Expr>),
    /// Integer exponent, evaluated by repeated multiplication.
    PowInt(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

/// Integer exponents above this magnitude are treated as real exponents.
pub(crate) const MAX_INT_EXPONENT: f64 = 1024.0;

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(index: usize) -> Expr {
        Expr::Var(index)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    /// Builds `base ^ exponent`, choosing the integer form when the exponent
    /// is an integer literal (optionally negated).
    pub fn pow(base: Expr, exponent: Expr) -> Expr {
        match integer_literal(&exponent) {
            Some(k) => Expr::PowInt(Box::new(base), k),
            None => Expr::Pow(Box::new(base), Box::new(exponent)),
        }
    }

    /// Largest variable index referenced (zero-based), if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::PowInt(a, _) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        let v = self.eval_generic(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Evaluates over any [`Scalar`]; domain checks use the real part.
    pub fn eval_generic<T: Scalar>(&self, x: &[T]) -> Result<T, EvalError> {
        Ok(match self {
            Expr::Num(v) => T::from_f64(*v),
            Expr::Var(i) => x
                .get(*i)
                .cloned()
                .ok_or(EvalError::DimensionMismatch { expected: *i + 1, got: x.len() })?,
            Expr::Neg(a) => -a.eval_generic(x)?,
            Expr::Add(a, b) => a.eval_generic(x)? + b.eval_generic(x)?,
            Expr::Sub(a, b) => a.eval_generic(x)? - b.eval_generic(x)?,
            Expr::Mul(a, b) => a.eval_generic(x)? * b.eval_generic(x)?,
            Expr::Div(a, b) => {
                let num = a.eval_generic(x)?;
                let den = b.eval_generic(x)?;
                if den.value() == 0.0 {
                    return Err(EvalError::Domain("division by zero"));
                }
                num / den
            }
            Expr::Pow(a, b) => {
                let base = a.eval_generic(x)?;
                let exponent = b.eval_generic(x)?;
                if base.value() <= 0.0 {
                    return Err(EvalError::Domain("real power of a non-positive base"));
                }
                (exponent * base.ln()).exp()
            }
            Expr::PowInt(a, k) => {
                let base = a.eval_generic(x)?;
                if *k < 0 && base.value() == 0.0 {
                    return Err(EvalError::Domain("negative power of zero"));
                }
                powi(base, *k)
            }
            Expr::Call(func, a) => {
                let arg = a.eval_generic(x)?;
                match func {
                    Func::Sin => arg.sin(),
                    Func::Cos => arg.cos(),
                    Func::Exp => arg.exp(),
                    Func::Ln => {
                        if arg.value() <= 0.0 {
                            return Err(EvalError::Domain("ln of a non-positive value"));
                        }
                        arg.ln()
                    }
                    Func::Sqrt => {
                        if arg.value() < 0.0 {
                            return Err(EvalError::Domain("sqrt of a negative value"));
                        }
                        arg.sqrt()
                    }
                }
            }
        })
    }

    /// Replaces every variable `x_i` by `replacements[i]`.
    pub fn substitute(&self, replacements: &[Expr]) -> Result<Expr, EvalError> {
        let sub = |e: &Expr| e.substitute(replacements).map(Box::new);
        Ok(match self {
            Expr::Num(v) => Expr::Num(*v),
            Expr::Var(i) => replacements
                .get(*i)
                .cloned()
                .ok_or(EvalError::DimensionMismatch { expected: *i + 1, got: replacements.len() })?,
            Expr::Neg(a) => Expr::Neg(sub(a)?),
            Expr::Add(a, b) => Expr::Add(sub(a)?, sub(b)?),
            Expr::Sub(a, b) => Expr::Sub(sub(a)?, sub(b)?),
            Expr::Mul(a, b) => Expr::Mul(sub(a)?, sub(b)?),
            Expr::Div(a, b) => Expr::Div(sub(a)?, sub(b)?),
            Expr::Pow(a, b) => Expr::Pow(sub(a)?, sub(b)?),
            Expr::PowInt(a, k) => Expr::PowInt(sub(a)?, *k),
            Expr::Call(f, a) => Expr::Call(*f, sub(a)?),
        })
    }
}

fn integer_literal(e: &Expr) -> Option<i32> {
    let (v, sign) = match e {
        Expr::Num(v) => (*v, 1.0),
        Expr::Neg(inner) => match inner.as_ref() {
            Expr::Num(v) => (*v, -1.0),
            _ => return None,
        },
        _ => return None,
    };
    (v.fract() == 0.0 && v.abs() <= MAX_INT_EXPONENT).then_some((sign * v) as i32)
}

/// Exponentiation by squaring; negative powers invert the result.
pub(crate) fn powi<T: Scalar>(base: T, k: i32) -> T {
    let mut n = k.unsigned_abs();
    let mut acc = T::from_f64(1.0);
    let mut sq = base;
    while n > 0 {
        if n & 1 == 1 {
            acc = acc * sq.clone();
        }
        n >>= 1;
        if n > 0 {
            sq = sq.clone() * sq;
        }
    }
    if k < 0 {
        T::from_f64(1.0) / acc
    } else {
        acc
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesized form; re-parsing it yields the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if *v < 0.0 => write!(f, "(-{:?})", -v),
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::PowInt(a, k) if *k < 0 => write!(f, "({a} ^ (-{}))", k.unsigned_abs()),
            Expr::PowInt(a, k) => write!(f, "({a} ^ {k})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}
