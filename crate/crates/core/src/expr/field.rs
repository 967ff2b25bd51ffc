use std::fmt;
use std::sync::Arc;

use super::ast::Expr;
use super::dual::{Dual, Scalar};
use super::parser::{parse, ParseError};
use super::EvalError;

#[derive(Clone, Debug, PartialEq)]
enum Body {
    Expr(Expr),
    /// Component `axis` of the pulled-back form `F*(ω)`:
    /// `Σ_l c_l(F(x)) ∂_axis F_l(x)`.
    Pullback { coefficients: Vec<Expr>, maps: Vec<Expr>, axis: usize },
}

/// A differentiable scalar function of `dimension` coordinates.
///
/// Cheap to clone and safe to share between threads.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    dimension: usize,
    body: Arc<Body>,
}

impl ScalarField {
    pub fn parse(source: &str, dimension: usize) -> Result<Self, ParseError> {
        Ok(Self::from_expr(parse(source, dimension)?, dimension))
    }

    /// # Panics
    /// If the expression references a variable beyond `dimension`.
    pub fn from_expr(expr: Expr, dimension: usize) -> Self {
        assert!(expr.max_var().is_none_or(|i| i < dimension), "expression exceeds dimension {dimension}");
        ScalarField { dimension, body: Arc::new(Body::Expr(expr)) }
    }

    pub fn constant(value: f64, dimension: usize) -> Self {
        Self::from_expr(Expr::Num(value), dimension)
    }

    /// The coordinate function `x_{index+1}`.
    pub fn coordinate(index: usize, dimension: usize) -> Self {
        Self::from_expr(Expr::Var(index), dimension)
    }

    /// Component `axis` of the pullback of `Σ c_l dr_l` by `maps`.
    ///
    /// `coefficients` are expressions in `maps.len()` variables, `maps` are
    /// expressions in `dimension` variables.
    pub(crate) fn pullback_component(coefficients: Vec<Expr>, maps: Vec<Expr>, axis: usize, dimension: usize) -> Self {
        ScalarField { dimension, body: Arc::new(Body::Pullback { coefficients, maps, axis }) }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// The underlying expression, if this field is a plain expression.
    pub fn expr(&self) -> Option<&Expr> {
        match self.body.as_ref() {
            Body::Expr(e) => Some(e),
            Body::Pullback { .. } => None,
        }
    }

    /// True when the field is the literal constant zero.
    pub fn is_zero(&self) -> bool {
        matches!(self.body.as_ref(), Body::Expr(Expr::Num(v)) if *v == 0.0)
    }

    fn check_dim(&self, got: usize) -> Result<(), EvalError> {
        if got == self.dimension {
            Ok(())
        } else {
            Err(EvalError::DimensionMismatch { expected: self.dimension, got })
        }
    }

    pub fn eval_generic<T: Scalar>(&self, x: &[T]) -> Result<T, EvalError> {
        self.check_dim(x.len())?;
        let v = match self.body.as_ref() {
            Body::Expr(e) => e.eval_generic(x)?,
            Body::Pullback { coefficients, maps, axis } => {
                let image = maps.iter().map(|m| m.eval_generic(x)).collect::<Result<Vec<T>, _>>()?;
                let mut acc = T::from_f64(0.0);
                for (c, m) in coefficients.iter().zip(maps) {
                    let coefficient = c.eval_generic(&image)?;
                    acc = acc + coefficient * directional_partial(m, x, *axis)?;
                }
                acc
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.eval_generic(x)
    }

    /// Coordinate partials `(∂_1, …, ∂_n)` by forward-mode duals.
    pub fn grad_partials(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        Ok(self.value_and_grad(x)?.1)
    }

    pub fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
        self.check_dim(x.len())?;
        let d = self.eval_generic(&Dual::seed(x))?;
        let grad = (0..x.len()).map(|i| d.partial(i)).collect();
        Ok((d.re, grad))
    }

    /// Coordinate Hessian `∂_i ∂_j` by dual-over-dual evaluation.
    pub fn hessian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, EvalError> {
        self.check_dim(x.len())?;
        let n = x.len();
        let inner = Dual::seed(x);
        let outer: Vec<Dual<Dual>> = inner
            .into_iter()
            .enumerate()
            .map(|(i, xi)| Dual::variable(xi, i, n))
            .collect();
        let d = self.eval_generic(&outer)?;
        Ok((0..n).map(|i| (0..n).map(|j| d.partial(i).partial(j)).collect()).collect())
    }
}

/// `∂_axis expr` at `x`, lifting the current number type by one dual level.
fn directional_partial<T: Scalar>(expr: &Expr, x: &[T], axis: usize) -> Result<T, EvalError> {
    let lifted: Vec<Dual<T>> = x
        .iter()
        .enumerate()
        .map(|(i, xi)| {
            let eps = if i == axis { vec![T::from_f64(1.0)] } else { Vec::new() };
            Dual { re: xi.clone(), eps }
        })
        .collect();
    Ok(expr.eval_generic(&lifted)?.partial(0))
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.body.as_ref() {
            Body::Expr(e) => write!(f, "{e}"),
            Body::Pullback { coefficients, maps, axis } => {
                let terms: Vec<String> = coefficients
                    .iter()
                    .enumerate()
                    .map(|(l, c)| format!("c{}[{c}]∘F · ∂{}({})", l + 1, axis + 1, maps[l]))
                    .collect();
                f.write_str(&terms.join(" + "))
            }
        }
    }
}
