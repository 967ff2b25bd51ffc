use std::ops::{Add, Div, Mul, Neg, Sub};

/// Number types the expression evaluator can run on.
pub trait Scalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(c: f64) -> Self;
    /// Real part, used for domain checks.
    fn value(&self) -> f64;
    fn is_finite(&self) -> bool;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
}

impl Scalar for f64 {
    fn from_f64(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
}

/// Vector forward-mode dual number: a value plus one partial per seeded
/// direction.
///
/// `eps` may be shorter than the number of directions; missing entries are
/// zero. Constants therefore carry an empty vector. Nesting (`Dual<Dual>`)
/// gives second derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct Dual<T = f64> {
    pub re: T,
    pub eps: Vec<T>,
}

impl<T: Scalar> Dual<T> {
    pub fn constant(re: T) -> Self {
        Dual { re, eps: Vec::new() }
    }

    /// Independent variable number `index` of `n` seeded directions.
    pub fn variable(re: T, index: usize, n: usize) -> Self {
        let eps = (0..n).map(|i| T::from_f64(if i == index { 1.0 } else { 0.0 })).collect();
        Dual { re, eps }
    }

    /// Seeds `point[i]` with direction `i`.
    pub fn seed(point: &[T]) -> Vec<Self> {
        let n = point.len();
        point.iter().enumerate().map(|(i, x)| Dual::variable(x.clone(), i, n)).collect()
    }

    /// Partial along direction `i` (zero if never seeded).
    pub fn partial(&self, i: usize) -> T {
        self.eps.get(i).cloned().unwrap_or_else(|| T::from_f64(0.0))
    }

    /// Chain rule for a unary function with value `g` and derivative `dg`.
    fn chain(&self, g: T, dg: T) -> Self {
        Dual { re: g, eps: self.eps.iter().map(|e| e.clone() * dg.clone()).collect() }
    }
}

fn zip_longest<T: Clone>(a: &[T], b: &[T], both: impl Fn(&T, &T) -> T, left: impl Fn(&T) -> T, right: impl Fn(&T) -> T) -> Vec<T> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| match (a.get(i), b.get(i)) {
            (Some(x), Some(y)) => both(x, y),
            (Some(x), None) => left(x),
            (None, Some(y)) => right(y),
            (None, None) => unreachable!(),
        })
        .collect()
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let eps = zip_longest(&self.eps, &rhs.eps, |x, y| x.clone() + y.clone(), T::clone, T::clone);
        Dual { re: self.re + rhs.re, eps }
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let eps = zip_longest(&self.eps, &rhs.eps, |x, y| x.clone() - y.clone(), T::clone, |y| -y.clone());
        Dual { re: self.re - rhs.re, eps }
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (&self.re, &rhs.re);
        let eps = zip_longest(
            &self.eps,
            &rhs.eps,
            |x, y| x.clone() * b.clone() + a.clone() * y.clone(),
            |x| x.clone() * b.clone(),
            |y| a.clone() * y.clone(),
        );
        Dual { re: self.re * rhs.re, eps }
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        // (a/b)' = a'/b - a b'/b^2
        let inv = T::from_f64(1.0) / rhs.re.clone();
        let q = self.re.clone() * inv.clone();
        let eps = zip_longest(
            &self.eps,
            &rhs.eps,
            |x, y| (x.clone() - q.clone() * y.clone()) * inv.clone(),
            |x| x.clone() * inv.clone(),
            |y| -(q.clone() * y.clone() * inv.clone()),
        );
        Dual { re: q, eps }
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual { re: -self.re, eps: self.eps.into_iter().map(|e| -e).collect() }
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn from_f64(c: f64) -> Self {
        Dual::constant(T::from_f64(c))
    }
    fn value(&self) -> f64 {
        self.re.value()
    }
    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.eps.iter().all(Scalar::is_finite)
    }
    fn sin(&self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    fn cos(&self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    fn exp(&self) -> Self {
        let e = self.re.exp();
        self.chain(e.clone(), e)
    }
    fn ln(&self) -> Self {
        self.chain(self.re.ln(), T::from_f64(1.0) / self.re.clone())
    }
    fn sqrt(&self) -> Self {
        let s = self.re.sqrt();
        let d = T::from_f64(0.5) / s.clone();
        self.chain(s, d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leibniz_rule_on_products() {
        let x = Dual::variable(3.0, 0, 2);
        let y = Dual::variable(-2.0, 1, 2);
        let p = x.clone() * y.clone();
        assert_eq!(p.re, -6.0);
        assert_eq!(p.eps, vec![-2.0, 3.0]);
        let q = x / y;
        assert_eq!(q.re, -1.5);
        assert_eq!(q.partial(0), -0.5);
        assert_eq!(q.partial(1), -0.75);
    }

    #[test]
    fn constants_have_no_partials() {
        let c: Dual = Dual::from_f64(2.5);
        assert!(c.eps.is_empty());
        assert_eq!(c.partial(3), 0.0);
        let x = Dual::variable(1.0, 1, 3);
        let s = c + x;
        assert_eq!(s.eps, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn nested_duals_give_second_derivatives() {
        // f(x) = x^3 at x = 2: f' = 12, f'' = 12
        let inner = Dual::variable(2.0, 0, 1);
        let x = Dual { re: inner, eps: vec![Dual::from_f64(1.0)] };
        let y = x.clone() * x.clone() * x;
        assert_eq!(y.re.re, 8.0);
        assert_eq!(y.re.partial(0), 12.0);
        assert_eq!(y.partial(0).re, 12.0);
        assert_eq!(y.partial(0).partial(0), 12.0);
    }
}
