//! Point-wise Riemannian quantities for metrics and one-forms given by
//! scalar fields.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector};

use crate::expr::{EvalError, ParseError, ScalarField};

/// Largest supported coordinate dimension.
pub const MAX_DIMENSION: usize = 16;

/// Factorization pivots below this are treated as loss of positive definiteness.
pub const PIVOT_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("metric is not positive definite at {point:?} (pivot {pivot:e})")]
    SingularMetric { point: Vec<f64>, pivot: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("dimension {0} outside 1..={MAX_DIMENSION}")]
    BadDimension(usize),
    #[error("metric entries ({row},{col}) and ({col},{row}) differ")]
    Asymmetric { row: usize, col: usize },
    #[error("expected {expected} components, got {got}")]
    ComponentCount { expected: usize, got: usize },
}

fn check_dimension(n: usize) -> Result<(), GeometryError> {
    if (1..=MAX_DIMENSION).contains(&n) {
        Ok(())
    } else {
        Err(GeometryError::BadDimension(n))
    }
}

#[derive(Clone, Debug, PartialEq)]
enum MetricKind {
    Euclidean,
    /// Upper triangle, row-major: (0,0), (0,1), …, (0,n-1), (1,1), …
    Upper(Vec<ScalarField>),
}

/// A Riemannian metric `g_{αβ}(x)` on a coordinate patch of `R^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricSpec {
    dimension: usize,
    kind: MetricKind,
}

fn upper_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

impl MetricSpec {
    pub fn euclidean(dimension: usize) -> Result<Self, GeometryError> {
        check_dimension(dimension)?;
        Ok(MetricSpec { dimension, kind: MetricKind::Euclidean })
    }

    /// Builds from a full square matrix of fields; mirrored entries must agree.
    pub fn from_matrix(entries: Vec<Vec<ScalarField>>) -> Result<Self, GeometryError> {
        let n = entries.len();
        check_dimension(n)?;
        let mut upper = Vec::with_capacity(n * (n + 1) / 2);
        for (i, row) in entries.iter().enumerate() {
            if row.len() != n {
                return Err(GeometryError::ComponentCount { expected: n, got: row.len() });
            }
            for j in i..n {
                if row[j] != entries[j][i] {
                    return Err(GeometryError::Asymmetric { row: i, col: j });
                }
                upper.push(row[j].clone());
            }
        }
        Ok(MetricSpec { dimension: n, kind: MetricKind::Upper(upper) })
    }

    /// Parses a square matrix of expression strings.
    pub fn parse_matrix<S: AsRef<str>>(rows: &[Vec<S>]) -> Result<Self, GeometryError> {
        let n = rows.len();
        let entries = rows
            .iter()
            .map(|row| row.iter().map(|s| ScalarField::parse(s.as_ref(), n)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_matrix(entries)
    }

    pub fn diagonal(entries: Vec<ScalarField>) -> Result<Self, GeometryError> {
        let n = entries.len();
        let zero = ScalarField::constant(0.0, n);
        let full = (0..n)
            .map(|i| (0..n).map(|j| if i == j { entries[i].clone() } else { zero.clone() }).collect())
            .collect();
        Self::from_matrix(full)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.kind, MetricKind::Euclidean)
    }

    pub fn entry(&self, i: usize, j: usize) -> Option<&ScalarField> {
        match &self.kind {
            MetricKind::Euclidean => None,
            MetricKind::Upper(u) => u.get(upper_index(self.dimension, i, j)),
        }
    }

    pub fn matrix_at(&self, x: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
        let n = self.dimension;
        match &self.kind {
            MetricKind::Euclidean => Ok(DMatrix::identity(n, n)),
            MetricKind::Upper(u) => {
                let mut g = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in i..n {
                        let v = u[upper_index(n, i, j)].eval(x)?;
                        g[(i, j)] = v;
                        g[(j, i)] = v;
                    }
                }
                Ok(g)
            }
        }
    }

    /// Metric matrix and its coordinate derivatives `dg[c] = ∂_c g`.
    pub fn matrix_and_derivatives(&self, x: &[f64]) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>), GeometryError> {
        let n = self.dimension;
        match &self.kind {
            MetricKind::Euclidean => Ok((DMatrix::identity(n, n), vec![DMatrix::zeros(n, n); n])),
            MetricKind::Upper(u) => {
                let mut g = DMatrix::zeros(n, n);
                let mut dg = vec![DMatrix::zeros(n, n); n];
                for i in 0..n {
                    for j in i..n {
                        let (v, grad) = u[upper_index(n, i, j)].value_and_grad(x)?;
                        g[(i, j)] = v;
                        g[(j, i)] = v;
                        for (c, d) in grad.into_iter().enumerate() {
                            dg[c][(i, j)] = d;
                            dg[c][(j, i)] = d;
                        }
                    }
                }
                Ok((g, dg))
            }
        }
    }

    /// Metric and inverse at `x`; fails when the Cholesky pivot drops below
    /// [`PIVOT_FLOOR`].
    pub fn factor(&self, x: &[f64]) -> Result<MetricAt, GeometryError> {
        let g = self.matrix_at(x)?;
        MetricAt::new(g, x)
    }
}

/// A metric evaluated at one point, with its inverse.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricAt {
    pub g: DMatrix<f64>,
    pub inv: DMatrix<f64>,
}

impl MetricAt {
    pub fn new(g: DMatrix<f64>, x: &[f64]) -> Result<Self, GeometryError> {
        let inv = spd_inverse(&g).map_err(|pivot| GeometryError::SingularMetric { point: x.to_vec(), pivot })?;
        Ok(MetricAt { g, inv })
    }

    pub fn raise(&self, covector: &[f64]) -> Vec<f64> {
        (&self.inv * DVector::from_column_slice(covector)).iter().copied().collect()
    }

    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = u.len();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += u[i] * self.g[(i, j)] * v[j];
            }
        }
        s
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }

    /// Cotangent norm `sqrt(c g⁻¹ c)`.
    pub fn conorm(&self, c: &[f64]) -> f64 {
        let n = c.len();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += c[i] * self.inv[(i, j)] * c[j];
            }
        }
        s.max(0.0).sqrt()
    }
}

/// Inverse of a symmetric positive definite matrix by Cholesky.
/// Returns the offending pivot on failure.
pub(crate) fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>, f64> {
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d >= PIVOT_FLOOR) {
            return Err(d);
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    // Solve L L^T X = I column by column.
    let mut inv = DMatrix::<f64>::zeros(n, n);
    for c in 0..n {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[(k, i)] * inv[(k, c)];
            }
            inv[(i, c)] = s / l[(i, i)];
        }
    }
    // Symmetrize rounding noise.
    for i in 0..n {
        for j in i + 1..n {
            let m = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            inv[(i, j)] = m;
            inv[(j, i)] = m;
        }
    }
    Ok(inv)
}

/// A differential one-form `A_α dx^α`.
#[derive(Clone, Debug, PartialEq)]
pub struct OneForm {
    components: Vec<ScalarField>,
}

impl OneForm {
    pub fn new(components: Vec<ScalarField>) -> Result<Self, GeometryError> {
        let n = components.len();
        check_dimension(n)?;
        if let Some(c) = components.iter().find(|c| c.dimension() != n) {
            return Err(GeometryError::ComponentCount { expected: n, got: c.dimension() });
        }
        Ok(OneForm { components })
    }

    pub fn parse<S: AsRef<str>>(components: &[S]) -> Result<Self, GeometryError> {
        let n = components.len();
        let fields = components.iter().map(|s| ScalarField::parse(s.as_ref(), n)).collect::<Result<_, _>>()?;
        Self::new(fields)
    }

    pub fn zero(dimension: usize) -> Result<Self, GeometryError> {
        Self::new(vec![ScalarField::constant(0.0, dimension); dimension])
    }

    pub fn dimension(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(ScalarField::is_zero)
    }

    /// `μ_x(v)`.
    pub fn apply(&self, x: &[f64], v: &[f64]) -> Result<f64, EvalError> {
        let mut s = 0.0;
        for (c, vi) in self.components.iter().zip(v) {
            s += c.eval(x)? * vi;
        }
        Ok(s)
    }
}

/// `∇_ρ f = g⁻¹ ∂f`.
pub fn riemannian_gradient(metric: &MetricSpec, field: &ScalarField, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
    let partials = field.grad_partials(x)?;
    if metric.is_euclidean() {
        return Ok(partials);
    }
    Ok(metric.factor(x)?.raise(&partials))
}

/// Christoffel symbols of the second kind, `Γ^α_{μν}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(n: usize) -> Self {
        Christoffel { n, data: vec![0.0; n * n * n] }
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn get(&self, alpha: usize, mu: usize, nu: usize) -> f64 {
        self.data[(alpha * self.n + mu) * self.n + nu]
    }

    fn set(&mut self, alpha: usize, mu: usize, nu: usize, v: f64) {
        let n = self.n;
        self.data[(alpha * n + mu) * n + nu] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// `Γ^α_{μν} u^μ w^ν` for each α.
    pub fn contract(&self, u: &[f64], w: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|a| {
                let mut s = 0.0;
                for m in 0..n {
                    for k in 0..n {
                        s += self.get(a, m, k) * u[m] * w[k];
                    }
                }
                s
            })
            .collect()
    }

    /// Assembles `Γ^α_{μν} = ½ g^{αβ}(∂_ν g_{βμ} + ∂_μ g_{βν} − ∂_β g_{μν})`.
    pub fn from_derivatives(inv: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Self {
        let n = inv.nrows();
        let mut out = Christoffel::zeros(n);
        for a in 0..n {
            for m in 0..n {
                for k in m..n {
                    let mut s = 0.0;
                    for b in 0..n {
                        s += inv[(a, b)] * (dg[k][(b, m)] + dg[m][(b, k)] - dg[b][(m, k)]);
                    }
                    out.set(a, m, k, 0.5 * s);
                    out.set(a, k, m, 0.5 * s);
                }
            }
        }
        out
    }
}

pub fn christoffel(metric: &MetricSpec, x: &[f64]) -> Result<Christoffel, GeometryError> {
    if metric.is_euclidean() {
        return Ok(Christoffel::zeros(metric.dimension()));
    }
    let (g, dg) = metric.matrix_and_derivatives(x)?;
    let at = MetricAt::new(g, x)?;
    Ok(Christoffel::from_derivatives(&at.inv, &dg))
}

/// `F_{αβ} = ∂_α A_β − ∂_β A_α`, antisymmetric by construction.
pub fn magnetic_tensor(form: &OneForm, x: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
    let n = form.dimension();
    let mut d = DMatrix::zeros(n, n); // d[(b, a)] = ∂_a A_b
    for (b, comp) in form.components().iter().enumerate() {
        if comp.is_zero() {
            continue;
        }
        for (a, v) in comp.grad_partials(x)?.into_iter().enumerate() {
            d[(b, a)] = v;
        }
    }
    let mut f = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a + 1..n {
            let v = d[(b, a)] - d[(a, b)];
            f[(a, b)] = v;
            f[(b, a)] = -v;
        }
    }
    Ok(f)
}

/// Covector `(ι_v F)_β = F_{αβ} v^α`.
pub fn contract_two_form(f: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let n = f.nrows();
    (0..n).map(|b| (0..n).map(|a| f[(a, b)] * v[a]).sum()).collect()
}

/// `‖ι_v dμ‖` in the cotangent norm induced by the metric.
pub fn contracted_form_norm(metric: &MetricSpec, form: &OneForm, v: &[f64], x: &[f64]) -> Result<f64, GeometryError> {
    let f = magnetic_tensor(form, x)?;
    let c = contract_two_form(&f, v);
    if metric.is_euclidean() {
        return Ok(c.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    Ok(metric.factor(x)?.conorm(&c))
}

/// Norm of the two-form `½ F_{αβ} dx^α ∧ dx^β`, `(½ F_{αβ} F_{γδ} g^{αγ} g^{βδ})^{1/2}`.
pub fn two_form_norm(at: &MetricAt, f: &DMatrix<f64>) -> f64 {
    let raised = &at.inv * f * &at.inv;
    let mut s = 0.0;
    for i in 0..f.nrows() {
        for j in 0..f.ncols() {
            s += f[(i, j)] * raised[(i, j)];
        }
    }
    (0.5 * s).max(0.0).sqrt()
}

/// Everything the integrator needs at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointGeometry {
    pub point: Vec<f64>,
    pub metric: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
    pub christoffel: Christoffel,
    pub magnetic: Option<DMatrix<f64>>,
}

impl PointGeometry {
    pub fn at(metric: &MetricSpec, form: Option<&OneForm>, x: &[f64]) -> Result<Self, GeometryError> {
        let (g, dg) = metric.matrix_and_derivatives(x)?;
        let at = MetricAt::new(g, x)?;
        let christoffel = if metric.is_euclidean() {
            Christoffel::zeros(metric.dimension())
        } else {
            Christoffel::from_derivatives(&at.inv, &dg)
        };
        let magnetic = match form {
            Some(f) if !f.is_zero() => Some(magnetic_tensor(f, x)?),
            _ => None,
        };
        Ok(PointGeometry { point: x.to_vec(), metric: at.g, inverse: at.inv, christoffel, magnetic })
    }
}

/// Memo of Christoffel symbols keyed by the point quantized to 1e-12.
///
/// Readers share the lock; a miss computes outside the lock and inserts.
#[derive(Debug, Default)]
pub struct ChristoffelCache {
    map: RwLock<HashMap<Vec<i64>, Arc<Christoffel>>>,
}

const CACHE_GRID: f64 = 1e-12;
const CACHE_CAPACITY: usize = 1 << 16;

impl ChristoffelCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(x: &[f64]) -> Option<Vec<i64>> {
        x.iter()
            .map(|v| {
                let q = (v / CACHE_GRID).round();
                (q.abs() < 9.0e18).then_some(q as i64)
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.map.read().map(|m| m.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get_or_compute(&self, metric: &MetricSpec, x: &[f64]) -> Result<Arc<Christoffel>, GeometryError> {
        let Some(key) = Self::key(x) else {
            return christoffel(metric, x).map(Arc::new);
        };
        if let Some(hit) = self.map.read().ok().and_then(|m| m.get(&key).cloned()) {
            return Ok(hit);
        }
        let value = Arc::new(christoffel(metric, x)?);
        if let Ok(mut m) = self.map.write() {
            if m.len() >= CACHE_CAPACITY {
                m.clear();
            }
            m.insert(key, value.clone());
        }
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str, n: usize) -> ScalarField {
        ScalarField::parse(s, n).unwrap()
    }

    #[test]
    fn euclidean_gradient_of_coordinate() {
        let m = MetricSpec::euclidean(3).unwrap();
        assert_eq!(riemannian_gradient(&m, &f("x1", 3), &[0.3, -2.0, 7.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(riemannian_gradient(&m, &f("4", 3), &[0.3, -2.0, 7.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn scaled_metric_gradient() {
        let m = MetricSpec::diagonal(vec![f("4", 2), f("1", 2)]).unwrap();
        let g = riemannian_gradient(&m, &f("x1", 2), &[1.0, 2.0]).unwrap();
        assert!((g[0] - 0.25).abs() < 1e-15 && g[1].abs() < 1e-15);
    }

    #[test]
    fn polar_christoffel_symbols() {
        let m = MetricSpec::diagonal(vec![f("1", 2), f("x1^2", 2)]).unwrap();
        let c = christoffel(&m, &[2.0, 0.4]).unwrap();
        assert!((c.get(0, 1, 1) + 2.0).abs() < 1e-14);
        assert!((c.get(1, 0, 1) - 0.5).abs() < 1e-14);
        assert!((c.get(1, 1, 0) - 0.5).abs() < 1e-14);
        for (a, m_, k) in [(0, 0, 0), (0, 0, 1), (0, 1, 0), (1, 0, 0), (1, 1, 1)] {
            assert_eq!(c.get(a, m_, k), 0.0);
        }
        assert!(christoffel(&MetricSpec::euclidean(3).unwrap(), &[1.0, 2.0, 3.0]).unwrap().is_zero());
    }

    #[test]
    fn singular_metric_is_reported() {
        let m = MetricSpec::diagonal(vec![f("1", 2), f("x1^2", 2)]).unwrap();
        assert!(matches!(m.factor(&[0.0, 1.0]), Err(GeometryError::SingularMetric { .. })));
        let indefinite = MetricSpec::parse_matrix(&[vec!["1", "2"], vec!["2", "1"]]).unwrap();
        assert!(matches!(indefinite.factor(&[0.0, 0.0]), Err(GeometryError::SingularMetric { .. })));
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let r = MetricSpec::parse_matrix(&[vec!["1", "x1"], vec!["x2", "1"]]);
        assert!(matches!(r, Err(GeometryError::Asymmetric { row: 0, col: 1 })));
    }

    #[test]
    fn inverse_is_accurate() {
        let m = MetricSpec::parse_matrix(&[
            vec!["2 + x1^2", "0.3*x2", "0"],
            vec!["0.3*x2", "1 + x3^2", "0.1"],
            vec!["0", "0.1", "3"],
        ])
        .unwrap();
        let at = m.factor(&[0.5, -1.0, 2.0]).unwrap();
        let err = (&at.g * &at.inv - DMatrix::identity(3, 3)).abs().max();
        assert!(err < 1e-10);
    }

    #[test]
    fn magnetic_tensors_of_corpus_forms() {
        let x_dy = OneForm::parse(&["0", "x1", "0"]).unwrap();
        let t = magnetic_tensor(&x_dy, &[0.2, 0.1, -0.3]).unwrap();
        assert_eq!(t[(0, 1)], 1.0);
        assert_eq!(t[(1, 0)], -1.0);
        assert_eq!(t.iter().filter(|v| **v != 0.0).count(), 2);

        let z_dy = OneForm::parse(&["0", "x3", "0"]).unwrap();
        let t = magnetic_tensor(&z_dy, &[0.2, 0.1, -0.3]).unwrap();
        assert_eq!(t[(2, 1)], 1.0);
        assert_eq!(t[(1, 2)], -1.0);
        assert_eq!(t.iter().filter(|v| **v != 0.0).count(), 2);
    }

    #[test]
    fn exact_forms_have_no_field() {
        // μ = d(x1^2 x2 + sin(x3) x1)
        let df = OneForm::parse(&["2*x1*x2 + sin(x3)", "x1^2", "cos(x3)*x1"]).unwrap();
        let t = magnetic_tensor(&df, &[0.7, -1.3, 0.4]).unwrap();
        assert!(t.abs().max() < 1e-10);
    }

    #[test]
    fn contracted_norms() {
        let m = MetricSpec::euclidean(3).unwrap();
        let z_dy = OneForm::parse(&["0", "x3", "0"]).unwrap();
        let x_dy = OneForm::parse(&["0", "x1", "0"]).unwrap();
        let e1 = [1.0, 0.0, 0.0];
        let p = [0.1, 0.2, 0.3];
        assert_eq!(contracted_form_norm(&m, &z_dy, &e1, &p).unwrap(), 0.0);
        assert_eq!(contracted_form_norm(&m, &x_dy, &e1, &p).unwrap(), 1.0);
        assert_eq!(contracted_form_norm(&m, &x_dy, &[0.0; 3], &p).unwrap(), 0.0);
    }

    #[test]
    fn two_form_norm_of_unit_area_element() {
        let at = MetricSpec::euclidean(3).unwrap().factor(&[0.0; 3]).unwrap();
        let t = magnetic_tensor(&OneForm::parse(&["0", "x1", "0"]).unwrap(), &[0.0; 3]).unwrap();
        assert!((two_form_norm(&at, &t) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cache_returns_same_symbols() {
        let m = MetricSpec::diagonal(vec![f("1", 2), f("x1^2", 2)]).unwrap();
        let cache = ChristoffelCache::new();
        let a = cache.get_or_compute(&m, &[2.0, 0.4]).unwrap();
        let b = cache.get_or_compute(&m, &[2.0, 0.4]).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(*a, christoffel(&m, &[2.0, 0.4]).unwrap());
        assert_eq!(cache.len(), 1);
    }
}
