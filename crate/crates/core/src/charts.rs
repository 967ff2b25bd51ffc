//! Coordinates adapted to regular functions.
//!
//! For a single `f` the chart is `Ψ(z, y) = φ_z(ψ(y))`, where `φ` is the flow
//! of `∇f/‖∇f‖²` and `ψ` parameterizes `f⁻¹(0)`. For `k` orthogonal,
//! commuting `F = (F_1, …, F_k)` it is
//! `Ψ(r, y) = φ¹_{r_1} ∘ … ∘ φᵏ_{r_k}(ψ(y))`. A single-function chart is the
//! case `k = 1`; chart coordinates are always ordered `(r_1, …, r_k, y)`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::expr::{EvalError, ScalarField};
use crate::geometry::{GeometryError, MetricSpec};
use crate::ode::{Dopri5, OdeError, Tolerances};
use crate::par::Execution;

/// Gradients below this norm leave the regular region.
pub const MIN_GRADIENT: f64 = 1e-8;
pub const IDENTITY_TOLERANCE: f64 = 1e-8;
pub const ORDER_TOLERANCE: f64 = 1e-7;
pub const BLOCK_TOLERANCE: f64 = 1e-6;
pub const LEVEL_DERIVATIVE_TOLERANCE: f64 = 1e-6;
/// Grid nodes closer than this count as a collision.
pub const COLLISION_DISTANCE: f64 = 1e-10;
/// Jacobians with a larger condition number are reported singular.
pub const MAX_CONDITION: f64 = 1e12;

const CACHE_QUANTUM: f64 = 1e-12;
const CACHE_CAPACITY: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ChartError {
    #[error("gradient norm {norm:e} below 1e-8 at {point:?}")]
    GradientTooSmall { point: Vec<f64>, norm: f64 },
    #[error("{identity} violated at {point:?} (residual {residual:e})")]
    IdentityViolation { identity: String, point: Vec<f64>, residual: f64 },
    #[error("flows do not commute at {point:?} (discrepancy {discrepancy:e})")]
    OrderDependence { point: Vec<f64>, discrepancy: f64 },
    #[error("chart Jacobian is singular at {point:?} (condition {condition:e})")]
    SingularJacobian { point: Vec<f64>, condition: f64 },
    #[error("flow integration failed: {0}")]
    Integration(String),
    #[error("invalid chart: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl From<EvalError> for ChartError {
    fn from(e: EvalError) -> Self {
        ChartError::Geometry(e.into())
    }
}

fn normalized_gradient(metric: &MetricSpec, f: &ScalarField, x: &[f64]) -> Result<Vec<f64>, ChartError> {
    let df = f.grad_partials(x)?;
    let grad = if metric.is_euclidean() { df.clone() } else { metric.factor(x)?.raise(&df) };
    let sq: f64 = df.iter().zip(&grad).map(|(a, b)| a * b).sum();
    let norm = sq.max(0.0).sqrt();
    if !(norm >= MIN_GRADIENT) {
        return Err(ChartError::GradientTooSmall { point: x.to_vec(), norm });
    }
    Ok(grad.into_iter().map(|c| c / sq).collect())
}

/// `φ(t, start)` for the flow of `∇f/‖∇f‖²` at the default tolerance 1e-10.
pub fn flow_normalized_gradient(metric: &MetricSpec, f: &ScalarField, start: &[f64], t: f64) -> Result<Vec<f64>, ChartError> {
    flow_normalized_gradient_with(metric, f, start, t, Tolerances::default())
}

pub fn flow_normalized_gradient_with(
    metric: &MetricSpec,
    f: &ScalarField,
    start: &[f64],
    t: f64,
    tol: Tolerances,
) -> Result<Vec<f64>, ChartError> {
    let n = metric.dimension();
    if start.len() != n || f.dimension() != n {
        return Err(ChartError::Invalid(format!("flow in dimension {n} got point of length {} and field of dimension {}", start.len(), f.dimension())));
    }
    if !t.is_finite() {
        return Err(ChartError::Invalid(format!("flow time {t}")));
    }
    let (end, _) = Dopri5::new(tol)
        .solve(
            |_, x: &[f64], dx: &mut [f64]| {
                dx.copy_from_slice(&normalized_gradient(metric, f, x)?);
                Ok(())
            },
            0.0,
            start,
            t,
            &[],
            |_| Ok::<(), ChartError>(()),
        )
        .map_err(|e| match e {
            OdeError::Rhs(e) => e,
            other => ChartError::Integration(other.to_string()),
        })?;
    Ok(end)
}

/// A map `ψ` from base coordinates into the ambient space.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseSurfaceMap {
    components: Vec<ScalarField>,
    parameters: usize,
}

impl BaseSurfaceMap {
    pub fn new(components: Vec<ScalarField>) -> Result<Self, ChartError> {
        let parameters = components.first().map(ScalarField::dimension).ok_or_else(|| ChartError::Invalid("empty base map".into()))?;
        if components.iter().any(|c| c.dimension() != parameters) {
            return Err(ChartError::Invalid("base map components disagree on parameter count".into()));
        }
        Ok(BaseSurfaceMap { components, parameters })
    }

    /// Components are expressions in `x1..x<parameters>`.
    pub fn parse<S: AsRef<str>>(components: &[S], parameters: usize) -> Result<Self, ChartError> {
        let fields = components
            .iter()
            .map(|c| ScalarField::parse(c.as_ref(), parameters).map_err(|e| ChartError::Invalid(format!("base map: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(fields)
    }

    pub fn parameters(&self) -> usize {
        self.parameters
    }

    pub fn ambient_dimension(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, y: &[f64]) -> Result<Vec<f64>, ChartError> {
        Ok(self.components.iter().map(|c| c.eval(y)).collect::<Result<Vec<_>, _>>()?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartSettings {
    /// Flow tolerance; tight so that finite-difference Jacobians stay accurate.
    pub tol: Tolerances,
    /// Relative finite-difference step.
    pub fd_step: f64,
    /// Grid points per chart axis.
    pub grid: usize,
    pub execution: Execution,
}

impl Default for ChartSettings {
    fn default() -> Self {
        ChartSettings { tol: Tolerances { abs: 1e-13, rel: 1e-13 }, fd_step: 1e-5, grid: 9, execution: Execution::Parallel }
    }
}

/// `Ψ(r, y) = φ¹_{r_1} ∘ … ∘ φᵏ_{r_k}(ψ(y))`, evaluated lazily and memoized.
pub struct AdaptedChart {
    metric: MetricSpec,
    fields: Vec<ScalarField>,
    base: BaseSurfaceMap,
    flow_box: Vec<(f64, f64)>,
    y_box: Vec<(f64, f64)>,
    settings: ChartSettings,
    cache: RwLock<HashMap<Vec<i64>, Arc<[f64]>>>,
}

impl std::fmt::Debug for AdaptedChart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AdaptedChart")
            .field("fields", &self.fields.iter().map(ToString::to_string).collect::<Vec<_>>())
            .field("flow_box", &self.flow_box)
            .field("y_box", &self.y_box)
            .finish_non_exhaustive()
    }
}

fn check_box(b: &[(f64, f64)], what: &str) -> Result<(), ChartError> {
    if b.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
        return Err(ChartError::Invalid(format!("{what} must be finite intervals with lo ≤ hi")));
    }
    Ok(())
}

impl AdaptedChart {
    pub fn new(
        metric: MetricSpec,
        fields: Vec<ScalarField>,
        base: BaseSurfaceMap,
        flow_box: Vec<(f64, f64)>,
        y_box: Vec<(f64, f64)>,
        settings: ChartSettings,
    ) -> Result<Self, ChartError> {
        let n = metric.dimension();
        let k = fields.len();
        if k == 0 || k >= n {
            return Err(ChartError::Invalid(format!("need 0 < k < n flows, got k = {k}, n = {n}")));
        }
        if fields.iter().any(|f| f.dimension() != n) || base.ambient_dimension() != n {
            return Err(ChartError::Invalid("fields and base map must live in the metric's dimension".into()));
        }
        if base.parameters() != n - k {
            return Err(ChartError::IdentityViolation {
                identity: format!("base map parameter count = {}", n - k),
                point: Vec::new(),
                residual: base.parameters().abs_diff(n - k) as f64,
            });
        }
        if flow_box.len() != k || y_box.len() != n - k {
            return Err(ChartError::Invalid("box dimensions do not match the chart".into()));
        }
        check_box(&flow_box, "flow ranges")?;
        check_box(&y_box, "base box")?;
        if !(settings.fd_step > 0.0) || settings.grid < 2 {
            return Err(ChartError::Invalid("need fd_step > 0 and at least 2 grid points per axis".into()));
        }
        Ok(AdaptedChart { metric, fields, base, flow_box, y_box, settings, cache: RwLock::new(HashMap::new()) })
    }

    pub fn dimension(&self) -> usize {
        self.metric.dimension()
    }

    pub fn flow_count(&self) -> usize {
        self.fields.len()
    }

    pub fn fields(&self) -> &[ScalarField] {
        &self.fields
    }

    pub fn metric(&self) -> &MetricSpec {
        &self.metric
    }

    pub fn settings(&self) -> &ChartSettings {
        &self.settings
    }

    /// Chart-coordinate box `(r, y)`.
    pub fn domain(&self) -> Vec<(f64, f64)> {
        self.flow_box.iter().chain(&self.y_box).copied().collect()
    }

    pub fn flow(&self, field: usize, x: &[f64], t: f64) -> Result<Vec<f64>, ChartError> {
        flow_normalized_gradient_with(&self.metric, &self.fields[field], x, t, self.settings.tol)
    }

    /// Applies the flows in `order` (first entry first).
    pub fn evaluate_in_order(&self, u: &[f64], order: &[usize]) -> Result<Vec<f64>, ChartError> {
        let k = self.flow_count();
        if u.len() != self.dimension() {
            return Err(ChartError::Invalid(format!("chart point has length {}, expected {}", u.len(), self.dimension())));
        }
        let (r, y) = u.split_at(k);
        let mut p = self.base.eval(y)?;
        for &i in order {
            if r[i] != 0.0 {
                p = self.flow(i, &p, r[i])?;
            }
        }
        Ok(p)
    }

    /// `Ψ(u)`, innermost flow `φᵏ` applied first.
    pub fn evaluate(&self, u: &[f64]) -> Result<Vec<f64>, ChartError> {
        let key: Vec<i64> = u.iter().map(|c| (c / CACHE_QUANTUM).round() as i64).collect();
        if let Some(hit) = self.cache.read().map_err(|_| ChartError::Invalid("poisoned chart cache".into()))?.get(&key) {
            return Ok(hit.to_vec());
        }
        let order: Vec<usize> = (0..self.flow_count()).rev().collect();
        let value = self.evaluate_in_order(u, &order)?;
        if let Ok(mut cache) = self.cache.write() {
            if cache.len() >= CACHE_CAPACITY {
                cache.clear();
            }
            cache.insert(key, value.clone().into());
        }
        Ok(value)
    }

    pub fn cached_points(&self) -> usize {
        self.cache.read().map_or(0, |c| c.len())
    }

    fn fd_step(&self, c: f64) -> f64 {
        self.settings.fd_step * c.abs().max(1.0)
    }

    /// `∂Ψ/∂u` by central differences; column `j` is `∂_j Ψ`.
    pub fn jacobian(&self, u: &[f64]) -> Result<DMatrix<f64>, ChartError> {
        let n = self.dimension();
        let mut j = DMatrix::zeros(n, n);
        let mut w = u.to_vec();
        for c in 0..n {
            let h = self.fd_step(u[c]);
            w[c] = u[c] + h;
            let plus = self.evaluate(&w)?;
            w[c] = u[c] - h;
            let minus = self.evaluate(&w)?;
            w[c] = u[c];
            for r in 0..n {
                j[(r, c)] = (plus[r] - minus[r]) / (2.0 * h);
            }
        }
        Ok(j)
    }

    /// `Ψ*(g) = Jᵀ g J` at `u`, together with `J` and `Ψ(u)`.
    #[allow(clippy::type_complexity)]
    pub fn pullback_metric(&self, u: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<f64>), ChartError> {
        let x = self.evaluate(u)?;
        let j = self.jacobian(u)?;
        let g = self.metric.matrix_at(&x)?;
        Ok((j.transpose() * g * &j, j, x))
    }

    /// Uniform tensor grid over the chart domain, last axis fastest.
    pub fn grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        tensor_grid(&self.domain(), per_axis)
    }
}

pub fn tensor_grid(domain: &[(f64, f64)], per_axis: usize) -> Vec<Vec<f64>> {
    let per_axis = per_axis.max(1);
    let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
        if per_axis == 1 {
            return vec![0.5 * (lo + hi)];
        }
        (0..per_axis).map(|i| lo + (hi - lo) * i as f64 / (per_axis - 1) as f64).collect()
    };
    let mut out = vec![Vec::new()];
    for &range in domain {
        let values = axis(range);
        out = out
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    out
}

pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Structure of `Ψ*(g)` on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub points: usize,
    /// Largest `|g_{r_i y_a}|` (the `g_{0a}` terms for a single function).
    pub max_mixed: f64,
    /// Largest `|g_{r_i r_j}|`, `i ≠ j`.
    pub max_radial_offdiagonal: f64,
    pub max_condition: f64,
    pub worst_point: Vec<f64>,
    pub pass: bool,
}

struct NodeData {
    x: Vec<f64>,
    mixed: f64,
    radial: f64,
    condition: f64,
}

fn node_data(chart: &AdaptedChart, u: &[f64]) -> Result<NodeData, ChartError> {
    let k = chart.flow_count();
    let n = chart.dimension();
    let (g, j, x) = chart.pullback_metric(u)?;
    let condition = condition_number(&j);
    if !(condition <= MAX_CONDITION) {
        return Err(ChartError::SingularJacobian { point: u.to_vec(), condition });
    }
    let mut mixed: f64 = 0.0;
    let mut radial: f64 = 0.0;
    for a in 0..k {
        for b in k..n {
            mixed = mixed.max(g[(a, b)].abs());
        }
        for b in 0..k {
            if a != b {
                radial = radial.max(g[(a, b)].abs());
            }
        }
    }
    Ok(NodeData { x, mixed, radial, condition })
}

fn block_from(grid: &[Vec<f64>], nodes: &[NodeData]) -> BlockReport {
    let mut report = BlockReport {
        points: nodes.len(),
        max_mixed: 0.0,
        max_radial_offdiagonal: 0.0,
        max_condition: 0.0,
        worst_point: grid.first().cloned().unwrap_or_default(),
        pass: true,
    };
    let mut worst = f64::NEG_INFINITY;
    for (u, d) in grid.iter().zip(nodes) {
        report.max_mixed = report.max_mixed.max(d.mixed);
        report.max_radial_offdiagonal = report.max_radial_offdiagonal.max(d.radial);
        report.max_condition = report.max_condition.max(d.condition);
        if d.mixed.max(d.radial) > worst {
            worst = d.mixed.max(d.radial);
            report.worst_point = u.clone();
        }
    }
    report.pass = report.max_mixed <= BLOCK_TOLERANCE && report.max_radial_offdiagonal <= BLOCK_TOLERANCE;
    report
}

/// Assembles `Jᵀ g J` on a `per_axis`-point grid and reports the block structure.
pub fn pullback_metric_block_check(chart: &AdaptedChart, per_axis: usize) -> Result<BlockReport, ChartError> {
    let grid = chart.grid(per_axis);
    let nodes = chart
        .settings
        .execution
        .map(&grid, |u| node_data(chart, u))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(block_from(&grid, &nodes))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartKind {
    Single,
    Multi,
}

/// Chart verification on the sample grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartReport {
    pub kind: ChartKind,
    pub grid_per_axis: usize,
    pub points: usize,
    /// `max |F(ψ(y))|` over the base grid.
    pub base_residual: f64,
    /// `max |F(Ψ(r, y)) − r|` over the chart grid.
    pub identity_residual: f64,
    pub identity_worst: Vec<f64>,
    /// `max |F_j(φ^i_t(x)) − δ_ij t − F_j(x)|` over grid points.
    pub additivity_residual: f64,
    /// Reversed flow composition against the default one.
    pub order_discrepancy: Option<f64>,
    /// `max |∂(f∘Ψ)/∂y|` (single function only).
    pub level_derivative: Option<f64>,
    pub min_separation: f64,
    pub collisions: Vec<(usize, usize)>,
    pub block: BlockReport,
    pub pass: bool,
}

fn check_base(chart: &AdaptedChart, per_axis: usize) -> Result<f64, ChartError> {
    let mut worst: f64 = 0.0;
    for y in tensor_grid(&chart.y_box, per_axis) {
        let p = chart.base.eval(&y)?;
        for f in &chart.fields {
            let r = f.eval(&p)?.abs();
            if !(r <= IDENTITY_TOLERANCE) {
                return Err(ChartError::IdentityViolation { identity: format!("ψ(y) ∈ {{{f} = 0}}"), point: y, residual: r });
            }
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

struct GridNode {
    data: NodeData,
    identity: f64,
    additivity: f64,
    order: Option<f64>,
    level: Option<f64>,
}

/// Flow time used for the additivity probe.
fn additivity_time(range: (f64, f64)) -> f64 {
    let w = range.1 - range.0;
    if w > 0.0 {
        0.1 * w
    } else {
        0.05
    }
}

fn verify_node(chart: &AdaptedChart, u: &[f64]) -> Result<GridNode, ChartError> {
    let k = chart.flow_count();
    let n = chart.dimension();
    let data = node_data(chart, u)?;
    let x = &data.x;
    let values = chart.fields.iter().map(|f| f.eval(x)).collect::<Result<Vec<_>, _>>()?;
    let identity = values.iter().zip(u).map(|(v, r)| (v - r).abs()).fold(0.0, f64::max);

    let mut additivity: f64 = 0.0;
    for i in 0..k {
        let t = additivity_time(chart.flow_box[i]);
        let moved = chart.flow(i, x, t)?;
        for (j, f) in chart.fields.iter().enumerate() {
            let expect = values[j] + if i == j { t } else { 0.0 };
            additivity = additivity.max((f.eval(&moved)? - expect).abs());
        }
    }

    let order = if k > 1 {
        let swapped = chart.evaluate_in_order(u, &(0..k).collect::<Vec<_>>())?;
        Some(swapped.iter().zip(x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    } else {
        None
    };

    let level = if k == 1 {
        let f = &chart.fields[0];
        let mut w = u.to_vec();
        let mut worst: f64 = 0.0;
        for c in k..n {
            let h = chart.fd_step(u[c]);
            w[c] = u[c] + h;
            let plus = f.eval(&chart.evaluate(&w)?)?;
            w[c] = u[c] - h;
            let minus = f.eval(&chart.evaluate(&w)?)?;
            w[c] = u[c];
            worst = worst.max(((plus - minus) / (2.0 * h)).abs());
        }
        Some(worst)
    } else {
        None
    };
    Ok(GridNode { data, identity, additivity, order, level })
}

fn verify(chart: &AdaptedChart, kind: ChartKind) -> Result<ChartReport, ChartError> {
    let per_axis = chart.settings.grid;
    let base_residual = check_base(chart, per_axis)?;
    let grid = chart.grid(per_axis);
    let nodes = chart
        .settings
        .execution
        .map(&grid, |u| verify_node(chart, u))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let mut identity_residual: f64 = 0.0;
    let mut identity_worst = grid[0].clone();
    let mut additivity_residual: f64 = 0.0;
    let mut order_discrepancy: Option<f64> = None;
    let mut level_derivative: Option<f64> = None;
    for (u, node) in grid.iter().zip(&nodes) {
        if node.identity > identity_residual {
            identity_residual = node.identity;
            identity_worst = u.clone();
        }
        additivity_residual = additivity_residual.max(node.additivity);
        if let Some(d) = node.order {
            order_discrepancy = Some(order_discrepancy.unwrap_or(0.0).max(d));
            if !(d <= ORDER_TOLERANCE) {
                return Err(ChartError::OrderDependence { point: u.clone(), discrepancy: d });
            }
        }
        if let Some(l) = node.level {
            level_derivative = Some(level_derivative.unwrap_or(0.0).max(l));
        }
    }
    if !(identity_residual <= IDENTITY_TOLERANCE) {
        let identity = match kind {
            ChartKind::Single => "f(Ψ(z, y)) = z",
            ChartKind::Multi => "F(Ψ(r, y)) = r",
        };
        return Err(ChartError::IdentityViolation { identity: identity.into(), point: identity_worst, residual: identity_residual });
    }

    let mut min_separation = f64::INFINITY;
    let mut collisions = Vec::new();
    for a in 0..nodes.len() {
        for b in a + 1..nodes.len() {
            let d = nodes[a].data.x.iter().zip(&nodes[b].data.x).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            min_separation = min_separation.min(d);
            if d < COLLISION_DISTANCE {
                collisions.push((a, b));
            }
        }
    }

    let data: Vec<NodeData> = nodes.into_iter().map(|n| n.data).collect();
    let block = block_from(&grid, &data);
    let pass = block.pass
        && collisions.is_empty()
        && additivity_residual <= IDENTITY_TOLERANCE
        && level_derivative.is_none_or(|l| l <= LEVEL_DERIVATIVE_TOLERANCE);
    Ok(ChartReport {
        kind,
        grid_per_axis: per_axis,
        points: grid.len(),
        base_residual,
        identity_residual,
        identity_worst,
        additivity_residual,
        order_discrepancy,
        level_derivative,
        min_separation,
        collisions,
        block,
        pass,
    })
}

/// Builds and verifies `Ψ(z, y) = φ_z(ψ(y))` for a single regular `f`.
pub fn build_chart(
    metric: &MetricSpec,
    f: &ScalarField,
    base: BaseSurfaceMap,
    z_range: (f64, f64),
    y_box: Vec<(f64, f64)>,
    settings: ChartSettings,
) -> Result<(AdaptedChart, ChartReport), ChartError> {
    let chart = AdaptedChart::new(metric.clone(), vec![f.clone()], base, vec![z_range], y_box, settings)?;
    let report = verify(&chart, ChartKind::Single)?;
    Ok((chart, report))
}

/// Builds and verifies the chart of `k` orthogonal commuting functions.
pub fn build_multi_chart(
    metric: &MetricSpec,
    fields: &[ScalarField],
    base: BaseSurfaceMap,
    r_box: Vec<(f64, f64)>,
    y_box: Vec<(f64, f64)>,
    settings: ChartSettings,
) -> Result<(AdaptedChart, ChartReport), ChartError> {
    let chart = AdaptedChart::new(metric.clone(), fields.to_vec(), base, r_box, y_box, settings)?;
    let report = verify(&chart, ChartKind::Multi)?;
    Ok((chart, report))
}
