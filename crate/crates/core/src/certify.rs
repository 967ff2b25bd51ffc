//! Semi-decision procedures for the growth hypotheses near `M = U⁻¹(0)`.
//!
//! A condition `Q = O(U^a)` is probed on logarithmic potential shells
//! `U ∈ [δ, 10δ]`: bounded shell maxima certify it, maxima growing by at
//! least a decade over three consecutive decades refute it, anything else
//! is inconclusive.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::charts::{AdaptedChart, ChartError};
use crate::expr::{EvalError, ScalarField};
use crate::geometry::{self, GeometryError, MetricSpec, OneForm};
use crate::par::Execution;

/// Shell maxima below this are indistinguishable from zero.
pub const NOISE_FLOOR: f64 = 1e-9;
pub const MIN_GRADIENT: f64 = 1e-6;
pub const QUASI_HOMOGENEOUS_TOLERANCE: f64 = 1e-9;
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-9;
pub const BRACKET_TOLERANCE: f64 = 1e-5;
pub const BRACKET_STEP: f64 = 1e-5;
pub const CONTRACTION_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CertifyError {
    #[error("no samples with U in [{delta:e}, {upper:e}] after {attempts} attempts")]
    EmptyShell { delta: f64, upper: f64, attempts: usize },
    #[error("gradient norm {norm:e} below 1e-6 at {point:?}")]
    GradientTooSmall { point: Vec<f64>, norm: f64 },
    #[error("invalid probe: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Chart(#[from] ChartError),
}

impl From<EvalError> for CertifyError {
    fn from(e: EvalError) -> Self {
        CertifyError::Geometry(e.into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Certified,
    Refuted,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSettings {
    pub radius: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub samples: usize,
    pub max_attempts: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        ProbeSettings {
            radius: 0.5,
            delta_min: 1e-7,
            delta_max: 1e-2,
            samples: 128,
            max_attempts: 1_000_000,
            seed: 0,
            execution: Execution::Parallel,
        }
    }
}

impl ProbeSettings {
    pub fn validate(&self) -> Result<(), CertifyError> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(CertifyError::Invalid(format!("radius must be positive, got {}", self.radius)));
        }
        if !(self.delta_min > 0.0 && self.delta_min < self.delta_max && self.delta_max.is_finite()) {
            return Err(CertifyError::Invalid(format!("need 0 < δ_min < δ_max, got [{}, {}]", self.delta_min, self.delta_max)));
        }
        if self.samples < 100 {
            return Err(CertifyError::Invalid(format!("need at least 100 samples per shell, got {}", self.samples)));
        }
        Ok(())
    }

    /// Lower shell bounds `δ_min·10^j ≤ δ_max`.
    pub fn deltas(&self) -> Vec<f64> {
        (0..)
            .map(|j| self.delta_min * 10f64.powi(j))
            .take_while(|d| *d <= self.delta_max * (1.0 + 1e-12))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisProbe {
    pub metric: MetricSpec,
    pub potential: ScalarField,
    pub magnetic: Option<OneForm>,
    pub f: ScalarField,
    pub center: Vec<f64>,
    pub settings: ProbeSettings,
}

impl HypothesisProbe {
    fn validate(&self) -> Result<(), CertifyError> {
        self.settings.validate()?;
        let n = self.metric.dimension();
        let dims_ok = self.potential.dimension() == n
            && self.f.dimension() == n
            && self.center.len() == n
            && self.magnetic.as_ref().is_none_or(|m| m.dimension() == n);
        if !dims_ok {
            return Err(CertifyError::Invalid(format!("probe data must all have dimension {n}")));
        }
        Ok(())
    }

    /// `(∇f, ‖∇f‖)` at `x`.
    fn gradient(&self, x: &[f64]) -> Result<(Vec<f64>, f64), CertifyError> {
        let df = self.f.grad_partials(x)?;
        if self.metric.is_euclidean() {
            let norm = df.iter().map(|c| c * c).sum::<f64>().sqrt();
            return Ok((df, norm));
        }
        let at = self.metric.factor(x)?;
        let grad = at.raise(&df);
        let norm = at.norm(&grad);
        Ok((grad, norm))
    }

    /// `|dU(∇f)| / U` at `x`.
    pub fn potential_ratio(&self, x: &[f64]) -> Result<f64, CertifyError> {
        let u = self.potential.eval(x)?;
        let (grad, _) = self.gradient(x)?;
        let du = self.potential.grad_partials(x)?;
        Ok(du.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>().abs() / u)
    }

    /// `‖ι_{∇f} dμ‖ / √U` at `x`.
    pub fn magnetic_ratio(&self, x: &[f64]) -> Result<f64, CertifyError> {
        let Some(form) = &self.magnetic else {
            return Ok(0.0);
        };
        let u = self.potential.eval(x)?;
        let (grad, _) = self.gradient(x)?;
        Ok(geometry::contracted_form_norm(&self.metric, form, &grad, x)? / u.sqrt())
    }
}

/// Points of one potential shell.
#[derive(Clone, Debug, PartialEq)]
pub struct ShellSample {
    pub delta: f64,
    pub points: Vec<Vec<f64>>,
    pub attempts: usize,
}

/// Rejection-samples every shell from the probe ball, one deterministic
/// stream per shell.
pub fn sample_shells(probe: &HypothesisProbe) -> Result<Vec<ShellSample>, CertifyError> {
    probe.validate()?;
    let s = probe.settings;
    let deltas = s.deltas();
    s.execution
        .map_range(deltas.len(), |j| {
            let delta = deltas[j];
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            rng.set_stream(j as u64);
            let n = probe.center.len();
            let mut points = Vec::with_capacity(s.samples);
            let mut attempts = 0;
            let mut offset = vec![0.0; n];
            while points.len() < s.samples && attempts < s.max_attempts {
                attempts += 1;
                for o in offset.iter_mut() {
                    *o = s.radius * (2.0 * rng.random::<f64>() - 1.0);
                }
                if offset.iter().map(|o| o * o).sum::<f64>() > s.radius * s.radius {
                    continue;
                }
                let x: Vec<f64> = probe.center.iter().zip(&offset).map(|(c, o)| c + o).collect();
                match probe.potential.eval(&x) {
                    Ok(u) if u >= delta && u <= 10.0 * delta => points.push(x),
                    Ok(_) | Err(EvalError::Domain(_)) | Err(EvalError::NonFinite) => {}
                    Err(e) => return Err(e.into()),
                }
            }
            if points.is_empty() {
                return Err(CertifyError::EmptyShell { delta, upper: 10.0 * delta, attempts });
            }
            Ok(ShellSample { delta, points, attempts })
        })
        .into_iter()
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellRow {
    pub delta: f64,
    pub samples: usize,
    pub attempts: usize,
    pub min_ratio: f64,
    pub mean_ratio: f64,
    pub max_ratio: f64,
    pub argmax: Vec<f64>,
    pub argmax_potential: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub point: Vec<f64>,
    pub ratio: f64,
    pub potential: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    /// `dU(∇f) = O(U)`.
    Potential,
    /// `‖ι_{∇f} dμ‖ = O(U^{1/2})`.
    Magnetic,
}

/// Empirical constants of the confinement estimates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// `‖ι_{∇f} dμ‖² ≤ K₁ U`.
    pub k1: Option<f64>,
    /// `|dU(∇f)| ≤ K₂ U`.
    pub k2: Option<f64>,
    /// Minimum of `‖∇f‖` over the samples.
    pub m_grad: f64,
    /// Largest metric eigenvalue over the samples.
    pub metric_max: f64,
    pub grad_at_center: f64,
    /// `(m_∇⁻⁴ K₁ / 2 metric_max)^{1/2} ‖∇f(p)‖`.
    pub c1: Option<f64>,
    /// `m_∇⁻² K₂ ‖∇f(p)‖² / 2`.
    pub c2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagneticExtras {
    /// Verdict for the stronger `‖dμ‖ = O(U^{1/2})`.
    pub strong_verdict: Verdict,
    pub strong_shell_max: Vec<f64>,
    /// `max ‖ι_{∇f} dμ‖` on the shell closest to `M`.
    pub characteristic_residual: f64,
    /// `max ‖dμ‖` on the shell closest to `M`.
    pub field_norm_near_m: f64,
    pub field_vanishes_near_m: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub condition: Condition,
    pub verdict: Verdict,
    pub radius: f64,
    pub seed: u64,
    pub shells: Vec<ShellRow>,
    pub max_shell_max: f64,
    pub median_shell_max: f64,
    pub witness: Option<Witness>,
    pub constants: Constants,
    pub magnetic: Option<MagneticExtras>,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.is_empty() {
        0.0
    } else if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Classifies shell maxima ordered by increasing δ. On refutation returns the
/// index of the finest shell of the divergent run.
pub fn classify(maxima: &[f64]) -> (Verdict, Option<usize>) {
    // Walk from coarse to fine shells looking for a strictly growing run.
    let mut run_start = maxima.len().saturating_sub(1);
    for i in (0..maxima.len().saturating_sub(1)).rev() {
        if maxima[i] > maxima[i + 1] {
            if run_start - i >= 3 && maxima[i] >= 10.0 * maxima[run_start] && maxima[i] > NOISE_FLOOR {
                let mut finest = i;
                while finest > 0 && maxima[finest - 1] > maxima[finest] {
                    finest -= 1;
                }
                return (Verdict::Refuted, Some(finest));
            }
        } else {
            run_start = i;
        }
    }
    let max = maxima.iter().copied().fold(0.0, f64::max);
    if max <= 2.0 * median(maxima) + NOISE_FLOOR {
        (Verdict::Certified, None)
    } else {
        (Verdict::Inconclusive, None)
    }
}

struct Evaluated {
    rows: Vec<ShellRow>,
    m_grad: f64,
    metric_max: f64,
}

fn evaluate_shells<F>(probe: &HypothesisProbe, shells: &[ShellSample], ratio: F) -> Result<Evaluated, CertifyError>
where
    F: Fn(&[f64]) -> Result<f64, CertifyError> + Sync + Send,
{
    struct Partial {
        row: ShellRow,
        m_grad: f64,
        metric_max: f64,
    }
    let partials = probe
        .settings
        .execution
        .map(shells, |shell| {
            let mut row = ShellRow {
                delta: shell.delta,
                samples: shell.points.len(),
                attempts: shell.attempts,
                min_ratio: f64::INFINITY,
                mean_ratio: 0.0,
                max_ratio: f64::NEG_INFINITY,
                argmax: Vec::new(),
                argmax_potential: 0.0,
            };
            let mut m_grad = f64::INFINITY;
            let mut metric_max: f64 = 0.0;
            for x in &shell.points {
                let (_, norm) = probe.gradient(x)?;
                if !(norm >= MIN_GRADIENT) {
                    return Err(CertifyError::GradientTooSmall { point: x.clone(), norm });
                }
                m_grad = m_grad.min(norm);
                metric_max = metric_max.max(if probe.metric.is_euclidean() {
                    1.0
                } else {
                    probe.metric.matrix_at(x)?.symmetric_eigenvalues().max()
                });
                let r = ratio(x)?;
                row.min_ratio = row.min_ratio.min(r);
                row.mean_ratio += r;
                if r > row.max_ratio {
                    row.max_ratio = r;
                    row.argmax = x.clone();
                    row.argmax_potential = probe.potential.eval(x)?;
                }
            }
            row.mean_ratio /= shell.points.len() as f64;
            Ok(Partial { row, m_grad, metric_max })
        })
        .into_iter()
        .collect::<Result<Vec<_>, CertifyError>>()?;
    Ok(Evaluated {
        m_grad: partials.iter().map(|p| p.m_grad).fold(f64::INFINITY, f64::min),
        metric_max: partials.iter().map(|p| p.metric_max).fold(0.0, f64::max),
        rows: partials.into_iter().map(|p| p.row).collect(),
    })
}

fn report(probe: &HypothesisProbe, condition: Condition, ev: Evaluated) -> Result<CertificateReport, CertifyError> {
    let maxima: Vec<f64> = ev.rows.iter().map(|r| r.max_ratio).collect();
    let (verdict, witness_shell) = classify(&maxima);
    let witness = witness_shell.map(|i| Witness {
        point: ev.rows[i].argmax.clone(),
        ratio: ev.rows[i].max_ratio,
        potential: ev.rows[i].argmax_potential,
    });
    let max_shell_max = maxima.iter().copied().fold(0.0, f64::max);
    let (_, grad_at_center) = probe.gradient(&probe.center)?;
    let mut constants = Constants { m_grad: ev.m_grad, metric_max: ev.metric_max, grad_at_center, ..Default::default() };
    if verdict == Verdict::Certified {
        match condition {
            Condition::Potential => {
                constants.k2 = Some(max_shell_max);
                constants.c2 = Some(max_shell_max * grad_at_center.powi(2) / (2.0 * ev.m_grad.powi(2)));
            }
            Condition::Magnetic => {
                let k1 = max_shell_max * max_shell_max;
                constants.k1 = Some(k1);
                constants.c1 = Some((k1 / (ev.m_grad.powi(4) * 2.0 * ev.metric_max)).sqrt() * grad_at_center);
            }
        }
    }
    Ok(CertificateReport {
        condition,
        verdict,
        radius: probe.settings.radius,
        seed: probe.settings.seed,
        shells: ev.rows,
        max_shell_max,
        median_shell_max: median(&maxima),
        witness,
        constants,
        magnetic: None,
    })
}

/// Probes `dU(∇f) = O(U)` with ratio `|dU(∇f)|/U`.
pub fn certify_potential_condition(probe: &HypothesisProbe) -> Result<CertificateReport, CertifyError> {
    let shells = sample_shells(probe)?;
    let ev = evaluate_shells(probe, &shells, |x| probe.potential_ratio(x))?;
    report(probe, Condition::Potential, ev)
}

/// Probes `‖ι_{∇f} dμ‖ = O(U^{1/2})` with ratio `‖ι_{∇f} dμ‖/√U`, and
/// reports `‖dμ‖ = O(U^{1/2})` and `ι_{∇f} dμ` near `M` alongside.
pub fn certify_magnetic_condition(probe: &HypothesisProbe) -> Result<CertificateReport, CertifyError> {
    let shells = sample_shells(probe)?;
    let ev = evaluate_shells(probe, &shells, |x| probe.magnetic_ratio(x))?;
    let strong = evaluate_shells(probe, &shells, |x| {
        let Some(form) = &probe.magnetic else {
            return Ok(0.0);
        };
        let at = probe.metric.factor(x)?;
        let f = geometry::magnetic_tensor(form, x)?;
        Ok(geometry::two_form_norm(&at, &f) / probe.potential.eval(x)?.sqrt())
    })?;
    let strong_shell_max: Vec<f64> = strong.rows.iter().map(|r| r.max_ratio).collect();
    let (strong_verdict, _) = classify(&strong_shell_max);

    let mut characteristic_residual: f64 = 0.0;
    let mut field_norm_near_m: f64 = 0.0;
    if let (Some(form), Some(finest)) = (&probe.magnetic, shells.first()) {
        for x in &finest.points {
            let (grad, _) = probe.gradient(x)?;
            characteristic_residual = characteristic_residual.max(geometry::contracted_form_norm(&probe.metric, form, &grad, x)?);
            let at = probe.metric.factor(x)?;
            field_norm_near_m = field_norm_near_m.max(geometry::two_form_norm(&at, &geometry::magnetic_tensor(form, x)?));
        }
    }
    let mut out = report(probe, Condition::Magnetic, ev)?;
    out.magnetic = Some(MagneticExtras {
        strong_verdict,
        strong_shell_max,
        characteristic_residual,
        field_norm_near_m,
        field_vanishes_near_m: field_norm_near_m <= NOISE_FLOOR,
    });
    Ok(out)
}

/// Weighted dilation `U(λ^{α_1}x_1, …) = λ^r U(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiHomogeneousSpec {
    pub alpha: Vec<f64>,
    pub degree: f64,
}

impl QuasiHomogeneousSpec {
    pub fn new(alpha: Vec<f64>, degree: f64) -> Result<Self, CertifyError> {
        if alpha.is_empty() || alpha.iter().all(|a| *a == 0.0) || alpha.iter().any(|a| !a.is_finite()) {
            return Err(CertifyError::Invalid("weight vector must be finite and nonzero".into()));
        }
        if !(degree > 0.0 && degree.is_finite()) {
            return Err(CertifyError::Invalid(format!("degree must be positive, got {degree}")));
        }
        Ok(QuasiHomogeneousSpec { alpha, degree })
    }

    /// `f = Σ α_i x_i² / 2`.
    pub fn induced_f(&self) -> ScalarField {
        use crate::expr::Expr;
        let n = self.alpha.len();
        let body = self
            .alpha
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != 0.0)
            .map(|(i, a)| Expr::mul(Expr::num(a / 2.0), Expr::pow(Expr::var(i), Expr::num(2.0))))
            .reduce(Expr::add)
            .unwrap_or(Expr::num(0.0));
        ScalarField::from_expr(body, n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiHomogeneousReport {
    pub verdict: Verdict,
    pub samples: usize,
    pub max_residual: f64,
    pub worst_point: Vec<f64>,
}

/// `max |Σ α_i x_i ∂_i U − r U| / (1 + |U|)` over `points`.
pub fn check_quasi_homogeneous(
    u: &ScalarField,
    spec: &QuasiHomogeneousSpec,
    points: &[Vec<f64>],
) -> Result<QuasiHomogeneousReport, CertifyError> {
    if spec.alpha.len() != u.dimension() {
        return Err(CertifyError::Invalid(format!("{} weights for a potential in dimension {}", spec.alpha.len(), u.dimension())));
    }
    let mut out = QuasiHomogeneousReport { verdict: Verdict::Certified, samples: points.len(), max_residual: 0.0, worst_point: Vec::new() };
    for x in points {
        let (value, grad) = u.value_and_grad(x)?;
        let euler: f64 = spec.alpha.iter().zip(x).zip(&grad).map(|((a, xi), d)| a * xi * d).sum();
        let residual = (euler - spec.degree * value).abs() / (1.0 + value.abs());
        if residual > out.max_residual || out.worst_point.is_empty() {
            out.max_residual = out.max_residual.max(residual);
            out.worst_point = x.clone();
        }
    }
    if !(out.max_residual <= QUASI_HOMOGENEOUS_TOLERANCE) {
        out.verdict = Verdict::Refuted;
    }
    Ok(out)
}

/// `count` uniform points in the cube `center ± half_width`.
pub fn sample_box(center: &[f64], half_width: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| center.iter().map(|c| c + half_width * (2.0 * rng.random::<f64>() - 1.0)).collect())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalCommutingReport {
    pub verdict: Verdict,
    pub samples: usize,
    /// `max |⟨∇F_i, ∇F_j⟩|`, `i ≠ j`.
    pub max_inner: f64,
    /// `max ‖[X_i, X_j]‖` for `X_i = ∇F_i/‖∇F_i‖²`.
    pub max_bracket: f64,
    pub worst_point: Vec<f64>,
}

fn normalized(metric: &MetricSpec, f: &ScalarField, x: &[f64]) -> Result<(Vec<f64>, f64), CertifyError> {
    let df = f.grad_partials(x)?;
    let grad = if metric.is_euclidean() { df.clone() } else { metric.factor(x)?.raise(&df) };
    let sq: f64 = df.iter().zip(&grad).map(|(a, b)| a * b).sum();
    let norm = sq.max(0.0).sqrt();
    if !(norm >= crate::charts::MIN_GRADIENT) {
        return Err(CertifyError::GradientTooSmall { point: x.to_vec(), norm });
    }
    Ok((grad.into_iter().map(|c| c / sq).collect(), norm))
}

/// Directional derivative `(DX) v` of the normalized field of `f`, by central
/// differences.
fn field_derivative(metric: &MetricSpec, f: &ScalarField, x: &[f64], v: &[f64]) -> Result<Vec<f64>, CertifyError> {
    let h = BRACKET_STEP;
    let plus: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + h * b).collect();
    let minus: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - h * b).collect();
    let (p, _) = normalized(metric, f, &plus)?;
    let (m, _) = normalized(metric, f, &minus)?;
    Ok(p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect())
}

pub fn check_orthogonal_commuting(
    metric: &MetricSpec,
    fields: &[ScalarField],
    points: &[Vec<f64>],
) -> Result<OrthogonalCommutingReport, CertifyError> {
    let n = metric.dimension();
    if fields.iter().any(|f| f.dimension() != n) || points.iter().any(|p| p.len() != n) {
        return Err(CertifyError::Invalid(format!("fields and points must have dimension {n}")));
    }
    let mut out = OrthogonalCommutingReport { verdict: Verdict::Certified, samples: points.len(), max_inner: 0.0, max_bracket: 0.0, worst_point: Vec::new() };
    let mut worst = f64::NEG_INFINITY;
    for x in points {
        let at = metric.factor(x)?;
        let grads = fields
            .iter()
            .map(|f| Ok(at.raise(&f.grad_partials(x)?)))
            .collect::<Result<Vec<_>, CertifyError>>()?;
        let normals = fields.iter().map(|f| normalized(metric, f, x).map(|p| p.0)).collect::<Result<Vec<_>, _>>()?;
        for i in 0..fields.len() {
            for j in i + 1..fields.len() {
                let inner = at.inner(&grads[i], &grads[j]).abs();
                let dy_x = field_derivative(metric, &fields[j], x, &normals[i])?;
                let dx_y = field_derivative(metric, &fields[i], x, &normals[j])?;
                let bracket = dy_x.iter().zip(&dx_y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                out.max_inner = out.max_inner.max(inner);
                out.max_bracket = out.max_bracket.max(bracket);
                let score = (inner / ORTHOGONALITY_TOLERANCE).max(bracket / BRACKET_TOLERANCE);
                if score > worst {
                    worst = score;
                    out.worst_point = x.clone();
                }
            }
        }
    }
    if !(out.max_inner <= ORTHOGONALITY_TOLERANCE && out.max_bracket <= BRACKET_TOLERANCE) {
        out.verdict = Verdict::Refuted;
    }
    Ok(out)
}

/// `μ = F*(ω)` for `ω = Σ c_l dr_l`, with `μ_α = Σ_l c_l(F(x)) ∂_α F_l(x)`.
///
/// `coefficients` are fields in `k` variables, `maps` fields in `n`.
pub fn build_pullback_magnetic(maps: &[ScalarField], coefficients: &[ScalarField]) -> Result<OneForm, CertifyError> {
    let k = maps.len();
    if k == 0 || coefficients.len() != k {
        return Err(CertifyError::Invalid(format!("{} coefficients for {k} maps", coefficients.len())));
    }
    let n = maps[0].dimension();
    if maps.iter().any(|m| m.dimension() != n) || coefficients.iter().any(|c| c.dimension() != k) {
        return Err(CertifyError::Invalid("maps must share the ambient dimension and coefficients must take k variables".into()));
    }
    if coefficients.iter().all(ScalarField::is_zero) {
        return Ok(OneForm::zero(n)?);
    }
    let plain = |fs: &[ScalarField]| {
        fs.iter()
            .map(|f| f.expr().cloned().ok_or_else(|| CertifyError::Invalid("pullback of a composite field".into())))
            .collect::<Result<Vec<_>, _>>()
    };
    let (c, m) = (plain(coefficients)?, plain(maps)?);
    Ok(OneForm::new((0..n).map(|axis| ScalarField::pullback_component(c.clone(), m.clone(), axis, n)).collect())?)
}

/// `dμ` at `x` as the antisymmetric matrix `F_{αβ}`.
pub fn magnetic_field_at(form: &OneForm, x: &[f64]) -> Result<DMatrix<f64>, CertifyError> {
    Ok(geometry::magnetic_tensor(form, x)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    /// Chart coordinate playing the role of `f`.
    pub coordinate: usize,
    pub points: usize,
    /// `max |Ψ*(ι_{∇f} dμ)|` over components and grid points.
    pub max_component: f64,
    pub worst_point: Vec<f64>,
    pub pass: bool,
}

/// Pulls `ι_{∇f} dμ` back to the chart for `f` the chart coordinate with
/// index `coordinate` (`df` is the matching row of `J⁻¹`).
pub fn pullback_contraction_check(
    chart: &AdaptedChart,
    form: &OneForm,
    coordinate: usize,
    per_axis: usize,
) -> Result<ContractionReport, CertifyError> {
    let n = chart.dimension();
    if coordinate >= n || form.dimension() != n {
        return Err(CertifyError::Invalid(format!("coordinate {coordinate} or form dimension {} out of range", form.dimension())));
    }
    let grid = chart.grid(per_axis);
    let values = chart
        .settings()
        .execution
        .map(&grid, |u| -> Result<f64, CertifyError> {
            let x = chart.evaluate(u)?;
            let j = chart.jacobian(u)?;
            let inv = j.clone().try_inverse().ok_or_else(|| ChartError::SingularJacobian { point: u.clone(), condition: f64::INFINITY })?;
            let df: Vec<f64> = (0..n).map(|a| inv[(coordinate, a)]).collect();
            let grad = chart.metric().factor(&x)?.raise(&df);
            let c = geometry::contract_two_form(&geometry::magnetic_tensor(form, &x)?, &grad);
            Ok((0..n).map(|col| (0..n).map(|b| j[(b, col)] * c[b]).sum::<f64>().abs()).fold(0.0, f64::max))
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let (worst, max_component) = values.iter().enumerate().fold((0, 0.0), |(wi, wv), (i, v)| if *v > wv { (i, *v) } else { (wi, wv) });
    Ok(ContractionReport {
        coordinate,
        points: grid.len(),
        max_component,
        worst_point: grid[worst].clone(),
        pass: max_component <= CONTRACTION_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(s: &str, n: usize) -> ScalarField {
        ScalarField::parse(s, n).unwrap()
    }

    fn probe(u: &str, mu: Option<[&str; 3]>, f: &str, center: [f64; 3]) -> HypothesisProbe {
        HypothesisProbe {
            metric: MetricSpec::euclidean(3).unwrap(),
            potential: field(u, 3),
            magnetic: mu.map(|m| OneForm::parse(&m).unwrap()),
            f: field(f, 3),
            center: center.to_vec(),
            settings: ProbeSettings { seed: 7, ..Default::default() },
        }
    }

    #[test]
    fn classification_rules() {
        assert_eq!(classify(&[4.0; 6]), (Verdict::Certified, None));
        assert_eq!(classify(&[0.0; 6]), (Verdict::Certified, None));
        // finest shell first
        let growing = [1000.0, 300.0, 100.0, 30.0, 10.0, 3.0];
        assert_eq!(classify(&growing), (Verdict::Refuted, Some(0)));
        assert_eq!(classify(&[1.0, 1.0, 1.0, 1.0, 1.0, 20.0]).0, Verdict::Inconclusive);
        // three transitions but too little growth
        assert_eq!(classify(&[9.0, 8.0, 7.0, 6.0, 6.0, 6.0]).0, Verdict::Certified);
    }

    #[test]
    fn deltas_span_decades() {
        let d = ProbeSettings::default().deltas();
        assert_eq!(d.len(), 6);
        assert!((d[5] - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn whitney_is_certified_with_ratio_four() {
        let r = certify_potential_condition(&probe("(x1^2 - x2^2*x3)^2", None, "(x1^2 + x2^2)/2", [1.0, 1.0, 1.0])).unwrap();
        assert_eq!(r.verdict, Verdict::Certified);
        for row in &r.shells {
            assert!((row.min_ratio - 4.0).abs() < 1e-9 && (row.max_ratio - 4.0).abs() < 1e-9, "{row:?}");
        }
        assert!((r.constants.k2.unwrap() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn crossing_axes_is_refuted() {
        let p = HypothesisProbe {
            metric: MetricSpec::euclidean(2).unwrap(),
            potential: field("x1^2*x2^2", 2),
            magnetic: None,
            f: field("x1", 2),
            center: vec![0.0, 0.0],
            settings: ProbeSettings { seed: 3, ..Default::default() },
        };
        let r = certify_potential_condition(&p).unwrap();
        assert_eq!(r.verdict, Verdict::Refuted);
        let w = r.witness.unwrap();
        assert!((w.ratio - 2.0 / w.point[0].abs()).abs() < 1e-9 * w.ratio);
    }

    #[test]
    fn magnetic_plane_discrimination() {
        let stable = certify_magnetic_condition(&probe("x3^2", Some(["0", "x1", "0"]), "x1", [0.0; 3])).unwrap();
        assert_eq!(stable.verdict, Verdict::Refuted);
        let w = stable.witness.as_ref().unwrap();
        assert!((w.ratio - 1.0 / w.potential.sqrt()).abs() < 1e-9 * w.ratio);
        let unstable = certify_magnetic_condition(&probe("x3^2", Some(["0", "x3", "0"]), "x1", [0.0; 3])).unwrap();
        assert_eq!(unstable.verdict, Verdict::Certified);
        assert!(unstable.shells.iter().all(|r| r.max_ratio == 0.0));
        assert!(!unstable.magnetic.unwrap().field_vanishes_near_m);
        let none = certify_magnetic_condition(&probe("x3^2", None, "x1", [0.0; 3])).unwrap();
        assert_eq!(none.verdict, Verdict::Certified);
        assert!(none.magnetic.unwrap().field_vanishes_near_m);
    }

    #[test]
    fn regular_f_required() {
        let r = certify_potential_condition(&probe("x3^2", None, "x3^3", [0.0; 3]));
        assert!(matches!(r, Err(CertifyError::GradientTooSmall { .. })));
    }

    #[test]
    fn empty_shell_reported() {
        let mut p = probe("x3^2 + 1", None, "x1", [0.0; 3]);
        p.settings.max_attempts = 1000;
        assert!(matches!(certify_potential_condition(&p), Err(CertifyError::EmptyShell { .. })));
    }

    #[test]
    fn quasi_homogeneous_examples() {
        let pts = sample_box(&[0.0; 3], 2.0, 200, 1);
        let whitney = check_quasi_homogeneous(&field("(x1^2 - x2^2*x3)^2", 3), &QuasiHomogeneousSpec::new(vec![1.0, 1.0, 0.0], 4.0).unwrap(), &pts).unwrap();
        assert_eq!(whitney.verdict, Verdict::Certified);
        let plane = check_quasi_homogeneous(&field("x3^2", 3), &QuasiHomogeneousSpec::new(vec![1.0; 3], 2.0).unwrap(), &pts).unwrap();
        assert_eq!(plane.verdict, Verdict::Certified);
        let wrong = check_quasi_homogeneous(&field("x3^2", 3), &QuasiHomogeneousSpec::new(vec![1.0; 3], 3.0).unwrap(), &pts).unwrap();
        assert_eq!(wrong.verdict, Verdict::Refuted);
        assert!(QuasiHomogeneousSpec::new(vec![0.0; 3], 2.0).is_err());
    }

    #[test]
    fn induced_f_matches_weights() {
        let f = QuasiHomogeneousSpec::new(vec![2.0, 3.0, 1.0], 12.0).unwrap().induced_f();
        assert_eq!(f.eval(&[1.0, 1.0, 2.0]).unwrap(), 1.0 + 1.5 + 2.0);
    }

    #[test]
    fn orthogonal_commuting_examples() {
        let e3 = MetricSpec::euclidean(3).unwrap();
        let pts = sample_box(&[0.0; 3], 0.5, 50, 2);
        let good = check_orthogonal_commuting(&e3, &[field("x1 + x3^2", 3), field("x2", 3)], &pts).unwrap();
        assert_eq!(good.verdict, Verdict::Certified);
        assert!(good.max_bracket < 1e-8);
        let trivial = check_orthogonal_commuting(&e3, &[field("x1", 3), field("x2", 3)], &pts).unwrap();
        assert_eq!(trivial.max_inner, 0.0);
        let bad = check_orthogonal_commuting(&e3, &[field("x1", 3), field("x1*x2", 3)], &pts).unwrap();
        assert_eq!(bad.verdict, Verdict::Refuted);
    }

    #[test]
    fn pullback_form_components() {
        let maps = [field("x1 + x3^2", 3), field("x2", 3)];
        let mu = build_pullback_magnetic(&maps, &[field("0", 2), field("x1", 2)]).unwrap();
        let x = [0.3, -0.2, 0.5];
        assert!((mu.components()[1].eval(&x).unwrap() - 0.55).abs() < 1e-15);
        assert_eq!(mu.components()[0].eval(&x).unwrap(), 0.0);
        let f = magnetic_field_at(&mu, &[0.0; 3]).unwrap();
        assert_eq!(f[(0, 1)], 1.0);
        assert!(build_pullback_magnetic(&maps, &[field("0", 2), field("0", 2)]).unwrap().is_zero());
    }
}
