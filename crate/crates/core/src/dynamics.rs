//! Euler–Lagrange dynamics of `L = ½‖v‖²_g + s·μ(v) − k·U` where
//! `(s, k) = (1, 1)` for the physical system and `(ε⁻¹, ε⁻²)` for the
//! rescaled one.
//!
//! With `F_{αβ} = ∂_α A_β − ∂_β A_α` the equations read
//!
//! ```text
//! ẍ^α = −Γ^α_{μν} ẋ^μ ẋ^ν + g^{αβ} (s F_{βκ} ẋ^κ − k ∂_β U)
//! ```

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::expr::ScalarField;
use crate::geometry::{self, Christoffel, GeometryError, MetricAt, MetricSpec, OneForm};
use crate::ode::{Dopri5, OdeError, SolveStats, Tolerances};

/// Potentials below this are considered a violation of `U ≥ 0`.
pub const POTENTIAL_FLOOR: f64 = -1e-12;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("potential {value:e} < 0 at {point:?}")]
    NegativePotential { point: Vec<f64>, value: f64 },
    #[error("step size underflow at τ = {tau} (h = {h:e})")]
    StepSizeUnderflow { tau: f64, h: f64 },
    #[error("step budget exhausted at τ = {tau}")]
    TooManySteps { tau: f64 },
    #[error("relative energy drift {drift:e} exceeds {bound:e}")]
    EnergyDriftExceeded { drift: f64, bound: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl From<crate::expr::EvalError> for DynamicsError {
    fn from(e: crate::expr::EvalError) -> Self {
        DynamicsError::Geometry(e.into())
    }
}

impl From<OdeError<DynamicsError>> for DynamicsError {
    fn from(e: OdeError<DynamicsError>) -> Self {
        match e {
            OdeError::StepSizeUnderflow { t, h } => DynamicsError::StepSizeUnderflow { tau: t, h },
            OdeError::TooManySteps { t } => DynamicsError::TooManySteps { tau: t },
            OdeError::Rhs(e) => e,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    /// Physical time, Lagrangian `Q + μ − U`.
    Unscaled,
    /// Rescaled time `τ = εt`, Lagrangian `Q + ε⁻¹μ − ε⁻²U`.
    Rescaled(f64),
}

impl Scaling {
    pub fn epsilon(self) -> Option<f64> {
        match self {
            Scaling::Unscaled => None,
            Scaling::Rescaled(e) => Some(e),
        }
    }

    /// `(magnetic, potential)` coefficients.
    pub fn coefficients(self) -> (f64, f64) {
        match self {
            Scaling::Unscaled => (1.0, 1.0),
            Scaling::Rescaled(e) => (1.0 / e, 1.0 / (e * e)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianSystem {
    pub metric: MetricSpec,
    pub potential: ScalarField,
    pub magnetic: Option<OneForm>,
    pub scaling: Scaling,
}

impl LagrangianSystem {
    pub fn new(
        metric: MetricSpec,
        potential: ScalarField,
        magnetic: Option<OneForm>,
        scaling: Scaling,
    ) -> Result<Self, DynamicsError> {
        let n = metric.dimension();
        if potential.dimension() != n {
            return Err(DynamicsError::Invalid(format!("potential has dimension {}, metric {n}", potential.dimension())));
        }
        if let Some(m) = &magnetic {
            if m.dimension() != n {
                return Err(DynamicsError::Invalid(format!("magnetic form has dimension {}, metric {n}", m.dimension())));
            }
        }
        if let Scaling::Rescaled(e) = scaling {
            if !(e > 0.0 && e.is_finite()) {
                return Err(DynamicsError::Invalid(format!("ε must be positive, got {e}")));
            }
        }
        let magnetic = magnetic.filter(|m| !m.is_zero());
        Ok(LagrangianSystem { metric, potential, magnetic, scaling })
    }

    pub fn dimension(&self) -> usize {
        self.metric.dimension()
    }

    pub fn with_scaling(&self, scaling: Scaling) -> Result<Self, DynamicsError> {
        Self::new(self.metric.clone(), self.potential.clone(), self.magnetic.clone(), scaling)
    }

    fn check_state(&self, x: &[f64], v: &[f64]) -> Result<(), DynamicsError> {
        let n = self.dimension();
        if x.len() != n || v.len() != n {
            return Err(DynamicsError::Invalid(format!("state has dimensions ({}, {}), expected {n}", x.len(), v.len())));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub tau: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl State {
    pub fn new(tau: f64, x: Vec<f64>, v: Vec<f64>) -> Self {
        State { tau, x, v }
    }
}

fn acceleration(system: &LagrangianSystem, x: &[f64], v: &[f64]) -> Result<Vec<f64>, DynamicsError> {
    let n = x.len();
    let (s, k) = system.scaling.coefficients();
    let grad_u = system.potential.grad_partials(x)?;
    let mut force: Vec<f64> = grad_u.iter().map(|d| -k * d).collect();
    if let Some(form) = &system.magnetic {
        let f = geometry::magnetic_tensor(form, x)?;
        for (b, fb) in force.iter_mut().enumerate() {
            let mut acc = 0.0;
            for c in 0..n {
                acc += f[(b, c)] * v[c];
            }
            *fb += s * acc;
        }
    }
    if system.metric.is_euclidean() {
        return Ok(force);
    }
    let (g, dg) = system.metric.matrix_and_derivatives(x)?;
    let at = MetricAt::new(g, x)?;
    let gamma = Christoffel::from_derivatives(&at.inv, &dg);
    let quad = gamma.contract(v, v);
    let raised = at.raise(&force);
    Ok(raised.iter().zip(&quad).map(|(r, q)| r - q).collect())
}

pub fn el_acceleration(system: &LagrangianSystem, state: &State) -> Result<Vec<f64>, DynamicsError> {
    system.check_state(&state.x, &state.v)?;
    acceleration(system, &state.x, &state.v)
}

fn speed_sq(metric: &MetricSpec, x: &[f64], v: &[f64]) -> Result<f64, DynamicsError> {
    if metric.is_euclidean() {
        return Ok(v.iter().map(|c| c * c).sum());
    }
    let g = metric.matrix_at(x)?;
    let at = MetricAt::new(g, x)?;
    Ok(at.inner(v, v))
}

/// `H = ½‖v‖²_g + k·U(x)`; the magnetic term does no work and is absent.
pub fn hamiltonian(system: &LagrangianSystem, state: &State) -> Result<f64, DynamicsError> {
    system.check_state(&state.x, &state.v)?;
    let (_, k) = system.scaling.coefficients();
    Ok(0.5 * speed_sq(&system.metric, &state.x, &state.v)? + k * system.potential.eval(&state.x)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSettings {
    pub tol: Tolerances,
    /// Relative energy drift beyond which a run is rejected.
    pub drift_bound: f64,
    /// Uniform output intervals per branch.
    pub samples_per_branch: usize,
    /// Optional explicit step cap; rescaled systems are always capped at ε/10.
    pub max_step: Option<f64>,
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        IntegrationSettings { tol: Tolerances::default(), drift_bound: 1e-6, samples_per_branch: 512, max_step: None }
    }
}

impl IntegrationSettings {
    fn solver(&self, scaling: Scaling) -> Dopri5 {
        let mut cap = self.max_step.unwrap_or(f64::INFINITY);
        if let Some(e) = scaling.epsilon() {
            cap = cap.min(e / 10.0);
        }
        Dopri5::new(self.tol).with_max_step(cap)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub tau: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub energy: f64,
    pub potential: f64,
    pub speed: f64,
    /// Accumulated `∫‖ẋ‖ dτ` from τ = 0.
    pub path_length: f64,
}

/// One time direction of a trajectory, starting at τ = 0.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// Every accepted integrator step, starting with τ = 0.
    pub steps: Vec<Sample>,
    /// Indices into `steps` of the uniform output grid.
    pub grid: Vec<usize>,
    pub stats: SolveStats,
}

impl Branch {
    pub fn grid_samples(&self) -> impl Iterator<Item = &Sample> {
        self.grid.iter().map(|&i| &self.steps[i])
    }

    pub fn last(&self) -> Option<&Sample> {
        self.steps.last()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub scaling: Scaling,
    pub horizon: f64,
    pub forward: Branch,
    pub backward: Branch,
    pub initial_energy: f64,
    /// `(max H − min H) / max(1, H(0))` over both branches.
    pub energy_drift: f64,
    pub max_speed: f64,
    pub max_potential: f64,
}

impl Trajectory {
    /// All step samples ordered by increasing τ.
    pub fn ordered(&self) -> Vec<&Sample> {
        let mut out: Vec<&Sample> = self.backward.steps.iter().skip(1).rev().collect();
        out.extend(self.forward.steps.iter());
        out
    }

    /// Uniform grid samples on `[−T, T]`, increasing τ.
    pub fn grid(&self) -> Vec<&Sample> {
        let mut out: Vec<&Sample> = self.backward.grid_samples().skip(1).collect::<Vec<_>>();
        out.reverse();
        out.extend(self.forward.grid_samples());
        out
    }

    /// CSV with columns `tau, x1..xn, v1..vn, H, U, pathlen`.
    pub fn to_csv(&self) -> String {
        let rows = self.ordered();
        let n = rows.first().map_or(0, |s| s.x.len());
        let mut out = String::from("tau");
        for i in 1..=n {
            let _ = write!(out, ",x{i}");
        }
        for i in 1..=n {
            let _ = write!(out, ",v{i}");
        }
        out.push_str(",H,U,pathlen\n");
        for s in rows {
            let _ = write!(out, "{:e}", s.tau);
            for c in s.x.iter().chain(&s.v) {
                let _ = write!(out, ",{c:e}");
            }
            let _ = writeln!(out, ",{:e},{:e},{:e}", s.energy, s.potential, s.path_length);
        }
        out
    }
}

fn integrate_branch(
    system: &LagrangianSystem,
    initial: &State,
    end: f64,
    stops: &[f64],
    settings: &IntegrationSettings,
) -> Result<Branch, DynamicsError> {
    let n = system.dimension();
    let (_, k) = system.scaling.coefficients();
    let mut y0 = initial.x.clone();
    y0.extend_from_slice(&initial.v);
    let mut branch = Branch::default();
    let solver = settings.solver(system.scaling);
    let (_, stats) = solver.solve(
        |_, y: &[f64], dy: &mut [f64]| {
            let (x, v) = y.split_at(n);
            let a = acceleration(system, x, v)?;
            dy[..n].copy_from_slice(v);
            dy[n..].copy_from_slice(&a);
            Ok(())
        },
        initial.tau,
        &y0,
        end,
        stops,
        |step| {
            let (x, v) = step.y.split_at(n);
            let potential = system.potential.eval(x)?;
            if potential < POTENTIAL_FLOOR {
                return Err(DynamicsError::NegativePotential { point: x.to_vec(), value: potential });
            }
            let speed = speed_sq(&system.metric, x, v)?.sqrt();
            let path_length = match branch.steps.last() {
                Some(prev) => prev.path_length + 0.5 * (prev.speed + speed) * (step.t - prev.tau).abs(),
                None => 0.0,
            };
            if step.stop.is_some() {
                branch.grid.push(branch.steps.len());
            }
            branch.steps.push(Sample {
                tau: step.t,
                x: x.to_vec(),
                v: v.to_vec(),
                energy: 0.5 * speed * speed + k * potential,
                potential,
                speed,
                path_length,
            });
            Ok(())
        },
    )?;
    branch.stats = stats;
    Ok(branch)
}

/// Uniform grid on `[start, end]` with `intervals` intervals, both ends included.
pub fn uniform_grid(start: f64, end: f64, intervals: usize) -> Vec<f64> {
    let intervals = intervals.max(1);
    (0..=intervals)
        .map(|i| if i == intervals { end } else { start + (end - start) * (i as f64 / intervals as f64) })
        .collect()
}

/// Integrates both time branches `[τ0, τ0 + T]` and `[τ0 − T, τ0]`.
pub fn integrate(
    system: &LagrangianSystem,
    initial: &State,
    horizon: f64,
    settings: &IntegrationSettings,
) -> Result<Trajectory, DynamicsError> {
    system.check_state(&initial.x, &initial.v)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(DynamicsError::Invalid(format!("horizon must be positive, got {horizon}")));
    }
    if !(settings.tol.abs > 0.0 && settings.tol.rel > 0.0) {
        return Err(DynamicsError::Invalid("tolerances must be positive".into()));
    }
    let t0 = initial.tau;
    let fwd_grid = uniform_grid(t0, t0 + horizon, settings.samples_per_branch);
    let bwd_grid = uniform_grid(t0, t0 - horizon, settings.samples_per_branch);
    let forward = integrate_branch(system, initial, t0 + horizon, &fwd_grid, settings)?;
    let backward = integrate_branch(system, initial, t0 - horizon, &bwd_grid, settings)?;

    let all = || forward.steps.iter().chain(backward.steps.iter());
    let initial_energy = forward.steps[0].energy;
    let (lo, hi) = all().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.energy), hi.max(s.energy)));
    let energy_drift = (hi - lo) / initial_energy.abs().max(1.0);
    let max_speed = all().map(|s| s.speed).fold(0.0, f64::max);
    let max_potential = all().map(|s| s.potential).fold(f64::NEG_INFINITY, f64::max);
    if energy_drift > settings.drift_bound {
        return Err(DynamicsError::EnergyDriftExceeded { drift: energy_drift, bound: settings.drift_bound });
    }
    Ok(Trajectory {
        scaling: system.scaling,
        horizon,
        forward,
        backward,
        initial_energy,
        energy_drift,
        max_speed,
        max_potential,
    })
}

/// States at the requested times (all on one side of `initial.tau`, ordered
/// away from it), landing on each exactly.
pub fn states_at(
    system: &LagrangianSystem,
    initial: &State,
    times: &[f64],
    settings: &IntegrationSettings,
) -> Result<Vec<State>, DynamicsError> {
    system.check_state(&initial.x, &initial.v)?;
    let Some(&end) = times.last() else {
        return Ok(Vec::new());
    };
    let branch = integrate_branch(system, initial, end, times, settings)?;
    let mut out: Vec<State> = branch
        .grid_samples()
        .map(|s| State { tau: s.tau, x: s.x.clone(), v: s.v.clone() })
        .collect();
    // A stop equal to the start time is reported by the initial sample.
    if out.len() < times.len() {
        let missing = times.len() - out.len();
        out.splice(0..0, std::iter::repeat_n(initial.clone(), missing));
    }
    Ok(out)
}

/// Worst-case margins against `‖ẋ‖ ≤ cap` and `U ≤ ε² cap² / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Verdict {
    pub speed_cap: f64,
    pub potential_cap: f64,
    /// `max ‖v‖_g − cap`.
    pub speed_margin: f64,
    /// `max U − ε² cap² / 2`.
    pub potential_margin: f64,
    pub pass: bool,
}

pub fn check_lemma1_bounds(trajectory: &Trajectory, speed_cap: f64) -> Lemma1Verdict {
    let eps = trajectory.scaling.epsilon().unwrap_or(1.0);
    let potential_cap = eps * eps * speed_cap * speed_cap / 2.0;
    let speed_margin = trajectory.max_speed - speed_cap;
    let potential_margin = trajectory.max_potential - potential_cap;
    let slack = 1e-8 * (1.0 + speed_cap * speed_cap);
    Lemma1Verdict {
        speed_cap,
        potential_cap,
        speed_margin,
        potential_margin,
        pass: speed_margin <= slack && potential_margin <= slack,
    }
}

/// Terms of the normal equation in coordinates `(z, y)` adapted to `f`
/// (`f = z`, `g_{0a} = 0`):
///
/// ```text
/// z̈ + Γ⁰₀₀ ż² + 2Γ⁰₀ᵦ ż ẏᵇ + Γ⁰ₐᵦ ẏᵃ ẏᵇ − s g⁰⁰ F₀ᵦ ẏᵇ + k g⁰⁰ ∂₀u = 0
/// ```
///
/// Each term is evaluated from ambient data through the chart identities
/// `Γ⁰_{μν} = −∇²f(∂_μΨ, ∂_νΨ)`, `∂_zΨ = N = ∇f/‖∇f‖²`, `ẏᵇ∂_bΨ = ẋ − żN`,
/// `g⁰⁰ = ‖∇f‖²` and `g⁰⁰∂₀u = dU(∇f)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptedTerms {
    pub tau: f64,
    pub z_ddot: f64,
    pub gamma_00: f64,
    pub gamma_0b: f64,
    pub gamma_ab: f64,
    pub magnetic: f64,
    pub potential: f64,
    pub residual: f64,
}

/// Covariant Hessian `∇²f(X, Y) = XⁱYʲ(∂ᵢⱼf − Γᵏᵢⱼ ∂ₖf)` as a matrix.
pub fn covariant_hessian(metric: &MetricSpec, f: &ScalarField, x: &[f64]) -> Result<DMatrix<f64>, DynamicsError> {
    let n = x.len();
    let h = f.hessian(x)?;
    let df = f.grad_partials(x)?;
    let gamma = geometry::christoffel(metric, x)?;
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let mut s = h[i][j];
        for (k, dk) in df.iter().enumerate() {
            s -= gamma.get(k, i, j) * dk;
        }
        s
    }))
}

fn bilinear(m: &DMatrix<f64>, u: &[f64], w: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..u.len() {
        for j in 0..w.len() {
            s += u[i] * m[(i, j)] * w[j];
        }
    }
    s
}

pub fn adapted_terms(
    system: &LagrangianSystem,
    f: &ScalarField,
    state: &State,
    z_ddot: f64,
) -> Result<AdaptedTerms, DynamicsError> {
    system.check_state(&state.x, &state.v)?;
    let (s, k) = system.scaling.coefficients();
    let x = &state.x;
    let at = system.metric.factor(x)?;
    let df = f.grad_partials(x)?;
    let grad = at.raise(&df);
    let g00 = at.inner(&grad, &grad);
    let normal: Vec<f64> = grad.iter().map(|c| c / g00).collect();
    let z_dot: f64 = df.iter().zip(&state.v).map(|(a, b)| a * b).sum();
    let tangential: Vec<f64> = state.v.iter().zip(&normal).map(|(v, nn)| v - z_dot * nn).collect();

    let hess = covariant_hessian(&system.metric, f, x)?;
    let gamma_00 = -bilinear(&hess, &normal, &normal) * z_dot * z_dot;
    let gamma_0b = -2.0 * z_dot * bilinear(&hess, &normal, &tangential);
    let gamma_ab = -bilinear(&hess, &tangential, &tangential);
    let magnetic = match &system.magnetic {
        Some(form) => {
            let fm = geometry::magnetic_tensor(form, x)?;
            -s * g00 * bilinear(&fm, &normal, &tangential)
        }
        None => 0.0,
    };
    let du = system.potential.grad_partials(x)?;
    let potential = k * du.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>();
    let residual = z_ddot + gamma_00 + gamma_0b + gamma_ab + magnetic + potential;
    Ok(AdaptedTerms { tau: state.tau, z_ddot, gamma_00, gamma_0b, gamma_ab, magnetic, potential, residual })
}

/// Evaluates [`adapted_terms`] at each of `centers` (all > τ0 + 2δ), with z̈
/// from the five-point divided difference of `f(x(τ))` at spacing `delta`.
pub fn adapted_residual_along(
    system: &LagrangianSystem,
    f: &ScalarField,
    initial: &State,
    centers: &[f64],
    delta: f64,
    settings: &IntegrationSettings,
) -> Result<Vec<AdaptedTerms>, DynamicsError> {
    if centers.windows(2).any(|w| w[1] - w[0] <= 4.0 * delta) || centers.first().is_some_and(|c| *c - 2.0 * delta <= initial.tau) {
        return Err(DynamicsError::Invalid("stencil centers must be increasing and separated by more than 4δ".into()));
    }
    let times: Vec<f64> = centers
        .iter()
        .flat_map(|c| (-2..=2).map(move |j| c + j as f64 * delta))
        .collect();
    let states = states_at(system, initial, &times, settings)?;
    states
        .chunks(5)
        .map(|w| {
            let z = w.iter().map(|s| f.eval(&s.x)).collect::<Result<Vec<_>, _>>()?;
            let z_ddot = (-z[0] + 16.0 * z[1] - 30.0 * z[2] + 16.0 * z[3] - z[4]) / (12.0 * delta * delta);
            adapted_terms(system, f, &w[2], z_ddot)
        })
        .collect()
}
