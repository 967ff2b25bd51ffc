//! ε-sweeps of the rescaled dynamics and escape detection.

use serde::{Deserialize, Serialize};

use super::problem::ProblemDefinition;
use crate::dynamics::{self, DynamicsError, IntegrationSettings, Lemma1Verdict, LagrangianSystem, Scaling, State, Trajectory};
use crate::geometry;
use crate::par::Execution;

/// `|ż_ε(0) − ‖∇f(p)‖²|` allowed by the initial-drift invariant.
pub const INITIAL_DRIFT_TOLERANCE: f64 = 1e-10;
/// Distance allowed between the rescaled and the physical-time runs.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub integration: IntegrationSettings,
    pub execution: Execution,
    /// Re-integrate the physical system and compare at `T/4, T/2, T`.
    pub consistency_check: bool,
}

impl SweepSettings {
    pub fn for_problem(def: &ProblemDefinition) -> Self {
        SweepSettings {
            integration: IntegrationSettings { tol: def.tolerances, ..Default::default() },
            execution: Execution::Parallel,
            consistency_check: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub evaluations: usize,
    pub initial_energy: f64,
    pub energy_drift: f64,
    pub max_speed: f64,
    pub max_potential: f64,
    pub path_length_forward: f64,
    pub path_length_backward: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyCheck {
    pub taus: Vec<f64>,
    pub distances: Vec<f64>,
    pub max_distance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRun {
    pub epsilon: f64,
    /// Physical initial speed `ε ‖∇f(p)‖`.
    pub initial_speed: f64,
    /// `ż_ε(0) = df(ẋ_ε(0))`.
    pub initial_drift: f64,
    pub initial_drift_error: f64,
    /// Integration failure, when the run did not complete.
    pub error: Option<String>,
    pub summary: Option<RunSummary>,
    pub lemma1: Option<Lemma1Verdict>,
    /// `f(x_ε(τ)) − f(p)` on the report grid.
    pub f_values: Vec<f64>,
    pub consistency: Option<ConsistencyCheck>,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupDistance {
    pub epsilon_a: f64,
    pub epsilon_b: f64,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeReport {
    pub horizon: f64,
    pub gradient_norm: f64,
    /// Uniform τ grid on `[−T, T]`.
    pub tau: Vec<f64>,
    pub runs: Vec<EpsilonRun>,
    pub sup_distances: Vec<SupDistance>,
    /// Fourth-order central difference of the finest curve at τ = 0.
    pub limit_drift: Option<f64>,
    /// Max `U` along the finest run and its confinement bound `ε²‖∇f(p)‖²/2`.
    pub limit_max_potential: Option<f64>,
    pub limit_potential_bound: Option<f64>,
}

impl EscapeReport {
    pub fn finest(&self) -> Option<&EpsilonRun> {
        self.runs.iter().rev().find(|r| r.error.is_none())
    }

    /// Index of τ = 0 in [`EscapeReport::tau`].
    pub fn zero_index(&self) -> usize {
        self.tau.len() / 2
    }
}

fn run_single(def: &ProblemDefinition, epsilon: f64, grad: &[f64], grad_norm: f64, settings: &SweepSettings) -> EpsilonRun {
    let mut run = EpsilonRun {
        epsilon,
        initial_speed: epsilon * grad_norm,
        initial_drift: f64::NAN,
        initial_drift_error: f64::NAN,
        error: None,
        summary: None,
        lemma1: None,
        f_values: Vec::new(),
        consistency: None,
        trajectory: None,
    };
    if let Ok(df) = def.f.grad_partials(&def.center) {
        run.initial_drift = df.iter().zip(grad).map(|(a, b)| a * b).sum();
        run.initial_drift_error = (run.initial_drift - grad_norm * grad_norm).abs();
    }
    let outcome = (|| -> Result<(), DynamicsError> {
        let system = LagrangianSystem::new(def.metric.clone(), def.potential.clone(), def.magnetic.clone(), Scaling::Rescaled(epsilon))?;
        let start = State::new(0.0, def.center.clone(), grad.to_vec());
        let traj = dynamics::integrate(&system, &start, def.horizon, &settings.integration)?;
        let f0 = def.f.eval(&def.center)?;
        run.f_values = traj.grid().iter().map(|s| def.f.eval(&s.x).map(|v| v - f0)).collect::<Result<_, _>>()?;
        run.lemma1 = Some(dynamics::check_lemma1_bounds(&traj, grad_norm));
        let stats = |b: &dynamics::Branch| b.stats;
        let (fw, bw) = (stats(&traj.forward), stats(&traj.backward));
        run.summary = Some(RunSummary {
            accepted_steps: fw.accepted + bw.accepted,
            rejected_steps: fw.rejected + bw.rejected,
            evaluations: fw.evaluations + bw.evaluations,
            initial_energy: traj.initial_energy,
            energy_drift: traj.energy_drift,
            max_speed: traj.max_speed,
            max_potential: traj.max_potential,
            path_length_forward: traj.forward.last().map_or(0.0, |s| s.path_length),
            path_length_backward: traj.backward.last().map_or(0.0, |s| s.path_length),
        });
        if settings.consistency_check {
            run.consistency = Some(consistency(def, epsilon, grad, &traj, settings)?);
        }
        run.trajectory = Some(traj);
        Ok(())
    })();
    if let Err(e) = outcome {
        run.error = Some(e.to_string());
    }
    run
}

/// Integrates the physical system with initial speed `ε∇f(p)` to `τ/ε` and
/// compares with `x_ε(τ)` at `τ ∈ {T/4, T/2, T}`.
fn consistency(def: &ProblemDefinition, epsilon: f64, grad: &[f64], traj: &Trajectory, settings: &SweepSettings) -> Result<ConsistencyCheck, DynamicsError> {
    let system = LagrangianSystem::new(def.metric.clone(), def.potential.clone(), def.magnetic.clone(), Scaling::Unscaled)?;
    let taus: Vec<f64> = [0.25, 0.5, 1.0].iter().map(|q| q * def.horizon).collect();
    let times: Vec<f64> = taus.iter().map(|t| t / epsilon).collect();
    let start = State::new(0.0, def.center.clone(), grad.iter().map(|g| epsilon * g).collect());
    let integration = IntegrationSettings { max_step: None, ..settings.integration };
    let physical = dynamics::states_at(&system, &start, &times, &integration)?;
    let grid = traj.grid();
    let distances: Vec<f64> = taus
        .iter()
        .zip(&physical)
        .map(|(tau, p)| {
            let nearest = grid.iter().min_by(|a, b| (a.tau - tau).abs().total_cmp(&(b.tau - tau).abs())).expect("nonempty grid");
            nearest.x.iter().zip(&p.x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        })
        .collect();
    let max_distance = distances.iter().copied().fold(0.0, f64::max);
    Ok(ConsistencyCheck { taus, distances, max_distance, pass: max_distance <= CONSISTENCY_TOLERANCE })
}

/// Runs every ε of `def` (concurrently), recording failures per run.
pub fn run_epsilon_sweep(def: &ProblemDefinition, settings: &SweepSettings) -> EscapeReport {
    let grad = geometry::riemannian_gradient(&def.metric, &def.f, &def.center).unwrap_or_else(|_| vec![f64::NAN; def.dimension]);
    let grad_norm = def.gradient_norm_at_center();
    let runs = settings.execution.map(&def.epsilons, |eps| run_single(def, *eps, &grad, grad_norm, settings));
    let tau = {
        let m = settings.integration.samples_per_branch;
        let mut t: Vec<f64> = dynamics::uniform_grid(0.0, -def.horizon, m).into_iter().skip(1).collect();
        t.reverse();
        t.extend(dynamics::uniform_grid(0.0, def.horizon, m));
        t
    };
    let done: Vec<&EpsilonRun> = runs.iter().filter(|r| r.error.is_none()).collect();
    let sup_distances = done
        .windows(2)
        .map(|w| SupDistance {
            epsilon_a: w[0].epsilon,
            epsilon_b: w[1].epsilon,
            distance: w[0].f_values.iter().zip(&w[1].f_values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
        })
        .collect();
    let mut report = EscapeReport {
        horizon: def.horizon,
        gradient_norm: grad_norm,
        tau,
        sup_distances,
        limit_drift: None,
        limit_max_potential: None,
        limit_potential_bound: None,
        runs: Vec::new(),
    };
    let z = report.zero_index();
    if let Some(fin) = done.last() {
        let f = &fin.f_values;
        if z >= 2 && z + 2 < f.len() {
            let d = report.tau[z + 1] - report.tau[z];
            report.limit_drift = Some((8.0 * (f[z + 1] - f[z - 1]) - (f[z + 2] - f[z - 2])) / (12.0 * d));
        }
        report.limit_max_potential = fin.summary.as_ref().map(|s| s.max_potential);
        report.limit_potential_bound = Some(fin.epsilon * fin.epsilon * grad_norm * grad_norm / 2.0);
    }
    report.runs = runs;
    report
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeTime {
    pub epsilon: f64,
    /// First rescaled time with `f ≥ M/2`, linearly interpolated.
    pub tau_star: Option<f64>,
    /// `τ*/ε`.
    pub physical_time: Option<f64>,
    pub initial_speed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeVerdict {
    /// Escape level `M`.
    pub level: f64,
    pub level_auto: bool,
    pub times: Vec<EscapeTime>,
    /// Largest ε below which every tested ε escapes.
    pub threshold_epsilon: Option<f64>,
    pub demonstrated: bool,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error, Serialize, Deserialize)]
pub enum EscapeError {
    #[error("no positive drift: M = {level:e} ≤ 10 × {tolerance:e}")]
    NoPositiveDrift { level: f64, tolerance: f64 },
    #[error("no completed runs")]
    NoRuns,
}

/// Sets `M` (auto: max of the finest forward curve), finds `τ*` per ε and
/// decides whether the finest runs all leave `f⁻¹(−M/2, M/2)`.
pub fn detect_escape(report: &EscapeReport, level: Option<f64>) -> Result<EscapeVerdict, EscapeError> {
    let z = report.zero_index();
    let finest = report.finest().ok_or(EscapeError::NoRuns)?;
    let tolerance = (finest.epsilon * report.gradient_norm).max(1e-7);
    let (level, level_auto) = match level {
        Some(m) => (m, false),
        None => (finest.f_values[z..].iter().copied().fold(f64::NEG_INFINITY, f64::max), true),
    };
    if !(level > 10.0 * tolerance) {
        return Err(EscapeError::NoPositiveDrift { level, tolerance });
    }
    let half = level / 2.0;
    let times: Vec<EscapeTime> = report
        .runs
        .iter()
        .map(|run| {
            let tau_star = if run.error.is_some() {
                None
            } else {
                let f = &run.f_values[z..];
                let tau = &report.tau[z..];
                (0..f.len()).find(|&i| f[i] >= half).map(|i| {
                    if i == 0 || f[i] == half {
                        tau[i]
                    } else {
                        tau[i - 1] + (half - f[i - 1]) / (f[i] - f[i - 1]) * (tau[i] - tau[i - 1])
                    }
                })
            };
            EscapeTime { epsilon: run.epsilon, tau_star, physical_time: tau_star.map(|t| t / run.epsilon), initial_speed: run.initial_speed }
        })
        .collect();
    let mut escaped_tail = 0;
    for t in times.iter().rev() {
        if t.tau_star.is_none() {
            break;
        }
        escaped_tail += 1;
    }
    let threshold_epsilon = (escaped_tail > 0).then(|| times[times.len() - escaped_tail].epsilon);
    let demonstrated = escaped_tail >= times.len().min(2);
    let label = if demonstrated { "escape demonstrated at the tested scales" } else { "escape not demonstrated at the tested scales" };
    Ok(EscapeVerdict { level, level_auto, times, threshold_epsilon, demonstrated, label: label.into() })
}
