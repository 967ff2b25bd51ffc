//! Full per-problem runs: certification, charts, sweep and escape, checked
//! against the problem's expectations.

use serde::{Deserialize, Serialize};

use super::problem::{Expected, ProblemDefinition};
use super::sweep::{self, EscapeError, EscapeReport, EscapeVerdict, SweepSettings};
use crate::certify::{self, CertificateReport, ContractionReport, HypothesisProbe, OrthogonalCommutingReport, QuasiHomogeneousReport, Verdict};
use crate::charts::{self, ChartReport, ChartSettings};
use crate::dynamics::IntegrationSettings;
use crate::par::Execution;

/// Points used by the Euler-identity check.
pub const QUASI_HOMOGENEOUS_POINTS: usize = 1000;
pub const QUASI_HOMOGENEOUS_HALF_WIDTH: f64 = 2.0;
pub const ORTHOGONALITY_POINTS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub seed: u64,
    pub execution: Execution,
    /// Compare rescaled runs against physical-time runs.
    pub consistency_check: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { seed: 0, execution: Execution::Parallel, consistency_check: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome<T> {
    Ok(T),
    Error(String),
}

impl<T> Outcome<T> {
    fn from<E: std::fmt::Display>(r: Result<T, E>) -> Self {
        match r {
            Ok(v) => Outcome::Ok(v),
            Err(e) => Outcome::Error(e.to_string()),
        }
    }

    pub fn ok(&self) -> Option<&T> {
        match self {
            Outcome::Ok(v) => Some(v),
            Outcome::Error(_) => None,
        }
    }

    pub fn is_error(&self) -> bool {
        matches!(self, Outcome::Error(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifySection {
    pub potential: Outcome<CertificateReport>,
    pub magnetic: Outcome<CertificateReport>,
    pub quasi_homogeneous: Option<Outcome<QuasiHomogeneousReport>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChartSection {
    pub single: Option<Outcome<ChartReport>>,
    pub multi: Option<Outcome<ChartReport>>,
    pub orthogonal_commuting: Option<Outcome<OrthogonalCommutingReport>>,
    /// `Ψ*(ι_{∇y} dμ)` for each base coordinate `y` of the multi chart.
    pub contraction: Option<Vec<Outcome<ContractionReport>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EscapeOutcome {
    Verdict(EscapeVerdict),
    NoEscape(EscapeError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub observed: String,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemReport {
    pub name: String,
    pub dimension: usize,
    pub center: Vec<f64>,
    pub seed: u64,
    pub certify: CertifySection,
    pub charts: Option<ChartSection>,
    pub sweep: EscapeReport,
    pub escape: EscapeOutcome,
    pub checks: Vec<Check>,
    pub numerical_failure: bool,
    pub all_expected: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunAllReport {
    pub seed: u64,
    pub problems: Vec<ProblemReport>,
    pub numerical_failure: bool,
    pub all_expected: bool,
}

pub fn probe_for(def: &ProblemDefinition, options: &RunOptions) -> HypothesisProbe {
    HypothesisProbe {
        metric: def.metric.clone(),
        potential: def.potential.clone(),
        magnetic: def.magnetic.clone(),
        f: def.f.clone(),
        center: def.center.clone(),
        settings: certify::ProbeSettings { seed: options.seed, execution: options.execution, ..def.probe },
    }
}

pub fn run_certification(def: &ProblemDefinition, options: &RunOptions) -> CertifySection {
    let probe = probe_for(def, options);
    let quasi_homogeneous = def.quasi_homogeneous.as_ref().map(|spec| {
        let points = certify::sample_box(&vec![0.0; def.dimension], QUASI_HOMOGENEOUS_HALF_WIDTH, QUASI_HOMOGENEOUS_POINTS, options.seed);
        Outcome::from(certify::check_quasi_homogeneous(&def.potential, spec, &points))
    });
    CertifySection {
        potential: Outcome::from(certify::certify_potential_condition(&probe)),
        magnetic: Outcome::from(certify::certify_magnetic_condition(&probe)),
        quasi_homogeneous,
    }
}

pub fn run_charts(def: &ProblemDefinition, options: &RunOptions) -> Option<ChartSection> {
    let spec = def.chart.as_ref()?;
    let settings = ChartSettings { grid: spec.grid, execution: options.execution, ..Default::default() };
    let mut section = ChartSection::default();
    if let Some(s) = &spec.single {
        section.single = Some(Outcome::from(
            charts::build_chart(&def.metric, &def.f, s.base.clone(), s.z_range, s.y_box.clone(), settings).map(|(_, r)| r),
        ));
    }
    if let Some(m) = &spec.multi {
        let points = certify::sample_box(&def.center, def.probe.radius, ORTHOGONALITY_POINTS, options.seed);
        section.orthogonal_commuting = Some(Outcome::from(certify::check_orthogonal_commuting(&def.metric, &m.fields, &points)));
        match charts::build_multi_chart(&def.metric, &m.fields, m.base.clone(), m.r_box.clone(), m.y_box.clone(), settings) {
            Ok((chart, report)) => {
                section.multi = Some(Outcome::Ok(report));
                if let Some(form) = &def.magnetic {
                    let k = m.fields.len();
                    section.contraction = Some(
                        (k..def.dimension)
                            .map(|c| Outcome::from(certify::pullback_contraction_check(&chart, form, c, spec.grid)))
                            .collect(),
                    );
                }
            }
            Err(e) => section.multi = Some(Outcome::Error(e.to_string())),
        }
    }
    Some(section)
}

fn check(checks: &mut Vec<Check>, name: impl Into<String>, expected: impl Into<String>, observed: impl Into<String>, pass: bool) {
    checks.push(Check { name: name.into(), expected: expected.into(), observed: observed.into(), pass });
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Certified => "certified",
        Verdict::Refuted => "refuted",
        Verdict::Inconclusive => "inconclusive",
    }
}

fn observed<T>(o: &Outcome<T>, f: impl Fn(&T) -> String) -> String {
    match o {
        Outcome::Ok(v) => f(v),
        Outcome::Error(e) => format!("error: {e}"),
    }
}

pub fn run_problem(def: &ProblemDefinition, options: &RunOptions) -> ProblemReport {
    let certify = run_certification(def, options);
    let charts = run_charts(def, options);
    let settings = SweepSettings {
        integration: IntegrationSettings { tol: def.tolerances, ..Default::default() },
        execution: options.execution,
        consistency_check: options.consistency_check,
    };
    let sweep = sweep::run_epsilon_sweep(def, &settings);
    let escape = match sweep::detect_escape(&sweep, None) {
        Ok(v) => EscapeOutcome::Verdict(v),
        Err(e) => EscapeOutcome::NoEscape(e),
    };

    let mut checks = Vec::new();
    let mut numerical_failure = certify.potential.is_error() || certify.magnetic.is_error();
    if let Some(expected) = def.expected {
        let (want, observed_text, pass) = match (&escape, expected) {
            (EscapeOutcome::Verdict(v), Expected::Unstable) => ("escape demonstrated", v.label.clone(), v.demonstrated),
            (EscapeOutcome::Verdict(v), Expected::Stable) => ("no positive drift", v.label.clone(), false),
            (EscapeOutcome::NoEscape(e), Expected::Unstable) => ("escape demonstrated", e.to_string(), false),
            (EscapeOutcome::NoEscape(e), Expected::Stable) => ("no positive drift", e.to_string(), matches!(e, EscapeError::NoPositiveDrift { .. })),
        };
        check(&mut checks, "dynamics", want, observed_text, pass);
    }
    for (name, want, got) in [
        ("certify.potential", def.expect_certify.potential, &certify.potential),
        ("certify.magnetic", def.expect_certify.magnetic, &certify.magnetic),
    ] {
        if let Some(want) = want {
            let pass = got.ok().is_some_and(|r| r.verdict == want);
            check(&mut checks, name, verdict_name(want), observed(got, |r| verdict_name(r.verdict).into()), pass);
        }
    }
    if let Some(q) = &certify.quasi_homogeneous {
        numerical_failure |= q.is_error();
        let pass = q.ok().is_some_and(|r| r.verdict == Verdict::Certified);
        check(&mut checks, "quasi_homogeneous", "residual ≤ 1e-9", observed(q, |r| format!("residual {:e}", r.max_residual)), pass);
    }
    if let Some(c) = &charts {
        for (name, o) in [("chart.single", &c.single), ("chart.multi", &c.multi)] {
            if let Some(o) = o {
                numerical_failure |= o.is_error();
                let text = observed(o, |r| format!("identity {:e}, mixed {:e}", r.identity_residual, r.block.max_mixed));
                check(&mut checks, name, "verified", text, o.ok().is_some_and(|r| r.pass));
            }
        }
        if let Some(o) = &c.orthogonal_commuting {
            numerical_failure |= o.is_error();
            let text = observed(o, |r| format!("inner {:e}, bracket {:e}", r.max_inner, r.max_bracket));
            check(&mut checks, "orthogonal_commuting", "certified", text, o.ok().is_some_and(|r| r.verdict == Verdict::Certified));
        }
        for (i, o) in c.contraction.iter().flatten().enumerate() {
            numerical_failure |= o.is_error();
            let text = observed(o, |r| format!("max component {:e}", r.max_component));
            check(&mut checks, format!("contraction[{i}]"), "≤ 1e-8", text, o.ok().is_some_and(|r| r.pass));
        }
    }
    for run in &sweep.runs {
        let tag = |what: &str| format!("{what}[ε={:e}]", run.epsilon);
        if let Some(e) = &run.error {
            numerical_failure = true;
            check(&mut checks, tag("integration"), "completed", e.clone(), false);
            continue;
        }
        check(
            &mut checks,
            tag("initial_drift"),
            "|ż(0) − ‖∇f(p)‖²| ≤ 1e-10",
            format!("{:e}", run.initial_drift_error),
            run.initial_drift_error <= sweep::INITIAL_DRIFT_TOLERANCE,
        );
        if let Some(l) = &run.lemma1 {
            check(&mut checks, tag("lemma1"), "within bounds", format!("speed margin {:e}, potential margin {:e}", l.speed_margin, l.potential_margin), l.pass);
        }
        if let Some(c) = &run.consistency {
            check(&mut checks, tag("consistency"), "≤ 1e-6", format!("{:e}", c.max_distance), c.pass);
        }
    }
    let all_expected = checks.iter().all(|c| c.pass);
    ProblemReport {
        name: def.name.clone(),
        dimension: def.dimension,
        center: def.center.clone(),
        seed: options.seed,
        certify,
        charts,
        sweep,
        escape,
        checks,
        numerical_failure,
        all_expected,
    }
}

pub fn run_all(defs: &[ProblemDefinition], options: &RunOptions) -> RunAllReport {
    let problems: Vec<ProblemReport> = defs.iter().map(|d| run_problem(d, options)).collect();
    RunAllReport {
        seed: options.seed,
        numerical_failure: problems.iter().any(|p| p.numerical_failure),
        all_expected: problems.iter().all(|p| p.all_expected),
        problems,
    }
}
