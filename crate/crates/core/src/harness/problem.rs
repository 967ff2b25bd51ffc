//! Problem-definition JSON and its validation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::certify::{self, ProbeSettings, QuasiHomogeneousSpec, Verdict};
use crate::charts::BaseSurfaceMap;
use crate::expr::ScalarField;
use crate::geometry::{MetricSpec, OneForm, MAX_DIMENSION};
use crate::ode::Tolerances;

/// `U(p)` above this means `p` is not on `M`.
pub const CENTER_POTENTIAL_TOLERANCE: f64 = 1e-12;
/// `‖∇f(p)‖` below this means `f` is not regular at `p`.
pub const CENTER_GRADIENT_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ProblemError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed problem JSON: {0}")]
    Json(String),
    #[error("invalid problem:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricFile {
    Named(String),
    Matrix(Vec<Vec<String>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PullbackFile {
    /// `F_1..F_k` in the ambient variables.
    pub maps: Vec<String>,
    /// Coefficients `c_l` of `ω = Σ c_l dr_l`, in variables `x1..xk`.
    pub omega: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MagneticFile {
    Components(Vec<String>),
    Pullback { pullback: PullbackFile },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingleChartFile {
    pub base: Vec<String>,
    pub z_range: [f64; 2],
    pub y_box: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiChartFile {
    pub fields: Vec<String>,
    pub base: Vec<String>,
    pub r_box: Vec<[f64; 2]>,
    pub y_box: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub single: Option<SingleChartFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multi: Option<MultiChartFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expected {
    Stable,
    Unstable,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectCertify {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnetic: Option<Verdict>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuasiHomogeneousFile {
    pub alpha: Vec<f64>,
    pub degree: f64,
}

/// The on-disk problem format.
fn default_epsilons() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub dimension: usize,
    pub metric: MetricFile,
    pub potential: String,
    #[serde(default)]
    pub magnetic: Option<MagneticFile>,
    pub f: String,
    pub center: Vec<f64>,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub chart: Option<ChartFile>,
    #[serde(default)]
    pub expected: Option<Expected>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_certify: Option<ExpectCertify>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quasi_homogeneous: Option<QuasiHomogeneousFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SingleChartSpec {
    pub base: BaseSurfaceMap,
    pub z_range: (f64, f64),
    pub y_box: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiChartSpec {
    pub fields: Vec<ScalarField>,
    pub base: BaseSurfaceMap,
    pub r_box: Vec<(f64, f64)>,
    pub y_box: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChartSpec {
    pub single: Option<SingleChartSpec>,
    pub multi: Option<MultiChartSpec>,
    pub grid: usize,
}

/// A validated problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemDefinition {
    pub name: String,
    pub description: Option<String>,
    pub dimension: usize,
    pub metric: MetricSpec,
    pub potential: ScalarField,
    pub magnetic: Option<OneForm>,
    pub f: ScalarField,
    pub center: Vec<f64>,
    pub horizon: f64,
    pub epsilons: Vec<f64>,
    pub chart: Option<ChartSpec>,
    pub expected: Option<Expected>,
    pub expect_certify: ExpectCertify,
    pub quasi_homogeneous: Option<QuasiHomogeneousSpec>,
    pub probe: ProbeSettings,
    pub tolerances: Tolerances,
    /// The file this definition was validated from.
    pub source: ProblemFile,
}

impl ProblemDefinition {
    pub fn from_json(text: &str, fallback_name: &str) -> Result<Self, ProblemError> {
        let file: ProblemFile = serde_json::from_str(text).map_err(|e| ProblemError::Json(e.to_string()))?;
        Self::from_file(file, fallback_name)
    }

    pub fn from_file(file: ProblemFile, fallback_name: &str) -> Result<Self, ProblemError> {
        validate(file, fallback_name)
    }

    /// `‖∇f(p)‖_g`.
    pub fn gradient_norm_at_center(&self) -> f64 {
        crate::geometry::riemannian_gradient(&self.metric, &self.f, &self.center)
            .ok()
            .and_then(|g| self.metric.factor(&self.center).ok().map(|at| at.norm(&g)))
            .unwrap_or(f64::NAN)
    }
}

/// Reads and validates a problem file; the file stem is the default name.
pub fn load_problem(path: &Path) -> Result<ProblemDefinition, ProblemError> {
    let text = std::fs::read_to_string(path).map_err(|e| ProblemError::Io { path: path.display().to_string(), message: e.to_string() })?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("problem");
    ProblemDefinition::from_json(&text, stem)
}

fn boxes(raw: &[[f64; 2]]) -> Vec<(f64, f64)> {
    raw.iter().map(|[a, b]| (*a, *b)).collect()
}

fn validate(file: ProblemFile, fallback_name: &str) -> Result<ProblemDefinition, ProblemError> {
    let mut errors: Vec<String> = Vec::new();
    let n = file.dimension;
    if n == 0 || n > MAX_DIMENSION {
        return Err(ProblemError::Validation(vec![format!("dimension must be in 1..={MAX_DIMENSION}, got {n}")]));
    }
    let mut field = |what: &str, src: &str, dim: usize| match ScalarField::parse(src, dim) {
        Ok(f) => Some(f),
        Err(e) => {
            errors.push(format!("{what}: {e}"));
            None
        }
    };

    let potential = field("potential", &file.potential, n);
    let f = field("f", &file.f, n);
    let magnetic_fields: Option<Vec<Option<ScalarField>>> = match &file.magnetic {
        None => None,
        Some(MagneticFile::Components(c)) => Some(c.iter().enumerate().map(|(i, s)| field(&format!("magnetic[{i}]"), s, n)).collect()),
        Some(MagneticFile::Pullback { .. }) => None,
    };
    let pullback = match &file.magnetic {
        Some(MagneticFile::Pullback { pullback }) => {
            let k = pullback.maps.len();
            let maps: Vec<_> = pullback.maps.iter().enumerate().map(|(i, s)| field(&format!("magnetic.pullback.maps[{i}]"), s, n)).collect();
            let omega: Vec<_> = if k == 0 {
                Vec::new()
            } else {
                pullback.omega.iter().enumerate().map(|(i, s)| field(&format!("magnetic.pullback.omega[{i}]"), s, k)).collect()
            };
            Some((maps, omega))
        }
        _ => None,
    };

    let mut chart_fields = None;
    if let Some(ChartFile { multi: Some(m), .. }) = &file.chart {
        chart_fields = Some(m.fields.iter().enumerate().map(|(i, s)| field(&format!("chart.multi.fields[{i}]"), s, n)).collect::<Vec<_>>());
    }
    let metric = match &file.metric {
        MetricFile::Named(s) if s == "euclidean" => MetricSpec::euclidean(n).map_err(|e| e.to_string()),
        MetricFile::Named(s) => Err(format!("unknown metric {s:?} (expected \"euclidean\" or a matrix)")),
        MetricFile::Matrix(rows) if rows.len() != n || rows.iter().any(|r| r.len() != n) => Err(format!("metric must be a {n}×{n} matrix")),
        MetricFile::Matrix(rows) => MetricSpec::parse_matrix(rows).map_err(|e| e.to_string()),
    };
    let metric = match metric {
        Ok(m) => Some(m),
        Err(e) => {
            errors.push(format!("metric: {e}"));
            None
        }
    };

    let magnetic = match (magnetic_fields, pullback) {
        (Some(c), _) => {
            if c.len() != n {
                errors.push(format!("magnetic must have {n} components, got {}", c.len()));
                None
            } else {
                c.into_iter().collect::<Option<Vec<_>>>().and_then(|c| OneForm::new(c).map_err(|e| errors.push(format!("magnetic: {e}"))).ok())
            }
        }
        (None, Some((maps, omega))) => {
            if maps.is_empty() || maps.len() != omega.len() {
                errors.push(format!("magnetic pullback needs as many ω coefficients as maps ({} vs {})", omega.len(), maps.len()));
                None
            } else {
                match (maps.into_iter().collect::<Option<Vec<_>>>(), omega.into_iter().collect::<Option<Vec<_>>>()) {
                    (Some(m), Some(o)) => certify::build_pullback_magnetic(&m, &o).map_err(|e| errors.push(format!("magnetic pullback: {e}"))).ok(),
                    _ => None,
                }
            }
        }
        (None, None) => None,
    };

    if file.center.len() != n {
        errors.push(format!("center must have {n} coordinates, got {}", file.center.len()));
    } else if file.center.iter().any(|c| !c.is_finite()) {
        errors.push("center must be finite".into());
    }
    if !(file.horizon > 0.0 && file.horizon.is_finite()) {
        errors.push(format!("T must be positive, got {}", file.horizon));
    }
    if file.epsilons.is_empty() {
        errors.push("epsilons must not be empty".into());
    } else if file.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        errors.push("epsilons must be positive".into());
    } else if file.epsilons.windows(2).any(|w| w[1] >= w[0]) {
        errors.push("epsilons must be strictly decreasing".into());
    }

    let center_ok = file.center.len() == n && file.center.iter().all(|c| c.is_finite());
    if let (Some(u), true) = (&potential, center_ok) {
        match u.eval(&file.center) {
            Ok(v) if v.abs() <= CENTER_POTENTIAL_TOLERANCE => {}
            Ok(v) => errors.push(format!("center is not a zero-potential point (U(p) = {v})")),
            Err(e) => errors.push(format!("potential at center: {e}")),
        }
    }
    if let (Some(f), Some(metric), true) = (&f, &metric, center_ok) {
        match crate::geometry::riemannian_gradient(metric, f, &file.center).and_then(|g| Ok(metric.factor(&file.center)?.norm(&g))) {
            Ok(norm) if norm >= CENTER_GRADIENT_FLOOR => {}
            Ok(norm) => errors.push(format!("f is not regular at the center (‖∇f(p)‖ = {norm:e})")),
            Err(e) => errors.push(format!("gradient of f at center: {e}")),
        }
    }

    let tolerances = file.tolerances.unwrap_or_default();
    if !(tolerances.abs > 0.0 && tolerances.rel > 0.0) {
        errors.push("tolerances must be positive".into());
    }

    let mut probe = ProbeSettings::default();
    if let Some(p) = &file.probe {
        probe.radius = p.radius.unwrap_or(probe.radius);
        probe.delta_min = p.delta_min.unwrap_or(probe.delta_min);
        probe.delta_max = p.delta_max.unwrap_or(probe.delta_max);
        probe.samples = p.samples.unwrap_or(probe.samples);
    }
    if let Err(e) = probe.validate() {
        errors.push(format!("probe: {e}"));
    }

    let quasi_homogeneous = match &file.quasi_homogeneous {
        Some(q) if q.alpha.len() != n => {
            errors.push(format!("quasi_homogeneous.alpha must have {n} weights"));
            None
        }
        Some(q) => QuasiHomogeneousSpec::new(q.alpha.clone(), q.degree).map_err(|e| errors.push(format!("quasi_homogeneous: {e}"))).ok(),
        None => None,
    };

    let chart = file.chart.as_ref().map(|c| {
        let single = c.single.as_ref().and_then(|s| {
            let m = n - 1;
            match BaseSurfaceMap::parse(&s.base, m.max(1)) {
                Ok(base) if base.ambient_dimension() == n && s.y_box.len() == m => {
                    Some(SingleChartSpec { base, z_range: (s.z_range[0], s.z_range[1]), y_box: boxes(&s.y_box) })
                }
                Ok(_) => {
                    errors.push(format!("chart.single: base needs {n} components and y_box {m} intervals"));
                    None
                }
                Err(e) => {
                    errors.push(format!("chart.single: {e}"));
                    None
                }
            }
        });
        let multi = c.multi.as_ref().and_then(|mc| {
            let k = mc.fields.len();
            if k == 0 || k >= n {
                errors.push(format!("chart.multi: need 0 < k < {n} fields"));
                return None;
            }
            let fields = chart_fields.take()?.into_iter().collect::<Option<Vec<_>>>()?;
            match BaseSurfaceMap::parse(&mc.base, n - k) {
                Ok(base) if base.ambient_dimension() == n && mc.y_box.len() == n - k && mc.r_box.len() == k => {
                    Some(MultiChartSpec { fields, base, r_box: boxes(&mc.r_box), y_box: boxes(&mc.y_box) })
                }
                Ok(_) => {
                    errors.push(format!("chart.multi: base needs {n} components, r_box {k} and y_box {} intervals", n - k));
                    None
                }
                Err(e) => {
                    errors.push(format!("chart.multi: {e}"));
                    None
                }
            }
        });
        let grid = c.grid.unwrap_or(9);
        if grid < 2 {
            errors.push("chart.grid must be at least 2".into());
        }
        ChartSpec { single, multi, grid }
    });

    if !errors.is_empty() {
        return Err(ProblemError::Validation(errors));
    }
    Ok(ProblemDefinition {
        name: file.name.clone().unwrap_or_else(|| fallback_name.to_string()),
        description: file.description.clone(),
        dimension: n,
        metric: metric.expect("validated"),
        potential: potential.expect("validated"),
        magnetic,
        f: f.expect("validated"),
        center: file.center.clone(),
        horizon: file.horizon,
        epsilons: file.epsilons.clone(),
        chart,
        expected: file.expected,
        expect_certify: file.expect_certify.unwrap_or_default(),
        quasi_homogeneous,
        probe,
        tolerances,
        source: file,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLANE: &str = r#"{
        "dimension": 3, "metric": "euclidean", "potential": "x3^2",
        "magnetic": ["0", "x3", "0"], "f": "x1", "center": [0, 0, 0],
        "T": 1, "epsilons": [0.1, 0.01], "chart": null, "expected": "unstable"
    }"#;

    fn with(key: &str, value: &str) -> String {
        let mut v: serde_json::Value = serde_json::from_str(PLANE).unwrap();
        v[key] = serde_json::from_str(value).unwrap();
        v.to_string()
    }

    fn errors(text: &str) -> Vec<String> {
        match ProblemDefinition::from_json(text, "t") {
            Err(ProblemError::Validation(e)) => e,
            other => panic!("expected validation errors, got {other:?}"),
        }
    }

    #[test]
    fn valid_plane() {
        let d = ProblemDefinition::from_json(PLANE, "plane").unwrap();
        assert_eq!(d.name, "plane");
        assert_eq!(d.dimension, 3);
        assert!(d.magnetic.is_some());
        assert_eq!(d.expected, Some(Expected::Unstable));
        assert_eq!(d.gradient_norm_at_center(), 1.0);
    }

    #[test]
    fn off_center_potential() {
        let e = errors(&with("center", "[0, 0, 0.7071067811865476]"));
        assert!(e.iter().any(|m| m.contains("center is not a zero-potential point")), "{e:?}");
    }

    #[test]
    fn epsilon_order() {
        assert!(errors(&with("epsilons", "[0.01, 0.1]")).iter().any(|m| m.contains("strictly decreasing")));
        assert!(errors(&with("epsilons", "[0.1, -0.01]")).iter().any(|m| m.contains("positive")));
    }

    #[test]
    fn errors_are_aggregated() {
        let mut v: serde_json::Value = serde_json::from_str(PLANE).unwrap();
        v["potential"] = "x3^^2".into();
        v["f"] = "x1^2".into();
        v["T"] = (-1.0).into();
        v["magnetic"] = serde_json::json!(["0", "0"]);
        let e = errors(&v.to_string());
        assert!(e.len() >= 4, "{e:?}");
        assert!(e.iter().any(|m| m.contains("not regular")));
    }

    #[test]
    fn pullback_magnetic_form() {
        let text = with("magnetic", r#"{"pullback": {"maps": ["x1 + x3^2", "x2"], "omega": ["0", "x1"]}}"#);
        let d = ProblemDefinition::from_json(&text, "t").unwrap();
        let mu = d.magnetic.unwrap();
        assert!((mu.components()[1].eval(&[0.5, 0.0, 0.5]).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn malformed_json() {
        assert!(matches!(ProblemDefinition::from_json("{", "t"), Err(ProblemError::Json(_))));
        assert!(matches!(ProblemDefinition::from_json(&with("bogus", "1"), "t"), Err(ProblemError::Json(_))));
    }
}
