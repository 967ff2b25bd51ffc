//! Built-in example problems.

use super::problem::{ProblemDefinition, ProblemError};

/// `(name, JSON)` of every corpus entry, in presentation order.
pub const SOURCES: &[(&str, &str)] = &[
    ("stable-magnetic-plane", include_str!("../../corpus/stable-magnetic-plane.json")),
    ("unstable-magnetic-plane", include_str!("../../corpus/unstable-magnetic-plane.json")),
    ("mechanical-plane", include_str!("../../corpus/mechanical-plane.json")),
    ("whitney-umbrella", include_str!("../../corpus/whitney-umbrella.json")),
    ("kolibri", include_str!("../../corpus/kolibri.json")),
    ("crossing-axes", include_str!("../../corpus/crossing-axes.json")),
    ("corollary1-demo", include_str!("../../corpus/corollary1-demo.json")),
    ("corollary1-magnetic", include_str!("../../corpus/corollary1-magnetic.json")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    SOURCES.iter().map(|(n, _)| *n)
}

pub fn source(name: &str) -> Option<&'static str> {
    SOURCES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn entry(name: &str) -> Option<Result<ProblemDefinition, ProblemError>> {
    source(name).map(|s| ProblemDefinition::from_json(s, name))
}

/// Every corpus entry, validated.
///
/// # Panics
/// If a shipped entry fails validation.
pub fn corpus() -> Vec<ProblemDefinition> {
    SOURCES
        .iter()
        .map(|(name, text)| ProblemDefinition::from_json(text, name).unwrap_or_else(|e| panic!("corpus entry {name}: {e}")))
        .collect()
}
