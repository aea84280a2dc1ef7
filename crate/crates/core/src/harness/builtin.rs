//! The scenarios shipped with the crate, compiled in.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::harness::scenario::Scenario;

const SOURCES: &[(&str, &str)] = &[
    ("stance", include_str!("../../scenarios/stance.json")),
    ("config1-roll", include_str!("../../scenarios/config1-roll.json")),
    ("config2-roll", include_str!("../../scenarios/config2-roll.json")),
    ("brake", include_str!("../../scenarios/brake.json")),
    ("snow-slip", include_str!("../../scenarios/snow-slip.json")),
    ("underwater-jump", include_str!("../../scenarios/underwater-jump.json")),
    ("heightfield-level", include_str!("../../scenarios/heightfield-level.json")),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    SOURCES.iter().map(|(n, _)| *n)
}

pub fn builtin(name: &str) -> Result<Scenario> {
    let (_, text) = SOURCES
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Configuration(format!("no built-in scenario `{name}`")))?;
    Scenario::from_json(text)
}

pub fn builtin_scenarios() -> BTreeMap<String, Scenario> {
    SOURCES
        .iter()
        .map(|(n, t)| (n.to_string(), Scenario::from_json(t).expect("shipped scenarios are valid")))
        .collect()
}
