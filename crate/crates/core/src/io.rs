//! JSON datasets and domain files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{validate_rjcr, MenuSequence, ObservationDomain, RandomJointChoiceRule, RawObservation};
use crate::error::{Error, Result};
use crate::lattice::Universe;
use crate::scalar::{NumericMode, Scalar};

// Field order is alphabetical so serialized keys come out sorted.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetJson {
    alternatives: Vec<String>,
    numeric_mode: String,
    observations: Vec<ObservationJson>,
    periods: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservationJson {
    menus: Vec<Vec<String>>,
    probs: Vec<ProbJson>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbJson {
    choices: Vec<String>,
    p: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainJson {
    observed: Vec<Vec<Vec<String>>>,
    periods: usize,
}

fn json_error(e: serde_json::Error) -> Error {
    Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string())
}

/// The mode a dataset declares for itself.
pub fn declared_mode(text: &str) -> Result<NumericMode> {
    let data: DatasetJson = serde_json::from_str(text).map_err(json_error)?;
    parse_mode(&data.numeric_mode)
}

pub fn parse_mode(s: &str) -> Result<NumericMode> {
    match s {
        "float" => Ok(NumericMode::Float),
        "rational" => Ok(NumericMode::Rational),
        other => Err(Error::parse("numeric_mode", format!("expected `float` or `rational`, got `{}`", other))),
    }
}

/// Parses a dataset into a rule of the requested scalar type, validating at `tolerance`.
pub fn parse_dataset<S: Scalar>(text: &str, tolerance: f64) -> Result<RandomJointChoiceRule<S>> {
    let data: DatasetJson = serde_json::from_str(text).map_err(json_error)?;
    parse_mode(&data.numeric_mode)?;
    let universe = Universe::new(data.alternatives)?;
    let mut raw = Vec::with_capacity(data.observations.len());
    for (i, obs) in data.observations.into_iter().enumerate() {
        if obs.menus.len() != data.periods {
            return Err(Error::parse(
                format!("observations[{}].menus", i),
                format!("expected {} menus, found {}", data.periods, obs.menus.len()),
            ));
        }
        if obs.probs.is_empty() {
            return Err(Error::parse(format!("observations[{}].probs", i), "menu product listed without probabilities"));
        }
        let mut probs = Vec::with_capacity(obs.probs.len());
        for (j, entry) in obs.probs.into_iter().enumerate() {
            let p = S::parse_prob(&entry.p).ok_or_else(|| {
                Error::parse(format!("observations[{}].probs[{}].p", i, j), format!("`{}` is not a probability", entry.p))
            })?;
            probs.push((entry.choices, p));
        }
        raw.push(RawObservation { menus: obs.menus, probs });
    }
    Ok(validate_rjcr(&raw, &universe, data.periods, tolerance)?.rule)
}

/// Canonical serialization: sorted keys, canonical observation order, zero cells omitted,
/// two-space indentation and a trailing newline.
pub fn dataset_to_string<S: Scalar>(p: &RandomJointChoiceRule<S>) -> String {
    let u = p.universe();
    let observations = p
        .blocks()
        .map(|(menus, _)| ObservationJson {
            menus: menus.0.iter().map(|&m| u.menu_labels(m)).collect(),
            probs: menus
                .choices()
                .into_iter()
                .filter_map(|c| {
                    let v = p.prob(menus, &c).expect("observed");
                    (!v.is_zero()).then(|| ProbJson {
                        choices: c.iter().map(|&a| u.label(a).to_string()).collect(),
                        p: v.format_prob(),
                    })
                })
                .collect(),
        })
        .collect();
    let data = DatasetJson {
        alternatives: u.labels().to_vec(),
        numeric_mode: S::MODE.as_str().to_string(),
        observations,
        periods: p.periods(),
    };
    let mut s = serde_json::to_string_pretty(&data).expect("serializable");
    s.push('\n');
    s
}

pub fn load_dataset<S: Scalar>(path: impl AsRef<Path>, tolerance: f64) -> Result<RandomJointChoiceRule<S>> {
    parse_dataset(&std::fs::read_to_string(path)?, tolerance)
}

pub fn save_dataset<S: Scalar>(p: &RandomJointChoiceRule<S>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, dataset_to_string(p))?;
    Ok(())
}

/// Reads `{"periods": T, "observed": [[menu, …], …]}`.
pub fn parse_domain(text: &str, universe: &Universe) -> Result<ObservationDomain> {
    let data: DomainJson = serde_json::from_str(text).map_err(json_error)?;
    let mut observed = Vec::with_capacity(data.observed.len());
    for (i, menus) in data.observed.iter().enumerate() {
        if menus.len() != data.periods {
            return Err(Error::parse(
                format!("observed[{}]", i),
                format!("expected {} menus, found {}", data.periods, menus.len()),
            ));
        }
        observed.push(MenuSequence(menus.iter().map(|m| universe.menu(m)).collect::<Result<Vec<_>>>()?));
    }
    ObservationDomain::new(data.periods, observed)
}

pub fn domain_to_string(domain: &ObservationDomain, universe: &Universe) -> String {
    let data = DomainJson {
        observed: domain.iter().map(|m| m.0.iter().map(|&a| universe.menu_labels(a)).collect()).collect(),
        periods: domain.periods(),
    };
    let mut s = serde_json::to_string_pretty(&data).expect("serializable");
    s.push('\n');
    s
}
