//! Run configuration: a JSON file plus command-line overrides.

use std::fs;
use std::path::Path;

use gaflab::estimate::{EstimatorReport, EventKind, EventModel};
use gaflab::lemmas::OuLemma;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::verify::Suite;

/// Parameters of one run. Every field is optional; commands fill in their
/// own defaults and range-check what they use.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<EventKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<EventModel>,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n_points: Option<usize>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(rename = "T_values", skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// number of samples or replicates
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_tail: Option<f64>,
    /// perturbation scale of the lattice models
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma: Option<OuLemma>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// sample-zeros: add a Poisson panel to the figure
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poisson: Option<bool>,
    /// estimate: grow n until every horizon has this many successes
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_successes: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<Vec<Suite>>,
}

impl CampaignConfig {
    /// Reads a config file. A saved estimator report is accepted too and
    /// turned into the config that reproduces it.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config is not JSON: {e}")))?;
        if value.get("spec").is_some() {
            let report: EstimatorReport = serde_json::from_value(value)
                .map_err(|e| CliError::Usage(format!("config looks like a report but does not parse: {e}")))?;
            return Ok(Self::from_report(&report));
        }
        serde_json::from_value(value).map_err(|e| CliError::Usage(format!("bad config: {e}")))
    }

    pub fn from_report(r: &EstimatorReport) -> Self {
        let s = &r.spec;
        CampaignConfig {
            seed: Some(r.seed_root),
            kind: Some(s.kind),
            model: Some(s.model),
            radius: Some(s.radius),
            n_points: (s.kind == EventKind::Crowd).then_some(s.n_points),
            horizon: Some(s.horizon),
            delta: Some(s.grid_step),
            n: Some(r.n_samples),
            eps_tail: Some(s.eps_tail),
            c: Some(s.perturb_scale),
            ..Default::default()
        }
    }

    /// Fields set in `other` replace those here.
    pub fn overlay(mut self, other: &CampaignConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => {$(if other.$f.is_some() { self.$f = other.$f.clone(); })*};
        }
        take!(
            seed, kind, model, radius, n_points, horizon, horizons, delta, n, eps_tail, c, lemma, rho, poisson,
            min_successes, max_n, suite
        );
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Range checks that name the offending field.
pub fn positive(field: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("`{field}` must be a positive finite number, got {v}")))
    }
}

pub fn non_negative(field: &str, v: f64) -> Result<f64, CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("`{field}` must be finite and >= 0, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gaflab::estimate::EventSpec;

    #[test]
    fn parses_and_round_trips() {
        let text = r#"{"seed": 7, "kind": "hole", "model": "gaf", "R": 0.6, "T_values": [2, 4, 6], "delta": 0.02, "n": 1000}"#;
        let c = CampaignConfig::parse(text).unwrap();
        assert_eq!(c.radius, Some(0.6));
        assert_eq!(c.horizons.as_deref(), Some(&[2.0, 4.0, 6.0][..]));
        assert_eq!(CampaignConfig::parse(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn rejects_unknown_fields() {
        assert!(matches!(CampaignConfig::parse(r#"{"radius": 1}"#), Err(CliError::Usage(_))));
    }

    #[test]
    fn report_becomes_config() {
        let spec = EventSpec::crowd(EventModel::PoissonBm, 1.0, 3, 0.5, 0.1);
        let r = EstimatorReport::from_counts(spec, 4, 10, 99);
        let c = CampaignConfig::parse(&r.to_json()).unwrap();
        assert_eq!(c.seed, Some(99));
        assert_eq!(c.n, Some(10));
        assert_eq!(c.n_points, Some(3));
    }

    #[test]
    fn overlay_prefers_overrides() {
        let base = CampaignConfig {
            radius: Some(1.0),
            n: Some(5),
            ..Default::default()
        };
        let over = CampaignConfig {
            n: Some(9),
            ..Default::default()
        };
        let c = base.overlay(&over);
        assert_eq!((c.radius, c.n), (Some(1.0), Some(9)));
    }
}
