//! Run configuration: a flat TOML table of `key = value` lines.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::contact::{ContactConfig, ContactLaw};
use crate::error::{Error, Result};
use crate::integrator::PredictorBase;
use crate::scenario::{self, Scenario, ScenarioKind};
use crate::toy1d;
use crate::transfer::TransferMode;

pub const DEFAULT_RAMP_H: f64 = 0.25;
pub const DEFAULT_SNAPSHOT_EVERY: u64 = 100;
pub const DEFAULT_DIAGNOSTICS_EVERY: u64 = 10;

/// Configuration as written by the user; every key is optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub scenario: Option<String>,
    pub k: Option<i32>,
    pub h: Option<f64>,
    pub mu: Option<f64>,
    pub mode: Option<TransferMode>,
    pub law: Option<ContactLaw>,
    pub iterations: Option<usize>,
    pub dt: Option<f64>,
    pub tau: Option<f64>,
    pub end_time: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub snapshot_every: Option<u64>,
    pub diagnostics_every: Option<u64>,
    pub seed: Option<u64>,
    pub taus: Option<Vec<f64>>,
    pub predictor: Option<PredictorBase>,
}

/// Command-line overrides layered on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub mode: Option<TransferMode>,
    pub law: Option<ContactLaw>,
    pub mu: Option<f64>,
    pub iterations: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, raw: &mut RawConfig) {
        raw.mode = self.mode.or(raw.mode);
        raw.law = self.law.or(raw.law);
        raw.mu = self.mu.or(raw.mu);
        raw.iterations = self.iterations.or(raw.iterations);
        if self.output_dir.is_some() {
            raw.output_dir = self.output_dir.clone();
        }
    }
}

/// Fully resolved configuration. Serializes to the run manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    /// Two-block refinement level, `h = 2^k`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<i32>,
    /// Mesh size for finite element scenarios.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    pub mu: f64,
    pub mode: TransferMode,
    pub law: ContactLaw,
    pub iterations: usize,
    /// Time step; for the toy model an override applied to every τ.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub end_time: f64,
    pub output_dir: PathBuf,
    pub snapshot_every: u64,
    pub diagnostics_every: u64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub taus: Option<Vec<f64>>,
    pub predictor: PredictorBase,
}

impl RunConfig {
    pub fn contact(&self) -> Result<ContactConfig> {
        let tau = self
            .tau
            .ok_or_else(|| Error::InvalidInput("toy runs have no contact configuration".into()))?;
        ContactConfig::new(tau, self.mode, self.law, self.mu, self.iterations)
    }

    /// Builds the finite element scenario with the configured contact, step
    /// and end time.
    pub fn build_scenario(&self) -> Result<Scenario> {
        let mut s = match self.scenario {
            ScenarioKind::TwoBlock => scenario::two_block_impact(self.k.unwrap_or(0))?,
            ScenarioKind::Ramp => scenario::ramp_scenario(self.h.unwrap_or(DEFAULT_RAMP_H), self.mu)?,
            ScenarioKind::Toy1d => return Err(Error::InvalidInput("toy1d is not a finite element scenario".into())),
        };
        if let Some(dt) = self.dt {
            s.spec.dt = dt;
        }
        s.spec.end_time = self.end_time;
        s.spec.contact = self.contact()?;
        Ok(s)
    }

    pub fn to_manifest(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }
}

/// 1-based line of the first `key = ...` assignment, if any.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}

fn config_error(text: &str, key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        line: line_of_key(text, key).unwrap_or(0),
        message: message.into(),
    }
}

fn from_toml_error(text: &str, err: toml::de::Error) -> Error {
    let message = err.message().to_string();
    let (line, key) = match err.span() {
        Some(span) => {
            let start = span.start.min(text.len());
            let line = text[..start].matches('\n').count() + 1;
            let line_text = text.lines().nth(line - 1).unwrap_or("");
            let key = line_text.split('=').next().unwrap_or("").trim().to_string();
            (line, key)
        }
        None => (0, String::new()),
    };
    // unknown-field messages name the key themselves
    let key = message
        .strip_prefix("unknown field `")
        .and_then(|r| r.split('`').next())
        .map(str::to_string)
        .unwrap_or(key);
    Error::Config { key, line, message }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, &Overrides::default())
}

/// Parses, applies `overrides`, fills defaults and validates.
pub fn parse_config_with(text: &str, overrides: &Overrides) -> Result<RunConfig> {
    let mut raw: RawConfig = toml::from_str(text).map_err(|e| from_toml_error(text, e))?;
    overrides.apply(&mut raw);
    resolve(text, raw)
}

fn positive(text: &str, key: &str, v: Option<f64>) -> Result<Option<f64>> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(config_error(text, key, format!("must be positive, got {x}"))),
        _ => Ok(v),
    }
}

fn resolve(text: &str, raw: RawConfig) -> Result<RunConfig> {
    let name = raw.scenario.as_deref().unwrap_or("").trim();
    if name.is_empty() {
        return Err(config_error(
            text,
            "scenario",
            "a scenario is required (two-block, ramp or toy1d)",
        ));
    }
    let kind: ScenarioKind = name
        .parse()
        .map_err(|_| config_error(text, "scenario", format!("unknown scenario `{name}`")))?;

    let mode = raw.mode.unwrap_or(TransferMode::Apic);
    let law = raw.law.unwrap_or(ContactLaw::Friction);
    let mu = raw.mu.unwrap_or(0.0);
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(config_error(
            text,
            "mu",
            format!("friction coefficient must be non-negative, got {mu}"),
        ));
    }
    let iterations = raw.iterations.unwrap_or(if law == ContactLaw::Sticky { 0 } else { 1 });
    match (law, iterations) {
        (ContactLaw::Sticky, n) if n > 0 => {
            return Err(config_error(
                text,
                "iterations",
                "the sticky law takes no augury iterations",
            ))
        }
        (l, 0) if l != ContactLaw::Sticky => {
            return Err(config_error(
                text,
                "iterations",
                format!("the {l} law needs at least one iteration"),
            ))
        }
        _ => {}
    }
    let dt = positive(text, "dt", raw.dt)?;
    let tau = positive(text, "tau", raw.tau)?;
    let end_time = positive(text, "end_time", raw.end_time)?;
    let h = positive(text, "h", raw.h)?;
    let snapshot_every = raw.snapshot_every.unwrap_or(DEFAULT_SNAPSHOT_EVERY);
    let diagnostics_every = raw.diagnostics_every.unwrap_or(DEFAULT_DIAGNOSTICS_EVERY);
    for (key, v) in [
        ("snapshot_every", snapshot_every),
        ("diagnostics_every", diagnostics_every),
    ] {
        if v == 0 {
            return Err(config_error(text, key, "cadence must be at least 1"));
        }
    }
    let only_for = |key: &str, present: bool, owner: &str| -> Result<()> {
        if present {
            Err(config_error(text, key, format!("only valid for the {owner} scenario")))
        } else {
            Ok(())
        }
    };

    let mut cfg = RunConfig {
        scenario: kind,
        k: None,
        h: None,
        mu,
        mode,
        law,
        iterations,
        dt,
        tau: None,
        end_time: 0.0,
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        snapshot_every,
        diagnostics_every,
        seed: raw.seed.unwrap_or(0),
        taus: None,
        predictor: raw.predictor.unwrap_or_default(),
    };
    match kind {
        ScenarioKind::TwoBlock => {
            only_for("h", raw.h.is_some(), "ramp (two-block uses k)")?;
            only_for("taus", raw.taus.is_some(), "toy1d")?;
            let k = raw.k.unwrap_or(0);
            if !(-4..=0).contains(&k) {
                return Err(config_error(
                    text,
                    "k",
                    format!("refinement level must lie in -4..=0, got {k}"),
                ));
            }
            let h = 2f64.powi(k);
            let dt = dt.unwrap_or(1e-4 * h);
            cfg.k = Some(k);
            cfg.h = Some(h);
            cfg.dt = Some(dt);
            cfg.tau = Some(tau.unwrap_or(dt));
            cfg.end_time = end_time.unwrap_or(scenario::TWO_BLOCK_END_TIME);
        }
        ScenarioKind::Ramp => {
            only_for("k", raw.k.is_some(), "two-block")?;
            only_for("taus", raw.taus.is_some(), "toy1d")?;
            let h = h.unwrap_or(DEFAULT_RAMP_H);
            let dt = dt.unwrap_or(2.5e-5 * h);
            let theta = scenario::RAMP_ANGLE_DEG.to_radians();
            cfg.h = Some(h);
            cfg.dt = Some(dt);
            cfg.tau = Some(tau.unwrap_or(dt));
            cfg.end_time = end_time
                .or_else(|| scenario::ramp_time_to_travel(1.0, theta, mu, scenario::RAMP_GRAVITY))
                .unwrap_or(0.25);
        }
        ScenarioKind::Toy1d => {
            only_for("k", raw.k.is_some(), "two-block")?;
            only_for("h", raw.h.is_some(), "ramp")?;
            only_for("tau", raw.tau.is_some(), "finite element (toy1d uses taus)")?;
            let taus = raw.taus.unwrap_or_else(|| toy1d::DEFAULT_TAUS.to_vec());
            if taus.is_empty() {
                return Err(config_error(text, "taus", "at least one tau is required"));
            }
            for &t in &taus {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(config_error(text, "taus", format!("tau must be positive, got {t}")));
                }
                if let Some(dt) = dt {
                    if dt > toy1d::max_dt(t) {
                        return Err(config_error(
                            text,
                            "dt",
                            format!("dt must not exceed tau/50 = {}", toy1d::max_dt(t)),
                        ));
                    }
                }
            }
            cfg.taus = Some(taus);
            cfg.end_time = end_time.unwrap_or(toy1d::DEFAULT_END_TIME);
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_two_block_fills_defaults() {
        let cfg = parse_config("scenario = \"two-block\"\nk = 0\n").unwrap();
        assert_eq!(cfg.mode, TransferMode::Apic);
        assert_eq!(cfg.law, ContactLaw::Friction);
        assert_eq!(cfg.mu, 0.0);
        assert_eq!(cfg.iterations, 1);
        assert_eq!(cfg.dt, Some(1e-4));
        assert_eq!(cfg.tau, cfg.dt);
        assert_eq!(cfg.snapshot_every, DEFAULT_SNAPSHOT_EVERY);
        assert_eq!(cfg.predictor, PredictorBase::StepStart);
    }

    #[test]
    fn empty_scenario_is_rejected() {
        let err = parse_config("scenario = \"\"\n").unwrap_err();
        assert!(
            matches!(err, Error::Config { ref key, line: 1, .. } if key == "scenario"),
            "{err}"
        );
        assert!(matches!(parse_config(""), Err(Error::Config { .. })));
    }

    #[test]
    fn negative_friction_names_key_and_line() {
        let err = parse_config("scenario = \"ramp\"\nmu = -0.1\n").unwrap_err();
        assert!(
            matches!(err, Error::Config { ref key, line: 2, .. } if key == "mu"),
            "{err}"
        );
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let err = parse_config("scenario = \"ramp\"\n\nfrobnicate = 3\n").unwrap_err();
        match err {
            Error::Config { key, line, .. } => {
                assert_eq!(key, "frobnicate");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn type_mismatch_names_key_and_line() {
        let err = parse_config("scenario = \"two-block\"\nk = \"zero\"\n").unwrap_err();
        assert!(
            matches!(err, Error::Config { ref key, line: 2, .. } if key == "k"),
            "{err}"
        );
    }

    #[test]
    fn sticky_defaults_to_zero_iterations() {
        let cfg = parse_config("scenario = \"two-block\"\nlaw = \"sticky\"\n").unwrap();
        assert_eq!(cfg.iterations, 0);
        assert!(parse_config("scenario = \"two-block\"\nlaw = \"sticky\"\niterations = 2\n").is_err());
        assert!(parse_config("scenario = \"two-block\"\nlaw = \"separation\"\niterations = 0\n").is_err());
    }

    #[test]
    fn zero_cadence_rejected() {
        assert!(parse_config("scenario = \"ramp\"\nsnapshot_every = 0\n").is_err());
        assert!(parse_config("scenario = \"ramp\"\nend_time = 0.0\n").is_err());
    }

    #[test]
    fn ramp_end_time_from_analytic_slide() {
        let cfg = parse_config("scenario = \"ramp\"\nmu = 0.2\n").unwrap();
        let th = scenario::RAMP_ANGLE_DEG.to_radians();
        assert!((scenario::ramp_analytic(cfg.end_time, th, 0.2, 100.0) - 1.0).abs() < 1e-12);
        assert_eq!(cfg.h, Some(0.25));
        assert_eq!(cfg.dt, Some(2.5e-5 * 0.25));
    }

    #[test]
    fn overrides_take_precedence() {
        let o = Overrides {
            mode: Some(TransferMode::Pic),
            law: Some(ContactLaw::Separation),
            mu: Some(0.3),
            iterations: Some(2),
            output_dir: Some("elsewhere".into()),
        };
        let cfg = parse_config_with("scenario = \"two-block\"\nmode = \"apic\"\n", &o).unwrap();
        assert_eq!(cfg.mode, TransferMode::Pic);
        assert_eq!(cfg.law, ContactLaw::Separation);
        assert_eq!(cfg.iterations, 2);
        assert_eq!(cfg.output_dir, PathBuf::from("elsewhere"));
    }

    #[test]
    fn toy_config() {
        let cfg = parse_config("scenario = \"toy1d\"\nmode = \"pic\"\ntaus = [0.1, 0.2]\n").unwrap();
        assert_eq!(cfg.taus, Some(vec![0.1, 0.2]));
        assert_eq!(cfg.tau, None);
        assert!(cfg.build_scenario().is_err());
        assert!(parse_config("scenario = \"toy1d\"\ntaus = [0.1]\ndt = 0.01\n").is_err());
    }

    #[test]
    fn manifest_round_trips() {
        let cfg = parse_config("scenario = \"ramp\"\nmu = 0.1\nh = 0.5\n").unwrap();
        let back: RunConfig = toml::from_str(&cfg.to_manifest()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn build_scenario_uses_resolved_contact() {
        let cfg = parse_config("scenario = \"two-block\"\nk = -1\nlaw = \"separation\"\ntau = 2e-4\n").unwrap();
        let s = cfg.build_scenario().unwrap();
        assert_eq!(s.spec.contact.tau, 2e-4);
        assert_eq!(s.spec.contact.law, ContactLaw::Separation);
        assert_eq!(s.spec.dt, 5e-5);
    }
}
