//! Flat `key = value` experiment configuration.
//!
//! One pair per line; `#` starts a comment; lists are comma separated. Every
//! key is optional except `suite`. Unknown or repeated keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::Sign;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Census,
    Late,
    Extremes,
    Excursions,
    GffCheck,
    GreenCheck,
    Exponents,
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::Census => "census",
            Suite::Late => "late",
            Suite::Extremes => "extremes",
            Suite::Excursions => "excursions",
            Suite::GffCheck => "gff-check",
            Suite::GreenCheck => "green-check",
            Suite::Exponents => "exponents",
        }
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "census" => Suite::Census,
            "late" => Suite::Late,
            "extremes" => Suite::Extremes,
            "excursions" => Suite::Excursions,
            "gff-check" => Suite::GffCheck,
            "green-check" => Suite::GreenCheck,
            "exponents" => Suite::Exponents,
            _ => return Err(format!("unknown suite `{s}`")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(format!("expected csv or json, got `{s}`")),
        }
    }
}

/// Census family regressed by the `exponents` suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExponentKind {
    Thick,
    Thin,
    Late,
}

impl FromStr for ExponentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "thick" => Ok(ExponentKind::Thick),
            "thin" => Ok(ExponentKind::Thin),
            "late" => Ok(ExponentKind::Late),
            _ => Err(format!("expected thick, thin or late, got `{s}`")),
        }
    }
}

impl FromStr for Sign {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "thick" => Ok(Sign::Thick),
            "thin" => Ok(Sign::Thin),
            _ => Err(format!("expected thick or thin, got `{s}`")),
        }
    }
}

/// Field order here is the key order of the JSON config echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub suite: Suite,
    /// Torus sides (`n`).
    pub sides: Vec<usize>,
    pub theta: f64,
    /// `eta`.
    pub etas: Vec<f64>,
    pub sign: Sign,
    pub replicas: usize,
    pub seed: u64,
    /// `out`; stdout when absent.
    pub output_path: Option<PathBuf>,
    pub format: OutputFormat,
    /// Worker threads; 0 means one per core.
    pub workers: usize,
    /// Inverse-local-time level for `gff-check`.
    pub t: f64,
    /// Lab radii `r_k = r0 · rho^{−k}` for `excursions`.
    pub r0: f64,
    pub rho: f64,
    pub depth: usize,
    /// `radius` list for `green-check`.
    pub radii: Vec<f64>,
    pub kind: ExponentKind,
}

pub const KEYS: &[&str] =
    &["suite", "n", "theta", "eta", "sign", "replicas", "seed", "out", "format", "workers", "t", "r0", "rho", "depth", "radius", "kind"];

impl ExperimentConfig {
    pub fn defaults(suite: Suite) -> Self {
        ExperimentConfig {
            suite,
            sides: vec![32],
            theta: 1.0,
            etas: vec![0.5],
            sign: Sign::Thick,
            replicas: 1,
            seed: 1,
            output_path: None,
            format: OutputFormat::Csv,
            workers: 0,
            t: 20.0,
            r0: 16.0,
            rho: 2.0,
            depth: 3,
            radii: vec![4.0, 8.0, 16.0],
            kind: ExponentKind::Thick,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
                key: line.to_string(),
                message: format!("line {}: expected `key = value`", lineno + 1),
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Self::from_pairs(&pairs)
    }

    /// Builds a config from `(key, value)` pairs, as read from a file or
    /// assembled from command-line flags.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let mut map: BTreeMap<&str, &str> = BTreeMap::new();
        for (k, v) in pairs {
            if !KEYS.contains(&k.as_str()) {
                return Err(Error::ConfigParse { key: k.clone(), message: "unknown key".into() });
            }
            if map.insert(k, v).is_some() {
                return Err(Error::ConfigParse { key: k.clone(), message: "key given more than once".into() });
            }
        }
        let suite: Suite = match map.get("suite") {
            Some(v) => parse_one("suite", v)?,
            None => return Err(Error::ConfigParse { key: "suite".into(), message: "missing required key".into() }),
        };
        let mut cfg = ExperimentConfig::defaults(suite);
        for (&k, &v) in &map {
            match k {
                "suite" => {}
                "n" => cfg.sides = parse_list(k, v)?,
                "theta" => cfg.theta = parse_one(k, v)?,
                "eta" => cfg.etas = parse_list(k, v)?,
                "sign" => cfg.sign = parse_one(k, v)?,
                "replicas" => cfg.replicas = parse_one(k, v)?,
                "seed" => cfg.seed = parse_one(k, v)?,
                "out" => cfg.output_path = Some(PathBuf::from(v)),
                "format" => cfg.format = parse_one(k, v)?,
                "workers" => cfg.workers = parse_one(k, v)?,
                "t" => cfg.t = parse_one(k, v)?,
                "r0" => cfg.r0 = parse_one(k, v)?,
                "rho" => cfg.rho = parse_one(k, v)?,
                "depth" => cfg.depth = parse_one(k, v)?,
                "radius" => cfg.radii = parse_list(k, v)?,
                "kind" => cfg.kind = parse_one(k, v)?,
                _ => unreachable!("checked against KEYS"),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| Err(Error::ConfigParse { key: key.into(), message });
        if self.sides.iter().any(|&n| n < 2) {
            return bad("n", "torus sides must be >= 2".into());
        }
        if !(self.theta > 0.0) {
            return bad("theta", format!("must be positive, got {}", self.theta));
        }
        if self.etas.iter().any(|&e| !(e > 0.0)) {
            return bad("eta", "values must be positive".into());
        }
        if self.replicas == 0 {
            return bad("replicas", "must be >= 1".into());
        }
        if !(self.t > 0.0) {
            return bad("t", format!("must be positive, got {}", self.t));
        }
        if !(self.rho > 1.0) {
            return bad("rho", format!("must exceed 1, got {}", self.rho));
        }
        if self.depth < 2 {
            return bad("depth", format!("must be >= 2, got {}", self.depth));
        }
        if self.radii.iter().any(|&r| !(r > 0.0)) {
            return bad("radius", "values must be positive".into());
        }
        Ok(())
    }
}

fn parse_one<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.trim().parse::<T>().map_err(|e| Error::ConfigParse { key: key.into(), message: format!("cannot parse `{v}`: {e}") })
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = v.split(',').map(|s| parse_one(key, s)).collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::ConfigParse { key: key.into(), message: "empty list".into() });
    }
    Ok(items)
}
