//! Flat `key = value` run configuration.

use crate::controller::Variant;
use crate::{Error, Result};
use serde::{Serialize, Serializer};
use std::path::PathBuf;
use toml::Value;

fn ser_variant<S: Serializer>(v: &Variant, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(v.name())
}

/// Resolved configuration. Serialized with the same key names as the file,
/// so every artifact can embed it verbatim.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub nu: f64,
    pub a: f64,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "M_x")]
    pub m_x: u32,
    pub alpha0: f64,
    #[serde(serialize_with = "ser_variant")]
    pub variant: Variant,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub dt: f64,
    #[serde(rename = "J")]
    pub j: usize,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Neutral-eigenvalue margin.
    pub margin: f64,
    pub cluster_tol: f64,
    /// Weight of the stable part of the random initial state.
    pub stable_weight: f64,
    /// Stable modes carried by the Galerkin surrogate.
    pub galerkin_stable: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            nu: 0.002,
            a: 1.0,
            m: 64,
            m_x: 3,
            alpha0: 1.0,
            variant: Variant::Complex,
            t_end: 20.0,
            dt: 0.01,
            j: 40,
            seed: 0,
            output_dir: None,
            margin: 1e-8,
            cluster_tol: 1e-6,
            stable_weight: 0.3,
            galerkin_stable: 16,
        }
    }
}

const KEYS: [&str; 15] = [
    "nu",
    "a",
    "M",
    "M_x",
    "alpha0",
    "variant",
    "T",
    "dt",
    "J",
    "seed",
    "output_dir",
    "margin",
    "cluster_tol",
    "stable_weight",
    "galerkin_stable",
];

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, col)
}

/// Position of `key` at the start of a line (first occurrence).
fn key_position(text: &str, key: &str) -> (usize, usize) {
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim_start();
        let indent = line.len() - trimmed.len();
        let name = trimmed.split(['=', ' ', '\t']).next().unwrap_or("");
        if name.trim_matches('"') == key {
            return (i + 1, indent + 1);
        }
    }
    (0, 0)
}

fn config_err(text: &str, key: &str, message: String) -> Error {
    let (line, column) = key_position(text, key);
    Error::Config { line, column, message }
}

fn get_float(text: &str, key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(config_err(text, key, format!("`{key}` expects a number, got {}", other.type_str()))),
    }
}

fn get_int(text: &str, key: &str, v: &Value) -> Result<i64> {
    match v {
        Value::Integer(i) => Ok(*i),
        other => Err(config_err(text, key, format!("`{key}` expects an integer, got {}", other.type_str()))),
    }
}

fn get_str<'a>(text: &str, key: &str, v: &'a Value) -> Result<&'a str> {
    match v {
        Value::String(s) => Ok(s),
        other => Err(config_err(text, key, format!("`{key}` expects a string, got {}", other.type_str()))),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let table: toml::Table = toml::from_str(text).map_err(|e| {
        let span = e.span().unwrap_or(0..0);
        let (line, column) = line_col(text, span.start);
        let mut message = e.message().trim().to_string();
        let near = text.get(span).unwrap_or("").trim();
        if !near.is_empty() && !message.contains(near) {
            message = format!("{message} `{near}`");
        }
        Error::Config { line, column, message }
    })?;
    let mut cfg = RunConfig::default();
    for (key, value) in &table {
        let k = key.as_str();
        match k {
            "nu" => cfg.nu = get_float(text, k, value)?,
            "a" => cfg.a = get_float(text, k, value)?,
            "alpha0" => cfg.alpha0 = get_float(text, k, value)?,
            "T" => cfg.t_end = get_float(text, k, value)?,
            "dt" => cfg.dt = get_float(text, k, value)?,
            "margin" => cfg.margin = get_float(text, k, value)?,
            "cluster_tol" => cfg.cluster_tol = get_float(text, k, value)?,
            "stable_weight" => cfg.stable_weight = get_float(text, k, value)?,
            "M" | "M_x" | "J" | "seed" | "galerkin_stable" => {
                let i = get_int(text, k, value)?;
                if i < 0 {
                    return Err(config_err(text, k, format!("`{k}` must be non-negative, got {i}")));
                }
                match k {
                    "M" => cfg.m = i as usize,
                    "M_x" => cfg.m_x = u32::try_from(i).map_err(|_| config_err(text, k, format!("`M_x` = {i} is too large")))?,
                    "J" => cfg.j = i as usize,
                    "seed" => cfg.seed = i as u64,
                    _ => cfg.galerkin_stable = i as usize,
                }
            }
            "variant" => {
                let s = get_str(text, k, value)?;
                cfg.variant = Variant::parse(s).ok_or_else(|| {
                    config_err(
                        text,
                        k,
                        format!("unknown variant `{s}` (expected complex, real, restricted-y0 or restricted-y1)"),
                    )
                })?;
            }
            "output_dir" => cfg.output_dir = Some(PathBuf::from(get_str(text, k, value)?)),
            _ => {
                return Err(config_err(
                    text,
                    k,
                    format!("unknown key `{k}` (known keys: {})", KEYS.join(", ")),
                ))
            }
        }
    }
    validate(&cfg).map_err(|(key, msg)| config_err(text, key, msg))?;
    Ok(cfg)
}

/// Constraint checks; returns the offending key.
pub fn validate(cfg: &RunConfig) -> std::result::Result<(), (&'static str, String)> {
    let positive = [
        ("nu", cfg.nu),
        ("T", cfg.t_end),
        ("dt", cfg.dt),
        ("margin", cfg.margin),
        ("cluster_tol", cfg.cluster_tol),
    ];
    for (k, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            return Err((k, format!("`{k}` must be positive and finite, got {v}")));
        }
    }
    if !(cfg.a >= 0.0 && cfg.a.is_finite()) {
        return Err(("a", format!("`a` must be non-negative and finite, got {}", cfg.a)));
    }
    if !cfg.alpha0.is_finite() {
        return Err(("alpha0", "`alpha0` must be finite".into()));
    }
    if !(cfg.stable_weight >= 0.0 && cfg.stable_weight.is_finite()) {
        return Err(("stable_weight", "`stable_weight` must be non-negative".into()));
    }
    if cfg.m < 8 {
        return Err(("M", format!("`M` must be at least 8, got {}", cfg.m)));
    }
    if cfg.m % 2 != 0 {
        return Err(("M", format!("`M` must be even, got {}", cfg.m)));
    }
    if cfg.m_x < 1 {
        return Err(("M_x", "`M_x` must be at least 1".into()));
    }
    if cfg.j < 1 {
        return Err(("J", "`J` must be at least 1".into()));
    }
    if cfg.dt > cfg.t_end {
        return Err(("dt", format!("`dt` = {} exceeds `T` = {}", cfg.dt, cfg.t_end)));
    }
    Ok(())
}
