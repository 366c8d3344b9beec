//! Flat `key = value` configuration files for domain specs and run options.
//!
//! Recognized keys: `shape` (ball | ellipsoid | superellipsoid), `radius`,
//! `semi_axes` (space- or comma-separated), `exponent`, `dimension`,
//! `box_halfwidth`, `grid_points`, `boundary_points`. Lines starting with
//! `#` are comments. Unknown keys are rejected.

use std::collections::BTreeMap;

use borneq_core::{DomainSpec, Model};

use crate::{CliError, CliResult};

#[derive(Clone, Debug)]
pub struct DomainConfig {
    pub domain: DomainSpec,
    pub box_halfwidth: f64,
    pub grid_points: usize,
    pub boundary_points: usize,
    /// Raw key/value pairs, echoed into the run manifest.
    pub raw: BTreeMap<String, String>,
}

pub fn parse_domain_config(text: &str) -> CliResult<DomainConfig> {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Validation(format!(
                "config line {} is not `key = value`: {line:?}",
                lineno + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    const KNOWN: &[&str] = &[
        "shape",
        "radius",
        "semi_axes",
        "exponent",
        "dimension",
        "box_halfwidth",
        "grid_points",
        "boundary_points",
    ];
    for key in map.keys() {
        if !KNOWN.contains(&key.as_str()) {
            return Err(CliError::Validation(format!("unknown config key {key:?}")));
        }
    }
    let get = |key: &str| -> CliResult<&str> {
        map.get(key)
            .map(String::as_str)
            .ok_or_else(|| CliError::Validation(format!("missing config key {key:?}")))
    };
    let parse_f64 = |key: &str, v: &str| -> CliResult<f64> {
        v.parse::<f64>()
            .map_err(|_| CliError::Validation(format!("bad number for {key}: {v:?}")))
    };
    let parse_usize = |key: &str, v: &str| -> CliResult<usize> {
        v.parse::<usize>()
            .map_err(|_| CliError::Validation(format!("bad integer for {key}: {v:?}")))
    };

    let shape = get("shape")?;
    let dimension = match map.get("dimension") {
        Some(v) => parse_usize("dimension", v)?,
        None => 3,
    };
    let domain = match shape {
        "ball" => {
            let radius = parse_f64("radius", get("radius")?)?;
            DomainSpec {
                shape: borneq_core::Shape::Ball { radius },
                dimension,
                center: [0.0; 3],
            }
        }
        "ellipsoid" | "superellipsoid" => {
            let axes_raw = get("semi_axes")?;
            let axes: Vec<f64> = axes_raw
                .split([' ', ','])
                .filter(|s| !s.is_empty())
                .map(|s| parse_f64("semi_axes", s))
                .collect::<CliResult<_>>()?;
            if axes.len() != 3 {
                return Err(CliError::Validation(format!(
                    "semi_axes needs 3 values, got {}",
                    axes.len()
                )));
            }
            let semi_axes = [axes[0], axes[1], axes[2]];
            if shape == "ellipsoid" {
                DomainSpec {
                    shape: borneq_core::Shape::Ellipsoid { semi_axes },
                    dimension,
                    center: [0.0; 3],
                }
            } else {
                let exponent = parse_f64("exponent", get("exponent")?)?;
                DomainSpec {
                    shape: borneq_core::Shape::Superellipsoid {
                        semi_axes,
                        exponent,
                    },
                    dimension,
                    center: [0.0; 3],
                }
            }
        }
        other => {
            return Err(CliError::Validation(format!("unknown shape {other:?}")));
        }
    };
    domain.validate().map_err(CliError::from)?;

    let box_halfwidth = parse_f64("box_halfwidth", get("box_halfwidth")?)?;
    let grid_points = parse_usize("grid_points", get("grid_points")?)?;
    let boundary_points = parse_usize("boundary_points", get("boundary_points")?)?;
    Ok(DomainConfig {
        domain,
        box_halfwidth,
        grid_points,
        boundary_points,
        raw: map,
    })
}

/// Model flag: `bi` or `n=<order>`.
pub fn parse_model(s: &str) -> CliResult<Model> {
    if s == "bi" {
        return Ok(Model::BornInfeld);
    }
    if let Some(rest) = s.strip_prefix("n=") {
        let n: usize = rest
            .parse()
            .map_err(|_| CliError::Validation(format!("bad truncation order {rest:?}")))?;
        return Ok(Model::Truncated(n));
    }
    Err(CliError::Validation(format!(
        "unknown model {s:?} (expected `bi` or `n=<order>`)"
    )))
}
