//! Config files and CSV field/diagnostics I/O.
//!
//! Field CSV: a header `# nx ny left right down up precision` holding the
//! full extent, the halo and the precision, then one grid row per line from
//! `y = 0` upward, comma separated.

use std::fmt::Write as _;

use thiserror::Error;

use super::{Boundary, DiagRow, SWConfig};
use crate::refinterp::{Field, Precision};
use crate::region::{Extent, Halo};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {message}")]
    Value { line: usize, key: String, message: String },
    #[error("field CSV: {0}")]
    Csv(String),
}

/// Parses an `NXxNY` extent such as `16x8`.
pub fn parse_extent(s: &str) -> Result<Extent, String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected NXxNY, got `{s}`"))?;
    let nx: usize = a.trim().parse().map_err(|_| format!("bad width in `{s}`"))?;
    let ny: usize = b.trim().parse().map_err(|_| format!("bad height in `{s}`"))?;
    if nx == 0 || ny == 0 {
        return Err(format!("extent `{s}` must be at least 1x1"));
    }
    Ok(Extent::new(nx, ny))
}

/// Reads a flat `key = value` config; `#` starts a comment. Keys left out
/// keep their defaults.
pub fn parse_config(text: &str) -> Result<SWConfig, ConfigError> {
    let mut cfg = SWConfig::default();
    let mut center_x = None;
    let mut center_y = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |message: String| ConfigError::Value {
            line,
            key: key.to_string(),
            message,
        };
        let num = |v: &str| v.parse::<f64>().map_err(|e| bad(e.to_string()));
        let int = |v: &str| v.parse::<usize>().map_err(|e| bad(e.to_string()));
        match key {
            "nx" => cfg.interior.nx = int(value)?,
            "ny" => cfg.interior.ny = int(value)?,
            "dx" => cfg.dx = num(value)?,
            "dy" => cfg.dy = num(value)?,
            "g" => cfg.g = num(value)?,
            "cfl_factor" => cfg.cfl_factor = num(value)?,
            "steps" => cfg.steps = int(value)?,
            "boundary" => cfg.boundary = value.parse::<Boundary>().map_err(bad)?,
            "center_x" => center_x = Some(num(value)?),
            "center_y" => center_y = Some(num(value)?),
            "amplitude" => cfg.amplitude = num(value)?,
            "width" => cfg.width = num(value)?,
            "base" => cfg.base = num(value)?,
            "precision" => cfg.precision = value.parse::<Precision>().map_err(bad)?,
            "group" => cfg.group = parse_extent(value).map_err(bad)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
    }
    // an unset center follows the domain midpoint
    cfg.center = (
        center_x.unwrap_or(cfg.interior.nx as f64 * cfg.dx / 2.0),
        center_y.unwrap_or(cfg.interior.ny as f64 * cfg.dy / 2.0),
    );
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldCsv {
    pub field: Field,
    pub halo: Halo,
}

pub fn write_field_csv(f: &Field, halo: Halo) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# {} {} {} {} {} {} {}",
        f.full.nx, f.full.ny, halo.left, halo.right, halo.down, halo.up, f.precision
    );
    for y in 0..f.full.ny {
        let row: Vec<String> = (0..f.full.nx).map(|x| format!("{:?}", f.get(x, y))).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn read_field_csv(text: &str) -> Result<FieldCsv, ConfigError> {
    let err = |m: String| ConfigError::Csv(m);
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| err("empty file".into()))?;
    let parts: Vec<&str> = header
        .strip_prefix('#')
        .ok_or_else(|| err("missing `#` header".into()))?
        .split_whitespace()
        .collect();
    if parts.len() != 7 {
        return Err(err(format!("header needs 7 fields, found {}", parts.len())));
    }
    let n = |i: usize| -> Result<usize, ConfigError> {
        parts[i].parse().map_err(|_| err(format!("bad header field `{}`", parts[i])))
    };
    let full = Extent::new(n(0)?, n(1)?);
    let halo = Halo::new(n(2)?, n(3)?, n(4)?, n(5)?);
    let precision: Precision = parts[6].parse().map_err(err)?;

    let mut data = Vec::with_capacity(full.cells());
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| err(format!("row {}: {e}", i + 1)))?;
        if row.len() != full.nx {
            return Err(err(format!("row {} has {} values, expected {}", i + 1, row.len(), full.nx)));
        }
        data.extend(row);
        rows += 1;
    }
    if rows != full.ny {
        return Err(err(format!("found {rows} rows, expected {}", full.ny)));
    }
    Ok(FieldCsv {
        field: Field {
            full,
            data,
            precision,
        },
        halo,
    })
}

pub fn write_diagnostics_csv(rows: &[DiagRow]) -> String {
    let mut s = String::from("step,t,dt,mass,max_hu,max_hv\n");
    for r in rows {
        let _ = writeln!(s, "{},{:?},{:?},{:?},{:?},{:?}", r.step, r.t, r.dt, r.mass, r.max_hu, r.max_hv);
    }
    s
}
