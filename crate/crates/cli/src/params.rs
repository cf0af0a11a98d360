//! Flat parameter maps: config file first, command-line flags on top.

use std::path::Path;

use dw_core::config::{self, FlatConfig};
use dw_core::hartree::SolverOptions;
use dw_core::model::{Grid1D, InteractionKernel, TrapSpec};
use dw_core::{Error, TrapKind};
use serde_json::Value;

use crate::CliError;

/// Keys read by the trap, kernel, grid and solver setup.
pub const MODEL_KEYS: &[&str] =
    &["trap.s", "trap.d", "kernel.shape", "kernel.w0", "kernel.Rw", "grid.n", "grid.halfwidth", "tol", "max_iter"];

/// Turn a flag value into JSON: comma lists become arrays, numbers become numbers.
pub fn parse_raw(raw: &str) -> Value {
    let raw = raw.trim();
    if raw.is_empty() {
        return Value::Array(Vec::new());
    }
    if raw.contains(',') {
        return Value::Array(raw.split(',').map(|p| scalar(p.trim())).collect());
    }
    scalar(raw)
}

fn scalar(raw: &str) -> Value {
    if let Ok(i) = raw.parse::<i64>() {
        return Value::from(i);
    }
    match raw.parse::<f64>() {
        Ok(f) if f.is_finite() => serde_json::Number::from_f64(f).map_or_else(|| Value::from(raw), Value::Number),
        _ => Value::from(raw),
    }
}

/// Merge the config file and the flags, then reject keys the command does not read.
pub fn merge(
    command: &str,
    config_path: Option<&Path>,
    flags: &[(&'static str, Option<&String>)],
    allowed: &[&str],
) -> Result<FlatConfig, CliError> {
    let mut cfg = match config_path {
        Some(p) => config::parse_file(p)?,
        None => FlatConfig::new(),
    };
    for (key, value) in flags {
        if let Some(raw) = value {
            cfg.insert((*key).to_string(), parse_raw(raw));
        }
    }
    if let Some(key) = cfg.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(CliError::UnknownKey { key: key.clone(), command: command.to_string() });
    }
    Ok(cfg)
}

/// Typed reads over a merged map, with defaults.
pub struct Params<'a>(pub &'a FlatConfig);

impl Params<'_> {
    pub fn f64_or(&self, key: &str, default: f64) -> dw_core::Result<f64> {
        Ok(config::get_f64(self.0, key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> dw_core::Result<usize> {
        Ok(config::get_usize(self.0, key)?.unwrap_or(default))
    }

    pub fn str_or<'b>(&'b self, key: &str, default: &'b str) -> dw_core::Result<&'b str> {
        Ok(config::get_str(self.0, key)?.unwrap_or(default))
    }

    /// A scalar or a list of numbers.
    pub fn f64_list(&self, key: &str, default: &[f64]) -> dw_core::Result<Vec<f64>> {
        match self.0.get(key) {
            None => Ok(default.to_vec()),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| v.as_f64().ok_or_else(|| Error::InvalidParameter { key: key.into(), reason: format!("expected numbers, got {v}") }))
                .collect(),
            Some(_) => Ok(vec![self.f64_or(key, 0.0)?]),
        }
    }

    pub fn solver(&self) -> dw_core::Result<SolverOptions> {
        let base = SolverOptions::default();
        let opts = SolverOptions {
            tol: self.f64_or("tol", base.tol)?,
            max_iter: self.usize_or("max_iter", base.max_iter)?,
            check_box: true,
        };
        opts.validate()?;
        Ok(opts)
    }

    /// Trap, kernel and grid settings; `kind` and `l` come from the command.
    pub fn model(&self, kind: TrapKind, l: f64) -> dw_core::Result<config::ModelConfig> {
        let mut flat: FlatConfig =
            self.0.iter().filter(|(k, _)| config::MODEL_KEYS.contains(&k.as_str())).map(|(k, v)| (k.clone(), v.clone())).collect();
        flat.insert("trap.kind".into(), Value::from(if kind == TrapKind::DoubleWell { "double" } else { "single" }));
        flat.insert("trap.L".into(), serde_json::Number::from_f64(l).map_or(Value::Null, Value::Number));
        config::ModelConfig::from_flat(&flat)
    }
}

/// Grid with `n` points and the given or default half-width.
pub fn grid_for(model: &config::ModelConfig, trap: &TrapSpec, kernel: &InteractionKernel, lambda: f64, default_n: usize) -> dw_core::Result<Grid1D> {
    let hw = model.half_width.unwrap_or_else(|| dw_core::hartree::default_half_width(trap, kernel, lambda));
    Grid1D::new(model.grid_n.unwrap_or(default_n), hw)
}
