//! Flat dotted-key configuration shared by TOML and JSON files.

use std::collections::BTreeMap;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{InteractionKernel, KernelShape, TrapKind, TrapSpec};

/// Dotted keys mapped to scalar or list values.
pub type FlatConfig = BTreeMap<String, Value>;

pub const MODEL_KEYS: [&str; 9] =
    ["trap.kind", "trap.s", "trap.L", "trap.d", "kernel.shape", "kernel.w0", "kernel.Rw", "grid.n", "grid.halfwidth"];

pub fn parse_toml(text: &str) -> Result<FlatConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
    let value = serde_json::to_value(table).map_err(|e| Error::Config(e.to_string()))?;
    flatten(value)
}

pub fn parse_json(text: &str) -> Result<FlatConfig> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    flatten(value)
}

/// Parse by extension: `.json` as JSON, anything else as TOML.
pub fn parse_file(path: &std::path::Path) -> Result<FlatConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => parse_json(&text),
        _ => parse_toml(&text),
    }
}

fn flatten(value: Value) -> Result<FlatConfig> {
    let Value::Object(map) = value else {
        return Err(Error::Config("top level must be a table".into()));
    };
    let mut out = FlatConfig::new();
    let mut stack: Vec<(String, Value)> = map.into_iter().collect();
    while let Some((key, v)) = stack.pop() {
        match v {
            Value::Object(inner) => stack.extend(inner.into_iter().map(|(k, v)| (format!("{key}.{k}"), v))),
            other => {
                out.insert(key, other);
            }
        }
    }
    Ok(out)
}

pub fn get_f64(cfg: &FlatConfig, key: &str) -> Result<Option<f64>> {
    match cfg.get(key) {
        None => Ok(None),
        Some(v) => v.as_f64().map(Some).ok_or_else(|| Error::invalid(key, format!("expected a number, got {v}"))),
    }
}

pub fn get_usize(cfg: &FlatConfig, key: &str) -> Result<Option<usize>> {
    match cfg.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_u64()
            .and_then(|u| usize::try_from(u).ok())
            .map(Some)
            .ok_or_else(|| Error::invalid(key, format!("expected a nonnegative integer, got {v}"))),
    }
}

pub fn get_str<'a>(cfg: &'a FlatConfig, key: &str) -> Result<Option<&'a str>> {
    match cfg.get(key) {
        None => Ok(None),
        Some(v) => v.as_str().map(Some).ok_or_else(|| Error::invalid(key, format!("expected a string, got {v}"))),
    }
}

/// Trap, kernel and grid settings read from the model keys.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub trap: TrapSpec,
    pub kernel: InteractionKernel,
    pub grid_n: Option<usize>,
    pub half_width: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { trap: TrapSpec::single(2.0), kernel: InteractionKernel::default(), grid_n: None, half_width: None }
    }
}

impl ModelConfig {
    /// Read the model keys over the defaults; other keys are left to the caller.
    pub fn from_flat(cfg: &FlatConfig) -> Result<Self> {
        let mut out = Self::default();
        if let Some(kind) = get_str(cfg, "trap.kind")? {
            out.trap.kind = match kind.to_ascii_lowercase().as_str() {
                "single" | "singlewell" | "single_well" => TrapKind::SingleWell,
                "double" | "doublewell" | "double_well" => TrapKind::DoubleWell,
                other => return Err(Error::invalid("trap.kind", format!("unknown trap `{other}`"))),
            };
        }
        if let Some(s) = get_f64(cfg, "trap.s")? {
            out.trap.s = s;
        }
        if let Some(l) = get_f64(cfg, "trap.L")? {
            out.trap.separation_l = l;
        }
        if let Some(d) = get_usize(cfg, "trap.d")? {
            out.trap.dimension_d = u8::try_from(d).map_err(|_| Error::invalid("trap.d", format!("out of range: {d}")))?;
        }
        if let Some(shape) = get_str(cfg, "kernel.shape")? {
            out.kernel.shape = match shape.to_ascii_lowercase().as_str() {
                "triangle" => KernelShape::Triangle,
                "truncated_gaussian" | "truncatedgaussian" | "gaussian" => KernelShape::TruncatedGaussian,
                other => return Err(Error::invalid("kernel.shape", format!("unknown kernel `{other}`"))),
            };
        }
        if let Some(w0) = get_f64(cfg, "kernel.w0")? {
            out.kernel.w0 = w0;
        }
        if let Some(rw) = get_f64(cfg, "kernel.Rw")? {
            out.kernel.range = rw;
        }
        out.grid_n = get_usize(cfg, "grid.n")?;
        out.half_width = get_f64(cfg, "grid.halfwidth")?;
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.trap.validate()?;
        self.kernel.validate()?;
        if let Some(n) = self.grid_n {
            if n < 16 {
                return Err(Error::invalid("grid.n", format!("need at least 16 points, got {n}")));
            }
        }
        if let Some(hw) = self.half_width {
            if !(hw.is_finite() && hw > 0.0) {
                return Err(Error::invalid("grid.halfwidth", format!("must be positive, got {hw}")));
            }
        }
        Ok(())
    }

    pub fn to_flat(&self) -> FlatConfig {
        let mut out = FlatConfig::new();
        let kind = match self.trap.kind {
            TrapKind::SingleWell => "single",
            TrapKind::DoubleWell => "double",
        };
        let shape = match self.kernel.shape {
            KernelShape::Triangle => "triangle",
            KernelShape::TruncatedGaussian => "truncated_gaussian",
        };
        out.insert("trap.kind".into(), Value::from(kind));
        out.insert("trap.s".into(), Value::from(self.trap.s));
        out.insert("trap.L".into(), Value::from(self.trap.separation_l));
        out.insert("trap.d".into(), Value::from(self.trap.dimension_d));
        out.insert("kernel.shape".into(), Value::from(shape));
        out.insert("kernel.w0".into(), Value::from(self.kernel.w0));
        out.insert("kernel.Rw".into(), Value::from(self.kernel.range));
        if let Some(n) = self.grid_n {
            out.insert("grid.n".into(), Value::from(n));
        }
        if let Some(hw) = self.half_width {
            out.insert("grid.halfwidth".into(), Value::from(hw));
        }
        out
    }

    /// Serialize as nested TOML tables.
    pub fn to_toml(&self) -> String {
        let mut root = toml::Table::new();
        for (key, value) in self.to_flat() {
            let (section, leaf) = key.split_once('.').expect("model keys are dotted");
            let entry = root.entry(section).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let v = match value {
                Value::String(s) => toml::Value::String(s),
                Value::Number(n) if n.is_u64() => toml::Value::Integer(n.as_u64().unwrap_or_default() as i64),
                Value::Number(n) => toml::Value::Float(n.as_f64().unwrap_or_default()),
                other => toml::Value::String(other.to_string()),
            };
            if let toml::Value::Table(t) = entry {
                t.insert(leaf.to_string(), v);
            }
        }
        toml::to_string(&root).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_agree() {
        let t = parse_toml("[trap]\nkind = \"double\"\ns = 4.0\nL = 6.0\n[kernel]\nRw = 0.25\n[grid]\nn = 2048\n").unwrap();
        let j = parse_json(r#"{"trap": {"kind": "double", "s": 4.0, "L": 6.0}, "kernel": {"Rw": 0.25}, "grid": {"n": 2048}}"#)
            .unwrap();
        let a = ModelConfig::from_flat(&t).unwrap();
        let b = ModelConfig::from_flat(&j).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trap.kind, TrapKind::DoubleWell);
        assert_eq!(a.grid_n, Some(2048));
    }

    #[test]
    fn bad_values_name_the_key() {
        let cfg = parse_toml("[trap]\ns = 1.5\n").unwrap();
        match ModelConfig::from_flat(&cfg) {
            Err(Error::InvalidParameter { key, .. }) => assert_eq!(key, "trap.s"),
            other => panic!("{other:?}"),
        }
        let cfg = parse_toml("[kernel]\nshape = \"box\"\n").unwrap();
        assert!(matches!(ModelConfig::from_flat(&cfg), Err(Error::InvalidParameter { key, .. }) if key == "kernel.shape"));
    }
}
