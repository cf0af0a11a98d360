//! Sweeps over list-valued keys. Rows come out in the order the points are
//! enumerated, whatever order they finish in.

use dw_core::config::FlatConfig;
use dw_core::{Error, Exec, Result};
use serde_json::Value;

use crate::commands::Target;
use crate::output::{Cell, Report, Table, TableJson};

/// Axis order, outermost first.
pub const SWEEP_ORDER: [&str; 5] = ["L", "T", "lambda", "sigma", "n"];

/// Keys whose values are lists on their own, not sweep axes.
const LIST_KEYS: [&str; 1] = ["perturb"];

fn cell(v: &Value) -> Cell {
    match v {
        Value::Number(n) => n.as_i64().map_or_else(|| Cell::Num(n.as_f64().unwrap_or(f64::NAN)), Cell::Int),
        Value::String(s) => Cell::Str(s.clone()),
        Value::Bool(b) => Cell::Bool(*b),
        _ => Cell::Str(v.to_string()),
    }
}

fn points(axes: &[(&str, Vec<Value>)], zip: bool) -> Result<Vec<Vec<Value>>> {
    if zip {
        let len = axes.first().map_or(1, |a| a.1.len());
        if let Some((key, _)) = axes.iter().find(|a| a.1.len() != len) {
            return Err(Error::InvalidParameter { key: (*key).into(), reason: "zipped lists differ in length".into() });
        }
        return Ok((0..len).map(|i| axes.iter().map(|a| a.1[i].clone()).collect()).collect());
    }
    Ok(axes.iter().fold(vec![Vec::new()], |acc, (_, values)| {
        acc.iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect()
    }))
}

pub fn run_sweep(target: Target, cfg: &FlatConfig, zip: bool, exec: Exec) -> Result<Report> {
    if target.record_columns().is_empty() {
        return Err(Error::InvalidParameter { key: "target".into(), reason: format!("`{}` cannot be swept", target.name()) });
    }
    for (key, v) in cfg {
        if v.is_array() && !target.sweep_keys().contains(&key.as_str()) && !LIST_KEYS.contains(&key.as_str()) {
            return Err(Error::InvalidParameter {
                key: key.clone(),
                reason: format!("not a sweep key for `{}`", target.name()),
            });
        }
    }
    let axes: Vec<(&str, Vec<Value>)> = SWEEP_ORDER
        .iter()
        .filter_map(|&k| match cfg.get(k) {
            Some(Value::Array(items)) => Some((k, items.clone())),
            _ => None,
        })
        .collect();
    let pts = points(&axes, zip)?;
    let mut base = cfg.clone();
    axes.iter().for_each(|(k, _)| {
        base.remove(*k);
    });

    let records: Vec<Result<Report>> = exec.map_slice(&pts, |pt| {
        let mut c = base.clone();
        for ((k, _), v) in axes.iter().zip(pt) {
            c.insert((*k).to_string(), v.clone());
        }
        target.run(&c, exec)
    });

    let record_cols: Vec<&str> =
        target.record_columns().iter().copied().filter(|c| !axes.iter().any(|(k, _)| k == c)).collect();
    let mut table = Table::new(axes.iter().map(|(k, _)| *k).chain(record_cols.iter().copied()).chain(["status"]));
    for (pt, rec) in pts.iter().zip(&records) {
        let mut row: Vec<Cell> = pt.iter().map(cell).collect();
        match rec {
            Ok(r) => {
                row.extend(record_cols.iter().map(|c| r.lookup(c).cloned().unwrap_or(Cell::Null)));
                row.push(Cell::from("ok"));
            }
            Err(e) => {
                log::warn!("sweep point {pt:?}: {e}");
                row.extend(record_cols.iter().map(|_| Cell::Null));
                row.push(Cell::Str(e.to_string()));
            }
        }
        table.rows.push(row);
    }
    Ok(Report::new("sweep")
        .field("target", target.name())
        .field("zip", zip)
        .field("points", pts.len())
        .field("failed", records.iter().filter(|r| r.is_err()).count())
        .with_table(table, TableJson::Rows))
}
