//! Driver for reproducible gluing experiments: configuration, command
//! pipelines, sweeps and result files.

pub mod config;
pub mod error;
pub mod pipeline;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use gluing_core::{fit_slope, SlopeFit};

pub use config::{Command, ExperimentConfig};
pub use error::CliError;
pub use pipeline::{Outcome, Table};

use pipeline::fmt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub command: Command,
    /// The configuration as run, without the output directory.
    pub config: ExperimentConfig,
    /// SHA-256 of the JSON form of `config`.
    pub config_hash: String,
    pub outputs: BTreeMap<String, f64>,
    /// Log-log slopes of sweep outputs against the swept axis.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub slopes: BTreeMap<String, SlopeFit>,
    /// File names relative to the output directory.
    pub artifacts: Vec<String>,
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

/// One point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SweepKey {
    pub eps: f64,
    pub h_t: Option<f64>,
    pub r: f64,
    pub q: f64,
}

fn sweep_points(cfg: &ExperimentConfig) -> Vec<SweepKey> {
    let sw = cfg.sweep.as_ref().expect("validated");
    let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
    let hs: Vec<Option<f64>> = if sw.h_t.is_empty() {
        vec![cfg.grid.h_t]
    } else {
        sw.h_t.iter().map(|h| Some(*h)).collect()
    };
    let mut pts = Vec::new();
    for &eps in &or(&sw.eps, cfg.eps) {
        for &h_t in &hs {
            for &r in &or(&sw.r, cfg.r) {
                for &q in &or(&sw.q, cfg.q) {
                    pts.push(SweepKey { eps, h_t, r, q });
                }
            }
        }
    }
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite keys"));
    pts
}

/// Runs every sweep point on the current rayon pool; the result is ordered
/// by key regardless of completion order.
pub fn run_sweep(
    cfg: &ExperimentConfig,
) -> Result<(Vec<(SweepKey, Outcome)>, Table, BTreeMap<String, SlopeFit>), CliError> {
    let sw = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("`sweep`: missing".into()))?;
    let points = sweep_points(cfg);
    let mut results: Vec<(SweepKey, Outcome)> = points
        .par_iter()
        .map(|key| {
            let mut c = cfg.clone();
            c.command = sw.target;
            c.eps = key.eps;
            c.grid.h_t = key.h_t;
            c.r = key.r;
            c.q = key.q;
            let t0 = std::time::Instant::now();
            let out = pipeline::run_single(&c, true)?;
            log::info!(
                "sweep point eps = {} h_t = {:?}: {:.2?}",
                key.eps,
                key.h_t,
                t0.elapsed()
            );
            Ok((*key, out))
        })
        .collect::<Result<_, CliError>>()?;
    results.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite keys"));

    let names: Vec<String> = results
        .first()
        .map(|(_, o)| o.metrics.iter().map(|(k, _)| k.clone()).collect())
        .unwrap_or_default();
    let mut header: Vec<String> = ["eps", "h_t", "R", "Q"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(names.iter().cloned());
    let rows = results
        .iter()
        .map(|(k, o)| {
            let mut row = vec![
                fmt(k.eps),
                k.h_t.map_or_else(String::new, fmt),
                fmt(k.r),
                fmt(k.q),
            ];
            row.extend(names.iter().map(|n| o.get(n).map_or_else(String::new, fmt)));
            row
        })
        .collect();

    // Fit against the single axis that varies.
    let axes: [(&str, Vec<f64>); 4] = [
        ("eps", results.iter().map(|(k, _)| k.eps).collect()),
        (
            "h_t",
            results
                .iter()
                .map(|(k, _)| k.h_t.unwrap_or(f64::NAN))
                .collect(),
        ),
        ("R", results.iter().map(|(k, _)| k.r).collect()),
        ("Q", results.iter().map(|(k, _)| k.q).collect()),
    ];
    let varying: Vec<_> = axes
        .iter()
        .filter(|(_, xs)| xs.iter().any(|x| x.to_bits() != xs[0].to_bits()))
        .collect();
    let mut slopes = BTreeMap::new();
    if let [(axis, xs)] = varying.as_slice() {
        for n in &names {
            let ys: Vec<f64> = results
                .iter()
                .map(|(_, o)| o.get(n).unwrap_or(f64::NAN).abs())
                .collect();
            if let Ok(fit) = fit_slope(xs, &ys) {
                slopes.insert(format!("{n}_vs_{axis}"), fit);
            }
        }
    }
    let table = Table {
        name: "sweep",
        header,
        rows,
    };
    Ok((results, table, slopes))
}

fn write_table(dir: &Path, t: &Table) -> Result<String, CliError> {
    let file = format!("{}.csv", t.name);
    let path = dir.join(&file);
    let out_err = |e: csv::Error| CliError::Output {
        path: path.clone(),
        reason: e.to_string(),
    };
    let mut w = csv::Writer::from_path(&path).map_err(out_err)?;
    w.write_record(&t.header).map_err(out_err)?;
    for row in &t.rows {
        w.write_record(row).map_err(out_err)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(file)
}

/// Validates, executes the configured pipeline and writes every table plus
/// `result.json` under `out_dir`.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ResultRecord, CliError> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut echo = cfg.clone();
    echo.out = None;

    let t0 = std::time::Instant::now();
    let (outcome, slopes) = if cfg.command == Command::Sweep {
        let (_, table, slopes) = run_sweep(cfg)?;
        let mut o = Outcome::default();
        o.tables.push(table);
        o.metrics
            .push(("points".into(), o.tables[0].rows.len() as f64));
        for (k, f) in &slopes {
            o.metrics.push((format!("slope_{k}"), f.slope));
        }
        (o, slopes)
    } else {
        (pipeline::run_single(cfg, false)?, BTreeMap::new())
    };
    log::info!("{} finished in {:.2?}", cfg.command.as_str(), t0.elapsed());

    let mut artifacts = Vec::new();
    for t in &outcome.tables {
        artifacts.push(write_table(out_dir, t)?);
    }
    artifacts.push("result.json".to_string());
    let record = ResultRecord {
        command: cfg.command,
        config_hash: config_hash(&echo),
        config: echo,
        outputs: outcome.metrics.into_iter().collect(),
        slopes,
        artifacts,
    };
    let path = out_dir.join("result.json");
    let json = serde_json::to_string_pretty(&record).map_err(|e| CliError::Output {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    fs::write(&path, json + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(record)
}
