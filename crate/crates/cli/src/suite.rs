//! Batch runs driven by a TOML manifest.
//!
//! ```toml
//! methods = ["ras", "oras_classical"]   # optional: one row per method per experiment
//!
//! [defaults]
//! pde = "helmholtz"
//! ratio = 0.015
//!
//! [[experiment]]
//! generate = 90
//! mesh_seed = 1
//! ```
//!
//! Keys in an `[[experiment]]` table override `[defaults]`. Relative paths are
//! resolved against the manifest's directory.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;
use toml::{Table, Value};

use crate::config::{ExperimentConfig, Method};
use crate::error::{CliError, CliResult};
use crate::experiment::{run_experiment, Summary};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    #[serde(default)]
    methods: Vec<Method>,
    #[serde(default)]
    defaults: Table,
    #[serde(default)]
    experiment: Vec<Table>,
}

/// Expands a manifest into experiment configs, in manifest order.
pub fn parse_manifest(text: &str, base: &Path) -> CliResult<Vec<ExperimentConfig>> {
    let manifest: Manifest = toml::from_str(text)?;
    if manifest.experiment.is_empty() {
        return Err(CliError::Config("manifest has no [[experiment]] entries".into()));
    }
    let mut out = Vec::new();
    for entry in &manifest.experiment {
        let mut merged = manifest.defaults.clone();
        merged.extend(entry.iter().map(|(k, v)| (k.clone(), v.clone())));
        let variants: Vec<Table> = if manifest.methods.is_empty() || entry.contains_key("method") {
            vec![merged]
        } else {
            manifest
                .methods
                .iter()
                .map(|m| {
                    let mut t = merged.clone();
                    t.insert("method".into(), Value::String(m.label().into()));
                    t
                })
                .collect()
        };
        for table in variants {
            let mut cfg: ExperimentConfig = Value::Table(table).try_into()?;
            cfg.resolve_paths(base);
            out.push(cfg);
        }
    }
    Ok(out)
}

pub fn load_manifest(path: &Path) -> CliResult<Vec<ExperimentConfig>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}

#[derive(Debug, Clone)]
pub struct SuiteRow {
    pub name: String,
    pub method: String,
    pub result: Result<Summary, String>,
}

/// Runs every config, in parallel, keeping manifest order. A failing row
/// records its error and does not stop the others.
pub fn run_suite(configs: &[ExperimentConfig]) -> Vec<SuiteRow> {
    configs
        .par_iter()
        .map(|cfg| SuiteRow {
            name: cfg.label(),
            method: cfg.method.label().into(),
            result: run_experiment(cfg).map(|o| o.summary).map_err(|e| e.to_string()),
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const SUITE_HEADER: &str = "name,method,n,subdomains,status,fgmres_iterations,fgmres_converged,stationary_reduction_10,frobenius,stochastic_loss,radius_estimate,error";

pub fn suite_csv(rows: &[SuiteRow]) -> String {
    let mut s = String::from(SUITE_HEADER);
    s.push('\n');
    for row in rows {
        match &row.result {
            Ok(m) => writeln!(
                s,
                "{},{},{},{},ok,{},{},{},{},{},{},",
                quote(&row.name),
                row.method,
                m.n,
                m.subdomains,
                m.fgmres_iterations,
                m.fgmres_converged,
                m.stationary_reduction_10,
                opt(m.frobenius),
                m.stochastic_loss,
                m.radius_estimate
            ),
            Err(e) => writeln!(s, "{},{},,,failed,,,,,,,{}", quote(&row.name), row.method, quote(e)),
        }
        .unwrap();
    }
    s
}
