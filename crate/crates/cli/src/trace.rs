//! Trace files: `# key = value` header lines followed by a CSV table.
//!
//! The header repeats the single-run config (every `problem.*` and `solver.*`
//! key), the resolved parameters, the constant table and the library version.
//! Feeding the `problem.*` and `solver.*` lines back through the config parser
//! reproduces the run.

use std::fmt::Write as _;

use extrastep::{EstimatorKind, Quantizer, RunTrace, TraceRow, VIProblem};

use crate::config::{config_entries, float, parse_config, Config, OutputSection, SolverSection};
use crate::error::{CliError, CliResult};
use crate::resolve::ResolvedRun;

pub const COLUMNS: [&str; 11] = [
    "k",
    "full_calls",
    "comp_calls",
    "coords",
    "bits",
    "comms",
    "local_steps",
    "dist_sq",
    "lyapunov",
    "gap_last",
    "gap_avg",
];

/// Config describing exactly one run of `base`.
pub fn single_run_config(base: &Config, run: &ResolvedRun) -> Config {
    let solver = base.solver.as_ref().map(|s| SolverSection {
        estimators: vec![run.estimator],
        seeds: vec![run.cfg.seed],
        gamma_mult: vec![run.gamma_mult],
        ..s.clone()
    });
    Config { problem: base.problem.clone(), solver, output: OutputSection::default(), verify: None, sweep: None }
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

fn kind_entries(kind: &EstimatorKind) -> Vec<(&'static str, String)> {
    match kind {
        EstimatorKind::Quant(q) | EstimatorKind::Qvr(q) => match q {
            Quantizer::Identity => vec![("resolved.quantizer", "identity".into())],
            Quantizer::RandK { keep, .. } => {
                vec![("resolved.quantizer", "randk".into()), ("resolved.keep", keep.to_string())]
            }
        },
        EstimatorKind::Is { weights } => vec![(
            "resolved.weights",
            format!("[{}]", weights.iter().map(|w| float(*w)).collect::<Vec<_>>().join(", ")),
        )],
        EstimatorKind::Local { split } => vec![("resolved.split", float(*split))],
        _ => Vec::new(),
    }
}

pub fn render_trace(config: &Config, p: &VIProblem, run: &ResolvedRun, trace: &RunTrace) -> String {
    let mut out = String::new();
    for (k, v) in config_entries(config) {
        let _ = writeln!(out, "# {k} = {v}");
    }
    let k = &run.constants;
    let inp = &run.inputs;
    let mut resolved: Vec<(&str, String)> = vec![
        ("resolved.gamma", float(run.cfg.gamma)),
        ("resolved.tau", float(run.cfg.tau)),
        ("resolved.T", float(run.cfg.lyapunov_weight)),
        ("resolved.regime", run.cfg.regime.name().into()),
        ("resolved.stride", run.stride.to_string()),
        ("resolved.dim", p.dim().to_string()),
        ("resolved.components", p.component_count().to_string()),
        ("resolved.known_solution", p.known_solution().is_some().to_string()),
    ];
    resolved.extend(kind_entries(&run.kind));
    resolved.extend([
        ("constants.L", float(inp.lipschitz)),
        ("constants.D", float(inp.bound_d)),
        ("constants.sigma", float(inp.sigma)),
        ("constants.lambda", float(inp.lambda)),
        ("constants.mu_F", float(p.constants().mu_f)),
        ("constants.mu_h", float(p.constants().mu_h)),
        ("constants.A", float(k.a)),
        ("constants.B", float(k.b)),
        ("constants.C", float(k.c)),
        ("constants.E", float(k.e)),
        ("constants.D1", float(k.d1)),
        ("constants.D2", float(k.d2)),
        ("constants.D3", float(k.d3)),
        ("constants.rho", float(k.rho)),
        ("constants.tau_star", float(k.tau_star)),
        ("version", extrastep::VERSION.into()),
    ]);
    for (key, v) in resolved {
        let _ = writeln!(out, "# {key} = {v}");
    }
    out.push_str(&COLUMNS.join(","));
    out.push('\n');
    for row in &trace.rows {
        push_row(&mut out, row);
    }
    out
}

fn push_row(out: &mut String, r: &TraceRow) {
    let c = &r.costs;
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{}",
        r.k,
        c.full_oracle_calls,
        c.component_oracle_calls,
        c.coordinates_touched,
        c.bits_sent,
        c.communications,
        c.local_steps,
        cell(r.dist_sq),
        cell(r.lyapunov),
        cell(r.gap_last),
        cell(r.gap_avg),
    );
}

/// One parsed CSV row of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub k: u64,
    /// `full_calls, comp_calls, coords, bits, comms, local_steps`.
    pub costs: [u64; 6],
    pub dist_sq: Option<f64>,
    pub lyapunov: Option<f64>,
    pub gap_last: Option<f64>,
    pub gap_avg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub header: Vec<(String, String)>,
    pub rows: Vec<TraceRecord>,
}

impl TraceFile {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// The run config recorded in the header.
    pub fn config(&self) -> CliResult<Config> {
        let mut text = String::new();
        for (k, v) in &self.header {
            if k.starts_with("problem.") || k.starts_with("solver.") {
                let _ = writeln!(text, "{k} = {v}");
            }
        }
        parse_config(&text)
    }
}

pub fn parse_trace(text: &str, path: &str) -> CliResult<TraceFile> {
    let bad = |message: String| CliError::Trace { path: path.to_string(), message };
    let mut header = Vec::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some((_, line)) = lines.peek() {
        let Some(rest) = line.strip_prefix("# ") else { break };
        let (k, v) = rest.split_once(" = ").ok_or_else(|| bad(format!("malformed header line `{line}`")))?;
        header.push((k.to_string(), v.to_string()));
        lines.next();
    }
    match lines.next() {
        Some((_, cols)) if cols == COLUMNS.join(",") => {}
        _ => return Err(bad("missing or unexpected column header".into())),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != COLUMNS.len() {
            return Err(bad(format!("line {}: expected {} cells, got {}", idx + 1, COLUMNS.len(), cells.len())));
        }
        let int = |i: usize| -> CliResult<u64> {
            cells[i].parse().map_err(|_| bad(format!("line {}: bad integer `{}`", idx + 1, cells[i])))
        };
        let opt = |i: usize| -> CliResult<Option<f64>> {
            if cells[i].is_empty() {
                return Ok(None);
            }
            match cells[i].parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                _ => Err(bad(format!("line {}: bad number `{}`", idx + 1, cells[i]))),
            }
        };
        rows.push(TraceRecord {
            k: int(0)?,
            costs: [int(1)?, int(2)?, int(3)?, int(4)?, int(5)?, int(6)?],
            dist_sq: opt(7)?,
            lyapunov: opt(8)?,
            gap_last: opt(9)?,
            gap_avg: opt(10)?,
        });
    }
    if header.iter().all(|(k, _)| k != "version") {
        return Err(bad("header lacks a version line".into()));
    }
    Ok(TraceFile { header, rows })
}
