use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use extrastep::{run_solver, VIProblem};
use rayon::prelude::*;

use crate::config::{config_entries, float, Axis, Config, EstimatorName, SolverSection};
use crate::error::{CliError, CliResult};
use crate::resolve::{build_problem, resolve_all, ResolvedRun};
use crate::trace::{parse_trace, render_trace, single_run_config, TraceFile, TraceRecord};

pub const COMPARISON_FILE: &str = "comparison.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent.display().to_string(), e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path.display().to_string(), e))
}

fn solver_section(c: &Config) -> CliResult<&SolverSection> {
    c.solver.as_ref().ok_or_else(|| CliError::config("this command needs a [solver] section (solver.* keys)"))
}

/// Problem description with its derived constants as comments; the result is
/// itself a valid config.
pub fn cmd_gen(c: &Config) -> CliResult<String> {
    let p = build_problem(&c.problem)?;
    let k = p.constants();
    let mut out = String::new();
    let _ = writeln!(out, "# dim = {}", p.dim());
    let _ = writeln!(out, "# components = {}", p.component_count());
    let _ = writeln!(out, "# constraint = {}", if p.prox().is_free() { "free" } else { "simplices" });
    let _ = writeln!(out, "# L = {}", float(k.lipschitz));
    let _ = writeln!(out, "# D = {}", float(k.bound_d));
    let _ = writeln!(out, "# mu_F = {}", float(k.mu_f));
    let _ = writeln!(out, "# mu_h = {}", float(k.mu_h));
    let _ = writeln!(out, "# known_solution = {}", p.known_solution().is_some());
    let _ = writeln!(out, "# version = {}", extrastep::VERSION);
    for (key, v) in config_entries(&Config::new(c.problem.clone())) {
        let _ = writeln!(out, "{key} = {v}");
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub path: PathBuf,
    pub rows: usize,
    pub line: String,
}

fn summary_line(run: &ResolvedRun, last: &TraceRecord) -> String {
    let opt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6e}"));
    let c = &last.costs;
    format!(
        "estimator={} seed={} gamma={:.6e} tau={} K={} gap_last={} gap_avg={} dist_sq={} \
         full_calls={} comp_calls={} coords={} bits={} comms={} local_steps={}",
        run.estimator,
        run.cfg.seed,
        run.cfg.gamma,
        float(run.cfg.tau),
        last.k,
        opt(last.gap_last),
        opt(last.gap_avg),
        opt(last.dist_sq),
        c[0],
        c[1],
        c[2],
        c[3],
        c[4],
        c[5],
    )
}

fn execute(c: &Config, p: &VIProblem, run: &ResolvedRun, path: &Path) -> CliResult<RunSummary> {
    let trace = run_solver(p, &run.kind, &run.cfg)?;
    let text = render_trace(&single_run_config(c, run), p, run, &trace);
    write_file(path, &text)?;
    let parsed = parse_trace(&text, &path.display().to_string())?;
    let last = parsed.rows.last().expect("trace has the initial row");
    Ok(RunSummary { path: path.to_path_buf(), rows: parsed.rows.len(), line: summary_line(run, last) })
}

/// A single run; lists in the solver section must have one entry.
pub fn cmd_run(c: &Config, out: Option<&Path>) -> CliResult<RunSummary> {
    let s = solver_section(c)?;
    if s.estimators.len() != 1 || s.seeds.len() != 1 || s.gamma_mult.len() != 1 {
        return Err(CliError::config("`run` takes one estimator, seed and gamma_mult; use `sweep` for lists"));
    }
    let path = out
        .map(Path::to_path_buf)
        .or_else(|| c.output.trace.as_ref().map(PathBuf::from))
        .ok_or_else(|| CliError::config("no trace path: pass --out or set output.trace"))?;
    let p = build_problem(&c.problem)?;
    let run = resolve_all(&p, s)?.remove(0);
    execute(c, &p, &run, &path)
}

pub fn trace_file_name(e: EstimatorName, seed: u64, gamma_mult: f64) -> String {
    format!("{e}_s{seed}_g{}.csv", float(gamma_mult))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub runs: Vec<RunSummary>,
    pub report: ReportSummary,
}

/// Runs the cross product in parallel, then builds the comparison tables from
/// the written traces.
pub fn cmd_sweep(c: &Config, dir: Option<&Path>) -> CliResult<SweepSummary> {
    let s = solver_section(c)?;
    let dir = dir
        .map(Path::to_path_buf)
        .or_else(|| c.output.dir.as_ref().map(PathBuf::from))
        .ok_or_else(|| CliError::config("no output directory: pass --dir or set output.dir"))?;
    let p = build_problem(&c.problem)?;
    let runs = resolve_all(&p, s)?;
    let mut names: Vec<String> = runs.iter().map(|r| trace_file_name(r.estimator, r.cfg.seed, r.gamma_mult)).collect();
    names.sort();
    names.dedup();
    if names.len() != runs.len() {
        return Err(CliError::config("sweep lists contain duplicate entries"));
    }
    fs::create_dir_all(&dir).map_err(|e| CliError::io(dir.display().to_string(), e))?;
    let summaries = runs
        .par_iter()
        .map(|r| execute(c, &p, r, &dir.join(trace_file_name(r.estimator, r.cfg.seed, r.gamma_mult))))
        .collect::<CliResult<Vec<_>>>()?;
    let axis = c.sweep.as_ref().and_then(|sw| sw.axis.value());
    let report = cmd_report(&dir, axis)?;
    Ok(SweepSummary { runs: summaries, report })
}

/// A trace together with the sweep coordinates read from its header.
#[derive(Debug, Clone)]
struct LoadedTrace {
    estimator: EstimatorName,
    seed: u64,
    gamma_mult: f64,
    components: f64,
    file: TraceFile,
}

fn load_dir(dir: &Path) -> CliResult<Vec<LoadedTrace>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir.display().to_string(), e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir.display().to_string(), e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if !name.ends_with(".csv") || name == COMPARISON_FILE || name == AGGREGATE_FILE {
            continue;
        }
        let shown = path.display().to_string();
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(shown.clone(), e))?;
        if !text.starts_with("# ") {
            continue;
        }
        let file = parse_trace(&text, &shown)?;
        let config = file.config()?;
        let s = config
            .solver
            .as_ref()
            .ok_or_else(|| CliError::Trace { path: shown.clone(), message: "header has no solver section".into() })?;
        let components = file.get("resolved.components").and_then(|v| v.parse::<f64>().ok()).unwrap_or(1.0);
        out.push(LoadedTrace {
            estimator: s.estimators[0],
            seed: s.seeds[0],
            gamma_mult: s.gamma_mult[0],
            components,
            file,
        });
    }
    out.sort_by(|a, b| {
        (a.estimator, a.gamma_mult, a.seed)
            .partial_cmp(&(b.estimator, b.gamma_mult, b.seed))
            .expect("multipliers are finite")
    });
    Ok(out)
}

/// `auto` picks the axis of the first estimator whose savings are not in full
/// oracle calls, so that e.g. `[fulldet, coord]` compares on coordinates.
pub fn pick_axis(estimators: &[EstimatorName]) -> Axis {
    estimators.iter().map(|&e| Axis::natural(e)).find(|&a| a != Axis::FullCalls).unwrap_or(Axis::FullCalls)
}

fn budget(axis: Axis, r: &TraceRecord, components: f64) -> f64 {
    let c = &r.costs;
    match axis {
        Axis::FullCalls => c[0] as f64,
        Axis::CompCalls => c[1] as f64,
        Axis::Coords => c[2] as f64,
        Axis::Bits => c[3] as f64,
        Axis::Comms => c[4] as f64,
        Axis::LocalSteps => c[5] as f64,
        Axis::Oracle => c[0] as f64 + c[1] as f64 / components,
    }
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub axis: Axis,
    pub traces: usize,
    pub comparison: PathBuf,
    pub aggregate: PathBuf,
}

/// Rebuilds `comparison.csv` and `aggregate.csv` from the traces in `dir`.
pub fn cmd_report(dir: &Path, axis: Option<Axis>) -> CliResult<ReportSummary> {
    let traces = load_dir(dir)?;
    if traces.is_empty() {
        return Err(CliError::config(format!("no trace files in {}", dir.display())));
    }
    let mut estimators: Vec<EstimatorName> = traces.iter().map(|t| t.estimator).collect();
    estimators.dedup();
    let axis = axis.unwrap_or_else(|| pick_axis(&estimators));

    let mut cmp = String::from(
        "estimator,seed,gamma_mult,axis,budget,k,full_calls,comp_calls,coords,bits,comms,local_steps,dist_sq,gap_last,gap_avg\n",
    );
    for t in &traces {
        for r in &t.file.rows {
            let c = &r.costs;
            let _ = writeln!(
                cmp,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                t.estimator,
                t.seed,
                float(t.gamma_mult),
                axis.as_str(),
                budget(axis, r, t.components),
                r.k,
                c[0],
                c[1],
                c[2],
                c[3],
                c[4],
                c[5],
                cell(r.dist_sq),
                cell(r.gap_last),
                cell(r.gap_avg),
            );
        }
    }

    let mut groups: BTreeMap<(EstimatorName, u64), Vec<&LoadedTrace>> = BTreeMap::new();
    for t in &traces {
        groups.entry((t.estimator, t.gamma_mult.to_bits())).or_default().push(t);
    }
    let mut agg = String::from(
        "estimator,gamma_mult,k,seeds,budget_mean,gap_avg_mean,gap_avg_min,gap_avg_max,\
         gap_last_mean,gap_last_min,gap_last_max,dist_sq_mean,dist_sq_min,dist_sq_max\n",
    );
    let mut keys: Vec<_> = groups.keys().copied().collect();
    keys.sort_by(|a, b| (a.0, f64::from_bits(a.1)).partial_cmp(&(b.0, f64::from_bits(b.1))).expect("finite"));
    for key in keys {
        let group = &groups[&key];
        let first = &group[0].file.rows;
        for t in group {
            let ks: Vec<u64> = t.file.rows.iter().map(|r| r.k).collect();
            if ks != first.iter().map(|r| r.k).collect::<Vec<_>>() {
                return Err(CliError::Trace {
                    path: dir.display().to_string(),
                    message: format!("traces for {} use different iteration grids", key.0),
                });
            }
        }
        for (i, row) in first.iter().enumerate() {
            let n = group.len() as f64;
            let budget_mean = group.iter().map(|t| budget(axis, &t.file.rows[i], t.components)).sum::<f64>() / n;
            let stats = |f: fn(&TraceRecord) -> Option<f64>| -> [String; 3] {
                let vals: Option<Vec<f64>> = group.iter().map(|t| f(&t.file.rows[i])).collect();
                match vals {
                    Some(v) => {
                        let mean = v.iter().sum::<f64>() / n;
                        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
                        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        [cell(Some(mean)), cell(Some(min)), cell(Some(max))]
                    }
                    None => Default::default(),
                }
            };
            let [ga, ga_lo, ga_hi] = stats(|r| r.gap_avg);
            let [gl, gl_lo, gl_hi] = stats(|r| r.gap_last);
            let [ds, ds_lo, ds_hi] = stats(|r| r.dist_sq);
            let _ = writeln!(
                agg,
                "{},{},{},{},{},{ga},{ga_lo},{ga_hi},{gl},{gl_lo},{gl_hi},{ds},{ds_lo},{ds_hi}",
                key.0,
                float(f64::from_bits(key.1)),
                row.k,
                group.len(),
                budget_mean,
            );
        }
    }

    let comparison = dir.join(COMPARISON_FILE);
    let aggregate = dir.join(AGGREGATE_FILE);
    write_file(&comparison, &cmp)?;
    write_file(&aggregate, &agg)?;
    Ok(ReportSummary { axis, traces: traces.len(), comparison, aggregate })
}

/// Axis given on the command line, `auto` meaning "pick from the estimators".
pub fn parse_axis_flag(s: &str) -> CliResult<Option<Axis>> {
    if s == "auto" {
        return Ok(None);
    }
    s.parse::<Axis>().map(Some).map_err(CliError::config)
}
