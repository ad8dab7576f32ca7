use std::fs;
use std::path::Path;
use std::process::Command;

use extrastep::{gen_policeman_burglar, EstimatorKind};
use extrastep_cli::config::{EstimatorName, Setting};
use extrastep_cli::resolve::{build_problem, resolve_run};
use extrastep_cli::trace::{parse_trace, TraceFile, COLUMNS};
use extrastep_cli::{cmd_gen, cmd_report, cmd_run, cmd_sweep, cmd_verify, parse_config, CliError};

fn config(text: &str) -> extrastep_cli::Config {
    parse_config(text).unwrap()
}

fn read_trace(path: &Path) -> TraceFile {
    parse_trace(&fs::read_to_string(path).unwrap(), &path.display().to_string()).unwrap()
}

const MINIMAL_PVB: &str = "problem.kind = pvb\nproblem.n = 5\nsolver.estimator = fulldet\nsolver.K = 1000\n";

#[test]
fn minimal_pvb_resolves_monotone_step() {
    let c = config(MINIMAL_PVB);
    let p = build_problem(&c.problem).unwrap();
    let r = resolve_run(&p, c.solver.as_ref().unwrap(), EstimatorName::FullDet, 0, 1.0).unwrap();
    assert_eq!(r.cfg.gamma, 1.0 / (3.0 * p.constants().lipschitz));
    assert_eq!(r.cfg.iterations, 1000);
}

#[test]
fn coord_auto_step_and_tau() {
    let c = config("problem.kind = pvb\nproblem.n = 3\nsolver.estimator = coord\nsolver.gamma = auto\nsolver.K = 10\n");
    let p = build_problem(&c.problem).unwrap();
    let r = resolve_run(&p, c.solver.as_ref().unwrap(), EstimatorName::Coord, 0, 1.0).unwrap();
    let d = p.dim() as f64;
    let l = p.constants().lipschitz;
    let tau = d / (d + 1.0);
    assert!((r.cfg.tau - tau).abs() < 1e-15);
    let gamma = (1.0 - tau).sqrt() / (2.0 * l * (4.0 * d + 2.0).sqrt());
    assert!((r.cfg.gamma - gamma).abs() <= 1e-15 * gamma);
}

#[test]
fn misspelled_key_is_a_config_error_with_line() {
    let err = parse_config(
        "problem.kind = pvb\nproblem.n = 5\nsolver.estimator = fulldet\nsolver.gama = 0.1\nsolver.K = 5\n",
    )
    .unwrap_err();
    assert!(err.to_string().contains("line 4"), "{err}");
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn pvb_fulldet_run_writes_full_trace() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let c = config("problem.kind = pvb\nproblem.n = 5\nsolver.estimator = fulldet\nsolver.K = 10000\n");
    let s = cmd_run(&c, Some(&path)).unwrap();
    let t = read_trace(&path);
    assert_eq!(s.rows, 10_001);
    assert_eq!(t.rows.len(), 10_001);
    assert!(t.rows.iter().enumerate().all(|(i, r)| r.k == i as u64));
    let first = t.rows[0].gap_avg.unwrap();
    let last = t.rows.last().unwrap().gap_avg.unwrap();
    assert!(last < first, "{last} >= {first}");
    assert!(t.rows.iter().all(|r| r.dist_sq.is_none() && r.lyapunov.is_none()));
}

#[test]
fn repeated_run_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let c = config("problem.kind = pvb\nproblem.n = 3\nsolver.estimator = qvr\nsolver.K = 3000\nsolver.seed = 11\n");
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    cmd_run(&c, Some(&a)).unwrap();
    cmd_run(&c, Some(&b)).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn header_alone_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(
        "problem.kind = quadratic\nproblem.d = 6\nproblem.mu = 0.2\nproblem.L = 3\nproblem.seed = 5\n\
         solver.estimator = noisy\nsolver.sigma = 0.5\nsolver.K = 500\nsolver.seed = 9\nsolver.stride = 7\n",
    );
    let first = dir.path().join("first.csv");
    cmd_run(&c, Some(&first)).unwrap();
    let regenerated = read_trace(&first).config().unwrap();
    let second = dir.path().join("second.csv");
    cmd_run(&regenerated, Some(&second)).unwrap();
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
}

#[test]
fn strongly_monotone_quadratic_has_lyapunov_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.csv");
    let c = config("problem.kind = quadratic\nproblem.d = 5\nproblem.mu = 0.5\nproblem.L = 2\nsolver.estimator = vr\nsolver.K = 200\n");
    cmd_run(&c, Some(&path)).unwrap();
    let t = read_trace(&path);
    assert_eq!(t.get("resolved.regime"), Some("strongly_monotone"));
    assert!(t.rows.iter().all(|r| r.lyapunov.is_some_and(f64::is_finite) && r.dist_sq.is_some()));
}

#[test]
fn run_rejects_lists() {
    let c = config("problem.kind = pvb\nproblem.n = 2\nsolver.estimator = fulldet, past\nsolver.K = 5\n");
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(cmd_run(&c, Some(&dir.path().join("x.csv"))), Err(CliError::Config(_))));
}

fn comparison_rows(dir: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(dir.join("comparison.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn past_uses_half_the_oracle_calls() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(
        "problem.kind = pvb\nproblem.n = 5\nsolver.estimator = [fulldet, past]\nsolver.gamma = auto:fulldet\nsolver.K = 400\n",
    );
    let s = cmd_sweep(&c, Some(dir.path())).unwrap();
    assert_eq!(s.runs.len(), 2);
    assert_eq!(s.report.axis.as_str(), "full_calls");
    let rows = comparison_rows(dir.path());
    for r in &rows {
        let k: u64 = r[5].parse().unwrap();
        let calls: u64 = r[6].parse().unwrap();
        match r[0].as_str() {
            "fulldet" => assert_eq!(calls, 2 * k),
            "past" => assert_eq!(calls, k + 1),
            other => panic!("unexpected estimator {other}"),
        }
        assert_eq!(r[4], r[6], "budget is the full-call column");
    }
}

#[test]
fn seed_sweep_aggregates_ten_traces() {
    let dir = tempfile::tempdir().unwrap();
    let c = config("problem.kind = pvb\nproblem.n = 3\nsolver.estimator = vr\nsolver.K = 300\nsolver.seed = 1..10\n");
    let s = cmd_sweep(&c, Some(dir.path())).unwrap();
    assert_eq!(s.runs.len(), 10);
    let traces = fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("vr_s"))
        .count();
    assert_eq!(traces, 10);
    let agg = fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
    let header: Vec<&str> = agg.lines().next().unwrap().split(',').collect();
    for col in ["gap_avg_mean", "gap_avg_min", "gap_avg_max"] {
        assert!(header.contains(&col));
    }
    for line in agg.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[3], "10");
        let (mean, lo, hi): (f64, f64, f64) =
            (cells[5].parse().unwrap(), cells[6].parse().unwrap(), cells[7].parse().unwrap());
        assert!(lo <= mean * (1.0 + 1e-12) && mean <= hi * (1.0 + 1e-12));
    }
}

#[test]
fn larger_step_ends_closer_on_deterministic_quadratic() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(
        "problem.kind = quadratic\nproblem.d = 10\nproblem.mu = 0.5\nproblem.L = 5\nproblem.seed = 2\n\
         solver.estimator = fulldet\nsolver.gamma_mult = [0.5, 1.0]\nsolver.K = 300\n",
    );
    cmd_sweep(&c, Some(dir.path())).unwrap();
    let half = read_trace(&dir.path().join("fulldet_s0_g0.5.csv"));
    let full = read_trace(&dir.path().join("fulldet_s0_g1.0.csv"));
    let d0 = half.rows[0].dist_sq.unwrap();
    let (dh, df) = (half.rows.last().unwrap().dist_sq.unwrap(), full.rows.last().unwrap().dist_sq.unwrap());
    assert!(dh < d0 && df < d0);
    assert!(df < dh, "{df} vs {dh}");
    let (gh, gf) = (half.rows.last().unwrap().gap_last.unwrap(), full.rows.last().unwrap().gap_last.unwrap());
    assert!(gf < gh, "{gf} vs {gh}");
}

fn assert_well_formed(text: &str) {
    let mut lines = text.lines().skip_while(|l| l.starts_with('#'));
    let width = lines.next().unwrap().split(',').count();
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), width, "{line}");
        for c in cells.iter().filter(|c| c.chars().next().is_some_and(|ch| ch.is_ascii_digit() || ch == '-')) {
            assert!(c.parse::<f64>().is_ok_and(f64::is_finite), "cell {c}");
        }
    }
}

#[test]
fn sweep_outputs_are_well_formed_and_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(
        "problem.kind = pvb\nproblem.n = 3\nsolver.estimator = [coord, quant, is]\nsolver.K = 200\nsolver.seed = 1, 2\n",
    );
    let s = cmd_sweep(&c, Some(dir.path())).unwrap();
    assert_eq!(s.report.axis.as_str(), "coords");
    let before = fs::read(dir.path().join("comparison.csv")).unwrap();
    let agg_before = fs::read(dir.path().join("aggregate.csv")).unwrap();
    for entry in fs::read_dir(dir.path()).unwrap() {
        let text = fs::read_to_string(entry.unwrap().path()).unwrap();
        assert_well_formed(&text);
    }
    fs::remove_file(dir.path().join("comparison.csv")).unwrap();
    let r = cmd_report(dir.path(), None).unwrap();
    assert_eq!(r.traces, 6);
    assert_eq!(fs::read(dir.path().join("comparison.csv")).unwrap(), before);
    assert_eq!(fs::read(dir.path().join("aggregate.csv")).unwrap(), agg_before);
}

#[test]
fn trace_columns_are_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("l.csv");
    let c = config(
        "problem.kind = mixing\nproblem.workers = 3\nproblem.lambda = 1.5\nproblem.d = 2\nproblem.mu = 0.4\nproblem.L = 2\n\
         solver.estimator = local\nsolver.K = 100\n",
    );
    cmd_run(&c, Some(&path)).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_well_formed(&text);
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, COLUMNS.join(","));
}

#[test]
fn gen_output_is_a_config_for_the_same_problem() {
    let c = config("problem.kind = pvb\nproblem.n = 3\nproblem.seed = 4\nproblem.theta = 0.3\n");
    let text = cmd_gen(&c).unwrap();
    let back = config(&text);
    assert_eq!(back.problem, c.problem);
    let p = gen_policeman_burglar(3, 0.3, 3.0, 4).unwrap();
    assert!(text.contains(&format!("# L = {:?}", p.constants().lipschitz)));
}

#[test]
fn default_verify_suite_passes_with_failing_control() {
    let c = config("problem.kind = pvb\nproblem.n = 3\nverify.seed = 0\n");
    let start = std::time::Instant::now();
    let out = cmd_verify(&c).unwrap();
    assert!(start.elapsed().as_secs() < 60);
    assert!(out.success(), "{}", out.summary());
    let control = out.checks.iter().find(|c| c.negative_control).unwrap();
    assert_eq!(control.estimator, EstimatorName::MisCoord);
    assert!(!control.report.passed());
    for check in out.checks.iter().filter(|c| !c.negative_control) {
        assert!(check.report.passed(), "{}", check.summary());
    }
    let coord = out.checks.iter().find(|c| c.estimator == EstimatorName::Coord).unwrap();
    let p = build_problem(&c.problem).unwrap();
    let l = p.constants().lipschitz;
    let a = coord.constants.iter().find(|(k, _)| *k == "A").unwrap().1;
    assert!((a - p.dim() as f64 * l * l).abs() <= 1e-12 * a);
    assert_eq!(coord.mode, "exact");
}

#[test]
fn local_split_setting_reaches_the_estimator() {
    let c = config(
        "problem.kind = mixing\nproblem.workers = 2\nproblem.lambda = 1\nproblem.d = 2\nproblem.mu = 1\nproblem.L = 1\n\
         solver.estimator = local\nsolver.split = 0.25\nsolver.K = 1\n",
    );
    let p = build_problem(&c.problem).unwrap();
    let r = resolve_run(&p, c.solver.as_ref().unwrap(), EstimatorName::Local, 0, 1.0).unwrap();
    assert_eq!(r.kind, EstimatorKind::Local { split: 0.25 });
    assert_eq!(c.solver.unwrap().split, Setting::Value(0.25));
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_extrastep"))
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    };

    let ok = write("ok.conf", "problem.kind = pvb\nproblem.n = 2\nsolver.estimator = fulldet\nsolver.K = 10\n");
    let trace = dir.path().join("t.csv");
    let out = bin().arg("run").arg(&ok).arg("--out").arg(&trace).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("gap_avg="));

    let bad = write(
        "bad.conf",
        "problem.kind = pvb\nproblem.n = 2\nsolver.estimator = fulldet\nsolver.gama = 1\nsolver.K = 10\n",
    );
    let out = bin().arg("run").arg(&bad).arg("--out").arg(&trace).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));

    let blocked = dir.path().join("t.csv").join("nested.csv");
    let out = bin().arg("run").arg(&ok).arg("--out").arg(&blocked).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let missing = bin().arg("run").arg(dir.path().join("absent.conf")).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));

    // two draws per state cannot resolve the control's bias, so it passes and the run fails
    let weak = write(
        "weak.conf",
        "problem.kind = pvb\nproblem.n = 2\nverify.estimators = vr\nverify.n_draws = 2\nverify.states = 1\n",
    );
    let out = bin().arg("verify").arg(&weak).arg("--report").arg(dir.path().join("r.csv")).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stdout));

    let good = write(
        "good.conf",
        "problem.kind = pvb\nproblem.n = 2\nverify.estimators = vr, coord\nverify.n_draws = 20000\n",
    );
    let report = dir.path().join("good.csv");
    let out = bin().arg("verify").arg(&good).arg("--report").arg(&report).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = fs::read_to_string(&report).unwrap();
    assert!(text.lines().any(|l| l.starts_with("unbiased,miscoord,") && l.ends_with(",false")));
}
