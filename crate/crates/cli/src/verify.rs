//! The `verify` command: unbiasedness and variance-bound checks per estimator.

use std::fmt::Write as _;

use extrastep::{
    assumption_constants, gen_mixing_vi, random_pairs, verify_assumption2, verify_unbiasedness, ConstantInputs,
    EstimatorKind, Quantizer, VIProblem, VerificationMode, VerificationReport,
};
use rayon::prelude::*;

use crate::config::{float, Config, EstimatorName, SolverSection, VerifySection};
use crate::error::{CliError, CliResult};
use crate::resolve::{build_problem, estimator_kind};

/// Largest number of estimator outcomes enumerated per state pair; beyond it
/// the Monte Carlo mode is used.
pub const EXACT_OUTCOME_LIMIT: f64 = 1e5;

/// Coupling strength used when a non-mixing problem is split into workers to
/// check the local estimator.
pub const LOCAL_CHECK_LAMBDA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorCheck {
    pub estimator: EstimatorName,
    pub negative_control: bool,
    /// `exact`, `monte_carlo`, or `skipped`.
    pub mode: &'static str,
    pub constants: Vec<(&'static str, f64)>,
    pub report: VerificationReport,
}

impl EstimatorCheck {
    pub fn summary(&self) -> String {
        let count = |lemma: &str| {
            let rs: Vec<_> = self.report.records.iter().filter(|r| r.lemma == lemma).collect();
            format!("{}/{}", rs.iter().filter(|r| r.pass).count(), rs.len())
        };
        let consts: Vec<String> = self.constants.iter().map(|(k, v)| format!("{k}={}", float(*v))).collect();
        let role = if self.negative_control { " (negative control)" } else { "" };
        format!(
            "{}{role}: unbiased {} eq11 {} variance {} [{}] {}",
            self.estimator,
            count("unbiased"),
            count("eq11"),
            count("variance"),
            self.mode,
            consts.join(" ")
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOutcome {
    pub checks: Vec<EstimatorCheck>,
}

impl VerifyOutcome {
    /// Every real check passes and every negative control fails somewhere.
    pub fn success(&self) -> bool {
        self.checks.iter().all(|c| c.report.passed() != c.negative_control)
    }

    pub fn to_csv(&self) -> String {
        let mut all = VerificationReport::default();
        for c in &self.checks {
            all.extend(c.report.clone());
        }
        all.to_csv()
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(out, "{}", c.summary());
        }
        out
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Number of outcomes `enumerate_correction` would produce, `None` when the
/// estimator cannot be enumerated.
fn outcome_count(kind: &EstimatorKind, p: &VIProblem) -> Option<f64> {
    let m = p.component_count() as f64;
    let q_count = |q: &Quantizer| match *q {
        Quantizer::Identity => 1.0,
        Quantizer::RandK { keep, dim } => binomial(dim, keep),
    };
    match kind {
        EstimatorKind::Noisy { sigma } | EstimatorKind::Past { sigma } if *sigma > 0.0 => None,
        EstimatorKind::FullDet | EstimatorKind::Noisy { .. } | EstimatorKind::Past { .. } => Some(1.0),
        EstimatorKind::Vr | EstimatorKind::Is { .. } => Some(m),
        EstimatorKind::Coord | EstimatorKind::MisScaledCoord => Some(p.dim() as f64),
        EstimatorKind::Quant(q) => Some(q_count(q)),
        EstimatorKind::Qvr(q) => Some(m * q_count(q)),
        EstimatorKind::Local { .. } => Some(2.0),
    }
}

/// The problem an estimator is checked on: the configured one, or for the
/// local estimator on a non-mixing problem, its components as free-space
/// workers coupled with [`LOCAL_CHECK_LAMBDA`].
fn problem_for(name: EstimatorName, p: &VIProblem) -> CliResult<VIProblem> {
    if name != EstimatorName::Local || p.mixing().is_some() {
        return Ok(p.clone());
    }
    Ok(gen_mixing_vi(p.split_components()?, LOCAL_CHECK_LAMBDA)?)
}

fn check_one(
    name: EstimatorName,
    negative_control: bool,
    base: &VIProblem,
    s: &SolverSection,
    v: &VerifySection,
) -> CliResult<EstimatorCheck> {
    let p = problem_for(name, base)?;
    let kind = estimator_kind(&p, s, name)?;
    let states = random_pairs(&p, v.states, v.seed);
    let mut report = verify_unbiasedness(&kind, &p, &states, v.n_draws, v.seed)?;
    let k = assumption_constants(&kind, &ConstantInputs::from_problem(&p, &kind)?)?;
    let constants = vec![("A", k.a), ("E", k.e), ("D1", k.d1), ("D3", k.d3)];
    let mode = if negative_control || matches!(kind, EstimatorKind::Past { .. }) {
        "skipped"
    } else {
        match outcome_count(&kind, &p) {
            Some(n) if n <= EXACT_OUTCOME_LIMIT => {
                let pairs = random_pairs(&p, v.pairs, v.seed.wrapping_add(1));
                report.extend(verify_assumption2(&kind, &p, &pairs, VerificationMode::Exact)?);
                "exact"
            }
            _ => {
                let pairs = random_pairs(&p, v.mc_pairs, v.seed.wrapping_add(1));
                let mode = VerificationMode::MonteCarlo { n: v.n_draws, seed: v.seed };
                report.extend(verify_assumption2(&kind, &p, &pairs, mode)?);
                "monte_carlo"
            }
        }
    };
    Ok(EstimatorCheck { estimator: name, negative_control, mode, constants, report })
}

pub fn cmd_verify(c: &Config) -> CliResult<VerifyOutcome> {
    let v = c.verify.clone().unwrap_or_default();
    if v.estimators.is_empty() {
        return Err(CliError::config("`verify.estimators` is empty"));
    }
    if v.n_draws < 2 || v.states == 0 {
        return Err(CliError::config("`verify.n_draws` must be at least 2 and `verify.states` at least 1"));
    }
    let p = build_problem(&c.problem)?;
    let mut s = c.solver.clone().unwrap_or_else(|| SolverSection::new(EstimatorName::FullDet, 1));
    s.sigma = v.sigma;
    let mut jobs: Vec<(EstimatorName, bool)> = v.estimators.iter().map(|&e| (e, false)).collect();
    if v.negative_control && !v.estimators.contains(&EstimatorName::MisCoord) {
        jobs.push((EstimatorName::MisCoord, true));
    }
    for job in &mut jobs {
        job.1 = job.0 == EstimatorName::MisCoord;
    }
    let checks = jobs.par_iter().map(|&(e, neg)| check_one(e, neg, &p, &s, &v)).collect::<CliResult<Vec<_>>>()?;
    Ok(VerifyOutcome { checks })
}
