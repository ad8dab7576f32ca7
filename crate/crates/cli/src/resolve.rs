//! Turns `auto` settings into concrete solver parameters.

use extrastep::{
    auto_parameters, gen_mixing_vi, gen_policeman_burglar, gen_quadratic_vi, importance_weights, optimal_tau,
    AssumptionConstants, ConstantInputs, EstimatorKind, Quantizer, Regime, SolverConfig, VIProblem,
};

use crate::config::{
    EstimatorName, GammaSpec, ProblemConfig, QuantizerName, RegimeName, Setting, SolverSection, Weights,
};
use crate::error::{CliError, CliResult};

pub fn build_problem(pc: &ProblemConfig) -> CliResult<VIProblem> {
    let p = match *pc {
        ProblemConfig::Pvb { n, theta, sigma_w, seed } => gen_policeman_burglar(n, theta, sigma_w, seed)?,
        ProblemConfig::Quadratic { d, mu, lipschitz, seed } => gen_quadratic_vi(d, mu, lipschitz, seed)?,
        ProblemConfig::Mixing { workers, lambda, d, mu, lipschitz, seed } => {
            if workers == 0 {
                return Err(CliError::config("`problem.workers` must be at least 1"));
            }
            let bases = (0..workers as u64)
                .map(|m| gen_quadratic_vi(d, mu, lipschitz, seed + m))
                .collect::<extrastep::Result<Vec<_>>>()?;
            gen_mixing_vi(bases, lambda)?
        }
    };
    Ok(p)
}

/// Default RandK keep count, `ceil(d / 4)`.
pub fn default_keep(dim: usize) -> usize {
    dim.div_ceil(4).max(1)
}

pub fn estimator_kind(p: &VIProblem, s: &SolverSection, name: EstimatorName) -> CliResult<EstimatorKind> {
    let quantizer = || -> CliResult<Quantizer> {
        Ok(match s.quantizer {
            QuantizerName::Identity => Quantizer::Identity,
            QuantizerName::RandK => {
                Quantizer::rand_k(s.keep.value().unwrap_or_else(|| default_keep(p.dim())), p.dim())?
            }
        })
    };
    let kind = match name {
        EstimatorName::FullDet => EstimatorKind::FullDet,
        EstimatorName::Noisy => EstimatorKind::Noisy { sigma: s.sigma },
        EstimatorName::Past => EstimatorKind::Past { sigma: s.sigma },
        EstimatorName::Vr => EstimatorKind::Vr,
        EstimatorName::Coord => EstimatorKind::Coord,
        EstimatorName::MisCoord => EstimatorKind::MisScaledCoord,
        EstimatorName::Quant => EstimatorKind::Quant(quantizer()?),
        EstimatorName::Qvr => EstimatorKind::Qvr(quantizer()?),
        EstimatorName::Is => {
            let m = p.component_count();
            let weights = match &s.weights {
                Weights::Auto => importance_weights(&p.constants().component_lipschitz)?,
                Weights::Uniform => vec![1.0 / m as f64; m],
                Weights::Given(w) => w.clone(),
            };
            EstimatorKind::Is { weights }
        }
        EstimatorName::Local => {
            let split = match s.split {
                Setting::Value(x) => x,
                Setting::Auto => {
                    // the recommended split does not depend on the placeholder
                    let probe = EstimatorKind::Local { split: 0.5 };
                    optimal_tau(&probe, &ConstantInputs::from_problem(p, &probe)?)
                }
            };
            EstimatorKind::Local { split }
        }
    };
    kind.validate(p)?;
    Ok(kind)
}

pub fn regime_for(p: &VIProblem, setting: Setting<RegimeName>) -> Regime {
    match setting {
        Setting::Value(RegimeName::StronglyMonotone) => Regime::StronglyMonotone,
        Setting::Value(RegimeName::Monotone) => Regime::Monotone,
        Setting::Auto => {
            let c = p.constants();
            if c.mu_f + c.mu_h > 0.0 {
                Regime::StronglyMonotone
            } else {
                Regime::Monotone
            }
        }
    }
}

/// One fully resolved run of a (possibly list-valued) solver section.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRun {
    pub estimator: EstimatorName,
    pub gamma_mult: f64,
    pub kind: EstimatorKind,
    pub cfg: SolverConfig,
    pub stride: usize,
    pub constants: AssumptionConstants,
    pub inputs: ConstantInputs,
}

pub fn resolve_run(
    p: &VIProblem,
    s: &SolverSection,
    estimator: EstimatorName,
    seed: u64,
    gamma_mult: f64,
) -> CliResult<ResolvedRun> {
    let kind = estimator_kind(p, s, estimator)?;
    let regime = regime_for(p, s.regime);
    let auto = auto_parameters(p, &kind, regime, s.tau.value())?;
    if gamma_mult.is_nan() || gamma_mult <= 0.0 {
        return Err(CliError::config(format!("`solver.gamma_mult` entries must be positive, got {gamma_mult}")));
    }
    let base = match s.gamma {
        GammaSpec::Auto => auto.gamma,
        GammaSpec::Value(g) => g,
        GammaSpec::AutoOf(other) => {
            let other_kind = estimator_kind(p, s, other)?;
            auto_parameters(p, &other_kind, regime, None)?.gamma
        }
    };
    let gamma = base * gamma_mult;
    let cfg = SolverConfig {
        gamma,
        tau: auto.tau,
        iterations: s.iterations,
        lyapunov_weight: s.lyapunov_weight.value().unwrap_or(auto.lyapunov_weight),
        seed,
        regime,
        averaging: s.averaging,
        stride: s.stride.value(),
    };
    cfg.validate()?;
    let stride = cfg.stride.unwrap_or_else(|| extrastep::default_stride(cfg.iterations));
    Ok(ResolvedRun { estimator, gamma_mult, kind, cfg, stride, constants: auto.constants, inputs: auto.inputs })
}

/// Every run in the cross product estimators × seeds × step multipliers.
pub fn resolve_all(p: &VIProblem, s: &SolverSection) -> CliResult<Vec<ResolvedRun>> {
    if s.estimators.is_empty() || s.seeds.is_empty() || s.gamma_mult.is_empty() {
        return Err(CliError::config("empty sweep: estimator, seed and gamma_mult lists must be nonempty"));
    }
    let mut runs = Vec::new();
    for &e in &s.estimators {
        for &seed in &s.seeds {
            for &m in &s.gamma_mult {
                runs.push(resolve_run(p, s, e, seed, m)?);
            }
        }
    }
    Ok(runs)
}
