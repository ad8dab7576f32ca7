//! The unified extra-step loop.
//!
//! One iteration blends `z̄ = τ z + (1 - τ) w`, asks the estimator for
//! `(g^k, g^{k+1/2}, z^{k+1/2})`, takes `z^{k+1} = prox(z̄ - γ g^{k+1/2})` and
//! moves the snapshot `w` to `z^{k+1}` with probability `1 - τ`.

use crate::error::{check_len, Error, Result};
use crate::estimators::{
    assumption_constants, AssumptionConstants, ConstantInputs, CostLedger, EstimatorKind, EstimatorState,
};
use crate::linalg::{all_finite, axpy, dist_sq, lin_comb, norm, scale};
use crate::metrics::GapEvaluator;
use crate::problems::VIProblem;
use crate::prox::prox_eval;
use crate::rng::{rng_stream, RngStream};

/// RNG stream ids derived from the solver seed.
pub const ESTIMATOR_STREAM: u64 = 0;
pub const SNAPSHOT_STREAM: u64 = 1;
pub const INIT_STREAM: u64 = 2;

/// Largest trace length before the default stride kicks in.
pub const MAX_DEFAULT_ROWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    StronglyMonotone,
    Monotone,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::StronglyMonotone => "strongly_monotone",
            Regime::Monotone => "monotone",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub gamma: f64,
    pub tau: f64,
    pub iterations: usize,
    pub lyapunov_weight: f64,
    pub seed: u64,
    pub regime: Regime,
    /// Track the running mean of half-step iterates.
    pub averaging: bool,
    /// Record every `stride`-th iteration; `None` picks [`default_stride`].
    pub stride: Option<usize>,
}

impl SolverConfig {
    pub fn new(gamma: f64, iterations: usize) -> Self {
        SolverConfig {
            gamma,
            tau: 0.0,
            iterations,
            lyapunov_weight: 0.0,
            seed: 0,
            regime: Regime::Monotone,
            averaging: true,
            stride: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::Parameter(format!("step size must be positive, got {}", self.gamma)));
        }
        if !(0.0..1.0).contains(&self.tau) {
            return Err(Error::Parameter(format!("tau must lie in [0, 1), got {}", self.tau)));
        }
        if self.iterations == 0 {
            return Err(Error::Parameter("iteration count must be at least 1".into()));
        }
        if !(self.lyapunov_weight >= 0.0) {
            return Err(Error::Parameter("Lyapunov weight must be >= 0".into()));
        }
        if self.stride == Some(0) {
            return Err(Error::Parameter("trace stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// Every iteration up to `10^4` iterations, otherwise `K / 10^4`.
pub fn default_stride(iterations: usize) -> usize {
    if iterations <= MAX_DEFAULT_ROWS {
        1
    } else {
        iterations / MAX_DEFAULT_ROWS
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSize {
    pub gamma: f64,
    pub lyapunov_weight: f64,
}

/// Generic step-size rule for arbitrary constants.
///
/// Strongly monotone: `γ <= min{ sqrt(1-τ) / (2 sqrt(2A + TC)), (1-τ) / (4μ) }`
/// with `T = 4B/ρ`. Monotone: `γ <= sqrt(1-τ) / (2 sqrt(2A + TC + E))` with
/// `T = 2B/ρ`. Here `μ = μ_F + μ_h`.
pub fn theorem_step_size(k: &AssumptionConstants, regime: Regime, mu: f64, tau: f64) -> Result<StepSize> {
    check_tau(tau)?;
    let root = (1.0 - tau).sqrt();
    match regime {
        Regime::StronglyMonotone => {
            check_mu(mu)?;
            let t = (4.0 * k.b / k.rho).max(0.0);
            let gamma = (root / (2.0 * (2.0 * k.a + t * k.c).sqrt())).min((1.0 - tau) / (4.0 * mu));
            Ok(StepSize { gamma, lyapunov_weight: t })
        }
        Regime::Monotone => {
            let t = (2.0 * k.b / k.rho).max(0.0);
            let gamma = root / (2.0 * (2.0 * k.a + t * k.c + k.e).sqrt());
            Ok(StepSize { gamma, lyapunov_weight: t })
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if (0.0..1.0).contains(&tau) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("tau must lie in [0, 1), got {tau}")))
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 {
        Ok(())
    } else {
        Err(Error::Regime(format!("strongly monotone regime needs mu_F + mu_h > 0, got {mu}")))
    }
}

/// Largest admissible step size and Lyapunov weight for `kind`.
///
/// Uses the per-method rule where one exists; `inp` supplies `L`, `d`, `λ`.
/// For VR-type methods the rules are the generic ones evaluated at the
/// method's constants, which keeps `√` placements dimensionally consistent.
pub fn step_size_bound(
    kind: &EstimatorKind,
    regime: Regime,
    k: &AssumptionConstants,
    inp: &ConstantInputs,
    mu_f: f64,
    mu_h: f64,
    tau: f64,
) -> Result<StepSize> {
    check_tau(tau)?;
    let mu = mu_f + mu_h;
    let sm = regime == Regime::StronglyMonotone;
    if sm {
        check_mu(mu)?;
    }
    let l = inp.lipschitz;
    let root = (1.0 - tau).sqrt();
    let mu_cap = (1.0 - tau) / (4.0 * mu);
    let no_t = |gamma: f64| Ok(StepSize { gamma, lyapunov_weight: 0.0 });
    match kind {
        EstimatorKind::FullDet | EstimatorKind::Noisy { .. } => {
            if sm {
                no_t((1.0 / (6.0 * l)).min(1.0 / (4.0 * mu)))
            } else {
                no_t(1.0 / (3.0 * l))
            }
        }
        EstimatorKind::Past { .. } => {
            let base = (1.0 / (12.0 * 2f64.sqrt() * l)).min(1.0 / (3.0 * l));
            if sm {
                Ok(StepSize { gamma: base.min(1.0 / (4.0 * mu)), lyapunov_weight: 36.0 })
            } else {
                Ok(StepSize { gamma: base, lyapunov_weight: 18.0 })
            }
        }
        EstimatorKind::Vr => {
            if sm {
                no_t((root / (2.0 * 2f64.sqrt() * l)).min(mu_cap))
            } else {
                no_t(root / (2.0 * 6f64.sqrt() * l))
            }
        }
        EstimatorKind::Coord | EstimatorKind::MisScaledCoord => {
            let d = inp.dim as f64;
            if sm {
                no_t((root / (2.0 * l * (2.0 * d).sqrt())).min(mu_cap))
            } else {
                no_t(root / (2.0 * l * (4.0 * d + 2.0).sqrt()))
            }
        }
        EstimatorKind::Quant(q) | EstimatorKind::Qvr(q) => {
            let w = q.omega();
            if sm {
                no_t((root / (2.0 * l * (2.0 * w).sqrt())).min(mu_cap))
            } else {
                no_t(root / (2.0 * l * (4.0 * w + 2.0).sqrt()))
            }
        }
        EstimatorKind::Is { .. } => {
            if sm {
                no_t((root / (2.0 * (2.0 * k.a).sqrt())).min(mu_cap))
            } else {
                no_t(root / (2.0 * (4.0 * k.a + 2.0 * l * l).sqrt()))
            }
        }
        EstimatorKind::Local { .. } => {
            let lam = inp.lambda;
            let s = l + lam;
            if sm {
                no_t((lam.sqrt() / (2.0 * 2f64.sqrt() * s.powf(1.5))).min(lam.sqrt() / (4.0 * mu * s.sqrt())))
            } else {
                no_t(lam.sqrt() / (2.0 * 6f64.sqrt() * s.powf(1.5)))
            }
        }
    }
}

/// Parameters chosen automatically for a problem and estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoParameters {
    pub gamma: f64,
    pub tau: f64,
    pub lyapunov_weight: f64,
    pub constants: AssumptionConstants,
    pub inputs: ConstantInputs,
}

/// Resolves `τ` (recommended value unless given) and the step-size bound.
pub fn auto_parameters(
    p: &VIProblem,
    kind: &EstimatorKind,
    regime: Regime,
    tau: Option<f64>,
) -> Result<AutoParameters> {
    let inputs = ConstantInputs::from_problem(p, kind)?;
    let constants = assumption_constants(kind, &inputs)?;
    let tau = tau.unwrap_or(constants.tau_star);
    let c = p.constants();
    let step = step_size_bound(kind, regime, &constants, &inputs, c.mu_f, c.mu_h, tau)?;
    Ok(AutoParameters { gamma: step.gamma, tau, lyapunov_weight: step.lyapunov_weight, constants, inputs })
}

/// `τ ||z - z*||^2 + ||w - z*||^2 + T γ^2 σ^2`.
pub fn lyapunov_value(
    z: &[f64],
    w: &[f64],
    sigma_sq: f64,
    z_star: Option<&[f64]>,
    tau: f64,
    gamma: f64,
    weight: f64,
) -> Result<f64> {
    let zs = z_star.ok_or_else(|| Error::Unsupported("Lyapunov value needs a known solution".into()))?;
    check_len(zs.len(), z.len())?;
    check_len(zs.len(), w.len())?;
    Ok(tau * dist_sq(z, zs) + dist_sq(w, zs) + weight * gamma * gamma * sigma_sq)
}

/// Arithmetic mean of half-step iterates.
pub fn averaged_iterate(halves: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = halves.first().ok_or(Error::Empty("half-step iterates"))?;
    let mut sum = vec![0.0; first.len()];
    for h in halves {
        check_len(first.len(), h.len())?;
        axpy(1.0, h, &mut sum);
    }
    Ok(scale(&sum, 1.0 / halves.len() as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    /// Iterations completed.
    pub k: usize,
    pub z: Vec<f64>,
    pub last_half: Vec<f64>,
    half_sum: Vec<f64>,
}

impl IterateState {
    pub fn new(z0: Vec<f64>) -> Self {
        let d = z0.len();
        IterateState { k: 0, last_half: z0.clone(), z: z0, half_sum: vec![0.0; d] }
    }

    /// `z̄^k = (1/k) Σ z^{j+1/2}`, `None` before the first iteration.
    pub fn averaged(&self) -> Option<Vec<f64>> {
        (self.k > 0).then(|| scale(&self.half_sum, 1.0 / self.k as f64))
    }
}

/// The two RNG streams a run consumes.
#[derive(Debug, Clone)]
pub struct SolverRngs {
    pub estimator: RngStream,
    pub snapshot: RngStream,
}

impl SolverRngs {
    pub fn new(seed: u64) -> Self {
        SolverRngs { estimator: rng_stream(seed, ESTIMATOR_STREAM), snapshot: rng_stream(seed, SNAPSHOT_STREAM) }
    }
}

/// One extra-step iteration.
pub fn iterate_once(
    state: &mut IterateState,
    est: &mut EstimatorState,
    p: &VIProblem,
    cfg: &SolverConfig,
    rngs: &mut SolverRngs,
) -> Result<()> {
    check_len(p.dim(), state.z.len())?;
    let z_bar = if cfg.tau == 0.0 {
        est.snapshot().to_vec()
    } else {
        lin_comb(cfg.tau, &state.z, 1.0 - cfg.tau, est.snapshot())
    };
    let pair = est.est_pair(p, &z_bar, &state.z, cfg.gamma, &mut rngs.estimator)?;
    let z_next = prox_eval(p.prox(), cfg.gamma, &lin_comb(1.0, &z_bar, -cfg.gamma, &pair.g_half))?;
    if !all_finite(&z_next) || !all_finite(&pair.z_half) {
        return Err(Error::NonFinite(state.k));
    }
    est.snapshot_update(p, &z_next, cfg.tau, &mut rngs.snapshot)?;
    if cfg.averaging {
        axpy(1.0, &pair.z_half, &mut state.half_sum);
    }
    state.last_half = pair.z_half;
    state.z = z_next;
    state.k += 1;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub costs: CostLedger,
    pub dist_sq: Option<f64>,
    pub lyapunov: Option<f64>,
    pub gap_last: Option<f64>,
    pub gap_avg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    pub z0: Vec<f64>,
    pub z_final: Vec<f64>,
    pub w_final: Vec<f64>,
    pub averaged: Option<Vec<f64>>,
    pub has_distance: bool,
    pub has_gap: bool,
}

impl RunTrace {
    pub fn last(&self) -> &TraceRow {
        self.rows.last().expect("trace has the initial row")
    }
}

/// Default starting point: simplex centers for constrained problems; for
/// mixing problems the same unit-norm random block on every worker; for other
/// free problems `z*` plus a unit-norm random offset (origin when `z*` is
/// unknown).
pub fn initial_point(p: &VIProblem, seed: u64) -> Vec<f64> {
    if !p.prox().is_free() {
        return p.prox().center();
    }
    let mut rng = rng_stream(seed, INIT_STREAM);
    if let Some(mix) = p.mixing() {
        let block = unit_vector(&mut rng, mix.block_dim());
        return block.iter().copied().cycle().take(p.dim()).collect();
    }
    let offset = unit_vector(&mut rng, p.dim());
    match p.known_solution() {
        Some(zs) => lin_comb(1.0, zs, 1.0, &offset),
        None => offset,
    }
}

fn unit_vector(rng: &mut RngStream, d: usize) -> Vec<f64> {
    loop {
        let v = rng.normal_vec(d);
        let n = norm(&v);
        if n > 1e-12 {
            return scale(&v, 1.0 / n);
        }
    }
}

pub fn run_solver(p: &VIProblem, kind: &EstimatorKind, cfg: &SolverConfig) -> Result<RunTrace> {
    run_solver_from(p, kind, cfg, initial_point(p, cfg.seed))
}

/// Runs `K` iterations from `z0 = w0`, recording rows at the configured stride
/// and always at `k = 0` and `k = K`.
pub fn run_solver_from(p: &VIProblem, kind: &EstimatorKind, cfg: &SolverConfig, z0: Vec<f64>) -> Result<RunTrace> {
    cfg.validate()?;
    check_len(p.dim(), z0.len())?;
    let mut rngs = SolverRngs::new(cfg.seed);
    let mut est = EstimatorState::new(kind.clone(), p)?;
    est.init(p, &z0, &mut rngs.estimator)?;
    let gap = GapEvaluator::for_problem(p, &z0).ok();
    let z_star = p.known_solution();
    let stride = cfg.stride.unwrap_or_else(|| default_stride(cfg.iterations));

    let mut state = IterateState::new(z0.clone());
    let record = |state: &IterateState, est: &EstimatorState| -> Result<TraceRow> {
        let dist = z_star.map(|zs| dist_sq(&state.z, zs));
        let lyap = match z_star {
            Some(zs) => Some(lyapunov_value(
                &state.z,
                est.snapshot(),
                est.memory_sq(),
                Some(zs),
                cfg.tau,
                cfg.gamma,
                cfg.lyapunov_weight,
            )?),
            None => None,
        };
        let (gap_last, gap_avg) = match &gap {
            Some(g) => {
                let last = g.eval(&state.z)?;
                let avg = if !cfg.averaging {
                    None
                } else {
                    match state.averaged() {
                        Some(a) => Some(g.eval(&a)?),
                        None => Some(last),
                    }
                };
                (Some(last), avg)
            }
            None => (None, None),
        };
        Ok(TraceRow { k: state.k, costs: *est.ledger(), dist_sq: dist, lyapunov: lyap, gap_last, gap_avg })
    };

    let mut rows = Vec::with_capacity(cfg.iterations / stride + 2);
    rows.push(record(&state, &est)?);
    while state.k < cfg.iterations {
        iterate_once(&mut state, &mut est, p, cfg, &mut rngs)?;
        if state.k.is_multiple_of(stride) || state.k == cfg.iterations {
            rows.push(record(&state, &est)?);
        }
    }
    Ok(RunTrace {
        rows,
        z0,
        averaged: if cfg.averaging { state.averaged() } else { None },
        z_final: state.z,
        w_final: est.snapshot().to_vec(),
        has_distance: z_star.is_some(),
        has_gap: gap.is_some(),
    })
}
