//! Gradient estimators for the unified extra-step loop.
//!
//! Each [`EstimatorKind`] produces the pair `(g^k, g^{k+1/2})` through an
//! [`EstimatorState`], and comes with the constants of the variance bounds it
//! satisfies ([`assumption_constants`]) and its recommended snapshot
//! probability ([`optimal_tau`]).

mod quantizer;
mod state;

pub use quantizer::{index_bits, Quantizer, BITS_PER_VALUE};
pub use state::{CostLedger, EstPair, EstimatorState};

use crate::error::{Error, Result};
use crate::problems::VIProblem;

/// Tolerance on `Σ p_m = 1` for importance weights.
const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorKind {
    /// Exact operator at both points.
    FullDet,
    /// Stochastic oracle with additive Gaussian noise, `E||noise||^2 = sigma^2`.
    Noisy { sigma: f64 },
    /// Reuses the previous half-step oracle value, one call per iteration.
    Past { sigma: f64 },
    /// Finite-sum variance reduction with uniform component sampling.
    Vr,
    /// One random coordinate per iteration, scaled by `d`.
    Coord,
    /// Compressed difference to the snapshot operator.
    Quant(Quantizer),
    /// Compressed component difference to the snapshot.
    Qvr(Quantizer),
    /// Variance reduction with non-uniform component probabilities.
    Is { weights: Vec<f64> },
    /// Randomized local steps for a mixing problem; `split` is the probability
    /// of the local (`Φ`) branch.
    Local { split: f64 },
    /// Coord with scale `d/2` instead of `d`. Biased on purpose, used as a
    /// negative control for the verifiers.
    MisScaledCoord,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::FullDet => "fulldet",
            EstimatorKind::Noisy { .. } => "noisy",
            EstimatorKind::Past { .. } => "past",
            EstimatorKind::Vr => "vr",
            EstimatorKind::Coord => "coord",
            EstimatorKind::Quant(_) => "quant",
            EstimatorKind::Qvr(_) => "qvr",
            EstimatorKind::Is { .. } => "is",
            EstimatorKind::Local { .. } => "local",
            EstimatorKind::MisScaledCoord => "miscoord",
        }
    }

    /// Whether `g^{k+1/2}` involves random draws.
    pub fn is_randomized(&self) -> bool {
        match self {
            EstimatorKind::FullDet => false,
            EstimatorKind::Noisy { sigma } | EstimatorKind::Past { sigma } => *sigma > 0.0,
            EstimatorKind::Quant(q) => !matches!(q, Quantizer::Identity),
            _ => true,
        }
    }

    /// Whether the estimator keeps an operator cache at the snapshot `w`.
    pub fn uses_snapshot(&self) -> bool {
        !matches!(self, EstimatorKind::FullDet | EstimatorKind::Noisy { .. } | EstimatorKind::Past { .. })
    }

    /// Checks the kind's parameters against a problem.
    pub fn validate(&self, p: &VIProblem) -> Result<()> {
        match self {
            EstimatorKind::Noisy { sigma } | EstimatorKind::Past { sigma } => {
                if !(*sigma >= 0.0) || !sigma.is_finite() {
                    return Err(Error::Parameter(format!("noise sigma must be >= 0, got {sigma}")));
                }
            }
            EstimatorKind::Quant(q) | EstimatorKind::Qvr(q) => q.check_dim(p.dim())?,
            EstimatorKind::Is { weights } => {
                crate::error::check_len(p.component_count(), weights.len())?;
                check_weights(weights)?;
            }
            EstimatorKind::Local { split } => {
                if !(*split > 0.0 && *split < 1.0) {
                    return Err(Error::Parameter(format!("local split must lie in (0, 1), got {split}")));
                }
                if p.mixing().is_none() {
                    return Err(Error::Unsupported("local estimator needs a mixing problem".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::Empty("importance weights"));
    }
    if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::Parameter("importance weights must be positive".into()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::Parameter(format!("importance weights sum to {sum}, expected 1")));
    }
    Ok(())
}

/// `p_m = L_m / Σ L_m`.
pub fn importance_weights(lipschitz: &[f64]) -> Result<Vec<f64>> {
    if lipschitz.is_empty() {
        return Err(Error::Empty("component Lipschitz constants"));
    }
    if lipschitz.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::Parameter("component Lipschitz constants must be positive".into()));
    }
    let total: f64 = lipschitz.iter().sum();
    Ok(lipschitz.iter().map(|l| l / total).collect())
}

/// Problem quantities the constant tables are written in.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstantInputs {
    pub lipschitz: f64,
    pub bound_d: f64,
    pub sigma: f64,
    pub dim: usize,
    pub components: usize,
    /// `L_m` of the summands when `F` is written as a plain sum `Σ_m F_m`.
    pub component_lipschitz: Vec<f64>,
    pub component_d: Vec<f64>,
    pub lambda: f64,
}

impl ConstantInputs {
    /// Reads the inputs for `kind` off a problem.
    ///
    /// Problems store `F = (1/M) Σ F_m`, so per-component constants are divided
    /// by `M` to express them for the plain sum. For VR and QVR the single `L`
    /// must bound every component as well as `F`, so the maximum is taken.
    /// For Local, `L` is the constant of `Φ` alone.
    pub fn from_problem(p: &VIProblem, kind: &EstimatorKind) -> Result<Self> {
        let c = p.constants();
        let m = p.component_count();
        let max_l = c.component_lipschitz.iter().copied().fold(c.lipschitz, f64::max);
        let max_d = c.component_d.iter().copied().fold(c.bound_d, f64::max);
        let (lipschitz, bound_d, lambda) = match kind {
            EstimatorKind::Vr | EstimatorKind::Qvr(_) => (max_l, max_d, 0.0),
            EstimatorKind::Local { .. } => {
                let mix =
                    p.mixing().ok_or_else(|| Error::Unsupported("local estimator needs a mixing problem".into()))?;
                (mix.phi_lipschitz(), 0.0, mix.lambda())
            }
            _ => (c.lipschitz, c.bound_d, 0.0),
        };
        let sigma = match kind {
            EstimatorKind::Noisy { sigma } | EstimatorKind::Past { sigma } => *sigma,
            _ => 0.0,
        };
        Ok(ConstantInputs {
            lipschitz,
            bound_d,
            sigma,
            dim: p.dim(),
            components: m,
            component_lipschitz: c.component_lipschitz.iter().map(|l| l / m as f64).collect(),
            component_d: c.component_d.iter().map(|d| d / m as f64).collect(),
            lambda,
        })
    }
}

/// The constants `(A, B, C, E, D1, D2, D3, ρ)` of the variance conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionConstants {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub e: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub rho: f64,
    /// Recommended snapshot probability.
    pub tau_star: f64,
    /// Smallest Lyapunov weight allowed in the strongly monotone regime, `4B/ρ`.
    pub lyapunov_weight: f64,
}

impl AssumptionConstants {
    fn zero() -> Self {
        AssumptionConstants {
            a: 0.0,
            b: 0.0,
            c: 0.0,
            e: 0.0,
            d1: 0.0,
            d2: 0.0,
            d3: 0.0,
            rho: 1.0,
            tau_star: 0.0,
            lyapunov_weight: 0.0,
        }
    }
}

/// The per-kind constant table.
///
/// Local is not covered by a dedicated table; its constants follow from the
/// two-branch structure: `E||G(Z) - G(W)||^2 <= (L^2/s + λ^2/(1-s)) ||Z - W||^2`
/// with `s` the local-branch probability, and `D = 0` for smooth workers.
pub fn assumption_constants(kind: &EstimatorKind, inp: &ConstantInputs) -> Result<AssumptionConstants> {
    let l2 = inp.lipschitz * inp.lipschitz;
    let dd = inp.bound_d * inp.bound_d;
    let s2 = inp.sigma * inp.sigma;
    let mut k = AssumptionConstants::zero();
    match kind {
        EstimatorKind::FullDet | EstimatorKind::Noisy { .. } => {
            k.a = 3.0 * l2;
            k.d1 = 3.0 * dd + 6.0 * s2;
            k.d3 = s2;
        }
        EstimatorKind::Past { .. } => {
            k.rho = 1.0 / 3.0;
            k.b = 3.0;
            k.c = 2.0 * l2;
            k.d1 = 6.0 * s2;
            k.d2 = 4.0 * dd + 12.0 * s2;
            k.d3 = s2;
        }
        EstimatorKind::Vr => {
            k.a = l2;
            k.d1 = dd;
            k.e = 4.0 * l2;
            k.d3 = 4.0 * dd;
        }
        EstimatorKind::Coord | EstimatorKind::MisScaledCoord => {
            if inp.dim == 0 {
                return Err(Error::Parameter("coordinate estimator needs d >= 1".into()));
            }
            let d = inp.dim as f64;
            k.a = d * l2;
            k.d1 = d * dd;
            k.e = 2.0 * (d + 1.0) * l2;
            k.d3 = 2.0 * (d + 1.0) * dd;
        }
        EstimatorKind::Quant(q) | EstimatorKind::Qvr(q) => {
            let w = q.omega();
            k.a = w * l2;
            k.d1 = w * dd;
            k.e = 2.0 * (w + 1.0) * l2;
            k.d3 = 2.0 * (w + 1.0) * dd;
        }
        EstimatorKind::Is { weights } => {
            crate::error::check_len(inp.component_lipschitz.len(), weights.len())?;
            check_weights(weights)?;
            let a: f64 = inp.component_lipschitz.iter().zip(weights).map(|(l, p)| l * l / p).sum();
            let d1: f64 = if inp.component_d.is_empty() {
                0.0
            } else {
                crate::error::check_len(weights.len(), inp.component_d.len())?;
                inp.component_d.iter().zip(weights).map(|(d, p)| d * d / p).sum()
            };
            k.a = a;
            k.d1 = d1;
            k.e = 2.0 * (a + l2);
            k.d3 = 2.0 * (d1 + dd);
        }
        EstimatorKind::Local { split } => {
            if !(*split > 0.0 && *split < 1.0) || !(inp.lambda > 0.0) {
                return Err(Error::Parameter("local constants need split in (0,1) and lambda > 0".into()));
            }
            let a = l2 / split + inp.lambda * inp.lambda / (1.0 - split);
            let full = inp.lipschitz + inp.lambda;
            k.a = a;
            k.e = 2.0 * (a + full * full);
        }
    }
    k.tau_star = optimal_tau(kind, inp);
    k.lyapunov_weight = 4.0 * k.b / k.rho;
    Ok(k)
}

/// Recommended snapshot probability `τ`.
pub fn optimal_tau(kind: &EstimatorKind, inp: &ConstantInputs) -> f64 {
    let ratio = |x: f64| x / (x + 1.0);
    match kind {
        EstimatorKind::Vr => ratio(inp.components as f64),
        EstimatorKind::Coord | EstimatorKind::MisScaledCoord => ratio(inp.dim as f64),
        EstimatorKind::Quant(q) | EstimatorKind::Qvr(q) => ratio(q.omega()),
        EstimatorKind::Local { .. } => inp.lipschitz / (inp.lipschitz + inp.lambda),
        _ => 0.0,
    }
}
