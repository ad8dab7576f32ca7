//! Empirical checks of estimator unbiasedness and variance bounds.

use std::fmt::Write as _;

use crate::error::{check_len, Error, Result};
use crate::estimators::{assumption_constants, ConstantInputs, EstimatorKind, EstimatorState};
use crate::linalg::{dist_sq, norm_sq, sub};
use crate::problems::VIProblem;
use crate::rng::{rng_stream, RngStream};

/// Standard errors allowed between a Monte Carlo mean and its target.
pub const UNBIASED_SE_FACTOR: f64 = 4.0;
/// Absolute floor added to the unbiasedness tolerance, so deterministic
/// estimators (zero sample variance) are judged up to rounding.
pub const UNBIASED_ABS_TOL: f64 = 1e-10;
pub const EXACT_SLACK: f64 = 1.0;
pub const EXACT_ABS_TOL: f64 = 1e-9;
const MC_ABS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationRecord {
    pub lemma: String,
    pub variant: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub abs_tol: f64,
    pub n: usize,
    pub pass: bool,
}

impl VerificationRecord {
    fn new(lemma: &str, variant: &str, lhs: f64, rhs: f64, slack: f64, abs_tol: f64, n: usize) -> Self {
        let pass = lhs <= rhs * slack + abs_tol;
        VerificationRecord { lemma: lemma.into(), variant: variant.into(), lhs, rhs, slack, abs_tol, n, pass }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerificationReport {
    pub records: Vec<VerificationRecord>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.pass).count()
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.records.extend(other.records);
    }

    /// CSV with columns `lemma,variant,lhs,rhs,slack,n,pass`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lemma,variant,lhs,rhs,slack,n,pass\n");
        for r in &self.records {
            let _ =
                writeln!(out, "{},{},{:.12e},{:.12e},{},{},{}", r.lemma, r.variant, r.lhs, r.rhs, r.slack, r.n, r.pass);
        }
        out
    }
}

/// `count` pairs `(w, z_half)` of random feasible points.
pub fn random_pairs(p: &VIProblem, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = rng_stream(seed, 0);
    (0..count).map(|_| (p.random_point(&mut rng), p.random_point(&mut rng))).collect()
}

fn prepared(kind: &EstimatorKind, p: &VIProblem, w: &[f64], rng: &mut RngStream) -> Result<EstimatorState> {
    let mut s = EstimatorState::new(kind.clone(), p)?;
    s.init(p, w, rng)?;
    Ok(s)
}

/// Monte Carlo test of `E[g^{k+1/2} | z^{k+1/2}] = F(z^{k+1/2})`.
///
/// For each state `(w, z_half)` the estimator is anchored at `w` and sampled
/// `n` times at `z_half`. The recorded `lhs` is the largest per-coordinate
/// ratio `|mean - F| / (4 se + 1e-10)`, which must not exceed `rhs = 1`.
pub fn verify_unbiasedness(
    kind: &EstimatorKind,
    p: &VIProblem,
    states: &[(Vec<f64>, Vec<f64>)],
    n: usize,
    seed: u64,
) -> Result<VerificationReport> {
    if n < 2 {
        return Err(Error::Parameter("unbiasedness check needs at least 2 draws".into()));
    }
    let mut report = VerificationReport::default();
    for (idx, (w, z)) in states.iter().enumerate() {
        check_len(p.dim(), z.len())?;
        let mut rng = rng_stream(seed, idx as u64);
        let mut est = prepared(kind, p, w, &mut rng)?;
        let target = p.eval_full(z)?;
        let d = target.len();
        // Welford accumulation: exact for constant samples
        let mut mean = vec![0.0; d];
        let mut m2 = vec![0.0; d];
        for k in 1..=n {
            let g = est.correction(p, z, &mut rng)?;
            for i in 0..d {
                let delta = g[i] - mean[i];
                mean[i] += delta / k as f64;
                m2[i] += delta * (g[i] - mean[i]);
            }
        }
        let mut worst = 0.0f64;
        for i in 0..d {
            let se = (m2[i] / (n - 1) as f64 / n as f64).sqrt();
            let ratio = (mean[i] - target[i]).abs() / (UNBIASED_SE_FACTOR * se + UNBIASED_ABS_TOL);
            worst = worst.max(ratio);
        }
        report.records.push(VerificationRecord::new("unbiased", kind.name(), worst, 1.0, 1.0, 0.0, n));
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VerificationMode {
    /// Exact expectation over every random outcome of the estimator.
    Exact,
    MonteCarlo {
        n: usize,
        seed: u64,
    },
}

/// Checks `E||g^{k+1/2} - g^k||^2 <= A ||z_half - w||^2 + D1` and
/// `E||g^{k+1/2} - F(z_half)||^2 <= E ||z_half - w||^2 + D3` on each pair
/// `(w, z_half)` with `z^k = w`, using the kind's constant table.
pub fn verify_assumption2(
    kind: &EstimatorKind,
    p: &VIProblem,
    pairs: &[(Vec<f64>, Vec<f64>)],
    mode: VerificationMode,
) -> Result<VerificationReport> {
    if matches!(kind, EstimatorKind::Past { .. }) {
        return Err(Error::Unsupported("past estimator bounds depend on the iterate history".into()));
    }
    let k = assumption_constants(kind, &ConstantInputs::from_problem(p, kind)?)?;
    let mut report = VerificationReport::default();
    for (idx, (w, z)) in pairs.iter().enumerate() {
        check_len(p.dim(), z.len())?;
        let mut rng = rng_stream(
            match mode {
                VerificationMode::MonteCarlo { seed, .. } => seed,
                VerificationMode::Exact => 0,
            },
            idx as u64,
        );
        let mut est = prepared(kind, p, w, &mut rng)?;
        let target = p.eval_full(z)?;
        let gap = dist_sq(z, w);
        let (lhs11, lhs_var, n, slack, abs_tol) = match mode {
            VerificationMode::Exact => {
                if kind.is_randomized() && matches!(kind, EstimatorKind::Noisy { .. }) {
                    return Err(Error::Unsupported("noisy oracle cannot be enumerated".into()));
                }
                let g_k = est.lookahead(p, w, &mut rng)?;
                let outs = est.enumerate_correction(p, z)?;
                let lhs11: f64 = outs.iter().map(|(pr, g)| pr * dist_sq(g, &g_k)).sum();
                let lhs_var: f64 = outs.iter().map(|(pr, g)| pr * dist_sq(g, &target)).sum();
                (lhs11, lhs_var, outs.len(), EXACT_SLACK, EXACT_ABS_TOL)
            }
            VerificationMode::MonteCarlo { n, .. } => {
                if n == 0 {
                    return Err(Error::Parameter("Monte Carlo check needs draws".into()));
                }
                let (mut s11, mut svar) = (0.0, 0.0);
                for _ in 0..n {
                    let g_k = est.lookahead(p, w, &mut rng)?;
                    let g = est.correction(p, z, &mut rng)?;
                    s11 += norm_sq(&sub(&g, &g_k));
                    svar += dist_sq(&g, &target);
                }
                (s11 / n as f64, svar / n as f64, n, 1.0 + 5.0 / (n as f64).sqrt(), MC_ABS_TOL)
            }
        };
        report.records.push(VerificationRecord::new("eq11", kind.name(), lhs11, k.a * gap + k.d1, slack, abs_tol, n));
        report.records.push(VerificationRecord::new(
            "variance",
            kind.name(),
            lhs_var,
            k.e * gap + k.d3,
            slack,
            abs_tol,
            n,
        ));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::Quantizer;
    use crate::problems::{gen_policeman_burglar, gen_quadratic_vi};

    #[test]
    fn fulldet_is_exactly_unbiased() {
        let p = gen_policeman_burglar(2, 0.6, 3.0, 1).unwrap();
        let states = random_pairs(&p, 2, 3);
        let r = verify_unbiasedness(&EstimatorKind::FullDet, &p, &states, 1000, 1).unwrap();
        assert!(r.passed());
        assert!(r.records.iter().all(|x| x.lhs == 0.0));
    }

    #[test]
    fn vr_passes_and_miscaled_coord_fails() {
        let p = gen_policeman_burglar(3, 0.6, 3.0, 1).unwrap();
        let states = random_pairs(&p, 2, 4);
        assert!(verify_unbiasedness(&EstimatorKind::Vr, &p, &states, 20_000, 2).unwrap().passed());
        assert!(!verify_unbiasedness(&EstimatorKind::MisScaledCoord, &p, &states, 20_000, 2).unwrap().passed());
    }

    #[test]
    fn exact_coord_and_randk_bounds_hold() {
        let p = gen_policeman_burglar(2, 0.6, 3.0, 1).unwrap();
        let pairs = random_pairs(&p, 20, 5);
        assert!(verify_assumption2(&EstimatorKind::Coord, &p, &pairs, VerificationMode::Exact).unwrap().passed());
        let q = gen_quadratic_vi(6, 0.2, 2.0, 3).unwrap();
        let pairs = random_pairs(&q, 20, 6);
        for keep in 1..=3 {
            let kind = EstimatorKind::Quant(Quantizer::rand_k(keep, 6).unwrap());
            let r = verify_assumption2(&kind, &q, &pairs, VerificationMode::Exact).unwrap();
            assert!(r.passed(), "keep {keep}");
            assert_eq!(r.records.len(), 40);
        }
    }

    #[test]
    fn exact_mode_rejects_noisy_and_past() {
        let q = gen_quadratic_vi(3, 0.2, 2.0, 3).unwrap();
        let pairs = random_pairs(&q, 1, 1);
        assert!(verify_assumption2(&EstimatorKind::Noisy { sigma: 1.0 }, &q, &pairs, VerificationMode::Exact).is_err());
        assert!(verify_assumption2(&EstimatorKind::Past { sigma: 0.0 }, &q, &pairs, VerificationMode::Exact).is_err());
    }

    #[test]
    fn understated_constants_are_caught() {
        let p = gen_quadratic_vi(4, 0.5, 2.0, 3).unwrap();
        let mut c = p.constants().clone();
        c.lipschitz = 0.5;
        let understated = VIProblem::new(p.prox().clone(), p.operator().clone(), c, None);
        let pairs = random_pairs(&p, 20, 9);
        let kind = EstimatorKind::Coord;
        assert!(verify_assumption2(&kind, &p, &pairs, VerificationMode::Exact).unwrap().passed());
        assert!(!verify_assumption2(&kind, &understated, &pairs, VerificationMode::Exact).unwrap().passed());
    }

    #[test]
    fn monte_carlo_noisy_bounds() {
        let q = gen_quadratic_vi(4, 0.2, 2.0, 3).unwrap();
        let pairs: Vec<_> = random_pairs(&q, 3, 2).into_iter().map(|(w, _)| (w.clone(), w)).collect();
        let kind = EstimatorKind::Noisy { sigma: 1.0 };
        let r = verify_assumption2(&kind, &q, &pairs, VerificationMode::MonteCarlo { n: 20_000, seed: 3 }).unwrap();
        assert!(r.passed(), "{}", r.to_csv());
    }

    #[test]
    fn csv_layout() {
        let mut r = VerificationReport::default();
        r.records.push(VerificationRecord::new("eq11", "vr", 1.0, 2.0, 1.0, 0.0, 10));
        r.records.push(VerificationRecord::new("eq11", "vr", 3.0, 2.0, 1.0, 0.0, 10));
        let csv = r.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "lemma,variant,lhs,rhs,slack,n,pass");
        assert!(lines[1].ends_with(",true") && lines[2].ends_with(",false"));
        assert_eq!(r.failures(), 1);
        assert!(!r.passed());
    }
}
