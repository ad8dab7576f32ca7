//! Federated mixing: `F(Z) = Φ(Z) + λ (Z - Z_avg)` over stacked worker models.

use super::{Operator, ProblemConstants, VIProblem};
use crate::error::{check_len, Error, Result};
use crate::linalg::{norm, DenseMatrix};
use crate::prox::ProxSpec;

#[derive(Debug, Clone)]
pub struct MixingVI {
    bases: Vec<VIProblem>,
    lambda: f64,
    block_dim: usize,
}

impl MixingVI {
    pub fn workers(&self) -> usize {
        self.bases.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn bases(&self) -> &[VIProblem] {
        &self.bases
    }

    /// Lipschitz constant of `Φ`: the largest worker constant.
    pub fn phi_lipschitz(&self) -> f64 {
        self.bases.iter().map(|b| b.constants().lipschitz).fold(0.0, f64::max)
    }

    /// `Z_avg`: every block replaced by the mean block.
    pub fn average(&self, z: &[f64]) -> Vec<f64> {
        let d = self.block_dim;
        let m = self.workers() as f64;
        let mut mean = vec![0.0; d];
        for block in z.chunks(d) {
            mean.iter_mut().zip(block).for_each(|(a, b)| *a += b / m);
        }
        mean.iter().cycle().take(z.len()).copied().collect()
    }

    pub fn eval_phi(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len(self.block_dim * self.workers(), z.len())?;
        let mut out = Vec::with_capacity(z.len());
        for (base, block) in self.bases.iter().zip(z.chunks(self.block_dim)) {
            out.extend(base.eval_full(block)?);
        }
        Ok(out)
    }

    /// `λ (Z - Z_avg)`.
    pub fn eval_consensus(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len(self.block_dim * self.workers(), z.len())?;
        let avg = self.average(z);
        Ok(z.iter().zip(&avg).map(|(a, b)| self.lambda * (a - b)).collect())
    }

    pub fn eval_full(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut phi = self.eval_phi(z)?;
        let cons = self.eval_consensus(z)?;
        phi.iter_mut().zip(&cons).for_each(|(a, b)| *a += b);
        Ok(phi)
    }

    /// `F(Z) = M Z - b` for the stacked problem when every worker is affine.
    pub fn affine_parts(&self) -> Option<(DenseMatrix, Vec<f64>)> {
        let d = self.block_dim;
        let m = self.workers();
        let n = d * m;
        let mut a = DenseMatrix::zeros(n, n);
        let mut rhs = Vec::with_capacity(n);
        for (w, base) in self.bases.iter().enumerate() {
            let (mat, off) = base.affine_parts()?;
            rhs.extend_from_slice(&off);
            for i in 0..d {
                for j in 0..d {
                    a.set(w * d + i, w * d + j, mat.get(i, j));
                }
            }
        }
        let share = self.lambda / m as f64;
        for i in 0..n {
            a.set(i, i, a.get(i, i) + self.lambda);
            for w in 0..m {
                let j = w * d + i % d;
                a.set(i, j, a.get(i, j) - share);
            }
        }
        Some((a, rhs))
    }

    pub fn eval_coordinate(&self, i: usize, z: &[f64]) -> Result<f64> {
        let d = self.block_dim;
        let (worker, local) = (i / d, i % d);
        let phi = self.bases[worker].eval_coordinate(local, &z[worker * d..(worker + 1) * d])?;
        let mean = z.iter().skip(local).step_by(d).sum::<f64>() / self.workers() as f64;
        Ok(phi + self.lambda * (z[i] - mean))
    }
}

/// Stacks `M` free-space problems of equal dimension into a mixing problem.
///
/// The recorded `L` is `max_m L_m + λ`, a bound for the whole operator; the
/// `Φ` part alone has [`MixingVI::phi_lipschitz`]. When every base is affine the
/// solution of the stacked linear system is recorded as the known solution.
pub fn gen_mixing_vi(bases: Vec<VIProblem>, lambda: f64) -> Result<VIProblem> {
    let first = bases.first().ok_or(Error::Empty("mixing base problems"))?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Parameter(format!("lambda must be positive, got {lambda}")));
    }
    let d = first.dim();
    for b in &bases {
        check_len(d, b.dim())?;
        if !b.prox().is_free() {
            return Err(Error::Parameter("mixing bases must be unconstrained".into()));
        }
    }
    let mix = MixingVI { bases, lambda, block_dim: d };
    let phi_l = mix.phi_lipschitz();
    let constants = ProblemConstants {
        lipschitz: phi_l + lambda,
        bound_d: mix.bases.iter().map(|b| b.constants().bound_d).fold(0.0, f64::max),
        mu_f: mix.bases.iter().map(|b| b.constants().mu_f).fold(f64::INFINITY, f64::min),
        mu_h: 0.0,
        noise_sigma: 0.0,
        component_lipschitz: vec![phi_l + lambda],
        component_d: vec![0.0],
    };
    let solution = stacked_solution(&mix);
    Ok(VIProblem::new(ProxSpec::free(d * mix.workers()), Operator::Mixing(mix), constants, solution))
}

fn stacked_solution(mix: &MixingVI) -> Option<Vec<f64>> {
    let (mat, off) = mix.affine_parts()?;
    let n = mat.rows();
    let a = nalgebra::DMatrix::from_row_slice(n, n, mat.data());
    let sol = a.lu().solve(&nalgebra::DVector::from_column_slice(&off))?;
    let z: Vec<f64> = sol.iter().copied().collect();
    let f = mix.eval_full(&z).ok()?;
    (norm(&f) <= 1e-8 * (1.0 + norm(&z)) && z.iter().all(|x| x.is_finite())).then_some(z)
}
