//! Variational inequality instances and their operator oracles.
//!
//! A [`VIProblem`] bundles an operator `F = (1/M) Σ_m F_m`, the prox structure
//! of `h`, and the constants the step-size rules need. Three families are
//! provided: the Policeman-vs-Burglar matrix game, strongly monotone affine
//! (quadratic) instances, and federated mixing problems built from other
//! instances.

mod mixing;
mod pvb;
mod quadratic;

pub use mixing::{gen_mixing_vi, MixingVI};
pub use pvb::{cell_distance, gen_policeman_burglar, wealth_base, BilinearGame};
pub use quadratic::{gen_quadratic_vi, AffineMap, AffineOperator};

use crate::error::{check_len, Error, Result};
use crate::linalg::DenseMatrix;
use crate::prox::ProxSpec;
use crate::rng::RngStream;

/// Tolerance used when generators estimate spectral norms.
pub(crate) const GENERATOR_NORM_TOL: f64 = 1e-13;
pub(crate) const GENERATOR_NORM_ITERS: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConstants {
    /// `L` of the bounded-Lipschitz condition for the full operator.
    pub lipschitz: f64,
    /// `D` of the bounded-Lipschitz condition.
    pub bound_d: f64,
    pub mu_f: f64,
    pub mu_h: f64,
    /// Standard deviation bound of the stochastic oracle, if any.
    pub noise_sigma: f64,
    /// Per-component `L_m`.
    pub component_lipschitz: Vec<f64>,
    /// Per-component `D_m`.
    pub component_d: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum Operator {
    Bilinear(BilinearGame),
    Affine(AffineOperator),
    Mixing(MixingVI),
}

#[derive(Debug, Clone)]
pub struct VIProblem {
    dim: usize,
    prox: ProxSpec,
    operator: Operator,
    constants: ProblemConstants,
    known_solution: Option<Vec<f64>>,
}

impl VIProblem {
    pub(crate) fn new(
        prox: ProxSpec,
        operator: Operator,
        constants: ProblemConstants,
        known_solution: Option<Vec<f64>>,
    ) -> Self {
        VIProblem { dim: prox.dim(), prox, operator, constants, known_solution }
    }

    /// A single-component problem over a user-supplied matrix game `min_x max_y y^T A x`.
    pub fn from_game(matrix: DenseMatrix, prox: ProxSpec) -> Result<Self> {
        let game = BilinearGame::from_matrix(matrix);
        check_len(game.dim(), prox.dim())?;
        let l = game.mean().spectral_norm(GENERATOR_NORM_TOL, GENERATOR_NORM_ITERS);
        let constants = ProblemConstants {
            lipschitz: l,
            bound_d: 0.0,
            mu_f: 0.0,
            mu_h: 0.0,
            noise_sigma: 0.0,
            component_lipschitz: vec![l],
            component_d: vec![0.0],
        };
        Ok(VIProblem::new(prox, Operator::Bilinear(game), constants, None))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn prox(&self) -> &ProxSpec {
        &self.prox
    }

    pub fn operator(&self) -> &Operator {
        &self.operator
    }

    pub fn constants(&self) -> &ProblemConstants {
        &self.constants
    }

    pub fn known_solution(&self) -> Option<&[f64]> {
        self.known_solution.as_deref()
    }

    pub fn component_count(&self) -> usize {
        match &self.operator {
            Operator::Bilinear(g) => g.component_count(),
            Operator::Affine(a) => a.components().len(),
            Operator::Mixing(_) => 1,
        }
    }

    pub fn bilinear(&self) -> Option<&BilinearGame> {
        match &self.operator {
            Operator::Bilinear(g) => Some(g),
            _ => None,
        }
    }

    pub fn mixing(&self) -> Option<&MixingVI> {
        match &self.operator {
            Operator::Mixing(m) => Some(m),
            _ => None,
        }
    }

    /// Replaces the noise level recorded for stochastic-oracle runs.
    pub fn with_noise_sigma(mut self, sigma: f64) -> Self {
        self.constants.noise_sigma = sigma;
        self
    }

    /// Replaces the prox structure (dimension must match).
    pub fn with_prox(mut self, prox: ProxSpec) -> Result<Self> {
        check_len(self.dim, prox.dim())?;
        if let Some(z) = &self.known_solution {
            if !prox.is_feasible(z, 1e-10) {
                self.known_solution = None;
            }
        }
        self.prox = prox;
        Ok(self)
    }

    /// Exact `F(z)`.
    pub fn eval_full(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, z.len())?;
        Ok(match &self.operator {
            Operator::Bilinear(g) => g.eval_full(z),
            Operator::Affine(a) => a.mean().apply(z),
            Operator::Mixing(m) => m.eval_full(z)?,
        })
    }

    /// Exact `F_m(z)` for the zero-based component index `m`.
    pub fn eval_component(&self, m: usize, z: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, z.len())?;
        let count = self.component_count();
        if m >= count {
            return Err(Error::Index { index: m, len: count });
        }
        Ok(match &self.operator {
            Operator::Bilinear(g) => g.eval_component(m, z),
            Operator::Affine(a) => a.components()[m].apply(z),
            Operator::Mixing(mix) => mix.eval_full(z)?,
        })
    }

    /// The single coordinate `[F(z)]_i`, at the cost of one row of the operator.
    pub fn eval_coordinate(&self, i: usize, z: &[f64]) -> Result<f64> {
        check_len(self.dim, z.len())?;
        if i >= self.dim {
            return Err(Error::Index { index: i, len: self.dim });
        }
        Ok(match &self.operator {
            Operator::Bilinear(g) => g.eval_coordinate(i, z),
            Operator::Affine(a) => a.mean().apply_row(i, z),
            Operator::Mixing(m) => m.eval_coordinate(i, z)?,
        })
    }

    /// Affine representation `F(z) = M z - b` of the full operator, when it has one
    /// that can be written down without probing.
    pub fn affine_parts(&self) -> Option<(DenseMatrix, Vec<f64>)> {
        match &self.operator {
            Operator::Bilinear(g) => Some((g.block_operator(), vec![0.0; self.dim])),
            Operator::Affine(a) => Some((a.mean().matrix().clone(), a.mean().offset().to_vec())),
            Operator::Mixing(m) => m.affine_parts(),
        }
    }

    /// Splits a finite sum into one problem per component, each over free space.
    pub fn split_components(&self) -> Result<Vec<VIProblem>> {
        let c = &self.constants;
        match &self.operator {
            Operator::Bilinear(g) => (0..g.component_count())
                .map(|m| {
                    let game = g.component_game(m);
                    let l = c.component_lipschitz[m];
                    Ok(VIProblem::new(
                        ProxSpec::free(self.dim),
                        Operator::Bilinear(game),
                        ProblemConstants {
                            lipschitz: l,
                            bound_d: c.component_d[m],
                            mu_f: 0.0,
                            mu_h: 0.0,
                            noise_sigma: 0.0,
                            component_lipschitz: vec![l],
                            component_d: vec![c.component_d[m]],
                        },
                        None,
                    ))
                })
                .collect(),
            Operator::Affine(a) => Ok(a
                .components()
                .iter()
                .enumerate()
                .map(|(m, map)| {
                    let l = c.component_lipschitz[m];
                    VIProblem::new(
                        ProxSpec::free(self.dim),
                        Operator::Affine(AffineOperator::single(map.clone())),
                        ProblemConstants {
                            lipschitz: l,
                            bound_d: c.component_d[m],
                            mu_f: if a.components().len() == 1 { c.mu_f } else { 0.0 },
                            mu_h: 0.0,
                            noise_sigma: 0.0,
                            component_lipschitz: vec![l],
                            component_d: vec![c.component_d[m]],
                        },
                        None,
                    )
                })
                .collect()),
            Operator::Mixing(_) => Err(Error::Unsupported("splitting a mixing problem".into())),
        }
    }

    /// A random feasible point: Dirichlet(1) draws on simplex blocks, standard
    /// normal entries in free space.
    pub fn random_point(&self, rng: &mut RngStream) -> Vec<f64> {
        match &self.prox {
            ProxSpec::Free(d) => rng.normal_vec(*d),
            ProxSpec::ProductOfSimplices(_) => {
                let mut z = Vec::with_capacity(self.dim);
                for (_, len) in self.prox.blocks() {
                    let e: Vec<f64> = (0..len).map(|_| -(1.0 - rng.uniform()).ln()).collect();
                    let s: f64 = e.iter().sum();
                    z.extend(e.into_iter().map(|x| x / s));
                }
                z
            }
        }
    }
}

/// Spectral norm of the linear part of an affine operator, by power iteration
/// to relative tolerance `tol`.
pub fn estimate_lipschitz(p: &VIProblem, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Parameter("tolerance must be positive".into()));
    }
    let max_iter = 1_000_000;
    match p.operator() {
        // The block operator [[0, A^T], [-A, 0]] has the singular values of A.
        Operator::Bilinear(g) => Ok(g.mean().spectral_norm(tol, max_iter)),
        Operator::Affine(a) => Ok(a.mean().matrix().spectral_norm(tol, max_iter)),
        Operator::Mixing(_) => {
            Err(Error::Unsupported("Lipschitz estimation for mixing operators; use the base constants".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dist_sq, dot, norm, sub};
    use crate::rng::rng_stream;

    #[test]
    fn split_components_reproduce_component_operators() {
        let p = gen_policeman_burglar(3, 0.6, 3.0, 4).unwrap();
        let parts = p.split_components().unwrap();
        assert_eq!(parts.len(), 3);
        let mut r = rng_stream(1, 0);
        let z = p.random_point(&mut r);
        for (m, part) in parts.iter().enumerate() {
            assert!(part.prox().is_free());
            let a = part.eval_full(&z).unwrap();
            let b = p.eval_component(m, &z).unwrap();
            assert!(dist_sq(&a, &b) < 1e-24);
        }
    }

    #[test]
    fn coordinate_oracle_matches_full() {
        let problems = [gen_policeman_burglar(3, 0.6, 3.0, 1).unwrap(), gen_quadratic_vi(7, 0.5, 4.0, 2).unwrap()];
        let mut r = rng_stream(8, 8);
        for p in &problems {
            let z = p.random_point(&mut r);
            let full = p.eval_full(&z).unwrap();
            for (i, fi) in full.iter().enumerate() {
                assert!((p.eval_coordinate(i, &z).unwrap() - fi).abs() < 1e-12);
            }
            assert!(p.eval_coordinate(p.dim(), &z).is_err());
        }
    }

    #[test]
    fn affine_parts_reproduce_operator() {
        let p = gen_policeman_burglar(2, 0.6, 1.0, 3).unwrap();
        let (m, b) = p.affine_parts().unwrap();
        let mut r = rng_stream(2, 2);
        let z = p.random_point(&mut r);
        let direct = p.eval_full(&z).unwrap();
        let via = sub(&m.matvec(&z), &b);
        assert!(dist_sq(&direct, &via) < 1e-24);
    }

    #[test]
    fn estimated_lipschitz_bounds_differences() {
        let p = gen_quadratic_vi(12, 0.3, 5.0, 9).unwrap();
        let tol = 1e-6;
        let l = estimate_lipschitz(&p, tol).unwrap();
        let mut r = rng_stream(4, 4);
        for _ in 0..200 {
            let a = p.random_point(&mut r);
            let b = p.random_point(&mut r);
            let fa = p.eval_full(&a).unwrap();
            let fb = p.eval_full(&b).unwrap();
            assert!(norm(&sub(&fa, &fb)) <= l * (1.0 + tol) * norm(&sub(&a, &b)) + 1e-12);
            let _ = dot(&a, &b);
        }
    }

    #[test]
    fn zero_matrix_has_zero_lipschitz() {
        let p = VIProblem::from_game(DenseMatrix::zeros(2, 2), ProxSpec::simplices(vec![2, 2]).unwrap()).unwrap();
        assert_eq!(estimate_lipschitz(&p, 1e-6).unwrap(), 0.0);
    }
}
