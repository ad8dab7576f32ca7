//! Strongly monotone affine instances `F(z) = M (z - z*)`.

use super::{Operator, ProblemConstants, VIProblem};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, DenseMatrix};
use crate::prox::ProxSpec;
use crate::rng::{rng_stream, RngStream};

/// `z -> M z - b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    matrix: DenseMatrix,
    offset: Vec<f64>,
}

impl AffineMap {
    pub fn new(matrix: DenseMatrix, offset: Vec<f64>) -> Result<Self> {
        if matrix.rows() != matrix.cols() {
            return Err(Error::Parameter("affine operator matrix must be square".into()));
        }
        crate::error::check_len(matrix.rows(), offset.len())?;
        Ok(AffineMap { matrix, offset })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.matrix.matvec(z);
        out.iter_mut().zip(&self.offset).for_each(|(o, b)| *o -= b);
        out
    }

    pub fn apply_row(&self, i: usize, z: &[f64]) -> f64 {
        dot(self.matrix.row(i), z) - self.offset[i]
    }
}

/// Finite sum of affine maps together with their average.
#[derive(Debug, Clone)]
pub struct AffineOperator {
    components: Vec<AffineMap>,
    mean: AffineMap,
}

impl AffineOperator {
    pub fn single(map: AffineMap) -> Self {
        AffineOperator { components: vec![map.clone()], mean: map }
    }

    pub fn components(&self) -> &[AffineMap] {
        &self.components
    }

    pub fn mean(&self) -> &AffineMap {
        &self.mean
    }
}

/// Orthonormal `d x d` matrix from modified Gram–Schmidt on Gaussian columns.
fn random_orthogonal(d: usize, rng: &mut RngStream) -> DenseMatrix {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    while cols.len() < d {
        let mut v = rng.normal_vec(d);
        for q in &cols {
            let c = dot(q, &v);
            v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= c * qi);
        }
        let len = norm(&v);
        if len < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= len);
        cols.push(v);
    }
    DenseMatrix::from_fn(d, d, |i, j| cols[j][i])
}

/// Random strongly monotone affine problem over free space.
///
/// `M = Q B Q^T` with `Q` orthogonal and `B` block diagonal with 2x2 blocks
/// `[[a, b], [-b, a]]` (plus a 1x1 block when `d` is odd). Then `M = mu I + S + P`
/// with `S` skew and `P` symmetric positive semidefinite, every block has
/// `a >= mu`, and the largest `sqrt(a^2 + b^2)` equals `L`, so the spectral norm
/// is exactly `L` and the monotonicity constant is `mu`. The first 2x2 block
/// is `a = mu, b = sqrt(L^2 - mu^2)`. For `d = 1` the only block is `[L]`.
pub fn gen_quadratic_vi(d: usize, mu: f64, l: f64, seed: u64) -> Result<VIProblem> {
    if d == 0 {
        return Err(Error::Parameter("dimension must be at least 1".into()));
    }
    if !(mu > 0.0) || !mu.is_finite() || !l.is_finite() {
        return Err(Error::Parameter(format!("mu must be positive and finite, got {mu}")));
    }
    if mu > l {
        return Err(Error::Parameter(format!("mu = {mu} exceeds L = {l}")));
    }
    let mut rng = rng_stream(seed, 0);
    let q = random_orthogonal(d, &mut rng);

    let mut b = DenseMatrix::zeros(d, d);
    let pairs = d / 2;
    for p in 0..pairs {
        let (a, s) = if p == 0 {
            (mu, (l * l - mu * mu).max(0.0).sqrt())
        } else {
            let a = rng.uniform_in(mu, l);
            let s = rng.uniform() * (l * l - a * a).max(0.0).sqrt();
            (a, s)
        };
        let i = 2 * p;
        b.set(i, i, a);
        b.set(i + 1, i + 1, a);
        b.set(i, i + 1, s);
        b.set(i + 1, i, -s);
    }
    if d % 2 == 1 {
        let a = if d == 1 { l } else { rng.uniform_in(mu, l) };
        b.set(d - 1, d - 1, a);
    }
    let m = q.matmul(&b).matmul(&q.transpose());
    let z_star = rng.normal_vec(d);
    let offset = m.matvec(&z_star);
    let map = AffineMap::new(m, offset)?;

    let constants = ProblemConstants {
        lipschitz: l,
        bound_d: 0.0,
        mu_f: mu,
        mu_h: 0.0,
        noise_sigma: 0.0,
        component_lipschitz: vec![l],
        component_d: vec![0.0],
    };
    Ok(VIProblem::new(ProxSpec::free(d), Operator::Affine(AffineOperator::single(map)), constants, Some(z_star)))
}
