//! Matrix games `min_x max_y y^T A x` over probability simplices, and the
//! Policeman-vs-Burglar generator.

use super::{Operator, ProblemConstants, VIProblem, GENERATOR_NORM_ITERS, GENERATOR_NORM_TOL};
use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix};
use crate::prox::ProxSpec;
use crate::rng::rng_stream;

/// Finite-sum bilinear game with components `A^(k) = s_k * A_base`.
///
/// The variable is `z = (x, y)` with `x` of length `cols` and `y` of length
/// `rows`; the operator is `F(z) = (A^T y, -A x)` for the averaged matrix.
#[derive(Debug, Clone)]
pub struct BilinearGame {
    side: Option<usize>,
    base: DenseMatrix,
    scales: Vec<f64>,
    mean: DenseMatrix,
}

impl BilinearGame {
    pub fn from_matrix(a: DenseMatrix) -> Self {
        Self::from_scaled(None, a, vec![1.0])
    }

    fn from_scaled(side: Option<usize>, base: DenseMatrix, scales: Vec<f64>) -> Self {
        let mean_scale = scales.iter().sum::<f64>() / scales.len() as f64;
        let mean = base.scaled(mean_scale);
        BilinearGame { side, base, scales, mean }
    }

    /// Grid side `n` for generated games.
    pub fn side(&self) -> Option<usize> {
        self.side
    }

    pub fn component_count(&self) -> usize {
        self.scales.len()
    }

    pub fn x_len(&self) -> usize {
        self.base.cols()
    }

    pub fn y_len(&self) -> usize {
        self.base.rows()
    }

    pub fn dim(&self) -> usize {
        self.x_len() + self.y_len()
    }

    /// Averaged matrix `Ā = (1/M) Σ A^(k)`.
    pub fn mean(&self) -> &DenseMatrix {
        &self.mean
    }

    pub fn base(&self) -> &DenseMatrix {
        &self.base
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// Materializes `A^(k)`.
    pub fn component_matrix(&self, k: usize) -> DenseMatrix {
        self.base.scaled(self.scales[k])
    }

    pub(crate) fn component_game(&self, k: usize) -> BilinearGame {
        BilinearGame::from_matrix(self.component_matrix(k))
    }

    pub fn split<'a>(&self, z: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        z.split_at(self.x_len())
    }

    fn apply(&self, a: &DenseMatrix, scale: f64, z: &[f64]) -> Vec<f64> {
        let (x, y) = self.split(z);
        let mut out = a.matvec_t(y);
        out.extend(a.matvec(x).into_iter().map(|v| -v));
        if scale != 1.0 {
            out.iter_mut().for_each(|v| *v *= scale);
        }
        out
    }

    pub fn eval_full(&self, z: &[f64]) -> Vec<f64> {
        self.apply(&self.mean, 1.0, z)
    }

    pub fn eval_component(&self, k: usize, z: &[f64]) -> Vec<f64> {
        self.apply(&self.base, self.scales[k], z)
    }

    pub fn eval_coordinate(&self, i: usize, z: &[f64]) -> f64 {
        let (x, y) = self.split(z);
        if i < self.x_len() {
            self.mean.col_dot(i, y)
        } else {
            -dot(self.mean.row(i - self.x_len()), x)
        }
    }

    /// The skew block matrix `[[0, Ā^T], [-Ā, 0]]` of the full operator.
    pub fn block_operator(&self) -> DenseMatrix {
        let nx = self.x_len();
        let ny = self.y_len();
        let mut m = DenseMatrix::zeros(nx + ny, nx + ny);
        for i in 0..ny {
            for j in 0..nx {
                let a = self.mean.get(i, j);
                m.set(j, nx + i, a);
                m.set(nx + i, j, -a);
            }
        }
        m
    }
}

/// Pyramid-shaped wealth on the flattened `n x n` grid:
/// `w_i = 1 - (2/n) * min(|floor(i/n) - n/2|, |i mod n - n/2|)`.
pub fn wealth_base(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let half = nf / 2.0;
    (0..n * n)
        .map(|i| {
            let r = (i / n) as f64;
            let c = (i % n) as f64;
            1.0 - (2.0 / nf) * (r - half).abs().min((c - half).abs())
        })
        .collect()
}

/// Euclidean distance between flattened grid cells `i` and `j`.
pub fn cell_distance(i: usize, j: usize, n: usize) -> Result<f64> {
    let cells = n * n;
    for idx in [i, j] {
        if idx >= cells {
            return Err(Error::Index { index: idx, len: cells });
        }
    }
    let dr = (i / n) as f64 - (j / n) as f64;
    let dc = (i % n) as f64 - (j % n) as f64;
    Ok((dr * dr + dc * dc).sqrt())
}

/// Builds the Policeman-vs-Burglar game on an `n x n` city.
///
/// Component `k` uses wealth `w * (1 + xi_k)` with `xi_k ~ U[0, sigma_w]` drawn
/// once from stream `(seed, 0)`; `A^(k)_ij = w_i^(k) (1 - exp(-theta d(i, j)))`.
/// Since every component is a multiple of the same matrix, the game stores the
/// base matrix and the multipliers `1 + xi_k`.
pub fn gen_policeman_burglar(n: usize, theta: f64, sigma_w: f64, seed: u64) -> Result<VIProblem> {
    if n == 0 {
        return Err(Error::Parameter("grid side n must be at least 1".into()));
    }
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::Parameter(format!("theta must be positive, got {theta}")));
    }
    if !(sigma_w >= 0.0) || !sigma_w.is_finite() {
        return Err(Error::Parameter(format!("sigma_w must be nonnegative, got {sigma_w}")));
    }
    let cells = n * n;
    let w = wealth_base(n);
    let base = DenseMatrix::from_fn(cells, cells, |i, j| {
        let d = cell_distance(i, j, n).expect("indices in range");
        w[i] * (1.0 - (-theta * d).exp())
    });
    let mut rng = rng_stream(seed, 0);
    let scales: Vec<f64> = (0..n).map(|_| 1.0 + rng.uniform_in(0.0, sigma_w)).collect();
    let game = BilinearGame::from_scaled(Some(n), base, scales);

    let base_norm = game.base.spectral_norm(GENERATOR_NORM_TOL, GENERATOR_NORM_ITERS);
    let mean_scale = game.scales.iter().sum::<f64>() / n as f64;
    let constants = ProblemConstants {
        lipschitz: base_norm * mean_scale,
        bound_d: 0.0,
        mu_f: 0.0,
        mu_h: 0.0,
        noise_sigma: 0.0,
        component_lipschitz: game.scales.iter().map(|s| s * base_norm).collect(),
        component_d: vec![0.0; n],
    };
    let prox = ProxSpec::simplices(vec![cells, cells])?;
    Ok(VIProblem::new(prox, Operator::Bilinear(game), constants, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dist_sq, dot, sub};
    use crate::problems::estimate_lipschitz;
    use crate::rng::rng_stream;

    #[test]
    fn wealth_examples() {
        let w = wealth_base(2);
        assert_eq!(w[3], 1.0);
        assert_eq!(w[0], 0.0);
        for n in [2usize, 4, 6, 10] {
            let center = (n / 2) * n + n / 2;
            assert_eq!(wealth_base(n)[center], 1.0);
        }
    }

    #[test]
    fn distance_examples() {
        assert_eq!(cell_distance(4, 4, 3).unwrap(), 0.0);
        assert!((cell_distance(0, 4, 3).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(cell_distance(0, 2, 3).unwrap(), 2.0);
        assert_eq!(cell_distance(2, 0, 3).unwrap(), cell_distance(0, 2, 3).unwrap());
        assert!(matches!(cell_distance(9, 0, 3), Err(Error::Index { .. })));
    }

    #[test]
    fn paper_scale_instance_dimensions() {
        let p = gen_policeman_burglar(25, 0.6, 3.0, 1).unwrap();
        assert_eq!(p.dim(), 1250);
        assert_eq!(p.component_count(), 25);
        assert_eq!(p.prox(), &ProxSpec::ProductOfSimplices(vec![625, 625]));
    }

    #[test]
    fn zero_noise_gives_identical_components() {
        let p = gen_policeman_burglar(3, 0.6, 0.0, 5).unwrap();
        let g = p.bilinear().unwrap();
        let mut r = rng_stream(0, 0);
        let z = p.random_point(&mut r);
        let full = p.eval_full(&z).unwrap();
        for k in 0..3 {
            assert_eq!(g.component_matrix(k), *g.mean());
            assert_eq!(p.eval_component(k, &z).unwrap(), full);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_policeman_burglar(4, 0.6, 3.0, 77).unwrap();
        let b = gen_policeman_burglar(4, 0.6, 3.0, 77).unwrap();
        let (ga, gb) = (a.bilinear().unwrap(), b.bilinear().unwrap());
        for k in 0..4 {
            assert_eq!(ga.component_matrix(k), gb.component_matrix(k));
        }
        assert_eq!(a.constants(), b.constants());
        let c = gen_policeman_burglar(4, 0.6, 3.0, 78).unwrap();
        assert_ne!(ga.scales(), c.bilinear().unwrap().scales());
    }

    #[test]
    fn matrix_entries_are_bounded_with_zero_diagonal() {
        let sigma_w = 3.0;
        let p = gen_policeman_burglar(5, 0.6, sigma_w, 2).unwrap();
        let g = p.bilinear().unwrap();
        for k in 0..5 {
            let a = g.component_matrix(k);
            for i in 0..25 {
                assert_eq!(a.get(i, i), 0.0);
                for j in 0..25 {
                    let v = a.get(i, j);
                    assert!((0.0..=1.0 + sigma_w).contains(&v));
                }
            }
        }
    }

    #[test]
    fn operator_is_skew() {
        let p = gen_policeman_burglar(4, 0.6, 3.0, 3).unwrap();
        let mut r = rng_stream(12, 0);
        for _ in 0..1000 {
            let z1 = p.random_point(&mut r);
            let z2 = p.random_point(&mut r);
            let f1 = p.eval_full(&z1).unwrap();
            let f2 = p.eval_full(&z2).unwrap();
            assert!(dot(&sub(&f1, &f2), &sub(&z1, &z2)).abs() <= 1e-12);
            assert!(dot(&f1, &z1).abs() <= 1e-12);
        }
    }

    #[test]
    fn components_average_to_full_operator() {
        let p = gen_policeman_burglar(4, 0.6, 3.0, 8).unwrap();
        let mut r = rng_stream(13, 0);
        for _ in 0..100 {
            let z = p.random_point(&mut r);
            let full = p.eval_full(&z).unwrap();
            let mut avg = vec![0.0; p.dim()];
            for m in 0..p.component_count() {
                let fm = p.eval_component(m, &z).unwrap();
                avg.iter_mut().zip(&fm).for_each(|(a, b)| *a += b / 4.0);
            }
            assert!(dist_sq(&avg, &full).sqrt() <= 1e-10);
        }
        assert!(p.eval_component(4, &vec![0.0; p.dim()]).is_err());
    }

    #[test]
    fn uniform_strategies_give_row_and_column_means() {
        let p = gen_policeman_burglar(3, 0.6, 3.0, 8).unwrap();
        let a = p.bilinear().unwrap().mean().clone();
        let z = p.prox().center();
        let f = p.eval_full(&z).unwrap();
        for (j, fj) in f.iter().take(9).enumerate() {
            let col_mean = (0..9).map(|i| a.get(i, j)).sum::<f64>() / 9.0;
            assert!((fj - col_mean).abs() < 1e-14);
        }
        for i in 0..9 {
            let row_mean = a.row(i).iter().sum::<f64>() / 9.0;
            assert!((f[9 + i] + row_mean).abs() < 1e-14);
        }
    }

    #[test]
    fn lipschitz_matches_dense_svd() {
        for n in 1..=5 {
            let p = gen_policeman_burglar(n, 0.6, 3.0, n as u64).unwrap();
            let a = p.bilinear().unwrap().mean();
            let m = nalgebra::DMatrix::from_row_slice(a.rows(), a.cols(), a.data());
            let sigma_max = m.singular_values().iter().cloned().fold(0.0, f64::max);
            let tol = 1e-10;
            let est = estimate_lipschitz(&p, tol).unwrap();
            assert!((est - sigma_max).abs() <= 1e-8 * sigma_max.max(1.0), "n={n}: {est} vs {sigma_max}");
            assert!((p.constants().lipschitz - sigma_max).abs() <= 1e-8 * sigma_max.max(1.0));
        }
    }
}
