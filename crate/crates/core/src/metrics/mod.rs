//! Gap functions, distances and the estimator verification suite.
//!
//! The gap is the restricted (weak) gap `max_{u ∈ C} <F(u), z - u>` with `h`
//! the indicator of the feasible set. For games `C` is the product of
//! simplices and the gap has a closed form; for free affine problems `C` is a
//! Euclidean ball around the solution.

mod verify;

pub use verify::{
    random_pairs, verify_assumption2, verify_unbiasedness, VerificationMode, VerificationRecord, VerificationReport,
    EXACT_ABS_TOL, EXACT_SLACK, UNBIASED_ABS_TOL, UNBIASED_SE_FACTOR,
};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dist_sq, dot, norm, sub, DenseMatrix};
use crate::problems::{BilinearGame, VIProblem};
use crate::prox::ProxSpec;

/// Tolerance on simplex block sums accepted by the gap functions.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Squared Euclidean distance `||z - z*||^2`.
pub fn distance_to_solution(z: &[f64], z_star: &[f64]) -> Result<f64> {
    check_len(z_star.len(), z.len())?;
    Ok(dist_sq(z, z_star))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub value: f64,
    /// Best responses `(i, j)`: the row maximizing `(Āx)_i` and the column
    /// minimizing `(Ā^T y)_j`. Only set for games.
    pub best_response: Option<(usize, usize)>,
}

fn check_simplex(v: &[f64], what: &str) -> Result<()> {
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > FEASIBILITY_TOL || v.iter().any(|&x| x < -FEASIBILITY_TOL) {
        return Err(Error::Feasibility(format!("{what} is not in the simplex (sum {sum})")));
    }
    Ok(())
}

/// `max_i (Āx)_i - min_j (Ā^T y)_j` together with the maximizing vertices.
pub fn bilinear_gap_report(game: &BilinearGame, x: &[f64], y: &[f64]) -> Result<GapReport> {
    check_len(game.x_len(), x.len())?;
    check_len(game.y_len(), y.len())?;
    check_simplex(x, "x")?;
    check_simplex(y, "y")?;
    let ax = game.mean().matvec(x);
    let aty = game.mean().matvec_t(y);
    let (i, hi) = ax.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
    let (j, lo) = aty.iter().enumerate().fold((0, f64::INFINITY), |b, (j, &v)| if v < b.1 { (j, v) } else { b });
    Ok(GapReport { value: hi - lo, best_response: Some((i, j)) })
}

pub fn duality_gap_bilinear(game: &BilinearGame, x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(bilinear_gap_report(game, x, y)?.value)
}

/// Gap over an explicit vertex list of `C`. The objective is linear in `u`
/// only for bilinear operators; for other operators this is a lower bound.
pub fn restricted_gap_bruteforce(p: &VIProblem, z: &[f64], vertices: &[Vec<f64>]) -> Result<f64> {
    if vertices.is_empty() {
        return Err(Error::Empty("gap vertex set"));
    }
    check_len(p.dim(), z.len())?;
    let mut best = f64::NEG_INFINITY;
    for u in vertices {
        let f = p.eval_full(u)?;
        best = best.max(dot(&f, &sub(z, u)));
    }
    Ok(best)
}

/// All vertices of a product of simplices (`Π n_b` of them).
pub fn simplex_product_vertices(prox: &ProxSpec) -> Result<Vec<Vec<f64>>> {
    let blocks = match prox {
        ProxSpec::ProductOfSimplices(_) => prox.blocks(),
        ProxSpec::Free(_) => return Err(Error::Unsupported("free space has no vertices".into())),
    };
    let mut out = vec![vec![0.0; prox.dim()]];
    for (start, len) in blocks {
        let mut next = Vec::with_capacity(out.len() * len);
        for v in &out {
            for k in 0..len {
                let mut u = v.clone();
                u[start + k] = 1.0;
                next.push(u);
            }
        }
        out = next;
    }
    Ok(out)
}

/// The compact set `C` the gap is maximized over.
#[derive(Debug, Clone, PartialEq)]
pub enum GapSet {
    /// The feasible product of simplices of a game.
    Simplices,
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
}

/// Gap evaluator with per-problem precomputation.
///
/// For the ball, `<Mu - b, z - u>` is a concave quadratic in `u`. The symmetric
/// part of `M` is diagonalized once; each evaluation then solves the
/// trust-region problem along the eigenbasis with a bisection on the
/// multiplier.
#[derive(Debug, Clone)]
pub struct GapEvaluator {
    inner: GapInner,
}

#[derive(Debug, Clone)]
enum GapInner {
    Game(BilinearGame),
    Ball {
        matrix: DenseMatrix,
        offset: Vec<f64>,
        eigvals: Vec<f64>,
        /// Eigenvectors as rows.
        eigvecs: DenseMatrix,
        center: Vec<f64>,
        radius: f64,
    },
}

impl GapEvaluator {
    pub fn new(p: &VIProblem, set: GapSet) -> Result<Self> {
        match set {
            GapSet::Simplices => {
                let game = p
                    .bilinear()
                    .filter(|_| !p.prox().is_free())
                    .ok_or_else(|| Error::Unsupported("simplex gap needs a constrained game".into()))?;
                Ok(GapEvaluator { inner: GapInner::Game(game.clone()) })
            }
            GapSet::Ball { center, radius } => {
                check_len(p.dim(), center.len())?;
                if !(radius >= 0.0) || !radius.is_finite() {
                    return Err(Error::Parameter(format!("gap ball radius must be >= 0, got {radius}")));
                }
                if !p.prox().is_free() {
                    return Err(Error::Unsupported("ball gap is for unconstrained problems".into()));
                }
                let (matrix, offset) =
                    p.affine_parts().ok_or_else(|| Error::Unsupported("ball gap needs an affine operator".into()))?;
                let n = matrix.rows();
                let sym = nalgebra::DMatrix::from_fn(n, n, |i, j| 0.5 * (matrix.get(i, j) + matrix.get(j, i)));
                let eig = sym.symmetric_eigen();
                let eigvals: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
                let eigvecs = DenseMatrix::from_fn(n, n, |k, i| eig.eigenvectors[(i, k)]);
                Ok(GapEvaluator { inner: GapInner::Ball { matrix, offset, eigvals, eigvecs, center, radius } })
            }
        }
    }

    /// The natural gap set of a problem: simplices for games, otherwise the
    /// ball of radius `2 ||z0 - z*||` around the known solution.
    pub fn for_problem(p: &VIProblem, z0: &[f64]) -> Result<Self> {
        if p.bilinear().is_some() && !p.prox().is_free() {
            return GapEvaluator::new(p, GapSet::Simplices);
        }
        let z_star = p
            .known_solution()
            .ok_or_else(|| Error::Unsupported("gap on a free problem needs a known solution".into()))?;
        let radius = 2.0 * norm(&sub(z0, z_star));
        GapEvaluator::new(p, GapSet::Ball { center: z_star.to_vec(), radius })
    }

    pub fn eval(&self, z: &[f64]) -> Result<f64> {
        Ok(self.report(z)?.value)
    }

    pub fn report(&self, z: &[f64]) -> Result<GapReport> {
        match &self.inner {
            GapInner::Game(game) => {
                let (x, y) = game.split(z);
                bilinear_gap_report(game, x, y)
            }
            GapInner::Ball { matrix, offset, eigvals, eigvecs, center, radius } => {
                check_len(center.len(), z.len())?;
                // objective in x = u - center: const + <g, x> - x^T S x
                let mz = matrix.matvec_t(z);
                let c: Vec<f64> = mz.iter().zip(offset).map(|(a, b)| a + b).collect();
                let sc = {
                    let mut s = matrix.matvec(center);
                    let st = matrix.matvec_t(center);
                    s.iter_mut().zip(&st).for_each(|(a, b)| *a = 0.5 * (*a + b));
                    s
                };
                let g: Vec<f64> = c.iter().zip(&sc).map(|(ci, si)| ci - 2.0 * si).collect();
                let base = dot(&c, center) - dot(center, &sc) - dot(offset, z);
                let gt = eigvecs.matvec(&g);
                let step = trust_region_step(eigvals, &gt, *radius);
                let gain: f64 = gt.iter().zip(&step).zip(eigvals).map(|((gi, xi), li)| gi * xi - li * xi * xi).sum();
                Ok(GapReport { value: base + gain, best_response: None })
            }
        }
    }
}

/// Maximizer of `Σ g_i x_i - λ_i x_i^2` over `||x|| <= r` for `λ_i >= 0`.
fn trust_region_step(lambda: &[f64], g: &[f64], r: f64) -> Vec<f64> {
    let at = |nu: f64| -> Vec<f64> {
        lambda
            .iter()
            .zip(g)
            .map(|(&l, &gi)| {
                let den = 2.0 * (l + nu);
                if gi == 0.0 {
                    0.0
                } else if den > 0.0 {
                    gi / den
                } else {
                    f64::INFINITY.copysign(gi)
                }
            })
            .collect()
    };
    let free = at(0.0);
    if norm(&free) <= r {
        return free;
    }
    if r == 0.0 {
        return vec![0.0; g.len()];
    }
    let (mut lo, mut hi) = (0.0, norm(g) / (2.0 * r));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if norm(&at(mid)) > r {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    at(hi)
}
