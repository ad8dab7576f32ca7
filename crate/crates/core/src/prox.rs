//! Proximal operators for the constraint structures used by the solvers:
//! free space and products of probability simplices.

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ProxSpec {
    /// `h = 0`; the prox is the identity.
    Free(usize),
    /// Indicator of a product of probability simplices, one per block.
    ProductOfSimplices(Vec<usize>),
}

impl ProxSpec {
    pub fn free(dim: usize) -> Self {
        ProxSpec::Free(dim)
    }

    /// Validates that every block is nonempty.
    pub fn simplices(blocks: Vec<usize>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Empty("simplex block list"));
        }
        if blocks.contains(&0) {
            return Err(Error::Parameter("simplex block lengths must be positive".into()));
        }
        Ok(ProxSpec::ProductOfSimplices(blocks))
    }

    pub fn dim(&self) -> usize {
        match self {
            ProxSpec::Free(d) => *d,
            ProxSpec::ProductOfSimplices(blocks) => blocks.iter().sum(),
        }
    }

    pub fn is_free(&self) -> bool {
        matches!(self, ProxSpec::Free(_))
    }

    /// Block boundaries as `(start, len)` pairs. Free space is a single block.
    pub fn blocks(&self) -> Vec<(usize, usize)> {
        match self {
            ProxSpec::Free(d) => vec![(0, *d)],
            ProxSpec::ProductOfSimplices(blocks) => {
                let mut start = 0;
                blocks
                    .iter()
                    .map(|&len| {
                        let b = (start, len);
                        start += len;
                        b
                    })
                    .collect()
            }
        }
    }

    /// Uniform distribution on every simplex block; the origin for free space.
    pub fn center(&self) -> Vec<f64> {
        match self {
            ProxSpec::Free(d) => vec![0.0; *d],
            ProxSpec::ProductOfSimplices(blocks) => {
                blocks.iter().flat_map(|&len| std::iter::repeat_n(1.0 / len as f64, len)).collect()
            }
        }
    }

    /// Checks membership in the feasible set: entries `>= -tol` and block sums within `tol` of one.
    pub fn is_feasible(&self, z: &[f64], tol: f64) -> bool {
        if z.len() != self.dim() || !z.iter().all(|x| x.is_finite()) {
            return false;
        }
        match self {
            ProxSpec::Free(_) => true,
            ProxSpec::ProductOfSimplices(_) => self.blocks().into_iter().all(|(s, len)| {
                let block = &z[s..s + len];
                block.iter().all(|&x| x >= -tol) && (block.iter().sum::<f64>() - 1.0).abs() <= tol
            }),
        }
    }
}

/// Euclidean projection onto the unit probability simplex.
///
/// Sort-based threshold rule: with `u` sorted descending and prefix sums `c_j`,
/// the support size is the largest `j` with `u_j - (c_j - 1)/j >= 0`.
pub fn project_simplex(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Empty("simplex projection input"));
    }
    let mut u = v.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t >= 0.0 {
            theta = t;
        }
    }
    Ok(v.iter().map(|&x| (x - theta).max(0.0)).collect())
}

/// `prox_{gamma h}(v)` for the indicator (or zero) function described by `spec`.
///
/// Indicator proxes do not depend on `gamma`; it is still validated.
pub fn prox_eval(spec: &ProxSpec, gamma: f64, v: &[f64]) -> Result<Vec<f64>> {
    if !(gamma > 0.0) {
        return Err(Error::Parameter(format!("prox step must be positive, got {gamma}")));
    }
    check_len(spec.dim(), v.len())?;
    match spec {
        ProxSpec::Free(_) => Ok(v.to_vec()),
        ProxSpec::ProductOfSimplices(_) => {
            let mut out = Vec::with_capacity(v.len());
            for (s, len) in spec.blocks() {
                out.extend(project_simplex(&v[s..s + len])?);
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dist_sq, dot, sub};
    use crate::rng::rng_stream;

    /// Active-set enumeration: solve the KKT system on every support and keep
    /// the closest feasible candidate.
    fn enumeration_oracle(v: &[f64]) -> Vec<f64> {
        let d = v.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 1u32..(1 << d) {
            let support: Vec<usize> = (0..d).filter(|i| mask & (1 << i) != 0).collect();
            let theta = (support.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / support.len() as f64;
            let mut x = vec![0.0; d];
            let mut ok = true;
            for &i in &support {
                x[i] = v[i] - theta;
                if x[i] < 0.0 {
                    ok = false;
                }
            }
            if !ok {
                continue;
            }
            let dist = dist_sq(&x, v);
            if best.as_ref().is_none_or(|(b, _)| dist < *b) {
                best = Some((dist, x));
            }
        }
        best.expect("some support is always feasible").1
    }

    #[test]
    fn feasible_point_is_fixed() {
        let p = project_simplex(&[0.2, 0.3, 0.5]).unwrap();
        for (a, b) in p.iter().zip([0.2, 0.3, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn nearest_vertex() {
        assert_eq!(project_simplex(&[2.0, 0.0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn kkt_shift_example() {
        let p = project_simplex(&[0.6, 0.8]).unwrap();
        let oracle = enumeration_oracle(&[0.6, 0.8]);
        assert!((p[0] - 0.4).abs() < 1e-12 && (p[1] - 0.6).abs() < 1e-12);
        assert!(dist_sq(&p, &oracle) < 1e-24);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert_eq!(project_simplex(&[]), Err(Error::Empty("simplex projection input")));
    }

    #[test]
    fn matches_enumeration_oracle() {
        let mut r = rng_stream(2024, 0);
        for trial in 0..1000 {
            let d = 1 + trial % 6;
            let v: Vec<f64> = (0..d).map(|_| 2.0 * r.normal()).collect();
            let p = project_simplex(&v).unwrap();
            let o = enumeration_oracle(&v);
            let err = p.iter().zip(&o).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-10, "d={d} v={v:?} err={err}");
        }
    }

    #[test]
    fn prox_free_is_identity() {
        assert_eq!(prox_eval(&ProxSpec::free(2), 0.1, &[3.0, -2.0]).unwrap(), vec![3.0, -2.0]);
    }

    #[test]
    fn prox_blockwise() {
        let spec = ProxSpec::simplices(vec![2, 2]).unwrap();
        let out = prox_eval(&spec, 1.0, &[2.0, 0.0, 0.6, 0.8]).unwrap();
        let expected = [1.0, 0.0, 0.4, 0.6];
        for (a, b) in out.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(spec.is_feasible(&out, 1e-12));
    }

    #[test]
    fn prox_indicator_ignores_gamma() {
        let spec = ProxSpec::simplices(vec![3]).unwrap();
        let v = [0.9, -0.4, 1.7];
        assert_eq!(prox_eval(&spec, 0.1, &v).unwrap(), prox_eval(&spec, 10.0, &v).unwrap());
    }

    #[test]
    fn prox_errors() {
        let spec = ProxSpec::simplices(vec![2, 2]).unwrap();
        assert!(matches!(prox_eval(&spec, 1.0, &[1.0; 3]), Err(Error::Dimension { .. })));
        assert!(matches!(prox_eval(&spec, 0.0, &[1.0; 4]), Err(Error::Parameter(_))));
        assert!(ProxSpec::simplices(vec![2, 0]).is_err());
    }

    #[test]
    fn projection_properties() {
        let mut r = rng_stream(99, 4);
        for _ in 0..1000 {
            let d = 1 + r.index(12);
            let u: Vec<f64> = (0..d).map(|_| 3.0 * r.normal()).collect();
            let v: Vec<f64> = (0..d).map(|_| 3.0 * r.normal()).collect();
            let pu = project_simplex(&u).unwrap();
            let pv = project_simplex(&v).unwrap();
            // feasibility
            assert!(pu.iter().all(|&x| x >= 0.0));
            assert!((pu.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            // idempotence
            let ppu = project_simplex(&pu).unwrap();
            assert!(pu.iter().zip(&ppu).all(|(a, b)| (a - b).abs() <= 1e-12));
            // non-expansiveness
            assert!(dist_sq(&pu, &pv).sqrt() <= dist_sq(&u, &v).sqrt() + 1e-12);
        }
    }

    #[test]
    fn prox_optimality_inequality() {
        let spec = ProxSpec::simplices(vec![4, 3]).unwrap();
        let mut r = rng_stream(3, 9);
        for _ in 0..20 {
            let z: Vec<f64> = (0..7).map(|_| r.normal()).collect();
            let zp = prox_eval(&spec, 0.5, &z).unwrap();
            for _ in 0..100 {
                let raw: Vec<f64> = (0..7).map(|_| r.normal()).collect();
                let x = prox_eval(&spec, 1.0, &raw).unwrap();
                let lhs = dot(&sub(&zp, &z), &sub(&x, &zp));
                assert!(lhs >= -1e-12, "prox inequality violated: {lhs}");
            }
        }
    }
}
