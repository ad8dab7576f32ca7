//! Unbiased compression operators.

use crate::error::{check_len, Error, Result};
use crate::rng::RngStream;

/// Bits charged per transmitted floating point value.
pub const BITS_PER_VALUE: u64 = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum Quantizer {
    Identity,
    /// Keep `keep` of `dim` coordinates chosen uniformly without replacement,
    /// scaled by `dim / keep`.
    RandK {
        keep: usize,
        dim: usize,
    },
}

impl Quantizer {
    pub fn rand_k(keep: usize, dim: usize) -> Result<Self> {
        if keep < 1 || keep > dim {
            return Err(Error::Parameter(format!("RandK keep count {keep} outside 1..={dim}")));
        }
        Ok(Quantizer::RandK { keep, dim })
    }

    /// Variance factor `ω` with `E||Q(x)||^2 = ω ||x||^2`.
    pub fn omega(&self) -> f64 {
        match *self {
            Quantizer::Identity => 1.0,
            Quantizer::RandK { keep, dim } => dim as f64 / keep as f64,
        }
    }

    pub fn check_dim(&self, len: usize) -> Result<()> {
        match *self {
            Quantizer::Identity => Ok(()),
            Quantizer::RandK { dim, .. } => check_len(dim, len),
        }
    }

    /// Bits needed to send one quantized vector of length `len`.
    pub fn bits(&self, len: usize) -> u64 {
        match *self {
            Quantizer::Identity => BITS_PER_VALUE * len as u64,
            Quantizer::RandK { keep, dim } => keep as u64 * (BITS_PER_VALUE + index_bits(dim)),
        }
    }

    /// Number of entries transmitted for a vector of length `len`.
    pub fn kept(&self, len: usize) -> usize {
        match *self {
            Quantizer::Identity => len,
            Quantizer::RandK { keep, .. } => keep,
        }
    }

    pub fn quantize(&self, x: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        match *self {
            Quantizer::Identity => Ok(x.to_vec()),
            Quantizer::RandK { keep, dim } => {
                let s = dim as f64 / keep as f64;
                let mut out = vec![0.0; dim];
                for i in rng.sample_without_replacement(dim, keep) {
                    out[i] = s * x[i];
                }
                Ok(out)
            }
        }
    }

    /// Every possible output with its probability. RandK enumerates all
    /// `C(dim, keep)` subsets, so keep `dim` small.
    pub fn enumerate(&self, x: &[f64]) -> Result<Vec<(f64, Vec<f64>)>> {
        self.check_dim(x.len())?;
        match *self {
            Quantizer::Identity => Ok(vec![(1.0, x.to_vec())]),
            Quantizer::RandK { keep, dim } => {
                let s = dim as f64 / keep as f64;
                let subsets = subsets(dim, keep);
                let prob = 1.0 / subsets.len() as f64;
                Ok(subsets
                    .into_iter()
                    .map(|set| {
                        let mut out = vec![0.0; dim];
                        for i in set {
                            out[i] = s * x[i];
                        }
                        (prob, out)
                    })
                    .collect())
            }
        }
    }
}

/// `ceil(log2 d)` bits to address one of `d` coordinates.
pub fn index_bits(d: usize) -> u64 {
    if d <= 1 {
        0
    } else {
        u64::from(usize::BITS - (d - 1).leading_zeros())
    }
}

/// All `k`-element subsets of `0..n` in lexicographic order.
pub(crate) fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm_sq;
    use crate::rng::rng_stream;
    use proptest::prelude::*;

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn keep_all_is_identity() {
        let q = Quantizer::rand_k(5, 5).unwrap();
        assert_eq!(q.omega(), 1.0);
        let x = [1.0, -2.0, 3.0, 0.5, 4.0];
        let mut r = rng_stream(1, 0);
        assert_eq!(q.quantize(&x, &mut r).unwrap(), x.to_vec());
    }

    #[test]
    fn invalid_keep_counts() {
        assert!(matches!(Quantizer::rand_k(0, 4), Err(Error::Parameter(_))));
        assert!(matches!(Quantizer::rand_k(5, 4), Err(Error::Parameter(_))));
        let q = Quantizer::rand_k(2, 4).unwrap();
        let mut r = rng_stream(1, 0);
        assert!(q.quantize(&[1.0; 3], &mut r).is_err());
    }

    #[test]
    fn index_bit_widths() {
        assert_eq!(index_bits(1), 0);
        assert_eq!(index_bits(2), 1);
        assert_eq!(index_bits(6), 3);
        assert_eq!(index_bits(8), 3);
        assert_eq!(index_bits(9), 4);
        assert_eq!(Quantizer::rand_k(2, 6).unwrap().bits(6), 2 * 67);
        assert_eq!(Quantizer::Identity.bits(10), 640);
    }

    #[test]
    fn subsets_count_matches_binomial() {
        for n in 1..=8 {
            for k in 1..=n {
                let s = subsets(n, k);
                assert_eq!(s.len(), binom(n, k));
                assert!(s.iter().all(|v| v.len() == k && v.windows(2).all(|w| w[0] < w[1])));
            }
        }
    }

    #[test]
    fn monte_carlo_mean_is_unbiased() {
        let x = [1.5, -0.5, 2.0, 0.0, -3.0, 0.7];
        let q = Quantizer::rand_k(2, 6).unwrap();
        let mut r = rng_stream(3, 0);
        let n = 100_000;
        let mut sum = [0.0; 6];
        let mut sum_sq = [0.0; 6];
        for _ in 0..n {
            let y = q.quantize(&x, &mut r).unwrap();
            for i in 0..6 {
                sum[i] += y[i];
                sum_sq[i] += y[i] * y[i];
            }
        }
        for i in 0..6 {
            let mean = sum[i] / n as f64;
            let var = sum_sq[i] / n as f64 - mean * mean;
            let se = (var / n as f64).sqrt();
            assert!((mean - x[i]).abs() <= 4.0 * se + 1e-12, "coordinate {i}");
        }
    }

    proptest! {
        #[test]
        fn exact_second_moment(
            d in 1usize..=8,
            k_frac in 0.0f64..1.0,
            x in proptest::collection::vec(-5.0f64..5.0, 8),
        ) {
            let k = 1 + ((d - 1) as f64 * k_frac).round() as usize;
            let x = &x[..d];
            let q = Quantizer::rand_k(k, d).unwrap();
            let outs = q.enumerate(x).unwrap();
            let second: f64 = outs.iter().map(|(p, y)| p * norm_sq(y)).sum();
            prop_assert!((second - q.omega() * norm_sq(x)).abs() <= 1e-10 * (1.0 + norm_sq(x)));
            let total: f64 = outs.iter().map(|(p, _)| p).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            for i in 0..d {
                let mean: f64 = outs.iter().map(|(p, y)| p * y[i]).sum();
                prop_assert!((mean - x[i]).abs() <= 1e-10 * (1.0 + x[i].abs()));
            }
        }
    }
}
