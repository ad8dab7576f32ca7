//! Per-run estimator state: snapshot caches, Past memory and the cost ledger.

use super::{index_bits, EstimatorKind, BITS_PER_VALUE};
use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, dist_sq, lin_comb, sub};
use crate::problems::VIProblem;
use crate::prox::prox_eval;
use crate::rng::RngStream;

/// Oracle and communication costs accumulated over a run.
///
/// Every full or component oracle evaluation touches `d` coordinates and, when
/// its result is transmitted uncompressed, costs `64 d` bits. A single
/// coordinate evaluation touches one coordinate and sends one value plus its
/// index.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CostLedger {
    pub full_oracle_calls: u64,
    pub component_oracle_calls: u64,
    pub coordinates_touched: u64,
    pub bits_sent: u64,
    pub communications: u64,
    pub local_steps: u64,
}

impl CostLedger {
    fn full(&mut self, d: usize, bits: u64) {
        self.full_oracle_calls += 1;
        self.coordinates_touched += d as u64;
        self.bits_sent += bits;
    }

    fn component(&mut self, d: usize, bits: u64) {
        self.component_oracle_calls += 1;
        self.coordinates_touched += d as u64;
        self.bits_sent += bits;
    }
}

fn dense_bits(d: usize) -> u64 {
    BITS_PER_VALUE * d as u64
}

/// Output of one estimator call inside an iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct EstPair {
    pub g_k: Vec<f64>,
    pub g_half: Vec<f64>,
    pub z_half: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EstimatorState {
    kind: EstimatorKind,
    dim: usize,
    ready: bool,
    w: Vec<f64>,
    w_full: Vec<f64>,
    w_components: Vec<Vec<f64>>,
    w_phi: Vec<f64>,
    w_consensus: Vec<f64>,
    past: Vec<f64>,
    past_exact: Vec<f64>,
    memory_sq: f64,
    ledger: CostLedger,
}

impl EstimatorState {
    pub fn new(kind: EstimatorKind, p: &VIProblem) -> Result<Self> {
        kind.validate(p)?;
        Ok(EstimatorState {
            kind,
            dim: p.dim(),
            ready: false,
            w: Vec::new(),
            w_full: Vec::new(),
            w_components: Vec::new(),
            w_phi: Vec::new(),
            w_consensus: Vec::new(),
            past: Vec::new(),
            past_exact: Vec::new(),
            memory_sq: 0.0,
            ledger: CostLedger::default(),
        })
    }

    pub fn kind(&self) -> &EstimatorKind {
        &self.kind
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    /// Current snapshot `w` (empty before initialization).
    pub fn snapshot(&self) -> &[f64] {
        &self.w
    }

    /// Cached `F(w)` for snapshot variants.
    pub fn snapshot_full(&self) -> Option<&[f64]> {
        (self.ready && self.kind.uses_snapshot()).then_some(self.w_full.as_slice())
    }

    /// `σ_k^2`: nonzero only for Past, where it is the squared change of the
    /// exact operator between consecutive half steps.
    pub fn memory_sq(&self) -> f64 {
        self.memory_sq
    }

    pub fn is_ready(&self) -> bool {
        self.ready
    }

    /// Starts a run at `z0 = w0`. Past draws its initial value `F(z^0, ξ)`.
    pub fn init(&mut self, p: &VIProblem, z0: &[f64], rng: &mut RngStream) -> Result<()> {
        self.set_snapshot(p, z0)?;
        if let EstimatorKind::Past { sigma } = self.kind {
            let exact = p.eval_full(z0)?;
            self.ledger.full(self.dim, dense_bits(self.dim));
            self.past = lin_comb(1.0, &exact, 1.0, &noise(sigma, self.dim, rng));
            self.past_exact = exact;
        }
        self.memory_sq = 0.0;
        Ok(())
    }

    /// Moves the snapshot to `w` and refreshes its caches, charging their cost.
    pub fn set_snapshot(&mut self, p: &VIProblem, w: &[f64]) -> Result<()> {
        check_len(self.dim, w.len())?;
        self.w = w.to_vec();
        if self.kind.uses_snapshot() {
            self.refresh(p)?;
        }
        self.ready = true;
        Ok(())
    }

    fn refresh(&mut self, p: &VIProblem) -> Result<()> {
        let d = self.dim;
        match &self.kind {
            EstimatorKind::Vr | EstimatorKind::Qvr(_) | EstimatorKind::Is { .. } => {
                let m = p.component_count();
                let mut comps = Vec::with_capacity(m);
                let mut mean = vec![0.0; d];
                for i in 0..m {
                    let f = p.eval_component(i, &self.w)?;
                    self.ledger.component(d, dense_bits(d));
                    axpy(1.0 / m as f64, &f, &mut mean);
                    comps.push(f);
                }
                self.w_components = comps;
                self.w_full = mean;
            }
            EstimatorKind::Local { .. } => {
                let mix =
                    p.mixing().ok_or_else(|| Error::Unsupported("local estimator needs a mixing problem".into()))?;
                self.w_phi = mix.eval_phi(&self.w)?;
                self.w_consensus = mix.eval_consensus(&self.w)?;
                self.w_full = lin_comb(1.0, &self.w_phi, 1.0, &self.w_consensus);
                self.ledger.full(d, dense_bits(d));
                self.ledger.communications += 1;
            }
            _ => {
                self.w_full = p.eval_full(&self.w)?;
                self.ledger.full(d, dense_bits(d));
            }
        }
        Ok(())
    }

    fn require_ready(&self) -> Result<()> {
        if self.ready {
            Ok(())
        } else {
            Err(Error::Uninitialized("estimator snapshot"))
        }
    }

    /// `g^k`, the operator estimate used for the extrapolation step.
    pub fn lookahead(&mut self, p: &VIProblem, z_k: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
        check_len(self.dim, z_k.len())?;
        match self.kind {
            EstimatorKind::FullDet => {
                self.ledger.full(self.dim, dense_bits(self.dim));
                p.eval_full(z_k)
            }
            EstimatorKind::Noisy { sigma } => {
                let f = p.eval_full(z_k)?;
                self.ledger.full(self.dim, dense_bits(self.dim));
                Ok(lin_comb(1.0, &f, 1.0, &noise(sigma, self.dim, rng)))
            }
            EstimatorKind::Past { .. } => {
                self.require_ready()?;
                Ok(self.past.clone())
            }
            _ => {
                self.require_ready()?;
                Ok(self.w_full.clone())
            }
        }
    }

    /// `g^{k+1/2}`, the unbiased estimate of `F(z_half)`.
    pub fn correction(&mut self, p: &VIProblem, z_half: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
        check_len(self.dim, z_half.len())?;
        let d = self.dim;
        match &self.kind {
            EstimatorKind::FullDet => {
                self.ledger.full(d, dense_bits(d));
                p.eval_full(z_half)
            }
            EstimatorKind::Noisy { sigma } => {
                let f = p.eval_full(z_half)?;
                self.ledger.full(d, dense_bits(d));
                Ok(lin_comb(1.0, &f, 1.0, &noise(*sigma, d, rng)))
            }
            EstimatorKind::Past { sigma } => {
                self.require_ready()?;
                let exact = p.eval_full(z_half)?;
                self.ledger.full(d, dense_bits(d));
                let g = lin_comb(1.0, &exact, 1.0, &noise(*sigma, d, rng));
                self.memory_sq = dist_sq(&self.past_exact, &exact);
                self.past_exact = exact;
                self.past = g.clone();
                Ok(g)
            }
            EstimatorKind::Vr => {
                self.require_ready()?;
                let m = rng.index(self.w_components.len());
                let f = p.eval_component(m, z_half)?;
                self.ledger.component(d, dense_bits(d));
                Ok(self.shifted(&sub(&f, &self.w_components[m]), 1.0))
            }
            EstimatorKind::Coord | EstimatorKind::MisScaledCoord => {
                self.require_ready()?;
                let i = rng.index(d);
                let c = p.eval_coordinate(i, z_half)?;
                self.ledger.coordinates_touched += 1;
                self.ledger.bits_sent += BITS_PER_VALUE + index_bits(d);
                let mut g = self.w_full.clone();
                g[i] += self.coord_scale() * (c - self.w_full[i]);
                Ok(g)
            }
            EstimatorKind::Quant(q) => {
                self.require_ready()?;
                let f = p.eval_full(z_half)?;
                self.ledger.full(d, q.bits(d));
                let diff = q.quantize(&sub(&f, &self.w_full), rng)?;
                Ok(self.shifted(&diff, 1.0))
            }
            EstimatorKind::Qvr(q) => {
                self.require_ready()?;
                let m = rng.index(self.w_components.len());
                let f = p.eval_component(m, z_half)?;
                self.ledger.component(d, q.bits(d));
                let diff = q.quantize(&sub(&f, &self.w_components[m]), rng)?;
                Ok(self.shifted(&diff, 1.0))
            }
            EstimatorKind::Is { weights } => {
                self.require_ready()?;
                let m = sample_categorical(weights, rng);
                let scale = 1.0 / (weights.len() as f64 * weights[m]);
                let f = p.eval_component(m, z_half)?;
                self.ledger.component(d, dense_bits(d));
                Ok(self.shifted(&sub(&f, &self.w_components[m]), scale))
            }
            EstimatorKind::Local { split } => {
                self.require_ready()?;
                let split = *split;
                let mix =
                    p.mixing().ok_or_else(|| Error::Unsupported("local estimator needs a mixing problem".into()))?;
                if rng.uniform() < split {
                    let phi = mix.eval_phi(z_half)?;
                    self.ledger.local_steps += 1;
                    self.ledger.coordinates_touched += d as u64;
                    Ok(self.shifted(&sub(&phi, &self.w_phi), 1.0 / split))
                } else {
                    let cons = mix.eval_consensus(z_half)?;
                    self.ledger.communications += 1;
                    self.ledger.bits_sent += dense_bits(d);
                    Ok(self.shifted(&sub(&cons, &self.w_consensus), 1.0 / (1.0 - split)))
                }
            }
        }
    }

    /// `F(w) + scale * diff`.
    fn shifted(&self, diff: &[f64], scale: f64) -> Vec<f64> {
        lin_comb(1.0, &self.w_full, scale, diff)
    }

    fn coord_scale(&self) -> f64 {
        match self.kind {
            EstimatorKind::MisScaledCoord => self.dim as f64 / 2.0,
            _ => self.dim as f64,
        }
    }

    /// Every possible `g^{k+1/2}` at `z_half` with its probability, given the
    /// current snapshot. The ledger is not charged.
    pub fn enumerate_correction(&self, p: &VIProblem, z_half: &[f64]) -> Result<Vec<(f64, Vec<f64>)>> {
        check_len(self.dim, z_half.len())?;
        let d = self.dim;
        let deterministic = || -> Result<Vec<(f64, Vec<f64>)>> { Ok(vec![(1.0, p.eval_full(z_half)?)]) };
        match &self.kind {
            EstimatorKind::FullDet => deterministic(),
            EstimatorKind::Noisy { sigma } | EstimatorKind::Past { sigma } => {
                if *sigma == 0.0 {
                    deterministic()
                } else {
                    Err(Error::Unsupported(format!(
                        "{} with sigma > 0 has a continuous distribution",
                        self.kind.name()
                    )))
                }
            }
            EstimatorKind::Vr => {
                self.require_ready()?;
                let m = self.w_components.len();
                (0..m)
                    .map(|i| {
                        let f = p.eval_component(i, z_half)?;
                        Ok((1.0 / m as f64, self.shifted(&sub(&f, &self.w_components[i]), 1.0)))
                    })
                    .collect()
            }
            EstimatorKind::Coord | EstimatorKind::MisScaledCoord => {
                self.require_ready()?;
                let s = self.coord_scale();
                (0..d)
                    .map(|i| {
                        let c = p.eval_coordinate(i, z_half)?;
                        let mut g = self.w_full.clone();
                        g[i] += s * (c - self.w_full[i]);
                        Ok((1.0 / d as f64, g))
                    })
                    .collect()
            }
            EstimatorKind::Quant(q) => {
                self.require_ready()?;
                let f = p.eval_full(z_half)?;
                Ok(q.enumerate(&sub(&f, &self.w_full))?
                    .into_iter()
                    .map(|(pr, diff)| (pr, self.shifted(&diff, 1.0)))
                    .collect())
            }
            EstimatorKind::Qvr(q) => {
                self.require_ready()?;
                let m = self.w_components.len();
                let mut out = Vec::new();
                for i in 0..m {
                    let f = p.eval_component(i, z_half)?;
                    for (pr, diff) in q.enumerate(&sub(&f, &self.w_components[i]))? {
                        out.push((pr / m as f64, self.shifted(&diff, 1.0)));
                    }
                }
                Ok(out)
            }
            EstimatorKind::Is { weights } => {
                self.require_ready()?;
                let m = weights.len();
                weights
                    .iter()
                    .enumerate()
                    .map(|(i, &w)| {
                        let f = p.eval_component(i, z_half)?;
                        Ok((w, self.shifted(&sub(&f, &self.w_components[i]), 1.0 / (m as f64 * w))))
                    })
                    .collect()
            }
            EstimatorKind::Local { split } => {
                self.require_ready()?;
                let mix =
                    p.mixing().ok_or_else(|| Error::Unsupported("local estimator needs a mixing problem".into()))?;
                let phi = mix.eval_phi(z_half)?;
                let cons = mix.eval_consensus(z_half)?;
                Ok(vec![
                    (*split, self.shifted(&sub(&phi, &self.w_phi), 1.0 / split)),
                    (1.0 - split, self.shifted(&sub(&cons, &self.w_consensus), 1.0 / (1.0 - split))),
                ])
            }
        }
    }

    /// One estimator round: `g^k`, the extrapolated point
    /// `z^{k+1/2} = prox(z_bar - γ g^k)`, and `g^{k+1/2}` there.
    pub fn est_pair(
        &mut self,
        p: &VIProblem,
        z_bar: &[f64],
        z_k: &[f64],
        gamma: f64,
        rng: &mut RngStream,
    ) -> Result<EstPair> {
        check_len(self.dim, z_bar.len())?;
        let g_k = self.lookahead(p, z_k, rng)?;
        let z_half = prox_eval(p.prox(), gamma, &lin_comb(1.0, z_bar, -gamma, &g_k))?;
        let g_half = self.correction(p, &z_half, rng)?;
        Ok(EstPair { g_k, g_half, z_half })
    }

    /// Moves the snapshot to `z_next` with probability `1 - tau` (one uniform
    /// draw). Returns whether it moved.
    pub fn snapshot_update(&mut self, p: &VIProblem, z_next: &[f64], tau: f64, rng: &mut RngStream) -> Result<bool> {
        if !(0.0..1.0).contains(&tau) {
            return Err(Error::Parameter(format!("tau must lie in [0, 1), got {tau}")));
        }
        check_len(self.dim, z_next.len())?;
        let moved = rng.uniform() >= tau;
        if moved {
            self.w.clear();
            self.w.extend_from_slice(z_next);
            if self.kind.uses_snapshot() {
                self.refresh(p)?;
            }
        }
        Ok(moved)
    }
}

/// Zero-mean Gaussian noise with per-coordinate variance `sigma^2 / d`.
fn noise(sigma: f64, d: usize, rng: &mut RngStream) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0; d];
    }
    let s = sigma / (d as f64).sqrt();
    (0..d).map(|_| s * rng.normal()).collect()
}

fn sample_categorical(weights: &[f64], rng: &mut RngStream) -> usize {
    let u = rng.uniform();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}
