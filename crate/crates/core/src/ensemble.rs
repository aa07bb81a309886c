//! Random two-qubit states and per-concurrence-bin statistics of the protocols.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bellmat::{BellDensityMatrix, ComputationalDensityMatrix, X_TOL};
use crate::error::{domain, Result};
use crate::linalg::Mat4;
use crate::protocols::{m2_step, m2h_branches, purify_target, run, Options, ProtocolKind, PurifyTarget, Sign};
use crate::scalar::{re, Real};

/// Samples drawn from one RNG stream. Fixed so results do not depend on the thread count.
pub const CHUNK: usize = 1024;
pub const MAX_SAMPLES: usize = 10_000_000;

/// ρ = DD†/Tr(DD†) with D a 4×n_r matrix of complex entries whose real and imaginary parts
/// are independent standard normals.
pub fn random_density<T: Real, R: Rng + ?Sized>(rng: &mut R, nr: usize) -> Result<ComputationalDensityMatrix<T>> {
    if !(1..=4).contains(&nr) {
        return Err(domain("n_r", nr as f64, "{1, 2, 3, 4}"));
    }
    let mut d = [[num_complex::Complex::new(T::zero(), T::zero()); 4]; 4];
    for row in d.iter_mut() {
        for z in row.iter_mut().take(nr) {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            *z = num_complex::Complex::new(T::lit(a), T::lit(b));
        }
    }
    let dm = Mat4(d);
    let m = dm * dm.adjoint();
    let tr = m.trace().re;
    let mut m = m.scale(re(T::one() / tr));
    for i in 0..4 {
        m[(i, i)].im = T::zero();
    }
    Ok(ComputationalDensityMatrix::from_unchecked(m))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NrMode {
    Fixed(u8),
    /// n_r drawn uniformly from {1, 2, 3, 4} for every sample.
    UniformRandom1to4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub samples: usize,
    pub bins: usize,
    pub nr_mode: NrMode,
    pub seed: u64,
    pub protocols: Vec<ProtocolKind>,
}

impl EnsembleConfig {
    pub fn new(samples: usize, nr_mode: NrMode, seed: u64) -> Self {
        Self {
            samples,
            bins: 30,
            nr_mode,
            seed,
            protocols: vec![ProtocolKind::M2, ProtocolKind::M2H, ProtocolKind::DEJMPS],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.samples > MAX_SAMPLES {
            return Err(domain("samples", self.samples as f64, "[1, 1e7]"));
        }
        if self.bins == 0 {
            return Err(domain("bins", 0.0, ">= 1"));
        }
        if let NrMode::Fixed(n) = self.nr_mode {
            if !(1..=4).contains(&n) {
                return Err(domain("n_r", n as f64, "{1, 2, 3, 4}"));
            }
        }
        Ok(())
    }
}

/// Outcome of one state under each configured protocol.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleResult {
    pub concurrence: f64,
    pub purifiable: Vec<bool>,
    pub probability: Vec<f64>,
}

/// Per-bin counts and sums; per-protocol vectors follow `EnsembleConfig::protocols`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinStat {
    pub c_low: f64,
    pub c_high: f64,
    pub count: u64,
    pub purifiable: Vec<u64>,
    pub success_sum: Vec<f64>,
    pub success_sum_purifiable: Vec<f64>,
}

impl BinStat {
    fn empty(c_low: f64, c_high: f64, n: usize) -> Self {
        Self { c_low, c_high, count: 0, purifiable: vec![0; n], success_sum: vec![0.0; n], success_sum_purifiable: vec![0.0; n] }
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.c_low + self.c_high)
    }

    pub fn fraction_purifiable(&self, k: usize) -> Option<f64> {
        (self.count > 0).then(|| self.purifiable[k] as f64 / self.count as f64)
    }

    /// Mean over every state in the bin, non-purifiable ones counting as zero.
    pub fn mean_success(&self, k: usize) -> Option<f64> {
        (self.count > 0).then(|| self.success_sum[k] / self.count as f64)
    }

    /// Mean over the purifiable states of the bin only.
    pub fn mean_success_purifiable(&self, k: usize) -> Option<f64> {
        (self.purifiable[k] > 0).then(|| self.success_sum_purifiable[k] / self.purifiable[k] as f64)
    }

    fn add(&mut self, s: &SampleResult) {
        self.count += 1;
        for k in 0..self.purifiable.len() {
            if s.purifiable[k] {
                self.purifiable[k] += 1;
                self.success_sum_purifiable[k] += s.probability[k];
            }
            self.success_sum[k] += s.probability[k];
        }
    }

    fn merge(&mut self, o: &BinStat) {
        self.count += o.count;
        for k in 0..self.purifiable.len() {
            self.purifiable[k] += o.purifiable[k];
            self.success_sum[k] += o.success_sum[k];
            self.success_sum_purifiable[k] += o.success_sum_purifiable[k];
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleReport {
    pub config: EnsembleConfig,
    pub bins: Vec<BinStat>,
    pub mean_concurrence: f64,
}

impl EnsembleReport {
    pub fn protocol_index(&self, p: ProtocolKind) -> Option<usize> {
        self.config.protocols.iter().position(|&q| q == p)
    }

    /// Fraction of all samples falling in each bin.
    pub fn histogram(&self) -> Vec<(f64, f64)> {
        let n = self.config.samples as f64;
        self.bins.iter().map(|b| (b.center(), b.count as f64 / n)).collect()
    }
}

fn bin_index(c: f64, bins: usize) -> usize {
    ((c * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

fn empty_bins(bins: usize, n: usize) -> Vec<BinStat> {
    (0..bins).map(|i| BinStat::empty(i as f64 / bins as f64, (i + 1) as f64 / bins as f64, n)).collect()
}

/// The purifiability predicate used for each protocol's fraction.
fn predicate<T: Real>(kind: ProtocolKind, rho: &BellDensityMatrix<T>) -> bool {
    let holds = |r: &BellDensityMatrix<T>| purify_target(r) != PurifyTarget::None;
    match kind {
        ProtocolKind::M2 | ProtocolKind::M2X => m2_step(rho, Sign::Minus).map(|o| holds(&o.state)).unwrap_or(false),
        ProtocolKind::M2H => {
            let x = if rho.is_x_state(T::tolerance(X_TOL)) {
                *rho
            } else {
                match m2_step(rho, Sign::Minus) {
                    Ok(o) => o.state,
                    Err(_) => return false,
                }
            };
            match m2h_branches(&x) {
                Ok((a, b)) => [a, b].iter().any(|o| o.as_ref().map(|o| holds(&o.state)).unwrap_or(false)),
                Err(_) => false,
            }
        }
        ProtocolKind::DEJMPS => rho.fidelities().iter().any(|&f| f > T::lit(0.5)),
        ProtocolKind::M2H2 => run(kind, rho, &Options::default()).map(|r| r.purified()).unwrap_or(false),
    }
}

/// Concurrence, purifiability and success probability of one state under each protocol.
pub fn evaluate_state<T: Real>(rho: &BellDensityMatrix<T>, protocols: &[ProtocolKind], opts: &Options<T>) -> SampleResult {
    let mut out = SampleResult { concurrence: rho.concurrence().as_f64(), purifiable: vec![], probability: vec![] };
    for &p in protocols {
        let ok = predicate(p, rho);
        let prob = run(p, rho, opts).map(|r| r.overall_probability.as_f64()).unwrap_or(0.0);
        out.purifiable.push(ok);
        out.probability.push(prob);
    }
    out
}

fn draw_nr<R: Rng>(mode: NrMode, rng: &mut R) -> usize {
    match mode {
        NrMode::Fixed(n) => n as usize,
        NrMode::UniformRandom1to4 => rng.random_range(1..=4),
    }
}

/// RNG for chunk `i`: the seed picks the key, the chunk index the stream.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(chunk);
    r
}

/// Draws the ensemble and accumulates all statistics. Chunks run in parallel; the reduction
/// runs in chunk order, so the report is bit-identical for a given seed.
pub fn run_ensemble<T: Real>(cfg: &EnsembleConfig) -> Result<EnsembleReport> {
    cfg.validate()?;
    let opts = Options::<T>::default();
    let n_chunks = cfg.samples.div_ceil(CHUNK);
    let np = cfg.protocols.len();
    let partial: Vec<(Vec<BinStat>, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = chunk_rng(cfg.seed, ci as u64);
            let mut bins = empty_bins(cfg.bins, np);
            let mut csum = 0.0;
            let len = CHUNK.min(cfg.samples - ci * CHUNK);
            for _ in 0..len {
                let nr = draw_nr(cfg.nr_mode, &mut rng);
                let rho = random_density::<T, _>(&mut rng, nr).expect("n_r validated").to_bell();
                let s = evaluate_state(&rho, &cfg.protocols, &opts);
                csum += s.concurrence;
                bins[bin_index(s.concurrence, cfg.bins)].add(&s);
            }
            (bins, csum)
        })
        .collect();
    let mut bins = empty_bins(cfg.bins, np);
    let mut csum = 0.0;
    for (b, c) in &partial {
        for (acc, x) in bins.iter_mut().zip(b) {
            acc.merge(x);
        }
        csum += c;
    }
    Ok(EnsembleReport { config: cfg.clone(), bins, mean_concurrence: csum / cfg.samples as f64 })
}

/// Histogram only (no protocols evaluated).
pub fn concurrence_histogram<T: Real>(cfg: &EnsembleConfig) -> Result<Vec<BinStat>> {
    let mut c = cfg.clone();
    c.protocols.clear();
    Ok(run_ensemble::<T>(&c)?.bins)
}

/// Per-bin purifiable fractions (read with [`BinStat::fraction_purifiable`]).
pub fn purifiable_fraction<T: Real>(cfg: &EnsembleConfig) -> Result<Vec<BinStat>> {
    if cfg.protocols.is_empty() {
        return Err(domain("protocols", 0.0, "non-empty"));
    }
    Ok(run_ensemble::<T>(cfg)?.bins)
}

/// Per-bin average success probabilities (read with [`BinStat::mean_success`] or
/// [`BinStat::mean_success_purifiable`]).
pub fn average_success<T: Real>(cfg: &EnsembleConfig) -> Result<Vec<BinStat>> {
    purifiable_fraction::<T>(cfg)
}

/// Aggregates externally supplied states, e.g. injected Bell states.
pub fn aggregate(samples: &[SampleResult], bins: usize, protocols: usize) -> Vec<BinStat> {
    let mut out = empty_bins(bins, protocols);
    for s in samples {
        out[bin_index(s.concurrence, bins)].add(s);
    }
    out
}
