//! Distribution of surviving pairs over repeated purification rounds with re-pairing.

use num_bigint::BigUint;
use num_traits::{FromPrimitive, Num, One, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::chunk_rng;
use crate::error::{domain, EppError, Result};

/// Limit on n·2^m.
pub const MAX_TERMS: u128 = 10_000_000;
/// Limit on the number of multiply-adds of the exact DP.
pub const MAX_DP_WORK: u128 = 2_000_000_000;
const MC_CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YieldConfig {
    /// Input pairs n = ⌊N/2⌋.
    pub n_pairs: usize,
    /// Success probability of each round.
    pub probs: Vec<f64>,
}

impl YieldConfig {
    pub fn validate(&self) -> Result<()> {
        validate(self.n_pairs, &self.probs)
    }
}

fn validate<T: PartialOrd + Zero + One + ToPrimitive>(n: usize, probs: &[T]) -> Result<()> {
    if n == 0 {
        return Err(domain("n_pairs", 0.0, ">= 1"));
    }
    if probs.is_empty() {
        return Err(domain("rounds", 0.0, ">= 1"));
    }
    if let Some(p) = probs.iter().find(|p| !(**p >= T::zero() && **p <= T::one())) {
        return Err(domain("probability", p.to_f64().unwrap_or(f64::NAN), "[0, 1]"));
    }
    let m = probs.len() as u32;
    let terms = if m >= 100 { u128::MAX } else { (n as u128).saturating_mul(1u128 << m.min(100)) };
    if terms > MAX_TERMS {
        return Err(EppError::SizeExceeded(terms, MAX_TERMS));
    }
    let mut work: u128 = 0;
    let mut pairs = n as u128;
    for _ in 0..m {
        work += (pairs + 1) * (pairs + 1);
        pairs /= 2;
    }
    if work > MAX_DP_WORK {
        return Err(EppError::SizeExceeded(work, MAX_DP_WORK));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct YieldDistribution<T> {
    /// 1-based round index.
    pub round: usize,
    /// pmf[k] = probability that k pairs survive this round.
    pub pmf: Vec<T>,
}

impl<T: Num + Clone + FromPrimitive> YieldDistribution<T> {
    pub fn mean(&self) -> T {
        self.pmf.iter().enumerate().fold(T::zero(), |acc, (k, p)| acc + T::from_usize(k).expect("index representable") * p.clone())
    }

    pub fn total(&self) -> T {
        self.pmf.iter().fold(T::zero(), |acc, p| acc + p.clone())
    }
}

/// Exact pmf after each round. Round 1 is Binomial(n, p₁); round m compounds
/// Binomial(⌊k/2⌋, p_m) over the previous round. Binomial rows are generated one from the
/// next, so only ring operations are used and exact rationals work unchanged.
pub fn yield_pmf<T: Num + Clone + PartialOrd + ToPrimitive>(n: usize, probs: &[T]) -> Result<Vec<YieldDistribution<T>>> {
    validate(n, probs)?;
    let mut out: Vec<YieldDistribution<T>> = Vec::with_capacity(probs.len());
    // Before round 1 there are exactly n pairs; express that as "2n states survived".
    let mut pairs_pmf: Vec<T> = vec![T::zero(); n + 1];
    pairs_pmf[n] = T::one();
    for (r, p) in probs.iter().enumerate() {
        let q = T::one() - p.clone();
        let max_pairs = pairs_pmf.len() - 1;
        let mut next = vec![T::zero(); max_pairs + 1];
        let mut row: Vec<T> = vec![T::one()];
        for (j, w) in pairs_pmf.iter().enumerate() {
            if j > 0 {
                let mut nr = vec![T::zero(); j + 1];
                for (i, x) in row.iter().enumerate() {
                    nr[i] = nr[i].clone() + x.clone() * q.clone();
                    nr[i + 1] = nr[i + 1].clone() + x.clone() * p.clone();
                }
                row = nr;
            }
            if w.is_zero() {
                continue;
            }
            for (k, b) in row.iter().enumerate() {
                next[k] = next[k].clone() + w.clone() * b.clone();
            }
        }
        out.push(YieldDistribution { round: r + 1, pmf: next.clone() });
        // Survivors are re-paired; an odd one out is dropped.
        let half = max_pairs / 2;
        let mut paired = vec![T::zero(); half + 1];
        for (k, v) in next.into_iter().enumerate() {
            paired[k / 2] = paired[k / 2].clone() + v;
        }
        pairs_pmf = paired;
    }
    Ok(out)
}

/// n p₁ p₂/2 − (p₂/4)[1 − (1 − 2p₁)ⁿ].
pub fn mean_two_rounds_closed<T: Num + Clone + FromPrimitive>(n: usize, p1: T, p2: T) -> T {
    let two = T::from_u8(2).expect("2");
    let four = T::from_u8(4).expect("4");
    let nn = T::from_usize(n).expect("n representable");
    let base = T::one() - two.clone() * p1.clone();
    let pw = num_traits::pow::pow(base, n);
    nn * p1 * p2.clone() / two - p2 / four * (T::one() - pw)
}

/// n p₁⋯p_m / 2^(m−1).
pub fn dominant_mean<T: Num + Clone + FromPrimitive>(n: usize, probs: &[T]) -> T {
    let prod = probs.iter().fold(T::one(), |acc, p| acc * p.clone());
    let scale = num_traits::pow::pow(T::from_u8(2).expect("2"), probs.len().saturating_sub(1));
    T::from_usize(n).expect("n representable") * prod / scale
}

/// Largest possible gap between the dominant term and the exact m-round mean.
pub fn defect_bound(m: usize) -> f64 {
    1.0 - 2f64.powi(1 - m as i32)
}

/// Ways to split N states into ⌊N/2⌋ unordered pairs (one state left over when N is odd):
/// N!/(⌊N/2⌋!·2^⌊N/2⌋).
pub fn pairings_count(n_states: u32) -> Result<BigUint> {
    if n_states < 2 {
        return Err(domain("N", n_states as f64, ">= 2"));
    }
    let h = n_states / 2;
    let fact = |k: u32| (1..=k).fold(BigUint::one(), |acc, i| acc * i);
    Ok(fact(n_states) / (fact(h) * (BigUint::one() << h)))
}

/// The odd-N expression 3·2^(⌊N/2⌋−1)·⌊N/2⌋!, kept for comparison with [`pairings_count`].
pub fn pairings_count_odd_formula(n_states: u32) -> Result<BigUint> {
    if n_states < 3 || n_states.is_multiple_of(2) {
        return Err(domain("N", n_states as f64, "odd, >= 3"));
    }
    let h = n_states / 2;
    let fact = (1..=h).fold(BigUint::one(), |acc, i| acc * i);
    Ok(BigUint::from(3u32) * (BigUint::one() << (h - 1)) * fact)
}

/// Monte Carlo: every pair survives a round independently with probability p_i; survivors
/// are re-paired with the odd one dropped. Returns the empirical pmf per round.
pub fn mc_yield(cfg: &YieldConfig, trials: usize, seed: u64) -> Result<Vec<YieldDistribution<f64>>> {
    cfg.validate()?;
    if trials == 0 {
        return Err(domain("trials", 0.0, ">= 1"));
    }
    let m = cfg.probs.len();
    let n = cfg.n_pairs;
    let chunks = trials.div_ceil(MC_CHUNK);
    let partial: Vec<Vec<Vec<u64>>> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = chunk_rng(seed, ci as u64);
            let mut counts: Vec<Vec<u64>> = (0..m).map(|r| vec![0; (n >> r) + 1]).collect();
            let len = MC_CHUNK.min(trials - ci * MC_CHUNK);
            for _ in 0..len {
                let mut pairs = n;
                for (r, &p) in cfg.probs.iter().enumerate() {
                    let k = (0..pairs).filter(|_| rng.random_bool(p)).count();
                    counts[r][k] += 1;
                    pairs = k / 2;
                }
            }
            counts
        })
        .collect();
    let mut total: Vec<Vec<u64>> = (0..m).map(|r| vec![0; (n >> r) + 1]).collect();
    for c in &partial {
        for (acc, x) in total.iter_mut().zip(c) {
            for (a, b) in acc.iter_mut().zip(x) {
                *a += b;
            }
        }
    }
    Ok(total
        .into_iter()
        .enumerate()
        .map(|(r, c)| YieldDistribution { round: r + 1, pmf: c.into_iter().map(|x| x as f64 / trials as f64).collect() })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use proptest::prelude::*;

    fn rat(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    fn binom(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    /// Literal nested sum over k₁ … k_{m−1} for P^(m)(k_m).
    fn nested(n: usize, probs: &[f64], km: usize) -> f64 {
        fn rec(level: usize, prev_pairs: usize, probs: &[f64], km: usize) -> f64 {
            let p = probs[level];
            let last = level + 1 == probs.len();
            let range: Vec<usize> = if last { vec![km] } else { (0..=prev_pairs).collect() };
            range
                .into_iter()
                .filter(|&k| k <= prev_pairs)
                .map(|k| {
                    let w = binom(prev_pairs as u64, k as u64) * p.powi(k as i32) * (1.0 - p).powi((prev_pairs - k) as i32);
                    if last {
                        w
                    } else {
                        w * rec(level + 1, k / 2, probs, km)
                    }
                })
                .sum()
        }
        rec(0, n, probs, km)
    }

    #[test]
    fn single_round_is_binomial() {
        let d = yield_pmf(2, &[0.5]).unwrap();
        assert_eq!(d[0].pmf, vec![0.25, 0.5, 0.25]);
        assert_eq!(d[0].mean(), 1.0);
    }

    #[test]
    fn exact_rational_example() {
        let d = yield_pmf(4, &[rat(1, 2), rat(1, 2)]).unwrap();
        assert_eq!(d[1].mean(), rat(3, 8));
        assert_eq!(d[1].total(), rat(1, 1));
        assert_eq!(mean_two_rounds_closed(4, rat(1, 2), rat(1, 2)), rat(3, 8));
        // n = 2: k₁ = 2 with probability ¼, then one pair survives with probability ½.
        let d = yield_pmf(2, &[rat(1, 2), rat(1, 2)]).unwrap();
        assert_eq!(d[1].mean(), rat(1, 8));
        assert_eq!(dominant_mean(2, &[rat(1, 2), rat(1, 2)]), rat(1, 4));
    }

    #[test]
    fn single_pair_cannot_be_repaired() {
        let d = yield_pmf(1, &[0.9, 0.9]).unwrap();
        assert_eq!(d[1].pmf, vec![1.0]);
    }

    #[test]
    fn matches_nested_sum() {
        let probs = [0.7, 0.4, 0.9];
        for n in 1..=12 {
            for m in 1..=3 {
                let d = yield_pmf(n, &probs[..m]).unwrap();
                for (k, v) in d[m - 1].pmf.iter().enumerate() {
                    assert!((v - nested(n, &probs[..m], k)).abs() < 1e-12, "n={n} m={m} k={k}");
                }
            }
        }
    }

    #[test]
    fn matches_exhaustive_enumeration() {
        // Enumerate every success pattern of every round for small n.
        fn enumerate(pairs: usize, probs: &[f64], weight: f64, round: usize, acc: &mut Vec<Vec<f64>>) {
            if round == probs.len() {
                return;
            }
            for mask in 0u32..(1 << pairs) {
                let k = mask.count_ones() as usize;
                let w = weight * probs[round].powi(k as i32) * (1.0 - probs[round]).powi((pairs - k) as i32);
                acc[round][k] += w;
                enumerate(k / 2, probs, w, round + 1, acc);
            }
        }
        let probs = [0.5, 0.5];
        let mut acc = vec![vec![0.0; 5], vec![0.0; 3]];
        enumerate(4, &probs, 1.0, 0, &mut acc);
        let d = yield_pmf(4, &probs).unwrap();
        for r in 0..2 {
            for (k, v) in d[r].pmf.iter().enumerate() {
                assert!((v - acc[r][k]).abs() < 1e-15);
            }
        }
        assert!((d[1].mean() - 0.375).abs() < 1e-15);
    }

    #[test]
    fn dominant_examples() {
        assert_eq!(dominant_mean(10, &[0.3]), 3.0);
        let dom: f64 = dominant_mean(1024, &[0.9, 0.9, 0.9]);
        assert!((dom - 186.624).abs() < 1e-9);
        let exact = yield_pmf(1024, &[0.9, 0.9, 0.9]).unwrap()[2].mean();
        let delta = dom - exact;
        assert!(delta >= -1e-9 && delta <= defect_bound(3));
    }

    #[test]
    fn defect_exceeds_one_half_for_three_rounds() {
        // Three pairs, certain success: 3 → 1 pair → 0 pairs, so the mean is 0 while the
        // dominant term is 3/4.
        let exact = yield_pmf(3, &[1.0, 1.0, 1.0]).unwrap()[2].mean();
        assert_eq!(exact, 0.0);
        assert_eq!(dominant_mean(3, &[1.0, 1.0, 1.0]), 0.75);
        assert_eq!(defect_bound(3), 0.75);
    }

    #[test]
    fn pairings() {
        // Brute-force: count maximum matchings of {0, …, N−1}.
        fn brute(items: &[u32]) -> u64 {
            if items.len() < 2 {
                return 1;
            }
            if items.len() % 2 == 1 {
                return (0..items.len())
                    .map(|i| {
                        let rest: Vec<u32> = items.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &x)| x).collect();
                        brute(&rest)
                    })
                    .sum();
            }
            (1..items.len())
                .map(|j| {
                    let rest: Vec<u32> = items.iter().enumerate().filter(|(i, _)| *i != 0 && *i != j).map(|(_, &x)| x).collect();
                    brute(&rest)
                })
                .sum()
        }
        for n in 2..=9u32 {
            let items: Vec<u32> = (0..n).collect();
            assert_eq!(pairings_count(n).unwrap(), BigUint::from(brute(&items)), "N={n}");
        }
        assert_eq!(pairings_count(2).unwrap(), BigUint::from(1u32));
        assert_eq!(pairings_count(4).unwrap(), BigUint::from(3u32));
        assert_eq!(pairings_count(6).unwrap(), BigUint::from(15u32));
        assert_eq!(pairings_count_odd_formula(5).unwrap(), BigUint::from(12u32));
        assert!(pairings_count(64).unwrap() > BigUint::from(u64::MAX));
        assert!(pairings_count(1).is_err());
    }

    #[test]
    fn floor_identity() {
        for k in 0i64..=1_000_000 {
            let rhs = k as f64 / 2.0 - (1.0 - (-1f64).powi((k % 2) as i32)) / 4.0;
            assert_eq!((k / 2) as f64, rhs);
        }
    }

    #[test]
    fn guards() {
        assert!(matches!(yield_pmf(10_000_000, &[0.5]), Err(EppError::SizeExceeded(..))));
        assert!(yield_pmf(4, &[1.2]).is_err());
        assert!(yield_pmf::<f64>(4, &[]).is_err());
        assert!(yield_pmf(0, &[0.5]).is_err());
    }

    #[test]
    fn monte_carlo_point_mass_and_determinism() {
        let cfg = YieldConfig { n_pairs: 4, probs: vec![0.5, 0.5] };
        let one = mc_yield(&cfg, 1, 7).unwrap();
        assert!(one.iter().all(|d| d.pmf.iter().filter(|&&x| x == 1.0).count() == 1));
        assert_eq!(mc_yield(&cfg, 5000, 3).unwrap(), mc_yield(&cfg, 5000, 3).unwrap());
    }

    proptest! {
        #[test]
        fn closed_form_mean(n in 1usize..60, p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0) {
            let d = yield_pmf(n, &[p1, p2]).unwrap();
            let exact = d[1].mean();
            prop_assert!((mean_two_rounds_closed(n, p1, p2) - exact).abs() < 1e-12);
            let gap = n as f64 * p1 * p2 / 2.0 - exact;
            prop_assert!(gap >= -1e-12 && gap <= p2 / 2.0 + 1e-12);
            for r in &d {
                prop_assert!((r.total() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn means_do_not_increase(n in 1usize..200, probs in prop::collection::vec(0.0f64..=1.0, 1..5)) {
            let d = yield_pmf(n, &probs).unwrap();
            let means: Vec<f64> = d.iter().map(|x| x.mean()).collect();
            prop_assert!(means.windows(2).all(|w| w[1] <= w[0] + 1e-12));
            let dom = dominant_mean(n, &probs);
            let delta = dom - means[probs.len() - 1];
            prop_assert!(delta >= -1e-9 && delta <= defect_bound(probs.len()) + 1e-9);
        }
    }
}
