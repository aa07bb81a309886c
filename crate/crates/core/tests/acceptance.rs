//! Acceptance checks. Each check prints one PASS/FAIL line; the run exits non-zero if any
//! check outside `KNOWN_UNATTAINABLE` fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use epp_core::analytic::{mems, mems1_prob, mems2_prob, rank3, Rank3Params};
use epp_core::bellmat::{apply_local_gate, BellDensityMatrix, LocalGate, X_TOL};
use epp_core::ensemble::{chunk_rng, random_density, run_ensemble, EnsembleConfig, NrMode};
use epp_core::protocols::{
    branch_probabilities, m2_step, oracle_branch, run_dejmps, run_m2, run_m2h2, x_step, Options, ProtocolKind, Sign, Status, Target,
};
use epp_core::yieldsim::{mean_two_rounds_closed, pairings_count, yield_pmf};
use num_bigint::BigUint;
use rand::Rng;

type B = BellDensityMatrix<f64>;

/// Checks that cannot pass as stated; each is explained in the project notes.
const KNOWN_UNATTAINABLE: &[&str] = &["7c", "6e"];

struct Report {
    lines: Vec<(String, bool)>,
}

impl Report {
    fn check(&mut self, id: &str, ok: bool, what: String) {
        println!("{} {id} {what}", if ok { "PASS" } else { "FAIL" });
        self.lines.push((id.to_string(), ok));
    }

    fn timed(&mut self, id: &str, start: Instant, budget: Duration) {
        let t = start.elapsed();
        self.check(id, t <= budget, format!("runtime {:.2}s <= {}s", t.as_secs_f64(), budget.as_secs()));
    }
}

fn random_bell(rng: &mut impl Rng) -> B {
    let nr = rng.random_range(1..=4);
    random_density::<f64, _>(rng, nr).unwrap().to_bell()
}

fn oracle_equivalence(r: &mut Report) {
    let start = Instant::now();
    let mut rng = chunk_rng(101, 0);
    let mut worst_state: f64 = 0.0;
    let mut worst_p: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    for _ in 0..1000 {
        let rho = random_bell(&mut rng);
        for s in [Sign::Minus, Sign::Plus] {
            let fast = m2_step(&rho, s).unwrap();
            let slow = oracle_branch(&rho, s, s).unwrap();
            worst_state = worst_state.max(fast.state.matrix().max_abs_diff(slow.state.matrix()));
            worst_p = worst_p.max((fast.probability - slow.probability).abs());
        }
        worst_sum = worst_sum.max((branch_probabilities(&rho).total() - 1.0).abs());
    }
    r.check("1a", worst_state <= 1e-10 && worst_p <= 1e-10, format!("m2_step vs oracle, max deviation {worst_state:.2e} (state) {worst_p:.2e} (probability)"));
    r.check("1b", worst_sum <= 1e-10, format!("q- + q+ + r- + r+ = 1, max deviation {worst_sum:.2e}"));
    r.timed("1t", start, Duration::from_secs(30));
}

fn rank_two(r: &mut Report) {
    let start = Instant::now();
    let opts = Options::default();
    let mut worst: f64 = 0.0;
    let mut worst_sq: f64 = 0.0;
    let mut max_iter = 0;
    let mut converged = true;
    for i in 0..9 {
        let a = 0.55 + 0.05 * i as f64;
        let psi = run_m2(&B::bell_diagonal([a, 0.0, 0.0, 1.0 - a]).unwrap(), &opts).unwrap();
        let phi = run_m2(&B::bell_diagonal([a, 1.0 - a, 0.0, 0.0]).unwrap(), &opts).unwrap();
        converged &= psi.status == Status::Purified && phi.status == Status::Purified;
        max_iter = max_iter.max(psi.iterations).max(phi.iterations);
        worst = worst.max((psi.overall_probability - (2.0 * a - 1.0)).abs());
        worst_sq = worst_sq.max((phi.overall_probability - (2.0 * a - 1.0).powi(2)).abs());
    }
    r.check("2a", converged && worst <= 1e-9 && max_iter <= 48, format!("Psi-/Psi+ limit 2a-1, max deviation {worst:.2e}, max iterations {max_iter}"));
    r.check("2b", converged && worst_sq <= 1e-9, format!("Psi-/Phi- limit (2a-1)^2, max deviation {worst_sq:.2e}"));
    r.timed("2t", start, Duration::from_secs(1));
}

fn mems_one_step(r: &mut Report) {
    let opts = Options::default();
    let mut worst: f64 = 0.0;
    let mut pure = true;
    for c in [0.7f64, 0.8, 0.9, 1.0] {
        let res = run_m2h2(&mems(c).unwrap(), &opts).unwrap();
        let row0 = &res.branches[0];
        worst = worst.max((row0.probability - c * c / 2.0).abs());
        let f = row0.trajectory.last().map(|t| t.fidelity).unwrap_or(0.0);
        pure &= row0.label == "row 0" && row0.target == Target::PsiPlus && f >= 1.0 - 1e-12;
    }
    r.check("3a", worst <= 1e-12 && pure, format!("MEMS I row 0 = C^2/2, max deviation {worst:.2e}, pure Psi+ output: {pure}"));
    let hh = LocalGate::hh();
    let mut worst_q: f64 = 0.0;
    let mut worst_c: f64 = 0.0;
    for i in 0..=40 {
        let c = (2.0 / 3.0) * i as f64 / 40.0;
        let v = apply_local_gate(&mems(c).unwrap(), &hh);
        worst_q = worst_q.max((branch_probabilities(&v).q_minus - 2.0 / 9.0).abs());
        let out = m2_step(&v, Sign::Minus).unwrap();
        worst_c = worst_c.max((out.state.concurrence() - 9.0 * c * c / 4.0).abs());
    }
    r.check("3b", worst_q <= 1e-12, format!("MEMS II Q- after HH = 2/9, max deviation {worst_q:.2e}"));
    r.check("3c", worst_c <= 1e-10, format!("MEMS II branch concurrence 9C^2/4, max deviation {worst_c:.2e}"));
}

fn series_agreement(r: &mut Report) {
    let start = Instant::now();
    let opts = Options::default();
    let mut worst: f64 = 0.0;
    let mut ordered = true;
    let mut threshold = true;
    for i in 0..50 {
        let c = (i as f64 + 0.5) / 50.0;
        let rho = mems(c).unwrap();
        let sim = run_m2h2(&rho, &opts).unwrap().overall_probability;
        let series = if c >= 2.0 / 3.0 { mems1_prob(c).unwrap() } else { mems2_prob(c).unwrap() };
        worst = worst.max((sim - series).abs());
        let dj = run_dejmps(&rho, &opts).unwrap();
        if c > 1.0 / 3.0 {
            ordered &= series > dj.overall_probability && sim > dj.overall_probability;
        } else {
            threshold &= dj.status == Status::NotPurifiable;
        }
    }
    r.check("4a", worst <= 1e-8, format!("MEMS series vs M2H2 on 50 points, max deviation {worst:.2e}"));
    r.check("4b", ordered, "M2H2 and series exceed DEJMPS for C > 1/3".into());
    r.check("4c", threshold, "DEJMPS not purifiable for C <= 1/3".into());
    r.timed("4t", start, Duration::from_secs(60));
}

fn rank_three(r: &mut Report) {
    let opts = Options::default();
    let mut worst_bound: f64 = 0.0;
    let mut worst_phi: f64 = 0.0;
    let mut dejmps_none = true;
    for theta in [PI / 4.0, PI / 2.0] {
        for i in 0..20 {
            let w = i as f64 / 19.0;
            for j in 0..20 {
                let u = w * (-1.0 + 2.0 * j as f64 / 19.0);
                let c = u.abs() * theta.sin();
                let mut probs = vec![];
                for phi in [0.0, 1.3, PI / 2.0] {
                    let rho = rank3(&Rank3Params::new(w, u, theta, phi).unwrap());
                    let p = run_m2h2(&rho, &opts).unwrap().overall_probability;
                    worst_bound = worst_bound.max(c * c / 2.0 - p);
                    probs.push(p);
                    if phi == PI / 2.0 {
                        dejmps_none &= !run_dejmps(&rho, &opts).unwrap().purified();
                    }
                }
                worst_phi = worst_phi.max((probs[0] - probs[1]).abs()).max((probs[0] - probs[2]).abs());
            }
        }
    }
    r.check("5a", worst_bound <= 1e-8, format!("M2H2 >= C^2/2 on rank-three grid, worst shortfall {worst_bound:.2e}"));
    r.check("5b", worst_phi <= 1e-8, format!("M2H2 phi-invariant, max spread {worst_phi:.2e}"));
    r.check("5c", dejmps_none, "DEJMPS purifies nothing at phi = pi/2".into());
}

fn ensemble(r: &mut Report) {
    let start = Instant::now();
    let cfg4 = EnsembleConfig { protocols: vec![], ..EnsembleConfig::new(100_000, NrMode::Fixed(4), 2024) };
    let rep4 = run_ensemble::<f64>(&cfg4).unwrap();
    r.check("6a", (rep4.mean_concurrence - 0.126).abs() <= 0.01, format!("n_r = 4 mean concurrence {:.4} (0.126 +- 0.01)", rep4.mean_concurrence));

    let cfg = EnsembleConfig::new(100_000, NrMode::UniformRandom1to4, 2024);
    let rep = run_ensemble::<f64>(&cfg).unwrap();
    let m2 = rep.protocol_index(ProtocolKind::M2).unwrap();
    let m2h = rep.protocol_index(ProtocolKind::M2H).unwrap();
    let dj = rep.protocol_index(ProtocolKind::DEJMPS).unwrap();
    // Top-concurrence region: the three highest bins pooled.
    let top = &rep.bins[rep.bins.len() - 3..];
    let count: u64 = top.iter().map(|b| b.count).sum();
    let frac = |k: usize| top.iter().map(|b| b.purifiable[k]).sum::<u64>() as f64 / count as f64;
    r.check("6b", frac(dj) < 0.8, format!("top-bin DEJMPS fraction {:.4} < 0.8 ({count} states)", frac(dj)));
    r.check("6c", frac(m2h) > frac(dj), format!("top-bin M2H fraction {:.4} > DEJMPS {:.4}", frac(m2h), frac(dj)));
    // Near C = 1: the highest bin.
    let last = rep.bins.last().unwrap();
    let avg = |k: usize| last.mean_success(k).unwrap_or(f64::NAN);
    r.check("6d", (avg(m2) - 0.25).abs() <= 0.02, format!("near C = 1 M2 average success {:.4} (0.25 +- 0.02, {} states)", avg(m2), last.count));
    r.check("6e", (avg(m2h) - 0.25).abs() <= 0.02, format!("near C = 1 M2H average success {:.4} (0.25 +- 0.02)", avg(m2h)));
    r.check("6f", (avg(dj) - 0.22).abs() <= 0.02, format!("near C = 1 DEJMPS average success {:.4} (0.22 +- 0.02)", avg(dj)));
    println!(
        "INFO 6 purifiable-only averages near C = 1: M2 {:.4} M2H {:.4} DEJMPS {:.4}",
        last.mean_success_purifiable(m2).unwrap_or(f64::NAN),
        last.mean_success_purifiable(m2h).unwrap_or(f64::NAN),
        last.mean_success_purifiable(dj).unwrap_or(f64::NAN)
    );
    r.timed("6t", start, Duration::from_secs(600));
}

fn binom(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Nested sum over k₁ … k_{m−1} of products of binomial terms.
fn nested(prev: usize, probs: &[f64], km: usize) -> f64 {
    let p = probs[0];
    let term = |k: usize| binom(prev as u64, k as u64) * p.powi(k as i32) * (1.0 - p).powi((prev - k) as i32);
    if probs.len() == 1 {
        return if km <= prev { term(km) } else { 0.0 };
    }
    (0..=prev).map(|k| term(k) * nested(k / 2, &probs[1..], km)).sum()
}

fn brute_pairings(items: usize) -> u64 {
    fn rec(left: Vec<usize>) -> u64 {
        if left.len() < 2 {
            return 1;
        }
        if left.len() % 2 == 1 {
            return (0..left.len()).map(|i| rec(left.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &x)| x).collect())).sum();
        }
        (1..left.len()).map(|j| rec(left.iter().enumerate().filter(|(i, _)| *i != 0 && *i != j).map(|(_, &x)| x).collect())).sum()
    }
    rec((0..items).collect())
}

fn yields(r: &mut Report) {
    let start = Instant::now();
    let probs = [0.83, 0.41, 0.67];
    let mut worst: f64 = 0.0;
    for n in 1..=12 {
        for m in 1..=3 {
            let d = yield_pmf(n, &probs[..m]).unwrap();
            for (k, v) in d[m - 1].pmf.iter().enumerate() {
                worst = worst.max((v - nested(n, &probs[..m], k)).abs());
            }
        }
    }
    r.check("7a", worst <= 1e-12, format!("DP pmf vs nested sum, n <= 12, m <= 3, max deviation {worst:.2e}"));
    let mut worst_mean: f64 = 0.0;
    for i in 0..20 {
        let n = 1 + 7 * i;
        let (p1, p2) = (0.05 + 0.045 * i as f64, 0.95 - 0.04 * i as f64);
        let exact = yield_pmf(n, &[p1, p2]).unwrap()[1].mean();
        worst_mean = worst_mean.max((mean_two_rounds_closed(n, p1, p2) - exact).abs());
    }
    r.check("7b", worst_mean <= 1e-12, format!("closed two-round mean on 20 points, max deviation {worst_mean:.2e}"));
    let mut all = true;
    for (n, want) in [(4u32, 3u64), (5, 12), (6, 15)] {
        let got = pairings_count(n).unwrap();
        let brute = brute_pairings(n as usize);
        let ok = got == BigUint::from(want) && got == BigUint::from(brute);
        all &= ok;
        println!("INFO 7c N={n}: pairings_count {got}, brute force {brute}, stated {want}");
    }
    r.check("7c", all, "pairings_count(4, 5, 6) = (3, 12, 15) and equal to brute force".into());
    r.timed("7t", start, Duration::from_secs(5));
}

fn invariants(r: &mut Report) {
    let start = Instant::now();
    let mut rng = chunk_rng(202, 0);
    let hh = LocalGate::hh();
    let g = LocalGate::g();
    let mut valid = true;
    let mut closed = true;
    let mut steps = 0u64;
    let mut check = |s: &B| {
        steps += 1;
        s.validate().is_ok()
    };
    for _ in 0..10_000 {
        let rho = random_bell(&mut rng);
        if let Ok(o) = m2_step(&rho, Sign::Plus) {
            valid &= check(&o.state);
        }
        let Ok(first) = m2_step(&rho, Sign::Minus) else { continue };
        valid &= check(&first.state);
        closed &= first.state.is_x_state(X_TOL);
        let mut cur = first.state;
        for _ in 0..4 {
            let v = apply_local_gate(&cur, &hh);
            valid &= check(&v);
            if let Ok(o) = m2_step(&v, Sign::Plus) {
                valid &= check(&o.state);
                valid &= check(&apply_local_gate(&o.state, &g));
            }
            match x_step(&cur) {
                Ok(o) => {
                    valid &= check(&o.state);
                    closed &= o.state.is_x_state(X_TOL);
                    cur = o.state;
                }
                Err(_) => break,
            }
        }
    }
    r.check("8a", valid, format!("Hermitian, unit trace, PSD after {steps} steps"));
    r.check("8b", closed, "X-state closure of m2_step(-) and x_step".into());
    r.timed("8t", start, Duration::from_secs(60));
}

fn main() {
    let mut r = Report { lines: vec![] };
    oracle_equivalence(&mut r);
    rank_two(&mut r);
    mems_one_step(&mut r);
    series_agreement(&mut r);
    rank_three(&mut r);
    ensemble(&mut r);
    yields(&mut r);
    invariants(&mut r);
    let failed = |known: bool| -> Vec<&str> {
        r.lines.iter().filter(|(id, ok)| !ok && KNOWN_UNATTAINABLE.contains(&id.as_str()) == known).map(|(id, _)| id.as_str()).collect()
    };
    println!("known unattainable failures: {:?}", failed(true));
    let unexpected = failed(false);
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
