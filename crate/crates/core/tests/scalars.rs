use epp_core::analytic::{mems, mems1_prob};
use epp_core::ensemble::{chunk_rng, random_density};
use epp_core::protocols::{run, Options, ProtocolKind};
use epp_core::yieldsim::{mean_two_rounds_closed, yield_pmf};
use epp_core::{BellDensityMatrix32, BellDensityMatrix64, Options32, StateFile};
use num_bigint::BigInt;
use num_rational::BigRational;

#[test]
fn single_precision_tracks_double() {
    let opts32 = Options32 { tol: 1e-5, ..Options::default() };
    let opts64 = Options { tol: 1e-5, ..Options::default() };
    let mut rng = chunk_rng(5, 0);
    for _ in 0..50 {
        let rho: BellDensityMatrix64 = random_density::<f64, _>(&mut rng, 2).unwrap().to_bell();
        let r32: BellDensityMatrix32 = rho.cast();
        assert!((r32.concurrence() as f64 - rho.concurrence()).abs() < 1e-4);
        for kind in [ProtocolKind::M2, ProtocolKind::M2H, ProtocolKind::DEJMPS] {
            let a = run(kind, &rho, &opts64).unwrap();
            let b = run(kind, &r32, &opts32).unwrap();
            assert_eq!(a.status, b.status, "{kind:?}");
            assert!((a.overall_probability - b.overall_probability as f64).abs() < 1e-3, "{kind:?}");
        }
    }
    let p = run(ProtocolKind::M2H2, &mems(0.8f32).unwrap(), &opts32).unwrap().overall_probability;
    assert!((p as f64 - mems1_prob(0.8f64).unwrap()).abs() < 1e-4);
}

#[test]
fn state_file_round_trip_preserves_results() {
    let rho = mems(0.75f64).unwrap();
    let text = serde_json::to_string(&StateFile::from_bell(&rho)).unwrap();
    let back: BellDensityMatrix64 = StateFile::parse(&text).unwrap().to_bell().unwrap();
    let a = run(ProtocolKind::M2H2, &rho, &Options::default()).unwrap();
    let b = run(ProtocolKind::M2H2, &back, &Options::default()).unwrap();
    assert_eq!(a.overall_probability, b.overall_probability);
}

#[test]
fn exact_rational_yield() {
    let r = |a: i64, b: i64| BigRational::new(BigInt::from(a), BigInt::from(b));
    let probs = [r(2, 3), r(3, 5)];
    for n in 1..=10 {
        let d = yield_pmf(n, &probs).unwrap();
        assert_eq!(d[1].mean(), mean_two_rounds_closed(n, probs[0].clone(), probs[1].clone()));
        assert_eq!(d[0].total(), r(1, 1));
    }
}
