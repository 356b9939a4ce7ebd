mod common;

use common::{near_stable_family, random_family};
use edgestab::family::{Entry, MatrixFamily};
use edgestab::oracle::{determinant_margin, find_counterexample_near, sample_family, MemberRecord, OracleVerdict, SampleScheme};
use edgestab::stab::{analyze_family, worst_root, Status, Tolerances};
use edgestab::{ConfigEnumerator, Region};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn family(seed: u64) -> MatrixFamily {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=3);
    if rng.random_bool(0.7) {
        let eps = rng.random_range(0.01..0.5);
        near_stable_family(&mut rng, n, 2, eps, 0.8)
    } else {
        random_family(&mut rng, n, 2, 3)
    }
}

fn interval_family(seed: u64) -> MatrixFamily {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=2);
    let entries = (0..n * n)
        .map(|_| {
            let d = rng.random_range(0..=2);
            let (lo, hi): (Vec<f64>, Vec<f64>) = (0..=d)
                .map(|_| {
                    let c = rng.random_range(-2.0..2.0);
                    (c, c + rng.random_range(0.0..0.5))
                })
                .unzip();
            Entry::interval(lo, hi)
        })
        .collect();
    MatrixFamily::new(n, entries, Region::HurwitzHalfPlane).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sampling_is_a_function_of_seed_and_budget(seed in 0u64..1000, level in 1usize..3) {
        let fam = family(seed);
        let scheme = SampleScheme::Grid { level };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| sample_family(&fam, scheme, 300, seed)).unwrap();
        let b = four.install(|| sample_family(&fam, scheme, 300, seed)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn worst_member_reproduces_its_margin(seed in 0u64..1000) {
        for fam in [family(seed), interval_family(seed)] {
            let rep = sample_family(&fam, SampleScheme::Random, 200, seed).unwrap();
            let Some(w) = rep.worst_member else { continue };
            prop_assert!(w.member.is_member(&fam, 1e-12));
            let det = w.member.determinant(&fam).unwrap();
            let (m, _) = determinant_margin(&det, &fam);
            let m = m.unwrap();
            if m.is_finite() {
                prop_assert!((m - w.margin).abs() <= 1e-8 * m.abs().max(1.0));
                let (again, _) = worst_root(&det, &fam.region()).unwrap().unwrap();
                prop_assert!((again - w.margin).abs() <= 1e-8 * again.abs().max(1.0));
            } else {
                prop_assert_eq!(w.margin, f64::NEG_INFINITY);
            }
            prop_assert_eq!(rep.verdict == OracleVerdict::UnstableSampleFound, w.margin < 0.0);
        }
    }
}

#[test]
fn driver_and_oracle_are_consistent() {
    let tol = Tolerances::default();
    let mut seen = [0usize; 4];
    for seed in 0..40 {
        let fam = family(seed);
        let v = analyze_family(&fam, &tol).unwrap();
        let rep = sample_family(&fam, SampleScheme::Grid { level: 1 }, 3000, seed).unwrap();
        seen[v.status.exit_code() as usize] += 1;
        let oracle_unstable = rep.verdict == OracleVerdict::UnstableSampleFound;
        assert!(!(v.status == Status::RobustlyStable && oracle_unstable), "seed {seed}: certificate contradicted");
        if v.status == Status::Unstable && !oracle_unstable {
            let en = ConfigEnumerator::new(&fam).unwrap();
            let cfg = en.get(v.config_index.unwrap()).unwrap();
            let hint = MemberRecord::from_configuration(&fam, &cfg, &v.witness.unwrap().lambda).unwrap();
            let found = find_counterexample_near(&fam, &hint, 10_000);
            let m = found.as_ref().map(|m| determinant_margin(&m.determinant(&fam).unwrap(), &fam).0.unwrap());
            assert!(m.is_some_and(|m| m < 0.0), "seed {seed}: witness not confirmed");
            assert!(found.unwrap().is_member(&fam, 1e-12));
        }
    }
    assert!(seen[0] > 0 && seen[1] > 0, "{seen:?}");
}

#[test]
fn witness_hints_are_family_members() {
    let tol = Tolerances::default();
    for seed in 0..30 {
        let fam = family(seed);
        let v = analyze_family(&fam, &tol).unwrap();
        let Some(w) = v.witness else { continue };
        let en = ConfigEnumerator::new(&fam).unwrap();
        let cfg = en.get(v.config_index.unwrap()).unwrap();
        let hint = MemberRecord::from_configuration(&fam, &cfg, &w.lambda).unwrap();
        assert!(hint.is_member(&fam, 1e-12));
        let det = hint.determinant(&fam).unwrap();
        let direct = cfg.instantiate(&w.lambda).unwrap().det();
        let err = (0..det.coeffs().len().max(direct.coeffs().len()))
            .map(|l| (det.coeff(l) - direct.coeff(l)).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-9 * direct.max_abs_coeff().max(1.0));
    }
}

#[test]
fn interval_samples_stay_inside_bounds() {
    for seed in 0..20 {
        let fam = interval_family(seed);
        let rep = sample_family(&fam, SampleScheme::Grid { level: 2 }, 100, seed).unwrap();
        if let Some(w) = rep.worst_member {
            assert!(w.member.is_member(&fam, 1e-12));
        }
    }
}
