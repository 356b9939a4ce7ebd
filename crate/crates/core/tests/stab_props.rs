mod common;

use common::*;
use edgestab::edges::{enumerate_configs, permutations, reduce_column, reduce_row, ConfigEnumerator};
use edgestab::family::{EdgeSegment, Entry, MatrixFamily};
use edgestab::oracle::{sample_family, OracleVerdict, SampleScheme};
use edgestab::stab::{
    analyze_family, analyze_family_with, analyze_interval, box_stable, hurwitz_algebraic, point_stable,
    reproduces, segment_stable, worst_root, DriverOptions, Status, Tolerances,
};
use edgestab::{Error, ParametricDeterminant, PolyMatrix, Polynomial, Region};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tol() -> Tolerances {
    Tolerances::default()
}

proptest! {
    #[test]
    fn routh_agrees_with_roots(c in prop::collection::vec(-5.0f64..5.0, 1..8)) {
        let q = Polynomial::new(c);
        prop_assume!(!q.is_zero());
        let m = worst_root(&q, &Region::HurwitzHalfPlane).unwrap();
        prop_assume!(m.is_none_or(|(m, _)| m.abs() > 1e-6));
        let by_roots = point_stable(&q, &Region::HurwitzHalfPlane).unwrap().is_stable();
        prop_assert_eq!(hurwitz_algebraic(&q).unwrap(), by_roots);
    }

    #[test]
    fn segment_is_orientation_free(seed in 0u64..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = rng.random_range(1..=4);
        let (a, b) = (hurwitz_poly(&mut rng, d), hurwitz_poly(&mut rng, d));
        let fwd = segment_stable(&EdgeSegment::new(a.clone(), b.clone(), (0, 1)), &Region::HurwitzHalfPlane, &tol());
        let bwd = segment_stable(&EdgeSegment::new(b, a, (1, 0)), &Region::HurwitzHalfPlane, &tol());
        prop_assert_eq!(fwd.status, bwd.status);
    }
}

#[test]
fn box_agrees_with_segment_for_one_parameter() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let regions = [Region::HurwitzHalfPlane, Region::unit_disk(), Region::ShiftedHalfPlane { sigma: -0.1 }];
    let mut compared = 0;
    let mut unstable = 0;
    for i in 0..100 {
        let r = regions[i % 3];
        let d = rng.random_range(1..=4);
        let (p0, p1) = if r.is_half_plane() {
            (hurwitz_poly(&mut rng, d), hurwitz_poly(&mut rng, d))
        } else {
            let roots = |rng: &mut ChaCha8Rng| {
                Polynomial::from_real_roots(&(0..d).map(|_| rng.random_range(-1.2..1.2)).collect::<Vec<_>>())
            };
            (roots(&mut rng), roots(&mut rng))
        };
        let seg = EdgeSegment::new(p0.clone(), p1.clone(), (0, 1));
        let pd = ParametricDeterminant::from_terms(1, vec![p0.clone(), &p1 - &p0]);
        let a = segment_stable(&seg, &r, &tol());
        let b = box_stable(&pd, &r, &tol());
        let conclusive = |s: Status| matches!(s, Status::RobustlyStable | Status::Unstable);
        if conclusive(a.status) && conclusive(b.status) {
            assert_eq!(a.status, b.status, "case {i}: {p0} -> {p1} in {r:?}");
            compared += 1;
            unstable += (a.status == Status::Unstable) as usize;
        }
    }
    assert!(compared >= 90, "only {compared} conclusive pairs");
    assert!(unstable > 5 && unstable < compared - 5, "{unstable} of {compared} unstable");
}

/// Every member on a 21 x 21 parameter grid of each configuration.
fn grid_unstable(cfg: &edgestab::EdgeConfiguration) -> bool {
    let k = cfg.k();
    let steps = 21usize;
    let total = steps.pow(k as u32);
    (0..total).any(|mut idx| {
        let lam: Vec<f64> = (0..k)
            .map(|_| {
                let v = (idx % steps) as f64 / (steps - 1) as f64;
                idx /= steps;
                v
            })
            .collect();
        let det = cfg.instantiate(&lam).unwrap().det();
        !point_stable(&det, &Region::HurwitzHalfPlane).unwrap().is_stable()
    })
}

#[test]
fn box_matches_dense_parameter_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let mut stable_seen = 0;
    for _ in 0..6 {
        let fam = near_stable_family(&mut rng, 2, 2, 0.4, 0.8);
        for cfg in enumerate_configs(&fam).unwrap() {
            let v = box_stable(&cfg.det_parametric(), &fam.region(), &tol());
            let grid_bad = grid_unstable(&cfg);
            if v.status == Status::RobustlyStable {
                assert!(!grid_bad, "box certified a configuration the grid refutes");
                stable_seen += 1;
            }
            if v.status == Status::Unstable {
                let w = v.witness.unwrap();
                let det = cfg.instantiate(&w.lambda).unwrap().det();
                let (m, z) = worst_root(&det, &fam.region()).unwrap().unwrap();
                assert!(reproduces(m, z));
            }
        }
    }
    assert!(stable_seen > 10);
}

#[test]
fn single_polytope_entry_matches_segments() {
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    for _ in 0..30 {
        let d = rng.random_range(1..=3);
        let verts: Vec<Polynomial> = (0..3).map(|_| hurwitz_poly(&mut rng, d)).collect();
        let fam = MatrixFamily::new(1, vec![Entry::polytope(verts.clone())], Region::HurwitzHalfPlane).unwrap();
        let v = analyze_family(&fam, &tol()).unwrap();
        let by_edges = Entry::polytope(verts)
            .edges()
            .unwrap()
            .iter()
            .map(|e| segment_stable(e, &Region::HurwitzHalfPlane, &tol()).status)
            .fold(Status::RobustlyStable, Status::dominant);
        if by_edges != Status::Inconclusive && v.status != Status::Inconclusive {
            assert_eq!(v.status, by_edges);
        }
    }
}

#[test]
fn planted_unstable_vertex_is_found_at_a_corner() {
    let mut rng = ChaCha8Rng::seed_from_u64(400);
    let mut fam = near_stable_family(&mut rng, 2, 2, 0.05, 0.1);
    // vertex 1 of (1,1) has a right-half-plane root
    if let Entry::Polytope(pe) = fam.entry_mut(1, 1) {
        pe.vertices[1] = p(&[-1.0, 0.5, 1.0]);
    }
    let v = analyze_family(&fam, &tol()).unwrap();
    assert_eq!(v.status, Status::Unstable);
    let w = v.witness.unwrap();
    assert!(w.lambda.iter().all(|&l| l == 0.0 || l == 1.0));
    let en = ConfigEnumerator::new(&fam).unwrap();
    let cfg = en.get(w.config_index.unwrap()).unwrap();
    let det = cfg.instantiate(&w.lambda).unwrap().det();
    assert!(worst_root(&det, &fam.region()).unwrap().unwrap().0 < 0.0);
    let oracle = sample_family(&fam, SampleScheme::Grid { level: 1 }, 16, 0).unwrap();
    assert_eq!(oracle.verdict, OracleVerdict::UnstableSampleFound);
}

#[test]
fn point_intervals_reduce_to_point_test() {
    let cells = [p(&[2.0, 3.0, 1.0]), p(&[0.5]), p(&[-0.3, 0.1]), p(&[1.0, 1.0])];
    let fam = MatrixFamily::new(
        2,
        cells.iter().map(|c| Entry::interval(c.coeffs().to_vec(), c.coeffs().to_vec())).collect(),
        Region::HurwitzHalfPlane,
    )
    .unwrap();
    let v = analyze_interval(&fam, &tol()).unwrap();
    let det = PolyMatrix::new(2, cells.to_vec()).unwrap().det();
    let want = point_stable(&det, &Region::HurwitzHalfPlane).unwrap();
    assert_eq!(v.status, want.status);
    assert!((v.margin.unwrap() - want.margin.unwrap()).abs() < 1e-9);
}

#[test]
fn interval_entry_matches_kharitonov_vertices() {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut both = 0;
    for _ in 0..40 {
        let d = rng.random_range(2..=4);
        let nominal = hurwitz_poly(&mut rng, d);
        let w = rng.random_range(0.01..0.6);
        let lower: Vec<f64> = nominal.coeffs().iter().map(|c| c - w * c.abs()).collect();
        let upper: Vec<f64> = nominal.coeffs().iter().map(|c| c + w * c.abs()).collect();
        let entry = edgestab::IntervalEntry::new(lower.clone(), upper.clone());
        let fam = MatrixFamily::new(1, vec![Entry::interval(lower, upper)], Region::HurwitzHalfPlane).unwrap();
        let v = analyze_interval(&fam, &tol()).unwrap();
        let classical = entry
            .kharitonov_vertices()
            .unwrap()
            .iter()
            .all(|k| point_stable(k, &Region::HurwitzHalfPlane).unwrap().is_stable());
        if matches!(v.status, Status::RobustlyStable | Status::Unstable) {
            assert_eq!(v.status == Status::RobustlyStable, classical);
            both += 1;
        }
    }
    assert!(both >= 35);
}

#[test]
fn interval_analysis_refuses_other_regions() {
    let fam = MatrixFamily::new(1, vec![Entry::interval(vec![1.0, 1.0], vec![2.0, 1.0])], Region::unit_disk()).unwrap();
    assert_eq!(analyze_interval(&fam, &tol()), Err(Error::RegionNotHurwitz));
}

#[test]
fn driver_rejects_bad_inputs() {
    let mixed = MatrixFamily::new(
        2,
        vec![
            Entry::interval(vec![1.0, 1.0], vec![2.0, 1.0]),
            Entry::fixed(p(&[0.0])),
            Entry::fixed(p(&[0.0])),
            Entry::fixed(p(&[1.0, 1.0])),
        ],
        Region::HurwitzHalfPlane,
    )
    .unwrap();
    assert!(matches!(analyze_family(&mixed, &tol()), Err(Error::ValidationFailure(_))));

    let big = MatrixFamily::new(9, vec![Entry::fixed(p(&[1.0])); 81], Region::HurwitzHalfPlane).unwrap();
    assert!(matches!(analyze_family(&big, &tol()), Err(Error::TooLarge { n: 9, limit: 8 })));
}

#[test]
fn row_swap_and_row_scaling_keep_status() {
    let mut rng = ChaCha8Rng::seed_from_u64(600);
    for _ in 0..6 {
        let fam = near_stable_family(&mut rng, 2, 2, 0.3, 1.0);
        let base = analyze_family(&fam, &tol()).unwrap().status;

        let swapped_entries: Vec<Entry> = (0..4).map(|c| fam.entries()[(c + 2) % 4].clone()).collect();
        let swapped = MatrixFamily::new(2, swapped_entries, fam.region()).unwrap();
        let s = analyze_family(&swapped, &tol()).unwrap().status;

        let mut scaled = fam.clone();
        for col in 0..2 {
            if let Entry::Polytope(pe) = scaled.entry_mut(0, col) {
                pe.vertices.iter_mut().for_each(|v| *v = v.scale(3.5));
            }
        }
        let c = analyze_family(&scaled, &tol()).unwrap().status;
        assert_eq!(s, base);
        assert_eq!(c, base);
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let mut rng = ChaCha8Rng::seed_from_u64(700);
    let fam = near_stable_family(&mut rng, 3, 2, 0.2, 0.3);
    let one = analyze_family_with(&fam, &DriverOptions { jobs: Some(1), ..Default::default() }).unwrap();
    let four = analyze_family_with(&fam, &DriverOptions { jobs: Some(4), ..Default::default() }).unwrap();
    assert_eq!(one, four);
    assert_eq!(one.configuration_count, 384);
}

#[test]
fn column_reduction_preserves_the_verdict() {
    let mut rng = ChaCha8Rng::seed_from_u64(800);
    let mut checked = 0;
    for _ in 0..20 {
        let n = rng.random_range(1..=3);
        let col = rng.random_range(0..n);
        let mut fam = near_stable_family(&mut rng, n, 1, 0.0, 0.6);
        for r in 0..n {
            let nominal = fam.entry(r, col).vertices().unwrap()[0].clone();
            let spread = if r == col { 0.6 } else { 0.3 };
            *fam.entry_mut(r, col) =
                Entry::polytope((0..3).map(|_| jitter(&mut rng, &nominal, spread)).collect());
        }
        let whole = analyze_family(&fam, &tol()).unwrap().status;
        let parts = reduce_column(&fam, col)
            .unwrap()
            .iter()
            .map(|red| analyze_family(&red.family, &tol()).unwrap().status)
            .fold(Status::RobustlyStable, Status::dominant);
        if whole != Status::Inconclusive && parts != Status::Inconclusive {
            assert_eq!(whole, parts);
            checked += 1;
        }
        let oracle = sample_family(&fam, SampleScheme::Random, 2000, 1).unwrap();
        if oracle.verdict == OracleVerdict::UnstableSampleFound {
            assert_ne!(parts, Status::RobustlyStable);
        }
    }
    assert!(checked >= 15);
}

#[test]
fn row_reduction_preserves_the_verdict() {
    let mut rng = ChaCha8Rng::seed_from_u64(900);
    for _ in 0..15 {
        let mut fam = near_stable_family(&mut rng, 2, 1, 0.0, 0.6);
        for col in 0..2 {
            let nominal = fam.entry(0, col).vertices().unwrap()[0].clone();
            *fam.entry_mut(0, col) = Entry::polytope((0..2).map(|_| jitter(&mut rng, &nominal, 0.5)).collect());
        }
        let whole = analyze_family(&fam, &tol()).unwrap().status;
        let parts = reduce_row(&fam, 0, 0, 1)
            .unwrap()
            .iter()
            .map(|red| analyze_family(&red.family, &tol()).unwrap().status)
            .fold(Status::RobustlyStable, Status::dominant);
        if whole != Status::Inconclusive && parts != Status::Inconclusive {
            assert_eq!(whole, parts);
        }
    }
}

/// All maps from columns to rows, not only permutations; stability of the
/// permutation configurations already covers the extra members.
#[test]
fn non_permutation_patterns_add_no_unstable_members() {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let n = 2;
    let perms = permutations(n);
    let mut stable_families = 0;
    for _ in 0..8 {
        let fam = near_stable_family(&mut rng, n, 2, 0.4, 0.8);
        if analyze_family(&fam, &tol()).unwrap().status != Status::RobustlyStable {
            continue;
        }
        stable_families += 1;
        for y in 0..n.pow(n as u32) {
            let map: Vec<usize> = (0..n).map(|j| (y / n.pow(j as u32)) % n).collect();
            if perms.contains(&map) {
                continue;
            }
            for _ in 0..200 {
                let cells = (0..n * n)
                    .map(|cell| {
                        let (row, col) = (cell / n, cell % n);
                        let v = fam.entry(row, col).vertices().unwrap();
                        if map[col] == row {
                            v[0].lerp(&v[1], rng.random_range(0.0..=1.0))
                        } else {
                            v[rng.random_range(0..v.len())].clone()
                        }
                    })
                    .collect();
                let det = PolyMatrix::new(n, cells).unwrap().det();
                assert!(point_stable(&det, &Region::HurwitzHalfPlane).unwrap().is_stable());
            }
        }
    }
    assert!(stable_families >= 3);
}
