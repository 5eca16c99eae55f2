use kcomplex::absorbing::{absorb, build_absorber, AbsorberConfig};
use kcomplex::barrier::{space_barrier_search, verify_space_barrier, SpaceSearchConfig};
use kcomplex::io::{parse_khg, write_khg};
use kcomplex::lattice::bounded_decompose;
use kcomplex::lp::{build_lp, solve_feasible, verify_fractional, verify_infeasibility_certificate};
use kcomplex::oracle::{brute_force_pm, gen_random_dense, gen_space_barrier, DensityModel};
use kcomplex::{Allocation, Edge, IndexLattice, IndexVector, Matching, Rational, Vertex};
use proptest::prelude::*;

fn k_vector(k: usize, r: usize) -> impl Strategy<Value = IndexVector> {
    proptest::sample::select(IndexVector::all_s_vectors(k, r))
}

/// Generators (1 to 4 distinct `k`-vectors over `r` parts) and integer
/// coefficients for them.
fn generators() -> impl Strategy<Value = (usize, Vec<IndexVector>, Vec<i64>)> {
    (2usize..=4, 1usize..=3)
        .prop_flat_map(|(k, r)| {
            (
                Just(r),
                proptest::collection::btree_set(k_vector(k, r), 1..=4),
                proptest::collection::vec(-4i64..=4, 4),
            )
        })
        .prop_map(|(r, g, c)| (r, g.into_iter().collect(), c))
}

fn combine(gens: &[IndexVector], coeffs: &[i64], r: usize) -> IndexVector {
    let mut v = vec![0i64; r];
    for (g, &c) in gens.iter().zip(coeffs) {
        for (x, &y) in v.iter_mut().zip(g.as_slice()) {
            *x += c * y;
        }
    }
    IndexVector(v)
}

fn dense(n: usize, p: f64, seed: u64) -> Option<kcomplex::KSystem> {
    gen_random_dense(n, 3, 1, &DensityModel::new(p), seed)
        .ok()
        .map(|i| i.complex.into_system())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edge_packing_round_trips(ids in proptest::collection::btree_set(0u32..5000, 0..=8)) {
        let ids: Vec<Vertex> = ids.into_iter().collect();
        let e = Edge::from_sorted(&ids);
        prop_assert_eq!(e.len(), ids.len());
        prop_assert_eq!(e.to_vec(), ids.clone());
        for &v in &ids {
            prop_assert!(e.contains(v));
            prop_assert_eq!(e.without(v).len(), ids.len() - 1);
        }
    }

    #[test]
    fn lattice_contains_every_combination((r, gens, coeffs) in generators()) {
        let lattice = IndexLattice::generate(&gens, r).unwrap();
        for g in &gens {
            prop_assert!(lattice.contains(g).unwrap());
        }
        prop_assert!(lattice.contains(&combine(&gens, &coeffs, r)).unwrap());
        prop_assert!(lattice.rank() <= r.min(gens.len()));
    }

    #[test]
    fn lattice_basis_ignores_generator_order((r, gens, coeffs) in generators()) {
        let a = IndexLattice::generate(&gens, r).unwrap();
        let mut rev = gens.clone();
        rev.reverse();
        rev.push(combine(&gens, &coeffs, r));
        let b = IndexLattice::generate(&rev, r).unwrap();
        prop_assert!(a.same_lattice(&b));
        prop_assert_eq!(a.basis(), b.basis());
    }

    #[test]
    fn decompositions_evaluate_to_target((r, gens, coeffs) in generators()) {
        let target = combine(&gens, &coeffs, r);
        let d = bounded_decompose(&target, &gens, 64).unwrap();
        prop_assert_eq!(d.evaluate(), target);
        prop_assert!(d.max_abs() <= 64);
        for (i, _) in d.b().into_iter().chain(d.c()) {
            prop_assert!(gens.contains(&i));
        }
    }

    #[test]
    fn overlapping_edges_are_not_a_matching(a in 0u32..20, b in 0u32..20, c in 0u32..20, d in 0u32..20) {
        prop_assume!(a != b && c != d);
        let e = Edge::new([a, b]).unwrap();
        let f = Edge::new([c, d]).unwrap();
        prop_assert_eq!(Matching::new(vec![e, f]).is_ok(), e.is_disjoint(f));
    }

    #[test]
    fn khg_round_trip(n in 3usize..=12, p in 0.2f64..0.9, seed in any::<u64>()) {
        let Some(sys) = dense(n, p, seed) else { return Ok(()) };
        let text = write_khg(&sys, true);
        let back = parse_khg(&text).unwrap().into_system().unwrap();
        prop_assert_eq!(back.k(), sys.k());
        for i in 0..=sys.k() {
            prop_assert_eq!(back.level(i), sys.level(i));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn brute_force_matchings_are_perfect(n in 2usize..=4, p in 0.1f64..0.9, seed in any::<u64>()) {
        let Some(sys) = dense(3 * n, p, seed) else { return Ok(()) };
        if let Some(m) = brute_force_pm(&sys).unwrap() {
            prop_assert!(m.is_perfect_in(&sys));
            prop_assert_eq!(m.len(), n);
        }
    }

    #[test]
    fn lp_witnesses_verify(n in 6usize..=15, p in 0.05f64..0.7, seed in any::<u64>()) {
        let Some(sys) = dense(n, p, seed) else { return Ok(()) };
        let f = Allocation::single_part(3);
        let model = build_lp(&sys, &f).unwrap();
        let exact = solve_feasible::<Rational>(&model);
        let float = solve_feasible::<f64>(&model);
        prop_assert_eq!(exact.status, float.status);
        if let Some(g) = &exact.solution {
            let report = verify_fractional(&sys, g, &f).unwrap();
            prop_assert!(report.is_perfect());
        }
        if let Some(y) = &exact.certificate {
            prop_assert!(verify_infeasibility_certificate(&model, y));
        }
    }

    #[test]
    fn found_space_barriers_verify(k in 2usize..=3, mult in 2usize..=4, extra in 1usize..=3) {
        let n = k * mult;
        let s = (n / k + extra).min(n);
        let c = gen_space_barrier(n, k, 1, s).unwrap();
        let sys = c.as_system();
        let out = space_barrier_search(sys, 0.01, &SpaceSearchConfig::default()).unwrap();
        if let Some(cert) = out.certificate {
            prop_assert!(verify_space_barrier(sys, &cert).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn absorption_covers_exactly_w_and_leftover(seed in 0u64..1000, take in 0usize..=2) {
        let Some(sys) = dense(30, 0.85, seed) else { return Ok(()) };
        let cfg = AbsorberConfig { seed, ..AbsorberConfig::default() };
        let Ok(state) = build_absorber(&sys, &Allocation::single_part(3), &cfg) else { return Ok(()) };
        let outside: Vec<Vertex> = sys
            .vertices()
            .into_iter()
            .filter(|v| state.w.binary_search(v).is_err())
            .collect();
        let size = (3 * take).min(state.u_max);
        let leftover = &outside[outside.len() - size..];
        if let Ok(a) = absorb(&sys, &state, leftover) {
            let mut want: Vec<Vertex> = state.w.iter().chain(leftover).copied().collect();
            want.sort_unstable();
            prop_assert!(a.matching.is_in(&sys));
            prop_assert_eq!(a.matching.vertices(), want);
        } else {
            prop_assert!(!state.audit.passed);
        }
    }
}
