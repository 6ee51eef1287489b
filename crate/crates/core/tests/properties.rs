use num_complex::Complex64;
use proptest::prelude::*;
use rothlab::bohr::{BohrSet, RegularityGrid};
use rothlab::constructions::{behrend, greedy_ap_free, verify_ap_free};
use rothlab::group::{convolve, fourier, inverse_fourier, measure_fourier, GFunction, GMeasure, Group, SetOnGroup};
use rothlab::increment::{fdic_dichotomy, replay, roth_engine_main, DichotomyOutcome, IncrementConfig};
use rothlab::progressions::{
    brute_force_pattern_count, count_3aps, count_integer_nontrivial, freiman_embed, trilinear_direct,
    trilinear_fourier, Convention,
};
use rothlab::riesz::RieszProduct;
use rothlab::spectrum::{orthogonality_constant, rayleigh_quotient, spec};

const FACTORS: &[&[usize]] = &[&[9], &[21], &[2, 6], &[3, 9], &[5, 5], &[4, 12], &[35], &[2, 2, 10]];
const ODD: &[usize] = &[9, 15, 21, 25, 31, 45, 63];

fn group() -> impl Strategy<Value = Group> {
    prop::sample::select(FACTORS).prop_map(|f| Group::new(f.to_vec()).unwrap())
}

fn complex_values(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n).prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
}

fn function() -> impl Strategy<Value = GFunction> {
    group().prop_flat_map(|g| complex_values(g.order()).prop_map(move |v| GFunction::from_values(&g, v).unwrap()))
}

fn function_pair() -> impl Strategy<Value = (GFunction, GFunction)> {
    group().prop_flat_map(|g| {
        let n = g.order();
        (complex_values(n), complex_values(n))
            .prop_map(move |(u, v)| (GFunction::from_values(&g, u).unwrap(), GFunction::from_values(&g, v).unwrap()))
    })
}

fn set_on(g: Group) -> impl Strategy<Value = SetOnGroup> {
    let n = g.order();
    prop::collection::vec(any::<bool>(), n)
        .prop_map(move |bits| SetOnGroup::from_predicate(&g, |x| bits[x]))
}

fn cyclic_set() -> impl Strategy<Value = SetOnGroup> {
    prop::sample::select(ODD).prop_flat_map(|n| set_on(Group::cyclic(n).unwrap()))
}

fn bohr() -> impl Strategy<Value = BohrSet> {
    prop::sample::select(ODD).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0.05f64..2.0), 0..3).prop_map(move |spec| {
            let g = Group::cyclic(n).unwrap();
            let (f, w): (Vec<usize>, Vec<f64>) = spec.into_iter().unzip();
            BohrSet::new(&g, f, w).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval_and_round_trip(f in function()) {
        let hat = fourier(&f);
        prop_assert!((hat.l2_norm_sq() - f.l2_norm_sq()).abs() <= 1e-9);
        prop_assert!(inverse_fourier(&hat).max_abs_diff(&f).unwrap() <= 1e-9);
    }

    #[test]
    fn convolution_theorem((f, g) in function_pair()) {
        let lhs = fourier(&convolve(&f, &g).unwrap());
        let rhs = fourier(&f).pointwise_mul(&fourier(&g)).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-9);
    }

    #[test]
    fn translation_multiplies_by_conjugate_character(f in function(), t in 0usize..1000) {
        let group = f.group().clone();
        let t = t % group.order();
        let shifted = fourier(&f.translate(t));
        let hat = fourier(&f);
        for gamma in 0..group.order() {
            let expected = hat.at(gamma) * group.char_value(gamma, t).conj();
            prop_assert!((shifted.at(gamma) - expected).norm() <= 1e-9);
        }
    }

    #[test]
    fn haar_measure_transform_matches_fourier(f in function()) {
        let hat = fourier(&f);
        let via_measure = measure_fourier(&f, &GMeasure::haar(f.group())).unwrap();
        prop_assert!(hat.max_abs_diff(&via_measure).unwrap() <= 1e-12);
    }

    #[test]
    fn trilinear_transform_matches_direct(n in prop::sample::select(ODD), seed in any::<u64>()) {
        let g = Group::cyclic(n).unwrap();
        let mut s = seed;
        let mut next = || { s = rothlab::rng::splitmix64(s); (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5 };
        let f = GFunction::from_fn(&g, |_| Complex64::new(next(), 0.0));
        let h = GFunction::from_fn(&g, |_| Complex64::new(next(), 0.0));
        let k = GFunction::from_fn(&g, |_| Complex64::new(next(), 0.0));
        let direct = trilinear_direct(&f, &h, &k, Convention::Midpoint).unwrap();
        let transform = trilinear_fourier(&f, &h, &k).unwrap();
        prop_assert!((direct.value - transform.value).norm() <= 1e-9);
    }

    #[test]
    fn count_matches_brute_force_and_symmetries(a in cyclic_set(), t in 0usize..100) {
        let g = a.group().clone();
        let count = count_3aps(&a);
        prop_assert_eq!(count.total, brute_force_pattern_count(&a, &a, Convention::Midpoint).unwrap());
        prop_assert_eq!(count.total - count.nontrivial, a.len() as u64);
        prop_assert_eq!(count_3aps(&a.translate(t % g.order())), count);
        prop_assert_eq!(count_3aps(&a.scale(-1).unwrap()), count);
    }

    #[test]
    fn embedding_preserves_nontrivial_counts(bits in prop::collection::vec(any::<bool>(), 1..80)) {
        let n = bits.len() as u64;
        let elements: Vec<u64> = (1..=n).filter(|&x| bits[x as usize - 1]).collect();
        let (_, image) = freiman_embed(&elements, n).unwrap();
        prop_assert_eq!(count_3aps(&image).nontrivial, count_integer_nontrivial(&elements));
    }

    #[test]
    fn bohr_nesting_symmetry_and_meet(b in bohr(), other in bohr(), r1 in 0.05f64..1.0, r2 in 0.05f64..1.0) {
        let (lo, hi) = (r1.min(r2), r1.max(r2));
        let small = b.dilate(lo).unwrap();
        let large = b.dilate(hi).unwrap();
        prop_assert!(small.members().is_subset(large.members()).unwrap());
        prop_assert!(b.contains(0));
        let g = b.group().clone();
        for x in b.members().iter() {
            prop_assert!(b.contains(g.neg(x)));
        }
        if other.group() == b.group() {
            let m = b.meet(&other).unwrap();
            for x in 0..g.order() {
                prop_assert_eq!(m.contains(x), b.contains(x) && other.contains(x));
            }
        }
    }

    #[test]
    fn dilation_composes(b in bohr(), r1 in 0.05f64..1.0, r2 in 0.05f64..1.0) {
        let twice = b.dilate(r1).unwrap().dilate(r2).unwrap();
        let once = b.dilate(r1 * r2).unwrap();
        prop_assert_eq!(twice.members(), once.members());
    }

    #[test]
    fn regular_dilates_reverify(b in bohr()) {
        if let Ok((_, report)) = b.find_regular_dilate(16.0, &RegularityGrid::default()) {
            prop_assert!(b.verify_regularity(&report).unwrap());
        }
    }

    #[test]
    fn rayleigh_quotients_stay_below_top_eigenvalue(
        n in prop::sample::select(ODD),
        chars in prop::collection::vec(0usize..1000, 1..6),
        g in complex_values(6),
        b in bohr(),
    ) {
        let group = Group::cyclic(n).unwrap();
        let chars: Vec<usize> = chars.into_iter().map(|c| c % n).collect();
        let mu = if b.group() == &group { b.beta() } else { GMeasure::haar(&group) };
        let cert = orthogonality_constant(&chars, &mu).unwrap();
        prop_assert!(rayleigh_quotient(&chars, &g[..chars.len()], &mu) <= cert.lambda_max + 1e-8);
    }

    #[test]
    fn spec_equals_dual_scan(a in cyclic_set(), eps in 0.05f64..1.0) {
        prop_assume!(!a.is_empty());
        let mu = GMeasure::haar(a.group());
        let f = a.indicator();
        let report = spec(&f, &mu, eps).unwrap();
        let hat = measure_fourier(&f, &mu).unwrap();
        let mut scan: Vec<usize> = (0..a.group().order())
            .filter(|&c| hat.at(c).norm() >= eps * report.l1_norm - 1e-9 * report.l1_norm)
            .collect();
        let mut got = report.characters();
        scan.sort_unstable();
        got.sort_unstable();
        prop_assert_eq!(got, scan);
    }

    #[test]
    fn riesz_products_are_nonnegative(
        n in prop::sample::select(ODD),
        chars in prop::collection::vec((0usize..1000, 0.0f64..std::f64::consts::TAU), 0..6),
    ) {
        let g = Group::cyclic(n).unwrap();
        let (c, w): (Vec<usize>, Vec<Complex64>) = chars.into_iter().map(|(c, t)| (c % n, Complex64::from_polar(1.0, t))).unzip();
        let p = RieszProduct::new(c, w).unwrap();
        prop_assert!(p.values(&g).iter().all(|&v| v >= 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn constructions_are_free_and_truncations_stay_free(n in 1u64..400, m in 1u64..400) {
        let b = behrend(n, None).unwrap();
        let g = greedy_ap_free(n).unwrap();
        for c in [&b, &g] {
            prop_assert!(verify_ap_free(&c.set).unwrap().free);
            prop_assert!(verify_ap_free(&c.set.truncate(m.min(n))).unwrap().free);
            let (_, image) = freiman_embed(c.set.elements(), n).unwrap();
            prop_assert_eq!(count_3aps(&image).nontrivial, 0);
        }
    }

    #[test]
    fn fdic_always_returns_a_holding_case(bits in prop::collection::vec(any::<bool>(), 31), u in 0.05f64..1.0) {
        let g = Group::cyclic(31).unwrap();
        let a = SetOnGroup::from_predicate(&g, |x| bits[x]);
        prop_assume!(a.len() >= 3);
        let b = BohrSet::trivial(&g).unwrap();
        let config = IncrementConfig::default();
        let rho = u * config.c_fdic_prime * a.density() / b.dimension().unwrap();
        match fdic_dichotomy(&b, rho, &a, &a, &config) {
            Ok(DichotomyOutcome::ManyProgressions { t_value, threshold, .. }) => prop_assert!(t_value >= threshold),
            Ok(DichotomyOutcome::MassConcentration { mass, threshold, .. }) => prop_assert!(mass >= threshold),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn engine_chains_are_monotone_and_replay(bits in prop::collection::vec(prop::bool::weighted(0.3), 61)) {
        let g = Group::cyclic(61).unwrap();
        let a = SetOnGroup::from_predicate(&g, |x| bits[x]);
        prop_assume!(!a.is_empty());
        let run = roth_engine_main(&g, &a, &IncrementConfig::default()).unwrap();
        for s in &run.certificate.steps {
            prop_assert!(s.density_before <= 1.0);
            if let (Some(after), false) = (s.density_after, s.terminal) {
                prop_assert!(after > s.density_before && after <= 1.0);
            }
        }
        prop_assert!(replay(&run.certificate).unwrap().ok());
    }
}
