use proptest::prelude::*;
use qline::decomposition::{CorrelationSeries, ExpTerm, SeriesOrigin};
use qline::heom::{build_hierarchy, hierarchy_size, HierarchyOptions, SystemModel};
use qline::linalg;
use qline::nonmarkov::{blp_from_distances, trace_distance};
use qline::spectra::resonance_locus;

fn series(k: usize) -> CorrelationSeries {
    let terms = (0..k)
        .map(|j| ExpTerm { coefficient: linalg::c(0.02, -0.01), rate: linalg::c(0.5 + j as f64, 0.0) })
        .collect();
    CorrelationSeries::new(terms, SeriesOrigin::Matsubara, None).unwrap()
}

proptest! {
    #[test]
    fn hierarchy_size_recurrence(k in 1u64..40, l in 1u64..12) {
        // binom(K + L, L) = binom(K + L - 1, L) + binom(K + L - 1, L - 1)
        let lhs = hierarchy_size(k, l).unwrap();
        let rhs = hierarchy_size(k - 1, l).unwrap() + hierarchy_size(k, l - 1).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn built_hierarchy_has_binomial_size(k in 1usize..6, l in 0usize..5) {
        let sys = SystemModel::single_qubit(1.0, series(k)).unwrap();
        let h = build_hierarchy(&sys, HierarchyOptions { depth: l, ..Default::default() }).unwrap();
        prop_assert_eq!(h.size() as u128, hierarchy_size(k as u64, l as u64).unwrap());
    }

    #[test]
    fn trace_distance_is_a_bounded_metric(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let r1 = linalg::basis_projector(2, 0) * linalg::c(a, 0.0) + linalg::basis_projector(2, 1) * linalg::c(1.0 - a, 0.0);
        let r2 = linalg::basis_projector(2, 0) * linalg::c(b, 0.0) + linalg::basis_projector(2, 1) * linalg::c(1.0 - b, 0.0);
        let d = trace_distance(&r1, &r2).unwrap();
        prop_assert!((d - (a - b).abs()).abs() < 1e-12);
        prop_assert!((trace_distance(&r2, &r1).unwrap() - d).abs() < 1e-15);
    }

    #[test]
    fn blp_functional_ignores_decrease(xs in proptest::collection::vec(0.0f64..1.0, 2..50)) {
        let n = blp_from_distances(&xs);
        let direct: f64 = xs.windows(2).map(|w| (w[1] - w[0]).max(0.0)).sum();
        prop_assert!(n >= 0.0);
        prop_assert!((n - direct).abs() < 1e-12);
    }

    #[test]
    fn locus_increases_with_temperature(t in 0.05f64..9.0) {
        prop_assert!(resonance_locus(t + 0.5) > resonance_locus(t));
    }
}
