//! Property tests for the invariants the modules promise on random input.

use proptest::prelude::*;
use ramified::fredholm::{multiply, summability_report, Multiplier, SingularSpectrum};
use ramified::hilbert_module::{include, project_p, project_p_perp, ModuleElement};
use ramified::pressure::max_row_sum;
use ramified::resistance_form::{max_edge_deviation, Network, ResistanceForm};
use ramified::self_similar::SelfSimilarStructure;
use std::sync::OnceLock;

fn gasket2() -> &'static ResistanceForm {
    static FORM: OnceLock<ResistanceForm> = OnceLock::new();
    FORM.get_or_init(|| SelfSimilarStructure::gasket().decimate(2).unwrap().1)
}

fn element_strategy(level: usize) -> impl Strategy<Value = ModuleElement> {
    let cells = gasket2().structure().cells(level).len();
    proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 3), cells..=cells)
        .prop_map(move |data| ModuleElement::from_cell_values(level, data))
}

/// Random connected network: a spanning path plus extra random edges.
fn network_strategy() -> impl Strategy<Value = Network> {
    (4usize..9)
        .prop_flat_map(|n| {
            let path = proptest::collection::vec(0.2f64..2.0, n - 1);
            let extras = proptest::collection::vec((0..n, 0..n, 0.1f64..1.0), 0..6);
            (Just(n), path, extras)
        })
        .prop_map(|(n, path, extras)| {
            let mut edges: Vec<(usize, usize, f64)> = path
                .into_iter()
                .enumerate()
                .map(|(i, c)| (i, i + 1, c))
                .collect();
            for (a, b, c) in extras {
                if a != b {
                    edges.push((a.min(b), a.max(b), c));
                }
            }
            Network::new(n, &edges).expect("valid edges")
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn energy_matches_direct_pair_sum(net in network_strategy(), seed in 0u64..1000) {
        let mut values = Vec::with_capacity(net.size());
        let mut state = seed;
        for _ in 0..net.size() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            values.push((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5);
        }
        let direct: f64 = net
            .edges()
            .iter()
            .map(|&(a, b, c)| c * (values[a] - values[b]) * (values[a] - values[b]))
            .sum();
        prop_assert!((net.energy(&values) - direct).abs() <= 1e-12 * direct.max(1.0));
    }

    #[test]
    fn trace_is_idempotent(net in network_strategy()) {
        let direct = net.trace_to(&[0, 1]).unwrap();
        let mid: Vec<usize> = (0..net.size().min(4)).collect();
        let via = net.trace_to(&mid).unwrap().trace_to(&[0, 1]).unwrap();
        prop_assert!(max_edge_deviation(&direct, &via) <= 1e-10);
    }

    #[test]
    fn energy_never_increases_under_trace(net in network_strategy(), seed in 0u64..1000) {
        // E_U(g|_U) <= E(g): the trace is the energy of the minimizing extension
        let boundary: Vec<usize> = vec![0, net.size() - 1];
        let traced = net.trace_to(&boundary).unwrap();
        let mut state = seed.wrapping_add(17);
        let mut g = Vec::with_capacity(net.size());
        for _ in 0..net.size() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            g.push((state >> 11) as f64 / (1u64 << 53) as f64);
        }
        let restricted = [g[0], g[net.size() - 1]];
        prop_assert!(traced.energy(&restricted) <= net.energy(&g) + 1e-12);
    }

    #[test]
    fn pythagoras_for_the_projections(u in element_strategy(2)) {
        let form = gasket2();
        let (_, pu) = project_p(form, &u).unwrap();
        let perp = project_p_perp(form, &u).unwrap();
        let n2 = u.inner(&u, form).unwrap();
        let p2 = pu.inner(&pu, form).unwrap();
        let q2 = perp.inner(&perp, form).unwrap();
        prop_assert!((n2 - p2 - q2).abs() <= 1e-10 * n2.max(1.0));
    }

    #[test]
    fn projections_are_idempotent_and_complementary(u in element_strategy(2)) {
        let form = gasket2();
        let (_, pu) = project_p(form, &u).unwrap();
        let (_, ppu) = project_p(form, &pu).unwrap();
        let mut drift = ppu;
        drift.axpy(-1.0, &pu);
        prop_assert!(drift.norm(form) <= 1e-10);
        let perp = project_p_perp(form, &u).unwrap();
        let (_, p_perp) = project_p(form, &perp).unwrap();
        prop_assert!(p_perp.norm(form) <= 1e-10);
    }

    #[test]
    fn inclusion_preserves_norms(u in element_strategy(1)) {
        let form = gasket2();
        let v = include(form, &u).unwrap();
        prop_assert!((v.norm(form) - u.norm(form)).abs() <= 1e-10);
    }

    #[test]
    fn module_action_is_sup_norm_bounded(
        u in element_strategy(2),
        values in proptest::collection::vec(-2.0f64..2.0, 3),
    ) {
        let form = gasket2();
        let a = Multiplier { level: 1, values };
        let ua = multiply(form, &u, &a).unwrap();
        prop_assert!(ua.norm(form) <= a.sup_norm() * u.norm(form) + 1e-12);
    }

    #[test]
    fn row_sum_norm_is_submultiplicative(
        a in proptest::collection::vec(-1.0f64..1.0, 9),
        b in proptest::collection::vec(-1.0f64..1.0, 9),
    ) {
        let ma = nalgebra::DMatrix::from_row_slice(3, 3, &a);
        let mb = nalgebra::DMatrix::from_row_slice(3, 3, &b);
        let prod = &ma * &mb;
        prop_assert!(max_row_sum(&prod) <= max_row_sum(&ma) * max_row_sum(&mb) + 1e-12);
    }

    #[test]
    fn p_sums_are_monotone_for_contractive_spectra(
        mut values in proptest::collection::vec(0.0f64..1.0, 1..40),
    ) {
        // for s_k <= 1 the p-sum is non-increasing in p
        values.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let s = SingularSpectrum { values };
        let rep = summability_report(&s, &[0.5, 1.0, 1.5, 2.0]).unwrap();
        for w in rep.entries.windows(2) {
            prop_assert!(w[1].p_sum <= w[0].p_sum + 1e-12);
        }
    }

    #[test]
    fn effective_resistance_triangle_inequality(net in network_strategy(), x in 0usize..8, y in 0usize..8, z in 0usize..8) {
        let n = net.size();
        let (x, y, z) = (x % n, y % n, z % n);
        if x != y && y != z && x != z {
            let rxy = net.effective_resistance(x, y).unwrap();
            let ryz = net.effective_resistance(y, z).unwrap();
            let rxz = net.effective_resistance(x, z).unwrap();
            prop_assert!(rxz <= rxy + ryz + 1e-10);
        }
    }
}
