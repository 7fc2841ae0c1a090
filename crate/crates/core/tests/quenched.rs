use proptest::prelude::*;
use rwre_core::law::Atom;
use rwre_core::quenched::{
    conductances, dense, expected_visits, hit_before_return_path, rho_potential_bound_check, solve_levels,
    solve_levels_streaming,
};
use rwre_core::tree::sample_tree;
use rwre_core::walk::estimate_beta_mc;
use rwre_core::{presets, Error, ExtinctionPolicy, MarkedTree, OffspringLaw};

const ALLOW: ExtinctionPolicy = ExtinctionPolicy::AllowExtinct;

#[test]
fn unary_closed_forms() {
    let path = sample_tree(&presets::unary(), 50, 0, ALLOW).unwrap();
    for n in 1..=50u32 {
        let s = solve_levels(&path, n).unwrap();
        assert!((s.beta - 1.0 / (n as f64 + 1.0)).abs() < 1e-12);
        assert!((s.rho - 0.5 / n as f64).abs() < 1e-12);
    }
    let x = path.level(10)[0];
    assert!((hit_before_return_path(&path, x).unwrap() - 0.05).abs() < 1e-15);
    assert!((expected_visits(&path, path.level(1)[0]) - 1.0).abs() < 1e-15);
    let check = rho_potential_bound_check(&path, 10).unwrap();
    assert!((check.lhs - 0.05).abs() < 1e-15 && (check.rhs - 0.05).abs() < 1e-15 && check.holds);
}

#[test]
fn binary_half_examples() {
    let tree = sample_tree(&presets::binary_half(), 5, 0, ALLOW).unwrap();
    let s = solve_levels(&tree, 1).unwrap();
    assert!((s.beta - 0.5).abs() < 1e-15 && (s.rho - 0.5).abs() < 1e-15);
    assert!(rho_potential_bound_check(&tree, 5).unwrap().holds);
    assert!(conductances(&tree)
        .iter()
        .zip(tree.vertices())
        .all(|(c, v)| (c - 0.5f64.powi(v.depth as i32)).abs() < 1e-15));
}

#[test]
fn errors_on_short_trees() {
    let tree = sample_tree(&presets::binary_half(), 3, 0, ALLOW).unwrap();
    assert!(matches!(solve_levels(&tree, 4), Err(Error::DepthUnavailable { requested: 4, .. })));
    assert!(matches!(hit_before_return_path(&tree, 0), Err(Error::InvalidArgument(_))));
}

#[test]
fn streaming_matches_arena() {
    let law = presets::critical_lognormal();
    for seed in 0..5u64 {
        let tree = sample_tree(&law, 10, seed, ALLOW).unwrap();
        let levels = [2u32, 5, 10];
        let streamed = solve_levels_streaming(&law, seed, &levels).unwrap();
        for lv in streamed {
            let s = solve_levels(&tree, lv.level).unwrap();
            assert!((s.beta - lv.beta).abs() <= 1e-14 * s.beta.max(1e-300));
            assert!((s.rho - lv.rho).abs() <= 1e-14 * s.rho.max(1e-300));
        }
    }
}

#[test]
fn walk_estimate_on_unary_path() {
    let path = sample_tree(&presets::unary(), 4, 0, ALLOW).unwrap();
    let est = estimate_beta_mc(&path, 4, 100_000, 1).unwrap();
    assert!(est.within_se(0.2, 3.0), "{est:?}");
}

fn arb_law() -> impl Strategy<Value = OffspringLaw> {
    prop_oneof![
        (1u32..4, -1.5f64..0.5, 0.05f64..2.0).prop_map(|(n, mu, s2)| OffspringLaw::LogNormal { n_children: n, mu, s2 }),
        prop::collection::vec((0.1f64..1.0, prop::collection::vec(0.05f64..3.0, 0..4)), 1..4).prop_map(|atoms| {
            let total: f64 = atoms.iter().map(|a| a.0).sum();
            OffspringLaw::DiscreteTable {
                atoms: atoms.into_iter().map(|(p, a)| Atom { prob: p / total, a_values: a }).collect(),
            }
        }),
    ]
}

fn small_tree(law: &OffspringLaw, n: u32, seed: u64) -> Option<MarkedTree> {
    let tree = sample_tree(law, n, seed, ALLOW).ok()?;
    (tree.max_depth() == n && tree.len() <= 300).then_some(tree)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn solver_matches_dense_oracle(law in arb_law(), n in 1u32..6, seed in any::<u64>()) {
        let tree = small_tree(&law, n, seed);
        prop_assume!(tree.is_some());
        let tree = tree.unwrap();
        let s = solve_levels(&tree, n).unwrap();
        let (beta, rho) = dense::beta_rho(&tree, n);
        prop_assert!((s.beta - beta).abs() <= 1e-10);
        prop_assert!((s.rho - rho).abs() <= 1e-10);
        prop_assert!(s.sandwich_holds());
        prop_assert!(s.beta > 0.0 && s.beta <= 1.0);
        prop_assert!(rho_potential_bound_check(&tree, n).unwrap().holds);
    }

    #[test]
    fn beta_is_nonincreasing(law in arb_law(), seed in any::<u64>()) {
        let tree = small_tree(&law, 5, seed);
        prop_assume!(tree.is_some());
        let tree = tree.unwrap();
        let betas: Vec<f64> = (1..=5).map(|n| solve_levels(&tree, n).unwrap().beta).collect();
        prop_assert!(betas.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn path_formula_matches_dense(law in arb_law(), seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let tree = small_tree(&law, 4, seed);
        prop_assume!(tree.is_some());
        let tree = tree.unwrap();
        let x = 1 + pick.index(tree.len() - 1) as u32;
        let formula = hit_before_return_path(&tree, x).unwrap();
        let oracle = dense::hit_before_return(&tree, x);
        prop_assert!((formula - oracle).abs() <= 1e-10 * (1.0 + oracle));
    }
}
