use rwre_core::quenched::{expected_visits, solve_levels};
use rwre_core::tree::sample_tree;
use rwre_core::walk::{
    checkpoints, default_depth_cap, displacement_scaling, estimate_beta_mc, excursion_visits_mc, run_walk,
    BoundaryPolicy,
};
use rwre_core::{presets, ExtinctionPolicy, MarkedTree, Site};

const ALLOW: ExtinctionPolicy = ExtinctionPolicy::AllowExtinct;

#[test]
fn checkpoints_are_geometric() {
    let cps = checkpoints(1000);
    assert_eq!(&cps[..3], &[1, 2, 3]);
    assert!(cps.windows(2).all(|w| w[0] < w[1] && (w[1] as f64) <= 1.1 * w[0] as f64 + 1.0));
    assert!(*cps.last().unwrap() <= 1000 && 1.1 * *cps.last().unwrap() as f64 > 1000.0 - 1.0);
}

#[test]
fn unary_path_walk_spreads_diffusively() {
    let n = 1_000_000u64;
    let mut total = 0.0;
    for seed in 0..4 {
        let mut path = MarkedTree::lazy(presets::unary(), seed, 100_000).unwrap();
        let traj = run_walk(&mut path, n, seed, BoundaryPolicy::ReflectAtParentOfRoot, false);
        assert_eq!(traj.steps_taken, n);
        assert!(!traj.depth_cap_hit);
        total += traj.max_depth() as f64;
    }
    let ratio = total / 4.0 / (n as f64).sqrt();
    assert!((0.3..=4.0).contains(&ratio), "max depth / sqrt(n) = {ratio}");
}

#[test]
fn trajectories_are_reproducible_and_consistent() {
    let law = presets::critical_lognormal();
    let run = |seed| {
        let mut tree = MarkedTree::lazy(law.clone(), seed, 60).unwrap();
        run_walk(&mut tree, 20_000, seed, BoundaryPolicy::ReflectAtParentOfRoot, true)
    };
    let a = run(3);
    assert_eq!(a, run(3));
    assert_ne!(a.positions, run(4).positions);
    let pos = a.positions.as_ref().unwrap();
    assert_eq!(pos.len() as u64, a.steps_taken + 1);
    assert_eq!(a.tau.len() as u32, a.max_depth());
    assert!(a.tau.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(a.returns_to_root, pos[1..].iter().filter(|&&s| s == Site::Vertex(0)).count() as u64);
    assert!(a.max_depth_curve.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
    assert_eq!(a.current, *pos.last().unwrap());
}

#[test]
fn absorbing_policy_stops_at_cap() {
    let mut path = MarkedTree::lazy(presets::unary(), 0, 20).unwrap();
    let traj = run_walk(&mut path, 1_000_000, 0, BoundaryPolicy::AbsorbAtDepthCap, false);
    assert!(traj.depth_cap_hit);
    assert_eq!(traj.max_depth(), 20);
    assert_eq!(*traj.tau.last().unwrap(), traj.steps_taken);
}

#[test]
fn beta_estimate_matches_solver() {
    let tree = sample_tree(&presets::critical_lognormal(), 6, 11, ALLOW).unwrap();
    let exact = solve_levels(&tree, 6).unwrap().beta;
    let est = estimate_beta_mc(&tree, 6, 200_000, 2).unwrap();
    assert!(est.within_se(exact, 4.0), "{est:?} vs {exact}");
}

#[test]
fn visit_counts_match_formula() {
    let tree = sample_tree(&presets::critical_binary(), 5, 2, ALLOW).unwrap();
    let targets: Vec<u32> = (1..tree.len() as u32).step_by(7).collect();
    let est = excursion_visits_mc(&tree, &targets, 200_000, 5);
    for (&x, e) in targets.iter().zip(&est) {
        let exact = expected_visits(&tree, x);
        assert!(e.within_se(exact, 4.5) || (exact - e.value).abs() < 1e-3 * exact, "x = {x}: {e:?} vs {exact}");
    }
}

#[test]
fn scaling_table_flags_diffusive_growth() {
    let unary = presets::unary();
    let report = presets::critical_lognormal().classify().unwrap();
    let trajs: Vec<_> = (0..32u64)
        .map(|s| {
            run_walk(
                &mut MarkedTree::lazy(unary.clone(), s, 50_000).unwrap(),
                200_000,
                s,
                BoundaryPolicy::ReflectAtParentOfRoot,
                false,
            )
        })
        .collect();
    let table = displacement_scaling(&trajs, &report);
    let slope = table.late_slope.unwrap();
    assert!((0.4..0.7).contains(&slope), "slope {slope}");
    assert!(table.diverges);
}

#[test]
fn critical_walk_grows_slowly() {
    let law = presets::critical_lognormal();
    let report = law.classify().unwrap();
    let steps = 200_000;
    let cap = default_depth_cap(&report, steps);
    let trajs: Vec<_> = (0..4u64)
        .map(|s| {
            run_walk(
                &mut MarkedTree::lazy(law.clone(), s, cap).unwrap(),
                steps,
                s,
                BoundaryPolicy::ReflectAtParentOfRoot,
                false,
            )
        })
        .collect();
    let table = displacement_scaling(&trajs, &report);
    assert!(!table.diverges, "{:?}", table.late_slope);
    assert!(table.rows.iter().all(|r| r.prediction > 0.0));
}
