//! Dense linear-system solver for absorption probabilities of the walk
//! restricted to the first generations of a tree. It only uses
//! [`MarkedTree::transition_row`], not the escape recursion.

use nalgebra::{DMatrix, DVector};
use std::collections::HashMap;

use crate::tree::{MarkedTree, Site};

pub struct DenseSolution {
    index: HashMap<Site, usize>,
    values: Vec<f64>,
}

impl DenseSolution {
    /// Absorption probability from `site`.
    pub fn value(&self, site: Site) -> f64 {
        self.values[self.index[&site]]
    }

    /// Absorption probability after one step out of `site`, counting `site`
    /// itself as not yet visited.
    pub fn after_first_step(&self, tree: &MarkedTree, site: Site) -> f64 {
        tree.transition_row(site).iter().map(|&(y, p)| p * self.values[self.index[&y]]).sum()
    }
}

/// Probability of hitting `success` before `failure`, for the walk on the
/// sites of depth at most `max_depth` plus the parent of the root. Sites
/// outside this range must be made absorbing by the caller's predicates.
pub fn absorption(
    tree: &MarkedTree,
    max_depth: u32,
    success: impl Fn(Site) -> bool,
    failure: impl Fn(Site) -> bool,
) -> DenseSolution {
    let mut sites = vec![Site::ParentOfRoot];
    sites.extend((0..tree.len() as u32).filter(|&x| tree.vertex(x).depth <= max_depth).map(Site::Vertex));
    let index: HashMap<Site, usize> = sites.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let m = sites.len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut b = DVector::<f64>::zeros(m);
    for (i, &s) in sites.iter().enumerate() {
        a[(i, i)] = 1.0;
        if success(s) {
            b[i] = 1.0;
        } else if !failure(s) {
            for (y, p) in tree.transition_row(s) {
                let j = *index.get(&y).expect("transition leaves the truncated state space");
                a[(i, j)] -= p;
            }
        }
    }
    let x = a.lu().solve(&b).expect("absorbing chain system is nonsingular");
    DenseSolution { index, values: x.iter().copied().collect() }
}

fn depth_of(tree: &MarkedTree, s: Site) -> Option<u32> {
    match s {
        Site::ParentOfRoot => None,
        Site::Vertex(x) => Some(tree.vertex(x).depth),
    }
}

/// `(beta_n, rho_n)` from two dense solves.
pub fn beta_rho(tree: &MarkedTree, n: u32) -> (f64, f64) {
    let at_level = |s: Site| depth_of(tree, s) == Some(n);
    let beta = absorption(tree, n, at_level, |s| s == Site::ParentOfRoot).value(Site::Vertex(0));
    let rho = absorption(tree, n, at_level, |s| s == Site::Vertex(0)).after_first_step(tree, Site::Vertex(0));
    (beta, rho)
}

/// Probability, from the root, of hitting `x` before returning to the root.
pub fn hit_before_return(tree: &MarkedTree, x: u32) -> f64 {
    absorption(tree, tree.max_depth(), |s| s == Site::Vertex(x), |s| s == Site::Vertex(0))
        .after_first_step(tree, Site::Vertex(0))
}

/// Probability, from `start` on level `n`, of returning to the root before
/// coming back to level `n`.
pub fn return_before_level(tree: &MarkedTree, start: u32, n: u32) -> f64 {
    let top = tree.max_depth();
    absorption(tree, top, |s| s == Site::Vertex(0), |s| depth_of(tree, s).is_some_and(|d| d >= n))
        .after_first_step(tree, Site::Vertex(start))
}
