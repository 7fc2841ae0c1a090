//! Exact quenched hitting probabilities on a fixed tree.
//!
//! With level `n` absorbing, the probability `h(x)` that the walk started at
//! `x` reaches level `n` before the parent of `x` satisfies
//! `h = g / (1 + g)` with `g(x) = sum_i A_i(x) h(x_i)`, `h = 1` on level `n`
//! and `g = 0` at childless vertices. Every quantity stays in `[0, 1]`, so
//! the recursion needs no rescaling even when `e^{-V}` spans many orders of
//! magnitude.

pub mod dense;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::law::OffspringLaw;
use crate::rng::{child_key, rng_from_key};
use crate::tree::{root_key, MarkedTree};

/// Relative slack for comparisons between independently rounded quantities.
pub const SANDWICH_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct QuenchedSolution {
    pub level: u32,
    /// Probability of reaching level `n` before the parent of the root.
    pub beta: f64,
    /// Probability of reaching level `n` before returning to the root.
    pub rho: f64,
    /// `h(x)` per arena index; NaN below level `n`.
    pub escape: Vec<f64>,
    pub omega_root_parent: f64,
}

impl QuenchedSolution {
    /// Checks `rho <= beta <= rho / omega(root, parent of root)` up to a
    /// relative rounding slack; at `n = 1` the lower bound is an equality.
    pub fn sandwich_holds(&self) -> bool {
        let slack = 1.0 + SANDWICH_RTOL;
        self.rho <= self.beta * slack && self.beta <= self.rho / self.omega_root_parent * slack
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelValues {
    pub level: u32,
    pub beta: f64,
    pub rho: f64,
}

fn check_depth(tree: &MarkedTree, n: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("level must be at least 1".into()));
    }
    if !tree.complete_to(n) {
        return Err(Error::DepthUnavailable { requested: n, available: tree.max_depth().min(tree.depth_cap()) });
    }
    Ok(())
}

/// Solves the escape recursion with level `n` absorbing.
pub fn solve_levels(tree: &MarkedTree, n: u32) -> Result<QuenchedSolution> {
    check_depth(tree, n)?;
    let mut h = vec![f64::NAN; tree.len()];
    let mut g_root = 0.0;
    for x in (0..tree.len() as u32).rev() {
        let v = tree.vertex(x);
        if v.depth > n {
            continue;
        }
        if v.depth == n {
            h[x as usize] = 1.0;
            continue;
        }
        let g: f64 = tree.children(x).map(|c| tree.vertex(c).a_mark * h[c as usize]).sum();
        h[x as usize] = g / (1.0 + g);
        if x == 0 {
            g_root = g;
        }
    }
    let omega = tree.omega_root_parent();
    Ok(QuenchedSolution { level: n, beta: h[0], rho: g_root * omega, escape: h, omega_root_parent: omega })
}

/// Conductances `e^{-V(x)}` per arena index.
pub fn conductances(tree: &MarkedTree) -> Vec<f64> {
    tree.vertices().iter().map(|v| (-v.v).exp()).collect()
}

/// Probability, from the root, of hitting `x` before returning to the root,
/// by the one-dimensional formula along the path to `x`.
pub fn hit_before_return_path(tree: &MarkedTree, x: u32) -> Result<f64> {
    if x == 0 {
        return Err(Error::InvalidArgument("target must differ from the root".into()));
    }
    let path = tree.path_to(x);
    let vmax = path.iter().map(|&z| tree.vertex(z).v).fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = path.iter().map(|&z| (tree.vertex(z).v - vmax).exp()).sum();
    let x1 = tree.vertex(path[0]);
    let omega_first = x1.a_mark / (1.0 + tree.vertex(0).sum_a);
    Ok(omega_first * (x1.v - vmax).exp() / denom)
}

/// Expected number of visits to `x` during one excursion from the root,
/// `omega(root, parent) e^{-V(x)} / omega(x, parent)`.
pub fn expected_visits(tree: &MarkedTree, x: u32) -> f64 {
    let v = tree.vertex(x);
    tree.omega_root_parent() * (-v.v).exp() / tree.omega_parent(x)
}

/// Compares `rho_n` with `(c / n) exp(-min_{|x|=n} Vbar(x))`, where
/// `c = min_{|x|=1} omega(root, x) e^{V(x)}`.
pub fn rho_potential_bound_check(tree: &MarkedTree, n: u32) -> Result<BoundCheck> {
    let sol = solve_levels(tree, n)?;
    let ray = tree.min_vbar_exact(n)?;
    let den = 1.0 + tree.vertex(0).sum_a;
    let c = tree
        .children(0)
        .map(|x| {
            let v = tree.vertex(x);
            v.a_mark / den * v.v.exp()
        })
        .fold(f64::INFINITY, f64::min);
    let rhs = c / n as f64 * (-ray.min_vbar).exp();
    Ok(BoundCheck { lhs: sol.rho, rhs, holds: sol.rho >= rhs * (1.0 - 1e-12) })
}

/// `beta_n` and `rho_n` for several levels on the tree of the given seed,
/// generated depth-first without storing it. Agrees with [`solve_levels`]
/// on the tree sampled from the same seed (first attempt).
pub fn solve_levels_streaming(law: &OffspringLaw, seed: u64, levels: &[u32]) -> Result<Vec<LevelValues>> {
    law.validate()?;
    if levels.is_empty() || levels.contains(&0) {
        return Err(Error::InvalidArgument("levels must be nonempty and positive".into()));
    }
    let top = *levels.iter().max().expect("nonempty");
    let k = levels.len();
    let mut s = Streamer {
        law,
        levels,
        top,
        h: vec![vec![0.0; k]; top as usize + 1],
        g: vec![vec![0.0; k]; top as usize + 1],
        marks: vec![Vec::new(); top as usize + 1],
    };
    let sum_a = s.visit(root_key(seed, 0), 0);
    Ok(levels
        .iter()
        .enumerate()
        .map(|(i, &level)| LevelValues { level, beta: s.h[0][i], rho: s.g[0][i] / (1.0 + sum_a) })
        .collect())
}

struct Streamer<'a> {
    law: &'a OffspringLaw,
    levels: &'a [u32],
    top: u32,
    h: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
    marks: Vec<Vec<f64>>,
}

impl Streamer<'_> {
    /// Fills `h[depth]` for the vertex keyed by `key`; returns its mark sum.
    fn visit(&mut self, key: u64, depth: u32) -> f64 {
        let d = depth as usize;
        if depth == self.top {
            for (i, &l) in self.levels.iter().enumerate() {
                self.h[d][i] = if l == depth { 1.0 } else { f64::NAN };
            }
            return 0.0;
        }
        let mut marks = std::mem::take(&mut self.marks[d]);
        self.law.sample_marks(&mut rng_from_key(key), &mut marks);
        self.g[d].iter_mut().for_each(|g| *g = 0.0);
        for (r, &a) in marks.iter().enumerate() {
            self.visit(child_key(key, r as u32), depth + 1);
            for (i, &l) in self.levels.iter().enumerate() {
                if l > depth {
                    self.g[d][i] += a * self.h[d + 1][i];
                }
            }
        }
        for (i, &l) in self.levels.iter().enumerate() {
            self.h[d][i] = match l.cmp(&depth) {
                std::cmp::Ordering::Equal => 1.0,
                std::cmp::Ordering::Greater => self.g[d][i] / (1.0 + self.g[d][i]),
                std::cmp::Ordering::Less => f64::NAN,
            };
        }
        let sum_a = marks.iter().sum();
        self.marks[d] = marks;
        sum_a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::Atom;
    use crate::tree::{sample_tree, ExtinctionPolicy};

    fn table(a: &[f64]) -> OffspringLaw {
        OffspringLaw::DiscreteTable { atoms: vec![Atom { prob: 1.0, a_values: a.to_vec() }] }
    }

    #[test]
    fn unary_gamblers_ruin() {
        let t = sample_tree(&table(&[1.0]), 50, 0, ExtinctionPolicy::AllowExtinct).unwrap();
        for n in 1..=50 {
            let s = solve_levels(&t, n).unwrap();
            assert!((s.beta - 1.0 / (n as f64 + 1.0)).abs() < 1e-12);
            assert!((s.rho - 1.0 / (2.0 * n as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn binary_half_one_level() {
        let t = sample_tree(&table(&[0.5, 0.5]), 1, 0, ExtinctionPolicy::AllowExtinct).unwrap();
        let s = solve_levels(&t, 1).unwrap();
        assert!((s.beta - 0.5).abs() < 1e-15 && (s.rho - 0.5).abs() < 1e-15);
    }

    #[test]
    fn path_formula_small_cases() {
        let t = sample_tree(&table(&[1.0]), 7, 0, ExtinctionPolicy::AllowExtinct).unwrap();
        assert!((hit_before_return_path(&t, 7).unwrap() - 1.0 / 14.0).abs() < 1e-15);
        let law = OffspringLaw::DiscreteTable { atoms: vec![Atom { prob: 1.0, a_values: vec![1.0] }] };
        let mut t = MarkedTree::lazy(law, 0, 3).unwrap();
        t.attach_children(0, &[1.0]);
        t.attach_children(1, &[0.5]);
        assert!((hit_before_return_path(&t, 2).unwrap() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn visits_at_root_and_on_unary_path() {
        let t = sample_tree(&table(&[1.0]), 5, 0, ExtinctionPolicy::AllowExtinct).unwrap();
        assert!((expected_visits(&t, 0) - 1.0).abs() < 1e-15);
        assert!((expected_visits(&t, 1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bound_is_tight_on_unary_path() {
        let t = sample_tree(&table(&[1.0]), 10, 0, ExtinctionPolicy::AllowExtinct).unwrap();
        let b = rho_potential_bound_check(&t, 10).unwrap();
        assert!((b.lhs - 0.05).abs() < 1e-15 && (b.rhs - 0.05).abs() < 1e-15 && b.holds);
    }

    #[test]
    fn rejects_shallow_tree() {
        let t = sample_tree(&table(&[1.0]), 3, 0, ExtinctionPolicy::AllowExtinct).unwrap();
        assert!(matches!(solve_levels(&t, 4), Err(Error::DepthUnavailable { .. })));
    }
}
