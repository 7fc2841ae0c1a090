//! Size-biased trees with a distinguished ray (the spine), the
//! many-to-one identity and the recursions along the spine.

mod birth_death;
mod moments;

pub use birth_death::{
    birth_death_formulas, birth_death_mc, fj_convexity_probe, fj_product, z_recursion_and_bound, BirthDeathMc,
    BirthDeathSpec, ConvexityProbe, ProductBound,
};
pub use moments::{
    first_moment_rate, paley_zygmund_intervals, second_moment_bound, SecondMomentBound, SecondMomentConfig,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{MeanAccumulator, RateEstimate};
use crate::law::{OffspringLaw, REGIME_TOL};
use crate::quenched::solve_levels;
use crate::replicas::{chunk_ranges, map_replicas};
use crate::rng::{mix, replica_seed, rng_from_key};
use crate::tree::{sample_tree, ExtinctionPolicy, MarkedTree};

const SPINE_STREAM: u64 = 0x5B1E_0000;
const CHUNKS: u64 = 16;

/// A tree sampled under the size-biased measure, with its spine
/// `w_0 = root, ..., w_n`. Generations `0..=n` are complete; in addition
/// the children of `w_n` are present so that `omega(w_n, w_{n-1})` is defined.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinalTree {
    pub tree: MarkedTree,
    pub spine: Vec<u32>,
}

impl SpinalTree {
    pub fn n(&self) -> u32 {
        self.spine.len() as u32 - 1
    }

    pub fn spine_potential(&self) -> Vec<f64> {
        self.spine.iter().map(|&w| self.tree.vertex(w).v).collect()
    }

    /// `V(w_k) - V(w_{k-1})` for `k = 1..=n`.
    pub fn spine_increments(&self) -> Vec<f64> {
        self.spine_potential().windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Children of `w_{k-1}` other than `w_k`, for `1 <= k <= n`.
    pub fn brothers(&self, k: usize) -> Vec<u32> {
        let parent = self.spine[k - 1];
        self.tree.children(parent).filter(|&c| c != self.spine[k]).collect()
    }

    /// `W_n = sum_{|x| = n} e^{-V(x)}`.
    pub fn generation_sum(&self) -> f64 {
        generation_sum(&self.tree, self.n())
    }
}

/// `sum_{|x| = n} e^{-V(x)}`.
pub fn generation_sum(tree: &MarkedTree, n: u32) -> f64 {
    tree.vertices().iter().filter(|v| v.depth == n).map(|v| (-v.v).exp()).sum()
}

fn require_critical(law: &OffspringLaw) -> Result<()> {
    law.validate()?;
    let psi1 = law.psi(1.0)?;
    if psi1.abs() > REGIME_TOL {
        return Err(Error::WrongRegime(format!("psi(1) = {psi1}, rescale the law first")));
    }
    Ok(())
}

/// Samples a size-biased tree with spine of length `n`. At each spine vertex
/// the offspring configuration is biased by the sum of the marks and the
/// next spine vertex is chosen proportionally to its mark; all other
/// vertices reproduce according to the original law.
pub fn sample_q_tree(law: &OffspringLaw, n: u32, seed: u64) -> Result<SpinalTree> {
    require_critical(law)?;
    let mut tree = MarkedTree::lazy(law.clone(), seed, n + 1)?;
    let mut spine = vec![0u32];
    let mut marks = Vec::with_capacity(law.max_children());
    for _ in 0..n {
        let w = *spine.last().expect("spine starts at the root");
        let mut rng = rng_from_key(mix(tree.vertex_key(w), SPINE_STREAM));
        let j = law.sample_size_biased(&mut rng, &mut marks);
        let range = tree.attach_children(w, &marks);
        spine.push(range.start + j as u32);
    }
    let mut i = 0;
    while i < tree.len() {
        if tree.vertex(i as u32).depth < n {
            tree.expand(i as u32);
        }
        i += 1;
    }
    let w_n = *spine.last().expect("nonempty spine");
    if !tree.is_expanded(w_n) {
        let mut rng = rng_from_key(mix(tree.vertex_key(w_n), SPINE_STREAM));
        law.sample_size_biased(&mut rng, &mut marks);
        tree.attach_children(w_n, &marks);
    }
    Ok(SpinalTree { tree, spine })
}

/// Bounded functional of `(V(x_1), ..., V(x_n); N(x_0), ..., N(x_{n-1}))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathFunctional {
    One,
    /// All potentials along the path lie in `[lo, hi]`.
    Band {
        lo: f64,
        hi: f64,
    },
    /// The offspring count of `x_index` equals `value`.
    NuEquals {
        index: usize,
        value: u32,
    },
}

impl PathFunctional {
    pub fn eval(&self, potentials: &[f64], nus: &[u32]) -> f64 {
        let ok = match self {
            PathFunctional::One => true,
            PathFunctional::Band { lo, hi } => potentials.iter().all(|v| lo <= v && v <= hi),
            PathFunctional::NuEquals { index, value } => nus.get(*index) == Some(value),
        };
        if ok {
            1.0
        } else {
            0.0
        }
    }
}

/// Both sides of the many-to-one identity
/// `E sum_{|x|=n} e^{-V(x)} F(V(x_i), N(x_{i-1})) = E F(S_i, nu_{i-1})`.
pub fn many_to_one_check(
    law: &OffspringLaw,
    n: u32,
    f: &PathFunctional,
    reps: u64,
    seed: u64,
) -> Result<(RateEstimate, RateEstimate)> {
    require_critical(law)?;
    let step = law.tilted_step_law(1.0)?;
    let lhs = chunked_mean(reps, mix(seed, 1), |s| {
        let tree = sample_tree(law, n, s, ExtinctionPolicy::AllowExtinct).expect("valid law");
        let mut total = 0.0;
        for x in tree.level(n) {
            let path = tree.path_to(x);
            let potentials: Vec<f64> = path.iter().map(|&y| tree.vertex(y).v).collect();
            let mut nus = Vec::with_capacity(n as usize);
            nus.push(tree.children(0).len() as u32);
            nus.extend(path[..path.len() - 1].iter().map(|&y| tree.children(y).len() as u32));
            total += (-tree.vertex(x).v).exp() * f.eval(&potentials, &nus);
        }
        total
    });
    let rhs = chunked_mean(reps, mix(seed, 2), |s| {
        let mut rng = rng_from_key(s);
        let mut pos = 0.0;
        let mut potentials = Vec::with_capacity(n as usize);
        let mut nus = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let st = step.sample(&mut rng);
            pos += st.x;
            potentials.push(pos);
            nus.push(st.nu.unwrap_or(0));
        }
        f.eval(&potentials, &nus)
    });
    Ok((lhs, rhs))
}

/// Mean of `W_n` over trees sampled without conditioning on survival.
pub fn martingale_mean(law: &OffspringLaw, n: u32, reps: u64, seed: u64) -> Result<RateEstimate> {
    Ok(many_to_one_check(law, n, &PathFunctional::One, reps, seed)?.0)
}

/// Bounded functional of the first `n` generations of a tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum TreeFunctional {
    /// `min_{|x|=n} V(x) <= c`.
    MinPotentialAtMost(f64),
    /// `W_n <= c`.
    GenerationSumAtMost(f64),
}

impl TreeFunctional {
    pub fn eval(&self, tree: &MarkedTree, n: u32) -> f64 {
        let ok = match *self {
            TreeFunctional::MinPotentialAtMost(c) => tree.vertices().iter().filter(|v| v.depth == n).any(|v| v.v <= c),
            TreeFunctional::GenerationSumAtMost(c) => generation_sum(tree, n) <= c,
        };
        if ok {
            1.0
        } else {
            0.0
        }
    }
}

/// `E_Q[F]` from size-biased trees and `E_P[W_n F]` from ordinary trees.
pub fn absolute_continuity_check(
    law: &OffspringLaw,
    n: u32,
    f: TreeFunctional,
    reps: u64,
    seed: u64,
) -> Result<(RateEstimate, RateEstimate)> {
    require_critical(law)?;
    let q_side = chunked_mean(reps, mix(seed, 3), |s| {
        let st = sample_q_tree(law, n, s).expect("critical law");
        f.eval(&st.tree, n)
    });
    let p_side = chunked_mean(reps, mix(seed, 4), |s| {
        let tree = sample_tree(law, n, s, ExtinctionPolicy::AllowExtinct).expect("valid law");
        generation_sum(&tree, n) * f.eval(&tree, n)
    });
    Ok((q_side, p_side))
}

/// First increment of `reps` independent spines.
pub fn spine_increment_samples(law: &OffspringLaw, reps: u64, seed: u64) -> Result<Vec<f64>> {
    require_critical(law)?;
    Ok(map_replicas(reps, |r| {
        let st = sample_q_tree(law, 1, replica_seed(seed, r)).expect("critical law");
        st.spine_increments()[0]
    }))
}

fn chunked_mean(reps: u64, seed: u64, sample: impl Fn(u64) -> f64 + Sync + Send) -> RateEstimate {
    let parts = map_replicas(CHUNKS, |c| {
        let mut acc = MeanAccumulator::default();
        for r in chunk_ranges(reps, CHUNKS).get(c as usize).cloned().unwrap_or(0..0) {
            acc.push(sample(replica_seed(seed, r)));
        }
        acc
    });
    let mut acc = MeanAccumulator::default();
    parts.iter().for_each(|p| acc.merge(p));
    acc.estimate()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YRecursion {
    /// `Y_1, ..., Y_n`.
    pub y: Vec<f64>,
    /// `xi_1, ..., xi_{n-2}`.
    pub xi: Vec<f64>,
    /// `prod Y_j`, the probability from `w_n` of reaching the root before
    /// returning to level `n`.
    pub product: f64,
}

/// Evaluates `Y_j = 1 / (1 + xi_j + (1 - Y_{j+1}) B(w_{j+1}))` with
/// `xi_j = sum over brothers x of w_{j+1} of B(x) P^x(reach level n before w_j)`,
/// the hitting probabilities coming from the exact solver.
pub fn y_recursion(st: &SpinalTree) -> Result<YRecursion> {
    let n = st.n() as usize;
    if n == 0 {
        return Err(Error::InvalidArgument("spine must have length at least 1".into()));
    }
    let t = &st.tree;
    let w = &st.spine;
    let mut y = vec![0.0; n + 1];
    y[n] = t.omega_parent(w[n]);
    if n >= 2 {
        y[n - 1] = t.omega_parent(w[n - 1]);
    }
    let mut xi = vec![0.0; n.saturating_sub(1)];
    if n >= 3 {
        let escape = solve_levels(t, n as u32)?.escape;
        for j in (1..=n - 2).rev() {
            let x: f64 = st.brothers(j + 1).iter().map(|&b| t.vertex(b).a_mark * escape[b as usize]).sum();
            xi[j] = x;
            y[j] = 1.0 / (1.0 + x + (1.0 - y[j + 1]) * t.vertex(w[j + 1]).a_mark);
        }
    }
    let y: Vec<f64> = y[1..].to_vec();
    let product = y.iter().product();
    Ok(YRecursion { y, xi: xi.into_iter().skip(1).collect(), product })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZRecursion {
    /// `Z_1, ..., Z_{n-1}`.
    pub z: Vec<f64>,
    /// `prod Z_j`.
    pub product: f64,
    /// Conditional means `sum over brothers of B(x) E beta_{n-1-j}`, `j = 1..=n-2`.
    pub xi_mean: Vec<f64>,
    /// Their upper bounds `E beta_{n-1-j} / omega(w_j, w_{j-1})`.
    pub xi_bound: Vec<f64>,
}

/// The recursion with each `xi_j` replaced by its conditional mean given the
/// spine, using `mean_beta(k) = E beta_k`.
pub fn z_recursion(st: &SpinalTree, mean_beta: impl Fn(u32) -> f64) -> Result<ZRecursion> {
    let n = st.n() as usize;
    if n < 2 {
        return Err(Error::InvalidArgument("spine must have length at least 2".into()));
    }
    let t = &st.tree;
    let w = &st.spine;
    let mut z = vec![0.0; n];
    z[n - 1] = t.omega_parent(w[n - 1]);
    let mut xi_mean = vec![0.0; n - 1];
    let mut xi_bound = vec![0.0; n - 1];
    for j in (1..n - 1).rev() {
        let eb = mean_beta((n - 1 - j) as u32);
        let r: f64 = st.brothers(j + 1).iter().map(|&b| t.vertex(b).a_mark).sum::<f64>() * eb;
        xi_mean[j] = r;
        xi_bound[j] = eb / t.omega_parent(w[j]);
        z[j] = 1.0 / (1.0 + r + (1.0 - z[j + 1]) * t.vertex(w[j + 1]).a_mark);
    }
    let z: Vec<f64> = z[1..].to_vec();
    let product = z.iter().product();
    Ok(ZRecursion { z, product, xi_mean: xi_mean[1..].to_vec(), xi_bound: xi_bound[1..].to_vec() })
}
