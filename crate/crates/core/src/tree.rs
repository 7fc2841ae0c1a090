//! Marked Galton-Watson trees stored in an arena.
//!
//! Vertices are appended in breadth-first order per expansion, so every
//! child has a larger index than its parent and the children of a vertex
//! occupy a contiguous index range. Marks of the children of a vertex are
//! drawn from a generator keyed by that vertex, and child keys are derived
//! from the parent key and the child rank. Any two procedures that visit
//! the same vertex therefore see the same marks, whatever the visiting order.

use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::error::{Error, Result};
use crate::law::OffspringLaw;
use crate::rng::{child_key, mix, rng_from_key};

pub const NO_PARENT: u32 = u32::MAX;

/// A state of the walk: a vertex or the artificial parent of the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Site {
    ParentOfRoot,
    Vertex(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum ExtinctionPolicy {
    AllowExtinct,
    RejectUntilDepth { max_attempts: u32 },
}

impl Default for ExtinctionPolicy {
    fn default() -> Self {
        ExtinctionPolicy::RejectUntilDepth { max_attempts: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub parent: u32,
    pub depth: u32,
    /// Mark `A` of the edge from the parent; 1 for the root.
    pub a_mark: f64,
    /// Potential `V`, with `V(root) = 0`.
    pub v: f64,
    /// Running maximum of `V` over the path from the root (root excluded);
    /// `-inf` at the root.
    pub vbar: f64,
    /// Sum of the children's marks.
    pub sum_a: f64,
    pub rank: u32,
    first_child: u32,
    n_children: u32,
    key: u64,
    expanded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkedTree {
    law: OffspringLaw,
    seed: u64,
    attempt: u32,
    depth_cap: u32,
    vertices: Vec<Vertex>,
}

/// Outcome of a ray minimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaySummary {
    pub depth: u32,
    pub min_vbar: f64,
    /// Arena indices of the minimizing ray, generations `1..=depth`.
    /// Empty when the search ran without an arena.
    pub argmin_path: Vec<u32>,
    /// Child ranks along the minimizing ray.
    pub argmin_ranks: Vec<u32>,
    /// Potentials along the minimizing ray.
    pub argmin_potentials: Vec<f64>,
    /// Number of non-root vertices visited.
    pub explored_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum MinVbarOutcome {
    Found(RaySummary),
    ThresholdExceeded { explored_count: u64 },
}

/// Key of the root for a given sampling attempt.
pub fn root_key(seed: u64, attempt: u32) -> u64 {
    mix(seed, attempt as u64)
}

impl MarkedTree {
    /// A tree holding only its root; vertices are generated on demand by
    /// [`MarkedTree::expand`] down to `depth_cap`.
    pub fn lazy(law: OffspringLaw, seed: u64, depth_cap: u32) -> Result<Self> {
        law.validate()?;
        Ok(Self::with_attempt(law, seed, 0, depth_cap))
    }

    fn with_attempt(law: OffspringLaw, seed: u64, attempt: u32, depth_cap: u32) -> Self {
        let root = Vertex {
            parent: NO_PARENT,
            depth: 0,
            a_mark: 1.0,
            v: 0.0,
            vbar: f64::NEG_INFINITY,
            sum_a: 0.0,
            rank: 0,
            first_child: 0,
            n_children: 0,
            key: root_key(seed, attempt),
            expanded: false,
        };
        Self { law, seed, attempt, depth_cap, vertices: vec![root] }
    }

    pub fn law(&self) -> &OffspringLaw {
        &self.law
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of rejected attempts before this tree was accepted.
    pub fn attempt(&self) -> u32 {
        self.attempt
    }

    pub fn depth_cap(&self) -> u32 {
        self.depth_cap
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex(&self, x: u32) -> &Vertex {
        &self.vertices[x as usize]
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn children(&self, x: u32) -> Range<u32> {
        let v = &self.vertices[x as usize];
        v.first_child..v.first_child + v.n_children
    }

    pub fn is_expanded(&self, x: u32) -> bool {
        self.vertices[x as usize].expanded
    }

    /// Depth of the deepest materialized vertex.
    pub fn max_depth(&self) -> u32 {
        self.vertices.iter().map(|v| v.depth).max().unwrap_or(0)
    }

    /// Vertices at generation `k`, in arena order.
    pub fn level(&self, k: u32) -> Vec<u32> {
        (0..self.vertices.len() as u32).filter(|&i| self.vertices[i as usize].depth == k).collect()
    }

    /// Generates the children of `x` unless already done or `x` sits at the
    /// depth cap. Returns the child range.
    pub fn expand(&mut self, x: u32) -> Range<u32> {
        let (expanded, depth, key) = {
            let v = &self.vertices[x as usize];
            (v.expanded, v.depth, v.key)
        };
        if expanded || depth >= self.depth_cap {
            return self.children(x);
        }
        let mut marks = Vec::with_capacity(self.law.max_children());
        self.law.sample_marks(&mut rng_from_key(key), &mut marks);
        self.attach_children(x, &marks)
    }

    /// Appends children with the given marks to an unexpanded vertex.
    pub(crate) fn attach_children(&mut self, x: u32, marks: &[f64]) -> Range<u32> {
        let first = self.vertices.len() as u32;
        let (depth, v, vbar, key) = {
            let p = &self.vertices[x as usize];
            (p.depth, p.v, p.vbar, p.key)
        };
        for (rank, &a) in marks.iter().enumerate() {
            let cv = v - a.ln();
            self.vertices.push(Vertex {
                parent: x,
                depth: depth + 1,
                a_mark: a,
                v: cv,
                vbar: vbar.max(cv),
                sum_a: 0.0,
                rank: rank as u32,
                first_child: 0,
                n_children: 0,
                key: child_key(key, rank as u32),
                expanded: false,
            });
        }
        let p = &mut self.vertices[x as usize];
        p.first_child = first;
        p.n_children = marks.len() as u32;
        p.sum_a = marks.iter().sum();
        p.expanded = true;
        first..first + marks.len() as u32
    }

    pub(crate) fn vertex_key(&self, x: u32) -> u64 {
        self.vertices[x as usize].key
    }

    /// Expands every vertex above the depth cap.
    pub fn materialize(&mut self) {
        let mut i = 0;
        while i < self.vertices.len() {
            self.expand(i as u32);
            i += 1;
        }
    }

    /// True when every vertex above generation `n` has been expanded.
    pub fn complete_to(&self, n: u32) -> bool {
        n <= self.depth_cap && self.vertices.iter().all(|v| v.depth >= n || v.expanded)
    }

    /// Transition probabilities out of `site`.
    pub fn transition_row(&self, site: Site) -> Vec<(Site, f64)> {
        match site {
            Site::ParentOfRoot => vec![(Site::Vertex(0), 1.0)],
            Site::Vertex(x) => {
                let v = &self.vertices[x as usize];
                let den = 1.0 + v.sum_a;
                let parent = if x == 0 { Site::ParentOfRoot } else { Site::Vertex(v.parent) };
                let mut row = Vec::with_capacity(1 + v.n_children as usize);
                row.push((parent, 1.0 / den));
                for c in self.children(x) {
                    row.push((Site::Vertex(c), self.vertices[c as usize].a_mark / den));
                }
                row
            }
        }
    }

    /// `omega(x, parent of x)`.
    pub fn omega_parent(&self, x: u32) -> f64 {
        1.0 / (1.0 + self.vertices[x as usize].sum_a)
    }

    /// `omega(root, parent of root)`.
    pub fn omega_root_parent(&self) -> f64 {
        self.omega_parent(0)
    }

    /// Vertices on the path from the root to `x`, root excluded.
    pub fn path_to(&self, x: u32) -> Vec<u32> {
        let mut path = Vec::with_capacity(self.vertices[x as usize].depth as usize);
        let mut y = x;
        while y != 0 {
            path.push(y);
            y = self.vertices[y as usize].parent;
        }
        path.reverse();
        path
    }

    /// Exact `min_{|x| = n} Vbar(x)` over the materialized tree.
    pub fn min_vbar_exact(&self, n: u32) -> Result<RaySummary> {
        if n == 0 {
            return Err(Error::InvalidArgument("depth must be at least 1".into()));
        }
        let available = self.max_depth();
        if available < n || !self.complete_to(n) {
            return Err(Error::DepthUnavailable { requested: n, available });
        }
        let mut explored = 0u64;
        let mut best: Option<u32> = None;
        // Depth-first with explicit stack, children in rank order.
        let mut stack: Vec<u32> = self.children(0).rev().collect();
        while let Some(x) = stack.pop() {
            explored += 1;
            let v = &self.vertices[x as usize];
            if v.depth == n {
                if best.is_none_or(|b| v.vbar < self.vertices[b as usize].vbar) {
                    best = Some(x);
                }
                continue;
            }
            stack.extend(self.children(x).rev());
        }
        let best = best.ok_or(Error::DepthUnavailable { requested: n, available })?;
        let path = self.path_to(best);
        Ok(RaySummary {
            depth: n,
            min_vbar: self.vertices[best as usize].vbar,
            argmin_ranks: path.iter().map(|&y| self.vertices[y as usize].rank).collect(),
            argmin_potentials: path.iter().map(|&y| self.vertices[y as usize].v).collect(),
            argmin_path: path,
            explored_count: explored,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&TreeFile::from_tree(self)).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: TreeFile = serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        file.into_tree()
    }
}

/// Samples a tree down to generation `depth`.
pub fn sample_tree(law: &OffspringLaw, depth: u32, seed: u64, policy: ExtinctionPolicy) -> Result<MarkedTree> {
    law.validate()?;
    let max_attempts = match policy {
        ExtinctionPolicy::AllowExtinct => 1,
        ExtinctionPolicy::RejectUntilDepth { max_attempts } => {
            if law.mean_offspring() <= 1.0 {
                return Err(Error::InvalidLaw("rejection sampling needs a supercritical law".into()));
            }
            max_attempts.max(1)
        }
    };
    for attempt in 0..max_attempts {
        let mut tree = MarkedTree::with_attempt(law.clone(), seed, attempt, depth);
        tree.materialize();
        if matches!(policy, ExtinctionPolicy::AllowExtinct) || tree.max_depth() == depth {
            return Ok(tree);
        }
    }
    Err(Error::ExtinctionBudgetExceeded { attempts: max_attempts })
}

/// Branch-and-bound search for `min_{|x| = n} Vbar(x)` on the tree of the
/// given seed, generated depth-first without an arena. Vertices whose running
/// maximum exceeds `threshold` or cannot beat the best ray found so far are
/// not expanded. Children are visited in increasing order of potential.
pub fn min_vbar_pruned(law: &OffspringLaw, n: u32, threshold: f64, seed: u64, budget: u64) -> Result<MinVbarOutcome> {
    law.validate()?;
    if n == 0 || !(threshold > 0.0) {
        return Err(Error::InvalidArgument("need n >= 1 and a positive threshold".into()));
    }
    struct Frame {
        vbar: f64,
        children: Vec<(f64, u64, u32)>,
        next: usize,
    }
    let mut marks = Vec::with_capacity(law.max_children());
    let mut pool: Vec<Vec<(f64, u64, u32)>> = Vec::new();
    let mut open = |key: u64, v: f64, vbar: f64, pool: &mut Vec<Vec<(f64, u64, u32)>>| {
        law.sample_marks(&mut rng_from_key(key), &mut marks);
        let mut children = pool.pop().unwrap_or_default();
        children.clear();
        children.extend(marks.iter().enumerate().map(|(r, a)| (v - a.ln(), child_key(key, r as u32), r as u32)));
        children.sort_by(|a, b| a.0.total_cmp(&b.0));
        Frame { vbar, children, next: 0 }
    };
    let mut stack = vec![open(root_key(seed, 0), 0.0, f64::NEG_INFINITY, &mut pool)];
    let mut explored = 0u64;
    let mut best = f64::INFINITY;
    let mut best_ranks = Vec::new();
    let mut best_potentials = Vec::new();
    while let Some(top) = stack.last_mut() {
        if top.next == top.children.len() {
            let frame = stack.pop().expect("nonempty stack");
            pool.push(frame.children);
            continue;
        }
        let (cv, ckey, _) = top.children[top.next];
        top.next += 1;
        let cvbar = top.vbar.max(cv);
        explored += 1;
        if explored > budget {
            return Err(Error::BudgetExceeded { budget });
        }
        if cvbar > threshold || cvbar >= best {
            continue;
        }
        if stack.len() as u32 == n {
            best = cvbar;
            best_ranks = stack.iter().map(|f| f.children[f.next - 1].2).collect();
            best_potentials = stack.iter().map(|f| f.children[f.next - 1].0).collect();
            continue;
        }
        let frame = open(ckey, cv, cvbar, &mut pool);
        stack.push(frame);
    }
    if best.is_finite() {
        Ok(MinVbarOutcome::Found(RaySummary {
            depth: n,
            min_vbar: best,
            argmin_path: Vec::new(),
            argmin_ranks: best_ranks,
            argmin_potentials: best_potentials,
            explored_count: explored,
        }))
    } else {
        Ok(MinVbarOutcome::ThresholdExceeded { explored_count: explored })
    }
}

/// [`min_vbar_pruned`] with thresholds `step, 2 step, ...` up to `threshold`.
/// Each round only explores vertices below the current threshold, so the cost
/// is close to that of a search started with the optimum as threshold.
/// `explored_count` and `budget` cover all rounds.
pub fn min_vbar_deepening(
    law: &OffspringLaw,
    n: u32,
    threshold: f64,
    step: f64,
    seed: u64,
    budget: u64,
) -> Result<MinVbarOutcome> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let mut spent = 0u64;
    let mut level = step.min(threshold);
    loop {
        let outcome = min_vbar_pruned(law, n, level, seed, budget - spent).map_err(|e| match e {
            Error::BudgetExceeded { .. } => Error::BudgetExceeded { budget },
            other => other,
        })?;
        match outcome {
            MinVbarOutcome::Found(mut r) => {
                r.explored_count += spent;
                return Ok(MinVbarOutcome::Found(r));
            }
            MinVbarOutcome::ThresholdExceeded { explored_count } => {
                spent += explored_count;
                if level >= threshold {
                    return Ok(MinVbarOutcome::ThresholdExceeded { explored_count: spent });
                }
                level = (level + step).min(threshold);
            }
        }
    }
}

/// On-disk form: header plus `(parent, a_mark, expanded)` records in
/// depth-first order, parents referring to record positions.
#[derive(Debug, Serialize, Deserialize)]
struct TreeFile {
    format: String,
    version: u32,
    law: OffspringLaw,
    seed: u64,
    attempt: u32,
    depth_cap: u32,
    vertices: Vec<(i64, f64, bool)>,
}

const TREE_FORMAT: &str = "rwre-marked-tree";

impl TreeFile {
    fn from_tree(tree: &MarkedTree) -> Self {
        let mut records = Vec::with_capacity(tree.len());
        let mut stack = vec![(0u32, -1i64)];
        while let Some((x, parent_pos)) = stack.pop() {
            let pos = records.len() as i64;
            let v = tree.vertex(x);
            records.push((parent_pos, v.a_mark, v.expanded));
            stack.extend(tree.children(x).rev().map(|c| (c, pos)));
        }
        TreeFile {
            format: TREE_FORMAT.into(),
            version: 1,
            law: tree.law.clone(),
            seed: tree.seed,
            attempt: tree.attempt,
            depth_cap: tree.depth_cap,
            vertices: records,
        }
    }

    fn into_tree(self) -> Result<MarkedTree> {
        if self.format != TREE_FORMAT || self.version != 1 {
            return Err(Error::Serialization(format!("unsupported tree file {} v{}", self.format, self.version)));
        }
        self.law.validate()?;
        let m = self.vertices.len();
        if m == 0 || self.vertices[0].0 != -1 {
            return Err(Error::Serialization("first record must be the root".into()));
        }
        let mut kids: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (pos, &(parent, _, _)) in self.vertices.iter().enumerate().skip(1) {
            if parent < 0 || parent as usize >= pos {
                return Err(Error::Serialization(format!("record {pos} has invalid parent {parent}")));
            }
            kids[parent as usize].push(pos);
        }
        let mut tree = MarkedTree::with_attempt(self.law, self.seed, self.attempt, self.depth_cap);
        let mut queue = std::collections::VecDeque::from([(0usize, 0u32)]);
        while let Some((pos, x)) = queue.pop_front() {
            if self.vertices[pos].2 {
                let marks: Vec<f64> = kids[pos].iter().map(|&c| self.vertices[c].1).collect();
                let range = tree.attach_children(x, &marks);
                queue.extend(kids[pos].iter().copied().zip(range));
            } else if !kids[pos].is_empty() {
                return Err(Error::Serialization(format!("record {pos} has children but is not expanded")));
            }
        }
        Ok(tree)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::Atom;

    fn table(a: &[f64]) -> OffspringLaw {
        OffspringLaw::DiscreteTable { atoms: vec![Atom { prob: 1.0, a_values: a.to_vec() }] }
    }

    #[test]
    fn unary_path_has_zero_potential() {
        let t = sample_tree(&table(&[1.0]), 5, 1, ExtinctionPolicy::AllowExtinct).unwrap();
        assert_eq!(t.len(), 6);
        assert!(t.vertices().iter().all(|v| v.v == 0.0));
    }

    #[test]
    fn binary_half_tree_potentials() {
        let t = sample_tree(&table(&[0.5, 0.5]), 3, 1, ExtinctionPolicy::default()).unwrap();
        assert_eq!(t.len(), 15);
        for v in t.vertices() {
            assert!((v.v - v.depth as f64 * std::f64::consts::LN_2).abs() < 1e-12);
        }
        let row = t.transition_row(Site::Vertex(1));
        assert_eq!(row.iter().map(|r| r.1).collect::<Vec<_>>(), vec![0.5, 0.25, 0.25]);
    }

    #[test]
    fn unary_root_row() {
        let t = sample_tree(&table(&[1.0]), 3, 1, ExtinctionPolicy::AllowExtinct).unwrap();
        assert_eq!(t.transition_row(Site::Vertex(0)), vec![(Site::ParentOfRoot, 0.5), (Site::Vertex(1), 0.5)]);
        assert_eq!(t.transition_row(Site::ParentOfRoot), vec![(Site::Vertex(0), 1.0)]);
    }

    #[test]
    fn extinct_law_exhausts_budget() {
        let law = OffspringLaw::DiscreteTable {
            atoms: vec![Atom { prob: 0.5, a_values: vec![] }, Atom { prob: 0.5, a_values: vec![1.0, 1.0, 1.0] }],
        };
        let t = sample_tree(&law, 4, 3, ExtinctionPolicy::RejectUntilDepth { max_attempts: 50 }).unwrap();
        assert_eq!(t.max_depth(), 4);
        let doomed = OffspringLaw::DiscreteTable {
            atoms: vec![Atom { prob: 0.99, a_values: vec![] }, Atom { prob: 0.01, a_values: vec![1.0; 200] }],
        };
        assert_eq!(
            sample_tree(&doomed, 3, 3, ExtinctionPolicy::RejectUntilDepth { max_attempts: 2 }),
            Err(Error::ExtinctionBudgetExceeded { attempts: 2 })
        );
    }

    #[test]
    fn pruned_search_trivial_cases() {
        match min_vbar_pruned(&table(&[1.0]), 1000, 1.0, 0, u64::MAX).unwrap() {
            MinVbarOutcome::Found(r) => {
                assert_eq!(r.min_vbar, 0.0);
                assert_eq!(r.explored_count, 1000);
                assert_eq!(r.argmin_ranks.len(), 1000);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            min_vbar_pruned(&table(&[0.5, 0.5]), 10, 1.0, 0, u64::MAX).unwrap(),
            MinVbarOutcome::ThresholdExceeded { .. }
        ));
        assert_eq!(min_vbar_pruned(&table(&[1.0, 1.0]), 30, 1.0, 0, 10), Err(Error::BudgetExceeded { budget: 10 }));
    }

    #[test]
    fn json_roundtrip_preserves_lazy_state() {
        let law = OffspringLaw::LogNormal { n_children: 2, mu: -1.0, s2: 1.0 };
        let mut t = MarkedTree::lazy(law, 9, 6).unwrap();
        t.expand(0);
        t.expand(2);
        let back = MarkedTree::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
    }
}
