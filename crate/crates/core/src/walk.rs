//! Quenched simulation of the walk on a fixed tree.

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::RateEstimate;
use crate::law::RegimeReport;
use crate::replicas::{chunk_ranges, map_replicas};
use crate::rng::{mix, replica_seed, rng_from_key, SimRng};
use crate::tree::{MarkedTree, Site};

const WALK_STREAM: u64 = 0x57A1_4B00;
const MC_CHUNKS: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// Vertices at the depth cap reflect to their parent.
    ReflectAtParentOfRoot,
    /// The run stops when the walk first reaches the depth cap.
    AbsorbAtDepthCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps_taken: u64,
    /// `(k, max_{j <= k} |X_j|)` at the checkpoints `ceil(1.1^j)` and at the
    /// final step. The parent of the root counts as depth 0.
    pub max_depth_curve: Vec<(u64, u32)>,
    /// `tau[k - 1]` is the first step at which the walk stands on level `k`.
    pub tau: Vec<u64>,
    pub returns_to_root: u64,
    pub current: Site,
    pub depth_cap_hit: bool,
    pub positions: Option<Vec<Site>>,
}

impl Trajectory {
    pub fn max_depth(&self) -> u32 {
        self.max_depth_curve.last().map_or(0, |c| c.1)
    }
}

/// Per-vertex alias tables over `(parent, children...)`, built on first use.
#[derive(Default)]
pub struct AliasCache {
    tables: Vec<Option<WeightedAliasIndex<f64>>>,
}

impl AliasCache {
    /// Samples the next site. `x` must be expanded if it has children.
    pub fn step<R: Rng + ?Sized>(&mut self, tree: &MarkedTree, site: Site, rng: &mut R) -> Site {
        let x = match site {
            Site::ParentOfRoot => return Site::Vertex(0),
            Site::Vertex(x) => x,
        };
        let children = tree.children(x);
        let parent = if x == 0 { Site::ParentOfRoot } else { Site::Vertex(tree.vertex(x).parent) };
        if children.is_empty() {
            return parent;
        }
        if self.tables.len() <= x as usize {
            self.tables.resize_with(tree.len(), || None);
        }
        let table = self.tables[x as usize].get_or_insert_with(|| {
            let mut w = Vec::with_capacity(children.len() + 1);
            w.push(1.0);
            w.extend(children.clone().map(|c| tree.vertex(c).a_mark));
            WeightedAliasIndex::new(w).expect("transition weights are positive and finite")
        });
        match table.sample(rng) {
            0 => parent,
            i => Site::Vertex(children.start + i as u32 - 1),
        }
    }
}

fn depth(tree: &MarkedTree, s: Site) -> u32 {
    match s {
        Site::ParentOfRoot => 0,
        Site::Vertex(x) => tree.vertex(x).depth,
    }
}

/// Step counts `ceil(1.1^j)` up to `n`, without repeats.
pub fn checkpoints(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut j = 0;
    loop {
        let k = 1.1f64.powi(j).ceil() as u64;
        j += 1;
        if k > n {
            break;
        }
        if out.last() != Some(&k) {
            out.push(k);
        }
    }
    out
}

/// Runs the walk from the root for `n_steps` steps, generating vertices of a
/// lazy tree as they are reached.
pub fn run_walk(
    tree: &mut MarkedTree,
    n_steps: u64,
    seed: u64,
    policy: BoundaryPolicy,
    record_positions: bool,
) -> Trajectory {
    let mut rng = rng_from_key(mix(seed, WALK_STREAM));
    let mut cache = AliasCache::default();
    let cps = checkpoints(n_steps);
    let mut next_cp = cps.iter().copied().peekable();
    let mut site = Site::Vertex(0);
    let mut traj = Trajectory {
        steps_taken: 0,
        max_depth_curve: vec![(0, 0)],
        tau: Vec::new(),
        returns_to_root: 0,
        current: site,
        depth_cap_hit: false,
        positions: record_positions.then(|| vec![site]),
    };
    let cap = tree.depth_cap();
    let mut max_d = 0;
    for k in 1..=n_steps {
        if let Site::Vertex(x) = site {
            tree.expand(x);
        }
        site = cache.step(tree, site, &mut rng);
        traj.steps_taken = k;
        if let Some(p) = traj.positions.as_mut() {
            p.push(site);
        }
        if site == Site::Vertex(0) {
            traj.returns_to_root += 1;
        }
        let d = depth(tree, site);
        if d > max_d {
            max_d = d;
            traj.tau.push(k);
            if d >= cap {
                traj.depth_cap_hit = true;
                if policy == BoundaryPolicy::AbsorbAtDepthCap {
                    break;
                }
            }
        }
        if next_cp.peek() == Some(&k) {
            next_cp.next();
            traj.max_depth_curve.push((k, max_d));
        }
    }
    if traj.max_depth_curve.last().map(|c| c.0) != Some(traj.steps_taken) {
        traj.max_depth_curve.push((traj.steps_taken, max_d));
    }
    traj.current = site;
    traj
}

/// Default depth cap: four times the predicted maximal displacement.
pub fn default_depth_cap(report: &RegimeReport, n_steps: u64) -> u32 {
    let c = report.constants.map_or(1.0, |c| c.displacement_constant);
    let l = (n_steps.max(2) as f64).ln();
    ((4.0 * c * l.powi(3)).ceil() as u32).max(16)
}

fn require_level(tree: &MarkedTree, n: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("level must be at least 1".into()));
    }
    if !tree.complete_to(n) {
        return Err(Error::DepthUnavailable { requested: n, available: tree.max_depth() });
    }
    Ok(())
}

/// Fraction of walks from the root that reach level `n` before the parent
/// of the root.
pub fn estimate_beta_mc(tree: &MarkedTree, n: u32, excursions: u64, seed: u64) -> Result<RateEstimate> {
    require_level(tree, n)?;
    let hits: u64 = map_replicas(MC_CHUNKS, |c| {
        let range = chunk_ranges(excursions, MC_CHUNKS).get(c as usize).cloned().unwrap_or(0..0);
        let mut rng: SimRng = rng_from_key(replica_seed(seed, c));
        let mut cache = AliasCache::default();
        let mut hits = 0u64;
        for _ in range {
            let mut site = Site::Vertex(0);
            loop {
                site = cache.step(tree, site, &mut rng);
                match site {
                    Site::ParentOfRoot => break,
                    Site::Vertex(x) if tree.vertex(x).depth == n => {
                        hits += 1;
                        break;
                    }
                    _ => {}
                }
            }
        }
        hits
    })
    .into_iter()
    .sum();
    Ok(RateEstimate::proportion(hits, excursions))
}

/// Mean number of visits to each target during an excursion from the root
/// (time 0 included, stopped at the first return to the root).
pub fn excursion_visits_mc(tree: &MarkedTree, targets: &[u32], excursions: u64, seed: u64) -> Vec<RateEstimate> {
    let mut slot: std::collections::HashMap<u32, Vec<usize>> = std::collections::HashMap::new();
    for (i, &x) in targets.iter().enumerate() {
        slot.entry(x).or_default().push(i);
    }
    let parts = map_replicas(MC_CHUNKS, |c| {
        let range = chunk_ranges(excursions, MC_CHUNKS).get(c as usize).cloned().unwrap_or(0..0);
        let mut rng: SimRng = rng_from_key(replica_seed(seed, c));
        let mut cache = AliasCache::default();
        let mut sum = vec![0.0; targets.len()];
        let mut sumsq = vec![0.0; targets.len()];
        let mut count = vec![0u64; targets.len()];
        let mut nonzero = vec![0u64; targets.len()];
        for _ in range {
            count.iter_mut().for_each(|c| *c = 0);
            let mut site = Site::Vertex(0);
            loop {
                if let Site::Vertex(x) = site {
                    if let Some(slots) = slot.get(&x) {
                        slots.iter().for_each(|&i| count[i] += 1);
                    }
                }
                site = cache.step(tree, site, &mut rng);
                if site == Site::Vertex(0) {
                    break;
                }
            }
            for i in 0..targets.len() {
                let c = count[i] as f64;
                sum[i] += c;
                sumsq[i] += c * c;
                nonzero[i] += u64::from(count[i] > 0);
            }
        }
        (sum, sumsq, nonzero)
    });
    let e = excursions as f64;
    (0..targets.len())
        .map(|i| {
            let s: f64 = parts.iter().map(|p| p.0[i]).sum();
            let s2: f64 = parts.iter().map(|p| p.1[i]).sum();
            let nz: u64 = parts.iter().map(|p| p.2[i]).sum();
            let mean = s / e;
            let var = ((s2 / e - mean * mean) * e / (e - 1.0)).max(0.0);
            RateEstimate {
                value: mean,
                se: (var / e).sqrt(),
                reps: excursions,
                hits: nz,
                rate: None,
                predicted_rate: None,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub replica: usize,
    pub k: u64,
    pub max_depth: u32,
    pub prediction: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
    /// Log-log slope of the mean max-depth curve over its last decade.
    pub late_slope: Option<f64>,
    /// Set when the late slope indicates polynomial growth, i.e. no
    /// `(log k)^3` law.
    pub diverges: bool,
}

/// Slope above which growth is treated as polynomial.
pub const POLYNOMIAL_SLOPE: f64 = 0.4;

/// Compares checkpointed max depths with `constant * (log k)^3`.
pub fn displacement_scaling(trajectories: &[Trajectory], report: &RegimeReport) -> ScalingTable {
    let c = report.constants.map_or(f64::NAN, |c| c.displacement_constant);
    let mut rows = Vec::new();
    for (replica, t) in trajectories.iter().enumerate() {
        for &(k, d) in &t.max_depth_curve {
            if k < 2 {
                continue;
            }
            let prediction = c * (k as f64).ln().powi(3);
            rows.push(ScalingRow { replica, k, max_depth: d, prediction, ratio: d as f64 / prediction });
        }
    }
    let late_slope = late_slope(trajectories);
    ScalingTable { rows, late_slope, diverges: late_slope.is_some_and(|s| s > POLYNOMIAL_SLOPE) }
}

fn late_slope(trajectories: &[Trajectory]) -> Option<f64> {
    let first = trajectories.first()?;
    let kmax = first.steps_taken as f64;
    let points: Vec<(f64, f64)> = first
        .max_depth_curve
        .iter()
        .enumerate()
        .filter(|(_, &(k, _))| k >= 1 && (k as f64) >= kmax / 10.0)
        .map(|(i, &(k, _))| {
            let mean: f64 =
                trajectories.iter().filter_map(|t| t.max_depth_curve.get(i).map(|c| c.1 as f64)).sum::<f64>()
                    / trajectories.len() as f64;
            ((k as f64).ln(), mean.max(1.0).ln())
        })
        .collect();
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Displacement constant implied by a decay rate `c` of
/// `-log rho_n ~ c n^(1/3)`: the walk needs `e^{c n^(1/3)}` steps to reach
/// depth `n`, so `max |X_k| ~ (log k)^3 / c^3`.
pub fn displacement_constant_from_rate(c: f64) -> f64 {
    1.0 / (c * c * c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::{Atom, OffspringLaw};
    use crate::tree::{sample_tree, ExtinctionPolicy};

    fn unary() -> OffspringLaw {
        OffspringLaw::DiscreteTable { atoms: vec![Atom { prob: 1.0, a_values: vec![1.0] }] }
    }

    #[test]
    fn zero_steps() {
        let mut t = MarkedTree::lazy(unary(), 0, 10).unwrap();
        let tr = run_walk(&mut t, 0, 1, BoundaryPolicy::ReflectAtParentOfRoot, false);
        assert_eq!(tr.max_depth(), 0);
        assert_eq!(tr.current, Site::Vertex(0));
        assert_eq!(tr.steps_taken, 0);
    }

    #[test]
    fn checkpoints_are_distinct_and_geometric() {
        let c = checkpoints(1000);
        assert_eq!(&c[..4], &[1, 2, 3, 4]);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        assert!(*c.last().unwrap() <= 1000);
    }

    #[test]
    fn absorb_stops_at_cap() {
        let mut t = MarkedTree::lazy(unary(), 0, 5).unwrap();
        let tr = run_walk(&mut t, 1_000_000, 3, BoundaryPolicy::AbsorbAtDepthCap, false);
        assert!(tr.depth_cap_hit);
        assert_eq!(tr.max_depth(), 5);
        assert_eq!(tr.steps_taken, *tr.tau.last().unwrap());
    }

    #[test]
    fn beta_mc_requires_positive_level() {
        let t = sample_tree(&unary(), 4, 0, ExtinctionPolicy::AllowExtinct).unwrap();
        assert!(estimate_beta_mc(&t, 0, 10, 0).is_err());
    }

    #[test]
    fn rate_conversion() {
        let sigma2 = 2.0 * std::f64::consts::LN_2;
        let pi2 = std::f64::consts::PI.powi(2);
        let c = (3.0 * pi2 * sigma2 / 8.0).cbrt();
        let alpha = 1.5 * pi2 * sigma2;
        assert!((displacement_constant_from_rate(c) - 4.0 / alpha).abs() < 1e-14);
    }
}
