//! Dual certificates and the bounds they give.
//!
//! Any point of the simplex is a feasible dual point, so its objective
//! upper-bounds the optimal normalization value. For tree formulas the
//! weights `μ_ℓ ∝ 2^{-depth(ℓ)/2}` give
//! `(1 + Σ_I 2^{-depth/2}) / Σ_L 2^{-depth/2} < 1 + √2`; for general
//! refutations the same recipe runs on effective depths.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::boolean::CnfFormula;
use crate::normopt::{dual_objective, DualWeights, NormProblem};
use crate::resolution::{check_resolution, occurrence_stats, ProofNode, ResolutionTree};
use crate::tree::{BinaryTree, Node};
use crate::{Error, Result};

const SQRT2_MINUS_1: f64 = std::f64::consts::SQRT_2 - 1.0;

fn half_power(depth: u32) -> f64 {
    2f64.powf(-(depth as f64) / 2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeCertificate {
    /// Indexed by leaf, which is also the clause index of `F_T`.
    pub mu: DualWeights,
    pub bound: f64,
}

pub fn tree_certificate(t: &BinaryTree) -> TreeCertificate {
    let raw: Vec<f64> = t.leaf_depths().into_iter().map(half_power).collect();
    TreeCertificate {
        mu: DualWeights::normalized(raw).expect("positive weights"),
        bound: tree_dual_bound(t),
    }
}

/// `(Σ_L 2^{-depth/2}, Σ_I 2^{-depth/2})`.
pub fn depth_sums(t: &BinaryTree) -> (f64, f64) {
    let leaves = t.leaf_depths().into_iter().map(half_power).sum();
    let internal = t.internal_depths().into_iter().map(half_power).sum();
    (leaves, internal)
}

pub fn tree_dual_bound(t: &BinaryTree) -> f64 {
    let (l, i) = depth_sums(t);
    (1.0 + i) / l
}

/// `(1 + X) / (1 + (√2 - 1) X)`, increasing in `X` towards `1 + √2`.
pub fn closed_form_bound(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "closed-form bound needs X > 0, got {x}"
        )));
    }
    Ok((1.0 + x) / (1.0 + SQRT2_MINUS_1 * x))
}

/// `Σ_L 2^{-depth/2} = 1 + (√2 - 1) Σ_I 2^{-depth/2}` to 1e-10.
pub fn l_i_identity_check(t: &BinaryTree) -> bool {
    let (l, i) = depth_sums(t);
    (l - (1.0 + SQRT2_MINUS_1 * i)).abs() <= 1e-10
}

/// Injective map from internal vertices to leaves below them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathPartitionMap {
    /// `f[var - 1]`: leaf index of internal vertex `var`.
    pub f: Vec<usize>,
    /// Path length ending at each leaf; `None` for the unmapped leaf.
    pub p: Vec<Option<u32>>,
    pub unmapped: usize,
}

impl PathPartitionMap {
    /// `2^{p_f(ℓ)/2}`, zero for the unmapped leaf.
    pub fn weight(&self, leaf: usize) -> f64 {
        self.p[leaf].map_or(0.0, |p| 2f64.powf(p as f64 / 2.0))
    }

    /// Structural invariants: injective, `f(i)` below `i`, path lengths
    /// match depths, and the unmapped leaf ends a root path.
    pub fn is_valid_for(&self, t: &BinaryTree) -> bool {
        if self.f.len() != t.n_internal() || self.p.len() != t.n_leaves() {
            return false;
        }
        let mut hit = vec![false; t.n_leaves()];
        for (k, &leaf) in self.f.iter().enumerate() {
            let v = t.internal_nodes()[k];
            if leaf >= hit.len() || hit[leaf] || !t.is_below(leaf, v) {
                return false;
            }
            hit[leaf] = true;
            if self.p[leaf] != Some(t.leaf_depth(leaf) - t.depth(v)) {
                return false;
            }
        }
        let unmapped: Vec<usize> = (0..hit.len()).filter(|&l| !hit[l]).collect();
        if unmapped != [self.unmapped] || self.p[self.unmapped].is_some() {
            return false;
        }
        // Root paths follow the incoming direction at every vertex, so their
        // leaves are exactly those whose path length equals their depth.
        let root_leaf = self.f[t.node_var(t.root()).expect("internal root") as usize - 1];
        let other_side = |leaf: usize| match t.node(t.root()) {
            Node::Internal { left, .. } => t.leaf_range(left).contains(&leaf),
            Node::Leaf { .. } => false,
        };
        other_side(root_leaf) != other_side(self.unmapped)
    }
}

/// Leaf index and path origin for every leaf, sampled top-down. Writes
/// `origin[leaf]` as a node id; the two root paths end at the leaves whose
/// origin is the root.
fn sample_origins<R: Rng + ?Sized>(t: &BinaryTree, rng: &mut R, origin: &mut [usize], stack: &mut Vec<(usize, usize)>) {
    let root = t.root();
    stack.clear();
    if let Node::Internal { left, right, .. } = t.node(root) {
        stack.push((left, root));
        stack.push((right, root));
    }
    while let Some((v, from)) = stack.pop() {
        match t.node(v) {
            Node::Leaf { leaf } => origin[leaf] = from,
            Node::Internal { left, right, .. } => {
                if rng.gen::<bool>() {
                    stack.push((left, from));
                    stack.push((right, v));
                } else {
                    stack.push((left, v));
                    stack.push((right, from));
                }
            }
        }
    }
}

/// One draw: each non-root internal vertex continues its incoming path
/// left or right uniformly and starts a new path the other way; of the two
/// paths leaving the root one is dropped uniformly.
pub fn sample_path_partition<R: Rng + ?Sized>(t: &BinaryTree, rng: &mut R) -> Result<PathPartitionMap> {
    if t.n_internal() == 0 {
        return Err(Error::InvalidTree("path partitions need an internal vertex".into()));
    }
    let mut origin = vec![0; t.n_leaves()];
    sample_origins(t, rng, &mut origin, &mut Vec::new());
    let root = t.root();
    let root_leaves: Vec<usize> = (0..origin.len()).filter(|&l| origin[l] == root).collect();
    let drop = rng.gen_range(0..2);
    let unmapped = root_leaves[drop];
    let mut f = vec![0; t.n_internal()];
    let mut p = vec![None; t.n_leaves()];
    for (leaf, &o) in origin.iter().enumerate() {
        if leaf == unmapped {
            continue;
        }
        let var = t.node_var(o).expect("paths start at internal vertices");
        f[var as usize - 1] = leaf;
        p[leaf] = Some(t.leaf_depth(leaf) - t.depth(o));
    }
    Ok(PathPartitionMap { f, p, unmapped })
}

/// Empirical per-leaf means of `2^{p_f(ℓ)/2}` and the worst violation of
/// `Σ_I 2^{-depth/2} = Σ_L 2^{-depth/2} 2^{p_f/2}` over all draws.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPartitionEstimate {
    pub samples: u64,
    pub mean: Vec<f64>,
    pub max_identity_error: f64,
}

/// `(1 - 2^{-depth/2})(1 + √2)`.
pub fn path_weight_expectation(depth: u32) -> f64 {
    (1.0 - half_power(depth)) * crate::ONE_PLUS_SQRT2
}

const SHARD: u64 = 1 << 16;

fn shard_rng(seed: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    rng
}

/// Sharded over threads; shard `s` uses stream `s` of the seeded generator
/// and partial sums are combined in shard order, so results do not depend
/// on the thread count.
pub fn estimate_path_partition(t: &BinaryTree, samples: u64, seed: u64) -> Result<PathPartitionEstimate> {
    if t.n_internal() == 0 {
        return Err(Error::InvalidTree("path partitions need an internal vertex".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let nl = t.n_leaves();
    let depth: Vec<u32> = t.leaf_depths();
    let origin_depth: Vec<u32> = (0..t.node_count()).map(|v| t.depth(v)).collect();
    let leaf_scale: Vec<f64> = depth.iter().map(|&d| half_power(d)).collect();
    let lhs = depth_sums(t).1;
    let root = t.root();
    let max_depth = depth.iter().copied().max().unwrap_or(0);
    let power: Vec<f64> = (0..=max_depth).map(|j| 2f64.powf(j as f64 / 2.0)).collect();
    let shards = samples.div_ceil(SHARD);
    let partials: Vec<(Vec<f64>, f64)> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = shard_rng(seed, s);
            let count = SHARD.min(samples - s * SHARD);
            let mut sums = vec![0.0; nl];
            let mut worst = 0.0f64;
            let mut origin = vec![0; nl];
            let mut stack = Vec::new();
            let mut weights = vec![0.0; nl];
            for _ in 0..count {
                sample_origins(t, &mut rng, &mut origin, &mut stack);
                let drop = rng.gen_range(0..2);
                let mut root_paths = 0;
                let mut rhs = 0.0;
                for leaf in 0..nl {
                    let o = origin[leaf];
                    let dropped = o == root && {
                        root_paths += 1;
                        root_paths - 1 == drop
                    };
                    weights[leaf] = if dropped {
                        0.0
                    } else {
                        power[(depth[leaf] - origin_depth[o]) as usize]
                    };
                    rhs += leaf_scale[leaf] * weights[leaf];
                }
                for (s, w) in sums.iter_mut().zip(&weights) {
                    *s += w;
                }
                worst = worst.max((rhs - lhs).abs());
            }
            (sums, worst)
        })
        .collect();
    let mut mean = vec![0.0; nl];
    let mut max_identity_error = 0.0f64;
    for (sums, worst) in partials {
        mean.iter_mut().zip(sums).for_each(|(m, s)| *m += s);
        max_identity_error = max_identity_error.max(worst);
    }
    mean.iter_mut().for_each(|m| *m /= samples as f64);
    Ok(PathPartitionEstimate {
        samples,
        mean,
        max_identity_error,
    })
}

/// Cap applied to `X` when `k` is unbounded.
pub const GEOM_CAP: u32 = 64;

/// `X ~ Geom(1/2)` on `{1, 2, ...}`, capped at 64.
fn geometric<R: Rng + ?Sized>(rng: &mut R) -> u32 {
    (rng.gen::<u64>().trailing_zeros() + 1).min(GEOM_CAP)
}

fn effective_cap(k: Option<u32>) -> u32 {
    k.map_or(GEOM_CAP, |k| k.min(GEOM_CAP))
}

/// Exact mean and variance of `√2^{X ∧ k}` (with the cap for `k = None`).
pub fn geom_exact_moments(k: Option<u32>) -> (f64, f64) {
    let c = effective_cap(k);
    if c == 0 {
        return (1.0, 0.0);
    }
    let (mut m1, mut m2) = (0.0, 0.0);
    for j in 1..c {
        let p = 2f64.powi(-(j as i32));
        m1 += p * 2f64.powf(j as f64 / 2.0);
        m2 += p * 2f64.powi(j as i32);
    }
    let tail = 2f64.powi(-(c as i32 - 1));
    m1 += tail * 2f64.powf(c as f64 / 2.0);
    m2 += tail * 2f64.powi(c as i32);
    (m1, (m2 - m1 * m1).max(0.0))
}

/// `2^{-k/2} + Σ_{a=1}^k 2^{-a/2}` for finite `k`, `1 + √2` otherwise.
pub fn geom_target(k: Option<u32>) -> f64 {
    k.map_or(crate::ONE_PLUS_SQRT2, crate::complete_tree_value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeomEstimate {
    pub mean: f64,
    pub target: f64,
    /// Analytic standard error of the mean.
    pub std_error: f64,
    pub samples: u64,
}

/// Monte Carlo estimate of `E[√2^{X ∧ k}]`, sharded like
/// [`estimate_path_partition`].
pub fn geom_identity_estimate(k: Option<u32>, samples: u64, seed: u64) -> Result<GeomEstimate> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let cap = effective_cap(k);
    let values: Vec<f64> = (0..=cap).map(|j| 2f64.powf(j as f64 / 2.0)).collect();
    let shards = samples.div_ceil(SHARD);
    let partial: Vec<f64> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = shard_rng(seed, s);
            let count = SHARD.min(samples - s * SHARD);
            (0..count).map(|_| values[geometric(&mut rng).min(cap) as usize]).sum()
        })
        .collect();
    let mean = partial.iter().sum::<f64>() / samples as f64;
    let (_, var) = geom_exact_moments(k);
    Ok(GeomEstimate {
        mean,
        target: geom_target(k),
        std_error: (var / samples as f64).sqrt(),
        samples,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveDepths {
    /// `d(C)` per clause; `+∞` for clauses labelling no leaf.
    pub clause: Vec<f64>,
    /// `d(z)` per pivot variable.
    pub var: BTreeMap<u32, f64>,
}

/// `2^{-d(C)} = Σ_{ℓ ∈ occ(C)} 2^{-depth(ℓ)}`, and likewise over the
/// resolution steps on each pivot.
pub fn effective_depths(f: &CnfFormula, proof: &ResolutionTree) -> Result<EffectiveDepths> {
    let stats = occurrence_stats(f, proof)?;
    let mass = |ds: &mut dyn Iterator<Item = u32>| -> f64 {
        let m: f64 = ds.map(|d| 2f64.powi(-(d as i32))).sum();
        if m > 0.0 {
            -m.log2()
        } else {
            f64::INFINITY
        }
    };
    let clause = stats
        .occ
        .iter()
        .map(|leaves| mass(&mut leaves.iter().map(|&l| stats.leaf_depths[l])))
        .collect();
    let var = stats
        .pivot_depths
        .iter()
        .map(|(&z, ds)| (z, mass(&mut ds.iter().copied())))
        .collect();
    Ok(EffectiveDepths { clause, var })
}

/// `μ_C ∝ 2^{-d(C)/2}`; every clause must label a leaf.
pub fn conjecture_certificate(f: &CnfFormula, proof: &ResolutionTree) -> Result<DualWeights> {
    let d = effective_depths(f, proof)?;
    certificate_from_depths(&d)
}

fn certificate_from_depths(d: &EffectiveDepths) -> Result<DualWeights> {
    if let Some(c) = d.clause.iter().position(|v| v.is_infinite()) {
        return Err(Error::UnusedClause(c + 1));
    }
    DualWeights::normalized(d.clause.iter().map(|&v| 2f64.powf(-v / 2.0)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjectureValue {
    /// `(1 + Σ_z √(Σ_{C ∋ z} 2^{-d(C)})) / Σ_C 2^{-d(C)/2}`.
    pub value: f64,
    /// `(1 + Σ_z 2^{-d(z)/2}) / Σ_C 2^{-d(C)/2}`.
    pub weak_value: f64,
    /// Dual objective of the NAE conversion at the certificate.
    pub nae_objective: f64,
}

impl ConjectureValue {
    pub fn forms_agree(&self) -> bool {
        (self.value - self.nae_objective).abs() <= 1e-10
    }
}

pub fn conjecture_value(f: &CnfFormula, proof: &ResolutionTree) -> Result<ConjectureValue> {
    let d = effective_depths(f, proof)?;
    let mu = certificate_from_depths(&d)?;
    let denom: f64 = d.clause.iter().map(|&v| 2f64.powf(-v / 2.0)).sum();
    let mut by_var: BTreeMap<u32, f64> = BTreeMap::new();
    for (c, clause) in f.clauses().iter().enumerate() {
        for z in clause.vars() {
            *by_var.entry(z).or_default() += 2f64.powf(-d.clause[c]);
        }
    }
    let value = (1.0 + by_var.values().map(|s| s.sqrt()).sum::<f64>()) / denom;
    let weak_value = (1.0 + d.var.values().map(|&v| 2f64.powf(-v / 2.0)).sum::<f64>()) / denom;
    let nae_objective = dual_objective(&NormProblem::from_nae(&f.to_nae())?, &mu);
    Ok(ConjectureValue {
        value,
        weak_value,
        nae_objective,
    })
}

/// The clauses labelling proof leaves, in their original order, with the
/// proof re-indexed onto them; also returns the kept original indices.
pub fn restrict_to_used(f: &CnfFormula, proof: &ResolutionTree) -> Result<(CnfFormula, ResolutionTree, Vec<usize>)> {
    check_resolution(f, proof).into_result()?;
    let mut kept: Vec<usize> = proof.leaf_clauses();
    kept.sort_unstable();
    kept.dedup();
    let mut new_index = vec![usize::MAX; f.len()];
    for (k, &c) in kept.iter().enumerate() {
        new_index[c] = k;
    }
    let clauses = kept.iter().map(|&c| f.clauses()[c].clone()).collect();
    let g = CnfFormula::new(f.n_vars(), clauses)?;
    fn go(t: &ResolutionTree, id: usize, idx: &[usize]) -> ResolutionTree {
        match t.node(id) {
            ProofNode::Leaf { clause } => ResolutionTree::leaf(idx[clause]),
            ProofNode::Res { pivot, left, right } => {
                ResolutionTree::resolve(pivot, go(t, left, idx), go(t, right, idx))
            }
        }
    }
    let p = go(proof, proof.root(), &new_index);
    Ok((g, p, kept))
}
