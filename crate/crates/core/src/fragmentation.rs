//! Ewens fragmentation trees.
//!
//! A node of mass `k ≥ 2` splits its remaining mass `k - 1` into children
//! according to an independent Ewens(k - 1, θ) partition; mass-1 nodes are
//! leaves. At θ = 2 the isomorphism class of the tree is Plancherel
//! distributed.
//!
//! Trees are stored in breadth-first order, so depths are nondecreasing
//! along the arena and every node's children occupy a contiguous id range.

use std::ops::Range;

use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::constants::{finite_mass_exponent_unchecked, ln_block_ratio, ln_gamma_pair};
use crate::error::{domain, Error, Result};
use crate::ewens::{crp_block_sizes, sequential_block_sizes, BlockSizes, Restaurant};
use crate::special::ln_gamma_unchecked;
use crate::trees::{canonicalize_parents, CanonicalTree};

pub type NodeRef = u32;

/// Arena capacity; node refs are 32-bit.
pub const MAX_NODES: u64 = 1 << 31;

const NO_PARENT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Node {
    parent: u32,
    first_child: u32,
    num_children: u32,
    depth: u32,
    mass: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MassTree {
    nodes: Vec<Node>,
}

/// One entry of the JSON node list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MassNodeRecord {
    pub id: NodeRef,
    pub parent: Option<NodeRef>,
    pub mass: u64,
    pub depth: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u64>,
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("theta must be a positive finite real, got {theta}")))
    }
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        return Err(domain("tree size n must be at least 1"));
    }
    if n > MAX_NODES {
        return Err(Error::SizeLimit { what: "tree size n", value: n, limit: MAX_NODES });
    }
    Ok(())
}

impl MassTree {
    /// Builds a tree top-down; `split(k)` returns the child masses of a node
    /// of mass `k ≥ 2`, nonincreasing and summing to `k - 1`.
    fn build(n: u64, mut split: impl FnMut(u64) -> Vec<u64>) -> MassTree {
        let mut nodes = Vec::with_capacity(n as usize);
        nodes.push(Node { parent: NO_PARENT, first_child: 0, num_children: 0, depth: 0, mass: n });
        let mut cursor = 0;
        while cursor < nodes.len() {
            let Node { mass, depth, .. } = nodes[cursor];
            if mass >= 2 {
                let kids = split(mass);
                let first = nodes.len() as u32;
                nodes[cursor].first_child = first;
                nodes[cursor].num_children = kids.len() as u32;
                for k in kids {
                    nodes.push(Node {
                        parent: cursor as u32,
                        first_child: 0,
                        num_children: 0,
                        depth: depth + 1,
                        mass: k,
                    });
                }
            }
            cursor += 1;
        }
        MassTree { nodes }
    }

    /// Rebuilds from arbitrary parent links and masses, checking every
    /// structural invariant. Children are reordered by nonincreasing mass.
    pub fn from_parts(parents: &[Option<usize>], masses: &[u64]) -> Result<MassTree> {
        let n = parents.len();
        if n == 0 || masses.len() != n {
            return Err(Error::MalformedTree("parents and masses must be nonempty and equal length".into()));
        }
        canonicalize_parents(parents)?;
        let root = parents.iter().position(Option::is_none).unwrap();
        let mut children = vec![Vec::new(); n];
        for (v, p) in parents.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(v);
            }
        }
        if masses[root] != n as u64 {
            return Err(Error::MalformedTree(format!(
                "root mass {} differs from node count {n}",
                masses[root]
            )));
        }
        for v in 0..n {
            if masses[v] == 0 {
                return Err(Error::MalformedTree(format!("node {v} has mass 0")));
            }
            let below: u64 = children[v].iter().map(|&c| masses[c]).sum();
            if below + 1 != masses[v] {
                return Err(Error::MalformedTree(format!(
                    "mass not conserved at node {v}: {} != 1 + {below}",
                    masses[v]
                )));
            }
            children[v].sort_by(|&a, &b| masses[b].cmp(&masses[a]));
        }
        let mut nodes = Vec::with_capacity(n);
        nodes.push(Node { parent: NO_PARENT, first_child: 0, num_children: 0, depth: 0, mass: masses[root] });
        let mut order = vec![root];
        let mut cursor = 0;
        while cursor < order.len() {
            let v = order[cursor];
            if !children[v].is_empty() {
                nodes[cursor].first_child = nodes.len() as u32;
                nodes[cursor].num_children = children[v].len() as u32;
            }
            let depth = nodes[cursor].depth + 1;
            for &c in &children[v] {
                order.push(c);
                nodes.push(Node {
                    parent: cursor as u32,
                    first_child: 0,
                    num_children: 0,
                    depth,
                    mass: masses[c],
                });
            }
            cursor += 1;
        }
        Ok(MassTree { nodes })
    }

    /// Parses the JSON node list and validates it, including stated depths.
    pub fn from_records(records: &[MassNodeRecord]) -> Result<MassTree> {
        let n = records.len();
        let mut slot = vec![usize::MAX; n];
        for (i, r) in records.iter().enumerate() {
            let id = r.id as usize;
            if id >= n || slot[id] != usize::MAX {
                return Err(Error::MalformedTree(format!("node ids must be 0..{n} without repeats")));
            }
            slot[id] = i;
        }
        let parents: Vec<Option<usize>> = (0..n).map(|id| records[slot[id]].parent.map(|p| p as usize)).collect();
        let masses: Vec<u64> = (0..n).map(|id| records[slot[id]].mass).collect();
        let tree = MassTree::from_parts(&parents, &masses)?;
        // Depths in the input must agree with the parent links.
        for id in 0..n {
            let mut d = 0;
            let mut x = id;
            while let Some(p) = parents[x] {
                d += 1;
                x = p;
            }
            if records[slot[id]].depth != d {
                return Err(Error::MalformedTree(format!("node {id} has depth {} but lies at depth {d}", records[slot[id]].depth)));
            }
        }
        Ok(tree)
    }

    pub fn from_json(s: &str) -> Result<MassTree> {
        let records: Vec<MassNodeRecord> = serde_json::from_str(s)?;
        MassTree::from_records(&records)
    }

    pub fn records(&self) -> Vec<MassNodeRecord> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(id, nd)| MassNodeRecord {
                id: id as u32,
                parent: (nd.parent != NO_PARENT).then_some(nd.parent),
                mass: nd.mass,
                depth: nd.depth,
                label: None,
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.records()).expect("node lists always serialize")
    }

    /// Total mass `n`, which equals the number of nodes.
    pub fn root_mass(&self) -> u64 {
        self.nodes[0].mass
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> NodeRef {
        0
    }

    pub fn mass(&self, v: NodeRef) -> u64 {
        self.nodes[v as usize].mass
    }

    pub fn depth(&self, v: NodeRef) -> u32 {
        self.nodes[v as usize].depth
    }

    pub fn parent(&self, v: NodeRef) -> Option<NodeRef> {
        let p = self.nodes[v as usize].parent;
        (p != NO_PARENT).then_some(p)
    }

    pub fn children(&self, v: NodeRef) -> Range<NodeRef> {
        let nd = &self.nodes[v as usize];
        nd.first_child..nd.first_child + nd.num_children
    }

    pub fn child_masses(&self, v: NodeRef) -> Vec<u64> {
        self.children(v).map(|c| self.mass(c)).collect()
    }

    /// Nodes in breadth-first order with their masses and depths.
    pub fn iter(&self) -> impl Iterator<Item = (NodeRef, u64, u32)> + '_ {
        self.nodes.iter().enumerate().map(|(i, nd)| (i as u32, nd.mass, nd.depth))
    }

    pub fn height(&self) -> u32 {
        self.nodes.last().map_or(0, |nd| nd.depth)
    }

    pub fn parents(&self) -> Vec<Option<usize>> {
        self.nodes
            .iter()
            .map(|nd| (nd.parent != NO_PARENT).then_some(nd.parent as usize))
            .collect()
    }

    pub fn canonical(&self) -> CanonicalTree {
        canonicalize_parents(&self.parents()).expect("mass trees have a single root")
    }

    /// Checks conservation, ordering and depth invariants.
    pub fn check_invariants(&self) -> Result<()> {
        if self.root_mass() != self.nodes.len() as u64 {
            return Err(Error::MalformedTree("root mass differs from node count".into()));
        }
        for (v, nd) in self.nodes.iter().enumerate() {
            let kids = self.child_masses(v as u32);
            if nd.mass == 1 && !kids.is_empty() {
                return Err(Error::MalformedTree(format!("mass-1 node {v} has children")));
            }
            if nd.mass >= 2 && kids.iter().sum::<u64>() + 1 != nd.mass {
                return Err(Error::MalformedTree(format!("mass not conserved at node {v}")));
            }
            if kids.windows(2).any(|w| w[0] < w[1]) {
                return Err(Error::MalformedTree(format!("children of {v} not in nonincreasing order")));
            }
            for c in self.children(v as u32) {
                if self.depth(c) != nd.depth + 1 || self.parent(c) != Some(v as u32) {
                    return Err(Error::MalformedTree(format!("bad link below node {v}")));
                }
            }
        }
        Ok(())
    }
}

/// Child masses of a node of mass `k`: an Ewens(k - 1, θ) partition sorted
/// into nonincreasing order, ties kept in order of table creation.
fn ewens_split<R: Rng + ?Sized>(k: u64, theta: f64, rng: &mut R) -> Vec<u64> {
    let mut sizes = crp_block_sizes(k - 1, theta, rng);
    sizes.sort_by(|a, b| b.cmp(a));
    sizes
}

/// Samples the Ewens fragmentation tree with root mass `n`.
pub fn sample_fragmentation<R: Rng + ?Sized>(n: u64, theta: f64, rng: &mut R) -> Result<MassTree> {
    check_theta(theta)?;
    check_n(n)?;
    Ok(MassTree::build(n, |k| ewens_split(k, theta, rng)))
}

/// Height of a fragmentation tree without materializing it.
///
/// Depth-first over `(mass, depth)` pairs. A subtree of mass `k` at depth
/// `d` cannot reach below `d + k - 1`, so subtrees that cannot beat the
/// current maximum are skipped.
pub fn sample_height<R: Rng + ?Sized>(n: u64, theta: f64, rng: &mut R) -> Result<u32> {
    check_theta(theta)?;
    check_n(n)?;
    let mut best = 0u64;
    let mut stack = vec![(n, 0u64)];
    while let Some((k, d)) = stack.pop() {
        if d + k - 1 <= best {
            continue;
        }
        if k <= 2 {
            best = d + k - 1;
            continue;
        }
        best = best.max(d + 1);
        let mut blocks = sequential_block_sizes(k - 1, theta, rng);
        // largest block on top, so deep paths are found early
        blocks.sort_unstable();
        stack.extend(blocks.into_iter().map(|a| (a, d + 1)));
    }
    Ok(best as u32)
}

/// Masses of all nodes at depths `0..=max_depth` with mass at least
/// `min_mass`, grouped by depth, without materializing the tree.
///
/// Nodes below `min_mass` are dropped together with their subtrees; every
/// descendant of such a node is lighter still.
pub fn sample_level_masses<R: Rng + ?Sized>(
    n: u64,
    theta: f64,
    max_depth: usize,
    min_mass: u64,
    rng: &mut R,
) -> Result<Vec<Vec<u64>>> {
    check_theta(theta)?;
    check_n(n)?;
    let mut levels = vec![Vec::new(); max_depth + 1];
    if n >= min_mass {
        levels[0].push(n);
    }
    for d in 0..max_depth {
        let (head, tail) = levels.split_at_mut(d + 1);
        for &k in &head[d] {
            if k >= 2 {
                tail[0].extend(sequential_block_sizes(k - 1, theta, rng).into_iter().filter(|&a| a >= min_mass));
            }
        }
    }
    Ok(levels)
}

/// Root child masses of a fragmentation tree of size `n`.
pub fn sample_root_split<R: Rng + ?Sized>(n: u64, theta: f64, rng: &mut R) -> Result<BlockSizes> {
    check_theta(theta)?;
    check_n(n)?;
    if n == 1 {
        return BlockSizes::new(Vec::new());
    }
    BlockSizes::new(sequential_block_sizes(n - 1, theta, rng))
}

/// Fragmentation tree whose nodes also carry labels forming a standard
/// labelling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelledMassTree {
    pub tree: MassTree,
    labels: Vec<u64>,
}

impl LabelledMassTree {
    pub fn label(&self, v: NodeRef) -> u64 {
        self.labels[v as usize]
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    /// Parent array indexed by label; this is the recursive tree.
    pub fn recursive_parents(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.labels.len()];
        for v in 0..self.labels.len() as u32 {
            out[self.label(v) as usize] = self.tree.parent(v).map(|p| self.label(p) as usize);
        }
        out
    }

    pub fn is_standard(&self) -> bool {
        let n = self.labels.len();
        let mut seen = vec![false; n];
        for &l in &self.labels {
            if l as usize >= n || seen[l as usize] {
                return false;
            }
            seen[l as usize] = true;
        }
        (1..n as u32).all(|v| self.label(self.tree.parent(v).unwrap()) < self.label(v))
    }

    pub fn records(&self) -> Vec<MassNodeRecord> {
        let mut recs = self.tree.records();
        for (r, &l) in recs.iter_mut().zip(&self.labels) {
            r.label = Some(l);
        }
        recs
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.records()).expect("node lists always serialize")
    }
}

/// Labelled variant: each split partitions the actual label set by a CRP
/// seating labels in increasing order; a node's label is the minimum of its
/// set and children are ordered by decreasing size, then minimum label.
pub fn sample_labelled_fragmentation<R: Rng + ?Sized>(
    n: u64,
    theta: f64,
    rng: &mut R,
) -> Result<LabelledMassTree> {
    check_theta(theta)?;
    check_n(n)?;
    let mut nodes = Vec::with_capacity(n as usize);
    let mut labels = Vec::with_capacity(n as usize);
    let mut sets: Vec<Option<Vec<u64>>> = Vec::with_capacity(n as usize);
    nodes.push(Node { parent: NO_PARENT, first_child: 0, num_children: 0, depth: 0, mass: n });
    labels.push(0);
    sets.push(Some((0..n).collect()));
    let mut cursor = 0;
    while cursor < nodes.len() {
        let set = sets[cursor].take().unwrap_or_default();
        if set.len() >= 2 {
            let mut rest = Restaurant::new();
            let mut blocks: Vec<Vec<u64>> = Vec::new();
            for &l in &set[1..] {
                let idx = rest.seat(theta, rng);
                if idx == blocks.len() {
                    blocks.push(Vec::new());
                }
                blocks[idx].push(l);
            }
            // Tables open in increasing order of their minima, so a stable
            // sort by size gives the (size desc, min label asc) order.
            blocks.sort_by(|a, b| b.len().cmp(&a.len()));
            let depth = nodes[cursor].depth + 1;
            nodes[cursor].first_child = nodes.len() as u32;
            nodes[cursor].num_children = blocks.len() as u32;
            for b in blocks {
                nodes.push(Node {
                    parent: cursor as u32,
                    first_child: 0,
                    num_children: 0,
                    depth,
                    mass: b.len() as u64,
                });
                labels.push(b[0]);
                sets.push((b.len() >= 2).then_some(b));
            }
        }
        cursor += 1;
    }
    Ok(LabelledMassTree { tree: MassTree { nodes }, labels })
}

/// Incremental construction of labelled fragmentation trees of sizes
/// `1, 2, …` on a single probability space. Vertex `k` (label `k`) enters at
/// the root and, at a vertex with subtree size `s`, attaches there with
/// probability `θ/(θ+s-1)` or moves to child `c` with probability
/// `s_c/(θ+s-1)`.
#[derive(Debug, Clone)]
pub struct RecursiveTreeGrowth {
    theta: f64,
    parent: Vec<usize>,
    children: Vec<Vec<usize>>,
    size: Vec<u64>,
    depth: Vec<u32>,
    height: u32,
}

impl RecursiveTreeGrowth {
    pub fn new(theta: f64) -> Result<Self> {
        check_theta(theta)?;
        Ok(RecursiveTreeGrowth {
            theta,
            parent: vec![usize::MAX],
            children: vec![Vec::new()],
            size: vec![1],
            depth: vec![0],
            height: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.size.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Adds one vertex and returns its parent's label.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        let new = self.size.len();
        let mut v = 0;
        loop {
            let s = self.size[v];
            self.size[v] += 1;
            if s == 1 || rng.random::<f64>() * (self.theta + (s - 1) as f64) < self.theta {
                break;
            }
            // Descend to a child chosen proportionally to its subtree size.
            let mut r = rng.random_range(0..s - 1);
            let mut next = *self.children[v].last().unwrap();
            for &c in &self.children[v] {
                if r < self.size[c] {
                    next = c;
                    break;
                }
                r -= self.size[c];
            }
            v = next;
        }
        self.parent.push(v);
        self.children.push(Vec::new());
        self.children[v].push(new);
        self.size.push(1);
        let d = self.depth[v] + 1;
        self.depth.push(d);
        self.height = self.height.max(d);
        v
    }

    /// The current tree; children ordered by decreasing size, then label.
    pub fn snapshot(&self) -> LabelledMassTree {
        let n = self.len();
        let mut nodes = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        nodes.push(Node { parent: NO_PARENT, first_child: 0, num_children: 0, depth: 0, mass: n as u64 });
        labels.push(0u64);
        let mut cursor = 0;
        while cursor < nodes.len() {
            let v = labels[cursor] as usize;
            let mut kids = self.children[v].clone();
            kids.sort_by(|&a, &b| self.size[b].cmp(&self.size[a]).then(a.cmp(&b)));
            if !kids.is_empty() {
                nodes[cursor].first_child = nodes.len() as u32;
                nodes[cursor].num_children = kids.len() as u32;
            }
            let depth = nodes[cursor].depth + 1;
            for c in kids {
                nodes.push(Node {
                    parent: cursor as u32,
                    first_child: 0,
                    num_children: 0,
                    depth,
                    mass: self.size[c],
                });
                labels.push(c as u64);
            }
            cursor += 1;
        }
        LabelledMassTree { tree: MassTree { nodes }, labels }
    }
}

/// Snapshots `T_1 ⊂ T_2 ⊂ … ⊂ T_n` of the growth coupling.
pub fn grow_recursive_tree<R: Rng + ?Sized>(n: u64, theta: f64, rng: &mut R) -> Result<Vec<LabelledMassTree>> {
    check_n(n)?;
    let mut g = RecursiveTreeGrowth::new(theta)?;
    let mut out = vec![g.snapshot()];
    for _ in 1..n {
        g.step(rng);
        out.push(g.snapshot());
    }
    Ok(out)
}

fn check_tilt(t: f64) -> Result<()> {
    if t >= 1.0 && t.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("tilt t must be >= 1, got {t}")))
    }
}

/// Law of the next spine mass `j ∈ {1, …, k-1}` from a spine vertex of mass
/// `k`: `μ(j) ∝ j^{t-1} R_{m,j}` with `m = k - 1`. Index `j - 1` holds `μ(j)`.
pub fn spine_step_pmf(k: u64, t: f64, theta: f64) -> Result<Vec<f64>> {
    check_theta(theta)?;
    check_tilt(t)?;
    if k < 2 {
        return Err(domain("spine step law needs k >= 2"));
    }
    let m = k - 1;
    let lg = ln_gamma_pair(m, theta);
    let logs: Vec<f64> = (1..=m)
        .map(|j| (t - 1.0) * (j as f64).ln() + ln_block_ratio(m, j, theta, lg))
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

/// Exact sampler for the spine step law.
///
/// Proposes `J = 1 + Binomial(m - 1, V)` with `V ~ Beta(t, θ)` and accepts
/// with probability `w(J)/M`, `w(j) = j^{t-1} Γ(j)/Γ(j+t-1)`,
/// `M = max(1, 1/Γ(t))`.
#[derive(Debug, Clone)]
pub struct SpineStep {
    t: f64,
    beta: Beta<f64>,
    ln_bound: f64,
}

impl SpineStep {
    pub fn new(t: f64, theta: f64) -> Result<Self> {
        check_theta(theta)?;
        check_tilt(t)?;
        let beta = Beta::new(t, theta).map_err(|e| domain(format!("Beta({t}, {theta}): {e}")))?;
        Ok(SpineStep { t, beta, ln_bound: (-ln_gamma_unchecked(t)).max(0.0) })
    }

    fn ln_weight(&self, j: u64) -> f64 {
        if self.t == 1.0 {
            return 0.0;
        }
        let j = j as f64;
        (self.t - 1.0) * j.ln() + ln_gamma_unchecked(j) - ln_gamma_unchecked(j + self.t - 1.0)
    }

    /// Next spine mass below a vertex of mass `m + 1`.
    pub fn sample<R: Rng + ?Sized>(&self, m: u64, rng: &mut R) -> u64 {
        if m <= 1 {
            return m.max(1);
        }
        loop {
            let v = self.beta.sample(rng);
            let j = 1 + Binomial::new(m - 1, v).expect("probability in [0,1]").sample(rng);
            let u: f64 = rng.random();
            if u.ln() < self.ln_weight(j) - self.ln_bound {
                return j;
            }
        }
    }
}

/// A spine under the tilted measure, with displacements `X_ℓ = -ln(K_ℓ/(K_{ℓ-1}-1))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpinePath {
    pub t: f64,
    pub theta: f64,
    /// `K(U_0), …, K(U_h)`.
    pub masses: Vec<u64>,
    /// `X_1, …, X_h`; zero on cemetery steps.
    pub displacements: Vec<f64>,
    /// `S_0 = 0, S_1, …, S_h`.
    pub partial_sums: Vec<f64>,
    /// `Σ_{ℓ<h} κ_{K(U_ℓ)}(t)`.
    pub kappa_sum: f64,
}

/// Masses of the non-spine children at each spine step, nonincreasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OffSpine {
    pub siblings: Vec<Vec<u64>>,
}

/// `ln β_{m,t}(θ)`, with the exact value 0 at `t = 1` and `m = 0`.
fn ln_finite_beta(m: u64, t: f64, theta: f64) -> f64 {
    if m == 0 || t == 1.0 {
        0.0
    } else {
        finite_mass_exponent_unchecked(m, t, theta).ln()
    }
}

/// Spine masses only, for long spines from very large roots.
pub fn sample_spine_masses<R: Rng + ?Sized>(n: u64, theta: f64, t: f64, h: usize, rng: &mut R) -> Result<Vec<u64>> {
    check_n(n)?;
    let step = SpineStep::new(t, theta)?;
    let mut masses = Vec::with_capacity(h + 1);
    masses.push(n);
    for _ in 0..h {
        let k = *masses.last().unwrap();
        masses.push(if k == 1 { 1 } else { step.sample(k - 1, rng) });
    }
    Ok(masses)
}

/// Follows the spine for `h` steps from a root of mass `n`. At a spine
/// vertex of mass `k ≥ 2` the spine child has mass drawn from the spine
/// step law and the remaining `k - 1 - j` is split by a fresh Ewens draw;
/// below mass 1 the spine continues along the cemetery ray.
pub fn sample_spine<R: Rng + ?Sized>(
    n: u64,
    theta: f64,
    t: f64,
    h: usize,
    rng: &mut R,
) -> Result<(SpinePath, OffSpine)> {
    check_n(n)?;
    let step = SpineStep::new(t, theta)?;
    let mut masses = vec![n];
    let mut displacements = Vec::with_capacity(h);
    let mut partial_sums = vec![0.0];
    let mut siblings = Vec::with_capacity(h);
    let mut kappa_sum = 0.0;
    for _ in 0..h {
        let k = *masses.last().unwrap();
        if k == 1 {
            masses.push(1);
            displacements.push(0.0);
            siblings.push(Vec::new());
        } else {
            let m = k - 1;
            let j = step.sample(m, rng);
            kappa_sum += ln_finite_beta(m, t, theta);
            masses.push(j);
            displacements.push(-((j as f64) / (m as f64)).ln());
            let mut rest = sequential_block_sizes(m - j, theta, rng);
            rest.sort_by(|a, b| b.cmp(a));
            siblings.push(rest);
        }
        let s = partial_sums.last().unwrap() + displacements.last().unwrap();
        partial_sums.push(s);
    }
    Ok((SpinePath { t, theta, masses, displacements, partial_sums, kappa_sum }, OffSpine { siblings }))
}

/// Monte Carlo estimates of both sides of the many-to-one identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ManyToOne {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub reps: u64,
}

pub(crate) fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Table of `κ_k(t) = ln β_{k-1,t}(θ)` for `k = 0..=n`.
pub(crate) fn kappa_table(n: u64, t: f64, theta: f64) -> Vec<f64> {
    (0..=n).map(|k| ln_finite_beta(k.saturating_sub(1), t, theta)).collect()
}

/// Additive martingale `Z̃_h(t)` of one tree, each extended vertex at
/// generation `h` weighted by `ψ` of its mass path `K(u_0), …, K(u_h)`.
pub fn additive_martingale(
    tree: &MassTree,
    t: f64,
    h: usize,
    kappa: &[f64],
    psi: &dyn Fn(&[u64]) -> f64,
) -> f64 {
    let mut total = 0.0;
    let mut path = Vec::with_capacity(h + 1);
    // (vertex, ln weight, depth)
    let mut stack = vec![(tree.root(), 0.0_f64, 0usize)];
    while let Some((v, lw, d)) = stack.pop() {
        path.truncate(d);
        path.push(tree.mass(v));
        let k = tree.mass(v);
        if d == h || k == 1 {
            // A leaf above generation h continues as a zero-displacement ray.
            let mut full = path.clone();
            full.resize(h + 1, 1);
            total += lw.exp() * psi(&full);
            continue;
        }
        let m = (k - 1) as f64;
        for c in tree.children(v) {
            let step = t * (tree.mass(c) as f64 / m).ln() - kappa[k as usize];
            stack.push((c, lw + step, d + 1));
        }
    }
    total
}

/// Many-to-one check with a general functional `ψ` of the mass path:
/// `E[Σ_{|u|=h} e^{-t S_h(u) - Σ κ} ψ(u)]` over untilted trees against
/// `E_Q[ψ(spine)]`.
pub fn many_to_one_check_with<R: Rng + ?Sized>(
    n: u64,
    theta: f64,
    t: f64,
    h: usize,
    reps: u64,
    rng: &mut R,
    psi: &dyn Fn(&[u64]) -> f64,
) -> Result<ManyToOne> {
    check_tilt(t)?;
    if reps == 0 {
        return Err(domain("reps must be at least 1"));
    }
    let kappa = kappa_table(n, t, theta);
    let mut lhs = Vec::with_capacity(reps as usize);
    for _ in 0..reps {
        let tree = sample_fragmentation(n, theta, rng)?;
        lhs.push(additive_martingale(&tree, t, h, &kappa, psi));
    }
    let mut rhs = Vec::with_capacity(reps as usize);
    for _ in 0..reps {
        rhs.push(psi(&sample_spine_masses(n, theta, t, h, rng)?));
    }
    let (lhs, lhs_se) = mean_se(&lhs);
    let (rhs, rhs_se) = mean_se(&rhs);
    Ok(ManyToOne { lhs, lhs_se, rhs, rhs_se, reps })
}

/// `E[Z̃_h(t)]` estimated over `reps` trees against the spine side, which
/// is identically 1.
pub fn many_to_one_check<R: Rng + ?Sized>(
    n: u64,
    theta: f64,
    t: f64,
    h: usize,
    reps: u64,
    rng: &mut R,
) -> Result<ManyToOne> {
    many_to_one_check_with(n, theta, t, h, reps, rng, &|_| 1.0)
}

/// Largest deviation over all vertices from
/// `ln K(u) = ln n - S_h(u) - R_h(u)`, `R_h(u) = -Σ_{ℓ<h} ln(1 - 1/K(u_ℓ))`.
pub fn exact_decomposition_residual(tree: &MassTree) -> f64 {
    let n = tree.len();
    let ln_n = (tree.root_mass() as f64).ln();
    let mut s = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for (v, k, _) in tree.iter() {
        if let Some(p) = tree.parent(v) {
            let kp = tree.mass(p) as f64;
            s[v as usize] = s[p as usize] - (k as f64 / (kp - 1.0)).ln();
            r[v as usize] = r[p as usize] - (1.0 - 1.0 / kp).ln();
        }
        let resid = (k as f64).ln() - (ln_n - s[v as usize] - r[v as usize]);
        worst = worst.max(resid.abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ewens::{ewens_pmf, partitions, total_variation};
    use crate::trees::{enumerate_trees, plancherel_distribution};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn trivial_sizes() {
        let mut r = rng(1);
        let t = sample_fragmentation(1, 2.0, &mut r).unwrap();
        assert_eq!((t.len(), t.height()), (1, 0));
        for _ in 0..20 {
            let t = sample_fragmentation(2, 0.7, &mut r).unwrap();
            assert_eq!(t.child_masses(0), vec![1]);
            assert_eq!(t.height(), 1);
        }
        assert!(sample_fragmentation(0, 2.0, &mut r).is_err());
        assert!(sample_fragmentation(5, 0.0, &mut r).is_err());
    }

    #[test]
    fn invariants_hold_on_samples() {
        let mut r = rng(2);
        for n in [3u64, 17, 100, 2_500] {
            for theta in [0.3, 2.0, 9.0] {
                let t = sample_fragmentation(n, theta, &mut r).unwrap();
                t.check_invariants().unwrap();
                assert_eq!(t.len() as u64, n);
                assert!(exact_decomposition_residual(&t) < 1e-10);
            }
        }
    }

    #[test]
    fn root_split_at_n4() {
        let mut r = rng(3);
        let reps = 200_000;
        let hits = (0..reps)
            .filter(|_| sample_fragmentation(4, 2.0, &mut r).unwrap().child_masses(0) == vec![2, 1])
            .count();
        let p = hits as f64 / reps as f64;
        let se = (0.25 / reps as f64).sqrt();
        assert!((p - 0.5).abs() < 4.0 * se, "{p}");
    }

    #[test]
    fn plancherel_classes_small_n() {
        let mut r = rng(4);
        let reps = 100_000;
        for n in [4usize, 5] {
            let exact = plancherel_distribution(n).unwrap();
            let mut counts: BTreeMap<CanonicalTree, u64> = BTreeMap::new();
            for _ in 0..reps {
                *counts.entry(sample_fragmentation(n as u64, 2.0, &mut r).unwrap().canonical()).or_insert(0) += 1;
            }
            let c: Vec<u64> = exact.iter().map(|(t, _)| counts.get(t).copied().unwrap_or(0)).collect();
            let p: Vec<f64> = exact.iter().map(|(_, p)| *p).collect();
            assert!(total_variation(&c, &p) < 0.01, "n={n}");
        }
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let mut r = rng(5);
        let t = sample_fragmentation(40, 1.5, &mut r).unwrap();
        let js = t.to_json();
        assert!(js.starts_with(r#"[{"id":0,"parent":null,"mass":40,"depth":0}"#));
        assert_eq!(MassTree::from_json(&js).unwrap(), t);
        let bad = r#"[{"id":0,"parent":null,"mass":2,"depth":0},{"id":1,"parent":0,"mass":2,"depth":1}]"#;
        assert!(MassTree::from_json(bad).is_err());
        let bad_depth = r#"[{"id":0,"parent":null,"mass":2,"depth":0},{"id":1,"parent":0,"mass":1,"depth":3}]"#;
        assert!(MassTree::from_json(bad_depth).is_err());
    }

    #[test]
    fn labelled_small_cases() {
        let mut r = rng(6);
        let t = sample_labelled_fragmentation(2, 2.0, &mut r).unwrap();
        assert_eq!(t.labels(), &[0, 1]);
        let reps = 200_000;
        let mut path = 0;
        for _ in 0..reps {
            let t = sample_labelled_fragmentation(3, 2.0, &mut r).unwrap();
            assert!(t.is_standard());
            if t.recursive_parents() == vec![None, Some(0), Some(1)] {
                path += 1;
            }
        }
        let p = path as f64 / reps as f64;
        let se = (2.0 / 9.0 / reps as f64).sqrt();
        assert!((p - 1.0 / 3.0).abs() < 4.0 * se);
    }

    #[test]
    fn labelled_children_order() {
        let mut r = rng(7);
        for _ in 0..200 {
            let t = sample_labelled_fragmentation(60, 1.0, &mut r).unwrap();
            t.tree.check_invariants().unwrap();
            assert!(t.is_standard());
            for (v, _, _) in t.tree.iter() {
                let kids: Vec<(u64, u64)> = t.tree.children(v).map(|c| (t.tree.mass(c), t.label(c))).collect();
                assert!(kids.windows(2).all(|w| w[0].0 > w[1].0 || (w[0].0 == w[1].0 && w[0].1 < w[1].1)));
                assert!(kids.iter().all(|&(_, l)| l > t.label(v)));
            }
        }
    }

    /// Law of the recursive tree (parent array by label) over many draws.
    fn recursive_law(draws: impl Iterator<Item = Vec<Option<usize>>>) -> BTreeMap<Vec<Option<usize>>, u64> {
        let mut m = BTreeMap::new();
        for d in draws {
            *m.entry(d).or_insert(0) += 1;
        }
        m
    }

    #[test]
    fn growth_matches_labelled_sampler() {
        let mut r = rng(8);
        let reps = 100_000;
        let theta = 1.3;
        let n = 4;
        let a = recursive_law((0..reps).map(|_| {
            grow_recursive_tree(n, theta, &mut r).unwrap().last().unwrap().recursive_parents()
        }));
        let b = recursive_law((0..reps).map(|_| {
            sample_labelled_fragmentation(n, theta, &mut r).unwrap().recursive_parents()
        }));
        let keys: Vec<_> = a.keys().chain(b.keys()).cloned().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let tv: f64 = 0.5
            * keys
                .iter()
                .map(|k| {
                    let x = a.get(k).copied().unwrap_or(0) as f64 / reps as f64;
                    let y = b.get(k).copied().unwrap_or(0) as f64 / reps as f64;
                    (x - y).abs()
                })
                .sum::<f64>();
        assert!(tv < 0.01, "{tv}");
    }

    #[test]
    fn growth_snapshots_nest() {
        let mut r = rng(9);
        let snaps = grow_recursive_tree(1, 2.0, &mut r).unwrap();
        assert_eq!(snaps.len(), 1);
        for _ in 0..50 {
            let snaps = grow_recursive_tree(30, 2.0, &mut r).unwrap();
            for (k, w) in snaps.windows(2).enumerate() {
                assert!(w[0].tree.height() <= w[1].tree.height());
                assert_eq!(w[1].tree.len(), k + 2);
                w[1].tree.check_invariants().unwrap();
                assert!(w[1].is_standard());
                // Earlier tree is the restriction of the later one.
                let small = w[0].recursive_parents();
                let big = w[1].recursive_parents();
                assert_eq!(&big[..small.len()], &small[..]);
            }
        }
    }

    #[test]
    fn spine_pmf_small_cases() {
        assert_eq!(spine_step_pmf(2, 2.0, 2.0).unwrap(), vec![1.0]);
        let p = spine_step_pmf(3, 2.0, 2.0).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
        assert!(spine_step_pmf(1, 2.0, 2.0).is_err());
        for (k, t, theta) in [(10u64, 1.0, 0.5), (200, 2.9, 2.0), (1_000, 5.0, 1.0)] {
            let p = spine_step_pmf(k, t, theta).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spine_pmf_at_t1_is_size_biased_block() {
        // μ(j) = j E[C_j] / m under Ewens(m, θ).
        let theta = 0.8;
        let m = 9u64;
        let p = spine_step_pmf(m + 1, 1.0, theta).unwrap();
        for j in 1..=m {
            let mut e = 0.0;
            for c in partitions(m) {
                e += ewens_pmf(&c, theta).unwrap() * c.count(j) as f64;
            }
            assert!((p[j as usize - 1] - j as f64 * e / m as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn acceptance_weight_is_bounded() {
        for t in [1.0, 1.2, 1.5, 1.9, 2.0, 2.92, 4.0, 7.5, 15.0] {
            let s = SpineStep::new(t, 2.0).unwrap();
            for j in (1..200).chain([1_000, 10_000, 1_000_000]) {
                assert!(s.ln_weight(j) <= s.ln_bound + 1e-12, "t={t} j={j}");
            }
        }
    }

    #[test]
    fn spine_sampler_matches_pmf() {
        let mut r = rng(10);
        for (m, t, theta) in [(7u64, 2.0, 2.0), (12, 3.5, 0.5), (5, 1.0, 1.0), (30, 1.4, 3.0)] {
            let p = spine_step_pmf(m + 1, t, theta).unwrap();
            let s = SpineStep::new(t, theta).unwrap();
            let reps = 200_000;
            let mut c = vec![0u64; m as usize];
            for _ in 0..reps {
                c[s.sample(m, &mut r) as usize - 1] += 1;
            }
            assert!(total_variation(&c, &p) < 0.01, "m={m} t={t}");
        }
    }

    #[test]
    fn two_stage_offspring_matches_rejection() {
        // Tilted offspring by rejection from the untilted law: accept an
        // Ewens(m, θ) draw with probability Σ (A_i/m)^t, then pick the spine
        // block with probability ∝ A_i^t.
        let (m, t, theta) = (6u64, 2.5, 1.5);
        let mut r = rng(11);
        let reps = 100_000;
        let mut a: BTreeMap<(u64, Vec<u64>), u64> = BTreeMap::new();
        let mut got = 0;
        while got < reps {
            let blocks = crp_block_sizes(m, theta, &mut r);
            let w: Vec<f64> = blocks.iter().map(|&b| (b as f64 / m as f64).powf(t)).collect();
            let total: f64 = w.iter().sum();
            if r.random::<f64>() >= total {
                continue;
            }
            let mut u = r.random::<f64>() * total;
            let mut pick = blocks.len() - 1;
            for (i, wi) in w.iter().enumerate() {
                if u < *wi {
                    pick = i;
                    break;
                }
                u -= wi;
            }
            let mut rest: Vec<u64> = blocks.iter().enumerate().filter(|&(i, _)| i != pick).map(|(_, &b)| b).collect();
            rest.sort_by(|x, y| y.cmp(x));
            *a.entry((blocks[pick], rest)).or_insert(0) += 1;
            got += 1;
        }
        let mut b: BTreeMap<(u64, Vec<u64>), u64> = BTreeMap::new();
        for _ in 0..reps {
            let (path, off) = sample_spine(m + 1, theta, t, 1, &mut r).unwrap();
            *b.entry((path.masses[1], off.siblings[0].clone())).or_insert(0) += 1;
        }
        let keys: std::collections::BTreeSet<_> = a.keys().chain(b.keys()).cloned().collect();
        let tv: f64 = 0.5
            * keys
                .iter()
                .map(|k| (a.get(k).copied().unwrap_or(0) as f64 - b.get(k).copied().unwrap_or(0) as f64).abs())
                .sum::<f64>()
            / reps as f64;
        assert!(tv < 0.015, "{tv}");
    }

    #[test]
    fn spine_cemetery_and_sums() {
        let mut r = rng(12);
        let (p, off) = sample_spine(1, 2.0, 2.0, 4, &mut r).unwrap();
        assert_eq!(p.masses, vec![1; 5]);
        assert!(p.displacements.iter().all(|&x| x == 0.0));
        assert_eq!(p.kappa_sum, 0.0);
        assert!(off.siblings.iter().all(Vec::is_empty));
        for _ in 0..200 {
            let (p, off) = sample_spine(300, 1.0, 2.5, 12, &mut r).unwrap();
            assert!(p.partial_sums.windows(2).all(|w| w[0] <= w[1]));
            for (l, x) in p.displacements.iter().enumerate() {
                let (k0, k1) = (p.masses[l], p.masses[l + 1]);
                if k0 >= 2 {
                    assert!((x + (k1 as f64 / (k0 - 1) as f64).ln()).abs() < 1e-15);
                    assert_eq!(off.siblings[l].iter().sum::<u64>() + k1, k0 - 1);
                } else {
                    assert_eq!((*x, k1), (0.0, 1));
                }
            }
        }
    }

    #[test]
    fn martingale_at_t1_is_one() {
        let mut r = rng(13);
        let kappa = kappa_table(80, 1.0, 2.0);
        for h in [0usize, 1, 3, 10] {
            for _ in 0..50 {
                let t = sample_fragmentation(80, 2.0, &mut r).unwrap();
                let z = additive_martingale(&t, 1.0, h, &kappa, &|_| 1.0);
                assert!((z - 1.0).abs() < 1e-12, "{z}");
            }
        }
    }

    #[test]
    fn martingale_mean_exact_at_n3() {
        // Trees of size 3: path w.p. 1/3 ({2}), cherry w.p. 2/3 ({1,1}).
        let kappa = kappa_table(3, 2.0, 2.0);
        assert!((kappa[3] - (2.0_f64 / 3.0).ln()).abs() < 1e-12);
        let path = MassTree::from_parts(&[None, Some(0), Some(1)], &[3, 2, 1]).unwrap();
        let cherry = MassTree::from_parts(&[None, Some(0), Some(0)], &[3, 1, 1]).unwrap();
        let zp = additive_martingale(&path, 2.0, 1, &kappa, &|_| 1.0);
        let zc = additive_martingale(&cherry, 2.0, 1, &kappa, &|_| 1.0);
        assert!((zp / 3.0 + 2.0 * zc / 3.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn many_to_one_with_nontrivial_functional() {
        let mut r = rng(14);
        let psi = |p: &[u64]| p[p.len() - 1] as f64;
        let res = many_to_one_check_with(25, 2.0, 2.0, 3, 40_000, &mut r, &psi).unwrap();
        let se = (res.lhs_se.powi(2) + res.rhs_se.powi(2)).sqrt();
        assert!((res.lhs - res.rhs).abs() < 4.0 * se, "{res:?}");
        let res = many_to_one_check(25, 2.0, 2.0, 3, 20_000, &mut r).unwrap();
        assert!((res.lhs - 1.0).abs() < 4.0 * res.lhs_se, "{res:?}");
        assert_eq!((res.rhs, res.rhs_se), (1.0, 0.0));
    }

    #[test]
    fn streaming_samplers_agree_with_full_trees() {
        let mut r = rng(15);
        let reps = 20_000;
        let n = 200;
        let full: Vec<f64> = (0..reps).map(|_| sample_fragmentation(n, 2.0, &mut r).unwrap().height() as f64).collect();
        let fast: Vec<f64> = (0..reps).map(|_| sample_height(n, 2.0, &mut r).unwrap() as f64).collect();
        let (a, sa) = mean_se(&full);
        let (b, sb) = mean_se(&fast);
        assert!((a - b).abs() < 4.0 * (sa * sa + sb * sb).sqrt(), "{a} vs {b}");

        let count2: Vec<f64> = (0..reps)
            .map(|_| {
                let t = sample_fragmentation(n, 2.0, &mut r).unwrap();
                t.iter().filter(|&(_, k, d)| d == 2 && k >= 5).count() as f64
            })
            .collect();
        let stream2: Vec<f64> = (0..reps)
            .map(|_| sample_level_masses(n, 2.0, 2, 5, &mut r).unwrap()[2].len() as f64)
            .collect();
        let (a, sa) = mean_se(&count2);
        let (b, sb) = mean_se(&stream2);
        assert!((a - b).abs() < 4.0 * (sa * sa + sb * sb).sqrt(), "{a} vs {b}");
    }

    #[test]
    fn enumerated_classes_are_reachable() {
        let mut r = rng(16);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..20_000 {
            seen.insert(sample_fragmentation(5, 2.0, &mut r).unwrap().canonical());
        }
        assert_eq!(seen.len(), enumerate_trees(5).unwrap().len());
    }
}
