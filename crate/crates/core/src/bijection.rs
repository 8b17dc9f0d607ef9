//! The RSK-type bijection between chord sequences and bilabelled trees.
//!
//! A chord sequence is `((u_1, v_1), …, (u_{n-1}, v_{n-1}))` with
//! `0 ≤ u_i < v_i ≤ i`. Step `i` of [`sequence_to_bitree`] shifts every left
//! label `≥ v_i` up by one and grafts a vertex `(v_i, i)` above the vertex
//! whose left label is `u_i`. [`bitree_to_sequence`] undoes the steps from
//! `i = n - 1` down to 1.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trees::{canonicalize_parents, CanonicalTree};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChordSequence {
    pairs: Vec<(usize, usize)>,
}

impl ChordSequence {
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        for (k, &(u, v)) in pairs.iter().enumerate() {
            let i = k + 1;
            if !(u < v && v <= i) {
                return Err(Error::InvalidSequence {
                    index: i,
                    reason: format!("need 0 <= u < v <= {i}, got ({u}, {v})"),
                });
            }
        }
        Ok(ChordSequence { pairs })
    }

    /// Parses `"0,1;0,1;2,3"`. An empty string is the empty sequence.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return ChordSequence::new(Vec::new());
        }
        let mut pairs = Vec::new();
        for (k, chunk) in s.split(';').enumerate() {
            let bad = |reason: String| Error::InvalidSequence { index: k + 1, reason };
            let (a, b) = chunk
                .split_once(',')
                .ok_or_else(|| bad(format!("expected 'u,v', got {chunk:?}")))?;
            let u = a.trim().parse().map_err(|e| bad(format!("{a:?}: {e}")))?;
            let v = b.trim().parse().map_err(|e| bad(format!("{b:?}: {e}")))?;
            pairs.push((u, v));
        }
        ChordSequence::new(pairs)
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Number of vertices of the corresponding tree.
    pub fn n(&self) -> usize {
        self.pairs.len() + 1
    }
}

impl fmt::Display for ChordSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.pairs.iter().map(|(u, v)| format!("{u},{v}")).collect();
        f.write_str(&parts.join(";"))
    }
}

/// All chord sequences for trees with `n` vertices, in lexicographic order.
pub fn all_sequences(n: usize) -> Vec<ChordSequence> {
    let mut out = vec![Vec::new()];
    for i in 1..n {
        let mut next = Vec::with_capacity(out.len() * i * (i + 1) / 2);
        for prefix in &out {
            for v in 1..=i {
                for u in 0..v {
                    let mut p: Vec<(usize, usize)> = prefix.clone();
                    p.push((u, v));
                    next.push(p);
                }
            }
        }
        out = next;
    }
    out.into_iter().map(|pairs| ChordSequence { pairs }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitreeNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub left: usize,
    pub right: usize,
}

/// Rooted tree whose vertices carry pairs `(ℓ(v), r(v))` of standard labels.
/// Vertex ids are arena positions and carry no meaning.
#[derive(Debug, Clone)]
pub struct BilabelledTree {
    parent: Vec<Option<usize>>,
    left: Vec<usize>,
    right: Vec<usize>,
}

impl PartialEq for BilabelledTree {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for BilabelledTree {}

/// True when `labels` is a bijection onto `0..n` that increases away from
/// the root.
pub fn is_standard_labelling(parent: &[Option<usize>], labels: &[usize]) -> bool {
    let n = parent.len();
    if labels.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &l in labels {
        if l >= n || seen[l] {
            return false;
        }
        seen[l] = true;
    }
    parent.iter().enumerate().all(|(v, p)| match p {
        Some(p) => *p < n && labels[*p] < labels[v],
        None => labels[v] == 0,
    })
}

impl BilabelledTree {
    pub fn from_nodes(nodes: &[BitreeNode]) -> Result<Self> {
        let n = nodes.len();
        let mut slot: Vec<Option<usize>> = vec![None; n];
        for (i, node) in nodes.iter().enumerate() {
            if node.id >= n || slot[node.id].is_some() {
                return Err(Error::Structure(format!("node ids must be 0..{n} without repeats")));
            }
            slot[node.id] = Some(i);
        }
        let mut parent = vec![None; n];
        let mut left = vec![0; n];
        let mut right = vec![0; n];
        for node in nodes {
            parent[node.id] = node.parent;
            left[node.id] = node.left;
            right[node.id] = node.right;
        }
        let t = BilabelledTree { parent, left, right };
        t.validate()?;
        Ok(t)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let nodes: Vec<BitreeNode> = serde_json::from_str(s)?;
        Self::from_nodes(&nodes)
    }

    fn validate(&self) -> Result<()> {
        let n = self.parent.len();
        if n == 0 {
            return Err(Error::Structure("empty tree".into()));
        }
        canonicalize_parents(&self.parent).map_err(|e| Error::Structure(e.to_string()))?;
        let root = self.parent.iter().position(Option::is_none).unwrap();
        if (self.left[root], self.right[root]) != (0, 0) {
            return Err(Error::Structure("root must carry (0,0)".into()));
        }
        if !is_standard_labelling(&self.parent, &self.left) {
            return Err(Error::Structure("left labels are not a standard labelling".into()));
        }
        if !is_standard_labelling(&self.parent, &self.right) {
            return Err(Error::Structure("right labels are not a standard labelling".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.parent.len()
    }

    pub fn nodes(&self) -> Vec<BitreeNode> {
        (0..self.n())
            .map(|id| BitreeNode { id, parent: self.parent[id], left: self.left[id], right: self.right[id] })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.nodes()).expect("node lists always serialize")
    }

    /// For each right label `r`: the vertex's left label and its parent's
    /// right label. Determines the tree up to relabelling of arena ids.
    pub fn key(&self) -> Vec<(usize, Option<usize>)> {
        let mut by_right = vec![(0, None); self.n()];
        for v in 0..self.n() {
            by_right[self.right[v]] = (self.left[v], self.parent[v].map(|p| self.right[p]));
        }
        by_right
    }

    pub fn left_labels_standard(&self) -> bool {
        is_standard_labelling(&self.parent, &self.left)
    }

    pub fn right_labels_standard(&self) -> bool {
        is_standard_labelling(&self.parent, &self.right)
    }

    pub fn shape(&self) -> CanonicalTree {
        canonicalize_parents(&self.parent).expect("validated trees have a single root")
    }

    fn children_by_right(&self) -> Vec<Vec<usize>> {
        let mut kids = vec![Vec::new(); self.n()];
        for v in 0..self.n() {
            if let Some(p) = self.parent[v] {
                kids[p].push(v);
            }
        }
        for k in &mut kids {
            k.sort_by_key(|&v| self.right[v]);
        }
        kids
    }
}

impl fmt::Display for BilabelledTree {
    /// Indented outline, children in order of right label.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kids = self.children_by_right();
        let root = self.parent.iter().position(Option::is_none).unwrap();
        let mut stack = vec![(root, 0)];
        while let Some((v, depth)) = stack.pop() {
            writeln!(f, "{}({},{})", "  ".repeat(depth), self.left[v], self.right[v])?;
            for &c in kids[v].iter().rev() {
                stack.push((c, depth + 1));
            }
        }
        Ok(())
    }
}

/// Every bilabelled tree with `n` vertices, listed directly: a parent array
/// on right labels with `parent(i) < i`, combined with each standard left
/// labelling of that shape.
pub fn enumerate_bitrees(n: usize) -> Vec<BilabelledTree> {
    fn parent_arrays(i: usize, parents: &mut Vec<Option<usize>>, f: &mut dyn FnMut(&[Option<usize>])) {
        if i == parents.len() {
            f(parents);
            return;
        }
        for p in 0..i {
            parents[i] = Some(p);
            parent_arrays(i + 1, parents, f);
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut parents = vec![None; n];
    parent_arrays(1, &mut parents, &mut |par| {
        let mut perm: Vec<usize> = (0..n).collect();
        loop {
            if is_standard_labelling(par, &perm) {
                out.push(BilabelledTree { parent: par.to_vec(), left: perm.clone(), right: (0..n).collect() });
            }
            let Some(i) = (1..n).rev().find(|&i| perm[i - 1] < perm[i]) else { break };
            let j = (i..n).rev().find(|&j| perm[j] > perm[i - 1]).unwrap();
            perm.swap(i - 1, j);
            perm[i..].reverse();
        }
    });
    out
}

/// The map F.
pub fn sequence_to_bitree(s: &ChordSequence) -> Result<BilabelledTree> {
    // Re-check in case the sequence was deserialized without validation.
    let s = ChordSequence::new(s.pairs.clone())?;
    let n = s.n();
    let mut parent = Vec::with_capacity(n);
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    parent.push(None);
    left.push(0);
    right.push(0);
    for (k, &(u, v)) in s.pairs.iter().enumerate() {
        let host = left
            .iter()
            .position(|&l| l == u)
            .expect("left labels of a tree of size i are exactly 0..i");
        for l in left.iter_mut().filter(|l| **l >= v) {
            *l += 1;
        }
        parent.push(Some(host));
        left.push(v);
        right.push(k + 1);
    }
    Ok(BilabelledTree { parent, left, right })
}

/// The map G, inverse of [`sequence_to_bitree`].
pub fn bitree_to_sequence(t: &BilabelledTree) -> Result<ChordSequence> {
    t.validate()?;
    let n = t.n();
    let mut left = t.left.clone();
    let mut alive = vec![true; n];
    let mut pairs = vec![(0, 0); n - 1];
    for i in (1..n).rev() {
        let mut found = (0..n).filter(|&w| alive[w] && t.right[w] == i);
        let w = found
            .next()
            .ok_or_else(|| Error::Structure(format!("no vertex with right label {i}")))?;
        if found.next().is_some() {
            return Err(Error::Structure(format!("several vertices with right label {i}")));
        }
        let p = t.parent[w].ok_or_else(|| Error::Structure(format!("vertex with right label {i} is the root")))?;
        let v = left[w];
        pairs[i - 1] = (left[p], v);
        alive[w] = false;
        for x in 0..n {
            if alive[x] && left[x] > v {
                left[x] -= 1;
            }
        }
    }
    ChordSequence::new(pairs)
}
