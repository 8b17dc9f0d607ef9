//! Rooted trees up to isomorphism, encoded as canonical parenthesis strings.
//!
//! A leaf is `()`, an internal node is `(` followed by its children's
//! encodings in nondecreasing byte order and `)`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest size accepted by [`enumerate_trees`].
pub const MAX_ENUMERATION_N: usize = 16;
/// Largest size accepted by [`fundamental_identity`].
pub const MAX_IDENTITY_N: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CanonicalTree {
    canon: String,
}

/// Hook-length data of a rooted tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HookData {
    /// Standard labellings `n! / Π |t_v|`.
    pub d: BigUint,
    pub aut: BigUint,
    /// Standard labellings up to symmetry, `d / aut`.
    pub u: BigUint,
    /// `|t_v|` for every vertex in preorder.
    pub subtree_sizes: Vec<usize>,
}

/// Parsed tree with vertices numbered in preorder, so the subtree of `v`
/// is the id range `v .. v + size[v]`.
#[derive(Debug, Clone)]
pub(crate) struct Shape {
    pub(crate) parent: Vec<Option<usize>>,
    pub(crate) children: Vec<Vec<usize>>,
    pub(crate) size: Vec<usize>,
    /// Byte range of each vertex's encoding inside the source string.
    pub(crate) span: Vec<(usize, usize)>,
}

impl Shape {
    fn parse(s: &str) -> Result<Shape> {
        let bytes = s.as_bytes();
        if bytes.is_empty() {
            return Err(Error::MalformedTree("empty encoding".into()));
        }
        let mut parent = Vec::new();
        let mut children: Vec<Vec<usize>> = Vec::new();
        let mut span = Vec::new();
        let mut stack: Vec<usize> = Vec::new();
        for (pos, &b) in bytes.iter().enumerate() {
            match b {
                b'(' => {
                    if stack.is_empty() && !parent.is_empty() {
                        return Err(Error::MalformedTree(format!("second root at byte {pos}")));
                    }
                    let id = parent.len();
                    let p = stack.last().copied();
                    parent.push(p);
                    children.push(Vec::new());
                    span.push((pos, pos));
                    if let Some(p) = p {
                        children[p].push(id);
                    }
                    stack.push(id);
                }
                b')' => {
                    let id = stack
                        .pop()
                        .ok_or_else(|| Error::MalformedTree(format!("unbalanced ')' at byte {pos}")))?;
                    span[id].1 = pos + 1;
                }
                other => {
                    return Err(Error::MalformedTree(format!(
                        "unexpected character {:?} at byte {pos}",
                        other as char
                    )))
                }
            }
        }
        if !stack.is_empty() {
            return Err(Error::MalformedTree("unbalanced '('".into()));
        }
        let size = span.iter().map(|&(a, b)| (b - a) / 2).collect();
        Ok(Shape { parent, children, size, span })
    }

    fn n(&self) -> usize {
        self.parent.len()
    }
}

/// Canonical encoding of the tree given by `children` lists rooted at `root`.
/// The caller guarantees the structure is a tree.
fn encode(children: &[Vec<usize>], root: usize) -> String {
    // Post-order with an explicit stack; each finished vertex leaves its
    // encoding in `enc`.
    let mut enc: Vec<Option<String>> = vec![None; children.len()];
    let mut stack = vec![(root, false)];
    while let Some((v, expanded)) = stack.pop() {
        if expanded {
            let mut parts: Vec<String> = children[v].iter().map(|&c| enc[c].take().unwrap()).collect();
            parts.sort_unstable();
            let len = 2 + parts.iter().map(String::len).sum::<usize>();
            let mut s = String::with_capacity(len);
            s.push('(');
            for p in parts {
                s.push_str(&p);
            }
            s.push(')');
            enc[v] = Some(s);
        } else {
            stack.push((v, true));
            for &c in &children[v] {
                stack.push((c, false));
            }
        }
    }
    enc[root].take().unwrap()
}

/// Canonical form of the rooted tree given by undirected adjacency lists.
pub fn canonicalize(adjacency: &[Vec<usize>], root: usize) -> Result<CanonicalTree> {
    let n = adjacency.len();
    if root >= n {
        return Err(Error::MalformedTree(format!("root {root} out of range for {n} vertices")));
    }
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut children = vec![Vec::new(); n];
    seen[root] = true;
    let mut stack = vec![root];
    let mut visited = 1;
    while let Some(v) = stack.pop() {
        for &w in &adjacency[v] {
            if w >= n {
                return Err(Error::MalformedTree(format!("vertex {w} out of range")));
            }
            if Some(w) == parent[v] {
                continue;
            }
            if seen[w] {
                return Err(Error::MalformedTree(format!("cycle through vertex {w}")));
            }
            seen[w] = true;
            visited += 1;
            parent[w] = Some(v);
            children[v].push(w);
            stack.push(w);
        }
    }
    if visited != n {
        return Err(Error::MalformedTree(format!(
            "disconnected: {visited} of {n} vertices reachable from the root"
        )));
    }
    Ok(CanonicalTree { canon: encode(&children, root) })
}

/// Canonical form of the tree given by a parent array with exactly one root.
pub fn canonicalize_parents(parents: &[Option<usize>]) -> Result<CanonicalTree> {
    let n = parents.len();
    let mut children = vec![Vec::new(); n];
    let mut root = None;
    for (v, &p) in parents.iter().enumerate() {
        match p {
            None if root.is_some() => {
                return Err(Error::MalformedTree("more than one root".into()));
            }
            None => root = Some(v),
            Some(p) if p >= n || p == v => {
                return Err(Error::MalformedTree(format!("bad parent {p} for vertex {v}")));
            }
            Some(p) => children[p].push(v),
        }
    }
    let root = root.ok_or_else(|| Error::MalformedTree("no root (cycle or empty input)".into()))?;
    // Every vertex must reach the root.
    let mut state = vec![0u8; n];
    state[root] = 2;
    for v in 0..n {
        let mut path = Vec::new();
        let mut x = v;
        while state[x] == 0 {
            state[x] = 1;
            path.push(x);
            x = parents[x].unwrap();
        }
        if state[x] == 1 {
            return Err(Error::MalformedTree(format!("cycle through vertex {x}")));
        }
        for y in path {
            state[y] = 2;
        }
    }
    Ok(CanonicalTree { canon: encode(&children, root) })
}

impl CanonicalTree {
    /// Parses any balanced encoding and returns its canonical form.
    pub fn parse(s: &str) -> Result<Self> {
        let shape = Shape::parse(s.trim())?;
        Ok(CanonicalTree { canon: encode(&shape.children, 0) })
    }

    pub fn single() -> Self {
        CanonicalTree { canon: "()".into() }
    }

    /// Path with `n` vertices.
    pub fn path(n: usize) -> Self {
        assert!(n >= 1);
        CanonicalTree { canon: "(".repeat(n) + &")".repeat(n) }
    }

    /// Root with `n - 1` leaf children.
    pub fn star(n: usize) -> Self {
        assert!(n >= 1);
        CanonicalTree { canon: format!("({})", "()".repeat(n - 1)) }
    }

    pub fn as_str(&self) -> &str {
        &self.canon
    }

    pub fn n(&self) -> usize {
        self.canon.len() / 2
    }

    pub(crate) fn shape(&self) -> Shape {
        Shape::parse(&self.canon).expect("canonical strings are well formed")
    }

    /// Parent array in preorder; vertex 0 is the root.
    pub fn parents(&self) -> Vec<Option<usize>> {
        self.shape().parent
    }

    pub fn height(&self) -> usize {
        let mut depth = 0usize;
        let mut best = 0;
        for b in self.canon.bytes() {
            if b == b'(' {
                depth += 1;
                best = best.max(depth);
            } else {
                depth -= 1;
            }
        }
        best - 1
    }

    /// Subtrees hanging from the root, in canonical order.
    pub fn root_subtrees(&self) -> Vec<CanonicalTree> {
        let shape = self.shape();
        shape.children[0]
            .iter()
            .map(|&c| {
                let (a, b) = shape.span[c];
                CanonicalTree { canon: self.canon[a..b].to_string() }
            })
            .collect()
    }
}

impl fmt::Display for CanonicalTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canon)
    }
}

impl FromStr for CanonicalTree {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CanonicalTree::parse(s)
    }
}

impl TryFrom<String> for CanonicalTree {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        CanonicalTree::parse(&s)
    }
}

impl From<CanonicalTree> for String {
    fn from(t: CanonicalTree) -> String {
        t.canon
    }
}

/// All rooted trees with `n` vertices, sorted by canonical string.
pub fn enumerate_trees(n: usize) -> Result<Vec<CanonicalTree>> {
    if n == 0 || n > MAX_ENUMERATION_N {
        return Err(Error::SizeLimit {
            what: "enumeration size n",
            value: n as u64,
            limit: MAX_ENUMERATION_N as u64,
        });
    }
    // by_size[k] holds the sorted canonical strings of all trees of size k.
    let mut by_size: Vec<Vec<String>> = vec![Vec::new(), vec!["()".to_string()]];
    for k in 2..=n {
        let mut out = Vec::new();
        let mut forest = Vec::new();
        forests(&by_size, k - 1, (k - 1, usize::MAX), &mut forest, &mut out);
        out.sort_unstable();
        by_size.push(out);
    }
    Ok(by_size[n].iter().map(|s| CanonicalTree { canon: s.clone() }).collect())
}

/// Multisets of trees with total size `rem`, generated as nonincreasing
/// sequences of `(size, index)` so each multiset appears once.
fn forests(
    by_size: &[Vec<String>],
    rem: usize,
    bound: (usize, usize),
    cur: &mut Vec<(usize, usize)>,
    out: &mut Vec<String>,
) {
    if rem == 0 {
        let mut parts: Vec<&str> = cur.iter().map(|&(k, i)| by_size[k][i].as_str()).collect();
        parts.sort_unstable();
        out.push(format!("({})", parts.concat()));
        return;
    }
    for k in (1..=rem.min(bound.0)).rev() {
        let top = if k == bound.0 { bound.1.min(by_size[k].len() - 1) } else { by_size[k].len() - 1 };
        for i in (0..=top).rev() {
            cur.push((k, i));
            forests(by_size, rem - k, (k, i), cur, out);
            cur.pop();
        }
    }
}

fn factorial(n: usize) -> BigUint {
    (2..=n as u64).fold(BigUint::one(), |acc, k| acc * k)
}

/// `d(t)`, `|Aut(t)|` and `u(t)` from the hook-length formula.
pub fn hook_counts(t: &CanonicalTree) -> Result<HookData> {
    let shape = t.shape();
    let n = shape.n();
    let hooks = shape.size.iter().fold(BigUint::one(), |acc, &s| acc * s as u64);
    let (d, rem) = factorial(n).div_rem(&hooks);
    if !rem.is_zero() {
        return Err(Error::Internal(format!("hook product does not divide {n}! for {t}")));
    }
    // Equal sibling subtrees are adjacent in canonical order.
    let mut aut = BigUint::one();
    for kids in &shape.children {
        let mut run = 1usize;
        for w in kids.windows(2) {
            let (a0, b0) = shape.span[w[0]];
            let (a1, b1) = shape.span[w[1]];
            if t.canon[a0..b0] == t.canon[a1..b1] {
                run += 1;
            } else {
                aut *= factorial(run);
                run = 1;
            }
        }
        aut *= factorial(run);
    }
    let (u, rem) = d.div_rem(&aut);
    if !rem.is_zero() {
        return Err(Error::Internal(format!("|Aut| does not divide d for {t}")));
    }
    Ok(HookData { d, aut, u, subtree_sizes: shape.size })
}

/// `Π_{i=1}^{n-1} binom(i+1, 2)`, the number of pairs of recursive trees.
pub fn plancherel_normalizer(n: usize) -> BigUint {
    (1..n as u64).fold(BigUint::one(), |acc, i| acc * (i * (i + 1) / 2))
}

/// `(Π binom(i+1,2), Σ_t d(t) u(t))` over all trees of size `n`.
pub fn fundamental_identity(n: usize) -> Result<(BigUint, BigUint)> {
    if n == 0 || n > MAX_IDENTITY_N {
        return Err(Error::SizeLimit {
            what: "fundamental identity size n",
            value: n as u64,
            limit: MAX_IDENTITY_N as u64,
        });
    }
    let mut rhs = BigUint::zero();
    for t in enumerate_trees(n)? {
        let h = hook_counts(&t)?;
        rhs += h.d * h.u;
    }
    Ok((plancherel_normalizer(n), rhs))
}

/// Plancherel probability `d(t) u(t) / Π binom(i+1, 2)`.
pub fn plancherel_weight(t: &CanonicalTree) -> Result<BigRational> {
    let h = hook_counts(t)?;
    Ok(BigRational::new((h.d * h.u).into(), plancherel_normalizer(t.n()).into()))
}

/// Exact Plancherel law on all trees of size `n`, as floats.
pub fn plancherel_distribution(n: usize) -> Result<Vec<(CanonicalTree, f64)>> {
    enumerate_trees(n)?
        .into_iter()
        .map(|t| {
            let w = plancherel_weight(&t)?;
            Ok((t, w.to_f64().unwrap_or(f64::NAN)))
        })
        .collect()
}

/// Leaf multiplicities `m_t(t')`: how many leaves of `t` yield class `t'`.
pub fn leaf_removals(t: &CanonicalTree) -> Result<BTreeMap<CanonicalTree, u64>> {
    let shape = t.shape();
    let n = shape.n();
    if n < 2 {
        return Err(Error::Precondition("leaf removal needs at least 2 vertices".into()));
    }
    let mut out = BTreeMap::new();
    for leaf in (1..n).filter(|&v| shape.children[v].is_empty()) {
        *out.entry(remove_vertex(&shape, leaf)).or_insert(0) += 1;
    }
    Ok(out)
}

fn remove_vertex(shape: &Shape, leaf: usize) -> CanonicalTree {
    let children: Vec<Vec<usize>> = shape
        .children
        .iter()
        .map(|kids| kids.iter().copied().filter(|&c| c != leaf).collect())
        .collect();
    CanonicalTree { canon: encode(&children, 0) }
}

/// Exact transition law `m_t(t') g(t') / g(t)` of the leaf-removal walk,
/// where `g` is the hook-length count.
pub fn leaf_removal_law(t: &CanonicalTree) -> Result<Vec<(CanonicalTree, BigRational)>> {
    let g = hook_counts(t)?.d;
    leaf_removals(t)?
        .into_iter()
        .map(|(t2, m)| {
            let g2 = hook_counts(&t2)?.d;
            Ok((t2, BigRational::new((g2 * m).into(), g.clone().into())))
        })
        .collect()
}

/// One step of the leaf-removal walk: pick a uniform vertex, then keep
/// picking uniformly inside the current subtree (excluding its top) until a
/// leaf is hit, and remove that leaf.
pub fn random_leaf_removal<R: Rng + ?Sized>(t: &CanonicalTree, rng: &mut R) -> Result<CanonicalTree> {
    let shape = t.shape();
    let n = shape.n();
    if n < 2 {
        return Err(Error::Precondition("leaf removal needs at least 2 vertices".into()));
    }
    let mut v = rng.random_range(0..n);
    while !shape.children[v].is_empty() {
        v = rng.random_range(v + 1..v + shape.size[v]);
    }
    Ok(remove_vertex(&shape, v))
}
