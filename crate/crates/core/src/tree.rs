//! Vertex addressing on the rooted binary tree and potentials living on it.
//!
//! Vertices are addressed as `(depth, index)` with `index` in `[1, 2^depth]`.
//! The linear index `2^depth - 1 + (index - 1)` is the usual heap layout, so
//! the ball of depth `D` is the contiguous prefix `0..2^(D+1) - 1` and the
//! children of linear index `i` sit at `2i + 1` and `2i + 2`.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Deepest addressable level. Keeps `2^(depth+1)` inside `u64`.
pub const MAX_DEPTH: u32 = 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct VertexId {
    depth: u32,
    index: u64,
}

impl VertexId {
    pub const ROOT: VertexId = VertexId { depth: 0, index: 1 };

    pub fn new(depth: u32, index: u64) -> Result<Self> {
        if depth > MAX_DEPTH || index == 0 || index > (1u64 << depth) {
            return Err(Error::MalformedVertex { depth, index });
        }
        Ok(Self { depth, index })
    }

    pub fn from_linear(linear: usize) -> Self {
        let l = linear as u64 + 1;
        let depth = 63 - l.leading_zeros();
        Self {
            depth,
            index: l - (1u64 << depth) + 1,
        }
    }

    #[inline]
    pub fn linear(self) -> usize {
        ((1u64 << self.depth) - 1 + (self.index - 1)) as usize
    }

    #[inline]
    pub fn depth(self) -> u32 {
        self.depth
    }

    #[inline]
    pub fn index(self) -> u64 {
        self.index
    }

    pub fn is_root(self) -> bool {
        self.depth == 0
    }

    pub fn parent(self) -> Option<Self> {
        (self.depth > 0).then(|| Self {
            depth: self.depth - 1,
            index: self.index.div_ceil(2),
        })
    }

    pub fn children(self) -> [Self; 2] {
        let d = self.depth + 1;
        [
            Self {
                depth: d,
                index: 2 * self.index - 1,
            },
            Self {
                depth: d,
                index: 2 * self.index,
            },
        ]
    }

    /// The other child of `self`'s parent; `None` at the root.
    pub fn sibling(self) -> Option<Self> {
        self.parent().map(|_| Self {
            depth: self.depth,
            index: if self.index % 2 == 1 {
                self.index + 1
            } else {
                self.index - 1
            },
        })
    }

    /// Root-to-`self` path, root first.
    pub fn path(self) -> Vec<Self> {
        let mut path = Vec::with_capacity(self.depth as usize + 1);
        let mut v = Some(self);
        while let Some(x) = v {
            path.push(x);
            v = x.parent();
        }
        path.reverse();
        path
    }

    /// Address of `self` inside the subtree `T_ancestor`, relabeled to root
    /// coordinates: `(n + d, (k - 1) 2^d + r)` maps to `(d, r)`.
    pub fn relative_to(self, ancestor: Self) -> Option<Self> {
        if self.depth < ancestor.depth {
            return None;
        }
        let d = self.depth - ancestor.depth;
        let first = (ancestor.index - 1) << d;
        let r = self.index.checked_sub(first)?;
        (r >= 1 && r <= 1u64 << d).then_some(Self { depth: d, index: r })
    }

    /// Inverse of [`relative_to`](Self::relative_to): the vertex of `T`
    /// reached from `self` by the relative address `rel` of `T_self`.
    pub fn compose(self, rel: Self) -> Result<Self> {
        Self::new(
            self.depth + rel.depth,
            ((self.index - 1) << rel.depth) + rel.index,
        )
    }

    pub fn distance(self, other: Self) -> u32 {
        let (mut a, mut b) = (self, other);
        let mut dist = 0;
        while a.depth > b.depth {
            a = a.parent().unwrap();
            dist += 1;
        }
        while b.depth > a.depth {
            b = b.parent().unwrap();
            dist += 1;
        }
        while a != b {
            a = a.parent().unwrap();
            b = b.parent().unwrap();
            dist += 2;
        }
        dist
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.depth == 0 {
            write!(f, "0")
        } else {
            write!(f, "({}, {})", self.depth, self.index)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbors {
    pub parent: Option<VertexId>,
    pub children: [VertexId; 2],
}

pub fn navigate(v: VertexId) -> Neighbors {
    Neighbors {
        parent: v.parent(),
        children: v.children(),
    }
}

/// Number of vertices in the ball of depth `depth`.
#[inline]
pub fn ball_len(depth: u32) -> usize {
    (1usize << (depth + 1)) - 1
}

/// All vertices of depth at most `depth`, in linear-index order.
#[derive(Debug, Clone)]
pub struct Ball {
    depth: u32,
    vertices: Vec<VertexId>,
}

impl Ball {
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn index_of(&self, v: VertexId) -> Option<usize> {
        (v.depth <= self.depth).then(|| v.linear())
    }
}

pub fn ball_enumerate(depth: u32) -> Ball {
    Ball {
        depth,
        vertices: (0..ball_len(depth)).map(VertexId::from_linear).collect(),
    }
}

/// The root-to-`y` path together with the off-path neighbours of its vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrontierSet {
    pub path: Vec<VertexId>,
    pub frontier: Vec<VertexId>,
}

pub fn frontier_set(y: VertexId) -> FrontierSet {
    let path = y.path();
    let mut frontier = Vec::with_capacity(path.len() + 1);
    for w in path.iter().skip(1) {
        frontier.push(w.sibling().expect("non-root path vertex"));
    }
    frontier.extend(y.children());
    frontier.sort();
    FrontierSet { path, frontier }
}

/// A finitely supported real potential on the vertices of the tree.
///
/// Exact zeros are never stored, so the key set is the support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Potential {
    values: BTreeMap<VertexId, f64>,
    support_depth: u32,
}

impl Potential {
    pub fn zero() -> Self {
        Self {
            values: BTreeMap::new(),
            support_depth: 0,
        }
    }

    pub fn with_support_depth(support_depth: u32) -> Self {
        Self {
            values: BTreeMap::new(),
            support_depth,
        }
    }

    pub fn from_values<I>(support_depth: u32, values: I) -> Result<Self>
    where
        I: IntoIterator<Item = (VertexId, f64)>,
    {
        let mut v = Self::with_support_depth(support_depth);
        for (x, val) in values {
            v.set(x, val)?;
        }
        Ok(v)
    }

    /// Radially symmetric potential `V(x) = profile[|x|]`.
    pub fn radial(profile: &[f64]) -> Self {
        let depth = profile.len().saturating_sub(1) as u32;
        let mut v = Self::with_support_depth(depth);
        for (n, &val) in profile.iter().enumerate() {
            for k in 1..=(1u64 << n) {
                v.insert_unchecked(
                    VertexId {
                        depth: n as u32,
                        index: k,
                    },
                    val,
                );
            }
        }
        v
    }

    /// Seeded random potential: i.i.d. uniform values on `[-amplitude, amplitude]`
    /// for every vertex of depth at most `depth`, drawn in linear-index order from
    /// ChaCha8 seeded with `seed`. With `decay = Some(alpha)` the value at depth `n`
    /// is multiplied by `(n + 1)^(-alpha)`.
    pub fn random(seed: u64, depth: u32, amplitude: f64, decay: Option<f64>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = Self::with_support_depth(depth);
        for i in 0..ball_len(depth) {
            let x = VertexId::from_linear(i);
            let u: f64 = rng.random_range(-1.0..=1.0);
            let envelope = decay.map_or(1.0, |a| ((x.depth + 1) as f64).powf(-a));
            v.insert_unchecked(x, amplitude * u * envelope);
        }
        v
    }

    pub fn set(&mut self, x: VertexId, value: f64) -> Result<()> {
        if x.depth > self.support_depth {
            return Err(Error::OutsideSupport {
                vertex: x,
                support_depth: self.support_depth,
            });
        }
        self.insert_unchecked(x, value);
        Ok(())
    }

    fn insert_unchecked(&mut self, x: VertexId, value: f64) {
        if value == 0.0 {
            self.values.remove(&x);
        } else {
            self.values.insert(x, value);
        }
    }

    #[inline]
    pub fn get(&self, x: VertexId) -> f64 {
        self.values.get(&x).copied().unwrap_or(0.0)
    }

    pub fn support_depth(&self) -> u32 {
        self.support_depth
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    pub fn support_len(&self) -> usize {
        self.values.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VertexId, f64)> + '_ {
        self.values.iter().map(|(&x, &v)| (x, v))
    }

    pub fn support(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.values.keys().copied()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Values on the ball of depth `depth`, indexed by linear index.
    pub fn dense(&self, depth: u32) -> Vec<f64> {
        let mut out = vec![0.0; ball_len(depth)];
        for (x, v) in self.iter() {
            if x.depth <= depth {
                out[x.linear()] = v;
            }
        }
        out
    }

    pub fn truncate(&self, n: u32) -> Self {
        truncate(self, n)
    }

    pub fn subtree_view(&self, x: VertexId) -> Self {
        subtree_view(self, x)
    }
}

pub fn truncate(v: &Potential, n: u32) -> Potential {
    Potential {
        values: v
            .values
            .iter()
            .filter(|(x, _)| x.depth <= n)
            .map(|(&x, &val)| (x, val))
            .collect(),
        support_depth: n.min(v.support_depth),
    }
}

/// Restriction of `v` to the subtree `T_x`, relabeled so that `x` becomes the root.
pub fn subtree_view(v: &Potential, x: VertexId) -> Potential {
    let values: BTreeMap<_, _> = v
        .values
        .iter()
        .filter_map(|(&y, &val)| y.relative_to(x).map(|r| (r, val)))
        .collect();
    Potential {
        values,
        support_depth: v.support_depth.saturating_sub(x.depth),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Difference {
    /// `(δV)(n, j) = V(n-1, ⌈j/2⌉) - V(n, j)` for `n >= 1`.
    Delta,
    /// `(δ̃V)(n, j) = V(n, j) - (V(n+1, 2j-1) + V(n+1, 2j)) / 2` for `n >= 0`.
    DeltaTilde,
}

pub fn difference_op(v: &Potential, kind: Difference) -> Potential {
    match kind {
        Difference::Delta => {
            let depth = v.support_depth + 1;
            let mut out = Potential::with_support_depth(depth);
            for i in 1..ball_len(depth) {
                let x = VertexId::from_linear(i);
                let p = x.parent().unwrap();
                out.insert_unchecked(x, v.get(p) - v.get(x));
            }
            out
        }
        Difference::DeltaTilde => {
            let depth = v.support_depth;
            let mut out = Potential::with_support_depth(depth);
            for i in 0..ball_len(depth) {
                let x = VertexId::from_linear(i);
                let [a, b] = x.children();
                out.insert_unchecked(x, v.get(x) - 0.5 * (v.get(a) + v.get(b)));
            }
            out
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisSums {
    /// `Σ_{n=1}^{D} 2^{-n} Σ_{|x|=n} V(x)^{2p}`
    pub power_sum: f64,
    /// `Σ_{n=delta_start}^{D} 2^{-n} Σ_{|x|=n} (δV)(x)^2`
    pub delta_sum: f64,
    pub delta_start: u32,
}

/// Shell-weighted sums appearing in the hypotheses of the sum-rule theorems.
pub fn hypothesis_sums(v: &Potential, p: u32, depth: u32, delta_start: u32) -> HypothesisSums {
    let mut power = vec![0.0; depth as usize + 1];
    for (x, val) in v.iter() {
        if x.depth >= 1 && x.depth <= depth {
            power[x.depth as usize] += val.powi(2 * p as i32);
        }
    }
    let dv = difference_op(v, Difference::Delta);
    let mut delta = vec![0.0; depth as usize + 1];
    for (x, val) in dv.iter() {
        if x.depth >= delta_start.max(1) && x.depth <= depth {
            delta[x.depth as usize] += val * val;
        }
    }
    let shell_weighted = |s: &[f64]| {
        s.iter()
            .enumerate()
            .map(|(n, t)| t * 0.5f64.powi(n as i32))
            .sum::<f64>()
    };
    HypothesisSums {
        power_sum: shell_weighted(&power),
        delta_sum: shell_weighted(&delta),
        delta_start,
    }
}
