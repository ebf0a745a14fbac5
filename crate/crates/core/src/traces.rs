//! Trace differences `tr(T_k(H_V/√2) - T_k(H_0/√2))` on rooted subtrees.
//!
//! A diagonal entry of a degree-`k` polynomial in `H` at `u` only sees walks
//! of length `k` returning to `u`, so it differs between `H_V` and `H_0` only
//! when `u` lies within `⌊k/2⌋` of the support. Both evaluations below are
//! exact finite computations.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use serde::Serialize;

use crate::conformal::{chebyshev_monomials, CosCoeffs};
use crate::quadrature::neumaier_sum;
use crate::spectrum::supported_subtree_roots;
use crate::tree::{ball_len, hypothesis_sums, Potential, VertexId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceReport {
    pub k: usize,
    pub subtree_root: VertexId,
    pub value: f64,
    /// Depth of the plain ball on which every contributing walk lives.
    pub ball_depth_used: u32,
}

type SparseVec = BTreeMap<usize, f64>;

/// `(H + V)/√2` applied to a sparse vector on the infinite rooted tree.
fn apply_scaled(v: &Potential, x: &SparseVec) -> SparseVec {
    let mut out = SparseVec::new();
    for (&i, &val) in x {
        let s = val * FRAC_1_SQRT_2;
        let pot = v.get(VertexId::from_linear(i));
        if pot != 0.0 {
            *out.entry(i).or_insert(0.0) += pot * s;
        }
        if i > 0 {
            *out.entry((i - 1) / 2).or_insert(0.0) += s;
        }
        *out.entry(2 * i + 1).or_insert(0.0) += s;
        *out.entry(2 * i + 2).or_insert(0.0) += s;
    }
    out
}

fn dot(a: &SparseVec, b: &SparseVec) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    neumaier_sum(
        small
            .iter()
            .filter_map(|(i, x)| large.get(i).map(|y| x * y)),
    )
}

/// `T_k(A)_{uu}` for `A = (H + V)/√2`, using `T_j² = T_{2j} + 2` and
/// `T_j T_{j+1} = T_{2j+1} + T_1` so only `⌈k/2⌉` steps are needed.
fn chebyshev_diagonal(v: &Potential, u: usize, k: usize) -> f64 {
    let half = k / 2;
    let steps = if k.is_multiple_of(2) { half } else { half + 1 };
    let mut vecs: Vec<SparseVec> = Vec::with_capacity(steps + 1);
    vecs.push(SparseVec::from([(u, 2.0)]));
    if steps >= 1 {
        vecs.push(apply_scaled(v, &SparseVec::from([(u, 1.0)])));
    }
    for j in 1..steps {
        let mut next = apply_scaled(v, &vecs[j]);
        for (i, x) in &vecs[j - 1] {
            *next.entry(*i).or_insert(0.0) -= x;
        }
        vecs.push(next);
    }
    if k.is_multiple_of(2) {
        dot(&vecs[half], &vecs[half]) - 2.0
    } else {
        dot(&vecs[half], &vecs[half + 1]) - v.get(VertexId::from_linear(u)) * FRAC_1_SQRT_2
    }
}

/// Vertices of the rooted tree within graph distance `r` of the support.
fn neighbourhood(v: &Potential, r: usize) -> BTreeSet<usize> {
    let mut seen: BTreeSet<usize> = v.support().map(|x| x.linear()).collect();
    let mut frontier: Vec<usize> = seen.iter().copied().collect();
    for _ in 0..r {
        let mut next = Vec::new();
        for &i in &frontier {
            let mut nb = vec![2 * i + 1, 2 * i + 2];
            if i > 0 {
                nb.push((i - 1) / 2);
            }
            for j in nb {
                if seen.insert(j) {
                    next.push(j);
                }
            }
        }
        frontier = next;
    }
    seen
}

/// `tr(T_k(H_{V,T_x}/√2) - T_k(H_{0,T_x}/√2))`, exact.
pub fn cheb_trace_diff(v: &Potential, x: VertexId, k: usize) -> TraceReport {
    let vx = v.subtree_view(x);
    let ball_depth_used = vx.support_depth() + k as u32;
    let value = if vx.is_zero() || k == 0 {
        0.0
    } else {
        let zero = Potential::zero();
        neumaier_sum(
            neighbourhood(&vx, k / 2)
                .into_iter()
                .map(|u| chebyshev_diagonal(&vx, u, k) - chebyshev_diagonal(&zero, u, k)),
        )
    };
    TraceReport {
        k,
        subtree_root: x,
        value,
        ball_depth_used,
    }
}

/// `Σ_{n≥1} (c_n/n) tr(T_n(H_V/√2) - T_n(H_0/√2))` on `T_x`.
pub fn trace_side(v: &Potential, x: VertexId, w: &CosCoeffs) -> f64 {
    neumaier_sum(
        w.coeffs()
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, c)| **c != 0.0)
            .map(|(n, c)| c / n as f64 * cheb_trace_diff(v, x, n).value),
    )
}

/// `tr(p(H_{V,T_x}) - p(H_{0,T_x}))` for a polynomial with monomial
/// coefficients `p` (lowest first), by repeated products with the plain
/// adjacency matrix of a ball deep enough for every contributing walk.
pub fn poly_trace_diff(v: &Potential, x: VertexId, p: &[f64]) -> f64 {
    let vx = v.subtree_view(x);
    if vx.is_zero() || p.len() <= 1 {
        return 0.0;
    }
    let deg = p.len() - 1;
    let sd = vx.support_depth();
    let depth = sd + deg as u32;
    let n = ball_len(depth);
    let with = vx.dense(depth);
    let without = vec![0.0; n];
    let matvec = |pot: &[f64], a: &[f64]| -> Vec<f64> {
        let mut out: Vec<f64> = a.iter().zip(pot).map(|(ai, vi)| ai * vi).collect();
        for i in 1..n {
            let parent = (i - 1) / 2;
            out[i] += a[parent];
            out[parent] += a[i];
        }
        out
    };
    let diag_poly = |pot: &[f64], u: usize| -> f64 {
        let mut e = vec![0.0; n];
        e[u] = 1.0;
        let mut acc = p[0];
        let mut cur = e;
        for coeff in &p[1..] {
            cur = matvec(pot, &cur);
            acc += coeff * cur[u];
        }
        acc
    };
    // vertices deeper than sd + deg/2 cannot reach the support and back
    let contributing = ball_len(sd + (deg / 2) as u32);
    neumaier_sum((0..contributing).map(|u| diag_poly(&with, u) - diag_poly(&without, u)))
}

/// Monomial coefficients in `H` of `Σ_{n≥1} (c_n/n) T_n(H/√2)`, constant
/// term dropped (it cancels in every trace difference).
pub fn weight_trace_polynomial(w: &CosCoeffs) -> Vec<f64> {
    let mut out = vec![0.0; w.degree() + 1];
    for (n, c) in w.coeffs().iter().enumerate().skip(1) {
        for (j, b) in chebyshev_monomials(n).iter().enumerate().skip(1) {
            out[j] += c / n as f64 * b / SQRT_2.powi(j as i32);
        }
    }
    out
}

/// The trace side through monomials in `H`; independent of [`trace_side`].
pub fn trace_side_direct(v: &Potential, x: VertexId, w: &CosCoeffs) -> f64 {
    poly_trace_diff(v, x, &weight_trace_polynomial(w))
}

/// `(1/8) tr(K(H_V) - K(H_0))` on `T_x` with `K(H) = H⁴ - 24H²`.
pub fn k_form_trace(v: &Potential, x: VertexId) -> f64 {
    poly_trace_diff(v, x, &[0.0, 0.0, -24.0, 0.0, 1.0]) / 8.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceLedger {
    /// Tree trace side minus the shell-weighted subtree trace sides, assembled
    /// from Chebyshev traces.
    pub bracket: f64,
    /// The same bracket through monomial traces.
    pub bracket_direct: f64,
    /// `Σ_{j=1}^{N} 2^{-j} Σ_{|x|=j} V(x)⁴`
    pub sum_v4: f64,
    /// `Σ_{j≥2} 2^{-j} Σ_{|x|=j} (δV)(x)²`, including the drop at shell `N + 1`.
    pub sum_dv2: f64,
}

fn ledger_bracket<F: Fn(&Potential, VertexId) -> f64>(vn: &Potential, side: F) -> f64 {
    let mut terms = vec![side(vn, VertexId::ROOT)];
    for x in supported_subtree_roots(vn) {
        terms.push(-0.5f64.powi(x.depth() as i32) * side(vn, x));
    }
    neumaier_sum(terms)
}

pub fn trace_ledger(v: &Potential, n: u32, w: &CosCoeffs) -> TraceLedger {
    let vn = v.truncate(n);
    let sums = hypothesis_sums(&vn, 2, n + 1, 2);
    TraceLedger {
        bracket: ledger_bracket(&vn, |p, x| trace_side(p, x, w)),
        bracket_direct: ledger_bracket(&vn, |p, x| trace_side_direct(p, x, w)),
        sum_v4: sums.power_sum,
        sum_dv2: sums.delta_sum,
    }
}

/// The `(1/8) K` form of the bracket, for the `16 sin⁴θ` weight.
pub fn k_form_ledger(v: &Potential, n: u32) -> f64 {
    ledger_bracket(&v.truncate(n), k_form_trace)
}

/// Smallest `C` with `bracket ≥ -C (sum_v4 + sum_dv2)` across the given ledgers.
pub fn empirical_bound_constant(ledgers: &[TraceLedger]) -> f64 {
    ledgers
        .iter()
        .filter(|l| l.sum_v4 + l.sum_dv2 > 0.0)
        .map(|l| (-l.bracket).max(0.0) / (l.sum_v4 + l.sum_dv2))
        .fold(0.0, f64::max)
}
