//! Discrete spectrum outside the band `[-2√2, 2√2]`.
//!
//! For real `ζ` the exact finite-section matrix `K(ζ) = H_B + V - z + √2 ζ P_D`
//! is real symmetric and `dK/dζ = √2(ζ^{-2} - 1) + √2 P_D` is positive
//! definite on `(-1, 0) ∪ (0, 1)`. The number of negative eigenvalues of `K`
//! therefore decreases by the multiplicity of each zero of `L_T` as `ζ`
//! increases, and zeros are located by bisection on that count.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::Serialize;

use crate::conformal::{f_a_eval, zeta_to_x, BAND_EDGE};
use crate::determinant::det_root_raw;
use crate::error::Result;
use crate::resolvent::{ball_diagonal, tree_negative_count};
use crate::tree::{ball_len, Potential, VertexId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenEntry {
    pub zeta: f64,
    pub x: f64,
    pub mult: usize,
    /// Set when the zero sits within the grid resolution of `±1` or when the
    /// winding number disagrees with the inertia count.
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenLedger {
    pub entries: Vec<EigenEntry>,
    pub subtree_root: VertexId,
}

impl EigenLedger {
    pub fn empty(subtree_root: VertexId) -> Self {
        Self {
            entries: Vec::new(),
            subtree_root,
        }
    }

    pub fn total_multiplicity(&self) -> usize {
        self.entries.iter().map(|e| e.mult).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Eigenvalues repeated by multiplicity, in ledger order.
    pub fn energies(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|e| std::iter::repeat_n(e.x, e.mult))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchOptions {
    /// Distance kept from `ζ = ±1` by the scan grid.
    pub edge_gap: f64,
    /// Grid intervals per half of the interval.
    pub grid: usize,
    pub tol: f64,
    pub winding_radius: f64,
    pub winding_nodes: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            edge_gap: 1e-4,
            grid: 2048,
            tol: 1e-13,
            winding_radius: 1e-4,
            winding_nodes: 64,
        }
    }
}

fn negative_count(v: &Potential, zeta: f64) -> usize {
    let diag: Vec<f64> = ball_diagonal(v, v.support_depth(), Complex64::new(zeta, 0.0))
        .iter()
        .map(|d| d.re)
        .collect();
    tree_negative_count(&diag)
}

/// Zeros of `L_{T_x}` on `(-1, 0) ∪ (0, 1)` with multiplicities.
pub fn eigen_zeta(v: &Potential, x: VertexId) -> Result<EigenLedger> {
    eigen_zeta_with(v, x, &SearchOptions::default())
}

pub fn eigen_zeta_with(v: &Potential, x: VertexId, opts: &SearchOptions) -> Result<EigenLedger> {
    let vx = v.subtree_view(x);
    if vx.is_zero() {
        return Ok(EigenLedger::empty(x));
    }
    let n = ball_len(vx.support_depth());
    // |x_s| ≤ 2√2 + max|V| keeps every zero away from ζ = 0
    let bound = BAND_EDGE + vx.max_abs() + 1.0;
    let inner = 0.5 * (bound - (bound * bound - 8.0).sqrt()) / (2.0 * SQRT_2);

    let mut found = Vec::new();
    for sign in [1.0, -1.0] {
        // on (0,1) the count falls from n; on (-1,0) it falls to 0 at ζ → 0⁻
        let count = |t: f64| negative_count(&vx, sign * t);
        let near_zero = if sign > 0.0 { n } else { 0 };
        let mut t_in = inner;
        while count(t_in) != near_zero {
            t_in *= 0.5;
        }
        let t_out = 1.0 - opts.edge_gap;
        let edge = 1.0 - 1e-14;
        let mut grid: Vec<f64> = (0..=opts.grid)
            .map(|j| t_in + (t_out - t_in) * j as f64 / opts.grid as f64)
            .collect();
        grid.push(edge);
        let counts: Vec<usize> = grid.iter().map(|&t| count(t)).collect();
        for w in 0..grid.len() - 1 {
            if counts[w] != counts[w + 1] {
                let low = w + 1 == grid.len() - 1;
                isolate(
                    &count,
                    grid[w],
                    counts[w],
                    grid[w + 1],
                    counts[w + 1],
                    opts.tol,
                    &mut |t, m| found.push((sign * t, m, low)),
                );
            }
        }
    }

    let mut entries = Vec::with_capacity(found.len());
    for (zeta, mult, low) in found {
        let winding = winding_number(&vx, zeta, opts);
        entries.push(EigenEntry {
            zeta,
            x: zeta_to_x(zeta),
            mult,
            low_confidence: low || winding != mult as i64,
        });
    }
    sort_ledger(&mut entries);
    Ok(EigenLedger {
        entries,
        subtree_root: x,
    })
}

/// Splits `(a, b)` until each count change is confined to an interval of width `tol`.
fn isolate<C, F>(count: &C, a: f64, ca: usize, b: f64, cb: usize, tol: f64, emit: &mut F)
where
    C: Fn(f64) -> usize,
    F: FnMut(f64, usize),
{
    if ca == cb {
        return;
    }
    let mid = 0.5 * (a + b);
    if b - a <= tol || mid <= a || mid >= b {
        // counts fall with |t| on (0,1) and rise on (-1,0); either way the
        // multiplicity is the size of the jump
        emit(mid, ca.abs_diff(cb));
        return;
    }
    let cm = count(mid);
    isolate(count, a, ca, mid, cm, tol, emit);
    isolate(count, mid, cm, b, cb, tol, emit);
}

/// Winding number of `L` around a small circle centred at `zeta`.
fn winding_number(v: &Potential, zeta: f64, opts: &SearchOptions) -> i64 {
    let m = opts.winding_nodes;
    let r = opts.winding_radius.min(0.5 * zeta.abs());
    let vals: Vec<Complex64> = (0..=m)
        .map(|j| {
            let p = Complex64::new(zeta, 0.0)
                + Complex64::from_polar(r, 2.0 * PI * j as f64 / m as f64);
            det_root_raw(v, p)
        })
        .collect();
    let turn: f64 = vals.windows(2).map(|w| (w[1] / w[0]).arg()).sum();
    (turn / (2.0 * PI)).round() as i64
}

/// `x > 2√2` in decreasing order, then `x < -2√2` in increasing order.
fn sort_ledger(entries: &mut [EigenEntry]) {
    entries.sort_by(|a, b| {
        let key = |e: &EigenEntry| if e.x > 0.0 { (0, -e.x) } else { (1, e.x) };
        key(a).partial_cmp(&key(b)).expect("finite eigenvalues")
    });
}

fn plain_negative_count(v: &[f64], shift: f64) -> usize {
    let diag: Vec<f64> = v.iter().map(|x| x - shift).collect();
    tree_negative_count(&diag)
}

/// Eigenvalues of the plain depth-`depth` truncation `H_B + V_B` lying
/// outside `[-2√2 - margin, 2√2 + margin]`, sorted increasingly. Sturm
/// bisection on the tree `LDLᵀ` inertia.
pub fn eigen_oracle(v: &Potential, depth: u32, margin: f64) -> Vec<f64> {
    let diag = v.dense(depth);
    let n = diag.len();
    let hi = BAND_EDGE + v.max_abs() + 1.0;
    let upper = BAND_EDGE + margin;
    let lower = -upper;
    let mut out = Vec::new();
    let below_lower = plain_negative_count(&diag, lower);
    for k in 0..below_lower {
        out.push(kth_eigenvalue(&diag, k, -hi, lower));
    }
    let below_upper = plain_negative_count(&diag, upper);
    for k in below_upper..n {
        out.push(kth_eigenvalue(&diag, k, upper, hi));
    }
    out
}

/// The `k`-th (0-based) eigenvalue, known to lie in `[a, b]`.
fn kth_eigenvalue(diag: &[f64], k: usize, mut a: f64, mut b: f64) -> f64 {
    while b - a > 1e-14 * (1.0 + a.abs().max(b.abs())) {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if plain_negative_count(diag, mid) > k {
            b = mid;
        } else {
            a = mid;
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum EvSumMode {
    /// `Σ |x_s ∓ 2√2|^p`, distance to the nearest band edge.
    Power(f64),
    /// `Σ F^A(x_s)` for the polynomial with the given coefficients.
    Penalty(Vec<f64>),
    /// `Σ (1 - |ζ_s|)^q`.
    Disk(f64),
}

pub fn ev_sums(ledger: &EigenLedger, mode: &EvSumMode) -> Result<f64> {
    let mut total = 0.0;
    for e in &ledger.entries {
        let term = match mode {
            EvSumMode::Power(p) => (e.x.abs() - BAND_EDGE).powf(*p),
            EvSumMode::Penalty(a) => f_a_eval(e.x, a)?,
            EvSumMode::Disk(q) => (1.0 - e.zeta.abs()).powf(*q),
        };
        total += e.mult as f64 * term;
    }
    Ok(total)
}

/// Vertices whose subtree meets the support of `v`, excluding the root.
pub fn supported_subtree_roots(v: &Potential) -> Vec<VertexId> {
    let mut roots: Vec<VertexId> = v
        .support()
        .flat_map(|x| x.path().into_iter().skip(1))
        .collect();
    roots.sort();
    roots.dedup();
    roots
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitStudy {
    pub depths: Vec<u32>,
    pub values: Vec<f64>,
    pub differences: Vec<f64>,
}

/// `EV^{q}_{V(n),T} - Σ_k 2^{-k} Σ_{|x|=k} EV^{q}_{V(n),T_x}` for each `n`.
pub fn ev_limit_study(v: &Potential, exponent: f64, depths: &[u32]) -> Result<LimitStudy> {
    let mode = EvSumMode::Power(exponent);
    let mut values = Vec::with_capacity(depths.len());
    for &n in depths {
        let vn = v.truncate(n);
        let mut bracket = ev_sums(&eigen_zeta(&vn, VertexId::ROOT)?, &mode)?;
        for x in supported_subtree_roots(&vn) {
            let w = 0.5f64.powi(x.depth() as i32);
            bracket -= w * ev_sums(&eigen_zeta(&vn, x)?, &mode)?;
        }
        values.push(bracket);
    }
    let differences = values.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(LimitStudy {
        depths: depths.to_vec(),
        values,
        differences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn rank_one(v0: f64) -> Potential {
        Potential::from_values(0, [(VertexId::ROOT, v0)]).unwrap()
    }

    #[test]
    fn rank_one_ledgers() {
        assert!(eigen_zeta(&Potential::zero(), VertexId::ROOT)
            .unwrap()
            .is_empty());
        let l = eigen_zeta(&rank_one(2.0), VertexId::ROOT).unwrap();
        assert_eq!(l.entries.len(), 1);
        let e = l.entries[0];
        assert!((e.zeta - SQRT_2 / 2.0).abs() < 1e-12);
        assert!((e.x - 3.0).abs() < 1e-10);
        assert_eq!(e.mult, 1);
        assert!(!e.low_confidence);
        assert!(eigen_zeta(&rank_one(1.0), VertexId::ROOT)
            .unwrap()
            .is_empty());
        let l = eigen_zeta(&rank_one(-2.5), VertexId::ROOT).unwrap();
        assert!((l.entries[0].x + 2.5 + 2.0 / 2.5).abs() < 1e-10);
    }

    #[test]
    fn large_coupling_scaling() {
        for v0 in [10.0, 100.0, 1000.0] {
            let l = eigen_zeta(&rank_one(v0), VertexId::ROOT).unwrap();
            assert!((l.entries[0].x - (v0 + 2.0 / v0)).abs() < 1e-10 * v0);
        }
    }

    #[test]
    fn radial_potential_has_degenerate_zeros() {
        let v = Potential::radial(&[0.0, 0.0, 4.0]);
        let l = eigen_zeta(&v, VertexId::ROOT).unwrap();
        assert!(l.entries.iter().any(|e| e.mult > 1));
        assert!(l.entries.iter().all(|e| !e.low_confidence));
        let oracle = eigen_oracle(&v, 12, 0.05);
        assert_eq!(oracle.len(), l.total_multiplicity());
    }

    #[test]
    fn oracle_matches_dense_solver() {
        let v = Potential::random(11, 2, 3.0, None);
        let d = 6;
        let diag = v.dense(d);
        let n = diag.len();
        let mut h = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = diag[i];
            if i > 0 {
                h[(i, (i - 1) / 2)] = 1.0;
                h[((i - 1) / 2, i)] = 1.0;
            }
        }
        let mut dense: Vec<f64> = h
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .filter(|x| x.abs() > BAND_EDGE + 0.05)
            .collect();
        dense.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let sturm = eigen_oracle(&v, d, 0.05);
        assert_eq!(dense.len(), sturm.len());
        for (a, b) in dense.iter().zip(&sturm) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn oracle_examples() {
        assert!(eigen_oracle(&Potential::zero(), 12, 0.05).is_empty());
        // the plain truncation converges like ζ*^{2D} = 2^{-D}
        let mut errs = Vec::new();
        for d in [10, 12, 14, 16] {
            let o = eigen_oracle(&rank_one(2.0), d, 0.05);
            assert_eq!(o.len(), 1);
            errs.push(3.0 - o[0]);
        }
        for w in errs.windows(2) {
            assert!((w[1] / w[0] - 0.25).abs() < 0.01, "{errs:?}");
        }
        // geometric extrapolation recovers the closed form
        let (a, b, c) = (errs[1], errs[2], errs[3]);
        let limit_err = c - (c - b) * (c - b) / ((c - b) - (b - a));
        assert!(limit_err.abs() < 1e-8, "{limit_err}");
    }

    #[test]
    fn ledger_order() {
        let v = Potential::random(17, 2, 3.0, None);
        let l = eigen_zeta(&v, VertexId::ROOT).unwrap();
        let xs: Vec<f64> = l.entries.iter().map(|e| e.x).collect();
        let split = xs.iter().position(|x| *x < 0.0).unwrap_or(xs.len());
        assert!(xs[..split].windows(2).all(|w| w[0] > w[1]));
        assert!(xs[split..].windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn ev_sum_examples() {
        let empty = EigenLedger::empty(VertexId::ROOT);
        assert_eq!(ev_sums(&empty, &EvSumMode::Power(1.5)).unwrap(), 0.0);
        let one = EigenLedger {
            entries: vec![EigenEntry {
                zeta: SQRT_2 / 2.0,
                x: 3.0,
                mult: 1,
                low_confidence: false,
            }],
            subtree_root: VertexId::ROOT,
        };
        let p = ev_sums(&one, &EvSumMode::Power(1.5)).unwrap();
        // 3 - 2√2 = (√2 - 1)², so the 3/2 power is (√2 - 1)³
        assert!((p - (SQRT_2 - 1.0).powi(3)).abs() < 1e-15);
        let d = ev_sums(&one, &EvSumMode::Disk(5.0)).unwrap();
        assert!((d - (1.0 - SQRT_2 / 2.0).powi(5)).abs() < 1e-15);
        assert!((d - 0.0021555).abs() < 1e-7);
    }

    #[test]
    fn limit_study_examples() {
        let s = ev_limit_study(&Potential::zero(), 1.5, &[1, 2, 3]).unwrap();
        assert!(s.values.iter().all(|v| *v == 0.0));
        let s = ev_limit_study(&rank_one(2.0), 1.5, &[0, 1, 2]).unwrap();
        assert!(s.differences.iter().all(|d| d.abs() < 1e-12));
    }
}
