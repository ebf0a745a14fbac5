//! Perturbation determinants `L_{T_x}(ζ) = det((H_{V,T_x} - z)(H_{0,T_x} - z)^{-1})`.
//!
//! On a ball containing the support, the determinant is the ratio of the
//! exact finite-section matrices with and without `V`. Leaves-first
//! elimination gives every free pivot equal to `-√2/ζ`, so
//! `L = Π_x (-ζ/√2) d_x` and the partial products below each vertex are the
//! subtree determinants.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::resolvent::{ball_diagonal, check_disk_point, free_forward_m, jost_vector, tree_pivots};
use crate::tree::{ball_len, frontier_set, Potential, VertexId};

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetValue {
    pub zeta: Complex64,
    pub value: Complex64,
    pub subtree_root: VertexId,
}

/// Free resolvent entry `(H_0 - z(ζ))^{-1}(x, y)` on the infinite rooted tree.
pub fn free_green(x: VertexId, y: VertexId, zeta: Complex64) -> Result<Complex64> {
    check_disk_point(zeta)?;
    Ok(free_green_raw(x, y, zeta))
}

/// Subtree determinants `L_{T_x}(ζ)` for every `x` in the ball of depth
/// `support_depth(v)`, indexed by linear index. Vertices outside that ball
/// have `L = 1`. No validation of `ζ` is performed.
pub(crate) fn subtree_determinants_raw(v: &Potential, zeta: Complex64) -> Option<Vec<Complex64>> {
    let depth = v.support_depth();
    let diag = ball_diagonal(v, depth, zeta);
    let d = tree_pivots(&diag)?;
    let scale = -zeta / SQRT_2;
    let mut prod: Vec<Complex64> = d.iter().map(|p| scale * p).collect();
    for i in (1..prod.len()).rev() {
        let below = prod[i];
        prod[(i - 1) / 2] *= below;
    }
    Some(prod)
}

/// `L_T(ζ)` without validating `ζ`; used on small circles that may leave the disk.
pub(crate) fn det_root_raw(v: &Potential, zeta: Complex64) -> Complex64 {
    if v.is_zero() {
        return ONE;
    }
    match subtree_determinants_raw(v, zeta) {
        Some(p) => p[0],
        None => support_determinant_raw(v, zeta),
    }
}

/// All subtree determinants at `ζ`, validated.
pub fn subtree_determinants(v: &Potential, zeta: Complex64) -> Result<Vec<Complex64>> {
    check_disk_point(zeta)?;
    match subtree_determinants_raw(v, zeta) {
        Some(p) => Ok(p),
        None => Ok((0..ball_len(v.support_depth()))
            .map(|i| support_determinant_raw(&v.subtree_view(VertexId::from_linear(i)), zeta))
            .collect()),
    }
}

/// `L_{T_x}(ζ)` through leaves-first elimination on the subtree view of `v`.
pub fn det_l(v: &Potential, x: VertexId, zeta: Complex64) -> Result<DetValue> {
    check_disk_point(zeta)?;
    let vx = v.subtree_view(x);
    Ok(DetValue {
        zeta,
        value: det_root_raw(&vx, zeta),
        subtree_root: x,
    })
}

/// `L_{T_x}(ζ) = det(I + V_S Ĝ_0)` over the support `S` of the subtree view,
/// with free resolvent entries in closed form. Independent of the ball.
pub fn det_l_support(v: &Potential, x: VertexId, zeta: Complex64) -> Result<Complex64> {
    check_disk_point(zeta)?;
    Ok(support_determinant_raw(&v.subtree_view(x), zeta))
}

fn support_determinant_raw(v: &Potential, zeta: Complex64) -> Complex64 {
    let support: Vec<(VertexId, f64)> = v.iter().collect();
    let n = support.len();
    if n == 0 {
        return ONE;
    }
    let mut a = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for (i, (xi, vi)) in support.iter().enumerate() {
        for (j, (xj, _)) in support.iter().enumerate() {
            let g = free_green_raw(*xi, *xj, zeta);
            a[(i, j)] = *vi * g
                + if i == j {
                    ONE
                } else {
                    Complex64::new(0.0, 0.0)
                };
        }
    }
    a.lu().determinant()
}

fn free_green_raw(x: VertexId, y: VertexId, zeta: Complex64) -> Complex64 {
    let z = SQRT_2 * (zeta + zeta.inv());
    let m = free_forward_m(zeta);
    let (mut a, mut b) = (x, y);
    while a.depth() > b.depth() {
        a = a.parent().expect("non-root");
    }
    while b.depth() > a.depth() {
        b = b.parent().expect("non-root");
    }
    while a != b {
        a = a.parent().expect("non-root");
        b = b.parent().expect("non-root");
    }
    // self-energy seen from the meeting vertex through its parent edge
    let mut upward = Complex64::new(0.0, 0.0);
    for k in 0..a.depth() {
        upward = if k == 0 {
            (-z - m).inv()
        } else {
            (-z - m - upward).inv()
        };
    }
    let steps = (x.depth() - a.depth()) + (y.depth() - a.depth());
    (-z - 2.0 * m - upward).inv() * (zeta / SQRT_2).powu(steps)
}

/// `L_{T_X̃(y)} = Π_{x ∈ X̃(y)} L_{T_x}` over the frontier of the path to `y`.
pub fn det_l_frontier(v: &Potential, y: VertexId, zeta: Complex64) -> Result<DetValue> {
    let dets = subtree_determinants(v, zeta)?;
    Ok(DetValue {
        zeta,
        value: frontier_product(&dets, y),
        subtree_root: y,
    })
}

/// Frontier product read from a table of subtree determinants.
pub(crate) fn frontier_product(dets: &[Complex64], y: VertexId) -> Complex64 {
    frontier_set(y)
        .frontier
        .iter()
        .map(|x| dets.get(x.linear()).copied().unwrap_or(ONE))
        .product()
}

/// Taylor coefficients `a_1, …, a_kmax` of `log L_{T_x}` at `ζ = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogDetTaylor {
    pub coeffs: Vec<f64>,
    pub radius: f64,
    pub nodes: usize,
}

/// Taylor coefficients of `log L_{T_x}(ζ)` by a Cauchy integral on a circle
/// free of zeros, using a continuous branch of the logarithm along the circle.
pub fn log_det_taylor(v: &Potential, x: VertexId, kmax: usize) -> Result<LogDetTaylor> {
    let vx = v.subtree_view(x);
    let nodes = 512;
    let mut radius = 0.5;
    for _ in 0..20 {
        let mut logs = Vec::with_capacity(nodes);
        let mut total_turn = 0.0;
        for j in 0..nodes {
            let theta = 2.0 * PI * j as f64 / nodes as f64;
            let l = det_root_raw(&vx, Complex64::from_polar(radius, theta));
            let mut arg = l.arg();
            if let Some(prev) = logs.last().map(|p: &Complex64| p.im) {
                while arg - prev > PI {
                    arg -= 2.0 * PI;
                }
                while arg - prev < -PI {
                    arg += 2.0 * PI;
                }
                total_turn += arg - prev;
            }
            logs.push(Complex64::new(l.norm().ln(), arg));
        }
        let mut closing = logs[0].im - logs[nodes - 1].im;
        closing -= 2.0 * PI * (closing / (2.0 * PI)).round();
        total_turn += closing;
        // a zero inside the circle shows up as a 2π turn of the argument
        if total_turn.abs() > PI || !logs.iter().all(|l| l.is_finite()) {
            radius *= 0.5;
            continue;
        }
        let coeffs = (1..=kmax)
            .map(|k| {
                let s: Complex64 = logs
                    .iter()
                    .enumerate()
                    .map(|(j, l)| {
                        l * Complex64::from_polar(1.0, -2.0 * PI * (k * j) as f64 / nodes as f64)
                    })
                    .sum();
                (s / nodes as f64 / radius.powi(k as i32)).re
            })
            .collect();
        return Ok(LogDetTaylor {
            coeffs,
            radius,
            nodes,
        });
    }
    Err(Error::InvalidArgument(
        "no zero-free circle found for the Cauchy integral".into(),
    ))
}

/// Comparison of the Jost vector entry with the determinant ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MainLemmaReport {
    pub vertex: VertexId,
    pub zeta: Complex64,
    pub jost: Complex64,
    pub ratio: Complex64,
    /// `jost / ratio` for this potential.
    pub kappa: Complex64,
    /// `jost / ratio` measured with `V = 0`.
    pub kappa0: Complex64,
    /// `|jost - kappa0 · ratio| / max(|jost|, ε)`.
    pub residual: f64,
}

/// `(ζ/√2)^{|y|} L_{T_X̃(y)}(ζ) / L_T(ζ)`.
pub fn main_lemma_ratio(v: &Potential, y: VertexId, zeta: Complex64) -> Result<Complex64> {
    let dets = subtree_determinants(v, zeta)?;
    let lt = dets[0];
    if lt.norm() < 1e-300 {
        return Err(Error::VanishingRatio(zeta));
    }
    let ratio = (zeta / SQRT_2).powu(y.depth()) * frontier_product(&dets, y) / lt;
    if ratio.norm() < 1e-300 || !ratio.is_finite() {
        return Err(Error::VanishingRatio(zeta));
    }
    Ok(ratio)
}

/// `f_y / ratio` measured at `V = 0` for a vertex of the given depth.
pub fn calibrate_kappa0(depth: u32, zeta: Complex64) -> Result<Complex64> {
    let y = VertexId::new(depth, 1)?;
    let zero = Potential::zero();
    let f = jost_vector(&zero, zeta, depth)?.get(y);
    Ok(f / main_lemma_ratio(&zero, y, zeta)?)
}

pub fn main_lemma_residual(v: &Potential, y: VertexId, zeta: Complex64) -> Result<MainLemmaReport> {
    let depth = v.support_depth().max(y.depth());
    let jost = jost_vector(v, zeta, depth)?.get(y);
    let ratio = main_lemma_ratio(v, y, zeta)?;
    let kappa0 = calibrate_kappa0(y.depth(), zeta)?;
    let residual = (jost - kappa0 * ratio).norm() / jost.norm().max(1e-300);
    Ok(MainLemmaReport {
        vertex: y,
        zeta,
        jost,
        ratio,
        kappa: jost / ratio,
        kappa0,
        residual,
    })
}
