//! Exact finite-section resolvents of `H_V` on the infinite rooted tree.
//!
//! Below the ball of depth `D` every vertex sees two free child subtrees. Each
//! eliminated subtree contributes its forward m-function `-ζ/√2` to the
//! diagonal of its parent, so on the ball
//!
//! ```text
//! (H_V - z)^{-1}|_B = (H_B + V_B - z + √2 ζ P_D)^{-1}
//! ```
//!
//! where `P_D` projects onto the depth-`D` shell. The identity holds for every
//! `D ≥ support_depth(V)` and extends by continuity to `|ζ| = 1`, `ζ ≠ ±1`.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::conformal::zeta_to_z;
use crate::error::{Error, Result};
use crate::tree::{ball_len, Potential, VertexId};

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Forward m-function of a free rooted subtree, `m = -ζ/√2`.
#[inline]
pub fn free_forward_m(zeta: Complex64) -> Complex64 {
    -zeta / SQRT_2
}

pub(crate) fn check_disk_point(zeta: Complex64) -> Result<()> {
    let r = zeta.norm();
    if r == 0.0 {
        return Err(Error::ZeroDiskPoint);
    }
    if r > 1.0 + 1e-12 || (r > 1.0 - 1e-12 && (zeta.re.abs() - 1.0).abs() < 1e-12) {
        return Err(Error::InvalidDiskPoint(zeta));
    }
    Ok(())
}

/// Diagonal of `H_B + V_B - z + √2 ζ P_D` on the depth-`depth` ball.
pub(crate) fn ball_diagonal(v: &Potential, depth: u32, zeta: Complex64) -> Vec<Complex64> {
    let z = SQRT_2 * (zeta + zeta.inv());
    let n = ball_len(depth);
    let first_leaf = ball_len(depth.saturating_sub(1)) * usize::from(depth > 0);
    let mut diag = vec![-z; n];
    for d in diag.iter_mut().skip(first_leaf) {
        *d += SQRT_2 * zeta;
    }
    for (x, val) in v.iter() {
        if x.depth() <= depth {
            diag[x.linear()] += val;
        }
    }
    diag
}

/// Schur pivots of a tree-structured matrix with unit couplings along edges,
/// eliminating leaves first: `d_i = a_ii - Σ_{children c} 1 / d_c`.
///
/// `det = Π d_i`, and `d_root^{-1}` is the root entry of the inverse. The
/// product of the pivots below a vertex is the determinant of its subtree
/// block. Returns `None` if a non-root pivot vanishes exactly.
pub(crate) fn tree_pivots(diag: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = diag.len();
    let mut d = diag.to_vec();
    for i in (1..n).rev() {
        if d[i] == Complex64::new(0.0, 0.0) {
            return None;
        }
        let inv = d[i].inv();
        d[(i - 1) / 2] -= inv;
    }
    Some(d)
}

/// Number of negative eigenvalues of a real tree-structured matrix with unit
/// couplings (Sylvester's law of inertia applied to the leaves-first `LDLᵀ`).
pub(crate) fn tree_negative_count(diag: &[f64]) -> usize {
    let n = diag.len();
    let mut d = diag.to_vec();
    let scale = diag.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let tiny = f64::MIN_POSITIVE.sqrt() * scale;
    let mut count = 0;
    for i in (0..n).rev() {
        if d[i] == 0.0 {
            d[i] = -tiny;
        }
        if d[i] < 0.0 {
            count += 1;
        }
        if i > 0 {
            let p = (i - 1) / 2;
            d[p] -= 1.0 / d[i];
        }
    }
    count
}

/// Solution of `K f = e_0` for the tree-structured `K`, via the pivots.
#[cfg(test)]
pub(crate) fn tree_root_column(diag: &[Complex64]) -> Option<Vec<Complex64>> {
    let d = tree_pivots(diag)?;
    let mut f = vec![Complex64::new(0.0, 0.0); d.len()];
    f[0] = d[0].inv();
    for i in 1..d.len() {
        f[i] = -f[(i - 1) / 2] / d[i];
    }
    Some(f)
}

fn dense_system(v: &Potential, depth: u32, zeta: Complex64) -> DMatrix<Complex64> {
    let diag = ball_diagonal(v, depth, zeta);
    let n = diag.len();
    let mut k = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for i in 0..n {
        k[(i, i)] = diag[i];
        if i > 0 {
            let p = (i - 1) / 2;
            k[(i, p)] = ONE;
            k[(p, i)] = ONE;
        }
    }
    k
}

fn near_singular(lu: &nalgebra::linalg::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>) -> bool {
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].norm()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    min.partial_cmp(&(1e-14 * max)) != Some(std::cmp::Ordering::Greater)
}

/// Resolvent entries of `H_V` on the ball of depth `ball_depth`.
#[derive(Debug, Clone)]
pub struct GreenMatrix {
    pub ball_depth: u32,
    pub zeta: Complex64,
    pub entries: DMatrix<Complex64>,
}

impl GreenMatrix {
    pub fn get(&self, x: VertexId, y: VertexId) -> Complex64 {
        self.entries[(x.linear(), y.linear())]
    }
}

/// Dense evaluation of `(H_V - z(ζ))^{-1}` restricted to the depth-`depth` ball.
pub fn green_ball(v: &Potential, depth: u32, zeta: Complex64) -> Result<GreenMatrix> {
    check_disk_point(zeta)?;
    if depth < v.support_depth() {
        return Err(Error::InsufficientDepth {
            ball: depth,
            required: v.support_depth(),
        });
    }
    let lu = dense_system(v, depth, zeta).lu();
    if near_singular(&lu) {
        return Err(Error::Pole(zeta));
    }
    let entries = lu.try_inverse().ok_or(Error::Pole(zeta))?;
    Ok(GreenMatrix {
        ball_depth: depth,
        zeta,
        entries,
    })
}

/// `M(ζ) = -m_{H_V}(z(ζ))`; on the circle `im_density = Im M(e^{iθ})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MFunction {
    pub zeta: Complex64,
    pub m: Complex64,
    pub im_density: Option<f64>,
}

pub fn m_function(v: &Potential, zeta: Complex64) -> Result<MFunction> {
    check_disk_point(zeta)?;
    let m = m_raw(v, zeta).ok_or(Error::Pole(zeta))?;
    let on_circle = (zeta.norm() - 1.0).abs() < 1e-12;
    Ok(MFunction {
        zeta,
        m,
        im_density: on_circle.then_some(m.im),
    })
}

/// `M(ζ)` without validating `ζ`; `None` at a pole.
pub(crate) fn m_raw(v: &Potential, zeta: Complex64) -> Option<Complex64> {
    let diag = ball_diagonal(v, v.support_depth(), zeta);
    let d = tree_pivots(&diag)?;
    if !d[0].is_finite() || d[0].norm() < 1e-300 {
        return None;
    }
    Some(-d[0].inv())
}

/// `f = (H_V - z(ζ))^{-1} e_0` on a ball, indexed by linear index.
#[derive(Debug, Clone)]
pub struct JostVector {
    pub zeta: Complex64,
    pub ball_depth: u32,
    pub values: Vec<Complex64>,
}

impl JostVector {
    pub fn get(&self, y: VertexId) -> Complex64 {
        self.values[y.linear()]
    }

    /// Largest violation of `Σ_{x'~x} f(x') + (V(x) - z) f(x) = [x = 0]` over
    /// vertices strictly inside the ball.
    pub fn relation_residual(&self, v: &Potential) -> f64 {
        let z = zeta_to_z(self.zeta).expect("nonzero ζ");
        let interior =
            ball_len(self.ball_depth.saturating_sub(1)) * usize::from(self.ball_depth > 0);
        let mut worst: f64 = 0.0;
        for i in 0..interior {
            let x = VertexId::from_linear(i);
            let mut s = (v.get(x) - z) * self.values[i];
            s += self.values[2 * i + 1] + self.values[2 * i + 2];
            if i > 0 {
                s += self.values[(i - 1) / 2];
            }
            if i == 0 {
                s -= ONE;
            }
            worst = worst.max(s.norm());
        }
        worst
    }
}

pub fn jost_vector(v: &Potential, zeta: Complex64, depth: u32) -> Result<JostVector> {
    check_disk_point(zeta)?;
    if depth < v.support_depth() {
        return Err(Error::InsufficientDepth {
            ball: depth,
            required: v.support_depth(),
        });
    }
    let lu = dense_system(v, depth, zeta).lu();
    if near_singular(&lu) {
        return Err(Error::Pole(zeta));
    }
    let mut rhs = DVector::from_element(ball_len(depth), Complex64::new(0.0, 0.0));
    rhs[0] = ONE;
    let f = lu.solve(&rhs).ok_or(Error::Pole(zeta))?;
    Ok(JostVector {
        zeta,
        ball_depth: depth,
        values: f.iter().copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::truncate;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Plain truncation at depth `depth`, no self-energy.
    fn plain_root_entry(v: &Potential, depth: u32, zeta: Complex64) -> Complex64 {
        let z = zeta_to_z(zeta).unwrap();
        let mut diag: Vec<Complex64> = v.dense(depth).iter().map(|x| c(*x, 0.0) - z).collect();
        diag.truncate(ball_len(depth));
        tree_root_column(&diag).unwrap()[0]
    }

    #[test]
    fn free_root_entry() {
        for zeta in [c(0.5, 0.0), c(0.2, 0.6), c(-0.7, -0.1)] {
            let m = -zeta / SQRT_2;
            let z = zeta_to_z(zeta).unwrap();
            // fixed point of m = 1 / (-z - 2m)
            assert!((m - (-z - 2.0 * m).inv()).norm() < 1e-14);
            for depth in [0, 3] {
                let g = green_ball(&Potential::zero(), depth, zeta).unwrap();
                assert!((g.get(VertexId::ROOT, VertexId::ROOT) - m).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn plain_truncation_converges_to_exact_root_entry() {
        // Dropping the self-energy on 2^D' leaves perturbs the root entry by
        // O(|ζ|^{2(D' - D)}).
        let v = Potential::random(5, 2, 1.5, None);
        for zeta in [c(0.5, 0.3), c(-0.6, 0.2), c(0.1, -0.85), c(0.3, 0.0)] {
            let exact = green_ball(&v, 2, zeta)
                .unwrap()
                .get(VertexId::ROOT, VertexId::ROOT);
            let mut prev = f64::INFINITY;
            for extra in [8, 12, 16] {
                let err = (plain_root_entry(&v, 2 + extra, zeta) - exact).norm();
                assert!(
                    err <= 10.0 * zeta.norm().powi(2 * extra as i32),
                    "{zeta} {extra}: {err}"
                );
                assert!(err <= prev);
                prev = err;
            }
            if zeta.norm() <= 0.65 {
                assert!(prev < 1e-6);
            }
        }
    }

    #[test]
    fn rank_one_root_entry() {
        for v0 in [-2.5, 0.7, 3.0] {
            let v = Potential::from_values(0, [(VertexId::ROOT, v0)]).unwrap();
            for zeta in [c(0.3, 0.4), c(-0.5, 0.1)] {
                let m0 = -zeta / SQRT_2;
                let g = green_ball(&v, 2, zeta)
                    .unwrap()
                    .get(VertexId::ROOT, VertexId::ROOT);
                assert!((g - m0 / (1.0 + v0 * m0)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn depth_stability_and_symmetry() {
        let v = Potential::random(9, 3, 2.0, None);
        let zeta = c(0.35, 0.55);
        let g3 = green_ball(&v, 3, zeta).unwrap();
        let g5 = green_ball(&v, 5, zeta).unwrap();
        for i in 0..ball_len(3) {
            for j in 0..ball_len(3) {
                let (x, y) = (VertexId::from_linear(i), VertexId::from_linear(j));
                assert!((g3.get(x, y) - g5.get(x, y)).norm() < 1e-12);
                assert!((g5.get(x, y) - g5.get(y, x)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn real_zeta_gives_real_entries() {
        let v = Potential::random(2, 2, 1.0, None);
        let g = green_ball(&v, 3, c(0.3, 0.0)).unwrap();
        assert!(g.entries.iter().all(|e| e.im.abs() < 1e-12));
    }

    #[test]
    fn m_function_examples() {
        let zeta = c(0.4, 0.2);
        let m = m_function(&Potential::zero(), zeta).unwrap();
        assert!((m.m - zeta / SQRT_2).norm() < 1e-15);
        let m = m_function(&Potential::zero(), c(0.0, 1.0)).unwrap();
        assert!((m.im_density.unwrap() - 1.0 / SQRT_2).abs() < 1e-15);
        let v = Potential::from_values(0, [(VertexId::ROOT, 2.0)]).unwrap();
        let m = m_function(&v, c(0.3, 0.0)).unwrap();
        assert!(m.m.im.abs() < 1e-15 && m.m.re.is_finite());
        let dense = green_ball(&v, 0, c(0.3, 0.0)).unwrap();
        assert!((m.m + dense.get(VertexId::ROOT, VertexId::ROOT)).norm() < 1e-14);
    }

    #[test]
    fn jost_vector_free_and_transfer() {
        let zeta = c(0.5, 0.0);
        let f = jost_vector(&Potential::zero(), zeta, 4).unwrap();
        assert!((f.get(VertexId::ROOT) - c(-0.5 / SQRT_2, 0.0)).norm() < 1e-14);
        for i in 0..ball_len(4) {
            let y = VertexId::from_linear(i);
            let expected = -(zeta / SQRT_2).powu(y.depth() + 1);
            assert!((f.values[i] - expected).norm() < 1e-14, "{y}");
        }
        let v = Potential::random(4, 2, 2.0, None);
        let zeta = c(0.3, 0.45);
        let f = jost_vector(&v, zeta, 5).unwrap();
        assert!(f.relation_residual(&v) < 1e-10);
        for i in ball_len(2)..ball_len(5) {
            let y = VertexId::from_linear(i);
            let p = y.parent().unwrap();
            if p.depth() >= 2 {
                assert!((f.get(y) - f.get(p) * zeta / SQRT_2).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn elimination_matches_dense() {
        let v = Potential::random(13, 3, 2.0, None);
        let zeta = c(-0.2, 0.7);
        let m = m_function(&v, zeta).unwrap();
        let g = green_ball(&v, 4, zeta).unwrap();
        assert!((m.m + g.get(VertexId::ROOT, VertexId::ROOT)).norm() < 1e-13);
        let f = tree_root_column(&ball_diagonal(&v, 4, zeta)).unwrap();
        let jv = jost_vector(&v, zeta, 4).unwrap();
        for (a, b) in f.iter().zip(&jv.values) {
            assert!((a - b).norm() < 1e-13);
        }
        let _ = truncate(&v, 1);
    }

    #[test]
    fn inertia_matches_dense_eigenvalues() {
        let v = Potential::random(21, 3, 2.5, None);
        let diag: Vec<f64> = ball_diagonal(&v, 3, c(0.6, 0.0))
            .iter()
            .map(|x| x.re)
            .collect();
        let n = diag.len();
        let mut k = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = diag[i];
            if i > 0 {
                k[(i, (i - 1) / 2)] = 1.0;
                k[((i - 1) / 2, i)] = 1.0;
            }
        }
        let eig = k.symmetric_eigenvalues();
        let expected = eig.iter().filter(|x| **x < 0.0).count();
        assert_eq!(tree_negative_count(&diag), expected);
    }

    #[test]
    fn invalid_points_rejected() {
        let v = Potential::zero();
        assert!(green_ball(&v, 1, c(0.0, 0.0)).is_err());
        assert!(green_ball(&v, 1, c(1.0, 0.0)).is_err());
        assert!(green_ball(&v, 1, c(1.2, 0.0)).is_err());
        let v = Potential::random(1, 3, 1.0, None);
        assert!(matches!(
            green_ball(&v, 2, c(0.3, 0.3)),
            Err(Error::InsufficientDepth { .. })
        ));
    }
}
