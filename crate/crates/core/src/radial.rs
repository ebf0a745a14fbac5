//! Radial reduction: the shell-averaging isometry `W`, the binary shift `S₁`,
//! the half-line Jacobi matrix of a radial potential, and the quadratic form
//! `(B(H_0) dH_V, dH_V)` built from a cosine-side polynomial `A`.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::Serialize;

use crate::conformal::{z_to_zeta, EnergyPoint, BAND_EDGE};
use crate::error::{Error, Result};
use crate::quadrature::neumaier_sum;
use crate::resolvent::m_function;
use crate::tree::{ball_len, difference_op, Difference, Potential, VertexId};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialProfile {
    pub v: Vec<f64>,
}

impl RadialProfile {
    pub fn new(v: Vec<f64>) -> Self {
        Self { v }
    }

    pub fn to_potential(&self) -> Potential {
        Potential::radial(&self.v)
    }
}

/// `((J - w)^{-1} e_0, e_0)` for the half-line Jacobi matrix with diagonal
/// `b_n` (zero beyond the profile) and unit off-diagonal, `w ∉ [-2, 2]`.
pub fn jacobi_m(diag: &[f64], w: Complex64) -> Result<Complex64> {
    if w.im == 0.0 && w.re.abs() <= 2.0 {
        return Err(Error::OnBand(w));
    }
    // free tail: m² + w m + 1 = 0, root inside the unit disk
    let root = (w * w - 4.0).sqrt();
    let (r1, r2) = ((-w + root) / 2.0, (-w - root) / 2.0);
    let tail = if r1.norm() < r2.norm() { r1 } else { r2 };
    let mut d = match diag.last() {
        Some(b) => Complex64::new(*b, 0.0) - w - tail,
        None => return Ok(tail),
    };
    for b in diag.iter().rev().skip(1) {
        d = Complex64::new(*b, 0.0) - w - d.inv();
    }
    Ok(d.inv())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JacobiReduction {
    /// Diagonal `v_n/√2`; the off-diagonal is identically 1.
    pub diag: Vec<f64>,
    pub max_m_residual: f64,
}

/// Compares `m_{H_V}(z)` with `(1/√2) m_J(z/√2)` at the given energies.
pub fn jacobi_reduce(
    profile: &RadialProfile,
    test_points: &[EnergyPoint],
) -> Result<JacobiReduction> {
    let diag: Vec<f64> = profile.v.iter().map(|x| x / SQRT_2).collect();
    let v = profile.to_potential();
    let mut worst: f64 = 0.0;
    for p in test_points {
        let z = p.0;
        if z.im == 0.0 && z.re.abs() <= BAND_EDGE {
            return Err(Error::OnBand(z));
        }
        let tree_side = -m_function(&v, z_to_zeta(z)?)?.m;
        let line_side = jacobi_m(&diag, z / SQRT_2)? / SQRT_2;
        worst = worst.max((tree_side - line_side).norm());
    }
    Ok(JacobiReduction {
        diag,
        max_m_residual: worst,
    })
}

/// Exact numbers `a + b√2` with dyadic rational `a`, `b` stored as `f64`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Surd {
    pub a: f64,
    pub b: f64,
}

impl Surd {
    pub const ZERO: Surd = Surd { a: 0.0, b: 0.0 };
    pub const ONE: Surd = Surd { a: 1.0, b: 0.0 };
    pub const SQRT2: Surd = Surd { a: 0.0, b: 1.0 };

    pub fn is_zero(self) -> bool {
        self.a == 0.0 && self.b == 0.0
    }

    pub fn to_f64(self) -> f64 {
        self.a + self.b * SQRT_2
    }
}

impl Add for Surd {
    type Output = Surd;
    fn add(self, o: Surd) -> Surd {
        Surd {
            a: self.a + o.a,
            b: self.b + o.b,
        }
    }
}

impl Sub for Surd {
    type Output = Surd;
    fn sub(self, o: Surd) -> Surd {
        Surd {
            a: self.a - o.a,
            b: self.b - o.b,
        }
    }
}

impl Neg for Surd {
    type Output = Surd;
    fn neg(self) -> Surd {
        Surd {
            a: -self.a,
            b: -self.b,
        }
    }
}

impl Mul for Surd {
    type Output = Surd;
    fn mul(self, o: Surd) -> Surd {
        Surd {
            a: self.a * o.a + 2.0 * self.b * o.b,
            b: self.a * o.b + self.b * o.a,
        }
    }
}

impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}√2", self.a, self.b)
    }
}

/// `2^{-n/2}`, the entry of the `n`-th column of `W` on shell `n`.
pub fn shell_amplitude(n: u32) -> Surd {
    let base = 0.5f64.powi((n / 2) as i32);
    if n.is_multiple_of(2) {
        Surd { a: base, b: 0.0 }
    } else {
        Surd {
            a: 0.0,
            b: base / 2.0,
        }
    }
}

type SurdVec = Vec<Surd>;

/// Exact residuals of the shift identities on a ball of depth `depth`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftStructures {
    pub depth: u32,
    /// `max |(W*W - I)_{mn}|`
    pub isometry: f64,
    /// `max |H_0 - S₁ - S₁ᵗ|` over the ball.
    pub adjacency_split: f64,
    /// `max |S₁W - √2 W S|` over rows of depth `< depth`.
    pub shift_intertwining: f64,
    /// `max |W*S₁* - √2 S* W*|` over half-line rows `< depth`.
    pub adjoint_intertwining: f64,
    /// `max |W*S₁ - √2 S W*|` over all half-line rows.
    pub pullback_intertwining: f64,
}

impl ShiftStructures {
    pub fn max_residual(&self) -> f64 {
        [
            self.isometry,
            self.adjacency_split,
            self.shift_intertwining,
            self.adjoint_intertwining,
            self.pullback_intertwining,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn w_column(depth: u32, n: u32) -> SurdVec {
    let mut col = vec![Surd::ZERO; ball_len(depth)];
    let amp = shell_amplitude(n);
    let start = if n == 0 { 0 } else { ball_len(n - 1) };
    col[start..ball_len(n)].fill(amp);
    col
}

/// `(S₁ f)(x) = f(parent(x))`, zero at the root.
fn shift_down(f: &[Surd]) -> SurdVec {
    (0..f.len())
        .map(|i| if i == 0 { Surd::ZERO } else { f[(i - 1) / 2] })
        .collect()
}

/// `(S₁* f)(x) = Σ_{children c} f(c)`, truncated at the ball boundary.
fn shift_up(f: &[Surd]) -> SurdVec {
    let n = f.len();
    (0..n)
        .map(|i| {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut s = Surd::ZERO;
            if l < n {
                s = s + f[l];
            }
            if r < n {
                s = s + f[r];
            }
            s
        })
        .collect()
}

/// `W* f`: shell sums scaled by `2^{-n/2}`.
fn w_adjoint(depth: u32, f: &[Surd]) -> SurdVec {
    (0..=depth)
        .map(|n| {
            let start = if n == 0 { 0 } else { ball_len(n - 1) };
            let s = f[start..ball_len(n)]
                .iter()
                .fold(Surd::ZERO, |acc, x| acc + *x);
            shell_amplitude(n) * s
        })
        .collect()
}

fn max_abs(v: impl IntoIterator<Item = Surd>) -> f64 {
    v.into_iter().map(|s| s.to_f64().abs()).fold(0.0, f64::max)
}

pub fn shift_structures(depth: u32) -> Result<ShiftStructures> {
    if depth < 2 {
        return Err(Error::InvalidArgument(
            "shift structures need depth ≥ 2".into(),
        ));
    }
    let n = ball_len(depth);
    let cols: Vec<SurdVec> = (0..=depth).map(|k| w_column(depth, k)).collect();

    let mut isometry: f64 = 0.0;
    for (a, ca) in cols.iter().enumerate() {
        for (b, cb) in cols.iter().enumerate() {
            let dot = ca
                .iter()
                .zip(cb)
                .fold(Surd::ZERO, |acc, (x, y)| acc + *x * *y);
            let target = if a == b { Surd::ONE } else { Surd::ZERO };
            isometry = isometry.max((dot - target).to_f64().abs());
        }
    }

    let mut adjacency_split: f64 = 0.0;
    for j in 0..n {
        let mut e = vec![Surd::ZERO; n];
        e[j] = Surd::ONE;
        let s = shift_down(&e);
        let st = shift_up(&e);
        let x = VertexId::from_linear(j);
        let mut h = vec![Surd::ZERO; n];
        for c in x.children() {
            if c.linear() < n {
                h[c.linear()] = Surd::ONE;
            }
        }
        if let Some(p) = x.parent() {
            h[p.linear()] = Surd::ONE;
        }
        adjacency_split = adjacency_split.max(max_abs((0..n).map(|i| h[i] - s[i] - st[i])));
    }

    // S e_k = e_{k+1} on the half line
    let interior = ball_len(depth - 1);
    let mut shift_intertwining: f64 = 0.0;
    let mut pullback_intertwining: f64 = 0.0;
    let mut adjoint_intertwining: f64 = 0.0;
    for k in 0..=depth {
        let lhs = shift_down(&cols[k as usize]);
        let rhs: SurdVec = if k < depth {
            cols[k as usize + 1]
                .iter()
                .map(|x| Surd::SQRT2 * *x)
                .collect()
        } else {
            vec![Surd::ZERO; n]
        };
        if k < depth {
            shift_intertwining =
                shift_intertwining.max(max_abs((0..interior).map(|i| lhs[i] - rhs[i])));
        }
    }
    for j in 0..n {
        let mut e = vec![Surd::ZERO; n];
        e[j] = Surd::ONE;
        let wf = w_adjoint(depth, &e);
        // W* S₁ e_j versus √2 S W* e_j
        let lhs = w_adjoint(depth, &shift_down(&e));
        let rhs: SurdVec = (0..=depth as usize)
            .map(|m| {
                if m == 0 {
                    Surd::ZERO
                } else {
                    Surd::SQRT2 * wf[m - 1]
                }
            })
            .collect();
        pullback_intertwining =
            pullback_intertwining.max(max_abs((0..=depth as usize).map(|m| lhs[m] - rhs[m])));
        // W* S₁* e_j versus √2 S* W* e_j on rows below the boundary shell
        let lhs = w_adjoint(depth, &shift_up(&e));
        let rhs: SurdVec = (0..depth as usize)
            .map(|m| Surd::SQRT2 * wf[m + 1])
            .collect();
        adjoint_intertwining =
            adjoint_intertwining.max(max_abs((0..depth as usize).map(|m| lhs[m] - rhs[m])));
    }

    Ok(ShiftStructures {
        depth,
        isometry,
        adjacency_split,
        shift_intertwining,
        adjoint_intertwining,
        pullback_intertwining,
    })
}

/// `dH_V` on a ball: shell `2n` carries `2^{-n} V(n, ·)` repeated `2^n` times,
/// odd shells vanish.
pub fn dh_vector(v: &Potential, depth: u32) -> Vec<f64> {
    let mut out = vec![0.0; ball_len(depth)];
    for (x, val) in v.iter() {
        let n = x.depth();
        if 2 * n > depth {
            continue;
        }
        let scale = 0.5f64.powi(n as i32);
        let shell_start = ball_len(2 * n) - (1usize << (2 * n));
        let width = 1usize << n;
        for copy in 0..width {
            out[shell_start + copy * width + (x.index() as usize - 1)] = scale * val;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjectureForm {
    /// `(B(H_0) dH_V, dH_V)`
    pub qform: f64,
    /// `(dH, dH)`
    pub dh_norm2: f64,
    /// `Σ_{n≥0} 2^{-n} Σ_{|x|=n} V(x)²`
    pub shell_norm2: f64,
    /// `-Σ_{n≥1} 2^{-(n+1)} Σ_{|x|=n} (δV)(x)²`
    pub difference_target: f64,
    /// `|dh_norm2 - shell_norm2|`
    pub check_a1: f64,
    /// `|qform(x² - 4) - difference_target|`
    pub check_ax2m4: f64,
}

/// Smallest ball depth on which the form is computed without boundary effects.
pub fn conjecture_min_depth(v: &Potential, degree: usize) -> u32 {
    2 * v.support_depth() + 1 + (degree.saturating_sub(2) / 2) as u32
}

fn check_even(a: &[f64]) -> Result<()> {
    match a.iter().enumerate().find(|(k, c)| k % 2 == 1 && **c != 0.0) {
        Some((k, _)) => Err(Error::OddPolynomial(k)),
        None => Ok(()),
    }
}

/// `a_0 ‖dH‖² + Σ_{even k≥2} (a_k / 2^{k/2}) ⟨(W*H_0W)^{k-2} u, u⟩` with `u = W*H_0 dH`.
fn quadratic_form(a: &[f64], v: &Potential, depth: u32) -> Result<(f64, f64)> {
    check_even(a)?;
    let degree = a.len().saturating_sub(1);
    if depth < conjecture_min_depth(v, degree) {
        return Err(Error::InsufficientDepth {
            ball: depth,
            required: conjecture_min_depth(v, degree),
        });
    }
    let dh = dh_vector(v, depth);
    let n = dh.len();
    let norm2 = neumaier_sum(dh.iter().map(|x| x * x));
    // H_0 dH on the ball
    let mut hdh = vec![0.0; n];
    for i in 1..n {
        let p = (i - 1) / 2;
        hdh[i] += dh[p];
        hdh[p] += dh[i];
    }
    let mut u: Vec<f64> = (0..=depth)
        .map(|m| {
            let start = if m == 0 { 0 } else { ball_len(m - 1) };
            shell_amplitude(m).to_f64() * neumaier_sum(hdh[start..ball_len(m)].iter().copied())
        })
        .collect();
    // W*H_0W is the half-line matrix with √2 off the diagonal
    let half_line = |x: &[f64]| -> Vec<f64> {
        (0..x.len())
            .map(|m| {
                let mut s = 0.0;
                if m > 0 {
                    s += SQRT_2 * x[m - 1];
                }
                if m + 1 < x.len() {
                    s += SQRT_2 * x[m + 1];
                }
                s
            })
            .collect()
    };
    let mut total = vec![a.first().copied().unwrap_or(0.0) * norm2];
    // ⟨(W*H_0W)^{2j} u, u⟩ = ‖(W*H_0W)^j u‖²
    for (k, ak) in a.iter().enumerate().skip(2).step_by(2) {
        if k > 2 {
            u = half_line(&u);
        }
        if *ak != 0.0 {
            let q = neumaier_sum(u.iter().map(|x| x * x));
            total.push(ak / 2f64.powi(k as i32 / 2) * q);
        }
    }
    Ok((neumaier_sum(total), norm2))
}

pub fn conjecture_form(a: &[f64], v: &Potential, depth: u32) -> Result<ConjectureForm> {
    let (qform, dh_norm2) = quadratic_form(a, v, depth)?;
    let shell_norm2 = neumaier_sum(
        v.iter()
            .map(|(x, val)| 0.5f64.powi(x.depth() as i32) * val * val),
    );
    let dv = difference_op(v, Difference::Delta);
    let difference_target = -neumaier_sum(
        dv.iter()
            .filter(|(x, _)| x.depth() >= 1)
            .map(|(x, val)| 0.5f64.powi(x.depth() as i32 + 1) * val * val),
    );
    let (q_diff, _) = quadratic_form(&[-4.0, 0.0, 1.0], v, depth.max(conjecture_min_depth(v, 2)))?;
    Ok(ConjectureForm {
        qform,
        dh_norm2,
        shell_norm2,
        difference_target,
        check_a1: (dh_norm2 - shell_norm2).abs(),
        check_ax2m4: (q_diff - difference_target).abs(),
    })
}
