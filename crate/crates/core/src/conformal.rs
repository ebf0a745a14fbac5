//! Uniformization of the resolvent domain by the unit disk, normalized
//! Chebyshev polynomials, cosine weights and the eigenvalue-side terms they induce.
//!
//! The map `z = √2 (ζ + 1/ζ)` sends the punctured unit disk onto the complement of
//! the band `[-2√2, 2√2]`; the unit circle covers the band twice.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre_integrate, neumaier_sum};

/// Right band edge `2√2`.
pub const BAND_EDGE: f64 = 2.0 * SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiskPoint(pub Complex64);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyPoint(pub Complex64);

impl DiskPoint {
    pub fn new(re: f64, im: f64) -> Self {
        Self(Complex64::new(re, im))
    }

    pub fn on_circle(theta: f64) -> Self {
        Self(Complex64::from_polar(1.0, theta))
    }

    pub fn to_energy(self) -> Result<EnergyPoint> {
        zeta_to_z(self.0).map(EnergyPoint)
    }
}

impl EnergyPoint {
    pub fn to_disk(self) -> Result<DiskPoint> {
        z_to_zeta(self.0).map(DiskPoint)
    }
}

pub fn zeta_to_z(zeta: Complex64) -> Result<Complex64> {
    if zeta == Complex64::new(0.0, 0.0) {
        return Err(Error::ZeroDiskPoint);
    }
    Ok(SQRT_2 * (zeta + zeta.inv()))
}

/// Real-axis image of a real disk point.
#[inline]
pub fn zeta_to_x(zeta: f64) -> f64 {
    SQRT_2 * (zeta + 1.0 / zeta)
}

/// Inverse of [`zeta_to_z`] on the complement of the band. The branch of
/// `√(z² - 8)` is whichever one gives `|ζ| < 1`.
pub fn z_to_zeta(z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 && z.re.abs() <= BAND_EDGE {
        return Err(Error::OnBand(z));
    }
    let s = (z * z - 8.0).sqrt();
    let a = (z - s) / (2.0 * SQRT_2);
    let b = (z + s) / (2.0 * SQRT_2);
    let zeta = if a.norm() <= b.norm() { a } else { b };
    if zeta.norm() >= 1.0 {
        return Err(Error::OnBand(z));
    }
    Ok(zeta)
}

/// Normalized Chebyshev polynomial of the first kind: `T_k(2 cos θ) = 2 cos kθ`
/// (so `T_0 = 2`, `T_1(y) = y`).
pub fn chebyshev(k: usize, y: f64) -> f64 {
    match k {
        0 => 2.0,
        1 => y,
        _ => {
            let (mut prev, mut cur) = (2.0, y);
            for _ in 1..k {
                let next = y * cur - prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Monomial coefficients of the normalized `T_k`, lowest degree first.
pub fn chebyshev_monomials(k: usize) -> Vec<f64> {
    let mut prev = vec![2.0];
    let mut cur = vec![0.0, 1.0];
    if k == 0 {
        return prev;
    }
    for _ in 1..k {
        let mut next = vec![0.0; cur.len() + 1];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += c;
        }
        for (i, p) in prev.iter().enumerate() {
            next[i] -= p;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// A finite cosine polynomial `w(θ) = Σ_n c_n cos nθ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CosCoeffs {
    c: Vec<f64>,
}

impl CosCoeffs {
    pub fn new(mut c: Vec<f64>) -> Self {
        while c.len() > 1 && *c.last().unwrap() == 0.0 {
            c.pop();
        }
        if c.is_empty() {
            c.push(0.0);
        }
        Self { c }
    }

    pub fn constant(c0: f64) -> Self {
        Self::new(vec![c0])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn degree(&self) -> usize {
        self.c.len() - 1
    }

    pub fn get(&self, n: usize) -> f64 {
        self.c.get(n).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, theta: f64) -> f64 {
        neumaier_sum(
            self.c
                .iter()
                .enumerate()
                .map(|(n, c)| c * (n as f64 * theta).cos()),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.c.len().max(other.c.len());
        Self::new((0..n).map(|i| self.get(i) + other.get(i)).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.c.iter().map(|c| c * s).collect())
    }

    /// Product of two cosine polynomials (`cos a cos b = (cos(a+b) + cos(a-b)) / 2`).
    pub fn mul(&self, other: &Self) -> Self {
        let mut out = vec![0.0; self.c.len() + other.c.len() - 1];
        for (a, ca) in self.c.iter().enumerate() {
            for (b, cb) in other.c.iter().enumerate() {
                let p = 0.5 * ca * cb;
                out[a + b] += p;
                out[a.abs_diff(b)] += p;
            }
        }
        Self::new(out)
    }

    /// Cosine coefficients of a sampled even function by discrete Fourier
    /// analysis on `m` points. Sine content above `tol` is rejected.
    pub fn from_samples<F: Fn(f64) -> f64>(f: F, degree: usize, tol: f64) -> Result<Self> {
        let m = 4 * (degree + 1);
        let samples: Vec<f64> = (0..m).map(|j| f(2.0 * PI * j as f64 / m as f64)).collect();
        let mut c = Vec::with_capacity(degree + 1);
        let mut worst_sine: f64 = 0.0;
        for n in 0..=degree.min(m / 2 - 1) {
            let (mut a, mut b) = (0.0, 0.0);
            for (j, s) in samples.iter().enumerate() {
                let t = 2.0 * PI * (n * j) as f64 / m as f64;
                a += s * t.cos();
                b += s * t.sin();
            }
            let scale = if n == 0 { 1.0 } else { 2.0 } / m as f64;
            c.push(a * scale);
            worst_sine = worst_sine.max((b * scale).abs());
        }
        if worst_sine > tol {
            return Err(Error::OddWeight(worst_sine));
        }
        Ok(Self::new(c))
    }

    /// Minimum of `w` on a uniform grid, as `(θ, w(θ))`.
    pub fn grid_minimum(&self, points: usize) -> (f64, f64) {
        (0..points)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / points as f64;
                (t, self.eval(t))
            })
            .fold((0.0, f64::INFINITY), |m, p| if p.1 < m.1 { p } else { m })
    }

    /// Checks `w ≥ 0` on a fine grid; tiny negative values from rounding are tolerated.
    pub fn ensure_nonnegative(&self) -> Result<()> {
        let (theta, value) = self.grid_minimum(64 * (self.degree() + 1));
        let scale = self.c.iter().map(|c| c.abs()).sum::<f64>().max(1.0);
        if value < -1e-12 * scale {
            return Err(Error::NegativeWeight { theta, value });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum WeightSpec {
    /// `(2 sin θ)^{2p}`, given by its even exponent `2p`. The exponent 4 yields `16 sin⁴ θ`.
    SinPower(u32),
    /// `A(2 cos θ) · 4 sin² θ`, the disk image of `A(x/√2) √(8 - x²)`.
    BandPolynomial(Vec<f64>),
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1)) as f64
}

/// Cosine coefficients of `(2 cos θ)^k`.
fn two_cos_power(k: usize) -> CosCoeffs {
    let mut c = vec![0.0; k + 1];
    for j in 0..=k {
        let m = (k as i64 - 2 * j as i64).unsigned_abs() as usize;
        // exponents ±m both land in c[m], giving 2 C(k, j) cos mθ
        c[m] += binomial(k as u64, j as u64);
    }
    CosCoeffs::new(c)
}

pub fn weight_coeffs(spec: &WeightSpec) -> Result<CosCoeffs> {
    match spec {
        WeightSpec::SinPower(e) => {
            if e % 2 == 1 {
                return Err(Error::OddWeight(1.0));
            }
            let p = (*e / 2) as u64;
            let mut c = vec![0.0; 2 * p as usize + 1];
            c[0] = binomial(2 * p, p);
            for k in 1..=p {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                c[2 * k as usize] = 2.0 * sign * binomial(2 * p, p - k);
            }
            Ok(CosCoeffs::new(c))
        }
        WeightSpec::BandPolynomial(a) => {
            let degree = a.iter().rposition(|&x| x != 0.0).unwrap_or(0);
            if degree % 2 == 1 {
                return Err(Error::OddPolynomial(degree));
            }
            let mut acc = CosCoeffs::constant(0.0);
            for (k, &ak) in a.iter().enumerate() {
                if ak != 0.0 {
                    acc = acc.add(&two_cos_power(k).scale(ak));
                }
            }
            Ok(acc.mul(&weight_coeffs(&WeightSpec::SinPower(2))?))
        }
    }
}

/// Eigenvalue-side term of the weighted sum rule,
/// `G_w(r) = 2 c_0 log(1/r) + Σ_{n≥1} (c_n / n)(r^{-n} - r^n)` for `0 < r ≤ 1`.
///
/// With `r = e^{-t}` the terms are odd power series in `t`; near `r = 1` the
/// series is summed directly so that the cancellations of a weight vanishing
/// at `θ ∈ {0, π}` are exact.
pub fn eigen_term_g(r: f64, w: &CosCoeffs) -> Result<f64> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidRadius(r));
    }
    let t = -r.ln();
    let nmax = w.degree().max(1) as f64;
    if nmax * t < 0.25 {
        // G = 2 c_0 t + 2 Σ_j t^{2j+1}/(2j+1)! Σ_n c_n n^{2j}
        let mut total = 2.0 * w.get(0) * t;
        let mut tp = t;
        let mut fact = 1.0;
        for j in 0..40 {
            let moment: f64 = w
                .coeffs()
                .iter()
                .enumerate()
                .skip(1)
                .map(|(n, c)| c * (n as f64).powi(2 * j))
                .sum();
            let term = 2.0 * moment * tp / fact;
            total += term;
            if j > 2 && term.abs() < 1e-18 * total.abs().max(1e-300) {
                break;
            }
            tp *= t * t;
            fact *= ((2 * j + 2) * (2 * j + 3)) as f64;
        }
        return Ok(total);
    }
    let mut terms = vec![2.0 * w.get(0) * t];
    for (n, c) in w.coeffs().iter().enumerate().skip(1) {
        terms.push(c / n as f64 * 2.0 * (n as f64 * t).sinh());
    }
    Ok(neumaier_sum(terms))
}

/// Eigenvalue-side term for a real eigenvalue image `ζ ∈ (-1, 0) ∪ (0, 1)`:
/// `2 c_0 log(1/|ζ|) + Σ (c_n / n)(ζ^{-n} - ζ^n)`. Equals `G_w(|ζ|)` for weights
/// with even harmonics only.
pub fn eigen_term(zeta: f64, w: &CosCoeffs) -> Result<f64> {
    if zeta >= 0.0 {
        return eigen_term_g(zeta, w);
    }
    let flipped = CosCoeffs::new(
        w.coeffs()
            .iter()
            .enumerate()
            .map(|(n, c)| if n % 2 == 1 { -c } else { *c })
            .collect(),
    );
    eigen_term_g(-zeta, &flipped)
}

/// Eigenvalue penalty `F^A(x) = ∫ A(s/√2) √(s² - 8) ds` from the nearest band edge
/// to `x`, for `|x| > 2√2`. `a` holds the coefficients of `A`, lowest first.
///
/// Beyond the band `√(8 - s²)` is imaginary; `√(s² - 8)` is used so that `F^A ≥ 0`
/// for `A ≥ 0` and `F^A` grows with `|x|`.
pub fn f_a_eval(x: f64, a: &[f64]) -> Result<f64> {
    if x.abs() <= BAND_EDGE {
        return Err(Error::OnBand(Complex64::new(x, 0.0)));
    }
    let sign = x.signum();
    // s = ±2√2 cosh u turns the integrand into A(±2 cosh u) 8 sinh² u
    let u_max = (x.abs() / BAND_EDGE).acosh();
    let integrand = |u: f64| {
        let s2 = sign * 2.0 * u.cosh();
        let poly = a.iter().rev().fold(0.0, |acc, c| acc * s2 + c);
        poly * 8.0 * u.sinh().powi(2)
    };
    let coarse = gauss_legendre_integrate(integrand, 0.0, u_max, 32);
    let fine = gauss_legendre_integrate(integrand, 0.0, u_max, 64);
    debug_assert!((coarse - fine).abs() <= 1e-10 * (1.0 + fine.abs()));
    Ok(fine)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn map_examples() {
        let z = zeta_to_z(Complex64::new(1.0, 0.0)).unwrap();
        assert!(close(z.re, BAND_EDGE, 1e-15) && z.im == 0.0);
        let z = zeta_to_z(Complex64::new(0.0, 1.0)).unwrap();
        assert!(z.norm() < 1e-15);
        let zeta = z_to_zeta(Complex64::new(3.0, 0.0)).unwrap();
        assert!(close(zeta.re, 1.0 / SQRT_2, 1e-14) && zeta.im.abs() < 1e-15);
        assert!(zeta_to_z(Complex64::new(0.0, 0.0)).is_err());
        assert!(z_to_zeta(Complex64::new(1.0, 0.0)).is_err());
        assert!(z_to_zeta(Complex64::new(-BAND_EDGE, 0.0)).is_err());
    }

    #[test]
    fn map_round_trip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let r: f64 = rng.random_range(0.01..0.99);
            let t: f64 = rng.random_range(0.0..2.0 * PI);
            let zeta = Complex64::from_polar(r, t);
            let back = z_to_zeta(zeta_to_z(zeta).unwrap()).unwrap();
            assert!((back - zeta).norm() < 1e-14, "{zeta} -> {back}");
        }
    }

    #[test]
    fn chebyshev_examples() {
        assert!(close(chebyshev(2, 1.0), -1.0, 1e-15));
        assert!(close(
            chebyshev(2, 1.0),
            2.0 * (2.0 * PI / 3.0).cos(),
            1e-14
        ));
        assert_eq!(chebyshev(0, 17.0), 2.0);
        assert_eq!(chebyshev(4, 1.0), -1.0);
        assert_eq!(chebyshev_monomials(4), vec![2.0, 0.0, -4.0, 0.0, 1.0]);
    }

    #[test]
    fn chebyshev_angle_identity() {
        for k in 0..=12 {
            for j in 0..1000 {
                let t = 2.0 * PI * j as f64 / 1000.0;
                let lhs = chebyshev(k, 2.0 * t.cos());
                assert!(close(lhs, 2.0 * (k as f64 * t).cos(), 1e-12), "k={k} t={t}");
            }
        }
    }

    /// Independent oracle: DFT of the sampled weight.
    fn dft_cos(f: impl Fn(f64) -> f64, n: usize) -> Vec<f64> {
        let m = 64;
        (0..=n)
            .map(|k| {
                let s: f64 = (0..m)
                    .map(|j| {
                        let t = 2.0 * PI * j as f64 / m as f64;
                        f(t) * (k as f64 * t).cos()
                    })
                    .sum();
                s * if k == 0 { 1.0 } else { 2.0 } / m as f64
            })
            .collect()
    }

    #[test]
    fn weight_examples() {
        let w4 = weight_coeffs(&WeightSpec::SinPower(4)).unwrap();
        assert_eq!(w4.coeffs(), &[6.0, 0.0, -8.0, 0.0, 2.0]);
        let oracle = dft_cos(|t| 16.0 * t.sin().powi(4), 4);
        for (a, b) in w4.coeffs().iter().zip(&oracle) {
            assert!(close(*a, *b, 1e-13));
        }
        let w2 = weight_coeffs(&WeightSpec::SinPower(2)).unwrap();
        assert_eq!(w2.coeffs(), &[2.0, 0.0, -2.0]);
        assert_eq!(
            weight_coeffs(&WeightSpec::SinPower(0)).unwrap().coeffs(),
            &[1.0]
        );
        assert!(weight_coeffs(&WeightSpec::SinPower(3)).is_err());
        let w6 = weight_coeffs(&WeightSpec::SinPower(6)).unwrap();
        assert_eq!(w6.coeffs(), &[20.0, 0.0, -30.0, 0.0, 12.0, 0.0, -2.0]);
    }

    #[test]
    fn band_polynomial_weights() {
        let w = weight_coeffs(&WeightSpec::BandPolynomial(vec![1.0])).unwrap();
        assert_eq!(w, weight_coeffs(&WeightSpec::SinPower(2)).unwrap());
        let w = weight_coeffs(&WeightSpec::BandPolynomial(vec![-4.0, 0.0, 1.0])).unwrap();
        for j in 0..200 {
            let t = 2.0 * PI * j as f64 / 200.0;
            let direct = (4.0 * t.cos().powi(2) - 4.0) * 4.0 * t.sin().powi(2);
            assert!(close(w.eval(t), direct, 1e-12));
        }
        assert!(weight_coeffs(&WeightSpec::BandPolynomial(vec![0.0, 1.0])).is_err());
    }

    #[test]
    fn reconstruction_matches_samples() {
        let f = |t: f64| 64.0 * t.sin().powi(6) + 3.0 * (2.0 * t).cos();
        let c = CosCoeffs::from_samples(f, 8, 1e-12).unwrap();
        for j in 0..500 {
            let t = 0.0123 * j as f64;
            assert!(close(c.eval(t), f(t), 1e-12));
        }
        assert!(CosCoeffs::from_samples(|t| t.sin(), 4, 1e-12).is_err());
    }

    #[test]
    fn eigen_term_examples() {
        let w4 = weight_coeffs(&WeightSpec::SinPower(4)).unwrap();
        assert_eq!(eigen_term_g(1.0, &w4).unwrap(), 0.0);
        let g = eigen_term_g(0.5, &CosCoeffs::constant(1.0)).unwrap();
        assert!(close(g, 2.0 * 2f64.ln(), 1e-15));
        assert!(eigen_term_g(0.0, &w4).is_err());
        assert!(eigen_term_g(-0.3, &w4).is_err());
        // direct formula away from r = 1
        let r: f64 = 0.4;
        let direct =
            0.5 * ((r.powi(-4) - r.powi(4)) - 8.0 * (r.powi(-2) - r * r) + 24.0 * (1.0 / r).ln());
        assert!(close(eigen_term_g(r, &w4).unwrap(), direct, 1e-12));
    }

    #[test]
    fn eigen_term_series_matches_direct() {
        let w4 = weight_coeffs(&WeightSpec::SinPower(4)).unwrap();
        // t = 0.05: series branch; compare with a high-order expansion by hand
        let t: f64 = 0.05;
        let expected = (4.0 * t).sinh() - 8.0 * (2.0 * t).sinh() + 12.0 * t;
        let got = eigen_term_g((-t).exp(), &w4).unwrap();
        assert!((got - expected).abs() < 1e-15, "{got} {expected}");
    }

    #[test]
    fn eigen_term_sign_alternates_with_sin_power() {
        // (2 sin θ)^{2p} gives G ~ (-1)^p c t^{2p+1} with c > 0
        for e in [2, 4, 6] {
            let w = weight_coeffs(&WeightSpec::SinPower(e)).unwrap();
            let sign = if e % 4 == 0 { 1.0 } else { -1.0 };
            for k in 1..100 {
                let r = k as f64 / 100.0;
                assert!(sign * eigen_term_g(r, &w).unwrap() > 0.0, "{e} {r}");
            }
        }
    }

    #[test]
    fn signed_eigen_term_for_odd_harmonics() {
        let w = CosCoeffs::new(vec![1.0, 0.5, 0.25]);
        let z: f64 = -0.3;
        let direct =
            2.0 * (1.0 / z.abs()).ln() + 0.5 * (1.0 / z - z) + 0.125 * (z.powi(-2) - z * z);
        assert!(close(eigen_term(z, &w).unwrap(), direct, 1e-12));
    }

    #[test]
    fn f_a_examples() {
        let closed = |s: f64| {
            let r = (s * s - 8.0).sqrt();
            0.5 * (s * r - 8.0 * ((s + r) / BAND_EDGE).ln())
        };
        assert!(f_a_eval(BAND_EDGE, &[1.0]).is_err());
        let v = f_a_eval(3.0, &[1.0]).unwrap();
        assert!(close(v, closed(3.0), 1e-13), "{v} vs {}", closed(3.0));
        assert!(close(f_a_eval(-3.0, &[1.0]).unwrap(), v, 1e-14));
        assert!(close(
            f_a_eval(BAND_EDGE * (1.0 + 1e-12), &[1.0]).unwrap(),
            0.0,
            1e-12
        ));
        assert!(f_a_eval(5.0, &[1.0]).unwrap() > f_a_eval(4.0, &[1.0]).unwrap());
    }
}
