//! Boundary integrals of `log |L|²` and `log Im M`, the weighted sum rules
//! that equate them with eigenvalue and trace terms, and the ledger inequality
//! obtained from the AGM bound on `Im M`.

use std::f64::consts::{FRAC_PI_3, PI, SQRT_2};

use num_complex::Complex64;
use serde::Serialize;

use crate::conformal::{chebyshev, eigen_term, CosCoeffs};
use crate::determinant::{det_root_raw, frontier_product, subtree_determinants};
use crate::error::{Error, Result};
use crate::quadrature::{neumaier_sum, periodic_mean, tanh_sinh, Quadrature, QuadratureOptions};
use crate::resolvent::{m_function, m_raw};
use crate::spectrum::{eigen_zeta, supported_subtree_roots, EigenLedger};
use crate::traces::{trace_ledger, trace_side, TraceLedger};
use crate::tree::{Potential, VertexId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IdentityKind {
    Fourier(usize),
    Combined,
    TraceAssembly,
    EntropyForms,
    ImMFormula,
    Agm,
    Ledger,
    MainLemma,
    Eigenvalue,
    RadialReduction,
    Intertwining,
    ConjectureNorm,
    ConjectureDifference,
    HypothesisSums,
}

impl IdentityKind {
    pub fn label(&self) -> String {
        match self {
            Self::Fourier(n) => format!("fourier_{n}"),
            Self::Combined => "combined".into(),
            Self::TraceAssembly => "trace_assembly".into(),
            Self::EntropyForms => "entropy_forms".into(),
            Self::ImMFormula => "im_m_formula".into(),
            Self::Agm => "agm".into(),
            Self::Ledger => "ledger_inequality".into(),
            Self::MainLemma => "main_lemma".into(),
            Self::Eigenvalue => "eigenvalue".into(),
            Self::RadialReduction => "radial_reduction".into(),
            Self::Intertwining => "intertwining".into(),
            Self::ConjectureNorm => "conjecture_norm".into(),
            Self::ConjectureDifference => "conjecture_difference".into(),
            Self::HypothesisSums => "hypothesis_sums".into(),
        }
    }

    pub fn is_inequality(&self) -> bool {
        matches!(self, Self::Agm | Self::Ledger)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumRuleReport {
    pub kind: IdentityKind,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs - rhs| / (1 + |lhs|)` for identities, `lhs - rhs` for inequalities.
    pub residual: f64,
    pub weight: CosCoeffs,
    pub nodes_used: usize,
    pub converged: bool,
}

impl SumRuleReport {
    pub fn identity(
        kind: IdentityKind,
        lhs: f64,
        rhs: f64,
        weight: CosCoeffs,
        q: Option<Quadrature>,
    ) -> Self {
        Self {
            kind,
            lhs,
            rhs,
            residual: (lhs - rhs).abs() / (1.0 + lhs.abs()),
            weight,
            nodes_used: q.map_or(0, |q| q.nodes),
            converged: q.is_none_or(|q| q.converged),
        }
    }

    pub fn inequality(
        kind: IdentityKind,
        lhs: f64,
        rhs: f64,
        weight: CosCoeffs,
        q: Option<Quadrature>,
    ) -> Self {
        Self {
            residual: lhs - rhs,
            ..Self::identity(kind, lhs, rhs, weight, q)
        }
    }

    pub fn slack(&self) -> Option<f64> {
        self.kind.is_inequality().then_some(self.lhs - self.rhs)
    }
}

/// `(1/2π) ∫ log |L_{T_x}(e^{iθ})|² w(θ) dθ`.
pub fn log_det_quadrature(
    v: &Potential,
    x: VertexId,
    w: &CosCoeffs,
    opts: &QuadratureOptions,
) -> Quadrature {
    let vx = v.subtree_view(x);
    if vx.is_zero() {
        return Quadrature {
            value: 0.0,
            nodes: 0,
            converged: true,
        };
    }
    periodic_mean(
        |t| {
            let l = det_root_raw(&vx, Complex64::from_polar(1.0, t));
            2.0 * l.norm().ln() * w.eval(t)
        },
        opts,
    )
}

/// `Σ_s mult_s · G_w(ζ_s)` with the signed eigenvalue term.
pub fn eigen_side(ledger: &EigenLedger, w: &CosCoeffs) -> Result<f64> {
    let mut terms = Vec::with_capacity(ledger.entries.len());
    for e in &ledger.entries {
        terms.push(e.mult as f64 * eigen_term(e.zeta, w)?);
    }
    Ok(neumaier_sum(terms))
}

/// The single-harmonic sum rule. For `n = 0` both sides are halved:
/// `(1/4π) ∫ log |L|² = Σ_s log 1/|ζ_s|`.
pub fn fourier_identity(
    v: &Potential,
    x: VertexId,
    n: usize,
    opts: &QuadratureOptions,
) -> Result<SumRuleReport> {
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let w = CosCoeffs::new(c);
    let mut r = combined_identity(v, x, &w, opts)?;
    r.kind = IdentityKind::Fourier(n);
    if n == 0 {
        r = SumRuleReport::identity(
            r.kind,
            0.5 * r.lhs,
            0.5 * r.rhs,
            r.weight,
            Some(Quadrature {
                value: 0.5 * r.lhs,
                nodes: r.nodes_used,
                converged: r.converged,
            }),
        );
    }
    Ok(r)
}

/// `(1/2π) ∫ log |L|² w = Σ_s G_w(ζ_s) - Σ_{n≥1} (c_n/n) tr(T_n(H_V/√2) - T_n(H_0/√2))`.
pub fn combined_identity(
    v: &Potential,
    x: VertexId,
    w: &CosCoeffs,
    opts: &QuadratureOptions,
) -> Result<SumRuleReport> {
    let q = log_det_quadrature(v, x, w, opts);
    let ledger = eigen_zeta(v, x)?;
    let rhs = eigen_side(&ledger, w)? - trace_side(v, x, w);
    Ok(SumRuleReport::identity(
        IdentityKind::Combined,
        q.value,
        rhs,
        w.clone(),
        Some(q),
    ))
}

/// `Im M(e^{iθ}) / sin θ` for the free operator, measured at `θ = π/3`.
pub fn calibrate_kappa_m() -> Result<f64> {
    let theta = FRAC_PI_3;
    let m = m_function(&Potential::zero(), Complex64::from_polar(1.0, theta))?;
    Ok(m.m.im / theta.sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyReport {
    /// Offset periodic trapezoid in `θ`.
    pub theta_form: Quadrature,
    /// Tanh-sinh in `x = 2√2 cos θ` against the free density.
    pub x_form: Quadrature,
    /// Some node had `Im M ≤ 0` and was clamped.
    pub clamped: bool,
}

/// `(1/2π) ∫ log(Im M(e^{iθ}) / (κ_M sin θ)) w(θ) dθ`, in two coordinates.
pub fn entropy_integral(
    v: &Potential,
    w: &CosCoeffs,
    opts: &QuadratureOptions,
) -> Result<EntropyReport> {
    if v.is_zero() {
        let zero = Quadrature {
            value: 0.0,
            nodes: 0,
            converged: true,
        };
        return Ok(EntropyReport {
            theta_form: zero,
            x_form: zero,
            clamped: false,
        });
    }
    let kappa_m = calibrate_kappa_m()?;
    let mut clamped = false;
    let mut failure = None;
    let theta_form = periodic_mean(
        |t| {
            let (s, c) = t.sin_cos();
            match m_function(v, Complex64::new(c, s)) {
                Ok(m) => {
                    let ratio = m.m.im / (kappa_m * s);
                    if ratio <= 0.0 {
                        clamped = true;
                    }
                    ratio.max(1e-300).ln() * w.eval(t)
                }
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    // x = 2√2 s, s = cos θ ∈ (-1, 1); the mean over the circle is
    // (1/π) ∫ f(θ(s)) ds / √(1 - s²) by the reflection symmetry of Im M.
    let x_form = tanh_sinh(
        |s, gap| {
            let sin_t = (gap * (2.0 - gap)).sqrt();
            let zeta = Complex64::new(s, sin_t);
            let free_density = sin_t / SQRT_2; // π μ₀'(x) = √(8 - x²)/4
                                               // nodes may sit within rounding of ζ = ±1, where the finite
                                               // section is still regular
            let m = match m_raw(v, zeta) {
                Some(m) => m.im,
                None => {
                    failure = Some(Error::Pole(zeta));
                    return 0.0;
                }
            };
            let ratio = m / free_density;
            if ratio <= 0.0 {
                clamped = true;
            }
            let y = 2.0 * s;
            let weight = w.get(0)
                + w.coeffs()
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(n, c)| c * chebyshev(n, y) / 2.0)
                    .sum::<f64>();
            ratio.max(1e-300).ln() * weight / (PI * sin_t)
        },
        opts.tol,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(EntropyReport {
        theta_form,
        x_form,
        clamped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImMReport {
    pub im_m: f64,
    /// `κ_M sin θ Σ_{|y|=N} |L_{T_X̃(y)}|² / (2^N |L_T|²)`
    pub product: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgmReport {
    pub formula: ImMReport,
    /// `log(Im M / (κ_M sin θ))`
    pub lhs: f64,
    /// `2^{-N} Σ_{|y|=N} log |L_{T_X̃(y)}|² - log |L_T|²`
    pub rhs: f64,
    pub slack: f64,
}

/// Boundary product formula for `Im M` of `V(N)` and the AGM bound it implies.
pub fn agm_pointwise(v: &Potential, n: u32, theta: f64) -> Result<AgmReport> {
    let s = theta.sin();
    if s.abs() < 1e-12 {
        return Err(Error::InvalidDiskPoint(Complex64::from_polar(1.0, theta)));
    }
    let vn = v.truncate(n);
    let zeta = Complex64::from_polar(1.0, theta);
    let kappa_m = calibrate_kappa_m()?;
    let im_m = m_function(&vn, zeta)?.m.im;
    let dets = subtree_determinants(&vn, zeta)?;
    let lt2 = dets[0].norm_sqr();
    let count = 1u64 << n;
    let mut squares = Vec::with_capacity(count as usize);
    for k in 1..=count {
        let y = VertexId::new(n, k)?;
        squares.push(frontier_product(&dets, y).norm_sqr());
    }
    let scale = 0.5f64.powi(n as i32);
    let product = kappa_m * s * scale * neumaier_sum(squares.iter().copied()) / lt2;
    let formula = ImMReport {
        im_m,
        product,
        residual: (im_m - product).abs() / im_m.abs().max(1e-300),
    };
    let lhs = (im_m / (kappa_m * s)).ln();
    let rhs = scale * neumaier_sum(squares.iter().map(|q| q.ln())) - lt2.ln();
    Ok(AgmReport {
        formula,
        lhs,
        rhs,
        slack: lhs - rhs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerInequality {
    pub entropy: EntropyReport,
    /// Tree eigenvalue term minus the shell-weighted subtree eigenvalue terms.
    pub eigen_bracket: f64,
    pub trace: TraceLedger,
    pub report: SumRuleReport,
}

/// `entropy + {Σ_s G_w(T) - Σ_j 2^{-j} Σ_{|x|=j} Σ_s G_w(T_x)} ≥ trace bracket`
/// for `V(N)`; requires `w ≥ 0`.
pub fn ledger_inequality(
    v: &Potential,
    n: u32,
    w: &CosCoeffs,
    opts: &QuadratureOptions,
) -> Result<LedgerInequality> {
    w.ensure_nonnegative()?;
    let vn = v.truncate(n);
    let entropy = entropy_integral(&vn, w, opts)?;
    let mut terms = vec![eigen_side(&eigen_zeta(&vn, VertexId::ROOT)?, w)?];
    for x in supported_subtree_roots(&vn) {
        terms.push(-0.5f64.powi(x.depth() as i32) * eigen_side(&eigen_zeta(&vn, x)?, w)?);
    }
    let eigen_bracket = neumaier_sum(terms);
    let trace = trace_ledger(&vn, n, w);
    let lhs = entropy.theta_form.value + eigen_bracket;
    let report = SumRuleReport::inequality(
        IdentityKind::Ledger,
        lhs,
        trace.bracket,
        w.clone(),
        Some(entropy.theta_form),
    );
    Ok(LedgerInequality {
        entropy,
        eigen_bracket,
        trace,
        report,
    })
}
