//! Configuration, experiment dispatch and report files for the `bethe` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use bethe_core::conformal::{weight_coeffs, BAND_EDGE};
use bethe_core::determinant::{calibrate_kappa0, main_lemma_residual};
use bethe_core::quadrature::QuadratureOptions;
use bethe_core::radial::{
    conjecture_form, conjecture_min_depth, jacobi_reduce, shift_structures, RadialProfile,
};
use bethe_core::spectrum::{eigen_oracle, eigen_zeta, supported_subtree_roots, EigenLedger};
use bethe_core::sum_rules::{
    agm_pointwise, calibrate_kappa_m, combined_identity, entropy_integral, fourier_identity,
    ledger_inequality, IdentityKind,
};
use bethe_core::traces::{trace_side, trace_side_direct, TraceLedger};
use bethe_core::tree::hypothesis_sums;
use bethe_core::{CosCoeffs, EnergyPoint, Potential, VertexId, WeightSpec};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const CSV_HEADER: [&str; 7] = [
    "experiment_id",
    "identity_kind",
    "lhs",
    "rhs",
    "residual",
    "nodes",
    "runtime_s",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    IdentitySuite,
    Eigenvalues,
    LedgerInequality,
    MainLemma,
    RadialCompare,
    ConjectureForm,
    HypothesisScan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub struct RandomSpec {
    pub seed: u64,
    pub depth: u32,
    pub amplitude: f64,
    /// Envelope exponent: shell `n` is scaled by `(n + 1)^{-decay}`.
    #[serde(default)]
    pub decay: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `[depth, index, value]` triples.
    Values(Vec<(u32, u64, f64)>),
    /// One value per shell.
    Radial(Vec<f64>),
    Random(RandomSpec),
    /// A JSON file holding another potential spec.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightConfig {
    /// `(2 sin θ)^e` for an even exponent `e`.
    SinPower(u32),
    /// Coefficients of `A`, lowest degree first.
    BandPolynomial(Vec<f64>),
}

impl WeightConfig {
    fn spec(&self) -> WeightSpec {
        match self {
            Self::SinPower(e) => WeightSpec::SinPower(*e),
            Self::BandPolynomial(a) => WeightSpec::BandPolynomial(a.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    pub theta_initial_nodes: usize,
    pub theta_max_nodes: usize,
    /// Interior disk points for the main lemma.
    pub zeta_samples: usize,
    /// Circle angles for the boundary `Im M` formula.
    pub boundary_angles: usize,
    /// Energies for the radial comparison.
    pub energy_samples: usize,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            theta_initial_nodes: 64,
            theta_max_nodes: 1 << 16,
            zeta_samples: 5,
            boundary_angles: 64,
            energy_samples: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Bound on identity residuals `|lhs - rhs| / (1 + |lhs|)`.
    pub identity: f64,
    /// Inequalities pass when `lhs - rhs ≥ -slack`.
    pub slack: f64,
    /// Bound on `|x_det - x_oracle|` against the extrapolated truncation oracle.
    pub eigenvalue: f64,
    /// Convergence target of the adaptive quadratures.
    pub quadrature: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            identity: 1e-7,
            slack: 1e-8,
            eigenvalue: 1e-4,
            quadrature: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentKind>,
    pub potential: Option<PotentialSpec>,
    pub weight: WeightConfig,
    /// Truncation level `N`; defaults to the support depth.
    pub truncation: Option<u32>,
    pub grids: Grids,
    pub tolerances: Tolerances,
    /// Seed for sampled energies and for the default random potential.
    pub seed: u64,
    /// Depth of the plain truncation used as eigenvalue oracle.
    pub oracle_depth: u32,
    /// Largest `|y|` in the main-lemma check.
    pub max_vertex_depth: u32,
    /// Coefficients of `A` for the quadratic form, lowest degree first.
    pub polynomial: Vec<f64>,
    /// Largest `N` of the hypothesis scan.
    pub scan_depth: u32,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            potential: None,
            weight: WeightConfig::SinPower(4),
            truncation: None,
            grids: Grids::default(),
            tolerances: Tolerances::default(),
            seed: 0,
            oracle_depth: 14,
            max_vertex_depth: 5,
            polynomial: vec![-4.0, 0.0, 1.0],
            scan_depth: 6,
            output: None,
        }
    }
}

/// Parses and validates a JSON configuration document.
pub fn parse_config(text: &str) -> anyhow::Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text).context("invalid configuration")?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        let t = &self.tolerances;
        for (name, value) in [
            ("tolerances.identity", t.identity),
            ("tolerances.slack", t.slack),
            ("tolerances.eigenvalue", t.eigenvalue),
            ("tolerances.quadrature", t.quadrature),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                bail!("{name} must be positive and finite, got {value}");
            }
        }
        let g = &self.grids;
        if g.theta_initial_nodes == 0 || g.theta_max_nodes < g.theta_initial_nodes {
            bail!("grids.theta_max_nodes must be at least grids.theta_initial_nodes > 0");
        }
        if g.boundary_angles == 0 || g.zeta_samples == 0 || g.energy_samples == 0 {
            bail!("grids sample counts must be positive");
        }
        if self.oracle_depth < 2 || self.oracle_depth > 22 {
            bail!("oracle_depth must lie in 2..=22, got {}", self.oracle_depth);
        }
        if let WeightConfig::SinPower(e) = self.weight {
            if e == 0 || e % 2 == 1 {
                bail!("weight.sin_power must be a positive even exponent, got {e}");
            }
        }
        if let Some(PotentialSpec::Random(r)) = &self.potential {
            if !(r.amplitude >= 0.0 && r.amplitude.is_finite()) {
                bail!(
                    "potential.random.amplitude must be nonnegative, got {}",
                    r.amplitude
                );
            }
        }
        Ok(())
    }

    fn quadrature(&self) -> QuadratureOptions {
        QuadratureOptions {
            tol: self.tolerances.quadrature,
            initial_nodes: self.grids.theta_initial_nodes,
            max_nodes: self.grids.theta_max_nodes,
        }
    }
}

pub fn build_potential(spec: &PotentialSpec) -> anyhow::Result<Potential> {
    Ok(match spec {
        PotentialSpec::Values(triples) => {
            let depth = triples.iter().map(|t| t.0).max().unwrap_or(0);
            let mut v = Potential::with_support_depth(depth);
            for &(d, k, val) in triples {
                v.set(VertexId::new(d, k)?, val)?;
            }
            v
        }
        PotentialSpec::Radial(profile) => Potential::radial(profile),
        PotentialSpec::Random(r) => Potential::random(r.seed, r.depth, r.amplitude, r.decay),
        PotentialSpec::File(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let inner: PotentialSpec = serde_json::from_str(&text)
                .with_context(|| format!("parsing potential file {}", path.display()))?;
            if matches!(inner, PotentialSpec::File(_)) {
                bail!("potential file {} refers to another file", path.display());
            }
            build_potential(&inner)?
        }
    })
}

/// How a row is judged against the tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Identity,
    Slack,
    Eigenvalue,
    Exact,
    Info,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub experiment_id: String,
    pub identity_kind: String,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub residual: Option<f64>,
    pub nodes: Option<usize>,
    pub runtime_s: f64,
    pub check: Check,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Kappa0Entry {
    pub depth: u32,
    pub zeta: Complex64,
    pub value: Complex64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrendEntry {
    pub truncation: u32,
    pub power_sum: f64,
    pub delta_sum: f64,
    pub ledger_lhs: Option<f64>,
    pub ledger_rhs: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub experiment: ExperimentKind,
    pub seeds: Vec<u64>,
    pub kappa0: Vec<Kappa0Entry>,
    pub kappa_m: Option<f64>,
    pub eigen_ledgers: Vec<EigenLedger>,
    pub trace_ledgers: Vec<TraceLedger>,
    pub hypothesis_trends: Vec<TrendEntry>,
    pub warnings: Vec<String>,
    pub failures: Vec<String>,
    pub rows: usize,
    pub passed: bool,
}

pub struct Report {
    pub rows: Vec<Row>,
    pub summary: Summary,
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    rows: Vec<Row>,
    summary: Summary,
}

impl<'a> Runner<'a> {
    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        id: String,
        kind: &str,
        lhs: f64,
        rhs: f64,
        residual: f64,
        nodes: Option<usize>,
        start: Instant,
        check: Check,
    ) {
        let tol = &self.cfg.tolerances;
        let passed = match check {
            Check::Identity => residual <= tol.identity,
            Check::Slack => residual >= -tol.slack,
            Check::Eigenvalue => residual <= tol.eigenvalue,
            Check::Exact => residual == 0.0,
            Check::Info | Check::Warning => true,
        };
        if !passed {
            self.summary
                .failures
                .push(format!("{id} {kind}: residual {residual:e}"));
        }
        self.rows.push(Row {
            experiment_id: id,
            identity_kind: kind.to_string(),
            lhs: Some(lhs),
            rhs: Some(rhs),
            residual: Some(residual),
            nodes,
            runtime_s: start.elapsed().as_secs_f64(),
            check,
            passed,
        });
    }

    fn warn(&mut self, id: String, what: &str, message: String, start: Instant) {
        self.summary.warnings.push(format!("{id}: {message}"));
        self.rows.push(Row {
            experiment_id: id,
            identity_kind: format!("warning:{what}"),
            lhs: None,
            rhs: None,
            residual: None,
            nodes: None,
            runtime_s: start.elapsed().as_secs_f64(),
            check: Check::Warning,
            passed: true,
        });
    }

    fn weight(&self) -> anyhow::Result<CosCoeffs> {
        Ok(weight_coeffs(&self.cfg.weight.spec())?)
    }

    fn eigen_ledgers(&mut self, v: &Potential) {
        for x in std::iter::once(VertexId::ROOT).chain(supported_subtree_roots(v)) {
            let start = Instant::now();
            match eigen_zeta(v, x) {
                Ok(ledger) => {
                    for e in ledger.entries.iter().filter(|e| e.low_confidence) {
                        self.warn(
                            format!("T_{x}"),
                            "boundary_zero",
                            format!("zero at ζ = {} near the circle is low confidence", e.zeta),
                            start,
                        );
                    }
                    self.summary.eigen_ledgers.push(ledger);
                }
                Err(e) => self.warn(format!("T_{x}"), "eigen_search", e.to_string(), start),
            }
        }
    }

    fn identity_suite(&mut self, v: &Potential) -> anyhow::Result<()> {
        let opts = self.cfg.quadrature();
        let w = self.weight()?;
        self.eigen_ledgers(v);
        for x in std::iter::once(VertexId::ROOT).chain(supported_subtree_roots(v)) {
            for n in 0..=6 {
                let start = Instant::now();
                match fourier_identity(v, x, n, &opts) {
                    Ok(r) => self.push(
                        format!("T_{x}"),
                        &r.kind.label(),
                        r.lhs,
                        r.rhs,
                        r.residual,
                        Some(r.nodes_used),
                        start,
                        Check::Identity,
                    ),
                    Err(e) => self.warn(
                        format!("T_{x}"),
                        &IdentityKind::Fourier(n).label(),
                        e.to_string(),
                        start,
                    ),
                }
            }
            let start = Instant::now();
            match combined_identity(v, x, &w, &opts) {
                Ok(r) => self.push(
                    format!("T_{x}"),
                    &r.kind.label(),
                    r.lhs,
                    r.rhs,
                    r.residual,
                    Some(r.nodes_used),
                    start,
                    Check::Identity,
                ),
                Err(e) => self.warn(format!("T_{x}"), "combined", e.to_string(), start),
            }
            let start = Instant::now();
            let a = trace_side(v, x, &w);
            let b = trace_side_direct(v, x, &w);
            self.push(
                format!("T_{x}"),
                &IdentityKind::TraceAssembly.label(),
                a,
                b,
                (a - b).abs() / (1.0 + a.abs()),
                None,
                start,
                Check::Identity,
            );
        }
        let start = Instant::now();
        match w
            .ensure_nonnegative()
            .map_err(anyhow::Error::from)
            .and_then(|_| Ok(entropy_integral(v, &w, &opts)?))
        {
            Ok(e) => {
                let (a, b) = (e.theta_form.value, e.x_form.value);
                self.push(
                    "T".into(),
                    &IdentityKind::EntropyForms.label(),
                    a,
                    b,
                    (a - b).abs() / (1.0 + a.abs()),
                    Some(e.theta_form.nodes),
                    start,
                    Check::Identity,
                );
                if e.clamped {
                    self.warn(
                        "T".into(),
                        "entropy_clamped",
                        "Im M ratio clamped at a quadrature node".into(),
                        start,
                    );
                }
            }
            Err(e) => self.warn("T".into(), "entropy_forms", e.to_string(), start),
        }
        self.summary.kappa_m = Some(calibrate_kappa_m()?);
        let n = self.cfg.truncation.unwrap_or(v.support_depth());
        let m = self.cfg.grids.boundary_angles;
        let start = Instant::now();
        let mut worst = (0.0, 0.0, 0.0);
        let mut agm = (f64::INFINITY, 0.0, 0.0);
        for j in 0..m {
            let theta = (j as f64 + 0.5) * std::f64::consts::TAU / m as f64;
            match agm_pointwise(v, n, theta) {
                Ok(r) => {
                    if r.formula.residual >= worst.0 {
                        worst = (r.formula.residual, r.formula.im_m, r.formula.product);
                    }
                    if r.slack < agm.0 {
                        agm = (r.slack, r.lhs, r.rhs);
                    }
                }
                Err(e) => self.warn(
                    format!("V({n})"),
                    "im_m_formula",
                    format!("θ = {theta}: {e}"),
                    start,
                ),
            }
        }
        self.push(
            format!("V({n})"),
            &IdentityKind::ImMFormula.label(),
            worst.1,
            worst.2,
            worst.0,
            Some(m),
            start,
            Check::Identity,
        );
        if agm.0.is_finite() {
            self.push(
                format!("V({n})"),
                &IdentityKind::Agm.label(),
                agm.1,
                agm.2,
                agm.0,
                Some(m),
                start,
                Check::Slack,
            );
        }
        Ok(())
    }

    fn eigenvalues(&mut self, v: &Potential) -> anyhow::Result<()> {
        self.eigen_ledgers(v);
        let Some(root) = self
            .summary
            .eigen_ledgers
            .first()
            .filter(|l| l.subtree_root == VertexId::ROOT)
        else {
            return Ok(());
        };
        let margin = 0.05;
        let mut det: Vec<f64> = root
            .energies()
            .into_iter()
            .filter(|x| x.abs() > BAND_EDGE + margin)
            .collect();
        det.sort_by(f64::total_cmp);
        let d = self.cfg.oracle_depth;
        let start = Instant::now();
        let oracles = [
            eigen_oracle(v, d, margin),
            eigen_oracle(v, d + 2, margin),
            eigen_oracle(v, d + 4, margin),
        ];
        self.push(
            format!("D={d}"),
            "eigen_count",
            det.len() as f64,
            oracles[0].len() as f64,
            (det.len() as f64 - oracles[0].len() as f64).abs(),
            None,
            start,
            Check::Exact,
        );
        if oracles.iter().any(|o| o.len() != det.len()) {
            self.warn(
                format!("D={d}"),
                "oracle_count",
                "oracle counts differ across depths".into(),
                start,
            );
            return Ok(());
        }
        for (i, x) in det.iter().enumerate() {
            // plain truncation converges geometrically in the depth
            let (e0, e1, e2) = (oracles[0][i], oracles[1][i], oracles[2][i]);
            let denom = (e2 - e1) - (e1 - e0);
            let limit = if denom.abs() > 1e-300 {
                e2 - (e2 - e1).powi(2) / denom
            } else {
                e2
            };
            self.push(
                format!("D={d}/s={i}"),
                &IdentityKind::Eigenvalue.label(),
                *x,
                limit,
                (x - limit).abs(),
                None,
                start,
                Check::Eigenvalue,
            );
            self.push(
                format!("D={d}/s={i}"),
                "eigenvalue_plain_truncation",
                *x,
                e0,
                (x - e0).abs(),
                None,
                start,
                Check::Info,
            );
        }
        Ok(())
    }

    fn ledger(&mut self, v: &Potential) -> anyhow::Result<()> {
        let opts = self.cfg.quadrature();
        let w = self.weight()?;
        let top = self.cfg.truncation.unwrap_or(v.support_depth());
        self.eigen_ledgers(&v.truncate(top));
        for n in 0..=top {
            let start = Instant::now();
            match ledger_inequality(v, n, &w, &opts) {
                Ok(r) => {
                    let id = format!("V({n})");
                    self.push(
                        id.clone(),
                        &r.report.kind.label(),
                        r.report.lhs,
                        r.report.rhs,
                        r.report.residual,
                        Some(r.report.nodes_used),
                        start,
                        Check::Slack,
                    );
                    let (a, b) = (r.trace.bracket, r.trace.bracket_direct);
                    self.push(
                        id.clone(),
                        &IdentityKind::TraceAssembly.label(),
                        a,
                        b,
                        (a - b).abs() / (1.0 + a.abs()),
                        None,
                        start,
                        Check::Identity,
                    );
                    let (a, b) = (r.entropy.theta_form.value, r.entropy.x_form.value);
                    self.push(
                        id,
                        &IdentityKind::EntropyForms.label(),
                        a,
                        b,
                        (a - b).abs() / (1.0 + a.abs()),
                        Some(r.entropy.theta_form.nodes),
                        start,
                        Check::Identity,
                    );
                    self.summary.trace_ledgers.push(r.trace);
                }
                Err(e) => self.warn(format!("V({n})"), "ledger_inequality", e.to_string(), start),
            }
        }
        Ok(())
    }

    fn zeta_samples(&self) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        (0..self.cfg.grids.zeta_samples)
            .map(|_| {
                Complex64::from_polar(
                    rng.random_range(0.05..0.8),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect()
    }

    fn main_lemma(&mut self, v: &Potential) -> anyhow::Result<()> {
        let zetas = self.zeta_samples();
        for d in 0..=self.cfg.max_vertex_depth {
            for &zeta in &zetas {
                let value = calibrate_kappa0(d, zeta)?;
                self.summary.kappa0.push(Kappa0Entry {
                    depth: d,
                    zeta,
                    value,
                });
            }
            for k in 1..=(1u64 << d) {
                let y = VertexId::new(d, k)?;
                for &zeta in &zetas {
                    let start = Instant::now();
                    match main_lemma_residual(v, y, zeta) {
                        Ok(r) => self.push(
                            format!("y={y}/ζ={zeta:.4}"),
                            &IdentityKind::MainLemma.label(),
                            r.jost.norm(),
                            (r.kappa0 * r.ratio).norm(),
                            r.residual,
                            None,
                            start,
                            Check::Identity,
                        ),
                        Err(e) => self.warn(
                            format!("y={y}/ζ={zeta:.4}"),
                            "main_lemma",
                            e.to_string(),
                            start,
                        ),
                    }
                }
            }
        }
        Ok(())
    }

    fn radial(&mut self, v: &Potential) -> anyhow::Result<()> {
        let profile = radial_profile(v)
            .context("radial-compare needs a potential constant on every shell")?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let points: Vec<EnergyPoint> = (0..self.cfg.grids.energy_samples)
            .map(|_| {
                EnergyPoint(Complex64::new(
                    rng.random_range(-6.0..6.0),
                    rng.random_range(0.05..3.0),
                ))
            })
            .collect();
        let profile = RadialProfile::new(profile);
        for p in &points {
            let start = Instant::now();
            match jacobi_reduce(&profile, std::slice::from_ref(p)) {
                Ok(r) => self.push(
                    format!("z={:.4}", p.0),
                    &IdentityKind::RadialReduction.label(),
                    0.0,
                    r.max_m_residual,
                    r.max_m_residual,
                    None,
                    start,
                    Check::Identity,
                ),
                Err(e) => self.warn(
                    format!("z={:.4}", p.0),
                    "radial_reduction",
                    e.to_string(),
                    start,
                ),
            }
        }
        for d in 2..=8 {
            let start = Instant::now();
            let s = shift_structures(d)?;
            self.push(
                format!("D={d}"),
                &IdentityKind::Intertwining.label(),
                0.0,
                s.max_residual(),
                s.max_residual(),
                None,
                start,
                Check::Exact,
            );
        }
        Ok(())
    }

    fn conjecture(&mut self, v: &Potential) -> anyhow::Result<()> {
        let a = &self.cfg.polynomial;
        let depth = conjecture_min_depth(v, a.len().saturating_sub(1).max(2));
        let start = Instant::now();
        let f = conjecture_form(a, v, depth)?;
        let id = format!("D={depth}");
        self.push(
            id.clone(),
            &IdentityKind::ConjectureNorm.label(),
            f.dh_norm2,
            f.shell_norm2,
            f.check_a1,
            None,
            start,
            Check::Identity,
        );
        let diff = conjecture_form(&[-4.0, 0.0, 1.0], v, depth)?;
        self.push(
            id.clone(),
            &IdentityKind::ConjectureDifference.label(),
            diff.qform,
            diff.difference_target,
            f.check_ax2m4,
            None,
            start,
            Check::Identity,
        );
        self.push(
            id,
            "quadratic_form",
            f.qform,
            0.0,
            f.qform,
            None,
            start,
            Check::Info,
        );
        Ok(())
    }

    fn scan(&mut self, v: &Potential) -> anyhow::Result<()> {
        let opts = self.cfg.quadrature();
        let w = self.weight()?;
        for n in 1..=self.cfg.scan_depth {
            let start = Instant::now();
            let h = hypothesis_sums(v, 2, n, 2);
            let ledger = ledger_inequality(v, n, &w, &opts);
            let (lhs, rhs) = match &ledger {
                Ok(r) => (Some(r.report.lhs), Some(r.report.rhs)),
                Err(e) => {
                    self.warn(format!("N={n}"), "ledger_inequality", e.to_string(), start);
                    (None, None)
                }
            };
            self.push(
                format!("N={n}"),
                &IdentityKind::HypothesisSums.label(),
                h.power_sum,
                h.delta_sum,
                h.power_sum + h.delta_sum,
                None,
                start,
                Check::Info,
            );
            if let Ok(r) = ledger {
                self.push(
                    format!("N={n}"),
                    &r.report.kind.label(),
                    r.report.lhs,
                    r.report.rhs,
                    r.report.residual,
                    Some(r.report.nodes_used),
                    start,
                    Check::Slack,
                );
            }
            self.summary.hypothesis_trends.push(TrendEntry {
                truncation: n,
                power_sum: h.power_sum,
                delta_sum: h.delta_sum,
                ledger_lhs: lhs,
                ledger_rhs: rhs,
            });
        }
        Ok(())
    }
}

/// Shell values of a potential that is constant on every sphere.
pub fn radial_profile(v: &Potential) -> Option<Vec<f64>> {
    let depth = v.support_depth();
    let mut profile = Vec::with_capacity(depth as usize + 1);
    for d in 0..=depth {
        let first = v.get(VertexId::new(d, 1).ok()?);
        for k in 2..=(1u64 << d) {
            if v.get(VertexId::new(d, k).ok()?) != first {
                return None;
            }
        }
        profile.push(first);
    }
    Some(profile)
}

/// Runs the configured experiment and returns the rows and summary.
pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<Report> {
    cfg.validate()?;
    let Some(kind) = cfg.experiment else {
        bail!("no experiment selected");
    };
    let spec = cfg
        .potential
        .clone()
        .unwrap_or(PotentialSpec::Random(RandomSpec {
            seed: cfg.seed,
            depth: 2,
            amplitude: 2.0,
            decay: None,
        }));
    let v = build_potential(&spec)?;
    let mut seeds = vec![cfg.seed];
    if let PotentialSpec::Random(r) = &spec {
        if r.seed != cfg.seed {
            seeds.insert(0, r.seed);
        }
    }
    let mut echo = cfg.clone();
    echo.potential = Some(spec);
    let mut runner = Runner {
        cfg,
        rows: Vec::new(),
        summary: Summary {
            config: echo,
            experiment: kind,
            seeds,
            kappa0: Vec::new(),
            kappa_m: None,
            eigen_ledgers: Vec::new(),
            trace_ledgers: Vec::new(),
            hypothesis_trends: Vec::new(),
            warnings: Vec::new(),
            failures: Vec::new(),
            rows: 0,
            passed: true,
        },
    };
    let target = match (kind, cfg.truncation) {
        (
            ExperimentKind::IdentitySuite | ExperimentKind::Eigenvalues | ExperimentKind::MainLemma,
            Some(n),
        ) => v.truncate(n),
        _ => v,
    };
    match kind {
        ExperimentKind::IdentitySuite => runner.identity_suite(&target)?,
        ExperimentKind::Eigenvalues => runner.eigenvalues(&target)?,
        ExperimentKind::LedgerInequality => runner.ledger(&target)?,
        ExperimentKind::MainLemma => runner.main_lemma(&target)?,
        ExperimentKind::RadialCompare => runner.radial(&target)?,
        ExperimentKind::ConjectureForm => runner.conjecture(&target)?,
        ExperimentKind::HypothesisScan => runner.scan(&target)?,
    }
    runner.summary.rows = runner.rows.len();
    runner.summary.passed = runner.summary.failures.is_empty();
    Ok(Report {
        rows: runner.rows,
        summary: runner.summary,
    })
}

/// Shortest round-trip text, in exponent form outside `[1e-4, 1e15)`.
fn cell(x: Option<f64>) -> String {
    match x {
        None => String::new(),
        Some(v) if v == 0.0 || (1e-4..1e15).contains(&v.abs()) || !v.is_finite() => v.to_string(),
        Some(v) => format!("{v:e}"),
    }
}

/// Writes `report.csv` and `summary.json` into `dir`.
pub fn write_report(report: &Report, dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut w = csv::Writer::from_path(dir.join("report.csv"))?;
    w.write_record(CSV_HEADER)?;
    for r in &report.rows {
        w.write_record([
            r.experiment_id.clone(),
            r.identity_kind.clone(),
            cell(r.lhs),
            cell(r.rhs),
            cell(r.residual),
            r.nodes.map(|n| n.to_string()).unwrap_or_default(),
            format!("{:.6}", r.runtime_s),
        ])?;
    }
    w.flush()?;
    let json = serde_json::to_string_pretty(&report.summary)?;
    fs::write(dir.join("summary.json"), json + "\n")?;
    Ok(())
}
