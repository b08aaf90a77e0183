//! End-to-end orchestration: hypotheses, RG cascade, eigenvectors, oracle
//! comparison, analyticity probes, coupling sweeps and the property suite.
//! Reports are deterministic for a fixed config and seed.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{LoadedRun, ProbeSettings, ReportFormat, RgSettings};
use crate::error::{Error, Result};
use crate::feshbach::{first_feshbach_at, isospectrality_suite, random_pair};
use crate::fock::{dilation, relative_bound_check, verify_pull_through, FockBasis};
use crate::kernels::{bound_check, random_kernel, ShellWeights};
use crate::linalg::{c64, opnorm, CVec};
use crate::model::{build_hamiltonian, evaluate, verify_hypotheses, HypothesisReport, ModelSpec};
use crate::oracle::{compare, dense_spectrum, perturbation_scaling, ScalingReport};
use crate::rg::{
    apply_j, build_eigenprojection, build_eigenvectors, iterate_context, Eigenvectors, ProjectionMode, RgConfig, RgContext,
    RgTrace,
};
use crate::symmetry::{SymmetryGroup, SymmetryOp};

/// Exit status for an error: 1 for configuration-level failures, 2 otherwise.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Infrared(_)
        | Error::Grid(_)
        | Error::EmptyBasis { .. }
        | Error::Region(_)
        | Error::Io(_) => 1,
        _ => 2,
    }
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    pub fn le(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), pass: value <= threshold, value, threshold }
    }

    pub fn lt(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), pass: value < threshold, value, threshold }
    }

    pub fn ge(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), pass: value >= threshold, value, threshold }
    }

    pub fn gt(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), pass: value > threshold, value, threshold }
    }

    pub fn flag(name: &str, pass: bool) -> Self {
        Self { name: name.into(), pass, value: pass as u8 as f64, threshold: 1.0 }
    }
}

fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.12e}")
    }
}

fn fmt_c(z: Complex64) -> String {
    format!("{} {}", fmt_f(z.re), fmt_f(z.im))
}

/// Ordered key-value writer.
#[derive(Default)]
struct Kv(Vec<(String, String)>);

impl Kv {
    fn put(&mut self, k: impl Into<String>, v: impl Into<String>) {
        self.0.push((k.into(), v.into()));
    }

    fn checks(&mut self, prefix: &str, cs: &[Check]) {
        for c in cs {
            self.put(format!("{prefix}.{}.pass", c.name), c.pass.to_string());
            self.put(format!("{prefix}.{}.value", c.name), fmt_f(c.value));
            self.put(format!("{prefix}.{}.threshold", c.name), fmt_f(c.threshold));
        }
    }

    fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.0 {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

fn hypotheses_kv(kv: &mut Kv, h: &HypothesisReport) {
    for it in &h.items {
        kv.put(format!("hypothesis.{}.pass", it.name), it.pass.to_string());
        kv.put(format!("hypothesis.{}.value", it.name), fmt_f(it.value));
    }
}

/// Symmetry group restricted to `Ran P_at` on each RG level, with the residuals of `H^(k)[z]`.
pub fn symmetry_residuals(ctx: &RgContext, z: Complex64, depth: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let c = ctx.cascade(z, depth, false)?;
    let mut sym = Vec::with_capacity(c.levels.len());
    let mut schur = Vec::with_capacity(c.levels.len());
    for (k, l) in c.levels.iter().enumerate() {
        let basis = &ctx.levels.bases[k];
        let group = if ctx.spec.generators.is_empty() {
            SymmetryGroup::trivial(basis.dim())
        } else {
            ctx.spec.reduced_group_on(basis)?
        };
        sym.push(group.max_residual(&l.h));
        schur.push(l.schur_deviation / l.energy.norm().max(1.0));
    }
    Ok((sym, schur))
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub name: String,
    pub s: Complex64,
    pub g: f64,
    pub dim: usize,
    pub hypotheses: HypothesisReport,
    pub z_inf: Complex64,
    pub trace: RgTrace,
    pub eigenvectors: Eigenvectors,
    pub oracle_lowest: Complex64,
    pub oracle_multiplicity: usize,
    pub oracle_gap: f64,
    pub oracle_cluster_tol: f64,
    pub eigenvalue_error: f64,
    pub ground_error: f64,
    pub angle: f64,
    pub symmetry_by_level: Vec<f64>,
    pub schur_by_level: Vec<f64>,
    pub rate: Option<f64>,
    pub projection_mode: Option<ProjectionMode>,
    pub projection_idempotency: f64,
    pub projection_eigen: f64,
    pub projection_rank: usize,
    pub projection_condition: f64,
    pub projection_hermiticity: f64,
    pub first_pair_margin: f64,
    pub neumann_discrepancy: f64,
    pub kramers: Option<(f64, f64)>,
    pub spectrum_dump: String,
    pub checks: Vec<Check>,
}

impl RunReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_kv(&self) -> String {
        let mut kv = Kv::default();
        kv.put("model", self.name.clone());
        kv.put("s", fmt_c(self.s));
        kv.put("g", fmt_f(self.g));
        kv.put("dim", self.dim.to_string());
        kv.put("z_inf", fmt_c(self.z_inf));
        kv.put("depth", self.trace.depth().to_string());
        kv.put("oracle.lowest", fmt_c(self.oracle_lowest));
        kv.put("oracle.multiplicity", self.oracle_multiplicity.to_string());
        kv.put("oracle.gap", fmt_f(self.oracle_gap));
        kv.put("oracle.cluster_tol", fmt_f(self.oracle_cluster_tol));
        kv.put("compare.eigenvalue_error", fmt_f(self.eigenvalue_error));
        kv.put("compare.ground_error", fmt_f(self.ground_error));
        kv.put("compare.angle", fmt_f(self.angle));
        kv.put("eigenvectors.count", self.eigenvectors.vectors.len().to_string());
        kv.put("eigenvectors.max_residual", fmt_f(self.eigenvectors.max_residual()));
        kv.put("eigenvectors.gram_min_sv", fmt_f(self.eigenvectors.gram_min_sv));
        kv.put("eigenvectors.gram_max_sv", fmt_f(self.eigenvectors.gram_max_sv));
        kv.put("rg.rate", self.rate.map(fmt_f).unwrap_or_else(|| "nan".into()));
        kv.put("rg.tail_bound", fmt_f(self.trace.tail_bound));
        kv.put("rg.admissible", self.trace.admissibility.contracting.to_string());
        kv.put("rg.first_pair_margin", fmt_f(self.first_pair_margin));
        kv.put("rg.neumann_discrepancy", fmt_f(self.neumann_discrepancy));
        for (k, (a, b)) in self.symmetry_by_level.iter().zip(&self.schur_by_level).enumerate() {
            kv.put(format!("level.{k}.symmetry_residual"), fmt_f(*a));
            kv.put(format!("level.{k}.schur_deviation"), fmt_f(*b));
        }
        if let Some(m) = self.projection_mode {
            kv.put("projection.mode", format!("{m:?}").to_lowercase());
            kv.put("projection.idempotency", fmt_f(self.projection_idempotency));
            kv.put("projection.eigen_residual", fmt_f(self.projection_eigen));
            kv.put("projection.rank", self.projection_rank.to_string());
            kv.put("projection.condition", fmt_f(self.projection_condition));
            kv.put("projection.hermiticity", fmt_f(self.projection_hermiticity));
        }
        if let Some((span, self_overlap)) = self.kramers {
            kv.put("kramers.span_residual", fmt_f(span));
            kv.put("kramers.self_overlap", fmt_f(self_overlap));
        }
        hypotheses_kv(&mut kv, &self.hypotheses);
        kv.checks("check", &self.checks);
        kv.put("status", if self.all_pass() { "pass" } else { "fail" });
        kv.render()
    }

    pub fn to_digest(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}: s = {}, g = {}", self.name, self.s, self.g);
        let _ = writeln!(
            out,
            "The cascade reached depth {} and converged to z = {:.15} {:+.3e}i.",
            self.trace.depth(),
            self.z_inf.re,
            self.z_inf.im
        );
        let _ = writeln!(
            out,
            "Dense diagonalization of the {}-dimensional truncation gives {:.15} as the nearest eigenvalue \
             (error {:.2e}); the lowest cluster has multiplicity {} with gap {:.3e}.",
            self.dim,
            self.oracle_lowest.re,
            self.eigenvalue_error,
            self.oracle_multiplicity,
            self.oracle_gap
        );
        let _ = writeln!(
            out,
            "{} eigenvectors were assembled; largest residual {:.2e}, Gram singular values {:.3e} .. {:.3e}, \
             largest principal angle to the oracle eigenspace {:.2e}.",
            self.eigenvectors.vectors.len(),
            self.eigenvectors.max_residual(),
            self.eigenvectors.gram_min_sv,
            self.eigenvectors.gram_max_sv,
            self.angle
        );
        if let Some(r) = self.rate {
            let _ = writeln!(out, "Fitted rate of |z_n - z_(n-1)| over n = 2..6: {r:.4}.");
        }
        for n in &self.trace.notes {
            let _ = writeln!(out, "Note: {n}.");
        }
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        if failed.is_empty() {
            let _ = writeln!(out, "All {} checks pass.", self.checks.len());
        } else {
            let _ = writeln!(out, "Failed checks: {}.", failed.join(", "));
        }
        out
    }
}

/// Full pipeline at the reference point `s₀`.
pub fn run_pipeline(spec: &ModelSpec, settings: &RgSettings) -> Result<RunReport> {
    run_at(spec, spec.s0, settings)
}

pub fn run_at(spec: &ModelSpec, s: Complex64, settings: &RgSettings) -> Result<RunReport> {
    let hypotheses = verify_hypotheses(spec);
    let cfg = RgConfig::new(spec, settings)?;
    let ctx = RgContext::new(spec, s, &cfg)?;
    let first = first_feshbach_at(&ctx.point, ctx.point.e_at, &ctx.full, spec.window.z_radius)?;
    let (z_inf, trace) = iterate_context(&ctx)?;
    let depth = trace.depth();
    let eigenvectors = build_eigenvectors(&ctx, z_inf, depth)?;
    let h = build_hamiltonian(spec, s, spec.g, &ctx.full)?;
    let oracle = dense_spectrum(&h)?;
    let cmp = compare(&h, z_inf, &eigenvectors.vectors, &oracle)?;
    let (symmetry_by_level, schur_by_level) = symmetry_residuals(&ctx, z_inf, depth)?;

    let mut projection_mode = None;
    let (mut p_idem, mut p_eig, mut p_rank, mut p_cond, mut p_herm) = (f64::NAN, f64::NAN, 0, f64::NAN, f64::NAN);
    let partner: Option<(Vec<CVec>, ProjectionMode)> = if let Some(j) = &spec.j_conj {
        let f = ctx.full.len();
        Some((eigenvectors.vectors.iter().map(|v| apply_j(j, v, f)).collect(), ProjectionMode::ComplexSelfadjoint))
    } else if spec.reflection_symmetric {
        let vs = if s.im == 0.0 {
            eigenvectors.vectors.clone()
        } else {
            let cc = RgContext::new(spec, s.conj(), &cfg)?;
            let (zc, tc) = iterate_context(&cc)?;
            build_eigenvectors(&cc, zc, tc.depth())?.vectors
        };
        Some((vs, ProjectionMode::Reflection))
    } else {
        None
    };
    if let Some((pv, mode)) = partner {
        let pr = build_eigenprojection(&eigenvectors.vectors, &pv, mode)?;
        p_idem = pr.idempotency;
        p_eig = opnorm(&(&h.mat * &pr.p - &pr.p * z_inf)) / opnorm(&pr.p).max(1.0);
        p_rank = pr.rank;
        p_cond = pr.condition;
        p_herm = opnorm(&(&pr.p - pr.p.adjoint())) / opnorm(&pr.p).max(1.0);
        projection_mode = Some(mode);
    }

    let kramers = spec.generators.iter().find(|g| g.antiunitary).and_then(|g| {
        if eigenvectors.vectors.len() != 2 {
            return None;
        }
        let t = SymmetryOp::factored(g.atomic.clone(), g.fock, true, &ctx.full).ok()?;
        let psi1 = &eigenvectors.vectors[0] / c64(eigenvectors.vectors[0].norm(), 0.0);
        let tpsi = t.apply(&psi1);
        let q = crate::linalg::orthonormalize(&eigenvectors.matrix());
        let span = (&tpsi - &q * (q.adjoint() * &tpsi)).norm() / tpsi.norm();
        Some((span, psi1.dotc(&tpsi).norm()))
    });

    let rate = trace.fitted_rate(2, 6);
    let rho = cfg.rho;
    let mut checks = vec![
        Check::flag("hypotheses", hypotheses.all_pass()),
        Check::flag("first_pair", first.report.pass && first.report.commutes),
        Check::lt("eigenvalue_vs_oracle", cmp.eigenvalue_error, 1e-7),
        Check::le("eigenvector_residual", eigenvectors.max_residual(), 1e-7),
        Check::gt("gram_independence", eigenvectors.gram_min_sv / eigenvectors.gram_max_sv.max(f64::MIN_POSITIVE), 1e-3),
        Check::flag("eigenvector_count", eigenvectors.vectors.len() == spec.d),
        Check::lt("schur_deviation", schur_by_level.iter().copied().fold(0.0, f64::max), 1e-9),
        Check::lt("symmetry_residual", symmetry_by_level.iter().copied().fold(0.0, f64::max), 1e-9),
        Check::le("convergence_rate", rate.unwrap_or(f64::INFINITY), 1.2 * rho),
        Check::flag("oracle_multiplicity", oracle.multiplicity == spec.d),
    ];
    if spec.d >= 2 {
        checks.push(Check::gt("oracle_gap", oracle.gap / oracle.cluster_tol, 10.0));
    }
    if h.self_adjoint {
        checks.push(Check::le("ground_state", cmp.ground_error, 1e-8));
        checks.push(Check::le("real_eigenvalue", z_inf.im.abs(), 1e-9));
    }
    if projection_mode.is_some() {
        checks.push(Check::le("projection_idempotency", p_idem, 1e-9));
        checks.push(Check::le("projection_eigen", p_eig, 1e-8));
        checks.push(Check::flag("projection_rank", p_rank == spec.d));
    }
    if let Some((span, _)) = kramers {
        checks.push(Check::le("kramers_pair", span, 1e-6));
    }
    Ok(RunReport {
        name: spec.name.clone(),
        s,
        g: spec.g,
        dim: h.dim(),
        hypotheses,
        z_inf,
        trace,
        eigenvectors,
        oracle_lowest: oracle.lowest,
        oracle_multiplicity: oracle.multiplicity,
        oracle_gap: oracle.gap,
        oracle_cluster_tol: oracle.cluster_tol,
        eigenvalue_error: cmp.eigenvalue_error,
        ground_error: cmp.ground_error,
        angle: cmp.angle,
        symmetry_by_level,
        schur_by_level,
        rate,
        projection_mode,
        projection_idempotency: p_idem,
        projection_eigen: p_eig,
        projection_rank: p_rank,
        projection_condition: p_cond,
        projection_hermiticity: p_herm,
        first_pair_margin: first.report.margin,
        neumann_discrepancy: first.neumann_discrepancy,
        kramers,
        spectrum_dump: oracle.to_columnar(),
        checks,
    })
}

/// `z_∞(s)`, without the winding cross-check.
pub fn eigenvalue_at(spec: &ModelSpec, s: Complex64, settings: &RgSettings) -> Result<Complex64> {
    let mut cfg = RgConfig::new(spec, settings)?;
    cfg.check_winding = false;
    let ctx = RgContext::new(spec, s, &cfg)?;
    Ok(iterate_context(&ctx)?.0)
}

#[derive(Clone, Debug)]
pub struct AnalyticityReport {
    pub center: Complex64,
    pub radius: f64,
    pub nodes: Vec<(Complex64, Complex64)>,
    /// `|∮E ds| / (r_c · max|E|)`.
    pub contour_residual: f64,
    /// `|∂_y E − i ∂_x E| / max(1, |∂_x E|)` from central differences.
    pub cauchy_riemann: f64,
    /// `max |conj E(s) − E(s̄)|` over conjugate node pairs.
    pub reflection: Option<f64>,
    pub checks: Vec<Check>,
}

impl AnalyticityReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_kv(&self, name: &str) -> String {
        let mut kv = Kv::default();
        kv.put("model", name);
        kv.put("center", fmt_c(self.center));
        kv.put("radius", fmt_f(self.radius));
        for (k, (s, e)) in self.nodes.iter().enumerate() {
            kv.put(format!("node.{k}.s"), fmt_c(*s));
            kv.put(format!("node.{k}.e"), fmt_c(*e));
        }
        kv.put("contour_residual", fmt_f(self.contour_residual));
        kv.put("cauchy_riemann", fmt_f(self.cauchy_riemann));
        kv.put("reflection", self.reflection.map(fmt_f).unwrap_or_else(|| "n/a".into()));
        kv.checks("check", &self.checks);
        kv.put("status", if self.all_pass() { "pass" } else { "fail" });
        kv.render()
    }

    pub fn to_digest(&self, name: &str) -> String {
        format!(
            "{name}: analyticity probe on |s - {}| = {} with {} nodes. Relative contour integral {:.2e}, \
             Cauchy-Riemann residual {:.2e}, reflection residual {}. {}\n",
            self.center,
            self.radius,
            self.nodes.len(),
            self.contour_residual,
            self.cauchy_riemann,
            self.reflection.map(|r| format!("{r:.2e}")).unwrap_or_else(|| "not applicable".into()),
            if self.all_pass() { "All checks pass." } else { "Some checks fail." }
        )
    }
}

pub fn analyticity_probe(spec: &ModelSpec, settings: &RgSettings, probes: &ProbeSettings) -> Result<AnalyticityReport> {
    let n = probes.contour_nodes;
    if n < 4 {
        return Err(Error::Config("contour_nodes must be at least 4".into()));
    }
    let (c, r, h) = (spec.s0, probes.contour_radius, probes.cr_step);
    if r > spec.window.s_radius || h > spec.window.s_radius {
        return Err(Error::Config(format!(
            "probe radius {r} or step {h} leaves the parameter disc of radius {}",
            spec.window.s_radius
        )));
    }
    let mut points: Vec<Complex64> = (0..n).map(|k| c + Complex64::from_polar(r, 2.0 * std::f64::consts::PI * k as f64 / n as f64)).collect();
    points.extend([c + h, c - h, c + c64(0.0, h), c - c64(0.0, h)]);
    let values = points.par_iter().map(|&s| eigenvalue_at(spec, s, settings)).collect::<Vec<_>>();
    let values = values.into_iter().collect::<Result<Vec<_>>>()?;
    let nodes: Vec<(Complex64, Complex64)> = points[..n].iter().copied().zip(values[..n].iter().copied()).collect();
    let mut integral = c64(0.0, 0.0);
    let mut emax: f64 = 0.0;
    for &(s, e) in &nodes {
        integral += e * (s - c) * c64(0.0, 2.0 * std::f64::consts::PI / n as f64);
        emax = emax.max(e.norm());
    }
    let contour_residual = integral.norm() / (r * emax.max(f64::MIN_POSITIVE));
    let fx = (values[n] - values[n + 1]) / (2.0 * h);
    let fy = (values[n + 2] - values[n + 3]) / (2.0 * h);
    let cauchy_riemann = (fy - fx * c64(0.0, 1.0)).norm() / fx.norm().max(1.0);
    let reflection = if spec.reflection_symmetric && c.im == 0.0 {
        let mut worst: f64 = 0.0;
        for k in 1..n {
            let j = n - k;
            worst = worst.max((nodes[k].1.conj() - nodes[j].1).norm());
        }
        Some(worst)
    } else {
        None
    };
    let mut checks = vec![Check::lt("contour", contour_residual, 1e-6), Check::lt("cauchy_riemann", cauchy_riemann, 1e-4)];
    if let Some(rr) = reflection {
        checks.push(Check::lt("reflection", rr, 1e-8));
    }
    Ok(AnalyticityReport { center: c, radius: r, nodes, contour_residual, cauchy_riemann, reflection, checks })
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub oracle: ScalingReport,
    /// RG `z_∞` at each coupling.
    pub rg: Vec<Complex64>,
    pub rg_exponent: f64,
    pub checks: Vec<Check>,
}

impl SweepReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_kv(&self, name: &str) -> String {
        let mut kv = Kv::default();
        kv.put("model", name);
        for (k, g) in self.oracle.g.iter().enumerate() {
            kv.put(format!("g.{k}"), fmt_f(*g));
            kv.put(format!("g.{k}.oracle_energy"), fmt_c(self.oracle.energies[k]));
            kv.put(format!("g.{k}.rg_energy"), fmt_c(self.rg[k]));
            kv.put(format!("g.{k}.distance"), fmt_f(self.oracle.distances[k]));
        }
        kv.put("exponent.oracle", fmt_f(self.oracle.exponent));
        kv.put("exponent.rg", fmt_f(self.rg_exponent));
        kv.put("distances.monotone", self.oracle.monotone.to_string());
        kv.checks("check", &self.checks);
        kv.put("status", if self.all_pass() { "pass" } else { "fail" });
        kv.render()
    }

    pub fn to_digest(&self, name: &str) -> String {
        format!(
            "{name}: coupling sweep over {:?}. |E_g - E_at| scales with exponent {:.4} (oracle) and {:.4} (RG); \
             eigenspace distances {:?} are {}.\n",
            self.oracle.g,
            self.oracle.exponent,
            self.rg_exponent,
            self.oracle.distances.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>(),
            if self.oracle.monotone { "strictly decreasing as g decreases" } else { "not monotone" }
        )
    }
}

/// True when every coefficient of the atomic Hamiltonian and both couplings is
/// diagonal, so the second-order shift is the whole story at small g.
pub fn quadratic_control(spec: &ModelSpec) -> bool {
    let diag = |m: &crate::linalg::CMat| {
        (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)].norm() == 0.0))
    };
    [&spec.h_at, &spec.g1, &spec.g2].iter().all(|p| p.coeffs.iter().all(diag))
}

/// Exponent window for the sweep: exactly quadratic models get a two-sided window.
pub fn sweep_g(spec: &ModelSpec, settings: &RgSettings, probes: &ProbeSettings, two_sided: bool) -> Result<SweepReport> {
    let oracle = perturbation_scaling(spec, spec.s0, &probes.g_sweep)?;
    let rg = probes
        .g_sweep
        .par_iter()
        .map(|&g| eigenvalue_at(&spec.with_coupling(g), spec.s0, settings))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let e_at = evaluate(spec, spec.s0)?.e_at;
    let shifts: Vec<f64> = rg.iter().map(|z| (z - e_at).norm()).collect();
    let rg_exponent = crate::oracle::loglog_slope(&probes.g_sweep, &shifts);
    let mut checks = vec![Check::ge("exponent_lower", oracle.exponent, 1.9), Check::flag("distances_monotone", oracle.monotone)];
    if two_sided {
        checks.push(Check::le("exponent_upper", oracle.exponent, 2.1));
    }
    let agree = rg.iter().zip(&oracle.energies).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    checks.push(Check::lt("rg_matches_oracle", agree, 1e-7));
    Ok(SweepReport { oracle, rg, rg_exponent, checks })
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub rows: Vec<Check>,
}

impl SuiteReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|c| c.pass)
    }

    pub fn to_kv(&self, name: &str) -> String {
        let mut kv = Kv::default();
        kv.put("model", name);
        kv.checks("suite", &self.rows);
        kv.put("status", if self.all_pass() { "pass" } else { "fail" });
        kv.render()
    }

    pub fn to_digest(&self, name: &str) -> String {
        let mut out = format!("{name}: property suite, {} rows.\n", self.rows.len());
        for r in &self.rows {
            let _ = writeln!(out, "  {:<28} {}  (value {:.3e}, threshold {:.1e})", r.name, if r.pass { "pass" } else { "FAIL" }, r.value, r.threshold);
        }
        out
    }
}

/// Seeded invariants of the fock, symmetry, feshbach and kernels layers on one model.
pub fn property_suite(spec: &ModelSpec, settings: &RgSettings, seed: u64) -> Result<SuiteReport> {
    let mut rows = Vec::new();
    let basis = spec.full_basis()?;

    let mut iso_fail = 0usize;
    let mut iso_worst: f64 = 0.0;
    for k in 0..100 {
        let p = random_pair(seed.wrapping_add(k), 40);
        let probes = [c64(0.0, 0.0), c64(0.05, 0.02)];
        let r = isospectrality_suite(&p.h, &p.t, &p.cutoffs, &probes)?;
        iso_fail += (!r.kernels_match()) as usize;
        iso_worst = iso_worst.max(r.max_identity_residual());
    }
    rows.push(Check::le("feshbach.kernel_mismatches", iso_fail as f64, 0.0));
    rows.push(Check::lt("feshbach.identity_residual", iso_worst, 1e-9));

    let pull = (0..basis.modes()).map(|j| verify_pull_through(&basis, |r| (1.0 + r).recip(), j)).fold(0.0, f64::max);
    rows.push(Check::lt("fock.pull_through", pull, 1e-12));
    let (iso, scale) = dilation_algebra(&basis, spec.grid.ratio())?;
    rows.push(Check::lt("fock.dilation_isometry", iso, 1e-12));
    rows.push(Check::lt("fock.dilation_scaling", scale, 1e-12));
    let a1 = spec.g1.eval_reflected_adjoint(spec.s0);
    let coeffs: Vec<_> = spec.shell_amplitudes()?.iter().map(|&gj| &a1 * c64(spec.g * gj, 0.0)).collect();
    let rb = relative_bound_check(&basis, &coeffs, seed, 100)?;
    rows.push(Check::le("fock.relative_bounds", rb.violations as f64, 0.0));

    let weights = ShellWeights::new(&spec.grid, spec.mu, spec.polarization);
    let kb = std::sync::Arc::new(crate::fock::build_fock_basis(&spec.grid, 2, 1.0, 1)?);
    let mut kviol = 0usize;
    for k in 0..100u64 {
        let (m, n) = [(0, 1), (1, 0), (1, 1), (0, 2), (2, 0)][(k % 5) as usize];
        let w = random_kernel(seed.wrapping_add(1000 + k), m, n, spec.grid.levels(), 1, 11)?;
        kviol += (!bound_check(&w, &kb, &weights)?.holds(1e-12)) as usize;
    }
    rows.push(Check::le("kernels.bound_violations", kviol as f64, 0.0));

    let hyp = verify_hypotheses(spec);
    for it in &hyp.items {
        rows.push(Check::flag(&format!("model.{}", it.name), it.pass));
    }

    let cfg = RgConfig::new(spec, settings)?;
    match RgContext::new(spec, spec.s0, &cfg).and_then(|ctx| {
        let (z, tr) = iterate_context(&ctx)?;
        symmetry_residuals(&ctx, z, tr.depth())
    }) {
        Ok((sym, schur)) => {
            rows.push(Check::lt("rg.symmetry_residual", sym.iter().copied().fold(0.0, f64::max), 1e-9));
            rows.push(Check::lt("rg.schur_deviation", schur.iter().copied().fold(0.0, f64::max), 1e-9));
        }
        Err(e) => {
            rows.push(Check { name: format!("rg.error: {e}"), pass: false, value: f64::NAN, threshold: 0.0 });
        }
    }
    Ok(SuiteReport { rows })
}

/// `‖Γ*Γ − 1_low‖` and `‖H_f Γ − ρ⁻¹ Γ H_f‖` on a basis.
pub fn dilation_algebra(basis: &FockBasis, rho: f64) -> Result<(f64, f64)> {
    let g = dilation(basis, rho)?.matrix(1);
    let iso = {
        let low: Vec<usize> = (0..basis.len()).filter(|&i| basis.energy(i) <= rho + crate::fock::ENERGY_TOL).collect();
        let mut p = crate::linalg::CMat::zeros(basis.len(), basis.len());
        for i in low {
            p[(i, i)] = c64(1.0, 0.0);
        }
        opnorm(&(g.adjoint() * &g - p))
    };
    let hf = crate::linalg::diag_real(basis.energies());
    let scale = opnorm(&(&hf * &g - &g * &hf / c64(rho, 0.0)));
    Ok((iso, scale))
}

/// Write the artifacts of a run into `dir`.
pub fn write_run(report: &RunReport, dir: &Path, formats: &[ReportFormat]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for f in formats {
        match f {
            ReportFormat::Kv => std::fs::write(dir.join("summary.kv"), report.to_kv())?,
            ReportFormat::Digest => std::fs::write(dir.join("digest.txt"), report.to_digest())?,
        }
    }
    std::fs::write(dir.join("trace.txt"), report.trace.to_lines())?;
    std::fs::write(dir.join("spectrum.txt"), &report.spectrum_dump)?;
    Ok(())
}

/// Model and run settings from a loaded config.
pub fn spec_of(run: &LoadedRun) -> Result<ModelSpec> {
    ModelSpec::from_config(&run.model)
}
