//! The renormalization map `R_ρ`, the `z_n` cascade and eigenvector assembly.
//!
//! The RG state is the matrix `H^(n)[z]` on the level-`n` reduced space.
//! Each step re-extracts `w_{0,0}`, takes the Feshbach map for the pair
//! `(H, w_{0,0}(H_f))` with cutoff `χ_ρ(H_f)`, and rescales with `Γ_ρ`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;

use crate::config::{PolydiscPolicy, RgSettings, WindowRule};
use crate::error::{Error, Result};
use crate::feshbach::{feshbach, first_feshbach_quick, CutoffSpec, Cutoffs, FeshbachPairReport, FirstFeshbach};
use crate::fock::{dilation_between, vacuum_vector, Dilation, FockBasis, OperatorMatrix};
use crate::kernels::{polydisc_check, Admissibility, PolydiscParams, PolydiscReport, ShellWeights, W00};
use crate::linalg::{c64, columns, inverse, opnorm, CMat, CVec};
use crate::model::{build_hamiltonian, evaluate, ModelPoint, ModelSpec};
use crate::symmetry::schur_scalar;

pub const MAX_SECANT_STEPS: usize = 50;
pub const WINDING_NODES: usize = 16;

#[derive(Clone, Debug)]
pub struct RgConfig {
    pub rho: f64,
    pub mu: f64,
    pub xi: f64,
    pub c_chi: f64,
    pub max_iterations: usize,
    pub tol_z: f64,
    pub tol_stop: f64,
    pub window_rule: WindowRule,
    pub polydisc_policy: PolydiscPolicy,
    pub r_grid_nodes: usize,
    /// Check the argument-principle winding at every `z_n`.
    pub check_winding: bool,
    /// Put the diagonal blocks of multi-photon states into `T` (see [`free_part_of`]).
    pub multiphoton_diagonal: bool,
}

impl RgConfig {
    pub fn new(spec: &ModelSpec, settings: &RgSettings) -> Result<Self> {
        let rho = spec.grid.ratio();
        if !(rho > 0.0 && rho < 0.8) {
            return Err(Error::Config(format!("rho = {rho} outside (0, 4/5)")));
        }
        if !(settings.c_chi >= 1.0) {
            return Err(Error::Config("c_chi must be at least 1".into()));
        }
        let xi = rho.sqrt() / (4.0 * settings.c_chi);
        if !(xi > 0.0 && xi < 1.0) {
            return Err(Error::Config(format!("xi = {xi} outside (0, 1)")));
        }
        if settings.max_iterations == 0 || !(settings.tol_z > 0.0) || !(settings.tol_stop > 0.0) {
            return Err(Error::Config("iteration budget and tolerances must be positive".into()));
        }
        if settings.r_grid_nodes < 2 {
            return Err(Error::Config("r_grid_nodes must be at least 2".into()));
        }
        Ok(Self {
            rho,
            mu: spec.mu,
            xi,
            c_chi: settings.c_chi,
            max_iterations: settings.max_iterations,
            tol_z: settings.tol_z,
            tol_stop: settings.tol_stop,
            window_rule: settings.window_rule,
            polydisc_policy: settings.polydisc_policy,
            r_grid_nodes: settings.r_grid_nodes,
            check_winding: true,
            multiphoton_diagonal: true,
        })
    }

    pub fn window_threshold(&self) -> f64 {
        match self.window_rule {
            WindowRule::RhoOver8 => self.rho / 8.0,
            WindowRule::RhoOver2 => self.rho / 2.0,
        }
    }

    pub fn polydisc(&self) -> PolydiscParams {
        PolydiscParams::for_rg(self.rho, self.mu, self.c_chi)
    }
}

/// `(α′, β′, γ′)` of the parameter recursion; errors if the input leaves the admissible box.
pub fn param_step(beta: f64, gamma: f64, cfg: &RgConfig) -> Result<(f64, f64, f64)> {
    let bound = cfg.rho / (8.0 * cfg.c_chi);
    if beta > bound || gamma > bound {
        return Err(Error::Iteration(format!("(beta, gamma) = ({beta:.3e}, {gamma:.3e}) exceeds {bound:.3e}")));
    }
    Ok(cfg.polydisc().step(beta, gamma))
}

/// Reduced spaces of every RG level plus the dilations between them.
#[derive(Clone, Debug)]
pub struct Levels {
    pub bases: Vec<Arc<FockBasis>>,
    pub dilations: Vec<Dilation>,
    pub weights: Vec<ShellWeights>,
}

impl Levels {
    fn build(level0: Arc<FockBasis>, depth: usize, spec: &ModelSpec) -> Result<Self> {
        let rho = spec.grid.ratio();
        let mut bases = vec![level0];
        let mut dilations = Vec::new();
        for k in 0..depth {
            let next = Arc::new(bases[k].next_level()?);
            dilations.push(dilation_between(&bases[k], &next, rho)?);
            bases.push(next);
        }
        let weights = bases.iter().map(|b| ShellWeights::new(b.grid(), spec.mu, spec.polarization)).collect();
        Ok(Self { bases, dilations, weights })
    }

    fn depth(&self) -> usize {
        self.dilations.len()
    }
}

/// Output of one application of `R_ρ`.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub h: CMat,
    /// `Q_χ` on the input level.
    pub q: CMat,
    pub pair: FeshbachPairReport,
    pub polydisc: PolydiscReport,
    pub warning: Option<String>,
}

fn cutoff_rho(basis: &FockBasis, rho: f64) -> Result<Cutoffs> {
    let c = CutoffSpec::new(rho)?;
    let f = basis.len();
    let chi: Vec<f64> = (0..basis.dim()).map(|i| c.chi(basis.energy(i % f))).collect();
    Ok(Cutoffs::diagonal(&chi))
}

pub fn step_between(h: &CMat, basis: &FockBasis, weights: &ShellWeights, gamma: &Dilation, cfg: &RgConfig) -> Result<StepOutput> {
    let d = basis.atomic_dim();
    let (polydisc, w00) = polydisc_check(h, basis, weights, &cfg.polydisc(), cfg.r_grid_nodes)?;
    let warning = if polydisc.member {
        None
    } else {
        let msg = format!(
            "polydisc surrogate outside B(rho/2, rho/8, rho/8): alpha {:.3e}, beta {:.3e}, gamma {:.3e}",
            polydisc.alpha_hat, polydisc.beta_hat, polydisc.gamma_hat
        );
        if cfg.polydisc_policy == PolydiscPolicy::Abort {
            return Err(Error::Iteration(msg));
        }
        Some(msg)
    };
    let t = free_part_of(h, basis, &w00, cfg.multiphoton_diagonal);
    let cut = cutoff_rho(basis, cfg.rho)?;
    let fe = feshbach(h, &t, &cut)?;
    let out = gamma.conjugate(d, &fe.f) / c64(cfg.rho, 0.0);
    Ok(StepOutput { h: out, q: fe.q, pair: fe.report, polydisc, warning })
}

/// `T` of the RG pair: `w_{0,0}(H_f)`, optionally with the `d × d` diagonal blocks of `H`
/// on states with two or more photons. On the vacuum and one-photon states both agree,
/// since those blocks are the interpolation nodes of `w_{0,0}`. With a finite photon
/// cap the multi-photon blocks miss part of the self-energy, and the mismatch grows
/// like `ρ^{-n}` under rescaling.
pub fn free_part_of(h: &CMat, basis: &FockBasis, w00: &W00, multiphoton: bool) -> CMat {
    let mut t = w00.operator(basis);
    if multiphoton {
        let (d, f) = (basis.atomic_dim(), basis.len());
        for i in (0..f).filter(|&i| basis.photon_number(i) >= 2) {
            for a in 0..d {
                for b in 0..d {
                    t[(a * f + i, b * f + i)] = h[(a * f + i, b * f + i)];
                }
            }
        }
    }
    t
}

/// `R_ρ(H)` on the next level's reduced space.
pub fn rg_step(h: &OperatorMatrix, cfg: &RgConfig) -> Result<OperatorMatrix> {
    let basis = &h.basis;
    let next = Arc::new(basis.next_level()?);
    let gamma = dilation_between(basis, &next, cfg.rho)?;
    let weights = ShellWeights::new(basis.grid(), cfg.mu, 1.0);
    let out = step_between(&h.mat, basis, &weights, &gamma, cfg)?;
    OperatorMatrix::new(out.h, next)
}

/// Per-level data of one cascade at fixed `z`.
#[derive(Clone, Debug)]
pub struct LevelRecord {
    pub h: CMat,
    pub energy: Complex64,
    pub schur_deviation: f64,
    /// Pair report and polydisc data of the step leaving this level.
    pub pair: Option<FeshbachPairReport>,
    pub polydisc: Option<PolydiscReport>,
    pub q: Option<CMat>,
    pub warning: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Cascade {
    pub z: Complex64,
    pub first: FirstFeshbach,
    pub levels: Vec<LevelRecord>,
}

/// Everything fixed by `(spec, s)`: the model point, the full basis and the level spaces.
#[derive(Clone, Debug)]
pub struct RgContext {
    pub spec: ModelSpec,
    pub s: Complex64,
    pub point: ModelPoint,
    pub full: Arc<FockBasis>,
    pub levels: Levels,
    pub cfg: RgConfig,
}

impl RgContext {
    pub fn new(spec: &ModelSpec, s: Complex64, cfg: &RgConfig) -> Result<Self> {
        let point = evaluate(spec, s)?;
        let full = spec.full_basis()?;
        let probe = first_feshbach_quick(&point, point.e_at, &full, spec.window.z_radius)?;
        let levels = Levels::build(probe.reduced.clone(), cfg.max_iterations, spec)?;
        Ok(Self { spec: spec.clone(), s, point, full, levels, cfg: cfg.clone() })
    }

    /// First level whose reduced space is vacuum-only.
    pub fn vacuum_depth(&self) -> usize {
        self.levels.bases.iter().position(|b| b.is_vacuum_only()).unwrap_or(self.levels.depth())
    }

    /// `H^(0)[z], …, H^(n)[z]`.
    pub fn cascade(&self, z: Complex64, n: usize, keep_q: bool) -> Result<Cascade> {
        if n > self.levels.depth() {
            return Err(Error::Iteration(format!("depth {n} exceeds the iteration budget {}", self.levels.depth())));
        }
        let first = first_feshbach_quick(&self.point, z, &self.full, self.spec.window.z_radius)?;
        let mut h = first.h0.mat.clone();
        let mut levels = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let basis = &self.levels.bases[k];
            let (energy, dev) = schur_scalar(&h, basis);
            let mut rec = LevelRecord { h: h.clone(), energy, schur_deviation: dev, pair: None, polydisc: None, q: None, warning: None };
            if k < n {
                let out = step_between(&h, basis, &self.levels.weights[k], &self.levels.dilations[k], &self.cfg)
                    .map_err(|e| match e {
                        Error::Pair(m) => Error::Pair(format!("level {k}: {m}")),
                        other => other,
                    })?;
                rec.pair = Some(out.pair);
                rec.polydisc = Some(out.polydisc);
                rec.warning = out.warning;
                if keep_q {
                    rec.q = Some(out.q);
                }
                h = out.h;
            }
            levels.push(rec);
        }
        Ok(Cascade { z, first, levels })
    }

    /// `E^(n)(z)` and its Schur deviation.
    pub fn energy(&self, n: usize, z: Complex64) -> Result<(Complex64, f64)> {
        let c = self.cascade(z, n, false)?;
        let last = c.levels.last().expect("nonempty cascade");
        Ok((last.energy, last.schur_deviation))
    }

    /// `E^(n)(z)` after checking that `z ∈ U_n`.
    pub fn energy_checked(&self, n: usize, z: Complex64) -> Result<(Complex64, f64)> {
        let c = self.cascade(z, n, false)?;
        check_windows(&c, self.cfg.window_threshold())?;
        let last = c.levels.last().expect("nonempty cascade");
        Ok((last.energy, last.schur_deviation))
    }
}

fn check_windows(c: &Cascade, threshold: f64) -> Result<Vec<f64>> {
    let n = c.levels.len() - 1;
    let vals: Vec<f64> = c.levels[..n].iter().map(|l| l.energy.norm()).collect();
    for (k, &v) in vals.iter().enumerate() {
        if v > threshold {
            return Err(Error::Window { level: k + 1, value: v, threshold });
        }
    }
    Ok(vals)
}

/// `E^(n)(z)` for a model at parameter `s`.
pub fn energy_function(spec: &ModelSpec, s: Complex64, n: usize, z: Complex64, cfg: &RgConfig) -> Result<(Complex64, f64)> {
    RgContext::new(spec, s, cfg)?.energy_checked(n, z)
}

#[derive(Clone, Debug)]
pub struct RootResult {
    pub z: Complex64,
    pub residual: f64,
    pub steps: usize,
    pub winding: Option<i64>,
}

/// Winding number of `E^(n)` around a circle about `center`.
pub fn winding_number(ctx: &RgContext, n: usize, center: Complex64, radius: f64) -> Result<i64> {
    let vals = (0..WINDING_NODES)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / WINDING_NODES as f64;
            ctx.energy(n, center + Complex64::from_polar(radius, t)).map(|e| e.0)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    for k in 0..WINDING_NODES {
        let a = vals[k];
        let b = vals[(k + 1) % WINDING_NODES];
        total += (b / a).arg();
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

/// Zero of `E^(n)` by complex secant from `start`.
pub fn find_zn(ctx: &RgContext, n: usize, start: Complex64) -> Result<RootResult> {
    let rho_n = ctx.cfg.rho.powi(n as i32);
    let mut z0 = start;
    let mut e0 = ctx.energy(n, z0)?.0;
    let mut steps = 0;
    if e0.norm() >= ctx.cfg.tol_z {
        let mut z1 = start + c64(1e-4 * rho_n, 0.0);
        let mut e1 = ctx.energy(n, z1)?.0;
        while e1.norm() >= ctx.cfg.tol_z {
            steps += 1;
            if steps > MAX_SECANT_STEPS {
                return Err(Error::Root(format!("no convergence at level {n} after {MAX_SECANT_STEPS} secant steps (|E| = {:.3e})", e1.norm())));
            }
            let de = e1 - e0;
            if de.norm() == 0.0 {
                return Err(Error::Root(format!("flat secant at level {n}")));
            }
            let z2 = z1 - e1 * (z1 - z0) / de;
            z0 = z1;
            e0 = e1;
            z1 = z2;
            e1 = ctx.energy(n, z1)?.0;
        }
        z0 = z1;
        e0 = e1;
    }
    let winding = if ctx.cfg.check_winding {
        let w = winding_number(ctx, n, z0, rho_n / 16.0)?;
        if w != 1 {
            return Err(Error::Root(format!("winding number {w} at level {n}, expected 1")));
        }
        Some(w)
    } else {
        None
    };
    Ok(RootResult { z: z0, residual: e0.norm(), steps, winding })
}

/// One line of the trace.
#[derive(Clone, Debug)]
pub struct TraceRecord {
    pub n: usize,
    pub z: Complex64,
    pub delta_z: f64,
    pub residual: f64,
    pub secant_steps: usize,
    pub winding: Option<i64>,
    /// Largest Schur deviation over levels `0..=n` at `z_n`, relative to `max(1, |E^(k)|)`.
    pub schur_deviation: f64,
    /// `|E^(k)(z_n)|` for `k < n`.
    pub windows: Vec<f64>,
    pub min_margin: f64,
    pub max_contraction: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub gamma_hat: f64,
    pub gamma_ratio: f64,
    pub vacuum_only: bool,
    pub warnings: usize,
}

#[derive(Clone, Debug)]
pub struct RgTrace {
    pub records: Vec<TraceRecord>,
    pub z_inf: Complex64,
    pub tail_bound: f64,
    pub epsilon: f64,
    pub admissibility: Admissibility,
    pub notes: Vec<String>,
}

impl RgTrace {
    pub fn depth(&self) -> usize {
        self.records.last().map(|r| r.n).unwrap_or(0)
    }

    /// Least-squares geometric rate of `|z_n − z_{n−1}|` over `n ∈ [lo, hi]`.
    pub fn fitted_rate(&self, lo: usize, hi: usize) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .records
            .iter()
            .filter(|r| r.n >= lo && r.n <= hi && r.delta_z > 0.0 && r.delta_z.is_finite())
            .map(|r| (r.n as f64, r.delta_z.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some((sxy / sxx).exp())
    }

    pub fn max_schur_deviation(&self) -> f64 {
        self.records.iter().map(|r| r.schur_deviation).fold(0.0, f64::max)
    }

    /// Line-oriented serialization, one record per line.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# n re_z im_z delta_z residual secant_steps winding schur_dev min_margin max_contraction alpha_hat beta_hat gamma_hat gamma_ratio vacuum_only windows"
        );
        for r in &self.records {
            let w = r.winding.map(|w| w.to_string()).unwrap_or_else(|| "-".into());
            let win: Vec<String> = r.windows.iter().map(|v| format!("{v:.6e}")).collect();
            let _ = writeln!(
                out,
                "{} {:.17e} {:.17e} {:.6e} {:.6e} {} {} {:.6e} {:.6e} {:.6e} {:.6e} {:.6e} {:.6e} {:.6e} {} {}",
                r.n,
                r.z.re,
                r.z.im,
                r.delta_z,
                r.residual,
                r.secant_steps,
                w,
                r.schur_deviation,
                r.min_margin,
                r.max_contraction,
                r.alpha_hat,
                r.beta_hat,
                r.gamma_hat,
                r.gamma_ratio,
                r.vacuum_only as u8,
                if win.is_empty() { "-".into() } else { win.join(",") }
            );
        }
        let _ = writeln!(out, "# z_inf {:.17e} {:.17e}", self.z_inf.re, self.z_inf.im);
        let _ = writeln!(out, "# tail_bound {:.6e} epsilon {:.6e}", self.tail_bound, self.epsilon);
        let a = &self.admissibility;
        let _ = writeln!(
            out,
            "# admissibility contracting={} gamma={} beta={} summed={}",
            a.contracting, a.gamma_condition, a.beta_condition, a.summed_condition
        );
        for n in &self.notes {
            let _ = writeln!(out, "# note {n}");
        }
        out
    }
}

fn record_at(ctx: &RgContext, n: usize, root: &RootResult, prev: Option<Complex64>, prev_gamma: Option<f64>) -> Result<(TraceRecord, f64)> {
    let c = ctx.cascade(root.z, n, false)?;
    let windows = check_windows(&c, ctx.cfg.window_threshold())?;
    let schur = c.levels.iter().map(|l| l.schur_deviation / l.energy.norm().max(1.0)).fold(0.0, f64::max);
    let mut min_margin = c.first.report.margin;
    let mut max_contraction = c.first.report.contraction_left.max(c.first.report.contraction_right);
    let mut warnings = 0;
    for l in &c.levels {
        if let Some(p) = &l.pair {
            min_margin = min_margin.min(p.margin);
            max_contraction = max_contraction.max(p.contraction_left.max(p.contraction_right));
        }
        warnings += l.warning.is_some() as usize;
    }
    let basis = &ctx.levels.bases[n];
    let last = c.levels.last().expect("nonempty cascade");
    let (pd, _) = polydisc_check(&last.h, basis, &ctx.levels.weights[n], &ctx.cfg.polydisc(), ctx.cfg.r_grid_nodes)?;
    let gamma_ratio = match prev_gamma {
        Some(g) if g > 0.0 => pd.gamma_hat / g,
        _ => f64::NAN,
    };
    let rec = TraceRecord {
        n,
        z: root.z,
        delta_z: prev.map(|p| (root.z - p).norm()).unwrap_or(f64::NAN),
        residual: root.residual,
        secant_steps: root.steps,
        winding: root.winding,
        schur_deviation: schur,
        windows,
        min_margin,
        max_contraction,
        alpha_hat: pd.alpha_hat,
        beta_hat: pd.beta_hat,
        gamma_hat: pd.gamma_hat,
        gamma_ratio,
        vacuum_only: basis.is_vacuum_only(),
        warnings,
    };
    Ok((rec, pd.gamma_hat))
}

/// Run the `z_n` cascade until the level is vacuum-only and `|z_n − z_{n−1}| < tol_stop`.
pub fn iterate_context(ctx: &RgContext) -> Result<(Complex64, RgTrace)> {
    let cfg = &ctx.cfg;
    let mut records: Vec<TraceRecord> = Vec::new();
    let mut z = ctx.point.e_at;
    let mut prev: Option<Complex64> = None;
    let mut prev_gamma = None;
    let mut converged = false;
    for n in 0..=ctx.levels.depth() {
        let root = find_zn(ctx, n, z)?;
        let (rec, g) = record_at(ctx, n, &root, prev, prev_gamma)?;
        let done = rec.vacuum_only && rec.delta_z < cfg.tol_stop;
        records.push(rec);
        prev = Some(root.z);
        prev_gamma = Some(g);
        z = root.z;
        if done {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Iteration(format!("no convergence within {} iterations", cfg.max_iterations)));
    }
    let params = cfg.polydisc();
    let gammas: Vec<f64> = records.iter().map(|r| r.gamma_hat).collect();
    let alpha1 = records.get(1).map(|_| params.c_beta() * gammas[0] * gammas[0] / cfg.rho).unwrap_or(0.0);
    let epsilon = 0.5 - cfg.rho / 2.0 - alpha1;
    let n = records.len() - 1;
    let alpha_sum: f64 = (1..=n).map(|k| params.c_beta() * gammas[k - 1].powi(2) / cfg.rho).sum();
    let tail_bound = if epsilon > 0.0 {
        cfg.rho.powi(n as i32) * (alpha_sum / (2.0 * cfg.rho * epsilon * epsilon)).exp()
    } else {
        f64::INFINITY
    };
    let admissibility = params.admissibility(records[0].beta_hat, records[0].gamma_hat, records.len());
    let mut notes = vec![crate::kernels::SURROGATE_NOTE.to_string()];
    if !admissibility.contracting {
        notes.push(format!(
            "C_gamma rho^mu = {:.3} >= 1: the theoretical contraction does not apply; empirical rates are reported",
            params.c_gamma() * cfg.rho.powf(cfg.mu)
        ));
    }
    let trace = RgTrace { records, z_inf: z, tail_bound, epsilon, admissibility, notes };
    Ok((z, trace))
}

pub fn iterate_to_fixed_point(spec: &ModelSpec, s: Complex64, cfg: &RgConfig) -> Result<(Complex64, RgTrace, RgContext)> {
    let ctx = RgContext::new(spec, s, cfg)?;
    let (z, trace) = iterate_context(&ctx)?;
    Ok((z, trace, ctx))
}

#[derive(Clone, Debug)]
pub struct Eigenvectors {
    /// Raw coordinates on `C^{D_at} ⊗ F_full`.
    pub vectors: Vec<CVec>,
    pub residuals: Vec<f64>,
    pub gram_min_sv: f64,
    pub gram_max_sv: f64,
    pub depth: usize,
}

impl Eigenvectors {
    pub fn matrix(&self) -> CMat {
        let n = self.vectors.first().map(|v| v.len()).unwrap_or(0);
        columns(&self.vectors, n)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// `ψ_v = Q_𝛘 Q_0 Γ* Q_1 Γ* … (v ⊗ Ω)` for the standard basis vectors `v` of `C^d`.
pub fn build_eigenvectors(ctx: &RgContext, z_inf: Complex64, depth: usize) -> Result<Eigenvectors> {
    let depth = depth.min(ctx.levels.depth());
    let c = ctx.cascade(z_inf, depth, true)?;
    let d = ctx.point.d;
    let full_len = ctx.full.len();
    let h_raw = build_hamiltonian(&ctx.spec, ctx.s, ctx.spec.g, &ctx.full)?.mat;
    let mut vectors = Vec::with_capacity(d);
    let mut residuals = Vec::with_capacity(d);
    for a in 0..d {
        let mut v = vacuum_vector(&ctx.levels.bases[depth], a);
        for k in (0..depth).rev() {
            let up = ctx.levels.dilations[k].apply_adjoint(d, &v);
            v = c.levels[k].q.as_ref().expect("kept") * up;
        }
        let frame = &c.first.q_reduced * v;
        let psi = ctx.point.vector_to_raw(&frame, full_len);
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::Eigenvector(format!("vector {a} vanished at depth {depth}")));
        }
        let r = (&h_raw * &psi - &psi * z_inf).norm() / norm;
        vectors.push(psi);
        residuals.push(r);
    }
    let m = columns(&vectors, vectors[0].len());
    let gram = m.adjoint() * &m;
    let sv = gram.singular_values();
    let gram_max_sv = sv.iter().copied().fold(0.0, f64::max);
    let gram_min_sv = sv.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Eigenvectors { vectors, residuals, gram_min_sv, gram_max_sv, depth })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectionMode {
    /// `M_ab = ⟨ψ_a(s̄), ψ_b(s)⟩`.
    Reflection,
    /// `N_ab = ⟨𝒥ψ_a, ψ_b⟩`.
    ComplexSelfadjoint,
}

#[derive(Clone, Debug)]
pub struct Eigenprojection {
    pub p: CMat,
    pub condition: f64,
    pub idempotency: f64,
    pub rank: usize,
}

/// Rank-`d` projection `Ψ G⁻¹ Ψ̃*` with `G = Ψ̃*Ψ`, where `Ψ̃` are the partner vectors.
pub fn build_eigenprojection(psi: &[CVec], partner: &[CVec], mode: ProjectionMode) -> Result<Eigenprojection> {
    if psi.is_empty() || psi.len() != partner.len() {
        return Err(Error::Eigenvector("projection needs matching nonempty vector lists".into()));
    }
    let n = psi[0].len();
    let a = columns(psi, n);
    let b = columns(partner, n);
    let g = b.adjoint() * &a;
    let sv = g.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let which = match mode {
        ProjectionMode::Reflection => "M",
        ProjectionMode::ComplexSelfadjoint => "N",
    };
    if !(condition < 1e12) {
        return Err(Error::Eigenvector(format!("Gram matrix {which} is singular (condition {condition:.3e})")));
    }
    let ginv = inverse(&g).ok_or_else(|| Error::Eigenvector(format!("Gram matrix {which} is singular")))?;
    let p = &a * ginv * b.adjoint();
    let idempotency = opnorm(&(&p * &p - &p)) / opnorm(&p).max(1.0);
    let rank = crate::linalg::rank(&p, 1e-8 * opnorm(&p));
    Ok(Eigenprojection { p, condition, idempotency, rank })
}

/// `𝒥ψ = (J ⊗ 1) conj(ψ)` on raw coordinates.
pub fn apply_j(j: &CMat, psi: &CVec, fock_len: usize) -> CVec {
    j.kronecker(&crate::linalg::identity(fock_len)) * psi.map(|x| x.conj())
}
