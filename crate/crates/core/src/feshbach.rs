//! Smooth Feshbach–Schur map `F_χ(H,T) = H_χ − χWχ̄ H_χ̄⁻¹ χ̄Wχ`, its auxiliary
//! operators, pair criteria and the first Feshbach operator of a model.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fock::{FockBasis, OperatorMatrix, ENERGY_TOL};
use crate::linalg::{c64, identity, inverse, nullspace, opnorm, range_basis, submatrix, CMat, ZERO};
use crate::model::{evaluate, ModelPoint, ModelSpec};

/// Relative threshold for the range of `χ̄`.
pub const RANGE_TOL: f64 = 1e-10;

/// Quintic smoothstep `6t⁵ − 15t⁴ + 10t³` clamped to `[0, 1]`.
pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// `χ(r)`: 1 below 3/4, 0 above 1.
pub fn chi1(r: f64) -> f64 {
    if r <= 0.75 {
        1.0
    } else if r >= 1.0 {
        0.0
    } else {
        (FRAC_PI_2 * smoothstep(4.0 * r - 3.0)).cos()
    }
}

/// `χ̄ = (1 − χ²)^{1/2}`.
pub fn chibar1(r: f64) -> f64 {
    let c = chi1(r);
    (1.0 - c * c).max(0.0).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffSpec {
    pub rho: f64,
}

impl CutoffSpec {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::Config(format!("cutoff scale {rho} outside (0, 1]")));
        }
        Ok(Self { rho })
    }

    pub fn chi(&self, r: f64) -> f64 {
        chi1(r / self.rho)
    }

    pub fn chibar(&self, r: f64) -> f64 {
        chibar1(r / self.rho)
    }

    /// Largest jump of the one-sided difference quotients of `χ` and `χ̄` at the seams.
    pub fn seam_jump(&self, h: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for seam in [0.75 * self.rho, self.rho] {
            for f in [Self::chi as fn(&Self, f64) -> f64, Self::chibar] {
                let left = (f(self, seam) - f(self, seam - h)) / h;
                let right = (f(self, seam + h) - f(self, seam)) / h;
                worst = worst.max((left - right).abs());
            }
        }
        worst
    }
}

/// A pair of commuting cutoffs on a finite-dimensional space.
#[derive(Clone, Debug)]
pub struct Cutoffs {
    pub chi: CMat,
    pub chibar: CMat,
    diag: Option<Vec<f64>>,
}

enum RangeBasis {
    Coords(Vec<usize>),
    Dense(CMat),
}

impl RangeBasis {
    fn dim(&self) -> usize {
        match self {
            RangeBasis::Coords(c) => c.len(),
            RangeBasis::Dense(q) => q.ncols(),
        }
    }

    /// `Q* M Q`.
    fn compress(&self, m: &CMat) -> CMat {
        match self {
            RangeBasis::Coords(c) => submatrix(m, c, c),
            RangeBasis::Dense(q) => q.adjoint() * m * q,
        }
    }

    /// `Q A Q*` as an `n × n` matrix.
    fn expand(&self, a: &CMat, n: usize) -> CMat {
        match self {
            RangeBasis::Coords(c) => {
                let mut out = CMat::zeros(n, n);
                for (i, &ci) in c.iter().enumerate() {
                    for (j, &cj) in c.iter().enumerate() {
                        out[(ci, cj)] = a[(i, j)];
                    }
                }
                out
            }
            RangeBasis::Dense(q) => q * a * q.adjoint(),
        }
    }
}

impl Cutoffs {
    /// Diagonal cutoffs with `χ̄ = (1 − χ²)^{1/2}` entrywise.
    pub fn diagonal(chi: &[f64]) -> Self {
        let bar: Vec<f64> = chi.iter().map(|&c| (1.0 - c * c).max(0.0).sqrt()).collect();
        let n = chi.len();
        let mut cm = CMat::zeros(n, n);
        let mut bm = CMat::zeros(n, n);
        for i in 0..n {
            cm[(i, i)] = c64(chi[i], 0.0);
            bm[(i, i)] = c64(bar[i], 0.0);
        }
        Self { chi: cm, chibar: bm, diag: Some(bar) }
    }

    /// General commuting cutoffs; `χ² + χ̄² = 1` is checked.
    pub fn from_matrices(chi: CMat, chibar: CMat) -> Result<Self> {
        let n = chi.nrows();
        if chi.shape() != (n, n) || chibar.shape() != (n, n) {
            return Err(Error::Dimension("cutoffs must be square and of equal size".into()));
        }
        let r = opnorm(&(&chi * &chi + &chibar * &chibar - identity(n)));
        if r > 1e-12 {
            return Err(Error::Pair(format!("χ² + χ̄² − 1 has norm {r:.2e}")));
        }
        Ok(Self { chi, chibar, diag: None })
    }

    pub fn dim(&self) -> usize {
        self.chi.nrows()
    }

    fn range(&self) -> RangeBasis {
        match &self.diag {
            Some(bar) => {
                let scale = bar.iter().fold(0.0_f64, |a, &b| a.max(b));
                RangeBasis::Coords((0..bar.len()).filter(|&i| bar[i] > RANGE_TOL * scale).collect())
            }
            None => RangeBasis::Dense(range_basis(&self.chibar, RANGE_TOL)),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct FeshbachPairReport {
    pub commutator_chi: f64,
    pub commutator_chibar: f64,
    /// Smallest singular value of `T` on `Ran χ̄`.
    pub margin: f64,
    pub condition: f64,
    /// `‖T⁻¹χ̄Wχ̄‖`.
    pub contraction_left: f64,
    /// `‖χ̄WT⁻¹χ̄‖`.
    pub contraction_right: f64,
    pub range_dim: usize,
    pub pass: bool,
    pub commutes: bool,
}

fn check_dims(h: &CMat, t: &CMat, cut: &Cutoffs) -> Result<usize> {
    let n = h.nrows();
    if h.shape() != (n, n) || t.shape() != (n, n) || cut.dim() != n {
        return Err(Error::Dimension(format!("pair dims {:?}, {:?}, cutoff {}", h.shape(), t.shape(), cut.dim())));
    }
    Ok(n)
}

/// Restricted inverse `T⁻¹` on `Ran χ̄` together with the margin and condition number.
fn restricted_inverse(rb: &RangeBasis, m: &CMat, n: usize) -> Option<(CMat, f64, f64)> {
    if rb.dim() == 0 {
        return Some((CMat::zeros(n, n), f64::INFINITY, 1.0));
    }
    let a = rb.compress(m);
    let sv = a.clone().singular_values();
    let smax = sv.iter().fold(0.0_f64, |x, &y| x.max(y));
    let smin = sv.iter().fold(f64::INFINITY, |x, &y| x.min(y));
    if smin <= RANGE_TOL * smax.max(1.0) {
        return None;
    }
    let inv = inverse(&a)?;
    Some((rb.expand(&inv, n), smin, smax / smin))
}

/// `max(1, Frobenius norm)`, a cheap scale for the commutator test.
fn frob_scale(t: &CMat) -> f64 {
    t.norm().max(1.0)
}

/// Commutator of a diagonal cutoff with `t`; Frobenius norm, an upper bound on the operator norm.
fn diag_commutator(c: &[f64], t: &CMat) -> f64 {
    let n = c.len();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            let dc = c[i] - c[j];
            if dc != 0.0 {
                acc += dc * dc * t[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

fn diag_of(m: &CMat) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, i)].re).collect()
}

/// Pair report for diagonal cutoffs, working on `Ran χ̄` coordinates only.
fn verify_pair_diag(h: &CMat, t: &CMat, cut: &Cutoffs, bar: &[f64]) -> FeshbachPairReport {
    let scale = frob_scale(t);
    let chi = diag_of(&cut.chi);
    let mut rep = FeshbachPairReport {
        commutator_chi: diag_commutator(&chi, t) / scale,
        commutator_chibar: diag_commutator(bar, t) / scale,
        ..Default::default()
    };
    rep.commutes = rep.commutator_chi <= 1e-12 && rep.commutator_chibar <= 1e-12;
    let RangeBasis::Coords(rc) = cut.range() else { unreachable!("diagonal cutoffs use coordinates") };
    rep.range_dim = rc.len();
    if rc.is_empty() {
        rep.margin = f64::INFINITY;
        rep.condition = 1.0;
        rep.pass = true;
        return rep;
    }
    let t_rr = submatrix(t, &rc, &rc);
    let sv = t_rr.clone().singular_values();
    let smax = sv.iter().fold(0.0_f64, |x, &y| x.max(y));
    let smin = sv.iter().fold(f64::INFINITY, |x, &y| x.min(y));
    match (smin > RANGE_TOL * smax.max(1.0)).then(|| inverse(&t_rr)).flatten() {
        Some(tinv) => {
            rep.margin = smin;
            rep.condition = smax / smin;
            let bwb = CMat::from_fn(rc.len(), rc.len(), |i, j| {
                (h[(rc[i], rc[j])] - t[(rc[i], rc[j])]) * (bar[rc[i]] * bar[rc[j]])
            });
            rep.contraction_left = opnorm(&(&tinv * &bwb));
            rep.contraction_right = opnorm(&(&bwb * &tinv));
        }
        None => {
            rep.margin = 0.0;
            rep.condition = f64::INFINITY;
            rep.contraction_left = f64::INFINITY;
            rep.contraction_right = f64::INFINITY;
        }
    }
    rep.pass = rep.margin > 0.0 && rep.contraction_left < 1.0 && rep.contraction_right < 1.0;
    rep
}

pub fn verify_pair(h: &CMat, t: &CMat, cut: &Cutoffs) -> Result<FeshbachPairReport> {
    let n = check_dims(h, t, cut)?;
    if let Some(bar) = &cut.diag {
        return Ok(verify_pair_diag(h, t, cut, bar));
    }
    let scale = opnorm(t).max(1.0);
    let comm = |c: &CMat| opnorm(&(c * t - t * c)) / scale;
    let mut rep = FeshbachPairReport {
        commutator_chi: comm(&cut.chi),
        commutator_chibar: comm(&cut.chibar),
        ..Default::default()
    };
    rep.commutes = rep.commutator_chi <= 1e-12 && rep.commutator_chibar <= 1e-12;
    let rb = cut.range();
    rep.range_dim = rb.dim();
    let w = h - t;
    match restricted_inverse(&rb, t, n) {
        Some((tinv, margin, cond)) => {
            rep.margin = margin;
            rep.condition = cond;
            let bwb = &cut.chibar * &w * &cut.chibar;
            rep.contraction_left = opnorm(&(&tinv * &bwb));
            rep.contraction_right = opnorm(&(&bwb * &tinv));
        }
        None => {
            rep.margin = 0.0;
            rep.condition = f64::INFINITY;
            rep.contraction_left = f64::INFINITY;
            rep.contraction_right = f64::INFINITY;
        }
    }
    rep.pass = rep.margin > 0.0 && rep.contraction_left < 1.0 && rep.contraction_right < 1.0;
    Ok(rep)
}

/// Everything the Feshbach map produces for one pair.
#[derive(Clone, Debug)]
pub struct Feshbach {
    pub f: CMat,
    pub q: CMat,
    pub q_sharp: CMat,
    /// `χ̄ H_χ̄⁻¹ χ̄`.
    pub bar_resolvent: CMat,
    /// `H_χ̄⁻¹` on `Ran χ̄` lifted to the full space.
    pub hbar_inv: CMat,
    pub report: FeshbachPairReport,
}

pub fn feshbach(h: &CMat, t: &CMat, cut: &Cutoffs) -> Result<Feshbach> {
    let n = check_dims(h, t, cut)?;
    let report = verify_pair(h, t, cut)?;
    if !report.commutes {
        return Err(Error::Pair(format!(
            "cutoffs do not commute with T ({:.2e}, {:.2e})",
            report.commutator_chi, report.commutator_chibar
        )));
    }
    if !report.pass {
        return Err(Error::Pair(format!(
            "pair criteria fail: margin {:.2e}, contractions {:.3}, {:.3}",
            report.margin, report.contraction_left, report.contraction_right
        )));
    }
    if let Some(bar) = &cut.diag {
        return feshbach_diag(h, t, cut, bar, report);
    }
    let (chi, bar) = (&cut.chi, &cut.chibar);
    let w = h - t;
    let hbar = t + bar * &w * bar;
    let rb = cut.range();
    let (hbar_inv, _, _) =
        restricted_inverse(&rb, &hbar, n).ok_or_else(|| Error::Pair("H_χ̄ is singular on Ran χ̄".into()))?;
    let wchi = &w * chi;
    let chiw = chi * &w;
    let right = bar * &hbar_inv * bar * &wchi;
    let f = t + chi * &wchi - &chiw * &right;
    let q = chi - &right;
    let q_sharp = chi - &chiw * bar * &hbar_inv * bar;
    let bar_resolvent = bar * &hbar_inv * bar;
    Ok(Feshbach { f, q, q_sharp, bar_resolvent, hbar_inv, report })
}

fn feshbach_diag(h: &CMat, t: &CMat, cut: &Cutoffs, bar: &[f64], report: FeshbachPairReport) -> Result<Feshbach> {
    let n = h.nrows();
    let c = diag_of(&cut.chi);
    let RangeBasis::Coords(rc) = cut.range() else { unreachable!("diagonal cutoffs use coordinates") };
    let r = rc.len();
    let w = h - t;
    let hbar_rr = CMat::from_fn(r, r, |i, j| t[(rc[i], rc[j])] + w[(rc[i], rc[j])] * (bar[rc[i]] * bar[rc[j]]));
    let hinv_rr = if r == 0 {
        CMat::zeros(0, 0)
    } else {
        let sv = hbar_rr.clone().singular_values();
        let smax = sv.iter().fold(0.0_f64, |x, &y| x.max(y));
        let smin = sv.iter().fold(f64::INFINITY, |x, &y| x.min(y));
        if smin <= RANGE_TOL * smax.max(1.0) {
            return Err(Error::Pair("H_χ̄ is singular on Ran χ̄".into()));
        }
        inverse(&hbar_rr).ok_or_else(|| Error::Pair("H_χ̄ is singular on Ran χ̄".into()))?
    };
    let res_rr = CMat::from_fn(r, r, |i, j| hinv_rr[(i, j)] * (bar[rc[i]] * bar[rc[j]]));
    let wchi_r = CMat::from_fn(r, n, |i, j| w[(rc[i], j)] * c[j]);
    let chiw_r = CMat::from_fn(n, r, |i, j| w[(i, rc[j])] * c[i]);
    let right_r = &res_rr * &wchi_r;
    let mut f = t + CMat::from_fn(n, n, |i, j| w[(i, j)] * (c[i] * c[j]));
    f -= &chiw_r * &right_r;
    let mut q = CMat::zeros(n, n);
    let mut q_sharp = CMat::zeros(n, n);
    for i in 0..n {
        q[(i, i)] = c64(c[i], 0.0);
        q_sharp[(i, i)] = c64(c[i], 0.0);
    }
    for (k, &i) in rc.iter().enumerate() {
        for j in 0..n {
            q[(i, j)] -= right_r[(k, j)];
        }
    }
    let left_r = &chiw_r * &res_rr;
    for (k, &j) in rc.iter().enumerate() {
        for i in 0..n {
            q_sharp[(i, j)] -= left_r[(i, k)];
        }
    }
    let mut bar_resolvent = CMat::zeros(n, n);
    let mut hbar_inv = CMat::zeros(n, n);
    for (a, &i) in rc.iter().enumerate() {
        for (b, &j) in rc.iter().enumerate() {
            bar_resolvent[(i, j)] = res_rr[(a, b)];
            hbar_inv[(i, j)] = hinv_rr[(a, b)];
        }
    }
    Ok(Feshbach { f, q, q_sharp, bar_resolvent, hbar_inv, report })
}

pub fn feshbach_map(h: &CMat, t: &CMat, cut: &Cutoffs) -> Result<CMat> {
    Ok(feshbach(h, t, cut)?.f)
}

pub fn q_ops(h: &CMat, t: &CMat, cut: &Cutoffs) -> Result<(CMat, CMat)> {
    let fe = feshbach(h, t, cut)?;
    Ok((fe.q, fe.q_sharp))
}

#[derive(Clone, Debug)]
pub struct NeumannResult {
    pub f: CMat,
    pub terms: usize,
    pub tail_bound: f64,
    pub contraction: f64,
}

/// `F` via `H_χ̄⁻¹ = Σ_L (−T⁻¹χ̄Wχ̄)^L T⁻¹`, truncated once the geometric tail bound
/// drops below `tol` or after `max_terms` terms.
pub fn neumann_feshbach(h: &CMat, t: &CMat, cut: &Cutoffs, max_terms: usize, tol: f64) -> Result<NeumannResult> {
    let n = check_dims(h, t, cut)?;
    let (chi, bar) = (&cut.chi, &cut.chibar);
    let w = h - t;
    let rb = cut.range();
    let (tinv, _, _) = restricted_inverse(&rb, t, n).ok_or_else(|| Error::Pair("T is singular on Ran χ̄".into()))?;
    let step = -(&tinv * bar * &w * bar);
    let kappa = opnorm(&step);
    let left = chi * &w * bar;
    let right = bar * &w * chi;
    let prefactor = opnorm(&left) * opnorm(&tinv) * opnorm(&right);
    let mut f = t + chi * &w * chi;
    let mut power = tinv.clone();
    let mut terms = 0;
    let mut tail = f64::INFINITY;
    for l in 0..max_terms {
        f -= &left * &power * &right;
        terms = l + 1;
        tail = if kappa < 1.0 { prefactor * kappa.powi(terms as i32) / (1.0 - kappa) } else { f64::INFINITY };
        if tail < tol {
            break;
        }
        power = &step * &power;
    }
    Ok(NeumannResult { f, terms, tail_bound: tail, contraction: kappa })
}

/// Flat indices (atomic-major) of `Ran(P_at ⊗ 1_{H_f ≤ 1})` inside the full basis.
pub fn reduced_indices(full: &FockBasis, reduced: &FockBasis, d: usize) -> Result<Vec<usize>> {
    let f = full.len();
    let mut out = Vec::with_capacity(d * reduced.len());
    for a in 0..d {
        for st in reduced.states() {
            let padded: Vec<u32> = (0..full.modes()).map(|j| st.get(j).copied().unwrap_or(0)).collect();
            let i = full
                .index_of(&padded)
                .ok_or_else(|| Error::Dimension("reduced state missing from the full basis".into()))?;
            out.push(a * f + i);
        }
    }
    Ok(out)
}

/// `𝛘 = P_at ⊗ χ₁(H_f)` in the adapted frame (diagonal).
pub fn first_cutoffs(basis: &FockBasis, d: usize) -> Cutoffs {
    let f = basis.len();
    let mut chi = vec![0.0; basis.atomic_dim() * f];
    for a in 0..d {
        for i in 0..f {
            chi[a * f + i] = chi1(basis.energy(i));
        }
    }
    Cutoffs::diagonal(&chi)
}

/// `H₀(s) − z` in the adapted frame with the off-diagonal atomic blocks removed.
pub fn free_part(point: &ModelPoint, z: Complex64, basis: &Arc<FockBasis>) -> CMat {
    let n = point.h_at.nrows();
    let d = point.d;
    let mut hb = point.h_at.clone();
    for i in 0..n {
        for j in 0..n {
            if (i < d) != (j < d) {
                hb[(i, j)] = ZERO;
            }
        }
    }
    let f = basis.len();
    let mut t = hb.kronecker(&identity(f)) - identity(n * f) * z;
    for a in 0..n {
        for i in 0..f {
            t[(a * f + i, a * f + i)] += c64(basis.energy(i), 0.0);
        }
    }
    t
}

#[derive(Clone, Debug)]
pub struct FirstFeshbach {
    /// `H^(0)[s,z]` on the reduced space.
    pub h0: OperatorMatrix,
    pub reduced: Arc<FockBasis>,
    pub indices: Vec<usize>,
    pub report: FeshbachPairReport,
    pub neumann_terms: usize,
    pub neumann_tail: f64,
    pub neumann_discrepancy: f64,
    pub warning: Option<String>,
    /// `Q_𝛘` restricted to the reduced columns (full frame rows).
    pub q_reduced: CMat,
    /// `W^(0) = H^(0) − (E_at − z + H_f)`.
    pub w0_norm: f64,
}

pub fn first_feshbach(spec: &ModelSpec, s: Complex64, z: Complex64, basis: &Arc<FockBasis>) -> Result<FirstFeshbach> {
    let point = evaluate(spec, s)?;
    first_feshbach_at(&point, z, basis, spec.window.z_radius)
}

pub fn first_feshbach_at(point: &ModelPoint, z: Complex64, basis: &Arc<FockBasis>, z_radius: f64) -> Result<FirstFeshbach> {
    first_feshbach_impl(point, z, basis, z_radius, true)
}

/// As [`first_feshbach_at`] without the Neumann cross-check (its fields are left at zero).
pub fn first_feshbach_quick(point: &ModelPoint, z: Complex64, basis: &Arc<FockBasis>, z_radius: f64) -> Result<FirstFeshbach> {
    first_feshbach_impl(point, z, basis, z_radius, false)
}

fn first_feshbach_impl(point: &ModelPoint, z: Complex64, basis: &Arc<FockBasis>, z_radius: f64, neumann: bool) -> Result<FirstFeshbach> {
    let dz = (z - point.e_at).norm();
    if dz > z_radius {
        return Err(Error::Window { level: 0, value: dz, threshold: z_radius });
    }
    let d = point.d;
    let h = point.hamiltonian(basis)? - identity(basis.dim()) * z;
    let t = free_part(point, z, basis);
    let cut = first_cutoffs(basis, d);
    let fe = feshbach(&h, &t, &cut)?;
    let reduced = Arc::new(FockBasis::build(basis.grid().clone(), basis.n_max(), 1.0, d)?);
    let idx = reduced_indices(basis, &reduced, d)?;
    let h0 = submatrix(&fe.f, &idx, &idx);
    let scale = opnorm(&h0).max(1.0);
    let (ne, discrepancy) = if neumann {
        let ne = neumann_feshbach(&h, &t, &cut, 30, 1e-16 * scale)?;
        let discrepancy = opnorm(&(submatrix(&ne.f, &idx, &idx) - &h0));
        (ne, discrepancy)
    } else {
        (NeumannResult { f: CMat::zeros(0, 0), terms: 0, tail_bound: 0.0, contraction: 0.0 }, 0.0)
    };
    let warning = if ne.contraction >= 1.0 {
        Some(format!("Neumann series diverges (contraction {:.3}); direct inversion returned", ne.contraction))
    } else {
        None
    };
    let all: Vec<usize> = (0..basis.dim()).collect();
    let q_reduced = submatrix(&fe.q, &all, &idx);
    let mut free = CMat::zeros(idx.len(), idx.len());
    for (k, &i) in idx.iter().enumerate() {
        let fi = i % basis.len();
        free[(k, k)] = point.e_at - z + basis.energy(fi);
    }
    let w0_norm = opnorm(&(&h0 - free));
    let self_adjoint = false;
    let h0 = OperatorMatrix { mat: h0, basis: reduced.clone(), self_adjoint };
    debug_assert!(reduced.energies().iter().all(|&e| e <= 1.0 + ENERGY_TOL));
    Ok(FirstFeshbach {
        h0,
        reduced,
        indices: idx,
        report: fe.report,
        neumann_terms: ne.terms,
        neumann_tail: ne.tail_bound,
        neumann_discrepancy: discrepancy,
        warning,
        q_reduced,
        w0_norm,
    })
}

#[derive(Clone, Debug)]
pub struct IsospectralityProbe {
    pub z: Complex64,
    pub kernel_h: usize,
    pub kernel_f: usize,
    pub cond_h: f64,
    pub cond_f: f64,
    /// Relative residual of `H⁻¹ = Q F⁻¹ Q# + χ̄ H_χ̄⁻¹ χ̄` (NaN when singular).
    pub inverse_h: f64,
    /// Relative residual of `F⁻¹ = χ H⁻¹ χ + χ̄ T⁻¹ χ̄` (NaN when singular).
    pub inverse_f: f64,
    /// `max ‖H Q u‖` and `max ‖χ Q u − u‖` over an orthonormal basis of `ker F`.
    pub kernel_map: f64,
    pub kernel_roundtrip: f64,
}

#[derive(Clone, Debug, Default)]
pub struct IsospectralityReport {
    pub probes: Vec<IsospectralityProbe>,
}

impl IsospectralityReport {
    pub fn kernels_match(&self) -> bool {
        self.probes.iter().all(|p| p.kernel_h == p.kernel_f)
    }

    pub fn max_identity_residual(&self) -> f64 {
        self.probes
            .iter()
            .flat_map(|p| [p.inverse_h, p.inverse_f, p.kernel_map, p.kernel_roundtrip])
            .filter(|x| !x.is_nan())
            .fold(0.0, f64::max)
    }
}

fn condition(m: &CMat) -> f64 {
    let sv = m.clone().singular_values();
    let smax = sv.iter().fold(0.0_f64, |a, &b| a.max(b));
    let smin = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    smax / smin
}

/// Dimension of the kernel with singular-value threshold `1e−10·‖ref‖`.
pub fn kernel_dim(m: &CMat, reference: f64) -> usize {
    let sv = m.clone().singular_values();
    sv.iter().filter(|&&s| s <= 1e-10 * reference.max(f64::MIN_POSITIVE)).count()
}

pub fn isospectrality_suite(h: &CMat, t: &CMat, cut: &Cutoffs, probes: &[Complex64]) -> Result<IsospectralityReport> {
    let n = check_dims(h, t, cut)?;
    let mut rep = IsospectralityReport::default();
    for &z in probes {
        let hz = h - identity(n) * z;
        let tz = t - identity(n) * z;
        let fe = feshbach(&hz, &tz, cut)?;
        let href = opnorm(&hz);
        let kernel_h = kernel_dim(&hz, href);
        let kernel_f = kernel_dim(&fe.f, href.max(opnorm(&fe.f)));
        let (mut inverse_h, mut inverse_f) = (f64::NAN, f64::NAN);
        if kernel_h == 0 && kernel_f == 0 {
            if let (Some(hinv), Some(finv)) = (inverse(&hz), inverse(&fe.f)) {
                let lhs = &fe.q * &finv * &fe.q_sharp + &fe.bar_resolvent;
                inverse_h = opnorm(&(lhs - &hinv)) / opnorm(&hinv).max(1.0);
                let rb = cut.range();
                let (tinv, _, _) =
                    restricted_inverse(&rb, &tz, n).ok_or_else(|| Error::Pair("T singular on Ran χ̄".into()))?;
                let rhs = &cut.chi * &hinv * &cut.chi + &cut.chibar * tinv * &cut.chibar;
                inverse_f = opnorm(&(rhs - &finv)) / opnorm(&finv).max(1.0);
            }
        }
        let (mut kernel_map, mut kernel_roundtrip) = (0.0_f64, 0.0_f64);
        if kernel_f > 0 {
            let kf = nullspace(&fe.f, 1e-10 * href.max(opnorm(&fe.f)) / opnorm(&fe.f).max(f64::MIN_POSITIVE));
            for c in 0..kf.ncols() {
                let u = kf.column(c).into_owned();
                let qu = &fe.q * &u;
                kernel_map = kernel_map.max((&hz * &qu).norm() / href.max(1.0));
                kernel_roundtrip = kernel_roundtrip.max((&cut.chi * &qu - &u).norm());
            }
        }
        rep.probes.push(IsospectralityProbe {
            z,
            kernel_h,
            kernel_f,
            cond_h: condition(&hz),
            cond_f: condition(&fe.f),
            inverse_h,
            inverse_f,
            kernel_map,
            kernel_roundtrip,
        });
    }
    Ok(rep)
}

/// Seeded random Feshbach pair with a planted kernel of dimension `kernel`.
#[derive(Clone, Debug)]
pub struct RandomPair {
    pub h: CMat,
    pub t: CMat,
    pub cutoffs: Cutoffs,
    pub planted: usize,
}

/// Coordinates split into `χ = 1`, `0 < χ < 1` and `χ = 0`; `T` is diagonal, small on
/// the first group and of modulus in `[1, 2]` elsewhere, and `W` is small off the
/// planted kernel (supported in the first group).
pub fn random_pair(seed: u64, max_dim: usize) -> RandomPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(6..=max_dim.max(6));
    let na = rng.gen_range(2..=n / 3);
    let nb = rng.gen_range(1..=(n - na) / 2);
    let kernel = rng.gen_range(0..=2usize).min(na - 1);
    let mut chi = vec![0.0; n];
    for (i, c) in chi.iter_mut().enumerate() {
        *c = if i < na {
            1.0
        } else if i < na + nb {
            rng.gen_range(0.05..0.95)
        } else {
            0.0
        };
    }
    let cutoffs = Cutoffs::diagonal(&chi);
    let mut t = CMat::zeros(n, n);
    for i in 0..n {
        let v = if i < na {
            Complex64::from_polar(rng.gen_range(0.1..0.5), rng.gen_range(0.0..std::f64::consts::TAU))
        } else {
            Complex64::from_polar(rng.gen_range(1.0..2.0), rng.gen_range(-0.5..0.5))
        };
        t[(i, i)] = v;
    }
    let eps = 0.3 / (n as f64).sqrt();
    let w0 = CMat::from_fn(n, n, |_, _| c64(rng.gen_range(-eps..eps), rng.gen_range(-eps..eps)));
    let mut pi = CMat::zeros(n, n);
    if kernel > 0 {
        let u = CMat::from_fn(n, kernel, |i, _| if i < na { c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) } else { ZERO });
        let q = range_basis(&u, 1e-12);
        pi = &q * q.adjoint();
    }
    let tw = &t + &w0;
    let w = &w0 - &tw * &pi;
    RandomPair { h: &t + w, t, cutoffs, planted: kernel }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Fixture;
    use crate::linalg::diag_real;

    #[test]
    fn cutoff_invariants() {
        for rho in [1.0, 0.5, 0.25] {
            let c = CutoffSpec::new(rho).unwrap();
            for k in 0..=2000 {
                let r = 1.5 * rho * k as f64 / 2000.0;
                let (a, b) = (c.chi(r), c.chibar(r));
                assert!((a * a + b * b - 1.0).abs() < 1e-14);
                if r <= 0.75 * rho {
                    assert_eq!(a, 1.0);
                }
                if r >= rho {
                    assert_eq!(a, 0.0);
                }
            }
        }
        // χ itself is C¹ at both seams; χ̄ = sin(·) has a square-root onset only if σ' ≠ 0.
        let c = CutoffSpec::new(0.5).unwrap();
        assert!(c.seam_jump(1e-6) < 1e-4, "{}", c.seam_jump(1e-6));
    }

    #[test]
    fn schur_complement_example() {
        let (a, b, c, e) = (c64(1.0, 0.5), c64(0.3, 0.0), c64(-0.2, 0.1), c64(2.0, 0.0));
        let h = CMat::from_row_slice(2, 2, &[a, b, c, e]);
        let t = CMat::from_row_slice(2, 2, &[a, ZERO, ZERO, e]);
        let f = feshbach_map(&h, &t, &Cutoffs::diagonal(&[1.0, 0.0])).unwrap();
        assert!((f[(0, 0)] - (a - b * c / e)).norm() < 1e-15);
    }

    #[test]
    fn zero_interaction() {
        let t = diag_real(&[0.1, 0.5, 1.5, 2.0]);
        let cut = Cutoffs::diagonal(&[1.0, 0.6, 0.3, 0.0]);
        let fe = feshbach(&t, &t, &cut).unwrap();
        assert!((fe.f - &t).norm() < 1e-15);
        assert!((fe.q - &cut.chi).norm() < 1e-15);
        assert_eq!(fe.report.contraction_left, 0.0);
        let rep = isospectrality_suite(&t, &t, &cut, &[c64(0.3, 0.0)]).unwrap();
        assert!(rep.max_identity_residual() < 1e-12);
    }

    #[test]
    fn planted_kernels_and_identities() {
        for seed in 0..100 {
            let p = random_pair(seed, 40);
            let rep = isospectrality_suite(&p.h, &p.t, &p.cutoffs, &[ZERO, c64(0.05, -0.02)]).unwrap();
            assert_eq!(rep.probes[0].kernel_h, p.planted, "seed {seed}");
            assert!(rep.kernels_match(), "seed {seed}: {:?}", rep.probes);
            assert!(rep.max_identity_residual() < 1e-9, "seed {seed}: {:?}", rep.probes);
        }
    }

    #[test]
    fn dense_cutoffs_agree_with_diagonal() {
        let p = random_pair(3, 16);
        let n = p.h.nrows();
        let u = range_basis(&CMat::from_fn(n, n, |i, j| c64((i * j) as f64 % 7.0 - 3.0, (i + 2 * j) as f64 % 5.0)), 1e-12);
        let rot = |m: &CMat| u.adjoint() * m * &u;
        let dense = Cutoffs::from_matrices(rot(&p.cutoffs.chi), rot(&p.cutoffs.chibar)).unwrap();
        let f1 = rot(&feshbach_map(&p.h, &p.t, &p.cutoffs).unwrap());
        let f2 = feshbach_map(&rot(&p.h), &rot(&p.t), &dense).unwrap();
        assert!((f1 - f2).norm() < 1e-10);
    }

    #[test]
    fn neumann_matches_direct() {
        let p = random_pair(11, 30);
        let d = feshbach_map(&p.h, &p.t, &p.cutoffs).unwrap();
        let ne = neumann_feshbach(&p.h, &p.t, &p.cutoffs, 200, 1e-15).unwrap();
        assert!(ne.contraction < 1.0);
        assert!((d - ne.f).norm() < 1e-12);
    }

    #[test]
    fn first_feshbach_free_and_neumann() {
        let spec = ModelSpec::from_config(&Fixture::Triv.config()).unwrap();
        let basis = spec.full_basis().unwrap();
        let z = c64(0.02, 0.01);
        let free = first_feshbach(&spec.with_coupling(0.0), c64(0.0, 0.0), z, &basis).unwrap();
        assert!(free.w0_norm < 1e-15);
        let ff = first_feshbach(&spec, c64(0.0, 0.0), z, &basis).unwrap();
        assert!(ff.report.pass);
        assert!(ff.neumann_terms <= 30);
        assert!(ff.neumann_discrepancy < 1e-10, "{}", ff.neumann_discrepancy);
    }

    #[test]
    fn first_feshbach_symmetry_and_reflection() {
        let spec = ModelSpec::from_config(&Fixture::Pauli.config()).unwrap();
        let basis = spec.full_basis().unwrap();
        let (s, z) = (c64(0.03, 0.02), c64(0.01, -0.02));
        let ff = first_feshbach(&spec, s, z, &basis).unwrap();
        let b = spec.atomic_frame().unwrap().columns(0, spec.d).into_owned();
        let red = ff.reduced.as_ref();
        for gen in &spec.generators {
            let r = crate::symmetry::SymmetryOp::new(gen.atomic.clone(), gen.antiunitary).unwrap().restrict(&b, 1e-10).unwrap();
            let op = crate::symmetry::SymmetryOp::factored(r.matrix, gen.fock, gen.antiunitary, red).unwrap();
            assert!(crate::symmetry::is_symmetry_of(&op, &ff.h0.mat, 1e-11).0);
        }
        let fc = first_feshbach(&spec, s.conj(), z.conj(), &basis).unwrap();
        assert!((fc.h0.mat - ff.h0.mat.adjoint()).norm() < 1e-12);
    }
}
