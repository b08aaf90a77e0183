//! Generalized spin-boson models `H_g(s) = H_at(s)⊗1 + 1⊗H_f + gW(s)` with
//! `W(s) = a(G_{1,s̄}) + a*(G_{2,s})`, their hypotheses, and Riesz projections.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::config::{matrix_from_json, Dispersion, ModelConfig, Profile};
use crate::error::{Error, Result};
use crate::fock::{build_fock_basis, creation_op, dilation, field_energy, lowering_op, FockBasis, ModeGrid, OperatorMatrix};
use crate::linalg::{c64, conj, eigenvalues, identity, inverse, nullspace, opnorm, CMat};
use crate::symmetry::{is_irreducible, is_symmetry_of, transformation_function, FockAction, SymmetryGroup, SymmetryOp};

/// Matrix polynomial `Σ_k s^k C_k`.
#[derive(Clone, Debug)]
pub struct MatrixPoly {
    pub coeffs: Vec<CMat>,
}

impl MatrixPoly {
    pub fn constant(m: CMat) -> Self {
        Self { coeffs: vec![m] }
    }

    pub fn dim(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn eval(&self, s: Complex64) -> CMat {
        let mut acc = CMat::zeros(self.dim(), self.dim());
        for c in self.coeffs.iter().rev() {
            acc = acc * s + c;
        }
        acc
    }

    /// `P(s̄)*`, which is again a polynomial in `s`.
    pub fn eval_reflected_adjoint(&self, s: Complex64) -> CMat {
        self.eval(s.conj()).adjoint()
    }

    pub fn approx_eq(&self, other: &MatrixPoly, tol: f64) -> bool {
        let n = self.coeffs.len().max(other.coeffs.len());
        (0..n).all(|k| {
            let z = CMat::zeros(self.dim(), self.dim());
            let a = self.coeffs.get(k).unwrap_or(&z);
            let b = other.coeffs.get(k).unwrap_or(&z);
            (a - b).norm() <= tol
        })
    }
}

#[derive(Clone, Debug)]
pub struct SymmetryGenerator {
    pub atomic: CMat,
    pub fock: FockAction,
    pub antiunitary: bool,
}

#[derive(Clone, Debug)]
pub struct SpectralWindow {
    pub center: Complex64,
    pub contour_radius: f64,
    pub s_radius: f64,
    pub z_radius: f64,
}

#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub name: String,
    pub d_at: usize,
    pub d: usize,
    pub h_at: MatrixPoly,
    pub g1: MatrixPoly,
    pub g2: MatrixPoly,
    pub profile: Profile,
    pub g: f64,
    pub mu: f64,
    pub polarization: f64,
    pub s0: Complex64,
    pub grid: ModeGrid,
    pub n_max: u32,
    pub e_cut: f64,
    pub window: SpectralWindow,
    pub generators: Vec<SymmetryGenerator>,
    pub reflection_symmetric: bool,
    pub j_conj: Option<CMat>,
}

fn poly_from_json(list: &[crate::config::MatrixJson], dim: usize, what: &str) -> Result<MatrixPoly> {
    if list.is_empty() {
        return Err(Error::Config(format!("{what}: at least one coefficient is required")));
    }
    let coeffs = list
        .iter()
        .enumerate()
        .map(|(k, m)| matrix_from_json(m, dim, &format!("{what}[{k}]")))
        .collect::<Result<Vec<_>>>()?;
    Ok(MatrixPoly { coeffs })
}

impl ModelSpec {
    pub fn from_config(cfg: &ModelConfig) -> Result<Self> {
        let d_at = cfg.atomic_dim;
        if d_at == 0 || cfg.multiplicity == 0 || cfg.multiplicity > d_at {
            return Err(Error::Config("need 1 ≤ multiplicity ≤ atomic_dim".into()));
        }
        if let Dispersion::Massive { .. } = cfg.dispersion {
            return Err(Error::Config("massive dispersion is reserved and not implemented".into()));
        }
        if !(cfg.window.z_radius > 0.0 && cfg.window.z_radius < 0.5) {
            return Err(Error::Config("window.z_radius must lie in (0, 1/2)".into()));
        }
        if !(cfg.window.contour_radius > 0.0 && cfg.window.s_radius >= 0.0) {
            return Err(Error::Config("window radii must be positive".into()));
        }
        if cfg.coupling_strength < 0.0 {
            return Err(Error::Config("coupling_strength must be non-negative".into()));
        }
        if !(cfg.infrared_exponent > 0.0) {
            return Err(Error::Config("infrared_exponent must be positive".into()));
        }
        if !(cfg.polarization_factor > 0.0) {
            return Err(Error::Config("polarization_factor must be positive".into()));
        }
        let grid = ModeGrid::new(cfg.grid.ratio, cfg.grid.levels)?;
        let generators = cfg
            .symmetry
            .iter()
            .enumerate()
            .map(|(k, g)| {
                let atomic = matrix_from_json(&g.atomic, d_at, &format!("symmetry[{k}]"))?;
                SymmetryOp::new(atomic.clone(), g.antiunitary)?;
                Ok(SymmetryGenerator { atomic, fock: g.fock, antiunitary: g.antiunitary })
            })
            .collect::<Result<Vec<_>>>()?;
        let j_conj = match &cfg.complex_selfadjoint {
            Some(m) => {
                let j = matrix_from_json(m, d_at, "complex_selfadjoint")?;
                SymmetryOp::antiunitary(j.clone())?;
                Some(j)
            }
            None => None,
        };
        let spec = Self {
            name: cfg.name.clone(),
            d_at,
            d: cfg.multiplicity,
            h_at: poly_from_json(&cfg.atomic_hamiltonian, d_at, "atomic_hamiltonian")?,
            g1: poly_from_json(&cfg.coupling.annihilation, d_at, "coupling.annihilation")?,
            g2: poly_from_json(&cfg.coupling.creation, d_at, "coupling.creation")?,
            profile: cfg.coupling.profile.clone(),
            g: cfg.coupling_strength,
            mu: cfg.infrared_exponent,
            polarization: cfg.polarization_factor,
            s0: c64(cfg.reference_point[0], cfg.reference_point[1]),
            grid,
            n_max: cfg.truncation.max_photons,
            e_cut: cfg.truncation.energy_cutoff,
            window: SpectralWindow {
                center: c64(cfg.atomic_energy[0], cfg.atomic_energy[1]),
                contour_radius: cfg.window.contour_radius,
                s_radius: cfg.window.s_radius,
                z_radius: cfg.window.z_radius,
            },
            generators,
            reflection_symmetric: cfg.reflection_symmetric,
            j_conj,
        };
        coupling_norm_mu(&spec.profile, spec.mu, spec.polarization)?;
        if spec.e_cut < 1.0 {
            return Err(Error::Config("energy_cutoff must be at least 1 to contain the reduced space".into()));
        }
        Ok(spec)
    }

    pub fn with_coupling(&self, g: f64) -> Self {
        let mut s = self.clone();
        s.g = g;
        s
    }

    pub fn full_basis(&self) -> Result<Arc<FockBasis>> {
        Ok(Arc::new(build_fock_basis(&self.grid, self.n_max, self.e_cut, self.d_at)?))
    }

    /// `g_j = (pol · ∫_shell |g(r)|² 4π r² dr)^{1/2}`.
    pub fn shell_amplitudes(&self) -> Result<Vec<f64>> {
        (0..self.grid.levels()).map(|j| shell_amplitude(&self.profile, &self.grid, j, self.polarization)).collect()
    }

    pub fn check_region(&self, s: Complex64) -> Result<()> {
        if (s - self.s0).norm() > self.window.s_radius * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::Region(format!("|s − s₀| = {:.3e} > {:.3e}", (s - self.s0).norm(), self.window.s_radius)));
        }
        Ok(())
    }

    /// Symmetry group on `C^{D_at} ⊗ F` for a given Fock basis.
    pub fn group_on(&self, basis: &FockBasis) -> Result<SymmetryGroup> {
        let gens = self
            .generators
            .iter()
            .map(|g| SymmetryOp::factored(g.atomic.clone(), g.fock, g.antiunitary, basis))
            .collect::<Result<Vec<_>>>()?;
        SymmetryGroup::generate(basis.dim(), gens)
    }

    /// Symmetry group restricted to `Ran P_at(s₀)` (frame coordinates) on a level basis.
    pub fn reduced_group_on(&self, basis: &FockBasis) -> Result<SymmetryGroup> {
        let b = self.atomic_frame()?.columns(0, self.d).into_owned();
        let gens = self
            .generators
            .iter()
            .map(|g| {
                let r = SymmetryOp::new(g.atomic.clone(), g.antiunitary)?.restrict(&b, 1e-10)?;
                SymmetryOp::factored(r.matrix, g.fock, g.antiunitary, basis)
            })
            .collect::<Result<Vec<_>>>()?;
        SymmetryGroup::generate(basis.dim(), gens)
    }

    /// Orthonormal frame `[B | B⊥]` adapted to `Ran P_at(s₀)`.
    pub fn atomic_frame(&self) -> Result<CMat> {
        let h0 = self.h_at.eval(self.s0);
        if opnorm(&(&h0 * h0.adjoint() - h0.adjoint() * &h0)) > 1e-10 * opnorm(&h0).max(1.0) {
            return Err(Error::Config("H_at(s₀) must be normal".into()));
        }
        let p0 = spectral_projection(&h0, self.window.center, self.window.contour_radius, 64)?;
        let b = gram_schmidt(&p0);
        let bp = gram_schmidt(&(identity(self.d_at) - &p0));
        if b.ncols() != self.d || bp.ncols() != self.d_at - self.d {
            return Err(Error::Config(format!(
                "Riesz projection at s₀ has rank {} but multiplicity {} was declared",
                b.ncols(),
                self.d
            )));
        }
        let mut w = CMat::zeros(self.d_at, self.d_at);
        w.view_mut((0, 0), (self.d_at, self.d)).copy_from(&b);
        w.view_mut((0, self.d), (self.d_at, self.d_at - self.d)).copy_from(&bp);
        Ok(w)
    }
}

/// Column-wise Gram–Schmidt keeping columns with non-negligible residual.
fn gram_schmidt(m: &CMat) -> CMat {
    let mut cols: Vec<crate::linalg::CVec> = Vec::new();
    let scale = m.norm().max(1.0);
    for j in 0..m.ncols() {
        let mut v = m.column(j).into_owned();
        for _ in 0..2 {
            for q in &cols {
                let p = q.dotc(&v);
                v -= q * p;
            }
        }
        let n = v.norm();
        if n > 1e-8 * scale {
            cols.push(v / c64(n, 0.0));
        }
    }
    crate::linalg::columns(&cols, m.nrows())
}

/// `∫_a^b r^α e^{−c r} dr` via power series, `α > −1`.
fn power_exp_integral(alpha: f64, c: f64, a: f64, b: f64) -> f64 {
    let prim = |x: f64| -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        let mut term = 1.0;
        let mut sum = 0.0;
        for n in 0..400 {
            let t = term * x.powf(alpha + n as f64 + 1.0) / (alpha + n as f64 + 1.0);
            sum += t;
            if t.abs() < 1e-18 * sum.abs().max(1e-300) && n > 5 {
                break;
            }
            term *= -c / (n as f64 + 1.0);
        }
        sum
    };
    prim(b) - prim(a)
}

/// `∫_a^b |g(r)|² r^β dr` for the profile tags.
fn profile_moment(profile: &Profile, beta: f64, a: f64, b: f64) -> Result<f64> {
    match *profile {
        Profile::Zero => Ok(0.0),
        Profile::Power { exponent, amplitude } => {
            let e = 2.0 * exponent + beta + 1.0;
            if e <= 0.0 && a == 0.0 {
                return Err(Error::Infrared(format!("∫ r^{} dr diverges at r = 0", e - 1.0)));
            }
            let v = if e.abs() < 1e-14 { (b / a).ln() } else { (b.powf(e) - a.powf(e)) / e };
            Ok(amplitude * amplitude * v)
        }
        Profile::PowerExp { exponent, scale, amplitude } => {
            let alpha = 2.0 * exponent + beta;
            if alpha <= -1.0 && a == 0.0 {
                return Err(Error::Infrared(format!("∫ r^{alpha} e^(−2r/σ) dr diverges at r = 0")));
            }
            if !(scale > 0.0) {
                return Err(Error::Config("profile scale must be positive".into()));
            }
            Ok(amplitude * amplitude * power_exp_integral(alpha, 2.0 / scale, a, b))
        }
    }
}

/// `‖g‖_μ = (pol · 4π ∫₀¹ |g(r)|² r^{−2μ} dr)^{1/2}`; the matrix factor of a
/// coupling `g(|k|)·B` contributes `‖B‖` separately.
pub fn coupling_norm_mu(profile: &Profile, mu: f64, polarization: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::Config("μ must be positive".into()));
    }
    let v = profile_moment(profile, -2.0 * mu, 0.0, 1.0)
        .map_err(|e| match e {
            Error::Infrared(m) => Error::Infrared(format!("‖G‖_μ diverges for μ = {mu}: {m}")),
            other => other,
        })?;
    Ok((polarization * 4.0 * PI * v).sqrt())
}

/// Discrete amplitude of shell `j`.
pub fn shell_amplitude(profile: &Profile, grid: &ModeGrid, j: usize, polarization: f64) -> Result<f64> {
    let (lo, hi) = grid.shell_bounds(j);
    Ok((polarization * 4.0 * PI * profile_moment(profile, 2.0, lo, hi)?).sqrt())
}

/// `∫_shell |g|² dk / |k|^{2+2μ}` restricted to shell `j` (kernel-norm weight source).
pub fn shell_mu_moment(profile: &Profile, grid: &ModeGrid, j: usize, mu: f64, polarization: f64) -> Result<f64> {
    let (lo, hi) = grid.shell_bounds(j);
    Ok(polarization * 4.0 * PI * profile_moment(profile, -2.0 * mu, lo, hi)?)
}

/// Riesz projection `−(2πi)⁻¹ ∮ (H − z)⁻¹ dz` by the trapezoidal rule.
pub fn spectral_projection(h: &CMat, center: Complex64, radius: f64, nodes: usize) -> Result<CMat> {
    let n = h.nrows();
    let ev = eigenvalues(h);
    let scale = opnorm(h).max(1.0);
    for &l in &ev {
        let r = (l - center).norm();
        if (r - radius).abs() <= 0.1 * radius {
            return Err(Error::Projection(format!("eigenvalue {l} within 10% of the contour")));
        }
    }
    let enclosed = ev.iter().filter(|l| (*l - center).norm() < radius).count();
    let mut p = CMat::zeros(n, n);
    for k in 0..nodes {
        let e = Complex64::from_polar(1.0, 2.0 * PI * (k as f64 + 0.5) / nodes as f64);
        let z = center + e * radius;
        let res = inverse(&(identity(n) * z - h)).ok_or_else(|| Error::Projection("singular resolvent".into()))?;
        p += res * (e * radius / nodes as f64);
    }
    let idem = opnorm(&(&p * &p - &p));
    if idem > 1e-10 * scale {
        return Err(Error::Projection(format!("quadrature not converged (‖P²−P‖ = {idem:.2e})")));
    }
    let rank = p.trace().re.round() as usize;
    if rank != enclosed {
        return Err(Error::Projection(format!("rank {rank} differs from enclosed count {enclosed}")));
    }
    Ok(p)
}

/// The model evaluated at `s` in the adapted frame.
#[derive(Clone, Debug)]
pub struct ModelPoint {
    pub s: Complex64,
    pub g: f64,
    pub d: usize,
    /// `H_at(s)` in frame coordinates; `P_at` is the projection onto the first `d` coordinates.
    pub h_at: CMat,
    /// Coefficients `A_j` of `Σ A_j ⊗ a_j` (coupling strength included).
    pub ann: Vec<CMat>,
    /// Coefficients `C_j` of `Σ C_j ⊗ a_j*` (coupling strength included).
    pub cre: Vec<CMat>,
    /// Frame-to-raw map `U(s)·[B | B⊥]`.
    pub to_raw: CMat,
    pub from_raw: CMat,
    pub e_at: Complex64,
    /// Whether the transformation function was needed.
    pub transported: bool,
    /// `‖P_at H̃_at P̄_at‖ + ‖P̄_at H̃_at P_at‖` after conjugation.
    pub block_residual: f64,
}

/// Number of path samples used for the transformation function.
fn transport_samples(dist: f64) -> usize {
    let h_max = 2e-3;
    let steps = ((dist / (2.0 * h_max)).ceil() as usize).max(2);
    2 * steps + 1
}

pub fn evaluate(spec: &ModelSpec, s: Complex64) -> Result<ModelPoint> {
    spec.check_region(s)?;
    let w = spec.atomic_frame()?;
    let h_raw = spec.h_at.eval(s);
    let p0 = spectral_projection(&spec.h_at.eval(spec.s0), spec.window.center, spec.window.contour_radius, 64)?;
    let ps = spectral_projection(&h_raw, spec.window.center, spec.window.contour_radius, 64)?;
    let (u, v, transported) = if opnorm(&(&ps - &p0)) <= 1e-13 {
        (identity(spec.d_at), identity(spec.d_at), false)
    } else {
        let n = transport_samples((s - spec.s0).norm());
        let h = (s - spec.s0) / (n - 1) as f64;
        let samples = (0..n)
            .map(|k| spectral_projection(&spec.h_at.eval(spec.s0 + h * k as f64), spec.window.center, spec.window.contour_radius, 64))
            .collect::<Result<Vec<_>>>()?;
        let t = transformation_function(&samples, h)?;
        (t.u.last().unwrap().clone(), t.v.last().unwrap().clone(), true)
    };
    let to_raw = &u * &w;
    let from_raw = w.adjoint() * &v;
    let conjugate = |m: &CMat| &from_raw * m * &to_raw;
    let h_at = conjugate(&h_raw);
    let d = spec.d;
    let n = spec.d_at;
    let block_residual = if n > d {
        h_at.view((0, d), (d, n - d)).norm() + h_at.view((d, 0), (n - d, d)).norm()
    } else {
        0.0
    };
    let e_at = h_at.view((0, 0), (d, d)).trace() / d as f64;
    let amps = spec.shell_amplitudes()?;
    let a1 = spec.g1.eval_reflected_adjoint(s);
    let c2 = spec.g2.eval(s);
    let ann = amps.iter().map(|&gj| conjugate(&(&a1 * c64(spec.g * gj, 0.0)))).collect();
    let cre = amps.iter().map(|&gj| conjugate(&(&c2 * c64(spec.g * gj, 0.0)))).collect();
    Ok(ModelPoint { s, g: spec.g, d, h_at, ann, cre, to_raw, from_raw, e_at, transported, block_residual })
}

/// `H_at⊗1 + 1⊗H_f + Σ_j (A_j⊗a_j + C_j⊗a_j*)` on a Fock basis.
pub fn assemble(h_at: &CMat, ann: &[CMat], cre: &[CMat], basis: &Arc<FockBasis>) -> Result<CMat> {
    let f = basis.len();
    let mut m = h_at.kronecker(&identity(f)) + field_energy(basis).mat;
    m += lowering_op(basis, ann)?.mat;
    m += creation_op(basis, cre)?.mat;
    Ok(m)
}

impl ModelPoint {
    /// `H_g(s)` in frame coordinates on `basis`.
    pub fn hamiltonian(&self, basis: &Arc<FockBasis>) -> Result<CMat> {
        assemble(&self.h_at, &self.ann, &self.cre, basis)
    }

    /// Map a frame vector on `C^{D_at} ⊗ F` back to raw coordinates.
    pub fn vector_to_raw(&self, v: &crate::linalg::CVec, fock_len: usize) -> crate::linalg::CVec {
        self.to_raw.kronecker(&identity(fock_len)) * v
    }
}

/// `H_g(s)` in raw coordinates.
pub fn build_hamiltonian(spec: &ModelSpec, s: Complex64, g: f64, basis: &Arc<FockBasis>) -> Result<OperatorMatrix> {
    spec.check_region(s)?;
    if basis.atomic_dim() != spec.d_at || basis.modes() != spec.grid.levels() {
        return Err(Error::Dimension("basis does not match the model".into()));
    }
    let amps = spec.shell_amplitudes()?;
    let a1 = spec.g1.eval_reflected_adjoint(s);
    let c2 = spec.g2.eval(s);
    let ann: Vec<CMat> = amps.iter().map(|&gj| &a1 * c64(g * gj, 0.0)).collect();
    let cre: Vec<CMat> = amps.iter().map(|&gj| &c2 * c64(g * gj, 0.0)).collect();
    let m = assemble(&spec.h_at.eval(s), &ann, &cre, basis)?;
    let op = OperatorMatrix::new(m, basis.clone())?;
    Ok(if s.im == 0.0 && spec.reflection_symmetric { op.hermitian() } else { op })
}

#[derive(Clone, Debug)]
pub struct HypothesisItem {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub note: String,
}

#[derive(Clone, Debug, Default)]
pub struct HypothesisReport {
    pub items: Vec<HypothesisItem>,
}

impl HypothesisReport {
    fn push(&mut self, name: &str, pass: bool, value: f64, note: impl Into<String>) {
        self.items.push(HypothesisItem { name: name.into(), pass, value, note: note.into() });
    }

    pub fn all_pass(&self) -> bool {
        self.items.iter().all(|i| i.pass)
    }

    pub fn get(&self, name: &str) -> Option<&HypothesisItem> {
        self.items.iter().find(|i| i.name == name)
    }
}

fn sample_points(spec: &ModelSpec) -> Vec<Complex64> {
    let r = spec.window.s_radius;
    let mut v = vec![spec.s0];
    if r > 0.0 {
        for k in 0..4 {
            v.push(spec.s0 + Complex64::from_polar(r, PI * 0.5 * k as f64 + 0.3));
        }
        v.push(spec.s0 + r);
        v.push(spec.s0 - r);
    }
    v
}

/// Check the model hypotheses on sampled parameters; never fails, only reports.
pub fn verify_hypotheses(spec: &ModelSpec) -> HypothesisReport {
    let mut rep = HypothesisReport::default();
    let samples = sample_points(spec);

    match coupling_norm_mu(&spec.profile, spec.mu, spec.polarization) {
        Ok(norm) => {
            let bmax = samples
                .iter()
                .map(|&s| opnorm(&spec.g1.eval(s)).max(opnorm(&spec.g2.eval(s))))
                .fold(0.0, f64::max);
            let v = norm * bmax;
            rep.push("coupling_norm", v.is_finite(), v, format!("‖g‖_μ = {norm:.6e}, polarization factor {}", spec.polarization));
        }
        Err(e) => rep.push("coupling_norm", false, f64::INFINITY, e.to_string()),
    }
    rep.push(
        "analytic_family",
        true,
        0.0,
        "matrix polynomials in s are entire; Kato analyticity is certified by construction only",
    );

    let h0 = spec.h_at.eval(spec.s0);
    match spectral_projection(&h0, spec.window.center, spec.window.contour_radius, 64) {
        Ok(p0) => {
            let alg = p0.trace().re.round() as usize;
            let geo = nullspace(&(&h0 - identity(spec.d_at) * spec.window.center), 1e-10).ncols();
            let ok = alg == spec.d && geo == spec.d;
            rep.push("non_defective", ok, (alg as f64) - (geo as f64), format!("algebraic {alg}, geometric {geo}, declared {}", spec.d));
            let others = eigenvalues(&h0)
                .into_iter()
                .map(|l| (l - spec.window.center).norm())
                .filter(|&r| r > spec.window.contour_radius)
                .fold(f64::INFINITY, f64::min);
            rep.push(
                "window.gap",
                others > 1.1 * spec.window.contour_radius,
                others,
                "distance from E_at(s₀) to the rest of σ(H_at(s₀))",
            );
        }
        Err(e) => rep.push("non_defective", false, f64::INFINITY, e.to_string()),
    }

    symmetry_items(spec, &samples, &mut rep);
    resolvent_check(spec, &samples, &mut rep);

    if spec.reflection_symmetric {
        let g_eq = spec.g1.approx_eq(&spec.g2, 1e-14);
        let r = samples
            .iter()
            .map(|&s| opnorm(&(spec.h_at.eval(s).adjoint() - spec.h_at.eval(s.conj()))))
            .fold(0.0, f64::max);
        rep.push("reflection", g_eq && r <= 1e-12, r, if g_eq { "G₁ = G₂" } else { "G₁ ≠ G₂" });
    }

    let mut pmax: f64 = 0.0;
    let mut perr = None;
    for &s in &samples {
        match (
            spectral_projection(&spec.h_at.eval(s), spec.window.center, spec.window.contour_radius, 64),
            spectral_projection(&h0, spec.window.center, spec.window.contour_radius, 64),
        ) {
            (Ok(a), Ok(b)) => pmax = pmax.max(opnorm(&(a - b))),
            (Err(e), _) | (_, Err(e)) => perr = Some(e.to_string()),
        }
    }
    match perr {
        Some(e) => rep.push("projection", false, pmax, e),
        None => rep.push(
            "projection",
            true,
            pmax,
            if pmax > 1e-13 { "P_at(s) varies; transformation-function preprocessing applied" } else { "P_at(s) constant" },
        ),
    }

    if let Some(j) = &spec.j_conj {
        conjugation_check(spec, j, &samples, &mut rep);
    }
    rep
}

fn symmetry_items(spec: &ModelSpec, samples: &[Complex64], rep: &mut HypothesisReport) {
    if spec.d == 1 && spec.generators.is_empty() {
        rep.push("irreducible", true, 0.0, "d = 1: no symmetry needed");
        return;
    }
    let basis = match spec.full_basis() {
        Ok(b) => b,
        Err(e) => return rep.push("symmetry", false, f64::INFINITY, e.to_string()),
    };
    let group = match spec.group_on(&basis) {
        Ok(g) => g,
        Err(e) => return rep.push("symmetry", false, f64::INFINITY, e.to_string()),
    };
    let mut worst: f64 = 0.0;
    for &s in samples {
        let has_anti = spec.generators.iter().any(|g| g.antiunitary);
        if has_anti && s.im != 0.0 {
            continue;
        }
        if let Ok(h) = build_hamiltonian(spec, s, spec.g, &basis) {
            for e in &group.elements {
                worst = worst.max(is_symmetry_of(e, &h.mat, 0.0).1);
            }
        }
    }
    rep.push("symmetry", worst <= 1e-12, worst, format!("{} group elements", group.len()));

    let vac_ok = spec.generators.iter().all(|g| g.fock.sign(0) == 1.0);
    rep.push("vacuum_preserving", vac_ok, 0.0, "S₂Ω = Ω");
    let dil = dilation_commutation_residual(spec);
    rep.push("dilation_commuting", dil <= 1e-12, dil, "checked on the truncated low sector only");

    let irreducible = spec.atomic_frame().and_then(|w| {
        let b = w.columns(0, spec.d).into_owned();
        let gens = spec
            .generators
            .iter()
            .map(|g| SymmetryOp::new(g.atomic.clone(), g.antiunitary)?.restrict(&b, 1e-10))
            .collect::<Result<Vec<_>>>()?;
        if gens.is_empty() {
            return Ok(spec.d == 1);
        }
        is_irreducible(&gens, spec.d)
    });
    match irreducible {
        Ok(ok) => rep.push("irreducible", ok, 0.0, "Hermitian commutant on Ran P_at(s₀)"),
        Err(e) => rep.push("irreducible", false, f64::INFINITY, e.to_string()),
    }
}

/// `max ‖S Γ − Γ S‖` on the low sector of the reduced basis.
pub fn dilation_commutation_residual(spec: &ModelSpec) -> f64 {
    let basis = match build_fock_basis(&spec.grid, spec.n_max, 1.0, 1) {
        Ok(b) => b,
        Err(_) => return f64::INFINITY,
    };
    let gamma = match dilation(&basis, spec.grid.ratio()) {
        Ok(g) => g,
        Err(_) => return f64::INFINITY,
    };
    let mut worst: f64 = 0.0;
    for g in &spec.generators {
        for &(s, t) in &gamma.pairs {
            let lhs = g.fock.sign(basis.photon_number(s));
            let rhs = g.fock.sign(basis.photon_number(t));
            worst = worst.max((lhs - rhs).abs());
        }
    }
    worst
}

fn resolvent_check(spec: &ModelSpec, samples: &[Complex64], rep: &mut HypothesisReport) {
    let n = spec.d_at;
    let mut qs: Vec<f64> = vec![0.0];
    qs.extend((-6..=6).map(|k| 2f64.powi(k)));
    let mut worst: f64 = 0.0;
    let mut err = None;
    for &s in samples {
        let h = spec.h_at.eval(s);
        let p = match spectral_projection(&h, spec.window.center, spec.window.contour_radius, 64) {
            Ok(p) => p,
            Err(e) => {
                err = Some(e.to_string());
                continue;
            }
        };
        let pbar = identity(n) - &p;
        let e_at = (&h * &p).trace() / spec.d as f64;
        let q_basis = gram_schmidt(&pbar);
        if q_basis.ncols() == 0 {
            continue;
        }
        worst = worst.max(opnorm(&pbar));
        let m_red = q_basis.adjoint() * &h * &q_basis;
        let k = m_red.nrows();
        let lift = q_basis.adjoint() * &pbar;
        let zs: Vec<Complex64> = std::iter::once(e_at)
            .chain((0..8).map(|k| e_at + Complex64::from_polar(spec.window.z_radius, PI * k as f64 / 4.0)))
            .collect();
        for z in zs {
            for &q in &qs {
                let m = &m_red - identity(k) * (z - q);
                match inverse(&m) {
                    Some(r) => worst = worst.max((q + 1.0) * opnorm(&(&q_basis * r * &lift))),
                    None => worst = f64::INFINITY,
                }
            }
        }
    }
    match err {
        Some(e) => rep.push("reduced_resolvent", false, worst, e),
        None => rep.push("reduced_resolvent", worst.is_finite() && worst < 1e8, worst, "max over q-grid and the q→∞ limit"),
    }
}

fn conjugation_check(spec: &ModelSpec, j: &CMat, samples: &[Complex64], rep: &mut HypothesisReport) {
    let basis = match spec.full_basis() {
        Ok(b) => b,
        Err(e) => return rep.push("complex_selfadjoint", false, f64::INFINITY, e.to_string()),
    };
    let jfull = j.kronecker(&identity(basis.len()));
    let mut worst: f64 = 0.0;
    for &s in samples {
        if let Ok(h) = build_hamiltonian(spec, s, spec.g, &basis) {
            let lhs = &jfull * conj(&h.mat) * jfull.adjoint();
            worst = worst.max(opnorm(&(lhs - h.mat.adjoint())) / opnorm(&h.mat).max(1.0));
        }
    }
    rep.push("complex_selfadjoint", worst <= 1e-12, worst, "𝒥 H 𝒥⁻¹ = H*");
    let form = spec.atomic_frame().map(|w| {
        let b = w.columns(0, spec.d).into_owned();
        let nform = b.adjoint() * j * conj(&b);
        nform.clone().singular_values().iter().fold(f64::INFINITY, |a, &x| a.min(x))
    });
    match form {
        Ok(smin) => rep.push("nondegenerate", smin > 1e-10, smin, "smallest singular value of ⟨v, 𝒥w⟩ on V"),
        Err(e) => rep.push("nondegenerate", false, 0.0, e.to_string()),
    }
}

/// Eigen-decomposition-free check that `g = 0` spectra are Minkowski sums.
pub fn free_spectrum(spec: &ModelSpec, s: Complex64, basis: &FockBasis) -> Vec<Complex64> {
    let at = eigenvalues(&spec.h_at.eval(s));
    let mut out = Vec::new();
    for l in at {
        for &e in basis.energies() {
            out.push(l + e);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Fixture;
    use crate::linalg::diag_real;

    fn spec(f: Fixture) -> ModelSpec {
        ModelSpec::from_config(&f.config()).unwrap()
    }

    #[test]
    fn coupling_norm_examples() {
        let p = Profile::Power { exponent: 1.0, amplitude: 1.0 };
        let n = coupling_norm_mu(&p, 0.5, 1.0).unwrap();
        assert!((n * n - 6.283185307179586).abs() < 1e-12);
        assert!(matches!(coupling_norm_mu(&p, 1.5, 1.0), Err(Error::Infrared(_))));
        assert!(matches!(coupling_norm_mu(&p, 2.0, 1.0), Err(Error::Infrared(_))));
        assert_eq!(coupling_norm_mu(&Profile::Zero, 0.5, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn coupling_norm_quadrature_crosscheck() {
        // Composite Simpson on r^{2-2μ} r^{... } with an exponential factor.
        let p = Profile::PowerExp { exponent: 1.0, scale: 2.0, amplitude: 1.0 };
        let mu = 0.5;
        let n = 20000;
        let f = |r: f64| r.powf(2.0 - 2.0 * mu) * (-r).exp();
        let h = 1.0 / n as f64;
        let mut s = f(0.0) + f(1.0);
        for k in 1..n {
            s += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        let quad = 4.0 * PI * s * h / 3.0;
        let v = coupling_norm_mu(&p, mu, 1.0).unwrap().powi(2);
        assert!((v - quad).abs() < 1e-10, "{v} vs {quad}");
    }

    #[test]
    fn shell_amplitudes_sum_to_ball_integral() {
        let s = spec(Fixture::Triv);
        let total: f64 = s.shell_amplitudes().unwrap().iter().map(|g| g * g).sum();
        // 4π ∫_{ρ^J}^1 r^4 dr
        let exact = 4.0 * PI * (1.0 - 0.5f64.powi(40)) / 5.0;
        assert!((total - exact).abs() < 1e-12);
    }

    #[test]
    fn projection_examples() {
        let h = diag_real(&[0.0, 0.0, 1.0]);
        let p = spectral_projection(&h, c64(0.0, 0.0), 0.5, 64).unwrap();
        assert!((p - diag_real(&[1.0, 1.0, 0.0])).norm() < 1e-12);
        let h = CMat::from_row_slice(2, 2, &[c64(0.1, 0.0), c64(0.3, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)]);
        let p64 = spectral_projection(&h, c64(0.0, 0.0), 0.5, 64).unwrap();
        assert!((&p64 * &p64 - &p64).norm() < 1e-12);
        let hp = spec(Fixture::Pauli).h_at.eval(c64(0.05, 0.0));
        let p16 = spectral_projection(&hp, c64(0.0, 0.0), 0.1, 16).unwrap();
        let p32 = spectral_projection(&hp, c64(0.0, 0.0), 0.1, 32).unwrap();
        assert!((p16 - p32).norm() < 1e-10);
        assert!(spectral_projection(&h, c64(0.0, 0.0), 0.1, 16).is_err());
    }

    #[test]
    fn pauli_rank_constant_along_path() {
        let s = spec(Fixture::Pauli);
        for k in 0..=10 {
            let t = c64(-0.1 + 0.02 * k as f64, 0.0);
            let p = spectral_projection(&s.h_at.eval(t), c64(0.0, 0.0), 0.25, 32).unwrap();
            assert_eq!(p.trace().re.round() as usize, 2);
        }
    }

    #[test]
    fn free_hamiltonian_is_minkowski_sum() {
        let s = spec(Fixture::Pauli);
        let b = s.full_basis().unwrap();
        let h = build_hamiltonian(&s, c64(0.03, 0.0), 0.0, &b).unwrap();
        let mut a: Vec<f64> = eigenvalues(&h.mat).iter().map(|z| z.re).collect();
        let mut e: Vec<f64> = free_spectrum(&s, c64(0.03, 0.0), &b).iter().map(|z| z.re).collect();
        a.sort_by(f64::total_cmp);
        e.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&e) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn van_hove_form() {
        let s = spec(Fixture::Triv);
        let b = s.full_basis().unwrap();
        let h = build_hamiltonian(&s, c64(0.0, 0.0), 0.1, &b).unwrap();
        let g: Vec<CMat> = s.shell_amplitudes().unwrap().iter().map(|&x| CMat::from_element(1, 1, c64(x, 0.0))).collect();
        let expected = field_energy(&b).mat
            + (crate::fock::annihilation_op(&b, &g).unwrap().mat + creation_op(&b, &g).unwrap().mat) * c64(0.1, 0.0);
        assert!((h.mat - expected).norm() < 1e-14);
    }

    #[test]
    fn pauli_hermitian_and_reflection() {
        let s = spec(Fixture::Pauli);
        let b = s.full_basis().unwrap();
        let h = build_hamiltonian(&s, c64(0.05, 0.0), 0.1, &b).unwrap();
        assert!(h.self_adjoint && h.flag_consistent());
        assert!(crate::linalg::hermiticity_residual(&h.mat) < 1e-12);
        let z = c64(0.03, 0.04);
        let a = build_hamiltonian(&s, z, 0.1, &b).unwrap().mat;
        let c = build_hamiltonian(&s, z.conj(), 0.1, &b).unwrap().mat;
        assert_eq!(a.adjoint(), c);
    }

    #[test]
    fn region_is_enforced() {
        let s = spec(Fixture::Pauli);
        let b = s.full_basis().unwrap();
        assert!(matches!(build_hamiltonian(&s, c64(0.5, 0.0), 0.1, &b), Err(Error::Region(_))));
    }

    #[test]
    fn hypotheses_on_fixtures() {
        for f in Fixture::ALL {
            let rep = verify_hypotheses(&spec(f));
            for i in &rep.items {
                assert!(i.pass, "{}: {} ({}; {})", f.name(), i.name, i.value, i.note);
            }
        }
    }

    #[test]
    fn degenerate_without_symmetry_fails_irreducibility() {
        let mut c = Fixture::Exact.config();
        c.symmetry.clear();
        let rep = verify_hypotheses(&ModelSpec::from_config(&c).unwrap());
        assert!(!rep.get("irreducible").unwrap().pass);
    }

    #[test]
    fn massive_dispersion_rejected() {
        let mut c = Fixture::Triv.config();
        c.dispersion = Dispersion::Massive { mass: 0.1 };
        assert!(ModelSpec::from_config(&c).is_err());
    }

    #[test]
    fn varying_projection_is_transported() {
        let mut c = Fixture::Triv.config();
        c.atomic_dim = 2;
        let z = [0.0, 0.0];
        let o = [1.0, 0.0];
        c.atomic_hamiltonian = vec![vec![vec![z, z], vec![z, o]], vec![vec![z, o], vec![o, z]]];
        c.coupling.annihilation = vec![vec![vec![o, z], vec![z, o]]];
        c.coupling.creation = c.coupling.annihilation.clone();
        let s = ModelSpec::from_config(&c).unwrap();
        let pt = evaluate(&s, c64(0.08, 0.02)).unwrap();
        assert!(pt.transported);
        assert!(pt.block_residual < 1e-9, "{}", pt.block_residual);
        // E_at(s) for [[0, s], [s, 1]]: smaller root of λ² − λ − s² = 0.
        let sv = c64(0.08, 0.02);
        let exact = (c64(1.0, 0.0) - (c64(1.0, 0.0) + sv * sv * 4.0).sqrt()) / 2.0;
        assert!((pt.e_at - exact).norm() < 1e-9, "{} vs {}", pt.e_at, exact);
    }
}
