//! Truncated bosonic Fock space over a ρ-geometric shell grid.
//!
//! Mode `j` represents the radial shell `[ρ^{j+1}, ρ^j]` with energy `ω_j = ρ^j`.
//! Basis states are occupation vectors ordered by total photon number and then
//! reverse-lexicographically, so the vacuum is index 0 and the one-photon state
//! of mode `j` (when present) is index `1 + j`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{c64, opnorm, CMat, CVec, ZERO};

/// Tolerance used when comparing field energies against cutoffs.
pub const ENERGY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct ModeGrid {
    ratio: f64,
    levels: usize,
}

impl ModeGrid {
    pub fn new(ratio: f64, levels: usize) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::Grid(format!("ratio {ratio} outside (0,1)")));
        }
        if levels == 0 {
            return Err(Error::Grid("at least one shell is required".into()));
        }
        Ok(Self { ratio, levels })
    }

    /// Grid with the top shell removed; may end up with zero shells.
    pub fn drop_top(&self) -> Self {
        Self { ratio: self.ratio, levels: self.levels.saturating_sub(1) }
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn omega(&self, j: usize) -> f64 {
        self.ratio.powi(j as i32)
    }

    pub fn omegas(&self) -> Vec<f64> {
        (0..self.levels).map(|j| self.omega(j)).collect()
    }

    /// `4π ∫_{ρ^{j+1}}^{ρ^j} r² dr`.
    pub fn shell_weight(&self, j: usize) -> f64 {
        let hi = self.omega(j);
        let lo = hi * self.ratio;
        4.0 * PI * (hi.powi(3) - lo.powi(3)) / 3.0
    }

    pub fn shell_bounds(&self, j: usize) -> (f64, f64) {
        let hi = self.omega(j);
        (hi * self.ratio, hi)
    }
}

#[derive(Clone, Debug)]
pub struct FockBasis {
    grid: ModeGrid,
    n_max: u32,
    e_cut: f64,
    atomic_dim: usize,
    states: Vec<Vec<u32>>,
    energies: Vec<f64>,
    lookup: HashMap<Vec<u32>, usize>,
}

/// Enumerate the truncated occupation basis.
pub fn build_fock_basis(grid: &ModeGrid, n_max: u32, e_cut: f64, atomic_dim: usize) -> Result<FockBasis> {
    if grid.levels() == 0 {
        return Err(Error::Grid("J = 0".into()));
    }
    FockBasis::build(grid.clone(), n_max, e_cut, atomic_dim)
}

impl FockBasis {
    /// Like [`build_fock_basis`] but accepts grids without shells (vacuum only).
    pub(crate) fn build(grid: ModeGrid, n_max: u32, e_cut: f64, atomic_dim: usize) -> Result<Self> {
        if !(e_cut > 0.0) {
            return Err(Error::EmptyBasis { n_max, e_cut });
        }
        if atomic_dim == 0 {
            return Err(Error::Dimension("atomic dimension must be positive".into()));
        }
        let omegas = grid.omegas();
        let mut states = Vec::new();
        let mut cur = vec![0u32; omegas.len()];
        enumerate(&omegas, 0, n_max, e_cut + ENERGY_TOL, 0.0, &mut cur, &mut states);
        states.sort_by(|a, b| {
            let na: u32 = a.iter().sum();
            let nb: u32 = b.iter().sum();
            na.cmp(&nb).then_with(|| b.cmp(a))
        });
        if states.is_empty() {
            return Err(Error::EmptyBasis { n_max, e_cut });
        }
        let energies = states.iter().map(|s| energy_of(&omegas, s)).collect();
        let lookup = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(Self { grid, n_max, e_cut, atomic_dim, states, energies, lookup })
    }

    /// Basis of the next RG level: top shell dropped, reduced space `H_f ≤ 1`.
    pub fn next_level(&self) -> Result<Self> {
        Self::build(self.grid.drop_top(), self.n_max, 1.0, self.atomic_dim)
    }

    pub fn with_atomic_dim(&self, atomic_dim: usize) -> Self {
        let mut b = self.clone();
        b.atomic_dim = atomic_dim;
        b
    }

    pub fn grid(&self) -> &ModeGrid {
        &self.grid
    }
    pub fn n_max(&self) -> u32 {
        self.n_max
    }
    pub fn e_cut(&self) -> f64 {
        self.e_cut
    }
    pub fn atomic_dim(&self) -> usize {
        self.atomic_dim
    }
    pub fn len(&self) -> usize {
        self.states.len()
    }
    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
    /// Total dimension `D_at × (Fock basis size)`.
    pub fn dim(&self) -> usize {
        self.atomic_dim * self.states.len()
    }
    pub fn states(&self) -> &[Vec<u32>] {
        &self.states
    }
    pub fn state(&self, i: usize) -> &[u32] {
        &self.states[i]
    }
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }
    pub fn energy(&self, i: usize) -> f64 {
        self.energies[i]
    }
    pub fn photon_number(&self, i: usize) -> u32 {
        self.states[i].iter().sum()
    }
    pub fn index_of(&self, occ: &[u32]) -> Option<usize> {
        self.lookup.get(occ).copied()
    }
    pub fn modes(&self) -> usize {
        self.grid.levels()
    }
    pub fn is_vacuum_only(&self) -> bool {
        self.states.len() == 1
    }
    /// Index of the one-photon state in mode `j`, if retained.
    pub fn one_photon(&self, j: usize) -> Option<usize> {
        let mut occ = vec![0u32; self.modes()];
        occ[j] = 1;
        self.index_of(&occ)
    }
    /// Flattened index of `e_a ⊗ state`.
    pub fn flat(&self, a: usize, state: usize) -> usize {
        a * self.states.len() + state
    }
    /// Field energy of every flattened index (atomic-major).
    pub fn flat_energies(&self) -> Vec<f64> {
        (0..self.atomic_dim).flat_map(|_| self.energies.iter().copied()).collect()
    }

    /// Transitions of the lowering operator `a_j`: `(target, source, amplitude)`.
    pub fn lowering(&self, j: usize) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (src, occ) in self.states.iter().enumerate() {
            if occ[j] == 0 {
                continue;
            }
            let mut t = occ.clone();
            t[j] -= 1;
            if let Some(tgt) = self.index_of(&t) {
                out.push((tgt, src, (occ[j] as f64).sqrt()));
            }
        }
        out
    }

    /// Raising `a_j^*`, dropping transitions that leave the truncation.
    pub fn raising(&self, j: usize) -> Vec<(usize, usize, f64)> {
        self.lowering(j).into_iter().map(|(t, s, a)| (s, t, a)).collect()
    }
}

fn energy_of(omegas: &[f64], occ: &[u32]) -> f64 {
    occ.iter().zip(omegas).map(|(&n, &w)| n as f64 * w).sum()
}

fn enumerate(
    omegas: &[f64],
    j: usize,
    left: u32,
    e_left: f64,
    _acc: f64,
    cur: &mut Vec<u32>,
    out: &mut Vec<Vec<u32>>,
) {
    if j == omegas.len() {
        out.push(cur.clone());
        return;
    }
    let mut n = 0u32;
    while n <= left && n as f64 * omegas[j] <= e_left {
        cur[j] = n;
        enumerate(omegas, j + 1, left - n, e_left - n as f64 * omegas[j], 0.0, cur, out);
        n += 1;
    }
    cur[j] = 0;
}

/// Dense operator on `C^{D_at} ⊗ F_trunc` with a handle to its basis.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub mat: CMat,
    pub basis: Arc<FockBasis>,
    pub self_adjoint: bool,
}

impl OperatorMatrix {
    pub fn new(mat: CMat, basis: Arc<FockBasis>) -> Result<Self> {
        if mat.nrows() != basis.dim() || mat.ncols() != basis.dim() {
            return Err(Error::Dimension(format!(
                "matrix {}x{} vs basis dimension {}",
                mat.nrows(),
                mat.ncols(),
                basis.dim()
            )));
        }
        Ok(Self { mat, basis, self_adjoint: false })
    }

    pub fn hermitian(mut self) -> Self {
        self.self_adjoint = true;
        self
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self { mat: self.mat.adjoint(), basis: self.basis.clone(), self_adjoint: self.self_adjoint }
    }

    /// Check the self-adjointness flag against the stored matrix.
    pub fn flag_consistent(&self) -> bool {
        !self.self_adjoint || opnorm(&(&self.mat - self.mat.adjoint())) <= 1e-12 * opnorm(&self.mat).max(1.0)
    }
}

fn check_modes(basis: &FockBasis, coeffs: &[CMat]) -> Result<()> {
    if coeffs.len() != basis.modes() {
        return Err(Error::Dimension(format!("{} coefficient matrices for {} modes", coeffs.len(), basis.modes())));
    }
    let d = basis.atomic_dim();
    if coeffs.iter().any(|g| g.nrows() != d || g.ncols() != d) {
        return Err(Error::Dimension(format!("coefficients must be {d}x{d}")));
    }
    Ok(())
}

fn add_transitions(out: &mut CMat, basis: &FockBasis, coeff: &CMat, trans: &[(usize, usize, f64)]) {
    let d = basis.atomic_dim();
    for &(t, s, amp) in trans {
        for a in 0..d {
            for b in 0..d {
                let c = coeff[(a, b)];
                if c != ZERO {
                    out[(basis.flat(a, t), basis.flat(b, s))] += c * amp;
                }
            }
        }
    }
}

/// `Σ_j G_j ⊗ a_j^*` on the truncation.
pub fn creation_op(basis: &Arc<FockBasis>, coeffs: &[CMat]) -> Result<OperatorMatrix> {
    check_modes(basis, coeffs)?;
    let mut m = CMat::zeros(basis.dim(), basis.dim());
    for (j, g) in coeffs.iter().enumerate() {
        add_transitions(&mut m, basis, g, &basis.raising(j));
    }
    OperatorMatrix::new(m, basis.clone())
}

/// `Σ_j A_j ⊗ a_j` with the coefficients used as given.
pub fn lowering_op(basis: &Arc<FockBasis>, coeffs: &[CMat]) -> Result<OperatorMatrix> {
    check_modes(basis, coeffs)?;
    let mut m = CMat::zeros(basis.dim(), basis.dim());
    for (j, a) in coeffs.iter().enumerate() {
        add_transitions(&mut m, basis, a, &basis.lowering(j));
    }
    OperatorMatrix::new(m, basis.clone())
}

/// `a(G) = Σ_j G_j^* ⊗ a_j`, the adjoint of [`creation_op`].
pub fn annihilation_op(basis: &Arc<FockBasis>, coeffs: &[CMat]) -> Result<OperatorMatrix> {
    let adj: Vec<CMat> = coeffs.iter().map(|g| g.adjoint()).collect();
    lowering_op(basis, &adj)
}

/// `1 ⊗ H_f`.
pub fn field_energy(basis: &Arc<FockBasis>) -> OperatorMatrix {
    let e = basis.flat_energies();
    let m = CMat::from_diagonal(&CVec::from_iterator(e.len(), e.iter().map(|&x| c64(x, 0.0))));
    OperatorMatrix { mat: m, basis: basis.clone(), self_adjoint: true }
}

/// `1 ⊗ N`.
pub fn number_op(basis: &Arc<FockBasis>) -> OperatorMatrix {
    let n = basis.dim();
    let f = basis.len();
    let m = CMat::from_fn(n, n, |i, j| if i == j { c64(basis.photon_number(i % f) as f64, 0.0) } else { ZERO });
    OperatorMatrix { mat: m, basis: basis.clone(), self_adjoint: true }
}

/// `f(H_f)` applied entrywise on the diagonal, atomic identity.
pub fn function_of_field_energy(basis: &Arc<FockBasis>, f: impl Fn(f64) -> f64) -> CMat {
    let e = basis.flat_energies();
    CMat::from_diagonal(&CVec::from_iterator(e.len(), e.iter().map(|&x| c64(f(x), 0.0))))
}

/// The dilation `Γ_ρ` as an injection between Fock bases: states of the source
/// with `H_f ≤ ρ` are mapped, by shifting every mode index down by one, onto
/// states of the target.
#[derive(Clone, Debug)]
pub struct Dilation {
    pub source_len: usize,
    pub target_len: usize,
    /// `(source index, target index)` pairs, ordered by source index.
    pub pairs: Vec<(usize, usize)>,
    pub ratio: f64,
}

/// Dilation within a single basis.
pub fn dilation(basis: &FockBasis, rho: f64) -> Result<Dilation> {
    dilation_between(basis, basis, rho)
}

/// Dilation from `source` into `target` (typically the next RG level).
pub fn dilation_between(source: &FockBasis, target: &FockBasis, rho: f64) -> Result<Dilation> {
    let ratio = source.grid().ratio();
    if (rho - ratio).abs() > 1e-15 || (target.grid().ratio() - ratio).abs() > 1e-15 {
        return Err(Error::Dilation(format!("scale {rho} does not match grid ratio {ratio}")));
    }
    let mut pairs = Vec::new();
    for (i, occ) in source.states().iter().enumerate() {
        if source.energy(i) > rho + ENERGY_TOL {
            continue;
        }
        let shifted: Vec<u32> = (0..target.modes()).map(|j| occ.get(j + 1).copied().unwrap_or(0)).collect();
        let lost: u32 = occ.iter().skip(target.modes() + 1).sum();
        if lost != 0 {
            return Err(Error::Dilation(format!("state {i} occupies shells absent from the target grid")));
        }
        let t = target
            .index_of(&shifted)
            .ok_or_else(|| Error::Dilation(format!("image of state {i} is outside the target truncation")))?;
        pairs.push((i, t));
    }
    Ok(Dilation { source_len: source.len(), target_len: target.len(), pairs, ratio })
}

impl Dilation {
    /// Source indices of the low sector `H_f ≤ ρ`.
    pub fn low_sector(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    /// Whether the map hits every target state.
    pub fn is_onto(&self) -> bool {
        self.pairs.len() == self.target_len
    }

    /// Matrix of `1_{d} ⊗ Γ_ρ` (target × source).
    pub fn matrix(&self, atomic_dim: usize) -> CMat {
        let mut m = CMat::zeros(atomic_dim * self.target_len, atomic_dim * self.source_len);
        for a in 0..atomic_dim {
            for &(s, t) in &self.pairs {
                m[(a * self.target_len + t, a * self.source_len + s)] = c64(1.0, 0.0);
            }
        }
        m
    }

    /// `Γ ψ` for a vector on `C^d ⊗ F_source`.
    pub fn apply(&self, atomic_dim: usize, v: &CVec) -> CVec {
        let mut out = CVec::zeros(atomic_dim * self.target_len);
        for a in 0..atomic_dim {
            for &(s, t) in &self.pairs {
                out[a * self.target_len + t] = v[a * self.source_len + s];
            }
        }
        out
    }

    /// `Γ* φ` for a vector on `C^d ⊗ F_target`.
    pub fn apply_adjoint(&self, atomic_dim: usize, v: &CVec) -> CVec {
        let mut out = CVec::zeros(atomic_dim * self.source_len);
        for a in 0..atomic_dim {
            for &(s, t) in &self.pairs {
                out[a * self.source_len + s] = v[a * self.target_len + t];
            }
        }
        out
    }

    /// `Γ A Γ*` for an operator on the source space.
    pub fn conjugate(&self, atomic_dim: usize, a: &CMat) -> CMat {
        let n = atomic_dim * self.target_len;
        let mut out = CMat::zeros(n, n);
        let idx: Vec<(usize, usize)> = (0..atomic_dim)
            .flat_map(|a| self.pairs.iter().map(move |&(s, t)| (a * self.source_len + s, a * self.target_len + t)))
            .collect();
        for &(si, ti) in &idx {
            for &(sj, tj) in &idx {
                out[(ti, tj)] = a[(si, sj)];
            }
        }
        out
    }
}

/// Max residual of `a_j f(H_f) − f(H_f + ω_j) a_j` over all columns.
pub fn verify_pull_through(basis: &FockBasis, f: impl Fn(f64) -> f64, j: usize) -> f64 {
    let n = basis.len();
    let mut a = CMat::zeros(n, n);
    for (t, s, amp) in basis.lowering(j) {
        a[(t, s)] = c64(amp, 0.0);
    }
    let w = basis.grid().omega(j);
    let lhs_diag = CMat::from_diagonal(&CVec::from_iterator(n, basis.energies().iter().map(|&e| c64(f(e), 0.0))));
    let rhs_diag = CMat::from_diagonal(&CVec::from_iterator(n, basis.energies().iter().map(|&e| c64(f(e + w), 0.0))));
    let r = &a * lhs_diag - rhs_diag * &a;
    r.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct RelativeBoundReport {
    pub samples: usize,
    /// `‖ω^{-1/2} G‖ = (Σ_j ‖G_j‖²/ω_j)^{1/2}`.
    pub weighted_norm: f64,
    /// `(Σ_j ‖G_j‖²)^{1/2}`.
    pub plain_norm: f64,
    pub max_ratio_annihilation: f64,
    pub max_ratio_creation: f64,
    pub violations: usize,
}

/// Seeded random vector with independently scaled photon-number sectors.
pub fn random_state(basis: &FockBasis, rng: &mut ChaCha8Rng) -> CVec {
    let f = basis.len();
    let scales: Vec<f64> = (0..=basis.n_max()).map(|_| 10f64.powf(rng.gen_range(-2.0..1.0))).collect();
    CVec::from_fn(basis.dim(), |i, _| {
        let s = scales[basis.photon_number(i % f) as usize];
        c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * s
    })
}

/// Check `‖a(G)ψ‖ ≤ ‖ω^{-1/2}G‖‖H_f^{1/2}ψ‖` and
/// `‖a*(G)ψ‖² ≤ ‖ω^{-1/2}G‖²‖H_f^{1/2}ψ‖² + ‖G‖²‖ψ‖²` on seeded samples.
pub fn relative_bound_check(basis: &Arc<FockBasis>, coeffs: &[CMat], seed: u64, samples: usize) -> Result<RelativeBoundReport> {
    let a = annihilation_op(basis, coeffs)?.mat;
    let c = creation_op(basis, coeffs)?.mat;
    let w2: f64 = coeffs.iter().enumerate().map(|(j, g)| opnorm(g).powi(2) / basis.grid().omega(j)).sum();
    let p2: f64 = coeffs.iter().map(|g| opnorm(g).powi(2)).sum();
    let energies = basis.flat_energies();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = RelativeBoundReport {
        samples,
        weighted_norm: w2.sqrt(),
        plain_norm: p2.sqrt(),
        max_ratio_annihilation: 0.0,
        max_ratio_creation: 0.0,
        violations: 0,
    };
    let slack = 1.0 + 1e-12;
    for _ in 0..samples {
        let psi = random_state(basis, &mut rng);
        let hf: f64 = psi.iter().zip(&energies).map(|(z, &e)| z.norm_sqr() * e).sum();
        let lhs_a = (&a * &psi).norm();
        let rhs_a = (w2 * hf).sqrt();
        let lhs_c = (&c * &psi).norm_squared();
        let rhs_c = w2 * hf + p2 * psi.norm_squared();
        if lhs_a > rhs_a * slack + 1e-300 || lhs_c > rhs_c * slack {
            rep.violations += 1;
        }
        if rhs_a > 0.0 {
            rep.max_ratio_annihilation = rep.max_ratio_annihilation.max(lhs_a / rhs_a);
        }
        if rhs_c > 0.0 {
            rep.max_ratio_creation = rep.max_ratio_creation.max(lhs_c / rhs_c);
        }
    }
    Ok(rep)
}

/// Vector `e_a ⊗ Ω`.
pub fn vacuum_vector(basis: &FockBasis, a: usize) -> CVec {
    let mut v = CVec::zeros(basis.dim());
    v[basis.flat(a, 0)] = Complex64::new(1.0, 0.0);
    v
}
