//! Dense diagonalization of the truncated Hamiltonian and comparison with RG output.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fock::{vacuum_vector, OperatorMatrix};
use crate::linalg::{c64, columns, eigenvalues, hermitian_eigen, identity, opnorm, orthonormalize, subspace_distance, CMat, CVec};
use crate::model::{build_hamiltonian, evaluate, ModelSpec};

pub const MAX_DIM: usize = 20000;

/// Relative cluster tolerance for multiplicities.
pub const CLUSTER_REL_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct OracleReport {
    /// Sorted by real part, then imaginary part.
    pub spectrum: Vec<Complex64>,
    pub lowest: Complex64,
    pub multiplicity: usize,
    pub cluster_tol: f64,
    /// Orthonormal basis of the lowest cluster's eigenspace.
    pub eigenvectors: CMat,
    /// Distance from the lowest cluster to the rest of the spectrum.
    pub gap: f64,
    /// `max ‖Hv − λv‖ / ‖H‖` over the returned eigenvectors.
    pub residual: f64,
    pub hermitian: bool,
    pub norm: f64,
}

impl OracleReport {
    pub fn nearest(&self, z: Complex64) -> Complex64 {
        *self
            .spectrum
            .iter()
            .min_by(|a, b| (*a - z).norm().total_cmp(&(*b - z).norm()))
            .expect("nonempty spectrum")
    }

    /// Columnar dump: index, Re λ, Im λ.
    pub fn to_columnar(&self) -> String {
        let mut out = String::from("# k re im\n");
        for (k, l) in self.spectrum.iter().enumerate() {
            let _ = writeln!(out, "{k} {:.17e} {:.17e}", l.re, l.im);
        }
        out
    }
}

fn sort_spectrum(v: &mut [Complex64]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

fn cluster_tol(lambda: Complex64) -> f64 {
    CLUSTER_REL_TOL * lambda.norm().max(1.0)
}

/// Members of the cluster around `center`.
fn cluster(spec: &[Complex64], center: Complex64, tol: f64) -> Vec<usize> {
    (0..spec.len()).filter(|&k| (spec[k] - center).norm() <= tol).collect()
}

/// Eigenspace of a (possibly non-normal) matrix for an eigenvalue cluster, by block inverse iteration.
pub fn cluster_eigenvectors(h: &CMat, lambda: Complex64, m: usize, seed: u64) -> Result<CMat> {
    let n = h.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = CMat::from_fn(n, m, |_, _| c64(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    let shift = lambda + c64(1e-11, 1e-11) * opnorm(h).max(1.0);
    let lu = (h - identity(n) * shift).lu();
    for _ in 0..4 {
        x = lu.solve(&x).ok_or_else(|| Error::Oracle("shifted matrix is singular".into()))?;
        x = orthonormalize(&x);
        if x.ncols() != m {
            return Err(Error::Oracle("inverse iteration lost rank".into()));
        }
    }
    Ok(x)
}

pub fn dense_spectrum(h: &OperatorMatrix) -> Result<OracleReport> {
    let n = h.dim();
    if n > MAX_DIM {
        return Err(Error::Oracle(format!("dimension {n} exceeds the budget {MAX_DIM}")));
    }
    if n == 0 {
        return Err(Error::Oracle("empty matrix".into()));
    }
    let norm = opnorm(&h.mat).max(f64::MIN_POSITIVE);
    let (mut spectrum, hvecs) = if h.self_adjoint {
        let (vals, vecs) = hermitian_eigen(&h.mat);
        (vals.into_iter().map(|x| c64(x, 0.0)).collect::<Vec<_>>(), Some(vecs))
    } else {
        (eigenvalues(&h.mat), None)
    };
    sort_spectrum(&mut spectrum);
    let lowest = spectrum[0];
    let tol = cluster_tol(lowest);
    let members = cluster(&spectrum, lowest, tol);
    let multiplicity = members.len();
    let gap = spectrum
        .iter()
        .enumerate()
        .filter(|(k, _)| !members.contains(k))
        .map(|(_, l)| (l - lowest).norm())
        .fold(f64::INFINITY, f64::min);
    let eigenvectors = match hvecs {
        Some(v) => columns(&members.iter().map(|&k| v.column(k).into_owned()).collect::<Vec<CVec>>(), n),
        None => cluster_eigenvectors(&h.mat, lowest, multiplicity, 0)?,
    };
    let residual = (0..eigenvectors.ncols())
        .map(|k| {
            let v = eigenvectors.column(k);
            (&h.mat * v - v * lowest).norm() / norm
        })
        .fold(0.0, f64::max);
    Ok(OracleReport { spectrum, lowest, multiplicity, cluster_tol: tol, eigenvectors, gap, residual, hermitian: h.self_adjoint, norm })
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub nearest: Complex64,
    pub eigenvalue_error: f64,
    /// `|z − λ_min|`, meaningful for self-adjoint real-`s` runs.
    pub ground_error: f64,
    pub is_ground_state: bool,
    /// Sine of the largest principal angle to the oracle eigenspace of the nearest cluster.
    pub angle: f64,
    pub oracle_multiplicity: usize,
}

/// Compare an RG eigenvalue and eigenvectors with the oracle of the same matrix.
pub fn compare(h: &OperatorMatrix, z: Complex64, psi: &[CVec], oracle: &OracleReport) -> Result<Comparison> {
    let nearest = oracle.nearest(z);
    let tol = cluster_tol(nearest);
    let members = cluster(&oracle.spectrum, nearest, tol);
    let space = if (nearest - oracle.lowest).norm() <= oracle.cluster_tol {
        oracle.eigenvectors.clone()
    } else if h.self_adjoint {
        let (_, vecs) = hermitian_eigen(&h.mat);
        columns(&members.iter().map(|&k| vecs.column(k).into_owned()).collect::<Vec<CVec>>(), h.dim())
    } else {
        cluster_eigenvectors(&h.mat, nearest, members.len(), 1)?
    };
    let angle = if psi.is_empty() { f64::NAN } else { subspace_distance(&columns(psi, h.dim()), &space) };
    let ground_error = (z - oracle.lowest).norm();
    Ok(Comparison {
        nearest,
        eigenvalue_error: (z - nearest).norm(),
        ground_error,
        is_ground_state: ground_error <= oracle.cluster_tol.max(1e-8),
        angle,
        oracle_multiplicity: members.len(),
    })
}

#[derive(Clone, Debug)]
pub struct ScalingReport {
    pub g: Vec<f64>,
    pub energies: Vec<Complex64>,
    pub shifts: Vec<f64>,
    pub exponent: f64,
    /// Sine of the largest principal angle between the eigenspace and `Ran P_at ⊗ Ω`.
    pub distances: Vec<f64>,
    pub monotone: bool,
}

impl ScalingReport {
    /// Columns `g re(E) im(E) shift distance`.
    pub fn to_columns(&self) -> String {
        let mut out = String::from("# g re im shift distance\n");
        for k in 0..self.g.len() {
            let e = self.energies[k];
            let _ = writeln!(out, "{:.17e} {:.17e} {:.17e} {:.17e} {:.17e}", self.g[k], e.re, e.im, self.shifts[k], self.distances[k]);
        }
        out
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Oracle fit of `|E_g − E_at|` against `g` and eigenspace distances to `φ_at ⊗ Ω`.
pub fn perturbation_scaling(spec: &ModelSpec, s: Complex64, gs: &[f64]) -> Result<ScalingReport> {
    if gs.len() < 4 {
        return Err(Error::Oracle(format!("need at least 4 coupling values, got {}", gs.len())));
    }
    if gs.iter().any(|&g| !(g > 0.0)) || gs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Oracle("coupling values must be positive and increasing".into()));
    }
    let ratio = gs[1] / gs[0];
    if gs.windows(2).any(|w| ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-9) {
        return Err(Error::Oracle("coupling values must form a geometric progression".into()));
    }
    let basis = spec.full_basis()?;
    let point = evaluate(spec, s)?;
    let e_at = point.e_at;
    let f = basis.len();
    let atomic: Vec<CVec> = (0..spec.d).map(|a| point.vector_to_raw(&vacuum_vector(&basis.with_atomic_dim(spec.d_at), a), f)).collect();
    let reference = columns(&atomic, basis.dim());
    let mut energies = Vec::new();
    let mut shifts = Vec::new();
    let mut distances = Vec::new();
    for &g in gs {
        let h = build_hamiltonian(spec, s, g, &basis)?;
        let rep = dense_spectrum(&h)?;
        // Self-adjoint runs track the ground state; otherwise the eigenvalue closest to E_at.
        let near = if rep.hermitian { rep.lowest } else { rep.nearest(e_at) };
        let members = cluster(&rep.spectrum, near, cluster_tol(near));
        let space = if (near - rep.lowest).norm() <= rep.cluster_tol {
            rep.eigenvectors.clone()
        } else {
            cluster_eigenvectors(&h.mat, near, members.len(), 2)?
        };
        energies.push(near);
        shifts.push((near - e_at).norm());
        distances.push(subspace_distance(&space, &reference));
    }
    let exponent = loglog_slope(gs, &shifts);
    let monotone = distances.windows(2).all(|w| w[1] > w[0]);
    Ok(ScalingReport { g: gs.to_vec(), energies, shifts, exponent, distances, monotone })
}
