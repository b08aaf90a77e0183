//! Unitary and antiunitary symmetries, group closure, irreducibility,
//! vacuum expectations and the transformation function `U(s)`.
//!
//! An antiunitary operator is stored as a matrix `U` with a flag and acts as
//! `ψ ↦ U conj(ψ)`. A unitary `S` is a symmetry of `T` when `S T S* = T`; an
//! antiunitary `S` is a symmetry when `S T S* = T*`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::linalg::{c64, conj, identity, inverse, opnorm, CMat, CVec, ONE, ZERO};

pub const GROUP_CAP: usize = 64;

/// Action of a symmetry on the Fock factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FockAction {
    Identity,
    /// `(-1)^N`.
    Parity,
}

impl FockAction {
    pub fn sign(&self, photons: u32) -> f64 {
        match self {
            FockAction::Identity => 1.0,
            FockAction::Parity => {
                if photons % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct SymmetryOp {
    pub matrix: CMat,
    pub antiunitary: bool,
    /// Atomic factor `S₁` and Fock action `S₂` when the operator factorizes.
    pub factors: Option<(CMat, FockAction)>,
}

impl SymmetryOp {
    pub fn new(matrix: CMat, antiunitary: bool) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::Symmetry("matrix part must be square".into()));
        }
        let r = opnorm(&(matrix.adjoint() * &matrix - identity(n)));
        if r > 1e-12 {
            return Err(Error::Symmetry(format!("matrix part is not unitary (residual {r:.2e})")));
        }
        Ok(Self { matrix, antiunitary, factors: None })
    }

    pub fn unitary(matrix: CMat) -> Result<Self> {
        Self::new(matrix, false)
    }

    pub fn antiunitary(matrix: CMat) -> Result<Self> {
        Self::new(matrix, true)
    }

    pub fn identity(n: usize) -> Self {
        Self { matrix: identity(n), antiunitary: false, factors: None }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `S₁ ⊗ S₂` on a Fock basis whose atomic dimension matches `S₁`.
    pub fn factored(atomic: CMat, fock: FockAction, antiunitary: bool, basis: &FockBasis) -> Result<Self> {
        if atomic.nrows() != basis.atomic_dim() {
            return Err(Error::Dimension(format!(
                "atomic factor {}x{} vs D_at = {}",
                atomic.nrows(),
                atomic.ncols(),
                basis.atomic_dim()
            )));
        }
        let f = basis.len();
        let signs = CMat::from_fn(f, f, |i, j| if i == j { c64(fock.sign(basis.photon_number(i)), 0.0) } else { ZERO });
        let mut op = Self::new(atomic.kronecker(&signs), antiunitary)?;
        op.factors = Some((atomic, fock));
        Ok(op)
    }

    /// `S ∘ other`.
    pub fn compose(&self, other: &SymmetryOp) -> SymmetryOp {
        let rhs = if self.antiunitary { conj(&other.matrix) } else { other.matrix.clone() };
        SymmetryOp { matrix: &self.matrix * rhs, antiunitary: self.antiunitary ^ other.antiunitary, factors: None }
    }

    pub fn inverse(&self) -> SymmetryOp {
        let m = if self.antiunitary { self.matrix.transpose() } else { self.matrix.adjoint() };
        SymmetryOp { matrix: m, antiunitary: self.antiunitary, factors: None }
    }

    pub fn apply(&self, v: &CVec) -> CVec {
        if self.antiunitary {
            &self.matrix * v.map(|z| z.conj())
        } else {
            &self.matrix * v
        }
    }

    pub fn approx_eq(&self, other: &SymmetryOp, tol: f64) -> bool {
        self.antiunitary == other.antiunitary && (&self.matrix - &other.matrix).norm() <= tol
    }

    /// Restriction to the span of the orthonormal columns of `b`; errors if the
    /// span is not invariant.
    pub fn restrict(&self, b: &CMat, tol: f64) -> Result<SymmetryOp> {
        let image = if self.antiunitary { &self.matrix * conj(b) } else { &self.matrix * b };
        let r = b.adjoint() * &image;
        let resid = opnorm(&(&image - b * &r));
        if resid > tol {
            return Err(Error::Symmetry(format!("eigenspace not invariant (residual {resid:.2e})")));
        }
        Ok(SymmetryOp { matrix: r, antiunitary: self.antiunitary, factors: None })
    }
}

/// `S T S*` with the conjugate-linear branch for antiunitary `S`.
pub fn conjugate(s: &SymmetryOp, t: &CMat) -> Result<CMat> {
    if t.nrows() != s.dim() || t.ncols() != s.dim() {
        return Err(Error::Dimension(format!("operator {}x{} vs symmetry {}", t.nrows(), t.ncols(), s.dim())));
    }
    let inner = if s.antiunitary { conj(t) } else { t.clone() };
    Ok(&s.matrix * inner * s.matrix.adjoint())
}

/// Returns `(holds, residual)` with residual relative to `max(1, ‖T‖)`.
pub fn is_symmetry_of(s: &SymmetryOp, t: &CMat, tol: f64) -> (bool, f64) {
    let c = match conjugate(s, t) {
        Ok(c) => c,
        Err(_) => return (false, f64::INFINITY),
    };
    let target = if s.antiunitary { t.adjoint() } else { t.clone() };
    let r = opnorm(&(c - target)) / opnorm(t).max(1.0);
    (r <= tol, r)
}

#[derive(Clone, Debug)]
pub struct SymmetryGroup {
    pub generators: Vec<SymmetryOp>,
    pub elements: Vec<SymmetryOp>,
}

impl SymmetryGroup {
    /// Close the generated set under composition (cap [`GROUP_CAP`]).
    pub fn generate(dim: usize, generators: Vec<SymmetryOp>) -> Result<Self> {
        if generators.iter().any(|g| g.dim() != dim) {
            return Err(Error::Dimension("generator dimension mismatch".into()));
        }
        let tol = 1e-9;
        let mut elements = vec![SymmetryOp::identity(dim)];
        let mut frontier = 0;
        while frontier < elements.len() {
            let e = elements[frontier].clone();
            frontier += 1;
            for g in &generators {
                for cand in [g.compose(&e), e.compose(g)] {
                    if !elements.iter().any(|x| x.approx_eq(&cand, tol)) {
                        if elements.len() >= GROUP_CAP {
                            return Err(Error::GroupOverflow(GROUP_CAP));
                        }
                        elements.push(cand);
                    }
                }
            }
        }
        Ok(Self { generators, elements })
    }

    pub fn trivial(dim: usize) -> Self {
        Self { generators: vec![], elements: vec![SymmetryOp::identity(dim)] }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Largest `is_symmetry_of` residual over all elements.
    pub fn max_residual(&self, t: &CMat) -> f64 {
        self.elements.iter().map(|s| is_symmetry_of(s, t, 0.0).1).fold(0.0, f64::max)
    }
}

/// Real basis of `d×d` Hermitian matrices.
fn hermitian_basis(d: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in i..d {
            let mut m = CMat::zeros(d, d);
            if i == j {
                m[(i, i)] = ONE;
                out.push(m);
            } else {
                m[(i, j)] = ONE;
                m[(j, i)] = ONE;
                out.push(m.clone());
                let mut n = CMat::zeros(d, d);
                n[(i, j)] = c64(0.0, 1.0);
                n[(j, i)] = c64(0.0, -1.0);
                out.push(n);
            }
        }
    }
    out
}

/// Dimension over ℝ of the Hermitian commutant `{M = M* : S M S* = M ∀ S}`.
pub fn hermitian_commutant_dim(generators: &[SymmetryOp], d: usize) -> Result<usize> {
    if generators.iter().any(|g| g.dim() != d) {
        return Err(Error::Dimension("generator dimension mismatch".into()));
    }
    let basis = hermitian_basis(d);
    let rows = 2 * d * d * generators.len().max(1);
    let mut a = DMatrix::<f64>::zeros(rows, basis.len());
    for (k, m) in basis.iter().enumerate() {
        for (gi, g) in generators.iter().enumerate() {
            let diff = conjugate(g, m)? - m;
            for (e, z) in diff.iter().enumerate() {
                a[(gi * 2 * d * d + 2 * e, k)] = z.re;
                a[(gi * 2 * d * d + 2 * e + 1, k)] = z.im;
            }
        }
    }
    if a.nrows() < a.ncols() {
        let n = a.ncols();
        a = a.resize_vertically(n, 0.0);
    }
    let sv = a.singular_values();
    let scale = sv.iter().fold(0.0_f64, |x, &y| x.max(y)).max(1.0);
    Ok(sv.iter().filter(|&&s| s <= 1e-10 * scale).count())
}

/// Irreducibility on `C^d`: only real multiples of the identity are Hermitian
/// and commute (in the (anti)linear sense) with every generator.
pub fn is_irreducible(generators: &[SymmetryOp], d: usize) -> Result<bool> {
    Ok(hermitian_commutant_dim(generators, d)? == 1)
}

/// `⟨e_a⊗Ω, T e_b⊗Ω⟩`.
pub fn vacuum_expectation(t: &CMat, basis: &FockBasis) -> CMat {
    let d = basis.atomic_dim();
    CMat::from_fn(d, d, |a, b| t[(basis.flat(a, 0), basis.flat(b, 0))])
}

/// `(tr⟨T⟩_Ω / d, ‖⟨T⟩_Ω − c·1‖)`.
pub fn schur_scalar(t: &CMat, basis: &FockBasis) -> (Complex64, f64) {
    let v = vacuum_expectation(t, basis);
    let d = v.nrows();
    let c = v.trace() / d as f64;
    let dev = opnorm(&(v - identity(d) * c));
    (c, dev)
}

/// Output of [`transformation_function`]: `U` and its inverse `V` at the even samples.
#[derive(Clone, Debug)]
pub struct Transport {
    /// Indices into the input samples.
    pub indices: Vec<usize>,
    pub u: Vec<CMat>,
    pub v: Vec<CMat>,
}

fn derivative(p: &[CMat], k: usize, h: Complex64) -> CMat {
    let n = p.len();
    let den = h * 12.0;
    let f = |i: usize| &p[i];
    let c = |a: f64| c64(a, 0.0);
    let lin = |terms: &[(f64, usize)]| {
        let mut acc = CMat::zeros(p[0].nrows(), p[0].ncols());
        for &(w, i) in terms {
            acc += f(i) * c(w);
        }
        acc / den
    };
    if k >= 2 && k + 2 < n {
        lin(&[(1.0, k - 2), (-8.0, k - 1), (8.0, k + 1), (-1.0, k + 2)])
    } else if k == 0 {
        lin(&[(-25.0, 0), (48.0, 1), (-36.0, 2), (16.0, 3), (-3.0, 4)])
    } else if k == 1 {
        lin(&[(-3.0, 0), (-10.0, 1), (18.0, 2), (-6.0, 3), (1.0, 4)])
    } else if k == n - 1 {
        lin(&[(25.0, n - 1), (-48.0, n - 2), (36.0, n - 3), (-16.0, n - 4), (3.0, n - 5)])
    } else {
        lin(&[(3.0, n - 1), (10.0, n - 2), (-18.0, n - 3), (6.0, n - 4), (-1.0, n - 5)])
    }
}

/// Integrate `U′ = QU`, `V′ = −VQ` with `Q = P′P − PP′` and `U(s₀) = V(s₀) = 1`.
///
/// `samples[k] = P(s₀ + k h)` along a straight path; RK4 runs with step `2h`
/// so that its stages land on samples. The sample count must be odd and ≥ 5.
pub fn transformation_function(samples: &[CMat], h: Complex64) -> Result<Transport> {
    let n = samples.len();
    if n < 5 || n % 2 == 0 {
        return Err(Error::Transport(format!("need an odd number ≥ 5 of samples, got {n}")));
    }
    let dim = samples[0].nrows();
    for (k, p) in samples.iter().enumerate() {
        let r = opnorm(&(p * p - p));
        if r > 1e-9 {
            return Err(Error::Transport(format!("sample {k} is not a projection (‖P²−P‖ = {r:.2e})")));
        }
    }
    let q: Vec<CMat> = (0..n)
        .map(|k| {
            let dp = derivative(samples, k, h);
            &dp * &samples[k] - &samples[k] * &dp
        })
        .collect();
    let mut u = identity(dim);
    let mut v = identity(dim);
    let mut out = Transport { indices: vec![0], u: vec![u.clone()], v: vec![v.clone()] };
    let step = h * 2.0;
    let mut k = 0;
    while k + 2 < n {
        let (q0, q1, q2) = (&q[k], &q[k + 1], &q[k + 2]);
        let a1 = q0 * &u;
        let a2 = q1 * (&u + &a1 * h);
        let a3 = q1 * (&u + &a2 * h);
        let a4 = q2 * (&u + &a3 * step);
        u += (a1 + a2 * c64(2.0, 0.0) + a3 * c64(2.0, 0.0) + a4) * (step / 6.0);
        let b1 = -(&v * q0);
        let b2 = -((&v + &b1 * h) * q1);
        let b3 = -((&v + &b2 * h) * q1);
        let b4 = -((&v + &b3 * step) * q2);
        v += (b1 + b2 * c64(2.0, 0.0) + b3 * c64(2.0, 0.0) + b4) * (step / 6.0);
        k += 2;
        if inverse(&u).is_none() {
            return Err(Error::Transport(format!("U became singular at sample {k}")));
        }
        out.indices.push(k);
        out.u.push(u.clone());
        out.v.push(v.clone());
    }
    Ok(out)
}

impl Transport {
    /// `max_k ‖U P(s₀) U⁻¹ − P(s_k)‖`.
    pub fn conjugation_residual(&self, samples: &[CMat]) -> f64 {
        let p0 = &samples[0];
        self.indices
            .iter()
            .zip(&self.u)
            .map(|(&k, u)| {
                let ui = inverse(u).expect("U invertible");
                opnorm(&(u * p0 * ui - &samples[k]))
            })
            .fold(0.0, f64::max)
    }

    /// `max_k max(‖VU − 1‖, ‖UV − 1‖)`.
    pub fn inverse_residual(&self) -> f64 {
        self.u
            .iter()
            .zip(&self.v)
            .map(|(u, v)| {
                let n = u.nrows();
                opnorm(&(v * u - identity(n))).max(opnorm(&(u * v - identity(n))))
            })
            .fold(0.0, f64::max)
    }

    /// `max_k ‖U*U − 1‖`.
    pub fn unitarity_residual(&self) -> f64 {
        self.u.iter().map(|u| opnorm(&(u.adjoint() * u - identity(u.nrows())))).fold(0.0, f64::max)
    }

    /// `max_k ‖S U S* − U‖` for a unitary `S`.
    pub fn intertwining_residual(&self, s: &CMat) -> f64 {
        self.u.iter().map(|u| opnorm(&(s * u * s.adjoint() - u))).fold(0.0, f64::max)
    }
}

/// Standard Pauli matrices.
pub fn pauli() -> [CMat; 3] {
    let x = CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
    let y = CMat::from_row_slice(2, 2, &[ZERO, c64(0.0, -1.0), c64(0.0, 1.0), ZERO]);
    let z = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
    [x, y, z]
}

/// `A ⊕ B` block-diagonal sum.
pub fn direct_sum(a: &CMat, b: &CMat) -> CMat {
    let n = a.nrows() + b.nrows();
    let mut m = CMat::zeros(n, n);
    m.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    m.view_mut((a.nrows(), a.ncols()), (b.nrows(), b.ncols())).copy_from(b);
    m
}
