//! Discretized integral kernels `w_{m,n}` (orders `m + n ≤ 2`), their norms, the
//! operator map `w ↦ H(w)` on the reduced space, `w_{0,0}` extraction and polydiscs.
//!
//! Kernels are constant on radial shells. Mode `j` carries measure
//! `m_j = pol·|shell_j|` and energy `ω_j`; a kernel value `w_J` enters `H_{m,n}(w)`
//! with weight `Π_{j∈J} √m_j`, which makes the discrete operator an exact compression.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Profile;
use crate::error::{Error, Result};
use crate::fock::{FockBasis, ModeGrid, OperatorMatrix};
use crate::linalg::{c64, identity, opnorm, CMat, ONE};

/// Per-shell measures derived from the mode grid.
#[derive(Clone, Debug)]
pub struct ShellWeights {
    pub omega: Vec<f64>,
    /// `m_j = pol·4π∫_shell r² dr`.
    pub measure: Vec<f64>,
    /// `ν_j = pol·4π∫_shell r^{−2μ} dr`.
    pub nu: Vec<f64>,
    pub mu: f64,
}

impl ShellWeights {
    pub fn new(grid: &ModeGrid, mu: f64, polarization: f64) -> Self {
        let j_max = grid.levels();
        let mut omega = Vec::with_capacity(j_max);
        let mut measure = Vec::with_capacity(j_max);
        let mut nu = Vec::with_capacity(j_max);
        for j in 0..j_max {
            let (lo, hi) = grid.shell_bounds(j);
            omega.push(grid.omega(j));
            measure.push(polarization * grid.shell_weight(j));
            let e = 1.0 - 2.0 * mu;
            let v = if e.abs() < 1e-14 { (hi / lo).ln() } else { (hi.powf(e) - lo.powf(e)) / e };
            nu.push(polarization * 4.0 * PI * v);
        }
        Self { omega, measure, nu, mu }
    }

    pub fn shells(&self) -> usize {
        self.omega.len()
    }
}

/// Uniform grid on `[0, 1]`.
pub fn r_grid(n_r: usize) -> Vec<f64> {
    let n = n_r.max(2);
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// Samples of a `C¹([0,1]; L(C^d))` function and its derivative.
#[derive(Clone, Debug)]
pub struct KernelC1 {
    pub r: Vec<f64>,
    pub values: Vec<CMat>,
    pub derivs: Vec<CMat>,
}

impl KernelC1 {
    pub fn from_fn(n_r: usize, f: impl Fn(f64) -> CMat, df: impl Fn(f64) -> CMat) -> Self {
        let r = r_grid(n_r);
        let values = r.iter().map(|&x| f(x)).collect();
        let derivs = r.iter().map(|&x| df(x)).collect();
        Self { r, values, derivs }
    }

    pub fn dim(&self) -> usize {
        self.values[0].nrows()
    }

    /// `‖w‖_{(∞)} + ‖w′‖_{(∞)}` on the samples.
    pub fn norm_c1(&self) -> f64 {
        let a = self.values.iter().map(opnorm).fold(0.0, f64::max);
        let b = self.derivs.iter().map(opnorm).fold(0.0, f64::max);
        a + b
    }

    /// `max_i ‖(w_{i+1} − w_i)/h − (w′_i + w′_{i+1})/2‖`, which is `O(h²)` for consistent samples.
    pub fn consistency_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.r.len() - 1 {
            let h = self.r[i + 1] - self.r[i];
            let fd = (&self.values[i + 1] - &self.values[i]) / c64(h, 0.0);
            let avg = (&self.derivs[i] + &self.derivs[i + 1]) * c64(0.5, 0.0);
            worst = worst.max(opnorm(&(fd - avg)));
        }
        worst
    }

    /// Columnar dump: `r` followed by Re/Im of each entry of `w` and then of `w′`.
    pub fn to_columnar(&self) -> String {
        let d = self.dim();
        let mut out = String::from("# r");
        for tag in ["w", "dw"] {
            for a in 0..d {
                for b in 0..d {
                    let _ = write!(out, " re_{tag}_{a}{b} im_{tag}_{a}{b}");
                }
            }
        }
        out.push('\n');
        for (i, &r) in self.r.iter().enumerate() {
            let _ = write!(out, "{r:.17e}");
            for m in [&self.values[i], &self.derivs[i]] {
                for a in 0..d {
                    for b in 0..d {
                        let _ = write!(out, " {:.17e} {:.17e}", m[(a, b)].re, m[(a, b)].im);
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Kernel of order `(m, n)`, `1 ≤ m + n ≤ 2`, piecewise linear in `r`.
#[derive(Clone, Debug)]
pub struct KernelMN {
    pub m: usize,
    pub n: usize,
    pub shells: usize,
    pub r: Vec<f64>,
    /// `samples[tuple][ri]`, tuple in lexicographic order over `shells^{m+n}`.
    pub samples: Vec<Vec<CMat>>,
    pub symmetrized: bool,
}

fn tuples(shells: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..shells).map(move |j| {
                    let mut u = t.clone();
                    u.push(j);
                    u
                })
            })
            .collect();
    }
    out
}

fn tuple_index(shells: usize, t: &[usize]) -> usize {
    t.iter().fold(0, |acc, &j| acc * shells + j)
}

fn lerp(a: &CMat, b: &CMat, t: f64) -> CMat {
    a * c64(1.0 - t, 0.0) + b * c64(t, 0.0)
}

impl KernelMN {
    pub fn zeros(m: usize, n: usize, shells: usize, d: usize, n_r: usize) -> Result<Self> {
        if m + n == 0 || m + n > 2 {
            return Err(Error::Dimension(format!("kernel order ({m},{n}) unsupported")));
        }
        let r = r_grid(n_r);
        let count = shells.pow((m + n) as u32);
        let samples = vec![vec![CMat::zeros(d, d); r.len()]; count];
        Ok(Self { m, n, shells, r, samples, symmetrized: true })
    }

    pub fn order(&self) -> usize {
        self.m + self.n
    }

    pub fn dim(&self) -> usize {
        self.samples[0][0].nrows()
    }

    pub fn tuples(&self) -> Vec<Vec<usize>> {
        tuples(self.shells, self.order())
    }

    /// `r`-independent `(1,0)` or `(0,1)` kernel with `w_j = amps_j / √m_j · B`.
    pub fn from_shell_amplitudes(m: usize, n: usize, amps: &[f64], weights: &ShellWeights, b: &CMat, n_r: usize) -> Result<Self> {
        if m + n != 1 {
            return Err(Error::Dimension("shell amplitudes define first-order kernels only".into()));
        }
        let mut k = Self::zeros(m, n, amps.len(), b.nrows(), n_r)?;
        for (j, &a) in amps.iter().enumerate() {
            let v = b * c64(a / weights.measure[j].sqrt(), 0.0);
            k.samples[j] = vec![v; k.r.len()];
        }
        Ok(k)
    }

    /// First-order kernel `g(|k|)·B`, using the `ν`-weighted RMS of `g` on each shell.
    pub fn from_profile(m: usize, n: usize, profile: &Profile, grid: &ModeGrid, weights: &ShellWeights, b: &CMat, n_r: usize) -> Result<Self> {
        if m + n != 1 {
            return Err(Error::Dimension("profiles define first-order kernels only".into()));
        }
        let mut k = Self::zeros(m, n, grid.levels(), b.nrows(), n_r)?;
        let pol = weights.measure[0] / grid.shell_weight(0);
        for j in 0..grid.levels() {
            let moment = crate::model::shell_mu_moment(profile, grid, j, weights.mu, pol)?;
            let v = b * c64((moment / weights.nu[j]).sqrt(), 0.0);
            k.samples[j] = vec![v; k.r.len()];
        }
        Ok(k)
    }

    /// Piecewise-linear value at `r ∈ [0, 1]` for a given tuple.
    pub fn eval(&self, tuple: usize, r: f64) -> CMat {
        let grid = &self.r;
        let n = grid.len();
        let x = r.clamp(0.0, 1.0) * (n - 1) as f64;
        let i = (x.floor() as usize).min(n - 2);
        lerp(&self.samples[tuple][i], &self.samples[tuple][i + 1], x - i as f64)
    }

    /// Average over permutations of the creation and of the annihilation arguments.
    pub fn symmetrize(&mut self) {
        let ts = self.tuples();
        let mut out = self.samples.clone();
        for t in &ts {
            let mut perms = vec![t.clone()];
            if self.m == 2 {
                perms.push(vec![t[1], t[0]]);
            }
            if self.n == 2 {
                perms.push(vec![t[1], t[0]]);
            }
            let idx = tuple_index(self.shells, t);
            for ri in 0..self.r.len() {
                let mut acc = CMat::zeros(self.dim(), self.dim());
                for p in &perms {
                    acc += &self.samples[tuple_index(self.shells, p)][ri];
                }
                out[idx][ri] = acc / c64(perms.len() as f64, 0.0);
            }
        }
        self.samples = out;
        self.symmetrized = true;
    }

    pub fn symmetry_residual(&self) -> f64 {
        if self.order() < 2 || (self.m == 1 && self.n == 1) {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for t in self.tuples() {
            let a = tuple_index(self.shells, &t);
            let b = tuple_index(self.shells, &[t[1], t[0]]);
            for ri in 0..self.r.len() {
                worst = worst.max((&self.samples[a][ri] - &self.samples[b][ri]).norm());
            }
        }
        worst
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut k = self.clone();
        for t in &mut k.samples {
            for m in t.iter_mut() {
                *m *= c64(c, 0.0);
            }
        }
        k
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut k = self.clone();
        for (t, o) in k.samples.iter_mut().zip(&other.samples) {
            for (a, b) in t.iter_mut().zip(o) {
                *a += b;
            }
        }
        k
    }

    /// `sup‖w‖ + sup‖w′‖` of the piecewise-linear interpolant for one tuple.
    fn c1_norm(&self, tuple: usize) -> f64 {
        let s = &self.samples[tuple];
        let sup = s.iter().map(opnorm).fold(0.0, f64::max);
        let dsup = (0..s.len() - 1)
            .map(|i| opnorm(&(&s[i + 1] - &s[i])) / (self.r[i + 1] - self.r[i]))
            .fold(0.0, f64::max);
        sup + dsup
    }
}

/// `‖w_{m,n}‖_μ = (Σ_J Π ν_j ‖w_J‖²_{(1,∞)})^{1/2}`.
pub fn norm_mu(w: &KernelMN, weights: &ShellWeights) -> f64 {
    w.tuples()
        .iter()
        .map(|t| {
            let nu: f64 = t.iter().map(|&j| weights.nu[j]).product();
            nu * w.c1_norm(tuple_index(w.shells, t)).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Discrete `‖·‖_♯` with measure `m_j/ω_j`; the sup over `r` is bounded interval-wise
/// using the endpoint maxima of the piecewise-linear kernel.
pub fn sharp_norm(w: &KernelMN, weights: &ShellWeights) -> f64 {
    let mut total = 0.0;
    for t in w.tuples() {
        let (cre, ann) = t.split_at(w.m);
        let meas: f64 = t.iter().map(|&j| weights.measure[j] / weights.omega[j]).product();
        let top = 1.0 - cre.iter().map(|&j| weights.omega[j]).sum::<f64>().max(ann.iter().map(|&j| weights.omega[j]).sum());
        if top < -1e-12 {
            continue;
        }
        let top = top.max(0.0);
        let prod = |r: f64| -> f64 {
            let mut p = 1.0;
            for part in [cre, ann] {
                let mut acc = r;
                for &j in part {
                    acc += weights.omega[j];
                    p *= acc;
                }
            }
            p
        };
        let s = &w.samples[tuple_index(w.shells, &t)];
        let mut sup: f64 = 0.0;
        for i in 0..w.r.len() - 1 {
            if w.r[i] > top + 1e-15 {
                break;
            }
            let hi = w.r[i + 1].min(top);
            let n2 = opnorm(&s[i]).max(opnorm(&s[i + 1])).powi(2);
            sup = sup.max(n2 * prod(hi));
        }
        total += meas * sup;
    }
    total.sqrt()
}

/// A finite kernel sequence `(w_{0,0}, w_{m,n} …)`.
#[derive(Clone, Debug)]
pub struct KernelSet {
    pub w00: Option<KernelC1>,
    pub higher: Vec<KernelMN>,
}

/// `‖w‖_{μ,ξ} = Σ ξ^{−(m+n)} ‖w_{m,n}‖_μ` with `‖w_{0,0}‖_μ = ‖w_{0,0}‖_{(1,∞)}`.
pub fn norm_mu_xi(w: &KernelSet, weights: &ShellWeights, xi: f64) -> f64 {
    let base = w.w00.as_ref().map(|k| k.norm_c1()).unwrap_or(0.0);
    base + w.higher.iter().map(|k| xi.powi(-(k.order() as i32)) * norm_mu(k, weights)).sum::<f64>()
}

fn check_basis(basis: &FockBasis, weights: &ShellWeights) -> Result<()> {
    if basis.modes() != weights.shells() {
        return Err(Error::Grid(format!("basis has {} modes but kernels {} shells", basis.modes(), weights.shells())));
    }
    Ok(())
}

/// Apply `a_{j_1} … a_{j_k}` (rightmost first) to a basis state.
fn lower_chain(basis: &FockBasis, state: usize, js: &[usize]) -> Option<(Vec<u32>, f64)> {
    let mut occ = basis.state(state).to_vec();
    let mut amp = 1.0;
    for &j in js.iter().rev() {
        if occ[j] == 0 {
            return None;
        }
        amp *= (occ[j] as f64).sqrt();
        occ[j] -= 1;
    }
    Some((occ, amp))
}

fn raise_chain(mut occ: Vec<u32>, js: &[usize]) -> (Vec<u32>, f64) {
    let mut amp = 1.0;
    for &j in js.iter().rev() {
        occ[j] += 1;
        amp *= (occ[j] as f64).sqrt();
    }
    (occ, amp)
}

fn energy(weights: &ShellWeights, occ: &[u32]) -> f64 {
    occ.iter().zip(&weights.omega).map(|(&n, &w)| n as f64 * w).sum()
}

/// `H_{m,n}(w) = P_red ∫ a*(k^{(m)}) w(H_f, K) a(k̃^{(n)}) dK P_red` on `basis`.
pub fn build_hmn(w: &KernelMN, basis: &Arc<FockBasis>, weights: &ShellWeights) -> Result<CMat> {
    check_basis(basis, weights)?;
    let d = w.dim();
    if basis.atomic_dim() != d {
        return Err(Error::Dimension("kernel and basis atomic dimensions differ".into()));
    }
    let f = basis.len();
    let mut out = CMat::zeros(d * f, d * f);
    let ts = w.tuples();
    for src in 0..f {
        for t in &ts {
            let (cre, ann) = t.split_at(w.m);
            let Some((mid, a1)) = lower_chain(basis, src, ann) else { continue };
            let r = energy(weights, &mid);
            let (tgt_occ, a2) = raise_chain(mid, cre);
            let Some(tgt) = basis.index_of(&tgt_occ) else { continue };
            let sq: f64 = t.iter().map(|&j| weights.measure[j].sqrt()).product();
            let block = w.eval(tuple_index(w.shells, t), r) * c64(a1 * a2 * sq, 0.0);
            for a in 0..d {
                for b in 0..d {
                    out[(a * f + tgt, b * f + src)] += block[(a, b)];
                }
            }
        }
    }
    Ok(out)
}

/// `w_{0,0}(H_f)` for a callable `w_{0,0}`.
pub fn build_h00(basis: &FockBasis, w00: impl Fn(f64) -> CMat) -> CMat {
    let f = basis.len();
    let d = basis.atomic_dim();
    let mut out = CMat::zeros(d * f, d * f);
    for i in 0..f {
        let m = w00(basis.energy(i));
        for a in 0..d {
            for b in 0..d {
                out[(a * f + i, b * f + i)] = m[(a, b)];
            }
        }
    }
    out
}

/// Piecewise-linear evaluation of sampled `KernelC1` values.
fn c1_eval(k: &KernelC1, r: f64) -> CMat {
    let n = k.r.len();
    let x = r.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = (x.floor() as usize).min(n - 2);
    lerp(&k.values[i], &k.values[i + 1], x - i as f64)
}

/// `H(w) = Σ H_{m,n}(w)` on the reduced space.
pub fn build_h_of_w(w: &KernelSet, basis: &Arc<FockBasis>, weights: &ShellWeights) -> Result<OperatorMatrix> {
    let n = basis.dim();
    let mut h = CMat::zeros(n, n);
    if let Some(k) = &w.w00 {
        h += build_h00(basis, |r| c1_eval(k, r));
    }
    for k in &w.higher {
        h += build_hmn(k, basis, weights)?;
    }
    OperatorMatrix::new(h, basis.clone())
}

/// Left/right weights of the middle expression in the boundedness bound:
/// `H_f^{-1/2}` on `Ω^⊥` (zero on `Ω`), raised to `power`.
fn hf_inverse_power(basis: &FockBasis, power: usize) -> CMat {
    let f = basis.len();
    let d = basis.atomic_dim();
    let mut m = identity(d * f);
    if power == 0 {
        return m;
    }
    for a in 0..d {
        for i in 0..f {
            let e = basis.energy(i);
            m[(a * f + i, a * f + i)] = if i == 0 || e <= 0.0 { c64(0.0, 0.0) } else { c64(e.powf(-(power as f64) / 2.0), 0.0) };
        }
    }
    m
}

#[derive(Clone, Debug)]
pub struct BoundCheck {
    pub operator_norm: f64,
    /// `‖(P_Ω^⊥ H_f^{-1/2})^m H (P_Ω^⊥ H_f^{-1/2})^n‖`.
    pub weighted_norm: f64,
    pub mu_bound: f64,
    pub sharp_bound: f64,
}

impl BoundCheck {
    pub fn holds(&self, rel: f64) -> bool {
        let ok = |l: f64, r: f64| l <= r * (1.0 + rel) + 1e-300;
        ok(self.operator_norm, self.weighted_norm)
            && ok(self.weighted_norm, self.mu_bound)
            && ok(self.operator_norm, self.sharp_bound)
    }
}

/// Dense norms of `H_{m,n}(w)` against the kernel-norm bounds.
pub fn bound_check(w: &KernelMN, basis: &Arc<FockBasis>, weights: &ShellWeights) -> Result<BoundCheck> {
    let h = build_hmn(w, basis, weights)?;
    let left = hf_inverse_power(basis, w.m);
    let right = hf_inverse_power(basis, w.n);
    let mm = (w.m as f64).powi(w.m as i32) * (w.n as f64).powi(w.n as i32);
    Ok(BoundCheck {
        operator_norm: opnorm(&h),
        weighted_norm: opnorm(&(&left * &h * &right)),
        mu_bound: norm_mu(w, weights) / mm.sqrt(),
        sharp_bound: sharp_norm(w, weights),
    })
}

/// Seeded random kernel, linear in `r`, respecting the reduced-space support condition
/// automatically through `P_red`.
pub fn random_kernel(seed: u64, m: usize, n: usize, shells: usize, d: usize, n_r: usize) -> Result<KernelMN> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut k = KernelMN::zeros(m, n, shells, d, n_r)?;
    let scale = 10f64.powf(rng.gen_range(-2.0..1.0));
    let nr = k.r.len();
    for t in 0..k.samples.len() {
        let a = CMat::from_fn(d, d, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale);
        let b = CMat::from_fn(d, d, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale);
        for ri in 0..nr {
            let r = k.r[ri];
            k.samples[t][ri] = &a + &b * c64(r, 0.0);
        }
    }
    k.symmetrize();
    Ok(k)
}

/// Monotone piecewise-cubic (Fritsch–Carlson) slopes for real data.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 1 {
        return vec![0.0];
    }
    let h: Vec<f64> = (0..n - 1).map(|i| x[i + 1] - x[i]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] <= 0.0 {
            d[i] = 0.0;
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| -> f64 {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s * d0 <= 0.0 {
            0.0
        } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    d[0] = end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

/// `w_{0,0}` recovered from a reduced-space matrix.
#[derive(Clone, Debug)]
pub struct W00 {
    pub nodes: Vec<f64>,
    pub values: Vec<CMat>,
    pub slopes: Vec<CMat>,
    /// Estimated `w_{1,1}` contamination of each one-photon node (0 at `r = 0`).
    pub contamination: Vec<f64>,
}

impl W00 {
    pub fn dim(&self) -> usize {
        self.values[0].nrows()
    }

    fn locate(&self, r: f64) -> usize {
        let n = self.nodes.len();
        match self.nodes.iter().position(|&x| x > r) {
            Some(0) => 0,
            Some(i) => (i - 1).min(n - 2),
            None => n - 2,
        }
    }

    /// Cubic Hermite evaluation; linear extrapolation with the end slope.
    pub fn eval(&self, r: f64) -> CMat {
        let n = self.nodes.len();
        if n == 1 {
            return &self.values[0] + identity(self.dim()) * c64(r - self.nodes[0], 0.0);
        }
        if r <= self.nodes[0] {
            return &self.values[0] + &self.slopes[0] * c64(r - self.nodes[0], 0.0);
        }
        if r >= self.nodes[n - 1] {
            return &self.values[n - 1] + &self.slopes[n - 1] * c64(r - self.nodes[n - 1], 0.0);
        }
        let i = self.locate(r);
        let h = self.nodes[i + 1] - self.nodes[i];
        let t = (r - self.nodes[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        &self.values[i] * c64(h00, 0.0)
            + &self.slopes[i] * c64(h10 * h, 0.0)
            + &self.values[i + 1] * c64(h01, 0.0)
            + &self.slopes[i + 1] * c64(h11 * h, 0.0)
    }

    pub fn deriv(&self, r: f64) -> CMat {
        let n = self.nodes.len();
        if n == 1 {
            return identity(self.dim());
        }
        if r <= self.nodes[0] {
            return self.slopes[0].clone();
        }
        if r >= self.nodes[n - 1] {
            return self.slopes[n - 1].clone();
        }
        let i = self.locate(r);
        let h = self.nodes[i + 1] - self.nodes[i];
        let t = (r - self.nodes[i]) / h;
        let t2 = t * t;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        &self.values[i] * c64(d00, 0.0)
            + &self.slopes[i] * c64(d10, 0.0)
            + &self.values[i + 1] * c64(d01, 0.0)
            + &self.slopes[i + 1] * c64(d11, 0.0)
    }

    pub fn to_c1(&self, n_r: usize) -> KernelC1 {
        KernelC1::from_fn(n_r, |r| self.eval(r), |r| self.deriv(r))
    }

    /// `w_{0,0}(H_f)` on a basis.
    pub fn operator(&self, basis: &FockBasis) -> CMat {
        build_h00(basis, |r| self.eval(r))
    }

    pub fn max_contamination(&self) -> f64 {
        self.contamination.iter().copied().fold(0.0, f64::max)
    }
}

fn block(h: &CMat, f: usize, d: usize, i: usize, j: usize) -> CMat {
    CMat::from_fn(d, d, |a, b| h[(a * f + i, b * f + j)])
}

/// Recover `w_{0,0}` from vacuum and one-photon diagonal blocks.
pub fn extract_w00(h: &CMat, basis: &FockBasis, weights: &ShellWeights) -> Result<W00> {
    check_basis(basis, weights)?;
    let d = basis.atomic_dim();
    let f = basis.len();
    if h.nrows() != d * f {
        return Err(Error::Dimension("matrix does not act on the reduced space".into()));
    }
    let mut pts: Vec<(f64, CMat, f64, Option<usize>)> = vec![(0.0, block(h, f, d, 0, 0), 0.0, None)];
    let ones: Vec<Option<usize>> = (0..basis.modes()).map(|j| basis.one_photon(j)).collect();
    for (j, oj) in ones.iter().enumerate() {
        let Some(ij) = *oj else { continue };
        let mut cont: f64 = 0.0;
        for (i, oi) in ones.iter().enumerate() {
            if let (true, Some(ii)) = (i != j, *oi) {
                let off = opnorm(&block(h, f, d, ii, ij));
                cont = cont.max(2.0 * off * (weights.measure[j] / weights.measure[i]).sqrt());
            }
        }
        pts.push((weights.omega[j], block(h, f, d, ij, ij), cont, Some(j)));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let nodes: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let values: Vec<CMat> = pts.iter().map(|p| p.1.clone()).collect();
    let contamination = pts.iter().map(|p| p.2).collect();
    let mut slopes = vec![CMat::zeros(d, d); nodes.len()];
    for a in 0..d {
        for b in 0..d {
            let re: Vec<f64> = values.iter().map(|m| m[(a, b)].re).collect();
            let im: Vec<f64> = values.iter().map(|m| m[(a, b)].im).collect();
            let (sr, si) = (pchip_slopes(&nodes, &re), pchip_slopes(&nodes, &im));
            for k in 0..nodes.len() {
                slopes[k][(a, b)] = c64(sr[k], si[k]);
            }
        }
    }
    Ok(W00 { nodes, values, slopes, contamination })
}

/// Polydisc parameters with the recursion constants.
#[derive(Clone, Copy, Debug)]
pub struct PolydiscParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub rho: f64,
    pub mu: f64,
    pub xi: f64,
    pub c_chi: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct Admissibility {
    /// `C_γ ρ^μ < 1`.
    pub contracting: bool,
    /// `γ_n ≤ ρ/(8C_χ)` for all `n < levels`.
    pub gamma_condition: bool,
    /// `β_n ≤ ρ/(8C_χ)` for all `n < levels`.
    pub beta_condition: bool,
    /// Summed condition on `(β₀, γ₀)`.
    pub summed_condition: bool,
}

impl PolydiscParams {
    /// Parameters for the RG test polydisc `𝓑(ρ/2, ρ/8, ρ/8)` with `ξ = √ρ/(4C_χ)`.
    pub fn for_rg(rho: f64, mu: f64, c_chi: f64) -> Self {
        Self { alpha: rho / 2.0, beta: rho / 8.0, gamma: rho / 8.0, rho, mu, xi: rho.sqrt() / (4.0 * c_chi), c_chi }
    }

    pub fn c_beta(&self) -> f64 {
        1.5 * self.c_chi
    }

    pub fn c_gamma(&self) -> f64 {
        128.0 * self.c_chi * self.c_chi
    }

    /// One application of the parameter map `(α, β, γ) ↦ (α′, β′, γ′)`.
    pub fn step(&self, beta: f64, gamma: f64) -> (f64, f64, f64) {
        let a = self.c_beta() * gamma * gamma / self.rho;
        (a, beta + a, self.c_gamma() * self.rho.powf(self.mu) * gamma)
    }

    pub fn admissibility(&self, beta0: f64, gamma0: f64, levels: usize) -> Admissibility {
        let q = self.c_gamma() * self.rho.powf(self.mu);
        let bound = self.rho / (8.0 * self.c_chi);
        let mut gamma_ok = true;
        let mut beta_ok = true;
        for n in 0..levels {
            let g = q.powi(n as i32) * gamma0;
            let geo: f64 = (0..n).map(|k| q.powi(2 * k as i32)).sum();
            let b = beta0 + self.c_beta() / self.rho * geo * gamma0 * gamma0;
            gamma_ok &= g <= bound;
            beta_ok &= b <= bound;
        }
        let summed = q < 1.0 && beta0 + self.c_beta() / self.rho / (1.0 - q * q) * gamma0 * gamma0 <= bound;
        Admissibility { contracting: q < 1.0, gamma_condition: gamma_ok, beta_condition: beta_ok, summed_condition: summed }
    }
}

#[derive(Clone, Debug)]
pub struct PolydiscReport {
    pub alpha_hat: f64,
    pub beta_hat: f64,
    /// `‖H − w_{0,0}(H_f)‖`, an operator-norm surrogate for `‖w − w_{0,0}‖_{μ,ξ}`.
    pub gamma_hat: f64,
    pub member: bool,
    pub contamination: f64,
}

pub const SURROGATE_NOTE: &str =
    "gamma_hat is the operator norm of H - w00(H_f), a lower surrogate for the kernel norm; membership is necessary, not certified";

pub fn polydisc_check(h: &CMat, basis: &FockBasis, weights: &ShellWeights, params: &PolydiscParams, n_r: usize) -> Result<(PolydiscReport, W00)> {
    let w = extract_w00(h, basis, weights)?;
    let d = w.dim();
    let alpha_hat = opnorm(&w.values[0]);
    let beta_hat = r_grid(n_r).into_iter().map(|r| opnorm(&(w.deriv(r) - identity(d)))).fold(0.0, f64::max);
    let gamma_hat = opnorm(&(h - w.operator(basis)));
    let member = alpha_hat <= params.alpha && beta_hat <= params.beta && gamma_hat <= params.gamma;
    Ok((PolydiscReport { alpha_hat, beta_hat, gamma_hat, member, contamination: w.max_contamination() }, w))
}

/// Scalar `1` as a `d × d` matrix.
pub fn unit(d: usize) -> CMat {
    CMat::from_element(1, 1, ONE).kronecker(&identity(d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_fock_basis, creation_op, field_energy};

    fn setup(d: usize) -> (ModeGrid, Arc<FockBasis>, ShellWeights) {
        let grid = ModeGrid::new(0.5, 5).unwrap();
        let basis = Arc::new(build_fock_basis(&grid, 2, 1.0, d).unwrap());
        let w = ShellWeights::new(&grid, 0.5, 1.0);
        (grid, basis, w)
    }

    #[test]
    fn c1_norm_examples() {
        let k = KernelC1::from_fn(101, |r| unit(2) * c64(r, 0.0), |_| unit(2));
        assert!((k.norm_c1() - 2.0).abs() < 1e-15);
        let z = KernelC1::from_fn(11, |_| CMat::zeros(2, 2), |_| CMat::zeros(2, 2));
        assert_eq!(z.norm_c1(), 0.0);
        let q = KernelC1::from_fn(101, |r| unit(1) * c64(r * r, 0.0), |r| unit(1) * c64(2.0 * r, 0.0));
        assert!((q.norm_c1() - 3.0).abs() < 1e-12);
        assert!(q.consistency_residual() < 1e-12);
        assert!(q.to_columnar().lines().count() == 102);
    }

    #[test]
    fn profile_norm_matches_closed_form() {
        let grid = ModeGrid::new(0.5, 12).unwrap();
        let w = ShellWeights::new(&grid, 0.5, 1.0);
        let p = Profile::Power { exponent: 1.0, amplitude: 1.0 };
        let k = KernelMN::from_profile(0, 1, &p, &grid, &w, &unit(1), 11).unwrap();
        let exact = 4.0 * PI * (1.0 - 0.5f64.powi(24)) / 2.0;
        assert!((norm_mu(&k, &w).powi(2) - exact).abs() < 1e-12 * exact);
        let k3 = k.scaled(-3.0);
        assert!((norm_mu(&k3, &w) - 3.0 * norm_mu(&k, &w)).abs() < 1e-12);
        assert_eq!(norm_mu(&k.scaled(0.0), &w), 0.0);
        assert_eq!(sharp_norm(&k.scaled(0.0), &w), 0.0);
    }

    #[test]
    fn first_order_kernel_matches_field_operator() {
        let (_, basis, w) = setup(2);
        let amps: Vec<f64> = (0..5).map(|j| 0.3 / (j as f64 + 1.0)).collect();
        let b = CMat::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(0.5, 0.0), c64(-0.5, 0.0), c64(1.0, 0.0)]);
        let k = KernelMN::from_shell_amplitudes(1, 0, &amps, &w, &b, 11).unwrap();
        let h = build_hmn(&k, &basis, &w).unwrap();
        let coeffs: Vec<CMat> = amps.iter().map(|&a| &b * c64(a, 0.0)).collect();
        let c = creation_op(&basis, &coeffs).unwrap().mat;
        assert!((h - c).norm() < 1e-12);
    }

    #[test]
    fn h00_identity_is_field_energy() {
        let (_, basis, w) = setup(1);
        let set = KernelSet { w00: Some(KernelC1::from_fn(101, |r| unit(1) * c64(r, 0.0), |_| unit(1))), higher: vec![] };
        let h = build_h_of_w(&set, &basis, &w).unwrap().mat;
        assert!((h - field_energy(&basis).mat).norm() < 1e-12);
    }

    #[test]
    fn boundedness_on_random_kernels() {
        let (_, basis, w) = setup(2);
        let xi = 0.5f64.sqrt() / 4.0;
        let orders = [(1, 0), (0, 1), (1, 1), (2, 0), (0, 2)];
        for seed in 0..50u64 {
            let mut set = KernelSet { w00: None, higher: vec![] };
            let mut total = CMat::zeros(basis.dim(), basis.dim());
            for (k, &(m, n)) in orders.iter().enumerate() {
                let kern = random_kernel(seed * 10 + k as u64, m, n, 5, 2, 11).unwrap();
                let bc = bound_check(&kern, &basis, &w).unwrap();
                assert!(bc.holds(1e-12), "seed {seed} ({m},{n}): {bc:?}");
                total += build_hmn(&kern, &basis, &w).unwrap();
                set.higher.push(kern);
            }
            let nrm = opnorm(&total);
            assert!(nrm <= xi * norm_mu_xi(&set, &w, xi) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn extraction_roundtrip_and_contamination() {
        let (_, basis, w) = setup(2);
        let f = |r: f64| CMat::from_row_slice(2, 2, &[c64(0.1 + r, 0.0), c64(0.2 * r, 0.1), c64(0.0, 0.0), c64(-0.3 + 1.1 * r, 0.0)]);
        let h = build_h00(&basis, f);
        let ex = extract_w00(&h, &basis, &w).unwrap();
        for (k, &r) in ex.nodes.iter().enumerate() {
            assert!((&ex.values[k] - f(r)).norm() < 1e-15);
        }
        // f is affine, so the monotone cubic reproduces it everywhere.
        assert!((ex.eval(0.37) - f(0.37)).norm() < 1e-13);
        let mut k11 = KernelMN::zeros(1, 1, 5, 2, 11).unwrap();
        for t in 0..k11.samples.len() {
            k11.samples[t] = vec![unit(2) * c64(0.7, 0.2); 11];
        }
        let h = build_hmn(&k11, &basis, &w).unwrap();
        let ex = extract_w00(&h, &basis, &w).unwrap();
        for (k, v) in ex.values.iter().enumerate() {
            assert!(opnorm(v) <= ex.contamination[k] + 1e-15);
        }
    }

    #[test]
    fn polydisc_of_field_energy() {
        let (_, basis, w) = setup(1);
        let h = field_energy(&basis).mat;
        let (rep, _) = polydisc_check(&h, &basis, &w, &PolydiscParams::for_rg(0.5, 0.5, 1.0), 101).unwrap();
        assert!(rep.alpha_hat < 1e-15 && rep.beta_hat < 1e-12 && rep.gamma_hat < 1e-15);
        assert!(rep.member);
    }

    #[test]
    fn parameter_recursion() {
        let p = PolydiscParams::for_rg(0.5, 0.5, 1.0);
        assert_eq!(p.c_beta(), 1.5);
        assert_eq!(p.c_gamma(), 128.0);
        let (a, b, g) = p.step(0.01, 0.02);
        assert!((a - 1.5 * 0.0004 / 0.5).abs() < 1e-16);
        assert!((b - 0.01 - a).abs() < 1e-16);
        assert!((g - 128.0 * 0.5f64.sqrt() * 0.02).abs() < 1e-15);
        assert!(!p.admissibility(0.0, 1e-3, 4).contracting);
        let small = PolydiscParams { mu: 8.0, ..p };
        assert!(small.admissibility(0.0, 1e-3, 8).summed_condition);
    }
}
