//! End-to-end acceptance run: one line per criterion, non-zero exit on any failure.

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use fsrg::config::Fixture;
use fsrg::feshbach::{first_cutoffs, free_part, isospectrality_suite, random_pair};
use fsrg::fock::{build_fock_basis, relative_bound_check, verify_pull_through};
use fsrg::kernels::{bound_check, random_kernel, KernelMN, ShellWeights};
use fsrg::linalg::{c64, opnorm, rank, CMat};
use fsrg::model::{evaluate, spectral_projection, ModelSpec};
use fsrg::oracle::loglog_slope;
use fsrg::pipeline::{analyticity_probe, dilation_algebra, run_at, run_pipeline, sweep_g, RunReport};
use fsrg::symmetry::transformation_function;
use num_complex::Complex64;

const FIXTURES: [Fixture; 4] = [Fixture::Triv, Fixture::Exact, Fixture::Pauli, Fixture::Kramers];

/// Ground energies at `g = 0.1` from the standalone reference diagonalization in `common`.
const GROUND_TK: f64 = -2.596_086_300_833_888_2e-2;
const GROUND_KRAMERS: f64 = -3.244_450_346_838_287_4e-2;

fn frozen_ground(f: Fixture) -> f64 {
    if f == Fixture::Kramers {
        GROUND_KRAMERS
    } else {
        GROUND_TK
    }
}

fn file_of(f: Fixture) -> &'static str {
    match f {
        Fixture::Triv => "m-triv.json",
        Fixture::Exact => "m-exact.json",
        Fixture::Pauli => "m-pauli.json",
        Fixture::Kramers => "m-kramers.json",
    }
}

struct Outcome {
    label: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

struct Runs {
    specs: Vec<ModelSpec>,
    reports: Vec<RunReport>,
    times: Vec<Duration>,
}

impl Runs {
    fn get(&self, f: Fixture) -> (&ModelSpec, &RunReport) {
        let i = FIXTURES.iter().position(|&g| g == f).unwrap();
        (&self.specs[i], &self.reports[i])
    }
}

fn worst(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, f64::max)
}

fn isospectrality(runs: &Runs) -> (bool, String) {
    let t = Instant::now();
    let mut mismatches = 0;
    let mut resid: f64 = 0.0;
    for k in 0..100 {
        let p = random_pair(20_240 + k, 40);
        let r = isospectrality_suite(&p.h, &p.t, &p.cutoffs, &[c64(0.0, 0.0), c64(0.03, -0.02)]).unwrap();
        mismatches += (!r.kernels_match()) as usize;
        mismatches += (r.probes[0].kernel_h != p.planted) as usize;
        resid = resid.max(r.max_identity_residual());
    }
    let random_time = t.elapsed();
    let mut fixture_kernels = Vec::new();
    for (spec, rep) in runs.specs.iter().zip(&runs.reports) {
        let full = spec.full_basis().unwrap();
        let point = evaluate(spec, spec.s0).unwrap();
        let h = point.hamiltonian(&full).unwrap();
        let t0 = free_part(&point, c64(0.0, 0.0), &full);
        let cut = first_cutoffs(&full, spec.d);
        let z = rep.z_inf;
        let r = isospectrality_suite(&h, &t0, &cut, &[z, z + c64(0.004, 0.002)]).unwrap();
        mismatches += (!r.kernels_match()) as usize;
        mismatches += (r.probes[0].kernel_h != spec.d) as usize;
        mismatches += (r.probes[1].kernel_h != 0) as usize;
        resid = resid.max(r.max_identity_residual());
        fixture_kernels.push(r.probes[0].kernel_f);
    }
    let pass = mismatches == 0 && resid < 1e-9 && random_time < Duration::from_secs(10);
    (pass, format!("kernel mismatches {mismatches}, identity residual {resid:.2e}, random pairs {random_time:.2?}, fixture kernels {fixture_kernels:?}"))
}

fn end_to_end(runs: &Runs) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, &f) in FIXTURES.iter().enumerate() {
        let r = &runs.reports[i];
        let reference = common::reference_spectrum(file_of(f), 0.1)[0];
        let frozen = (r.z_inf - c64(frozen_ground(f), 0.0)).norm();
        let indep = (reference - frozen_ground(f)).abs();
        let ok = r.eigenvalue_error < 1e-7 && frozen < 1e-9 && indep < 1e-12 && runs.times[i] < Duration::from_secs(60);
        pass &= ok;
        parts.push(format!("{} {:.1e}/{:.1e} in {:.1?}", r.name, r.eigenvalue_error, frozen, runs.times[i]));
    }
    (pass, parts.join(", "))
}

fn degeneracy(runs: &Runs) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for f in [Fixture::Pauli, Fixture::Kramers] {
        let (_, r) = runs.get(f);
        let ev = &r.eigenvectors;
        let reference = common::reference_spectrum(file_of(f), 0.1);
        let ref_split = (reference[1] - reference[0]).abs();
        let ref_gap = reference[2] - reference[1];
        let ok = ev.vectors.len() == 2
            && ev.gram_min_sv > 1e-3 * ev.gram_max_sv
            && r.oracle_multiplicity == 2
            && r.oracle_gap > 10.0 * r.oracle_cluster_tol
            && ref_split < 1e-12
            && ref_gap > 1e-3;
        pass &= ok;
        parts.push(format!(
            "{}: vectors {}, gram {:.3}..{:.3}, multiplicity {}, gap/tol {:.1e}",
            r.name,
            ev.vectors.len(),
            ev.gram_min_sv,
            ev.gram_max_sv,
            r.oracle_multiplicity,
            r.oracle_gap / r.oracle_cluster_tol
        ));
    }
    (pass, parts.join("; "))
}

fn schur(runs: &Runs) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for f in [Fixture::Exact, Fixture::Pauli, Fixture::Kramers] {
        let (_, r) = runs.get(f);
        let w = worst(r.schur_by_level.iter().copied());
        pass &= r.schur_by_level.len() >= 8 && w < 1e-9;
        parts.push(format!("{} {} levels max {:.1e}", r.name, r.schur_by_level.len(), w));
    }
    (pass, parts.join(", "))
}

fn rate(runs: &Runs) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for (spec, r) in runs.specs.iter().zip(&runs.reports) {
        let bound = 1.2 * spec.grid.ratio();
        let v = r.rate.unwrap_or(f64::INFINITY);
        pass &= v <= bound;
        parts.push(format!("{} {v:.4}", r.name));
    }
    (pass, format!("{} (bound {:.2})", parts.join(", "), 1.2 * runs.specs[0].grid.ratio()))
}

fn operator_bounds(runs: &Runs) -> (bool, String) {
    let mut field = 0;
    let mut kernel = 0;
    let mut samples = 0;
    for (k, spec) in runs.specs.iter().enumerate() {
        let full = spec.full_basis().unwrap();
        let g1 = spec.g1.eval_reflected_adjoint(spec.s0);
        let g2 = spec.g2.eval(spec.s0);
        let amps = spec.shell_amplitudes().unwrap();
        for b in [&g1, &g2] {
            let coeffs: Vec<CMat> = amps.iter().map(|&a| b * c64(spec.g * a, 0.0)).collect();
            let r = relative_bound_check(&full, &coeffs, 11 + k as u64, 100).unwrap();
            field += r.violations;
            samples += r.samples;
        }
        let weights = ShellWeights::new(&spec.grid, spec.mu, spec.polarization);
        let kb = Arc::new(build_fock_basis(&spec.grid, 2, 1.0, spec.d_at).unwrap());
        for (m, n, b) in [(1, 0, &g1), (0, 1, &g2)] {
            let w = KernelMN::from_shell_amplitudes(m, n, &amps, &weights, &(b * c64(spec.g, 0.0)), 11).unwrap();
            kernel += (!bound_check(&w, &kb, &weights).unwrap().holds(1e-12)) as usize;
        }
    }
    let spec = &runs.specs[0];
    let weights = ShellWeights::new(&spec.grid, spec.mu, spec.polarization);
    let kb = Arc::new(build_fock_basis(&spec.grid, 2, 1.0, 1).unwrap());
    for k in 0..100u64 {
        let (m, n) = [(0, 1), (1, 0), (1, 1), (0, 2), (2, 0)][(k % 5) as usize];
        let w = random_kernel(500 + k, m, n, spec.grid.levels(), 1, 11).unwrap();
        kernel += (!bound_check(&w, &kb, &weights).unwrap().holds(1e-12)) as usize;
    }
    (field == 0 && kernel == 0, format!("field-operator violations {field}/{samples}, kernel-bound violations {kernel}/108"))
}

fn algebra(runs: &Runs) -> (bool, String) {
    let (mut pull, mut iso, mut scale): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for spec in &runs.specs {
        let full = spec.full_basis().unwrap();
        for j in 0..full.modes() {
            pull = pull.max(verify_pull_through(&full, |r| (1.0 + r).recip(), j));
            pull = pull.max(verify_pull_through(&full, |r| (-r).exp() * r.sqrt(), j));
        }
        let reduced = build_fock_basis(&spec.grid, spec.n_max, 1.0, spec.d).unwrap();
        for b in [&*full, &reduced] {
            let (i, s) = dilation_algebra(b, spec.grid.ratio()).unwrap();
            iso = iso.max(i);
            scale = scale.max(s);
        }
    }
    (pull < 1e-12 && iso < 1e-12 && scale < 1e-12, format!("pull-through {pull:.1e}, isometry {iso:.1e}, scaling {scale:.1e}"))
}

fn small_coupling(runs: &Runs) -> (bool, String) {
    let probes = common::settings().1;
    let mut pass = true;
    let mut parts = Vec::new();
    for (f, two_sided) in [(Fixture::Exact, true), (Fixture::Pauli, false)] {
        let (spec, _) = runs.get(f);
        let s = sweep_g(spec, &common::settings().0, &probes, two_sided).unwrap();
        let shifts: Vec<f64> = probes.g_sweep.iter().map(|&g| common::reference_spectrum(file_of(f), g)[0].abs()).collect();
        let reference = loglog_slope(&probes.g_sweep, &shifts);
        let ok = s.all_pass() && (reference - s.oracle.exponent).abs() < 1e-6;
        pass &= ok;
        parts.push(format!(
            "{} exponent {:.4} (rg {:.4}, reference {:.4}), distances {}",
            spec.name,
            s.oracle.exponent,
            s.rg_exponent,
            reference,
            if s.oracle.monotone { "monotone" } else { "not monotone" }
        ));
    }
    (pass, parts.join("; "))
}

fn analyticity(runs: &Runs) -> (bool, String) {
    let (rg, probes) = common::settings();
    let (mut contour, mut cr, mut refl): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut pass = true;
    for spec in &runs.specs {
        let a = analyticity_probe(spec, &rg, &probes).unwrap();
        pass &= a.all_pass() && a.reflection.is_some() == spec.reflection_symmetric;
        contour = contour.max(a.contour_residual);
        cr = cr.max(a.cauchy_riemann);
        refl = refl.max(a.reflection.unwrap_or(0.0));
    }
    pass &= contour < 1e-6 && cr < 1e-4 && refl < 1e-8;
    (pass, format!("contour {contour:.1e}, Cauchy-Riemann {cr:.1e}, reflection {refl:.1e} (r_c = {})", probes.contour_radius))
}

fn ground_state(runs: &Runs) -> (bool, String) {
    let mut pass = true;
    let mut w: f64 = 0.0;
    for r in &runs.reports {
        pass &= r.ground_error <= 1e-8;
        w = w.max(r.ground_error);
    }
    let rg = common::settings().0;
    let mut off = Vec::new();
    for f in [Fixture::Triv, Fixture::Pauli] {
        let (spec, _) = runs.get(f);
        let s = spec.s0 + spec.window.s_radius * 0.5;
        let r = run_at(spec, s, &rg).unwrap();
        pass &= r.ground_error <= 1e-8 && r.z_inf.im.abs() <= 1e-9;
        off.push(format!("{} at s = {:.2}: {:.1e}", r.name, s.re, r.ground_error));
    }
    (pass, format!("max at s0 {w:.1e}; {}", off.join(", ")))
}

fn symmetry(runs: &Runs) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for f in [Fixture::Exact, Fixture::Pauli, Fixture::Kramers] {
        let (_, r) = runs.get(f);
        let m = worst(r.symmetry_by_level.iter().copied());
        pass &= r.symmetry_by_level.len() == r.trace.depth() + 1 && m < 1e-9;
        parts.push(format!("{} depth {} max {:.1e}", r.name, r.trace.depth(), m));
    }
    (pass, parts.join(", "))
}

/// Rank-2 spectral projection of `diag(0, 0, 1, 1) + sV` along a straight path.
fn projection_path(dir: Complex64, h: f64, n: usize) -> Vec<CMat> {
    let h0 = fsrg::linalg::diag_real(&[0.0, 0.0, 1.0, 1.0]);
    let mut v = CMat::zeros(4, 4);
    for (i, j, x) in [(0, 2, 1.0), (1, 3, 0.7), (0, 3, 0.4), (0, 1, 0.2)] {
        v[(i, j)] = c64(x, 0.0);
        v[(j, i)] = c64(x, 0.0);
    }
    (0..n)
        .map(|k| {
            let s = dir * (k as f64 * h);
            spectral_projection(&(&h0 + &v * s), c64(0.0, 0.0), 0.5, 64).unwrap()
        })
        .collect()
}

fn transport() -> (bool, String) {
    let h = 1e-3;
    let n = 201;
    let real = projection_path(c64(1.0, 0.0), h, n);
    let diag = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
    let complex = projection_path(diag, h, n);
    let tr = transformation_function(&real, c64(h, 0.0)).unwrap();
    let tc = transformation_function(&complex, diag * h).unwrap();
    let ranks_ok = real.iter().chain(&complex).all(|p| rank(p, 1e-8) == 2);
    let moved = opnorm(&(&real[n - 1] - &real[0]));
    let conj = tr.conjugation_residual(&real).max(tc.conjugation_residual(&complex));
    let inv = tr.inverse_residual().max(tc.inverse_residual());
    let unit = tr.unitarity_residual();
    let pass = ranks_ok && moved > 0.1 && conj < 1e-8 && inv < 1e-8 && unit < 1e-8;
    (pass, format!("conjugation {conj:.1e}, inverse {inv:.1e}, unitarity (real path) {unit:.1e}, projection moved {moved:.2}"))
}

fn main() {
    let (rg, _) = common::settings();
    let mut specs = Vec::new();
    let mut reports = Vec::new();
    let mut times = Vec::new();
    for f in FIXTURES {
        let spec = common::spec(f);
        let t = Instant::now();
        let r = run_pipeline(&spec, &rg).unwrap_or_else(|e| panic!("{}: {e}", f.name()));
        times.push(t.elapsed());
        specs.push(spec);
        reports.push(r);
    }
    let runs = Runs { specs, reports, times };

    type Criterion = (&'static str, Box<dyn Fn(&Runs) -> (bool, String)>);
    let criteria: Vec<Criterion> = vec![
        ("Feshbach isospectrality", Box::new(isospectrality)),
        ("end-to-end eigenvalue", Box::new(end_to_end)),
        ("symmetry-protected degeneracy", Box::new(degeneracy)),
        ("Schur scalarization", Box::new(schur)),
        ("convergence rate", Box::new(rate)),
        ("operator inequalities", Box::new(operator_bounds)),
        ("pull-through and dilation", Box::new(algebra)),
        ("small-coupling limits", Box::new(small_coupling)),
        ("analyticity probes", Box::new(analyticity)),
        ("ground-state identity", Box::new(ground_state)),
        ("symmetry preservation", Box::new(symmetry)),
        ("transformation function", Box::new(|_: &Runs| transport())),
    ];

    let mut outcomes = Vec::new();
    for (label, f) in &criteria {
        let t = Instant::now();
        let (pass, detail) = f(&runs);
        outcomes.push(Outcome { label, pass, detail, elapsed: t.elapsed() });
    }
    println!();
    for (i, o) in outcomes.iter().enumerate() {
        println!("[{:>2}] {:<30} {}  {:>8.2?}  {}", i + 1, o.label, if o.pass { "PASS" } else { "FAIL" }, o.elapsed, o.detail);
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("\nacceptance: {} of {} criteria pass", outcomes.len() - failed, outcomes.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
