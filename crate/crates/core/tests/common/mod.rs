//! Helpers shared by the integration tests, including a dense reference
//! diagonalization written directly against the fixture JSON.
#![allow(dead_code)]

use std::path::PathBuf;

use fsrg::config::{Fixture, ProbeSettings, RgSettings};
use fsrg::model::ModelSpec;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde_json::Value;

pub fn fixture_path(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(file)
}

pub fn spec(f: Fixture) -> ModelSpec {
    ModelSpec::from_config(&f.config()).expect("fixture parses")
}

pub fn settings() -> (RgSettings, ProbeSettings) {
    (RgSettings::default(), ProbeSettings::default())
}

fn json_matrix(v: &Value) -> DMatrix<Complex64> {
    let rows = v.as_array().unwrap();
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| {
        let e = &rows[i][j];
        Complex64::new(e[0].as_f64().unwrap(), e[1].as_f64().unwrap())
    })
}

fn occupations(omegas: &[f64], n_max: u32, e_cut: f64) -> Vec<Vec<u32>> {
    let mut out = vec![vec![0; omegas.len()]];
    let mut frontier = out.clone();
    for _ in 0..n_max {
        let mut next = Vec::new();
        for s in &frontier {
            // Add one photon at or after the last occupied mode, so each multiset appears once.
            let start = s.iter().rposition(|&n| n > 0).unwrap_or(0);
            for j in start..omegas.len() {
                let mut t = s.clone();
                t[j] += 1;
                let e: f64 = t.iter().zip(omegas).map(|(&n, &w)| n as f64 * w).sum();
                if e <= e_cut + 1e-12 {
                    next.push(t);
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Spectrum of `H_at(0) ⊗ 1 + 1 ⊗ H_f + g Σ_j g_j (G₁* ⊗ a_j + G₂ ⊗ a_j*)` at `s = 0`,
/// ascending, for a fixture whose operators are self-adjoint there.
pub fn reference_spectrum(file: &str, g: f64) -> Vec<f64> {
    let text = std::fs::read_to_string(fixture_path(file)).unwrap();
    let m: Value = serde_json::from_str(&text).unwrap();
    let rho = m["grid"]["ratio"].as_f64().unwrap();
    let levels = m["grid"]["levels"].as_u64().unwrap() as usize;
    let n_max = m["truncation"]["max_photons"].as_u64().unwrap() as u32;
    let e_cut = m["truncation"]["energy_cutoff"].as_f64().unwrap();
    let pol = m["polarization_factor"].as_f64().unwrap();
    let prof = &m["coupling"]["profile"];
    assert_eq!(prof["kind"], "power");
    let (ex, amp) = (prof["exponent"].as_f64().unwrap(), prof["amplitude"].as_f64().unwrap());

    let omegas: Vec<f64> = (0..levels).map(|j| rho.powi(j as i32)).collect();
    let p = 2.0 * ex + 3.0;
    let gj: Vec<f64> = omegas
        .iter()
        .map(|&hi| {
            let lo = hi * rho;
            (pol * 4.0 * std::f64::consts::PI * amp * amp * (hi.powf(p) - lo.powf(p)) / p).sqrt()
        })
        .collect();

    let h_at = json_matrix(&m["atomic_hamiltonian"][0]);
    let g1 = json_matrix(&m["coupling"]["annihilation"][0]).adjoint();
    let g2 = json_matrix(&m["coupling"]["creation"][0]);
    let da = h_at.nrows();

    let states = occupations(&omegas, n_max, e_cut);
    let nf = states.len();
    let index = |s: &[u32]| states.iter().position(|t| t == s);
    let mut h = DMatrix::<Complex64>::zeros(da * nf, da * nf);
    for (i, s) in states.iter().enumerate() {
        let e: f64 = s.iter().zip(&omegas).map(|(&n, &w)| n as f64 * w).sum();
        for a in 0..da {
            for b in 0..da {
                h[(a * nf + i, b * nf + i)] += h_at[(a, b)];
            }
            h[(a * nf + i, a * nf + i)] += Complex64::new(e, 0.0);
        }
        for j in 0..levels {
            let mut t = s.clone();
            t[j] += 1;
            if let Some(k) = index(&t) {
                // ⟨t| a_j* |s⟩ = √(n_j + 1)
                let c = g * gj[j] * (t[j] as f64).sqrt();
                for a in 0..da {
                    for b in 0..da {
                        h[(a * nf + k, b * nf + i)] += g2[(a, b)] * c;
                        h[(b * nf + i, a * nf + k)] += g1[(b, a)] * c;
                    }
                }
            }
        }
    }
    let herm = (&h - h.adjoint()).norm();
    assert!(herm < 1e-12, "reference Hamiltonian is not self-adjoint ({herm:e})");
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}
