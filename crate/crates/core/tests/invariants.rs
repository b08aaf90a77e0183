use std::sync::Arc;

use fsrg::feshbach::{chi1, chibar1, isospectrality_suite, random_pair, CutoffSpec};
use fsrg::fock::{build_fock_basis, relative_bound_check, verify_pull_through, ModeGrid};
use fsrg::linalg::{c64, CMat};
use fsrg::pipeline::dilation_algebra;
use fsrg::symmetry::{is_symmetry_of, pauli, SymmetryGroup, SymmetryOp};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cutoffs_partition_unity(r in 0.0f64..3.0, rho in 0.05f64..1.0) {
        let s = chi1(r).powi(2) + chibar1(r).powi(2);
        prop_assert!((s - 1.0).abs() < 1e-14);
        let c = CutoffSpec::new(rho).unwrap();
        prop_assert!((0.0..=1.0).contains(&c.chi(r)));
        prop_assert!(c.chi(r) == 1.0 || r > 0.75 * rho - 1e-15);
    }

    #[test]
    fn random_pairs_are_isospectral(seed in any::<u64>(), re in -0.1f64..0.1, im in -0.1f64..0.1) {
        let p = random_pair(seed, 24);
        let r = isospectrality_suite(&p.h, &p.t, &p.cutoffs, &[c64(0.0, 0.0), c64(re, im)]).unwrap();
        prop_assert!(r.kernels_match());
        prop_assert_eq!(r.probes[0].kernel_h, p.planted);
        prop_assert!(r.max_identity_residual() < 1e-9, "{}", r.max_identity_residual());
    }

    #[test]
    fn pull_through_for_any_profile(ratio in 0.3f64..0.7, levels in 2usize..6, a in 0.1f64..4.0, p in -1.0f64..2.0) {
        let grid = ModeGrid::new(ratio, levels).unwrap();
        let basis = build_fock_basis(&grid, 2, 2.0, 1).unwrap();
        for j in 0..levels {
            let r = verify_pull_through(&basis, |e| (1.0 + a * e).powf(p), j);
            prop_assert!(r < 1e-12, "mode {j}: {r:e}");
        }
    }

    #[test]
    fn dilation_is_an_isometric_rescaling(ratio in 0.3f64..0.7, levels in 2usize..7, d in 1usize..3) {
        let grid = ModeGrid::new(ratio, levels).unwrap();
        let basis = build_fock_basis(&grid, 2, 1.0, d).unwrap();
        let (iso, scale) = dilation_algebra(&basis, ratio).unwrap();
        prop_assert!(iso < 1e-12 && scale < 1e-12, "{iso:e} {scale:e}");
    }

    #[test]
    fn field_operators_are_relatively_bounded(seed in any::<u64>(), x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let grid = ModeGrid::new(0.5, 4).unwrap();
        let basis = Arc::new(build_fock_basis(&grid, 2, 2.0, 2).unwrap());
        let [sx, sy, _] = pauli();
        let coeffs: Vec<CMat> = (0..4).map(|j| (&sx * c64(x, 0.0) + &sy * c64(y, 0.0)) * c64(0.5f64.powi(j), 0.0)).collect();
        let r = relative_bound_check(&basis, &coeffs, seed, 20).unwrap();
        prop_assert_eq!(r.violations, 0);
    }

    #[test]
    fn group_averages_are_symmetric(seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let [sx, _, sz] = pauli();
        let gens: Vec<SymmetryOp> = [sx, sz].into_iter().map(|m| SymmetryOp::unitary(m).unwrap()).collect();
        let group = SymmetryGroup::generate(2, gens).unwrap();
        let t = CMat::from_fn(2, 2, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let mut avg = CMat::zeros(2, 2);
        for u in &group.elements {
            avg += &u.matrix * &t * u.matrix.adjoint();
        }
        for u in &group.elements {
            prop_assert!(is_symmetry_of(u, &avg, 1e-12).0);
        }
        // Irreducible action: the average is a multiple of the identity.
        let off = avg[(0, 1)].norm() + avg[(1, 0)].norm() + (avg[(0, 0)] - avg[(1, 1)]).norm();
        prop_assert!(off < 1e-12, "{off:e}");
    }
}
