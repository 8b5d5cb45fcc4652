use std::sync::Arc;

use elastmix::assembly::{assemble, DofMap};
use elastmix::element::{local_from_dofs, stress_dofs, stress_dim};
use elastmix::grid::{ElementBox, IndexSpace, TensorGrid};
use elastmix::interpolate::{interp_stress, project_displacement};
use elastmix::material::LameParams;
use elastmix::verify::fit_rate;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flatten_round_trips(extents in prop::collection::vec(1usize..6, 1..5), seed in 0usize..10_000) {
        let space = IndexSpace::new(extents);
        let flat = seed % space.len();
        let idx = space.unflatten(flat);
        prop_assert!(space.contains(&idx));
        prop_assert_eq!(space.flatten(&idx), flat);
    }

    #[test]
    fn unknown_counts(dim in 2usize..5, n in 1usize..5) {
        let grid = TensorGrid::unit(dim, n).unwrap();
        let dofs = DofMap::new(&grid);
        let ridges = dim * (dim - 1) / 2 * (n + 1).pow(2) * n.pow(dim as u32 - 2);
        let expected = dim * (n + 1) * n.pow(dim as u32 - 1) + dim * n.pow(dim as u32) + ridges;
        prop_assert_eq!(dofs.stress_len(), expected);
        prop_assert_eq!(dofs.disp_len(), 2 * dim * n.pow(dim as u32));
    }

    #[test]
    fn local_dofs_round_trip(
        coeffs in prop::collection::vec(-10.0f64..10.0, stress_dim(3)),
        lower in prop::collection::vec(-2.0f64..2.0, 3),
        size in prop::collection::vec(0.05f64..3.0, 3),
    ) {
        let bx = ElementBox::new(lower, size).unwrap();
        let local = local_from_dofs(&coeffs, &bx).unwrap();
        let again = stress_dofs(|x: &[f64]| local.eval(x), &bx);
        for (a, b) in coeffs.iter().zip(&again) {
            prop_assert!((a - b).abs() <= 1e-11 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn interpolation_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let dofs = Arc::new(DofMap::new(&TensorGrid::unit(2, 3).unwrap()));
        let f = |x: &[f64]| DMatrix::from_row_slice(2, 2, &[x[0].sin(), x[0] * x[1], x[0] * x[1], x[1].exp()]);
        let g = |x: &[f64]| DMatrix::from_row_slice(2, 2, &[x[1], (x[0] + x[1]).cos(), (x[0] + x[1]).cos(), 1.0]);
        let pf = interp_stress(&dofs, f);
        let pg = interp_stress(&dofs, g);
        let pc = interp_stress(&dofs, |x: &[f64]| f(x) * a + g(x) * b);
        for ((c, p), q) in pc.coefficients().iter().zip(pf.coefficients()).zip(pg.coefficients()) {
            prop_assert!((c - a * p - b * q).abs() <= 1e-12);
        }
    }

    #[test]
    fn projection_idempotent(c in prop::collection::vec(-2.0f64..2.0, 3)) {
        let dofs = Arc::new(DofMap::new(&TensorGrid::unit(2, 2).unwrap()));
        let u = |x: &[f64]| DVector::from_vec(vec![c[0] * x[0] * x[1], c[1] + c[2] * x[0] * x[0]]);
        let p = project_displacement(&dofs, u);
        let pp = project_displacement(&dofs, |x: &[f64]| p.eval(x).unwrap());
        for (a, b) in p.coefficients().iter().zip(pp.coefficients()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn compliance_block_is_affine_in_material(mu in 0.1f64..5.0, lambda in 0.0f64..100.0) {
        let grid = TensorGrid::unit(2, 2).unwrap();
        let m = assemble(&grid, &LameParams::new(mu, lambda).unwrap()).compliance().to_dense();
        prop_assert!((&m - m.transpose()).amax() <= 1e-12 * m.amax());
        let min = m.symmetric_eigenvalues().min();
        prop_assert!(min > 0.0);
    }

    #[test]
    fn fitted_slope_of_power_law(p in 0.5f64..3.0, c in 0.01f64..100.0) {
        let hs = [0.5, 0.25, 0.125, 0.0625];
        let e: Vec<f64> = hs.iter().map(|h: &f64| c * h.powf(p)).collect();
        prop_assert!((fit_rate(&hs, &e).unwrap() - p).abs() <= 1e-12);
    }
}
