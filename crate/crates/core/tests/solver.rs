use elastmix::assembly::{assemble, assemble_load};
use elastmix::grid::TensorGrid;
use elastmix::manufactured::{polynomial_solution, sine_solution};
use elastmix::material::LameParams;
use elastmix::solver::{solve, EnvelopeLdlt, SolverOptions, Strategy};
use elastmix::SaddleSystem;
use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{rngs::StdRng, SeedableRng};

fn setup(dim: usize, n: usize) -> (SaddleSystem, Vec<f64>) {
    let material = LameParams::new(0.5, 1.0).unwrap();
    let grid = TensorGrid::unit(dim, n).unwrap();
    let system = assemble(&grid, &material);
    let exact = sine_solution(dim, material).unwrap();
    let load = assemble_load(&grid, |x: &[f64]| exact.f(x), system.dofs());
    (system, load)
}

fn joined(system: &SaddleSystem, load: &[f64]) -> Vec<f64> {
    let (s, u, _) = solve(system, load, 1e-11).unwrap();
    let mut x = s.into_coefficients();
    x.extend(u.into_coefficients());
    x
}

#[test]
fn residual_from_raw_triplets() {
    for (dim, n) in [(2, 5), (3, 3)] {
        let (system, load) = setup(dim, n);
        let x = joined(&system, &load);
        // rebuild K x from the two blocks' triplets, independent of the solver's matrix
        let ns = system.dofs().stress_len();
        let mut r = vec![0.0; system.len()];
        for (i, j, v) in system.compliance().triplets() {
            r[i] += v * x[j];
        }
        for (i, j, v) in system.divergence().triplets() {
            r[j] += v * x[ns + i];
            r[ns + i] += v * x[j];
        }
        for (k, f) in load.iter().enumerate() {
            r[ns + k] -= f;
        }
        let rel = r.iter().map(|v| v * v).sum::<f64>().sqrt() / load.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(rel <= 1e-11, "{dim}d: {rel}");
    }
}

#[test]
fn matches_dense_oracle_on_small_system() {
    let (system, load) = setup(2, 2);
    assert_eq!(system.len(), 45);
    let oracle = system
        .full_matrix()
        .to_dense()
        .lu()
        .solve(&DVector::from_vec(system.rhs(&load)))
        .unwrap();
    let x = DVector::from_vec(joined(&system, &load));
    assert!((x - &oracle).norm() <= 1e-9 * oracle.norm());
}

/// Elimination order visiting elements in the given sequence.
fn element_order(system: &SaddleSystem, elements: &[Vec<usize>]) -> Vec<usize> {
    let dofs = system.dofs();
    let ns = dofs.stress_len();
    let mut seen = vec![false; ns];
    let mut order = Vec::new();
    for e in elements {
        for g in dofs.element_stress_dofs(e) {
            if !std::mem::replace(&mut seen[g], true) {
                order.push(g);
            }
        }
        order.extend(dofs.element_disp_dofs(e).into_iter().map(|g| ns + g));
    }
    order
}

#[test]
fn invariant_under_reordering() {
    let (system, load) = setup(2, 6);
    let reference = joined(&system, &load);
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let full = system.full_matrix();
    let rhs = system.rhs(&load);
    let mut elements: Vec<Vec<usize>> = system.dofs().grid().elements().collect();
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..4 {
        elements.shuffle(&mut rng);
        let ldlt = EnvelopeLdlt::factor(&full, element_order(&system, &elements)).unwrap();
        let x = ldlt.solve(&rhs);
        let diff = x.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-9 * scale, "{diff}");
    }
    let opts = SolverOptions {
        strategy: Strategy::Minres,
        ..SolverOptions::default()
    };
    let (x, _) = elastmix::solver::solve_vector(&system, &load, &opts).unwrap();
    let diff = x.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-8 * scale, "{diff}");
}

#[test]
fn energy_identity() {
    for (dim, n) in [(2, 4), (2, 9), (3, 3)] {
        let (system, load) = setup(dim, n);
        let (s, u, _) = solve(&system, &load, 1e-11).unwrap();
        let s = s.coefficients();
        let energy: f64 = s.iter().zip(system.compliance().mul_vec(s)).map(|(a, b)| a * b).sum();
        let work: f64 = load.iter().zip(u.coefficients()).map(|(a, b)| a * b).sum();
        assert!((energy + work).abs() <= 1e-9 * energy, "{dim}d N={n}");
    }
}

#[test]
fn polynomial_load_and_nearly_incompressible_material() {
    let material = LameParams::new(1.0, 1e4).unwrap();
    let grid = TensorGrid::unit(2, 8).unwrap();
    let system = assemble(&grid, &material);
    let exact = polynomial_solution(2, material).unwrap();
    let load = assemble_load(&grid, |x: &[f64]| exact.f(x), system.dofs());
    let (_, _, report) = solve(&system, &load, 1e-11).unwrap();
    assert!(report.relative_residual <= 1e-11);
}
