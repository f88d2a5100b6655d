use crossguide_core::analysis::{extrapolate, FitModel};
use crossguide_core::discretization::{assemble_operator, build_grid};
use crossguide_core::eigensolver::SolverOptions;
use crossguide_core::{CrossProblem, SymmetryClass};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn class_strategy() -> impl Strategy<Value = SymmetryClass> {
    prop::sample::select(SymmetryClass::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn operator_is_symmetric_with_bounded_positive_spectrum(
        beta in 1.0f64..3.0,
        class in class_strategy(),
        inv_h in 1usize..5,
        l in 2usize..4,
    ) {
        let p = CrossProblem::new(beta, class, l as f64, l as f64).unwrap();
        let n = 2 * l * inv_h;
        let grid = build_grid(&p, n, n).unwrap();
        let op = assemble_operator(&grid, &p);
        let a = op.matrix();
        prop_assume!(a.dim() > 0 && a.dim() <= 300);
        prop_assert!(a.is_symmetric());
        let d = a.to_dense();
        let m = DMatrix::from_fn(a.dim(), a.dim(), |i, j| d[i][j]);
        let ev = m.symmetric_eigenvalues();
        let bound = 4.0 / (grid.hx * grid.hx) + 4.0 / (beta * beta * grid.hy * grid.hy);
        for &e in ev.iter() {
            prop_assert!(e > 0.0);
            prop_assert!(e <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn growing_the_box_at_fixed_spacing_never_raises_the_ground_state(
        beta in 1.0f64..2.5,
        class in class_strategy(),
        l in 2usize..4,
    ) {
        let inv_h = 3;
        let e = |l: usize| {
            let p = CrossProblem::new(beta, class, l as f64, l as f64).unwrap();
            let grid = build_grid(&p, 2 * l * inv_h, 2 * l * inv_h).unwrap();
            let a = assemble_operator(&grid, &p);
            let d = a.matrix().to_dense();
            let m = DMatrix::from_fn(a.dim(), a.dim(), |i, j| d[i][j]);
            m.symmetric_eigenvalues().min()
        };
        prop_assert!(e(l + 1) <= e(l) + 1e-10);
    }
}

#[test]
fn convergence_exponent_is_physical() {
    let ns: Vec<usize> = (80..=880).step_by(40).collect();
    let (_, fit) = extrapolate(SymmetryClass::EvenEven, 1.0, 20.0, &ns, &SolverOptions::default()).unwrap();
    assert_eq!(fit.model, FitModel::GridSeries4);
    let gamma = *fit.params.last().unwrap();
    assert!((1.0..=2.2).contains(&gamma), "gamma = {gamma}");
}
