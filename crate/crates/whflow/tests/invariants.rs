//! Property tests for the structural identities: these hold for *arbitrary*
//! finite field values (not just smooth presets), which is exactly what the
//! staggered summation-by-parts construction promises.

use proptest::prelude::*;

use whflow::grid::{Grid, ScalarField, VectorField};
use whflow::operators::{self, TangentVector};
use whflow::particles;

fn field_values(cells: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, cells)
}

fn positive_values(cells: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.2f64..2.0, cells)
}

fn vector_field(grid: Grid, comps: Vec<Vec<f64>>) -> VectorField {
    VectorField::from_components(grid, comps)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjointness_holds_for_arbitrary_fields(
        f in field_values(36),
        v0 in field_values(36),
        v1 in field_values(36),
    ) {
        let grid = Grid::new(2, 6).unwrap();
        let f = ScalarField::from_values(grid, f);
        let v = vector_field(grid, vec![v0, v1]);
        let lhs = f.inner(&v.divergence());
        let rhs = -f.gradient().face_inner(&v);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn divergence_integrates_to_zero(
        v0 in field_values(36),
        v1 in field_values(36),
    ) {
        let grid = Grid::new(2, 6).unwrap();
        let v = vector_field(grid, vec![v0, v1]);
        prop_assert!(v.divergence().integrate().abs() <= 1e-12);
    }

    #[test]
    fn shifting_commutes_with_divergence(
        v0 in field_values(16),
    ) {
        let grid = Grid::new(1, 16).unwrap();
        // Shift the face values, take the divergence, compare with the
        // shifted divergence.
        let v = vector_field(grid, vec![v0.clone()]);
        let shifted = vector_field(
            grid,
            vec![(0..16).map(|i| v0[grid.fwd(i, 0)]).collect()],
        );
        let a = shifted.divergence();
        let b = v.divergence();
        for i in 0..16 {
            prop_assert!((a.values()[i] - b.values()[grid.fwd(i, 0)]).abs() <= 1e-13);
        }
    }

    #[test]
    fn weighted_laplacian_symmetric_for_arbitrary_positive_weights(
        rho in positive_values(16),
        f in field_values(16),
        g in field_values(16),
    ) {
        let grid = Grid::new(1, 16).unwrap();
        let rho = ScalarField::from_values(grid, rho);
        let f = ScalarField::from_values(grid, f);
        let g = ScalarField::from_values(grid, g);
        let lf = operators::apply_laplacian(&rho, &f).unwrap();
        let lg = operators::apply_laplacian(&rho, &g).unwrap();
        prop_assert!((lf.field().inner(&g) - f.inner(lg.field())).abs() <= 1e-11);
        prop_assert!(f.inner(lf.field()) <= 1e-12);
        prop_assert!(lf.field().integrate().abs() <= 1e-12);
    }

    #[test]
    fn metric_is_symmetric_and_nonnegative(
        rho in positive_values(16),
        p1 in field_values(16),
        p2 in field_values(16),
    ) {
        let grid = Grid::new(1, 16).unwrap();
        let rho = ScalarField::from_values(grid, rho);
        let p1 = ScalarField::from_values(grid, p1);
        let p2 = ScalarField::from_values(grid, p2);
        let a = operators::metric_dual(&rho, &p1, &p2).unwrap();
        let b = operators::metric_dual(&rho, &p2, &p1).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(operators::metric_dual(&rho, &p1, &p1).unwrap() >= 0.0);
    }

    #[test]
    fn pseudo_inverse_round_trip_for_rough_data(
        rho in positive_values(24),
        sigma in field_values(24),
    ) {
        let grid = Grid::new(1, 24).unwrap();
        let rho = ScalarField::from_values(grid, rho);
        let sigma = TangentVector::projected(ScalarField::from_values(grid, sigma));
        let phi = operators::pseudo_inverse(&rho, &sigma, 1e-12).unwrap();
        prop_assert!(phi.integrate().abs() <= 1e-12);
        let back = operators::apply_laplacian(&rho, &phi).unwrap();
        let scale = sigma.field().max_abs().max(1.0);
        prop_assert!(back.field().add_scaled(1.0, sigma.field()).max_abs() <= 1e-9 * scale);
    }

    #[test]
    fn scalar_csv_round_trips_exactly(values in field_values(25)) {
        let grid = Grid::new(2, 5).unwrap();
        let f = ScalarField::from_values(grid, values);
        let back = ScalarField::from_csv(&f.to_csv()).unwrap();
        prop_assert_eq!(f, back);
    }

    #[test]
    fn deposition_partitions_unity(
        xs in prop::collection::vec(0.0f64..1.0, 1..40),
    ) {
        // A cloud-in-cell histogram of any ensemble has unit mass, and
        // interpolating a constant field back at arbitrary points returns
        // the constant.
        let grid = Grid::new(1, 8).unwrap();
        let positions: Vec<[f64; 2]> = xs.iter().map(|&x| [x, 0.0]).collect();
        let velocities = vec![[0.0, 0.0]; xs.len()];
        let e = particles::ParticleEnsemble::from_parts(1, positions, velocities);
        let hist = particles::push_forward(&e, grid);
        prop_assert!((hist.integrate() - 1.0).abs() <= 1e-13);
        let c = ScalarField::constant(grid, 3.5);
        for &x in &xs {
            prop_assert!((particles::interpolate_scalar(&c, [x, 0.0]) - 3.5).abs() <= 1e-13);
        }
    }
}
