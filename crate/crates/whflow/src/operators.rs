//! The density-weighted elliptic operator `lap_rho = div(rho grad)`, its
//! pseudo-inverse on the zero-mean subspace, and the metric pairing it
//! induces in both dual (potential) and primal (mass-rate) coordinates.
//!
//! The staggered discretization makes `lap_rho` symmetric negative
//! semidefinite with kernel exactly the constants, so the pseudo-inverse is
//! a plain conjugate-gradient solve restricted to zero-mean fields,
//! preconditioned by the constant-coefficient Laplacian in Fourier space.

use crate::error::{Error, Result};
use crate::grid::{ScalarField, VectorField};
use crate::spectral;

/// Default relative-residual tolerance for the pseudo-inverse solve.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Absolute tolerance on the zero-mass invariant of tangent vectors.
pub const ZERO_MEAN_TOL: f64 = 1e-12;

/// A tangent field at a density: zero total mass.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    field: ScalarField,
}

impl TangentVector {
    /// Validates the zero-mass invariant.
    pub fn new(field: ScalarField) -> Result<Self> {
        let integral = field.integrate();
        if integral.abs() > ZERO_MEAN_TOL {
            return Err(Error::NotZeroMean { integral });
        }
        Ok(Self { field })
    }

    /// Remove the mean first; for fields that are zero-mean only up to
    /// discretization error (e.g. finite-difference time derivatives).
    pub fn projected(field: ScalarField) -> Self {
        let mean = field.integrate();
        Self {
            field: field.map(|v| v - mean),
        }
    }

    /// For results that are zero-mean by construction (discrete divergences).
    pub(crate) fn from_structural(field: ScalarField) -> Self {
        debug_assert!(field.integrate().abs() <= ZERO_MEAN_TOL);
        Self { field }
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn into_field(self) -> ScalarField {
        self.field
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            field: self.field.scale(c),
        }
    }
}

fn require_positive(rho: &ScalarField, context: &'static str) -> Result<()> {
    let min = rho.min();
    if min <= 0.0 {
        return Err(Error::NonpositiveDensity { context, min });
    }
    Ok(())
}

/// `div(w grad .)` with fixed face weights. The weights come from a cell
/// field by arithmetic face averaging and may be signed: linearity of the
/// operator in its weight is used by the geodesic curvature term, where the
/// weight is a mass rate rather than a density.
#[derive(Debug, Clone)]
pub struct WeightedLaplacian {
    weights: VectorField,
}

impl WeightedLaplacian {
    /// Weights from a strictly positive density.
    pub fn from_density(rho: &ScalarField) -> Result<Self> {
        require_positive(rho, "weighted Laplacian")?;
        Ok(Self {
            weights: rho.face_average(),
        })
    }

    /// Weights from an arbitrary (possibly signed) cell field.
    pub fn from_signed_field(w: &ScalarField) -> Self {
        Self {
            weights: w.face_average(),
        }
    }

    pub fn weights(&self) -> &VectorField {
        &self.weights
    }

    /// `div(w grad f)`; zero integral by the discrete divergence theorem.
    pub fn apply(&self, f: &ScalarField) -> ScalarField {
        self.weights.face_multiply(&f.gradient()).divergence()
    }
}

/// `lap_rho phi = div(rho grad phi)`; rejects nonpositive densities.
pub fn apply_laplacian(rho: &ScalarField, phi: &ScalarField) -> Result<TangentVector> {
    let op = WeightedLaplacian::from_density(rho)?;
    Ok(TangentVector::from_structural(op.apply(phi)))
}

/// Pseudo-inverse solution together with the iteration count, for
/// diagnostics reporting.
#[derive(Debug, Clone)]
pub struct PseudoInverseSolution {
    pub phi: ScalarField,
    pub iterations: usize,
}

/// Solve `(-lap_rho) phi = sigma` for the unique zero-mean `phi`, by
/// preconditioned conjugate gradients on the zero-mean subspace.
pub fn pseudo_inverse(rho: &ScalarField, sigma: &TangentVector, tol: f64) -> Result<ScalarField> {
    pseudo_inverse_with_stats(rho, sigma, tol).map(|s| s.phi)
}

pub fn pseudo_inverse_with_stats(
    rho: &ScalarField,
    sigma: &TangentVector,
    tol: f64,
) -> Result<PseudoInverseSolution> {
    let op = WeightedLaplacian::from_density(rho)?;
    let grid = rho.grid();
    let apply = |x: &ScalarField| op.apply(x).scale(-1.0);

    let b = sigma.field();
    let b_norm = b.l2_norm();
    if b_norm == 0.0 {
        return Ok(PseudoInverseSolution {
            phi: ScalarField::zeros(grid),
            iterations: 0,
        });
    }

    // The recursive residual cannot meaningfully drop below a few ulps of
    // the data, so floor the requested tolerance there; acceptance is
    // confirmed against the true residual with a machine-floor allowance,
    // so an ill-conditioned solve cannot ride the recursive residual to a
    // false convergence.
    let tol = tol.max(8.0 * f64::EPSILON);
    let accept = tol.max(100.0 * grid.cells() as f64 * f64::EPSILON);
    let max_iters = 10 * grid.cells();

    let mut x = spectral::solve_neg_laplacian(b);
    let mut r = b.add_scaled(-1.0, &apply(&x));
    let mut z = spectral::solve_neg_laplacian(&r);
    let mut p = z.clone();
    let mut rz = r.inner(&z);
    let mut iterations = 0;

    loop {
        let rel = r.l2_norm() / b_norm;
        if rel <= tol {
            let r_true = b.add_scaled(-1.0, &apply(&x));
            if r_true.l2_norm() / b_norm <= accept {
                break;
            }
            // Restart from the verified residual.
            r = r_true;
            z = spectral::solve_neg_laplacian(&r);
            p = z.clone();
            rz = r.inner(&z);
        }
        if iterations >= max_iters {
            return Err(Error::SolverIterationLimit {
                iterations,
                residual: rel,
            });
        }
        iterations += 1;
        let ap = apply(&p);
        let pap = p.inner(&ap);
        if pap <= 0.0 {
            // Curvature can only vanish on the constant mode, which is
            // projected out; treat as stagnation.
            return Err(Error::SolverIterationLimit {
                iterations,
                residual: rel,
            });
        }
        let alpha = rz / pap;
        x = x.add_scaled(alpha, &p);
        if iterations % 64 == 0 {
            // Refresh against drift of the recursive residual.
            r = b.add_scaled(-1.0, &apply(&x));
        } else {
            r = r.add_scaled(-alpha, &ap);
        }
        z = spectral::solve_neg_laplacian(&r);
        let rz_next = r.inner(&z);
        p = z.add_scaled(rz_next / rz, &p);
        rz = rz_next;
    }

    Ok(PseudoInverseSolution {
        phi: x.zero_mean(),
        iterations,
    })
}

/// Metric pairing in dual coordinates:
/// `g_W(phi1, phi2) = sum_faces rho_face grad(phi1) . grad(phi2) vol`.
pub fn metric_dual(rho: &ScalarField, phi1: &ScalarField, phi2: &ScalarField) -> Result<f64> {
    require_positive(rho, "dual metric")?;
    let weights = rho.face_average();
    // Multiply the two gradients first so the value is bit-for-bit
    // symmetric in its potential arguments.
    Ok(phi1
        .gradient()
        .face_multiply(&phi2.gradient())
        .face_inner(&weights))
}

/// Metric pairing in primal coordinates:
/// `g_W(sigma1, sigma2) = inner(sigma1, (-lap_rho)^+ sigma2)`.
pub fn metric_primal(
    rho: &ScalarField,
    sigma1: &TangentVector,
    sigma2: &TangentVector,
    tol: f64,
) -> Result<f64> {
    let phi2 = pseudo_inverse(rho, sigma2, tol)?;
    Ok(sigma1.field().inner(&phi2))
}

/// Test-harness operation for the derivative of the pseudo-inverse in its
/// density argument: max-norm discrepancy between the centered finite
/// difference of `(-lap_{rho +- eps h})^+ sigma` and the analytic
/// expression `-(-lap_rho)^+ (-lap_h) (-lap_rho)^+ sigma`. Decays as
/// O(eps^2) when the analytic expression is correct.
pub fn pseudo_inverse_derivative_check(
    rho: &ScalarField,
    h_dir: &TangentVector,
    sigma: &TangentVector,
    eps: f64,
) -> Result<f64> {
    let rho_plus = rho.add_scaled(eps, h_dir.field());
    let rho_minus = rho.add_scaled(-eps, h_dir.field());
    require_positive(&rho_plus, "perturbed density (+)")?;
    require_positive(&rho_minus, "perturbed density (-)")?;

    // The FD quotient divides solver error by eps, so solve essentially to
    // machine precision regardless of the caller-facing default.
    let tight = 1e-14;
    let x_plus = pseudo_inverse(&rho_plus, sigma, tight)?;
    let x_minus = pseudo_inverse(&rho_minus, sigma, tight)?;
    let fd = x_plus.add_scaled(-1.0, &x_minus).scale(0.5 / eps);

    let y = pseudo_inverse(rho, sigma, tight)?;
    // (-lap_h) y = -div(h_face grad y); the analytic derivative applied to
    // sigma is -(-lap_rho)^+ (-lap_h) y = (-lap_rho)^+ (lap_h y).
    let lap_h_y = WeightedLaplacian::from_signed_field(h_dir.field()).apply(&y);
    let analytic = pseudo_inverse(rho, &TangentVector::from_structural(lap_h_y), tight)?;

    Ok(fd.add_scaled(-1.0, &analytic).max_abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::presets;

    const TAU: f64 = std::f64::consts::TAU;

    fn stencil_lambda(n: usize) -> f64 {
        let h = 1.0 / n as f64;
        2.0 / (h * h) * (1.0 - (TAU * h).cos())
    }

    #[test]
    fn constants_are_in_the_kernel() {
        let grid = Grid::new(2, 8).unwrap();
        let rho = presets::random_positive_density(grid, 7, 0.4);
        let out = apply_laplacian(&rho, &ScalarField::constant(grid, 2.5)).unwrap();
        assert_eq!(out.field().max_abs(), 0.0);
    }

    #[test]
    fn sine_mode_eigenvalue() {
        let n = 64;
        let grid = Grid::new(1, n).unwrap();
        let rho = ScalarField::constant(grid, 1.0);
        let phi = ScalarField::from_fn(grid, |x| (TAU * x[0]).sin());
        let lambda = stencil_lambda(n);
        let out = apply_laplacian(&rho, &phi).unwrap();
        for (o, p) in out.field().values().iter().zip(phi.values()) {
            assert!((o + lambda * p).abs() < 1e-10 * lambda);
        }
        // The stencil eigenvalue sits just below the continuum one.
        assert!(lambda < TAU * TAU && lambda > TAU * TAU * 0.99);
    }

    #[test]
    fn rejects_nonpositive_density() {
        let grid = Grid::new(1, 8).unwrap();
        let mut rho = ScalarField::constant(grid, 1.0);
        rho.values_mut()[3] = 0.0;
        let phi = ScalarField::zeros(grid);
        assert!(matches!(
            apply_laplacian(&rho, &phi),
            Err(Error::NonpositiveDensity { .. })
        ));
    }

    #[test]
    fn laplacian_is_symmetric_and_nsd() {
        let grid = Grid::new(2, 10).unwrap();
        let rho = presets::random_positive_density(grid, 3, 0.5);
        let f = presets::random_smooth(grid, 11, 1.0);
        let g = presets::random_smooth(grid, 12, 1.0);
        let lf = apply_laplacian(&rho, &f).unwrap();
        let lg = apply_laplacian(&rho, &g).unwrap();
        let scale = f.l2_norm() * g.l2_norm();
        assert!((lf.field().inner(&g) - f.inner(lg.field())).abs() <= 1e-12 * scale.max(1.0));
        assert!(f.inner(lf.field()) <= 1e-12 * f.inner(&f).max(1.0));
    }

    #[test]
    fn gauge_invariance_of_apply() {
        let grid = Grid::new(1, 32).unwrap();
        let rho = presets::random_positive_density(grid, 5, 0.3);
        let phi = presets::random_smooth(grid, 6, 1.0);
        let a = apply_laplacian(&rho, &phi).unwrap();
        let b = apply_laplacian(&rho, &phi.map(|v| v + 4.2)).unwrap();
        for (x, y) in a.field().values().iter().zip(b.field().values()) {
            assert!((x - y).abs() < 1e-11);
        }
    }

    #[test]
    fn pseudo_inverse_of_zero_is_zero() {
        let grid = Grid::new(1, 16).unwrap();
        let rho = ScalarField::constant(grid, 1.0);
        let zero = TangentVector::new(ScalarField::zeros(grid)).unwrap();
        let sol = pseudo_inverse_with_stats(&rho, &zero, 1e-12).unwrap();
        assert_eq!(sol.phi.max_abs(), 0.0);
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn pseudo_inverse_single_mode() {
        let n = 64;
        let grid = Grid::new(1, n).unwrap();
        let rho = ScalarField::constant(grid, 1.0);
        let sigma =
            TangentVector::new(ScalarField::from_fn(grid, |x| (TAU * x[0]).sin())).unwrap();
        let phi = pseudo_inverse(&rho, &sigma, 1e-12).unwrap();
        let lambda = stencil_lambda(n);
        for (p, s) in phi.values().iter().zip(sigma.field().values()) {
            assert!((p - s / lambda).abs() < 1e-11);
        }
        assert!(phi.integrate().abs() < 1e-12);
    }

    #[test]
    fn pseudo_inverse_round_trip() {
        let grid = Grid::new(2, 12).unwrap();
        let rho = presets::random_positive_density(grid, 21, 0.5);
        let sigma = TangentVector::projected(presets::random_smooth(grid, 22, 1.0));
        let phi = pseudo_inverse(&rho, &sigma, 1e-12).unwrap();
        let back = apply_laplacian(&rho, &phi).unwrap();
        for (b, s) in back.field().values().iter().zip(sigma.field().values()) {
            assert!((b + s).abs() < 1e-10);
        }
    }

    #[test]
    fn projection_identity() {
        // (-lap)^+ (-lap) (-lap)^+ sigma == (-lap)^+ sigma on zero-mean fields.
        let grid = Grid::new(1, 48).unwrap();
        let rho = presets::random_positive_density(grid, 31, 0.4);
        let sigma = TangentVector::projected(presets::random_smooth(grid, 32, 1.0));
        let tol = 1e-12;
        let a = pseudo_inverse(&rho, &sigma, tol).unwrap();
        let mid = apply_laplacian(&rho, &a).unwrap().scale(-1.0);
        let b = pseudo_inverse(&rho, &mid, tol).unwrap();
        let scale = a.max_abs().max(1.0);
        assert!(a.add_scaled(-1.0, &b).max_abs() <= 2.0 * tol * scale / tol.sqrt());
    }

    #[test]
    fn pseudo_inverse_self_adjoint() {
        let grid = Grid::new(1, 40).unwrap();
        let rho = presets::random_positive_density(grid, 41, 0.5);
        let s1 = TangentVector::projected(presets::random_smooth(grid, 42, 1.0));
        let s2 = TangentVector::projected(presets::random_smooth(grid, 43, 1.0));
        let tol = 1e-12;
        let a = s1.field().inner(&pseudo_inverse(&rho, &s2, tol).unwrap());
        let b = s2.field().inner(&pseudo_inverse(&rho, &s1, tol).unwrap());
        assert!((a - b).abs() <= 2.0 * tol * a.abs().max(1.0) / tol.sqrt());
    }

    #[test]
    fn pseudo_inverse_iteration_limit_on_degenerate_density() {
        // A density spanning twelve orders of magnitude defeats the
        // constant-coefficient preconditioner; the solver must report the
        // cap instead of looping.
        let grid = Grid::new(1, 16).unwrap();
        let mut rho = ScalarField::constant(grid, 1e-12);
        rho.values_mut()[0] = 16.0 - 15.0 * 1e-12;
        let sigma = TangentVector::projected(presets::random_smooth(grid, 87, 1.0));
        assert!(matches!(
            pseudo_inverse(&rho, &sigma, 1e-13),
            Err(Error::SolverIterationLimit { .. })
        ));
    }

    #[test]
    fn metric_dual_examples() {
        let n = 64;
        let grid = Grid::new(1, n).unwrap();
        let rho = ScalarField::constant(grid, 1.0);
        let phi = ScalarField::from_fn(grid, |x| (TAU * x[0]).sin());
        let constant = ScalarField::constant(grid, 3.0);
        assert_eq!(metric_dual(&rho, &constant, &phi).unwrap(), 0.0);
        let lambda = stencil_lambda(n);
        let d = metric_dual(&rho, &phi, &phi).unwrap();
        assert!((d - lambda / 2.0).abs() < 1e-10 * lambda);
    }

    #[test]
    fn metric_dual_symmetry_exact() {
        let grid = Grid::new(2, 8).unwrap();
        let rho = presets::random_positive_density(grid, 51, 0.5);
        let p1 = presets::random_smooth(grid, 52, 1.0);
        let p2 = presets::random_smooth(grid, 53, 1.0);
        assert_eq!(
            metric_dual(&rho, &p1, &p2).unwrap(),
            metric_dual(&rho, &p2, &p1).unwrap()
        );
    }

    #[test]
    fn metric_primal_single_mode() {
        let n = 64;
        let grid = Grid::new(1, n).unwrap();
        let rho = ScalarField::constant(grid, 1.0);
        let sigma =
            TangentVector::new(ScalarField::from_fn(grid, |x| (TAU * x[0]).sin())).unwrap();
        let lambda = stencil_lambda(n);
        let m = metric_primal(&rho, &sigma, &sigma, 1e-12).unwrap();
        assert!((m - 0.5 / lambda).abs() < 1e-12);
    }

    #[test]
    fn metric_primal_matches_dual_under_identification() {
        let grid = Grid::new(1, 48).unwrap();
        let rho = presets::random_positive_density(grid, 61, 0.5);
        let p1 = presets::random_smooth(grid, 62, 0.7);
        let p2 = presets::random_smooth(grid, 63, 0.7);
        let s1 = apply_laplacian(&rho, &p1).unwrap().scale(-1.0);
        let s2 = apply_laplacian(&rho, &p2).unwrap().scale(-1.0);
        let dual = metric_dual(&rho, &p1, &p2).unwrap();
        let primal = metric_primal(&rho, &s1, &s2, 1e-12).unwrap();
        assert!((dual - primal).abs() < 1e-8 * dual.abs().max(1.0));
    }

    #[test]
    fn metric_primal_nonnegative() {
        let grid = Grid::new(1, 32).unwrap();
        let rho = presets::random_positive_density(grid, 71, 0.6);
        let s = TangentVector::projected(presets::random_smooth(grid, 72, 1.0));
        assert!(metric_primal(&rho, &s, &s, 1e-12).unwrap() >= -1e-10);
    }

    #[test]
    fn derivative_check_zero_direction() {
        let grid = Grid::new(1, 32).unwrap();
        let rho = presets::random_positive_density(grid, 81, 0.3);
        let zero = TangentVector::new(ScalarField::zeros(grid)).unwrap();
        let sigma = TangentVector::projected(presets::random_smooth(grid, 82, 1.0));
        let d = pseudo_inverse_derivative_check(&rho, &zero, &sigma, 1e-4).unwrap();
        assert!(d < 1e-12);
    }

    #[test]
    fn derivative_check_second_order() {
        let grid = Grid::new(1, 32).unwrap();
        let rho = presets::random_positive_density(grid, 83, 0.3);
        let h_dir = TangentVector::projected(presets::random_smooth(grid, 84, 30.0));
        let sigma = TangentVector::projected(presets::random_smooth(grid, 85, 5.0));
        let d1 = pseudo_inverse_derivative_check(&rho, &h_dir, &sigma, 2e-3).unwrap();
        let d2 = pseudo_inverse_derivative_check(&rho, &h_dir, &sigma, 1e-3).unwrap();
        let ratio = d1 / d2;
        assert!(
            (2.5..5.5).contains(&ratio),
            "halving eps should shrink the discrepancy ~4x, got {ratio}"
        );
    }

    #[test]
    fn derivative_check_positivity_guard() {
        let grid = Grid::new(1, 16).unwrap();
        let rho = ScalarField::constant(grid, 0.5);
        let h_dir = TangentVector::projected(ScalarField::from_fn(grid, |x| (TAU * x[0]).cos()));
        let sigma = TangentVector::projected(presets::random_smooth(grid, 86, 1.0));
        assert!(pseudo_inverse_derivative_check(&rho, &h_dir, &sigma, 0.9).is_err());
    }
}
