//! FFT plumbing shared by the constant-coefficient solver preconditioner,
//! the spectral Schrodinger and heat steps, and the interaction-kernel
//! convolution. Plans are cached per thread; all entry points are pure
//! functions of their inputs, so concurrent use on distinct data is safe.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::{Grid, ScalarField};

struct AxisPlans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, Arc<AxisPlans>>> = RefCell::new(HashMap::new());
}

fn plans_for(n: usize) -> Arc<AxisPlans> {
    PLANS.with(|cache| {
        cache
            .borrow_mut()
            .entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Arc::new(AxisPlans {
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                })
            })
            .clone()
    })
}

/// Signed integer frequency for index `i` on an axis of length `n`.
#[inline]
fn freq(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

fn transform(grid: Grid, buf: &mut [Complex64], inverse: bool) {
    let n = grid.n();
    let plans = plans_for(n);
    let plan = if inverse { &plans.inverse } else { &plans.forward };
    match grid.dim() {
        1 => plan.process(buf),
        _ => {
            // Rows are contiguous; columns go through a gather/scatter scratch.
            for row in buf.chunks_exact_mut(n) {
                plan.process(row);
            }
            let mut scratch = vec![Complex64::default(); n];
            for col in 0..n {
                for (r, s) in scratch.iter_mut().enumerate() {
                    *s = buf[r * n + col];
                }
                plan.process(&mut scratch);
                for (r, s) in scratch.iter().enumerate() {
                    buf[r * n + col] = *s;
                }
            }
        }
    }
    if inverse {
        let scale = 1.0 / grid.cells() as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }
}

/// Apply a per-mode multiplier to a complex field in place:
/// forward transform, multiply by `m([k0, k1])`, inverse transform.
pub(crate) fn apply_mode_multiplier(
    grid: Grid,
    buf: &mut [Complex64],
    m: impl Fn([i64; 2]) -> Complex64,
) {
    assert_eq!(buf.len(), grid.cells());
    let n = grid.n();
    transform(grid, buf, false);
    match grid.dim() {
        1 => {
            for (i, v) in buf.iter_mut().enumerate() {
                *v *= m([freq(i, n), 0]);
            }
        }
        _ => {
            for (idx, v) in buf.iter_mut().enumerate() {
                *v *= m([freq(idx / n, n), freq(idx % n, n)]);
            }
        }
    }
    transform(grid, buf, true);
}

/// Same as [`apply_mode_multiplier`] but for a real field with a real
/// multiplier; the imaginary round-trip residue is dropped.
pub(crate) fn real_mode_multiplier(
    field: &ScalarField,
    m: impl Fn([i64; 2]) -> f64,
) -> ScalarField {
    let grid = field.grid();
    let mut buf: Vec<Complex64> = field
        .values()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    apply_mode_multiplier(grid, &mut buf, |k| Complex64::new(m(k), 0.0));
    ScalarField::from_values(grid, buf.iter().map(|v| v.re).collect())
}

/// Eigenvalue of the (negated) unweighted discrete Laplacian for mode `k`:
/// sum over axes of (2/h^2)(1 - cos(2 pi k_a h)). Zero exactly at k = 0.
pub(crate) fn neg_laplacian_stencil_eigenvalue(grid: Grid, k: [i64; 2]) -> f64 {
    let h = grid.spacing();
    let mut lambda = 0.0;
    for &ka in k.iter().take(grid.dim()) {
        lambda += 2.0 / (h * h) * (1.0 - (std::f64::consts::TAU * ka as f64 * h).cos());
    }
    lambda
}

/// Solve `-lap f = rhs` for the constant-coefficient stencil Laplacian on
/// the zero-mean subspace (the k = 0 mode is projected out). Used as the
/// preconditioner for the density-weighted solver.
pub(crate) fn solve_neg_laplacian(rhs: &ScalarField) -> ScalarField {
    let grid = rhs.grid();
    real_mode_multiplier(rhs, |k| {
        let lambda = neg_laplacian_stencil_eigenvalue(grid, k);
        if lambda > 0.0 {
            1.0 / lambda
        } else {
            0.0
        }
    })
}

/// Heat semigroup exp(tau/2 * lap) with the continuum symbol |2 pi k|^2,
/// exact in space for grid-resolved modes. Requires `tau >= 0`.
pub(crate) fn heat_semigroup(field: &ScalarField, tau: f64) -> ScalarField {
    assert!(tau >= 0.0, "heat semigroup runs in the dissipative direction");
    real_mode_multiplier(field, |k| {
        let ksq = (k[0] * k[0] + k[1] * k[1]) as f64 * std::f64::consts::TAU.powi(2);
        (-0.5 * ksq * tau).exp()
    })
}

/// Mass-weighted circular convolution `(a * b)(x_i) = sum_j a_{i-j} b_j vol`,
/// the grid analogue of the kernel integral in the interaction energy.
pub(crate) fn periodic_convolution(a: &ScalarField, b: &ScalarField) -> ScalarField {
    let grid = a.grid();
    assert_eq!(grid, b.grid(), "fields must share a grid");
    let mut fa: Vec<Complex64> = a
        .values()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    let mut fb: Vec<Complex64> = b
        .values()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    transform(grid, &mut fa, false);
    transform(grid, &mut fb, false);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    transform(grid, &mut fa, true);
    let vol = grid.cell_volume();
    ScalarField::from_values(grid, fa.iter().map(|v| v.re * vol).collect())
}
