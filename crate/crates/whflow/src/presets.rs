//! Analytic field presets: low-Fourier-mode densities and potentials with
//! closed-form diagnostics, plus seeded smooth random fields for the
//! verification suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Grid, ScalarField};

const TAU: f64 = std::f64::consts::TAU;

/// `base + amplitude * cos(2 pi k . x)`; positive whenever |amplitude| < base.
pub fn cosine(grid: Grid, base: f64, amplitude: f64, mode: [i64; 2]) -> ScalarField {
    ScalarField::from_fn(grid, |x| {
        base + amplitude * (TAU * (mode[0] as f64 * x[0] + mode[1] as f64 * x[1])).cos()
    })
}

/// Periodic Gaussian-like bump of the torus distance to the origin,
/// `amplitude * exp(-r^2 / (2 width^2)) + base`; even by construction.
pub fn gaussian_bump(grid: Grid, base: f64, amplitude: f64, width: f64) -> ScalarField {
    assert!(width > 0.0, "bump width must be positive");
    ScalarField::from_fn(grid, |x| {
        let r = grid.distance([0.0, 0.0], x);
        base + amplitude * (-0.5 * (r / width).powi(2)).exp()
    })
}

/// Seeded random field built from the first few Fourier modes, so it is
/// smooth on every grid and identical across runs.
pub fn random_smooth(grid: Grid, seed: u64, amplitude: f64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    let max_mode: i64 = 3;
    for k0 in 0..=max_mode {
        for k1 in -max_mode..=max_mode {
            if k0 == 0 && k1 <= 0 {
                continue;
            }
            if grid.dim() == 1 && k1 != 0 {
                continue;
            }
            let (k0, k1) = if grid.dim() == 1 { (k1.max(k0), 0) } else { (k0, k1) };
            let c: f64 = rng.gen_range(-1.0..1.0);
            let s: f64 = rng.gen_range(-1.0..1.0);
            modes.push((k0 as f64, k1 as f64, c, s));
        }
    }
    let norm = amplitude / modes.len() as f64;
    ScalarField::from_fn(grid, |x| {
        modes
            .iter()
            .map(|&(k0, k1, c, s)| {
                let phase = TAU * (k0 * x[0] + k1 * x[1]);
                c * phase.cos() + s * phase.sin()
            })
            .sum::<f64>()
            * norm
    })
}

/// Seeded random strictly positive density with unit mass; `contrast` in
/// (0, 1) bounds the relative deviation from uniform.
pub fn random_positive_density(grid: Grid, seed: u64, contrast: f64) -> ScalarField {
    assert!((0.0..1.0).contains(&contrast));
    let bump = random_smooth(grid, seed, 1.0);
    let max_abs = bump.max_abs().max(f64::MIN_POSITIVE);
    let scaled = bump.scale(contrast / max_abs);
    let raw = scaled.map(|v| 1.0 + v);
    normalize_density(&raw)
}

/// Scale a positive field to unit mass.
pub fn normalize_density(rho: &ScalarField) -> ScalarField {
    let mass = rho.integrate();
    assert!(mass > 0.0, "density mass must be positive");
    rho.scale(1.0 / mass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_density_has_unit_mass() {
        let grid = Grid::new(1, 64).unwrap();
        let rho = cosine(grid, 1.0, 0.5, [1, 0]);
        assert!((rho.integrate() - 1.0).abs() < 1e-13);
        assert!(rho.min() > 0.0);
    }

    #[test]
    fn random_density_is_normalized_and_positive() {
        for dim in [1, 2] {
            let grid = Grid::new(dim, 16).unwrap();
            let rho = random_positive_density(grid, 9, 0.5);
            assert!((rho.integrate() - 1.0).abs() < 1e-12);
            assert!(rho.min() > 0.0);
        }
    }

    #[test]
    fn random_smooth_is_deterministic() {
        let grid = Grid::new(2, 8).unwrap();
        let a = random_smooth(grid, 123, 2.0);
        let b = random_smooth(grid, 123, 2.0);
        assert_eq!(a, b);
        let c = random_smooth(grid, 124, 2.0);
        assert_ne!(a, c);
    }

    #[test]
    fn bump_kernel_is_even() {
        let grid = Grid::new(1, 32).unwrap();
        let w = gaussian_bump(grid, 0.0, 1.0, 0.15);
        let n = grid.n();
        for i in 1..n {
            assert!((w.values()[i] - w.values()[n - i]).abs() < 1e-14);
        }
    }
}
