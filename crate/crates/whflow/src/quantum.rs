//! Two spectral oracles for the density flow: a split-step Fourier solver
//! for the linear Schrodinger equation together with the wave/density
//! correspondence `psi = sqrt(rho) exp(-i phi)`, and a forward/backward
//! heat pair with the log-ratio transform that maps it onto the flow with
//! negative Fisher-information energy.

use num_complex::Complex64;

use crate::dynamics::DualState;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::spectral;

const TAU: f64 = std::f64::consts::TAU;

/// Complex amplitude per cell, kept at unit L2 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: Grid,
    values: Vec<Complex64>,
}

impl WaveFunction {
    pub fn from_values(grid: Grid, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), grid.cells());
        let mut psi = Self { grid, values };
        psi.normalize();
        psi
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `integral |psi|^2`.
    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    fn normalize(&mut self) {
        let norm = self.norm_squared().sqrt();
        assert!(norm > 0.0, "cannot normalize the zero wave function");
        for v in &mut self.values {
            *v /= norm;
        }
    }

    /// `|psi|^2` as a density field (unit mass by unitarity).
    pub fn density(&self) -> ScalarField {
        ScalarField::from_values(
            self.grid,
            self.values.iter().map(|v| v.norm_sqr()).collect(),
        )
    }

    /// CSV with header `re,im`, one cell per line (row-major in 2D).
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("re,im\n");
        for v in &self.values {
            let _ = writeln!(out, "{},{}", v.re, v.im);
        }
        out
    }
}

/// One Strang-split step of `i d psi/dt = -1/2 lap psi + V psi`:
/// half potential phase, exact spectral kinetic step, half potential phase.
/// Unitary, so the norm is preserved to rounding.
pub fn split_step(psi: &WaveFunction, potential: &ScalarField, dt: f64) -> Result<WaveFunction> {
    if dt <= 0.0 {
        return Err(Error::NonpositiveTimeStep { dt });
    }
    assert_eq!(psi.grid, potential.grid(), "fields must share a grid");
    let mut values = psi.values.clone();
    let half_phase: Vec<Complex64> = potential
        .values()
        .iter()
        .map(|&v| Complex64::from_polar(1.0, -0.5 * v * dt))
        .collect();
    for (v, p) in values.iter_mut().zip(&half_phase) {
        *v *= p;
    }
    spectral::apply_mode_multiplier(psi.grid, &mut values, |k| {
        let ksq = (k[0] * k[0] + k[1] * k[1]) as f64 * TAU * TAU;
        Complex64::from_polar(1.0, -0.5 * ksq * dt)
    });
    for (v, p) in values.iter_mut().zip(&half_phase) {
        *v *= p;
    }
    Ok(WaveFunction {
        grid: psi.grid,
        values,
    })
}

/// `psi = sqrt(rho) exp(-i phi)`, normalized.
pub fn madelung_compose(rho: &ScalarField, phi: &ScalarField) -> Result<WaveFunction> {
    assert_eq!(rho.grid(), phi.grid(), "fields must share a grid");
    let min = rho.min();
    if min <= 0.0 {
        return Err(Error::NonpositiveDensity {
            context: "wave composition",
            min,
        });
    }
    let values = rho
        .values()
        .iter()
        .zip(phi.values())
        .map(|(&r, &p)| Complex64::from_polar(r.sqrt(), -p))
        .collect();
    Ok(WaveFunction::from_values(rho.grid(), values))
}

/// Decompose a node-free wave function into its density and face-centered
/// probability current `j_a = Im(conj(psi_i) psi_{i+e_a}) / h`. With the
/// `exp(-i phi)` convention the current equals `-rho grad phi`, so the
/// transport velocity is `-j / rho_face`; returning the current avoids
/// unwrapping the phase.
pub fn madelung_decompose(psi: &WaveFunction) -> Result<(ScalarField, VectorField)> {
    let grid = psi.grid;
    let density = psi.density();
    let peak = density.max();
    let min = density.min();
    if min <= 1e-10 * peak {
        return Err(Error::NodalPoint { min });
    }
    let inv_h = 1.0 / grid.spacing();
    let comps = (0..grid.dim())
        .map(|axis| {
            (0..grid.cells())
                .map(|i| {
                    let a = psi.values[i];
                    let b = psi.values[grid.fwd(i, axis)];
                    (a.conj() * b).im * inv_h
                })
                .collect()
        })
        .collect();
    Ok((density, VectorField::from_components(grid, comps)))
}

/// Forward/backward heat pair: `eta` diffuses forward from `t0`, `eta_star`
/// diffuses backward from `t1`; the product integral is invariant in t.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatPair {
    eta: ScalarField,
    eta_star: ScalarField,
}

impl HeatPair {
    /// Boundary data: `eta` at the initial time, `eta_star` at the final
    /// time, both strictly positive.
    pub fn new(eta: ScalarField, eta_star: ScalarField) -> Result<Self> {
        assert_eq!(eta.grid(), eta_star.grid(), "fields must share a grid");
        for (field, which) in [(&eta, "eta"), (&eta_star, "eta_star")] {
            let min = field.min();
            if min <= 0.0 {
                return Err(Error::Format {
                    what: "heat pair",
                    detail: format!("{which} must be strictly positive (min {min:e})"),
                });
            }
        }
        Ok(Self { eta, eta_star })
    }

    pub fn eta(&self) -> &ScalarField {
        &self.eta
    }

    pub fn eta_star(&self) -> &ScalarField {
        &self.eta_star
    }

    /// `integral eta * eta_star`.
    pub fn product_integral(&self) -> f64 {
        self.eta.inner(&self.eta_star)
    }
}

/// Sample the pair at time `t` in `[t0, t1]` from boundary data
/// (`eta` given at `t0`, `eta_star` given at `t1`): each factor is run in
/// its dissipative direction by the exact spectral heat semigroup,
/// `eta(t) = exp((t-t0)/2 lap) eta(t0)`,
/// `eta_star(t) = exp((t1-t)/2 lap) eta_star(t1)`.
pub fn heat_pair_evolve(boundary: &HeatPair, t0: f64, t1: f64, t: f64) -> Result<HeatPair> {
    // Positive comparison so NaN inputs fail the check.
    let ordered = t1 > t0 && (t0..=t1).contains(&t);
    if !ordered {
        return Err(Error::Format {
            what: "heat pair times",
            detail: format!("need t0 < t1 and t in [t0, t1]; got t0={t0}, t1={t1}, t={t}"),
        });
    }
    let eta = spectral::heat_semigroup(&boundary.eta, t - t0);
    let eta_star = spectral::heat_semigroup(&boundary.eta_star, t1 - t);
    // Heat flow of strictly positive data stays positive; the constructor
    // re-checks in case of extreme decay.
    HeatPair::new(eta, eta_star)
}

/// Log-ratio transform of a co-located pair into flow coordinates:
/// `rho = eta eta_star` normalized to unit mass, and the potential
/// `phi = -1/2 log(eta/eta_star)`, zero-mean. The sign and factor are the
/// unique choice under which the transformed pair satisfies the continuity
/// equation of the flow with energy `-(1/8) Fisher`. Returns the state and
/// the recorded normalization constant.
pub fn hopf_cole(pair: &HeatPair) -> Result<(DualState, f64)> {
    let raw = pair.eta.zip_map(&pair.eta_star, |a, b| a * b);
    let mass = raw.integrate();
    let rho = raw.scale(1.0 / mass);
    let phi = pair
        .eta
        .zip_map(&pair.eta_star, |a, b| -0.5 * (a / b).ln())
        .zero_mean();
    Ok((DualState::new(rho, phi)?, mass))
}
