//! Particle oracle: integrate the characteristic system
//! `dX/dt = v, dv/dt = -grad dF/drho` for an ensemble, push the empirical
//! measure forward onto the grid, and compare with the field solution.
//! Everything is deterministic under a fixed seed and single-threaded, so
//! runs are reproducible bit-for-bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::EnergyFunctional;
use crate::grid::{Grid, ScalarField, VectorField};

/// How initial positions are drawn from the initial density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Independent draws; empirical error decays like 1/sqrt(N).
    #[default]
    Iid,
    /// One draw per equal-mass stratum of the inverse CDF (1D only);
    /// empirical error decays like 1/N, which sharpens the oracle without
    /// changing the sampled law.
    Stratified,
}

/// N equally weighted samples of position and velocity on the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    dim: usize,
    positions: Vec<[f64; 2]>,
    velocities: Vec<[f64; 2]>,
}

fn wrap(x: f64) -> f64 {
    let w = x - x.floor();
    // x.floor() of a tiny negative can round the result to exactly 1.0.
    if w >= 1.0 {
        w - 1.0
    } else {
        w
    }
}

fn wrap_index(i: i64, n: usize) -> usize {
    i.rem_euclid(n as i64) as usize
}

/// Two-point interpolation data along one axis: indices of the bracketing
/// nodes and the weight of the second. `shift` is 0 for cell-centered data
/// and 0.5 for face-centered (staggered) data.
fn axis_weights(x: f64, n: usize, shift: f64) -> (usize, usize, f64) {
    let u = x * n as f64 - shift;
    let base = u.floor();
    let w = u - base;
    let i0 = wrap_index(base as i64, n);
    let i1 = if i0 + 1 == n { 0 } else { i0 + 1 };
    (i0, i1, w)
}

impl ParticleEnsemble {
    /// Build an ensemble from explicit positions and velocities; positions
    /// are wrapped onto the torus. Second components are ignored in 1D.
    pub fn from_parts(
        dim: usize,
        positions: Vec<[f64; 2]>,
        velocities: Vec<[f64; 2]>,
    ) -> Self {
        assert!((1..=2).contains(&dim), "dimension must be 1 or 2");
        assert!(!positions.is_empty(), "need at least one particle");
        assert_eq!(positions.len(), velocities.len());
        let positions = positions
            .into_iter()
            .map(|p| [wrap(p[0]), if dim == 2 { wrap(p[1]) } else { 0.0 }])
            .collect();
        Self {
            dim,
            positions,
            velocities,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn velocities(&self) -> &[[f64; 2]] {
        &self.velocities
    }

    /// Mean velocity over the ensemble (total momentum per unit mass).
    pub fn mean_velocity(&self) -> [f64; 2] {
        let mut total = [0.0; 2];
        for v in &self.velocities {
            total[0] += v[0];
            total[1] += v[1];
        }
        let n = self.len() as f64;
        [total[0] / n, total[1] / n]
    }

    /// Negate all velocities (time reversal).
    pub fn reversed(&self) -> Self {
        Self {
            dim: self.dim,
            positions: self.positions.clone(),
            velocities: self.velocities.iter().map(|v| [-v[0], -v[1]]).collect(),
        }
    }

    /// CSV with header `x,vx` (1D) or `x,y,vx,vy` (2D).
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        if self.dim == 1 {
            out.push_str("x,vx\n");
            for (p, v) in self.positions.iter().zip(&self.velocities) {
                let _ = writeln!(out, "{},{}", p[0], v[0]);
            }
        } else {
            out.push_str("x,y,vx,vy\n");
            for (p, v) in self.positions.iter().zip(&self.velocities) {
                let _ = writeln!(out, "{},{},{},{}", p[0], p[1], v[0], v[1]);
            }
        }
        out
    }
}

/// Draw an ensemble from `rho0` with velocities `grad(phi0)` interpolated at
/// each position. 1D densities are sampled by inverse CDF (optionally
/// stratified); 2D by rejection against the maximum density.
pub fn init_from_density(
    rho0: &ScalarField,
    phi0: &ScalarField,
    n_particles: usize,
    seed: u64,
    mode: SamplingMode,
) -> Result<ParticleEnsemble> {
    assert!(n_particles >= 1, "need at least one particle");
    assert_eq!(rho0.grid(), phi0.grid(), "fields must share a grid");
    let grid = rho0.grid();
    let min = rho0.min();
    if min <= 0.0 {
        return Err(Error::NonpositiveDensity {
            context: "particle sampling",
            min,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = match grid.dim() {
        1 => sample_inverse_cdf(rho0, n_particles, &mut rng, mode),
        _ => sample_rejection(rho0, n_particles, &mut rng)?,
    };

    let velocity_field = phi0.gradient();
    let velocities = positions
        .iter()
        .map(|&p| interpolate_staggered(&velocity_field, p))
        .collect();

    Ok(ParticleEnsemble {
        dim: grid.dim(),
        positions,
        velocities,
    })
}

fn sample_inverse_cdf(
    rho: &ScalarField,
    n_particles: usize,
    rng: &mut ChaCha8Rng,
    mode: SamplingMode,
) -> Vec<[f64; 2]> {
    let grid = rho.grid();
    let n = grid.n();
    let h = grid.spacing();
    // Piecewise-constant law with cell i supported on [i h - h/2, i h + h/2).
    let mut cdf = Vec::with_capacity(n + 1);
    cdf.push(0.0);
    for i in 0..n {
        cdf.push(cdf[i] + rho.values()[i] * h);
    }
    let total = cdf[n];

    (0..n_particles)
        .map(|i| {
            let unit: f64 = match mode {
                SamplingMode::Iid => rng.gen::<f64>(),
                SamplingMode::Stratified => {
                    (i as f64 + rng.gen::<f64>()) / n_particles as f64
                }
            };
            let target = unit * total;
            let cell = match cdf.binary_search_by(|c| c.partial_cmp(&target).unwrap()) {
                Ok(k) => k.min(n - 1),
                Err(k) => k - 1,
            };
            let frac = (target - cdf[cell]) / (rho.values()[cell] * h);
            [wrap((cell as f64 + frac - 0.5) * h), 0.0]
        })
        .collect()
}

fn sample_rejection(
    rho: &ScalarField,
    n_particles: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<[f64; 2]>> {
    let grid = rho.grid();
    let n = grid.n();
    let max = rho.max();
    let cap = 1000 * n_particles.max(1000);
    let mut out = Vec::with_capacity(n_particles);
    let mut attempts = 0;
    while out.len() < n_particles {
        if attempts >= cap {
            return Err(Error::RejectionSamplingFailed { attempts });
        }
        attempts += 1;
        let x: f64 = rng.gen();
        let y: f64 = rng.gen();
        let u: f64 = rng.gen();
        // Nearest-node cell, consistent with the centered cell supports.
        let i = wrap_index((x * n as f64).round() as i64, n);
        let j = wrap_index((y * n as f64).round() as i64, n);
        if u * max <= rho.values()[i * n + j] {
            out.push([x, y]);
        }
    }
    Ok(out)
}

/// Multilinear interpolation of a cell-centered field at a point.
pub fn interpolate_scalar(field: &ScalarField, p: [f64; 2]) -> f64 {
    let grid = field.grid();
    let n = grid.n();
    match grid.dim() {
        1 => {
            let (i0, i1, w) = axis_weights(p[0], n, 0.0);
            (1.0 - w) * field.values()[i0] + w * field.values()[i1]
        }
        _ => {
            let (i0, i1, wi) = axis_weights(p[0], n, 0.0);
            let (j0, j1, wj) = axis_weights(p[1], n, 0.0);
            let v = field.values();
            (1.0 - wi) * ((1.0 - wj) * v[i0 * n + j0] + wj * v[i0 * n + j1])
                + wi * ((1.0 - wj) * v[i1 * n + j0] + wj * v[i1 * n + j1])
        }
    }
}

/// Multilinear interpolation of a staggered vector field at a point,
/// honoring the half-cell offset of each component along its own axis.
pub fn interpolate_staggered(field: &VectorField, p: [f64; 2]) -> [f64; 2] {
    let grid = field.grid();
    let n = grid.n();
    let mut out = [0.0; 2];
    for (axis, value) in out.iter_mut().enumerate().take(grid.dim()) {
        let comp = field.component(axis);
        *value = match grid.dim() {
            1 => {
                let (i0, i1, w) = axis_weights(p[0], n, 0.5);
                (1.0 - w) * comp[i0] + w * comp[i1]
            }
            _ => {
                let shift0 = if axis == 0 { 0.5 } else { 0.0 };
                let shift1 = if axis == 1 { 0.5 } else { 0.0 };
                let (i0, i1, wi) = axis_weights(p[0], n, shift0);
                let (j0, j1, wj) = axis_weights(p[1], n, shift1);
                (1.0 - wi) * ((1.0 - wj) * comp[i0 * n + j0] + wj * comp[i0 * n + j1])
                    + wi * ((1.0 - wj) * comp[i1 * n + j0] + wj * comp[i1 * n + j1])
            }
        };
    }
    out
}

/// Grid-valued force callback `(t, ensemble) -> VectorField`.
pub type ForceFn<'a> = dyn FnMut(f64, &ParticleEnsemble) -> Result<VectorField> + 'a;

/// One velocity-Verlet step with a grid-valued force callback:
/// half kick, drift with wrap, half kick with the force re-evaluated on
/// the drifted ensemble (the density estimate moves with the particles in
/// the mean-field case).
pub fn step_particles(
    ensemble: &ParticleEnsemble,
    force: &mut ForceFn,
    t: f64,
    dt: f64,
) -> Result<ParticleEnsemble> {
    if dt <= 0.0 {
        return Err(Error::NonpositiveTimeStep { dt });
    }
    let f0 = force(t, ensemble)?;
    let half = 0.5 * dt;

    let mut moved = ensemble.clone();
    for (p, v) in moved.positions.iter_mut().zip(moved.velocities.iter_mut()) {
        let a = interpolate_staggered(&f0, *p);
        v[0] += half * a[0];
        v[1] += half * a[1];
        p[0] = wrap(p[0] + dt * v[0]);
        if ensemble.dim == 2 {
            p[1] = wrap(p[1] + dt * v[1]);
        }
    }

    let f1 = force(t + dt, &moved)?;
    for (p, v) in moved.positions.iter().zip(moved.velocities.iter_mut()) {
        let a = interpolate_staggered(&f1, *p);
        v[0] += half * a[0];
        v[1] += half * a[1];
    }
    Ok(moved)
}

/// Cloud-in-cell (multilinear) histogram of the ensemble, normalized to
/// unit mass exactly.
pub fn push_forward(ensemble: &ParticleEnsemble, grid: Grid) -> ScalarField {
    assert_eq!(ensemble.dim, grid.dim(), "ensemble/grid dimension mismatch");
    let n = grid.n();
    let mut values = vec![0.0; grid.cells()];
    for p in &ensemble.positions {
        match grid.dim() {
            1 => {
                let (i0, i1, w) = axis_weights(p[0], n, 0.0);
                values[i0] += 1.0 - w;
                values[i1] += w;
            }
            _ => {
                let (i0, i1, wi) = axis_weights(p[0], n, 0.0);
                let (j0, j1, wj) = axis_weights(p[1], n, 0.0);
                values[i0 * n + j0] += (1.0 - wi) * (1.0 - wj);
                values[i0 * n + j1] += (1.0 - wi) * wj;
                values[i1 * n + j0] += wi * (1.0 - wj);
                values[i1 * n + j1] += wi * wj;
            }
        }
    }
    let total: f64 = values.iter().sum::<f64>() * grid.cell_volume();
    for v in &mut values {
        *v /= total;
    }
    ScalarField::from_values(grid, values)
}

/// L1 distance between two densities on the same grid.
pub fn compare_densities(a: &ScalarField, b: &ScalarField) -> f64 {
    a.l1_distance(b)
}

/// One binomial (1-2-1) smoothing pass per axis; mass preserving and even.
/// The minimal stabilizer for differentiating an empirical density.
pub fn smooth_density(field: &ScalarField) -> ScalarField {
    let grid = field.grid();
    let mut values = field.values().to_vec();
    for axis in 0..grid.dim() {
        let prev = values.clone();
        for (i, v) in values.iter_mut().enumerate() {
            *v = 0.25 * prev[grid.bwd(i, axis)] + 0.5 * prev[i] + 0.25 * prev[grid.fwd(i, axis)];
        }
    }
    ScalarField::from_values(grid, values)
}

/// Mean-field force on the grid: minus the gradient of the first variation
/// evaluated at the smoothed empirical density of the ensemble itself.
pub fn mean_field_force(
    energy: &EnergyFunctional,
    grid: Grid,
    ensemble: &ParticleEnsemble,
) -> Result<VectorField> {
    let density = smooth_density(&push_forward(ensemble, grid));
    let variation = energy.first_variation(&density)?;
    Ok(variation.gradient().scale(-1.0))
}
