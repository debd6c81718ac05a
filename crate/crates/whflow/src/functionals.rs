//! Potential energies on density space - linear potential, pairwise
//! interaction, Fisher information - with their exact discrete first
//! variations and the induced metric gradient.
//!
//! `first_variation` is the analytic gradient of the *discrete* `evaluate`
//! with respect to cell values (divided by cell volume), not a separate
//! discretization of the continuum expression. That makes the directional
//! derivative identity `d/deps evaluate(rho + eps h) = inner(variation, h)`
//! hold to O(eps^2) exactly, which the Hamiltonian drift accounting relies
//! on. Variations are returned with zero mean, the constant gauge used for
//! all potentials in this crate.

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::operators::{self, TangentVector, WeightedLaplacian};
use crate::spectral;

/// Even periodic pairwise kernel, tabulated on the grid as a function of
/// the offset between two cells.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionKernel {
    table: ScalarField,
}

impl InteractionKernel {
    /// Validates evenness under `x -> -x` on the torus.
    pub fn from_table(table: ScalarField) -> Result<Self> {
        let grid = table.grid();
        let n = grid.n();
        for idx in 0..grid.cells() {
            let reflected = match grid.dim() {
                1 => (n - idx % n) % n,
                _ => ((n - idx / n) % n) * n + (n - idx % n) % n,
            };
            let delta = (table.values()[idx] - table.values()[reflected]).abs();
            if delta > 1e-12 {
                return Err(Error::Format {
                    what: "interaction kernel",
                    detail: format!(
                        "kernel table is not even under reflection (offset {idx}, asymmetry {delta:e})"
                    ),
                });
            }
        }
        Ok(Self { table })
    }

    /// Tabulate a radial profile of the periodic distance.
    pub fn from_radial(grid: Grid, profile: impl Fn(f64) -> f64) -> Self {
        let table = ScalarField::from_fn(grid, |x| profile(grid.distance([0.0, 0.0], x)));
        Self { table }
    }

    pub fn table(&self) -> &ScalarField {
        &self.table
    }

    /// The induced potential `(W * rho)(x) = integral W(|x-y|) rho(y) dy`,
    /// via circular convolution.
    pub fn mean_field(&self, rho: &ScalarField) -> ScalarField {
        spectral::periodic_convolution(&self.table, rho)
    }
}

#[derive(Debug, Clone)]
pub enum EnergyTerm {
    /// `integral V rho`.
    LinearPotential(ScalarField),
    /// `1/2 double-integral W(|x-y|) rho(x) rho(y)`.
    Interaction(InteractionKernel),
    /// `integral |grad log rho|^2 rho`.
    FisherInformation,
}

/// Signed sum of energy terms.
#[derive(Debug, Clone, Default)]
pub struct EnergyFunctional {
    terms: Vec<(f64, EnergyTerm)>,
}

impl EnergyFunctional {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn linear(potential: ScalarField) -> Self {
        Self::zero().with_term(1.0, EnergyTerm::LinearPotential(potential))
    }

    pub fn interaction(kernel: InteractionKernel, coefficient: f64) -> Self {
        Self::zero().with_term(coefficient, EnergyTerm::Interaction(kernel))
    }

    pub fn fisher(coefficient: f64) -> Self {
        Self::zero().with_term(coefficient, EnergyTerm::FisherInformation)
    }

    pub fn with_term(mut self, coefficient: f64, term: EnergyTerm) -> Self {
        self.terms.push((coefficient, term));
        self
    }

    pub fn terms(&self) -> &[(f64, EnergyTerm)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when the functional is affine in the density (no curvature),
    /// i.e. contains only linear-potential terms.
    pub fn is_linear(&self) -> bool {
        self.terms
            .iter()
            .all(|(_, t)| matches!(t, EnergyTerm::LinearPotential(_)))
    }

    pub fn evaluate(&self, rho: &ScalarField) -> Result<f64> {
        require_density(rho)?;
        let mut total = 0.0;
        for (coeff, term) in &self.terms {
            total += coeff
                * match term {
                    EnergyTerm::LinearPotential(v) => v.inner(rho),
                    EnergyTerm::Interaction(k) => 0.5 * k.mean_field(rho).inner(rho),
                    EnergyTerm::FisherInformation => fisher_energy(rho),
                };
        }
        Ok(total)
    }

    /// Exact discrete first variation, zero-mean gauge.
    pub fn first_variation(&self, rho: &ScalarField) -> Result<ScalarField> {
        require_density(rho)?;
        let mut out = ScalarField::zeros(rho.grid());
        for (coeff, term) in &self.terms {
            let v = match term {
                EnergyTerm::LinearPotential(v) => v.clone(),
                EnergyTerm::Interaction(k) => k.mean_field(rho),
                EnergyTerm::FisherInformation => fisher_variation(rho),
            };
            out = out.add_scaled(*coeff, &v);
        }
        Ok(out.zero_mean())
    }

    /// Metric gradient `-div(rho grad dF/drho)`; zero total mass.
    pub fn wasserstein_gradient(&self, rho: &ScalarField) -> Result<TangentVector> {
        let variation = self.first_variation(rho)?;
        Ok(operators::apply_laplacian(rho, &variation)?.scale(-1.0))
    }

    /// Test-harness operation: discrepancy between the centered finite
    /// difference of `evaluate` along `h_dir` and the pairing with
    /// `first_variation`. O(eps^2) for smooth positive data; zero to
    /// rounding for affine functionals.
    pub fn variation_check(
        &self,
        rho: &ScalarField,
        h_dir: &TangentVector,
        eps: f64,
    ) -> Result<f64> {
        let plus = self.evaluate(&rho.add_scaled(eps, h_dir.field()))?;
        let minus = self.evaluate(&rho.add_scaled(-eps, h_dir.field()))?;
        let fd = (plus - minus) / (2.0 * eps);
        let paired = self.first_variation(rho)?.inner(h_dir.field());
        Ok((fd - paired).abs())
    }
}

fn require_density(rho: &ScalarField) -> Result<()> {
    let min = rho.min();
    if min <= 0.0 {
        return Err(Error::NonpositiveDensity {
            context: "energy functional",
            min,
        });
    }
    Ok(())
}

/// `sum_faces rho_face |grad log rho|^2 vol`.
fn fisher_energy(rho: &ScalarField) -> f64 {
    let log_rho = rho.map(f64::ln);
    let g = log_rho.gradient();
    rho.face_average().face_multiply(&g).face_inner(&g)
}

/// Analytic gradient of the discrete Fisher energy:
/// `-(2/rho) div(rho_face grad log rho) + |grad log rho|^2` with the shared
/// face-to-cell averaging of the squared gradient.
fn fisher_variation(rho: &ScalarField) -> ScalarField {
    let log_rho = rho.map(f64::ln);
    let weighted = WeightedLaplacian::from_signed_field(rho).apply(&log_rho);
    let avg_sq = log_rho.gradient().magnitude_squared_cells();
    weighted
        .zip_map(rho, |w, r| -2.0 * w / r)
        .zip_map(&avg_sq, |a, b| a + b)
}
