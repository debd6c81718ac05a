//! The Hamiltonian flow on density space: dual-coordinate right-hand side,
//! explicit (RK4) and symplectic (implicit midpoint) time steppers, the
//! Legendre maps between tangent and cotangent coordinates, the geodesic
//! curvature term, and path functionals (action, geodesic energy, residual
//! of the second-order form).
//!
//! The evolved system is
//!   d rho / dt = -div(rho grad phi)
//!   d phi / dt = -1/2 |grad phi|^2 - dF/drho
//! with phi held in the zero-spatial-mean gauge at every step. Mass is
//! conserved structurally: the density update is a discrete divergence.

use crate::error::{Error, Result};
use crate::functionals::EnergyFunctional;
use crate::grid::ScalarField;
use crate::operators::{self, TangentVector, WeightedLaplacian, ZERO_MEAN_TOL};

/// Tolerance on the unit-mass invariant of evolved densities.
pub const MASS_TOL: f64 = 1e-12;

/// Stability guard for explicit stepping: reject when
/// `dt * max|grad phi| / h` exceeds this.
pub const CFL_LIMIT: f64 = 0.5;

/// Cotangent-bundle coordinates `(rho, phi)`: a strictly positive unit-mass
/// density and a zero-mean potential.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    rho: ScalarField,
    phi: ScalarField,
}

impl DualState {
    /// Validates positivity and unit mass; stores `phi` in the zero-mean
    /// gauge.
    pub fn new(rho: ScalarField, phi: ScalarField) -> Result<Self> {
        assert_eq!(rho.grid(), phi.grid(), "fields must share a grid");
        let min = rho.min();
        if min <= 0.0 {
            return Err(Error::NonpositiveDensity {
                context: "dual state",
                min,
            });
        }
        let mass = rho.integrate();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::MassNotUnit { mass });
        }
        Ok(Self {
            rho,
            phi: phi.zero_mean(),
        })
    }

    pub fn rho(&self) -> &ScalarField {
        &self.rho
    }

    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }
}

/// Tangent-bundle coordinates `(rho, d rho/dt)`.
#[derive(Debug, Clone)]
pub struct PrimalState {
    rho: ScalarField,
    rho_dot: TangentVector,
}

impl PrimalState {
    pub fn new(rho: ScalarField, rho_dot: TangentVector) -> Result<Self> {
        assert_eq!(rho.grid(), rho_dot.field().grid(), "fields must share a grid");
        let mass = rho.integrate();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::MassNotUnit { mass });
        }
        Ok(Self { rho, rho_dot })
    }

    pub fn rho(&self) -> &ScalarField {
        &self.rho
    }

    pub fn rho_dot(&self) -> &TangentVector {
        &self.rho_dot
    }
}

/// Per-state diagnostics recorded along a trajectory.
#[derive(Debug, Clone, Copy)]
pub struct StepDiagnostics {
    pub t: f64,
    pub hamiltonian: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub mass: f64,
    pub min_rho: f64,
    /// Iterative-solver work spent reaching this state from the previous
    /// stored one (fixed-point iterations for the midpoint rule; zero for
    /// explicit steps).
    pub solver_iters: usize,
}

/// A time-ordered sequence of dual states with matching diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<DualState>,
    diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    /// Assemble a trajectory from matched times, states, and diagnostics;
    /// used by paths produced outside the integrators (e.g. transformed
    /// heat pairs). Times must be strictly increasing, one diagnostics row
    /// per state.
    pub fn from_parts(
        times: Vec<f64>,
        states: Vec<DualState>,
        diagnostics: Vec<StepDiagnostics>,
    ) -> Result<Self> {
        if times.len() != states.len() || times.len() != diagnostics.len() || times.is_empty() {
            return Err(Error::NonUniformTimes);
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NonUniformTimes);
        }
        Ok(Self {
            times,
            states,
            diagnostics,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DualState] {
        &self.states
    }

    pub fn diagnostics(&self) -> &[StepDiagnostics] {
        &self.diagnostics
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &DualState {
        self.states.last().expect("trajectory is never empty")
    }

    /// Uniform spacing of the stored states; error when times are not
    /// uniform to rounding.
    pub fn uniform_dt(&self) -> Result<f64> {
        if self.times.len() < 2 {
            return Err(Error::NonUniformTimes);
        }
        let dt = self.times[1] - self.times[0];
        if dt <= 0.0 {
            return Err(Error::NonUniformTimes);
        }
        for w in self.times.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt {
                return Err(Error::NonUniformTimes);
            }
        }
        Ok(dt)
    }

    /// Keep every `stride`-th state (and the diagnostics row with it).
    pub fn subsample(&self, stride: usize) -> Trajectory {
        assert!(stride >= 1);
        let pick = |i: usize| i.is_multiple_of(stride);
        Trajectory {
            times: self
                .times
                .iter()
                .enumerate()
                .filter(|(i, _)| pick(*i))
                .map(|(_, t)| *t)
                .collect(),
            states: self
                .states
                .iter()
                .enumerate()
                .filter(|(i, _)| pick(*i))
                .map(|(_, s)| s.clone())
                .collect(),
            diagnostics: self
                .diagnostics
                .iter()
                .enumerate()
                .filter(|(i, _)| pick(*i))
                .map(|(_, d)| *d)
                .collect(),
        }
    }
}

/// Time integrator choice for the dual system.
#[derive(Debug, Clone, Copy)]
pub enum Integrator {
    /// Classical explicit 4-stage Runge-Kutta; subject to the CFL guard.
    Rk4,
    /// Implicit midpoint by fixed-point iteration; unconditionally mass
    /// conserving and symplectic for this non-separable Hamiltonian.
    Midpoint { newton_tol: f64, max_iters: usize },
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::Midpoint {
            newton_tol: 1e-13,
            max_iters: 100,
        }
    }
}

/// `H(rho, phi) = 1/2 integral |grad phi|^2 rho + F(rho)`.
pub fn hamiltonian(state: &DualState, energy: &EnergyFunctional) -> Result<f64> {
    Ok(kinetic_energy(state)? + energy.evaluate(state.rho())?)
}

/// Kinetic part of the Hamiltonian, `1/2 g_W(phi, phi)` in dual form.
pub fn kinetic_energy(state: &DualState) -> Result<f64> {
    Ok(0.5 * operators::metric_dual(state.rho(), state.phi(), state.phi())?)
}

/// `L(rho, rho_dot) = 1/2 g_W(rho_dot, rho_dot) - F(rho)` in primal form.
pub fn lagrangian(state: &PrimalState, energy: &EnergyFunctional, tol: f64) -> Result<f64> {
    let kinetic = 0.5 * operators::metric_primal(state.rho(), state.rho_dot(), state.rho_dot(), tol)?;
    Ok(kinetic - energy.evaluate(state.rho())?)
}

/// Legendre map tangent -> cotangent: `phi = (-lap_rho)^+ rho_dot`.
pub fn legendre_to_dual(state: &PrimalState, tol: f64) -> Result<DualState> {
    let phi = operators::pseudo_inverse(state.rho(), state.rho_dot(), tol)?;
    DualState::new(state.rho().clone(), phi)
}

/// Legendre map cotangent -> tangent: `rho_dot = -lap_rho phi` (the
/// continuity equation).
pub fn legendre_to_primal(state: &DualState) -> Result<PrimalState> {
    let rho_dot = operators::apply_laplacian(state.rho(), state.phi())?.scale(-1.0);
    PrimalState::new(state.rho().clone(), rho_dot)
}

/// Right-hand side of the dual system:
/// `d rho = -div(rho grad phi)`,
/// `d phi = -1/2 |grad phi|^2 - dF/drho`, zero-mean gauge.
pub fn rhs_dual(
    state: &DualState,
    energy: &EnergyFunctional,
) -> Result<(TangentVector, ScalarField)> {
    let drho = operators::apply_laplacian(state.rho(), state.phi())?.scale(-1.0);
    let kinetic = state.phi().gradient().magnitude_squared_cells();
    let mut dphi = kinetic.scale(-0.5);
    if !energy.is_zero() {
        dphi = dphi.add_scaled(-1.0, &energy.first_variation(state.rho())?);
    }
    Ok((drho, dphi.zero_mean()))
}

fn check_positivity(rho: &ScalarField, stage: &'static str) -> Result<()> {
    let min = rho.min();
    if min <= 0.0 {
        return Err(Error::PositivityLoss { stage, min });
    }
    Ok(())
}

fn check_mass(rho: &ScalarField) -> Result<()> {
    let mass = rho.integrate();
    if (mass - 1.0).abs() > MASS_TOL {
        return Err(Error::MassNotUnit { mass });
    }
    Ok(())
}

/// One classical RK4 step. Rejects steps violating the CFL-like guard and
/// reports positivity loss with the offending stage named.
pub fn step_rk4(state: &DualState, energy: &EnergyFunctional, dt: f64) -> Result<DualState> {
    if dt <= 0.0 {
        return Err(Error::NonpositiveTimeStep { dt });
    }
    let h = state.rho().grid().spacing();
    let cfl = dt * state.phi().gradient().max_abs() / h;
    if cfl > CFL_LIMIT {
        return Err(Error::CflViolation {
            value: cfl,
            limit: CFL_LIMIT,
        });
    }

    let stage = |rho: &ScalarField, phi: &ScalarField, name: &'static str| -> Result<DualState> {
        check_positivity(rho, name)?;
        Ok(DualState {
            rho: rho.clone(),
            phi: phi.clone(),
        })
    };

    let (k1r, k1p) = rhs_dual(state, energy)?;
    let s2 = stage(
        &state.rho.add_scaled(0.5 * dt, k1r.field()),
        &state.phi.add_scaled(0.5 * dt, &k1p),
        "rk4 stage 2",
    )?;
    let (k2r, k2p) = rhs_dual(&s2, energy)?;
    let s3 = stage(
        &state.rho.add_scaled(0.5 * dt, k2r.field()),
        &state.phi.add_scaled(0.5 * dt, &k2p),
        "rk4 stage 3",
    )?;
    let (k3r, k3p) = rhs_dual(&s3, energy)?;
    let s4 = stage(
        &state.rho.add_scaled(dt, k3r.field()),
        &state.phi.add_scaled(dt, &k3p),
        "rk4 stage 4",
    )?;
    let (k4r, k4p) = rhs_dual(&s4, energy)?;

    let sixth = dt / 6.0;
    let rho = state
        .rho
        .add_scaled(sixth, k1r.field())
        .add_scaled(2.0 * sixth, k2r.field())
        .add_scaled(2.0 * sixth, k3r.field())
        .add_scaled(sixth, k4r.field());
    let phi = state
        .phi
        .add_scaled(sixth, &k1p)
        .add_scaled(2.0 * sixth, &k2p)
        .add_scaled(2.0 * sixth, &k3p)
        .add_scaled(sixth, &k4p);
    check_positivity(&rho, "rk4 result")?;
    check_mass(&rho)?;
    Ok(DualState {
        rho,
        phi: phi.zero_mean(),
    })
}

/// One implicit midpoint step, solved by fixed-point iteration on the
/// midpoint state. On divergence the step is retried as two half steps
/// (bounded recursion); a persistent failure signals that dt is too large.
/// Returns the stepped state and the number of fixed-point iterations
/// spent.
pub fn step_midpoint(
    state: &DualState,
    energy: &EnergyFunctional,
    dt: f64,
    newton_tol: f64,
    max_iters: usize,
) -> Result<(DualState, usize)> {
    if dt <= 0.0 {
        return Err(Error::NonpositiveTimeStep { dt });
    }
    step_midpoint_inner(state, energy, dt, newton_tol, max_iters, 0)
}

fn step_midpoint_inner(
    state: &DualState,
    energy: &EnergyFunctional,
    dt: f64,
    newton_tol: f64,
    max_iters: usize,
    depth: usize,
) -> Result<(DualState, usize)> {
    const MAX_SPLIT_DEPTH: usize = 8;
    let half = 0.5 * dt;
    let mut mid = state.clone();
    let mut iterations = 0;
    let mut last_delta = f64::INFINITY;
    let mut growth_streak = 0;
    let mut converged = false;

    while iterations < max_iters {
        iterations += 1;
        let (drho, dphi) = rhs_dual(&mid, energy)?;
        let rho_next = state.rho.add_scaled(half, drho.field());
        let phi_next = state.phi.add_scaled(half, &dphi);
        if rho_next.min() <= 0.0 {
            // An iterate leaving the positive cone is divergence evidence,
            // handled by the step-splitting fallback below.
            break;
        }
        let delta = rho_next
            .add_scaled(-1.0, &mid.rho)
            .max_abs()
            .max(phi_next.add_scaled(-1.0, &mid.phi).max_abs());
        mid = DualState {
            rho: rho_next,
            phi: phi_next,
        };
        if delta <= newton_tol {
            converged = true;
            break;
        }
        growth_streak = if delta > last_delta { growth_streak + 1 } else { 0 };
        if growth_streak >= 3 {
            break;
        }
        last_delta = delta;
    }

    if !converged {
        if depth >= MAX_SPLIT_DEPTH {
            return Err(Error::FixedPointDiverged { dt });
        }
        let (first, it1) =
            step_midpoint_inner(state, energy, 0.5 * dt, newton_tol, max_iters, depth + 1)?;
        let (second, it2) =
            step_midpoint_inner(&first, energy, 0.5 * dt, newton_tol, max_iters, depth + 1)?;
        return Ok((second, iterations + it1 + it2));
    }

    let (drho, dphi) = rhs_dual(&mid, energy)?;
    let rho = state.rho.add_scaled(dt, drho.field());
    let phi = state.phi.add_scaled(dt, &dphi);
    check_positivity(&rho, "midpoint result")?;
    check_mass(&rho)?;
    Ok((
        DualState {
            rho,
            phi: phi.zero_mean(),
        },
        iterations,
    ))
}

/// Integrate `steps` uniform steps of size `dt`, storing every
/// `store_stride`-th state (always including the initial and final ones
/// when `steps` is a multiple of the stride).
pub fn integrate(
    initial: DualState,
    energy: &EnergyFunctional,
    dt: f64,
    steps: usize,
    integrator: Integrator,
    store_stride: usize,
) -> Result<Trajectory> {
    assert!(store_stride >= 1);
    if dt <= 0.0 {
        return Err(Error::NonpositiveTimeStep { dt });
    }
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        diagnostics: Vec::new(),
    };
    let record = |traj: &mut Trajectory, t: f64, s: &DualState, iters: usize| -> Result<()> {
        let kinetic = kinetic_energy(s)?;
        let potential = energy.evaluate(s.rho())?;
        traj.times.push(t);
        traj.diagnostics.push(StepDiagnostics {
            t,
            hamiltonian: kinetic + potential,
            kinetic,
            potential,
            mass: s.rho().integrate(),
            min_rho: s.rho().min(),
            solver_iters: iters,
        });
        traj.states.push(s.clone());
        Ok(())
    };

    record(&mut traj, 0.0, &initial, 0)?;
    let mut state = initial;
    let mut pending_iters = 0;
    for step in 1..=steps {
        // Failures carry the time at which the step was attempted.
        let wrap_time = |e: Error| Error::StepFailed {
            time: (step - 1) as f64 * dt,
            source: Box::new(e),
        };
        let iters = match integrator {
            Integrator::Rk4 => {
                state = step_rk4(&state, energy, dt).map_err(wrap_time)?;
                0
            }
            Integrator::Midpoint {
                newton_tol,
                max_iters,
            } => {
                let (next, iters) =
                    step_midpoint(&state, energy, dt, newton_tol, max_iters).map_err(wrap_time)?;
                state = next;
                iters
            }
        };
        pending_iters += iters;
        if step % store_stride == 0 {
            record(&mut traj, step as f64 * dt, &state, pending_iters)?;
            pending_iters = 0;
        }
    }
    Ok(traj)
}

/// Geodesic curvature (quadratic-in-velocity) term of the second-order
/// flow: with `phi = (-lap_rho)^+ rho_dot`,
/// `Gamma(rho_dot, rho_dot) = lap_{rho_dot} phi - 1/2 lap_rho |grad phi|^2`.
/// Along an unforced flow this equals `-d^2 rho/dt^2`. The first term uses
/// the signed mass rate as face weight; only the pseudo-inverse needs
/// positivity.
pub fn christoffel_term(state: &PrimalState, tol: f64) -> Result<ScalarField> {
    let phi = operators::pseudo_inverse(state.rho(), state.rho_dot(), tol)?;
    let transport = WeightedLaplacian::from_signed_field(state.rho_dot().field()).apply(&phi);
    let quad = phi.gradient().magnitude_squared_cells();
    let pressure = operators::apply_laplacian(state.rho(), &quad)?;
    Ok(transport.add_scaled(-0.5, pressure.field()))
}

/// Max-norm residual of the second-order (primal) form of the flow at
/// interior index `k`, with time derivatives reconstructed by centered
/// differences:
/// `d^2 rho/dt^2 + Gamma(rho_dot, rho_dot) - div(rho grad dF/drho)`.
/// Decays at second order in the stored spacing along any trajectory of
/// the dual system.
pub fn primal_residual(
    traj: &Trajectory,
    energy: &EnergyFunctional,
    k: usize,
) -> Result<f64> {
    let dt = traj.uniform_dt()?;
    if k == 0 || k + 1 >= traj.len() {
        return Err(Error::IndexOutOfRange {
            index: k,
            len: traj.len(),
        });
    }
    let tol = 1e-12;
    let prev = traj.states()[k - 1].rho();
    let here = traj.states()[k].rho();
    let next = traj.states()[k + 1].rho();

    let rho_dot = TangentVector::projected(next.add_scaled(-1.0, prev).scale(0.5 / dt));
    let rho_ddot = next
        .add_scaled(-2.0, here)
        .add_scaled(1.0, prev)
        .scale(1.0 / (dt * dt));
    let gamma = christoffel_term(&PrimalState::new(here.clone(), rho_dot)?, tol)?;
    let mut residual = rho_ddot.add_scaled(1.0, &gamma);
    if !energy.is_zero() {
        let drive = operators::apply_laplacian(here, &energy.first_variation(here)?)?;
        residual = residual.add_scaled(-1.0, drive.field());
    }
    Ok(residual.max_abs())
}

/// Trapezoid quadrature of the Lagrangian along the path, with the mass
/// rate at each node recovered through the Legendre map.
pub fn action(traj: &Trajectory, energy: &EnergyFunctional, tol: f64) -> Result<f64> {
    let dt = traj.uniform_dt()?;
    if traj.len() < 3 {
        return Err(Error::IndexOutOfRange {
            index: traj.len(),
            len: 3,
        });
    }
    let mut total = 0.0;
    for (i, state) in traj.states().iter().enumerate() {
        let primal = legendre_to_primal(state)?;
        let weight = if i == 0 || i + 1 == traj.len() { 0.5 } else { 1.0 };
        total += weight * lagrangian(&primal, energy, tol)?;
    }
    Ok(total * dt)
}

/// Action of a bare density path with velocities reconstructed by finite
/// differences (centered inside, one-sided second-order at the ends).
/// Unlike [`action`] this needs no potential data, so it applies to
/// perturbed paths; at a critical path its first variation vanishes.
pub fn path_action_fd(
    times: &[f64],
    densities: &[ScalarField],
    energy: &EnergyFunctional,
    tol: f64,
) -> Result<f64> {
    if times.len() != densities.len() || times.len() < 3 {
        return Err(Error::NonUniformTimes);
    }
    let dt = times[1] - times[0];
    if dt <= 0.0 || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt) {
        return Err(Error::NonUniformTimes);
    }
    let last = times.len() - 1;
    let mut total = 0.0;
    for k in 0..=last {
        let rho_dot = if k == 0 {
            densities[0]
                .scale(-3.0)
                .add_scaled(4.0, &densities[1])
                .add_scaled(-1.0, &densities[2])
                .scale(0.5 / dt)
        } else if k == last {
            densities[last]
                .scale(3.0)
                .add_scaled(-4.0, &densities[last - 1])
                .add_scaled(1.0, &densities[last - 2])
                .scale(0.5 / dt)
        } else {
            densities[k + 1]
                .add_scaled(-1.0, &densities[k - 1])
                .scale(0.5 / dt)
        };
        let primal = PrimalState::new(densities[k].clone(), TangentVector::projected(rho_dot))?;
        let weight = if k == 0 || k == last { 0.5 } else { 1.0 };
        total += weight * lagrangian(&primal, energy, tol)?;
    }
    Ok(total * dt)
}

/// Geodesic (kinetic) energy of an unforced trajectory together with the
/// relative deviation of its integrand from constancy; along an exact
/// geodesic the integrand `g_W(rho_dot, rho_dot)` is conserved.
#[derive(Debug, Clone)]
pub struct GeodesicEnergy {
    pub energy: f64,
    pub integrand: Vec<f64>,
    pub max_relative_deviation: f64,
}

pub fn geodesic_energy(traj: &Trajectory, tol: f64) -> Result<GeodesicEnergy> {
    let dt = traj.uniform_dt()?;
    let mut integrand = Vec::with_capacity(traj.len());
    for state in traj.states() {
        let primal = legendre_to_primal(state)?;
        integrand.push(operators::metric_primal(
            primal.rho(),
            primal.rho_dot(),
            primal.rho_dot(),
            tol,
        )?);
    }
    let mut energy = 0.0;
    for (i, v) in integrand.iter().enumerate() {
        let weight = if i == 0 || i + 1 == integrand.len() { 0.5 } else { 1.0 };
        energy += weight * v;
    }
    energy *= dt;
    let mean = integrand.iter().sum::<f64>() / integrand.len() as f64;
    let max_relative_deviation = if mean.abs() < ZERO_MEAN_TOL {
        0.0
    } else {
        integrand
            .iter()
            .map(|v| (v - mean).abs())
            .fold(0.0f64, f64::max)
            / mean.abs()
    };
    Ok(GeodesicEnergy {
        energy,
        integrand,
        max_relative_deviation,
    })
}
