//! Runtime invariant suite: every module's core identities checked on
//! small grids, one pass/fail line per property. This is what
//! `whflow verify` runs; the heavier acceptance suite lives with the
//! integration tests.

use crate::dynamics::{self, DualState, Integrator, PrimalState};
use crate::functionals::{EnergyFunctional, InteractionKernel};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::operators::{self, TangentVector};
use crate::particles::{self, SamplingMode};
use crate::presets;
use crate::quantum::{self, HeatPair};
use crate::scenarios::{self, ScenarioKind};

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Least-squares slope of log(y) against log(x).
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed,
        detail,
    }
}

fn random_vector_field(grid: Grid, seed: u64) -> VectorField {
    let mut v = VectorField::zeros(grid);
    for axis in 0..grid.dim() {
        let f = presets::random_smooth(grid, seed + axis as u64, 1.0);
        v.component_mut(axis).copy_from_slice(f.values());
    }
    v
}

/// Run the whole suite; outcomes are deterministic (fixed seeds, fixed
/// grids) so two runs render identically.
pub fn run_all() -> Vec<CheckOutcome> {
    let mut out = Vec::new();

    // --- grid calculus -----------------------------------------------------
    {
        let mut worst: f64 = 0.0;
        for (dim, n) in [(1, 32), (2, 12)] {
            let grid = Grid::new(dim, n).unwrap();
            let f = presets::random_smooth(grid, 1, 1.0);
            let v = random_vector_field(grid, 2);
            let gap = (f.inner(&v.divergence()) + f.gradient().face_inner(&v)).abs();
            worst = worst.max(gap);
        }
        out.push(outcome(
            "grid: gradient/divergence adjointness",
            worst <= 1e-12,
            format!("max gap {worst:.3e}"),
        ));
    }
    {
        let grid = Grid::new(2, 12).unwrap();
        let v = random_vector_field(grid, 3);
        let gap = v.divergence().integrate().abs();
        out.push(outcome(
            "grid: divergence theorem on the torus",
            gap <= 1e-12,
            format!("|integral div v| = {gap:.3e}"),
        ));
    }
    {
        let grid = Grid::new(1, 24).unwrap();
        let f = presets::random_smooth(grid, 4, 1.0);
        let shifted_grad = f.shift(0).gradient();
        let grad = f.gradient();
        let mut gap: f64 = 0.0;
        for i in 0..grid.cells() {
            gap = gap.max((shifted_grad.component(0)[i] - grad.component(0)[grid.fwd(i, 0)]).abs());
        }
        out.push(outcome(
            "grid: translation equivariance",
            gap <= 1e-13,
            format!("max gap {gap:.3e}"),
        ));
    }

    // --- weighted operator algebra ------------------------------------------
    {
        let mut sym: f64 = 0.0;
        let mut nsd: f64 = f64::NEG_INFINITY;
        let mut kernel: f64 = 0.0;
        for (dim, n) in [(1, 48), (2, 16)] {
            let grid = Grid::new(dim, n).unwrap();
            let rho = presets::random_positive_density(grid, 5, 0.5);
            let f = presets::random_smooth(grid, 6, 1.0);
            let g = presets::random_smooth(grid, 7, 1.0);
            let lf = operators::apply_laplacian(&rho, &f).unwrap();
            let lg = operators::apply_laplacian(&rho, &g).unwrap();
            sym = sym.max((lf.field().inner(&g) - f.inner(lg.field())).abs());
            nsd = nsd.max(f.inner(lf.field()));
            let c = operators::apply_laplacian(&rho, &ScalarField::constant(grid, 3.7)).unwrap();
            kernel = kernel.max(c.field().max_abs());
        }
        out.push(outcome(
            "operators: weighted Laplacian symmetry",
            sym <= 1e-10,
            format!("max asymmetry {sym:.3e}"),
        ));
        out.push(outcome(
            "operators: weighted Laplacian negative semidefinite",
            nsd <= 1e-10,
            format!("max quadratic form {nsd:.3e}"),
        ));
        out.push(outcome(
            "operators: constants span the kernel",
            kernel <= 1e-12,
            format!("|lap const| = {kernel:.3e}"),
        ));
    }
    {
        let mut round: f64 = 0.0;
        let mut gauge: f64 = 0.0;
        let mut projection: f64 = 0.0;
        let mut self_adjoint: f64 = 0.0;
        for (dim, n) in [(1, 48), (2, 16)] {
            let grid = Grid::new(dim, n).unwrap();
            let rho = presets::random_positive_density(grid, 8, 0.5);
            let sigma = TangentVector::projected(presets::random_smooth(grid, 9, 1.0));
            let tol = 1e-12;
            let phi = operators::pseudo_inverse(&rho, &sigma, tol).unwrap();
            gauge = gauge.max(phi.integrate().abs());
            let back = operators::apply_laplacian(&rho, &phi).unwrap();
            round = round.max(back.field().add_scaled(1.0, sigma.field()).max_abs());
            let mid = back.scale(-1.0);
            let again = operators::pseudo_inverse(&rho, &mid, tol).unwrap();
            projection = projection.max(phi.add_scaled(-1.0, &again).max_abs());
            let s2 = TangentVector::projected(presets::random_smooth(grid, 10, 1.0));
            let a = sigma
                .field()
                .inner(&operators::pseudo_inverse(&rho, &s2, tol).unwrap());
            let b = s2
                .field()
                .inner(&operators::pseudo_inverse(&rho, &sigma, tol).unwrap());
            self_adjoint = self_adjoint.max((a - b).abs());
        }
        out.push(outcome(
            "operators: pseudo-inverse round trip",
            round <= 1e-10,
            format!("max residual {round:.3e}"),
        ));
        out.push(outcome(
            "operators: pseudo-inverse zero-mean gauge",
            gauge <= 1e-12,
            format!("max |integral phi| = {gauge:.3e}"),
        ));
        out.push(outcome(
            "operators: projection identity pinv lap pinv = pinv",
            projection <= 1e-9,
            format!("max gap {projection:.3e}"),
        ));
        out.push(outcome(
            "operators: pseudo-inverse self-adjointness",
            self_adjoint <= 1e-9,
            format!("max gap {self_adjoint:.3e}"),
        ));
    }
    {
        let grid = Grid::new(1, 48).unwrap();
        let rho = presets::random_positive_density(grid, 11, 0.5);
        let mut worst: f64 = 0.0;
        for case in 0..20u64 {
            let p1 = presets::random_smooth(grid, 100 + 2 * case, 0.8);
            let p2 = presets::random_smooth(grid, 101 + 2 * case, 0.8);
            let s1 = operators::apply_laplacian(&rho, &p1).unwrap().scale(-1.0);
            let s2 = operators::apply_laplacian(&rho, &p2).unwrap().scale(-1.0);
            let dual = operators::metric_dual(&rho, &p1, &p2).unwrap();
            let primal = operators::metric_primal(&rho, &s1, &s2, 1e-12).unwrap();
            worst = worst.max((dual - primal).abs() / dual.abs().max(1.0));
        }
        out.push(outcome(
            "operators: primal/dual metric equivalence",
            worst <= 1e-8,
            format!("max relative gap {worst:.3e}"),
        ));
    }
    {
        let grid = Grid::new(1, 32).unwrap();
        let rho = presets::random_positive_density(grid, 12, 0.3);
        let h_dir = TangentVector::projected(presets::random_smooth(grid, 13, 30.0));
        let sigma = TangentVector::projected(presets::random_smooth(grid, 14, 5.0));
        let eps = [1e-3, 1e-4, 1e-5];
        let ds: Vec<f64> = eps
            .iter()
            .map(|&e| operators::pseudo_inverse_derivative_check(&rho, &h_dir, &sigma, e).unwrap())
            .collect();
        let slope = log_log_slope(&eps, &ds);
        out.push(outcome(
            "operators: pseudo-inverse derivative identity is O(eps^2)",
            (slope - 2.0).abs() <= 0.2,
            format!("slope {slope:.3} ({:.2e}, {:.2e}, {:.2e})", ds[0], ds[1], ds[2]),
        ));
    }

    // --- energy functionals --------------------------------------------------
    {
        let grid = Grid::new(1, 64).unwrap();
        let rho = presets::random_positive_density(grid, 15, 0.3);
        let h_dir = TangentVector::projected(presets::random_smooth(grid, 16, 2.0));
        let linear = EnergyFunctional::linear(presets::random_smooth(grid, 17, 1.0));
        let kernel = InteractionKernel::from_radial(grid, |r| (-0.5 * (r / 0.15).powi(2)).exp());
        let interaction = EnergyFunctional::interaction(kernel, 0.7);
        let fisher = EnergyFunctional::fisher(0.125);

        let lin_gap = linear.variation_check(&rho, &h_dir, 1e-4).unwrap();
        let int_gap = interaction.variation_check(&rho, &h_dir, 1e-4).unwrap();
        out.push(outcome(
            "functionals: affine/quadratic variation checks are exact",
            lin_gap <= 1e-10 && int_gap <= 1e-10,
            format!("linear {lin_gap:.3e}, interaction {int_gap:.3e}"),
        ));

        let eps = [1e-3, 1e-4, 1e-5];
        let ds: Vec<f64> = eps
            .iter()
            .map(|&e| fisher.variation_check(&rho, &h_dir, e).unwrap())
            .collect();
        let slope = log_log_slope(&eps, &ds);
        out.push(outcome(
            "functionals: Fisher variation check is O(eps^2)",
            (slope - 2.0).abs() <= 0.2,
            format!("slope {slope:.3}"),
        ));

        let uniform = ScalarField::constant(grid, 1.0);
        let at_uniform = fisher.evaluate(&uniform).unwrap();
        let at_rho = fisher.evaluate(&rho).unwrap();
        out.push(outcome(
            "functionals: Fisher information nonnegative, zero only at uniform",
            at_uniform == 0.0 && at_rho > 0.0,
            format!("F(uniform) = {at_uniform:.1e}, F(rho) = {at_rho:.3e}"),
        ));

        let grad = linear.wasserstein_gradient(&rho).unwrap();
        let mass = grad.field().integrate().abs();
        out.push(outcome(
            "functionals: metric gradient has zero total mass",
            mass <= 1e-12,
            format!("|integral| = {mass:.3e}"),
        ));
    }
    {
        let errs: Vec<f64> = [32usize, 64, 128]
            .iter()
            .map(|&n| {
                let grid = Grid::new(1, n).unwrap();
                let rho = presets::cosine(grid, 1.0, 0.5, [1, 0]);
                let fisher = EnergyFunctional::fisher(0.125).first_variation(&rho).unwrap();
                let sqrt_rho = rho.map(f64::sqrt);
                let quantum_potential = sqrt_rho
                    .gradient()
                    .divergence()
                    .zip_map(&sqrt_rho, |lap, s| -lap / (2.0 * s))
                    .zero_mean();
                fisher.add_scaled(-1.0, &quantum_potential).max_abs()
            })
            .collect();
        let hs = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
        let slope = log_log_slope(&hs, &errs);
        out.push(outcome(
            "functionals: Fisher variation matches the quantum potential at O(h^2)",
            (slope - 2.0).abs() <= 0.3,
            format!("spatial order {slope:.3}"),
        ));
    }

    // --- flow dynamics --------------------------------------------------------
    {
        let grid = Grid::new(1, 48).unwrap();
        let state = DualState::new(
            presets::random_positive_density(grid, 18, 0.4),
            presets::random_smooth(grid, 19, 0.3),
        )
        .unwrap();
        let primal = dynamics::legendre_to_primal(&state).unwrap();
        let back = dynamics::legendre_to_dual(&primal, 1e-12).unwrap();
        let gap = state.phi().add_scaled(-1.0, back.phi()).max_abs();
        out.push(outcome(
            "dynamics: Legendre round trip",
            gap <= 1e-9,
            format!("max gap {gap:.3e}"),
        ));
        let dual_k = dynamics::kinetic_energy(&state).unwrap();
        let primal_k = 0.5
            * operators::metric_primal(primal.rho(), primal.rho_dot(), primal.rho_dot(), 1e-12)
                .unwrap();
        let kin_gap = (dual_k - primal_k).abs() / dual_k.max(1.0);
        out.push(outcome(
            "dynamics: kinetic energy equal in both coordinate systems",
            kin_gap <= 1e-8,
            format!("relative gap {kin_gap:.3e}"),
        ));
    }
    {
        // Short geodesic with the symplectic integrator: mass to rounding,
        // bounded energy drift, zero-mean gauge.
        let grid = Grid::new(1, 64).unwrap();
        let state = DualState::new(
            presets::cosine(grid, 1.0, 0.1, [1, 0]),
            presets::cosine(grid, 0.0, 0.02, [1, 0]),
        )
        .unwrap();
        let free = EnergyFunctional::zero();
        let traj = dynamics::integrate(
            state,
            &free,
            1e-3,
            300,
            Integrator::Midpoint {
                newton_tol: 1e-13,
                max_iters: 100,
            },
            1,
        )
        .unwrap();
        let d = traj.diagnostics();
        let h0 = d[0].hamiltonian;
        let drift = d
            .iter()
            .map(|r| (r.hamiltonian - h0).abs())
            .fold(0.0f64, f64::max)
            / h0.abs();
        let mass = d.iter().map(|r| (r.mass - 1.0).abs()).fold(0.0f64, f64::max);
        let gauge = traj
            .states()
            .iter()
            .map(|s| s.phi().integrate().abs())
            .fold(0.0f64, f64::max);
        out.push(outcome(
            "dynamics: midpoint conserves mass to rounding",
            mass <= 1e-12,
            format!("max |mass-1| = {mass:.3e}"),
        ));
        out.push(outcome(
            "dynamics: midpoint Hamiltonian drift bounded",
            drift <= 1e-5,
            format!("relative drift {drift:.3e}"),
        ));
        out.push(outcome(
            "dynamics: potentials stay in the zero-mean gauge",
            gauge <= 1e-12,
            format!("max |integral phi| = {gauge:.3e}"),
        ));

        // Second-order residual of the primal form, measured at three FD
        // spacings from one finely integrated trajectory.
        let strides = [8usize, 4, 2];
        let residuals: Vec<f64> = strides
            .iter()
            .map(|&s| {
                let sub = traj.subsample(s);
                let k = sub.len() / 2;
                dynamics::primal_residual(&sub, &free, k).unwrap()
            })
            .collect();
        let dts: Vec<f64> = strides.iter().map(|&s| s as f64 * 1e-3).collect();
        let slope = log_log_slope(&dts, &residuals);
        out.push(outcome(
            "dynamics: primal-form residual decays at O(dt^2)",
            (slope - 2.0).abs() <= 0.3,
            format!("order {slope:.3}"),
        ));

        // The curvature term reproduces -d^2 rho/dt^2 along the unforced flow.
        let sub = traj.subsample(4);
        let dt = sub.uniform_dt().unwrap();
        let k = sub.len() / 2;
        let prev = sub.states()[k - 1].rho();
        let here = sub.states()[k].rho();
        let next = sub.states()[k + 1].rho();
        let rho_dot = TangentVector::projected(next.add_scaled(-1.0, prev).scale(0.5 / dt));
        let rho_ddot = next
            .add_scaled(-2.0, here)
            .add_scaled(1.0, prev)
            .scale(1.0 / (dt * dt));
        let gamma = dynamics::christoffel_term(
            &PrimalState::new(here.clone(), rho_dot).unwrap(),
            1e-12,
        )
        .unwrap();
        let gap = gamma.add_scaled(1.0, &rho_ddot).max_abs();
        let scale = rho_ddot.max_abs().max(1.0);
        out.push(outcome(
            "dynamics: curvature term equals minus the density acceleration",
            gap <= 1e-3 * scale,
            format!("relative gap {:.3e}", gap / scale),
        ));
    }
    {
        let grid = Grid::new(1, 32).unwrap();
        let rho = presets::random_positive_density(grid, 20, 0.4);
        let sigma = TangentVector::projected(presets::random_smooth(grid, 21, 1.0));
        let base = dynamics::christoffel_term(
            &PrimalState::new(rho.clone(), sigma.clone()).unwrap(),
            1e-13,
        )
        .unwrap();
        let scaled = dynamics::christoffel_term(
            &PrimalState::new(rho, sigma.scale(2.0)).unwrap(),
            1e-13,
        )
        .unwrap();
        let gap = scaled.add_scaled(-4.0, &base).max_abs() / scaled.max_abs().max(1.0);
        out.push(outcome(
            "dynamics: curvature term is homogeneous of degree 2",
            gap <= 1e-8,
            format!("relative gap {gap:.3e}"),
        ));
    }

    // --- particle oracle -------------------------------------------------------
    {
        let grid = Grid::new(1, 32).unwrap();
        let rho = presets::cosine(grid, 1.0, 0.5, [1, 0]);
        let phi = presets::cosine(grid, 0.0, 0.05, [1, 0]);
        let a = particles::init_from_density(&rho, &phi, 2000, 99, SamplingMode::Iid).unwrap();
        let b = particles::init_from_density(&rho, &phi, 2000, 99, SamplingMode::Iid).unwrap();
        out.push(outcome(
            "particles: sampling is deterministic under the seed",
            a == b,
            "bit-identical ensembles".to_string(),
        ));

        let hist = particles::push_forward(&a, grid);
        let mass = (hist.integrate() - 1.0).abs();
        out.push(outcome(
            "particles: histogram has unit mass",
            mass <= 1e-12,
            format!("|mass-1| = {mass:.3e}"),
        ));
    }
    {
        // Reversibility of the Verlet stepper under velocity negation.
        let grid = Grid::new(1, 64).unwrap();
        let v_pot = presets::cosine(grid, 0.0, 0.02, [1, 0]);
        let force_field = v_pot.gradient().scale(-1.0);
        let mut force =
            |_t: f64, _e: &particles::ParticleEnsemble| Ok(force_field.clone());
        let rho = presets::cosine(grid, 1.0, 0.3, [1, 0]);
        let phi = presets::cosine(grid, 0.0, 0.01, [1, 0]);
        let start = particles::init_from_density(&rho, &phi, 500, 5, SamplingMode::Iid).unwrap();
        let dt = 5e-3;
        let mut fwd = start.clone();
        for k in 0..40 {
            fwd = particles::step_particles(&fwd, &mut force, k as f64 * dt, dt).unwrap();
        }
        let mut back = fwd.reversed();
        for k in 0..40 {
            back = particles::step_particles(&back, &mut force, k as f64 * dt, dt).unwrap();
        }
        let worst = start
            .positions()
            .iter()
            .zip(back.positions())
            .map(|(p, q)| {
                let d = (p[0] - q[0]).abs();
                d.min(1.0 - d)
            })
            .fold(0.0f64, f64::max);
        out.push(outcome(
            "particles: Verlet time reversal returns the start",
            worst <= 1e-9,
            format!("max displacement {worst:.3e}"),
        ));
    }

    // --- wave / heat oracles -----------------------------------------------------
    {
        let grid = Grid::new(1, 64).unwrap();
        let psi0 = quantum::madelung_compose(
            &presets::cosine(grid, 1.0, 0.5, [1, 0]),
            &ScalarField::zeros(grid),
        )
        .unwrap();
        let v = presets::cosine(grid, 0.0, 0.1, [1, 0]);
        let mut psi = psi0;
        for _ in 0..200 {
            psi = quantum::split_step(&psi, &v, 1e-3).unwrap();
        }
        let norm_gap = (psi.norm_squared() - 1.0).abs();
        out.push(outcome(
            "quantum: split-step stays unitary",
            norm_gap <= 1e-12,
            format!("|norm^2 - 1| = {norm_gap:.3e}"),
        ));

        let rho = presets::random_positive_density(grid, 22, 0.4);
        let phi = presets::random_smooth(grid, 23, 0.3);
        let composed = quantum::madelung_compose(&rho, &phi).unwrap();
        let (rho2, current) = quantum::madelung_decompose(&composed).unwrap();
        let rho_gap = rho2.add_scaled(-1.0, &rho).max_abs();
        let expected = rho.face_average().face_multiply(&phi.gradient()).scale(-1.0);
        let mut cur_gap: f64 = 0.0;
        for (a, b) in current.component(0).iter().zip(expected.component(0)) {
            cur_gap = cur_gap.max((a - b).abs());
        }
        out.push(outcome(
            "quantum: wave decomposition recovers density and current",
            rho_gap <= 1e-12 && cur_gap <= 1e-2,
            format!("rho gap {rho_gap:.3e}, current gap {cur_gap:.3e}"),
        ));
    }
    {
        let grid = Grid::new(1, 64).unwrap();
        let boundary = HeatPair::new(
            presets::cosine(grid, 1.0, 0.5, [1, 0]),
            presets::cosine(grid, 1.0, -0.3, [1, 0]),
        )
        .unwrap();
        let (t0, t1) = (0.0, 0.3);
        let p_start = quantum::heat_pair_evolve(&boundary, t0, t1, t0)
            .unwrap()
            .product_integral();
        let p_end = quantum::heat_pair_evolve(&boundary, t0, t1, t1)
            .unwrap()
            .product_integral();
        let drift = (p_end - p_start).abs();
        out.push(outcome(
            "quantum: heat pair conserves the product integral",
            drift <= 1e-12,
            format!("|drift| = {drift:.3e}"),
        ));

        // Transformed pair satisfies both flow equations to O(h^2 + dt^2).
        let energy = EnergyFunctional::fisher(-0.125);
        let dt = 1e-3;
        let mut worst_cont: f64 = 0.0;
        let mut worst_hj: f64 = 0.0;
        for &t in &[0.1, 0.2] {
            let mut times = Vec::new();
            let mut states = Vec::new();
            let mut diags = Vec::new();
            for (j, tt) in [t - dt, t, t + dt].iter().enumerate() {
                let pair = quantum::heat_pair_evolve(&boundary, t0, t1, *tt).unwrap();
                let (state, _) = quantum::hopf_cole(&pair).unwrap();
                times.push(*tt);
                diags.push(dynamics::StepDiagnostics {
                    t: *tt,
                    hamiltonian: 0.0,
                    kinetic: 0.0,
                    potential: 0.0,
                    mass: 1.0,
                    min_rho: state.rho().min(),
                    solver_iters: j,
                });
                states.push(state);
            }
            let traj = dynamics::Trajectory::from_parts(times, states, diags).unwrap();
            let (c, hj) = scenarios::flow_equation_residuals(&traj, &energy, 1).unwrap();
            worst_cont = worst_cont.max(c);
            worst_hj = worst_hj.max(hj);
        }
        out.push(outcome(
            "quantum: transformed heat pair solves the flow equations",
            worst_cont <= 5e-3 && worst_hj <= 5e-3,
            format!("continuity {worst_cont:.3e}, Hamilton-Jacobi {worst_hj:.3e}"),
        ));
    }

    // --- scenarios ------------------------------------------------------------
    {
        let mut all_ok = true;
        let mut detail = String::new();
        for kind in ScenarioKind::ALL {
            let violations = scenarios::validate(&scenarios::preset(kind));
            if !violations.is_empty() {
                all_ok = false;
                detail = format!("{}: {}", kind.name(), violations[0]);
                break;
            }
        }
        if all_ok {
            detail = "all five presets validate".to_string();
        }
        out.push(outcome("scenarios: presets validate", all_ok, detail));
    }
    {
        let mut config = scenarios::preset(ScenarioKind::Geodesic);
        config.time.t_final = 0.02;
        let a = scenarios::run(&config).unwrap();
        let b = scenarios::run(&config).unwrap();
        let strip = |r: &scenarios::RunReport| {
            let mut v = serde_json::to_value(r).unwrap();
            v.as_object_mut().unwrap().remove("wall_clock_seconds");
            serde_json::to_string(&v).unwrap()
        };
        let same = strip(&a) == strip(&b);
        out.push(outcome(
            "scenarios: reruns are byte-identical",
            same,
            if same {
                "summaries agree".to_string()
            } else {
                "summaries differ".to_string()
            },
        ));
    }

    out
}

/// One line per check: `PASS <name> (<detail>)`. Deterministic.
pub fn render(outcomes: &[CheckOutcome]) -> String {
    let mut text = String::new();
    for o in outcomes {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        text.push_str(&format!("{tag} {} ({})\n", o.name, o.detail));
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    text.push_str(&format!(
        "{} checks, {} failed\n",
        outcomes.len(),
        failed
    ));
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_fit_recovers_exact_power_law() {
        let xs = [1e-3, 1e-4, 1e-5];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        assert!((log_log_slope(&xs, &ys) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn render_is_deterministic() {
        let a = render(&run_all());
        let b = render(&run_all());
        assert_eq!(a, b);
    }
}
