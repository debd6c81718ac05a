//! Named, config-driven experiments: each scenario binds an energy, initial
//! data, an integrator, and a cross-validation oracle, then runs the flow
//! and writes diagnostics (CSV), snapshots (CSV) and a summary (JSON).
//! Runs are deterministic given the configured seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, DualState, Integrator, StepDiagnostics, Trajectory};
use crate::error::{Error, Result, Violation};
use crate::functionals::{EnergyFunctional, EnergyTerm, InteractionKernel};
use crate::grid::{Grid, ScalarField};
use crate::operators;
use crate::particles::{self, SamplingMode};
use crate::presets;
use crate::quantum::{self, HeatPair};

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

/// Coefficient demanded of the Fisher term in the Schrodinger scenario
/// (and, negated, in the bridge scenario).
pub const FISHER_COEFFICIENT: f64 = 0.125;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Unforced flow (F = 0): geodesic motion of the density.
    Geodesic,
    /// Linear potential energy, cross-checked against free characteristics
    /// in the potential.
    LinearVlasov,
    /// Pairwise interaction energy, cross-checked against the mean-field
    /// particle system.
    NonlinearVlasov,
    /// Linear potential plus (1/8) Fisher information, cross-checked
    /// against the split-step wave solver.
    Schrodinger,
    /// Minus (1/8) Fisher information; the flow is realized by the
    /// forward/backward heat pair through the log-ratio transform and
    /// verified by its residuals.
    Bridge,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::Geodesic,
        ScenarioKind::LinearVlasov,
        ScenarioKind::NonlinearVlasov,
        ScenarioKind::Schrodinger,
        ScenarioKind::Bridge,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Geodesic => "geodesic",
            ScenarioKind::LinearVlasov => "linear-vlasov",
            ScenarioKind::NonlinearVlasov => "nonlinear-vlasov",
            ScenarioKind::Schrodinger => "schrodinger",
            ScenarioKind::Bridge => "bridge",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.name() == name)
    }
}

/// Analytic or file-backed scalar field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Zero,
    Constant { value: f64 },
    Cosine { base: f64, amplitude: f64, mode: [i64; 2] },
    Csv { path: String },
}

impl FieldSpec {
    pub fn build(&self, grid: Grid) -> Result<ScalarField> {
        Ok(match self {
            FieldSpec::Zero => ScalarField::zeros(grid),
            FieldSpec::Constant { value } => ScalarField::constant(grid, *value),
            FieldSpec::Cosine {
                base,
                amplitude,
                mode,
            } => presets::cosine(grid, *base, *amplitude, *mode),
            FieldSpec::Csv { path } => {
                let field = ScalarField::read_csv(Path::new(path))?;
                if field.grid() != grid {
                    return Err(Error::Format {
                        what: "field CSV",
                        detail: format!(
                            "{} has grid d={} n={}, expected d={} n={}",
                            path,
                            field.grid().dim(),
                            field.grid().n(),
                            grid.dim(),
                            grid.n()
                        ),
                    });
                }
                field
            }
        })
    }
}

/// Even radial kernel for the interaction energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Constant { value: f64 },
    GaussianBump { amplitude: f64, width: f64 },
    Csv { path: String },
}

impl KernelSpec {
    pub fn build(&self, grid: Grid) -> Result<InteractionKernel> {
        Ok(match self {
            KernelSpec::Constant { value } => {
                let v = *value;
                InteractionKernel::from_radial(grid, move |_| v)
            }
            KernelSpec::GaussianBump { amplitude, width } => {
                let (a, w) = (*amplitude, *width);
                InteractionKernel::from_radial(grid, move |r| a * (-0.5 * (r / w).powi(2)).exp())
            }
            KernelSpec::Csv { path } => {
                let table = ScalarField::read_csv(Path::new(path))?;
                InteractionKernel::from_table(table)?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnergyTermConfig {
    LinearPotential { coefficient: f64, potential: FieldSpec },
    Interaction { coefficient: f64, kernel: KernelSpec },
    FisherInformation { coefficient: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_final: f64,
    pub snapshot_stride: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorMethod {
    Rk4,
    Midpoint,
}

fn default_newton_tol() -> f64 {
    1e-13
}

fn default_max_iters() -> usize {
    100
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub method: IntegratorMethod,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

impl IntegratorConfig {
    fn build(&self) -> Integrator {
        match self.method {
            IntegratorMethod::Rk4 => Integrator::Rk4,
            IntegratorMethod::Midpoint => Integrator::Midpoint {
                newton_tol: self.newton_tol,
                max_iters: self.max_iters,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub density: FieldSpec,
    pub phi: FieldSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleConfig {
    None,
    Particles {
        n_particles: usize,
        seed: u64,
        #[serde(default)]
        sampling: SamplingMode,
    },
    Schrodinger,
    Bridge {
        eta_initial: FieldSpec,
        eta_star_final: FieldSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: ScenarioKind,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub energy: Vec<EnergyTermConfig>,
    pub initial: InitialConfig,
    pub integrator: IntegratorConfig,
    pub oracle: OracleConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    /// Number of uniform steps; `t_final` must be an integer multiple of
    /// `dt` (validated).
    pub fn steps(&self) -> usize {
        (self.time.t_final / self.time.dt).round() as usize
    }

    fn build_grid(&self) -> Result<Grid> {
        Grid::new(self.grid.dim, self.grid.n)
    }

    pub fn build_energy(&self, grid: Grid) -> Result<EnergyFunctional> {
        let mut energy = EnergyFunctional::zero();
        for term in &self.energy {
            energy = match term {
                EnergyTermConfig::LinearPotential {
                    coefficient,
                    potential,
                } => energy.with_term(
                    *coefficient,
                    EnergyTerm::LinearPotential(potential.build(grid)?),
                ),
                EnergyTermConfig::Interaction {
                    coefficient,
                    kernel,
                } => energy.with_term(*coefficient, EnergyTerm::Interaction(kernel.build(grid)?)),
                EnergyTermConfig::FisherInformation { coefficient } => {
                    energy.with_term(*coefficient, EnergyTerm::FisherInformation)
                }
            };
        }
        Ok(energy)
    }

    pub fn build_initial_state(&self, grid: Grid) -> Result<DualState> {
        let density = presets::normalize_density(&self.initial.density.build(grid)?);
        let phi = self.initial.phi.build(grid)?;
        DualState::new(density, phi)
    }
}

/// Check every rule; empty iff the config is runnable.
pub fn validate(config: &ScenarioConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut violate = |field: &str, rule: String| {
        out.push(Violation {
            field: field.to_string(),
            rule,
        })
    };

    if !(1..=2).contains(&config.grid.dim) {
        violate("grid.dim", "dimension must be 1 or 2".into());
    }
    if config.grid.n < Grid::MIN_CELLS_PER_AXIS {
        violate(
            "grid.n",
            format!("minimum grid size is {} cells per axis", Grid::MIN_CELLS_PER_AXIS),
        );
    }
    // Comparisons are phrased positively so that NaN fails validation.
    let dt_ok = config.time.dt > 0.0;
    if !dt_ok {
        violate("time.dt", "time step must be positive".into());
    }
    let t_final_ok = config.time.t_final > 0.0;
    if !t_final_ok {
        violate("time.t_final", "final time must be positive".into());
    }
    if config.time.snapshot_stride == 0 {
        violate("time.snapshot_stride", "snapshot stride must be >= 1".into());
    }
    if dt_ok && t_final_ok {
        let steps = config.time.t_final / config.time.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) || steps.round() < 1.0 {
            violate(
                "time.t_final",
                "final time must be a whole number of time steps".into(),
            );
        }
    }
    let newton_tol_ok = config.integrator.newton_tol > 0.0;
    if !newton_tol_ok {
        violate("integrator.newton_tol", "tolerance must be positive".into());
    }
    if config.integrator.max_iters == 0 {
        violate("integrator.max_iters", "need at least one iteration".into());
    }

    // Scenario/energy/oracle consistency.
    let fisher_coefficients: Vec<f64> = config
        .energy
        .iter()
        .filter_map(|t| match t {
            EnergyTermConfig::FisherInformation { coefficient } => Some(*coefficient),
            _ => None,
        })
        .collect();
    match config.name {
        ScenarioKind::Geodesic => {
            if !config.energy.is_empty() {
                violate("energy", "the geodesic scenario runs with no energy terms".into());
            }
            if !matches!(config.oracle, OracleConfig::None) {
                violate("oracle.kind", "the geodesic scenario uses no oracle".into());
            }
        }
        ScenarioKind::LinearVlasov => {
            let ok = config.energy.len() == 1
                && matches!(config.energy[0], EnergyTermConfig::LinearPotential { .. });
            if !ok {
                violate(
                    "energy",
                    "linear-vlasov requires exactly one linear_potential term".into(),
                );
            }
            if !matches!(config.oracle, OracleConfig::Particles { .. }) {
                violate("oracle.kind", "linear-vlasov requires the particles oracle".into());
            }
        }
        ScenarioKind::NonlinearVlasov => {
            let ok = config.energy.len() == 1
                && matches!(config.energy[0], EnergyTermConfig::Interaction { .. });
            if !ok {
                violate(
                    "energy",
                    "nonlinear-vlasov requires exactly one interaction term".into(),
                );
            }
            if !matches!(config.oracle, OracleConfig::Particles { .. }) {
                violate(
                    "oracle.kind",
                    "nonlinear-vlasov requires the particles oracle".into(),
                );
            }
        }
        ScenarioKind::Schrodinger => {
            if fisher_coefficients.len() != 1
                || (fisher_coefficients[0] - FISHER_COEFFICIENT).abs() > 1e-12
            {
                violate(
                    "energy",
                    format!(
                        "schrodinger requires one fisher_information term with coefficient {FISHER_COEFFICIENT}"
                    ),
                );
            }
            if config
                .energy
                .iter()
                .any(|t| matches!(t, EnergyTermConfig::Interaction { .. }))
            {
                violate("energy", "schrodinger allows no interaction term".into());
            }
            if !matches!(config.oracle, OracleConfig::Schrodinger) {
                violate("oracle.kind", "schrodinger requires the schrodinger oracle".into());
            }
        }
        ScenarioKind::Bridge => {
            let ok = config.energy.len() == 1
                && fisher_coefficients.len() == 1
                && (fisher_coefficients[0] + FISHER_COEFFICIENT).abs() <= 1e-12;
            if !ok {
                violate(
                    "energy",
                    format!(
                        "bridge requires exactly one fisher_information term with coefficient -{FISHER_COEFFICIENT}"
                    ),
                );
            }
            if !matches!(config.oracle, OracleConfig::Bridge { .. }) {
                violate("oracle.kind", "bridge requires the bridge oracle".into());
            }
        }
    }

    if let OracleConfig::Particles {
        n_particles,
        sampling,
        ..
    } = &config.oracle
    {
        if *n_particles == 0 {
            violate("oracle.n_particles", "need at least one particle".into());
        }
        if *sampling == SamplingMode::Stratified && config.grid.dim != 1 {
            violate(
                "oracle.sampling",
                "stratified sampling is defined for 1D grids only".into(),
            );
        }
    }

    // Buildability and the initial stability guard (bridge draws its state
    // from the transformed pair instead of `initial`).
    if let Ok(grid) = config.build_grid() {
        if let Err(e) = config.build_energy(grid) {
            violate("energy", e.to_string());
        }
        match config.name {
            ScenarioKind::Bridge => {
                if let OracleConfig::Bridge {
                    eta_initial,
                    eta_star_final,
                } = &config.oracle
                {
                    let built = eta_initial
                        .build(grid)
                        .and_then(|e| Ok((e, eta_star_final.build(grid)?)))
                        .and_then(|(e, s)| HeatPair::new(e, s));
                    if let Err(e) = built {
                        violate("oracle", e.to_string());
                    }
                }
            }
            _ => match config.build_initial_state(grid) {
                Err(e) => violate("initial", e.to_string()),
                Ok(state) => {
                    if config.time.dt > 0.0 {
                        let guard = config.time.dt * state.phi().gradient().max_abs()
                            / grid.spacing();
                        if guard > dynamics::CFL_LIMIT {
                            violate(
                                "time.dt",
                                format!(
                                    "initial velocity violates the stability guard: dt*max|grad phi|/h = {guard:.3} > {}",
                                    dynamics::CFL_LIMIT
                                ),
                            );
                        }
                    }
                }
            },
        }
    }

    out
}

/// Summary of one run; serialized as the summary JSON. All float-valued
/// diagnostics are deterministic given the configured seed; only
/// `wall_clock_seconds` varies between identical runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub scenario: ScenarioKind,
    pub grid: GridConfig,
    pub dt: f64,
    pub t_final: f64,
    pub steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub hamiltonian_initial: f64,
    pub hamiltonian_final: f64,
    /// max_t |H(t) - H(0)| / max(|H(0)|, tiny).
    pub hamiltonian_drift_rel: f64,
    /// max_t |mass(t) - 1|.
    pub mass_error_max: f64,
    pub min_rho: f64,
    /// Max-norm residual of the second-order (primal) form at the middle
    /// stored state.
    pub primal_residual_mid: f64,
    /// L1 distance between the oracle density and the flow density at the
    /// final time, when an oracle runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_l1: Option<f64>,
    /// Scenario-specific diagnostics (momentum drift, bridge residuals,
    /// geodesic integrand deviation, ...), keyed in sorted order.
    pub extras: BTreeMap<String, f64>,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

fn diagnostics_csv(rows: &[StepDiagnostics]) -> String {
    let mut out = String::from("t,hamiltonian,kinetic,potential,mass,min_rho,cg_iters\n");
    for d in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            d.t, d.hamiltonian, d.kinetic, d.potential, d.mass, d.min_rho, d.solver_iters
        );
    }
    out
}

struct OutputWriter {
    dir: Option<PathBuf>,
}

impl OutputWriter {
    fn new(dir: Option<&PathBuf>) -> Result<Self> {
        if let Some(d) = dir {
            std::fs::create_dir_all(d)?;
        }
        Ok(Self {
            dir: dir.cloned(),
        })
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        if let Some(dir) = &self.dir {
            std::fs::write(dir.join(name), contents)?;
        }
        Ok(())
    }
}

/// Execute one scenario; errors before any file is written when the config
/// does not validate.
pub fn run(config: &ScenarioConfig) -> Result<RunReport> {
    let violations = validate(config);
    if !violations.is_empty() {
        return Err(Error::InvalidConfig(violations));
    }
    let started = Instant::now();
    let grid = config.build_grid()?;
    let energy = config.build_energy(grid)?;
    let steps = config.steps();
    let dt = config.time.dt;
    let writer = OutputWriter::new(config.output_dir.as_ref())?;

    let mut extras = BTreeMap::new();
    let mut oracle_l1 = None;
    let mut seed_used = None;

    let trajectory = match config.name {
        ScenarioKind::Bridge => {
            let OracleConfig::Bridge {
                eta_initial,
                eta_star_final,
            } = &config.oracle
            else {
                unreachable!("validated above");
            };
            let boundary = HeatPair::new(eta_initial.build(grid)?, eta_star_final.build(grid)?)?;
            let traj =
                bridge_trajectory(&boundary, config.time.t_final, steps, &energy, &mut extras)?;
            let final_pair =
                quantum::heat_pair_evolve(&boundary, 0.0, config.time.t_final, config.time.t_final)?;
            writer.write("eta_final.csv", &final_pair.eta().to_csv())?;
            writer.write("eta_star_final.csv", &final_pair.eta_star().to_csv())?;
            traj
        }
        _ => {
            let initial = config.build_initial_state(grid)?;
            let traj = dynamics::integrate(
                initial,
                &energy,
                dt,
                steps,
                config.integrator.build(),
                1,
            )?;
            match &config.oracle {
                OracleConfig::None => {}
                OracleConfig::Schrodinger => {
                    let l1 = run_schrodinger_oracle(config, &traj, &writer)?;
                    oracle_l1 = Some(l1);
                }
                OracleConfig::Particles {
                    n_particles,
                    seed,
                    sampling,
                } => {
                    seed_used = Some(*seed);
                    let (l1, momentum_drift) = run_particle_oracle(
                        config,
                        &energy,
                        &traj,
                        *n_particles,
                        *seed,
                        *sampling,
                        &writer,
                    )?;
                    oracle_l1 = Some(l1);
                    extras.insert("momentum_drift".to_string(), momentum_drift);
                }
                OracleConfig::Bridge { .. } => unreachable!("validated above"),
            }
            traj
        }
    };

    if config.name == ScenarioKind::Geodesic {
        let ge = dynamics::geodesic_energy(&trajectory, operators::DEFAULT_TOL)?;
        extras.insert("geodesic_energy".to_string(), ge.energy);
        extras.insert(
            "kinetic_integrand_deviation".to_string(),
            ge.max_relative_deviation,
        );
    }

    // Shared diagnostics.
    let diag = trajectory.diagnostics();
    let h0 = diag[0].hamiltonian;
    let h_final = diag[diag.len() - 1].hamiltonian;
    let drift = diag
        .iter()
        .map(|d| (d.hamiltonian - h0).abs())
        .fold(0.0f64, f64::max)
        / h0.abs().max(1e-300);
    let mass_error = diag
        .iter()
        .map(|d| (d.mass - 1.0).abs())
        .fold(0.0f64, f64::max);
    let min_rho = diag.iter().map(|d| d.min_rho).fold(f64::INFINITY, f64::min);
    let mid = trajectory.len() / 2;
    let primal_residual_mid =
        dynamics::primal_residual(&trajectory, &energy, mid.clamp(1, trajectory.len() - 2))?;

    // Outputs.
    writer.write("diagnostics.csv", &diagnostics_csv(diag))?;
    let stride = config.time.snapshot_stride;
    for (i, state) in trajectory.states().iter().enumerate() {
        if i % stride == 0 || i + 1 == trajectory.len() {
            writer.write(&format!("rho_{i:06}.csv"), &state.rho().to_csv())?;
            writer.write(&format!("phi_{i:06}.csv"), &state.phi().to_csv())?;
        }
    }

    let report = RunReport {
        schema_version: SUMMARY_SCHEMA_VERSION,
        scenario: config.name,
        grid: config.grid,
        dt,
        t_final: config.time.t_final,
        steps,
        seed: seed_used,
        hamiltonian_initial: h0,
        hamiltonian_final: h_final,
        hamiltonian_drift_rel: drift,
        mass_error_max: mass_error,
        min_rho,
        primal_residual_mid,
        oracle_l1,
        extras,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    writer.write("summary.json", &report.to_json())?;
    Ok(report)
}

/// Transform the heat pair into flow coordinates at every step time and
/// record the residuals of both flow equations (centered time differences,
/// interior nodes), the product-integral drift, and the normalization.
fn bridge_trajectory(
    boundary: &HeatPair,
    t_final: f64,
    steps: usize,
    energy: &EnergyFunctional,
    extras: &mut BTreeMap<String, f64>,
) -> Result<Trajectory> {
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut diagnostics = Vec::with_capacity(steps + 1);
    let mut product0 = None;
    let mut product_drift = 0.0f64;
    let mut normalization = 0.0;
    let dt = t_final / steps as f64;

    for k in 0..=steps {
        let t = k as f64 * dt;
        let pair = quantum::heat_pair_evolve(boundary, 0.0, t_final, t)?;
        let product = pair.product_integral();
        let p0 = *product0.get_or_insert(product);
        product_drift = product_drift.max((product - p0).abs());
        let (state, mass) = quantum::hopf_cole(&pair)?;
        normalization = mass;
        let kinetic = dynamics::kinetic_energy(&state)?;
        let potential = energy.evaluate(state.rho())?;
        times.push(t);
        diagnostics.push(StepDiagnostics {
            t,
            hamiltonian: kinetic + potential,
            kinetic,
            potential,
            mass: state.rho().integrate(),
            min_rho: state.rho().min(),
            solver_iters: 0,
        });
        states.push(state);
    }

    let traj = Trajectory::from_parts(times, states, diagnostics)?;

    let mut continuity = 0.0f64;
    let mut hamilton_jacobi = 0.0f64;
    for k in 1..traj.len() - 1 {
        let (c, hj) = flow_equation_residuals(&traj, energy, k)?;
        continuity = continuity.max(c);
        hamilton_jacobi = hamilton_jacobi.max(hj);
    }
    extras.insert("continuity_residual".to_string(), continuity);
    extras.insert("hj_residual".to_string(), hamilton_jacobi);
    extras.insert("product_integral_drift".to_string(), product_drift);
    extras.insert("hopf_cole_normalization".to_string(), normalization);
    Ok(traj)
}

/// Max-norm residuals of the two flow equations at interior index `k` of a
/// trajectory, with time derivatives by centered differences. The
/// Hamilton-Jacobi residual is measured modulo its spatial mean (the
/// constant gauge).
pub fn flow_equation_residuals(
    traj: &Trajectory,
    energy: &EnergyFunctional,
    k: usize,
) -> Result<(f64, f64)> {
    let dt = traj.uniform_dt()?;
    if k == 0 || k + 1 >= traj.len() {
        return Err(Error::IndexOutOfRange {
            index: k,
            len: traj.len(),
        });
    }
    let prev = &traj.states()[k - 1];
    let here = &traj.states()[k];
    let next = &traj.states()[k + 1];

    let drho_dt = next.rho().add_scaled(-1.0, prev.rho()).scale(0.5 / dt);
    let transport = operators::apply_laplacian(here.rho(), here.phi())?;
    let continuity = drho_dt.add_scaled(1.0, transport.field()).max_abs();

    let dphi_dt = next.phi().add_scaled(-1.0, prev.phi()).scale(0.5 / dt);
    let kinetic = here.phi().gradient().magnitude_squared_cells();
    let mut hj = dphi_dt.add_scaled(0.5, &kinetic);
    if !energy.is_zero() {
        hj = hj.add_scaled(1.0, &energy.first_variation(here.rho())?);
    }
    Ok((continuity, hj.zero_mean().max_abs()))
}

fn run_schrodinger_oracle(
    config: &ScenarioConfig,
    traj: &Trajectory,
    writer: &OutputWriter,
) -> Result<f64> {
    let grid = traj.states()[0].rho().grid();
    // The wave solver sees only the external potential; the Fisher term is
    // the transform artifact of the kinetic operator.
    let mut potential = ScalarField::zeros(grid);
    for term in &config.energy {
        if let EnergyTermConfig::LinearPotential {
            coefficient,
            potential: spec,
        } = term
        {
            potential = potential.add_scaled(*coefficient, &spec.build(grid)?);
        }
    }
    let initial = &traj.states()[0];
    let mut psi = quantum::madelung_compose(initial.rho(), initial.phi())?;
    for _ in 0..config.steps() {
        psi = quantum::split_step(&psi, &potential, config.time.dt)?;
    }
    writer.write("psi_final.csv", &psi.to_csv())?;
    Ok(particles::compare_densities(
        &psi.density(),
        traj.last().rho(),
    ))
}

fn run_particle_oracle(
    config: &ScenarioConfig,
    energy: &EnergyFunctional,
    traj: &Trajectory,
    n_particles: usize,
    seed: u64,
    sampling: SamplingMode,
    writer: &OutputWriter,
) -> Result<(f64, f64)> {
    let grid = traj.states()[0].rho().grid();
    let initial = &traj.states()[0];
    let mut ensemble =
        particles::init_from_density(initial.rho(), initial.phi(), n_particles, seed, sampling)?;
    let p_start = ensemble.mean_velocity();

    // Linear potentials yield a fixed force field; interactions couple the
    // force to the evolving empirical density.
    let mut force: Box<particles::ForceFn> =
        if energy.is_linear() {
            let field = energy.first_variation(initial.rho())?.gradient().scale(-1.0);
            Box::new(move |_, _| Ok(field.clone()))
        } else {
            let energy = energy.clone();
            Box::new(move |_, e| particles::mean_field_force(&energy, grid, e))
        };

    let dt = config.time.dt;
    for k in 0..config.steps() {
        ensemble = particles::step_particles(&ensemble, &mut *force, k as f64 * dt, dt)?;
    }
    let p_end = ensemble.mean_velocity();
    let momentum_drift =
        ((p_end[0] - p_start[0]).powi(2) + (p_end[1] - p_start[1]).powi(2)).sqrt();

    writer.write("ensemble_final.csv", &ensemble.to_csv())?;
    let histogram = particles::push_forward(&ensemble, grid);
    writer.write("ensemble_density.csv", &histogram.to_csv())?;
    Ok((
        particles::compare_densities(&histogram, traj.last().rho()),
        momentum_drift,
    ))
}

/// Frozen default configuration for each named scenario.
pub fn preset(kind: ScenarioKind) -> ScenarioConfig {
    let uniform = FieldSpec::Constant { value: 1.0 };
    match kind {
        ScenarioKind::Geodesic => ScenarioConfig {
            name: kind,
            grid: GridConfig { dim: 1, n: 64 },
            time: TimeConfig {
                dt: 1e-3,
                t_final: 1.0,
                snapshot_stride: 200,
            },
            energy: vec![],
            initial: InitialConfig {
                density: FieldSpec::Cosine {
                    base: 1.0,
                    amplitude: 0.1,
                    mode: [1, 0],
                },
                phi: FieldSpec::Cosine {
                    base: 0.0,
                    amplitude: 0.02,
                    mode: [1, 0],
                },
            },
            integrator: IntegratorConfig {
                method: IntegratorMethod::Midpoint,
                newton_tol: 1e-13,
                max_iters: 100,
            },
            oracle: OracleConfig::None,
            output_dir: None,
        },
        ScenarioKind::LinearVlasov => ScenarioConfig {
            name: kind,
            grid: GridConfig { dim: 1, n: 64 },
            time: TimeConfig {
                dt: 1e-3,
                t_final: 0.5,
                snapshot_stride: 100,
            },
            energy: vec![EnergyTermConfig::LinearPotential {
                coefficient: 1.0,
                potential: FieldSpec::Cosine {
                    base: 0.0,
                    amplitude: 0.05,
                    mode: [1, 0],
                },
            }],
            initial: InitialConfig {
                density: FieldSpec::Cosine {
                    base: 1.0,
                    amplitude: 0.5,
                    mode: [1, 0],
                },
                phi: FieldSpec::Zero,
            },
            integrator: IntegratorConfig {
                method: IntegratorMethod::Rk4,
                newton_tol: 1e-13,
                max_iters: 100,
            },
            oracle: OracleConfig::Particles {
                n_particles: 100_000,
                seed: 7,
                sampling: SamplingMode::Iid,
            },
            output_dir: None,
        },
        ScenarioKind::NonlinearVlasov => ScenarioConfig {
            name: kind,
            grid: GridConfig { dim: 1, n: 64 },
            time: TimeConfig {
                dt: 1e-3,
                t_final: 0.3,
                snapshot_stride: 100,
            },
            energy: vec![EnergyTermConfig::Interaction {
                coefficient: 0.5,
                kernel: KernelSpec::GaussianBump {
                    amplitude: 1.0,
                    width: 0.15,
                },
            }],
            initial: InitialConfig {
                density: FieldSpec::Cosine {
                    base: 1.0,
                    amplitude: 0.3,
                    mode: [1, 0],
                },
                phi: FieldSpec::Zero,
            },
            integrator: IntegratorConfig {
                method: IntegratorMethod::Rk4,
                newton_tol: 1e-13,
                max_iters: 100,
            },
            oracle: OracleConfig::Particles {
                n_particles: 100_000,
                seed: 11,
                // Stratified draws suppress the sampling noise that the
                // mean-field force would otherwise amplify, so the
                // comparison measures solver agreement rather than
                // Monte-Carlo error.
                sampling: SamplingMode::Stratified,
            },
            output_dir: None,
        },
        ScenarioKind::Schrodinger => ScenarioConfig {
            name: kind,
            grid: GridConfig { dim: 1, n: 64 },
            time: TimeConfig {
                dt: 1e-4,
                t_final: 0.2,
                snapshot_stride: 500,
            },
            energy: vec![
                EnergyTermConfig::LinearPotential {
                    coefficient: 1.0,
                    potential: FieldSpec::Cosine {
                        base: 0.0,
                        amplitude: 0.1,
                        mode: [1, 0],
                    },
                },
                EnergyTermConfig::FisherInformation {
                    coefficient: FISHER_COEFFICIENT,
                },
            ],
            initial: InitialConfig {
                density: FieldSpec::Cosine {
                    base: 1.0,
                    amplitude: 0.5,
                    mode: [1, 0],
                },
                phi: FieldSpec::Zero,
            },
            integrator: IntegratorConfig {
                method: IntegratorMethod::Rk4,
                newton_tol: 1e-13,
                max_iters: 100,
            },
            oracle: OracleConfig::Schrodinger,
            output_dir: None,
        },
        ScenarioKind::Bridge => ScenarioConfig {
            name: kind,
            grid: GridConfig { dim: 1, n: 64 },
            time: TimeConfig {
                dt: 1e-3,
                t_final: 0.3,
                snapshot_stride: 100,
            },
            energy: vec![EnergyTermConfig::FisherInformation {
                coefficient: -FISHER_COEFFICIENT,
            }],
            initial: InitialConfig {
                density: uniform,
                phi: FieldSpec::Zero,
            },
            integrator: IntegratorConfig {
                method: IntegratorMethod::Midpoint,
                newton_tol: 1e-13,
                max_iters: 100,
            },
            oracle: OracleConfig::Bridge {
                eta_initial: FieldSpec::Cosine {
                    base: 1.0,
                    amplitude: 0.5,
                    mode: [1, 0],
                },
                eta_star_final: FieldSpec::Cosine {
                    base: 1.0,
                    amplitude: -0.3,
                    mode: [1, 0],
                },
            },
            output_dir: None,
        },
    }
}

/// Apply a `dotted.key=value` override onto a JSON-encoded config. The
/// value is parsed as JSON when possible and as a bare string otherwise.
pub fn apply_override(config: &mut serde_json::Value, key: &str, raw_value: &str) -> Result<()> {
    let mut cursor = &mut *config;
    let segments: Vec<&str> = key.split('.').collect();
    for (i, segment) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        let next = match cursor {
            serde_json::Value::Object(map) => {
                if last {
                    let parsed = serde_json::from_str(raw_value)
                        .unwrap_or_else(|_| serde_json::Value::String(raw_value.to_string()));
                    map.insert(segment.to_string(), parsed);
                    return Ok(());
                }
                map.get_mut(*segment)
            }
            serde_json::Value::Array(items) => {
                let index: usize = segment.parse().map_err(|_| Error::Format {
                    what: "config override",
                    detail: format!("`{key}`: `{segment}` is not an array index"),
                })?;
                if last {
                    let parsed = serde_json::from_str(raw_value)
                        .unwrap_or_else(|_| serde_json::Value::String(raw_value.to_string()));
                    *items.get_mut(index).ok_or(Error::Format {
                        what: "config override",
                        detail: format!("`{key}`: index {index} out of bounds"),
                    })? = parsed;
                    return Ok(());
                }
                items.get_mut(index)
            }
            _ => None,
        };
        cursor = next.ok_or(Error::Format {
            what: "config override",
            detail: format!("`{key}`: no such config field `{segment}`"),
        })?;
    }
    unreachable!("loop returns on the last segment")
}
