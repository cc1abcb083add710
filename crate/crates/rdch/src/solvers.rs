//! Time integration: seeded initial data, the initial chemical-potential
//! solve, the nonlinear Picard scheme, the linearized semi-implicit scheme
//! and CFL-driven adaptive time stepping.
//!
//! Both schemes decouple the two equations of the system per step. The
//! nonlinear scheme iterates
//!
//! ```text
//!   (sigma Q + M_l) phi** = gamma Q n* + M_l psi_-'(n^k - (s/g) phi^k)
//!   xi* = phi** + P(psi_+'(n*))
//!   M_l n** = M_l n^k - dt U(n^k, xi*) xi*
//! ```
//!
//! until `||n** - n*|| + ||phi** - phi*||` drops below the Picard
//! tolerance, adapting `dt` so the positivity condition
//! `dt (d+1) G_h / kappa_h^2 * max_edges(xi_j - xi_i) <= safety < 1`
//! holds; a `dt` shrink restarts the whole time step. The
//! chemical-potential solve carries the current density iterate `n*`
//! (fully implicit at the fixed point), which is the form whose discrete
//! energy telescopes: the per-step inequality
//! `E^{k+1} + dt xi^T U xi <= E^k` then holds to solver tolerance.
//!
//! The linear scheme solves one SPD system per field, with the
//! convex-part transport frozen at `n^k` through the weighted
//! stiffness `L`.

use rand_core::{RngCore, SeedableRng};

use crate::diagnostics::{
    discrete_energy, dissipation, entropy_integral, DiagnosticsError, DiagnosticsRecord,
};
use crate::fem::{FemError, FemSpace};
use crate::mesh::{compute_quality, MeshQuality};
use crate::physics::ModelParams;
use crate::sparse::{cg_solve, LinAlgError, SparseMatrix};

/// Time discretization selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    /// Picard-iterated semi-implicit scheme (energy-dissipative).
    Nonlinear,
    /// Linearized semi-implicit scheme (one SPD solve per field).
    Linear,
}

/// How the convex-part derivative enters the flux potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionMode {
    /// Nodal interpolation of `psi_+'(n)` (default).
    Interpolation,
    /// Lumped H1 projection of the nodal values.
    LumpedH1,
}

/// Runtime options of the time integrator.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub scheme: SchemeKind,
    pub dt_initial: f64,
    pub dt_max: f64,
    pub t_end: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Picard under-relaxation factor in (0, 1]; 1 is the plain iteration.
    pub under_relaxation: f64,
    pub cfl_safety: f64,
    pub projection_mode: ProjectionMode,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
    pub rng_seed: u64,
    pub initial_mean: f64,
    pub perturbation_amplitude: f64,
}

impl SolverConfig {
    /// Plain defaults; callers override what they need.
    pub fn defaults() -> Self {
        Self {
            scheme: SchemeKind::Linear,
            dt_initial: 1e-5,
            dt_max: 1e-5,
            t_end: 1.0,
            picard_tol: 1e-8,
            picard_max_iter: 100,
            under_relaxation: 1.0,
            cfl_safety: 0.9,
            projection_mode: ProjectionMode::Interpolation,
            linear_tol: 1e-12,
            linear_max_iter: 20_000,
            rng_seed: 0,
            initial_mean: 0.3,
            perturbation_amplitude: 0.05,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::InvalidConfig(msg));
        if !(self.dt_initial > 0.0) {
            return bad(format!("dt_initial must be > 0, got {}", self.dt_initial));
        }
        if !(self.dt_max >= self.dt_initial) {
            return bad(format!(
                "dt_max must be >= dt_initial, got {} < {}",
                self.dt_max, self.dt_initial
            ));
        }
        if !(self.t_end >= 0.0) {
            return bad(format!("t_end must be >= 0, got {}", self.t_end));
        }
        if !(self.picard_tol > 0.0 && self.linear_tol > 0.0) {
            return bad("tolerances must be > 0".into());
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety < 1.0) {
            return bad(format!(
                "cfl_safety must be in (0, 1), got {}",
                self.cfl_safety
            ));
        }
        if !(self.under_relaxation > 0.0 && self.under_relaxation <= 1.0) {
            return bad(format!(
                "under_relaxation must be in (0, 1], got {}",
                self.under_relaxation
            ));
        }
        if !(self.initial_mean > 0.0 && self.initial_mean < 1.0) {
            return bad(format!(
                "initial_mean must be in (0, 1), got {}",
                self.initial_mean
            ));
        }
        Ok(())
    }

    /// Smallest admissible time step before a CFL abort.
    pub fn dt_floor(&self) -> f64 {
        self.dt_initial * (0.5f64).powi(20)
    }
}

/// Discrete state of one run.
#[derive(Debug, Clone)]
pub struct State {
    pub n: Vec<f64>,
    pub phi: Vec<f64>,
    pub t: f64,
    pub step: usize,
    pub dt_current: f64,
}

/// Per-step bookkeeping surfaced to diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct StepReport {
    pub picard_iters: usize,
    pub cfl_ratio: f64,
    pub dt_used: f64,
}

/// Time-integration failures.
#[derive(Debug)]
pub enum SolverError {
    LinAlg(LinAlgError),
    Fem(FemError),
    Diagnostics(DiagnosticsError),
    /// Halving reached the floor without satisfying the CFL condition.
    CflFloor {
        rate: f64,
        dt_floor: f64,
        step: usize,
    },
    PicardNonConvergence {
        residual: f64,
        iterations: usize,
        step: usize,
    },
    /// A nodal value left the admissible interval after an accepted step;
    /// indicates a broken precondition upstream, never expected.
    BoundsViolation {
        node: usize,
        value: f64,
        step: usize,
    },
    MassDrift {
        drift: f64,
        step: usize,
    },
    /// Unregularized potential evaluated too close to the singularity.
    PotentialSingular {
        node: usize,
        value: f64,
    },
    /// The initial chemical-potential solve failed its residual check.
    Phi0Residual {
        residual: f64,
    },
    InvalidConfig(String),
    Io(std::io::Error),
}

impl std::fmt::Display for SolverError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverError::LinAlg(e) => write!(f, "linear algebra: {e}"),
            SolverError::Fem(e) => write!(f, "finite element: {e}"),
            SolverError::Diagnostics(e) => write!(f, "diagnostics: {e}"),
            SolverError::CflFloor {
                rate,
                dt_floor,
                step,
            } => write!(
                f,
                "step {step}: CFL condition unsatisfiable above dt floor {dt_floor:e} (rate {rate:e})"
            ),
            SolverError::PicardNonConvergence {
                residual,
                iterations,
                step,
            } => write!(
                f,
                "step {step}: Picard iteration did not converge in {iterations} iterations, last residual {residual:e}"
            ),
            SolverError::BoundsViolation { node, value, step } => write!(
                f,
                "step {step}: nodal density {value} at node {node} violates bounds (internal error)"
            ),
            SolverError::MassDrift { drift, step } => {
                write!(f, "step {step}: relative mass drift {drift:e} exceeds 1e-10")
            }
            SolverError::PotentialSingular { node, value } => write!(
                f,
                "unregularized potential evaluated at n = {value} (node {node}) too close to 1"
            ),
            SolverError::Phi0Residual { residual } => {
                write!(f, "phi0 solve residual {residual:e} exceeds 1e-10")
            }
            SolverError::InvalidConfig(msg) => write!(f, "invalid solver config: {msg}"),
            SolverError::Io(e) => write!(f, "output sink: {e}"),
        }
    }
}

impl std::error::Error for SolverError {}

impl From<LinAlgError> for SolverError {
    fn from(e: LinAlgError) -> Self {
        SolverError::LinAlg(e)
    }
}

impl From<FemError> for SolverError {
    fn from(e: FemError) -> Self {
        SolverError::Fem(e)
    }
}

impl From<DiagnosticsError> for SolverError {
    fn from(e: DiagnosticsError) -> Self {
        SolverError::Diagnostics(e)
    }
}

impl From<std::io::Error> for SolverError {
    fn from(e: std::io::Error) -> Self {
        SolverError::Io(e)
    }
}

/// Seeded initial density: `n_i = mean + a (u_i - 1/2)` with `u_i` drawn
/// from ChaCha8 (via the standard SplitMix64 seeding of `seed_from_u64`),
/// clamped to `[0, 1 - 1e-6]`. Identical seeds give identical vectors.
pub fn make_initial_density(
    space: &FemSpace,
    config: &SolverConfig,
) -> Result<Vec<f64>, SolverError> {
    let mean = config.initial_mean;
    let amp = config.perturbation_amplitude;
    if !(mean > 0.0 && mean < 1.0) {
        return Err(SolverError::InvalidConfig(format!(
            "initial_mean must be in (0, 1), got {mean}"
        )));
    }
    if amp < 0.0 || mean - 0.5 * amp < 0.0 || mean + 0.5 * amp > 1.0 {
        return Err(SolverError::InvalidConfig(format!(
            "perturbation amplitude {amp} pushes the density range [{}, {}] outside (0, 1)",
            mean - 0.5 * amp,
            mean + 0.5 * amp
        )));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.rng_seed);
    let n = (0..space.n_dofs())
        .map(|_| {
            let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            (mean + amp * (u - 0.5)).clamp(0.0, 1.0 - 1e-6)
        })
        .collect();
    Ok(n)
}

/// `sigma Q + c M_l` as one sparse matrix.
fn shifted_stiffness(space: &FemSpace, sigma: f64, mass_coeff: f64) -> SparseMatrix {
    let scaled_mass: Vec<f64> = space.lumped_mass().iter().map(|m| mass_coeff * m).collect();
    SparseMatrix::from_diagonal(&scaled_mass)
        .add_scaled(space.stiffness(), sigma)
        .expect("conforming shapes")
}

/// Nodal evaluation of `psi_+'` with the unregularized singularity guard.
fn dpsi_plus_nodal(params: &ModelParams, n: &[f64]) -> Result<Vec<f64>, SolverError> {
    if !params.is_regularized() {
        for (i, &v) in n.iter().enumerate() {
            if v > 1.0 - 1e-12 {
                return Err(SolverError::PotentialSingular { node: i, value: v });
            }
        }
    }
    Ok(n.iter().map(|&v| params.dpsi_plus(v)).collect())
}

fn project(space: &FemSpace, mode: ProjectionMode, v: Vec<f64>) -> Result<Vec<f64>, SolverError> {
    match mode {
        ProjectionMode::Interpolation => Ok(v),
        ProjectionMode::LumpedH1 => Ok(space.lumped_h1_project(&v)?),
    }
}

/// Initial chemical potential: the fixed-point equation
///
/// ```text
///   sigma (grad phi0, grad chi) + (phi0, chi)^h
///     = gamma (grad n0, grad chi) + (psi_-'(n0 - (s/g) phi0), chi)^h
/// ```
///
/// is linear in `phi0` because `psi_-'` is linear, and reduces to one SPD
/// solve with `[sigma Q + (1 - (1-n*) sigma/gamma) M_l]`. The residual of
/// the original equation is verified to 1e-10 after the solve.
pub fn solve_phi0(
    space: &FemSpace,
    params: &ModelParams,
    n0: &[f64],
    lin_tol: f64,
    lin_max_iter: usize,
) -> Result<Vec<f64>, SolverError> {
    let p = 1.0 - params.n_star;
    let mass_coeff = 1.0 - p * params.sigma / params.gamma;
    let a = shifted_stiffness(space, params.sigma, mass_coeff);
    let qn = space.stiffness().matvec(n0);
    let ml = space.lumped_mass();
    let rhs: Vec<f64> = (0..space.n_dofs())
        .map(|i| params.gamma * qn[i] - p * ml[i] * (n0[i] + 1.0))
        .collect();
    let phi0 = cg_solve(&a, &rhs, lin_tol, lin_max_iter)?;

    // residual of the original (unreduced) equation
    let qphi = space.stiffness().matvec(&phi0);
    let mut res_sq = 0.0;
    let mut rhs_sq = 0.0;
    for i in 0..space.n_dofs() {
        let upsilon = n0[i] - params.sigma / params.gamma * phi0[i];
        let b = params.gamma * qn[i] + ml[i] * params.dpsi_minus_ext(upsilon);
        let r = params.sigma * qphi[i] + ml[i] * phi0[i] - b;
        res_sq += r * r;
        rhs_sq += b * b;
    }
    let residual = res_sq.sqrt();
    if residual > 1e-10 * rhs_sq.sqrt().max(1.0) {
        return Err(SolverError::Phi0Residual { residual });
    }
    Ok(phi0)
}

/// Adapt `dt` to the positivity condition
/// `dt * (d+1) G_h / kappa_h^2 * max_edges |xi_j - xi_i| <= safety`.
///
/// `dt` is halved until the condition holds; reaching `dt_floor` is an
/// error. Returns the adapted `dt` and the achieved ratio.
pub fn enforce_cfl(
    quality: &MeshQuality,
    dt: f64,
    xi_nodal: &[f64],
    edges: &[[usize; 2]],
    dimension: usize,
    safety: f64,
    dt_floor: f64,
) -> Result<(f64, f64), SolverError> {
    let mut jump = 0.0f64;
    for &[i, j] in edges {
        jump = jump.max((xi_nodal[i] - xi_nodal[j]).abs());
    }
    let rate =
        (dimension as f64 + 1.0) * quality.g_h as f64 / (quality.kappa_h * quality.kappa_h) * jump;
    let mut dt = dt;
    while rate * dt > safety {
        dt *= 0.5;
        if dt < dt_floor {
            return Err(SolverError::CflFloor {
                rate,
                dt_floor,
                step: 0,
            });
        }
    }
    Ok((dt, rate * dt))
}

fn check_bounds(n: &[f64], upper_strict: bool, step: usize) -> Result<(), SolverError> {
    for (i, &v) in n.iter().enumerate() {
        let upper_ok = if upper_strict { v < 1.0 } else { v <= 1.0 };
        if !(v >= 0.0 && upper_ok) {
            return Err(SolverError::BoundsViolation {
                node: i,
                value: v,
                step,
            });
        }
    }
    Ok(())
}

fn check_mass(
    space: &FemSpace,
    n_old: &[f64],
    n_new: &[f64],
    step: usize,
) -> Result<(), SolverError> {
    let m_old = space.lumped_integral(n_old)?;
    let m_new = space.lumped_integral(n_new)?;
    let drift = (m_new - m_old).abs() / m_old.abs().max(1e-300);
    if drift > 1e-10 {
        return Err(SolverError::MassDrift { drift, step });
    }
    Ok(())
}

/// One step of the linearized semi-implicit scheme.
///
/// 1. solve `(sigma Q + M_l) phi = gamma Q n^k + M_l psi_-'(n^k - (s/g) phi^k)`;
/// 2. assemble `U` upwinded on the new `phi` differences;
/// 3. adapt `dt` to the strict stability condition;
/// 4. solve `(M_l + dt L) n = M_l n^k - dt U phi` with the coefficient of
///    `L` frozen at `b(n^k) psi_+''(n^k)`.
pub fn step_linear(
    space: &FemSpace,
    params: &ModelParams,
    config: &SolverConfig,
    state: &State,
) -> Result<(State, StepReport), SolverError> {
    let quality = compute_quality(space.mesh());
    let ml = space.lumped_mass();
    let nk = &state.n;
    let sg = params.sigma / params.gamma;

    let a_phi = shifted_stiffness(space, params.sigma, 1.0);
    let qn = space.stiffness().matvec(nk);
    let rhs_phi: Vec<f64> = (0..space.n_dofs())
        .map(|i| params.gamma * qn[i] + ml[i] * params.dpsi_minus_ext(nk[i] - sg * state.phi[i]))
        .collect();
    let phi_new = cg_solve(&a_phi, &rhs_phi, config.linear_tol, config.linear_max_iter)?;

    let u = space.assemble_upwind_matrix(nk, &phi_new, &params.mobility_model())?;

    let (dt, cfl_ratio) = enforce_cfl(
        &quality,
        state.dt_current,
        &phi_new,
        &space.mesh().edges,
        space.mesh().dimension(),
        config.cfl_safety,
        config.dt_floor(),
    )
    .map_err(|e| match e {
        SolverError::CflFloor { rate, dt_floor, .. } => SolverError::CflFloor {
            rate,
            dt_floor,
            step: state.step,
        },
        other => other,
    })?;

    let mobility = params.mobility_model();
    let coeff: Vec<f64> = nk
        .iter()
        .map(|&v| mobility.value(v) * params.d2psi_plus(v))
        .collect();
    let l = space.assemble_weighted_stiffness(&coeff);
    let a_n = SparseMatrix::from_diagonal(ml).add_scaled(&l, dt)?;
    let uphi = u.matvec(&phi_new);
    let rhs_n: Vec<f64> = (0..space.n_dofs())
        .map(|i| ml[i] * nk[i] - dt * uphi[i])
        .collect();
    let n_new = cg_solve(&a_n, &rhs_n, config.linear_tol, config.linear_max_iter)?;

    check_bounds(&n_new, true, state.step)?;
    check_mass(space, nk, &n_new, state.step)?;

    let next = State {
        n: n_new,
        phi: phi_new,
        t: state.t + dt,
        step: state.step + 1,
        dt_current: (dt * 1.2).min(config.dt_max),
    };
    Ok((
        next,
        StepReport {
            picard_iters: 0,
            cfl_ratio,
            dt_used: dt,
        },
    ))
}

/// One step of the nonlinear scheme by Picard iteration (the seven-step
/// loop of the solving algorithm; a CFL shrink restarts the time step with
/// the smaller `dt`).
pub fn step_nonlinear(
    space: &FemSpace,
    params: &ModelParams,
    config: &SolverConfig,
    state: &State,
) -> Result<(State, StepReport), SolverError> {
    let quality = compute_quality(space.mesh());
    let ml = space.lumped_mass();
    let nk = &state.n;
    let sg = params.sigma / params.gamma;
    let omega = config.under_relaxation;
    let mobility = params.mobility_model();

    let a_phi = shifted_stiffness(space, params.sigma, 1.0);
    // the concave term is frozen at time level k across the whole step
    let concave: Vec<f64> = (0..space.n_dofs())
        .map(|i| ml[i] * params.dpsi_minus_ext(nk[i] - sg * state.phi[i]))
        .collect();

    let mut dt = state.dt_current;
    'time_step: loop {
        let mut n_star = nk.clone();
        let mut phi_star = state.phi.clone();
        let mut last_residual = f64::INFINITY;

        for iter in 1..=config.picard_max_iter {
            // phi** from the current density iterate (implicit at the
            // fixed point, which is what makes the energy telescope)
            let qn_star = space.stiffness().matvec(&n_star);
            let rhs: Vec<f64> = (0..space.n_dofs())
                .map(|i| params.gamma * qn_star[i] + concave[i])
                .collect();
            let phi_ss = cg_solve(&a_phi, &rhs, config.linear_tol, config.linear_max_iter)?;

            // xi* = phi** + P(psi_+'(n*))
            let proj = project(
                space,
                config.projection_mode,
                dpsi_plus_nodal(params, &n_star)?,
            )?;
            let xi: Vec<f64> = phi_ss.iter().zip(&proj).map(|(a, b)| a + b).collect();

            // upwind mobility from (n^k, xi*)
            let u = space.assemble_upwind_matrix(nk, &xi, &mobility)?;

            // positivity condition; shrinking dt restarts the time step
            let (dt_new, cfl_ratio) = enforce_cfl(
                &quality,
                dt,
                &xi,
                &space.mesh().edges,
                space.mesh().dimension(),
                config.cfl_safety,
                config.dt_floor(),
            )
            .map_err(|e| match e {
                SolverError::CflFloor { rate, dt_floor, .. } => SolverError::CflFloor {
                    rate,
                    dt_floor,
                    step: state.step,
                },
                other => other,
            })?;
            if dt_new < dt {
                dt = dt_new;
                continue 'time_step;
            }

            // explicit lumped update
            let uxi = u.matvec(&xi);
            let n_ss: Vec<f64> = (0..space.n_dofs())
                .map(|i| nk[i] - dt * uxi[i] / ml[i])
                .collect();

            // stopping test in L2
            let dn: Vec<f64> = n_ss.iter().zip(&n_star).map(|(a, b)| a - b).collect();
            let dphi: Vec<f64> = phi_ss.iter().zip(&phi_star).map(|(a, b)| a - b).collect();
            last_residual = space.l2_norm(&dn) + space.l2_norm(&dphi);
            if last_residual < config.picard_tol {
                check_bounds(&n_ss, false, state.step)?;
                check_mass(space, nk, &n_ss, state.step)?;
                let next = State {
                    n: n_ss,
                    phi: phi_ss,
                    t: state.t + dt,
                    step: state.step + 1,
                    dt_current: (dt * 1.2).min(config.dt_max),
                };
                return Ok((
                    next,
                    StepReport {
                        picard_iters: iter,
                        cfl_ratio,
                        dt_used: dt,
                    },
                ));
            }

            for i in 0..space.n_dofs() {
                n_star[i] += omega * (n_ss[i] - n_star[i]);
                phi_star[i] += omega * (phi_ss[i] - phi_star[i]);
            }
        }
        return Err(SolverError::PicardNonConvergence {
            residual: last_residual,
            iterations: config.picard_max_iter,
            step: state.step,
        });
    }
}

/// Receives every accepted state with its diagnostics; the CLI uses this
/// to stream CSV rows and snapshot files.
pub trait StepSink {
    fn record(&mut self, state: &State, rec: &DiagnosticsRecord) -> std::io::Result<()>;
}

/// No-op sink.
impl StepSink for () {
    fn record(&mut self, _state: &State, _rec: &DiagnosticsRecord) -> std::io::Result<()> {
        Ok(())
    }
}

/// A finished run: final state plus the per-step diagnostics series.
pub struct RunOutput {
    pub final_state: State,
    pub series: Vec<DiagnosticsRecord>,
}

fn make_record(
    space: &FemSpace,
    params: &ModelParams,
    state: &State,
    report: &StepReport,
    dissipation_value: f64,
) -> Result<DiagnosticsRecord, SolverError> {
    let energy = discrete_energy(space, params, &state.n, &state.phi)?;
    let mass = space.lumped_integral(&state.n)?;
    let (mut n_min, mut n_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &state.n {
        n_min = n_min.min(v);
        n_max = n_max.max(v);
    }
    let entropy = if params.is_regularized() {
        Some(entropy_integral(space, &state.n, params.epsilon)?)
    } else {
        None
    };
    Ok(DiagnosticsRecord {
        step: state.step,
        t: state.t,
        dt: report.dt_used,
        energy,
        mass,
        n_min,
        n_max,
        entropy,
        dissipation: dissipation_value,
        cfl_ratio: report.cfl_ratio,
        picard_iters: report.picard_iters,
    })
}

/// Integrate from the given initial state until `t >= t_end`, emitting one
/// diagnostics record per accepted step (plus the initial one).
pub fn run_from_state(
    space: &FemSpace,
    params: &ModelParams,
    config: &SolverConfig,
    initial: State,
    sink: &mut dyn StepSink,
) -> Result<RunOutput, SolverError> {
    config.validate()?;
    let mass0 = space.lumped_integral(&initial.n)?;
    let mut series = Vec::new();

    let report0 = StepReport {
        picard_iters: 0,
        cfl_ratio: 0.0,
        dt_used: initial.dt_current,
    };
    let rec0 = make_record(space, params, &initial, &report0, 0.0)?;
    sink.record(&initial, &rec0)?;
    series.push(rec0);

    let mut state = initial;
    while state.t < config.t_end {
        let (next, report) = match config.scheme {
            SchemeKind::Linear => step_linear(space, params, config, &state)?,
            SchemeKind::Nonlinear => step_nonlinear(space, params, config, &state)?,
        };
        let diss = dissipation(
            space,
            params,
            &state.n,
            &next.phi,
            &next.n,
            report.dt_used,
            config.projection_mode,
        )?;
        let rec = make_record(space, params, &next, &report, diss)?;
        let drift = (rec.mass - mass0).abs() / mass0.abs().max(1e-300);
        if drift > 1e-10 {
            return Err(SolverError::MassDrift {
                drift,
                step: next.step,
            });
        }
        sink.record(&next, &rec)?;
        series.push(rec);
        state = next;
    }
    Ok(RunOutput {
        final_state: state,
        series,
    })
}

/// Build the seeded initial data, solve for `phi0` and integrate to
/// `t_end`. Deterministic for a fixed seed and config.
pub fn run(
    space: &FemSpace,
    params: &ModelParams,
    config: &SolverConfig,
    sink: &mut dyn StepSink,
) -> Result<RunOutput, SolverError> {
    config.validate()?;
    let n0 = make_initial_density(space, config)?;
    let phi0 = solve_phi0(
        space,
        params,
        &n0,
        config.linear_tol,
        config.linear_max_iter,
    )?;
    let initial = State {
        n: n0,
        phi: phi0,
        t: 0.0,
        step: 0,
        dt_current: config.dt_initial,
    };
    run_from_state(space, params, config, initial, sink)
}
