//! Conserved and dissipated quantities of a run, plus the offline
//! stability analyses: the amplification matrix of the linearized scheme,
//! its spectral-radius scan over time steps, and an empirical refinement
//! study.

use crate::fem::{FemError, FemSpace};
use crate::mesh::build_interval_mesh;
use crate::physics::{entropy_phi_eps, ModelParams};
use crate::solvers::{self, ProjectionMode, SolverConfig, SolverError, State};
use crate::sparse::{
    power_iteration_spectral_radius, BlockMatrix2x2, LinAlgError, LuFactors, SparseMatrix,
};

/// Diagnostics failures.
#[derive(Debug)]
pub enum DiagnosticsError {
    /// Unregularized potential evaluated at a density at or above 1.
    SingularPotential {
        node: usize,
        value: f64,
    },
    Fem(FemError),
    LinAlg(LinAlgError),
    /// Stability scan asked for more unknowns than the dense cap allows.
    ProblemTooLarge {
        unknowns: usize,
        cap: usize,
    },
    InvalidInput(String),
    Solver(Box<SolverError>),
}

impl std::fmt::Display for DiagnosticsError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DiagnosticsError::SingularPotential { node, value } => write!(
                f,
                "potential singular: density {value} at node {node} is not below 1"
            ),
            DiagnosticsError::Fem(e) => write!(f, "{e}"),
            DiagnosticsError::LinAlg(e) => write!(f, "{e}"),
            DiagnosticsError::ProblemTooLarge { unknowns, cap } => write!(
                f,
                "stability scan needs {unknowns} unknowns, dense cap is {cap}; use a smaller mesh"
            ),
            DiagnosticsError::InvalidInput(msg) => write!(f, "{msg}"),
            DiagnosticsError::Solver(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for DiagnosticsError {}

impl From<FemError> for DiagnosticsError {
    fn from(e: FemError) -> Self {
        DiagnosticsError::Fem(e)
    }
}

impl From<LinAlgError> for DiagnosticsError {
    fn from(e: LinAlgError) -> Self {
        DiagnosticsError::LinAlg(e)
    }
}

/// Per-step diagnostics of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub energy: f64,
    /// `(1, n)^h`.
    pub mass: f64,
    pub n_min: f64,
    pub n_max: f64,
    /// `(phi_eps(n), 1)^h`; only meaningful on regularized runs.
    pub entropy: Option<f64>,
    /// `dt * xi^T U xi`, nonnegative.
    pub dissipation: f64,
    pub cfl_ratio: f64,
    pub picard_iters: usize,
}

/// Discrete energy
///
/// ```text
///   E(n, phi) = gamma/2 |n - (s/g) phi|_1^2 + s/(2g) (phi, phi)^h
///             + (psi_+(n) + psi_-(n - (s/g) phi), 1)^h
/// ```
///
/// with the seminorm through `Q` and both the `phi` term and the
/// potential term through the lumped product. The lumped norm on `phi`
/// (rather than the consistent-mass norm) is the quantity the scheme
/// provably dissipates: the convex/concave telescoping argument runs
/// entirely in the lumped inner product, and with the consistent norm the
/// per-step inequality `E^{k+1} + D^k <= E^k` fails by the
/// lumped-vs-exact product gap.
pub fn discrete_energy(
    space: &FemSpace,
    params: &ModelParams,
    n: &[f64],
    phi: &[f64],
) -> Result<f64, DiagnosticsError> {
    if !params.is_regularized() {
        for (i, &v) in n.iter().enumerate() {
            if v >= 1.0 {
                return Err(DiagnosticsError::SingularPotential { node: i, value: v });
            }
        }
    }
    let sg = params.sigma / params.gamma;
    let w: Vec<f64> = n.iter().zip(phi).map(|(ni, pi)| ni - sg * pi).collect();
    let grad_term = 0.5 * params.gamma * space.h1_seminorm_sq(&w);
    let phi_term = 0.5 * sg * space.lumped_inner_product(phi, phi)?;
    let potential: Vec<f64> = n
        .iter()
        .zip(&w)
        .map(|(&ni, &wi)| params.psi_plus(ni) + params.psi_minus_ext(wi))
        .collect();
    let pot_term = space.lumped_integral(&potential)?;
    Ok(grad_term + phi_term + pot_term)
}

/// One-step dissipation `dt * xi^T U xi` with `xi = phi_new + P(psi_+'(n_new))`
/// and `U` the upwind matrix built from `(n_old, xi)`. Nonnegative up to
/// roundoff (positive semidefinite quadratic form).
pub fn dissipation(
    space: &FemSpace,
    params: &ModelParams,
    n_old: &[f64],
    phi_new: &[f64],
    n_new: &[f64],
    dt: f64,
    projection_mode: ProjectionMode,
) -> Result<f64, DiagnosticsError> {
    if !params.is_regularized() {
        for (i, &v) in n_new.iter().enumerate() {
            if v >= 1.0 {
                return Err(DiagnosticsError::SingularPotential { node: i, value: v });
            }
        }
    }
    let dpsip: Vec<f64> = n_new.iter().map(|&v| params.dpsi_plus(v)).collect();
    let proj = match projection_mode {
        ProjectionMode::Interpolation => dpsip,
        ProjectionMode::LumpedH1 => space.lumped_h1_project(&dpsip)?,
    };
    let xi: Vec<f64> = phi_new.iter().zip(&proj).map(|(a, b)| a + b).collect();
    let u = space.assemble_upwind_matrix(n_old, &xi, &params.mobility_model())?;
    Ok(dt * crate::sparse::dot(&xi, &u.matvec(&xi)))
}

/// Lumped entropy integral `(phi_eps(n), 1)^h`.
pub fn entropy_integral(
    space: &FemSpace,
    n: &[f64],
    epsilon: f64,
) -> Result<f64, DiagnosticsError> {
    if !(epsilon > 0.0) {
        return Err(DiagnosticsError::InvalidInput(
            "entropy integral requires epsilon > 0".into(),
        ));
    }
    let vals: Vec<f64> = n.iter().map(|&v| entropy_phi_eps(v, epsilon)).collect();
    Ok(space.lumped_integral(&vals)?)
}

/// Amplification-matrix factors of the linearized scheme around a
/// reference state, `X^{k+1} = H1^{-1} H2 X^k` with stacked `X = [n; phi]`:
///
/// ```text
///   H1 = [ 0          sigma Q + M_l ]    H2 = [ gamma Q - (1-n*) M_l   (s/g)(1-n*) M_l ]
///        [ M_l + dt L     dt U      ]         [ M_l                    0               ]
/// ```
///
/// `L` carries the coefficient `b(n_ref) psi_+''(n_ref)` and `U` is
/// upwinded on the `phi_ref` differences. The affine part of `psi_-'` is
/// dropped, which does not change the spectral radius.
pub fn build_amplification_matrix(
    space: &FemSpace,
    params: &ModelParams,
    dt: f64,
    n_ref: &[f64],
    phi_ref: &[f64],
) -> Result<(BlockMatrix2x2, BlockMatrix2x2), DiagnosticsError> {
    let nn = space.n_dofs();
    let ml = space.lumped_mass_matrix();
    let p = 1.0 - params.n_star;

    let mobility = params.mobility_model();
    let coeff: Vec<f64> = n_ref
        .iter()
        .map(|&v| mobility.value(v) * params.d2psi_plus(v))
        .collect();
    let l = space.assemble_weighted_stiffness(&coeff);
    let u = space.assemble_upwind_matrix(n_ref, phi_ref, &mobility)?;

    let h1 = BlockMatrix2x2::new(
        SparseMatrix::zeros(nn, nn),
        ml.add_scaled(space.stiffness(), params.sigma)?,
        ml.add_scaled(&l, dt)?,
        u.scaled(dt),
    )?;
    let h2 = BlockMatrix2x2::new(
        ml.scaled(-p).add_scaled(space.stiffness(), params.gamma)?,
        ml.scaled(params.sigma / params.gamma * p),
        ml.clone(),
        SparseMatrix::zeros(nn, nn),
    )?;
    Ok((h1, h2))
}

/// One scan over a time-step grid.
#[derive(Debug, Clone)]
pub struct StabilityScanResult {
    pub sigma: f64,
    /// Mesh descriptor, e.g. `1d,cells=100`.
    pub mesh_info: String,
    /// `(dt, spectral radius)` in the grid order (strictly increasing dt).
    pub points: Vec<(f64, f64)>,
    /// Largest scanned `dt` with `rho <= 1 + 1e-6`.
    pub dt_star: Option<f64>,
}

/// Maximum problem size (stacked unknowns) for the dense scan.
pub const SCAN_DENSE_CAP: usize = 2000;

/// Spectral radius `rho(H(dt))` for each grid point, via power iteration
/// on `x -> H1^{-1} H2 x` with a dense LU factorization of `H1`.
pub fn stability_scan(
    space: &FemSpace,
    params: &ModelParams,
    dt_grid: &[f64],
    n_ref: &[f64],
    phi_ref: &[f64],
) -> Result<StabilityScanResult, DiagnosticsError> {
    let unknowns = 2 * space.n_dofs();
    if unknowns > SCAN_DENSE_CAP {
        return Err(DiagnosticsError::ProblemTooLarge {
            unknowns,
            cap: SCAN_DENSE_CAP,
        });
    }
    if dt_grid.is_empty() {
        return Err(DiagnosticsError::InvalidInput("empty dt grid".into()));
    }
    if dt_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DiagnosticsError::InvalidInput(
            "dt grid must be strictly increasing".into(),
        ));
    }

    let mut points = Vec::with_capacity(dt_grid.len());
    for &dt in dt_grid {
        let (h1, h2) = build_amplification_matrix(space, params, dt, n_ref, phi_ref)?;
        let lu = LuFactors::factor(&h1.to_dense())?;
        let est = power_iteration_spectral_radius(
            |x| lu.solve_vec(&h2.matvec(x)),
            unknowns,
            1e-8,
            20_000,
        );
        points.push((dt, est.rho));
    }
    let dt_star = points
        .iter()
        .filter(|(_, rho)| *rho <= 1.0 + 1e-6)
        .map(|(dt, _)| *dt)
        .fold(None, |acc: Option<f64>, dt| {
            Some(acc.map_or(dt, |a: f64| a.max(dt)))
        });
    Ok(StabilityScanResult {
        sigma: params.sigma,
        mesh_info: format!(
            "{}d,cells={}",
            space.mesh().dimension(),
            space.mesh().n_elements()
        ),
        points,
        dt_star,
    })
}

/// One row of the refinement study: the coarse mesh of a consecutive pair
/// and the `L^2` distance to the next finer solution at the final time.
#[derive(Debug, Clone, Copy)]
pub struct StudyRow {
    pub h: f64,
    pub dt: f64,
    pub diff_to_next: f64,
}

/// Empirical refinement study on nested 1D meshes with a deterministic
/// smooth initial profile `mean + amp cos(2 pi x / length)` (no
/// randomness) and `dt = dt_rule(h)`. Solutions are compared at `t_end`
/// by nodal restriction of the finer solution onto the coarser mesh.
pub fn convergence_study(
    params: &ModelParams,
    config: &SolverConfig,
    length: f64,
    mesh_sizes: &[usize],
    dt_rule: &dyn Fn(f64) -> f64,
) -> Result<Vec<StudyRow>, DiagnosticsError> {
    if mesh_sizes.len() < 2 {
        return Err(DiagnosticsError::InvalidInput(
            "refinement study needs at least two mesh sizes".into(),
        ));
    }
    for w in mesh_sizes.windows(2) {
        if w[1] <= w[0] || w[1] % w[0] != 0 {
            return Err(DiagnosticsError::InvalidInput(format!(
                "mesh sizes must be increasing and nested, got {} then {}",
                w[0], w[1]
            )));
        }
    }

    let mean = config.initial_mean;
    let amp = config.perturbation_amplitude;
    let mut solutions: Vec<(usize, FemSpace, Vec<f64>, f64)> = Vec::new();
    for &cells in mesh_sizes {
        let mesh = build_interval_mesh(length, cells)
            .map_err(|e| DiagnosticsError::InvalidInput(e.to_string()))?;
        let space = FemSpace::new(mesh);
        let h = length / cells as f64;
        let dt = dt_rule(h);
        let n0 = space.interpolate_nodal(|x| {
            mean + amp * (2.0 * std::f64::consts::PI * x[0] / length).cos()
        })?;
        let phi0 = solvers::solve_phi0(
            &space,
            params,
            &n0,
            config.linear_tol,
            config.linear_max_iter,
        )
        .map_err(|e| DiagnosticsError::Solver(Box::new(e)))?;
        let mut cfg = config.clone();
        cfg.dt_initial = dt;
        cfg.dt_max = dt;
        let initial = State {
            n: n0,
            phi: phi0,
            t: 0.0,
            step: 0,
            dt_current: dt,
        };
        let out = solvers::run_from_state(&space, params, &cfg, initial, &mut ())
            .map_err(|e| DiagnosticsError::Solver(Box::new(e)))?;
        solutions.push((cells, space, out.final_state.n, dt));
    }

    let mut rows = Vec::new();
    for pair in solutions.windows(2) {
        let (nc, coarse_space, coarse_n, dt_c) = (&pair[0].0, &pair[0].1, &pair[0].2, pair[0].3);
        let (nf, _, fine_n, _) = (&pair[1].0, &pair[1].1, &pair[1].2, pair[1].3);
        let ratio = nf / nc;
        let ml = coarse_space.lumped_mass();
        let mut diff_sq = 0.0;
        for i in 0..=*nc {
            let d = coarse_n[i] - fine_n[i * ratio];
            diff_sq += ml[i] * d * d;
        }
        rows.push(StudyRow {
            h: length / *nc as f64,
            dt: dt_c,
            diff_to_next: diff_sq.sqrt(),
        });
    }
    Ok(rows)
}
