//! The four CLI commands behind `rdch`: `run`, `scan-stability`,
//! `convergence-study` and `validate-mesh`. Each takes a parsed
//! [`RunConfig`] and writes its outputs under the configured directory
//! (overridable through the `RDCH_OUTPUT_DIR` environment variable).

use std::path::{Path, PathBuf};

use crate::config::{ConfigError, RunConfig};
use crate::diagnostics::{self, DiagnosticsRecord};
use crate::fem::FemSpace;
use crate::mesh::{self, SimplicialMesh};
use crate::output;
use crate::physics::ModelParams;
use crate::solvers::{self, SolverError, State, StepSink};

/// Environment variable overriding `output.directory`.
pub const OUTPUT_DIR_ENV: &str = "RDCH_OUTPUT_DIR";

/// Command failure, mapped onto the documented exit codes:
/// 1 config, 2 solver, 3 IO.
#[derive(Debug)]
pub enum CommandError {
    Config(ConfigError),
    Solver(String),
    Io(std::io::Error),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => 1,
            CommandError::Solver(_) => 2,
            CommandError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CommandError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CommandError::Config(e) => write!(f, "{e}"),
            CommandError::Solver(e) => write!(f, "{e}"),
            CommandError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for CommandError {}

impl From<ConfigError> for CommandError {
    fn from(e: ConfigError) -> Self {
        CommandError::Config(e)
    }
}

impl From<std::io::Error> for CommandError {
    fn from(e: std::io::Error) -> Self {
        CommandError::Io(e)
    }
}

impl From<SolverError> for CommandError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Io(io) => CommandError::Io(io),
            other => CommandError::Solver(other.to_string()),
        }
    }
}

impl From<diagnostics::DiagnosticsError> for CommandError {
    fn from(e: diagnostics::DiagnosticsError) -> Self {
        CommandError::Solver(e.to_string())
    }
}

/// Resolve the output directory (env override wins) and create it.
pub fn output_dir(config: &RunConfig) -> Result<PathBuf, CommandError> {
    let dir = match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(v) => PathBuf::from(v),
        None => config.output.directory.clone(),
    };
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn build_mesh(config: &RunConfig) -> Result<SimplicialMesh, CommandError> {
    let m = match config.mesh.dimension {
        1 => mesh::build_interval_mesh(config.mesh.length, config.mesh.cells),
        2 => mesh::build_structured_triangle_mesh(config.mesh.length, config.mesh.cells),
        _ => unreachable!("dimension validated at parse time"),
    };
    m.map_err(|e| {
        CommandError::Config(ConfigError::InvalidValue {
            key: "mesh.*".into(),
            message: e.to_string(),
        })
    })
}

/// Streams diagnostics rows and writes snapshots at the configured
/// interval.
struct FileSink<'a> {
    dir: &'a Path,
    mesh: &'a SimplicialMesh,
    snapshot_every: usize,
    rows: Vec<DiagnosticsRecord>,
}

impl<'a> FileSink<'a> {
    fn write_snapshot(&self, state: &State) -> std::io::Result<()> {
        if self.mesh.dimension() == 1 {
            let path = self.dir.join(format!("snap_{}.csv", state.step));
            let body = output::render_snapshot_csv_1d(self.mesh, &state.n, &state.phi);
            output::write_atomic(&path, body.as_bytes())
        } else {
            let path = self.dir.join(format!("snap_{}.vtk", state.step));
            let body = output::render_snapshot_vtk_2d(self.mesh, &state.n, &state.phi);
            output::write_atomic(&path, body.as_bytes())
        }
    }
}

impl StepSink for FileSink<'_> {
    fn record(&mut self, state: &State, rec: &DiagnosticsRecord) -> std::io::Result<()> {
        self.rows.push(rec.clone());
        if self.snapshot_every > 0 && state.step.is_multiple_of(self.snapshot_every) {
            self.write_snapshot(state)?;
        }
        Ok(())
    }
}

/// `rdch run <cfg>`: integrate to `t_end`, writing `series.csv` and
/// periodic snapshots.
pub fn cmd_run(config: &RunConfig) -> Result<(), CommandError> {
    if let Some(warning) = config.model.convexity_warning() {
        eprintln!("warning: {warning}");
    }
    let dir = output_dir(config)?;
    let mesh = build_mesh(config)?;
    let space = FemSpace::new(mesh);
    let mut sink = FileSink {
        dir: &dir,
        mesh: space.mesh(),
        snapshot_every: config.output.snapshot_every,
        rows: Vec::new(),
    };
    let out =
        solvers::run(&space, &config.model, &config.solver, &mut sink).map_err(|e| match &e {
            SolverError::Io(_) => CommandError::from(e),
            other => CommandError::Solver(format!("{other}")),
        })?;
    // final snapshot alongside the periodic ones
    if config.output.snapshot_every > 0
        && !out
            .final_state
            .step
            .is_multiple_of(config.output.snapshot_every)
    {
        sink.write_snapshot(&out.final_state)?;
    }
    let csv = output::render_series_csv(&sink.rows);
    output::write_atomic(&dir.join("series.csv"), csv.as_bytes())?;
    println!(
        "run finished: {} steps to t = {}, series.csv with {} rows in {}",
        out.final_state.step,
        out.final_state.t,
        sink.rows.len(),
        dir.display()
    );
    Ok(())
}

/// `rdch scan-stability <cfg>`: spectral radius of the amplification
/// matrix over a geometric dt grid, one CSV per sigma.
pub fn cmd_scan_stability(config: &RunConfig) -> Result<(), CommandError> {
    let scan = config.scan.as_ref().ok_or_else(|| {
        CommandError::Config(ConfigError::MissingKeys {
            keys: vec![
                "scan.dt_min".into(),
                "scan.dt_max".into(),
                "scan.sigmas".into(),
            ],
        })
    })?;
    let dir = output_dir(config)?;
    let mesh = build_mesh(config)?;
    let space = FemSpace::new(mesh);

    // geometric grid over [dt_min, dt_max]
    let grid: Vec<f64> = if scan.n_points == 1 {
        vec![scan.dt_min]
    } else {
        let ratio = (scan.dt_max / scan.dt_min).powf(1.0 / (scan.n_points - 1) as f64);
        (0..scan.n_points)
            .map(|i| scan.dt_min * ratio.powi(i as i32))
            .collect()
    };

    // smooth deterministic reference state around the configured mean
    let mean = config.solver.initial_mean;
    let length = config.mesh.length;
    let n_ref = space
        .interpolate_nodal(|x| mean + 0.05 * (2.0 * std::f64::consts::PI * x[0] / length).cos())
        .map_err(|e| CommandError::Solver(e.to_string()))?;

    for &sigma in &scan.sigmas {
        let params = ModelParams::new(
            config.model.gamma,
            sigma,
            config.model.n_star,
            config.model.k_offset,
            config.model.epsilon,
        )
        .map_err(|e| {
            CommandError::Config(ConfigError::InvalidValue {
                key: "scan.sigmas".into(),
                message: e.0,
            })
        })?;
        let phi_ref = solvers::solve_phi0(
            &space,
            &params,
            &n_ref,
            config.solver.linear_tol,
            config.solver.linear_max_iter,
        )?;
        let result = diagnostics::stability_scan(&space, &params, &grid, &n_ref, &phi_ref)?;
        let path = dir.join(format!("stability_{sigma:e}.csv"));
        output::write_atomic(&path, output::render_stability_csv(&result).as_bytes())?;
        match result.dt_star {
            Some(dt_star) => println!(
                "sigma = {sigma:e}: dt_star = {dt_star:e} ({} grid points) -> {}",
                result.points.len(),
                path.display()
            ),
            None => println!(
                "sigma = {sigma:e}: no stable dt in the grid -> {}",
                path.display()
            ),
        }
    }
    Ok(())
}

/// `rdch convergence-study <cfg>`: refinement study on nested 1D meshes
/// with the deterministic smooth initial profile.
pub fn cmd_convergence_study(config: &RunConfig) -> Result<(), CommandError> {
    if config.mesh.dimension != 1 {
        return Err(CommandError::Config(ConfigError::InvalidValue {
            key: "mesh.dimension".into(),
            message: "the refinement study runs on 1D meshes".into(),
        }));
    }
    let dir = output_dir(config)?;
    let mut solver = config.solver.clone();
    solver.t_end = config.study.t_end;
    solver.perturbation_amplitude = config.study.ic_amplitude;
    let coeff = config.study.dt_coeff;
    let rows = diagnostics::convergence_study(
        &config.model,
        &solver,
        config.mesh.length,
        &config.study.mesh_sizes,
        &|h| coeff * h * h,
    )?;
    let path = dir.join("convergence.csv");
    output::write_atomic(&path, output::render_convergence_csv(&rows).as_bytes())?;
    for r in &rows {
        println!(
            "h = {}: dt = {:e}, diff to next = {:e}",
            r.h, r.dt, r.diff_to_next
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

/// `rdch validate-mesh <cfg>`: print quality metrics; nonzero exit when
/// the mesh is not acute. With `dump`, also write the node/element CSVs.
pub fn cmd_validate_mesh(config: &RunConfig, dump: bool) -> Result<(), CommandError> {
    let mesh = build_mesh(config)?;
    mesh.validate()
        .map_err(|e| CommandError::Solver(e.to_string()))?;
    let q = mesh::compute_quality(&mesh);
    println!("dimension            = {}", mesh.dimension());
    println!("nodes                = {}", mesh.n_nodes());
    println!("elements             = {}", mesh.n_elements());
    println!("h                    = {}", q.h);
    println!("kappa_h              = {}", q.kappa_h);
    println!("G_h                  = {}", q.g_h);
    println!("acute                = {}", q.is_acute);
    println!("quasi_uniform_ratio  = {}", q.quasi_uniform_ratio);
    if dump {
        let dir = output_dir(config)?;
        let mut nodes = Vec::new();
        let mut elems = Vec::new();
        mesh.dump_nodes_csv(&mut nodes)?;
        mesh.dump_elements_csv(&mut elems)?;
        output::write_atomic(&dir.join("mesh_nodes.csv"), &nodes)?;
        output::write_atomic(&dir.join("mesh_elements.csv"), &elems)?;
        println!("mesh dumped to {}", dir.display());
    }
    if !q.is_acute {
        return Err(CommandError::Solver("mesh is not acute".into()));
    }
    Ok(())
}
