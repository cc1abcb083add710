//! CSV and legacy-ASCII-VTK writers. Files are written whole-file atomic:
//! content goes to `<name>.tmp` in the target directory and is renamed
//! into place on success. Numbers are formatted with Rust's shortest
//! round-trippable float notation, so identical runs produce byte
//! identical files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::diagnostics::{DiagnosticsRecord, StabilityScanResult, StudyRow};
use crate::mesh::SimplicialMesh;

/// Column order of `series.csv`; part of the public contract.
pub const SERIES_HEADER: &str =
    "step,t,dt,energy,mass,n_min,n_max,dissipation,entropy,picard_iters,cfl_ratio";

/// Write `content` to `path` atomically (temp file + rename).
pub fn write_atomic(path: &Path, content: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    {
        let mut f = BufWriter::new(fs::File::create(&tmp)?);
        f.write_all(content)?;
        f.flush()?;
    }
    fs::rename(&tmp, path)
}

/// Render one diagnostics row in the documented column order. The entropy
/// column is empty on unregularized runs.
pub fn format_series_row(rec: &DiagnosticsRecord) -> String {
    let entropy = match rec.entropy {
        Some(e) => format!("{e}"),
        None => String::new(),
    };
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        rec.step,
        rec.t,
        rec.dt,
        rec.energy,
        rec.mass,
        rec.n_min,
        rec.n_max,
        rec.dissipation,
        entropy,
        rec.picard_iters,
        rec.cfl_ratio
    )
}

pub fn render_series_csv(series: &[DiagnosticsRecord]) -> String {
    let mut out = String::with_capacity(64 * (series.len() + 1));
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for rec in series {
        out.push_str(&format_series_row(rec));
        out.push('\n');
    }
    out
}

/// 1D snapshot: `x,n,phi` per node.
pub fn render_snapshot_csv_1d(mesh: &SimplicialMesh, n: &[f64], phi: &[f64]) -> String {
    let mut out = String::from("x,n,phi\n");
    for (v, (ni, pi)) in mesh.vertices.iter().zip(n.iter().zip(phi)) {
        out.push_str(&format!("{},{},{}\n", v[0], ni, pi));
    }
    out
}

/// 2D snapshot: legacy ASCII VTK unstructured grid with point scalars
/// `n` and `phi` (cell type 5 = triangle).
pub fn render_snapshot_vtk_2d(mesh: &SimplicialMesh, n: &[f64], phi: &[f64]) -> String {
    let n_nodes = mesh.n_nodes();
    let n_cells = mesh.n_elements();
    let mut out = String::with_capacity(64 * (n_nodes + n_cells));
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("rdch snapshot\n");
    out.push_str("ASCII\n");
    out.push_str("DATASET UNSTRUCTURED_GRID\n");
    out.push_str(&format!("POINTS {n_nodes} double\n"));
    for v in &mesh.vertices {
        out.push_str(&format!("{} {} 0\n", v[0], v[1]));
    }
    out.push_str(&format!("CELLS {n_cells} {}\n", 4 * n_cells));
    for elem in mesh.elements() {
        out.push_str(&format!("3 {} {} {}\n", elem[0], elem[1], elem[2]));
    }
    out.push_str(&format!("CELL_TYPES {n_cells}\n"));
    for _ in 0..n_cells {
        out.push_str("5\n");
    }
    out.push_str(&format!("POINT_DATA {n_nodes}\n"));
    for (name, data) in [("n", n), ("phi", phi)] {
        out.push_str(&format!("SCALARS {name} double 1\n"));
        out.push_str("LOOKUP_TABLE default\n");
        for v in data {
            out.push_str(&format!("{v}\n"));
        }
    }
    out
}

/// Stability scan: `dt,rho` per grid point.
pub fn render_stability_csv(result: &StabilityScanResult) -> String {
    let mut out = String::from("dt,rho\n");
    for (dt, rho) in &result.points {
        out.push_str(&format!("{dt},{rho}\n"));
    }
    out
}

/// Refinement study: `h,dt,diff_to_next` per consecutive mesh pair.
pub fn render_convergence_csv(rows: &[StudyRow]) -> String {
    let mut out = String::from("h,dt,diff_to_next\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.h, r.dt, r.diff_to_next));
    }
    out
}
