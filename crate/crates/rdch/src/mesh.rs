//! 1D interval meshes and 2D structured acute triangular meshes, with the
//! connectivity and geometric quantities the scheme needs: edge lists,
//! node neighborhoods, barycentric dual-cell volumes and quality metrics.
//!
//! The 2D family is fixed to uniform diagonal-split squares: every cell of
//! an `n x n` grid is cut along its bottom-left/top-right diagonal into two
//! right isoceles triangles. All angles are at most `pi/2`, so the meshes
//! are acute in the sense required by the positivity analysis, and the
//! quality numbers (`kappa_h = dx/sqrt(2)`, interior node degree 6) are
//! analytically checkable.

use std::io::Write;

/// Mesh construction failure.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshError(pub String);

impl std::fmt::Display for MeshError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "mesh error: {}", self.0)
    }
}

impl std::error::Error for MeshError {}

/// Conforming simplicial mesh (intervals for `d = 1`, triangles for `d = 2`).
///
/// Element vertex indices are stored flat with stride `dimension + 1`;
/// 2D elements are counterclockwise. Immutable after construction and
/// safely shareable across threads.
#[derive(Debug, Clone)]
pub struct SimplicialMesh {
    dimension: usize,
    /// Node coordinates; the second component is 0 for 1D meshes.
    pub vertices: Vec<[f64; 2]>,
    element_nodes: Vec<usize>,
    /// Deduplicated undirected edges as `(i, j)` with `i < j`, sorted.
    pub edges: Vec<[usize; 2]>,
    /// For each node `i`, the sorted set of nodes sharing an edge with `i`.
    pub neighbor_sets: Vec<Vec<usize>>,
    /// Barycentric dual-cell volumes `|D_i|` (row sums of the lumped mass).
    pub dual_volumes: Vec<f64>,
}

impl SimplicialMesh {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn n_nodes(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.element_nodes.len() / (self.dimension + 1)
    }

    /// Vertex indices of element `k`.
    pub fn element(&self, k: usize) -> &[usize] {
        let s = self.dimension + 1;
        &self.element_nodes[k * s..(k + 1) * s]
    }

    pub fn elements(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.element_nodes.chunks_exact(self.dimension + 1)
    }

    /// Measure (length/area) of element `k`; positive for the consistent
    /// counterclockwise orientation.
    pub fn element_measure(&self, k: usize) -> f64 {
        let e = self.element(k);
        match self.dimension {
            1 => (self.vertices[e[1]][0] - self.vertices[e[0]][0]).abs(),
            2 => {
                let [a, b, c] = [
                    self.vertices[e[0]],
                    self.vertices[e[1]],
                    self.vertices[e[2]],
                ];
                0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
            }
            _ => unreachable!("only d = 1, 2 meshes are constructed"),
        }
    }

    /// Total mesh measure.
    pub fn measure(&self) -> f64 {
        (0..self.n_elements())
            .map(|k| self.element_measure(k))
            .sum()
    }

    fn finish(dimension: usize, vertices: Vec<[f64; 2]>, element_nodes: Vec<usize>) -> Self {
        let n_nodes = vertices.len();
        let stride = dimension + 1;

        let mut edge_set: Vec<[usize; 2]> = Vec::new();
        for elem in element_nodes.chunks_exact(stride) {
            for a in 0..stride {
                for b in (a + 1)..stride {
                    let (i, j) = (elem[a].min(elem[b]), elem[a].max(elem[b]));
                    edge_set.push([i, j]);
                }
            }
        }
        edge_set.sort_unstable();
        edge_set.dedup();

        let mut neighbor_sets = vec![Vec::new(); n_nodes];
        for &[i, j] in &edge_set {
            neighbor_sets[i].push(j);
            neighbor_sets[j].push(i);
        }
        for set in &mut neighbor_sets {
            set.sort_unstable();
        }

        let mut mesh = Self {
            dimension,
            vertices,
            element_nodes,
            edges: edge_set,
            neighbor_sets,
            dual_volumes: Vec::new(),
        };
        let mut dual = vec![0.0; n_nodes];
        for k in 0..mesh.n_elements() {
            let share = mesh.element_measure(k) / stride as f64;
            for &v in mesh.element(k) {
                dual[v] += share;
            }
        }
        mesh.dual_volumes = dual;
        mesh
    }

    /// Check the structural invariants; used by tests and `validate-mesh`.
    pub fn validate(&self) -> Result<(), MeshError> {
        let n = self.n_nodes();
        for (k, elem) in self.elements().enumerate() {
            for &v in elem {
                if v >= n {
                    return Err(MeshError(format!("element {k} references node {v} >= {n}")));
                }
            }
            for a in 0..elem.len() {
                for b in (a + 1)..elem.len() {
                    if elem[a] == elem[b] {
                        return Err(MeshError(format!("element {k} has repeated vertices")));
                    }
                }
            }
        }
        for k in 0..self.n_elements() {
            if self.element_measure(k) <= 0.0 {
                return Err(MeshError(format!(
                    "element {k} has nonpositive measure (orientation)"
                )));
            }
        }
        let total: f64 = self.dual_volumes.iter().sum();
        let measure = self.measure();
        if (total - measure).abs() > 1e-12 * measure.abs() {
            return Err(MeshError(format!(
                "dual volumes sum {total} != mesh measure {measure}"
            )));
        }
        for (i, set) in self.neighbor_sets.iter().enumerate() {
            for &j in set {
                if !self.neighbor_sets[j].contains(&i) {
                    return Err(MeshError(format!(
                        "edge symmetry broken between {i} and {j}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Debug dump: `index,x,y` per node.
    pub fn dump_nodes_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "index,x,y")?;
        for (i, v) in self.vertices.iter().enumerate() {
            writeln!(w, "{},{},{}", i, v[0], v[1])?;
        }
        Ok(())
    }

    /// Debug dump: `index,v0,v1[,v2]` per element.
    pub fn dump_elements_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        if self.dimension == 1 {
            writeln!(w, "index,v0,v1")?;
        } else {
            writeln!(w, "index,v0,v1,v2")?;
        }
        for (k, elem) in self.elements().enumerate() {
            let cols: Vec<String> = elem.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{}", k, cols.join(","))?;
        }
        Ok(())
    }
}

/// Mesh quality metrics entering the CFL-type positivity condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshQuality {
    /// Maximum element diameter.
    pub h: f64,
    /// Minimum perpendicular length (altitude) over all elements.
    pub kappa_h: f64,
    /// Maximum number of edge-neighbors of any node.
    pub g_h: usize,
    /// All element angles at most `pi/2`.
    pub is_acute: bool,
    /// `h / min element diameter`.
    pub quasi_uniform_ratio: f64,
}

/// Uniform 1D mesh of `[0, length]` with `n_cells` intervals.
///
/// Dual volumes are `dx/2` at the two boundary nodes and `dx` inside.
pub fn build_interval_mesh(length: f64, n_cells: usize) -> Result<SimplicialMesh, MeshError> {
    if !(length > 0.0) {
        return Err(MeshError(format!("length must be > 0, got {length}")));
    }
    if n_cells < 2 {
        return Err(MeshError(format!("n_cells must be >= 2, got {n_cells}")));
    }
    let vertices: Vec<[f64; 2]> = (0..=n_cells)
        .map(|i| [i as f64 * length / n_cells as f64, 0.0])
        .collect();
    let mut element_nodes = Vec::with_capacity(2 * n_cells);
    for i in 0..n_cells {
        element_nodes.push(i);
        element_nodes.push(i + 1);
    }
    Ok(SimplicialMesh::finish(1, vertices, element_nodes))
}

/// Structured triangular mesh of the square `[0, length]^2`: an
/// `n x n` grid of cells, each split along the bottom-left/top-right
/// diagonal into two right triangles with counterclockwise orientation.
pub fn build_structured_triangle_mesh(
    length: f64,
    n_cells_per_side: usize,
) -> Result<SimplicialMesh, MeshError> {
    if !(length > 0.0) {
        return Err(MeshError(format!("length must be > 0, got {length}")));
    }
    if n_cells_per_side < 2 {
        return Err(MeshError(format!(
            "n_cells_per_side must be >= 2, got {n_cells_per_side}"
        )));
    }
    let n = n_cells_per_side;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 * length / n as f64, j as f64 * length / n as f64]);
        }
    }
    let node = |i: usize, j: usize| j * (n + 1) + i;
    let mut element_nodes = Vec::with_capacity(3 * 2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (bl, br) = (node(i, j), node(i + 1, j));
            let (tr, tl) = (node(i + 1, j + 1), node(i, j + 1));
            // lower-right triangle and upper-left triangle of the cell
            element_nodes.extend_from_slice(&[bl, br, tr]);
            element_nodes.extend_from_slice(&[bl, tr, tl]);
        }
    }
    Ok(SimplicialMesh::finish(2, vertices, element_nodes))
}

/// Quality metrics of a constructed mesh.
pub fn compute_quality(mesh: &SimplicialMesh) -> MeshQuality {
    let mut h: f64 = 0.0;
    let mut h_min = f64::INFINITY;
    let mut kappa_h = f64::INFINITY;
    let mut is_acute = true;

    for k in 0..mesh.n_elements() {
        let elem = mesh.element(k);
        match mesh.dimension() {
            1 => {
                let len = mesh.element_measure(k);
                h = h.max(len);
                h_min = h_min.min(len);
                kappa_h = kappa_h.min(len);
            }
            2 => {
                let pts = [
                    mesh.vertices[elem[0]],
                    mesh.vertices[elem[1]],
                    mesh.vertices[elem[2]],
                ];
                let mut longest: f64 = 0.0;
                for a in 0..3 {
                    let b = (a + 1) % 3;
                    let e = [pts[b][0] - pts[a][0], pts[b][1] - pts[a][1]];
                    longest = longest.max((e[0] * e[0] + e[1] * e[1]).sqrt());
                }
                let area = mesh.element_measure(k);
                h = h.max(longest);
                h_min = h_min.min(longest);
                // minimum altitude is 2|K| over the longest edge
                kappa_h = kappa_h.min(2.0 * area / longest);
                // angle at vertex a is <= pi/2 iff the edges from a have a
                // nonnegative dot product
                for a in 0..3 {
                    let (b, c) = ((a + 1) % 3, (a + 2) % 3);
                    let u = [pts[b][0] - pts[a][0], pts[b][1] - pts[a][1]];
                    let v = [pts[c][0] - pts[a][0], pts[c][1] - pts[a][1]];
                    if u[0] * v[0] + u[1] * v[1] < -1e-14 * longest * longest {
                        is_acute = false;
                    }
                }
            }
            _ => unreachable!(),
        }
    }

    let g_h = mesh
        .neighbor_sets
        .iter()
        .map(|s| s.len())
        .max()
        .unwrap_or(0);

    MeshQuality {
        h,
        kappa_h,
        g_h,
        is_acute,
        quasi_uniform_ratio: h / h_min,
    }
}
