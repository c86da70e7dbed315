//! Conforming triangulations of the unit square with local refinement by
//! newest-vertex bisection.
//!
//! Cells are stored as vertex triples `[a, b, p]` in counter-clockwise order
//! where `(a, b)` is the refinement edge and `p` the peak (newest vertex).
//! Bisecting at the midpoint `m` of `(a, b)` produces the children
//! `[p, a, m]` and `[b, p, m]`, so the new vertex is the peak of both and the
//! children's refinement edges are the former flanks. On the criss-cross
//! initial mesh every refinement edge is a hypotenuse, which keeps all
//! descendants right isosceles and makes conformity closure terminate after
//! bounded recursion.
//!
//! A mesh is immutable once built; `refine` returns a new mesh, so meshes
//! can be shared read-only across threads. Refinement itself is sequential
//! and deterministic.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};
use std::num::NonZeroUsize;

use thiserror::Error;

/// Recursion budget for conformity closure. Legitimate closure chains are
/// bounded by the generation spread of the mesh; running past this cap means
/// the refinement-edge assignment is inconsistent.
pub const CLOSURE_DEPTH_CAP: u32 = 4096;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("marked cell index {0} is out of range")]
    InvalidCellIndex(usize),
    #[error("conformity closure exceeded depth {cap} at cell {cell}: malformed refinement-edge assignment")]
    ClosureDepthExceeded { cell: usize, cap: u32 },
    #[error("cell {0} is degenerate (non-positive area): mesh is corrupt")]
    DegenerateCell(usize),
    #[error("edge {0:?} is incident to {1} cells")]
    NonManifoldEdge([usize; 2], usize),
    #[error("interior-like edge {0:?} has a single incident cell (hanging vertex?)")]
    HangingEdge([usize; 2]),
}

/// Undirected mesh edge with its incident cells.
#[derive(Clone, Copy, Debug)]
pub struct Edge {
    /// Endpoint vertex indices, sorted ascending.
    pub vertices: [usize; 2],
    /// Incident cells; interior edges have two, boundary edges one.
    pub cells: [Option<usize>; 2],
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.cells[1].is_none()
    }
}

/// Conforming triangulation of the unit square.
#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    cells: Vec<[usize; 3]>,
    generation: Vec<u32>,
    edges: Vec<Edge>,
    edge_lookup: HashMap<[usize; 2], usize>,
}

/// Cells flagged for refinement; sorted and deduplicated.
#[derive(Clone, Debug, Default)]
pub struct MarkedSet {
    indices: Vec<usize>,
}

impl MarkedSet {
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Self {
        let mut indices: Vec<usize> = indices.into_iter().collect();
        indices.sort_unstable();
        indices.dedup();
        MarkedSet { indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Geometry of one cell used by assembly and the edge-jump estimator.
///
/// Entry `i` of `grads` is the constant gradient of the barycentric
/// coordinate of local vertex `i`; entry `i` of `normals`/`edge_lengths`
/// refers to the edge opposite local vertex `i`.
#[derive(Clone, Copy, Debug)]
pub struct CellGeometry {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
    pub normals: [[f64; 2]; 3],
    pub edge_lengths: [f64; 3],
}

/// Map from the vertices of a refined mesh back to the parent mesh: vertices
/// below `old_vertex_count` are unchanged, vertex `old_vertex_count + i` is
/// the midpoint of the edge `parents[i]`.
#[derive(Clone, Debug)]
pub struct Prolongation {
    pub old_vertex_count: usize,
    pub parents: Vec<[usize; 2]>,
}

impl Prolongation {
    /// Interpolate nodal values from the parent mesh onto the refined mesh.
    /// Exact for globally affine functions.
    pub fn prolong(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.old_vertex_count);
        let mut out = Vec::with_capacity(self.old_vertex_count + self.parents.len());
        out.extend_from_slice(values);
        for pair in &self.parents {
            let v = 0.5 * (out[pair[0]] + out[pair[1]]);
            out.push(v);
        }
        out
    }
}

impl Mesh {
    fn from_parts(vertices: Vec<[f64; 2]>, cells: Vec<[usize; 3]>, generation: Vec<u32>) -> Self {
        let (edges, edge_lookup) = build_edges(&cells);
        Mesh {
            vertices,
            cells,
            generation,
            edges,
            edge_lookup,
        }
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn generation(&self, cell: usize) -> u32 {
        self.generation[cell]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Refinement edge of a cell: its first two vertices, sorted.
    pub fn refinement_edge(&self, cell: usize) -> [usize; 2] {
        let [a, b, _] = self.cells[cell];
        sorted_pair(a, b)
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&sorted_pair(a, b)).copied()
    }

    pub fn cell_geometry(&self, cell: usize) -> Result<CellGeometry, MeshError> {
        let idx = self
            .cells
            .get(cell)
            .ok_or(MeshError::InvalidCellIndex(cell))?;
        let p: [[f64; 2]; 3] = [
            self.vertices[idx[0]],
            self.vertices[idx[1]],
            self.vertices[idx[2]],
        ];
        let two_area = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
            - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]);
        if two_area <= 0.0 {
            return Err(MeshError::DegenerateCell(cell));
        }
        let area = 0.5 * two_area;
        let mut grads = [[0.0; 2]; 3];
        let mut normals = [[0.0; 2]; 3];
        let mut edge_lengths = [0.0; 3];
        for i in 0..3 {
            // Edge opposite vertex i runs from vertex i+1 to vertex i+2.
            let e = [
                p[(i + 2) % 3][0] - p[(i + 1) % 3][0],
                p[(i + 2) % 3][1] - p[(i + 1) % 3][1],
            ];
            // Rotating the CCW-directed edge by +90 degrees points inward.
            grads[i] = [-e[1] / two_area, e[0] / two_area];
            let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
            edge_lengths[i] = len;
            normals[i] = [e[1] / len, -e[0] / len];
        }
        Ok(CellGeometry {
            area,
            grads,
            normals,
            edge_lengths,
        })
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        let idx = self.cells[cell];
        let p: [[f64; 2]; 3] = [
            self.vertices[idx[0]],
            self.vertices[idx[1]],
            self.vertices[idx[2]],
        ];
        0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
            - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.cell_area(c)).sum()
    }

    /// Constant gradient on a cell of the P1 interpolant of `values`.
    pub fn cell_gradient(&self, cell: usize, values: &[f64]) -> Result<[f64; 2], MeshError> {
        let geo = self.cell_geometry(cell)?;
        let idx = self.cells[cell];
        let mut g = [0.0; 2];
        for i in 0..3 {
            g[0] += values[idx[i]] * geo.grads[i][0];
            g[1] += values[idx[i]] * geo.grads[i][1];
        }
        Ok(g)
    }

    /// Conformity audit: positive areas, every edge incident to one or two
    /// cells, and every single-incidence edge lying on the boundary of the
    /// unit square (which rules out hanging vertices).
    pub fn check_conformity(&self) -> Result<(), MeshError> {
        for c in 0..self.num_cells() {
            self.cell_geometry(c)?;
        }
        for edge in &self.edges {
            if edge.cells[0].is_none() {
                return Err(MeshError::NonManifoldEdge(edge.vertices, 0));
            }
            if edge.is_boundary() && !self.edge_on_unit_square_boundary(edge) {
                return Err(MeshError::HangingEdge(edge.vertices));
            }
        }
        Ok(())
    }

    fn edge_on_unit_square_boundary(&self, edge: &Edge) -> bool {
        let a = self.vertices[edge.vertices[0]];
        let b = self.vertices[edge.vertices[1]];
        let on = |v: f64, w: f64| (v - w).abs() < 1e-12;
        (on(a[0], 0.0) && on(b[0], 0.0))
            || (on(a[0], 1.0) && on(b[0], 1.0))
            || (on(a[1], 0.0) && on(b[1], 0.0))
            || (on(a[1], 1.0) && on(b[1], 1.0))
    }

    /// Minimum interior angle over all cells, in radians.
    pub fn min_angle(&self) -> f64 {
        let mut min = f64::INFINITY;
        for idx in &self.cells {
            let p: [[f64; 2]; 3] = [
                self.vertices[idx[0]],
                self.vertices[idx[1]],
                self.vertices[idx[2]],
            ];
            for i in 0..3 {
                let u = [p[(i + 1) % 3][0] - p[i][0], p[(i + 1) % 3][1] - p[i][1]];
                let v = [p[(i + 2) % 3][0] - p[i][0], p[(i + 2) % 3][1] - p[i][1]];
                let dot = u[0] * v[0] + u[1] * v[1];
                let nu = (u[0] * u[0] + u[1] * u[1]).sqrt();
                let nv = (v[0] * v[0] + v[1] * v[1]).sqrt();
                let angle = (dot / (nu * nv)).clamp(-1.0, 1.0).acos();
                min = min.min(angle);
            }
        }
        min
    }

    /// Plain-text mesh dump for debugging and visualisation.
    ///
    /// Format: one header line `vertices N cells M`, then N lines `x y`,
    /// then M lines `i j k` with 0-based vertex indices.
    pub fn write_dump<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "vertices {} cells {}", self.num_vertices(), self.num_cells())?;
        for v in &self.vertices {
            writeln!(w, "{} {}", v[0], v[1])?;
        }
        for c in &self.cells {
            writeln!(w, "{} {} {}", c[0], c[1], c[2])?;
        }
        Ok(())
    }
}

fn sorted_pair(a: usize, b: usize) -> [usize; 2] {
    if a <= b { [a, b] } else { [b, a] }
}

fn build_edges(cells: &[[usize; 3]]) -> (Vec<Edge>, HashMap<[usize; 2], usize>) {
    let mut incidence: BTreeMap<[usize; 2], Vec<usize>> = BTreeMap::new();
    for (c, idx) in cells.iter().enumerate() {
        for e in 0..3 {
            let key = sorted_pair(idx[e], idx[(e + 1) % 3]);
            incidence.entry(key).or_default().push(c);
        }
    }
    let mut edges = Vec::with_capacity(incidence.len());
    let mut lookup = HashMap::with_capacity(incidence.len());
    for (key, cells) in incidence {
        lookup.insert(key, edges.len());
        edges.push(Edge {
            vertices: key,
            cells: [cells.first().copied(), cells.get(1).copied()],
        });
    }
    (edges, lookup)
}

/// Structured criss-cross mesh of the unit square with `(n0+1)^2` vertices
/// and `2*n0^2` triangles.
///
/// Each grid square is split along one diagonal; the diagonal direction
/// alternates checkerboard-fashion so that the mesh is symmetric under the
/// reflections of the square (for even `n0`). Every refinement edge is a
/// hypotenuse.
pub fn unit_square_mesh(n0: NonZeroUsize) -> Mesh {
    let n = n0.get();
    let h = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 * h, j as f64 * h]);
        }
    }
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let ll = vid(i, j);
            let lr = vid(i + 1, j);
            let ul = vid(i, j + 1);
            let ur = vid(i + 1, j + 1);
            if (i + j) % 2 == 0 {
                // Diagonal from lower-left to upper-right.
                cells.push([ur, ll, lr]);
                cells.push([ll, ur, ul]);
            } else {
                // Diagonal from lower-right to upper-left.
                cells.push([lr, ul, ll]);
                cells.push([ul, lr, ur]);
            }
        }
    }
    let generation = vec![0; cells.len()];
    Mesh::from_parts(vertices, cells, generation)
}

struct RefineState {
    vertices: Vec<[f64; 2]>,
    cells: Vec<[usize; 3]>,
    generation: Vec<u32>,
    alive: Vec<bool>,
    edge_cells: HashMap<[usize; 2], Vec<usize>>,
    midpoints: HashMap<[usize; 2], usize>,
    parents: Vec<[usize; 2]>,
}

impl RefineState {
    fn new(mesh: &Mesh) -> Self {
        let mut edge_cells: HashMap<[usize; 2], Vec<usize>> = HashMap::new();
        for (c, idx) in mesh.cells.iter().enumerate() {
            for e in 0..3 {
                let key = sorted_pair(idx[e], idx[(e + 1) % 3]);
                edge_cells.entry(key).or_default().push(c);
            }
        }
        RefineState {
            vertices: mesh.vertices.clone(),
            cells: mesh.cells.clone(),
            generation: mesh.generation.clone(),
            alive: vec![true; mesh.cells.len()],
            edge_cells,
            midpoints: HashMap::new(),
            parents: Vec::new(),
        }
    }

    fn neighbor_across(&self, edge: [usize; 2], cell: usize) -> Option<usize> {
        self.edge_cells
            .get(&edge)?
            .iter()
            .copied()
            .find(|&c| c != cell)
    }

    fn midpoint_vertex(&mut self, edge: [usize; 2]) -> usize {
        if let Some(&v) = self.midpoints.get(&edge) {
            return v;
        }
        let a = self.vertices[edge[0]];
        let b = self.vertices[edge[1]];
        let v = self.vertices.len();
        self.vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
        self.midpoints.insert(edge, v);
        self.parents.push(edge);
        v
    }

    fn detach(&mut self, cell: usize) {
        let idx = self.cells[cell];
        for e in 0..3 {
            let key = sorted_pair(idx[e], idx[(e + 1) % 3]);
            if let Some(list) = self.edge_cells.get_mut(&key) {
                list.retain(|&c| c != cell);
            }
        }
    }

    fn attach(&mut self, cell: usize) {
        let idx = self.cells[cell];
        for e in 0..3 {
            let key = sorted_pair(idx[e], idx[(e + 1) % 3]);
            self.edge_cells.entry(key).or_default().push(cell);
        }
    }

    /// Split a single cell across its refinement edge at vertex `m`.
    fn split(&mut self, cell: usize, m: usize) {
        let [a, b, p] = self.cells[cell];
        let gen = self.generation[cell] + 1;
        self.detach(cell);
        self.alive[cell] = false;
        for child in [[p, a, m], [b, p, m]] {
            let id = self.cells.len();
            self.cells.push(child);
            self.generation.push(gen);
            self.alive.push(true);
            self.attach(id);
        }
    }

    /// Bisect `cell`, recursively bisecting neighbours first until the
    /// neighbour across the refinement edge is compatible.
    fn bisect(&mut self, cell: usize, depth: u32) -> Result<(), MeshError> {
        if depth >= CLOSURE_DEPTH_CAP {
            return Err(MeshError::ClosureDepthExceeded {
                cell,
                cap: CLOSURE_DEPTH_CAP,
            });
        }
        loop {
            if !self.alive[cell] {
                // Already bisected as a side effect of closure.
                return Ok(());
            }
            let [a, b, _] = self.cells[cell];
            let edge = sorted_pair(a, b);
            match self.neighbor_across(edge, cell) {
                Some(n) => {
                    let [na, nb, _] = self.cells[n];
                    if sorted_pair(na, nb) == edge {
                        let m = self.midpoint_vertex(edge);
                        self.split(cell, m);
                        self.split(n, m);
                        return Ok(());
                    }
                    self.bisect(n, depth + 1)?;
                }
                None => {
                    let m = self.midpoint_vertex(edge);
                    self.split(cell, m);
                    return Ok(());
                }
            }
        }
    }
}

/// Bisect every marked cell at least once and restore conformity by
/// recursive closure. Returns the refined mesh and the vertex prolongation
/// map; surviving cells keep their relative order, children are appended in
/// creation order.
pub fn refine(mesh: &Mesh, marked: &MarkedSet) -> Result<(Mesh, Prolongation), MeshError> {
    for &c in marked.indices() {
        if c >= mesh.num_cells() {
            return Err(MeshError::InvalidCellIndex(c));
        }
    }
    if marked.is_empty() {
        return Ok((
            mesh.clone(),
            Prolongation {
                old_vertex_count: mesh.num_vertices(),
                parents: Vec::new(),
            },
        ));
    }
    let mut state = RefineState::new(mesh);
    for &c in marked.indices() {
        state.bisect(c, 0)?;
    }
    let mut cells = Vec::new();
    let mut generation = Vec::new();
    for (c, idx) in state.cells.iter().enumerate() {
        if state.alive[c] {
            cells.push(*idx);
            generation.push(state.generation[c]);
        }
    }
    let prolongation = Prolongation {
        old_vertex_count: mesh.num_vertices(),
        parents: state.parents,
    };
    Ok((Mesh::from_parts(state.vertices, cells, generation), prolongation))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n0(n: usize) -> NonZeroUsize {
        NonZeroUsize::new(n).unwrap()
    }

    #[test]
    fn smallest_mesh_counts() {
        let mesh = unit_square_mesh(n0(1));
        assert_eq!(mesh.num_vertices(), 4);
        assert_eq!(mesh.num_cells(), 2);
        assert!((mesh.total_area() - 1.0).abs() < 1e-12);
        mesh.check_conformity().unwrap();
    }

    #[test]
    fn n0_four_counts() {
        let mesh = unit_square_mesh(n0(4));
        assert_eq!(mesh.num_vertices(), 25);
        assert_eq!(mesh.num_cells(), 32);
        assert!((mesh.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interior_edges_have_two_cells_on_n0_two() {
        let mesh = unit_square_mesh(n0(2));
        mesh.check_conformity().unwrap();
        for edge in mesh.edges() {
            let count = edge.cells.iter().filter(|c| c.is_some()).count();
            if mesh.edge_on_unit_square_boundary(edge) {
                assert_eq!(count, 1, "boundary edge {:?}", edge.vertices);
            } else {
                assert_eq!(count, 2, "interior edge {:?}", edge.vertices);
            }
        }
    }

    #[test]
    fn refine_both_cells_of_smallest_mesh() {
        let mesh = unit_square_mesh(n0(1));
        let marked = MarkedSet::new(0..2);
        let (fine, prol) = refine(&mesh, &marked).unwrap();
        assert_eq!(fine.num_cells(), 4);
        assert_eq!(fine.num_vertices(), 5);
        assert!((fine.total_area() - 1.0).abs() < 1e-12);
        assert_eq!(prol.parents.len(), 1);
        fine.check_conformity().unwrap();
    }

    #[test]
    fn refine_empty_marked_is_identity() {
        let mesh = unit_square_mesh(n0(2));
        let (same, prol) = refine(&mesh, &MarkedSet::default()).unwrap();
        assert_eq!(same.cells(), mesh.cells());
        assert_eq!(same.vertices(), mesh.vertices());
        assert!(prol.parents.is_empty());
    }

    #[test]
    fn refine_single_cell_stays_conforming() {
        let mesh = unit_square_mesh(n0(2));
        let (fine, _) = refine(&mesh, &MarkedSet::new([3])).unwrap();
        fine.check_conformity().unwrap();
        assert!((fine.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn refine_out_of_range_is_rejected() {
        let mesh = unit_square_mesh(n0(1));
        let err = refine(&mesh, &MarkedSet::new([17])).unwrap_err();
        assert!(matches!(err, MeshError::InvalidCellIndex(17)));
    }

    #[test]
    fn reference_cell_geometry() {
        let mesh = unit_square_mesh(n0(1));
        for c in 0..mesh.num_cells() {
            let geo = mesh.cell_geometry(c).unwrap();
            assert!(geo.area > 0.0);
            // Barycentric gradients form a partition of unity.
            let sum = [
                geo.grads[0][0] + geo.grads[1][0] + geo.grads[2][0],
                geo.grads[0][1] + geo.grads[1][1] + geo.grads[2][1],
            ];
            assert!(sum[0].abs() < 1e-14 && sum[1].abs() < 1e-14);
            for i in 0..3 {
                let n = geo.normals[i];
                assert!(((n[0] * n[0] + n[1] * n[1]).sqrt() - 1.0).abs() < 1e-14);
            }
            // Strict triangle inequality.
            let l = geo.edge_lengths;
            assert!(l[0] < l[1] + l[2] && l[1] < l[0] + l[2] && l[2] < l[0] + l[1]);
        }
    }

    #[test]
    fn outward_normals_point_away_from_opposite_vertex() {
        let mesh = unit_square_mesh(n0(2));
        for c in 0..mesh.num_cells() {
            let geo = mesh.cell_geometry(c).unwrap();
            let idx = mesh.cells()[c];
            for i in 0..3 {
                let opp = mesh.vertices()[idx[i]];
                let mid = {
                    let p = mesh.vertices()[idx[(i + 1) % 3]];
                    let q = mesh.vertices()[idx[(i + 2) % 3]];
                    [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
                };
                let to_opp = [opp[0] - mid[0], opp[1] - mid[1]];
                let dot = to_opp[0] * geo.normals[i][0] + to_opp[1] * geo.normals[i][1];
                assert!(dot < 0.0, "normal {i} of cell {c} points inward");
            }
        }
    }

    #[test]
    fn repeated_refinement_preserves_area_and_angles() {
        let mut mesh = unit_square_mesh(n0(2));
        let initial_min_angle = mesh.min_angle();
        // Deterministic pseudo-random marking.
        let mut seed = 0x9e3779b97f4a7c15u64;
        for _ in 0..6 {
            let mut marked = Vec::new();
            for c in 0..mesh.num_cells() {
                seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                if seed >> 62 == 0 {
                    marked.push(c);
                }
            }
            marked.push(0);
            let (fine, _) = refine(&mesh, &MarkedSet::new(marked)).unwrap();
            fine.check_conformity().unwrap();
            assert!((fine.total_area() - 1.0).abs() < 1e-12);
            assert!(fine.min_angle() >= 0.5 * initial_min_angle - 1e-12);
            mesh = fine;
        }
        // Newest-vertex bisection with hypotenuse refinement edges keeps all
        // cells right isosceles, so the minimum angle never leaves 45 degrees.
        assert!((mesh.min_angle() - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn prolongation_reproduces_affine_functions() {
        let mesh = unit_square_mesh(n0(3));
        let affine = |x: f64, y: f64| 0.75 - 2.0 * x + 0.5 * y;
        let coarse: Vec<f64> = mesh.vertices().iter().map(|v| affine(v[0], v[1])).collect();
        let (fine, prol) = refine(&mesh, &MarkedSet::new([0, 5, 7, 11])).unwrap();
        let prolonged = prol.prolong(&coarse);
        for (v, value) in fine.vertices().iter().zip(&prolonged) {
            assert!((value - affine(v[0], v[1])).abs() < 1e-13);
        }
    }

    #[test]
    fn dump_format() {
        let mesh = unit_square_mesh(n0(1));
        let mut buf = Vec::new();
        mesh.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "vertices 4 cells 2");
        assert_eq!(text.lines().count(), 1 + 4 + 2);
    }
}
