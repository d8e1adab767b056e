//! Structured tetrahedral meshes of axis-aligned boxes.
//!
//! Every cell of an `n x n x n` grid is split into six tetrahedra that share
//! the cell's main diagonal (Freudenthal/Kuhn subdivision). The resulting
//! mesh is conforming, all tetrahedra are congruent, and the longest edge of
//! each one is the cell diagonal.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use crate::error::{MhdError, Result};
use crate::geometry::{sub, Point};

/// Local edge table: `(a, b)` vertex pairs with `a < b`.
pub const LOCAL_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Local face `i` is the face opposite vertex `i`.
pub const LOCAL_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain {
    pub min: Point,
    pub max: Point,
}

impl BoxDomain {
    pub fn unit_cube() -> Self {
        Self {
            min: [0.0; 3],
            max: [1.0; 3],
        }
    }

    pub fn extents(&self) -> Point {
        sub(&self.max, &self.min)
    }

    pub fn volume(&self) -> f64 {
        let e = self.extents();
        e[0] * e[1] * e[2]
    }
}

impl Default for BoxDomain {
    fn default() -> Self {
        Self::unit_cube()
    }
}

/// Boundary entity sets of a mesh, as membership masks.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySets {
    pub faces: Vec<bool>,
    pub edges: Vec<bool>,
    pub vertices: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct TetMesh {
    pub vertices: Vec<Point>,
    pub tets: Vec<[usize; 4]>,
    /// Global edges, endpoints in ascending order.
    pub edges: Vec<[usize; 2]>,
    /// Global faces, vertex indices sorted ascending.
    pub faces: Vec<[usize; 3]>,
    /// Per tet: global edge index for each entry of [`LOCAL_EDGES`].
    pub tet_edges: Vec<[usize; 6]>,
    /// Per tet: `+1` when the local edge direction (low local index to high)
    /// matches the global direction (low global index to high), else `-1`.
    pub tet_edge_signs: Vec<[f64; 6]>,
    /// Per tet: global face index for each entry of [`LOCAL_FACES`].
    pub tet_faces: Vec<[usize; 4]>,
    pub boundary: BoundarySets,
    pub h_max: f64,
    pub domain: BoxDomain,
    /// Grid subdivision parameter.
    pub n: usize,
}

/// Build the Freudenthal mesh of `domain` with `n` cells per direction.
pub fn build_box_mesh(n: usize, domain: BoxDomain) -> Result<TetMesh> {
    if n == 0 {
        return Err(MhdError::InvalidArgument(
            "mesh subdivision n must be at least 1".into(),
        ));
    }
    let ext = domain.extents();
    if ext.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(MhdError::InvalidArgument(format!(
            "box must have positive extents, got {ext:?}"
        )));
    }

    let np = n + 1;
    let vid = |i: usize, j: usize, k: usize| i + np * (j + np * k);
    let mut vertices = Vec::with_capacity(np * np * np);
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                vertices.push([
                    domain.min[0] + ext[0] * i as f64 / n as f64,
                    domain.min[1] + ext[1] * j as f64 / n as f64,
                    domain.min[2] + ext[2] * k as f64 / n as f64,
                ]);
            }
        }
    }

    // Each permutation of the axes gives one monotone lattice path from the
    // cell's lowest corner to its highest one.
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut tets = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for perm in PERMS {
                    let mut c = [i, j, k];
                    let mut tet = [vid(c[0], c[1], c[2]), 0, 0, 0];
                    for (step, &axis) in perm.iter().enumerate() {
                        c[axis] += 1;
                        tet[step + 1] = vid(c[0], c[1], c[2]);
                    }
                    if signed_volume(&vertices, &tet) < 0.0 {
                        tet.swap(2, 3);
                    }
                    tets.push(tet);
                }
            }
        }
    }

    let mut edge_index: HashMap<[usize; 2], usize> = HashMap::with_capacity(7 * n * n * n + 8 * n * n);
    let mut edges = Vec::new();
    let mut tet_edges = Vec::with_capacity(tets.len());
    let mut tet_edge_signs = Vec::with_capacity(tets.len());
    let mut face_index: HashMap<[usize; 3], usize> = HashMap::with_capacity(13 * n * n * n);
    let mut faces = Vec::new();
    let mut face_count: Vec<u8> = Vec::new();
    let mut tet_faces = Vec::with_capacity(tets.len());

    for tet in &tets {
        let mut te = [0usize; 6];
        let mut ts = [1.0f64; 6];
        for (le, &(a, b)) in LOCAL_EDGES.iter().enumerate() {
            let (ga, gb) = (tet[a], tet[b]);
            let key = if ga < gb { [ga, gb] } else { [gb, ga] };
            let next = edges.len();
            let id = *edge_index.entry(key).or_insert(next);
            if id == next {
                edges.push(key);
            }
            te[le] = id;
            ts[le] = if ga < gb { 1.0 } else { -1.0 };
        }
        tet_edges.push(te);
        tet_edge_signs.push(ts);

        let mut tf = [0usize; 4];
        for (lf, local) in LOCAL_FACES.iter().enumerate() {
            let mut key = [tet[local[0]], tet[local[1]], tet[local[2]]];
            key.sort_unstable();
            let next = faces.len();
            let id = *face_index.entry(key).or_insert(next);
            if id == next {
                faces.push(key);
                face_count.push(0);
            }
            face_count[id] += 1;
            tf[lf] = id;
        }
        tet_faces.push(tf);
    }

    let h_max = tets
        .iter()
        .flat_map(|t| {
            LOCAL_EDGES
                .iter()
                .map(|&(a, b)| crate::geometry::norm(&sub(&vertices[t[b]], &vertices[t[a]])))
        })
        .fold(0.0, f64::max);

    let boundary_faces: Vec<bool> = face_count.iter().map(|&c| c == 1).collect();
    let mut mesh = TetMesh {
        vertices,
        tets,
        edges,
        faces,
        tet_edges,
        tet_edge_signs,
        tet_faces,
        boundary: BoundarySets {
            faces: boundary_faces,
            edges: Vec::new(),
            vertices: Vec::new(),
        },
        h_max,
        domain,
        n,
    };
    mesh.boundary = classify_boundary(&mesh);
    Ok(mesh)
}

/// Derive boundary edges and vertices from the boundary faces: an entity is
/// on the boundary iff it lies on some face owned by exactly one tet.
pub fn classify_boundary(mesh: &TetMesh) -> BoundarySets {
    let mut face_count = vec![0u8; mesh.faces.len()];
    for tf in &mesh.tet_faces {
        for &f in tf {
            face_count[f] += 1;
        }
    }
    let faces: Vec<bool> = face_count.iter().map(|&c| c == 1).collect();

    let mut vertices = vec![false; mesh.vertices.len()];
    for (f, verts) in mesh.faces.iter().enumerate() {
        if faces[f] {
            for &v in verts {
                vertices[v] = true;
            }
        }
    }
    // A face's edges are boundary edges; collect them through the owning tets.
    let mut edges = vec![false; mesh.edges.len()];
    for (t, tf) in mesh.tet_faces.iter().enumerate() {
        for (lf, &f) in tf.iter().enumerate() {
            if !faces[f] {
                continue;
            }
            let local = LOCAL_FACES[lf];
            for (le, &(a, b)) in LOCAL_EDGES.iter().enumerate() {
                if local.contains(&a) && local.contains(&b) {
                    edges[mesh.tet_edges[t][le]] = true;
                }
            }
        }
    }
    BoundarySets {
        faces,
        edges,
        vertices,
    }
}

pub(crate) fn signed_volume(vertices: &[Point], tet: &[usize; 4]) -> f64 {
    let p0 = vertices[tet[0]];
    let a = sub(&vertices[tet[1]], &p0);
    let b = sub(&vertices[tet[2]], &p0);
    let c = sub(&vertices[tet[3]], &p0);
    crate::geometry::dot(&a, &crate::geometry::cross(&b, &c)) / 6.0
}

impl TetMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        signed_volume(&self.vertices, &self.tets[t])
    }

    pub fn tet_points(&self, t: usize) -> [Point; 4] {
        let tet = &self.tets[t];
        [
            self.vertices[tet[0]],
            self.vertices[tet[1]],
            self.vertices[tet[2]],
            self.vertices[tet[3]],
        ]
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.edges[e];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [
            0.5 * (pa[0] + pb[0]),
            0.5 * (pa[1] + pb[1]),
            0.5 * (pa[2] + pb[2]),
        ]
    }

    pub fn n_boundary_vertices(&self) -> usize {
        self.boundary.vertices.iter().filter(|&&b| b).count()
    }

    /// Write the mesh as a legacy ASCII VTK unstructured grid (cell type 10).
    pub fn write_vtk(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        crate::vtk::write_grid_header(&mut out, self, "tetrahedral mesh")?;
        out.flush()?;
        Ok(())
    }
}
