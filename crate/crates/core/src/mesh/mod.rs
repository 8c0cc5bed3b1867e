//! Conforming tetrahedral meshes of the unit cube.
//!
//! Cells are stored in a canonical local vertex order: ascending global
//! vertex index, with the last two vertices swapped when that is needed for a
//! positive Jacobian. Global edges run from the lower to the higher vertex
//! index and global faces are oriented by their sorted vertex triple, so every
//! local edge agrees with its global edge except possibly local edge (2,3),
//! and every local face triple is either the sorted triple or the sorted
//! triple with its last two entries swapped.

mod gmsh;

pub use gmsh::read_gmsh_v2;

use crate::error::{Error, Result};
use crate::geom::{self, Mat3, Vec3};

/// Local edges as pairs of local vertices.
pub const LOCAL_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// Local faces; face `i` is opposite local vertex `i`.
pub const LOCAL_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

/// Affine map `x = origin + J x̂` from the reference tetrahedron.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub origin: Vec3,
    pub jacobian: Mat3,
    pub det: f64,
    pub inverse: Mat3,
}

impl CellGeometry {
    pub fn volume(&self) -> f64 {
        self.det / 6.0
    }

    /// `J⁻ᵀ`
    pub fn inverse_transpose(&self) -> Mat3 {
        geom::transpose(&self.inverse)
    }

    pub fn map(&self, xref: &Vec3) -> Vec3 {
        geom::add(&self.origin, &geom::matvec(&self.jacobian, xref))
    }

    pub fn pullback(&self, x: &Vec3) -> Vec3 {
        geom::matvec(&self.inverse, &geom::sub(x, &self.origin))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BoundaryEntities {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
    pub faces: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    cells: Vec<[usize; 4]>,
    edges: Vec<[usize; 2]>,
    faces: Vec<[usize; 3]>,
    cell_edges: Vec<[usize; 6]>,
    cell_edge_signs: Vec<[i8; 6]>,
    cell_faces: Vec<[usize; 4]>,
    cell_face_signs: Vec<[i8; 4]>,
    face_cells: Vec<(usize, Option<usize>)>,
    boundary_vertex: Vec<bool>,
    boundary_edge: Vec<bool>,
    boundary_face: Vec<bool>,
}

impl Mesh {
    /// Kuhn subdivision of `n³` subcubes of the unit cube, six tetrahedra each.
    pub fn structured_cube(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: "at least one subdivision per axis is required".into(),
            });
        }
        let np = n + 1;
        let index = |i: usize, j: usize, k: usize| i + np * (j + np * k);
        let h = 1.0 / n as f64;
        let mut vertices = Vec::with_capacity(np * np * np);
        for k in 0..np {
            for j in 0..np {
                for i in 0..np {
                    vertices.push([i as f64 * h, j as f64 * h, k as f64 * h]);
                }
            }
        }
        const PERMUTATIONS: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let mut cells = Vec::with_capacity(6 * n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    for perm in PERMUTATIONS {
                        let mut p = [i, j, k];
                        let mut tet = [index(i, j, k); 4];
                        for (step, axis) in perm.iter().enumerate() {
                            p[*axis] += 1;
                            tet[step + 1] = index(p[0], p[1], p[2]);
                        }
                        cells.push(tet);
                    }
                }
            }
        }
        Self::from_cells(vertices, cells)
    }

    /// Builds the full topology from vertex coordinates and tetrahedra given
    /// in any vertex order.
    pub fn from_cells(vertices: Vec<Vec3>, raw_cells: Vec<[usize; 4]>) -> Result<Self> {
        let nv = vertices.len();
        let mut cells = Vec::with_capacity(raw_cells.len());
        for (c, raw) in raw_cells.iter().enumerate() {
            let mut tet = *raw;
            if tet.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!(
                    "cell {c} references a vertex outside 0..{nv}"
                )));
            }
            tet.sort_unstable();
            if tet.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidMesh(format!("cell {c} repeats a vertex")));
            }
            let det = signed_det(&vertices, &tet);
            let scale = edge_scale(&vertices, &tet).powi(3);
            if det.abs() <= 1e-12 * scale {
                return Err(Error::DegenerateCell { cell: c, det });
            }
            if det < 0.0 {
                tet.swap(2, 3);
            }
            cells.push(tet);
        }

        let mut edges: Vec<[usize; 2]> = Vec::with_capacity(cells.len() * 6);
        let mut faces: Vec<[usize; 3]> = Vec::with_capacity(cells.len() * 4);
        for tet in &cells {
            for le in LOCAL_EDGES {
                edges.push(sorted2([tet[le[0]], tet[le[1]]]));
            }
            for lf in LOCAL_FACES {
                faces.push(sorted3([tet[lf[0]], tet[lf[1]], tet[lf[2]]]));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        faces.sort_unstable();
        faces.dedup();

        let mut cell_edges = Vec::with_capacity(cells.len());
        let mut cell_edge_signs = Vec::with_capacity(cells.len());
        let mut cell_faces = Vec::with_capacity(cells.len());
        let mut cell_face_signs = Vec::with_capacity(cells.len());
        let mut face_cells: Vec<(usize, Option<usize>)> = vec![(usize::MAX, None); faces.len()];
        for (c, tet) in cells.iter().enumerate() {
            let mut ce = [0; 6];
            let mut cs = [0i8; 6];
            for (i, le) in LOCAL_EDGES.iter().enumerate() {
                let (a, b) = (tet[le[0]], tet[le[1]]);
                ce[i] = edges.binary_search(&sorted2([a, b])).expect("edge was collected");
                cs[i] = if a < b { 1 } else { -1 };
            }
            let mut cf = [0; 4];
            let mut fs = [0i8; 4];
            for (i, lf) in LOCAL_FACES.iter().enumerate() {
                let triple = [tet[lf[0]], tet[lf[1]], tet[lf[2]]];
                let f = faces.binary_search(&sorted3(triple)).expect("face was collected");
                cf[i] = f;
                fs[i] = permutation_parity(&triple);
                let slot = &mut face_cells[f];
                if slot.0 == usize::MAX {
                    slot.0 = c;
                } else if slot.1.is_none() {
                    slot.1 = Some(c);
                } else {
                    return Err(Error::InvalidMesh(format!(
                        "face {:?} is shared by more than two cells",
                        faces[f]
                    )));
                }
            }
            cell_edges.push(ce);
            cell_edge_signs.push(cs);
            cell_faces.push(cf);
            cell_face_signs.push(fs);
        }

        let mut boundary_vertex = vec![false; nv];
        let mut boundary_edge = vec![false; edges.len()];
        let mut boundary_face = vec![false; faces.len()];
        for (f, fc) in face_cells.iter().enumerate() {
            if fc.1.is_some() {
                continue;
            }
            boundary_face[f] = true;
            let [a, b, c] = faces[f];
            for v in [a, b, c] {
                boundary_vertex[v] = true;
            }
            for e in [[a, b], [a, c], [b, c]] {
                let idx = edges.binary_search(&e).expect("face edge exists");
                boundary_edge[idx] = true;
            }
        }

        Ok(Self {
            vertices,
            cells,
            edges,
            faces,
            cell_edges,
            cell_edge_signs,
            cell_faces,
            cell_face_signs,
            face_cells,
            boundary_vertex,
            boundary_edge,
            boundary_face,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Vec3 {
        self.vertices[v]
    }

    /// Cells in canonical local vertex order.
    pub fn cells(&self) -> &[[usize; 4]] {
        &self.cells
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn cell_edges(&self, cell: usize) -> &[usize; 6] {
        &self.cell_edges[cell]
    }

    /// `+1` where the local edge runs in the global direction.
    pub fn cell_edge_signs(&self, cell: usize) -> &[i8; 6] {
        &self.cell_edge_signs[cell]
    }

    pub fn cell_faces(&self, cell: usize) -> &[usize; 4] {
        &self.cell_faces[cell]
    }

    /// `+1` where the local face triple induces the global face normal.
    pub fn cell_face_signs(&self, cell: usize) -> &[i8; 4] {
        &self.cell_face_signs[cell]
    }

    /// `+1` if the global normal of local face `local` points out of `cell`.
    pub fn outward_sign(&self, cell: usize, local: usize) -> i8 {
        let tet = &self.cells[cell];
        let [a, b, c] = self.faces[self.cell_faces[cell][local]];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let normal = geom::cross(&geom::sub(&pb, &pa), &geom::sub(&pc, &pa));
        let to_opposite = geom::sub(&self.vertices[tet[local]], &pa);
        if geom::dot(&normal, &to_opposite) < 0.0 {
            1
        } else {
            -1
        }
    }

    /// The one or two cells containing `face`.
    pub fn face_cells(&self, face: usize) -> (usize, Option<usize>) {
        self.face_cells[face]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary_edge[e]
    }

    pub fn is_boundary_face(&self, f: usize) -> bool {
        self.boundary_face[f]
    }

    pub fn boundary_entities(&self) -> BoundaryEntities {
        let pick = |flags: &[bool]| {
            flags
                .iter()
                .enumerate()
                .filter_map(|(i, &b)| b.then_some(i))
                .collect()
        };
        BoundaryEntities {
            vertices: pick(&self.boundary_vertex),
            edges: pick(&self.boundary_edge),
            faces: pick(&self.boundary_face),
        }
    }

    pub fn cell_geometry(&self, cell: usize) -> Result<CellGeometry> {
        let tet = &self.cells[cell];
        let origin = self.vertices[tet[0]];
        let mut jacobian = [[0.0; 3]; 3];
        for col in 0..3 {
            let d = geom::sub(&self.vertices[tet[col + 1]], &origin);
            for row in 0..3 {
                jacobian[row][col] = d[row];
            }
        }
        let det = geom::det3(&jacobian);
        if det <= 0.0 {
            return Err(Error::DegenerateCell { cell, det });
        }
        Ok(CellGeometry {
            origin,
            jacobian,
            det,
            inverse: geom::inv3(&jacobian, det),
        })
    }

    /// Geometry of every cell; construction guarantees positive volumes.
    pub fn geometries(&self) -> Vec<CellGeometry> {
        (0..self.num_cells())
            .map(|c| self.cell_geometry(c).expect("mesh cells are positively oriented"))
            .collect()
    }

    /// Largest cell diameter.
    pub fn h(&self) -> f64 {
        self.cells
            .iter()
            .map(|tet| edge_scale(&self.vertices, tet))
            .fold(0.0, f64::max)
    }

    /// Euler characteristic `V - E + F - T`.
    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_faces() as i64
            - self.num_cells() as i64
    }
}

fn sorted2(mut e: [usize; 2]) -> [usize; 2] {
    e.sort_unstable();
    e
}

fn sorted3(mut f: [usize; 3]) -> [usize; 3] {
    f.sort_unstable();
    f
}

fn permutation_parity(t: &[usize; 3]) -> i8 {
    let inversions = (t[0] > t[1]) as u8 + (t[0] > t[2]) as u8 + (t[1] > t[2]) as u8;
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

fn signed_det(vertices: &[Vec3], tet: &[usize; 4]) -> f64 {
    let o = vertices[tet[0]];
    let a = geom::sub(&vertices[tet[1]], &o);
    let b = geom::sub(&vertices[tet[2]], &o);
    let c = geom::sub(&vertices[tet[3]], &o);
    geom::dot(&a, &geom::cross(&b, &c))
}

fn edge_scale(vertices: &[Vec3], tet: &[usize; 4]) -> f64 {
    LOCAL_EDGES
        .iter()
        .map(|e| geom::norm(&geom::sub(&vertices[tet[e[0]]], &vertices[tet[e[1]]])))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cube_counts() {
        let m = Mesh::structured_cube(1).unwrap();
        assert_eq!(
            (m.num_vertices(), m.num_edges(), m.num_faces(), m.num_cells()),
            (8, 19, 18, 6)
        );
        assert_eq!(m.euler_characteristic(), 1);
        assert_eq!(m.boundary_entities().vertices.len(), 8);
    }

    #[test]
    fn two_cube_counts() {
        let m = Mesh::structured_cube(2).unwrap();
        assert_eq!(m.num_vertices(), 27);
        assert_eq!(m.num_cells(), 48);
        let b = m.boundary_entities();
        assert_eq!(b.vertices.len(), 26);
        assert!(!m.is_boundary_vertex(13));
        assert_eq!(b.faces.len(), 48);
    }

    #[test]
    fn rejects_zero_subdivisions() {
        assert!(Mesh::structured_cube(0).is_err());
    }

    #[test]
    fn reference_cell_volume() {
        let m = Mesh::from_cells(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            vec![[3, 1, 0, 2]],
        )
        .unwrap();
        let g = m.cell_geometry(0).unwrap();
        assert!((g.volume() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_cell_is_rejected() {
        let err = Mesh::from_cells(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]],
            vec![[0, 1, 2, 3]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateCell { .. }));
    }

    #[test]
    fn canonical_local_orientation() {
        let m = Mesh::structured_cube(3).unwrap();
        for c in 0..m.num_cells() {
            let signs = m.cell_edge_signs(c);
            assert!(signs[..5].iter().all(|&s| s == 1));
            let fs = m.cell_face_signs(c);
            assert_eq!(fs[2], 1);
            assert_eq!(fs[3], 1);
            assert_eq!(fs[0], signs[5]);
            assert_eq!(fs[1], signs[5]);
        }
    }

    #[test]
    fn structured_volumes() {
        let n = 3;
        let m = Mesh::structured_cube(n).unwrap();
        let want = 1.0 / (6.0 * (n * n * n) as f64);
        let mut total = 0.0;
        for c in 0..m.num_cells() {
            let v = m.cell_geometry(c).unwrap().volume();
            assert!((v - want).abs() < 1e-15);
            total += v;
        }
        assert!((total - 1.0).abs() < 1e-14);
        assert!((m.h() - 3f64.sqrt() / n as f64).abs() < 1e-14);
    }
}
