//! Conforming triangular meshes of rectangular domains with P1 nodal fields.
//!
//! The mesh is immutable after construction: all connectivity (incident
//! triangles, one-ring neighbourhoods, boundary edges) and element geometry
//! (areas, shape-function gradients, longest edges) are precomputed so that
//! queries and the recovery operators are read-only and safe to call from
//! multiple threads.

mod gmsh;
mod vtk;

pub use gmsh::import_gmsh;
pub use vtk::write_vtk;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid mesh dimensions: width={width}, height={height}, h={h}")]
    InvalidDimension { width: f64, height: f64, h: f64 },
    #[error("triangle {tri} has non-positive signed area {area}")]
    NonPositiveArea { tri: usize, area: f64 },
    #[error("non-conforming mesh: edge ({a}, {b}) shared by {count} triangles")]
    NonConforming { a: u32, b: u32, count: usize },
    #[error("triangle index {index} out of range ({len} triangles)")]
    TriangleIndex { index: usize, len: usize },
    #[error("node {node} lies outside the declared domain")]
    NodeOutsideDomain { node: usize },
    #[error("field has {got} values but mesh has {want} nodes")]
    FieldMeshMismatch { got: usize, want: usize },
    #[error("field component {comp} has non-finite value at node {node}")]
    NonFiniteField { comp: usize, node: usize },
    #[error("expected a {want:?} field, got {got:?}")]
    FieldKindMismatch { want: FieldKind, got: FieldKind },
    #[error("gmsh import: {0}")]
    Gmsh(#[from] gmsh::GmshError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// What a [`NodalField`] stores per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Scalar,
    Vector2,
    /// Symmetric 2x2 tensor stored as (xx, yy, xy).
    SymTensor2,
}

impl FieldKind {
    pub fn components(self) -> usize {
        match self {
            FieldKind::Scalar => 1,
            FieldKind::Vector2 => 2,
            FieldKind::SymTensor2 => 3,
        }
    }
}

/// Per-node values over a [`TriMesh`], one flat array per component.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    kind: FieldKind,
    comps: Vec<Vec<f64>>,
}

impl NodalField {
    pub fn scalar(values: Vec<f64>) -> Result<Self, MeshError> {
        Self::from_comps(FieldKind::Scalar, vec![values])
    }

    pub fn vector2(x: Vec<f64>, y: Vec<f64>) -> Result<Self, MeshError> {
        Self::from_comps(FieldKind::Vector2, vec![x, y])
    }

    pub fn sym_tensor2(xx: Vec<f64>, yy: Vec<f64>, xy: Vec<f64>) -> Result<Self, MeshError> {
        Self::from_comps(FieldKind::SymTensor2, vec![xx, yy, xy])
    }

    fn from_comps(kind: FieldKind, comps: Vec<Vec<f64>>) -> Result<Self, MeshError> {
        let len = comps[0].len();
        for (ci, comp) in comps.iter().enumerate() {
            if comp.len() != len {
                return Err(MeshError::FieldMeshMismatch {
                    got: comp.len(),
                    want: len,
                });
            }
            if let Some(node) = comp.iter().position(|v| !v.is_finite()) {
                return Err(MeshError::NonFiniteField { comp: ci, node });
            }
        }
        Ok(Self { kind, comps })
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.comps[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Component `k` as a flat per-node slice.
    pub fn comp(&self, k: usize) -> &[f64] {
        &self.comps[k]
    }

    pub fn expect_kind(&self, want: FieldKind) -> Result<(), MeshError> {
        if self.kind != want {
            return Err(MeshError::FieldKindMismatch {
                want,
                got: self.kind,
            });
        }
        Ok(())
    }

    pub fn expect_on(&self, mesh: &TriMesh) -> Result<(), MeshError> {
        if self.len() != mesh.node_count() {
            return Err(MeshError::FieldMeshMismatch {
                got: self.len(),
                want: mesh.node_count(),
            });
        }
        Ok(())
    }
}

/// Conforming unstructured triangular mesh with counter-clockwise triangles.
#[derive(Debug, Clone)]
pub struct TriMesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[u32; 3]>,
    boundary_edges: Vec<(u32, u32)>,
    target_size: f64,
    bbox: [[f64; 2]; 2],
    areas: Vec<f64>,
    /// Constant P1 shape-function gradients per triangle.
    grads: Vec<[[f64; 2]; 3]>,
    longest_edge: Vec<f64>,
    node_tri_offsets: Vec<u32>,
    node_tri_items: Vec<u32>,
    /// One-ring node neighbourhoods, sorted, including the node itself.
    nbr_offsets: Vec<u32>,
    nbr_items: Vec<u32>,
}

impl TriMesh {
    /// Build a mesh from raw connectivity. Triangles must already be CCW;
    /// boundary edges and all cached geometry are derived here and the
    /// conformity invariants are enforced.
    pub fn from_parts(
        nodes: Vec<[f64; 2]>,
        triangles: Vec<[u32; 3]>,
        target_size: f64,
    ) -> Result<Self, MeshError> {
        let n = nodes.len();
        let mut areas = Vec::with_capacity(triangles.len());
        let mut grads = Vec::with_capacity(triangles.len());
        let mut longest_edge = Vec::with_capacity(triangles.len());
        for (ti, tri) in triangles.iter().enumerate() {
            let [a, b, c] = *tri;
            let pa = nodes[a as usize];
            let pb = nodes[b as usize];
            let pc = nodes[c as usize];
            let area = signed_area(pa, pb, pc);
            if area <= 0.0 || !area.is_finite() {
                return Err(MeshError::NonPositiveArea { tri: ti, area });
            }
            areas.push(area);
            // grad N_i = (y_j - y_k, x_k - x_j) / (2A), (i, j, k) cyclic
            let inv2a = 0.5 / area;
            grads.push([
                [(pb[1] - pc[1]) * inv2a, (pc[0] - pb[0]) * inv2a],
                [(pc[1] - pa[1]) * inv2a, (pa[0] - pc[0]) * inv2a],
                [(pa[1] - pb[1]) * inv2a, (pb[0] - pa[0]) * inv2a],
            ]);
            let e0 = dist(pa, pb);
            let e1 = dist(pb, pc);
            let e2 = dist(pc, pa);
            longest_edge.push(e0.max(e1).max(e2));
        }

        // Edge incidence: conforming means every edge appears once or twice.
        let mut edge_count: std::collections::HashMap<(u32, u32), usize> =
            std::collections::HashMap::with_capacity(triangles.len() * 2);
        for tri in &triangles {
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                *edge_count.entry(key).or_insert(0) += 1;
            }
        }
        let mut boundary_edges = Vec::new();
        for (&(a, b), &count) in &edge_count {
            if count > 2 {
                return Err(MeshError::NonConforming { a, b, count });
            }
            if count == 1 {
                boundary_edges.push((a, b));
            }
        }
        boundary_edges.sort_unstable();

        // node -> incident triangles (CSR layout)
        let mut tri_deg = vec![0u32; n];
        for tri in &triangles {
            for &v in tri {
                tri_deg[v as usize] += 1;
            }
        }
        let mut node_tri_offsets = vec![0u32; n + 1];
        for i in 0..n {
            node_tri_offsets[i + 1] = node_tri_offsets[i] + tri_deg[i];
        }
        let mut cursor = node_tri_offsets.clone();
        let mut node_tri_items = vec![0u32; node_tri_offsets[n] as usize];
        for (ti, tri) in triangles.iter().enumerate() {
            for &v in tri {
                let c = &mut cursor[v as usize];
                node_tri_items[*c as usize] = ti as u32;
                *c += 1;
            }
        }

        // node -> sorted one-ring neighbours including self
        let mut nbr_offsets = vec![0u32; n + 1];
        let mut nbr_items = Vec::with_capacity(node_tri_items.len() + n);
        let mut scratch: Vec<u32> = Vec::with_capacity(16);
        for i in 0..n {
            scratch.clear();
            scratch.push(i as u32);
            let s = node_tri_offsets[i] as usize;
            let e = node_tri_offsets[i + 1] as usize;
            for &ti in &node_tri_items[s..e] {
                for &v in &triangles[ti as usize] {
                    scratch.push(v);
                }
            }
            scratch.sort_unstable();
            scratch.dedup();
            nbr_items.extend_from_slice(&scratch);
            nbr_offsets[i + 1] = nbr_items.len() as u32;
        }

        let mut bbox = [[f64::INFINITY; 2], [f64::NEG_INFINITY; 2]];
        for p in &nodes {
            for d in 0..2 {
                bbox[0][d] = bbox[0][d].min(p[d]);
                bbox[1][d] = bbox[1][d].max(p[d]);
            }
        }

        Ok(Self {
            nodes,
            triangles,
            boundary_edges,
            target_size,
            bbox,
            areas,
            grads,
            longest_edge,
            node_tri_offsets,
            node_tri_items,
            nbr_offsets,
            nbr_items,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        self.nodes[i]
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> [u32; 3] {
        self.triangles[t]
    }

    pub fn boundary_edges(&self) -> &[(u32, u32)] {
        &self.boundary_edges
    }

    pub fn target_size(&self) -> f64 {
        self.target_size
    }

    pub fn bbox(&self) -> [[f64; 2]; 2] {
        self.bbox
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    /// Constant P1 shape-function gradients of triangle `t`.
    pub fn shape_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        self.grads[t]
    }

    pub fn longest_edge(&self, t: usize) -> f64 {
        self.longest_edge[t]
    }

    pub fn max_edge_length(&self) -> f64 {
        self.longest_edge.iter().cloned().fold(0.0, f64::max)
    }

    /// Indices of triangles incident to node `i`.
    pub fn node_triangles(&self, i: usize) -> &[u32] {
        let s = self.node_tri_offsets[i] as usize;
        let e = self.node_tri_offsets[i + 1] as usize;
        &self.node_tri_items[s..e]
    }

    /// Sorted one-ring node neighbourhood of node `i`, including `i` itself.
    pub fn node_neighbors(&self, i: usize) -> &[u32] {
        let s = self.nbr_offsets[i] as usize;
        let e = self.nbr_offsets[i + 1] as usize;
        &self.nbr_items[s..e]
    }

    /// Re-check the construction invariants: positive areas, 1-or-2 edge
    /// incidence, boundary edge set, nodes inside the declared bounding box.
    pub fn audit(&self) -> Result<(), MeshError> {
        for (ti, tri) in self.triangles.iter().enumerate() {
            let area = signed_area(
                self.nodes[tri[0] as usize],
                self.nodes[tri[1] as usize],
                self.nodes[tri[2] as usize],
            );
            if area <= 0.0 || !area.is_finite() {
                return Err(MeshError::NonPositiveArea { tri: ti, area });
            }
        }
        let mut edge_count: std::collections::HashMap<(u32, u32), usize> =
            std::collections::HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                *edge_count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let mut boundary: Vec<(u32, u32)> = edge_count
            .iter()
            .filter(|(_, &c)| c == 1)
            .map(|(&e, _)| e)
            .collect();
        boundary.sort_unstable();
        for (&(a, b), &c) in &edge_count {
            if c > 2 {
                return Err(MeshError::NonConforming { a, b, count: c });
            }
        }
        if boundary != self.boundary_edges {
            return Err(MeshError::NonConforming {
                a: 0,
                b: 0,
                count: boundary.len(),
            });
        }
        let tol = 1e-12 * self.bbox_diagonal().max(1.0);
        for (i, p) in self.nodes.iter().enumerate() {
            if p[0] < self.bbox[0][0] - tol
                || p[0] > self.bbox[1][0] + tol
                || p[1] < self.bbox[0][1] - tol
                || p[1] > self.bbox[1][1] + tol
            {
                return Err(MeshError::NodeOutsideDomain { node: i });
            }
        }
        Ok(())
    }

    pub fn bbox_diagonal(&self) -> f64 {
        dist(self.bbox[0], self.bbox[1])
    }

    /// Containing triangle of `p`, if any (barycentric test with a small
    /// tolerance so points on shared edges resolve to some triangle).
    pub fn locate(&self, p: [f64; 2]) -> Option<usize> {
        let tol = -1e-12 * self.bbox_diagonal().max(1.0);
        for (ti, tri) in self.triangles.iter().enumerate() {
            let pa = self.nodes[tri[0] as usize];
            let pb = self.nodes[tri[1] as usize];
            let pc = self.nodes[tri[2] as usize];
            let w0 = signed_area(p, pb, pc);
            let w1 = signed_area(pa, p, pc);
            let w2 = signed_area(pa, pb, p);
            if w0 >= tol && w1 >= tol && w2 >= tol {
                return Some(ti);
            }
        }
        None
    }

    /// P1 interpolation of a scalar field at a point inside triangle `t`.
    pub fn interpolate_in(&self, field: &[f64], t: usize, p: [f64; 2]) -> f64 {
        let tri = self.triangles[t];
        let pa = self.nodes[tri[0] as usize];
        let pb = self.nodes[tri[1] as usize];
        let pc = self.nodes[tri[2] as usize];
        let area = self.areas[t];
        let w0 = signed_area(p, pb, pc) / area;
        let w1 = signed_area(pa, p, pc) / area;
        let w2 = 1.0 - w0 - w1;
        w0 * field[tri[0] as usize] + w1 * field[tri[1] as usize] + w2 * field[tri[2] as usize]
    }
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Deterministic uniform-grid mesh of `[0, width] x [0, height]` with
/// alternating cell diagonals. The cell count per axis is rounded up to an
/// even number so the domain centre is always a node; centred geometry is
/// then sampled without an O(h) offset.
pub fn generate_rect_mesh(width: f64, height: f64, h: f64) -> Result<TriMesh, MeshError> {
    if !(width > 0.0 && height > 0.0 && h > 0.0) || h > width.min(height) / 2.0 {
        return Err(MeshError::InvalidDimension { width, height, h });
    }
    let nx = even_ceil(width / h);
    let ny = even_ceil(height / h);
    let dx = width / nx as f64;
    let dy = height / ny as f64;

    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([i as f64 * dx, j as f64 * dy]);
        }
    }
    let at = |i: usize, j: usize| (j * (nx + 1) + i) as u32;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let p00 = at(i, j);
            let p10 = at(i + 1, j);
            let p01 = at(i, j + 1);
            let p11 = at(i + 1, j + 1);
            if (i + j) % 2 == 0 {
                triangles.push([p00, p10, p11]);
                triangles.push([p00, p11, p01]);
            } else {
                triangles.push([p00, p10, p01]);
                triangles.push([p10, p11, p01]);
            }
        }
    }
    TriMesh::from_parts(nodes, triangles, h)
}

fn even_ceil(x: f64) -> usize {
    let n = (x.ceil() as usize).max(2);
    n + n % 2
}

/// Exact gradient of the linear interpolant of `field` on triangle `tri`.
pub fn element_gradient(
    mesh: &TriMesh,
    field: &NodalField,
    tri: usize,
) -> Result<[f64; 2], MeshError> {
    field.expect_kind(FieldKind::Scalar)?;
    field.expect_on(mesh)?;
    if tri >= mesh.triangle_count() {
        return Err(MeshError::TriangleIndex {
            index: tri,
            len: mesh.triangle_count(),
        });
    }
    Ok(element_gradient_raw(mesh, field.comp(0), tri))
}

pub(crate) fn element_gradient_raw(mesh: &TriMesh, values: &[f64], tri: usize) -> [f64; 2] {
    let t = mesh.triangle(tri);
    let g = mesh.shape_gradients(tri);
    let mut out = [0.0; 2];
    for k in 0..3 {
        let v = values[t[k] as usize];
        out[0] += v * g[k][0];
        out[1] += v * g[k][1];
    }
    out
}

/// Superconvergent patch recovery of nodal gradients: per node a least-squares
/// {1, x, y} fit of the field values over the one-ring vertex patch,
/// differentiated at the node. Rank-deficient patches fall back to the
/// area-weighted average of incident element gradients.
pub fn recover_nodal_gradient(mesh: &TriMesh, field: &NodalField) -> Result<NodalField, MeshError> {
    field.expect_kind(FieldKind::Scalar)?;
    field.expect_on(mesh)?;
    let (gx, gy) = recover_raw(mesh, field.comp(0));
    NodalField::vector2(gx, gy)
}

pub(crate) fn recover_raw(mesh: &TriMesh, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    use rayon::prelude::*;
    let n = mesh.node_count();
    let grads: Vec<[f64; 2]> = (0..n)
        .into_par_iter()
        .map(|i| recover_at_node(mesh, values, i))
        .collect();
    let gx = grads.iter().map(|g| g[0]).collect();
    let gy = grads.iter().map(|g| g[1]).collect();
    (gx, gy)
}

fn recover_at_node(mesh: &TriMesh, values: &[f64], i: usize) -> [f64; 2] {
    let p0 = mesh.node(i);
    let patch = mesh.node_neighbors(i);
    // Patch radius for scale-free conditioning.
    let mut radius = 0.0f64;
    for &j in patch {
        let p = mesh.node(j as usize);
        radius = radius.max((p[0] - p0[0]).abs().max((p[1] - p0[1]).abs()));
    }
    if radius > 0.0 {
        let inv_r = 1.0 / radius;
        // Normal equations for c0 + c1*xi + c2*eta.
        let (mut s00, mut s01, mut s02) = (0.0f64, 0.0f64, 0.0f64);
        let (mut s11, mut s12, mut s22) = (0.0f64, 0.0f64, 0.0f64);
        let (mut b0, mut b1, mut b2) = (0.0f64, 0.0f64, 0.0f64);
        for &j in patch {
            let p = mesh.node(j as usize);
            let xi = (p[0] - p0[0]) * inv_r;
            let eta = (p[1] - p0[1]) * inv_r;
            let f = values[j as usize];
            s00 += 1.0;
            s01 += xi;
            s02 += eta;
            s11 += xi * xi;
            s12 += xi * eta;
            s22 += eta * eta;
            b0 += f;
            b1 += f * xi;
            b2 += f * eta;
        }
        let det = s00 * (s11 * s22 - s12 * s12) - s01 * (s01 * s22 - s12 * s02)
            + s02 * (s01 * s12 - s11 * s02);
        if det.abs() > 1e-10 * s00 * s00 * s00 {
            let c1 = (s00 * (b1 * s22 - s12 * b2) - b0 * (s01 * s22 - s12 * s02)
                + s02 * (s01 * b2 - b1 * s02))
                / det;
            let c2 = (s00 * (s11 * b2 - b1 * s12) - s01 * (s01 * b2 - b1 * s02)
                + b0 * (s01 * s12 - s11 * s02))
                / det;
            return [c1 * inv_r, c2 * inv_r];
        }
    }
    // Fallback: area-weighted element-gradient average.
    let mut acc = [0.0f64; 2];
    let mut wsum = 0.0f64;
    for &t in mesh.node_triangles(i) {
        let g = element_gradient_raw(mesh, values, t as usize);
        let w = mesh.area(t as usize);
        acc[0] += w * g[0];
        acc[1] += w * g[1];
        wsum += w;
    }
    if wsum > 0.0 {
        [acc[0] / wsum, acc[1] / wsum]
    } else {
        [0.0, 0.0]
    }
}

/// Component-wise recovered divergence of a symmetric tensor field:
/// `out^a = d/dx D^{xa} + d/dy D^{ya}`.
pub fn divergence_of_tensor(mesh: &TriMesh, d: &NodalField) -> Result<NodalField, MeshError> {
    d.expect_kind(FieldKind::SymTensor2)?;
    d.expect_on(mesh)?;
    let (dxx_x, _) = recover_raw(mesh, d.comp(0));
    let (_, dyy_y) = recover_raw(mesh, d.comp(1));
    let (dxy_x, dxy_y) = recover_raw(mesh, d.comp(2));
    let n = mesh.node_count();
    let mut out_x = Vec::with_capacity(n);
    let mut out_y = Vec::with_capacity(n);
    for i in 0..n {
        out_x.push(dxx_x[i] + dxy_y[i]);
        out_y.push(dxy_x[i] + dyy_y[i]);
    }
    NodalField::vector2(out_x, out_y)
}
