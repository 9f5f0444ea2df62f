//! Compressed-sparse-row matrices sized by mesh node adjacency.

use crate::mesh::TriMesh;

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_offsets: Vec<u32>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the node-to-node coupling pattern of the mesh
    /// (one-ring neighbourhoods including the diagonal).
    pub fn from_mesh_pattern(mesh: &TriMesh) -> Self {
        let n = mesh.node_count();
        let mut row_offsets = Vec::with_capacity(n + 1);
        row_offsets.push(0u32);
        let mut cols = Vec::new();
        for i in 0..n {
            cols.extend_from_slice(mesh.node_neighbors(i));
            row_offsets.push(cols.len() as u32);
        }
        let vals = vec![0.0; cols.len()];
        Self {
            n,
            row_offsets,
            cols,
            vals,
        }
    }

    /// Build from triplets (duplicates summed); row-sorted storage.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            rows[i].push((j as u32, v));
        }
        let mut row_offsets = Vec::with_capacity(n + 1);
        row_offsets.push(0u32);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in &mut rows {
            row.sort_unstable_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == c {
                    v += row[k].1;
                    k += 1;
                }
                cols.push(c);
                vals.push(v);
            }
            row_offsets.push(cols.len() as u32);
        }
        Self {
            n,
            row_offsets,
            cols,
            vals,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_offsets: (0..=n as u32).collect(),
            cols: (0..n as u32).collect(),
            vals: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let s = self.row_offsets[i] as usize;
        let e = self.row_offsets[i + 1] as usize;
        (&self.cols[s..e], &self.vals[s..e])
    }

    /// Add `v` at (i, j); the position must exist in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.row_offsets[i] as usize;
        let e = self.row_offsets[i + 1] as usize;
        let k = self.cols[s..e]
            .binary_search(&(j as u32))
            .unwrap_or_else(|_| panic!("entry ({i}, {j}) outside sparsity pattern"));
        self.vals[s + k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let s = self.row_offsets[i] as usize;
        let e = self.row_offsets[i + 1] as usize;
        match self.cols[s..e].binary_search(&(j as u32)) {
            Ok(k) => self.vals[s + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let s = self.row_offsets[i] as usize;
            let e = self.row_offsets[i + 1] as usize;
            let mut acc = 0.0;
            for k in s..e {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            y[i] = acc;
        }
    }

    pub fn has_stored_nan(&self) -> bool {
        self.vals.iter().any(|v| !v.is_finite())
    }

    pub(crate) fn raw(&self) -> (&[u32], &[u32], &[f64]) {
        (&self.row_offsets, &self.cols, &self.vals)
    }

    pub(crate) fn vals_mut(&mut self) -> &mut [f64] {
        &mut self.vals
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn matvec_small() {
        let m = CsrMatrix::from_triplets(2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 1, 3.0)]);
        let mut y = vec![0.0; 2];
        m.matvec(&[1.0, 2.0], &mut y);
        assert_eq!(y, vec![4.0, 6.0]);
    }

    #[test]
    fn mesh_pattern_is_symmetric() {
        let mesh = crate::mesh::generate_rect_mesh(1.0, 1.0, 0.25).unwrap();
        let m = CsrMatrix::from_mesh_pattern(&mesh);
        assert_eq!(m.dim(), mesh.node_count());
        for i in 0..m.dim() {
            let (cols, _) = m.row(i);
            for &j in cols {
                let (jcols, _) = m.row(j as usize);
                assert!(jcols.binary_search(&(i as u32)).is_ok());
            }
        }
    }
}
