//! Element assembly of the backward-Euler transport step with a 3-point
//! mid-edge quadrature rule (exact for quadratics on P1 data).

use super::sparse::CsrMatrix;
use super::{FemError, SparseSystem, StepParams};
use crate::levelset::LevelSet;
use crate::mesh::{FieldKind, NodalField, TriMesh};
use rayon::prelude::*;

/// Shape-function values at the three edge midpoints.
const QUAD_N: [[f64; 3]; 3] = [
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
];

struct ElementContribution {
    nodes: [u32; 3],
    mat: [[f64; 3]; 3],
    rhs: [f64; 3],
}

/// coth(Pe) - 1/Pe, series-expanded near zero to avoid cancellation.
fn upwind_xi(pe: f64) -> f64 {
    if pe < 0.5 {
        pe / 3.0 - pe.powi(3) / 45.0
    } else if pe > 350.0 {
        1.0 - 1.0 / pe
    } else {
        1.0 / pe.tanh() - 1.0 / pe
    }
}

/// Assemble the step system for the current field with the diffusion tensor
/// `d` and its recovered divergence `div_d` evaluated at the current normals.
/// The convective velocity is `c = mu * div_d`.
pub fn assemble_step(
    mesh: &TriMesh,
    phi: &LevelSet,
    d: &NodalField,
    div_d: &NodalField,
    params: &StepParams,
) -> Result<SparseSystem, FemError> {
    params.validate()?;
    d.expect_kind(FieldKind::SymTensor2)?;
    d.expect_on(mesh)?;
    div_d.expect_kind(FieldKind::Vector2)?;
    div_d.expect_on(mesh)?;
    if phi.values().len() != mesh.node_count() {
        return Err(FemError::Mesh(crate::mesh::MeshError::FieldMeshMismatch {
            got: phi.values().len(),
            want: mesh.node_count(),
        }));
    }

    let mu = params.mu;
    let inv_dt = 1.0 / params.dt;
    let phi_n = phi.values();
    let (dxx, dyy, dxy) = (d.comp(0), d.comp(1), d.comp(2));
    let (divx, divy) = (div_d.comp(0), div_d.comp(1));

    let contributions: Vec<ElementContribution> = (0..mesh.triangle_count())
        .into_par_iter()
        .map(|t| {
            let tri = mesh.triangle(t);
            let area = mesh.area(t);
            let g = mesh.shape_gradients(t);
            let idx = [tri[0] as usize, tri[1] as usize, tri[2] as usize];

            // Nodal convective velocity c = mu * div(D).
            let cx = [mu * divx[idx[0]], mu * divx[idx[1]], mu * divx[idx[2]]];
            let cy = [mu * divy[idx[0]], mu * divy[idx[1]], mu * divy[idx[2]]];
            let tau = if params.supg_enabled {
                let ccx = (cx[0] + cx[1] + cx[2]) / 3.0;
                let ccy = (cy[0] + cy[1] + cy[2]) / 3.0;
                let speed = (ccx * ccx + ccy * ccy).sqrt();
                if speed < 1e-12 {
                    0.0
                } else {
                    // Upwind function xi(Pe) = coth(Pe) - 1/Pe damps the
                    // stabilization where diffusion dominates; tau tends to
                    // h / (2|c|) in the convective limit.
                    let he = mesh.longest_edge(t);
                    let diffusivity = mu
                        * (dxx[idx[0]] + dxx[idx[1]] + dxx[idx[2]] + dyy[idx[0]]
                            + dyy[idx[1]]
                            + dyy[idx[2]])
                        / 6.0;
                    let xi = if diffusivity > 1e-300 {
                        upwind_xi(speed * he / (2.0 * diffusivity))
                    } else {
                        1.0
                    };
                    he / (2.0 * speed) * xi
                }
            } else {
                0.0
            };

            let w = area / 3.0;
            let mut mat = [[0.0f64; 3]; 3];
            let mut rhs = [0.0f64; 3];
            for nq in QUAD_N.iter() {
                let interp = |v: [f64; 3]| nq[0] * v[0] + nq[1] * v[1] + nq[2] * v[2];
                let cqx = interp(cx);
                let cqy = interp(cy);
                let qxx = interp([dxx[idx[0]], dxx[idx[1]], dxx[idx[2]]]);
                let qyy = interp([dyy[idx[0]], dyy[idx[1]], dyy[idx[2]]]);
                let qxy = interp([dxy[idx[0]], dxy[idx[1]], dxy[idx[2]]]);
                let phi_q = interp([phi_n[idx[0]], phi_n[idx[1]], phi_n[idx[2]]]);
                for i in 0..3 {
                    let test = nq[i] + tau * (cqx * g[i][0] + cqy * g[i][1]);
                    for j in 0..3 {
                        let time = inv_dt * nq[j] * test;
                        let diff = mu
                            * (g[i][0] * (qxx * g[j][0] + qxy * g[j][1])
                                + g[i][1] * (qxy * g[j][0] + qyy * g[j][1]));
                        let conv = (cqx * g[j][0] + cqy * g[j][1]) * test;
                        mat[i][j] += w * (time + diff + conv);
                    }
                    rhs[i] += w * inv_dt * phi_q * test;
                }
            }
            ElementContribution {
                nodes: tri,
                mat,
                rhs,
            }
        })
        .collect();

    let mut matrix = CsrMatrix::from_mesh_pattern(mesh);
    let mut rhs = vec![0.0f64; mesh.node_count()];
    for c in &contributions {
        for i in 0..3 {
            let gi = c.nodes[i] as usize;
            for j in 0..3 {
                matrix.add(gi, c.nodes[j] as usize, c.mat[i][j]);
            }
            rhs[gi] += c.rhs[i];
        }
    }
    Ok(SparseSystem {
        matrix,
        rhs,
        guess: phi_n.to_vec(),
    })
}
