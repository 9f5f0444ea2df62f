//! Restarted GMRES with an ILU(0) preconditioner for the nonsymmetric
//! step systems. Right preconditioning keeps the monitored residual equal to
//! the true residual.

use super::sparse::CsrMatrix;
use super::{FemError, SparseSystem, StepParams};

const RESTART: usize = 50;

#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// ILU(0) factors stored in the pattern of the original matrix. The unit
/// lower part and the upper part (with diagonal) share one value array.
pub struct Ilu0 {
    matrix: CsrMatrix,
    diag_ptr: Vec<u32>,
}

impl Ilu0 {
    /// Incomplete factorization with zero fill-in. Vanishing pivots are
    /// replaced by a tiny value so the factorization always completes; a
    /// genuinely singular system then surfaces as solver non-convergence.
    pub fn factor(a: &CsrMatrix) -> Self {
        let n = a.dim();
        let mut m = a.clone();
        let mut diag_ptr = vec![u32::MAX; n];
        {
            let (offsets, cols, _) = m.raw();
            for i in 0..n {
                for k in offsets[i] as usize..offsets[i + 1] as usize {
                    if cols[k] as usize == i {
                        diag_ptr[i] = k as u32;
                    }
                }
            }
        }
        let offsets: Vec<u32> = m.raw().0.to_vec();
        let cols: Vec<u32> = m.raw().1.to_vec();
        let vals = m.vals_mut();
        let tiny = 1e-300;
        for i in 0..n {
            let row_s = offsets[i] as usize;
            let row_e = offsets[i + 1] as usize;
            for kk in row_s..row_e {
                let k = cols[kk] as usize;
                if k >= i {
                    break;
                }
                let dk = diag_ptr[k];
                let pivot = if dk == u32::MAX { tiny } else { vals[dk as usize] };
                let pivot = if pivot.abs() < tiny { tiny } else { pivot };
                let lik = vals[kk] / pivot;
                vals[kk] = lik;
                // row_i[j] -= lik * row_k[j] for j > k present in both rows
                let krow_s = if dk == u32::MAX {
                    offsets[k] as usize
                } else {
                    dk as usize + 1
                };
                let krow_e = offsets[k + 1] as usize;
                let mut p = kk + 1;
                let mut q = krow_s;
                while p < row_e && q < krow_e {
                    match cols[p].cmp(&cols[q]) {
                        std::cmp::Ordering::Less => p += 1,
                        std::cmp::Ordering::Greater => q += 1,
                        std::cmp::Ordering::Equal => {
                            vals[p] -= lik * vals[q];
                            p += 1;
                            q += 1;
                        }
                    }
                }
            }
        }
        Self {
            matrix: m,
            diag_ptr,
        }
    }

    /// x = U^{-1} L^{-1} r.
    pub fn apply(&self, r: &[f64], x: &mut [f64]) {
        let n = self.matrix.dim();
        let (offsets, cols, vals) = self.matrix.raw();
        // forward: L y = r (unit diagonal)
        for i in 0..n {
            let mut acc = r[i];
            let s = offsets[i] as usize;
            let e = offsets[i + 1] as usize;
            for k in s..e {
                let j = cols[k] as usize;
                if j >= i {
                    break;
                }
                acc -= vals[k] * x[j];
            }
            x[i] = acc;
        }
        // backward: U x = y
        for i in (0..n).rev() {
            let d = self.diag_ptr[i];
            let (ds, dv) = if d == u32::MAX {
                (offsets[i + 1] as usize, 1e-300)
            } else {
                (d as usize, vals[d as usize])
            };
            let mut acc = x[i];
            for k in (ds.min(offsets[i + 1] as usize))..offsets[i + 1] as usize {
                let j = cols[k] as usize;
                if j <= i {
                    continue;
                }
                acc -= vals[k] * x[j];
            }
            let dv = if dv.abs() < 1e-300 { 1e-300 } else { dv };
            x[i] = acc / dv;
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solve the assembled system; the residual is reduced below
/// `solver_rel_tol * ||rhs||`, starting from the stored initial guess.
pub fn solve(system: &SparseSystem, params: &StepParams) -> Result<Vec<f64>, FemError> {
    solve_with_stats(system, params).map(|(x, _)| x)
}

pub fn solve_with_stats(
    system: &SparseSystem,
    params: &StepParams,
) -> Result<(Vec<f64>, SolveStats), FemError> {
    let a = &system.matrix;
    let b = &system.rhs;
    let n = a.dim();
    let b_norm = norm(b);
    let target = params.solver_rel_tol * b_norm;

    if b_norm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveStats {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let mut x = if system.guess.len() == n {
        system.guess.clone()
    } else {
        vec![0.0; n]
    };
    let mut r = vec![0.0; n];
    a.matvec(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut res = norm(&r);
    if res <= target {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                residual: res,
            },
        ));
    }

    let ilu = Ilu0::factor(a);
    let m = RESTART;
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut h = vec![0.0f64; (m + 1) * m];
    let mut cs = vec![0.0f64; m];
    let mut sn = vec![0.0f64; m];
    let mut g = vec![0.0f64; m + 1];
    let mut z = vec![0.0f64; n];
    let mut w = vec![0.0f64; n];
    let mut iterations = 0usize;

    while iterations < params.solver_max_iter {
        a.matvec(&x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        res = norm(&r);
        if !res.is_finite() {
            return Err(FemError::NoConvergence {
                residual: res,
                iterations,
            });
        }
        if res <= target {
            break;
        }
        v.clear();
        let mut v0 = r.clone();
        for q in &mut v0 {
            *q /= res;
        }
        v.push(v0);
        g.iter_mut().for_each(|q| *q = 0.0);
        g[0] = res;

        let mut j = 0usize;
        while j < m && iterations < params.solver_max_iter {
            ilu.apply(&v[j], &mut z);
            a.matvec(&z, &mut w);
            for i in 0..=j {
                let hij: f64 = w.iter().zip(&v[i]).map(|(a, b)| a * b).sum();
                h[i * m + j] = hij;
                for (wk, vk) in w.iter_mut().zip(&v[i]) {
                    *wk -= hij * vk;
                }
            }
            let hj1 = norm(&w);
            h[(j + 1) * m + j] = hj1;
            let breakdown = hj1 < 1e-300;
            if !breakdown {
                let mut vj1 = w.clone();
                for q in &mut vj1 {
                    *q /= hj1;
                }
                v.push(vj1);
            }
            // Givens updates of column j.
            for i in 0..j {
                let t0 = cs[i] * h[i * m + j] + sn[i] * h[(i + 1) * m + j];
                let t1 = -sn[i] * h[i * m + j] + cs[i] * h[(i + 1) * m + j];
                h[i * m + j] = t0;
                h[(i + 1) * m + j] = t1;
            }
            let denom = (h[j * m + j].powi(2) + h[(j + 1) * m + j].powi(2)).sqrt();
            if denom < 1e-300 || !denom.is_finite() {
                return Err(FemError::NoConvergence {
                    residual: res,
                    iterations,
                });
            }
            cs[j] = h[j * m + j] / denom;
            sn[j] = h[(j + 1) * m + j] / denom;
            h[j * m + j] = denom;
            h[(j + 1) * m + j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            iterations += 1;
            res = g[j + 1].abs();
            j += 1;
            if res <= target || breakdown {
                break;
            }
        }

        // x += M^{-1} (V y) with y from the least-squares triangular solve.
        let rows = j;
        let mut y = vec![0.0f64; rows];
        for i in (0..rows).rev() {
            let mut acc = g[i];
            for k in i + 1..rows {
                acc -= h[i * m + k] * y[k];
            }
            y[i] = acc / h[i * m + i];
        }
        let mut update = vec![0.0f64; n];
        for (k, yk) in y.iter().enumerate() {
            for (u, vk) in update.iter_mut().zip(&v[k]) {
                *u += yk * vk;
            }
        }
        ilu.apply(&update, &mut z);
        for i in 0..n {
            x[i] += z[i];
        }
        if !res.is_finite() {
            return Err(FemError::NoConvergence {
                residual: res,
                iterations,
            });
        }
        // The recurrence residual can drift from the true one; the loop head
        // re-measures it before declaring convergence.
    }

    // True residual check.
    a.matvec(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    res = norm(&r);
    if !res.is_finite() || res > target {
        return Err(FemError::NoConvergence {
            residual: res,
            iterations,
        });
    }
    Ok((
        x,
        SolveStats {
            iterations,
            residual: res,
        },
    ))
}
