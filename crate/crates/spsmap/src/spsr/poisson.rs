use super::field::{NormalFieldPosterior, StaggeredField};
use super::state::SpsMapState;
use super::{SpsrError, VoxelGrid};

/// Forward-difference gradient: nodes -> face centers. Composed with
/// [`divergence`] it reproduces the 7-point Neumann Laplacian exactly.
pub fn gradient(grid: &VoxelGrid, f: &[f64]) -> StaggeredField {
    let mut g = StaggeredField::zeros(grid);
    let h = grid.h();
    for c in 0..3 {
        let dims = g.dims(c);
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for l in 0..dims[2] {
                    let mut up = [i, j, l];
                    up[c] += 1;
                    let lo = grid.node_index(i, j, l);
                    let hi = grid.node_index(up[0], up[1], up[2]);
                    let e = g.index(c, i, j, l);
                    g.data[c][e] = (f[hi] - f[lo]) / h;
                }
            }
        }
    }
    g
}

/// Backward-difference divergence with zero-flux ghost faces: face
/// centers -> nodes.
pub fn divergence(grid: &VoxelGrid, v: &StaggeredField) -> Vec<f64> {
    let h = grid.h();
    let n = grid.nodes_per_axis();
    let mut out = vec![0.0; grid.node_count()];
    for c in 0..3 {
        let dims = v.dims(c);
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let node = [i, j, l];
                    let mut acc = 0.0;
                    // face on the positive side of the node along axis c
                    if node[c] < dims[c] {
                        acc += v.data[c][v.index(c, i, j, l)];
                    }
                    // face on the negative side
                    if node[c] > 0 {
                        let mut lo = node;
                        lo[c] -= 1;
                        acc -= v.data[c][v.index(c, lo[0], lo[1], lo[2])];
                    }
                    out[grid.node_index(i, j, l)] += acc / h;
                }
            }
        }
    }
    out
}

/// Adjoint of [`divergence`]: nodes -> face centers.
pub fn divergence_transpose(grid: &VoxelGrid, w: &[f64]) -> StaggeredField {
    let mut g = StaggeredField::zeros(grid);
    let h = grid.h();
    for c in 0..3 {
        let dims = g.dims(c);
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for l in 0..dims[2] {
                    let mut up = [i, j, l];
                    up[c] += 1;
                    let lo = grid.node_index(i, j, l);
                    let hi = grid.node_index(up[0], up[1], up[2]);
                    let e = g.index(c, i, j, l);
                    g.data[c][e] = (w[lo] - w[hi]) / h;
                }
            }
        }
    }
    g
}

/// 7-point Neumann Laplacian applied to a node field (negative
/// semi-definite, constant nullspace).
pub fn laplacian_apply(grid: &VoxelGrid, f: &[f64]) -> Vec<f64> {
    divergence(grid, &gradient(grid, f))
}

/// Subtract the mean: projection onto the Neumann solver's range.
pub fn project_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

/// Jacobi-preconditioned conjugate gradient on A = -L, with the RHS
/// projected onto range(L) and the solution mean pinned to zero.
#[derive(Debug, Clone)]
pub struct LaplacianSolver {
    grid: VoxelGrid,
    inv_diag: Vec<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl LaplacianSolver {
    pub fn new(grid: &VoxelGrid) -> Self {
        let h2 = grid.h() * grid.h();
        let n = grid.nodes_per_axis();
        let mut inv_diag = vec![0.0; grid.node_count()];
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let mut faces = 0.0;
                    for &a in &[i, j, l] {
                        if a > 0 {
                            faces += 1.0;
                        }
                        if a < n - 1 {
                            faces += 1.0;
                        }
                    }
                    inv_diag[grid.node_index(i, j, l)] = h2 / faces;
                }
            }
        }
        let max_iterations = 10 * grid.node_count();
        Self {
            grid: grid.clone(),
            inv_diag,
            tolerance: 1e-8,
            max_iterations,
        }
    }

    /// Solve L f = b in the pseudo-inverse sense; `b` need not be
    /// mean-free. Returns the mean-pinned solution.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, SpsrError> {
        // A x = -b with A = -L positive semi-definite
        let mut rhs: Vec<f64> = b.iter().map(|x| -x).collect();
        project_mean(&mut rhs);
        let b_norm = rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
        let n = rhs.len();
        let mut x = vec![0.0; n];
        if b_norm == 0.0 {
            return Ok(x);
        }
        let apply_a = |f: &[f64]| -> Vec<f64> {
            laplacian_apply(&self.grid, f)
                .into_iter()
                .map(|v| -v)
                .collect()
        };
        let mut r = rhs;
        let mut z: Vec<f64> = r.iter().zip(&self.inv_diag).map(|(ri, d)| ri * d).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut res = f64::INFINITY;
        for iter in 0..self.max_iterations {
            res = r.iter().map(|v| v * v).sum::<f64>().sqrt() / b_norm;
            if res <= self.tolerance {
                project_mean(&mut x);
                return Ok(x);
            }
            let ap = apply_a(&p);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap <= 0.0 {
                return Err(SpsrError::SolverFailure {
                    residual: res,
                    iterations: iter,
                });
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            z = r.iter().zip(&self.inv_diag).map(|(ri, d)| ri * d).collect();
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(SpsrError::SolverFailure {
            residual: res,
            iterations: self.max_iterations,
        })
    }
}

/// Solve the screened-free Poisson system for the fitted normal field and
/// pin the iso level so the mean implicit value at the training samples is
/// zero.
pub fn solve_poisson(field: NormalFieldPosterior) -> Result<SpsMapState, SpsrError> {
    let grid = field.grid().clone();
    let b = divergence(&grid, field.mean_field());
    let solver = LaplacianSolver::new(&grid);
    let f = solver.solve(&b)?;

    // residual contract: ||L f - b|| <= tol ||b||
    let b_norm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if b_norm > 0.0 {
        let lf = laplacian_apply(&grid, &f);
        let res = lf
            .iter()
            .zip(&b)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            / b_norm;
        if res > 10.0 * solver.tolerance {
            return Err(SpsrError::SolverFailure {
                residual: res,
                iterations: solver.max_iterations,
            });
        }
    }

    let mut iso = 0.0;
    for p in field.training().positions() {
        iso += grid.interpolate(&f, p)?;
    }
    iso /= field.training().len() as f64;
    let mean: Vec<f64> = f.iter().map(|v| v - iso).collect();
    Ok(SpsMapState::from_parts(grid, mean, iso, field, solver))
}
