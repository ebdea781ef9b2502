use nalgebra::Vector3;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::field::NormalFieldPosterior;
use super::isosurface::extract_triangles;
use super::poisson::{divergence_transpose, LaplacianSolver};
use super::{SpsrError, VoxelGrid};
use crate::geometry::OrientedPointSet;

const DEGENERATE_SIGMA: f64 = 1e-12;

/// Gaussian posterior over the implicit function: node-major mean field
/// plus the machinery for per-point variance queries.
#[derive(Debug, Clone)]
pub struct SpsMapState {
    grid: VoxelGrid,
    mean: Vec<f64>,
    iso_shift: f64,
    field: NormalFieldPosterior,
    solver: LaplacianSolver,
}

impl SpsMapState {
    pub(crate) fn from_parts(
        grid: VoxelGrid,
        mean: Vec<f64>,
        iso_shift: f64,
        field: NormalFieldPosterior,
        solver: LaplacianSolver,
    ) -> Self {
        Self {
            grid,
            mean,
            iso_shift,
            field,
            solver,
        }
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    /// Node-major mean field values (iso-shifted).
    pub fn mean_values(&self) -> &[f64] {
        &self.mean
    }

    pub fn iso_shift(&self) -> f64 {
        self.iso_shift
    }

    pub fn normal_field(&self) -> &NormalFieldPosterior {
        &self.field
    }

    pub fn training(&self) -> &OrientedPointSet {
        self.field.training()
    }

    /// Trilinear interpolation of the mean field.
    pub fn query_mean(&self, x: &Vector3<f64>) -> Result<f64, SpsrError> {
        self.grid.interpolate(&self.mean, x)
    }

    /// Posterior variance of the implicit function at `x`, by one adjoint
    /// Laplacian solve plus the lumped normal-field covariance form.
    pub fn query_variance(&self, x: &Vector3<f64>) -> Result<f64, SpsrError> {
        let (idx, w) = self.grid.trilinear_weights(x)?;
        let mut embed = vec![0.0; self.grid.node_count()];
        for (&i, &wi) in idx.iter().zip(w.iter()) {
            embed[i] += wi;
        }
        // L is symmetric, so the adjoint solve reuses the forward solver
        let wvec = self.solver.solve(&embed)?;
        let g = divergence_transpose(&self.grid, &wvec);
        let var = self.field.quadratic_form(&g)?;
        if var < 0.0 {
            debug_assert!(var >= -1e-9, "variance {var} below clamp window");
            return Ok(0.0);
        }
        Ok(var)
    }

    /// Probability that `x` is occupied (implicit value <= 0).
    pub fn occupancy_probability(&self, x: &Vector3<f64>) -> Result<f64, SpsrError> {
        let mean = self.query_mean(x)?;
        let sigma = self.query_variance(x)?.sqrt();
        if sigma < DEGENERATE_SIGMA {
            return Ok(if mean <= 0.0 { 1.0 } else { 0.0 });
        }
        let n = Normal::new(mean, sigma).expect("sigma checked positive");
        Ok(n.cdf(0.0))
    }

    /// Gaussian density of the implicit value at zero: the on-surface
    /// likelihood. Degenerate sigma returns +inf exactly on the surface
    /// and 0 elsewhere.
    pub fn surface_probability(&self, x: &Vector3<f64>) -> Result<f64, SpsrError> {
        let mean = self.query_mean(x)?;
        let sigma = self.query_variance(x)?.sqrt();
        if sigma < DEGENERATE_SIGMA {
            return Ok(if mean == 0.0 { f64::INFINITY } else { 0.0 });
        }
        let n = Normal::new(mean, sigma).expect("sigma checked positive");
        Ok(n.pdf(0.0))
    }

    /// Central-difference gradient of the mean field, trilinearly
    /// interpolated at `x`. Points from negative (inside) toward positive.
    pub fn mean_gradient(&self, x: &Vector3<f64>) -> Result<Vector3<f64>, SpsrError> {
        let grads = self.node_gradients();
        let (idx, w) = self.grid.trilinear_weights(x)?;
        let mut g = Vector3::zeros();
        for (&i, &wi) in idx.iter().zip(w.iter()) {
            g += grads[i] * wi;
        }
        Ok(g)
    }

    fn node_gradients(&self) -> Vec<Vector3<f64>> {
        let n = self.grid.nodes_per_axis();
        let h = self.grid.h();
        let mut out = vec![Vector3::zeros(); self.grid.node_count()];
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let node = [i, j, l];
                    let mut g = Vector3::zeros();
                    for c in 0..3 {
                        let mut up = node;
                        let mut dn = node;
                        let mut span = 0.0;
                        if node[c] + 1 < n {
                            up[c] += 1;
                            span += h;
                        }
                        if node[c] > 0 {
                            dn[c] -= 1;
                            span += h;
                        }
                        let fu = self.mean[self.grid.node_index(up[0], up[1], up[2])];
                        let fd = self.mean[self.grid.node_index(dn[0], dn[1], dn[2])];
                        g[c] = (fu - fd) / span;
                    }
                    out[self.grid.node_index(i, j, l)] = g;
                }
            }
        }
        out
    }

    /// Area-uniform points on the zero level set with gradient normals,
    /// deterministic per seed.
    pub fn extract_surface_points(
        &self,
        n: usize,
        seed: u64,
    ) -> Result<OrientedPointSet, SpsrError> {
        let triangles = extract_triangles(&self.grid, &self.mean);
        if triangles.is_empty() {
            return Err(SpsrError::EmptyLevelSet);
        }
        let grads = self.node_gradients();
        let mut cumulative = Vec::with_capacity(triangles.len());
        let mut total = 0.0;
        for t in &triangles {
            total += 0.5 * (t[1] - t[0]).cross(&(t[2] - t[0])).norm();
            cumulative.push(total);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = OrientedPointSet::default();
        while out.len() < n {
            let u = rng.gen::<f64>() * total;
            let ti = cumulative
                .partition_point(|&c| c <= u)
                .min(triangles.len() - 1);
            let [a, b, c] = triangles[ti];
            let r1: f64 = rng.gen();
            let r2: f64 = rng.gen();
            let s = r1.sqrt();
            let p = a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2);
            let (idx, w) = self.grid.trilinear_weights(&p)?;
            let mut g = Vector3::zeros();
            for (&i, &wi) in idx.iter().zip(w.iter()) {
                g += grads[i] * wi;
            }
            let len = g.norm();
            if len < 1e-12 {
                // flat spot: skip rather than fabricate a direction
                continue;
            }
            out.push(p, g / len);
        }
        Ok(out)
    }
}
