use std::collections::HashMap;

use nalgebra::Vector3;

use super::kernel::{bump, k_spsr, KernelConfig};
use super::{SpsrError, VoxelGrid};
use crate::geometry::OrientedPointSet;

/// Face-staggered vector field: component `c` is stored at cell-face
/// centers offset by h/2 along axis `c`, so the backward-difference
/// divergence is centered on grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredField {
    k: usize,
    pub data: [Vec<f64>; 3],
}

impl StaggeredField {
    pub fn zeros(grid: &VoxelGrid) -> Self {
        let k = grid.k();
        let data = std::array::from_fn(|c| vec![0.0; Self::axis_len(k, c)]);
        Self { k, data }
    }

    fn axis_len(k: usize, _c: usize) -> usize {
        k * (k + 1) * (k + 1)
    }

    /// Entry counts per axis for component `c`.
    pub fn dims(&self, c: usize) -> [usize; 3] {
        let mut d = [self.k + 1; 3];
        d[c] = self.k;
        d
    }

    pub fn index(&self, c: usize, i: usize, j: usize, l: usize) -> usize {
        let d = self.dims(c);
        (i * d[1] + j) * d[2] + l
    }

    pub fn position(&self, grid: &VoxelGrid, c: usize, i: usize, j: usize, l: usize) -> Vector3<f64> {
        let mut p = grid.node_position(i, j, l);
        p[c] += grid.h() / 2.0;
        p
    }

    pub fn norm(&self) -> f64 {
        self.data
            .iter()
            .flat_map(|v| v.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

fn cell_key(p: &Vector3<f64>, grid: &VoxelGrid) -> (i32, i32, i32) {
    let h = grid.h();
    (
        ((p.x - grid.origin().x) / h).floor() as i32,
        ((p.y - grid.origin().y) / h).floor() as i32,
        ((p.z - grid.origin().z) / h).floor() as i32,
    )
}

/// Gaussian posterior over the interpolated normal field, with row-sum
/// lumped training covariance.
#[derive(Debug, Clone)]
pub struct NormalFieldPosterior {
    training: OrientedPointSet,
    lumped: Vec<f64>,
    mean: StaggeredField,
    grid: VoxelGrid,
    cfg: KernelConfig,
    bins: HashMap<(i32, i32, i32), Vec<usize>>,
}

impl NormalFieldPosterior {
    /// Fit the posterior: lumped weights D_s = sum_s' k(p_s, p_s') and the
    /// mean field V(x) = sum_s k(p_s, x)/D_s N_s evaluated at face centers.
    pub fn fit(
        samples: &OrientedPointSet,
        grid: &VoxelGrid,
        cfg: &KernelConfig,
    ) -> Result<Self, SpsrError> {
        if samples.is_empty() {
            return Err(SpsrError::EmptySet);
        }
        if samples.len() < 10 {
            return Err(SpsrError::TooFewSamples {
                needed: 10,
                got: samples.len(),
            });
        }
        for p in samples.positions() {
            if !grid.contains(p) {
                return Err(SpsrError::OutOfGrid {
                    point: [p.x, p.y, p.z],
                });
            }
        }

        let mut bins: HashMap<(i32, i32, i32), Vec<usize>> = HashMap::new();
        for (s, p) in samples.positions().iter().enumerate() {
            bins.entry(cell_key(p, grid)).or_default().push(s);
        }

        let reach = cfg.reach_cells().ceil() as i32;
        let mut lumped = vec![0.0; samples.len()];
        for (s, p) in samples.positions().iter().enumerate() {
            let key = cell_key(p, grid);
            let mut sum = 0.0;
            for di in -reach..=reach {
                for dj in -reach..=reach {
                    for dl in -reach..=reach {
                        let Some(ids) = bins.get(&(key.0 + di, key.1 + dj, key.2 + dl)) else {
                            continue;
                        };
                        for &t in ids {
                            sum += k_spsr(p, &samples.positions()[t], grid, cfg)?;
                        }
                    }
                }
            }
            if sum <= 1e-12 {
                return Err(SpsrError::ZeroLumpedWeight {
                    index: s,
                    weight: sum,
                });
            }
            lumped[s] = sum;
        }

        let mut mean = StaggeredField::zeros(grid);
        let h = grid.h();
        let reach_h = cfg.reach_cells() * h;
        for (s, (p, n)) in samples.iter().enumerate() {
            for c in 0..3 {
                let d = mean.dims(c);
                let mut lo = [0usize; 3];
                let mut hi = [0usize; 3];
                for a in 0..3 {
                    let off = if a == c { 0.5 } else { 0.0 };
                    let t = (p[a] - grid.origin()[a]) / h - off;
                    lo[a] = ((t - cfg.reach_cells()).ceil().max(0.0)) as usize;
                    hi[a] = (t + cfg.reach_cells()).floor().min((d[a] - 1) as f64) as usize;
                }
                for i in lo[0]..=hi[0] {
                    for j in lo[1]..=hi[1] {
                        for l in lo[2]..=hi[2] {
                            let x = mean.position(grid, c, i, j, l);
                            if (x - p).amax() >= reach_h {
                                continue;
                            }
                            let kv = k_spsr(p, &x, grid, cfg)?;
                            if kv != 0.0 {
                                let e = mean.index(c, i, j, l);
                                mean.data[c][e] += kv / lumped[s] * n[c];
                            }
                        }
                    }
                }
            }
        }

        Ok(Self {
            training: samples.clone(),
            lumped,
            mean,
            grid: grid.clone(),
            cfg: *cfg,
            bins,
        })
    }

    pub fn training(&self) -> &OrientedPointSet {
        &self.training
    }

    pub fn lumped_weights(&self) -> &[f64] {
        &self.lumped
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn config(&self) -> &KernelConfig {
        &self.cfg
    }

    pub fn mean_field(&self) -> &StaggeredField {
        &self.mean
    }

    fn neighbor_samples(&self, x: &Vector3<f64>) -> Vec<usize> {
        let reach = self.cfg.reach_cells().ceil() as i32;
        let key = cell_key(x, &self.grid);
        let mut out = Vec::new();
        for di in -reach..=reach {
            for dj in -reach..=reach {
                for dl in -reach..=reach {
                    if let Some(ids) = self.bins.get(&(key.0 + di, key.1 + dj, key.2 + dl)) {
                        out.extend_from_slice(ids);
                    }
                }
            }
        }
        out
    }

    /// Posterior mean of the normal field, evaluated anywhere in the grid.
    pub fn mean_at(&self, x: &Vector3<f64>) -> Result<Vector3<f64>, SpsrError> {
        let mut v = Vector3::zeros();
        for s in self.neighbor_samples(x) {
            let kv = k_spsr(&self.training.positions()[s], x, &self.grid, &self.cfg)?;
            if kv != 0.0 {
                v += self.training.normals()[s] * (kv / self.lumped[s]);
            }
        }
        Ok(v)
    }

    /// Pointwise posterior variance K_V(x, x) of one field component.
    pub fn variance_at(&self, x: &Vector3<f64>) -> Result<f64, SpsrError> {
        let mut v = k_spsr(x, x, &self.grid, &self.cfg)?;
        for s in self.neighbor_samples(x) {
            let kv = k_spsr(x, &self.training.positions()[s], &self.grid, &self.cfg)?;
            v -= kv * kv / self.lumped[s];
        }
        Ok(v)
    }

    /// Fraction of the prior variance k(x, x) remaining after
    /// conditioning: 1 far from data, near 0 where samples are dense.
    /// Unlike `variance_at`, this is comparable across query positions
    /// because the prior scale k(x, x) itself varies over the grid.
    pub fn variance_fraction_at(&self, x: &Vector3<f64>) -> Result<f64, SpsrError> {
        let prior = k_spsr(x, x, &self.grid, &self.cfg)?;
        if prior <= f64::EPSILON {
            return Ok(1.0);
        }
        Ok((self.variance_at(x)? / prior).clamp(0.0, 1.0))
    }

    /// Covariance K_V(x, y) between two query points.
    pub fn covariance_at(&self, x: &Vector3<f64>, y: &Vector3<f64>) -> Result<f64, SpsrError> {
        let mut v = k_spsr(x, y, &self.grid, &self.cfg)?;
        for s in self.neighbor_samples(x) {
            let p = &self.training.positions()[s];
            v -= k_spsr(x, p, &self.grid, &self.cfg)? * k_spsr(p, y, &self.grid, &self.cfg)?
                / self.lumped[s];
        }
        Ok(v)
    }

    /// Quadratic form g^T (K_V (x) I_3) g over a staggered field, applied
    /// as kernel term minus the lumped low-rank correction; never
    /// materializes a dense covariance.
    pub fn quadratic_form(&self, g: &StaggeredField) -> Result<f64, SpsrError> {
        let grid = &self.grid;
        let cfg = &self.cfg;
        let h = grid.h();
        let support = cfg.support_cells();
        let n_axis = grid.nodes_per_axis();
        let mut total = 0.0;

        for c in 0..3 {
            let gd = &g.data[c];
            let dims = g.dims(c);
            // node accumulator S_F[o] = sum_e F_o(x_e) g[e]
            let mut node_acc = vec![0.0; grid.node_count()];
            for i in 0..dims[0] {
                for j in 0..dims[1] {
                    for l in 0..dims[2] {
                        let e = g.index(c, i, j, l);
                        let ge = gd[e];
                        if ge == 0.0 {
                            continue;
                        }
                        let x = g.position(grid, c, i, j, l);
                        // grid nodes within bump support of x
                        let mut lo = [0usize; 3];
                        let mut hi = [0usize; 3];
                        for a in 0..3 {
                            let t = (x[a] - grid.origin()[a]) / h;
                            lo[a] = (t - support).ceil().max(0.0) as usize;
                            hi[a] = (t + support).floor().min((n_axis - 1) as f64) as usize;
                        }
                        for ni in lo[0]..=hi[0] {
                            for nj in lo[1]..=hi[1] {
                                for nl in lo[2]..=hi[2] {
                                    let node = grid.node_position(ni, nj, nl);
                                    let f = bump(&(x - node), h, cfg);
                                    if f != 0.0 {
                                        node_acc[grid.node_index(ni, nj, nl)] += f * ge;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            // g^T K_psr g = sigma_g * sum_e g[e] * sum_{o in B(x_e)} alpha_o S_F[o]
            let mut kernel_term = 0.0;
            for i in 0..dims[0] {
                for j in 0..dims[1] {
                    for l in 0..dims[2] {
                        let e = g.index(c, i, j, l);
                        let ge = gd[e];
                        if ge == 0.0 {
                            continue;
                        }
                        let x = g.position(grid, c, i, j, l);
                        let (idx, w) = grid.trilinear_weights(&x)?;
                        let mut acc = 0.0;
                        for (&o, &wo) in idx.iter().zip(w.iter()) {
                            acc += wo * node_acc[o];
                        }
                        kernel_term += ge * acc;
                    }
                }
            }
            total += cfg.sigma_g * kernel_term;

            // low-rank correction: sum_s (k(p_s, .) . g)^2 / D_s
            for (s, p) in self.training.positions().iter().enumerate() {
                let mut dot = 0.0;
                let mut lo = [0usize; 3];
                let mut hi = [0usize; 3];
                for a in 0..3 {
                    let off = if a == c { 0.5 } else { 0.0 };
                    let t = (p[a] - grid.origin()[a]) / h - off;
                    lo[a] = (t - cfg.reach_cells()).ceil().max(0.0) as usize;
                    hi[a] = (t + cfg.reach_cells()).floor().min((dims[a] - 1) as f64) as usize;
                }
                for i in lo[0]..=hi[0] {
                    for j in lo[1]..=hi[1] {
                        for l in lo[2]..=hi[2] {
                            let e = g.index(c, i, j, l);
                            if gd[e] == 0.0 {
                                continue;
                            }
                            let x = g.position(grid, c, i, j, l);
                            let kv = k_spsr(p, &x, grid, cfg)?;
                            if kv != 0.0 {
                                dot += kv * gd[e];
                            }
                        }
                    }
                }
                total -= dot * dot / self.lumped[s];
            }
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn sphere_samples(n: usize, seed: u64) -> OrientedPointSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = OrientedPointSet::default();
        for _ in 0..n {
            let v = Vector3::new(
                rng.sample::<f64, _>(rand_distr::StandardNormal),
                rng.sample::<f64, _>(rand_distr::StandardNormal),
                rng.sample::<f64, _>(rand_distr::StandardNormal),
            )
            .normalize();
            set.push(v, v);
        }
        set
    }

    fn fixture() -> (OrientedPointSet, VoxelGrid, KernelConfig) {
        let samples = sphere_samples(500, 17);
        let grid = VoxelGrid::new(16, Vector3::repeat(-1.5), 3.0 / 16.0);
        (samples, grid, KernelConfig::default())
    }

    #[test]
    fn parallel_normals_give_parallel_mean_field() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut set = OrientedPointSet::default();
        for _ in 0..50 {
            set.push(
                Vector3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ),
                Vector3::z(),
            );
        }
        let grid = VoxelGrid::new(16, Vector3::repeat(-1.5), 3.0 / 16.0);
        let field = NormalFieldPosterior::fit(&set, &grid, &KernelConfig::default()).unwrap();
        for _ in 0..100 {
            let x = Vector3::new(
                rng.gen_range(-1.4..1.4),
                rng.gen_range(-1.4..1.4),
                rng.gen_range(-1.4..1.4),
            );
            let v = field.mean_at(&x).unwrap();
            assert!(v.x.abs() < 1e-12 && v.y.abs() < 1e-12);
            assert!(v.z >= 0.0);
        }
    }

    #[test]
    fn pointwise_variance_is_nonnegative() {
        let (samples, grid, cfg) = fixture();
        let field = NormalFieldPosterior::fit(&samples, &grid, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..1000 {
            let x = Vector3::new(
                rng.gen_range(-1.4..1.4),
                rng.gen_range(-1.4..1.4),
                rng.gen_range(-1.4..1.4),
            );
            let v = field.variance_at(&x).unwrap();
            assert!(v >= -1e-9, "variance {v} at {x:?}");
        }
    }

    #[test]
    fn far_field_reverts_to_prior() {
        let (samples, grid, cfg) = fixture();
        let field = NormalFieldPosterior::fit(&samples, &grid, &cfg).unwrap();
        // box corner region is far outside kernel reach of the unit sphere
        let x = Vector3::repeat(-1.45);
        let v = field.mean_at(&x).unwrap();
        assert_eq!(v, Vector3::zeros());
        let prior = k_spsr(&x, &x, &grid, &cfg).unwrap();
        assert!((field.variance_at(&x).unwrap() - prior).abs() < 1e-9);
    }

    #[test]
    fn duplicated_training_set_stays_finite() {
        let (samples, grid, cfg) = fixture();
        let mut doubled = samples.clone();
        doubled.extend(&samples);
        let field = NormalFieldPosterior::fit(&doubled, &grid, &cfg).unwrap();
        let x = Vector3::new(1.0, 0.0, 0.0);
        let v = field.variance_at(&x).unwrap();
        assert!(v.is_finite());
        assert!(v >= -1e-9);
        for d in field.lumped_weights() {
            assert!(d.is_finite() && *d > 0.0);
        }
    }

    #[test]
    fn quadratic_form_matches_direct_covariance_sum() {
        // small grid so the dense oracle stays cheap
        let samples = sphere_samples(60, 29);
        let grid = VoxelGrid::new(6, Vector3::repeat(-1.5), 0.5);
        let cfg = KernelConfig::default();
        let field = NormalFieldPosterior::fit(&samples, &grid, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut g = StaggeredField::zeros(&grid);
        for c in 0..3 {
            for v in &mut g.data[c] {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        let fast = field.quadratic_form(&g).unwrap();
        // brute force: sum over all pairs of staggered points per component
        let mut slow = 0.0;
        for c in 0..3 {
            let dims = g.dims(c);
            let mut positions = Vec::new();
            for i in 0..dims[0] {
                for j in 0..dims[1] {
                    for l in 0..dims[2] {
                        positions.push(g.position(&grid, c, i, j, l));
                    }
                }
            }
            for (a, xa) in positions.iter().enumerate() {
                for (b, xb) in positions.iter().enumerate() {
                    let kv = field.covariance_at(xa, xb).unwrap();
                    slow += g.data[c][a] * kv * g.data[c][b];
                }
            }
        }
        assert!(
            (fast - slow).abs() <= 1e-8 * slow.abs().max(1.0),
            "fast {fast} vs slow {slow}"
        );
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let samples = sphere_samples(5, 1);
        let grid = VoxelGrid::new(8, Vector3::repeat(-1.5), 3.0 / 8.0);
        assert!(matches!(
            NormalFieldPosterior::fit(&samples, &grid, &KernelConfig::default()),
            Err(SpsrError::TooFewSamples { .. })
        ));
    }
}
