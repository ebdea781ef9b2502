//! Map maintenance over time: prior construction from a point cloud, a
//! rectangular probe schedule around the estimated hole pose, and sequential
//! fusion of contact hypothesis sets by full lumped refit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;
use thiserror::Error;

use crate::contact::{sense_contacts, ContactError, ContactHypothesisSet, SensorConfig,
    WrenchMeasurement};
use crate::geometry::{GeometryError, OrientedPointSet, Pose, TriangleMesh};
use crate::registration::{add_metric, icp, mean_spacing, RegistrationError};
use crate::spsr::{fit, KernelConfig, SpsMapState, SpsrError, VoxelGrid};

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("all {0} particles lie outside the map grid")]
    AllParticlesOutsideGrid(usize),
    #[error(transparent)]
    Spsr(#[from] SpsrError),
    #[error(transparent)]
    Contact(#[from] ContactError),
    #[error(transparent)]
    Registration(#[from] RegistrationError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Provenance tag for each training point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointSource {
    Cloud,
    Contact,
}

/// Pipeline parameters; `model` is the reference point set the map is
/// registered against to estimate the hole pose.
#[derive(Debug, Clone)]
pub struct FusionConfig {
    pub grid_k: usize,
    pub inflate: f64,
    pub kernel: KernelConfig,
    /// Points extracted from the map level set for registration.
    pub surface_samples: usize,
    pub icp_max_iter: usize,
    pub sensor: SensorConfig,
    pub seed: u64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            grid_k: 32,
            inflate: 0.25,
            kernel: KernelConfig::default(),
            surface_samples: 2000,
            icp_max_iter: 100,
            sensor: SensorConfig::default(),
            seed: 0,
        }
    }
}

/// Rectangular lattice of probe poses around the estimated hole pose.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSchedule {
    pub poses: Vec<Pose>,
    pub depth: f64,
}

/// Map, tagged training set, and hole-pose estimate after `t` fusions.
#[derive(Debug, Clone)]
pub struct FusionState {
    training: OrientedPointSet,
    sources: Vec<PointSource>,
    map: SpsMapState,
    grid: VoxelGrid,
    kernel: KernelConfig,
    x_hat: Pose,
    t: usize,
}

/// One metrics-trace entry recorded after each fusion step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub n_particles_fused: usize,
    /// ADD against ground truth; NaN when no ground truth was supplied.
    pub add_error: f64,
    pub mean_variance_at_probes: f64,
}

/// Extracted level-set points are kept only where the conditioning has
/// removed at least this share of the prior variance.
pub const CONFIDENT_VARIANCE_FRACTION: f64 = 0.95;

/// Extract level-set points and drop the data-starved ones.
///
/// The posterior mean closes the surface through unobserved regions
/// (undersides, self-occlusions, the far-field decay skirt); there the
/// normal-field posterior retains essentially all of its prior variance,
/// while observed surface retains clearly less. Thresholding the remaining
/// variance fraction at `max_fraction` keeps the observed surface and
/// discards the hallucinated rest. Falls back to the full extraction if
/// nothing passes the threshold.
pub fn confident_surface_points(
    map: &SpsMapState,
    n: usize,
    max_fraction: f64,
    seed: u64,
) -> Result<OrientedPointSet, FusionError> {
    let full = map.extract_surface_points(n, seed)?;
    let field = map.normal_field();
    let mut positions = Vec::new();
    let mut normals = Vec::new();
    for i in 0..full.len() {
        if field.variance_fraction_at(&full.positions()[i])? < max_fraction {
            positions.push(full.positions()[i]);
            normals.push(full.normals()[i]);
        }
    }
    if positions.is_empty() {
        return Ok(full);
    }
    Ok(OrientedPointSet::new(positions, normals))
}

/// Register points extracted from the map level set onto `model`.
///
/// The extracted set is partial (variance-filtered), so it is the ICP
/// source; the recovered alignment is inverted to give the object pose.
fn estimate_pose(
    map: &SpsMapState,
    model: &OrientedPointSet,
    cfg: &FusionConfig,
) -> Result<Pose, FusionError> {
    let surface =
        confident_surface_points(map, cfg.surface_samples, CONFIDENT_VARIANCE_FRACTION, cfg.seed)?;
    let corr = (2.0 * mean_spacing(model)).max(4.0 * map.grid().h());
    let result = icp(&surface, model, &Pose::identity(), corr, cfg.icp_max_iter)?;
    Ok(result.pose.inverse())
}

impl FusionState {
    pub fn map(&self) -> &SpsMapState {
        &self.map
    }

    pub fn training(&self) -> &OrientedPointSet {
        &self.training
    }

    pub fn sources(&self) -> &[PointSource] {
        &self.sources
    }

    pub fn x_hat(&self) -> &Pose {
        &self.x_hat
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    /// Append in-grid particles with gradient-consistent normals, refit the
    /// posterior on the fixed grid, and bump the update counter. Returns the
    /// new state and the number of dropped out-of-grid particles.
    pub fn fuse_contacts(
        &self,
        set: &ContactHypothesisSet,
    ) -> Result<(FusionState, usize), FusionError> {
        let mut training = self.training.clone();
        let mut sources = self.sources.clone();
        let mut dropped = 0usize;
        let mut kept = 0usize;
        for particle in &set.particles {
            if !self.grid.contains(&particle.position) {
                dropped += 1;
                continue;
            }
            // SPSR needs outward normals; keep the force direction unless it
            // disagrees with the current outward gradient
            let mut normal = particle.normal;
            if let Ok(g) = self.map.mean_gradient(&particle.position) {
                if g.dot(&normal) < 0.0 {
                    normal = -normal;
                }
            }
            training.push(particle.position, normal);
            sources.push(PointSource::Contact);
            kept += 1;
        }
        if kept == 0 {
            return Err(FusionError::AllParticlesOutsideGrid(set.particles.len()));
        }
        let map = fit(&training, &self.grid, &self.kernel)?;
        Ok((
            FusionState {
                training,
                sources,
                map,
                grid: self.grid.clone(),
                kernel: self.kernel,
                x_hat: self.x_hat,
                t: self.t + 1,
            },
            dropped,
        ))
    }
}

/// Fit the prior map from a point cloud and register it against the model.
pub fn build_prior(
    cloud: &OrientedPointSet,
    model: &OrientedPointSet,
    cfg: &FusionConfig,
) -> Result<FusionState, FusionError> {
    let grid = VoxelGrid::containing(cloud, cfg.grid_k, cfg.inflate)?;
    let map = fit(cloud, &grid, &cfg.kernel)?;
    let x_hat = estimate_pose(&map, model, cfg)?;
    Ok(FusionState {
        training: cloud.clone(),
        sources: vec![PointSource::Cloud; cloud.len()],
        map,
        grid,
        kernel: cfg.kernel,
        x_hat,
        t: 0,
    })
}

/// rows x cols probe poses on a planar lattice centered at `x_hat`, axes
/// aligned with its rotation, all sharing its orientation.
pub fn make_schedule(
    x_hat: &Pose,
    rows: usize,
    cols: usize,
    pitch: f64,
    depth: f64,
) -> ProbeSchedule {
    assert!(rows >= 1 && cols >= 1, "lattice must be non-empty");
    assert!(pitch > 0.0, "pitch must be positive");
    let mut poses = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let u = (r as f64 - (rows as f64 - 1.0) / 2.0) * pitch;
            let v = (c as f64 - (cols as f64 - 1.0) / 2.0) * pitch;
            let offset = x_hat.rotate(&Vector3::new(u, v, 0.0));
            let pose = Pose::new(*x_hat.rotation(), x_hat.translation() + offset)
                .expect("rotation unchanged");
            poses.push(pose);
        }
    }
    ProbeSchedule { poses, depth }
}

/// End-to-end sequential fusion: prior from the cloud, then one fusion per
/// contact-flagged wrench. The trace records the registration error after
/// every step; `ground_truth` enables the ADD column.
pub fn run_pipeline(
    cloud: &OrientedPointSet,
    wrenches: &[WrenchMeasurement],
    peg: &TriangleMesh,
    model: &OrientedPointSet,
    ground_truth: Option<&Pose>,
    probe_sites: &[Vector3<f64>],
    cfg: &FusionConfig,
) -> Result<(FusionState, Vec<TraceRow>), FusionError> {
    let mut state = build_prior(cloud, model, cfg)?;
    let mut trace = Vec::new();
    let add = |pose: &Pose| -> Result<f64, FusionError> {
        match ground_truth {
            Some(gt) => Ok(add_metric(model, pose, gt)?),
            None => Ok(f64::NAN),
        }
    };
    let probe_variance = |state: &FusionState| -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for site in probe_sites {
            if let Ok(v) = state.map.query_variance(site) {
                sum += v;
                n += 1;
            }
        }
        if n == 0 {
            f64::NAN
        } else {
            sum / n as f64
        }
    };
    trace.push(TraceRow {
        step: 0,
        n_particles_fused: 0,
        add_error: add(&state.x_hat)?,
        mean_variance_at_probes: probe_variance(&state),
    });
    let mut fused_total = 0usize;
    for w in wrenches {
        if !w.contact {
            continue;
        }
        let Some(set) = sense_contacts(peg, &w.ee_pose, w, &cfg.sensor)? else {
            continue;
        };
        let (next, _) = state.fuse_contacts(&set)?;
        state = next;
        fused_total += set.particles.len();
        state.x_hat = estimate_pose(&state.map, model, cfg)?;
        trace.push(TraceRow {
            step: state.t,
            n_particles_fused: fused_total,
            add_error: add(&state.x_hat)?,
            mean_variance_at_probes: probe_variance(&state),
        });
    }
    Ok((state, trace))
}

/// Write the metrics trace as CSV.
pub fn write_trace(trace: &[TraceRow], path: &Path) -> Result<(), FusionError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "step,n_particles_fused,add_error,mean_variance_at_probes")?;
    for row in trace {
        writeln!(
            w,
            "{},{},{:.17e},{:.17e}",
            row.step, row.n_particles_fused, row.add_error, row.mean_variance_at_probes
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::ContactParticle;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn sphere_cloud(n: usize, seed: u64) -> OrientedPointSet {
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

    fn small_config() -> FusionConfig {
        FusionConfig {
            grid_k: 16,
            surface_samples: 400,
            ..FusionConfig::default()
        }
    }

    fn particle_at(p: Vector3<f64>, n: Vector3<f64>) -> ContactHypothesisSet {
        ContactHypothesisSet {
            particles: vec![ContactParticle {
                position: p,
                normal: n,
                likelihood: 1.0,
            }],
            timestamp: 0.0,
        }
    }

    #[test]
    fn prior_reproduces_the_sphere_and_registers_near_identity() {
        let cloud = sphere_cloud(800, 1);
        let state = build_prior(&cloud, &cloud, &small_config()).unwrap();
        assert_eq!(state.t(), 0);
        let surface = state.map().extract_surface_points(300, 2).unwrap();
        for p in surface.positions() {
            let r = p.norm();
            assert!((0.8..1.2).contains(&r), "radius {r}");
        }
        assert!(state.x_hat().translation().norm() < 0.05);
    }

    #[test]
    fn single_cell_schedule_sits_at_the_estimate() {
        let x_hat = Pose::from_axis_angle(
            Vector3::z(),
            0.3,
            Vector3::new(0.1, -0.2, 0.05),
        );
        let s = make_schedule(&x_hat, 1, 1, 0.01, 0.02);
        assert_eq!(s.poses.len(), 1);
        assert_eq!(s.poses[0], x_hat);
    }

    #[test]
    fn two_by_two_schedule_has_lattice_spacing() {
        let s = make_schedule(&Pose::identity(), 2, 2, 0.01, 0.02);
        assert_eq!(s.poses.len(), 4);
        for i in 0..4 {
            for j in (i + 1)..4 {
                let d = (s.poses[i].translation() - s.poses[j].translation()).norm();
                let ok = (d - 0.01).abs() < 1e-12
                    || (d - 0.01 * std::f64::consts::SQRT_2).abs() < 1e-12;
                assert!(ok, "pairwise distance {d}");
            }
        }
    }

    #[test]
    fn schedule_transforms_rigidly_with_the_estimate() {
        let base = make_schedule(&Pose::identity(), 3, 2, 0.02, 0.01);
        let g = Pose::from_axis_angle(Vector3::new(1.0, 2.0, 0.5), 0.7, Vector3::new(0.3, 0.1, -0.2));
        let moved = make_schedule(&g, 3, 2, 0.02, 0.01);
        for (a, b) in base.poses.iter().zip(&moved.poses) {
            let expected = g.compose(a);
            assert!((b.translation() - expected.translation()).norm() < 1e-12);
            assert!((b.rotation() - expected.rotation()).norm() < 1e-12);
        }
    }

    #[test]
    fn fusion_is_order_invariant_and_counts_updates() {
        let cloud = sphere_cloud(600, 3);
        let state = build_prior(&cloud, &cloud, &small_config()).unwrap();
        let a = particle_at(Vector3::new(1.0, 0.0, 0.0), Vector3::x());
        let b = particle_at(Vector3::new(0.0, 1.0, 0.0), Vector3::y());
        let (s1, _) = state.fuse_contacts(&a).unwrap();
        let (s12, _) = s1.fuse_contacts(&b).unwrap();
        let (s2, _) = state.fuse_contacts(&b).unwrap();
        let (s21, _) = s2.fuse_contacts(&a).unwrap();
        assert_eq!(s12.t(), 2);
        let m1 = s12.map().mean_values();
        let m2 = s21.map().mean_values();
        let max_diff = m1
            .iter()
            .zip(m2)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(max_diff <= 1e-9, "order changed the mean by {max_diff}");
    }

    #[test]
    fn variance_never_increases_at_a_fused_site() {
        // occlude the polar cap so the probed site is data-starved, as it
        // is for contacts inside the unseen pocket
        let full = sphere_cloud(900, 4);
        let mut cloud = OrientedPointSet::default();
        for (p, n) in full.iter() {
            if p.z < 0.8 {
                cloud.push(*p, *n);
            }
        }
        let state = build_prior(&cloud, &cloud, &small_config()).unwrap();
        let site = Vector3::new(0.0, 0.0, 1.0);
        let before = state.map().query_variance(&site).unwrap();
        let (after_state, _) = state.fuse_contacts(&particle_at(site, Vector3::z())).unwrap();
        let after = after_state.map().query_variance(&site).unwrap();
        assert!(after <= before + 1e-9, "{after} > {before}");
    }

    #[test]
    fn fusion_refit_matches_a_fresh_fit_of_the_training_set() {
        let cloud = sphere_cloud(500, 5);
        let state = build_prior(&cloud, &cloud, &small_config()).unwrap();
        let (fused, _) = state
            .fuse_contacts(&particle_at(Vector3::new(1.0, 0.0, 0.0), Vector3::x()))
            .unwrap();
        let fresh = fit(fused.training(), fused.grid(), &KernelConfig::default()).unwrap();
        let max_diff = fused
            .map()
            .mean_values()
            .iter()
            .zip(fresh.mean_values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(max_diff <= 1e-9);
        assert_eq!(fused.sources().last(), Some(&PointSource::Contact));
    }

    #[test]
    fn out_of_grid_particles_are_dropped() {
        let cloud = sphere_cloud(500, 6);
        let state = build_prior(&cloud, &cloud, &small_config()).unwrap();
        let set = ContactHypothesisSet {
            particles: vec![
                ContactParticle {
                    position: Vector3::new(50.0, 0.0, 0.0),
                    normal: Vector3::x(),
                    likelihood: 1.0,
                },
                ContactParticle {
                    position: Vector3::new(1.0, 0.0, 0.0),
                    normal: Vector3::x(),
                    likelihood: 1.0,
                },
            ],
            timestamp: 0.0,
        };
        let (next, dropped) = state.fuse_contacts(&set).unwrap();
        assert_eq!(dropped, 1);
        assert_eq!(next.training().len(), state.training().len() + 1);
        let far = particle_at(Vector3::new(50.0, 0.0, 0.0), Vector3::x());
        assert!(matches!(
            state.fuse_contacts(&far),
            Err(FusionError::AllParticlesOutsideGrid(1))
        ));
    }

    #[test]
    fn inward_normals_are_flipped_to_match_the_gradient() {
        let cloud = sphere_cloud(600, 7);
        let state = build_prior(&cloud, &cloud, &small_config()).unwrap();
        let site = Vector3::new(1.0, 0.0, 0.0);
        let (fused, _) = state.fuse_contacts(&particle_at(site, -Vector3::x())).unwrap();
        let n = fused.training().normals().last().unwrap();
        assert!(n.dot(&Vector3::x()) > 0.0, "normal not flipped: {n:?}");
    }

    #[test]
    fn pipeline_without_contacts_returns_the_prior() {
        let cloud = sphere_cloud(500, 8);
        let cfg = small_config();
        let peg = crate::sim::cylinder_mesh(0.1, 0.4, 16);
        let (state, trace) =
            run_pipeline(&cloud, &[], &peg, &cloud, None, &[Vector3::x()], &cfg).unwrap();
        assert_eq!(state.t(), 0);
        assert_eq!(trace.len(), 1);
        assert!(trace[0].add_error.is_nan());
        let prior = build_prior(&cloud, &cloud, &cfg).unwrap();
        assert_relative_eq!(
            state.map().mean_values()[100],
            prior.map().mean_values()[100]
        );
    }

    #[test]
    fn trace_round_trips_through_csv_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let trace = vec![TraceRow {
            step: 1,
            n_particles_fused: 12,
            add_error: 0.5,
            mean_variance_at_probes: 0.25,
        }];
        write_trace(&trace, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("step,n_particles_fused,add_error,mean_variance_at_probes\n"));
        assert!(text.contains("1,12,"));
    }
}
