use nalgebra::{Unit, UnitQuaternion, Vector3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use super::raycast::ray_mesh_intersect;
use super::{Scene, SimError};
use crate::contact::WrenchMeasurement;
use crate::geometry::{sample_surface, Pose};

/// True contact location, kept alongside the synthesized wrench so tests
/// can score localization error.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthContact {
    /// Contact point in world frame.
    pub position: Vector3<f64>,
    /// Outward normal of the environment surface at the contact.
    pub surface_normal: Vector3<f64>,
    /// Every peg-surface sample in simultaneous first touch, with the
    /// environment normal at each, in world frame. Face and edge contacts
    /// touch a patch, not a point; `position` is one representative of it.
    pub patch: Vec<(Vector3<f64>, Vector3<f64>)>,
}

/// Scripted vertical-probe parameters.
#[derive(Debug, Clone, Copy)]
pub struct ProbeParams {
    /// Reaction force magnitude at contact (N).
    pub force_magnitude: f64,
    /// Std of additive Gaussian noise on each force component (N).
    pub force_noise_sigma: f64,
    /// Std of additive Gaussian noise on each torque component (N m).
    pub torque_noise_sigma: f64,
    /// Fraction of the friction half-angle used to tilt the reaction
    /// force off the surface normal, in [0, 1).
    pub friction_tilt: f64,
    /// Friction coefficient used for the tilt bound.
    pub mu: f64,
    /// Abort a probe whose descent exceeds this distance (m).
    pub max_descent: f64,
    /// Peg surface samples used to detect first touch.
    pub surface_samples: usize,
    pub seed: u64,
}

impl Default for ProbeParams {
    fn default() -> Self {
        Self {
            force_magnitude: 5.0,
            force_noise_sigma: 0.0,
            torque_noise_sigma: 0.0,
            friction_tilt: 0.0,
            mu: 0.5,
            max_descent: 0.5,
            surface_samples: 4000,
            seed: 0,
        }
    }
}

/// Quasi-static wrench at the sensor origin from a single point contact.
/// The torque column follows the moment-arm residual convention:
/// tau = (p_O - q) x f.
pub fn synthesize_wrench(
    contact: &GroundTruthContact,
    ee_pose: &Pose,
    params: &ProbeParams,
    timestamp: f64,
    rng: &mut ChaCha8Rng,
) -> WrenchMeasurement {
    let mut force = contact.surface_normal * params.force_magnitude;
    if params.friction_tilt > 0.0 {
        let angle = params.friction_tilt * params.mu.atan() * rng.gen::<f64>();
        let tangent = {
            let mut t = contact.surface_normal.cross(&Vector3::x());
            if t.norm() < 1e-9 {
                t = contact.surface_normal.cross(&Vector3::y());
            }
            t.normalize()
        };
        let spin = UnitQuaternion::from_axis_angle(
            &Unit::new_normalize(contact.surface_normal),
            rng.gen::<f64>() * std::f64::consts::TAU,
        );
        let tilt = UnitQuaternion::from_axis_angle(&Unit::new_normalize(spin * tangent), angle);
        force = tilt * force;
    }
    if params.force_noise_sigma > 0.0 {
        let n = Normal::new(0.0, params.force_noise_sigma).expect("sigma > 0");
        for a in 0..3 {
            force[a] += rng.sample(n);
        }
    }
    let mut torque = (ee_pose.translation() - contact.position).cross(&force);
    if params.torque_noise_sigma > 0.0 {
        let n = Normal::new(0.0, params.torque_noise_sigma).expect("sigma > 0");
        for a in 0..3 {
            torque[a] += rng.sample(n);
        }
    }
    WrenchMeasurement {
        force,
        torque,
        contact: true,
        ee_pose: *ee_pose,
        timestamp,
    }
}

/// Lower the peg straight down from each start pose until its surface first
/// touches the fixture, then record the wrench and the true contact. Probes
/// that never touch within `max_descent` emit a zero-wrench row with the
/// contact flag cleared and `None` ground truth.
pub fn scripted_probe_run(
    scene: &Scene,
    start_poses: &[Pose],
    params: &ProbeParams,
) -> Result<(Vec<WrenchMeasurement>, Vec<Option<GroundTruthContact>>), SimError> {
    let fixture = scene.world_hole_mesh();
    let samples = sample_surface(&scene.peg_mesh, params.surface_samples, params.seed)?;
    let down = -Vector3::z();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut wrenches = Vec::with_capacity(start_poses.len());
    let mut truths = Vec::with_capacity(start_poses.len());
    const PATCH_TOLERANCE: f64 = 1e-9;
    for (index, start) in start_poses.iter().enumerate() {
        let mut hits: Vec<(f64, Vector3<f64>, usize)> = Vec::new();
        for (p_peg, _) in samples.iter() {
            let p = start.apply(p_peg);
            if let Some((t, face)) = ray_mesh_intersect(&p, &down, &fixture) {
                hits.push((t, p, face));
            }
        }
        let best = hits
            .iter()
            .map(|&(t, _, _)| t)
            .fold(f64::INFINITY, f64::min);
        match best {
            descent if descent <= params.max_descent => {
                let patch: Vec<(Vector3<f64>, Vector3<f64>)> = hits
                    .iter()
                    .filter(|&&(t, _, _)| t - descent <= PATCH_TOLERANCE)
                    .map(|&(_, p, face)| (p + down * descent, fixture.face_normals()[face]))
                    .collect();
                let (position, surface_normal) = patch[0];
                let contact = GroundTruthContact {
                    position,
                    surface_normal,
                    patch,
                };
                let ee_pose =
                    Pose::new(*start.rotation(), start.translation() + down * descent)
                        .expect("translation keeps rotation valid");
                let w = synthesize_wrench(&contact, &ee_pose, params, index as f64, &mut rng);
                wrenches.push(w);
                truths.push(Some(contact));
            }
            _ => {
                wrenches.push(WrenchMeasurement {
                    force: Vector3::zeros(),
                    torque: Vector3::zeros(),
                    contact: false,
                    ee_pose: *start,
                    timestamp: index as f64,
                });
                truths.push(None);
            }
        }
    }
    Ok((wrenches, truths))
}
