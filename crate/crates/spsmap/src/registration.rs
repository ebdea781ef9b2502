//! Point-to-point ICP with random restarts and the ADD pose-error metric.

use nalgebra::{Matrix3, Unit, UnitQuaternion, Vector3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{KdTree, OrientedPointSet, Pose};

pub const DEFAULT_ICP_MAX_ITER: usize = 100;
pub const DEFAULT_RESTART_ROTATION: f64 = 0.1;
pub const DEFAULT_RESTART_TRANSLATION_FRACTION: f64 = 0.05;

#[derive(Debug, Error)]
pub enum RegistrationError {
    #[error("point set is empty")]
    EmptySet,
    #[error("no correspondences within {max_corr_dist} m at the initial pose")]
    NoCorrespondences { max_corr_dist: f64 },
    #[error("correspondence distance must be positive, got {0}")]
    NonPositiveCorrDist(f64),
}

/// Outcome of one ICP run.
#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    pub pose: Pose,
    /// Fraction of source points with a correspondence at convergence.
    pub fitness: f64,
    /// Root-mean-square correspondence distance at convergence (m).
    pub rmse: f64,
    pub iterations: usize,
    /// RMSE after each iteration; non-increasing for point-to-point ICP.
    pub rmse_trace: Vec<f64>,
}

/// Closed-form rigid alignment (Kabsch/Umeyama without scale) mapping
/// `source` points onto paired `target` points.
pub fn kabsch(source: &[Vector3<f64>], target: &[Vector3<f64>]) -> Pose {
    assert_eq!(source.len(), target.len());
    assert!(!source.is_empty());
    let n = source.len() as f64;
    let sc: Vector3<f64> = source.iter().sum::<Vector3<f64>>() / n;
    let tc: Vector3<f64> = target.iter().sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (s, t) in source.iter().zip(target) {
        h += (t - tc) * (s - sc).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let mut rotation = u * vt;
    if rotation.determinant() < 0.0 {
        let mut u_fixed = u;
        u_fixed.set_column(2, &(-u.column(2)));
        rotation = u_fixed * vt;
    }
    let translation = tc - rotation * sc;
    Pose::new(rotation, translation).expect("SVD yields a proper rotation")
}

/// Point-to-point ICP from a single initialization.
pub fn icp(
    source: &OrientedPointSet,
    target: &OrientedPointSet,
    init: &Pose,
    max_corr_dist: f64,
    max_iter: usize,
) -> Result<RegistrationResult, RegistrationError> {
    if source.is_empty() || target.is_empty() {
        return Err(RegistrationError::EmptySet);
    }
    if max_corr_dist <= 0.0 {
        return Err(RegistrationError::NonPositiveCorrDist(max_corr_dist));
    }
    let target_points = target.positions();
    let tree = KdTree::build(target_points);
    let max_dist2 = max_corr_dist * max_corr_dist;
    let mut pose = *init;
    let mut rmse_trace = Vec::new();
    let mut fitness = 0.0;
    let mut rmse = f64::INFINITY;
    let mut iterations = 0;
    for iter in 0..max_iter {
        let mut src = Vec::new();
        let mut dst = Vec::new();
        let mut sum2 = 0.0;
        for p in source.positions() {
            let moved = pose.apply(p);
            let j = tree.knn(target_points, &moved, 1)[0];
            let d2 = (target_points[j] - moved).norm_squared();
            if d2 <= max_dist2 {
                src.push(*p);
                dst.push(target_points[j]);
                sum2 += d2;
            }
        }
        if src.is_empty() {
            if iter == 0 {
                return Err(RegistrationError::NoCorrespondences { max_corr_dist });
            }
            break;
        }
        fitness = src.len() as f64 / source.positions().len() as f64;
        rmse = (sum2 / src.len() as f64).sqrt();
        rmse_trace.push(rmse);
        let next = kabsch(&src, &dst);
        let delta = (next.translation() - pose.translation()).norm()
            + (next.rotation() - pose.rotation()).norm();
        iterations = iter + 1;
        pose = next;
        if delta < 1e-8 {
            break;
        }
    }
    Ok(RegistrationResult {
        pose,
        fitness,
        rmse,
        iterations,
        rmse_trace,
    })
}

/// Mean spacing of a cloud, estimated from nearest-neighbor distances.
pub fn mean_spacing(cloud: &OrientedPointSet) -> f64 {
    let points = cloud.positions();
    if points.len() < 2 {
        return 0.0;
    }
    let tree = KdTree::build(points);
    let mut sum = 0.0;
    for (i, p) in points.iter().enumerate() {
        let nn = tree.knn(points, p, 2);
        let j = if nn[0] == i { nn[1] } else { nn[0] };
        sum += (points[j] - p).norm();
    }
    sum / points.len() as f64
}

fn cloud_diameter(cloud: &OrientedPointSet) -> f64 {
    match cloud.aabb() {
        Some((lo, hi)) => (hi - lo).norm(),
        None => 0.0,
    }
}

/// `n` ICP runs from initializations perturbed around `init` by uniform
/// rotations up to `perturb` radians and translations up to
/// `perturb * cloud diameter`. Deterministic per seed via stream-split RNGs.
#[allow(clippy::too_many_arguments)]
pub fn icp_restarts(
    source: &OrientedPointSet,
    target: &OrientedPointSet,
    init: &Pose,
    n: usize,
    perturb: f64,
    seed: u64,
    max_corr_dist: f64,
    max_iter: usize,
) -> Result<Vec<RegistrationResult>, RegistrationError> {
    assert!(n >= 1, "restart count must be positive");
    let diameter = cloud_diameter(target);
    let mut out = Vec::with_capacity(n);
    for run in 0..n {
        let start = if perturb == 0.0 {
            *init
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(run as u64);
            let axis = Unit::new_normalize(Vector3::new(
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
            ));
            let angle = perturb * rng.gen::<f64>();
            let rotation = UnitQuaternion::from_axis_angle(&axis, angle).to_rotation_matrix();
            let mut shift = Vector3::zeros();
            for a in 0..3 {
                shift[a] = (rng.gen::<f64>() - 0.5) * 2.0 * perturb * diameter;
            }
            Pose::new(
                rotation.matrix() * init.rotation(),
                rotation.matrix() * init.translation() + shift,
            )
            .expect("composition of rotations")
        };
        out.push(icp(source, target, &start, max_corr_dist, max_iter)?);
    }
    Ok(out)
}

/// ADD = mean over model points of the displacement between the two poses.
pub fn add_metric(
    model: &OrientedPointSet,
    est: &Pose,
    gt: &Pose,
) -> Result<f64, RegistrationError> {
    if model.is_empty() {
        return Err(RegistrationError::EmptySet);
    }
    let sum: f64 = model
        .positions()
        .iter()
        .map(|x| (est.apply(x) - gt.apply(x)).norm())
        .sum();
    Ok(sum / model.positions().len() as f64)
}
