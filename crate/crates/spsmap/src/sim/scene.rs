use nalgebra::{Matrix3, Vector3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use super::raycast::ray_mesh_intersect;
use super::{cylinder_mesh, plate_with_pocket_mesh, SimError};
use crate::geometry::{estimate_normals, OrientedPointSet, Pose, TriangleMesh};

/// Pinhole model; pixels are sampled on a regular `width` x `height`
/// lattice.
#[derive(Debug, Clone, Copy)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn square(resolution: usize, focal: f64) -> Self {
        let c = (resolution as f64 - 1.0) / 2.0;
        Self {
            fx: focal,
            fy: focal,
            cx: c,
            cy: c,
            width: resolution,
            height: resolution,
        }
    }
}

/// Time-of-flight style depth noise: sigma_d = k1 (z - k2)^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthNoiseModel {
    pub k1: f64,
    pub k2: f64,
}

impl DepthNoiseModel {
    pub fn new(k1: f64, k2: f64) -> Self {
        assert!(k1 >= 0.0);
        Self { k1, k2 }
    }

    pub fn noiseless() -> Self {
        Self { k1: 0.0, k2: 0.0 }
    }

    pub fn sigma(&self, z: f64) -> f64 {
        self.k1 * (z - self.k2) * (z - self.k2)
    }
}

/// Fixture and peg geometry with ground-truth poses and a camera.
#[derive(Debug, Clone)]
pub struct Scene {
    pub hole_mesh: TriangleMesh,
    pub hole_pose: Pose,
    pub peg_mesh: TriangleMesh,
    pub camera_pose: Pose,
    pub intrinsics: CameraIntrinsics,
    pub seed: u64,
    pub config: SceneConfig,
}

/// Desk-scale fixture dimensions (meters), all configurable.
#[derive(Debug, Clone, Copy)]
pub struct SceneConfig {
    pub plate_width: f64,
    pub plate_thickness: f64,
    pub pocket_width: f64,
    pub pocket_depth: f64,
    pub peg_radius: f64,
    pub peg_length: f64,
    pub camera_distance: f64,
    pub camera_elevation_deg: f64,
    pub camera_resolution: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            plate_width: 0.12,
            plate_thickness: 0.03,
            pocket_width: 0.04,
            pocket_depth: 0.02,
            peg_radius: 0.018,
            peg_length: 0.08,
            camera_distance: 0.9,
            camera_elevation_deg: 45.0,
            camera_resolution: 256,
        }
    }
}

/// Camera-to-world pose with +z looking from `eye` toward `target`.
pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Pose {
    let z = (target - eye).normalize();
    let x = up.cross(&z).normalize();
    let y = z.cross(&x);
    let rotation = Matrix3::from_columns(&[x, y, z]);
    Pose::new(rotation, eye).expect("orthonormal by construction")
}

impl Scene {
    pub fn new(config: SceneConfig, hole_pose: Pose, seed: u64) -> Result<Self, SimError> {
        if 2.0 * config.peg_radius >= config.pocket_width {
            return Err(SimError::PegDoesNotFit {
                peg: 2.0 * config.peg_radius,
                pocket: config.pocket_width,
            });
        }
        let hole_mesh = plate_with_pocket_mesh(
            config.plate_width,
            config.plate_thickness,
            config.pocket_width,
            config.pocket_depth,
        );
        let peg_mesh = cylinder_mesh(config.peg_radius, config.peg_length, 48);
        let elev = config.camera_elevation_deg.to_radians();
        let eye = hole_pose.apply(&Vector3::new(
            0.0,
            -config.camera_distance * elev.cos(),
            config.camera_distance * elev.sin(),
        ));
        let camera_pose = look_at(eye, *hole_pose.translation(), Vector3::z());
        let resolution = config.camera_resolution;
        // focal chosen so the plate diagonal fills most of the frame
        let focal = resolution as f64 * config.camera_distance / (1.8 * config.plate_width);
        Ok(Self {
            hole_mesh,
            hole_pose,
            peg_mesh,
            camera_pose,
            intrinsics: CameraIntrinsics::square(resolution, focal),
            seed,
            config,
        })
    }

    pub fn desk_default(seed: u64) -> Self {
        Self::new(SceneConfig::default(), Pose::identity(), seed).expect("default config is valid")
    }

    /// Fixture mesh in world coordinates.
    pub fn world_hole_mesh(&self) -> TriangleMesh {
        self.hole_mesh.transformed(&self.hole_pose)
    }
}

/// Ray-cast a depth image of the fixture and return the noisy oriented
/// point cloud. Per-pixel noise streams keep the result deterministic
/// under any traversal order.
/// Per-pixel depth of a rendered view; NaN marks rays that missed.
#[derive(Debug, Clone)]
pub struct DepthImage {
    width: usize,
    height: usize,
    depths: Vec<f64>,
}

impl DepthImage {
    /// Half-width of the pixel window averaged by [`DepthImage::certifies_free`].
    const WINDOW: isize = 2;

    /// True when the camera observed free space at `p`: the point projects
    /// into the frustum and lies at least `margin` in front of the locally
    /// averaged measured depth (a window of misses counts as depth
    /// infinity). Averaging a window beats the per-pixel depth noise down
    /// far enough that true surface is not carved away.
    pub fn certifies_free(&self, scene: &Scene, p: &Vector3<f64>, margin: f64) -> bool {
        let cam_inv = scene.camera_pose.inverse();
        let q = cam_inv.apply(p);
        if q.z <= 0.0 {
            return false;
        }
        let intr = &scene.intrinsics;
        let col = (intr.fx * q.x / q.z + intr.cx).round() as isize;
        let row = (intr.fy * q.y / q.z + intr.cy).round() as isize;
        if col < 0 || row < 0 || col >= self.width as isize || row >= self.height as isize {
            return false;
        }
        let mut sum = 0.0;
        let mut n = 0usize;
        for dr in -Self::WINDOW..=Self::WINDOW {
            for dc in -Self::WINDOW..=Self::WINDOW {
                let (r, c) = (row + dr, col + dc);
                if r < 0 || c < 0 || r >= self.height as isize || c >= self.width as isize {
                    continue;
                }
                let d = self.depths[r as usize * self.width + c as usize];
                if d.is_finite() {
                    sum += d;
                    n += 1;
                }
            }
        }
        if n == 0 {
            // the whole window was observed and nothing was hit
            return true;
        }
        let observed = sum / n as f64;
        (p - scene.camera_pose.translation()).norm() < observed - margin
    }
}

/// Render the per-pixel depth image with the same noise stream as
/// [`render_cloud`].
pub fn render_depth(scene: &Scene, noise: &DepthNoiseModel, seed: u64) -> DepthImage {
    let mesh = scene.world_hole_mesh();
    let cam = &scene.camera_pose;
    let intr = &scene.intrinsics;
    let origin = *cam.translation();
    let mut depths = vec![f64::NAN; intr.width * intr.height];
    for row in 0..intr.height {
        for col in 0..intr.width {
            let dir_cam = Vector3::new(
                (col as f64 - intr.cx) / intr.fx,
                (row as f64 - intr.cy) / intr.fy,
                1.0,
            )
            .normalize();
            let dir = cam.rotate(&dir_cam);
            let Some((t, _)) = ray_mesh_intersect(&origin, &dir, &mesh) else {
                continue;
            };
            let sigma = noise.sigma(t);
            depths[row * intr.width + col] = if sigma > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream((row * intr.width + col) as u64);
                t + rng.sample(Normal::new(0.0, sigma).expect("sigma >= 0"))
            } else {
                t
            };
        }
    }
    DepthImage {
        width: intr.width,
        height: intr.height,
        depths,
    }
}

pub fn render_cloud(
    scene: &Scene,
    noise: &DepthNoiseModel,
    seed: u64,
    normal_k: usize,
) -> Result<OrientedPointSet, SimError> {
    let mesh = scene.world_hole_mesh();
    let cam = &scene.camera_pose;
    let intr = &scene.intrinsics;
    let origin = *cam.translation();
    let mut points = Vec::new();
    for row in 0..intr.height {
        for col in 0..intr.width {
            let dir_cam = Vector3::new(
                (col as f64 - intr.cx) / intr.fx,
                (row as f64 - intr.cy) / intr.fy,
                1.0,
            )
            .normalize();
            let dir = cam.rotate(&dir_cam);
            let Some((t, _)) = ray_mesh_intersect(&origin, &dir, &mesh) else {
                continue;
            };
            let sigma = noise.sigma(t);
            let depth = if sigma > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream((row * intr.width + col) as u64);
                t + rng.sample(Normal::new(0.0, sigma).expect("sigma >= 0"))
            } else {
                t
            };
            points.push(origin + dir * depth);
        }
    }
    if points.is_empty() {
        return Err(SimError::NoHit);
    }
    Ok(estimate_normals(&points, normal_k, &origin)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ray_mesh_intersect;

    #[test]
    fn noiseless_points_lie_on_the_mesh() {
        let mut config = SceneConfig::default();
        config.camera_resolution = 48;
        let scene = Scene::new(config, Pose::identity(), 0).unwrap();
        let cloud = render_cloud(&scene, &DepthNoiseModel::noiseless(), 1, 8).unwrap();
        let mesh = scene.world_hole_mesh();
        let origin = *scene.camera_pose.translation();
        for p in cloud.positions() {
            // distance to mesh along the viewing ray is zero at the hit
            let dir = (p - origin).normalize();
            let (t, _) = ray_mesh_intersect(&origin, &dir, &mesh).unwrap();
            let hit = origin + dir * t;
            assert!((hit - p).norm() < 1e-9, "point {p:?} off surface");
        }
    }

    #[test]
    fn noise_model_bias_root_and_scale() {
        let m = DepthNoiseModel::new(0.001, 0.0);
        assert_eq!(m.sigma(1.0), 0.001);
        let biased = DepthNoiseModel::new(0.5, 2.0);
        assert_eq!(biased.sigma(2.0), 0.0);
    }

    #[test]
    fn depth_noise_scales_with_k1() {
        let mut config = SceneConfig::default();
        config.camera_resolution = 100;
        let scene = Scene::new(config, Pose::identity(), 0).unwrap();
        let mesh = scene.world_hole_mesh();
        let origin = *scene.camera_pose.translation();
        let spread = |k1: f64| -> f64 {
            let cloud = render_cloud(&scene, &DepthNoiseModel::new(k1, 0.0), 5, 8).unwrap();
            let mut sum2 = 0.0;
            let mut n = 0usize;
            for p in cloud.positions() {
                let dir = (p - origin).normalize();
                if let Some((t, _)) = ray_mesh_intersect(&origin, &dir, &mesh) {
                    let r = (p - origin).norm() - t;
                    sum2 += r * r;
                    n += 1;
                }
            }
            (sum2 / n as f64).sqrt()
        };
        let s1 = spread(0.001);
        let s2 = spread(0.002);
        let ratio = s2 / s1;
        assert!((ratio - 2.0).abs() < 0.4, "noise ratio {ratio}");
    }

    #[test]
    fn camera_missing_the_fixture_is_an_error() {
        let mut scene = Scene::desk_default(0);
        scene.camera_pose = look_at(
            Vector3::new(0.0, -0.9, 0.6),
            Vector3::new(0.0, -5.0, 0.6),
            Vector3::z(),
        );
        assert!(matches!(
            render_cloud(&scene, &DepthNoiseModel::noiseless(), 0, 8),
            Err(SimError::NoHit)
        ));
    }
}
