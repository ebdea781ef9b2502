use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;

use spsmap::contact::{sense_contacts, ContactHypothesisSet, ContactParticle, SensorConfig};
use spsmap::fusion::{
    build_prior, confident_surface_points, make_schedule, FusionConfig, CONFIDENT_VARIANCE_FRACTION,
};
use spsmap::geometry::{sample_surface, OrientedPointSet, Pose};
use spsmap::registration::{add_metric, icp_restarts, mean_spacing};
use spsmap::sim::{
    render_cloud, scripted_probe_run, DepthNoiseModel, ProbeParams, Scene, SceneConfig,
};
use spsmap::spsr::KernelConfig;

use crate::config::ExperimentConfig;
use crate::CliError;

/// One ICP restart scored against ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRow {
    pub run_id: usize,
    pub add: f64,
    pub fitness: f64,
    pub rmse: f64,
    pub iters: usize,
}

/// All restarts for one sensing modality.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityResult {
    pub name: String,
    pub runs: Vec<RunRow>,
}

impl ModalityResult {
    pub fn mean_add(&self) -> f64 {
        self.runs.iter().map(|r| r.add).sum::<f64>() / self.runs.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub modalities: Vec<ModalityResult>,
}

impl Evaluation {
    pub fn modality(&self, name: &str) -> Option<&ModalityResult> {
        self.modalities.iter().find(|m| m.name == name)
    }
}

pub fn fusion_config(cfg: &ExperimentConfig) -> FusionConfig {
    FusionConfig {
        grid_k: cfg.grid_k,
        inflate: cfg.inflate,
        kernel: KernelConfig::new(cfg.sigma_g, cfg.support_radius),
        surface_samples: cfg.surface_samples,
        icp_max_iter: cfg.icp_max_iter,
        sensor: sensor_config(cfg),
        seed: cfg.seed,
    }
}

pub fn sensor_config(cfg: &ExperimentConfig) -> SensorConfig {
    SensorConfig {
        lambda: cfg.lambda,
        epsilon: cfg.epsilon,
        mu: cfg.mu,
        samples: cfg.sensor_samples,
        max_particles: cfg.max_particles,
        seed: cfg.seed,
    }
}

pub fn scene_config(cfg: &ExperimentConfig) -> SceneConfig {
    SceneConfig {
        camera_resolution: cfg.camera_resolution,
        camera_distance: cfg.camera_distance,
        camera_elevation_deg: cfg.camera_elevation_deg,
        ..SceneConfig::default()
    }
}

pub fn probe_params(cfg: &ExperimentConfig) -> ProbeParams {
    ProbeParams {
        force_magnitude: cfg.probe_force,
        force_noise_sigma: cfg.force_noise_sigma,
        torque_noise_sigma: cfg.torque_noise_sigma,
        seed: cfg.seed,
        ..ProbeParams::default()
    }
}

/// Probe start poses: a rectangular lattice hovering above the fixture.
pub fn probe_lattice(scene: &Scene, cfg: &ExperimentConfig) -> Vec<Pose> {
    let hover = Pose::from_translation(
        scene.hole_pose.translation() + Vector3::new(0.0, 0.0, scene.config.peg_length + 0.05),
    );
    make_schedule(
        &hover,
        cfg.probe_rows,
        cfg.probe_cols,
        cfg.probe_pitch,
        scene.config.pocket_depth,
    )
    .poses
}

/// Evenly sub-sample `count` items out of `total` indices.
pub fn subsample_indices(total: usize, count: usize) -> Vec<usize> {
    assert!(count >= 1 && count <= total);
    (0..count).map(|i| i * total / count).collect()
}

fn register(
    name: &str,
    model: &OrientedPointSet,
    observed: &OrientedPointSet,
    cfg: &ExperimentConfig,
) -> Result<ModalityResult, CliError> {
    // Register the (partial) observation onto the full model: every observed
    // point has a true counterpart on the model, which avoids the partial
    // overlap bias of pulling occluded model faces onto the visible surface.
    // The object pose estimate is the inverse of the recovered alignment.
    let corr = (2.0 * mean_spacing(model)).max(0.02);
    let runs = icp_restarts(
        observed,
        model,
        &Pose::identity(),
        cfg.n_icp,
        cfg.perturb,
        cfg.seed,
        corr,
        cfg.icp_max_iter,
    )?;
    let gt = Pose::identity();
    let mut rows = Vec::with_capacity(runs.len());
    for (run_id, r) in runs.iter().enumerate() {
        rows.push(RunRow {
            run_id,
            add: add_metric(model, &r.pose.inverse(), &gt)?,
            fitness: r.fitness,
            rmse: r.rmse,
            iters: r.iterations,
        });
    }
    Ok(ModalityResult {
        name: name.to_string(),
        runs: rows,
    })
}

/// Run the full sensing-modality matrix on the synthetic peg-in-hole scene:
/// raw noisy cloud, SPSMap over clean/noisy clouds, SPSMap plus each
/// contact-count sweep entry, and SPSMap with ground-truth contacts.
pub fn run_evaluation(cfg: &ExperimentConfig) -> Result<Evaluation, CliError> {
    let scene = Scene::new(scene_config(cfg), Pose::identity(), cfg.seed)?;
    let model = sample_surface(&scene.world_hole_mesh(), cfg.model_samples, cfg.seed)?;
    let clean = render_cloud(&scene, &DepthNoiseModel::noiseless(), cfg.seed, cfg.normal_k)?;
    let noisy = render_cloud(
        &scene,
        &DepthNoiseModel::new(cfg.k1, cfg.k2),
        cfg.seed,
        cfg.normal_k,
    )?;

    let fcfg = fusion_config(cfg);
    let mut modalities = Vec::new();
    modalities.push(register("raw-pc", &model, &noisy, cfg)?);

    let prior_clean = build_prior(&clean, &model, &fcfg)?;
    let surface_clean = confident_surface_points(
        prior_clean.map(),
        cfg.surface_samples,
        CONFIDENT_VARIANCE_FRACTION,
        cfg.seed,
    )?;
    modalities.push(register("spsmap-clean-pc", &model, &surface_clean, cfg)?);

    let prior_noisy = build_prior(&noisy, &model, &fcfg)?;
    let surface_noisy = confident_surface_points(
        prior_noisy.map(),
        cfg.surface_samples,
        CONFIDENT_VARIANCE_FRACTION,
        cfg.seed,
    )?;
    modalities.push(register("spsmap-noisy-pc", &model, &surface_noisy, cfg)?);

    let poses = probe_lattice(&scene, cfg);
    let (wrenches, truths) = scripted_probe_run(&scene, &poses, &probe_params(cfg))?;
    let hit_indices: Vec<usize> = (0..wrenches.len())
        .filter(|&i| wrenches[i].contact)
        .collect();

    let sensor = sensor_config(cfg);
    for &count in &cfg.contact_counts {
        let take = count.min(hit_indices.len());
        let mut particles = Vec::new();
        for pick in subsample_indices(hit_indices.len(), take) {
            let i = hit_indices[pick];
            let w = &wrenches[i];
            if let Some(set) = sense_contacts(&scene.peg_mesh, &w.ee_pose, w, &sensor)? {
                particles.extend(set.particles);
            }
        }
        let set = ContactHypothesisSet {
            particles,
            timestamp: 0.0,
        };
        let (state, _) = prior_noisy.fuse_contacts(&set)?;
        let surface = confident_surface_points(
            state.map(),
            cfg.surface_samples,
            CONFIDENT_VARIANCE_FRACTION,
            cfg.seed,
        )?;
        modalities.push(register(
            &format!("spsmap-contacts-{count}"),
            &model,
            &surface,
            cfg,
        )?);
    }

    // A ground-truth contact set is the true contact patch: face and edge
    // contacts touch a region, and the sensed sets it is compared against
    // spread their particles over a comparable region.
    let gt_particles: Vec<ContactParticle> = hit_indices
        .iter()
        .filter_map(|&i| truths[i].as_ref())
        .flat_map(|t| {
            t.patch.iter().map(|&(position, normal)| ContactParticle {
                position,
                normal,
                likelihood: 1.0,
            })
        })
        .collect();
    let gt_set = ContactHypothesisSet {
        particles: gt_particles,
        timestamp: 0.0,
    };
    let (gt_state, _) = prior_noisy.fuse_contacts(&gt_set)?;
    let gt_surface = confident_surface_points(
        gt_state.map(),
        cfg.surface_samples,
        CONFIDENT_VARIANCE_FRACTION,
        cfg.seed,
    )?;
    modalities.push(register("spsmap-gt-contacts", &model, &gt_surface, cfg)?);

    Ok(Evaluation { modalities })
}

/// One row per (modality, restart).
pub fn write_metrics(eval: &Evaluation, path: &Path) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "modality,run_id,add,fitness,rmse,iters")?;
    for m in &eval.modalities {
        for r in &m.runs {
            writeln!(
                w,
                "{},{},{:.17e},{:.17e},{:.17e},{}",
                m.name, r.run_id, r.add, r.fitness, r.rmse, r.iters
            )?;
        }
    }
    Ok(())
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Five-number summary plus mean of ADD per modality.
pub fn write_boxplot_data(eval: &Evaluation, path: &Path) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "modality,min,q1,median,q3,max,mean")?;
    for m in &eval.modalities {
        let mut adds: Vec<f64> = m.runs.iter().map(|r| r.add).collect();
        adds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        writeln!(
            w,
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            m.name,
            adds[0],
            quantile(&adds, 0.25),
            quantile(&adds, 0.5),
            quantile(&adds, 0.75),
            adds[adds.len() - 1],
            m.mean_add()
        )?;
    }
    Ok(())
}
