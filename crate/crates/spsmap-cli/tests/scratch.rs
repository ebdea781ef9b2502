use nalgebra::Vector3;
use spsmap::contact::{sense_contacts, ContactHypothesisSet, ContactParticle};
use spsmap::fusion::{
    build_prior, confident_surface_points, FusionState, CONFIDENT_VARIANCE_FRACTION,
};
use spsmap::geometry::{sample_surface, OrientedPointSet, Pose};
use spsmap::registration::{add_metric, icp_restarts, mean_spacing};
use spsmap::contact::WrenchMeasurement;
use spsmap::sim::{render_cloud, scripted_probe_run, DepthNoiseModel, Scene};

fn mean_add_of(
    prior: &FusionState,
    particles: Vec<ContactParticle>,
    model: &OrientedPointSet,
    cfg: &spsmap_cli::config::ExperimentConfig,
    label: &str,
) {
    let set = ContactHypothesisSet {
        particles,
        timestamp: 0.0,
    };
    let (state, _) = prior.fuse_contacts(&set).unwrap();
    let surface = confident_surface_points(
        state.map(),
        cfg.surface_samples,
        CONFIDENT_VARIANCE_FRACTION,
        cfg.seed,
    )
    .unwrap();
    let corr = (2.0 * mean_spacing(model)).max(0.02);
    let results = icp_restarts(
        &surface,
        model,
        &Pose::identity(),
        10,
        cfg.perturb,
        cfg.seed,
        corr,
        cfg.icp_max_iter,
    )
    .unwrap();
    let gt = Pose::identity();
    let mean: f64 = results
        .iter()
        .map(|r| add_metric(model, &r.pose.inverse(), &gt).unwrap())
        .sum::<f64>()
        / results.len() as f64;
    println!("{label}: mean ADD = {mean:.4e} (n=10)");
}

#[test]
#[ignore]
fn variant_sweep() {
    let cfg = spsmap_cli::config::ExperimentConfig::default();
    let scene = Scene::new(
        spsmap_cli::experiment::scene_config(&cfg),
        Pose::identity(),
        cfg.seed,
    )
    .unwrap();
    let model = sample_surface(&scene.world_hole_mesh(), cfg.model_samples, cfg.seed).unwrap();
    let noisy = render_cloud(
        &scene,
        &DepthNoiseModel::new(cfg.k1, cfg.k2),
        cfg.seed,
        cfg.normal_k,
    )
    .unwrap();
    let fcfg = spsmap_cli::experiment::fusion_config(&cfg);
    let prior = build_prior(&noisy, &model, &fcfg).unwrap();
    let poses = spsmap_cli::experiment::probe_lattice(&scene, &cfg);
    let (wrenches, _) =
        scripted_probe_run(&scene, &poses, &spsmap_cli::experiment::probe_params(&cfg)).unwrap();
    let hits: Vec<&WrenchMeasurement> = wrenches.iter().filter(|w| w.contact).collect();

    let sense_all = |sensor: &spsmap::contact::SensorConfig| -> Vec<ContactParticle> {
        hits.iter()
            .flat_map(|w| {
                sense_contacts(&scene.peg_mesh, &w.ee_pose, w, sensor)
                    .unwrap()
                    .map(|s| s.particles)
                    .unwrap_or_default()
            })
            .collect()
    };

    let sensor = spsmap_cli::experiment::sensor_config(&cfg);
    let base = sense_all(&sensor);

    let gated = |particles: &[ContactParticle], cells: f64| -> Vec<ContactParticle> {
        let gate = cells * prior.grid().h();
        particles
            .iter()
            .filter(|p| {
                let (Ok(m), Ok(g)) = (
                    prior.map().query_mean(&p.position),
                    prior.map().mean_gradient(&p.position),
                ) else {
                    return false;
                };
                m.abs() <= gate * (g.norm() + f64::EPSILON)
            })
            .cloned()
            .collect()
    };

    for cells in [1.0, 1.5, 2.0] {
        let kept = gated(&base, cells);
        println!("gate {cells}h: kept {} of {}", kept.len(), base.len());
        mean_add_of(&prior, kept, &model, &cfg, &format!("gate {cells}h"));
    }
}
