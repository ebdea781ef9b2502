use std::path::Path;

use nalgebra::Vector3;

use spsmap::contact::{read_wrench_log, sense_contacts, write_wrench_log};
use spsmap::fusion::{run_pipeline, write_trace};
use spsmap::geometry::{
    read_mesh, read_point_cloud, sample_surface, write_mesh, write_point_cloud,
    write_point_cloud_with_scalar, OrientedPointSet,
};
use spsmap::geometry::Pose;
use spsmap::sim::{render_cloud, DepthNoiseModel, Scene};
use spsmap::spsr::{fit, write_field_grid, VoxelGrid};

use crate::config::ExperimentConfig;
use crate::experiment::{
    probe_lattice, probe_params, run_evaluation, scene_config, sensor_config, write_boxplot_data,
    write_metrics,
};
use crate::CliError;

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Load a registration model from either a mesh (sampled) or a point cloud.
fn load_model(path: &Path, cfg: &ExperimentConfig) -> Result<OrientedPointSet, CliError> {
    let is_cloud = path
        .extension()
        .map_or(false, |e| e.eq_ignore_ascii_case("ply"));
    if is_cloud {
        match read_point_cloud(path) {
            Ok(cloud) => return Ok(cloud),
            Err(_) => {} // fall through: a PLY may hold a mesh instead
        }
    }
    let mesh = read_mesh(path)?;
    Ok(sample_surface(&mesh, cfg.model_samples, cfg.seed)?)
}

/// Fit a map to a point cloud; emit the field grid and an extracted surface.
pub fn cmd_reconstruct(
    cloud_path: &Path,
    cfg: &ExperimentConfig,
    out: &Path,
) -> Result<(), CliError> {
    ensure_dir(out)?;
    let cloud = read_point_cloud(cloud_path)?;
    let grid = VoxelGrid::containing(&cloud, cfg.grid_k, cfg.inflate)?;
    let kernel = spsmap::spsr::KernelConfig::new(cfg.sigma_g, cfg.support_radius);
    let state = fit(&cloud, &grid, &kernel)?;
    write_field_grid(state.grid(), state.mean_values(), &out.join("map.grid"))?;
    let surface = state.extract_surface_points(cfg.surface_samples, cfg.seed)?;
    write_point_cloud(&surface, &out.join("surface.ply"))?;
    println!(
        "reconstruct: {} points -> K={} h={:.6} iso_shift={:.6e} surface_points={}",
        cloud.len(),
        grid.k(),
        grid.h(),
        state.iso_shift(),
        surface.len()
    );
    Ok(())
}

/// One hypothesis PLY per contact-flagged wrench row.
pub fn cmd_sense(
    log_path: &Path,
    peg_path: &Path,
    cfg: &ExperimentConfig,
    out: &Path,
) -> Result<(), CliError> {
    ensure_dir(out)?;
    let log = read_wrench_log(log_path)?;
    let peg = read_mesh(peg_path)?;
    let sensor = sensor_config(cfg);
    let mut written = 0usize;
    for (row, w) in log.iter().enumerate() {
        if !w.contact {
            continue;
        }
        let Some(set) = sense_contacts(&peg, &w.ee_pose, w, &sensor)? else {
            eprintln!("warning: row {row} produced no surviving hypotheses");
            continue;
        };
        let mut points = OrientedPointSet::default();
        let mut likelihoods = Vec::with_capacity(set.particles.len());
        for p in &set.particles {
            points.push(p.position, p.normal);
            likelihoods.push(p.likelihood);
        }
        let path = out.join(format!("hypotheses_t{row}.ply"));
        write_point_cloud_with_scalar(&points, "likelihood", &likelihoods, &path)?;
        written += 1;
    }
    if written == 0 {
        eprintln!("warning: no contact rows in {}", log_path.display());
    }
    println!("sense: {written} hypothesis sets written to {}", out.display());
    Ok(())
}

/// Full sequential-fusion pipeline over a cloud and a wrench log.
pub fn cmd_fuse(
    cloud_path: &Path,
    log_path: &Path,
    peg_path: &Path,
    model_path: &Path,
    cfg: &ExperimentConfig,
    out: &Path,
) -> Result<(), CliError> {
    ensure_dir(out)?;
    let cloud = read_point_cloud(cloud_path)?;
    let log = read_wrench_log(log_path)?;
    let peg = read_mesh(peg_path)?;
    let model = load_model(model_path, cfg)?;
    let fcfg = crate::experiment::fusion_config(cfg);
    // Approximate each contact location by the lowest peg vertex under the
    // end-effector pose; the pose itself hovers above the map's grid.
    let sites: Vec<Vector3<f64>> = log
        .iter()
        .filter(|w| w.contact)
        .filter_map(|w| {
            peg.vertices()
                .iter()
                .map(|v| w.ee_pose.apply(v))
                .min_by(|a, b| a.z.partial_cmp(&b.z).unwrap())
        })
        .collect();
    let (state, trace) = run_pipeline(&cloud, &log, &peg, &model, None, &sites, &fcfg)?;
    write_trace(&trace, &out.join("trace.csv"))?;
    write_field_grid(state.map().grid(), state.map().mean_values(), &out.join("map.grid"))?;
    let surface = state.map().extract_surface_points(cfg.surface_samples, cfg.seed)?;
    write_point_cloud(&surface, &out.join("surface.ply"))?;
    println!(
        "fuse: {} fusion steps, {} training points, trace in {}",
        state.t(),
        state.training().len(),
        out.join("trace.csv").display()
    );
    Ok(())
}

/// Render the synthetic scene artifacts consumed by the other commands.
pub fn cmd_simulate_scene(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    ensure_dir(out)?;
    let scene = Scene::new(scene_config(cfg), Pose::identity(), cfg.seed)?;
    write_mesh(&scene.world_hole_mesh(), &out.join("hole.ply"))?;
    write_mesh(&scene.peg_mesh, &out.join("peg.ply"))?;
    let noise = DepthNoiseModel::new(cfg.k1, cfg.k2);
    let cloud = render_cloud(&scene, &noise, cfg.seed, spsmap::geometry::DEFAULT_NORMAL_K)?;
    write_point_cloud(&cloud, &out.join("cloud.ply"))?;
    let poses = probe_lattice(&scene, cfg);
    let (wrenches, truths) = spsmap::sim::scripted_probe_run(&scene, &poses, &probe_params(cfg))?;
    write_wrench_log(&wrenches, &out.join("wrenches.csv"))?;
    // ground-truth contacts for scoring, one row per probe
    let mut gt = String::from("probe,hit,x,y,z,nx,ny,nz\n");
    for (i, t) in truths.iter().enumerate() {
        match t {
            Some(c) => gt.push_str(&format!(
                "{},1,{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                i, c.position.x, c.position.y, c.position.z,
                c.surface_normal.x, c.surface_normal.y, c.surface_normal.z
            )),
            None => gt.push_str(&format!("{i},0,nan,nan,nan,nan,nan,nan\n")),
        }
    }
    std::fs::write(out.join("contacts_gt.csv"), gt)?;
    println!(
        "simulate-scene: {} cloud points, {}/{} probes hit, artifacts in {}",
        cloud.len(),
        truths.iter().filter(|t| t.is_some()).count(),
        truths.len(),
        out.display()
    );
    Ok(())
}

/// Full modality matrix -> metrics.csv + boxplot-data.csv.
pub fn cmd_evaluate(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    ensure_dir(out)?;
    let eval = run_evaluation(cfg)?;
    write_metrics(&eval, &out.join("metrics.csv"))?;
    write_boxplot_data(&eval, &out.join("boxplot-data.csv"))?;
    for m in &eval.modalities {
        println!("{}: mean ADD = {:.6e} m over {} runs", m.name, m.mean_add(), m.runs.len());
    }
    Ok(())
}

/// Contact-count sweep: one evaluation row per |C| value.
pub fn cmd_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    ensure_dir(out)?;
    let eval = run_evaluation(cfg)?;
    let mut text = String::from("contacts,mean_add\n");
    for count in &cfg.contact_counts {
        let name = format!("spsmap-contacts-{count}");
        if let Some(m) = eval.modality(&name) {
            text.push_str(&format!("{},{:.17e}\n", count, m.mean_add()));
        }
    }
    let path = out.join("sweep.csv");
    std::fs::write(&path, text)?;
    println!("sweep: wrote {}", path.display());
    Ok(())
}
