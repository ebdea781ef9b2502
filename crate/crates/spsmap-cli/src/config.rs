use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Environment variable consulted for the default output directory.
pub const OUT_DIR_ENV: &str = "SPSMAP_OUT_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("invalid value for '{key}': {message}")]
    InvalidValue { key: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Full experiment parameterization; every field has a default and can be
/// set from a `key = value` config file or a `--set key=value` flag.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    // map
    pub grid_k: usize,
    pub sigma_g: f64,
    pub support_radius: usize,
    pub inflate: f64,
    pub surface_samples: usize,
    // contact sensor
    pub lambda: f64,
    pub epsilon: f64,
    pub mu: f64,
    pub sensor_samples: usize,
    pub max_particles: usize,
    // camera noise
    pub k1: f64,
    pub k2: f64,
    pub camera_resolution: usize,
    pub camera_distance: f64,
    pub camera_elevation_deg: f64,
    pub normal_k: usize,
    // registration
    pub n_icp: usize,
    pub perturb: f64,
    pub icp_max_iter: usize,
    // probing
    pub probe_rows: usize,
    pub probe_cols: usize,
    pub probe_pitch: f64,
    pub probe_force: f64,
    pub force_noise_sigma: f64,
    pub torque_noise_sigma: f64,
    // experiment matrix
    pub contact_counts: Vec<usize>,
    pub model_samples: usize,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid_k: 24,
            sigma_g: 1.0,
            support_radius: 1,
            inflate: 0.25,
            surface_samples: 2000,
            lambda: 1.0,
            epsilon: 0.9,
            mu: 0.5,
            sensor_samples: 5000,
            max_particles: 400,
            k1: 0.001,
            k2: 0.0,
            camera_resolution: 128,
            camera_distance: 3.0,
            camera_elevation_deg: 85.0,
            normal_k: 30,
            n_icp: 50,
            perturb: 0.05,
            icp_max_iter: 100,
            probe_rows: 10,
            probe_cols: 10,
            probe_pitch: 0.012,
            probe_force: 5.0,
            force_noise_sigma: 0.0,
            torque_noise_sigma: 0.0,
            contact_counts: vec![5, 20, 100],
            model_samples: 3000,
            seed: 0,
            out_dir: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.trim().parse().map_err(|e| ConfigError::InvalidValue {
        key: key.to_string(),
        message: format!("{e}"),
    })
}

impl ExperimentConfig {
    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "grid_k" => self.grid_k = parse_num(key, value)?,
            "sigma_g" => self.sigma_g = parse_num(key, value)?,
            "support_radius" => self.support_radius = parse_num(key, value)?,
            "inflate" => self.inflate = parse_num(key, value)?,
            "surface_samples" => self.surface_samples = parse_num(key, value)?,
            "lambda" => self.lambda = parse_num(key, value)?,
            "epsilon" => self.epsilon = parse_num(key, value)?,
            "mu" => self.mu = parse_num(key, value)?,
            "sensor_samples" => self.sensor_samples = parse_num(key, value)?,
            "max_particles" => self.max_particles = parse_num(key, value)?,
            "k1" => self.k1 = parse_num(key, value)?,
            "k2" => self.k2 = parse_num(key, value)?,
            "camera_resolution" => self.camera_resolution = parse_num(key, value)?,
            "camera_distance" => self.camera_distance = parse_num(key, value)?,
            "camera_elevation_deg" => self.camera_elevation_deg = parse_num(key, value)?,
            "normal_k" => self.normal_k = parse_num(key, value)?,
            "n_icp" => self.n_icp = parse_num(key, value)?,
            "perturb" => self.perturb = parse_num(key, value)?,
            "icp_max_iter" => self.icp_max_iter = parse_num(key, value)?,
            "probe_rows" => self.probe_rows = parse_num(key, value)?,
            "probe_cols" => self.probe_cols = parse_num(key, value)?,
            "probe_pitch" => self.probe_pitch = parse_num(key, value)?,
            "probe_force" => self.probe_force = parse_num(key, value)?,
            "force_noise_sigma" => self.force_noise_sigma = parse_num(key, value)?,
            "torque_noise_sigma" => self.torque_noise_sigma = parse_num(key, value)?,
            "model_samples" => self.model_samples = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "out_dir" => self.out_dir = Some(PathBuf::from(value.trim())),
            "contact_counts" => {
                let mut counts = Vec::new();
                for part in value.split(',') {
                    counts.push(parse_num(key, part)?);
                }
                if counts.is_empty() {
                    return Err(ConfigError::InvalidValue {
                        key: key.to_string(),
                        message: "empty list".to_string(),
                    });
                }
                self.contact_counts = counts;
            }
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Load assignments from a config file: one `key = value` per line,
    /// `#` comments and blank lines ignored.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.merge_file(path)?;
        Ok(cfg)
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: "expected 'key = value'".to_string(),
                });
            };
            self.set(key.trim(), value).map_err(|e| ConfigError::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Output directory resolution: explicit flag > config file > env > cwd.
    pub fn resolve_out_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = &self.out_dir {
            return p.clone();
        }
        if let Ok(p) = std::env::var(OUT_DIR_ENV) {
            return PathBuf::from(p);
        }
        PathBuf::from(".")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_set() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("grid_k", "24").unwrap();
        cfg.set("sigma_g", " 0.5 ").unwrap();
        cfg.set("contact_counts", "5, 20,100").unwrap();
        assert_eq!(cfg.grid_k, 24);
        assert_eq!(cfg.sigma_g, 0.5);
        assert_eq!(cfg.contact_counts, vec![5, 20, 100]);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let mut cfg = ExperimentConfig::default();
        assert!(matches!(
            cfg.set("no_such_key", "1"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            cfg.set("grid_k", "abc"),
            Err(ConfigError::InvalidValue { .. })
        ));
    }

    #[test]
    fn files_parse_with_comments_and_report_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.cfg");
        std::fs::write(&path, "# comment\nseed = 7\n\nn_icp = 10 # trailing\n").unwrap();
        let cfg = ExperimentConfig::load(&path).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.n_icp, 10);

        std::fs::write(&path, "seed = 7\nbogus line\n").unwrap();
        match ExperimentConfig::load(&path) {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
