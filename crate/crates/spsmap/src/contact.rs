//! Contact occupancy sensing: map one wrench measurement to a particle set
//! of likely contact locations on the peg surface, by rejection sampling of
//! moment-arm residuals filtered through a friction cone.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::geometry::{sample_surface, GeometryError, Pose, TriangleMesh};

/// Force readings below this magnitude cannot carry a contact flag.
pub const FORCE_DEADBAND: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ContactError {
    #[error("measurement has no contact flag set")]
    NoContact,
    #[error("force vector is zero")]
    ZeroForce,
    #[error("contact flag set but force magnitude {0:.3} N is inside the deadband")]
    ForceInDeadband(f64),
    #[error("wrench log {path}:{line}: {message}")]
    LogParse {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One force/torque reading at the end-effector frame origin, with the pose
/// at measurement time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrenchMeasurement {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
    pub contact: bool,
    pub ee_pose: Pose,
    pub timestamp: f64,
}

impl WrenchMeasurement {
    pub fn validate(&self) -> Result<(), ContactError> {
        if self.contact && self.force.norm() <= FORCE_DEADBAND {
            return Err(ContactError::ForceInDeadband(self.force.norm()));
        }
        Ok(())
    }
}

/// Sensor parameters; the likelihood sharpness default follows the paper,
/// the rest are artifact defaults.
#[derive(Debug, Clone, Copy)]
pub struct SensorConfig {
    /// Likelihood sharpness (1/N^2 m^2).
    pub lambda: f64,
    /// Acceptance threshold on the likelihood, in (0, 1).
    pub epsilon: f64,
    /// Friction coefficient.
    pub mu: f64,
    /// Number of candidate surface samples per measurement.
    pub samples: usize,
    /// Cap on retained particles: only the highest-likelihood hypotheses
    /// survive, keeping downstream fusion tractable.
    pub max_particles: usize,
    pub seed: u64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            epsilon: 0.9,
            mu: 0.5,
            samples: 5000,
            max_particles: 50,
            seed: 0,
        }
    }
}

/// One retained contact hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactParticle {
    /// Candidate contact position in world frame.
    pub position: Vector3<f64>,
    /// Assigned normal: the unit force direction.
    pub normal: Vector3<f64>,
    pub likelihood: f64,
}

/// Non-empty set of weighted contact hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactHypothesisSet {
    pub particles: Vec<ContactParticle>,
    pub timestamp: f64,
}

impl ContactHypothesisSet {
    pub fn best(&self) -> &ContactParticle {
        self.particles
            .iter()
            .max_by(|a, b| a.likelihood.partial_cmp(&b.likelihood).unwrap())
            .expect("sets are non-empty by construction")
    }
}

/// Moment-arm residual l(p_C; F) = ||(p_O - p_C) x f - tau||^2.
pub fn residual(
    candidate: &Vector3<f64>,
    sensor_origin: &Vector3<f64>,
    w: &WrenchMeasurement,
) -> Result<f64, ContactError> {
    if !w.contact {
        return Err(ContactError::NoContact);
    }
    Ok(((sensor_origin - candidate).cross(&w.force) - w.torque).norm_squared())
}

/// L = exp(-lambda * l), strictly decreasing in the residual.
pub fn likelihood(residual: f64, lambda: f64) -> f64 {
    debug_assert!(residual >= 0.0);
    (-lambda * residual).exp()
}

/// True when the reaction force direction lies within the friction cone
/// anchored at the candidate's outward surface normal.
pub fn friction_cone_accept(
    force: &Vector3<f64>,
    surface_normal: &Vector3<f64>,
    mu: f64,
) -> Result<bool, ContactError> {
    let norm = force.norm();
    if norm == 0.0 {
        return Err(ContactError::ZeroForce);
    }
    // the environment pushes against the peg: reaction opposes the outward
    // normal, up to the friction half-angle
    let cos_angle = (-force / norm).dot(surface_normal).clamp(-1.0, 1.0);
    let angle = cos_angle.acos();
    Ok(angle <= mu.atan() + 1e-6)
}

/// Full contact-occupancy reading: sample the peg surface, reject outside
/// the friction cone or below the likelihood threshold. Returns `None`
/// when no sample survives.
pub fn sense_contacts(
    peg: &TriangleMesh,
    ee_pose: &Pose,
    w: &WrenchMeasurement,
    cfg: &SensorConfig,
) -> Result<Option<ContactHypothesisSet>, ContactError> {
    if !w.contact {
        return Err(ContactError::NoContact);
    }
    w.validate()?;
    let force_norm = w.force.norm();
    if force_norm == 0.0 {
        return Err(ContactError::ZeroForce);
    }
    let assigned_normal = w.force / force_norm;
    let sensor_origin = *ee_pose.translation();

    let candidates = sample_surface(peg, cfg.samples, cfg.seed)?;
    let mut particles = Vec::new();
    for (p_peg, n_peg) in candidates.iter() {
        let p_world = ee_pose.apply(p_peg);
        let n_world = ee_pose.rotate(n_peg);
        if !friction_cone_accept(&w.force, &n_world, cfg.mu)? {
            continue;
        }
        let l = residual(&p_world, &sensor_origin, w)?;
        let like = likelihood(l, cfg.lambda);
        if like >= cfg.epsilon {
            particles.push(ContactParticle {
                position: p_world,
                normal: assigned_normal,
                likelihood: like,
            });
        }
    }
    if particles.is_empty() {
        return Ok(None);
    }
    if particles.len() > cfg.max_particles {
        // keep the top hypotheses without disturbing candidate order
        let mut ranked: Vec<usize> = (0..particles.len()).collect();
        ranked.sort_by(|&a, &b| {
            particles[b]
                .likelihood
                .partial_cmp(&particles[a].likelihood)
                .unwrap()
                .then(a.cmp(&b))
        });
        ranked.truncate(cfg.max_particles);
        ranked.sort_unstable();
        particles = ranked.into_iter().map(|i| particles[i]).collect();
    }
    Ok(Some(ContactHypothesisSet {
        particles,
        timestamp: w.timestamp,
    }))
}

/// Write a wrench log: t, fx..tz, theta, then 12 row-major pose columns.
pub fn write_wrench_log(log: &[WrenchMeasurement], path: &Path) -> Result<(), ContactError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "t,fx,fy,fz,tx,ty,tz,theta,r00,r01,r02,r10,r11,r12,r20,r21,r22,x,y,z"
    )?;
    for m in log {
        let r = m.ee_pose.rotation();
        let t = m.ee_pose.translation();
        let mut cols: Vec<String> = Vec::with_capacity(20);
        cols.push(format!("{:.17e}", m.timestamp));
        for v in [&m.force, &m.torque] {
            for a in 0..3 {
                cols.push(format!("{:.17e}", v[a]));
            }
        }
        cols.push(if m.contact { "1".into() } else { "0".into() });
        for i in 0..3 {
            for j in 0..3 {
                cols.push(format!("{:.17e}", r[(i, j)]));
            }
        }
        for a in 0..3 {
            cols.push(format!("{:.17e}", t[a]));
        }
        writeln!(w, "{}", cols.join(","))?;
    }
    Ok(())
}

/// Read a wrench log written by [`write_wrench_log`].
pub fn read_wrench_log(path: &Path) -> Result<Vec<WrenchMeasurement>, ContactError> {
    let err = |line: usize, message: String| ContactError::LogParse {
        path: path.display().to_string(),
        line,
        message,
    };
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if !line.starts_with("t,") {
                return Err(err(1, "missing header row".into()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| err(i + 1, format!("bad number: {e}")))?;
        if vals.len() != 20 {
            return Err(err(i + 1, format!("expected 20 columns, got {}", vals.len())));
        }
        let rotation = Matrix3::from_row_slice(&vals[8..17]);
        let translation = Vector3::new(vals[17], vals[18], vals[19]);
        let pose = Pose::new(rotation, translation)
            .map_err(|e| err(i + 1, format!("bad pose: {e}")))?;
        out.push(WrenchMeasurement {
            timestamp: vals[0],
            force: Vector3::new(vals[1], vals[2], vals[3]),
            torque: Vector3::new(vals[4], vals[5], vals[6]),
            contact: vals[7] != 0.0,
            ee_pose: pose,
        });
    }
    Ok(out)
}
