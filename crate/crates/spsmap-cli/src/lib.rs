//! Command-line harness: scene simulation, reconstruction, contact sensing,
//! fusion, and the sensing-modality evaluation matrix.

pub mod commands;
pub mod config;
pub mod experiment;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Geometry(#[from] spsmap::geometry::GeometryError),
    #[error(transparent)]
    Spsr(#[from] spsmap::spsr::SpsrError),
    #[error(transparent)]
    Contact(#[from] spsmap::contact::ContactError),
    #[error(transparent)]
    Fusion(#[from] spsmap::fusion::FusionError),
    #[error(transparent)]
    Registration(#[from] spsmap::registration::RegistrationError),
    #[error(transparent)]
    Sim(#[from] spsmap::sim::SimError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for usage/input problems, 1 for runtime or numerical failures.
    pub fn exit_code(&self) -> i32 {
        use spsmap::contact::ContactError;
        use spsmap::geometry::GeometryError;
        use spsmap::spsr::SpsrError;
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Geometry(GeometryError::Parse { .. })
            | CliError::Geometry(GeometryError::Io(_))
            | CliError::Spsr(SpsrError::Parse { .. })
            | CliError::Spsr(SpsrError::Io(_))
            | CliError::Contact(ContactError::LogParse { .. })
            | CliError::Contact(ContactError::Io(_)) => 2,
            _ => 1,
        }
    }
}
