//! Batch front end for the route-discovery analysis: configuration,
//! single analyses, Monte Carlo checks, sweeps, figure data and calibration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod commands;
pub mod config;
pub mod figures;

use cogroute::export::Table;

pub use config::Config;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const INFEASIBLE: i32 = 3;
    pub const CALIBRATION: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("infeasible QoS request: {0}")]
    Infeasible(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("{0}")]
    Model(cogroute::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn field(name: &str, reason: impl std::fmt::Display) -> Self {
        CliError::Config(format!("{name}: {reason}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Infeasible(_) => exit::INFEASIBLE,
            CliError::Calibration(_) => exit::CALIBRATION,
            CliError::Model(_) | CliError::Io(_) => exit::FAILURE,
        }
    }
}

impl From<cogroute::Error> for CliError {
    fn from(e: cogroute::Error) -> Self {
        use cogroute::Error as E;
        match e {
            E::InvalidParameter { .. } | E::UnstableSystem { .. } | E::UnknownSubcell(_) => {
                CliError::Config(e.to_string())
            }
            E::Infeasible { .. } => CliError::Infeasible(e.to_string()),
            other => CliError::Model(other),
        }
    }
}

/// Named CSV tables produced by one command, in output order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Output {
    pub tables: Vec<(String, Table)>,
    /// Human-readable lines for the terminal.
    pub summary: Vec<String>,
}

impl Output {
    pub fn table(mut self, name: impl Into<String>, table: Table) -> Self {
        self.tables.push((name.into(), table));
        self
    }

    pub fn line(mut self, line: impl Into<String>) -> Self {
        self.summary.push(line.into());
        self
    }

    pub fn get(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Writes every table to `dir/<name>.csv`.
    pub fn write(&self, dir: &std::path::Path) -> Result<Vec<std::path::PathBuf>, CliError> {
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for (name, table) in &self.tables {
            let path = dir.join(format!("{name}.csv"));
            let file = std::io::BufWriter::new(std::fs::File::create(&path)?);
            table.write_to(file)?;
            paths.push(path);
        }
        Ok(paths)
    }
}
