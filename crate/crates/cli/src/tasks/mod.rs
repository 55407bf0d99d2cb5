//! Task strategies selected by name from the config or `--task`.

use edgescatter::registry::{Named, Registry};
use edgescatter::transverse::{build_basis_with, default_solver_name, BasisTolerances};
use edgescatter::{build_potential, Potential, SolverParams, TransverseBasis};
use serde::Serialize;

use crate::config::{ExperimentConfig, Format};
use crate::error::CliError;

mod channels;
mod conductivity;
mod scatter;
mod spectrum;
mod validate;

/// Everything a task needs, built once from the config.
pub struct Context {
    pub config: ExperimentConfig,
    pub format: Format,
    pub basis: TransverseBasis,
    pub potential: Potential,
    pub params: SolverParams,
}

impl Context {
    pub fn new(config: ExperimentConfig, format: Format) -> Result<Self, CliError> {
        config.validate()?;
        let spec = config.potential_spec()?;
        let potential = build_potential(&spec, config.frame)?;
        let solver = config
            .basis_solver
            .clone()
            .unwrap_or_else(|| default_solver_name(&config.wall).to_string());
        let basis = build_basis_with(&config.wall, config.n_max, config.quad_points, &solver, BasisTolerances::default())?;
        log::info!("basis: {} levels via {}", basis.n_max, basis.method);
        let params = config.solver.params();
        Ok(Self {
            config,
            format,
            basis,
            potential,
            params,
        })
    }

    pub fn energy(&self) -> Result<f64, CliError> {
        self.config
            .energy
            .ok_or_else(|| CliError::Config("this task needs an energy (`energy` or --energy)".into()))
    }

    pub fn window(&self) -> Result<[f64; 2], CliError> {
        self.config
            .window
            .ok_or_else(|| CliError::Config("this task needs a window (`window` or --window)".into()))
    }
}

/// Rendered artifact plus whether its checks passed.
pub struct Outcome {
    pub body: String,
    pub passed: bool,
}

impl Outcome {
    pub fn ok(body: String) -> Self {
        Self { body, passed: true }
    }
}

pub trait Task: Named {
    fn default_format(&self) -> Format;
    fn run(&self, ctx: &Context) -> Result<Outcome, CliError>;
}

pub fn task_registry() -> Registry<dyn Task> {
    let mut r: Registry<dyn Task> = Registry::new("task");
    r.register(Box::new(spectrum::Spectrum))
        .register(Box::new(channels::Channels))
        .register(Box::new(scatter::Scatter))
        .register(Box::new(conductivity::Conductivity))
        .register(Box::new(validate::Validate));
    r
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub(crate) fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Serialize(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Serialize(e.to_string()))
}
