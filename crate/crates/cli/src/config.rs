use std::path::{Path, PathBuf};

use edgescatter::{Frame, PotentialSpec, SolverParams, WallSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Overrides for [`SolverParams`]; unset fields keep the library defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub half_width: Option<f64>,
    pub nodes_per_unit: Option<f64>,
    pub n_evanescent: Option<usize>,
    pub guard: Option<f64>,
    pub tol_solve: Option<f64>,
    pub tol_match: Option<f64>,
    pub pivot_tol: Option<f64>,
}

impl SolverSection {
    pub fn params(&self) -> SolverParams {
        let d = SolverParams::default();
        SolverParams {
            half_width: self.half_width.or(d.half_width),
            nodes_per_unit: self.nodes_per_unit.unwrap_or(d.nodes_per_unit),
            n_evanescent: self.n_evanescent.unwrap_or(d.n_evanescent),
            guard: self.guard.unwrap_or(d.guard),
            tol_solve: self.tol_solve.unwrap_or(d.tol_solve),
            tol_match: self.tol_match.unwrap_or(d.tol_match),
            pivot_tol: self.pivot_tol.unwrap_or(d.pivot_tol),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    /// Random potentials per energy in the unitarity sweep.
    pub samples: usize,
    /// Random potentials in the quantization check.
    pub quantization_samples: usize,
    pub parseval_nodes: usize,
    /// Bound on the S-matrix change when the grid is refined twofold.
    pub grid_tolerance: f64,
    /// Bound on the S-matrix change when four evanescent levels are added.
    pub evanescent_tolerance: f64,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            samples: 3,
            quantization_samples: 3,
            parseval_nodes: 400,
            grid_tolerance: 1e-4,
            evanescent_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub wall: WallSpec,
    pub n_max: usize,
    /// 0 picks the solver default.
    pub quad_points: usize,
    pub basis_solver: Option<String>,
    pub potential: Option<PotentialSpec>,
    pub potential_path: Option<PathBuf>,
    pub frame: Frame,
    pub solver: SolverSection,
    pub method: String,
    pub task: Option<String>,
    pub energy: Option<f64>,
    pub window: Option<[f64; 2]>,
    pub n_nodes: usize,
    pub e_max: f64,
    pub xi_points: usize,
    pub defect_bound: f64,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: u64,
    pub validate: ValidateSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            wall: WallSpec::linear(),
            n_max: 40,
            quad_points: 0,
            basis_solver: None,
            potential: None,
            potential_path: None,
            frame: Frame::default(),
            solver: SolverSection::default(),
            method: "mode-matching".into(),
            task: None,
            energy: None,
            window: None,
            n_nodes: 21,
            e_max: 3.0,
            xi_points: 201,
            defect_bound: 1e-6,
            output: None,
            format: None,
            seed: 7,
            validate: ValidateSection::default(),
        }
    }
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display()))),
        Some("json") => serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display()))),
        _ => Err(CliError::Config(format!("{}: expected a .toml or .json file", path.display()))),
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let mut cfg: Self = parse(path)?;
        if let Some(p) = &cfg.potential_path {
            if p.is_relative() {
                cfg.potential_path = Some(path.parent().unwrap_or(Path::new(".")).join(p));
            }
        }
        Ok(cfg)
    }

    pub fn potential_spec(&self) -> Result<PotentialSpec, CliError> {
        match (&self.potential, &self.potential_path) {
            (Some(_), Some(_)) => Err(CliError::Config("give either `potential` or `potential_path`, not both".into())),
            (Some(p), None) => Ok(p.clone()),
            (None, Some(path)) => parse(path),
            (None, None) => Ok(PotentialSpec::zero()),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::Config(format!("`{name}` must be positive, got {v}")))
            }
        };
        if self.n_max == 0 {
            return Err(CliError::Config("`n_max` must be at least 1".into()));
        }
        positive("e_max", self.e_max)?;
        positive("defect_bound", self.defect_bound)?;
        positive("validate.grid_tolerance", self.validate.grid_tolerance)?;
        positive("validate.evanescent_tolerance", self.validate.evanescent_tolerance)?;
        if self.xi_points < 2 {
            return Err(CliError::Config("`xi_points` must be at least 2".into()));
        }
        if let Some(e) = self.energy {
            if !e.is_finite() {
                return Err(CliError::Config(format!("energy must be finite, got {e}")));
            }
        }
        if let Some([lo, hi]) = self.window {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(CliError::Config(format!("window must satisfy lo < hi, got [{lo}, {hi}]")));
            }
        }
        self.wall.validate()?;
        self.solver.params().validate()?;
        Ok(())
    }
}

/// Parses `"lo,hi"`.
pub fn parse_window(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or("expected `lo,hi`")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    Ok([lo, hi])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_flag() {
        assert_eq!(parse_window("0.5, 1.2").unwrap(), [0.5, 1.2]);
        assert!(parse_window("0.5").is_err());
        assert!(parse_window("a,1").is_err());
    }

    #[test]
    fn toml_and_json_agree() {
        let toml_cfg: ExperimentConfig = toml::from_str(
            r#"
            task = "scatter"
            energy = 2.2
            [solver]
            nodes_per_unit = 20
            [[potential.bumps]]
            component = "q0"
            amplitude = 0.5
            sx = 1.0
            "#,
        )
        .unwrap();
        let json_cfg: ExperimentConfig = serde_json::from_str(
            r#"{"task": "scatter", "energy": 2.2, "solver": {"nodes_per_unit": 20},
                "potential": {"bumps": [{"component": "q0", "amplitude": 0.5, "sx": 1.0}]}}"#,
        )
        .unwrap();
        assert_eq!(toml_cfg.potential, json_cfg.potential);
        assert_eq!(toml_cfg.solver.params(), json_cfg.solver.params());
        assert_eq!(toml_cfg.solver.params().nodes_per_unit, 20.0);
        assert_eq!(toml_cfg.solver.params().n_evanescent, SolverParams::default().n_evanescent);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(toml::from_str::<ExperimentConfig>("bogus = 1").is_err());
        let cfg = ExperimentConfig {
            e_max: -1.0,
            ..Default::default()
        };
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
        let cfg = ExperimentConfig {
            solver: SolverSection {
                tol_match: Some(0.0),
                ..Default::default()
            },
            ..Default::default()
        };
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
    }
}
