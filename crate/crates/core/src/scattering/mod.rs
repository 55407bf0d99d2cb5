//! Coupled-channel scattering at fixed energy.
//!
//! `solve_mode` returns the scattering state for one incident propagating
//! channel; `smatrix` runs every incident channel and assembles the
//! flux-normalised matrix
//!
//! ```text
//! S = [ T+  R- ]     rows: incident channel (J > 0 block, then J < 0)
//!     [ R+  T- ]     cols: outgoing channel, same order
//! ```
//!
//! with entries `sqrt(|J_n| / |J_m|) alpha_mn`, where `alpha` is read at
//! `+inf` for outgoing `J_n > 0` and at `-inf` for `J_n < 0`.

mod born;
mod modes;
mod solver;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::channels::{channels_at, ChannelSet};
use crate::error::{Error, Result};
use crate::potential::{coupling_field_levels, CouplingField, Potential};
use crate::registry::{Named, Registry};
use crate::transverse::TransverseBasis;
use crate::C64;

use modes::ModeTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverParams {
    /// Half-width `X`; `None` means `X_Q + 8`.
    pub half_width: Option<f64>,
    pub nodes_per_unit: f64,
    pub n_evanescent: usize,
    pub guard: f64,
    pub tol_solve: f64,
    pub tol_match: f64,
    pub pivot_tol: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            half_width: None,
            nodes_per_unit: 40.0,
            n_evanescent: 8,
            guard: 1e-3,
            tol_solve: 1e-8,
            tol_match: 1e-6,
            pivot_tol: 1e-13,
        }
    }
}

impl SolverParams {
    pub fn half_width_for(&self, potential: &Potential) -> f64 {
        self.half_width.unwrap_or(potential.support_radius + 8.0)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("nodes_per_unit", self.nodes_per_unit),
            ("guard", self.guard),
            ("tol_solve", self.tol_solve),
            ("tol_match", self.tol_match),
            ("pivot_tol", self.pivot_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(x) = self.half_width {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::InvalidInput(format!("half_width must be positive, got {x}")));
            }
        }
        Ok(())
    }
}

/// Uniform nodes on `[-X, X]` and the cell midpoints where `V` is sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverGrid {
    pub nodes: Vec<f64>,
    pub midpoints: Vec<f64>,
    pub h: f64,
}

impl SolverGrid {
    pub fn new(half_width: f64, nodes_per_unit: f64) -> Result<Self> {
        if !(half_width > 0.0) || !(nodes_per_unit > 0.0) {
            return Err(Error::InvalidInput(format!(
                "grid needs positive half-width and density, got {half_width}, {nodes_per_unit}"
            )));
        }
        let cells = ((2.0 * half_width * nodes_per_unit).ceil() as usize).max(2);
        let h = 2.0 * half_width / cells as f64;
        let nodes: Vec<f64> = (0..=cells).map(|j| -half_width + h * j as f64).collect();
        let midpoints: Vec<f64> = (0..cells).map(|j| -half_width + h * (j as f64 + 0.5)).collect();
        Ok(SolverGrid { nodes, midpoints, h })
    }

    pub fn cells(&self) -> usize {
        self.midpoints.len()
    }

    pub fn half_width(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }
}

/// Scattering state for one incident channel.
#[derive(Debug, Clone)]
pub struct WaveField {
    pub energy: f64,
    pub incident: usize,
    pub x_grid: Vec<f64>,
    pub levels: usize,
    /// `d x nodes`, interleaved `(v_0, u_1, v_1, ...)` per column.
    pub coeffs: DMatrix<C64>,
    /// Amplitudes `alpha^-_{m n}` at `-inf`, one per propagating channel.
    pub alpha_minus: Vec<C64>,
    /// Amplitudes `alpha^+_{m n}` at `+inf`.
    pub alpha_plus: Vec<C64>,
    /// Local amplitudes at `-X` of the evanescent modes decaying leftwards.
    pub evanescent_minus: Vec<C64>,
    /// Local amplitudes at `+X` of the evanescent modes decaying rightwards.
    pub evanescent_plus: Vec<C64>,
    /// Evanescent content at `|x| = X`.
    pub boundary_defect: f64,
    /// Mode-reconstruction residual at `|x| = X` plus `||V||` there.
    pub match_defect: f64,
    pub potential_tail: f64,
    /// Relative residual of the global linear system.
    pub residual: f64,
}

impl WaveField {
    pub fn dim(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn node(&self, j: usize) -> Vec<C64> {
        self.coeffs.column(j).iter().copied().collect()
    }
}

pub(crate) struct EndAmplitudes {
    pub alpha_minus: Vec<C64>,
    pub alpha_plus: Vec<C64>,
    pub evanescent_minus: Vec<C64>,
    pub evanescent_plus: Vec<C64>,
    pub boundary_defect: f64,
    pub reconstruction: f64,
}

pub(crate) fn project_ends(w: &WaveField, table: &ModeTable) -> EndAmplitudes {
    let i = C64::new(0.0, 1.0);
    let last = w.x_grid.len() - 1;
    let (xl, xr) = (w.x_grid[0], w.x_grid[last]);
    let left = w.node(0);
    let right = w.node(last);
    let m = table.modes.iter().filter(|md| md.propagating).count();
    let mut out = EndAmplitudes {
        alpha_minus: vec![C64::new(0.0, 0.0); m],
        alpha_plus: vec![C64::new(0.0, 0.0); m],
        evanescent_minus: Vec::new(),
        evanescent_plus: Vec::new(),
        boundary_defect: 0.0,
        reconstruction: 0.0,
    };
    let d = table.dim();
    let mut rebuilt_l = vec![C64::new(0.0, 0.0); d];
    let mut rebuilt_r = vec![C64::new(0.0, 0.0); d];
    let (mut ev_l, mut ev_r) = (0.0, 0.0);
    for mode in &table.modes {
        let cl = mode.amplitude(&left);
        let cr = mode.amplitude(&right);
        for s in 0..mode.slot_count() {
            rebuilt_l[mode.slots[s]] += cl * mode.vec[s];
            rebuilt_r[mode.slots[s]] += cr * mode.vec[s];
        }
        if mode.propagating {
            out.alpha_minus[mode.index] = cl * (-i * mode.xi * xl).exp();
            out.alpha_plus[mode.index] = cr * (-i * mode.xi * xr).exp();
        } else if mode.xi.im < 0.0 {
            out.evanescent_minus.push(cl);
            ev_l += cl.norm_sqr();
        } else {
            out.evanescent_plus.push(cr);
            ev_r += cr.norm_sqr();
        }
    }
    out.boundary_defect = ev_l.sqrt().max(ev_r.sqrt());
    let err = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    out.reconstruction = err(&rebuilt_l, &left).max(err(&rebuilt_r, &right));
    out
}

/// Amplitude table read back from a wave field.
#[derive(Debug, Clone, PartialEq)]
pub struct Amplitudes {
    pub alpha_minus: Vec<C64>,
    pub alpha_plus: Vec<C64>,
    pub match_defect: f64,
    pub boundary_defect: f64,
}

/// Projects `psi(+-X)` onto the free modes after removing evanescent
/// content. Fails when the matching defect exceeds `tol_match`.
pub fn extract_alpha(w: &WaveField, set: &ChannelSet, tol_match: f64) -> Result<Amplitudes> {
    if (w.energy - set.energy).abs() > 0.0 {
        return Err(Error::InvalidInput(format!(
            "wave field at E = {} does not match channel set at E = {}",
            w.energy, set.energy
        )));
    }
    let table = ModeTable::build(set)?;
    if table.levels != w.levels {
        return Err(Error::GridMismatch(format!(
            "wave field has levels 0..={}, channel set 0..={}",
            w.levels, table.levels
        )));
    }
    let amps = project_ends(w, &table);
    let match_defect = amps.reconstruction + w.potential_tail;
    if match_defect > tol_match {
        return Err(Error::MatchDefectTooLarge {
            defect: match_defect,
            tolerance: tol_match,
        });
    }
    Ok(Amplitudes {
        alpha_minus: amps.alpha_minus,
        alpha_plus: amps.alpha_plus,
        match_defect,
        boundary_defect: amps.boundary_defect,
    })
}

/// Scattering state for incident channel `incident`.
pub fn solve_mode(set: &ChannelSet, field: &CouplingField, grid: &SolverGrid, incident: usize, params: &SolverParams) -> Result<WaveField> {
    params.validate()?;
    let mut waves = solver::solve_many(set, field, grid, params, &[incident])?;
    Ok(waves.remove(0))
}

/// Scattering states for every propagating channel, sharing one
/// factorization.
pub fn solve_all(set: &ChannelSet, field: &CouplingField, grid: &SolverGrid, params: &SolverParams) -> Result<Vec<WaveField>> {
    params.validate()?;
    let incidents: Vec<usize> = (0..set.m()).collect();
    solver::solve_many(set, field, grid, params, &incidents)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelSummary {
    pub level: usize,
    pub branch_sign: i8,
    pub xi: f64,
    pub current: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix {
    pub energy: f64,
    pub method: &'static str,
    pub n_plus: usize,
    pub n_minus: usize,
    pub channels: Vec<ChannelSummary>,
    pub t_plus: DMatrix<C64>,
    pub t_minus: DMatrix<C64>,
    pub r_plus: DMatrix<C64>,
    pub r_minus: DMatrix<C64>,
    /// `||S^* S - I||_F`.
    pub unitarity_defect: f64,
    pub max_residual: f64,
    pub max_match_defect: f64,
    pub max_boundary_defect: f64,
}

impl ScatteringMatrix {
    pub fn m(&self) -> usize {
        self.n_plus + self.n_minus
    }

    pub fn full(&self) -> DMatrix<C64> {
        let (p, m) = (self.n_plus, self.n_minus);
        let mut s = DMatrix::<C64>::zeros(p + m, p + m);
        s.view_mut((0, 0), (p, p)).copy_from(&self.t_plus);
        s.view_mut((0, p), (p, m)).copy_from(&self.r_minus);
        s.view_mut((p, 0), (m, p)).copy_from(&self.r_plus);
        s.view_mut((p, p), (m, m)).copy_from(&self.t_minus);
        s
    }

    /// `tr T+^* T+ - tr T-^* T-`.
    pub fn trace_difference(&self) -> f64 {
        self.t_plus.norm_squared() - self.t_minus.norm_squared()
    }

    fn from_alpha(set: &ChannelSet, method: &'static str, alpha_minus: &DMatrix<C64>, alpha_plus: &DMatrix<C64>) -> Self {
        let m = set.m();
        let cur = set.currents();
        let s = DMatrix::from_fn(m, m, |r, c| {
            let weight = (cur[c].abs() / cur[r].abs()).sqrt();
            let a = if cur[c] > 0.0 { alpha_plus[(r, c)] } else { alpha_minus[(r, c)] };
            a * weight
        });
        let (p, n) = (set.n_plus, set.n_minus);
        let defect = (s.adjoint() * &s - DMatrix::<C64>::identity(m, m)).norm();
        ScatteringMatrix {
            energy: set.energy,
            method,
            n_plus: p,
            n_minus: n,
            channels: set
                .propagating
                .iter()
                .map(|c| ChannelSummary {
                    level: c.level,
                    branch_sign: c.branch_sign,
                    xi: c.xi.re,
                    current: c.current,
                })
                .collect(),
            t_plus: s.view((0, 0), (p, p)).into_owned(),
            r_minus: s.view((0, p), (p, n)).into_owned(),
            r_plus: s.view((p, 0), (n, p)).into_owned(),
            t_minus: s.view((p, p), (n, n)).into_owned(),
            unitarity_defect: defect,
            max_residual: 0.0,
            max_match_defect: 0.0,
            max_boundary_defect: 0.0,
        }
    }
}

/// A strategy producing `S(E)` from the channel data and couplings.
pub trait SmatrixMethod: Named + Send + Sync {
    fn compute(&self, set: &ChannelSet, field: &CouplingField, grid: &SolverGrid, params: &SolverParams) -> Result<ScatteringMatrix>;
}

pub struct ModeMatching;

impl Named for ModeMatching {
    fn name(&self) -> &'static str {
        "mode-matching"
    }
}

impl SmatrixMethod for ModeMatching {
    fn compute(&self, set: &ChannelSet, field: &CouplingField, grid: &SolverGrid, params: &SolverParams) -> Result<ScatteringMatrix> {
        let waves = solve_all(set, field, grid, params)?;
        let m = set.m();
        let mut am = DMatrix::<C64>::zeros(m, m);
        let mut ap = DMatrix::<C64>::zeros(m, m);
        let (mut res, mut mdef, mut bdef) = (0.0f64, 0.0f64, 0.0f64);
        for w in &waves {
            let amps = extract_alpha(w, set, params.tol_match)?;
            for q in 0..m {
                am[(w.incident, q)] = amps.alpha_minus[q];
                ap[(w.incident, q)] = amps.alpha_plus[q];
            }
            res = res.max(w.residual);
            mdef = mdef.max(amps.match_defect);
            bdef = bdef.max(amps.boundary_defect);
        }
        let mut s = ScatteringMatrix::from_alpha(set, self.name(), &am, &ap);
        s.max_residual = res;
        s.max_match_defect = mdef;
        s.max_boundary_defect = bdef;
        Ok(s)
    }
}

pub struct BornApproximation;

impl Named for BornApproximation {
    fn name(&self) -> &'static str {
        "born"
    }
}

impl SmatrixMethod for BornApproximation {
    fn compute(&self, set: &ChannelSet, field: &CouplingField, _grid: &SolverGrid, _params: &SolverParams) -> Result<ScatteringMatrix> {
        born_smatrix(set, field)
    }
}

pub fn smatrix_registry() -> Registry<dyn SmatrixMethod> {
    let mut r: Registry<dyn SmatrixMethod> = Registry::new("smatrix method");
    r.register(Box::new(ModeMatching)).register(Box::new(BornApproximation));
    r
}

/// Flux-normalised `S(E)` by mode matching.
pub fn smatrix(set: &ChannelSet, field: &CouplingField, grid: &SolverGrid, params: &SolverParams) -> Result<ScatteringMatrix> {
    ModeMatching.compute(set, field, grid, params)
}

/// First-order Born `S(E)` on the same cell-constant couplings.
pub fn born_smatrix(set: &ChannelSet, field: &CouplingField) -> Result<ScatteringMatrix> {
    let (am, ap) = born::born_alpha(set, field)?;
    Ok(ScatteringMatrix::from_alpha(set, "born", &am, &ap))
}

/// Channel set, grid and couplings for one energy.
#[derive(Debug, Clone)]
pub struct ScatteringSetup {
    pub set: ChannelSet,
    pub grid: SolverGrid,
    pub field: CouplingField,
}

pub fn prepare(basis: &TransverseBasis, potential: &Potential, energy: f64, params: &SolverParams) -> Result<ScatteringSetup> {
    params.validate()?;
    let set = channels_at(basis, energy, params.n_evanescent, params.guard)?;
    let x = params.half_width_for(potential);
    if x < potential.support_radius {
        return Err(Error::InvalidInput(format!(
            "half-width {x} does not cover the potential support {}",
            potential.support_radius
        )));
    }
    let grid = SolverGrid::new(x, params.nodes_per_unit)?;
    let field = coupling_field_levels(potential, basis, &grid.midpoints, set.max_level())?;
    Ok(ScatteringSetup { set, grid, field })
}

/// `S(E)` from scratch with the named method.
pub fn scatter(basis: &TransverseBasis, potential: &Potential, energy: f64, params: &SolverParams, method: &str) -> Result<ScatteringMatrix> {
    let setup = prepare(basis, potential, energy, params)?;
    let registry = smatrix_registry();
    registry.get(method)?.compute(&setup.set, &setup.field, &setup.grid, params)
}
