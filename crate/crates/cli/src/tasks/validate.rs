//! Invariant suite across all modules; one machine-readable check per row.

use edgescatter::channels::eigen_residual;
use edgescatter::observables::GaussianPacket;
use edgescatter::potential::{Bump, Component};
use edgescatter::registry::Named;
use edgescatter::scattering::{prepare, scatter, solve_all};
use edgescatter::{
    build_potential, channels_at, conductivity, conservation_scan, critical_set, gram_matrix, ladder_residual,
    parseval_check, unperturbed_current_matrix, Potential, PotentialSpec, SolverParams, SwitchProfile, C64,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{to_csv, to_json, Context, Outcome, Task};
use crate::config::Format;
use crate::error::CliError;

pub struct Validate;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub bound: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

type CheckResult = edgescatter::Result<(f64, f64, bool, String)>;

fn below(value: f64, bound: f64, detail: String) -> CheckResult {
    Ok((value, bound, value < bound, detail))
}

fn random_potential(rng: &mut ChaCha8Rng, max_amplitude: f64) -> edgescatter::Result<Potential> {
    let comps = [Component::Q0, Component::Q1, Component::Q2, Component::Q3];
    let bumps = (0..2)
        .map(|_| Bump {
            component: comps[rng.gen_range(0..4)],
            amplitude: rng.gen_range(-max_amplitude..=max_amplitude),
            x0: rng.gen_range(-1.0..1.0),
            y0: rng.gen_range(-1.0..1.0),
            sx: rng.gen_range(0.6..1.4),
            sy: Some(rng.gen_range(0.6..2.0)),
        })
        .collect();
    build_potential(&PotentialSpec { bumps, table: None }, edgescatter::Frame::Rotated)
}

fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

struct Suite<'a> {
    ctx: &'a Context,
    energy: f64,
    perturbed: Potential,
    seed: u64,
}

impl Suite<'_> {
    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt)
    }

    fn safe(&self, e: f64) -> bool {
        critical_set(&self.ctx.basis, e.abs() + 1.0)
            .iter()
            .all(|z| (z - e).abs() > 10.0 * self.ctx.params.guard)
    }

    fn ladder(&self) -> CheckResult {
        let b = &self.ctx.basis;
        let top = b.n_max.min(20);
        let mut worst = 0.0f64;
        for n in 1..=top {
            worst = worst.max(ladder_residual(b, n)?);
        }
        below(worst, b.tolerances.ladder, format!("levels 1..={top}, orthonormality defect {:e}", b.orthonormality_defect()))
    }

    fn census(&self) -> CheckResult {
        let mut rng = self.rng(1);
        let mut bad = 0usize;
        let mut count = 0usize;
        while count < 20 {
            let e = rng.gen_range(0.05..self.ctx.config.e_max);
            if !self.safe(e) {
                continue;
            }
            count += 1;
            let set = channels_at(&self.ctx.basis, e, 2, self.ctx.params.guard)?;
            let worst = set
                .propagating
                .iter()
                .map(|c| eigen_residual(&self.ctx.basis, e, c))
                .fold(0.0, f64::max);
            if set.n_plus as i64 - set.n_minus as i64 != -1 || worst > 1e-10 {
                bad += 1;
            }
        }
        Ok((bad as f64, 1.0, bad == 0, format!("{count} energies, n_plus - n_minus = -1 and eigen-residual < 1e-10")))
    }

    fn gram(&self) -> CheckResult {
        let mut rng = self.rng(2);
        let mut worst = 0.0f64;
        let mut count = 0;
        while count < 50 {
            let e = rng.gen_range(0.05..self.ctx.config.e_max);
            if !self.safe(e) {
                continue;
            }
            count += 1;
            let set = channels_at(&self.ctx.basis, e, 0, self.ctx.params.guard)?;
            let g = gram_matrix(&self.ctx.basis, &set);
            for i in 0..g.nrows() {
                for j in 0..g.ncols() {
                    if i != j {
                        worst = worst.max(g[(i, j)].norm());
                    }
                }
            }
        }
        below(worst, 1.0, format!("max off-diagonal overlap over {count} energies"))
    }

    fn free_current(&self) -> CheckResult {
        let set = channels_at(&self.ctx.basis, self.energy, 0, self.ctx.params.guard)?;
        let target = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            set.m(),
            set.currents().into_iter().map(|j| C64::new(j, 0.0)),
        ));
        let mut worst = 0.0f64;
        for width in [0.5, 1.0, 2.0] {
            let c = unperturbed_current_matrix(&set, &SwitchProfile::spatial(0.0, width))?;
            worst = worst.max(max_diff(&c, &target));
        }
        below(worst, 1e-8, format!("E = {}, M = {}, switch widths 0.5, 1, 2", self.energy, set.m()))
    }

    fn conservation(&self) -> CheckResult {
        let params = &self.ctx.params;
        let setup = prepare(&self.ctx.basis, &self.perturbed, self.energy, params)?;
        let waves = solve_all(&setup.set, &setup.field, &setup.grid, params)?;
        let x = setup.grid.half_width() - 2.0;
        let positions = [-0.5 * x, -1.0, 0.0, 1.0, 0.5 * x];
        let profile = SwitchProfile::spatial(0.0, 1.0);
        let mut worst = 0.0f64;
        for w in &waves {
            worst = worst.max(conservation_scan(w, &profile, &positions)?);
        }
        below(worst, 1e-7, format!("{} incident channels at E = {}", waves.len(), self.energy))
    }

    fn unitarity(&self) -> CheckResult {
        let mut rng = self.rng(3);
        let (mut worst, mut trace, mut runs) = (0.0f64, 0.0f64, 0usize);
        for e in [1.2, 1.8, 2.2].into_iter().filter(|&e| self.safe(e)) {
            for _ in 0..self.ctx.config.validate.samples {
                let p = random_potential(&mut rng, 3.0)?;
                let s = scatter(&self.ctx.basis, &p, e, &self.ctx.params, "mode-matching")?;
                worst = worst.max(s.unitarity_defect);
                let target = s.n_plus as f64 - s.n_minus as f64;
                trace = trace.max((s.trace_difference() - target).abs());
                runs += 1;
            }
        }
        let bound = self.ctx.config.defect_bound;
        Ok((
            worst,
            bound,
            worst < bound && trace < 1e-5 && runs > 0,
            format!("{runs} runs, max trace-identity error {trace:e}"),
        ))
    }

    fn born(&self) -> CheckResult {
        let mut rng = self.rng(4);
        let shape = random_potential(&mut rng, 1.0)?;
        let spec_at = |eps: f64| PotentialSpec {
            bumps: shape
                .bumps()
                .iter()
                .map(|b| Bump {
                    amplitude: eps * b.amplitude.signum(),
                    ..b.clone()
                })
                .collect(),
            table: None,
        };
        let mut d = [0.0f64; 2];
        for (k, eps) in [0.01, 0.005].into_iter().enumerate() {
            let p = build_potential(&spec_at(eps), edgescatter::Frame::Rotated)?;
            let exact = scatter(&self.ctx.basis, &p, self.energy, &self.ctx.params, "mode-matching")?;
            let born = scatter(&self.ctx.basis, &p, self.energy, &self.ctx.params, "born")?;
            d[k] = max_diff(&exact.full(), &born.full());
        }
        let ratio = d[0] / d[1];
        Ok((
            ratio,
            4.0,
            (3.5..=4.5).contains(&ratio),
            format!("discrepancy {:e} at 0.01 and {:e} at 0.005; ratio must lie in [3.5, 4.5]", d[0], d[1]),
        ))
    }

    fn quantization(&self) -> CheckResult {
        let [lo, hi] = self.ctx.config.window.unwrap_or([0.5, 1.2]);
        let window = SwitchProfile::energy_window(lo, hi);
        let mut rng = self.rng(5);
        let mut potentials = vec![Potential::zero(), self.perturbed.clone()];
        for _ in 0..self.ctx.config.validate.quantization_samples {
            potentials.push(random_potential(&mut rng, 2.0)?);
        }
        let mut worst = 0.0f64;
        for p in &potentials {
            let rep = conductivity(&self.ctx.basis, p, &window, 7, &self.ctx.params)?;
            worst = worst.max((rep.integrated + 1.0).abs());
        }
        below(worst, 1e-4, format!("|2 pi sigma_I + 1| over [{lo}, {hi}] for {} potentials", potentials.len()))
    }

    fn refinement(&self, refined: SolverParams) -> edgescatter::Result<f64> {
        let base = scatter(&self.ctx.basis, &self.perturbed, self.energy, &self.ctx.params, "mode-matching")?;
        let fine = scatter(&self.ctx.basis, &self.perturbed, self.energy, &refined, "mode-matching")?;
        Ok(max_diff(&base.full(), &fine.full()))
    }

    fn grid_convergence(&self) -> CheckResult {
        let p = self.ctx.params;
        let d = self.refinement(SolverParams {
            nodes_per_unit: 2.0 * p.nodes_per_unit,
            ..p
        })?;
        below(d, self.ctx.config.validate.grid_tolerance, format!("S change from {} to {} nodes per unit", p.nodes_per_unit, 2.0 * p.nodes_per_unit))
    }

    fn evanescent_convergence(&self) -> CheckResult {
        let p = self.ctx.params;
        let d = self.refinement(SolverParams {
            n_evanescent: p.n_evanescent + 4,
            ..p
        })?;
        below(d, self.ctx.config.validate.evanescent_tolerance, format!("S change from {} to {} evanescent levels", p.n_evanescent, p.n_evanescent + 4))
    }

    fn boundary_convergence(&self) -> CheckResult {
        let p = self.ctx.params;
        let x = p.half_width_for(&self.perturbed);
        let defect = |params: SolverParams| -> edgescatter::Result<f64> {
            Ok(scatter(&self.ctx.basis, &self.perturbed, self.energy, &params, "mode-matching")?.max_boundary_defect)
        };
        let d1 = defect(p)?;
        let d2 = defect(SolverParams {
            half_width: Some(2.0 * x),
            ..p
        })?;
        Ok((
            d2,
            d1,
            d2 <= 0.5 * d1 || d2 < 1e-14,
            format!("boundary defect {d1:e} at X = {x}, {d2:e} at X = {}", 2.0 * x),
        ))
    }

    fn parseval(&self) -> CheckResult {
        let set = channels_at(&self.ctx.basis, self.energy, 0, self.ctx.params.guard)?;
        let chan = set
            .propagating
            .iter()
            .find(|c| c.level > 0)
            .unwrap_or(&set.propagating[0]);
        let f = GaussianPacket::windowed_mode(chan, 5.0);
        let rep = parseval_check(&self.ctx.basis, &f, self.ctx.config.validate.parseval_nodes)?;
        below(rep.defect, 1e-4, format!("{} xi-nodes; defect at half the nodes {:e}", rep.xi_nodes, rep.coarse_defect))
    }
}

impl Named for Validate {
    fn name(&self) -> &'static str {
        "validate"
    }
}

impl Task for Validate {
    fn default_format(&self) -> Format {
        Format::Json
    }

    fn run(&self, ctx: &Context) -> Result<Outcome, CliError> {
        let seed = ctx.config.seed;
        let perturbed = if ctx.potential.is_zero() {
            random_potential(&mut ChaCha8Rng::seed_from_u64(seed), 1.0)?
        } else {
            ctx.potential.clone()
        };
        let suite = Suite {
            ctx,
            energy: ctx.config.energy.unwrap_or(2.2),
            perturbed,
            seed,
        };
        type Runner<'a> = fn(&Suite<'a>) -> CheckResult;
        let runners: [(&'static str, Runner); 12] = [
            ("ladder_residuals", Suite::ladder),
            ("channel_census", Suite::census),
            ("gram_bound", Suite::gram),
            ("free_current_matrix", Suite::free_current),
            ("current_conservation", Suite::conservation),
            ("unitarity_sweep", Suite::unitarity),
            ("born_comparison", Suite::born),
            ("quantization", Suite::quantization),
            ("grid_convergence", Suite::grid_convergence),
            ("evanescent_convergence", Suite::evanescent_convergence),
            ("boundary_convergence", Suite::boundary_convergence),
            ("parseval", Suite::parseval),
        ];
        let checks: Vec<Check> = runners
            .iter()
            .map(|&(name, run)| {
                let check = match run(&suite) {
                    Ok((value, bound, passed, detail)) => Check {
                        name,
                        passed,
                        value,
                        bound,
                        detail,
                    },
                    Err(e) => Check {
                        name,
                        passed: false,
                        value: f64::NAN,
                        bound: f64::NAN,
                        detail: format!("{e:?}: {e}"),
                    },
                };
                log::info!("{name}: {}", if check.passed { "pass" } else { "FAIL" });
                check
            })
            .collect();
        let report = ValidationReport {
            seed,
            passed: checks.iter().all(|c| c.passed),
            checks,
        };
        let body = match ctx.format {
            Format::Json => to_json(&report)?,
            Format::Csv => to_csv(&report.checks)?,
        };
        Ok(Outcome {
            body,
            passed: report.passed,
        })
    }
}
