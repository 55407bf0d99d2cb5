//! Global banded solve of the coupled first-order system with mode-matching
//! boundary rows.
//!
//! Unknowns are the coefficient vectors `w_j` at the grid nodes. Each cell
//! contributes `exp(-h A_j / 2) w_{j+1} - exp(h A_j / 2) w_j = 0` with
//! `A_j = i S3 (E - T0 - V_j)` frozen at the midpoint. Boundary rows fix
//! the amplitudes of the modes entering (or growing) from each end.

use nalgebra::DMatrix;

use super::modes::{free_level_exp, FreeMode, ModeTable};
use super::{SolverGrid, SolverParams, WaveField};
use crate::banded::BandedMatrix;
use crate::channels::ChannelSet;
use crate::error::{Error, Result};
use crate::potential::{u_index, v_index, CouplingField};
use crate::C64;

const FREE_CELL_THRESHOLD: f64 = 1e-17;

fn level_rhos(set: &ChannelSet, levels: usize) -> Vec<f64> {
    let mut rho = vec![0.0; levels + 1];
    for c in set.propagating.iter().chain(&set.evanescent) {
        rho[c.level] = c.rho;
    }
    rho
}

/// `exp(t A0)` as a dense matrix in the interleaved layout.
fn free_exp(energy: f64, rho: &[f64], t: f64) -> DMatrix<C64> {
    let levels = rho.len() - 1;
    let d = 2 * levels + 1;
    let mut m = DMatrix::<C64>::zeros(d, d);
    m[(0, 0)] = (C64::new(0.0, -energy * t)).exp();
    for n in 1..=levels {
        let b = free_level_exp(energy, rho[n], t);
        let s = [u_index(n), v_index(n)];
        for r in 0..2 {
            for c in 0..2 {
                m[(s[r], s[c])] = b[r][c];
            }
        }
    }
    m
}

/// `A = i S3 (E - T0 - V)` for the leading `d x d` block of `v`.
fn generator(energy: f64, rho: &[f64], v: &DMatrix<C64>) -> DMatrix<C64> {
    let levels = rho.len() - 1;
    let d = 2 * levels + 1;
    let i = C64::new(0.0, 1.0);
    let mut b = DMatrix::<C64>::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            b[(r, c)] = -v[(r, c)];
        }
        b[(r, r)] += energy;
    }
    for n in 1..=levels {
        let s = rho[n].sqrt();
        b[(u_index(n), v_index(n))] -= s;
        b[(v_index(n), u_index(n))] -= s;
    }
    // Row r of S3: +1 on u slots (odd), -1 on v slots (even).
    for r in 0..d {
        let sign = if r % 2 == 1 { i } else { -i };
        for c in 0..d {
            b[(r, c)] *= sign;
        }
    }
    b
}

pub(crate) struct Assembled {
    pub matrix: BandedMatrix,
    pub table: ModeTable,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub d: usize,
    pub potential_tail: f64,
}

pub(crate) fn check_guard(set: &ChannelSet, guard: f64) -> Result<()> {
    let e = set.energy.abs();
    if e < guard {
        return Err(Error::GuardViolation { energy: set.energy });
    }
    for c in set.propagating.iter().chain(&set.evanescent) {
        if c.level > 0 && (e - c.rho.sqrt()).abs() < guard {
            return Err(Error::GuardViolation { energy: set.energy });
        }
    }
    Ok(())
}

pub(crate) fn check_field(field: &CouplingField, grid: &SolverGrid, levels: usize) -> Result<()> {
    if field.levels < levels {
        return Err(Error::GridMismatch(format!(
            "coupling field holds levels 0..={} but the channel set needs 0..={levels}",
            field.levels
        )));
    }
    if field.grid.len() != grid.midpoints.len()
        || field.grid.iter().zip(&grid.midpoints).any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + b.abs()))
    {
        return Err(Error::GridMismatch(format!(
            "coupling field has {} nodes, solver grid has {} cell midpoints",
            field.grid.len(),
            grid.midpoints.len()
        )));
    }
    Ok(())
}

pub(crate) fn assemble(set: &ChannelSet, field: &CouplingField, grid: &SolverGrid, params: &SolverParams) -> Result<Assembled> {
    check_guard(set, params.guard)?;
    let table = ModeTable::build(set)?;
    let levels = table.levels;
    check_field(field, grid, levels)?;
    let d = table.dim();
    let k_cells = grid.cells();
    let n = d * (k_cells + 1);
    let rho = level_rhos(set, levels);
    let energy = set.energy;

    let left: Vec<usize> = (0..table.modes.len()).filter(|&k| table.modes[k].fixed_left()).collect();
    let right: Vec<usize> = (0..table.modes.len()).filter(|&k| table.modes[k].fixed_right()).collect();
    debug_assert_eq!(left.len(), levels);
    debug_assert_eq!(right.len(), levels + 1);
    let nl = left.len();
    let kl = nl + d - 1;
    let ku = 2 * d - 1 - nl;
    let mut a = BandedMatrix::zeros(n, kl, ku);

    for (r, &k) in left.iter().enumerate() {
        put_dual(&mut a, r, 0, &table.modes[k]);
    }

    let h = grid.h;
    let free_plus = free_exp(energy, &rho, h / 2.0);
    let free_minus = free_exp(energy, &rho, -h / 2.0);
    let cell_mats: Vec<(DMatrix<C64>, DMatrix<C64>)> = {
        use rayon::prelude::*;
        (0..k_cells)
            .into_par_iter()
            .map(|j| {
                let v = field.block(j).view((0, 0), (d, d)).into_owned();
                if v.norm() * h < FREE_CELL_THRESHOLD {
                    (free_plus.clone(), free_minus.clone())
                } else {
                    let g = generator(energy, &rho, &v);
                    let plus = (&g * C64::new(h / 2.0, 0.0)).exp();
                    let minus = (&g * C64::new(-h / 2.0, 0.0)).exp();
                    (plus, minus)
                }
            })
            .collect()
    };
    for (j, (plus, minus)) in cell_mats.iter().enumerate() {
        let row0 = nl + j * d;
        for r in 0..d {
            for c in 0..d {
                let p = plus[(r, c)];
                if p != C64::new(0.0, 0.0) {
                    a.set(row0 + r, j * d + c, -p);
                }
                let m = minus[(r, c)];
                if m != C64::new(0.0, 0.0) {
                    a.set(row0 + r, (j + 1) * d + c, m);
                }
            }
        }
    }

    let row0 = nl + k_cells * d;
    for (r, &k) in right.iter().enumerate() {
        put_dual(&mut a, row0 + r, k_cells * d, &table.modes[k]);
    }

    let potential_tail = {
        let first = field.block(0).view((0, 0), (d, d)).norm();
        let last = field.block(k_cells - 1).view((0, 0), (d, d)).norm();
        first.max(last)
    };
    Ok(Assembled {
        matrix: a,
        table,
        left,
        right,
        d,
        potential_tail,
    })
}

fn put_dual(a: &mut BandedMatrix, row: usize, col0: usize, mode: &FreeMode) {
    for s in 0..mode.slot_count() {
        a.set(row, col0 + mode.slots[s], mode.dual[s]);
    }
}

/// Solves for every incident channel in `incidents` with one factorization.
pub(crate) fn solve_many(
    set: &ChannelSet,
    field: &CouplingField,
    grid: &SolverGrid,
    params: &SolverParams,
    incidents: &[usize],
) -> Result<Vec<WaveField>> {
    for &m in incidents {
        if m >= set.propagating.len() {
            return Err(Error::IndexOutOfRange {
                index: m,
                max: set.propagating.len().saturating_sub(1),
            });
        }
    }
    let asm = assemble(set, field, grid, params)?;
    let d = asm.d;
    let k_cells = grid.cells();
    let n = asm.matrix.n();
    let x_left = grid.nodes[0];
    let x_right = grid.nodes[k_cells];
    let i = C64::new(0.0, 1.0);

    let mut rhs = DMatrix::<C64>::zeros(n, incidents.len());
    for (col, &m) in incidents.iter().enumerate() {
        let chan = &set.propagating[m];
        let (rows, offset, x_ref) = if chan.current > 0.0 {
            (&asm.left, 0, x_left)
        } else {
            (&asm.right, asm.left.len() + k_cells * d, x_right)
        };
        let r = rows
            .iter()
            .position(|&k| asm.table.modes[k].propagating && asm.table.modes[k].index == m)
            .expect("incident mode has a boundary row");
        rhs[(offset + r, col)] = (i * chan.xi * x_ref).exp();
    }

    let original = asm.matrix.clone();
    let lu = asm.matrix.factor(params.pivot_tol)?;
    let mut sol = rhs.clone();
    lu.solve_in_place(&mut sol);
    let resid = original.mul(&sol) - &rhs;

    let mut out = Vec::with_capacity(incidents.len());
    for (col, &m) in incidents.iter().enumerate() {
        let residual = resid.column(col).norm() / rhs.column(col).norm();
        if !residual.is_finite() {
            return Err(Error::SingularSystem { pivot: lu.min_pivot });
        }
        if residual > params.tol_solve {
            log::warn!("solve residual {residual:.3e} above tolerance {:.1e} at E = {}", params.tol_solve, set.energy);
        }
        let coeffs = DMatrix::from_fn(d, k_cells + 1, |r, j| sol[(j * d + r, col)]);
        let mut wave = WaveField {
            energy: set.energy,
            incident: m,
            x_grid: grid.nodes.clone(),
            levels: asm.table.levels,
            coeffs,
            alpha_minus: Vec::new(),
            alpha_plus: Vec::new(),
            evanescent_minus: Vec::new(),
            evanescent_plus: Vec::new(),
            boundary_defect: 0.0,
            match_defect: 0.0,
            potential_tail: asm.potential_tail,
            residual,
        };
        let amps = super::project_ends(&wave, &asm.table);
        wave.alpha_minus = amps.alpha_minus;
        wave.alpha_plus = amps.alpha_plus;
        wave.evanescent_minus = amps.evanescent_minus;
        wave.evanescent_plus = amps.evanescent_plus;
        wave.boundary_defect = amps.boundary_defect;
        wave.match_defect = amps.reconstruction + asm.potential_tail;
        out.push(wave);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::channels_at;
    use crate::transverse::{build_basis, WallSpec};

    #[test]
    fn generator_exponential_matches_closed_form_when_free() {
        let b = build_basis(&WallSpec::linear(), 12, 0).unwrap();
        let set = channels_at(&b, 2.2, 3, 1e-3).unwrap();
        let levels = set.max_level();
        let rho = level_rhos(&set, levels);
        let d = 2 * levels + 1;
        let g = generator(2.2, &rho, &DMatrix::zeros(d, d));
        let t = 0.05;
        let dense = (&g * C64::new(t, 0.0)).exp();
        let closed = free_exp(2.2, &rho, t);
        assert!((dense - closed).norm() < 1e-13);
    }

    #[test]
    fn steps_preserve_flux_form() {
        // exp(hA)^* S3 exp(hA) = S3 for Hermitian V.
        let b = build_basis(&WallSpec::linear(), 12, 0).unwrap();
        let set = channels_at(&b, 1.8, 2, 1e-3).unwrap();
        let levels = set.max_level();
        let rho = level_rhos(&set, levels);
        let d = 2 * levels + 1;
        let mut v = DMatrix::<C64>::from_fn(d, d, |r, c| C64::new(((r * 7 + c * 3) % 5) as f64 * 0.1, ((r + 2 * c) % 3) as f64 * 0.05));
        v = (&v + v.adjoint()) * C64::new(0.5, 0.0);
        let step = (generator(1.8, &rho, &v) * C64::new(0.3, 0.0)).exp();
        let s3 = DMatrix::<C64>::from_fn(d, d, |r, c| {
            if r != c {
                C64::new(0.0, 0.0)
            } else if r % 2 == 1 {
                C64::new(1.0, 0.0)
            } else {
                C64::new(-1.0, 0.0)
            }
        });
        let defect = (step.adjoint() * &s3 * &step - &s3).norm();
        assert!(defect < 1e-12, "{defect}");
    }
}
