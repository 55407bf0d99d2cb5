//! First-order Born amplitudes on the solver's cell-constant coupling.
//!
//! With `w = e^{i xi_m x} e_m` inserted on the right-hand side, the
//! flux-dual projection gives `c_q' = (-i / J_q) e^{-i xi_q x} e_q^* V e_m`,
//! integrated exactly over every cell.

use nalgebra::DMatrix;

use super::modes::ModeTable;
use crate::channels::ChannelSet;
use crate::error::{Error, Result};
use crate::potential::CouplingField;
use crate::C64;

/// `int_{c-h/2}^{c+h/2} e^{i k x} dx`.
fn cell_integral(k: f64, c: f64, h: f64) -> C64 {
    let half = 0.5 * k * h;
    let sinc = if half.abs() < 1e-6 {
        1.0 - half * half / 6.0
    } else {
        half.sin() / half
    };
    C64::new(0.0, k * c).exp() * (h * sinc)
}

/// Born amplitude tables `(alpha_minus, alpha_plus)`, rows indexed by the
/// incident channel.
pub(crate) fn born_alpha(set: &ChannelSet, field: &CouplingField) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let table = ModeTable::build(set)?;
    let d = table.dim();
    if field.levels < table.levels {
        return Err(Error::GridMismatch(format!(
            "coupling field holds levels 0..={} but the channel set needs 0..={}",
            field.levels, table.levels
        )));
    }
    if field.grid.len() < 2 {
        return Err(Error::GridMismatch("coupling field needs at least two midpoints".into()));
    }
    let h = field.grid[1] - field.grid[0];
    let m = set.m();
    // Mode vectors of the propagating channels, full length.
    let mut vecs = vec![vec![C64::new(0.0, 0.0); d]; m];
    for mode in table.modes.iter().filter(|md| md.propagating) {
        for s in 0..mode.slot_count() {
            vecs[mode.index][mode.slots[s]] = mode.vec[s];
        }
    }
    let xi: Vec<f64> = set.propagating.iter().map(|c| c.xi.re).collect();
    // I[q][m] = sum_j e_q^* V_j e_m * int_cell e^{i(xi_m - xi_q)x}.
    let mut integral = DMatrix::<C64>::zeros(m, m);
    for (j, &c) in field.grid.iter().enumerate() {
        let v = field.block(j);
        if v.norm() == 0.0 {
            continue;
        }
        let mut ve = vec![vec![C64::new(0.0, 0.0); d]; m];
        for (mm, e) in vecs.iter().enumerate() {
            for r in 0..d {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..d {
                    if e[k] != C64::new(0.0, 0.0) {
                        s += v[(r, k)] * e[k];
                    }
                }
                ve[mm][r] = s;
            }
        }
        for q in 0..m {
            for mm in 0..m {
                let overlap: C64 = (0..d).map(|r| vecs[q][r].conj() * ve[mm][r]).sum();
                if overlap != C64::new(0.0, 0.0) {
                    integral[(q, mm)] += overlap * cell_integral(xi[mm] - xi[q], c, h);
                }
            }
        }
    }
    let i = C64::new(0.0, 1.0);
    let mut alpha_minus = DMatrix::<C64>::zeros(m, m);
    let mut alpha_plus = DMatrix::<C64>::zeros(m, m);
    for mm in 0..m {
        let jm = set.propagating[mm].current;
        for q in 0..m {
            let jq = set.propagating[q].current;
            let delta = if q == mm { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            let kick = -i / jq * integral[(q, mm)];
            if jq > 0.0 {
                // c_q(+inf) = c_q(-inf) + kick; c_q(-inf) fixed by the incident wave.
                alpha_plus[(mm, q)] = if jm > 0.0 { delta + kick } else { kick };
                alpha_minus[(mm, q)] = if jm > 0.0 { delta } else { C64::new(0.0, 0.0) };
            } else {
                // c_q(-inf) = c_q(+inf) - kick; c_q(+inf) fixed.
                alpha_minus[(mm, q)] = if jm < 0.0 { delta - kick } else { -kick };
                alpha_plus[(mm, q)] = if jm < 0.0 { delta } else { C64::new(0.0, 0.0) };
            }
        }
    }
    Ok((alpha_minus, alpha_plus))
}
