//! Free modes of the truncated coefficient system and their dual rows.

use crate::channels::{Channel, ChannelKind, ChannelSet};
use crate::error::{Error, Result};
use crate::potential::{coefficient_dim, u_index, v_index};
use crate::C64;

#[derive(Debug, Clone)]
pub(crate) struct FreeMode {
    pub level: usize,
    pub xi: C64,
    pub current: f64,
    pub propagating: bool,
    /// Index into `set.propagating` or `set.evanescent`.
    pub index: usize,
    /// Coefficient slots touched by this mode and the mode vector on them.
    pub slots: [usize; 2],
    pub vec: [C64; 2],
    /// Row of the inverse eigenvector matrix: `c_k = dual . w[slots]`.
    pub dual: [C64; 2],
}

impl FreeMode {
    /// Fixed from the left: right-moving or growing towards `-inf`.
    pub fn fixed_left(&self) -> bool {
        if self.propagating {
            self.current > 0.0
        } else {
            self.xi.im > 0.0
        }
    }

    pub fn fixed_right(&self) -> bool {
        !self.fixed_left()
    }

    pub fn amplitude(&self, w: &[C64]) -> C64 {
        let n = self.slot_count();
        (0..n).map(|k| self.dual[k] * w[self.slots[k]]).sum()
    }

    pub fn slot_count(&self) -> usize {
        if self.level == 0 {
            1
        } else {
            2
        }
    }
}

pub(crate) struct ModeTable {
    pub levels: usize,
    pub modes: Vec<FreeMode>,
}

impl ModeTable {
    pub fn dim(&self) -> usize {
        coefficient_dim(self.levels)
    }

    pub fn build(set: &ChannelSet) -> Result<Self> {
        let levels = set.max_level();
        let mut per_level: Vec<Vec<(&Channel, bool, usize)>> = vec![Vec::new(); levels + 1];
        for (i, c) in set.propagating.iter().enumerate() {
            per_level[c.level].push((c, true, i));
        }
        for (i, c) in set.evanescent.iter().enumerate() {
            per_level[c.level].push((c, false, i));
        }
        let mut modes = Vec::with_capacity(coefficient_dim(levels));
        for (level, chans) in per_level.iter().enumerate() {
            let expected = if level == 0 { 1 } else { 2 };
            if chans.len() != expected {
                return Err(Error::InvalidInput(format!(
                    "channel set covers level {level} with {} modes, expected {expected}",
                    chans.len()
                )));
            }
            if level == 0 {
                let (c, propagating, index) = chans[0];
                modes.push(FreeMode {
                    level: 0,
                    xi: c.xi,
                    current: c.current,
                    propagating,
                    index,
                    slots: [v_index(0), v_index(0)],
                    vec: [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
                    dual: [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
                });
                continue;
            }
            let (a, b) = (chans[0].0, chans[1].0);
            let det = a.spinor[0] * b.spinor[1] - b.spinor[0] * a.spinor[1];
            if det.norm() < 1e-12 {
                return Err(Error::GuardViolation { energy: set.energy });
            }
            let duals = [
                [b.spinor[1] / det, -b.spinor[0] / det],
                [-a.spinor[1] / det, a.spinor[0] / det],
            ];
            for (k, &(c, propagating, index)) in chans.iter().enumerate() {
                debug_assert!(propagating == (c.kind == ChannelKind::Propagating));
                modes.push(FreeMode {
                    level,
                    xi: c.xi,
                    current: c.current,
                    propagating,
                    index,
                    slots: [u_index(level), v_index(level)],
                    vec: c.spinor,
                    dual: duals[k],
                });
            }
        }
        Ok(ModeTable { levels, modes })
    }
}

/// `exp(t A0)` restricted to one level, `A0 = i S3 (E - T0)`.
///
/// Level `n >= 1` block on `(u_n, v_n)` is `i [[E, -r], [r, -E]]` with
/// `r = sqrt(rho_n)`; its square is `-(E^2 - rho_n) I`.
pub(crate) fn free_level_exp(energy: f64, rho: f64, t: f64) -> [[C64; 2]; 2] {
    let i = C64::new(0.0, 1.0);
    let r = rho.sqrt();
    let a = [[i * energy, -i * r], [i * r, -i * energy]];
    let s2 = energy * energy - rho;
    let s = if s2 >= 0.0 {
        C64::new(s2.sqrt(), 0.0)
    } else {
        C64::new(0.0, (-s2).sqrt())
    };
    let st = s * t;
    let (cos, sinc) = if st.norm() < 1e-8 {
        (C64::new(1.0, 0.0) - st * st / 2.0, C64::new(t, 0.0) * (C64::new(1.0, 0.0) - st * st / 6.0))
    } else {
        (st.cos(), st.sin() / s)
    };
    [
        [cos + sinc * a[0][0], sinc * a[0][1]],
        [sinc * a[1][0], cos + sinc * a[1][1]],
    ]
}
