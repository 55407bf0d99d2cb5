//! Current correlations, conductivity and the unperturbed Parseval check.
//!
//! In the rotated frame `i[H, P] = P'(x) s3`, so the current correlation of
//! two states is `int P'(x) <psi_b, s3 psi_a>_y dx`. With channel states
//! normalised as `e^{i xi x} phi` the `2 pi` prefactor cancels the plane-wave
//! normalisation and a free channel returns its group velocity.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{critical_set, Channel, ChannelSet};
use crate::error::{Error, Result};
use crate::potential::{u_index, v_index, Potential};
use crate::quadrature::{gauss_legendre, simpson_weights};
use crate::scattering::{scatter, SolverParams, WaveField};
use crate::transverse::TransverseBasis;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchKind {
    /// Quintic smootherstep in `x`.
    SmoothstepX,
    /// Cubic smoothstep in `E`.
    SmoothstepE,
}

/// Monotone switch from 0 on the left of `center - width` to 1 on the
/// right of `center + width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchProfile {
    pub kind: SwitchKind,
    pub center: f64,
    pub width: f64,
}

impl SwitchProfile {
    pub fn spatial(center: f64, width: f64) -> Self {
        SwitchProfile {
            kind: SwitchKind::SmoothstepX,
            center,
            width,
        }
    }

    pub fn energy_window(lo: f64, hi: f64) -> Self {
        SwitchProfile {
            kind: SwitchKind::SmoothstepE,
            center: 0.5 * (lo + hi),
            width: 0.5 * (hi - lo),
        }
    }

    pub fn window(&self) -> (f64, f64) {
        (self.center - self.width, self.center + self.width)
    }

    fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite() && self.center.is_finite()) {
            return Err(Error::InvalidInput(format!("switch profile needs a positive width, got {self:?}")));
        }
        Ok(())
    }

    fn unit(&self, t: f64) -> f64 {
        ((t - self.center + self.width) / (2.0 * self.width)).clamp(0.0, 1.0)
    }

    pub fn value(&self, t: f64) -> f64 {
        let s = self.unit(t);
        match self.kind {
            SwitchKind::SmoothstepX => s * s * s * (10.0 - 15.0 * s + 6.0 * s * s),
            SwitchKind::SmoothstepE => s * s * (3.0 - 2.0 * s),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let s = self.unit(t);
        let scale = 1.0 / (2.0 * self.width);
        match self.kind {
            SwitchKind::SmoothstepX => 30.0 * s * s * (1.0 - s) * (1.0 - s) * scale,
            SwitchKind::SmoothstepE => 6.0 * s * (1.0 - s) * scale,
        }
    }
}

/// A state entering a current correlation.
#[derive(Debug, Clone, Copy)]
pub enum FieldRef<'a> {
    /// The free channel `e^{i xi x} phi` at the given energy.
    Free { channel: &'a Channel, energy: f64 },
    Wave(&'a WaveField),
}

impl FieldRef<'_> {
    fn energy(&self) -> f64 {
        match self {
            FieldRef::Free { energy, .. } => *energy,
            FieldRef::Wave(w) => w.energy,
        }
    }

    /// Coefficient vector at `x` in a layout of `levels` levels.
    fn free_vector(channel: &Channel, x: f64, levels: usize) -> Result<Vec<C64>> {
        if channel.level > levels {
            return Err(Error::GridMismatch(format!(
                "free channel at level {} outside wave field levels 0..={levels}",
                channel.level
            )));
        }
        let mut v = vec![C64::new(0.0, 0.0); 2 * levels + 1];
        let phase = (C64::new(0.0, 1.0) * channel.xi * x).exp();
        v[v_index(channel.level)] = phase * channel.spinor[1];
        if channel.level > 0 {
            v[u_index(channel.level)] = phase * channel.spinor[0];
        }
        Ok(v)
    }
}

/// `<b, s3 a>` on the interleaved layout (u slots odd, v slots even).
fn flux_pairing(a: &[C64], b: &[C64]) -> C64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(r, (x, y))| if r % 2 == 1 { y.conj() * x } else { -(y.conj() * x) })
        .sum()
}

fn support(p: &SwitchProfile, x0: f64) -> (f64, f64) {
    let (lo, hi) = p.window();
    (lo + x0, hi + x0)
}

/// `J_ab(x0) = int P'(x - x0) <psi_b, s3 psi_a>(x) dx`.
pub fn current_correlation(a: FieldRef<'_>, b: FieldRef<'_>, x0: f64, p: &SwitchProfile) -> Result<C64> {
    p.validate()?;
    if p.kind != SwitchKind::SmoothstepX {
        return Err(Error::InvalidInput("current correlation needs a spatial switch profile".into()));
    }
    if (a.energy() - b.energy()).abs() > 1e-12 * (1.0 + a.energy().abs()) {
        return Err(Error::InvalidInput(format!(
            "states at different energies {} and {}",
            a.energy(),
            b.energy()
        )));
    }
    let (lo, hi) = support(p, x0);
    let dp = |x: f64| p.derivative(x - x0);
    match (a, b) {
        (FieldRef::Free { channel: ca, .. }, FieldRef::Free { channel: cb, .. }) => {
            if ca.level != cb.level {
                return Ok(C64::new(0.0, 0.0));
            }
            let spin = cb.spinor[0].conj() * ca.spinor[0] - cb.spinor[1].conj() * ca.spinor[1];
            let dk = ca.xi - cb.xi.conj();
            let panels = 16;
            let step = (hi - lo) / panels as f64;
            let mut total = C64::new(0.0, 0.0);
            for k in 0..panels {
                let (xs, ws) = gauss_legendre(16, lo + step * k as f64, lo + step * (k + 1) as f64);
                for (x, w) in xs.iter().zip(ws) {
                    total += (C64::new(0.0, 1.0) * dk * *x).exp() * (w * dp(*x));
                }
            }
            Ok(total * spin)
        }
        _ => {
            let wave = match (a, b) {
                (FieldRef::Wave(w), _) | (_, FieldRef::Wave(w)) => w,
                _ => unreachable!(),
            };
            let grid = &wave.x_grid;
            let (g_lo, g_hi) = (grid[0], grid[grid.len() - 1]);
            if lo < g_lo || hi > g_hi {
                return Err(Error::SupportOutsideGrid {
                    lo,
                    hi,
                    grid_lo: g_lo,
                    grid_hi: g_hi,
                });
            }
            if let (FieldRef::Wave(wa), FieldRef::Wave(wb)) = (a, b) {
                if wa.x_grid != wb.x_grid || wa.levels != wb.levels {
                    return Err(Error::GridMismatch("wave fields on different grids or truncations".into()));
                }
            }
            let levels = wave.levels;
            let at = |f: &FieldRef<'_>, j: usize| -> Result<Vec<C64>> {
                match f {
                    FieldRef::Wave(w) => Ok(w.node(j)),
                    FieldRef::Free { channel, .. } => FieldRef::free_vector(channel, grid[j], levels),
                }
            };
            let first = grid.partition_point(|&x| x <= lo).saturating_sub(1);
            let last = grid.partition_point(|&x| x < hi).min(grid.len() - 1);
            let mut g = Vec::with_capacity(last - first + 1);
            for j in first..=last {
                g.push(flux_pairing(&at(&a, j)?, &at(&b, j)?));
            }
            let mut total = C64::new(0.0, 0.0);
            for (k, j) in (first..last).enumerate() {
                let (x0c, x1c) = (grid[j], grid[j + 1]);
                let (s, e) = (x0c.max(lo), x1c.min(hi));
                if e <= s {
                    continue;
                }
                let (xs, ws) = gauss_legendre(4, s, e);
                for (x, w) in xs.iter().zip(ws) {
                    let t = (x - x0c) / (x1c - x0c);
                    let gi = g[k] * (1.0 - t) + g[k + 1] * t;
                    total += gi * (w * dp(*x));
                }
            }
            Ok(total)
        }
    }
}

/// Spread `max - min` (as the largest pairwise distance) of `J_mm(x0)`.
pub fn conservation_scan(w: &WaveField, p: &SwitchProfile, positions: &[f64]) -> Result<f64> {
    let values: Vec<C64> = positions
        .iter()
        .map(|&x0| current_correlation(FieldRef::Wave(w), FieldRef::Wave(w), x0, p))
        .collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            worst = worst.max((values[i] - values[j]).norm());
        }
    }
    Ok(worst)
}

/// `M x M` matrix of free-channel current correlations, entry `(m, n)`
/// pairing `psi_n` against `psi_m`.
pub fn unperturbed_current_matrix(set: &ChannelSet, p: &SwitchProfile) -> Result<DMatrix<C64>> {
    let m = set.m();
    let mut out = DMatrix::<C64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            out[(i, j)] = current_correlation(
                FieldRef::Free {
                    channel: &set.propagating[i],
                    energy: set.energy,
                },
                FieldRef::Free {
                    channel: &set.propagating[j],
                    energy: set.energy,
                },
                0.0,
                p,
            )?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeReport {
    pub energy: f64,
    pub n_plus: usize,
    pub n_minus: usize,
    pub unitarity_defect: f64,
    pub trace_difference: f64,
    pub weight: f64,
    /// Re-placed by half a node spacing after a singular solve.
    pub shifted: bool,
    pub near_critical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConductivityReport {
    pub window: (f64, f64),
    pub nodes: Vec<NodeReport>,
    /// `2 pi sigma_I`.
    pub integrated: f64,
    pub flagged: bool,
}

const NEAR_CRITICAL: f64 = 0.1;

/// `2 pi sigma_I = int phi'(E) (tr T+^*T+ - tr T-^*T-) dE` by composite
/// Simpson on `n_nodes` energies.
pub fn conductivity(
    basis: &TransverseBasis,
    potential: &Potential,
    window: &SwitchProfile,
    n_nodes: usize,
    params: &SolverParams,
) -> Result<ConductivityReport> {
    window.validate()?;
    if window.kind != SwitchKind::SmoothstepE {
        return Err(Error::InvalidInput("conductivity needs an energy switch profile".into()));
    }
    if n_nodes < 3 || n_nodes.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!("energy node count must be odd and >= 3, got {n_nodes}")));
    }
    let (lo, hi) = window.window();
    let zd = critical_set(basis, lo.abs().max(hi.abs()) + 1.0);
    if let Some(&z) = zd.iter().find(|&&z| z >= lo - params.guard && z <= hi + params.guard) {
        return Err(Error::WindowHitsCritical { lo, hi, critical: z });
    }
    let h = (hi - lo) / (n_nodes - 1) as f64;
    let weights = simpson_weights(n_nodes, h);
    let nodes: Vec<NodeReport> = (0..n_nodes)
        .into_par_iter()
        .map(|i| {
            let e = lo + h * i as f64;
            let (s, energy, shifted) = match scatter(basis, potential, e, params, "mode-matching") {
                Ok(s) => (s, e, false),
                Err(Error::SingularSystem { .. }) => {
                    let alt = if i + 1 < n_nodes { e + 0.5 * h } else { e - 0.5 * h };
                    log::warn!("singular solve at E = {e}; re-placed at {alt}");
                    (scatter(basis, potential, alt, params, "mode-matching")?, alt, true)
                }
                Err(err) => return Err(err),
            };
            let dist = zd.iter().map(|z| (energy - z).abs()).fold(f64::INFINITY, f64::min);
            Ok(NodeReport {
                energy,
                n_plus: s.n_plus,
                n_minus: s.n_minus,
                unitarity_defect: s.unitarity_defect,
                trace_difference: s.trace_difference(),
                weight: weights[i] * window.derivative(e),
                shifted,
                near_critical: dist < NEAR_CRITICAL,
            })
        })
        .collect::<Result<_>>()?;
    let integrated = nodes.iter().map(|n| n.weight * n.trace_difference).sum();
    let flagged = nodes.iter().any(|n| n.shifted || n.near_critical);
    Ok(ConductivityReport {
        window: (lo, hi),
        nodes,
        integrated,
        flagged,
    })
}

/// A test function `f(x, y) = (sum_n a_n(x) mu_n(y), sum_n b_n(x) nu_n(y))`.
pub trait TestFunction: Sync {
    fn levels(&self) -> usize;
    /// Interval outside which `f` is negligible.
    fn x_extent(&self) -> (f64, f64);
    /// Interval outside which the x-Fourier transform is negligible.
    fn xi_extent(&self) -> (f64, f64);
    /// `[a_n(x), b_n(x)]` for `n = 0..=levels`; `a_0` is ignored.
    fn coeffs(&self, x: f64) -> Vec<[C64; 2]>;
}

/// `e^{i xi0 x} exp(-(x - c)^2 / 2 L^2)` times fixed spinor coefficients on
/// a few levels.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPacket {
    pub center: f64,
    pub width: f64,
    pub xi0: f64,
    pub components: Vec<(usize, [C64; 2])>,
}

impl GaussianPacket {
    /// A free channel windowed by a Gaussian of width `width`.
    pub fn windowed_mode(channel: &Channel, width: f64) -> Self {
        GaussianPacket {
            center: 0.0,
            width,
            xi0: channel.xi.re,
            components: vec![(channel.level, channel.spinor)],
        }
    }
}

impl TestFunction for GaussianPacket {
    fn levels(&self) -> usize {
        self.components.iter().map(|c| c.0).max().unwrap_or(0)
    }

    fn x_extent(&self) -> (f64, f64) {
        (self.center - 10.0 * self.width, self.center + 10.0 * self.width)
    }

    fn xi_extent(&self) -> (f64, f64) {
        (self.xi0 - 10.0 / self.width, self.xi0 + 10.0 / self.width)
    }

    fn coeffs(&self, x: f64) -> Vec<[C64; 2]> {
        let t = (x - self.center) / self.width;
        let env = C64::new(0.0, self.xi0 * x).exp() * (-0.5 * t * t).exp();
        let mut out = vec![[C64::new(0.0, 0.0); 2]; self.levels() + 1];
        for (n, s) in &self.components {
            out[*n][0] += s[0] * env;
            out[*n][1] += s[1] * env;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParsevalReport {
    pub norm_sq: f64,
    pub transform_sq: f64,
    pub defect: f64,
    pub coarse_defect: f64,
    pub xi_nodes: usize,
}

pub const PARSEVAL_FLOOR: f64 = 1e-12;

/// Unit eigenvectors of `[[xi, r], [r, -xi]]` for `E = +-sqrt(xi^2 + r^2)`.
fn branch_vectors(xi: f64, r: f64) -> [[f64; 2]; 2] {
    let e = (xi * xi + r * r).sqrt();
    let pick = |en: f64| {
        let a = [en + xi, r];
        let b = [r, en - xi];
        let na = (a[0] * a[0] + a[1] * a[1]).sqrt();
        let nb = (b[0] * b[0] + b[1] * b[1]).sqrt();
        if na >= nb {
            [a[0] / na, a[1] / na]
        } else {
            [b[0] / nb, b[1] / nb]
        }
    };
    [pick(e), pick(-e)]
}

fn parseval_defect(basis: &TransverseBasis, f: &dyn TestFunction, xi_nodes: usize) -> Result<(f64, f64)> {
    let levels = f.levels();
    if levels > basis.n_max {
        return Err(Error::BasisTooSmall {
            needed: levels,
            n_max: basis.n_max,
        });
    }
    let (xl, xh) = f.x_extent();
    let panels = 64;
    let step = (xh - xl) / panels as f64;
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for k in 0..panels {
        let (x, w) = gauss_legendre(16, xl + step * k as f64, xl + step * (k + 1) as f64);
        xs.extend(x);
        ws.extend(w);
    }
    let samples: Vec<Vec<[C64; 2]>> = xs.iter().map(|&x| f.coeffs(x)).collect();
    let mut norm_sq = 0.0;
    for (s, w) in samples.iter().zip(&ws) {
        for (n, c) in s.iter().enumerate() {
            norm_sq += w * (if n > 0 { c[0].norm_sqr() } else { 0.0 } + c[1].norm_sqr());
        }
    }
    let (kl, kh) = f.xi_extent();
    let dk = (kh - kl) / (xi_nodes - 1) as f64;
    let inv = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let density: Vec<f64> = (0..xi_nodes)
        .into_par_iter()
        .map(|k| {
            let xi = kl + dk * k as f64;
            let mut hat = vec![[C64::new(0.0, 0.0); 2]; levels + 1];
            for ((x, w), s) in xs.iter().zip(&ws).zip(&samples) {
                let ph = C64::new(0.0, -xi * x).exp() * (w * inv);
                for (n, c) in s.iter().enumerate() {
                    hat[n][0] += ph * c[0];
                    hat[n][1] += ph * c[1];
                }
            }
            let mut total = hat[0][1].norm_sqr();
            for (n, h) in hat.iter().enumerate().skip(1) {
                for v in branch_vectors(xi, basis.rho[n].sqrt()) {
                    total += (h[0] * v[0] + h[1] * v[1]).norm_sqr();
                }
            }
            total
        })
        .collect();
    let trap: f64 = density.iter().enumerate().map(|(k, d)| if k == 0 || k + 1 == xi_nodes { 0.5 * d } else { *d }).sum::<f64>() * dk;
    Ok((norm_sq, trap))
}

/// Relative defect `|sum_j int |f^(j, xi)|^2 - ||f||^2| / ||f||^2` on
/// `xi_nodes` and `xi_nodes / 2` nodes. Fails when refinement does not
/// reduce the defect above the round-off floor.
pub fn parseval_check(basis: &TransverseBasis, f: &dyn TestFunction, xi_nodes: usize) -> Result<ParsevalReport> {
    if xi_nodes < 4 {
        return Err(Error::InvalidInput(format!("need at least 4 xi-nodes, got {xi_nodes}")));
    }
    let (norm_sq, fine) = parseval_defect(basis, f, xi_nodes)?;
    if norm_sq == 0.0 {
        return Ok(ParsevalReport {
            norm_sq,
            transform_sq: fine,
            defect: 0.0,
            coarse_defect: 0.0,
            xi_nodes,
        });
    }
    let (_, coarse) = parseval_defect(basis, f, xi_nodes / 2)?;
    let defect = (fine - norm_sq).abs() / norm_sq;
    let coarse_defect = (coarse - norm_sq).abs() / norm_sq;
    if defect > PARSEVAL_FLOOR && defect >= coarse_defect {
        return Err(Error::TruncationDominates {
            coarse: coarse_defect,
            fine: defect,
        });
    }
    Ok(ParsevalReport {
        norm_sq,
        transform_sq: fine,
        defect,
        coarse_defect,
        xi_nodes,
    })
}
