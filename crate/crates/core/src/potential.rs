//! The localized perturbation `Q(x, y)` and its channel couplings `V(x)`.
//!
//! `Q = q0 I + q1 s1 + q2 s2 + q3 s3` with real components, stored in the
//! rotated frame. Each component is a sum of separable Gaussian bumps,
//! optionally plus a tabulated grid.
//!
//! Coefficient layout used throughout the solver: levels `0..=N` are
//! interleaved as `(v_0, u_1, v_1, ..., u_N, v_N)`, so `v_n` sits at `2n`
//! and `u_n` at `2n - 1`. `u_n` multiplies `mu_n` (upper spinor entry) and
//! `v_n` multiplies `nu_n` (lower entry).

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::transverse::TransverseBasis;
use crate::C64;

pub const DEFAULT_MARGIN: f64 = 5.0;
pub const TAIL_TOLERANCE: f64 = 1e-10;

#[inline]
pub fn v_index(n: usize) -> usize {
    2 * n
}

#[inline]
pub fn u_index(n: usize) -> usize {
    debug_assert!(n >= 1);
    2 * n - 1
}

/// Size of the coefficient vector for levels `0..=levels`.
#[inline]
pub fn coefficient_dim(levels: usize) -> usize {
    2 * levels + 1
}

/// `(level, is_u)` for a coefficient index.
#[inline]
pub fn coefficient_slot(i: usize) -> (usize, bool) {
    if i.is_multiple_of(2) {
        (i / 2, false)
    } else {
        (i / 2 + 1, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Q0,
    Q1,
    Q2,
    Q3,
}

impl Component {
    pub fn index(self) -> usize {
        match self {
            Component::Q0 => 0,
            Component::Q1 => 1,
            Component::Q2 => 2,
            Component::Q3 => 3,
        }
    }
}

/// Frame in which Pauli components are given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Original,
    #[default]
    Rotated,
}

impl Frame {
    /// Pauli components in the rotated frame. The rotation is the Hadamard
    /// conjugation: `s1 -> s3`, `s2 -> -s2`, `s3 -> s1`.
    pub fn to_rotated(self, q: [f64; 4]) -> [f64; 4] {
        match self {
            Frame::Rotated => q,
            Frame::Original => [q[0], q[3], -q[2], q[1]],
        }
    }

    fn map_component(self, c: Component) -> (Component, f64) {
        match (self, c) {
            (Frame::Rotated, c) => (c, 1.0),
            (Frame::Original, Component::Q0) => (Component::Q0, 1.0),
            (Frame::Original, Component::Q1) => (Component::Q3, 1.0),
            (Frame::Original, Component::Q2) => (Component::Q2, -1.0),
            (Frame::Original, Component::Q3) => (Component::Q1, 1.0),
        }
    }
}

/// `amplitude * exp(-(x-x0)^2 / 2sx^2) * exp(-(y-y0)^2 / 2sy^2)`; a missing
/// or infinite `sy` makes the bump independent of `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub component: Component,
    pub amplitude: f64,
    #[serde(default)]
    pub x0: f64,
    #[serde(default)]
    pub y0: f64,
    pub sx: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sy: Option<f64>,
}

impl Bump {
    pub fn y_independent(&self) -> bool {
        self.sy.is_none_or(|s| s.is_infinite())
    }

    pub fn gx(&self, x: f64) -> f64 {
        let t = (x - self.x0) / self.sx;
        (-0.5 * t * t).exp()
    }

    pub fn gy(&self, y: f64) -> f64 {
        match self.sy {
            Some(s) if s.is_finite() => {
                let t = (y - self.y0) / s;
                (-0.5 * t * t).exp()
            }
            _ => 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() || !self.x0.is_finite() || !self.y0.is_finite() {
            return Err(Error::NonFiniteSample(format!("bump {self:?}")));
        }
        if !(self.sx > 0.0 && self.sx.is_finite()) {
            return Err(Error::InvalidInput(format!("bump width sx must be positive and finite, got {}", self.sx)));
        }
        if let Some(s) = self.sy {
            if !(s > 0.0) {
                return Err(Error::InvalidInput(format!("bump width sy must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

/// Samples on a rectangular grid: `values[component][ix][iy]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedSpec {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub values: Vec<Vec<Vec<f64>>>,
}

impl TabulatedSpec {
    fn validate(&self) -> Result<()> {
        let axis_ok = |a: &[f64]| a.len() >= 2 && a.windows(2).all(|w| w[1] > w[0]);
        if self.x.iter().chain(&self.y).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample("table axis".into()));
        }
        if !axis_ok(&self.x) || !axis_ok(&self.y) {
            return Err(Error::NonRectangularGrid("axes need >= 2 strictly increasing points".into()));
        }
        if self.values.len() != 4 {
            return Err(Error::NonRectangularGrid(format!("expected 4 components, got {}", self.values.len())));
        }
        for (c, comp) in self.values.iter().enumerate() {
            if comp.len() != self.x.len() {
                return Err(Error::NonRectangularGrid(format!(
                    "component q{c}: {} rows for {} x-points",
                    comp.len(),
                    self.x.len()
                )));
            }
            for (ix, row) in comp.iter().enumerate() {
                if row.len() != self.y.len() {
                    return Err(Error::NonRectangularGrid(format!(
                        "component q{c}, row {ix}: {} entries for {} y-points",
                        row.len(),
                        self.y.len()
                    )));
                }
                if let Some(iy) = row.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteSample(format!("q{c}[{ix}][{iy}]")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    #[serde(default)]
    pub bumps: Vec<Bump>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TabulatedSpec>,
}

impl PotentialSpec {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn bump(component: Component, amplitude: f64, x0: f64, y0: f64, sx: f64, sy: Option<f64>) -> Bump {
        Bump {
            component,
            amplitude,
            x0,
            y0,
            sx,
            sy,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Table {
    x: Vec<f64>,
    y: Vec<f64>,
    values: [Vec<Vec<f64>>; 4],
}

impl Table {
    fn sample(&self, x: f64, y: f64) -> [f64; 4] {
        let (nx, ny) = (self.x.len(), self.y.len());
        if x < self.x[0] || x > self.x[nx - 1] || y < self.y[0] || y > self.y[ny - 1] {
            return [0.0; 4];
        }
        let locate = |a: &[f64], t: f64| {
            let i = a.partition_point(|&v| v <= t).clamp(1, a.len() - 1) - 1;
            (i, (t - a[i]) / (a[i + 1] - a[i]))
        };
        let (i, s) = locate(&self.x, x);
        let (j, t) = locate(&self.y, y);
        let mut out = [0.0; 4];
        for (c, o) in out.iter_mut().enumerate() {
            let v = &self.values[c];
            *o = (1.0 - s) * (1.0 - t) * v[i][j] + s * (1.0 - t) * v[i + 1][j] + (1.0 - s) * t * v[i][j + 1] + s * t * v[i + 1][j + 1];
        }
        out
    }
}

/// Perturbation in the rotated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    bumps: Vec<Bump>,
    table: Option<Table>,
    /// `X_Q`: bumps lie within `|x0| + 6 sx`, tables within their x-range.
    pub support_radius: f64,
}

impl Potential {
    pub fn zero() -> Self {
        Potential {
            bumps: Vec::new(),
            table: None,
            support_radius: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.bumps.iter().all(|b| b.amplitude == 0.0) && self.table.is_none()
    }

    /// Bumps with rotated-frame components.
    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    pub fn has_table(&self) -> bool {
        self.table.is_some()
    }

    /// Rotated-frame Pauli components at `(x, y)`.
    pub fn components(&self, x: f64, y: f64) -> [f64; 4] {
        let mut q = self.table.as_ref().map_or([0.0; 4], |t| t.sample(x, y));
        for b in &self.bumps {
            q[b.component.index()] += b.amplitude * b.gx(x) * b.gy(y);
        }
        q
    }

    /// Rotated-frame 2x2 matrix `[[q0+q3, q1-iq2], [q1+iq2, q0-q3]]`.
    pub fn matrix(&self, x: f64, y: f64) -> [[C64; 2]; 2] {
        matrix_of(self.components(x, y))
    }

    /// Operator norm `|q0| + |(q1, q2, q3)|` of the 2x2 matrix.
    pub fn pointwise_norm(&self, x: f64, y: f64) -> f64 {
        let q = self.components(x, y);
        q[0].abs() + (q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt()
    }

    /// Deterministic y-samples covering every feature of the potential.
    fn y_samples(&self, count: usize) -> Vec<f64> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut ys = Vec::new();
        for b in &self.bumps {
            if let Some(s) = b.sy.filter(|s| s.is_finite()) {
                lo = lo.min(b.y0 - 6.0 * s);
                hi = hi.max(b.y0 + 6.0 * s);
                ys.push(b.y0);
            }
        }
        if let Some(t) = &self.table {
            lo = lo.min(t.y[0]);
            hi = hi.max(t.y[t.y.len() - 1]);
            ys.extend(&t.y);
        }
        if lo.is_finite() {
            let n = count.max(2);
            ys.extend((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64));
        } else {
            ys.push(0.0);
        }
        ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ys.dedup();
        ys
    }

    /// `sup_y |Q(x, .)|` over the sample set.
    pub fn sup_norm_at(&self, x: f64, ys: &[f64]) -> f64 {
        ys.iter().map(|&y| self.pointwise_norm(x, y)).fold(0.0, f64::max)
    }
}

fn matrix_of(q: [f64; 4]) -> [[C64; 2]; 2] {
    [
        [C64::new(q[0] + q[3], 0.0), C64::new(q[1], -q[2])],
        [C64::new(q[1], q[2]), C64::new(q[0] - q[3], 0.0)],
    ]
}

/// Builds the perturbation, rotating components given in the original frame.
pub fn build_potential(spec: &PotentialSpec, frame: Frame) -> Result<Potential> {
    let mut bumps = Vec::with_capacity(spec.bumps.len());
    let mut radius = 0.0f64;
    for b in &spec.bumps {
        b.validate()?;
        let (component, sign) = frame.map_component(b.component);
        radius = radius.max(b.x0.abs() + 6.0 * b.sx);
        bumps.push(Bump {
            component,
            amplitude: sign * b.amplitude,
            ..b.clone()
        });
    }
    let table = match &spec.table {
        None => None,
        Some(t) => {
            t.validate()?;
            radius = radius.max(t.x[0].abs()).max(t.x[t.x.len() - 1].abs());
            let mut values: [Vec<Vec<f64>>; 4] = Default::default();
            for (ix, _) in t.x.iter().enumerate() {
                let rows: Vec<[f64; 4]> = (0..t.y.len())
                    .map(|iy| frame.to_rotated([t.values[0][ix][iy], t.values[1][ix][iy], t.values[2][ix][iy], t.values[3][ix][iy]]))
                    .collect();
                for (c, comp) in values.iter_mut().enumerate() {
                    comp.push(rows.iter().map(|r| r[c]).collect());
                }
            }
            Some(Table {
                x: t.x.clone(),
                y: t.y.clone(),
                values,
            })
        }
    };
    Ok(Potential {
        bumps,
        table,
        support_radius: radius,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayCertificate {
    pub c: f64,
    pub h: f64,
}

fn japanese(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// Observed `C` in `|Q(x, y)| <= C <x>^-h`.
///
/// Samples `<x>^h sup_y |Q|` on a uniform grid of `sample_count` points per
/// radius and refines the best sample by golden-section search. A growth of
/// more than 10% between the inner and outer radius is a decay violation.
pub fn verify_decay(p: &Potential, h: f64, sample_count: usize) -> Result<DecayCertificate> {
    if !(h > 1.0) {
        return Err(Error::InvalidInput(format!("decay exponent must exceed 1, got {h}")));
    }
    if p.is_zero() || p.support_radius == 0.0 {
        return Ok(DecayCertificate { c: 0.0, h });
    }
    let ys = p.y_samples(sample_count.max(16));
    let weighted = |x: f64| japanese(x).powf(h) * p.sup_norm_at(x, &ys);
    let n = sample_count.max(16);
    let sup_within = |r: f64| -> f64 {
        let step = 2.0 * r / (n - 1) as f64;
        let mut best = (0.0f64, 0.0f64);
        for k in 0..n {
            let x = -r + step * k as f64;
            let v = weighted(x);
            if v > best.0 {
                best = (v, x);
            }
        }
        if best.0 == 0.0 {
            return 0.0;
        }
        // Golden-section refinement around the best sample.
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = ((best.1 - step).max(-r), (best.1 + step).min(r));
        for _ in 0..80 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if weighted(c) > weighted(d) {
                b = d;
            } else {
                a = c;
            }
        }
        best.0.max(weighted(0.5 * (a + b)))
    };
    let (inner, outer) = if p.has_table() {
        (0.75 * p.support_radius, p.support_radius)
    } else {
        (2.5 * p.support_radius, 3.0 * p.support_radius)
    };
    let c_inner = sup_within(inner);
    let c_outer = sup_within(outer);
    if c_outer > 1.1 * c_inner {
        return Err(Error::DecayViolation {
            h,
            inner: c_inner,
            outer: c_outer,
        });
    }
    Ok(DecayCertificate { c: c_outer, h })
}

/// Coupling matrices `V(x)` on an x-grid, in the interleaved coefficient
/// layout for levels `0..=levels`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingField {
    pub grid: Vec<f64>,
    pub levels: usize,
    blocks: Vec<DMatrix<C64>>,
    pub hermiticity_defect: f64,
}

impl CouplingField {
    pub fn zero(grid: Vec<f64>, levels: usize) -> Self {
        let d = coefficient_dim(levels);
        let blocks = vec![DMatrix::zeros(d, d); grid.len()];
        CouplingField {
            grid,
            levels,
            blocks,
            hermiticity_defect: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        coefficient_dim(self.levels)
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn block(&self, j: usize) -> &DMatrix<C64> {
        &self.blocks[j]
    }

    pub fn blocks(&self) -> &[DMatrix<C64>] {
        &self.blocks
    }

    /// Frobenius norm of the first and last block.
    pub fn tail_norm(&self) -> f64 {
        match (self.blocks.first(), self.blocks.last()) {
            (Some(a), Some(b)) => a.norm().max(b.norm()),
            _ => 0.0,
        }
    }
}

/// Transverse function of coefficient slot `i` at the quadrature nodes.
fn slot_function(basis: &TransverseBasis, i: usize) -> &[f64] {
    match coefficient_slot(i) {
        (n, true) => basis.mu(n),
        (n, false) => basis.nu(n),
    }
}

/// Sector entry of `Q` coupling a row in sector `row_u` to a column in
/// sector `col_u`, from Pauli components.
#[inline]
fn sector_entry(q: [f64; 4], row_u: bool, col_u: bool) -> C64 {
    match (row_u, col_u) {
        (true, true) => C64::new(q[0] + q[3], 0.0),
        (false, false) => C64::new(q[0] - q[3], 0.0),
        (true, false) => C64::new(q[1], -q[2]),
        (false, true) => C64::new(q[1], q[2]),
    }
}

/// `V(x)` for levels `0..=n_max` of the basis.
pub fn coupling_field(p: &Potential, basis: &TransverseBasis, x_grid: &[f64]) -> Result<CouplingField> {
    coupling_field_levels(p, basis, x_grid, basis.n_max)
}

/// `V(x)` truncated to levels `0..=levels`.
pub fn coupling_field_levels(p: &Potential, basis: &TransverseBasis, x_grid: &[f64], levels: usize) -> Result<CouplingField> {
    if levels > basis.n_max {
        return Err(Error::BasisTooSmall {
            needed: levels,
            n_max: basis.n_max,
        });
    }
    let d = coefficient_dim(levels);
    let q = basis.quad_points();
    let w = &basis.quad_weights;
    let chi: Vec<&[f64]> = (0..d).map(|i| slot_function(basis, i)).collect();
    let slots: Vec<(usize, bool)> = (0..d).map(coefficient_slot).collect();

    // Per-bump y-matrices; V(x) = sum_b gx_b(x) M_b.
    let bump_mats: Vec<(&Bump, DMatrix<C64>)> = p
        .bumps()
        .iter()
        .filter(|b| b.amplitude != 0.0)
        .map(|b| {
            let gy: Vec<f64> = basis.quad_nodes.iter().map(|&y| b.gy(y)).collect();
            let mut unit = [0.0; 4];
            unit[b.component.index()] = b.amplitude;
            let mut m = DMatrix::<C64>::zeros(d, d);
            for i in 0..d {
                for j in i..d {
                    let coef = sector_entry(unit, slots[i].1, slots[j].1);
                    if coef == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let overlap = if b.y_independent() && slots[i].1 == slots[j].1 {
                        if i == j {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        (0..q).map(|k| w[k] * chi[i][k] * gy[k] * chi[j][k]).sum()
                    };
                    m[(i, j)] = coef * overlap;
                    m[(j, i)] = (coef * overlap).conj();
                }
            }
            (b, m)
        })
        .collect();

    let blocks: Vec<DMatrix<C64>> = x_grid
        .par_iter()
        .map(|&x| {
            let mut v = DMatrix::<C64>::zeros(d, d);
            for (b, m) in &bump_mats {
                let g = b.gx(x);
                if g != 0.0 {
                    v += m * C64::new(g, 0.0);
                }
            }
            if let Some(t) = &p.table {
                let samples: Vec<[f64; 4]> = basis.quad_nodes.iter().map(|&y| t.sample(x, y)).collect();
                if samples.iter().any(|s| s.iter().any(|&c| c != 0.0)) {
                    for i in 0..d {
                        for j in i..d {
                            let mut s = C64::new(0.0, 0.0);
                            for k in 0..q {
                                s += sector_entry(samples[k], slots[i].1, slots[j].1) * (w[k] * chi[i][k] * chi[j][k]);
                            }
                            v[(i, j)] += s;
                            if i != j {
                                v[(j, i)] += s.conj();
                            }
                        }
                    }
                }
            }
            v
        })
        .collect();

    let mut defect = 0.0f64;
    for v in &blocks {
        defect = defect.max((v - v.adjoint()).norm());
    }
    if defect > 1e-10 {
        return Err(Error::InsufficientQuadrature {
            defect,
            tolerance: 1e-10,
        });
    }
    let field = CouplingField {
        grid: x_grid.to_vec(),
        levels,
        blocks,
        hermiticity_defect: defect,
    };
    if field.tail_norm() > TAIL_TOLERANCE {
        log::debug!("coupling field tail norm {:.3e} at the grid ends", field.tail_norm());
    }
    Ok(field)
}

/// `int V(x) dx` over `[a, b]` for a Gaussian-bump potential, by
/// Gauss-Legendre panels. Used by diagnostics and tests.
pub fn integrated_coupling(p: &Potential, basis: &TransverseBasis, levels: usize, a: f64, b: f64, panels: usize) -> Result<DMatrix<C64>> {
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    let h = (b - a) / panels as f64;
    for k in 0..panels {
        let (x, w) = gauss_legendre(16, a + h * k as f64, a + h * (k + 1) as f64);
        xs.extend(x);
        ws.extend(w);
    }
    let field = coupling_field_levels(p, basis, &xs, levels)?;
    let d = field.dim();
    let mut total = DMatrix::<C64>::zeros(d, d);
    for (v, w) in field.blocks.iter().zip(ws) {
        total += v * C64::new(w, 0.0);
    }
    Ok(total)
}
