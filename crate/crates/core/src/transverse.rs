//! Transverse ladder-operator spectrum.
//!
//! For a wall `m(y)` the operators `a = d/dy + m` and `a* = -d/dy + m`
//! give `a*a nu_n = rho_n nu_n` (n >= 0) and `a a* mu_n = rho_n mu_n`
//! (n >= 1), with `a nu_n = sqrt(rho_n) mu_n` and `rho_0 = 0`. A
//! [`TransverseBasis`] stores both families sampled on a quadrature grid in
//! `y`, together with their derivatives, so every later `y`-integral is a
//! weighted sum over the same nodes.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{hermite_functions, UnfoldedHermite};
use crate::registry::{Named, Registry};

/// Bounded deviation `b(y) = m(y) - y` of the wall from the linear profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BoundedPart {
    Zero,
    Constant { value: f64 },
    Tanh { amplitude: f64, scale: f64 },
    Gaussian { amplitude: f64, width: f64 },
}

impl BoundedPart {
    fn value(&self, y: f64) -> f64 {
        match *self {
            BoundedPart::Zero => 0.0,
            BoundedPart::Constant { value } => value,
            BoundedPart::Tanh { amplitude, scale } => amplitude * (y / scale).tanh(),
            BoundedPart::Gaussian { amplitude, width } => amplitude * (-0.5 * (y / width).powi(2)).exp(),
        }
    }

    fn derivative(&self, y: f64) -> f64 {
        match *self {
            BoundedPart::Zero | BoundedPart::Constant { .. } => 0.0,
            BoundedPart::Tanh { amplitude, scale } => {
                let c = (y / scale).cosh();
                amplitude / (scale * c * c)
            }
            BoundedPart::Gaussian { amplitude, width } => {
                -amplitude * y / (width * width) * (-0.5 * (y / width).powi(2)).exp()
            }
        }
    }

    fn sup_abs(&self) -> f64 {
        match *self {
            BoundedPart::Zero => 0.0,
            BoundedPart::Constant { value } => value.abs(),
            BoundedPart::Tanh { amplitude, .. } | BoundedPart::Gaussian { amplitude, .. } => amplitude.abs(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            BoundedPart::Zero => true,
            BoundedPart::Constant { value } => value.is_finite(),
            BoundedPart::Tanh { amplitude, scale } => amplitude.is_finite() && scale.is_finite() && scale > 0.0,
            BoundedPart::Gaussian { amplitude, width } => amplitude.is_finite() && width.is_finite() && width > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("bad bounded wall part {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallKind {
    Linear,
    LinearPlusBounded,
}

/// Domain-wall profile `m(y) = y + b(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallSpec {
    pub kind: WallKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounded_part: Option<BoundedPart>,
    /// Beyond `|y| > y_cutoff` the bounded part is frozen at its cutoff value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_cutoff: Option<f64>,
}

impl WallSpec {
    pub fn linear() -> Self {
        Self {
            kind: WallKind::Linear,
            bounded_part: None,
            y_cutoff: None,
        }
    }

    pub fn linear_plus(bounded: BoundedPart) -> Self {
        Self {
            kind: WallKind::LinearPlusBounded,
            bounded_part: Some(bounded),
            y_cutoff: None,
        }
    }

    pub fn with_cutoff(mut self, y_cutoff: f64) -> Self {
        self.y_cutoff = Some(y_cutoff);
        self
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, &self.bounded_part) {
            (WallKind::Linear, None) => Ok(()),
            (WallKind::Linear, Some(_)) => Err(Error::InvalidInput(
                "linear wall must not carry a bounded part".into(),
            )),
            (WallKind::LinearPlusBounded, None) => Err(Error::InvalidInput(
                "linear_plus_bounded wall needs a bounded part".into(),
            )),
            (WallKind::LinearPlusBounded, Some(b)) => {
                b.validate()?;
                match self.y_cutoff {
                    Some(c) if !(c > 0.0) => Err(Error::InvalidInput(format!("y_cutoff must be positive, got {c}"))),
                    _ => Ok(()),
                }
            }
        }
    }

    fn clamp(&self, y: f64) -> (f64, bool) {
        match self.y_cutoff {
            Some(c) if y.abs() > c => (c.copysign(y), true),
            _ => (y, false),
        }
    }

    /// `b(y) = m(y) - y`.
    pub fn deviation(&self, y: f64) -> f64 {
        match &self.bounded_part {
            None => 0.0,
            Some(b) => b.value(self.clamp(y).0),
        }
    }

    pub fn deviation_derivative(&self, y: f64) -> f64 {
        match &self.bounded_part {
            None => 0.0,
            Some(b) => {
                let (yc, frozen) = self.clamp(y);
                if frozen {
                    0.0
                } else {
                    b.derivative(yc)
                }
            }
        }
    }

    pub fn mass(&self, y: f64) -> f64 {
        y + self.deviation(y)
    }

    pub fn mass_derivative(&self, y: f64) -> f64 {
        1.0 + self.deviation_derivative(y)
    }

    /// `sup_y |m(y) - y|`.
    pub fn sup_deviation(&self) -> f64 {
        self.bounded_part.map_or(0.0, |b| b.sup_abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisTolerances {
    pub ortho: f64,
    pub ladder: f64,
}

impl Default for BasisTolerances {
    fn default() -> Self {
        Self {
            ortho: 1e-8,
            ladder: 1e-6,
        }
    }
}

/// Eigenstructure of `a*a` / `a a*` sampled on a `y` quadrature grid.
#[derive(Clone)]
pub struct TransverseBasis {
    pub wall: WallSpec,
    pub method: &'static str,
    /// `rho_0 = 0 < rho_1 < ... < rho_{n_max}`.
    pub rho: Vec<f64>,
    pub n_max: usize,
    pub quad_nodes: Vec<f64>,
    pub quad_weights: Vec<f64>,
    /// `m(y)` at the quadrature nodes.
    pub mass: Vec<f64>,
    nu: Vec<Vec<f64>>,
    dnu: Vec<Vec<f64>>,
    mu: Vec<Vec<f64>>,
    dmu: Vec<Vec<f64>>,
    /// Raw computed `rho_0` before it was pinned to zero.
    pub rho0_raw: f64,
    pub tolerances: BasisTolerances,
}

impl fmt::Debug for TransverseBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransverseBasis")
            .field("method", &self.method)
            .field("wall", &self.wall)
            .field("n_max", &self.n_max)
            .field("rho", &self.rho)
            .field("quad_points", &self.quad_nodes.len())
            .finish()
    }
}

impl TransverseBasis {
    pub fn quad_points(&self) -> usize {
        self.quad_nodes.len()
    }

    /// `nu_n` at the quadrature nodes.
    pub fn nu(&self, n: usize) -> &[f64] {
        &self.nu[n]
    }

    /// `mu_n` at the quadrature nodes (`n >= 1`; `mu_0` is identically zero).
    pub fn mu(&self, n: usize) -> &[f64] {
        &self.mu[n]
    }

    pub fn dnu(&self, n: usize) -> &[f64] {
        &self.dnu[n]
    }

    pub fn dmu(&self, n: usize) -> &[f64] {
        &self.dmu[n]
    }

    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.quad_weights.iter().zip(f.iter().zip(g)).map(|(w, (a, b))| w * a * b).sum()
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// `a nu_n = nu_n' + m nu_n`.
    pub fn a_nu(&self, n: usize) -> Vec<f64> {
        self.dnu[n].iter().zip(&self.nu[n]).zip(&self.mass).map(|((d, v), m)| d + m * v).collect()
    }

    /// `a* mu_n = -mu_n' + m mu_n`.
    pub fn a_star_mu(&self, n: usize) -> Vec<f64> {
        self.dmu[n].iter().zip(&self.mu[n]).zip(&self.mass).map(|((d, v), m)| -d + m * v).collect()
    }

    /// `max_{i,j} |<f_i, f_j> - delta_ij|` over both families.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..=self.n_max {
            for j in i..=self.n_max {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((self.inner(&self.nu[i], &self.nu[j]) - target).abs());
                if i >= 1 {
                    worst = worst.max((self.inner(&self.mu[i], &self.mu[j]) - target).abs());
                }
            }
        }
        worst
    }

    /// Observed constant in `||y f|| + ||f'|| <= C (||a f|| + ||f||)` over
    /// the retained `nu_n`.
    pub fn weighted_control_constant(&self) -> f64 {
        (0..=self.n_max)
            .map(|n| {
                let yf: Vec<f64> = self.quad_nodes.iter().zip(&self.nu[n]).map(|(y, v)| y * v).collect();
                let lhs = self.norm(&yf) + self.norm(&self.dnu[n]);
                let rhs = self.norm(&self.a_nu(n)) + self.norm(&self.nu[n]);
                lhs / rhs
            })
            .fold(0.0, f64::max)
    }
}

/// `max(||a nu_n - sqrt(rho_n) mu_n||, ||a* mu_n - sqrt(rho_n) nu_n||)`.
pub fn ladder_residual(basis: &TransverseBasis, n: usize) -> Result<f64> {
    if n == 0 || n > basis.n_max {
        return Err(Error::IndexOutOfRange {
            index: n,
            max: basis.n_max,
        });
    }
    let s = basis.rho[n].sqrt();
    let r1: Vec<f64> = basis.a_nu(n).iter().zip(&basis.mu[n]).map(|(a, m)| a - s * m).collect();
    let r2: Vec<f64> = basis.a_star_mu(n).iter().zip(&basis.nu[n]).map(|(a, v)| a - s * v).collect();
    Ok(basis.norm(&r1).max(basis.norm(&r2)))
}

/// A transverse eigensolver strategy.
pub trait TransverseSolver: Named + Send + Sync {
    fn supports(&self, wall: &WallSpec) -> bool;

    /// Raw construction; invariants are checked by [`TransverseSolver::build`].
    fn construct(&self, wall: &WallSpec, n_max: usize, quad_points: usize) -> Result<TransverseBasis>;

    fn build(
        &self,
        wall: &WallSpec,
        n_max: usize,
        quad_points: usize,
        tolerances: BasisTolerances,
    ) -> Result<TransverseBasis> {
        wall.validate()?;
        if n_max < 1 {
            return Err(Error::InvalidInput("n_max must be at least 1".into()));
        }
        if !self.supports(wall) {
            return Err(Error::InvalidInput(format!(
                "transverse solver `{}` does not support wall {:?}",
                self.name(),
                wall.kind
            )));
        }
        let mut basis = self.construct(wall, n_max, quad_points)?;
        basis.tolerances = tolerances;
        validate_basis(&basis)?;
        Ok(basis)
    }
}

fn validate_basis(basis: &TransverseBasis) -> Result<()> {
    for w in basis.rho.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::NonConvergedEigensolve {
                residual: (w[1] - w[0]).abs(),
                tolerance: 0.0,
            });
        }
    }
    let defect = basis.orthonormality_defect();
    if !(defect <= basis.tolerances.ortho) {
        return Err(Error::InsufficientQuadrature {
            defect,
            tolerance: basis.tolerances.ortho,
        });
    }
    for n in 1..=basis.n_max {
        let r = ladder_residual(basis, n)?;
        if !(r <= basis.tolerances.ladder) {
            return Err(Error::NonConvergedEigensolve {
                residual: r,
                tolerance: basis.tolerances.ladder,
            });
        }
    }
    Ok(())
}

/// Exact Hermite-function basis of the linear wall `m(y) = y`: `rho_n = 2n`,
/// `nu_n = psi_n`, `mu_n = psi_{n-1}`.
pub struct HermiteSolver;

impl Named for HermiteSolver {
    fn name(&self) -> &'static str {
        "hermite"
    }
}

impl TransverseSolver for HermiteSolver {
    fn supports(&self, wall: &WallSpec) -> bool {
        wall.kind == WallKind::Linear || wall.bounded_part == Some(BoundedPart::Zero)
    }

    fn construct(&self, wall: &WallSpec, n_max: usize, quad_points: usize) -> Result<TransverseBasis> {
        let rule = UnfoldedHermite::new(quad_points.max(n_max + 1));
        let q = rule.len();
        let mut nu = vec![vec![0.0; q]; n_max + 1];
        let mut dnu = vec![vec![0.0; q]; n_max + 1];
        let mut mu = vec![vec![0.0; q]; n_max + 1];
        let mut dmu = vec![vec![0.0; q]; n_max + 1];
        for (k, &y) in rule.nodes.iter().enumerate() {
            let psi = hermite_functions(y, n_max + 1);
            let dpsi = |n: usize| {
                let lower = if n >= 1 { (n as f64 / 2.0).sqrt() * psi[n - 1] } else { 0.0 };
                lower - ((n as f64 + 1.0) / 2.0).sqrt() * psi[n + 1]
            };
            for n in 0..=n_max {
                nu[n][k] = psi[n];
                dnu[n][k] = dpsi(n);
                if n >= 1 {
                    mu[n][k] = psi[n - 1];
                    dmu[n][k] = dpsi(n - 1);
                }
            }
        }
        Ok(TransverseBasis {
            wall: wall.clone(),
            method: self.name(),
            rho: (0..=n_max).map(|n| 2.0 * n as f64).collect(),
            n_max,
            mass: rule.nodes.clone(),
            quad_nodes: rule.nodes,
            quad_weights: rule.weights,
            nu,
            dnu,
            mu,
            dmu,
            rho0_raw: 0.0,
            tolerances: BasisTolerances::default(),
        })
    }
}

/// Galerkin eigensolve of `a*a` in a truncated Hermite-function basis.
///
/// `a*a = (-d^2 + y^2 - 1) + (2 y b + b^2 - b')`; the first part is
/// diagonal (`2k`) and the second is assembled by Gauss-Hermite quadrature.
/// `mu_n` is built as `a nu_n / sqrt(rho_n)` from the analytic derivatives.
pub struct GalerkinSolver {
    /// Hermite modes kept beyond `n_max`.
    pub extra_modes: usize,
}

impl Default for GalerkinSolver {
    fn default() -> Self {
        Self { extra_modes: 160 }
    }
}

impl Named for GalerkinSolver {
    fn name(&self) -> &'static str {
        "galerkin"
    }
}

impl TransverseSolver for GalerkinSolver {
    fn supports(&self, _wall: &WallSpec) -> bool {
        true
    }

    fn construct(&self, wall: &WallSpec, n_max: usize, quad_points: usize) -> Result<TransverseBasis> {
        let modes = n_max + 1 + self.extra_modes;
        let rule = UnfoldedHermite::new(quad_points.max(2 * modes));
        let q = rule.len();

        // psi_0 .. psi_{modes} at every node (one extra for derivatives).
        let table: Vec<Vec<f64>> = rule.nodes.iter().map(|&y| hermite_functions(y, modes)).collect();
        let pert: Vec<f64> = rule
            .nodes
            .iter()
            .map(|&y| {
                let b = wall.deviation(y);
                2.0 * y * b + b * b - wall.deviation_derivative(y)
            })
            .collect();

        let mut op = DMatrix::<f64>::zeros(modes, modes);
        for k in 0..modes {
            for l in k..modes {
                let mut s = 0.0;
                for j in 0..q {
                    s += rule.weights[j] * table[j][k] * pert[j] * table[j][l];
                }
                if k == l {
                    s += 2.0 * k as f64;
                }
                op[(k, l)] = s;
                op[(l, k)] = s;
            }
        }
        let eig = SymmetricEigen::new(op);
        let mut order: Vec<usize> = (0..modes).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());

        let mut rho = Vec::with_capacity(n_max + 1);
        let mut coeffs: Vec<Vec<f64>> = Vec::with_capacity(n_max + 1);
        for (n, &idx) in order.iter().take(n_max + 1).enumerate() {
            let mut c: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
            if c[n] < 0.0 {
                c.iter_mut().for_each(|v| *v = -*v);
            }
            rho.push(eig.eigenvalues[idx]);
            coeffs.push(c);
        }
        let rho0_raw = rho[0];
        pin_zero_mode(&mut rho, 1e-8)?;

        let mass: Vec<f64> = rule.nodes.iter().map(|&y| wall.mass(y)).collect();
        let dmass: Vec<f64> = rule.nodes.iter().map(|&y| wall.mass_derivative(y)).collect();
        let mut nu = vec![vec![0.0; q]; n_max + 1];
        let mut dnu = vec![vec![0.0; q]; n_max + 1];
        let mut mu = vec![vec![0.0; q]; n_max + 1];
        let mut dmu = vec![vec![0.0; q]; n_max + 1];
        for j in 0..q {
            let y = rule.nodes[j];
            let psi = &table[j];
            for n in 0..=n_max {
                let c = &coeffs[n];
                let (mut v, mut dv, mut d2v) = (0.0, 0.0, 0.0);
                for k in 0..modes {
                    let kf = k as f64;
                    let lower = if k >= 1 { (kf / 2.0).sqrt() * psi[k - 1] } else { 0.0 };
                    v += c[k] * psi[k];
                    dv += c[k] * (lower - ((kf + 1.0) / 2.0).sqrt() * psi[k + 1]);
                    d2v += c[k] * (y * y - 2.0 * kf - 1.0) * psi[k];
                }
                nu[n][j] = v;
                dnu[n][j] = dv;
                if n >= 1 {
                    let s = rho[n].sqrt();
                    mu[n][j] = (dv + mass[j] * v) / s;
                    dmu[n][j] = (d2v + dmass[j] * v + mass[j] * dv) / s;
                }
            }
        }
        Ok(TransverseBasis {
            wall: wall.clone(),
            method: self.name(),
            rho,
            n_max,
            quad_nodes: rule.nodes,
            quad_weights: rule.weights,
            mass,
            nu,
            dnu,
            mu,
            dmu,
            rho0_raw,
            tolerances: BasisTolerances::default(),
        })
    }
}

fn pin_zero_mode(rho: &mut [f64], tol: f64) -> Result<()> {
    if rho[0].abs() > tol {
        return Err(Error::NonConvergedEigensolve {
            residual: rho[0].abs(),
            tolerance: tol,
        });
    }
    rho[0] = 0.0;
    Ok(())
}

/// Second-order finite differences for `-d^2 + m^2 - m'` on `[-Y, Y]` with
/// Dirichlet ends; trapezoid quadrature on the grid.
///
/// The matrix is tridiagonal, so the lowest eigenvalues come from Sturm
/// bisection and the eigenvectors from inverse iteration.
pub struct FiniteDifferenceSolver {
    /// Half-width `Y`; chosen from `m(+-Y)^2 >= 4 rho_{n_max}` when `None`.
    pub half_width: Option<f64>,
    /// Interior grid points.
    pub points: usize,
    /// Accepted `|rho_0|` before pinning it to zero.
    pub zero_mode_tol: f64,
}

impl Default for FiniteDifferenceSolver {
    fn default() -> Self {
        Self {
            half_width: None,
            points: 2000,
            zero_mode_tol: 1e-2,
        }
    }
}

impl Named for FiniteDifferenceSolver {
    fn name(&self) -> &'static str {
        "finite-difference"
    }
}

impl FiniteDifferenceSolver {
    pub fn new(half_width: f64, points: usize) -> Self {
        Self {
            half_width: Some(half_width),
            points,
            ..Self::default()
        }
    }

    fn choose_half_width(wall: &WallSpec, n_max: usize) -> f64 {
        // rho_n <= 2n + 2 s (s + 1) for sup|b| = s; need (Y - s)^2 >= 4 rho.
        let s = wall.sup_deviation();
        let rho_bound = 2.0 * n_max as f64 + 2.0 * s * (s + 1.0) + 1.0;
        2.0 * rho_bound.sqrt() + s + 2.0
    }

    /// Lowest `count` eigenvalues of the FD operator only.
    pub fn eigenvalues(&self, wall: &WallSpec, count: usize) -> Vec<f64> {
        let y_half = self.half_width.unwrap_or_else(|| Self::choose_half_width(wall, count));
        let (diag, off, _, _) = fd_operator(wall, y_half, self.points);
        (0..count).map(|k| sturm_bisect(&diag, off, k)).collect()
    }
}

fn fd_operator(wall: &WallSpec, y_half: f64, points: usize) -> (Vec<f64>, f64, Vec<f64>, f64) {
    let h = 2.0 * y_half / (points as f64 + 1.0);
    let nodes: Vec<f64> = (1..=points).map(|j| -y_half + j as f64 * h).collect();
    let diag = nodes
        .iter()
        .map(|&y| {
            let m = wall.mass(y);
            2.0 / (h * h) + m * m - wall.mass_derivative(y)
        })
        .collect();
    (diag, -1.0 / (h * h), nodes, h)
}

/// Number of eigenvalues of the symmetric tridiagonal matrix below `x`.
fn sturm_count(diag: &[f64], off: f64, x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0f64;
    let off2 = off * off;
    for (i, &d) in diag.iter().enumerate() {
        q = if i == 0 { d - x } else { d - x - off2 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (d.abs() + off.abs());
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// `k`-th smallest eigenvalue (0-based) by bisection.
fn sturm_bisect(diag: &[f64], off: f64, k: usize) -> f64 {
    let lo0 = diag.iter().fold(f64::INFINITY, |a, &d| a.min(d)) - 2.0 * off.abs();
    let hi0 = diag.iter().fold(f64::NEG_INFINITY, |a, &d| a.max(d)) + 2.0 * off.abs();
    let (mut lo, mut hi) = (lo0, hi0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * (lo.abs() + hi.abs()).max(1e-300) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Solves the tridiagonal system `(T - shift) x = rhs` with partial pivoting.
fn tridiagonal_solve(diag: &[f64], off: f64, shift: f64, rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    // Row i of U has up to three entries: u0 (diag), u1, u2.
    let mut u0 = vec![0.0; n];
    let mut u1 = vec![0.0; n];
    let mut u2 = vec![0.0; n];
    let mut b = rhs.to_vec();
    let mut cur = [diag[0] - shift, off, 0.0];
    for i in 0..n {
        if i + 1 < n {
            let below = [off, diag[i + 1] - shift, if i + 2 < n { off } else { 0.0 }];
            // Rows: cur = (col i, i+1, i+2), below = (col i, i+1, i+2).
            let (pivot_row, other, swap) = if below[0].abs() > cur[0].abs() {
                (below, cur, true)
            } else {
                (cur, below, false)
            };
            if swap {
                b.swap(i, i + 1);
            }
            let p = if pivot_row[0] == 0.0 { 1e-300 } else { pivot_row[0] };
            let factor = other[0] / p;
            u0[i] = p;
            u1[i] = pivot_row[1];
            u2[i] = pivot_row[2];
            b[i + 1] -= factor * b[i];
            cur = [other[1] - factor * pivot_row[1], other[2] - factor * pivot_row[2], 0.0];
        } else {
            u0[i] = if cur[0] == 0.0 { 1e-300 } else { cur[0] };
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        if i + 1 < n {
            s -= u1[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= u2[i] * x[i + 2];
        }
        x[i] = s / u0[i];
    }
    x
}

fn centered_difference(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| {
            let left = if i == 0 { 0.0 } else { f[i - 1] };
            let right = if i + 1 == n { 0.0 } else { f[i + 1] };
            (right - left) / (2.0 * h)
        })
        .collect()
}

impl TransverseSolver for FiniteDifferenceSolver {
    fn supports(&self, _wall: &WallSpec) -> bool {
        true
    }

    fn construct(&self, wall: &WallSpec, n_max: usize, _quad_points: usize) -> Result<TransverseBasis> {
        let y_half = self.half_width.unwrap_or_else(|| Self::choose_half_width(wall, n_max));
        let (diag, off, nodes, h) = fd_operator(wall, y_half, self.points);
        let q = nodes.len();
        let mut rho = Vec::with_capacity(n_max + 1);
        let mut nu = Vec::with_capacity(n_max + 1);
        for k in 0..=n_max {
            let lambda = sturm_bisect(&diag, off, k);
            let shift = lambda - 1e-10 * (1.0 + lambda.abs());
            let mut v: Vec<f64> = (0..q).map(|i| 1.0 + 0.01 * ((i * 7919) % 13) as f64).collect();
            for _ in 0..3 {
                v = tridiagonal_solve(&diag, off, shift, &v);
                let norm = (h * v.iter().map(|x| x * x).sum::<f64>()).sqrt();
                v.iter_mut().for_each(|x| *x /= norm);
            }
            // Sign: positive on the outermost significant lobe at y > 0.
            let peak = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            if let Some(last) = v.iter().rev().find(|x| x.abs() > 1e-3 * peak) {
                if *last < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
            }
            rho.push(lambda);
            nu.push(v);
        }
        let rho0_raw = rho[0];
        pin_zero_mode(&mut rho, self.zero_mode_tol)?;

        let mass: Vec<f64> = nodes.iter().map(|&y| wall.mass(y)).collect();
        let dnu: Vec<Vec<f64>> = nu.iter().map(|v| centered_difference(v, h)).collect();
        let mut mu = vec![vec![0.0; q]; n_max + 1];
        let mut dmu = vec![vec![0.0; q]; n_max + 1];
        for n in 1..=n_max {
            let s = rho[n].sqrt();
            mu[n] = (0..q).map(|i| (dnu[n][i] + mass[i] * nu[n][i]) / s).collect();
            // Renormalise under the trapezoid rule; the stencil product is
            // only approximately isometric.
            let norm = (h * mu[n].iter().map(|x| x * x).sum::<f64>()).sqrt();
            mu[n].iter_mut().for_each(|x| *x /= norm);
            dmu[n] = centered_difference(&mu[n], h);
        }
        Ok(TransverseBasis {
            wall: wall.clone(),
            method: self.name(),
            rho,
            n_max,
            quad_weights: vec![h; q],
            quad_nodes: nodes,
            mass,
            nu,
            dnu,
            mu,
            dmu,
            rho0_raw,
            tolerances: BasisTolerances::default(),
        })
    }
}

/// Registry pre-loaded with the built-in transverse solvers.
pub fn solver_registry() -> Registry<dyn TransverseSolver> {
    let mut reg: Registry<dyn TransverseSolver> = Registry::new("transverse solver");
    reg.register(Box::new(HermiteSolver))
        .register(Box::new(GalerkinSolver::default()))
        .register(Box::new(FiniteDifferenceSolver::default()));
    reg
}

/// Default strategy name for a wall: exact Hermite functions for the linear
/// wall, Hermite-Galerkin otherwise.
pub fn default_solver_name(wall: &WallSpec) -> &'static str {
    match wall.kind {
        WallKind::Linear => "hermite",
        WallKind::LinearPlusBounded => "galerkin",
    }
}

/// Builds the transverse basis with the default strategy and tolerances.
pub fn build_basis(wall: &WallSpec, n_max: usize, quad_points: usize) -> Result<TransverseBasis> {
    build_basis_with(wall, n_max, quad_points, default_solver_name(wall), BasisTolerances::default())
}

pub fn build_basis_with(
    wall: &WallSpec,
    n_max: usize,
    quad_points: usize,
    solver: &str,
    tolerances: BasisTolerances,
) -> Result<TransverseBasis> {
    let reg = solver_registry();
    reg.get(solver)?.build(wall, n_max, quad_points, tolerances)
}
