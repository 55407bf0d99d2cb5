//! Fixed-energy channels of the unperturbed operator.
//!
//! At energy `E` every level `n >= 1` contributes the two wavenumbers
//! `xi = +-(E^2 - rho_n)^{1/2}` (with `(-1)^{1/2} = i`), propagating when
//! `E^2 > rho_n` and evanescent otherwise. The zero mode lives on the branch
//! `E_0(xi) = -xi` with spinor `(0, nu_0)` and current `-1`.
//!
//! Spinors are stored as the pair of coefficients on `(mu_n, nu_n)`:
//! `phi = c (sqrt(rho_n), E - xi)` with `c^-2 = rho_n + |E - xi|^2`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::transverse::TransverseBasis;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Propagating,
    Evanescent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Channel {
    pub level: usize,
    /// `epsilon_m`; the zero mode carries `-1`.
    pub branch_sign: i8,
    pub xi: C64,
    /// Group velocity `dE_m/dxi` at `xi`; zero for evanescent channels.
    pub current: f64,
    /// Coefficients on `(mu_n, nu_n)`.
    pub spinor: [C64; 2],
    pub kind: ChannelKind,
    pub rho: f64,
}

impl Channel {
    pub fn is_zero_mode(&self) -> bool {
        self.level == 0
    }

    /// Normalisation constant `c_n` of the spinor (1 for the zero mode).
    pub fn norm_constant(&self, energy: f64) -> f64 {
        if self.level == 0 {
            1.0
        } else {
            1.0 / (self.rho + (C64::new(energy, 0.0) - self.xi).norm_sqr()).sqrt()
        }
    }

    /// Branch `E_m(xi)` this channel sits on, for real `xi`. `energy_sign`
    /// selects the upper or lower branch for `n >= 1`.
    pub fn branch_energy(&self, xi: f64, energy_sign: f64) -> f64 {
        if self.level == 0 {
            -xi
        } else {
            energy_sign * (xi * xi + self.rho).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelSet {
    pub energy: f64,
    /// `J > 0` block first, then `J < 0`; level-ascending within blocks.
    pub propagating: Vec<Channel>,
    /// Ordered by `|Im xi|` ascending, `+i kappa` before `-i kappa`.
    pub evanescent: Vec<Channel>,
    pub n_plus: usize,
    pub n_minus: usize,
}

impl ChannelSet {
    pub fn m(&self) -> usize {
        self.n_plus + self.n_minus
    }

    /// Highest level among the retained channels; the coupled system is
    /// truncated here.
    pub fn max_level(&self) -> usize {
        self.propagating
            .iter()
            .chain(&self.evanescent)
            .map(|c| c.level)
            .max()
            .unwrap_or(0)
    }

    /// Highest propagating level.
    pub fn max_propagating_level(&self) -> usize {
        self.propagating.iter().map(|c| c.level).max().unwrap_or(0)
    }

    pub fn currents(&self) -> Vec<f64> {
        self.propagating.iter().map(|c| c.current).collect()
    }

    /// Propagating channel at `level` with the given current sign.
    pub fn find(&self, level: usize, positive_current: bool) -> Option<usize> {
        self.propagating
            .iter()
            .position(|c| c.level == level && (c.current > 0.0) == positive_current)
    }
}

/// `{ +-sqrt(rho_n) : rho_n <= e_max^2 }`, sorted, with 0 once.
///
/// Only levels held by the basis are reported; the caller must size the
/// basis so that `rho_{n_max} > e_max^2`.
pub fn critical_set(basis: &TransverseBasis, e_max: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    for &rho in basis.rho.iter().skip(1) {
        if rho <= e_max * e_max {
            let r = rho.sqrt();
            out.push(r);
            out.push(-r);
        }
    }
    if basis.rho.last().is_some_and(|&r| r <= e_max * e_max) {
        log::warn!("critical set may be incomplete: rho_n_max <= e_max^2");
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup();
    out
}

fn make_channel(basis: &TransverseBasis, energy: f64, level: usize, sign: i8) -> Channel {
    let e = C64::new(energy, 0.0);
    if level == 0 {
        return Channel {
            level: 0,
            branch_sign: -1,
            xi: -e,
            current: -1.0,
            spinor: [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            kind: ChannelKind::Propagating,
            rho: 0.0,
        };
    }
    let rho = basis.rho[level];
    let disc = energy * energy - rho;
    let root = if disc >= 0.0 {
        C64::new(disc.sqrt(), 0.0)
    } else {
        C64::new(0.0, (-disc).sqrt())
    };
    let xi = root * f64::from(sign);
    let c = 1.0 / (rho + (e - xi).norm_sqr()).sqrt();
    let spinor = [C64::new(c * rho.sqrt(), 0.0), (e - xi) * c];
    let (kind, current) = if disc > 0.0 {
        (ChannelKind::Propagating, xi.re / energy)
    } else {
        (ChannelKind::Evanescent, 0.0)
    };
    Channel {
        level,
        branch_sign: sign,
        xi,
        current,
        spinor,
        kind,
        rho,
    }
}

/// Enumerates the channels at energy `E`.
pub fn channels_at(basis: &TransverseBasis, energy: f64, n_evanescent: usize, guard: f64) -> Result<ChannelSet> {
    if !energy.is_finite() {
        return Err(Error::InvalidInput(format!("energy must be finite, got {energy}")));
    }
    for z in critical_set(basis, energy.abs() + guard) {
        let distance = (energy - z).abs();
        if distance < guard || energy == 0.0 {
            return Err(Error::TooCloseToCritical {
                energy,
                critical: z,
                distance,
                guard,
            });
        }
    }
    let open = basis.rho.iter().skip(1).take_while(|&&r| r < energy * energy).count();
    let needed = open + n_evanescent.max(1);
    if needed > basis.n_max {
        return Err(Error::BasisTooSmall {
            needed,
            n_max: basis.n_max,
        });
    }

    let mut all = vec![make_channel(basis, energy, 0, -1)];
    for level in 1..=open {
        all.push(make_channel(basis, energy, level, 1));
        all.push(make_channel(basis, energy, level, -1));
    }
    let (mut forward, mut backward): (Vec<Channel>, Vec<Channel>) = all.into_iter().partition(|c| c.current > 0.0);
    forward.sort_by_key(|c| c.level);
    backward.sort_by_key(|c| c.level);
    let n_plus = forward.len();
    let n_minus = backward.len();
    forward.extend(backward);

    let mut evanescent = Vec::with_capacity(2 * n_evanescent);
    for level in open + 1..=open + n_evanescent {
        evanescent.push(make_channel(basis, energy, level, 1));
        evanescent.push(make_channel(basis, energy, level, -1));
    }

    let set = ChannelSet {
        energy,
        propagating: forward,
        evanescent,
        n_plus,
        n_minus,
    };
    Ok(set)
}

/// `||(H0(xi_m) - E) phi_m||` under the basis quadrature.
pub fn eigen_residual(basis: &TransverseBasis, energy: f64, channel: &Channel) -> f64 {
    let n = channel.level;
    let [a, b] = channel.spinor;
    let xi = channel.xi;
    let e = C64::new(energy, 0.0);
    let a_nu = basis.a_nu(n);
    let (mu, a_star_mu) = if n >= 1 {
        (basis.mu(n).to_vec(), basis.a_star_mu(n))
    } else {
        (vec![0.0; basis.quad_points()], vec![0.0; basis.quad_points()])
    };
    let nu = basis.nu(n);
    let mut total = 0.0;
    for k in 0..basis.quad_points() {
        let first = (xi - e) * a * mu[k] + b * a_nu[k];
        let second = a * a_star_mu[k] - (xi + e) * b * nu[k];
        total += basis.quad_weights[k] * (first.norm_sqr() + second.norm_sqr());
    }
    total.sqrt()
}

/// `<phi_m, phi_q>` over the propagating channels (conjugate-linear in the
/// first slot).
pub fn gram_matrix(basis: &TransverseBasis, set: &ChannelSet) -> DMatrix<C64> {
    let chans = &set.propagating;
    let m = chans.len();
    let mut g = DMatrix::<C64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let (ci, cj) = (&chans[i], &chans[j]);
            let mu_overlap = if ci.level >= 1 && cj.level >= 1 {
                basis.inner(basis.mu(ci.level), basis.mu(cj.level))
            } else {
                0.0
            };
            let nu_overlap = basis.inner(basis.nu(ci.level), basis.nu(cj.level));
            g[(i, j)] = ci.spinor[0].conj() * cj.spinor[0] * mu_overlap + ci.spinor[1].conj() * cj.spinor[1] * nu_overlap;
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transverse::{build_basis, BoundedPart, WallSpec};
    use approx::assert_abs_diff_eq;

    fn linear() -> TransverseBasis {
        build_basis(&WallSpec::linear(), 24, 100).unwrap()
    }

    #[test]
    fn critical_set_of_linear_wall() {
        let b = linear();
        let z = critical_set(&b, 2.3);
        let s2 = 2f64.sqrt();
        let expect = [-2.0, -s2, 0.0, s2, 2.0];
        assert_eq!(z.len(), 5);
        for (a, e) in z.iter().zip(expect) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-15);
        }
        assert_eq!(critical_set(&b, 1.0), vec![0.0]);
    }

    #[test]
    fn critical_set_of_tanh_wall_uses_computed_levels() {
        let b = build_basis(
            &WallSpec::linear_plus(BoundedPart::Tanh {
                amplitude: 1.0,
                scale: 1.0,
            }),
            12,
            0,
        )
        .unwrap();
        let z = critical_set(&b, 2.5);
        for n in 1..b.rho.len() {
            if b.rho[n] <= 6.25 {
                let r = b.rho[n].sqrt();
                assert!(z.iter().any(|v| (v - r).abs() < 1e-15));
                assert!(z.iter().any(|v| (v + r).abs() < 1e-15));
            }
        }
    }

    #[test]
    fn census_at_2_2() {
        let b = linear();
        let set = channels_at(&b, 2.2, 0, 1e-3).unwrap();
        assert_eq!((set.m(), set.n_plus, set.n_minus), (5, 2, 3));
        let xi: Vec<f64> = set.propagating.iter().map(|c| c.xi.re).collect();
        // Order: (+,1), (+,2), zero mode, (-,1), (-,2).
        let expect = [2.84f64.sqrt(), 0.84f64.sqrt(), -2.2, -(2.84f64.sqrt()), -(0.84f64.sqrt())];
        for (a, e) in xi.iter().zip(expect) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(xi[0], 1.68523, epsilon = 1e-5);
        assert_abs_diff_eq!(xi[1], 0.91652, epsilon = 1e-5);
        assert!(set.propagating.iter().all(|c| c.xi.im == 0.0));
    }

    #[test]
    fn census_at_1_2() {
        let set = channels_at(&linear(), 1.2, 4, 1e-3).unwrap();
        assert_eq!((set.m(), set.n_plus, set.n_minus), (1, 0, 1));
        let c = &set.propagating[0];
        assert_eq!(c.xi, C64::new(-1.2, 0.0));
        assert_eq!(c.current, -1.0);
    }

    #[test]
    fn first_evanescent_channel() {
        let set = channels_at(&linear(), 2.2, 1, 1e-3).unwrap();
        assert_eq!(set.evanescent.len(), 2);
        let ev = &set.evanescent[0];
        assert_eq!(ev.level, 3);
        assert_eq!(ev.xi.re, 0.0);
        assert_abs_diff_eq!(ev.xi.im, (6.0f64 - 4.84).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(ev.xi.im, 1.07703, epsilon = 1e-5);
        assert_eq!(set.evanescent[1].xi, -ev.xi);
    }

    #[test]
    fn guard_and_basis_errors() {
        let b = linear();
        assert!(matches!(
            channels_at(&b, 2f64.sqrt() + 1e-4, 2, 1e-3),
            Err(Error::TooCloseToCritical { .. })
        ));
        assert!(matches!(channels_at(&b, 0.0, 2, 1e-3), Err(Error::TooCloseToCritical { .. })));
        let small = build_basis(&WallSpec::linear(), 3, 20).unwrap();
        assert!(matches!(channels_at(&small, 2.2, 4, 1e-3), Err(Error::BasisTooSmall { .. })));
    }

    #[test]
    fn spinors_are_normalised_eigenvectors() {
        let b = linear();
        for &e in &[2.2, -2.2, 1.2, 0.3, 2.9, -1.7] {
            let set = channels_at(&b, e, 6, 1e-3).unwrap();
            for c in set.propagating.iter().chain(&set.evanescent) {
                let norm = c.spinor[0].norm_sqr() + c.spinor[1].norm_sqr();
                assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-14);
                if c.level >= 1 {
                    let c_n = c.norm_constant(e);
                    assert_abs_diff_eq!(c_n.powi(-2), c.rho + (C64::new(e, 0.0) - c.xi).norm_sqr(), epsilon = 1e-12);
                }
                let r = eigen_residual(&b, e, c);
                assert!(r < 1e-8, "E={e} level {} sign {}: residual {r}", c.level, c.branch_sign);
            }
            assert_eq!(set.n_plus as i64 - set.n_minus as i64, -1);
        }
    }

    #[test]
    fn currents_match_finite_differences() {
        let b = linear();
        for &e in &[2.2, -2.2, 2.7] {
            let set = channels_at(&b, e, 0, 1e-3).unwrap();
            for c in &set.propagating {
                let h = 1e-5;
                let x = c.xi.re;
                let s = e.signum();
                let fd = (c.branch_energy(x + h, s) - c.branch_energy(x - h, s)) / (2.0 * h);
                assert!((fd - c.current).abs() <= 1e-6 * c.current.abs(), "E={e}: {fd} vs {}", c.current);
                // Current equals the sigma_3 expectation of the spinor.
                let flux = c.spinor[0].norm_sqr() - c.spinor[1].norm_sqr();
                assert_abs_diff_eq!(flux, c.current, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn channel_count_jumps_by_two_across_thresholds() {
        let b = linear();
        for n in 1..6 {
            let z = (2.0 * n as f64).sqrt();
            let below = channels_at(&b, z - 0.01, 0, 1e-3).unwrap().m();
            let above = channels_at(&b, z + 0.01, 0, 1e-3).unwrap().m();
            assert_eq!(above, below + 2, "threshold {z}");
        }
    }

    #[test]
    fn gram_matrix_structure() {
        let b = linear();
        let set = channels_at(&b, 2.2, 0, 1e-3).unwrap();
        let g = gram_matrix(&b, &set);
        for i in 0..5 {
            assert_abs_diff_eq!(g[(i, i)].re, 1.0, epsilon = 1e-12);
            for j in 0..5 {
                assert!((g[(i, j)] - g[(j, i)].conj()).norm() < 1e-14);
            }
        }
        // Levels 1 and 2 are orthogonal.
        assert!(g[(0, 1)].norm() < 1e-12);
        // Conjugate pair at level 1: independent oracle is the closed form
        // of the two normalised spinors, <phi_+, phi_-> = sqrt(rho)/|E|.
        let i = set.find(1, true).unwrap();
        let j = set.find(1, false).unwrap();
        assert_abs_diff_eq!(g[(i, j)].re, 2f64.sqrt() / 2.2, epsilon = 1e-12);
        assert!(g[(i, j)].im.abs() < 1e-14);
        // Every off-diagonal overlap stays below one.
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    assert!(g[(i, j)].norm() < 1.0);
                }
            }
        }
    }
}
