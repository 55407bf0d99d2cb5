//! Edge-channel scattering for two-dimensional Dirac operators with a
//! domain wall.
//!
//! The unperturbed operator, written in the rotated frame, is
//!
//! ```text
//! H0 = [ -i d/dx      a    ]      a  =  d/dy + m(y)
//!      [   a*      i d/dx  ]      a* = -d/dy + m(y)
//! ```
//!
//! with `m(y) - y` bounded. A localized Hermitian perturbation `Q(x, y)`
//! scatters the finitely many propagating edge channels at a fixed energy;
//! the resulting flux-normalized scattering matrix is unitary and its
//! transmission asymmetry `tr T+*T+ - tr T-*T-` equals the quantized
//! interface conductivity `2 pi sigma_I = n+ - n-`.
//!
//! Modules follow the computation pipeline:
//!
//! * [`transverse`] - ladder-operator eigenbasis `rho_n`, `nu_n`, `mu_n` in `y`
//! * [`channels`] - propagating and evanescent channels at fixed energy
//! * [`potential`] - the perturbation and its coupling matrices `V(x)`
//! * [`scattering`] - coupled-channel solver, amplitudes and `S(E)`
//! * [`observables`] - current correlations, conductivity, Parseval check

pub mod banded;
pub mod channels;
pub mod error;
pub mod observables;
pub mod potential;
pub mod quadrature;
pub mod registry;
pub mod scattering;
pub mod transverse;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

pub use channels::{channels_at, critical_set, gram_matrix, Channel, ChannelKind, ChannelSet};
pub use observables::{
    conductivity, conservation_scan, current_correlation, parseval_check,
    unperturbed_current_matrix, ConductivityReport, FieldRef, SwitchProfile,
};
pub use potential::{build_potential, coupling_field, verify_decay, CouplingField, Frame, Potential, PotentialSpec};
pub use scattering::{
    born_smatrix, extract_alpha, smatrix, solve_mode, ScatteringMatrix, SolverGrid, SolverParams, WaveField,
};
pub use transverse::{build_basis, ladder_residual, BoundedPart, TransverseBasis, WallKind, WallSpec};
