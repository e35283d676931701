//! Traveling wavefronts of the delayed monostable equation
//! `u_t = u_xx − u + g(u(t − h, x))` with piecewise-linear unimodal `g`.
//!
//! Profiles `φ(ct + x)` solve `φ″ − cφ′ − φ + g(φ(· − ch)) = 0`. The crate
//! covers the birth model, the characteristic spectra that decide the shape of
//! the front, a fixed-point profile solver, shape classification and a direct
//! PDE simulation used as an independent oracle.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod birth;
pub mod error;
pub mod expquad;
pub mod io;
pub mod maps;
pub mod pde;
pub mod profile;
pub mod replication;
pub mod shape;
pub mod spectrum;

pub use birth::PiecewiseLinearBirth;
pub use error::{Result, WaveError};
pub use maps::IntervalMap;
pub use profile::{SolverOptions, WaveProfile};
pub use spectrum::{Quasipolynomial, WaveContext};
