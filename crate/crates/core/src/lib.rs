//! Exact minimal-gap statistics for fractional parts `{α·a(n) mod 1}`.
//!
//! The crate is organised bottom-up:
//!
//! * [`sequences`] generates and validates the integer sequences `a(n)`.
//! * [`circle`] holds exact dyadic arithmetic on `ℝ/ℤ`: angles, orbits,
//!   circle distances and gap spectra.
//! * [`energy`] computes difference histograms and additive energy.
//! * [`window`] provides the smoothing windows, their periodizations and
//!   Fourier transforms.
//! * [`dstat`] evaluates the smoothed pair-counting statistic `D(N,M)(α)`
//!   together with its mean, variance and GCD-sum machinery.
//! * [`experiments`] turns all of the above into seeded Monte-Carlo scans
//!   with CSV/JSON output.

pub mod circle;
pub mod dstat;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod sequences;
pub mod window;

pub use error::{Error, Result};
