//! Microwave sensing toolkit for monitoring elemental-sulfur deposition on
//! pipeline-mounted microstrip patch antennas.
//!
//! Forward models predict how the S11 resonance of a sensing patch shifts as a
//! sulfur superstrate thickens:
//!
//! - [`stackup`] — analytic transmission-line model plus a quasi-static
//!   Laplace capacitance solver for the covered effective permittivity
//! - [`fdtd`] — desk-scale 3-D full-wave Yee solver with CPML boundaries and a
//!   lumped resistive port
//!
//! The inverse path turns measured traces back into thickness:
//!
//! - [`sparams`] — S11 traces, Touchstone I/O, dip extraction, phase unwrapping
//! - [`inversion`] — monotone calibration curves and thickness estimation
//! - [`monitor`] — streaming ingestion, deposition time series, rate
//!   estimation and threshold alarms
//!
//! [`scene`] holds the shared JSON scene/configuration schema used by both
//! forward models and the command-line tools.

pub mod fdtd;
pub mod inversion;
pub mod monitor;
pub mod scene;
pub mod sparams;
pub mod stackup;

/// Speed of light in vacuum, m/s.
pub const C0: f64 = 299_792_458.0;
/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.854_187_812_8e-12;
/// Vacuum permeability, H/m.
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Speed of light expressed in mm·GHz (handy because geometry is in mm and
/// frequency in GHz).
pub const C0_MM_GHZ: f64 = 299.792_458;
