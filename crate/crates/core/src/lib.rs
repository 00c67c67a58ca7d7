//! Exact-arithmetic toolkit for rank-one cutting-and-stacking constructions
//! with infinite invariant measure.
//!
//! The crate builds towers over the half-line from cut/spacer parameters,
//! applies powers of the induced transformation to cell sets with certified
//! resolved/unresolved accounting, verifies single-column self-intersection
//! (Sidon-type) behaviour of spacer schedules, computes truncated versions of
//! two transformation metrics, derives induced return-time spectra, and
//! constructs close approximations of a given construction with prescribed
//! spacer growth.
//!
//! Everything is computed in arbitrary-precision integer/rational arithmetic;
//! no floating point is used anywhere.

// Errors carry exact arbitrary-precision context values by design.
#![allow(clippy::result_large_err)]

pub mod arith;
pub mod error;

pub mod approximation;
pub mod cells;
pub mod construction;
pub mod intervals;
pub mod kakutani;
pub mod metrics;
pub mod sidon;

pub use approximation::{approximate_report, sidon_extend, ApproximationReport, WindowBound};
pub use arith::{Int, Rat};
pub use cells::{decay_sweep, image_measure, image_set, Cell, CellSet, MeasureEstimate};
pub use construction::{Construction, StageParams, TowerCoord};
pub use error::{Error, Result};
pub use intervals::IntervalSet;
pub use kakutani::{
    return_spectrum, skyscraper_check, ReturnSpectrum, SkyscraperReport, SpectrumEntry,
};
pub use metrics::{
    dw_power, r_truncated, r_truncated_with_powers, reference_set, rho_truncated, DwEstimate,
    MetricReport, ReferenceFamily, RhoEstimate,
};
