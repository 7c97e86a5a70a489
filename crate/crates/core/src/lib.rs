//! Maximal operators over axis-parallel lattice rectangles.
//!
//! - [`lattice`]: grids, boxes, norms and summed-area tables.
//! - [`shear`]: triangular shifts of the integration variable, including the
//!   Heisenberg twist.
//! - [`maximal`]: strong, fractional and sheared maximal fields, superlevel
//!   sets and witness boxes.
//! - [`covering`]: the greedy half-overlap rectangle selection and its exact
//!   verification.
//! - [`experiments`] and [`verify`]: the end-to-end runs behind the `maxrect`
//!   command line tool.

pub mod covering;
pub mod error;
pub mod experiments;
pub mod format;
pub mod lattice;
pub mod maximal;
pub mod shear;
pub mod synth;
pub mod verify;

pub use covering::{select, CoveringResult, ScanOrder, TieRule};
pub use error::{Error, Result};
pub use lattice::{enumerate_rects, GridFunction, Lattice, Rect, RectFamily, SummedTable};
pub use maximal::{frac_max_field, strong_max_field, FracExponents, MaxParams, MaximalField};
pub use shear::{Boundary, ShearMap};
