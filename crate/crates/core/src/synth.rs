//! Seeded synthetic inputs: test functions and random rectangle families.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::{GridFunction, Lattice, Rect};

/// Axis-centred cube of the given side.
pub fn centered_cube(lat: &Lattice, side: usize) -> Result<Rect> {
    if side == 0 || lat.extents().iter().any(|&e| side > e) {
        return Err(Error::InvalidRect(format!(
            "cube side {side} does not fit extents {:?}",
            lat.extents()
        )));
    }
    let sides: Vec<(usize, usize)> = lat
        .extents()
        .iter()
        .map(|&e| ((e - side) / 2, (e - side) / 2 + side))
        .collect();
    Rect::from_sides(&sides)
}

/// Recipes for the functions fed to experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    /// Independent uniform samples in `[0, 1)`.
    Uniform,
    /// Indicator of a random set with the given cell density.
    Sparse(f64),
    /// Indicator of a centred cube with the given side.
    Cube(usize),
}

impl TestFunction {
    pub fn generate(self, lat: &Lattice, seed: u64) -> Result<GridFunction> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match self {
            TestFunction::Uniform => GridFunction::from_fn(lat.clone(), |_| rng.random::<f64>()),
            TestFunction::Sparse(density) => {
                if !(density > 0.0 && density <= 1.0) {
                    return Err(Error::InvalidExponent(format!(
                        "sparse density must lie in (0, 1], got {density}"
                    )));
                }
                GridFunction::from_fn(lat.clone(), |_| {
                    if rng.random_bool(density) {
                        1.0
                    } else {
                        0.0
                    }
                })
            }
            TestFunction::Cube(side) => GridFunction::indicator(lat.clone(), &centered_cube(lat, side)?),
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Uniform => f.write_str("uniform"),
            TestFunction::Sparse(d) => write!(f, "sparse:{d}"),
            TestFunction::Cube(s) => write!(f, "cube:{s}"),
        }
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidExponent(format!("unknown test function '{s}'"));
        match s.split_once(':') {
            None if s == "uniform" => Ok(TestFunction::Uniform),
            Some(("sparse", d)) => d.parse().map(TestFunction::Sparse).map_err(|_| bad()),
            Some(("cube", side)) => side.parse().map(TestFunction::Cube).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

/// Shortest and longest side of a random box, as fractions of the extent.
pub const MIN_SIDE_FRACTION: f64 = 1.0 / 16.0;
pub const MAX_SIDE_FRACTION: f64 = 1.0 / 2.0;

/// Random boxes drawn in the unit cube and then snapped outward to the
/// lattice. Each axis gets an independent log-uniform side length, so the
/// family mixes eccentric and square boxes. The draws do not depend on the
/// extents: the same seed on a dilated lattice yields the dilated family up
/// to rounding.
pub fn random_rects(lat: &Lattice, count: usize, rng: &mut impl Rng) -> Vec<Rect> {
    let (ln_min, ln_max) = (MIN_SIDE_FRACTION.ln(), MAX_SIDE_FRACTION.ln());
    (0..count)
        .map(|_| {
            let sides: Vec<(usize, usize)> = lat
                .extents()
                .iter()
                .map(|&e| {
                    let side = rng.random_range(ln_min..=ln_max).exp();
                    let start = rng.random_range(0.0..=1.0 - side);
                    let e_f = e as f64;
                    let lo = ((start * e_f).floor() as usize).min(e - 1);
                    let hi = (((start + side) * e_f).ceil() as usize).clamp(lo + 1, e);
                    (lo, hi)
                })
                .collect();
            Rect::from_sides(&sides).expect("snapped sides are nonempty")
        })
        .collect()
}
