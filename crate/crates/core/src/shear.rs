//! Triangular shifts of the integration variable.
//!
//! A [`ShearMap`] on `N` axes carries `N - 1` components. Component `i`
//! (zero-based) shifts axis `i` and may only read the coordinates of `y` and
//! `x` on axes `i + 1..N`. Every such map sends the lattice onto itself
//! bijectively once coordinates are reduced modulo the extents, which is what
//! keeps all `L^p` norms of the sheared function equal to those of `f`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::{GridFunction, Lattice};

/// Real-valued shift evaluator receiving the full `y` and `x` points.
pub type ShiftFn = dyn Fn(&[usize], &[usize]) -> f64 + Send + Sync;

/// How a shifted coordinate that leaves the domain is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Reduce modulo the axis extent.
    #[default]
    Torus,
    /// Treat the function as zero outside the domain. Not measure preserving.
    Zero,
}

impl Boundary {
    pub fn name(self) -> &'static str {
        match self {
            Boundary::Torus => "torus",
            Boundary::Zero => "zero",
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "torus" => Ok(Boundary::Torus),
            "zero" => Ok(Boundary::Zero),
            other => Err(Error::InvalidShear(format!("unknown boundary '{other}'"))),
        }
    }
}

/// One term `c * x_j * y_k`, axes zero-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilinearTerm {
    pub x_axis: usize,
    pub y_axis: usize,
    pub coeff: f64,
}

#[derive(Clone)]
enum Component {
    Zero,
    Bilinear(Vec<BilinearTerm>),
    Custom(Arc<ShiftFn>),
}

impl Component {
    fn eval(&self, y: &[usize], x: &[usize]) -> f64 {
        match self {
            Component::Zero => 0.0,
            Component::Bilinear(terms) => terms
                .iter()
                .map(|t| t.coeff * x[t.x_axis] as f64 * y[t.y_axis] as f64)
                .sum(),
            Component::Custom(f) => f(y, x),
        }
    }
}

impl fmt::Debug for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Component::Zero => f.write_str("Zero"),
            Component::Bilinear(terms) => f.debug_tuple("Bilinear").field(terms).finish(),
            Component::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ShearMap {
    dims: usize,
    components: Vec<Component>,
    label: String,
}

impl ShearMap {
    /// The identity shift on `dims` axes.
    pub fn zero(dims: usize) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidShear("dimension must be at least 1".into()));
        }
        Ok(ShearMap {
            dims,
            components: vec![Component::Zero; dims - 1],
            label: "zero".into(),
        })
    }

    /// The Heisenberg twist on `R x R x R`: axis 0 is the central `t` axis,
    /// `(x_1, x_2) = (u, v)` and `(y_1, y_2) = (xi, eta)`, giving
    /// `rho_0 = round(mu * (x_1 * y_2 - x_2 * y_1))` and no shift on axis 1.
    pub fn heisenberg(mu: f64) -> Result<Self> {
        if !mu.is_finite() || mu == 0.0 {
            return Err(Error::InvalidShear(format!(
                "heisenberg mu must be finite and nonzero, got {mu} (use the zero shear instead)"
            )));
        }
        let mut map = ShearMap::bilinear(
            3,
            vec![vec![
                BilinearTerm {
                    x_axis: 1,
                    y_axis: 2,
                    coeff: mu,
                },
                BilinearTerm {
                    x_axis: 2,
                    y_axis: 1,
                    coeff: -mu,
                },
            ]],
        )?;
        map.label = format!("heisenberg:{mu}");
        Ok(map)
    }

    /// Rounded bilinear forms, one term list per component. Terms of component
    /// `i` must use axes strictly greater than `i`. Missing trailing components
    /// are zero.
    pub fn bilinear(dims: usize, components: Vec<Vec<BilinearTerm>>) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidShear("dimension must be at least 1".into()));
        }
        if components.len() > dims - 1 {
            return Err(Error::InvalidShear(format!(
                "{} components given for {dims} axes (at most {})",
                components.len(),
                dims - 1
            )));
        }
        let mut out = vec![Component::Zero; dims - 1];
        for (i, terms) in components.into_iter().enumerate() {
            for t in &terms {
                if t.x_axis <= i || t.y_axis <= i || t.x_axis >= dims || t.y_axis >= dims {
                    return Err(Error::InvalidShear(format!(
                        "component {i} may only use axes {}..{dims}, got x{} y{}",
                        i + 1,
                        t.x_axis,
                        t.y_axis
                    )));
                }
                if !t.coeff.is_finite() {
                    return Err(Error::InvalidShear("non-finite coefficient".into()));
                }
            }
            if !terms.is_empty() {
                out[i] = Component::Bilinear(terms);
            }
        }
        Ok(ShearMap {
            dims,
            components: out,
            label: "bilinear".into(),
        })
    }

    /// Arbitrary evaluators. Triangularity is not checked here; see
    /// [`verify_triangular`].
    pub fn from_fns(dims: usize, fns: Vec<Arc<ShiftFn>>, label: impl Into<String>) -> Result<Self> {
        if dims == 0 || fns.len() != dims - 1 {
            return Err(Error::InvalidShear(format!(
                "{dims} axes need {} components, got {}",
                dims.saturating_sub(1),
                fns.len()
            )));
        }
        Ok(ShearMap {
            dims,
            components: fns.into_iter().map(Component::Custom).collect(),
            label: label.into(),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// True when every component is identically zero by construction.
    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| matches!(c, Component::Zero))
    }

    /// Integer shift of component `i`, rounded to nearest with ties to even.
    pub fn shift(&self, i: usize, y: &[usize], x: &[usize]) -> i64 {
        self.components[i].eval(y, x).round_ties_even() as i64
    }

    /// Image of `y` under the shift for base point `x`, before any boundary
    /// handling. The last axis is never shifted.
    pub fn shifted(&self, x: &[usize], y: &[usize], out: &mut [i64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = y[i] as i64;
            if i < self.components.len() {
                *o += self.shift(i, y, x);
            }
        }
    }
}

/// Lattice point sampled for the integrand at `(x, y)`, or `None` when the
/// zero boundary drops it.
pub fn sheared_index(
    lat: &Lattice,
    rho: &ShearMap,
    x: &[usize],
    y: &[usize],
    boundary: Boundary,
) -> Option<usize> {
    let mut index = 0;
    for (axis, (&e, &s)) in lat.extents().iter().zip(lat.strides()).enumerate() {
        let mut z = y[axis] as i64;
        if axis + 1 < lat.dims() {
            z += rho.shift(axis, y, x);
        }
        let e = e as i64;
        let z = match boundary {
            Boundary::Torus => z.rem_euclid(e),
            Boundary::Zero if (0..e).contains(&z) => z,
            Boundary::Zero => return None,
        };
        index += z as usize * s;
    }
    Some(index)
}

/// `f(y_1 + rho_1, ..., y_{N-1} + rho_{N-1}, y_N)` for base point `x`.
pub fn sheared_sample(
    f: &GridFunction,
    rho: &ShearMap,
    x: &[usize],
    y: &[usize],
    boundary: Boundary,
) -> f64 {
    sheared_index(f.lattice(), rho, x, y, boundary).map_or(0.0, |i| f.values()[i])
}

/// Materializes `y -> sheared_sample(f, rho, (0, x_tail), y)`. The result
/// does not depend on `x_1`, so the tail determines it.
pub fn shear_pullback(
    f: &GridFunction,
    rho: &ShearMap,
    x_tail: &[usize],
    boundary: Boundary,
) -> Result<GridFunction> {
    let lat = f.lattice();
    check_shear(lat, rho)?;
    if x_tail.len() + 1 != lat.dims() {
        return Err(Error::InvalidShear(format!(
            "tail has {} coordinates, expected {}",
            x_tail.len(),
            lat.dims() - 1
        )));
    }
    let mut x = Vec::with_capacity(lat.dims());
    x.push(0);
    x.extend_from_slice(x_tail);
    if !lat.contains_point(&x) {
        return Err(Error::InvalidShear(format!("tail {x_tail:?} outside lattice")));
    }
    Ok(pullback_values(f, rho, &x, boundary))
}

pub(crate) fn pullback_values(
    f: &GridFunction,
    rho: &ShearMap,
    x: &[usize],
    boundary: Boundary,
) -> GridFunction {
    let lat = f.lattice();
    if rho.is_zero() {
        return f.clone();
    }
    let mut y = vec![0; lat.dims()];
    let values = (0..lat.len())
        .map(|i| {
            lat.write_point(i, &mut y);
            sheared_sample(f, rho, x, &y, boundary)
        })
        .collect();
    GridFunction::new(lat.clone(), values).expect("samples of a valid grid function")
}

pub(crate) fn check_shear(lat: &Lattice, rho: &ShearMap) -> Result<()> {
    if rho.dims() != lat.dims() {
        return Err(Error::InvalidShear(format!(
            "shear has {} axes, lattice has {}",
            rho.dims(),
            lat.dims()
        )));
    }
    Ok(())
}

/// Whether the torus-reduced shift for base point `x` hits every lattice
/// point exactly once.
pub fn is_lattice_bijection(lat: &Lattice, rho: &ShearMap, x: &[usize]) -> bool {
    let mut seen = vec![false; lat.len()];
    let mut y = vec![0; lat.dims()];
    for i in 0..lat.len() {
        lat.write_point(i, &mut y);
        let j = sheared_index(lat, rho, x, &y, Boundary::Torus).expect("torus never drops");
        if std::mem::replace(&mut seen[j], true) {
            return false;
        }
    }
    true
}

/// A probe pair that changed component `component` by touching only
/// coordinates it must ignore.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriangularViolation {
    pub component: usize,
    pub y: Vec<usize>,
    pub x: Vec<usize>,
    pub y_perturbed: Vec<usize>,
    pub x_perturbed: Vec<usize>,
    pub shift: i64,
    pub shift_perturbed: i64,
}

impl fmt::Display for TriangularViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "component {} reads forbidden coordinates: shift {} at y={:?} x={:?} but {} at y={:?} x={:?}",
            self.component,
            self.shift,
            self.y,
            self.x,
            self.shift_perturbed,
            self.y_perturbed,
            self.x_perturbed
        )
    }
}

/// Random probing of the triangular dependence structure.
pub fn verify_triangular(
    rho: &ShearMap,
    lat: &Lattice,
    trials: usize,
    seed: u64,
) -> std::result::Result<(), TriangularViolation> {
    assert!(trials >= 1, "at least one trial");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = lat.dims();
    let random_point = |rng: &mut ChaCha8Rng| -> Vec<usize> {
        lat.extents().iter().map(|&e| rng.random_range(0..e)).collect()
    };
    for _ in 0..trials {
        let y = random_point(&mut rng);
        let x = random_point(&mut rng);
        for component in 0..n.saturating_sub(1) {
            let mut y2 = y.clone();
            let mut x2 = x.clone();
            for axis in 0..=component {
                y2[axis] = rng.random_range(0..lat.extent(axis));
                x2[axis] = rng.random_range(0..lat.extent(axis));
            }
            let before = rho.shift(component, &y, &x);
            let after = rho.shift(component, &y2, &x2);
            if before != after {
                return Err(TriangularViolation {
                    component,
                    y,
                    x,
                    y_perturbed: y2,
                    x_perturbed: x2,
                    shift: before,
                    shift_perturbed: after,
                });
            }
        }
    }
    Ok(())
}

/// Resolves `zero`, `heisenberg:<mu>` for a lattice with `dims` axes.
/// `file:<path>` specs are handled by the caller through
/// [`crate::format::parse_shear`].
pub fn builtin_shear(spec: &str, dims: usize) -> Result<ShearMap> {
    if spec == "zero" {
        return ShearMap::zero(dims);
    }
    if let Some(mu) = spec.strip_prefix("heisenberg:") {
        let mu: f64 = mu
            .parse()
            .map_err(|_| Error::InvalidShear(format!("bad heisenberg parameter '{mu}'")))?;
        if dims != 3 {
            return Err(Error::InvalidShear(format!(
                "heisenberg shear needs 3 axes, lattice has {dims}"
            )));
        }
        return ShearMap::heisenberg(mu);
    }
    Err(Error::InvalidShear(format!("unknown shear spec '{spec}'")))
}

/// Random bilinear shear with coefficients uniform in `[-scale, scale]`.
pub fn random_bilinear(dims: usize, scale: f64, rng: &mut impl Rng) -> Result<ShearMap> {
    let mut components = Vec::new();
    for i in 0..dims.saturating_sub(1) {
        let mut terms = Vec::new();
        for j in i + 1..dims {
            for k in i + 1..dims {
                terms.push(BilinearTerm {
                    x_axis: j,
                    y_axis: k,
                    coeff: rng.random_range(-scale..=scale),
                });
            }
        }
        components.push(terms);
    }
    Ok(ShearMap::bilinear(dims, components)?.with_label("random-bilinear"))
}
