//! Strong, fractional and sheared maximal fields over lattice rectangles.
//!
//! For a point `x` the field value is the maximum, over family boxes `R`
//! containing `x`, of `vol(R)^(alpha - 1)` times the sum of the sheared
//! samples of `f` over `R`. Because the shear for base point `x` only reads
//! `x_2..x_N`, one summed table per tail serves every `x_1` on that line.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{enumerate_rects, GridFunction, Lattice, Rect, RectFamily, RectPoints, SummedTable};
use crate::shear::{check_shear, pullback_values, sheared_sample, Boundary, ShearMap};

/// Exponent triple with `1 < p <= q < inf` and `alpha = 1/p - 1/q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracExponents {
    p: f64,
    q: f64,
    alpha: f64,
}

/// Slack allowed when all three exponents are given.
const EXPONENT_TOL: f64 = 1e-12;

impl FracExponents {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p.is_finite() && q.is_finite()) || p <= 1.0 || q < p {
            return Err(Error::InvalidExponent(format!(
                "need 1 < p <= q < inf, got p = {p}, q = {q}"
            )));
        }
        Ok(FracExponents {
            p,
            q,
            alpha: 1.0 / p - 1.0 / q,
        })
    }

    /// Completes the triple from any two of `p`, `q`, `alpha`; when all three
    /// are given they must agree.
    pub fn from_any(p: Option<f64>, q: Option<f64>, alpha: Option<f64>) -> Result<Self> {
        let exps = match (p, q, alpha) {
            (Some(p), Some(q), _) => FracExponents::new(p, q)?,
            (Some(p), None, Some(a)) => {
                let inv_q = 1.0 / p - a;
                if !(0.0..1.0).contains(&a) || inv_q <= 0.0 {
                    return Err(Error::InvalidExponent(format!(
                        "alpha = {a} leaves no admissible q for p = {p}"
                    )));
                }
                FracExponents::new(p, 1.0 / inv_q)?
            }
            (None, Some(q), Some(a)) => {
                let inv_p = a + 1.0 / q;
                if !(0.0..1.0).contains(&a) || inv_p >= 1.0 {
                    return Err(Error::InvalidExponent(format!(
                        "alpha = {a} leaves no admissible p for q = {q}"
                    )));
                }
                FracExponents::new(1.0 / inv_p, q)?
            }
            _ => {
                return Err(Error::InvalidExponent(
                    "two of p, q, alpha are required".into(),
                ))
            }
        };
        if let Some(a) = alpha {
            if (a - exps.alpha).abs() > EXPONENT_TOL {
                return Err(Error::InvalidExponent(format!(
                    "alpha = {a} but 1/p - 1/q = {}",
                    exps.alpha
                )));
            }
        }
        Ok(exps)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Everything besides `f` and the shear that selects a maximal field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxParams {
    alpha: f64,
    pub family: RectFamily,
    pub boundary: Boundary,
}

impl MaxParams {
    pub fn new(alpha: f64, family: RectFamily) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidExponent(format!(
                "alpha must lie in [0, 1), got {alpha}"
            )));
        }
        Ok(MaxParams {
            alpha,
            family,
            boundary: Boundary::Torus,
        })
    }

    /// The plain strong maximal operator over `family`.
    pub fn strong(family: RectFamily) -> Self {
        MaxParams {
            alpha: 0.0,
            family,
            boundary: Boundary::Torus,
        }
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// One value per lattice point, with the box that attains it.
#[derive(Debug, Clone, PartialEq)]
pub struct MaximalField {
    lattice: Lattice,
    values: Vec<f64>,
    // 2N corners per point: lo then hi
    witnesses: Vec<usize>,
    alpha: f64,
    family: RectFamily,
    shear_label: String,
}

impl MaximalField {
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, point: &[usize]) -> f64 {
        self.values[self.lattice.index(point)]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn family(&self) -> RectFamily {
        self.family
    }

    pub fn shear_label(&self) -> &str {
        &self.shear_label
    }

    /// A family box containing point `index` that attains the field value.
    pub fn witness(&self, index: usize) -> Rect {
        let n = self.lattice.dims();
        let corners = &self.witnesses[2 * n * index..2 * n * (index + 1)];
        Rect::new(corners[..n].to_vec(), corners[n..].to_vec()).expect("stored witness is valid")
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn lq_norm(&self, q: f64) -> Result<f64> {
        crate::lattice::lp_norm(&self.values, q)
    }

    /// The field as a grid function, for writing or further processing.
    pub fn to_grid_function(&self) -> GridFunction {
        GridFunction::new(self.lattice.clone(), self.values.clone()).expect("field values are finite")
    }
}

/// `M f` over `family`: the largest box average containing each point.
pub fn strong_max_field(f: &GridFunction, family: RectFamily) -> MaximalField {
    let zero = ShearMap::zero(f.lattice().dims()).expect("lattice has at least one axis");
    field_engine(f, &zero, &MaxParams::strong(family))
}

/// `M^alpha_rho f` over `params.family`.
pub fn frac_max_field(f: &GridFunction, rho: &ShearMap, params: &MaxParams) -> Result<MaximalField> {
    check_shear(f.lattice(), rho)?;
    Ok(field_engine(f, rho, params))
}

/// Volume weights `v^(alpha - 1)` indexed by cell count.
struct Weights {
    alpha: f64,
    table: Vec<f64>,
}

impl Weights {
    fn new(alpha: f64, max_volume: usize) -> Self {
        let table = if alpha == 0.0 {
            Vec::new()
        } else {
            (0..=max_volume).map(|v| (v as f64).powf(alpha - 1.0)).collect()
        };
        Weights { alpha, table }
    }

    #[inline]
    fn apply(&self, volume: usize, sum: f64) -> f64 {
        if self.alpha == 0.0 {
            sum / volume as f64
        } else {
            self.table[volume] * sum
        }
    }
}

struct TailResult {
    values: Vec<f64>,
    witnesses: Vec<usize>,
}

fn field_engine(f: &GridFunction, rho: &ShearMap, params: &MaxParams) -> MaximalField {
    let lat = f.lattice();
    let n = lat.dims();
    let e0 = lat.extent(0);
    let tail_count = lat.len() / e0;
    let tail_lat = (n > 1).then(|| Lattice::new(lat.extents()[1..].to_vec()).expect("valid tail"));
    let weights = Weights::new(params.alpha, lat.len());
    let head_sides = params.family.axis_intervals(e0, None);
    let shared_table = rho.is_zero().then(|| SummedTable::build(f));

    let per_tail: Vec<TailResult> = (0..tail_count)
        .into_par_iter()
        .map(|t| {
            let tail: Vec<usize> = tail_lat.as_ref().map_or_else(Vec::new, |tl| tl.point(t));
            let own_table;
            let table = match &shared_table {
                Some(table) => table,
                None => {
                    let mut x = Vec::with_capacity(n);
                    x.push(0);
                    x.extend_from_slice(&tail);
                    own_table = SummedTable::build(&pullback_values(f, rho, &x, params.boundary));
                    &own_table
                }
            };
            tail_maxima(table, &tail, &head_sides, params.family, &weights)
        })
        .collect();

    let mut values = vec![0.0; lat.len()];
    let mut witnesses = vec![0; 2 * n * lat.len()];
    // row-major: index = x_1 * tail_count + tail index
    for (t, result) in per_tail.into_iter().enumerate() {
        for x0 in 0..e0 {
            let i = x0 * tail_count + t;
            values[i] = result.values[x0];
            witnesses[2 * n * i..2 * n * (i + 1)]
                .copy_from_slice(&result.witnesses[2 * n * x0..2 * n * (x0 + 1)]);
        }
    }
    MaximalField {
        lattice: lat.clone(),
        values,
        witnesses,
        alpha: params.alpha,
        family: params.family,
        shear_label: rho.label().to_string(),
    }
}

/// Best weighted sums along one line `x_2..x_N = tail`.
fn tail_maxima(
    table: &SummedTable,
    tail: &[usize],
    head_sides: &[(usize, usize)],
    family: RectFamily,
    weights: &Weights,
) -> TailResult {
    let lat = table.lattice();
    let n = lat.dims();
    let e0 = lat.extent(0);
    let tail_sides: Vec<Vec<(usize, usize)>> = (1..n)
        .map(|a| family.axis_intervals(lat.extent(a), Some(tail[a - 1])))
        .collect();

    let mut best = vec![f64::NEG_INFINITY; e0];
    let mut best_rect = vec![0; 2 * n * e0];
    let mut lo = vec![0; n];
    let mut hi = vec![0; n];
    let mut counters = vec![0; n - 1];
    loop {
        let mut tail_volume = 1;
        for a in 1..n {
            let (l, h) = tail_sides[a - 1][counters[a - 1]];
            lo[a] = l;
            hi[a] = h;
            tail_volume *= h - l;
        }
        for &(l0, h0) in head_sides {
            lo[0] = l0;
            hi[0] = h0;
            let sum = table.sum_sides(&lo, &hi).max(0.0);
            let value = weights.apply((h0 - l0) * tail_volume, sum);
            for x0 in l0..h0 {
                if value > best[x0] {
                    best[x0] = value;
                    let slot = &mut best_rect[2 * n * x0..2 * n * (x0 + 1)];
                    slot[..n].copy_from_slice(&lo);
                    slot[n..].copy_from_slice(&hi);
                }
            }
        }
        // odometer over the tail axes
        let mut axis = n - 1;
        loop {
            if axis == 0 {
                return TailResult {
                    values: best,
                    witnesses: best_rect,
                };
            }
            axis -= 1;
            counters[axis] += 1;
            if counters[axis] < tail_sides[axis].len() {
                break;
            }
            counters[axis] = 0;
        }
    }
}

/// Per-point reference: re-sums the sheared samples over every family box
/// containing each point, with no prefix sums. Only for small lattices.
pub fn frac_max_field_naive(f: &GridFunction, rho: &ShearMap, params: &MaxParams) -> Result<Vec<f64>> {
    let lat = f.lattice();
    check_shear(lat, rho)?;
    let mut out = Vec::with_capacity(lat.len());
    for x in lat.points() {
        let mut best = f64::NEG_INFINITY;
        for rect in enumerate_rects(lat, params.family, Some(&x)) {
            let mut sum = 0.0;
            for y in RectPoints::new(&rect) {
                sum += sheared_sample(f, rho, &x, &y, params.boundary);
            }
            best = best.max(rect.volume().powf(params.alpha - 1.0) * sum);
        }
        out.push(best);
    }
    Ok(out)
}

/// Points where the field strictly exceeds the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    pub lambda: f64,
    /// Linear indices in increasing order.
    pub points: Vec<usize>,
}

impl LevelSet {
    pub fn volume(&self) -> f64 {
        self.points.len() as f64 * crate::lattice::CELL_VOLUME
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.points.binary_search(&index).is_ok()
    }
}

/// `{x : field(x) > lambda}`.
pub fn superlevel(field: &MaximalField, lambda: f64) -> Result<LevelSet> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::InvalidExponent(format!(
            "level must be finite and positive, got {lambda}"
        )));
    }
    let points = field
        .values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > lambda)
        .map(|(i, _)| i)
        .collect();
    Ok(LevelSet { lambda, points })
}

/// A point of a level set with a box containing it whose weighted sum
/// exceeds the level.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub point: usize,
    pub rect: Rect,
    pub value: f64,
}

/// Certifies every point of `level` with a box from `field`, which must have
/// been computed for the same function and shear. A point whose best box
/// does not exceed the level signals that `level` came from a different
/// (larger) family.
pub fn witnesses_for(level: &LevelSet, field: &MaximalField) -> Result<Vec<Witness>> {
    level
        .points
        .iter()
        .map(|&i| {
            let value = field.values[i];
            if value > level.lambda {
                Ok(Witness {
                    point: i,
                    rect: field.witness(i),
                    value,
                })
            } else {
                Err(Error::NoWitness {
                    point: field.lattice.point(i),
                    lambda: level.lambda,
                })
            }
        })
        .collect()
}

/// Witness boxes covering `U_lambda` of `M^alpha_rho f`.
pub fn witness_rectangles(
    f: &GridFunction,
    rho: &ShearMap,
    params: &MaxParams,
    lambda: f64,
) -> Result<Vec<Witness>> {
    let field = frac_max_field(f, rho, params)?;
    let level = superlevel(&field, lambda)?;
    witnesses_for(&level, &field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    fn random_function(lat: &Lattice, seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GridFunction::from_fn(lat.clone(), |_| rng.random::<f64>()).unwrap()
    }

    fn cell_indicator(lat: &Lattice, point: &[usize]) -> GridFunction {
        let rect = Rect::new(point.to_vec(), point.iter().map(|c| c + 1).collect()).unwrap();
        GridFunction::indicator(lat.clone(), &rect).unwrap()
    }

    /// Average over every box containing `x`, by direct summation.
    fn brute_strong(f: &GridFunction, x: &[usize]) -> f64 {
        let lat = f.lattice();
        let mut best: f64 = 0.0;
        for rect in enumerate_rects(lat, RectFamily::All, None) {
            if rect.contains(x) {
                let s: f64 = RectPoints::new(&rect).map(|y| f.get(&y)).sum();
                best = best.max(s / rect.volume());
            }
        }
        best
    }

    #[test]
    fn exponent_triples() {
        let e = FracExponents::new(4.0 / 3.0, 4.0).unwrap();
        assert!((e.alpha() - 0.5).abs() < 1e-15);
        let e = FracExponents::from_any(Some(4.0 / 3.0), None, Some(0.5)).unwrap();
        assert!((e.q() - 4.0).abs() < 1e-12);
        let e = FracExponents::from_any(None, Some(4.0), Some(0.5)).unwrap();
        assert!((e.p() - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(FracExponents::from_any(Some(2.0), Some(2.0), Some(0.0)).unwrap().alpha(), 0.0);
        assert!(FracExponents::from_any(Some(2.0), Some(3.0), Some(0.5)).is_err());
        assert!(FracExponents::new(1.0, 2.0).is_err());
        assert!(FracExponents::new(3.0, 2.0).is_err());
        assert!(FracExponents::new(2.0, f64::INFINITY).is_err());
        assert!(FracExponents::from_any(Some(2.0), None, Some(0.6)).is_err());
        assert!(FracExponents::from_any(None, None, Some(0.5)).is_err());
        assert!(MaxParams::new(1.0, RectFamily::All).is_err());
        assert!(MaxParams::new(-0.1, RectFamily::All).is_err());
    }

    #[test]
    fn constant_function_field_is_constant() {
        let f = GridFunction::constant(Lattice::new(vec![5, 4]).unwrap(), 2.5).unwrap();
        for family in [RectFamily::All, RectFamily::DyadicSides, RectFamily::Dyadic] {
            let field = strong_max_field(&f, family);
            assert!(field.values().iter().all(|&v| rel_close(v, 2.5, 1e-14)), "{family}");
        }
    }

    #[test]
    fn single_cell_indicator_by_brute_force() {
        let lat = Lattice::cube(2, 8).unwrap();
        let f = cell_indicator(&lat, &[0, 0]);
        let field = strong_max_field(&f, RectFamily::All);
        assert_eq!(brute_strong(&f, &[1, 1]), 0.25);
        assert_eq!(field.value(&[0, 0]), 1.0);
        assert_eq!(field.value(&[1, 1]), 0.25);
        for x in lat.points() {
            assert!(rel_close(field.value(&x), brute_strong(&f, &x), 1e-12), "{x:?}");
        }
    }

    #[test]
    fn field_dominates_function() {
        let lat = Lattice::new(vec![6, 5]).unwrap();
        let f = random_function(&lat, 11);
        for family in [RectFamily::All, RectFamily::DyadicSides, RectFamily::Dyadic] {
            let field = strong_max_field(&f, family);
            for (v, fv) in field.values().iter().zip(f.values()) {
                // unit-cell sums come from prefix differences
                assert!(*v >= fv * (1.0 - 1e-12), "{v} < {fv}");
            }
        }
    }

    #[test]
    fn fractional_cube_value() {
        let lat = Lattice::cube(2, 16).unwrap();
        let q = Rect::from_sides(&[(0, 4), (0, 4)]).unwrap();
        let f = GridFunction::indicator(lat.clone(), &q).unwrap();
        let params = MaxParams::new(0.5, RectFamily::All).unwrap();
        let field = frac_max_field(&f, &ShearMap::zero(2).unwrap(), &params).unwrap();
        for x in RectPoints::new(&q) {
            assert!(rel_close(field.value(&x), 4.0, 1e-12), "{x:?}: {}", field.value(&x));
        }
    }

    #[test]
    fn alpha_zero_zero_shear_is_strong_max() {
        let lat = Lattice::new(vec![7, 6]).unwrap();
        let f = random_function(&lat, 2);
        let strong = strong_max_field(&f, RectFamily::All);
        let params = MaxParams::new(0.0, RectFamily::All).unwrap();
        let frac = frac_max_field(&f, &ShearMap::zero(2).unwrap(), &params).unwrap();
        assert_eq!(strong.values(), frac.values());
    }

    #[test]
    fn heisenberg_field_matches_naive_on_small_cube() {
        let lat = Lattice::cube(3, 4).unwrap();
        let f = random_function(&lat, 5);
        let rho = ShearMap::heisenberg(1.0).unwrap();
        for alpha in [0.0, 0.5] {
            let params = MaxParams::new(alpha, RectFamily::All).unwrap();
            let fast = frac_max_field(&f, &rho, &params).unwrap();
            let slow = frac_max_field_naive(&f, &rho, &params).unwrap();
            for (a, b) in fast.values().iter().zip(&slow) {
                assert!(rel_close(*a, *b, 1e-12), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn one_dimensional_lattice() {
        let lat = Lattice::cube(1, 6).unwrap();
        let f = GridFunction::new(lat, vec![0.0, 0.0, 3.0, 0.0, 1.0, 0.0]).unwrap();
        let field = strong_max_field(&f, RectFamily::All);
        // x = 4 is best served by [2, 5), x = 5 by [2, 6)
        assert_eq!(field.values(), &[1.0, 1.5, 3.0, 1.5, 4.0 / 3.0, 1.0]);
    }

    #[test]
    fn witnesses_attain_field_values() {
        let lat = Lattice::cube(3, 4).unwrap();
        let f = random_function(&lat, 8);
        let rho = ShearMap::heisenberg(1.0).unwrap();
        let params = MaxParams::new(0.5, RectFamily::DyadicSides).unwrap();
        let field = frac_max_field(&f, &rho, &params).unwrap();
        for i in 0..lat.len() {
            let x = lat.point(i);
            let rect = field.witness(i);
            assert!(rect.contains(&x));
            assert!(RectFamily::DyadicSides.contains(&lat, &rect));
            let s: f64 = RectPoints::new(&rect)
                .map(|y| sheared_sample(&f, &rho, &x, &y, Boundary::Torus))
                .sum();
            assert!(rel_close(s * rect.volume().powf(-0.5), field.values()[i], 1e-12));
        }
    }

    #[test]
    fn superlevel_examples() {
        let lat = Lattice::cube(2, 8).unwrap();
        let field = strong_max_field(&cell_indicator(&lat, &[0, 0]), RectFamily::All);
        assert!(superlevel(&field, field.max()).unwrap().is_empty());
        assert_eq!(superlevel(&field, 0.5 * field.min()).unwrap().points.len(), lat.len());
        let level = superlevel(&field, 0.3).unwrap();
        assert!(level.contains(lat.index(&[0, 0])));
        assert!(!level.contains(lat.index(&[1, 1])));
        assert!(superlevel(&field, 0.0).is_err());
        assert!(superlevel(&field, f64::NAN).is_err());
    }

    #[test]
    fn cube_witnesses_cover_level_set() {
        let lat = Lattice::cube(2, 16).unwrap();
        let q = Rect::from_sides(&[(0, 4), (0, 4)]).unwrap();
        let f = GridFunction::indicator(lat.clone(), &q).unwrap();
        let params = MaxParams::new(0.5, RectFamily::All).unwrap();
        let rho = ShearMap::zero(2).unwrap();
        let witnesses = witness_rectangles(&f, &rho, &params, 3.9).unwrap();
        let level_points: Vec<usize> = witnesses.iter().map(|w| w.point).collect();
        let q_points: Vec<usize> = RectPoints::new(&q).map(|x| lat.index(&x)).collect();
        assert_eq!(level_points, q_points);
        for w in &witnesses {
            assert!(w.rect.contains(&lat.point(w.point)));
            assert!(w.value > 3.9);
        }
    }

    #[test]
    fn family_mismatch_is_reported() {
        let lat = Lattice::cube(2, 6).unwrap();
        let f = cell_indicator(&lat, &[2, 3]);
        let all = strong_max_field(&f, RectFamily::All);
        let dyadic = strong_max_field(&f, RectFamily::Dyadic);
        // a level only the richer family clears at some point
        let i = (0..lat.len())
            .find(|&i| all.values()[i] > dyadic.values()[i])
            .expect("families differ somewhere");
        let lambda = 0.5 * (all.values()[i] + dyadic.values()[i]);
        let level = superlevel(&all, lambda).unwrap();
        assert!(matches!(witnesses_for(&level, &dyadic), Err(Error::NoWitness { .. })));
        assert!(witnesses_for(&level, &all).is_ok());
    }
}
