//! Integer lattices, nonnegative grid functions and axis-parallel boxes.
//!
//! A lattice point `y` stands for the unit cell `[y, y + 1)^N`, so every
//! integral over a box is a finite cell sum and every volume is a cell count.
//! Points are stored in row-major order: the last axis varies fastest.

use std::fmt;

use log::warn;

use crate::error::{Error, Result};

/// Volume of one lattice cell.
pub const CELL_VOLUME: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Lattice {
    extents: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl Lattice {
    pub fn new(extents: Vec<usize>) -> Result<Self> {
        if extents.is_empty() {
            return Err(Error::InvalidLattice("at least one axis required".into()));
        }
        if let Some(axis) = extents.iter().position(|&e| e == 0) {
            return Err(Error::InvalidLattice(format!("axis {axis} has extent 0")));
        }
        let len = extents
            .iter()
            .try_fold(1usize, |acc, &e| acc.checked_mul(e))
            .ok_or_else(|| Error::InvalidLattice("point count overflows".into()))?;
        let mut strides = vec![1; extents.len()];
        for axis in (0..extents.len() - 1).rev() {
            strides[axis] = strides[axis + 1] * extents[axis + 1];
        }
        Ok(Lattice {
            extents,
            strides,
            len,
        })
    }

    /// Same extent `side` on each of `dims` axes.
    pub fn cube(dims: usize, side: usize) -> Result<Self> {
        Lattice::new(vec![side; dims])
    }

    pub fn dims(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn extent(&self, axis: usize) -> usize {
        self.extents[axis]
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Total number of lattice points.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains_point(&self, point: &[usize]) -> bool {
        point.len() == self.dims() && point.iter().zip(&self.extents).all(|(&c, &e)| c < e)
    }

    pub fn index(&self, point: &[usize]) -> usize {
        debug_assert!(self.contains_point(point), "{point:?} outside {:?}", self.extents);
        point.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    pub fn point(&self, index: usize) -> Vec<usize> {
        let mut point = vec![0; self.dims()];
        self.write_point(index, &mut point);
        point
    }

    pub fn write_point(&self, mut index: usize, out: &mut [usize]) {
        for (c, s) in out.iter_mut().zip(&self.strides) {
            *c = index / s;
            index %= s;
        }
    }

    /// All points in row-major order.
    pub fn points(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.len).map(|i| self.point(i))
    }

    /// The whole domain as a box.
    pub fn full_rect(&self) -> Rect {
        Rect {
            lo: vec![0; self.dims()],
            hi: self.extents.clone(),
        }
    }

    /// Checks that `rect` has the right dimension and lies inside the domain.
    pub fn check_rect(&self, rect: &Rect) -> Result<()> {
        if rect.dims() != self.dims() {
            return Err(Error::InvalidRect(format!(
                "{rect} has {} axes, lattice has {}",
                rect.dims(),
                self.dims()
            )));
        }
        if let Some(axis) = (0..self.dims()).find(|&a| rect.hi[a] > self.extents[a]) {
            return Err(Error::InvalidRect(format!(
                "{rect} exceeds extent {} on axis {axis}",
                self.extents[axis]
            )));
        }
        Ok(())
    }
}

/// Half-open integer box `prod_i [lo_i, hi_i)`, never empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rect {
    lo: Vec<usize>,
    hi: Vec<usize>,
}

impl Rect {
    pub fn new(lo: Vec<usize>, hi: Vec<usize>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidRect(format!(
                "corner lengths {} and {} must match and be positive",
                lo.len(),
                hi.len()
            )));
        }
        if let Some(axis) = (0..lo.len()).find(|&a| lo[a] >= hi[a]) {
            return Err(Error::InvalidRect(format!(
                "empty side on axis {axis}: [{}, {})",
                lo[axis], hi[axis]
            )));
        }
        Ok(Rect { lo, hi })
    }

    /// Builds a box from `(lo, hi)` pairs, one per axis.
    pub fn from_sides(sides: &[(usize, usize)]) -> Result<Self> {
        Rect::new(
            sides.iter().map(|s| s.0).collect(),
            sides.iter().map(|s| s.1).collect(),
        )
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[usize] {
        &self.lo
    }

    pub fn hi(&self) -> &[usize] {
        &self.hi
    }

    pub fn side(&self, axis: usize) -> usize {
        self.hi[axis] - self.lo[axis]
    }

    /// Cell count of the box.
    pub fn cell_count(&self) -> u64 {
        (0..self.dims()).map(|a| self.side(a) as u64).product()
    }

    pub fn volume(&self) -> f64 {
        self.cell_count() as f64 * CELL_VOLUME
    }

    pub fn contains(&self, point: &[usize]) -> bool {
        point.len() == self.dims()
            && (0..self.dims()).all(|a| self.lo[a] <= point[a] && point[a] < self.hi[a])
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        (0..self.dims()).all(|a| self.lo[a] <= other.lo[a] && other.hi[a] <= self.hi[a])
    }

    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let mut lo = Vec::with_capacity(self.dims());
        let mut hi = Vec::with_capacity(self.dims());
        for a in 0..self.dims() {
            let l = self.lo[a].max(other.lo[a]);
            let h = self.hi[a].min(other.hi[a]);
            if l >= h {
                return None;
            }
            lo.push(l);
            hi.push(h);
        }
        Some(Rect { lo, hi })
    }

    /// Multiplies every corner coordinate by `factor`.
    pub fn dilate(&self, factor: usize) -> Rect {
        Rect {
            lo: self.lo.iter().map(|c| c * factor).collect(),
            hi: self.hi.iter().map(|c| c * factor).collect(),
        }
    }

    /// Calls `visit(start, len)` for each maximal run of cells contiguous in
    /// memory, i.e. each line of the box along the last axis.
    pub fn for_each_run(&self, lat: &Lattice, mut visit: impl FnMut(usize, usize)) {
        let n = self.dims();
        let last = n - 1;
        let run = self.side(last);
        let strides = lat.strides();
        let mut cursor: Vec<usize> = self.lo.clone();
        loop {
            let start: usize = (0..n).map(|a| cursor[a] * strides[a]).sum();
            visit(start, run);
            // advance the odometer over axes 0..last
            let mut axis = last;
            loop {
                if axis == 0 {
                    return;
                }
                axis -= 1;
                cursor[axis] += 1;
                if cursor[axis] < self.hi[axis] {
                    break;
                }
                cursor[axis] = self.lo[axis];
            }
        }
    }

    /// Linear indices of every cell in the box, row-major.
    pub fn cell_indices(&self, lat: &Lattice) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.cell_count() as usize);
        self.for_each_run(lat, |start, len| out.extend(start..start + len));
        out
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in 0..self.dims() {
            if a > 0 {
                f.write_str("x")?;
            }
            write!(f, "[{},{})", self.lo[a], self.hi[a])?;
        }
        Ok(())
    }
}

/// Nonnegative samples, one per lattice point, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    lattice: Lattice,
    values: Vec<f64>,
}

impl GridFunction {
    /// Stores `|v|` for every sample. Negative inputs are accepted with a
    /// logged notice; non-finite inputs are rejected.
    pub fn new(lattice: Lattice, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::ValueCount {
                expected: lattice.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let negatives = values.iter().filter(|v| **v < 0.0).count();
        if negatives > 0 {
            warn!("{negatives} negative samples replaced by their absolute values");
            values.iter_mut().for_each(|v| *v = v.abs());
        }
        Ok(GridFunction { lattice, values })
    }

    pub fn from_fn(lattice: Lattice, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut point = vec![0; lattice.dims()];
        let values = (0..lattice.len())
            .map(|i| {
                lattice.write_point(i, &mut point);
                f(&point)
            })
            .collect();
        GridFunction::new(lattice, values)
    }

    pub fn constant(lattice: Lattice, value: f64) -> Result<Self> {
        let len = lattice.len();
        GridFunction::new(lattice, vec![value; len])
    }

    /// Indicator function of `rect`.
    pub fn indicator(lattice: Lattice, rect: &Rect) -> Result<Self> {
        lattice.check_rect(rect)?;
        let mut values = vec![0.0; lattice.len()];
        rect.for_each_run(&lattice, |s, l| values[s..s + l].fill(1.0));
        Ok(GridFunction { lattice, values })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, point: &[usize]) -> f64 {
        self.values[self.lattice.index(point)]
    }

    /// Pointwise product with a positive constant.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        GridFunction::new(
            self.lattice.clone(),
            self.values.iter().map(|v| v * factor).collect(),
        )
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm(&self.values, p)
    }
}

/// `(sum_y |v(y)|^p * cell_volume)^(1/p)` for finite `p > 0`.
pub fn lp_norm(values: &[f64], p: f64) -> Result<f64> {
    if !p.is_finite() || p <= 0.0 {
        return Err(Error::InvalidExponent(format!(
            "norm exponent must be finite and positive, got {p}"
        )));
    }
    let sum: f64 = if p == 1.0 {
        values.iter().map(|v| v.abs()).sum()
    } else {
        values.iter().map(|v| v.abs().powf(p)).sum()
    };
    Ok((sum * CELL_VOLUME).powf(1.0 / p))
}

/// N-dimensional prefix sums: `prefix[z] = sum of f(y) over y < z` on every
/// axis, stored on the lattice padded by one on each axis.
#[derive(Debug, Clone)]
pub struct SummedTable {
    lattice: Lattice,
    padded_strides: Vec<usize>,
    prefix: Vec<f64>,
}

impl SummedTable {
    pub fn build(f: &GridFunction) -> Self {
        Self::from_values(f.lattice(), f.values())
    }

    /// Builds the table from raw row-major samples of `lattice`.
    pub fn from_values(lattice: &Lattice, values: &[f64]) -> Self {
        assert_eq!(values.len(), lattice.len(), "sample count mismatch");
        let padded = Lattice::new(lattice.extents().iter().map(|e| e + 1).collect())
            .expect("padded extents are positive");
        let strides = padded.strides().to_vec();
        let mut prefix = vec![0.0; padded.len()];
        let mut point = vec![0; lattice.dims()];
        for (i, &v) in values.iter().enumerate() {
            lattice.write_point(i, &mut point);
            let j: usize = point.iter().zip(&strides).map(|(c, s)| (c + 1) * s).sum();
            prefix[j] = v;
        }
        // One cumulative sweep per axis.
        for axis in 0..padded.dims() {
            let stride = strides[axis];
            for j in 0..prefix.len() {
                let coord = (j / stride) % padded.extent(axis);
                if coord > 0 {
                    prefix[j] += prefix[j - stride];
                }
            }
        }
        SummedTable {
            lattice: lattice.clone(),
            padded_strides: strides,
            prefix,
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Prefix value at padded coordinate `z` (each `z_i` in `0..=extent_i`).
    pub fn prefix_at(&self, z: &[usize]) -> f64 {
        let j: usize = z.iter().zip(&self.padded_strides).map(|(c, s)| c * s).sum();
        self.prefix[j]
    }

    /// Sum of `f` over `rect` by 2^N-term inclusion-exclusion.
    pub fn rect_sum(&self, rect: &Rect) -> f64 {
        self.sum_sides(rect.lo(), rect.hi())
    }

    /// Same as [`rect_sum`](Self::rect_sum) for a box given by raw corners.
    pub fn sum_sides(&self, lo: &[usize], hi: &[usize]) -> f64 {
        let n = lo.len();
        debug_assert_eq!(n, self.lattice.dims());
        let mut total = 0.0;
        for mask in 0..(1usize << n) {
            let mut j = 0;
            let mut lows = 0;
            for a in 0..n {
                if mask >> a & 1 == 1 {
                    j += hi[a] * self.padded_strides[a];
                } else {
                    j += lo[a] * self.padded_strides[a];
                    lows += 1;
                }
            }
            if lows % 2 == 0 {
                total += self.prefix[j];
            } else {
                total -= self.prefix[j];
            }
        }
        total
    }
}

/// Direct summation over the cells of `rect`; the reference for
/// [`SummedTable::rect_sum`].
pub fn rect_sum_bruteforce(f: &GridFunction, rect: &Rect) -> f64 {
    let mut total = 0.0;
    for point in RectPoints::new(rect) {
        total += f.get(&point);
    }
    total
}

/// Iterates the points of a box in row-major order.
#[derive(Debug, Clone)]
pub struct RectPoints<'a> {
    rect: &'a Rect,
    cursor: Option<Vec<usize>>,
}

impl<'a> RectPoints<'a> {
    pub fn new(rect: &'a Rect) -> Self {
        RectPoints {
            rect,
            cursor: Some(rect.lo.clone()),
        }
    }
}

impl Iterator for RectPoints<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.cursor.take()?;
        let mut next = current.clone();
        let mut axis = next.len();
        while axis > 0 {
            axis -= 1;
            next[axis] += 1;
            if next[axis] < self.rect.hi[axis] {
                self.cursor = Some(next);
                return Some(current);
            }
            next[axis] = self.rect.lo[axis];
        }
        Some(current)
    }
}

/// Finite rectangle families standing in for the supremum over all boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RectFamily {
    /// Every box inside the domain.
    All,
    /// Boxes whose sides are powers of two, at any position. The full axis
    /// extent is also admitted as a side length so that every box fits in a
    /// member at most twice as long per axis.
    DyadicSides,
    /// Boxes aligned to the dyadic grid: side `2^k` starting at a multiple
    /// of `2^k`.
    Dyadic,
}

impl RectFamily {
    /// ALL for at most two axes of extent at most 32, otherwise DYADIC_SIDES.
    pub fn default_for(lat: &Lattice) -> Self {
        if lat.dims() <= 2 && lat.extents().iter().all(|&e| e <= 32) {
            RectFamily::All
        } else {
            RectFamily::DyadicSides
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RectFamily::All => "all",
            RectFamily::DyadicSides => "dyadic-sides",
            RectFamily::Dyadic => "dyadic",
        }
    }

    /// Sides `[lo, hi)` of one axis allowed by the family, ordered by
    /// `(lo, hi)`, optionally restricted to those containing `coord`.
    pub fn axis_intervals(self, extent: usize, containing: Option<usize>) -> Vec<(usize, usize)> {
        let lengths: Vec<usize> = match self {
            RectFamily::All => (1..=extent).collect(),
            RectFamily::DyadicSides | RectFamily::Dyadic => {
                let mut ls: Vec<usize> = std::iter::successors(Some(1usize), |l| l.checked_mul(2))
                    .take_while(|&l| l <= extent)
                    .collect();
                if self == RectFamily::DyadicSides && !extent.is_power_of_two() {
                    ls.push(extent);
                }
                ls
            }
        };
        let (lo_min, lo_max) = match containing {
            Some(c) => (0, c),
            None => (0, extent - 1),
        };
        let mut out = Vec::new();
        for lo in lo_min..=lo_max {
            for &len in &lengths {
                let hi = lo + len;
                if hi > extent {
                    continue;
                }
                if self == RectFamily::Dyadic && lo % len != 0 {
                    continue;
                }
                if containing.is_some_and(|c| hi <= c) {
                    continue;
                }
                out.push((lo, hi));
            }
        }
        out
    }

    /// Whether `rect` belongs to the family on `lat`.
    pub fn contains(self, lat: &Lattice, rect: &Rect) -> bool {
        if lat.check_rect(rect).is_err() {
            return false;
        }
        (0..rect.dims()).all(|a| {
            let len = rect.side(a);
            let extent = lat.extent(a);
            match self {
                RectFamily::All => true,
                RectFamily::DyadicSides => len.is_power_of_two() || len == extent,
                RectFamily::Dyadic => len.is_power_of_two() && rect.lo()[a].is_multiple_of(len),
            }
        })
    }
}

impl fmt::Display for RectFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for RectFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(RectFamily::All),
            "dyadic-sides" => Ok(RectFamily::DyadicSides),
            "dyadic" => Ok(RectFamily::Dyadic),
            other => Err(Error::InvalidRect(format!("unknown rectangle family '{other}'"))),
        }
    }
}

/// Every member of `family` on `lat`, restricted to boxes containing
/// `containing` when given. No duplicates; last axis varies fastest.
pub fn enumerate_rects(lat: &Lattice, family: RectFamily, containing: Option<&[usize]>) -> RectIter {
    if let Some(p) = containing {
        assert!(lat.contains_point(p), "{p:?} outside lattice");
    }
    let axes = (0..lat.dims())
        .map(|a| family.axis_intervals(lat.extent(a), containing.map(|p| p[a])))
        .collect();
    RectIter::new(axes)
}

/// Cartesian product of per-axis side lists.
#[derive(Debug, Clone)]
pub struct RectIter {
    axes: Vec<Vec<(usize, usize)>>,
    counters: Vec<usize>,
    done: bool,
}

impl RectIter {
    pub fn new(axes: Vec<Vec<(usize, usize)>>) -> Self {
        let done = axes.is_empty() || axes.iter().any(|a| a.is_empty());
        RectIter {
            counters: vec![0; axes.len()],
            axes,
            done,
        }
    }

    /// Number of boxes yielded in total.
    pub fn total(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }
}

impl Iterator for RectIter {
    type Item = Rect;

    fn next(&mut self) -> Option<Rect> {
        if self.done {
            return None;
        }
        let sides: Vec<(usize, usize)> = self
            .counters
            .iter()
            .zip(&self.axes)
            .map(|(&c, axis)| axis[c])
            .collect();
        let mut axis = self.counters.len();
        loop {
            if axis == 0 {
                self.done = true;
                break;
            }
            axis -= 1;
            self.counters[axis] += 1;
            if self.counters[axis] < self.axes[axis].len() {
                break;
            }
            self.counters[axis] = 0;
        }
        Some(Rect::from_sides(&sides).expect("family sides are nonempty"))
    }
}
