//! Greedy half-overlap selection of a rectangle subsequence.
//!
//! Rectangles are scanned in list order. The first is always kept; each later
//! one is kept exactly when at most half of its cells are already covered by
//! the rectangles kept so far. All volumes are integer cell counts and every
//! half comparison is done as `2 * overlap` against `volume`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::{lp_norm, GridFunction, Lattice, Rect, RectFamily};
use crate::maximal::strong_max_field;

/// Acceptance rule at exactly half overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieRule {
    /// Accept when `overlap <= vol / 2`.
    #[default]
    AcceptHalf,
    /// Accept only when `overlap < vol / 2`. Kept for mutation testing.
    RejectHalf,
}

impl TieRule {
    fn accepts(self, overlap: u64, volume: u64) -> bool {
        match self {
            TieRule::AcceptHalf => 2 * overlap <= volume,
            TieRule::RejectHalf => 2 * overlap < volume,
        }
    }
}

/// Scan order applied before selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScanOrder {
    #[default]
    Given,
    /// Decreasing volume, ties kept in given order.
    VolumeDesc,
}

impl std::str::FromStr for ScanOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "given" => Ok(ScanOrder::Given),
            "volume-desc" => Ok(ScanOrder::VolumeDesc),
            other => Err(Error::InvalidRect(format!("unknown order '{other}'"))),
        }
    }
}

/// Permutation of `0..rects.len()` realizing `order`.
pub fn scan_permutation(rects: &[Rect], order: ScanOrder) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..rects.len()).collect();
    if order == ScanOrder::VolumeDesc {
        perm.sort_by_key(|&i| std::cmp::Reverse(rects[i].cell_count()));
    }
    perm
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoveringResult {
    lattice: Lattice,
    input: Vec<Rect>,
    selected: Vec<usize>,
    /// Covered cells of each input at its turn.
    overlaps: Vec<u64>,
    coverage: Vec<u32>,
    vol_union_all: u64,
    vol_union_selected: u64,
}

impl CoveringResult {
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn input(&self) -> &[Rect] {
        &self.input
    }

    /// Indices into [`input`](Self::input), increasing.
    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn is_selected(&self, index: usize) -> bool {
        self.selected.binary_search(&index).is_ok()
    }

    /// Cells of input `index` already covered when it was examined.
    pub fn overlap_at_turn(&self, index: usize) -> u64 {
        self.overlaps[index]
    }

    /// Number of selected rectangles containing each cell.
    pub fn coverage(&self) -> &[u32] {
        &self.coverage
    }

    pub fn vol_union_all(&self) -> u64 {
        self.vol_union_all
    }

    pub fn vol_union_selected(&self) -> u64 {
        self.vol_union_selected
    }

    /// Replaces the selection, keeping everything else. Lets tests build
    /// results the algorithm would never produce.
    pub fn forge(&self, selected: Vec<usize>) -> CoveringResult {
        let mut coverage = vec![0; self.lattice.len()];
        for &k in &selected {
            self.input[k].for_each_run(&self.lattice, |s, l| {
                coverage[s..s + l].iter_mut().for_each(|c| *c += 1)
            });
        }
        let vol_union_selected = coverage.iter().filter(|&&c| c > 0).count() as u64;
        CoveringResult {
            selected,
            coverage,
            vol_union_selected,
            ..self.clone()
        }
    }
}

fn covered_cells(covered: &[bool], rect: &Rect, lat: &Lattice) -> u64 {
    let mut n = 0;
    rect.for_each_run(lat, |s, l| {
        n += covered[s..s + l].iter().filter(|&&c| c).count() as u64
    });
    n
}

fn mark(covered: &mut [bool], rect: &Rect, lat: &Lattice) {
    rect.for_each_run(lat, |s, l| covered[s..s + l].fill(true));
}

/// Half-overlap selection with ties accepted.
pub fn select(rects: &[Rect], lat: &Lattice) -> Result<CoveringResult> {
    select_with(rects, lat, TieRule::AcceptHalf)
}

pub fn select_with(rects: &[Rect], lat: &Lattice, tie: TieRule) -> Result<CoveringResult> {
    if rects.is_empty() {
        return Err(Error::EmptyRectList);
    }
    for r in rects {
        lat.check_rect(r)?;
    }
    let mut covered = vec![false; lat.len()];
    let mut coverage = vec![0u32; lat.len()];
    let mut all = vec![false; lat.len()];
    let mut selected = Vec::new();
    let mut overlaps = Vec::with_capacity(rects.len());
    for (j, rect) in rects.iter().enumerate() {
        let overlap = covered_cells(&covered, rect, lat);
        overlaps.push(overlap);
        mark(&mut all, rect, lat);
        if tie.accepts(overlap, rect.cell_count()) {
            selected.push(j);
            rect.for_each_run(lat, |s, l| {
                covered[s..s + l].fill(true);
                coverage[s..s + l].iter_mut().for_each(|c| *c += 1);
            });
        }
    }
    Ok(CoveringResult {
        lattice: lat.clone(),
        input: rects.to_vec(),
        selected,
        overlaps,
        coverage,
        vol_union_all: all.iter().filter(|&&c| c).count() as u64,
        vol_union_selected: covered.iter().filter(|&&c| c).count() as u64,
    })
}

/// First failed check of a covering verification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoveringViolation {
    pub check: &'static str,
    /// Input index of the offending rectangle, if any.
    pub index: Option<usize>,
    pub detail: String,
}

impl fmt::Display for CoveringViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "{} failed at rectangle {i}: {}", self.check, self.detail),
            None => write!(f, "{} failed: {}", self.check, self.detail),
        }
    }
}

impl std::error::Error for CoveringViolation {}

pub type Verdict = std::result::Result<(), CoveringViolation>;

/// Each selected rectangle overlaps the earlier selected ones in at most half
/// its volume, and its new part is at least half its volume.
pub fn verify_halfoverlap(res: &CoveringResult) -> Verdict {
    let fail = |index, detail| CoveringViolation {
        check: "half-overlap",
        index: Some(index),
        detail,
    };
    if res.selected.first() != Some(&0) {
        return Err(CoveringViolation {
            check: "half-overlap",
            index: None,
            detail: "first rectangle not selected".into(),
        });
    }
    if res.selected.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CoveringViolation {
            check: "half-overlap",
            index: None,
            detail: "selection is not increasing".into(),
        });
    }
    let lat = &res.lattice;
    let mut covered = vec![false; lat.len()];
    for &k in &res.selected {
        let rect = &res.input[k];
        let volume = rect.cell_count();
        let overlap = covered_cells(&covered, rect, lat);
        if 2 * overlap > volume {
            return Err(fail(k, format!("overlap {overlap} exceeds half of {volume}")));
        }
        let core = volume - overlap;
        if 2 * core < volume {
            return Err(fail(k, format!("new part {core} below half of {volume}")));
        }
        mark(&mut covered, rect, lat);
    }
    Ok(())
}

/// Each unselected rectangle overlaps the rectangles selected before it in
/// strictly more than half its volume.
pub fn verify_rejected(res: &CoveringResult) -> Verdict {
    let lat = &res.lattice;
    let mut covered = vec![false; lat.len()];
    for (j, rect) in res.input.iter().enumerate() {
        if res.is_selected(j) {
            mark(&mut covered, rect, lat);
            continue;
        }
        let volume = rect.cell_count();
        let overlap = covered_cells(&covered, rect, lat);
        if 2 * overlap <= volume {
            return Err(CoveringViolation {
                check: "rejected",
                index: Some(j),
                detail: format!("unselected with overlap {overlap} of volume {volume}"),
            });
        }
    }
    Ok(())
}

/// Every cell of the input union lies in an input rectangle more than half
/// covered by the selected union, so the strong maximal function of that
/// union's indicator exceeds one half there.
pub fn verify_halfmax(res: &CoveringResult) -> Verdict {
    let lat = &res.lattice;
    let selected_union: Vec<bool> = res.coverage.iter().map(|&c| c > 0).collect();
    let mut input_union = vec![false; lat.len()];
    let mut witnessed = vec![false; lat.len()];
    for rect in &res.input {
        mark(&mut input_union, rect, lat);
        if 2 * covered_cells(&selected_union, rect, lat) > rect.cell_count() {
            mark(&mut witnessed, rect, lat);
        }
    }
    match (0..lat.len()).find(|&i| input_union[i] && !witnessed[i]) {
        None => Ok(()),
        Some(i) => Err(CoveringViolation {
            check: "half-max",
            index: None,
            detail: format!("cell {:?} has no input rectangle more than half covered", lat.point(i)),
        }),
    }
}

/// Field-level replay of [`verify_halfmax`]: the strong maximal field of the
/// selected union, over `family`, exceeds one half on the input union. Only
/// guaranteed for [`RectFamily::All`], which contains every input rectangle.
pub fn verify_halfmax_field(res: &CoveringResult, family: RectFamily) -> Verdict {
    let lat = &res.lattice;
    let indicator: Vec<f64> = res.coverage.iter().map(|&c| if c > 0 { 1.0 } else { 0.0 }).collect();
    let f = GridFunction::new(lat.clone(), indicator).expect("indicator is valid");
    let field = strong_max_field(&f, family);
    let mut input_union = vec![false; lat.len()];
    for rect in &res.input {
        mark(&mut input_union, rect, lat);
    }
    match (0..lat.len()).find(|&i| input_union[i] && field.values()[i] <= 0.5) {
        None => Ok(()),
        Some(i) => Err(CoveringViolation {
            check: "half-max-field",
            index: None,
            detail: format!(
                "maximal field {} at cell {:?} is not above 1/2",
                field.values()[i],
                lat.point(i)
            ),
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnionVolumes {
    pub all: u64,
    pub selected: u64,
    /// `all / selected`, at least 1.
    pub ratio: f64,
}

pub fn union_volumes(res: &CoveringResult) -> UnionVolumes {
    UnionVolumes {
        all: res.vol_union_all,
        selected: res.vol_union_selected,
        ratio: res.vol_union_all as f64 / res.vol_union_selected as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapNorm {
    pub p: f64,
    /// `L^p` norm of the coverage count.
    pub norm: f64,
    /// `norm / vol(selected union)^(1/p)`.
    pub ratio: f64,
}

pub fn overlap_lp(res: &CoveringResult, p: f64) -> Result<OverlapNorm> {
    if !p.is_finite() || p <= 1.0 {
        return Err(Error::InvalidExponent(format!("overlap exponent must exceed 1, got {p}")));
    }
    let counts: Vec<f64> = res.coverage.iter().map(|&c| c as f64).collect();
    let norm = lp_norm(&counts, p)?;
    Ok(OverlapNorm {
        p,
        norm,
        ratio: norm / (res.vol_union_selected as f64).powf(1.0 / p),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingReport {
    /// Largest pairing found, a lower bound for the norm.
    pub best: f64,
    pub norm: f64,
    pub trials: usize,
}

/// Relative slack allowed between a pairing and the overlap norm.
pub const PAIRING_TOL: f64 = 1e-9;

/// `sum_x phi(x) * coverage(x)` for `phi` normalized in `L^{p'}`.
pub fn pairing(res: &CoveringResult, phi: &[f64], p: f64) -> Result<f64> {
    let dual = p / (p - 1.0);
    let scale = lp_norm(phi, dual)?;
    Ok(phi
        .iter()
        .zip(&res.coverage)
        .map(|(f, &c)| f * c as f64)
        .sum::<f64>()
        / scale)
}

/// Random dual test functions: pairings with the coverage count never exceed
/// its `L^p` norm.
pub fn dual_pairing_check(
    res: &CoveringResult,
    trials: usize,
    p: f64,
    seed: u64,
) -> std::result::Result<PairingReport, CoveringViolation> {
    assert!(trials >= 1, "at least one trial");
    let norm = overlap_lp(res, p)
        .map_err(|e| CoveringViolation {
            check: "dual-pairing",
            index: None,
            detail: e.to_string(),
        })?
        .norm;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = res.lattice.len();
    let mut best: f64 = 0.0;
    for trial in 0..trials {
        let phi: Vec<f64> = match trial % 3 {
            0 => (0..len).map(|_| rng.random::<f64>()).collect(),
            1 => (0..len)
                .map(|_| if rng.random_bool(0.05) { rng.random::<f64>() } else { 0.0 })
                .collect(),
            _ => res
                .coverage
                .iter()
                .map(|&c| (c as f64) * rng.random_range(0.5..1.5))
                .collect(),
        };
        if phi.iter().all(|&v| v == 0.0) {
            continue;
        }
        let value = pairing(res, &phi, p).expect("dual exponent is finite");
        if value > norm * (1.0 + PAIRING_TOL) {
            return Err(CoveringViolation {
                check: "dual-pairing",
                index: None,
                detail: format!("pairing {value} exceeds norm {norm} at trial {trial}"),
            });
        }
        best = best.max(value);
    }
    Ok(PairingReport { best, norm, trials })
}
