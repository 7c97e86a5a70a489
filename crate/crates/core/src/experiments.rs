//! End-to-end experiments: field summaries, weak-type sweeps, covering runs
//! and the dilation check of the `L^p -> L^q` bound. Each experiment returns
//! plain rows and renders them as CSV; file handling is left to the caller.

use std::fmt::Write as _;

use crate::covering::{
    overlap_lp, scan_permutation, select, union_volumes, verify_halfmax, verify_halfoverlap,
    verify_rejected, CoveringResult, OverlapNorm, ScanOrder, UnionVolumes,
};
use crate::error::{Error, Result};
use crate::format::csv_real;
use crate::lattice::{GridFunction, Lattice, Rect, RectFamily, RectPoints};
use crate::maximal::{frac_max_field, superlevel, witnesses_for, FracExponents, MaxParams, MaximalField};
use crate::shear::{sheared_sample, ShearMap};
use crate::synth::centered_cube;

/// Default number of levels in a sweep.
pub const DEFAULT_LAMBDA_COUNT: usize = 20;
/// Default lowest level as a fraction of the field maximum.
pub const DEFAULT_LAMBDA_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSummary {
    pub alpha: f64,
    pub family: RectFamily,
    pub max: f64,
    pub min: f64,
    pub mean: f64,
}

impl FieldSummary {
    pub fn of(field: &MaximalField) -> Self {
        FieldSummary {
            alpha: field.alpha(),
            family: field.family(),
            max: field.max(),
            min: field.min(),
            mean: field.mean(),
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "alpha,family,max,min,mean\n{},{},{},{},{}\n",
            csv_real(self.alpha),
            self.family,
            csv_real(self.max),
            csv_real(self.min),
            csv_real(self.mean)
        )
    }
}

/// `count` geometrically spaced levels from `min` to `max` inclusive.
pub fn lambda_grid(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite()) || min <= 0.0 || max < min || count == 0 {
        return Err(Error::InvalidExponent(format!(
            "level grid needs 0 < min <= max and count >= 1, got [{min}, {max}] x {count}"
        )));
    }
    if count == 1 {
        return Ok(vec![min]);
    }
    let step = (max / min).ln() / (count - 1) as f64;
    let mut grid: Vec<f64> = (0..count).map(|i| min * (step * i as f64).exp()).collect();
    grid[count - 1] = max;
    Ok(grid)
}

/// The default sweep levels for a field: `[0.01 max, max]`, 20 points.
pub fn default_lambda_grid(field: &MaximalField) -> Result<Vec<f64>> {
    let max = field.max();
    lambda_grid(DEFAULT_LAMBDA_FLOOR * max, max, DEFAULT_LAMBDA_COUNT)
}

/// One level of a weak-type sweep, with the covering diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakTypeRecord {
    pub lambda: f64,
    pub vol_u: f64,
    /// `lambda * vol_u^(1/q) / ||f||_p`.
    pub score: f64,
    pub empty: bool,
    /// Distinct witness boxes offered to the covering.
    pub witnesses: usize,
    pub selected: usize,
    pub vol_union_witnesses: f64,
    pub vol_union_selected: f64,
    pub sum_selected_volume: f64,
    /// Sum over selected boxes of the sheared integral of `f`, each box using
    /// the shear of the point it certified.
    pub sheared_integral_sum: f64,
    /// `L^{p'}` norm of the selected coverage count, `p' = p / (p - 1)`.
    pub overlap_norm_dual: f64,
    /// `||f||_p * overlap_norm_dual`.
    pub holder_bound: f64,
}

impl WeakTypeRecord {
    fn empty(lambda: f64) -> Self {
        WeakTypeRecord {
            lambda,
            vol_u: 0.0,
            score: 0.0,
            empty: true,
            witnesses: 0,
            selected: 0,
            vol_union_witnesses: 0.0,
            vol_union_selected: 0.0,
            sum_selected_volume: 0.0,
            sheared_integral_sum: 0.0,
            overlap_norm_dual: 0.0,
            holder_bound: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WeakTypeReport {
    pub f_norm_p: f64,
    pub field_max: f64,
    pub records: Vec<WeakTypeRecord>,
}

impl WeakTypeReport {
    pub fn max_score(&self) -> f64 {
        self.records.iter().map(|r| r.score).fold(0.0, f64::max)
    }

    pub fn all_empty(&self) -> bool {
        self.records.iter().all(|r| r.empty)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "lambda,vol_u,score,empty,witnesses,selected,vol_union_witnesses,vol_union_selected,\
             sum_selected_volume,sheared_integral_sum,overlap_norm_dual,holder_bound\n",
        );
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                csv_real(r.lambda),
                csv_real(r.vol_u),
                csv_real(r.score),
                r.empty,
                r.witnesses,
                r.selected,
                csv_real(r.vol_union_witnesses),
                csv_real(r.vol_union_selected),
                csv_real(r.sum_selected_volume),
                csv_real(r.sheared_integral_sum),
                csv_real(r.overlap_norm_dual),
                csv_real(r.holder_bound)
            );
        }
        out
    }
}

/// For each level: the superlevel set, one witness box per point, the
/// half-overlap selection among the distinct witnesses, and the weak-type
/// score. Fails if some point of a superlevel set is not covered by the
/// witnesses.
pub fn weak_type_sweep(
    f: &GridFunction,
    rho: &ShearMap,
    exps: &FracExponents,
    params: &MaxParams,
    lambdas: Option<&[f64]>,
    order: ScanOrder,
) -> Result<WeakTypeReport> {
    if (params.alpha() - exps.alpha()).abs() > 1e-12 {
        return Err(Error::InvalidExponent(format!(
            "field alpha {} differs from 1/p - 1/q = {}",
            params.alpha(),
            exps.alpha()
        )));
    }
    let field = frac_max_field(f, rho, params)?;
    let f_norm_p = f.lp_norm(exps.p())?;
    let field_max = field.max();
    let lambdas = match lambdas {
        Some(l) => l.to_vec(),
        None if field_max > 0.0 => default_lambda_grid(&field)?,
        None => return Err(Error::Invariant("field vanishes identically".into())),
    };
    let dual = exps.p() / (exps.p() - 1.0);
    let mut records = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        let level = superlevel(&field, lambda)?;
        if level.is_empty() {
            records.push(WeakTypeRecord::empty(lambda));
            continue;
        }
        let lat = f.lattice();
        let witnesses = witnesses_for(&level, &field)?;

        // distinct boxes, first certifying point kept
        let mut seen = std::collections::HashSet::new();
        let mut distinct: Vec<(usize, Rect)> = Vec::new();
        for w in witnesses {
            if seen.insert(w.rect.clone()) {
                distinct.push((w.point, w.rect));
            }
        }
        let mut covered = vec![false; lat.len()];
        for (_, rect) in &distinct {
            rect.for_each_run(lat, |s, l| covered[s..s + l].fill(true));
        }
        if let Some(&i) = level.points.iter().find(|&&i| !covered[i]) {
            return Err(Error::Invariant(format!(
                "point {:?} of the level set {lambda} lies outside every witness box",
                lat.point(i)
            )));
        }

        let boxes: Vec<Rect> = distinct.iter().map(|(_, r)| r.clone()).collect();
        let perm = scan_permutation(&boxes, order);
        let ordered: Vec<Rect> = perm.iter().map(|&i| boxes[i].clone()).collect();
        let res = select(&ordered, lat)?;

        let mut sum_selected_volume = 0.0;
        let mut sheared_integral_sum = 0.0;
        for &k in res.selected() {
            let (point, rect) = &distinct[perm[k]];
            let x = lat.point(*point);
            sum_selected_volume += rect.volume();
            sheared_integral_sum += RectPoints::new(rect)
                .map(|y| sheared_sample(f, rho, &x, &y, params.boundary))
                .sum::<f64>();
        }
        let overlap_norm_dual = overlap_lp(&res, dual)?.norm;
        let vol_u = level.volume();
        records.push(WeakTypeRecord {
            lambda,
            vol_u,
            score: lambda * vol_u.powf(1.0 / exps.q()) / f_norm_p,
            empty: false,
            witnesses: distinct.len(),
            selected: res.selected().len(),
            vol_union_witnesses: res.vol_union_all() as f64,
            vol_union_selected: res.vol_union_selected() as f64,
            sum_selected_volume,
            sheared_integral_sum,
            overlap_norm_dual,
            holder_bound: f_norm_p * overlap_norm_dual,
        });
    }
    Ok(WeakTypeReport {
        f_norm_p,
        field_max,
        records,
    })
}

/// Per-rectangle line of a covering run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoveringRow {
    /// Scan position.
    pub k: usize,
    /// Position in the input file.
    pub index: usize,
    pub volume: u64,
    pub overlap: u64,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct CoveringReport {
    pub result: CoveringResult,
    pub rows: Vec<CoveringRow>,
    pub volumes: UnionVolumes,
    pub norms: Vec<OverlapNorm>,
}

impl CoveringReport {
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("k,index,volume,overlap,accepted\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.k, r.index, r.volume, r.overlap, r.accepted);
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("inputs,selected,vol_union_all,vol_union_selected,union_ratio,p,overlap_norm,overlap_ratio\n");
        for n in &self.norms {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.rows.len(),
                self.result.selected().len(),
                self.volumes.all,
                self.volumes.selected,
                csv_real(self.volumes.ratio),
                csv_real(n.p),
                csv_real(n.norm),
                csv_real(n.ratio)
            );
        }
        out
    }
}

/// Selection plus every verification; any failed verification is an
/// invariant violation.
pub fn covering_run(rects: &[Rect], lat: &Lattice, order: ScanOrder, ps: &[f64]) -> Result<CoveringReport> {
    let perm = scan_permutation(rects, order);
    let ordered: Vec<Rect> = perm.iter().map(|&i| rects[i].clone()).collect();
    let result = select(&ordered, lat)?;
    for verdict in [verify_halfoverlap(&result), verify_rejected(&result), verify_halfmax(&result)] {
        verdict.map_err(|v| Error::Invariant(v.to_string()))?;
    }
    let rows = perm
        .iter()
        .enumerate()
        .map(|(k, &index)| CoveringRow {
            k,
            index,
            volume: ordered[k].cell_count(),
            overlap: result.overlap_at_turn(k),
            accepted: result.is_selected(k),
        })
        .collect();
    let norms = ps.iter().map(|&p| overlap_lp(&result, p)).collect::<Result<Vec<_>>>()?;
    Ok(CoveringReport {
        volumes: union_volumes(&result),
        result,
        rows,
        norms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub side: usize,
    pub field_norm_q: f64,
    pub f_norm_p: f64,
    pub ratio: f64,
}

/// `||M^alpha chi_Q||_q / ||chi_Q||_p` for centred cubes `Q` of each side.
pub fn scaling_run(
    lat: &Lattice,
    rho: &ShearMap,
    exps: &FracExponents,
    params: &MaxParams,
    sides: &[usize],
) -> Result<Vec<ScalingRow>> {
    sides
        .iter()
        .map(|&side| {
            if !side.is_power_of_two() {
                return Err(Error::InvalidRect(format!("cube side {side} is not a power of two")));
            }
            let f = GridFunction::indicator(lat.clone(), &centered_cube(lat, side)?)?;
            let field = frac_max_field(&f, rho, params)?;
            let field_norm_q = field.lq_norm(exps.q())?;
            let f_norm_p = f.lp_norm(exps.p())?;
            Ok(ScalingRow {
                side,
                field_norm_q,
                f_norm_p,
                ratio: field_norm_q / f_norm_p,
            })
        })
        .collect()
}

pub fn scaling_csv(rows: &[ScalingRow]) -> String {
    let mut out = String::from("side,field_norm_q,f_norm_p,ratio\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.side,
            csv_real(r.field_norm_q),
            csv_real(r.f_norm_p),
            csv_real(r.ratio)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::TestFunction;

    #[test]
    fn lambda_grid_is_geometric() {
        let grid = lambda_grid(0.01, 1.0, 3).unwrap();
        assert!((grid[1] - 0.1).abs() < 1e-15);
        assert_eq!(grid[2], 1.0);
        assert_eq!(lambda_grid(0.5, 2.0, 1).unwrap(), vec![0.5]);
        assert!(lambda_grid(0.0, 1.0, 3).is_err());
        assert!(lambda_grid(2.0, 1.0, 3).is_err());
        assert!(lambda_grid(0.1, 1.0, 0).is_err());
    }

    #[test]
    fn levels_above_the_maximum_are_empty() {
        let lat = Lattice::cube(2, 8).unwrap();
        let f = TestFunction::Cube(2).generate(&lat, 0).unwrap();
        let exps = FracExponents::new(2.0, 2.0).unwrap();
        let params = MaxParams::strong(RectFamily::All);
        let rho = ShearMap::zero(2).unwrap();
        let report = weak_type_sweep(&f, &rho, &exps, &params, Some(&[0.5, 1.0, 2.0]), ScanOrder::VolumeDesc)
            .unwrap();
        assert!(!report.records[0].empty);
        assert!(report.records[1].empty);
        assert_eq!(report.records[2].score, 0.0);
        assert!(!report.all_empty());
    }

    #[test]
    fn sweep_rejects_mismatched_alpha() {
        let lat = Lattice::cube(2, 8).unwrap();
        let f = TestFunction::Cube(2).generate(&lat, 0).unwrap();
        let exps = FracExponents::new(2.0, 4.0).unwrap();
        let params = MaxParams::strong(RectFamily::All);
        let rho = ShearMap::zero(2).unwrap();
        assert!(weak_type_sweep(&f, &rho, &exps, &params, None, ScanOrder::Given).is_err());
    }

    #[test]
    fn sweep_csv_is_reproducible() {
        let lat = Lattice::cube(3, 6).unwrap();
        let f = TestFunction::Uniform.generate(&lat, 9).unwrap();
        let exps = FracExponents::new(2.0, 2.0).unwrap();
        let params = MaxParams::strong(RectFamily::DyadicSides);
        let rho = ShearMap::heisenberg(1.0).unwrap();
        let a = weak_type_sweep(&f, &rho, &exps, &params, None, ScanOrder::VolumeDesc).unwrap();
        let b = weak_type_sweep(&f, &rho, &exps, &params, None, ScanOrder::VolumeDesc).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.records.len(), DEFAULT_LAMBDA_COUNT);
        for r in a.records.iter().filter(|r| !r.empty) {
            // each selected box certified a point with average above lambda
            assert!(r.sum_selected_volume * r.lambda < r.sheared_integral_sum);
            assert!(r.vol_union_selected <= r.sum_selected_volume);
            assert!(r.vol_u <= r.vol_union_witnesses);
        }
    }

    #[test]
    fn covering_run_hand_example() {
        let lat = Lattice::cube(2, 4).unwrap();
        let rects = crate::format::parse_rects("0 2 0 2\n0 2 0 2\n1 3 0 2\n").unwrap();
        let report = covering_run(&rects, &lat, ScanOrder::Given, &[2.0]).unwrap();
        assert_eq!(report.result.selected(), &[0, 2]);
        assert_eq!(report.volumes.ratio, 1.0);
        assert!((report.norms[0].ratio - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(
            report.rows_csv(),
            "k,index,volume,overlap,accepted\n0,0,4,0,true\n1,1,4,4,false\n2,2,4,2,true\n"
        );
    }

    #[test]
    fn covering_run_volume_order_reports_file_indices() {
        let lat = Lattice::cube(1, 8).unwrap();
        let rects = crate::format::parse_rects("0 1\n0 4\n2 8\n").unwrap();
        let report = covering_run(&rects, &lat, ScanOrder::VolumeDesc, &[]).unwrap();
        let order: Vec<usize> = report.rows.iter().map(|r| r.index).collect();
        assert_eq!(order, vec![2, 1, 0]);
        // [2,8) first, then [0,4) overlaps 2 of 4 (accepted), then [0,1) fully covered
        let accepted: Vec<bool> = report.rows.iter().map(|r| r.accepted).collect();
        assert_eq!(accepted, vec![true, true, false]);
    }

    #[test]
    fn scaling_requires_power_of_two_sides() {
        let lat = Lattice::cube(2, 16).unwrap();
        let exps = FracExponents::new(2.0, 2.0).unwrap();
        let params = MaxParams::strong(RectFamily::DyadicSides);
        let rho = ShearMap::zero(2).unwrap();
        assert!(scaling_run(&lat, &rho, &exps, &params, &[3]).is_err());
        assert!(scaling_run(&lat, &rho, &exps, &params, &[32]).is_err());
        let rows = scaling_run(&lat, &rho, &exps, &params, &[2, 4]).unwrap();
        assert!(rows.iter().all(|r| r.ratio >= 1.0));
    }
}
