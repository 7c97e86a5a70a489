//! The invariant suite run by `maxrect verify`.
//!
//! Every check is seeded and sized by [`SuiteConfig`]. [`Faults`] swaps in a
//! deliberately wrong tie rule or boundary so the suite can demonstrate that
//! it notices.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::covering::{
    overlap_lp, select_with, union_volumes, verify_halfmax, verify_halfmax_field, verify_halfoverlap,
    verify_rejected, CoveringResult, TieRule,
};
use crate::experiments::weak_type_sweep;
use crate::lattice::{enumerate_rects, rect_sum_bruteforce, GridFunction, Lattice, Rect, RectFamily, SummedTable};
use crate::maximal::{frac_max_field, frac_max_field_naive, superlevel, FracExponents, MaxParams};
use crate::shear::{is_lattice_bijection, random_bilinear, shear_pullback, verify_triangular, Boundary, ShearMap};
use crate::synth::{random_rects, TestFunction};
use crate::covering::ScanOrder;

/// Relative tolerance for quantities that agree up to summation order.
pub const REL_TOL: f64 = 1e-12;

/// `|a - b| <= tol * max(|a|, |b|)`, with exact equality required at zero.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Faults {
    /// Select with `overlap < vol / 2` instead of `<=`.
    pub strict_tie: bool,
    /// Sample sheared functions with the zero boundary instead of the torus.
    pub no_wrap: bool,
}

impl Faults {
    pub fn tie_rule(self) -> TieRule {
        if self.strict_tie {
            TieRule::RejectHalf
        } else {
            TieRule::AcceptHalf
        }
    }

    pub fn boundary(self) -> Boundary {
        if self.no_wrap {
            Boundary::Zero
        } else {
            Boundary::Torus
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Side of the 2D lattices.
    pub side_2d: usize,
    /// Side of the 3D lattices.
    pub side_3d: usize,
    /// Random instances per randomized check.
    pub trials: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 2024,
            side_2d: 8,
            side_3d: 6,
            trials: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckOutcome {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:4} {:<9} {:<28} {}",
            if self.passed { "ok" } else { "FAIL" },
            self.module,
            self.name,
            self.detail
        )
    }
}

type CheckResult = std::result::Result<String, String>;

fn outcome(module: &'static str, name: &'static str, result: CheckResult) -> CheckOutcome {
    let (passed, detail) = match result {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    CheckOutcome {
        module,
        name,
        passed,
        detail,
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn run_suite(cfg: &SuiteConfig, faults: Faults) -> Vec<CheckOutcome> {
    vec![
        outcome("lattice", "rect-sum-oracle", check_rect_sum_oracle(cfg)),
        outcome("lattice", "additivity", check_additivity(cfg)),
        outcome("lattice", "enumeration-count", check_enumeration_count(cfg)),
        outcome("lattice", "family-inclusion", check_family_inclusion(cfg)),
        outcome("shear", "bijection", check_bijection(cfg)),
        outcome("shear", "lp-invariance", check_lp_invariance(cfg, faults.boundary())),
        outcome("shear", "tail-idempotence", check_tail_idempotence(cfg)),
        outcome("shear", "triangular", check_triangular(cfg)),
        outcome("maximal", "field-oracle", check_field_oracle(cfg)),
        outcome("maximal", "family-sandwich", check_family_sandwich(cfg)),
        outcome("maximal", "monotonicity", check_monotonicity(cfg)),
        outcome("maximal", "homogeneity", check_homogeneity(cfg)),
        outcome("maximal", "superlevel-nesting", check_superlevel_nesting(cfg)),
        outcome("covering", "hand-example", check_hand_example(faults.tie_rule())),
        outcome("covering", "random-families", check_random_families(cfg, faults.tie_rule())),
        outcome("covering", "est2-dilation", check_est2_dilation(cfg, faults.tie_rule())),
        outcome("cli", "weak-type-sweep", check_weak_type_sweep(cfg)),
    ]
}

fn random_function(lat: &Lattice, rng: &mut ChaCha8Rng) -> GridFunction {
    GridFunction::from_fn(lat.clone(), |_| rng.random::<f64>()).expect("finite samples")
}

fn random_rect(lat: &Lattice, rng: &mut ChaCha8Rng) -> Rect {
    let sides: Vec<(usize, usize)> = lat
        .extents()
        .iter()
        .map(|&e| {
            let a = rng.random_range(0..e);
            let b = rng.random_range(0..e);
            (a.min(b), a.max(b) + 1)
        })
        .collect();
    Rect::from_sides(&sides).expect("nonempty sides")
}

fn test_lattices(cfg: &SuiteConfig) -> [Lattice; 2] {
    [
        Lattice::cube(2, cfg.side_2d).expect("positive side"),
        Lattice::cube(3, cfg.side_3d).expect("positive side"),
    ]
}

fn check_rect_sum_oracle(cfg: &SuiteConfig) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checked = 0;
    for lat in test_lattices(cfg) {
        let f = random_function(&lat, &mut rng);
        let table = SummedTable::build(&f);
        for rect in enumerate_rects(&lat, RectFamily::All, None) {
            let fast = table.rect_sum(&rect);
            let slow = rect_sum_bruteforce(&f, &rect);
            ensure((fast - slow).abs() <= REL_TOL * (1.0 + slow), || {
                format!("{rect}: table {fast} vs direct {slow}")
            })?;
            checked += 1;
        }
    }
    Ok(format!("{checked} boxes"))
}

fn check_additivity(cfg: &SuiteConfig) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 1);
    for lat in test_lattices(cfg) {
        let f = random_function(&lat, &mut rng);
        let table = SummedTable::build(&f);
        for _ in 0..cfg.trials * 10 {
            let rect = random_rect(&lat, &mut rng);
            for axis in 0..lat.dims() {
                if rect.side(axis) < 2 {
                    continue;
                }
                let cut = rng.random_range(rect.lo()[axis] + 1..rect.hi()[axis]);
                let mut left_hi = rect.hi().to_vec();
                left_hi[axis] = cut;
                let mut right_lo = rect.lo().to_vec();
                right_lo[axis] = cut;
                let left = Rect::new(rect.lo().to_vec(), left_hi).expect("nonempty");
                let right = Rect::new(right_lo, rect.hi().to_vec()).expect("nonempty");
                let whole = table.rect_sum(&rect);
                let parts = table.rect_sum(&left) + table.rect_sum(&right);
                ensure((whole - parts).abs() <= REL_TOL * (1.0 + whole), || {
                    format!("{rect} split on axis {axis} at {cut}: {whole} vs {parts}")
                })?;
            }
        }
    }
    Ok("splits agree".into())
}

fn check_enumeration_count(cfg: &SuiteConfig) -> CheckResult {
    for n in 1..=cfg.side_2d {
        let lat = Lattice::cube(1, n).expect("positive side");
        let count = enumerate_rects(&lat, RectFamily::All, None).count();
        ensure(count == n * (n + 1) / 2, || format!("extent {n}: {count} intervals"))?;
    }
    let lat = Lattice::new(vec![cfg.side_2d, cfg.side_3d, 3]).expect("positive extents");
    let per_axis: usize = lat.extents().iter().map(|&e| e * (e + 1) / 2).product();
    let count = enumerate_rects(&lat, RectFamily::All, None).count();
    ensure(count == per_axis, || format!("product lattice: {count} vs {per_axis}"))?;
    Ok(format!("{count} boxes on {:?}", lat.extents()))
}

fn check_family_inclusion(cfg: &SuiteConfig) -> CheckResult {
    for lat in test_lattices(cfg) {
        for rect in enumerate_rects(&lat, RectFamily::Dyadic, None) {
            ensure(RectFamily::DyadicSides.contains(&lat, &rect), || format!("dyadic {rect} not in dyadic-sides"))?;
        }
        for rect in enumerate_rects(&lat, RectFamily::DyadicSides, None) {
            ensure(RectFamily::All.contains(&lat, &rect), || format!("{rect} not in all"))?;
        }
    }
    Ok("dyadic <= dyadic-sides <= all".into())
}

fn random_shears(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Vec<ShearMap> {
    let mut out = vec![ShearMap::heisenberg(1.0).expect("nonzero mu")];
    out.extend((0..cfg.trials).map(|_| random_bilinear(3, 2.0, rng).expect("valid bilinear")));
    out
}

fn check_bijection(cfg: &SuiteConfig) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 2);
    let lat = Lattice::cube(3, cfg.side_3d).expect("positive side");
    for rho in random_shears(cfg, &mut rng) {
        let x: Vec<usize> = lat.extents().iter().map(|&e| rng.random_range(0..e)).collect();
        ensure(is_lattice_bijection(&lat, &rho, &x), || {
            format!("{} at x = {x:?} is not a bijection", rho.label())
        })?;
    }
    Ok(format!("{} shears", cfg.trials + 1))
}

fn check_lp_invariance(cfg: &SuiteConfig, boundary: Boundary) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 3);
    let lat = Lattice::cube(3, cfg.side_3d).expect("positive side");
    let mut worst: f64 = 0.0;
    for rho in random_shears(cfg, &mut rng) {
        let f = random_function(&lat, &mut rng);
        let tail = [rng.random_range(0..lat.extent(1)), rng.random_range(0..lat.extent(2))];
        let g = shear_pullback(&f, &rho, &tail, boundary).map_err(|e| e.to_string())?;
        for p in [1.0, 1.5, 2.0, 3.0] {
            let a = f.lp_norm(p).expect("valid exponent");
            let b = g.lp_norm(p).expect("valid exponent");
            worst = worst.max((a - b).abs() / a);
            ensure(rel_close(a, b, REL_TOL), || {
                format!("{} tail {tail:?} p = {p}: {b} vs {a}", rho.label())
            })?;
        }
    }
    Ok(format!("worst relative gap {worst:.1e}"))
}

fn check_tail_idempotence(cfg: &SuiteConfig) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 4);
    let lat = Lattice::cube(3, cfg.side_3d).expect("positive side");
    let f = random_function(&lat, &mut rng);
    for rho in random_shears(cfg, &mut rng) {
        let tail = [rng.random_range(0..lat.extent(1)), rng.random_range(0..lat.extent(2))];
        let reference = shear_pullback(&f, &rho, &tail, Boundary::Torus).map_err(|e| e.to_string())?;
        for x0 in 0..lat.extent(0) {
            let x = [x0, tail[0], tail[1]];
            let same = lat.points().all(|y| {
                crate::shear::sheared_sample(&f, &rho, &x, &y, Boundary::Torus) == reference.get(&y)
            });
            ensure(same, || format!("{} differs at x = {x:?}", rho.label()))?;
        }
    }
    Ok("pullback depends on the tail only".into())
}

fn check_triangular(cfg: &SuiteConfig) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 5);
    let lat = Lattice::cube(3, cfg.side_3d).expect("positive side");
    for (i, rho) in random_shears(cfg, &mut rng).iter().enumerate() {
        verify_triangular(rho, &lat, 50, cfg.seed + i as u64).map_err(|v| v.to_string())?;
    }
    Ok("all probes passed".into())
}

fn oracle_instances(cfg: &SuiteConfig) -> Vec<(GridFunction, ShearMap)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 6);
    let [lat2, lat3] = test_lattices(cfg);
    vec![
        (random_function(&lat2, &mut rng), ShearMap::zero(2).expect("two axes")),
        (random_function(&lat3, &mut rng), ShearMap::heisenberg(1.0).expect("nonzero mu")),
    ]
}

fn check_field_oracle(cfg: &SuiteConfig) -> CheckResult {
    let mut points = 0;
    for (f, rho) in oracle_instances(cfg) {
        for alpha in [0.0, 0.5] {
            let params = MaxParams::new(alpha, RectFamily::All).expect("alpha in range");
            let fast = frac_max_field(&f, &rho, &params).map_err(|e| e.to_string())?;
            let slow = frac_max_field_naive(&f, &rho, &params).map_err(|e| e.to_string())?;
            for (i, (a, b)) in fast.values().iter().zip(&slow).enumerate() {
                ensure(rel_close(*a, *b, REL_TOL), || {
                    format!("{} alpha {alpha} at {:?}: {a} vs {b}", rho.label(), f.lattice().point(i))
                })?;
            }
            points += slow.len();
        }
    }
    Ok(format!("{points} points"))
}

fn check_family_sandwich(cfg: &SuiteConfig) -> CheckResult {
    for (f, rho) in oracle_instances(cfg) {
        let n = f.lattice().dims() as f64;
        for alpha in [0.0, 0.5] {
            let field = |family| {
                frac_max_field(&f, &rho, &MaxParams::new(alpha, family).expect("alpha in range"))
                    .expect("dimensions agree")
            };
            let all = field(RectFamily::All);
            let sides = field(RectFamily::DyadicSides);
            let factor = 2f64.powf(n * (1.0 - alpha));
            for (i, (&a, &s)) in all.values().iter().zip(sides.values()).enumerate() {
                ensure(s <= a && a <= factor * s, || {
                    format!("alpha {alpha} at {:?}: dyadic-sides {s}, all {a}", f.lattice().point(i))
                })?;
            }
        }
    }
    Ok("dyadic-sides <= all <= 2^(N(1-alpha)) dyadic-sides".into())
}

fn check_monotonicity(cfg: &SuiteConfig) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 7);
    for (f, rho) in oracle_instances(cfg) {
        let g = GridFunction::new(
            f.lattice().clone(),
            f.values().iter().map(|v| v + rng.random::<f64>()).collect(),
        )
        .expect("finite samples");
        let params = MaxParams::new(0.5, RectFamily::DyadicSides).expect("alpha in range");
        let mf = frac_max_field(&f, &rho, &params).map_err(|e| e.to_string())?;
        let mg = frac_max_field(&g, &rho, &params).map_err(|e| e.to_string())?;
        ensure(mf.values().iter().zip(mg.values()).all(|(a, b)| a <= b), || {
            format!("{}: f <= g but Mf > Mg somewhere", rho.label())
        })?;
    }
    Ok("f <= g implies Mf <= Mg".into())
}

fn check_homogeneity(cfg: &SuiteConfig) -> CheckResult {
    for (f, rho) in oracle_instances(cfg) {
        for c in [0.37, 3.0] {
            let params = MaxParams::new(0.5, RectFamily::All).expect("alpha in range");
            let scaled = f.scaled(c).expect("positive factor");
            let a = frac_max_field(&scaled, &rho, &params).map_err(|e| e.to_string())?;
            let b = frac_max_field(&f, &rho, &params).map_err(|e| e.to_string())?;
            for (x, y) in a.values().iter().zip(b.values()) {
                ensure(rel_close(*x, c * y, REL_TOL), || format!("c = {c}: {x} vs {}", c * y))?;
            }
        }
    }
    Ok("M(cf) = c Mf".into())
}

fn check_superlevel_nesting(cfg: &SuiteConfig) -> CheckResult {
    let (f, rho) = oracle_instances(cfg).pop().expect("two instances");
    let field = frac_max_field(&f, &rho, &MaxParams::strong(RectFamily::DyadicSides)).map_err(|e| e.to_string())?;
    let max = field.max();
    let mut previous: Option<Vec<usize>> = None;
    for i in 1..=20 {
        let lambda = max * i as f64 / 20.0;
        let level = superlevel(&field, lambda).map_err(|e| e.to_string())?;
        if let Some(prev) = &previous {
            ensure(level.points.iter().all(|p| prev.binary_search(p).is_ok()), || {
                format!("level {lambda} not inside the previous level")
            })?;
        }
        previous = Some(level.points);
    }
    Ok("higher levels nest".into())
}

fn verify_all(res: &CoveringResult) -> std::result::Result<(), String> {
    verify_halfoverlap(res).map_err(|v| v.to_string())?;
    verify_rejected(res).map_err(|v| v.to_string())?;
    verify_halfmax(res).map_err(|v| v.to_string())?;
    Ok(())
}

fn check_hand_example(tie: TieRule) -> CheckResult {
    let lat = Lattice::cube(2, 4).expect("positive side");
    let rects = crate::format::parse_rects("0 2 0 2\n0 2 0 2\n1 3 0 2\n").expect("valid text");
    let res = select_with(&rects, &lat, tie).map_err(|e| e.to_string())?;
    verify_all(&res)?;
    ensure(res.selected() == [0, 2], || format!("selected {:?}, expected [0, 2]", res.selected()))?;
    let ratio = overlap_lp(&res, 2.0).expect("p > 1").ratio;
    ensure((ratio - 2f64.sqrt()).abs() <= REL_TOL, || format!("p = 2 ratio {ratio}"))?;
    Ok("selected [0, 2], ratio sqrt 2".into())
}

fn check_random_families(cfg: &SuiteConfig, tie: TieRule) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 8);
    let lattices = [Lattice::cube(2, 64).expect("side"), Lattice::cube(3, 16).expect("side")];
    for t in 0..cfg.trials {
        let lat = &lattices[t % 2];
        let count = rng.random_range(1..=200);
        let rects = random_rects(lat, count, &mut rng);
        let res = select_with(&rects, lat, tie).map_err(|e| e.to_string())?;
        verify_all(&res).map_err(|e| format!("family {t}: {e}"))?;
        ensure(union_volumes(&res).ratio >= 1.0, || format!("family {t}: union ratio below 1"))?;
        if t == 0 {
            verify_halfmax_field(&res, RectFamily::All).map_err(|v| v.to_string())?;
        }
    }
    // half-overlap ties on a line, each exactly half covered by the previous
    let lat = Lattice::cube(1, 16).expect("side");
    let ties: Vec<Rect> = (0..7).map(|i| Rect::from_sides(&[(2 * i, 2 * i + 4)]).expect("nonempty")).collect();
    let res = select_with(&ties, &lat, tie).map_err(|e| e.to_string())?;
    verify_all(&res).map_err(|e| format!("tie chain: {e}"))?;
    Ok(format!("{} families", cfg.trials))
}

/// Maximum `L^p` overlap ratio over seeded families, on a lattice of the
/// given side.
pub fn max_overlap_ratio(dims: usize, side: usize, families: usize, seed: u64, p: f64, tie: TieRule) -> f64 {
    let lat = Lattice::cube(dims, side).expect("positive side");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..families {
        let count = rng.random_range(1..=500);
        let rects = random_rects(&lat, count, &mut rng);
        let res = select_with(&rects, &lat, tie).expect("rectangles fit the lattice");
        worst = worst.max(overlap_lp(&res, p).expect("p > 1").ratio);
    }
    worst
}

fn check_est2_dilation(cfg: &SuiteConfig, tie: TieRule) -> CheckResult {
    let families = cfg.trials.max(1);
    let a = max_overlap_ratio(2, 32, families, cfg.seed, 2.0, tie);
    let b = max_overlap_ratio(2, 64, families, cfg.seed, 2.0, tie);
    ensure(a.is_finite() && a >= 1.0 && b >= 1.0, || format!("ratios {a}, {b}"))?;
    ensure((a - b).abs() <= 0.10 * a.max(b), || format!("max ratio {a} on 32^2 vs {b} on 64^2"))?;
    Ok(format!("max ratio {a:.4} vs {b:.4}"))
}

fn check_weak_type_sweep(cfg: &SuiteConfig) -> CheckResult {
    let lat = Lattice::cube(3, cfg.side_3d.max(4)).expect("positive side");
    let f = TestFunction::Cube(lat.extent(0) / 2).generate(&lat, cfg.seed).map_err(|e| e.to_string())?;
    let rho = ShearMap::heisenberg(1.0).expect("nonzero mu");
    let exps = FracExponents::new(2.0, 2.0).expect("valid exponents");
    let params = MaxParams::strong(RectFamily::DyadicSides);
    let run = || weak_type_sweep(&f, &rho, &exps, &params, None, ScanOrder::VolumeDesc).map_err(|e| e.to_string());
    let first = run()?;
    ensure(first.to_csv() == run()?.to_csv(), || "sweep output not reproducible".into())?;
    ensure(first.records.windows(2).all(|w| w[1].vol_u <= w[0].vol_u), || {
        "level volume increased with lambda".into()
    })?;
    let max = first.max_score();
    ensure(max.is_finite() && max > 0.0, || format!("max score {max}"))?;
    Ok(format!("max score {max:.4}"))
}
