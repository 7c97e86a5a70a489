//! Acceptance criteria, one line per criterion. Run with
//! `cargo test -p maxrect-core --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use maxrect::covering::{
    overlap_lp, select, select_with, union_volumes, verify_halfmax, verify_halfoverlap, verify_rejected,
    ScanOrder, TieRule,
};
use maxrect::experiments::{default_lambda_grid, scaling_run, weak_type_sweep};
use maxrect::format::parse_rects;
use maxrect::lattice::{GridFunction, Lattice, Rect, RectFamily, RectPoints};
use maxrect::maximal::{frac_max_field, frac_max_field_naive, superlevel, witnesses_for, FracExponents, MaxParams};
use maxrect::shear::{random_bilinear, shear_pullback, BilinearTerm, Boundary, ShearMap};
use maxrect::synth::{random_rects, TestFunction};
use maxrect::verify::{rel_close, run_suite, Faults, SuiteConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_601;
const EXACT_REL: f64 = 1e-12;
const HOMOGENEITY_REL: f64 = 1e-9;
const EST2_STABILITY: f64 = 0.10;
const SCALING_SPREAD: f64 = 1.33;
const FAMILIES: usize = 200;
const MAX_RECTS: usize = 500;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn uniform(lat: &Lattice, rng: &mut ChaCha8Rng) -> GridFunction {
    GridFunction::from_fn(lat.clone(), |_| rng.random::<f64>()).unwrap()
}

/// Criterion 1: shear measure preservation.
fn shear_invariance(boundary: Boundary) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let lat = Lattice::cube(3, 8).unwrap();
    let mut worst: f64 = 0.0;
    for trial in 0..50 {
        let f = uniform(&lat, &mut rng);
        let rho = random_bilinear(3, 2.0, &mut rng).unwrap();
        let tail = [rng.random_range(0..8), rng.random_range(0..8)];
        let g = shear_pullback(&f, &rho, &tail, boundary).unwrap();
        for p in [1.0, 1.5, 2.0, 3.0] {
            let (a, b) = (f.lp_norm(p).unwrap(), g.lp_norm(p).unwrap());
            worst = worst.max((a - b).abs() / a);
            ensure(rel_close(a, b, EXACT_REL), || {
                format!("trial {trial}, tail {tail:?}, p = {p}: {b} vs {a}")
            })?;
        }
    }
    Ok(format!("50 triples x 4 exponents, worst gap {worst:.1e}"))
}

/// The oracle instances: 8^2 with a 2D bilinear twist and 6^3 with the
/// Heisenberg shear, both with uniform random samples.
fn oracle_instances() -> Vec<(GridFunction, ShearMap)> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 2);
    let lat2 = Lattice::cube(2, 8).unwrap();
    let lat3 = Lattice::cube(3, 6).unwrap();
    let twist2 = ShearMap::bilinear(
        2,
        vec![vec![BilinearTerm {
            x_axis: 1,
            y_axis: 1,
            coeff: 1.0,
        }]],
    )
    .unwrap();
    vec![
        (uniform(&lat2, &mut rng), ShearMap::zero(2).unwrap()),
        (uniform(&lat2, &mut rng), twist2),
        (uniform(&lat3, &mut rng), ShearMap::heisenberg(1.0).unwrap()),
    ]
}

/// Criterion 2: summed-table field equals the naive field.
fn field_oracle() -> Outcome {
    let mut points = 0;
    for (f, rho) in oracle_instances() {
        for alpha in [0.0, 0.5] {
            let params = MaxParams::new(alpha, RectFamily::All).unwrap();
            let fast = frac_max_field(&f, &rho, &params).unwrap();
            let slow = frac_max_field_naive(&f, &rho, &params).unwrap();
            for (i, (a, b)) in fast.values().iter().zip(&slow).enumerate() {
                ensure(rel_close(*a, *b, EXACT_REL), || {
                    format!("{} alpha {alpha} at {:?}: {a} vs {b}", rho.label(), f.lattice().point(i))
                })?;
            }
            points += slow.len();
        }
    }
    Ok(format!("{points} point values agree"))
}

/// Criterion 3: DYADIC_SIDES <= ALL <= 2^{N(1-alpha)} DYADIC_SIDES.
fn family_sandwich() -> Outcome {
    let mut tightest: f64 = 0.0;
    for (f, rho) in oracle_instances() {
        let n = f.lattice().dims() as f64;
        for alpha in [0.0, 0.5] {
            let field = |family| frac_max_field(&f, &rho, &MaxParams::new(alpha, family).unwrap()).unwrap();
            let all = field(RectFamily::All);
            let sides = field(RectFamily::DyadicSides);
            let factor = 2f64.powf(n * (1.0 - alpha));
            for (i, (&a, &s)) in all.values().iter().zip(sides.values()).enumerate() {
                ensure(s <= a && a <= factor * s, || {
                    format!("{} alpha {alpha} at {:?}: sides {s}, all {a}", rho.label(), f.lattice().point(i))
                })?;
                tightest = tightest.max(a / (factor * s));
            }
        }
    }
    Ok(format!("largest all/(bound) = {tightest:.4}"))
}

/// Criterion 4: M^alpha chi_Q = vol(Q)^alpha on Q.
fn fractional_value_law() -> Outcome {
    let lat = Lattice::cube(2, 16).unwrap();
    let rho = ShearMap::zero(2).unwrap();
    let mut checked = 0;
    for side in [2usize, 4] {
        for corner in [0usize, 5] {
            let q = Rect::from_sides(&[(corner, corner + side), (corner, corner + side)]).unwrap();
            let f = GridFunction::indicator(lat.clone(), &q).unwrap();
            for alpha in [0.0, 0.25, 0.5, 0.75] {
                let field = frac_max_field(&f, &rho, &MaxParams::new(alpha, RectFamily::All).unwrap()).unwrap();
                let expected = q.volume().powf(alpha);
                for x in RectPoints::new(&q) {
                    let v = field.value(&x);
                    ensure(rel_close(v, expected, EXACT_REL), || {
                        format!("Q = {q}, alpha {alpha}, x = {x:?}: {v} vs {expected}")
                    })?;
                    checked += 1;
                }
            }
        }
    }
    let q = Rect::from_sides(&[(0, 4), (0, 4)]).unwrap();
    let f = GridFunction::indicator(lat, &q).unwrap();
    let v = frac_max_field(&f, &rho, &MaxParams::new(0.5, RectFamily::All).unwrap())
        .unwrap()
        .value(&[1, 2]);
    ensure(rel_close(v, 4.0, EXACT_REL), || format!("r = 4, alpha = 1/2 gave {v}"))?;
    Ok(format!("{checked} points, r = 4 alpha = 1/2 gives {v}"))
}

fn family_lattice(t: usize, scale: usize) -> Lattice {
    if t.is_multiple_of(2) {
        Lattice::cube(2, 64 * scale).unwrap()
    } else {
        Lattice::cube(3, 16 * scale).unwrap()
    }
}

fn family(t: usize, scale: usize) -> (Lattice, Vec<Rect>) {
    let lat = family_lattice(t, scale);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + t as u64);
    let count = rng.random_range(1..=MAX_RECTS);
    let rects = random_rects(&lat, count, &mut rng);
    (lat, rects)
}

/// Criterion 5: exact verification of the selection on random families.
fn covering_correctness(tie: TieRule) -> Outcome {
    let (lat, rects) = {
        let text = "0 2 0 2\n0 2 0 2\n1 3 0 2\n";
        (Lattice::cube(2, 4).unwrap(), parse_rects(text).unwrap())
    };
    let res = select_with(&rects, &lat, tie).unwrap();
    ensure(res.selected() == [0, 2], || format!("hand example selected {:?}", res.selected()))?;
    ensure(union_volumes(&res).ratio == 1.0, || "hand example EST1 ratio is not 1".into())?;
    let r2 = overlap_lp(&res, 2.0).unwrap().ratio;
    ensure((r2 - 2f64.sqrt()).abs() <= EXACT_REL, || format!("hand example p = 2 ratio {r2}"))?;

    let mut total = 0;
    for t in 0..FAMILIES {
        let (lat, rects) = family(t, 1);
        total += rects.len();
        let res = select_with(&rects, &lat, tie).unwrap();
        for verdict in [verify_halfoverlap(&res), verify_rejected(&res), verify_halfmax(&res)] {
            verdict.map_err(|v| format!("family {t} on {:?}: {v}", lat.extents()))?;
        }
    }
    // a chain of exact half overlaps exercises the tie rule
    let line = Lattice::cube(1, 32).unwrap();
    let chain: Vec<Rect> = (0..14).map(|i| Rect::from_sides(&[(2 * i, 2 * i + 4)]).unwrap()).collect();
    let res = select_with(&chain, &line, tie).unwrap();
    for verdict in [verify_halfoverlap(&res), verify_rejected(&res), verify_halfmax(&res)] {
        verdict.map_err(|v| format!("half-overlap chain: {v}"))?;
    }
    Ok(format!("{FAMILIES} families, {total} rectangles, hand example ok"))
}

/// Criterion 6: the L^p overlap ratio is finite, at least 1, and its maximum
/// is stable when lattice and rectangles are doubled.
fn est2_boundedness() -> Outcome {
    let ps = [1.5, 2.0, 3.0];
    // [lattice kind][scale][p]
    let mut maxima = [[[0.0f64; 3]; 2]; 2];
    for t in 0..FAMILIES {
        for (s, scale) in [1usize, 2].into_iter().enumerate() {
            let (lat, rects) = family(t, scale);
            let res = select(&rects, &lat).unwrap();
            for (k, &p) in ps.iter().enumerate() {
                let ratio = overlap_lp(&res, p).unwrap().ratio;
                ensure(ratio.is_finite() && ratio >= 1.0, || format!("family {t}, p = {p}: ratio {ratio}"))?;
                maxima[t % 2][s][k] = maxima[t % 2][s][k].max(ratio);
            }
        }
    }
    let mut summary = Vec::new();
    for (kind, name) in ["64^2", "16^3"].iter().enumerate() {
        for (k, &p) in ps.iter().enumerate() {
            let (a, b) = (maxima[kind][0][k], maxima[kind][1][k]);
            ensure((a - b).abs() <= EST2_STABILITY * a.max(b), || {
                format!("{name} p = {p}: max ratio {a} vs {b} after doubling")
            })?;
            summary.push(format!("{name} p={p}: {a:.3}/{b:.3}"));
        }
    }
    Ok(summary.join(", "))
}

/// Criterion 7: weak-type sweep for the Heisenberg maximal function.
fn weak_type() -> Outcome {
    let lat = Lattice::cube(3, 16).unwrap();
    let f = TestFunction::Cube(4).generate(&lat, SEED).unwrap();
    let rho = ShearMap::heisenberg(1.0).unwrap();
    let exps = FracExponents::new(2.0, 2.0).unwrap();
    let params = MaxParams::strong(RectFamily::DyadicSides);

    let field = frac_max_field(&f, &rho, &params).unwrap();
    let lambdas = default_lambda_grid(&field).unwrap();
    for &lambda in &lambdas {
        let level = superlevel(&field, lambda).unwrap();
        let witnesses = witnesses_for(&level, &field).map_err(|e| e.to_string())?;
        let mut covered = vec![false; lat.len()];
        for w in &witnesses {
            w.rect.for_each_run(&lat, |s, l| covered[s..s + l].fill(true));
        }
        ensure(level.points.iter().all(|&i| covered[i]), || format!("cover inclusion fails at {lambda}"))?;
    }

    let report = weak_type_sweep(&f, &rho, &exps, &params, Some(&lambdas), ScanOrder::VolumeDesc)
        .map_err(|e| e.to_string())?;
    ensure(report.records.windows(2).all(|w| w[1].vol_u <= w[0].vol_u), || {
        "vol(U) increases with lambda".into()
    })?;
    let max = report.max_score();
    ensure(max.is_finite() && max > 0.0, || format!("max score {max}"))?;

    let doubled_lambdas: Vec<f64> = lambdas.iter().map(|l| 2.0 * l).collect();
    let doubled = weak_type_sweep(
        &f.scaled(2.0).unwrap(),
        &rho,
        &exps,
        &params,
        Some(&doubled_lambdas),
        ScanOrder::VolumeDesc,
    )
    .map_err(|e| e.to_string())?;
    for (a, b) in report.records.iter().zip(&doubled.records) {
        ensure(rel_close(a.score, b.score, HOMOGENEITY_REL), || {
            format!("score {} at lambda {} vs {} after doubling", a.score, a.lambda, b.score)
        })?;
    }
    ensure(rel_close(max, doubled.max_score(), HOMOGENEITY_REL), || "max score changed".into())?;
    Ok(format!("{} levels, max score {max:.6}", lambdas.len()))
}

/// Criterion 8: r-independence of ||M^alpha chi_Q||_q / ||chi_Q||_p.
fn scaling_law() -> Outcome {
    let lat = Lattice::cube(2, 64).unwrap();
    let exps = FracExponents::new(4.0 / 3.0, 4.0).unwrap();
    let params = MaxParams::new(exps.alpha(), RectFamily::DyadicSides).unwrap();
    let rows = scaling_run(&lat, &ShearMap::zero(2).unwrap(), &exps, &params, &[4, 8, 16]).map_err(|e| e.to_string())?;
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    ensure(hi / lo < SCALING_SPREAD, || format!("ratios {ratios:?} spread {:.3}", hi / lo))?;
    Ok(format!(
        "ratios r=4,8,16: {:.4}, {:.4}, {:.4} (spread {:.3})",
        ratios[0],
        ratios[1],
        ratios[2],
        hi / lo
    ))
}

/// Criterion 9: injected faults are caught by the checks above and by the
/// verify suite.
fn mutation_sensitivity() -> Outcome {
    ensure(covering_correctness(TieRule::RejectHalf).is_err(), || {
        "strict tie rule passed the covering criterion".into()
    })?;
    ensure(shear_invariance(Boundary::Zero).is_err(), || {
        "unwrapped shear passed the invariance criterion".into()
    })?;
    let cfg = SuiteConfig::default();
    let clean = run_suite(&cfg, Faults::default());
    ensure(clean.iter().all(|o| o.passed), || {
        let failed: Vec<String> = clean.iter().filter(|o| !o.passed).map(|o| o.to_string()).collect();
        format!("clean suite failed: {failed:?}")
    })?;
    let failing = |faults| -> Vec<&'static str> {
        run_suite(&cfg, faults)
            .into_iter()
            .filter(|o| !o.passed)
            .map(|o| o.name)
            .collect()
    };
    let tie = failing(Faults {
        strict_tie: true,
        no_wrap: false,
    });
    ensure(tie.contains(&"hand-example"), || format!("strict tie fault not caught: {tie:?}"))?;
    let wrap = failing(Faults {
        strict_tie: false,
        no_wrap: true,
    });
    ensure(wrap.contains(&"lp-invariance"), || format!("no-wrap fault not caught: {wrap:?}"))?;
    Ok(format!("strict tie fails {tie:?}; no wrap fails {wrap:?}"))
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "shear measure preservation",
            budget: Duration::from_secs(5),
            run: || shear_invariance(Boundary::Torus),
        },
        Criterion {
            id: 2,
            name: "field oracle equivalence",
            budget: Duration::from_secs(60),
            run: field_oracle,
        },
        Criterion {
            id: 3,
            name: "family sandwich",
            budget: Duration::from_secs(60),
            run: family_sandwich,
        },
        Criterion {
            id: 4,
            name: "fractional value law",
            budget: Duration::from_secs(60),
            run: fractional_value_law,
        },
        Criterion {
            id: 5,
            name: "covering selection correctness",
            budget: Duration::from_secs(120),
            run: || covering_correctness(TieRule::AcceptHalf),
        },
        Criterion {
            id: 6,
            name: "EST2 boundedness and dilation stability",
            budget: Duration::from_secs(300),
            run: est2_boundedness,
        },
        Criterion {
            id: 7,
            name: "weak-type sweep",
            budget: Duration::from_secs(600),
            run: weak_type,
        },
        Criterion {
            id: 8,
            name: "scaling law",
            budget: Duration::from_secs(300),
            run: scaling_law,
        },
        Criterion {
            id: 9,
            name: "mutation sensitivity",
            budget: Duration::from_secs(300),
            run: mutation_sensitivity,
        },
    ];

    let mut failures = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            if elapsed > c.budget {
                Err(format!("{detail}; took {elapsed:.1?}, budget {:?}", c.budget))
            } else {
                Ok(detail)
            }
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {} ({}): {detail} [{elapsed:.2?}]", c.id, c.name),
            Err(detail) => {
                failures += 1;
                println!("FAIL criterion {} ({}): {detail} [{elapsed:.2?}]", c.id, c.name);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
