use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use maxrect::covering::ScanOrder;
use maxrect::experiments::{covering_run, lambda_grid, scaling_csv, scaling_run, weak_type_sweep, FieldSummary};
use maxrect::format::{format_samples, load_shear, read_grid, read_rects};
use maxrect::maximal::{frac_max_field, FracExponents, MaxParams};
use maxrect::shear::Boundary;
use maxrect::synth::{random_rects, TestFunction};
use maxrect::verify::{run_suite, Faults, SuiteConfig};
use maxrect::{Error, GridFunction, Lattice, RectFamily, ShearMap};

use crate::{CoveringArgs, InputArgs, MaxfieldArgs, OperatorArgs, ScalingArgs, VerifyArgs, WeaktypeArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Invariant(String),
    #[error("every level set of the sweep is empty")]
    EmptySweep,
    #[error("{0} invariant checks failed")]
    VerifyFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::VerifyFailed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Invariant(_) => 4,
            CliError::EmptySweep => 5,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => CliError::Io(e.to_string()),
            Error::Invariant(_) | Error::NoWitness { .. } => CliError::Invariant(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| io_error(p, e)),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

fn load_input(input: &InputArgs) -> Result<GridFunction, CliError> {
    match (&input.grid, &input.synth) {
        (Some(path), None) => read_grid(path).map_err(|e| match e {
            Error::Io(io) => io_error(path, io),
            other => other.into(),
        }),
        (None, Some(recipe)) => {
            let extents = input
                .extents
                .clone()
                .ok_or_else(|| CliError::Config("--synth needs --extents".into()))?;
            let lattice = Lattice::new(extents)?;
            let recipe: TestFunction = recipe.parse()?;
            Ok(recipe.generate(&lattice, input.seed)?)
        }
        _ => Err(CliError::Config("give exactly one of --grid or --synth".into())),
    }
}

fn parse_order(s: &str) -> Result<ScanOrder, CliError> {
    Ok(s.parse()?)
}

fn shear_for(op: &OperatorArgs, lat: &Lattice) -> Result<ShearMap, CliError> {
    load_shear(&op.shear, lat.dims()).map_err(|e| match e {
        Error::Io(io) => CliError::Io(format!("{}: {io}", op.shear)),
        other => other.into(),
    })
}

fn family_for(op: &OperatorArgs, lat: &Lattice) -> Result<RectFamily, CliError> {
    match &op.family {
        Some(name) => Ok(name.parse()?),
        None => Ok(RectFamily::default_for(lat)),
    }
}

fn params_for(op: &OperatorArgs, alpha: f64, lat: &Lattice) -> Result<MaxParams, CliError> {
    let boundary: Boundary = op.boundary.parse()?;
    let params = MaxParams::new(alpha, family_for(op, lat)?).map_err(|e| CliError::Invariant(e.to_string()))?;
    Ok(params.with_boundary(boundary))
}

fn exponents(op: &OperatorArgs) -> Result<FracExponents, CliError> {
    FracExponents::from_any(op.p, op.q, op.alpha).map_err(|e| CliError::Invariant(e.to_string()))
}

/// Alpha for commands that need no `p, q`: the given alpha (checked against
/// `p, q` when those are also given), else `1/p - 1/q`, else 0.
fn alpha_only(op: &OperatorArgs) -> Result<f64, CliError> {
    match (op.p, op.q, op.alpha) {
        (None, None, Some(a)) => Ok(a),
        (None, None, None) => Ok(0.0),
        _ => Ok(exponents(op)?.alpha()),
    }
}

fn write_config(out: Option<&Path>, lines: &[(&str, String)]) -> Result<(), CliError> {
    let text: String = lines.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    info!("configuration:\n{text}");
    if let Some(out) = out {
        let path = sidecar(out, ".config");
        fs::write(&path, text).map_err(|e| io_error(&path, e))?;
    }
    Ok(())
}

fn input_config(input: &InputArgs) -> String {
    match (&input.grid, &input.synth) {
        (Some(p), _) => format!("grid:{}", p.display()),
        (_, Some(s)) => format!("{s} extents={:?}", input.extents.clone().unwrap_or_default()),
        _ => String::new(),
    }
}

pub fn maxfield(args: MaxfieldArgs) -> Result<(), CliError> {
    let f = load_input(&args.input)?;
    let lat = f.lattice().clone();
    let rho = shear_for(&args.op, &lat)?;
    let params = params_for(&args.op, alpha_only(&args.op)?, &lat)?;
    let field = frac_max_field(&f, &rho, &params)?;
    emit(Some(&args.out), &format_samples(&lat, field.values()))?;
    let summary = sidecar(&args.out, ".csv");
    emit(Some(&summary), &FieldSummary::of(&field).to_csv())?;
    info!(
        "wrote {} and {} (max {})",
        args.out.display(),
        summary.display(),
        field.max()
    );
    Ok(())
}

pub fn weaktype(args: WeaktypeArgs) -> Result<(), CliError> {
    let f = load_input(&args.input)?;
    let lat = f.lattice().clone();
    let rho = shear_for(&args.op, &lat)?;
    let exps = exponents(&args.op)?;
    let params = params_for(&args.op, exps.alpha(), &lat)?;
    let order = parse_order(&args.order)?;
    let lambdas = match (args.lambda_min, args.lambda_max) {
        (None, None) => None,
        (Some(lo), Some(hi)) => Some(lambda_grid(lo, hi, args.lambda_count)?),
        _ => {
            // one end given: fill in the other from the field
            let max = frac_max_field(&f, &rho, &params)?.max();
            let hi = args.lambda_max.unwrap_or(max);
            let lo = args.lambda_min.unwrap_or(maxrect::experiments::DEFAULT_LAMBDA_FLOOR * max);
            Some(lambda_grid(lo, hi, args.lambda_count)?)
        }
    };
    if lambdas.is_none() && args.lambda_count != maxrect::experiments::DEFAULT_LAMBDA_COUNT {
        let max = frac_max_field(&f, &rho, &params)?.max();
        return weaktype_with(
            &args,
            &f,
            &rho,
            &exps,
            &params,
            order,
            Some(lambda_grid(maxrect::experiments::DEFAULT_LAMBDA_FLOOR * max, max, args.lambda_count)?),
        );
    }
    weaktype_with(&args, &f, &rho, &exps, &params, order, lambdas)
}

fn weaktype_with(
    args: &WeaktypeArgs,
    f: &GridFunction,
    rho: &ShearMap,
    exps: &FracExponents,
    params: &MaxParams,
    order: ScanOrder,
    lambdas: Option<Vec<f64>>,
) -> Result<(), CliError> {
    write_config(
        args.out.as_deref(),
        &[
            ("input", input_config(&args.input)),
            ("seed", args.input.seed.to_string()),
            ("shear", rho.label().to_string()),
            ("p", exps.p().to_string()),
            ("q", exps.q().to_string()),
            ("alpha", exps.alpha().to_string()),
            ("family", params.family.to_string()),
            ("boundary", params.boundary.name().to_string()),
            ("order", args.order.clone()),
        ],
    )?;
    let report = weak_type_sweep(f, rho, exps, params, lambdas.as_deref(), order)?;
    emit(args.out.as_deref(), &report.to_csv())?;
    info!("max weak-type score {}", report.max_score());
    if report.all_empty() {
        return Err(CliError::EmptySweep);
    }
    Ok(())
}

pub fn covering(args: CoveringArgs) -> Result<(), CliError> {
    let lat = Lattice::new(args.extents.clone())?;
    let rects = match (&args.rects, args.random) {
        (Some(path), None) => read_rects(path).map_err(|e| match e {
            Error::Io(io) => io_error(path, io),
            other => other.into(),
        })?,
        (None, Some(count)) => random_rects(&lat, count, &mut ChaCha8Rng::seed_from_u64(args.seed)),
        _ => return Err(CliError::Config("give exactly one of --rects or --random".into())),
    };
    if rects.is_empty() {
        return Err(CliError::Config("rectangle list is empty".into()));
    }
    for r in &rects {
        lat.check_rect(r)?;
    }
    let order = parse_order(&args.order)?;
    let report = covering_run(&rects, &lat, order, &args.ps).map_err(|e| match e {
        Error::InvalidExponent(_) => CliError::Config(e.to_string()),
        other => other.into(),
    })?;
    emit(args.out.as_deref(), &report.rows_csv())?;
    emit(args.summary.as_deref(), &report.summary_csv())?;
    info!(
        "selected {} of {}; union ratio {}",
        report.result.selected().len(),
        rects.len(),
        report.volumes.ratio
    );
    Ok(())
}

pub fn scaling(args: ScalingArgs) -> Result<(), CliError> {
    let lat = Lattice::new(args.extents.clone())?;
    let rho = shear_for(&args.op, &lat)?;
    let exps = exponents(&args.op)?;
    let params = params_for(&args.op, exps.alpha(), &lat)?;
    let rows = scaling_run(&lat, &rho, &exps, &params, &args.sizes)?;
    emit(args.out.as_deref(), &scaling_csv(&rows))
}

pub fn verify(args: VerifyArgs) -> Result<(), CliError> {
    let mut faults = Faults::default();
    for fault in &args.inject_fault {
        match fault.as_str() {
            "strict-tie" => faults.strict_tie = true,
            "no-wrap" => faults.no_wrap = true,
            other => return Err(CliError::Config(format!("unknown fault '{other}'"))),
        }
    }
    if args.side_2d == 0 || args.side_3d == 0 || args.trials == 0 {
        return Err(CliError::Config("sides and trials must be positive".into()));
    }
    let cfg = SuiteConfig {
        seed: args.seed,
        side_2d: args.side_2d,
        side_3d: args.side_3d,
        trials: args.trials,
    };
    let outcomes = run_suite(&cfg, faults);
    let mut stdout = io::stdout().lock();
    for o in &outcomes {
        writeln!(stdout, "{o}").map_err(|e| CliError::Io(e.to_string()))?;
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    writeln!(stdout, "{} checks, {failed} failed", outcomes.len()).map_err(|e| CliError::Io(e.to_string()))?;
    if failed > 0 {
        return Err(CliError::VerifyFailed(failed));
    }
    Ok(())
}
