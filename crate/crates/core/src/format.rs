//! Plain-text file formats.
//!
//! * `.grid`: `N`, then the `N` extents, then the samples in row-major order,
//!   all whitespace separated.
//! * `.rects`: one box per line as `lo_1 hi_1 lo_2 hi_2 ... lo_N hi_N`.
//! * `.shear`: `N`, then lines `i j k c` (one-based axes, `j, k > i`) adding
//!   `c * x_j * y_k` to the shift of axis `i`.
//!
//! Reals are written with Rust's shortest round-trip formatting, so reading
//! back a written file reproduces every sample bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lattice::{GridFunction, Lattice, Rect};
use crate::shear::{builtin_shear, BilinearTerm, ShearMap};

pub fn parse_grid(text: &str) -> Result<GridFunction> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (n_line, n_text) = lines.next().ok_or_else(|| Error::parse("grid", 1, "missing dimension"))?;
    let dims: usize = n_text
        .trim()
        .parse()
        .map_err(|_| Error::parse("grid", n_line + 1, format!("bad dimension '{}'", n_text.trim())))?;
    let (e_line, e_text) = lines.next().ok_or_else(|| Error::parse("grid", n_line + 2, "missing extents"))?;
    let extents = e_text
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::parse("grid", e_line + 1, format!("bad extent: {e}")))?;
    if extents.len() != dims {
        return Err(Error::parse(
            "grid",
            e_line + 1,
            format!("{} extents for dimension {dims}", extents.len()),
        ));
    }
    let lattice = Lattice::new(extents)?;
    let mut values = Vec::with_capacity(lattice.len());
    for (line, text) in lines {
        for token in text.split_whitespace() {
            let v: f64 = token
                .parse()
                .map_err(|_| Error::parse("grid", line + 1, format!("bad sample '{token}'")))?;
            values.push(v);
        }
    }
    GridFunction::new(lattice, values)
}

pub fn format_grid(f: &GridFunction) -> String {
    format_samples(f.lattice(), f.values())
}

/// `.grid` text for raw samples on `lattice`.
pub fn format_samples(lattice: &Lattice, values: &[f64]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", lattice.dims());
    let extents: Vec<String> = lattice.extents().iter().map(|e| e.to_string()).collect();
    let _ = writeln!(out, "{}", extents.join(" "));
    let row = lattice.extent(lattice.dims() - 1);
    for chunk in values.chunks(row) {
        let line: Vec<String> = chunk.iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<GridFunction> {
    parse_grid(&fs::read_to_string(path)?)
}

pub fn write_grid(path: impl AsRef<Path>, f: &GridFunction) -> Result<()> {
    fs::write(path, format_grid(f))?;
    Ok(())
}

pub fn parse_rects(text: &str) -> Result<Vec<Rect>> {
    let mut rects = Vec::new();
    let mut dims = None;
    for (line, row) in text.lines().enumerate() {
        if row.trim().is_empty() {
            continue;
        }
        let coords = row
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse("rects", line + 1, format!("bad coordinate: {e}")))?;
        if coords.len() % 2 != 0 {
            return Err(Error::parse("rects", line + 1, "odd number of coordinates"));
        }
        let n = coords.len() / 2;
        if *dims.get_or_insert(n) != n {
            return Err(Error::parse("rects", line + 1, "dimension differs from earlier lines"));
        }
        let lo = coords.iter().step_by(2).copied().collect();
        let hi = coords.iter().skip(1).step_by(2).copied().collect();
        rects.push(Rect::new(lo, hi).map_err(|e| Error::parse("rects", line + 1, e.to_string()))?);
    }
    Ok(rects)
}

pub fn format_rects(rects: &[Rect]) -> String {
    let mut out = String::new();
    for r in rects {
        let fields: Vec<String> = (0..r.dims())
            .flat_map(|a| [r.lo()[a].to_string(), r.hi()[a].to_string()])
            .collect();
        let _ = writeln!(out, "{}", fields.join(" "));
    }
    out
}

pub fn read_rects(path: impl AsRef<Path>) -> Result<Vec<Rect>> {
    parse_rects(&fs::read_to_string(path)?)
}

pub fn parse_shear(text: &str) -> Result<ShearMap> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (n_line, n_text) = lines.next().ok_or_else(|| Error::parse("shear", 1, "missing dimension"))?;
    let dims: usize = n_text
        .trim()
        .parse()
        .map_err(|_| Error::parse("shear", n_line + 1, format!("bad dimension '{}'", n_text.trim())))?;
    if dims == 0 {
        return Err(Error::parse("shear", n_line + 1, "dimension must be positive"));
    }
    let mut components: Vec<Vec<BilinearTerm>> = vec![Vec::new(); dims - 1];
    for (line, row) in lines {
        let fields: Vec<&str> = row.split_whitespace().collect();
        let [i, j, k, c] = fields[..] else {
            return Err(Error::parse("shear", line + 1, "expected 'i j k c'"));
        };
        let axis = |t: &str| {
            t.parse::<usize>()
                .ok()
                .filter(|&a| (1..=dims).contains(&a))
                .ok_or_else(|| Error::parse("shear", line + 1, format!("bad axis '{t}'")))
        };
        let (i, j, k) = (axis(i)?, axis(j)?, axis(k)?);
        if i >= dims || j <= i || k <= i {
            return Err(Error::parse(
                "shear",
                line + 1,
                format!("component {i} may only use later axes, got j = {j}, k = {k}"),
            ));
        }
        let coeff: f64 = c
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::parse("shear", line + 1, format!("bad coefficient '{c}'")))?;
        components[i - 1].push(BilinearTerm {
            x_axis: j - 1,
            y_axis: k - 1,
            coeff,
        });
    }
    ShearMap::bilinear(dims, components)
}

/// Resolves a `--shear` value: `zero`, `heisenberg:<mu>` or `file:<path>`.
pub fn load_shear(spec: &str, dims: usize) -> Result<ShearMap> {
    match spec.strip_prefix("file:") {
        Some(path) => {
            let map = parse_shear(&fs::read_to_string(path)?)?.with_label(spec);
            if map.dims() != dims {
                return Err(Error::InvalidShear(format!(
                    "shear file has {} axes, grid has {dims}",
                    map.dims()
                )));
            }
            Ok(map)
        }
        None => builtin_shear(spec, dims),
    }
}

/// A real with 17 significant digits, for CSV output.
pub fn csv_real(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_text_example() {
        let f = parse_grid("2\n2 3\n1 2 3\n4 5 6\n").unwrap();
        assert_eq!(f.lattice().extents(), &[2, 3]);
        assert_eq!(f.get(&[1, 0]), 4.0);
        assert_eq!(format_grid(&f), "2\n2 3\n1 2 3\n4 5 6\n");
    }

    #[test]
    fn grid_accepts_free_layout_and_negatives() {
        let f = parse_grid("1\n4\n0.5 -2\n\n3 1e-3").unwrap();
        assert_eq!(f.values(), &[0.5, 2.0, 3.0, 1e-3]);
    }

    #[test]
    fn grid_errors() {
        assert!(parse_grid("").is_err());
        assert!(parse_grid("2\n3\n1 2 3").is_err());
        assert!(parse_grid("1\n3\n1 2").is_err());
        assert!(parse_grid("1\n2\n1 x").is_err());
        assert!(parse_grid("1\n2\n1 inf").is_err());
        assert!(parse_grid("x\n2\n1 2").is_err());
    }

    #[test]
    fn rects_text_example() {
        let rects = parse_rects("0 2 0 2\n\n1 3 0 2\n").unwrap();
        assert_eq!(rects[1], Rect::from_sides(&[(1, 3), (0, 2)]).unwrap());
        assert_eq!(format_rects(&rects), "0 2 0 2\n1 3 0 2\n");
        assert!(parse_rects("0 2 0\n").is_err());
        assert!(parse_rects("0 2 0 2\n0 1\n").is_err());
        assert!(parse_rects("2 2\n").is_err());
        assert!(parse_rects("").unwrap().is_empty());
    }

    #[test]
    fn shear_file_builds_heisenberg() {
        let map = parse_shear("3\n1 2 3 1\n1 3 2 -1\n").unwrap();
        let heis = ShearMap::heisenberg(1.0).unwrap();
        for y in Lattice::cube(3, 4).unwrap().points() {
            for x in [[0, 2, 1], [3, 0, 3], [1, 1, 2]] {
                assert_eq!(map.shift(0, &y, &x), heis.shift(0, &y, &x));
                assert_eq!(map.shift(1, &y, &x), 0);
            }
        }
    }

    #[test]
    fn shear_file_errors() {
        assert!(parse_shear("").is_err());
        assert!(parse_shear("3\n1 1 3 1\n").is_err());
        assert!(parse_shear("3\n3 3 3 1\n").is_err());
        assert!(parse_shear("3\n1 2 4 1\n").is_err());
        assert!(parse_shear("3\n1 2 3\n").is_err());
        assert!(parse_shear("3\n1 2 3 nan\n").is_err());
        assert!(load_shear("zero", 2).unwrap().is_zero());
    }

    #[test]
    fn csv_reals_have_17_digits() {
        assert_eq!(csv_real(1.0), "1.0000000000000000e0");
        assert_eq!(csv_real(2f64.sqrt()).parse::<f64>().unwrap(), 2f64.sqrt());
    }

    proptest! {
        #[test]
        fn grid_round_trip_is_exact(
            extents in proptest::collection::vec(1usize..5, 1..4),
            seed in any::<u64>(),
        ) {
            let lattice = Lattice::new(extents).unwrap();
            let mut state = seed;
            let values: Vec<f64> = (0..lattice.len())
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    f64::from_bits(state >> 12 | 0x3ff0_0000_0000_0000) - 1.0
                })
                .collect();
            let f = GridFunction::new(lattice, values).unwrap();
            let back = parse_grid(&format_grid(&f)).unwrap();
            prop_assert_eq!(back, f);
        }

        #[test]
        fn rects_round_trip(sides in proptest::collection::vec((0usize..20, 1usize..20), 1..4)) {
            let rect = Rect::from_sides(&sides.iter().map(|&(l, w)| (l, l + w)).collect::<Vec<_>>()).unwrap();
            let text = format_rects(std::slice::from_ref(&rect));
            prop_assert_eq!(parse_rects(&text).unwrap(), vec![rect]);
        }
    }
}
