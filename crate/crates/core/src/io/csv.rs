//! Plain CSV emitters and the user-grid reader.
//!
//! Floats are written with 17 significant digits so that every value survives
//! a decimal round trip exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::spectral::Spectrum;
use crate::upwind::Eigenvalue;

pub const SPECTRUM_HEADER: &str = "omega,weight,cycle_len,harmonic";
pub const DENSITY_HEADER: &str = "omega,rho";
pub const EIGEN_HEADER: &str = "j,kappa,re_lambda,im_lambda,gamma,n";

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// One row per atom in `(cycle, harmonic)` order.
pub fn write_spectrum(path: &Path, spec: &Spectrum) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "{SPECTRUM_HEADER}")?;
    for a in &spec.atoms {
        writeln!(w, "{},{},{},{}", fmt_f64(a.omega), fmt_f64(a.weight), a.cycle_len, a.harmonic)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_density(path: &Path, grid: &[f64], rho: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "{DENSITY_HEADER}")?;
    for (o, r) in grid.iter().zip(rho) {
        writeln!(w, "{},{}", fmt_f64(*o), fmt_f64(*r))?;
    }
    w.flush()?;
    Ok(())
}

/// Densities of several runs on a shared grid, one column per run.
pub fn write_density_matrix(path: &Path, grid: &[f64], labels: &[String], columns: &[Vec<f64>]) -> Result<()> {
    let mut w = writer(path)?;
    write!(w, "omega")?;
    for l in labels {
        write!(w, ",{l}")?;
    }
    writeln!(w)?;
    for (i, o) in grid.iter().enumerate() {
        write!(w, "{}", fmt_f64(*o))?;
        for c in columns {
            write!(w, ",{}", fmt_f64(c[i]))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows `i1,i2[,i3],re,im,abs` for every cell accepted by `keep`.
pub fn write_grid<F>(path: &Path, p: &Partition, coeffs: &[Complex64], keep: F) -> Result<()>
where
    F: Fn(&[usize]) -> bool,
{
    let mut w = writer(path)?;
    let names: Vec<String> = (1..=p.dim()).map(|k| format!("i{k}")).collect();
    writeln!(w, "{},re,im,abs", names.join(","))?;
    for (j, c) in coeffs.iter().enumerate() {
        let multi = p.multi_index(j);
        if !keep(&multi) {
            continue;
        }
        for i in &multi {
            write!(w, "{i},")?;
        }
        writeln!(w, "{},{},{}", fmt_f64(c.re), fmt_f64(c.im), fmt_f64(c.norm()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_eigs(path: &Path, rows: &[(Eigenvalue, f64, u32)]) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "{EIGEN_HEADER}")?;
    for (e, gamma, n) in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            e.j,
            e.kappa,
            fmt_f64(e.lambda.re),
            fmt_f64(e.lambda.im),
            fmt_f64(*gamma),
            n
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Generic table writer for summary files.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        writeln!(w, "{}", r.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn bad(path: &Path, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::ConfigInvalid(format!("{}:{line}: {msg}", path.display()))
}

/// Reads per-cell values written in the grid format (`abs` column optional).
///
/// Every cell of `p` must appear exactly once.
pub fn read_grid(path: &Path, p: &Partition) -> Result<Vec<Complex64>> {
    let file = File::open(path).map_err(|e| bad(path, 0, e))?;
    let m = p.dim();
    let mut out = vec![Complex64::new(0.0, 0.0); p.len()];
    let mut seen = vec![false; p.len()];
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if n == 0 || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < m + 2 {
            return Err(bad(path, n + 1, format!("expected {} columns", m + 2)));
        }
        let mut multi = Vec::with_capacity(m);
        for (k, f) in fields[..m].iter().enumerate() {
            let i: usize = f.parse().map_err(|_| bad(path, n + 1, format!("bad index `{f}`")))?;
            if i >= p.dims()[k] {
                return Err(bad(path, n + 1, format!("index {i} out of range on axis {k}")));
            }
            multi.push(i);
        }
        let num = |f: &str| -> Result<f64> { f.parse().map_err(|_| bad(path, n + 1, format!("bad number `{f}`"))) };
        let j = p.index_of(&multi);
        if seen[j] {
            return Err(bad(path, n + 1, format!("cell {multi:?} listed twice")));
        }
        seen[j] = true;
        out[j] = Complex64::new(num(fields[m])?, num(fields[m + 1])?);
    }
    if let Some(j) = seen.iter().position(|s| !s) {
        return Err(bad(path, 0, format!("cell {:?} missing", p.multi_index(j))));
    }
    Ok(out)
}

/// Reads `(omega, weight)` pairs back from a spectrum file.
pub fn read_spectrum(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(SPECTRUM_HEADER) {
        return Err(Error::InvalidArgument(format!("{}: not a spectrum file", path.display())));
    }
    lines
        .map(|l| {
            let mut f = l.split(',');
            let mut next = || -> Result<f64> {
                f.next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("bad spectrum row `{l}`")))
            };
            Ok((next()?, next()?))
        })
        .collect()
}
