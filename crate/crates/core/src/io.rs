//! File formats: boundary samples, coefficients and masks as CSV, and a
//! little-endian binary dump of path samples.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::martingale::{PathConfig, PathSample, SampleSet};
use crate::maximal::GridMask;
use crate::spectral::{AnalyticFn, BoundaryFn, CircleGrid};

/// Tolerance on sample angles in boundary CSV files.
pub const THETA_TOL: f64 = 1e-9;

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn parse_f64(field: Option<&str>, what: &str, row: usize) -> Result<f64> {
    let s = field.ok_or_else(|| Error::Parse(format!("row {row}: missing {what}")))?;
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("row {row}: bad {what} `{s}`")))
}

fn expect_header(rdr: &mut csv::Reader<impl Read>, want: &[&str]) -> Result<()> {
    let h = rdr.headers().map_err(csv_err)?;
    let got: Vec<&str> = h.iter().map(str::trim).collect();
    if got != want {
        return Err(Error::Parse(format!(
            "expected header `{}`, got `{}`",
            want.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

/// Reads `theta,re,im` rows. Angles must be `2πj/n` to within
/// [`THETA_TOL`]; the kind is real when every imaginary part is zero.
pub fn read_boundary_csv(r: impl Read) -> Result<BoundaryFn> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    expect_header(&mut rdr, &["theta", "re", "im"])?;
    let mut thetas = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = i + 2;
        thetas.push(parse_f64(rec.get(0), "theta", row)?);
        values.push(Complex64::new(
            parse_f64(rec.get(1), "re", row)?,
            parse_f64(rec.get(2), "im", row)?,
        ));
    }
    let grid = CircleGrid::new(values.len())
        .map_err(|_| Error::Parse(format!("{} rows is not a power of two >= 8", values.len())))?;
    let step = 2.0 * PI / grid.n() as f64;
    for (j, &t) in thetas.iter().enumerate() {
        if j > 0 && !(t > thetas[j - 1]) {
            return Err(Error::Parse(format!(
                "theta not strictly increasing at row {}",
                j + 2
            )));
        }
        if (t - j as f64 * step).abs() > THETA_TOL {
            return Err(Error::Parse(format!(
                "theta {t} at row {} is off the uniform grid",
                j + 2
            )));
        }
    }
    if values
        .iter()
        .any(|v| !v.re.is_finite() || !v.im.is_finite())
    {
        return Err(Error::Parse("non-finite sample".into()));
    }
    BoundaryFn::auto(grid, values)
}

pub fn write_boundary_csv(w: impl Write, u: &BoundaryFn) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["theta", "re", "im"]).map_err(csv_err)?;
    for (j, v) in u.values().iter().enumerate() {
        wtr.write_record([
            u.grid().point(j).to_string(),
            v.re.to_string(),
            v.im.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_coefficients_csv(w: impl Write, f: &AnalyticFn) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["k", "re", "im"]).map_err(csv_err)?;
    for (k, c) in f.coeffs().iter().enumerate() {
        wtr.write_record([k.to_string(), c.re.to_string(), c.im.to_string()])
            .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_coefficients_csv(r: impl Read) -> Result<AnalyticFn> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    expect_header(&mut rdr, &["k", "re", "im"])?;
    let mut coeffs = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let k: usize = rec
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Parse(format!("row {}: bad k", i + 2)))?;
        if k != i {
            return Err(Error::Parse(format!("row {}: expected k = {i}", i + 2)));
        }
        coeffs.push(Complex64::new(
            parse_f64(rec.get(1), "re", i + 2)?,
            parse_f64(rec.get(2), "im", i + 2)?,
        ));
    }
    AnalyticFn::new(coeffs)
}

pub fn write_mask_csv(w: impl Write, mask: &GridMask) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["index"]).map_err(csv_err)?;
    for i in mask.indices() {
        wtr.write_record([i.to_string()]).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_mask_csv(r: impl Read, grid: CircleGrid) -> Result<GridMask> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    expect_header(&mut rdr, &["index"])?;
    let mut idx = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        idx.push(
            rec.get(0)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Parse(format!("row {}: bad index", i + 2)))?,
        );
    }
    GridMask::from_indices(grid, &idx)
}

/// Two-column `(x, y)` series for plotting.
pub fn write_series_csv(w: impl Write, header: [&str; 2], rows: &[(f64, f64)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(header).map_err(csv_err)?;
    for (x, y) in rows {
        wtr.write_record([x.to_string(), y.to_string()])
            .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))
}

/// Header of a binary path dump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DumpHeader {
    pub n_paths: u64,
    pub dt: f64,
    pub r_exit: f64,
    pub seed: u64,
}

const RECORD_BYTES: usize = 8 * 7 + 1 + 8 * 2 + 8;

fn put_c(buf: &mut Vec<u8>, z: Complex64) {
    buf.extend_from_slice(&z.re.to_le_bytes());
    buf.extend_from_slice(&z.im.to_le_bytes());
}

/// Writes the header, then per path: exit point, stopped value, terminal
/// value (each as two `f64`), `f_star`, a `u8` fired flag, the entry point
/// `z_τ` (NaN when τ did not fire) and the step count as `u64`.
pub fn write_path_dump(mut w: impl Write, samples: &SampleSet) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + samples.len() * RECORD_BYTES);
    buf.extend_from_slice(&(samples.len() as u64).to_le_bytes());
    buf.extend_from_slice(&samples.cfg.dt.to_le_bytes());
    buf.extend_from_slice(&samples.cfg.r_exit.to_le_bytes());
    buf.extend_from_slice(&samples.cfg.seed.to_le_bytes());
    for s in &samples.samples {
        put_c(&mut buf, s.exit_point);
        put_c(&mut buf, s.stopped_value);
        put_c(&mut buf, s.terminal_value);
        buf.extend_from_slice(&s.f_star.to_le_bytes());
        buf.push(s.tau_fired as u8);
        put_c(
            &mut buf,
            s.tau_point.unwrap_or(Complex64::new(f64::NAN, f64::NAN)),
        );
        buf.extend_from_slice(&s.steps.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_path_dump(mut r: impl Read) -> Result<(DumpHeader, Vec<PathSample>)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut at = 0usize;
    let mut take8 = |bytes: &[u8]| -> Result<[u8; 8]> {
        let s = bytes
            .get(at..at + 8)
            .ok_or_else(|| Error::Parse("truncated path dump".into()))?;
        at += 8;
        Ok(s.try_into().expect("8 bytes"))
    };
    let header = DumpHeader {
        n_paths: u64::from_le_bytes(take8(&bytes)?),
        dt: f64::from_le_bytes(take8(&bytes)?),
        r_exit: f64::from_le_bytes(take8(&bytes)?),
        seed: u64::from_le_bytes(take8(&bytes)?),
    };
    let body = &bytes[32..];
    if body.len() as u64 != header.n_paths * RECORD_BYTES as u64 {
        return Err(Error::Parse(format!(
            "dump body has {} bytes, expected {} records",
            body.len(),
            header.n_paths
        )));
    }
    let f =
        |rec: &[u8], off: usize| f64::from_le_bytes(rec[off..off + 8].try_into().expect("8 bytes"));
    let samples = body
        .chunks_exact(RECORD_BYTES)
        .map(|rec| {
            let c = |off| Complex64::new(f(rec, off), f(rec, off + 8));
            let fired = rec[56] != 0;
            PathSample {
                exit_point: c(0),
                stopped_value: c(16),
                terminal_value: c(32),
                f_star: f(rec, 48),
                tau_fired: fired,
                tau_point: fired.then(|| c(57)),
                steps: u64::from_le_bytes(rec[73..81].try_into().expect("8 bytes")),
            }
        })
        .collect();
    Ok((header, samples))
}

impl DumpHeader {
    /// Path configuration recorded in the dump (step budget left at default).
    pub fn config(&self) -> PathConfig {
        PathConfig {
            dt: self.dt,
            r_exit: self.r_exit,
            seed: self.seed,
            n_paths: self.n_paths as usize,
            ..Default::default()
        }
    }
}
