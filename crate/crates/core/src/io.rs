//! CSV formats: point sets `tau,nu`, sampled signals `t,re,im` and channel
//! taps `a_re,a_im,tau,nu`. Floats are written with 17 significant digits,
//! which round-trips every `f64`.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::channel::SampledSignal;
use crate::error::{Error, Result};
use crate::measures::{ChannelSpec, Lattice, Tap};

pub const POINTS_HEADER: [&str; 2] = ["tau", "nu"];
pub const SIGNAL_HEADER: [&str; 3] = ["t", "re", "im"];
pub const CHANNEL_HEADER: [&str; 4] = ["a_re", "a_im", "tau", "nu"];

/// Uniformity tolerance for sample times read back from CSV, relative to `dt`.
const GRID_TOL: f64 = 1e-6;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_rows<W: Write, const N: usize>(
    out: W,
    header: [&str; N],
    rows: impl Iterator<Item = [f64; N]>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|&v| fmt_f64(v)))?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<R: Read, const N: usize>(input: R, header: [&str; N]) -> Result<Vec<[f64; N]>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let found = r.headers()?.clone();
    if found.len() != N || found.iter().zip(header).any(|(a, b)| a != b) {
        return Err(Error::invalid(format!(
            "expected CSV header {}, found {}",
            header.join(","),
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let mut row = [0.0; N];
        for (slot, field) in row.iter_mut().zip(rec.iter()) {
            *slot = field.parse().map_err(|_| {
                Error::invalid(format!("row {}: cannot parse {field:?} as a number", line + 1))
            })?;
        }
        if rec.len() != N {
            return Err(Error::invalid(format!("row {}: expected {N} fields", line + 1)));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_points<W: Write>(out: W, points: &[(f64, f64)]) -> Result<()> {
    write_rows(out, POINTS_HEADER, points.iter().map(|&(t, n)| [t, n]))
}

pub fn read_points<R: Read>(input: R) -> Result<Vec<(f64, f64)>> {
    Ok(read_rows(input, POINTS_HEADER)?
        .into_iter()
        .map(|[t, n]| (t, n))
        .collect())
}

pub fn write_signal<W: Write>(out: W, signal: &SampledSignal) -> Result<()> {
    write_rows(
        out,
        SIGNAL_HEADER,
        signal
            .values()
            .iter()
            .enumerate()
            .map(|(n, v)| [signal.time(n), v.re, v.im]),
    )
}

/// Reads a uniformly sampled signal; sample times must be equally spaced.
pub fn read_signal<R: Read>(input: R) -> Result<SampledSignal> {
    let rows = read_rows(input, SIGNAL_HEADER)?;
    if rows.is_empty() {
        return Err(Error::invalid("signal CSV has no samples"));
    }
    let t0 = rows[0][0];
    let dt = if rows.len() > 1 {
        (rows[rows.len() - 1][0] - t0) / (rows.len() - 1) as f64
    } else {
        1.0
    };
    for (n, row) in rows.iter().enumerate() {
        if (row[0] - (t0 + n as f64 * dt)).abs() > GRID_TOL * dt {
            return Err(Error::invalid(format!("row {}: sample times are not uniform", n + 1)));
        }
    }
    SampledSignal::new(
        t0,
        dt,
        rows.iter().map(|r| Complex64::new(r[1], r[2])).collect(),
    )
}

pub fn write_taps<W: Write>(out: W, taps: &[Tap]) -> Result<()> {
    write_rows(
        out,
        CHANNEL_HEADER,
        taps.iter()
            .map(|t| [t.amplitude().re, t.amplitude().im, t.delay(), t.doppler()]),
    )
}

pub fn read_taps<R: Read>(input: R) -> Result<Vec<Tap>> {
    read_rows(input, CHANNEL_HEADER)?
        .into_iter()
        .map(|[re, im, t, n]| Tap::new(Complex64::new(re, im), t, n))
        .collect()
}

pub fn read_channel<R: Read>(input: R, lattice: Option<Lattice>) -> Result<ChannelSpec> {
    ChannelSpec::new(read_taps(input)?, lattice)
}
