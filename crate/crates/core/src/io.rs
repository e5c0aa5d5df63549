// SPDX-License-Identifier: Apache-2.0

//! Plain-text exports: CSV traces, spectra, snapshots and real grids.

use std::io::Write;

use ndarray::Array2;

use crate::ensemble::EnsembleTrace;
use crate::error::{Error, Result};
use crate::liouvillian::{C64, VEC_CONVENTION};
use crate::transport::TransportTrace;

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidParameter(format!("csv output failed: {e}"))
}

fn io_err(e: std::io::Error) -> Error {
    Error::InvalidParameter(format!("write failed: {e}"))
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Columns `alpha, re_lambda, im_lambda` with 1-based `alpha`.
pub fn write_spectrum<W: Write>(out: W, eigenvalues: &[C64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha", "re_lambda", "im_lambda"]).map_err(csv_err)?;
    for (a, z) in eigenvalues.iter().enumerate() {
        w.write_record([(a + 1).to_string(), num(z.re), num(z.im)]).map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}

/// Row-major grid preceded by a single `#` line naming the layout.
pub fn write_grid<W: Write>(mut out: W, grid: &Array2<f64>) -> Result<()> {
    writeln!(out, "# {VEC_CONVENTION}; row n, column m").map_err(io_err)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for row in grid.rows() {
        w.write_record(row.iter().map(|x| num(*x))).map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}

/// Columns `t, n_cm, d2`.
pub fn write_trace<W: Write>(out: W, trace: &TransportTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "n_cm", "d2"]).map_err(csv_err)?;
    for k in 0..trace.len() {
        w.write_record([num(trace.times[k]), num(trace.n_cm[k]), num(trace.d2[k])]).map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}

/// Columns `t, n_cm, d2, stderr_n_cm, stderr_d2`.
pub fn write_ensemble<W: Write>(out: W, e: &EnsembleTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "n_cm", "d2", "stderr_n_cm", "stderr_d2"]).map_err(csv_err)?;
    for k in 0..e.times.len() {
        w.write_record([num(e.times[k]), num(e.n_cm[k]), num(e.d2[k]), num(e.stderr_n_cm[k]), num(e.stderr_d2[k])]).map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}

/// Long format `t, site, <value>` with 1-based sites.
pub fn write_snapshots<W: Write>(out: W, times: &[f64], frames: &[Vec<f64>], value: &str) -> Result<()> {
    if times.len() != frames.len() {
        return Err(Error::Shape { expected: format!("{} frames", times.len()), actual: format!("{}", frames.len()) });
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "site", value]).map_err(csv_err)?;
    for (t, frame) in times.iter().zip(frames) {
        for (n, x) in frame.iter().enumerate() {
            w.write_record([num(*t), (n + 1).to_string(), num(*x)]).map_err(csv_err)?;
        }
    }
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_layout() {
        let mut buf = vec![];
        write_spectrum(&mut buf, &[C64::new(0.0, 0.0), C64::new(-1.5, 0.25)]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "alpha,re_lambda,im_lambda\n1,0e0,0e0\n2,-1.5e0,2.5e-1\n");
    }

    #[test]
    fn grid_has_one_header_line() {
        let mut buf = vec![];
        write_grid(&mut buf, &Array2::from_shape_vec((2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap()).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("# vec index"));
        assert_eq!(lines[2], "3e0,4e0");
    }

    #[test]
    fn snapshots_are_long_format() {
        let mut buf = vec![];
        write_snapshots(&mut buf, &[0.0, 1.0], &[vec![1.0, 0.0], vec![0.5, 0.5]], "population").unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 5);
        assert_eq!(s.lines().nth(4).unwrap(), "1e0,2,5e-1");
        assert!(write_snapshots(&mut vec![], &[0.0], &[], "n_l").is_err());
    }
}
