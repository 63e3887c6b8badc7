//! Plain-text and binary result formats.
//!
//! Text files start with `#` comment lines (provenance header, then the
//! column names) followed by comma-separated rows. Floats are written in
//! shortest round-trip form, so re-running a computation reproduces files
//! byte for byte.

use std::io::{BufRead, Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evaluation::{AmbiguitySurface, Autocorrelation, MseRow, RocCurve};
use crate::linalg::CMat;
use crate::optimizer::{RunTrace, TraceRecord};
use crate::waveform::{PhaseVector, Waveform};

/// Shortest decimal string that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn write_header(w: &mut impl Write, header: &[String], columns: &str) -> Result<()> {
    for line in header {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "# {columns}")?;
    Ok(())
}

/// Data rows of a text file: comment and blank lines dropped, fields split
/// on commas and trimmed.
fn data_rows(r: impl BufRead) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        rows.push((i + 1, t.split(',').map(|f| f.trim().to_string()).collect()));
    }
    Ok(rows)
}

fn parse_field<T: std::str::FromStr>(line: usize, field: &str) -> Result<T> {
    field.parse().map_err(|_| Error::Format(format!("line {line}: cannot parse {field:?}")))
}

fn expect_columns(line: usize, fields: &[String], n: usize) -> Result<()> {
    if fields.len() != n {
        return Err(Error::Format(format!("line {line}: expected {n} columns, found {}", fields.len())));
    }
    Ok(())
}

pub const WAVEFORM_COLUMNS: &str = "index, phase_rad, re, im";

/// One row per sample: `index, phase_rad, re, im`.
pub fn write_waveform_text(w: &mut impl Write, header: &[String], s: &Waveform) -> Result<()> {
    write_header(w, header, WAVEFORM_COLUMNS)?;
    for (i, (theta, x)) in s.phases().as_slice().iter().zip(s.samples()).enumerate() {
        writeln!(w, "{i}, {}, {}, {}", fmt_f64(*theta), fmt_f64(x.re), fmt_f64(x.im))?;
    }
    Ok(())
}

/// Reads the text format back. Phases come from the `phase_rad` column and
/// the modulus from the first sample.
pub fn read_waveform_text(r: impl BufRead) -> Result<Waveform> {
    let rows = data_rows(r)?;
    if rows.is_empty() {
        return Err(Error::Format("waveform file has no samples".into()));
    }
    let mut phases = Vec::with_capacity(rows.len());
    let mut magnitude = 0.0;
    for (k, (line, f)) in rows.iter().enumerate() {
        expect_columns(*line, f, 4)?;
        let idx: usize = parse_field(*line, &f[0])?;
        if idx != k {
            return Err(Error::Format(format!("line {line}: expected index {k}, found {idx}")));
        }
        phases.push(parse_field::<f64>(*line, &f[1])?);
        if k == 0 {
            magnitude = Complex64::new(parse_field(*line, &f[2])?, parse_field(*line, &f[3])?).norm();
        }
    }
    Waveform::new(PhaseVector::wrap(&phases)?, magnitude)
}

/// Interleaved little-endian `re, im` doubles, no header.
pub fn write_waveform_binary(w: &mut impl Write, s: &Waveform) -> Result<()> {
    for x in s.samples() {
        w.write_all(&x.re.to_le_bytes())?;
        w.write_all(&x.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_complex_binary(mut r: impl Read) -> Result<Vec<Complex64>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() % 16 != 0 {
        return Err(Error::Format(format!("{} bytes is not a whole number of complex doubles", buf.len())));
    }
    Ok(buf
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect())
}

pub const COVARIANCE_MAGIC: &[u8; 4] = b"CMX1";
pub const COVARIANCE_VERSION: u32 = 1;

/// 16-byte header (`CMX1`, version, rows, cols as `u32` LE) followed by the
/// row-major complex doubles.
pub fn write_covariance_binary(w: &mut impl Write, m: &CMat) -> Result<()> {
    let dim = |v: usize| u32::try_from(v).map_err(|_| Error::Format("matrix too large".into()));
    w.write_all(COVARIANCE_MAGIC)?;
    w.write_all(&COVARIANCE_VERSION.to_le_bytes())?;
    w.write_all(&dim(m.nrows())?.to_le_bytes())?;
    w.write_all(&dim(m.ncols())?.to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].re.to_le_bytes())?;
            w.write_all(&m[(i, j)].im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_covariance_binary(mut r: impl Read) -> Result<CMat> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head)?;
    if &head[..4] != COVARIANCE_MAGIC {
        return Err(Error::Format("bad covariance magic".into()));
    }
    let word = |k: usize| u32::from_le_bytes(head[k..k + 4].try_into().expect("4 bytes")) as usize;
    if word(4) != COVARIANCE_VERSION as usize {
        return Err(Error::Format(format!("unsupported covariance version {}", word(4))));
    }
    let (rows, cols) = (word(8), word(12));
    let data = read_complex_binary(r)?;
    if data.len() != rows * cols {
        return Err(Error::Format(format!("expected {} entries, found {}", rows * cols, data.len())));
    }
    Ok(CMat::from_row_slice(rows, cols, &data))
}

pub const TRACE_COLUMNS: &str = "t, best_f, mean_f, phase";

pub fn write_trace(w: &mut impl Write, header: &[String], trace: &RunTrace) -> Result<()> {
    write_header(w, header, TRACE_COLUMNS)?;
    for r in &trace.records {
        writeln!(w, "{}, {}, {}, {}", r.t, fmt_f64(r.best_f), fmt_f64(r.mean_f), r.phase)?;
    }
    Ok(())
}

pub fn read_trace(r: impl BufRead) -> Result<Vec<TraceRecord>> {
    data_rows(r)?
        .iter()
        .map(|(line, f)| {
            expect_columns(*line, f, 4)?;
            Ok(TraceRecord {
                t: parse_field(*line, &f[0])?,
                best_f: parse_field(*line, &f[1])?,
                mean_f: parse_field(*line, &f[2])?,
                phase: f[3].parse()?,
            })
        })
        .collect()
}

pub const ROC_COLUMNS: &str = "pfa, pd, se_pfa, se_pd";

pub fn write_roc(w: &mut impl Write, header: &[String], roc: &RocCurve) -> Result<()> {
    write_header(w, header, ROC_COLUMNS)?;
    for p in &roc.points {
        writeln!(w, "{}, {}, {}, {}", fmt_f64(p.pfa), fmt_f64(p.pd), fmt_f64(p.se_pfa), fmt_f64(p.se_pd))?;
    }
    Ok(())
}

/// `(pfa, pd, se_pfa, se_pd)` rows.
pub fn read_roc(r: impl BufRead) -> Result<Vec<[f64; 4]>> {
    data_rows(r)?
        .iter()
        .map(|(line, f)| {
            expect_columns(*line, f, 4)?;
            Ok([parse_field(*line, &f[0])?, parse_field(*line, &f[1])?, parse_field(*line, &f[2])?, parse_field(*line, &f[3])?])
        })
        .collect()
}

pub const MSE_COLUMNS: &str = "scr_db, waveform_label, mse, se";

pub fn write_mse(w: &mut impl Write, header: &[String], rows: &[MseRow]) -> Result<()> {
    write_header(w, header, MSE_COLUMNS)?;
    for r in rows {
        if r.label.contains(',') || r.label.contains('\n') {
            return Err(Error::Format(format!("waveform label {:?} contains a separator", r.label)));
        }
        writeln!(w, "{}, {}, {}, {}", fmt_f64(r.scr_db), r.label, fmt_f64(r.mse), fmt_f64(r.se))?;
    }
    Ok(())
}

pub const AUTOCORRELATION_COLUMNS: &str = "lag, re, im, magnitude";

pub fn write_autocorrelation(w: &mut impl Write, header: &[String], ac: &Autocorrelation) -> Result<()> {
    let mut header = header.to_vec();
    header.push(format!("psl_db: {}", fmt_f64(ac.psl_db)));
    write_header(w, &header, AUTOCORRELATION_COLUMNS)?;
    for (lag, v) in ac.lags.iter().zip(&ac.values) {
        writeln!(w, "{lag}, {}, {}, {}", fmt_f64(v.re), fmt_f64(v.im), fmt_f64(v.norm()))?;
    }
    Ok(())
}

/// Dense grid: a `doppler \ delay` axis row, then one row per Doppler value.
pub fn write_ambiguity(w: &mut impl Write, header: &[String], amb: &AmbiguitySurface) -> Result<()> {
    write_header(w, header, "rows: doppler; columns: delay; values: |chi| / |chi(0, 0)|")?;
    let delays: Vec<String> = amb.delays.iter().map(|d| d.to_string()).collect();
    writeln!(w, "doppler\\delay, {}", delays.join(", "))?;
    for (nu, row) in amb.doppler.iter().zip(&amb.magnitude) {
        let vals: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(w, "{}, {}", fmt_f64(*nu), vals.join(", "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{ambiguity, autocorrelation, doppler_grid};
    use crate::optimizer::{Candidate, Phase};
    use std::io::Cursor;

    fn code() -> Waveform {
        Waveform::with_energy(PhaseVector::wrap(&[0.1, -2.9, 3.0, 1e-7, -0.333]).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -1e-300, 6.02e23, f64::MIN_POSITIVE, -0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn waveform_text_round_trip() {
        let s = code();
        let mut buf = Vec::new();
        write_waveform_text(&mut buf, &["hash: abc".into()], &s).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# hash: abc\n# index, phase_rad, re, im\n0, 0.1, "));
        let back = read_waveform_text(Cursor::new(buf)).unwrap();
        assert_eq!(back.phases(), s.phases());
        assert!((back.magnitude() - s.magnitude()).abs() < 1e-15);
        assert!(read_waveform_text(Cursor::new("1, 0.0, 1.0, 0.0\n")).is_err());
        assert!(read_waveform_text(Cursor::new("# only comments\n")).is_err());
    }

    #[test]
    fn binary_round_trips() {
        let s = code();
        let mut buf = Vec::new();
        write_waveform_binary(&mut buf, &s).unwrap();
        assert_eq!(buf.len(), 5 * 16);
        assert_eq!(read_complex_binary(Cursor::new(buf)).unwrap(), s.samples());

        let m = CMat::from_fn(2, 3, |i, j| Complex64::new(i as f64, j as f64 - 0.5));
        let mut buf = Vec::new();
        write_covariance_binary(&mut buf, &m).unwrap();
        assert_eq!(&buf[..4], b"CMX1");
        assert_eq!(buf.len(), 16 + 6 * 16);
        assert_eq!(read_covariance_binary(Cursor::new(buf.clone())).unwrap(), m);
        buf[0] = b'X';
        assert!(read_covariance_binary(Cursor::new(buf)).is_err());
    }

    #[test]
    fn trace_round_trip() {
        let trace = RunTrace {
            records: vec![
                TraceRecord { t: 0, best_f: 1.25, mean_f: 0.1, phase: Phase::Init },
                TraceRecord { t: 1, best_f: 1.5, mean_f: 1.0 / 3.0, phase: Phase::Explore },
                TraceRecord { t: 2, best_f: 2.0, mean_f: 1.0, phase: Phase::Exploit },
            ],
            best: Candidate { phases: PhaseVector::zeros(2), fitness: Some(2.0) },
            evaluations: 6,
        };
        let mut buf = Vec::new();
        write_trace(&mut buf, &[], &trace).unwrap();
        assert_eq!(read_trace(Cursor::new(buf)).unwrap(), trace.records);
    }

    #[test]
    fn roc_and_mse_rows() {
        let roc = RocCurve::from_statistics(&[0.0, 1.0], &[2.0, 3.0], None).unwrap();
        let mut buf = Vec::new();
        write_roc(&mut buf, &[], &roc).unwrap();
        let rows = read_roc(Cursor::new(buf)).unwrap();
        assert_eq!(rows.first().unwrap()[..2], [0.0, 0.0]);
        assert_eq!(rows.last().unwrap()[..2], [1.0, 1.0]);

        let row = MseRow { scr_db: -5.0, label: "rpc".into(), mse: 0.5, se: 0.01, prior_power: 1.0 };
        let mut buf = Vec::new();
        write_mse(&mut buf, &[], std::slice::from_ref(&row)).unwrap();
        assert!(String::from_utf8(buf).unwrap().ends_with("-5.0, rpc, 0.5, 0.01\n"));
        let bad = MseRow { label: "a,b".into(), ..row };
        assert!(write_mse(&mut Vec::new(), &[], &[bad]).is_err());
    }

    #[test]
    fn analysis_writers() {
        let s = code();
        let mut buf = Vec::new();
        write_autocorrelation(&mut buf, &[], &autocorrelation(&s)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("# psl_db: "));
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 9);

        let amb = ambiguity(&s, &doppler_grid(3)).unwrap();
        let mut buf = Vec::new();
        write_ambiguity(&mut buf, &[], &amb).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data.len(), 4);
        assert!(data[0].starts_with("doppler\\delay, -4, -3"));
        assert!(data[2].starts_with("0.0, "));
    }
}
