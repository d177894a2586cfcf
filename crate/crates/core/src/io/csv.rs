//! CSV tables with 17 significant digits per value.

use std::path::Path;

use crate::dynamics::{NormSample, NormTrace};
use crate::error::{Error, Result};
use crate::harness::GapSeries;

pub const GAP_COLUMNS: [&str; 4] = ["t", "u_gap", "theta_gap", "tracer_gap"];

/// Round-trip formatting: 17 significant digits in scientific notation.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn table<'a>(header: &[&str], rows: impl Iterator<Item = Vec<f64>> + 'a) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(row.iter().map(|x| format_float(*x))).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::InvalidArgument(format!("csv: {other:?}")),
    }
}

/// Columns in [`NormSample::COLUMNS`] order.
pub fn trace_csv(trace: &NormTrace) -> Result<Vec<u8>> {
    table(&NormSample::COLUMNS, trace.samples.iter().map(|s| s.row().to_vec()))
}

pub fn write_trace_csv(trace: &NormTrace, path: &Path) -> Result<()> {
    std::fs::write(path, trace_csv(trace)?)?;
    Ok(())
}

pub fn gaps_csv(series: &GapSeries) -> Result<Vec<u8>> {
    let rows = (0..series.len()).map(|i| vec![series.times[i], series.u_gap[i], series.theta_gap[i], series.tracer_gap[i]]);
    table(&GAP_COLUMNS, rows)
}

pub fn write_gaps_csv(series: &GapSeries, path: &Path) -> Result<()> {
    std::fs::write(path, gaps_csv(series)?)?;
    Ok(())
}

fn parse_rows(bytes: &[u8], header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_reader(bytes);
    let found: Vec<String> = r.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    if found != header {
        return Err(Error::InvalidArgument(format!("unexpected CSV header {found:?}")));
    }
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(csv_error)?;
            rec.iter()
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidArgument(format!("row {}: bad number {f:?}", i + 1)))
                })
                .collect()
        })
        .collect()
}

/// Parses a trace written by [`write_trace_csv`]; `nu` and `kappa` are not stored in the file.
pub fn trace_from_csv(bytes: &[u8], nu: f64, kappa: f64) -> Result<NormTrace> {
    let samples = parse_rows(bytes, &NormSample::COLUMNS)?
        .iter()
        .map(|row| NormSample::from_row(row))
        .collect::<Result<Vec<_>>>()?;
    Ok(NormTrace { nu, kappa, samples })
}

pub fn read_trace_csv(path: &Path, nu: f64, kappa: f64) -> Result<NormTrace> {
    trace_from_csv(&std::fs::read(path)?, nu, kappa)
}

pub fn gaps_from_csv(bytes: &[u8]) -> Result<GapSeries> {
    let mut s = GapSeries::default();
    for row in parse_rows(bytes, &GAP_COLUMNS)? {
        s.push(row[0], row[1], row[2], row[3]);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_trace_is_header_only() {
        let bytes = trace_csv(&NormTrace::new(0.0, 1.0)).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(text, format!("{}\n", NormSample::COLUMNS.join(",")));
    }

    #[test]
    fn values_round_trip_exactly() {
        let mut row = [0.0; 17];
        for (i, v) in row.iter_mut().enumerate() {
            *v = (i as f64 + 0.1).sqrt() * 10f64.powi(i as i32 - 8);
        }
        row[16] = f64::INFINITY;
        let trace = NormTrace {
            nu: 1e-3,
            kappa: 1e-2,
            samples: vec![NormSample::from_row(&row).unwrap()],
        };
        let bytes = trace_csv(&trace).unwrap();
        let back = trace_from_csv(&bytes, 1e-3, 1e-2).unwrap();
        assert_eq!(back, trace);
        assert_eq!(trace_csv(&back).unwrap(), bytes);
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn gap_series_round_trip() {
        let mut s = GapSeries::default();
        s.push(0.0, 1e-3, 2e-3, 3e-3);
        s.push(0.1, 1.0 / 3.0, 0.2, 0.3);
        assert_eq!(gaps_from_csv(&gaps_csv(&s).unwrap()).unwrap(), s);
        assert!(gaps_from_csv(b"a,b\n1,2\n").is_err());
    }
}
