//! Per-trial sweep records and their CSV form.
//!
//! Columns: `scheme,axis_name,axis_value,sigma2,trial,mse,iters,converged,millis`.
//! Floats are written in scientific notation with 17 significant digits so
//! they parse back to the same bits.

use std::cmp::Ordering;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ao::SchemeKind;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 9] =
    ["scheme", "axis_name", "axis_value", "sigma2", "trial", "mse", "iters", "converged", "millis"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "power_dbm")]
    PowerDbm,
    #[serde(rename = "elements")]
    Elements,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::PowerDbm => "power_dbm",
            Axis::Elements => "elements",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub scheme: SchemeKind,
    pub axis_name: Axis,
    pub axis_value: f64,
    pub sigma2: f64,
    pub trial: u64,
    /// NaN when the trial failed.
    pub mse: f64,
    pub iters: usize,
    pub converged: bool,
    pub millis: f64,
}

impl SweepRecord {
    /// Bitwise equality, so NaN records compare equal to themselves.
    pub fn same_bits(&self, other: &SweepRecord) -> bool {
        self.scheme == other.scheme
            && self.axis_name == other.axis_name
            && self.axis_value.to_bits() == other.axis_value.to_bits()
            && self.sigma2.to_bits() == other.sigma2.to_bits()
            && self.trial == other.trial
            && self.mse.to_bits() == other.mse.to_bits()
            && self.iters == other.iters
            && self.converged == other.converged
            && self.millis.to_bits() == other.millis.to_bits()
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes records as CSV to any sink.
pub fn write_csv<W: Write>(records: &[SweepRecord], sink: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.scheme.to_string(),
            r.axis_name.name().to_string(),
            fmt_f64(r.axis_value),
            fmt_f64(r.sigma2),
            r.trial.to_string(),
            fmt_f64(r.mse),
            r.iters.to_string(),
            r.converged.to_string(),
            fmt_f64(r.millis),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_results(records: &[SweepRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
    write_csv(records, BufWriter::new(file)).map_err(|source| Error::Csv { path: path.to_owned(), source })
}

pub fn read_csv<R: std::io::Read>(source: R) -> std::result::Result<Vec<SweepRecord>, csv::Error> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    rdr.deserialize().collect()
}

pub fn read_results(path: &Path) -> Result<Vec<SweepRecord>> {
    let file = File::open(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
    let csv_err = |source| Error::Csv { path: path.to_owned(), source };
    let mut rdr = csv::Reader::from_reader(file);
    if rdr.headers().map_err(csv_err)?.iter().ne(CSV_HEADER) {
        return Err(Error::Config(format!("{}: unexpected CSV header", path.display())));
    }
    rdr.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err)
}

/// Mean and standard error of the MSE for one (scheme, axis value, sigma2) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub scheme: SchemeKind,
    pub axis_name: Axis,
    pub axis_value: f64,
    pub sigma2: f64,
    pub mean: f64,
    pub std_error: f64,
    /// Trials with a finite MSE.
    pub count: usize,
    pub failed: usize,
}

fn cell_order(a: &SweepRecord, b: &SweepRecord) -> Ordering {
    a.scheme
        .cmp(&b.scheme)
        .then(a.axis_name.cmp(&b.axis_name))
        .then(a.axis_value.total_cmp(&b.axis_value))
        .then(a.sigma2.total_cmp(&b.sigma2))
}

/// Groups records by cell; cells come out sorted by scheme, axis value, sigma2.
pub fn summarize(records: &[SweepRecord]) -> Vec<CellSummary> {
    let mut sorted: Vec<&SweepRecord> = records.iter().collect();
    sorted.sort_by(|a, b| cell_order(a, b));
    sorted
        .chunk_by(|a, b| cell_order(a, b) == Ordering::Equal)
        .map(|cell| {
            let vals: Vec<f64> = cell.iter().map(|r| r.mse).filter(|m| m.is_finite()).collect();
            let n = vals.len();
            let mean = if n > 0 { vals.iter().sum::<f64>() / n as f64 } else { f64::NAN };
            let std_error = if n > 1 {
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                f64::NAN
            };
            let r = cell[0];
            CellSummary {
                scheme: r.scheme,
                axis_name: r.axis_name,
                axis_value: r.axis_value,
                sigma2: r.sigma2,
                mean,
                std_error,
                count: n,
                failed: cell.len() - n,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(scheme: SchemeKind, axis_value: f64, trial: u64, mse: f64) -> SweepRecord {
        SweepRecord {
            scheme,
            axis_name: Axis::PowerDbm,
            axis_value,
            sigma2: 0.05,
            trial,
            mse,
            iters: 3,
            converged: true,
            millis: 0.0,
        }
    }

    #[test]
    fn empty_set_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", CSV_HEADER.join(",")));
    }

    #[test]
    fn lf_line_endings_and_17_digits() {
        let mut buf = Vec::new();
        write_csv(&[rec(SchemeKind::DiscretePhase(3), 10.0, 0, 0.1)], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(!s.contains('\r'));
        let row = s.lines().nth(1).unwrap();
        assert_eq!(row, "discrete-3,power_dbm,1.0000000000000000e1,5.0000000000000003e-2,0,1.0000000000000001e-1,3,true,0.0000000000000000e0");
    }

    #[test]
    fn summary_mean_and_error() {
        let rs = vec![
            rec(SchemeKind::Robust, 0.0, 0, 0.1),
            rec(SchemeKind::Robust, 0.0, 1, 0.3),
            rec(SchemeKind::Robust, 0.0, 2, f64::NAN),
            rec(SchemeKind::NonRobust, 0.0, 0, 0.5),
        ];
        let s = summarize(&rs);
        assert_eq!(s.len(), 2);
        let r = &s[0];
        assert_eq!(r.scheme, SchemeKind::Robust);
        assert!((r.mean - 0.2).abs() < 1e-15);
        assert!((r.std_error - 0.1).abs() < 1e-15);
        assert_eq!((r.count, r.failed), (2, 1));
    }

    fn any_scheme() -> impl Strategy<Value = SchemeKind> {
        prop_oneof![
            Just(SchemeKind::Robust),
            Just(SchemeKind::NonRobust),
            (1u8..=8).prop_map(SchemeKind::DiscretePhase),
            Just(SchemeKind::NoIrs),
        ]
    }

    proptest! {
        #[test]
        fn csv_round_trip(rows in prop::collection::vec(
            (any_scheme(), any::<bool>(), -1e3f64..1e3, 0f64..1.0, any::<u64>(), prop_oneof![Just(f64::NAN), 1e-12f64..1.0], 0usize..600, any::<bool>(), 0f64..1e5),
            0..20,
        )) {
            let records: Vec<SweepRecord> = rows.into_iter().map(|(scheme, p, axis_value, sigma2, trial, mse, iters, converged, millis)| SweepRecord {
                scheme,
                axis_name: if p { Axis::PowerDbm } else { Axis::Elements },
                axis_value, sigma2, trial, mse, iters, converged, millis,
            }).collect();
            let mut buf = Vec::new();
            write_csv(&records, &mut buf).unwrap();
            let back = read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), records.len());
            for (a, b) in back.iter().zip(&records) {
                prop_assert!(a.same_bits(b), "{:?} != {:?}", a, b);
            }
        }
    }
}
