//! Real-world samples from user-supplied CSV files.
//!
//! Files may be comma- or semicolon-separated; header names are matched
//! case-insensitively.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{LabeledDataset, Provenance, Record, RECORD_STREAM};
use crate::error::{Error, Result};
use crate::rng::{mix_seed, RandomStream};

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let mut first = String::new();
    BufReader::new(File::open(path)?).read_line(&mut first)?;
    let delimiter = if first.contains(';') && !first.contains(',') { b';' } else { b',' };
    Ok(csv::ReaderBuilder::new().delimiter(delimiter).trim(csv::Trim::All).from_path(path).map_err(csv_error)?)
}

fn csv_error(e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::MalformedCsv { row, message: format!("{kind:?}") },
    }
}

fn column(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    headers.iter().position(|h| names.iter().any(|n| h.eq_ignore_ascii_case(n)))
}

fn number(rec: &csv::StringRecord, col: usize, what: &str) -> Result<f64> {
    let row = rec.position().map_or(0, |p| p.line() as usize);
    let cell = rec.get(col).unwrap_or("");
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::MalformedCsv { row, message: format!("{what} `{cell}` is not a finite number") }),
    }
}

/// Sliding age windows `[start, start + width)` for `start` from `first` to
/// `last` in steps of one year.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightWindows {
    pub first: u32,
    pub last: u32,
    pub width: u32,
    /// Windows with fewer members are dropped.
    pub min_size: usize,
}

impl Default for HeightWindows {
    fn default() -> Self {
        HeightWindows { first: 18, last: 80, width: 9, min_size: 3 }
    }
}

/// One sample per sex and age window from a CSV with columns `height`, `age`
/// and `male` (0/1). All samples are labelled normal.
pub fn ingest_height_csv(path: &Path, windows: &HeightWindows) -> Result<LabeledDataset> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let col = |name: &str| column(&headers, &[name]).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let (h, a, m) = (col("height")?, col("age")?, col("male")?);
    let mut people = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let male = number(&rec, m, "male")?;
        if male != 0.0 && male != 1.0 {
            let row = rec.position().map_or(0, |p| p.line() as usize);
            return Err(Error::MalformedCsv { row, message: format!("male must be 0 or 1, got {male}") });
        }
        people.push((number(&rec, h, "height")?, number(&rec, a, "age")?, male));
    }
    let mut records = Vec::new();
    for sex in [0.0, 1.0] {
        for start in windows.first..=windows.last {
            let (lo, hi) = (f64::from(start), f64::from(start + windows.width));
            let sample: Vec<f64> =
                people.iter().filter(|p| p.2 == sex && p.1 >= lo && p.1 < hi).map(|p| p.0).collect();
            if sample.len() >= windows.min_size {
                let provenance = Provenance {
                    family: "height".into(),
                    params: vec![sex, lo, hi],
                    moments: None,
                    pearson_type: None,
                    index: records.len() as u64,
                };
                records.push(Record { sample, label: 1, provenance });
            }
        }
    }
    Ok(LabeledDataset::new("heights", 0, records))
}

/// `per_size` random subsamples of each size from a magnitude catalog, drawn
/// without replacement within a sample. All samples are labelled non-normal.
///
/// The magnitude column is the only column, or the one named `magnitude` or
/// `mag`.
pub fn ingest_magnitude_csv(path: &Path, sizes: &[usize], per_size: usize, master_seed: u64) -> Result<LabeledDataset> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let col = if headers.len() == 1 {
        0
    } else {
        column(&headers, &["magnitude", "mag"]).ok_or_else(|| Error::MissingColumn("magnitude".into()))?
    };
    let mut catalog = Vec::new();
    for rec in rdr.records() {
        catalog.push(number(&rec.map_err(csv_error)?, col, "magnitude")?);
    }
    let need = sizes.iter().copied().max().unwrap_or(0);
    if catalog.len() < need {
        return Err(Error::CatalogTooSmall { have: catalog.len(), need });
    }
    let seed = mix_seed(master_seed, RECORD_STREAM ^ 0x3A6);
    let mut records = Vec::with_capacity(sizes.len() * per_size);
    for &n in sizes {
        for _ in 0..per_size {
            let r = records.len() as u64;
            let mut rng = RandomStream::derive(seed, r);
            let sample = index::sample(&mut rng, catalog.len(), n).into_iter().map(|i| catalog[i]).collect();
            let provenance =
                Provenance { family: "magnitude".into(), params: Vec::new(), moments: None, pearson_type: None, index: r };
            records.push(Record { sample, label: 0, provenance });
        }
    }
    Ok(LabeledDataset::new("magnitudes", master_seed, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
        p
    }

    #[test]
    fn height_windows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "h.csv", "age,height,male\n20,170,1\n21,172,1\n22,168,1\n23,180,1\n24,175,1\n");
        let d = ingest_height_csv(&p, &HeightWindows::default()).unwrap();
        // [22, 31) still holds 22, 23 and 24; [23, 32) holds only two.
        let starts: Vec<f64> = d.records.iter().map(|r| r.provenance.params[1]).collect();
        assert_eq!(starts, vec![18.0, 19.0, 20.0, 21.0, 22.0]);
        assert_eq!(d.records[0].sample.len(), 5);
        assert_eq!(d.records[4].sample, vec![168.0, 180.0, 175.0]);
        assert!(d.records.iter().all(|r| r.label == 1 && r.provenance.params[0] == 1.0));
    }

    #[test]
    fn semicolon_files_and_quoted_headers() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "h.csv",
            "\"height\";\"weight\";\"age\";\"male\"\n151.7;47.8;63;1\n139.7;36.5;63;0\n136.5;31.8;65;0\n156.8;53.0;64;0\n",
        );
        let d = ingest_height_csv(&p, &HeightWindows::default()).unwrap();
        assert!(d.records.iter().all(|r| r.provenance.params[0] == 0.0 && r.sample.len() == 3));
        assert_eq!(d.len(), 7); // windows starting 57..=63
    }

    #[test]
    fn height_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "height,age,male\n170,20,1\nabc,21,1\n");
        assert!(matches!(ingest_height_csv(&p, &HeightWindows::default()), Err(Error::MalformedCsv { row: 3, .. })));
        let p = write(&dir, "b.csv", "height,age\n170,20\n");
        assert!(matches!(ingest_height_csv(&p, &HeightWindows::default()), Err(Error::MissingColumn(c)) if c == "male"));
    }

    #[test]
    fn magnitude_subsamples() {
        let dir = tempfile::tempdir().unwrap();
        let body: String = (0..20).map(|i| format!("{}\n", 1.0 + i as f64 / 10.0)).collect();
        let p = write(&dir, "m.csv", &format!("magnitude\n{body}"));
        let d = ingest_magnitude_csv(&p, &[5], 1, 3).unwrap();
        assert_eq!(d.len(), 1);
        let mut s = d.records[0].sample.clone();
        s.sort_by(f64::total_cmp);
        s.dedup();
        assert_eq!(s.len(), 5);
        assert_eq!(ingest_magnitude_csv(&p, &[5, 10], 4, 3).unwrap(), ingest_magnitude_csv(&p, &[5, 10], 4, 3).unwrap());
        assert!(matches!(ingest_magnitude_csv(&p, &[25], 1, 3), Err(Error::CatalogTooSmall { have: 20, need: 25 })));

        let p = write(&dir, "n.csv", "time,Magnitude,depth\nx,2.5,3\ny,2.7,1\n");
        assert_eq!(ingest_magnitude_csv(&p, &[2], 1, 0).unwrap().records[0].sample.len(), 2);
        let p = write(&dir, "o.csv", "time,depth\nx,3\n");
        assert!(matches!(ingest_magnitude_csv(&p, &[1], 1, 0), Err(Error::MissingColumn(_))));
    }
}
