//! CSV dataset files and JSON helpers.
//!
//! - confidence data: `x0..x{d-1},r0..r{K-1}`
//! - unlabelled data: `x0..x{d-1}`
//! - labelled data: `x0..x{d-1},y` with 1-based `y`
//!
//! Floats are written in Rust's shortest round-trip form, so a write/read
//! cycle reproduces values exactly.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::risk::{ClassSet, ConfidenceVector};
use crate::synthetic::{ConfidenceDataset, Noise};

fn x_header(d: usize) -> impl Iterator<Item = String> {
    (0..d).map(|i| format!("x{i}"))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Reader::from_reader(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

fn parse_f64(field: &str, path: &Path, row: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| {
        Error::Format(format!(
            "{}: row {row}: `{field}` is not a number",
            path.display()
        ))
    })
}

/// Splits a header into `x*` columns and the remaining trailing columns,
/// checking the `x` names are `x0..x{d-1}` in order.
fn split_header(headers: &csv::StringRecord, path: &Path, tail: char) -> Result<(usize, usize)> {
    let d = headers.iter().take_while(|h| h.starts_with('x')).count();
    let rest = headers.len() - d;
    let bad = || Error::Format(format!("{}: unexpected header {headers:?}", path.display()));
    if headers.iter().take(d).ne(x_header(d)) || d == 0 {
        return Err(bad());
    }
    match tail {
        'r' => {
            let expect = (0..rest).map(|i| format!("r{i}"));
            if rest == 0 || headers.iter().skip(d).ne(expect) {
                return Err(bad());
            }
        }
        'y' => {
            if rest != 1 || &headers[d] != "y" {
                return Err(bad());
            }
        }
        _ => {
            if rest != 0 {
                return Err(bad());
            }
        }
    }
    Ok((d, rest))
}

pub fn write_confidence_csv(path: impl AsRef<Path>, data: &ConfidenceDataset) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let header: Vec<String> = x_header(data.dim())
        .chain((0..data.num_classes()).map(|i| format!("r{i}")))
        .collect();
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (x, r) in data.instances.iter().zip(&data.confidences) {
        let row: Vec<String> = x.iter().chain(r.as_slice()).map(f64::to_string).collect();
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_confidence_csv(
    path: impl AsRef<Path>,
    conditioning: ClassSet,
    noise: Noise,
) -> Result<ConfidenceDataset> {
    let path = path.as_ref();
    let mut rd = reader(path)?;
    let headers = rd.headers().map_err(|e| csv_err(path, e))?.clone();
    let (d, k) = split_header(&headers, path, 'r')?;
    conditioning.check(k)?;
    let mut instances = Vec::new();
    let mut confidences = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let vals = rec
            .iter()
            .map(|f| parse_f64(f, path, i + 1))
            .collect::<Result<Vec<_>>>()?;
        instances.push(vals[..d].to_vec());
        confidences.push(
            ConfidenceVector::new(vals[d..].to_vec())
                .map_err(|e| Error::Format(format!("{}: row {}: {e}", path.display(), i + 1)))?,
        );
    }
    if instances.is_empty() {
        return Err(Error::Format(format!("{}: no data rows", path.display())));
    }
    Ok(ConfidenceDataset {
        instances,
        confidences,
        conditioning,
        noise,
    })
}

pub fn write_unlabeled_csv(path: impl AsRef<Path>, xs: &[Vec<f64>]) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let d = xs.first().map_or(0, Vec::len);
    w.write_record(x_header(d)).map_err(|e| csv_err(path, e))?;
    for x in xs {
        w.write_record(x.iter().map(f64::to_string))
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_unlabeled_csv(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let mut rd = reader(path)?;
    let headers = rd.headers().map_err(|e| csv_err(path, e))?.clone();
    split_header(&headers, path, 'u')?;
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        out.push(
            rec.iter()
                .map(|f| parse_f64(f, path, i + 1))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    if out.is_empty() {
        return Err(Error::Format(format!("{}: no data rows", path.display())));
    }
    Ok(out)
}

/// The `x*` columns of any dataset CSV, ignoring trailing `r*`/`y` columns.
pub fn read_instances_csv(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let mut rd = reader(path)?;
    let headers = rd.headers().map_err(|e| csv_err(path, e))?.clone();
    let d = headers.iter().take_while(|h| h.starts_with('x')).count();
    if d == 0 || headers.iter().take(d).ne(x_header(d)) {
        return Err(Error::Format(format!(
            "{}: unexpected header {headers:?}",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        out.push(
            rec.iter()
                .take(d)
                .map(|f| parse_f64(f, path, i + 1))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    if out.is_empty() {
        return Err(Error::Format(format!("{}: no data rows", path.display())));
    }
    Ok(out)
}

/// Labels are 0-based in memory and written 1-based.
pub fn write_labeled_csv(path: impl AsRef<Path>, data: &[(Vec<f64>, usize)]) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let d = data.first().map_or(0, |(x, _)| x.len());
    w.write_record(x_header(d).chain(std::iter::once("y".to_string())))
        .map_err(|e| csv_err(path, e))?;
    for (x, y) in data {
        w.write_record(
            x.iter()
                .map(f64::to_string)
                .chain(std::iter::once((y + 1).to_string())),
        )
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_labeled_csv(path: impl AsRef<Path>) -> Result<Vec<(Vec<f64>, usize)>> {
    let path = path.as_ref();
    let mut rd = reader(path)?;
    let headers = rd.headers().map_err(|e| csv_err(path, e))?.clone();
    let (d, _) = split_header(&headers, path, 'y')?;
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let x = rec
            .iter()
            .take(d)
            .map(|f| parse_f64(f, path, i + 1))
            .collect::<Result<Vec<_>>>()?;
        let y: usize = rec[d]
            .trim()
            .parse()
            .ok()
            .filter(|y| *y >= 1)
            .ok_or_else(|| {
                Error::Format(format!(
                    "{}: row {}: label `{}` is not a 1-based class index",
                    path.display(),
                    i + 1,
                    &rec[d]
                ))
            })?;
        out.push((x, y - 1));
    }
    if out.is_empty() {
        return Err(Error::Format(format!("{}: no data rows", path.display())));
    }
    Ok(out)
}

pub fn write_string(path: impl AsRef<Path>, contents: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn read_string(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::GaussianMixtureSpec;

    #[test]
    fn header_format() {
        let dir = tempfile::tempdir().unwrap();
        let spec = GaussianMixtureSpec::default_benchmark();
        let data = spec
            .build_confidence_dataset(&ClassSet::singleton(2), 5, Noise::Clean, 1)
            .unwrap();
        let p = dir.path().join("conf.csv");
        write_confidence_csv(&p, &data).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x0,x1,r0,r1,r2");
        assert_eq!(lines.len(), 6);
    }

    #[test]
    fn labeled_is_one_based() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.csv");
        write_labeled_csv(&p, &[(vec![0.5, 1.0], 0), (vec![2.0, -1.0], 2)]).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text, "x0,x1,y\n0.5,1,1\n2,-1,3\n");
        assert_eq!(read_labeled_csv(&p).unwrap()[1], (vec![2.0, -1.0], 2));
    }

    #[test]
    fn malformed_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "x0,r0,r1\n0.1,0.5,0.7\n").unwrap();
        assert!(read_confidence_csv(&p, ClassSet::singleton(0), Noise::Clean).is_err());
        fs::write(&p, "a,b\n1,2\n").unwrap();
        assert!(read_unlabeled_csv(&p).is_err());
        fs::write(&p, "x0,y\n1,0\n").unwrap();
        assert!(read_labeled_csv(&p).is_err());
        assert!(matches!(
            read_unlabeled_csv(dir.path().join("missing.csv")),
            Err(Error::Io { .. })
        ));
    }
}
