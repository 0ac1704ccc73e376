use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Dataset, Metric};
use crate::error::{Error, Result};

const LIDB_MAGIC: &[u8; 5] = b"LIDB1";
const LIDB_HEADER: usize = 5 + 4 + 4 + 1;

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string())
}

/// Reads a `.fvecs` file: records of `i32 d` followed by `d` f32 values,
/// all little-endian.
pub fn load_fvecs(path: impl AsRef<Path>, metric: Metric) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    parse_fvecs(&bytes, &stem(path), metric)
}

pub(crate) fn parse_fvecs(bytes: &[u8], name: &str, metric: Metric) -> Result<Dataset> {
    let mut dim: Option<usize> = None;
    let mut points = Vec::new();
    let mut pos = 0usize;
    let mut record = 0usize;
    while pos < bytes.len() {
        let header = bytes
            .get(pos..pos + 4)
            .ok_or_else(|| Error::format(format!("truncated header in record {record}")))?;
        let d = i32::from_le_bytes(header.try_into().unwrap());
        if d <= 0 {
            return Err(Error::format(format!("record {record} declares d = {d}")));
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(Error::format(format!(
                    "record {record} has d = {d}, previous records have d = {expected}"
                )))
            }
            _ => {}
        }
        pos += 4;
        let body = bytes
            .get(pos..pos + 4 * d)
            .ok_or_else(|| Error::format(format!("truncated payload in record {record}")))?;
        points.extend(
            body.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap())),
        );
        pos += 4 * d;
        record += 1;
    }
    let dim = dim.ok_or_else(|| Error::format("fvecs file contains no records"))?;
    Dataset::new(name, metric, dim, points)
}

pub fn write_fvecs(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::with_capacity(dataset.points().len() * 4 + dataset.len() * 4);
    for row in dataset.rows() {
        out.extend_from_slice(&(row.len() as i32).to_le_bytes());
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a headerless CSV file with one point per line.
pub fn load_csv(path: impl AsRef<Path>, metric: Metric) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_csv(&text, &stem(path), metric)
}

pub(crate) fn parse_csv(text: &str, name: &str, metric: Metric) -> Result<Dataset> {
    let mut dim = None;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = points.len();
        for field in line.split(',') {
            let v: f32 = field.trim().parse().map_err(|_| {
                Error::format(format!("line {}: cannot parse `{}`", lineno + 1, field.trim()))
            })?;
            if !v.is_finite() {
                return Err(Error::format(format!("line {}: non-finite value", lineno + 1)));
            }
            points.push(v);
        }
        let d = points.len() - before;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(Error::format(format!(
                    "line {} has {d} fields, expected {expected}",
                    lineno + 1
                )))
            }
            _ => {}
        }
    }
    let dim = dim.ok_or_else(|| Error::format("csv file contains no rows"))?;
    Dataset::new(name, metric, dim, points)
}

pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for row in dataset.rows() {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Native binary format: `LIDB1`, u32 n, u32 d, u8 metric tag, then the
/// row-major little-endian f32 payload.
pub fn write_lidb(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    let n = u32::try_from(dataset.len()).map_err(|_| Error::invalid("n does not fit in u32"))?;
    let d = u32::try_from(dataset.dim()).map_err(|_| Error::invalid("d does not fit in u32"))?;
    file.write_all(LIDB_MAGIC)?;
    file.write_all(&n.to_le_bytes())?;
    file.write_all(&d.to_le_bytes())?;
    file.write_all(&[dataset.metric().tag()])?;
    for v in dataset.points() {
        file.write_all(&v.to_le_bytes())?;
    }
    file.flush()?;
    Ok(())
}

pub fn load_lidb(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    read_lidb(&bytes, &stem(path))
}

pub fn read_lidb(bytes: &[u8], name: &str) -> Result<Dataset> {
    if bytes.len() < LIDB_HEADER || &bytes[..5] != LIDB_MAGIC {
        return Err(Error::format("missing LIDB1 header"));
    }
    let n = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let metric = Metric::from_tag(bytes[13])
        .ok_or_else(|| Error::format(format!("unknown metric tag {}", bytes[13])))?;
    let payload = &bytes[LIDB_HEADER..];
    let expected = n
        .checked_mul(d)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::format("header size overflow"))?;
    if payload.len() != expected {
        return Err(Error::format(format!(
            "payload is {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let points = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Dataset::new(name, metric, d, points)
}
