//! Artifact writers. Every file carries the resolved configuration: CSV files
//! in a leading `# config: {...}` comment line, JSON files under `"config"`.

use crate::config::RunConfig;
use crate::linalg::CMat;
use crate::Result;
use serde::Serialize;
use serde_json::{json, Value};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Complex matrix as nested `[re, im]` rows.
pub fn matrix(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn write_csv<I>(path: &Path, cfg: &RunConfig, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# config: {}", serde_json::to_string(cfg)?)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(|&x| number(x))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest round-trip text; exponent form outside `[1e−4, 1e15)`.
pub fn number(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn csv_err(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

/// Write `{"config": cfg, ...body}`; `body` must serialize to an object.
pub fn write_json<T: Serialize>(path: &Path, cfg: &RunConfig, body: &T) -> Result<()> {
    let mut v = serde_json::to_value(body)?;
    let obj = v
        .as_object_mut()
        .ok_or_else(|| crate::Error::Mismatch("artifact body must be a JSON object".into()))?;
    obj.insert("config".into(), serde_json::to_value(cfg)?);
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, &v)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn complex_pair(z: crate::C64) -> Value {
    json!([z.re, z.im])
}
