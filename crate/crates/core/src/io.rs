//! File formats: JSON and CSV with 17 significant digits per float, and
//! binary potential dumps with a JSON sidecar.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::fluctuations::EnsembleResult;
use crate::lattice::LatticeDomain;
use crate::potential::PotentialSample;

/// Scientific notation with 17 significant digits; `NaN`, `inf`, `-inf`
/// otherwise.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// Pretty JSON whose floats carry 17 significant digits. Non-finite floats
/// become `null`.
struct Digits17(PrettyFormatter<'static>);

impl Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, Digits17(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json_string(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// One line of `records.csv`: one eigenvalue index of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub eps: f64,
    pub sample_id: usize,
    pub seed: u64,
    pub k: usize,
    pub lambda_raw: f64,
    pub lambda_trunc: f64,
    pub truncation_hit: bool,
    #[serde(rename = "in_E")]
    pub in_e: Option<bool>,
    #[serde(rename = "in_F")]
    pub in_f: Option<bool>,
}

pub const RECORD_COLUMNS: [&str; 9] = [
    "eps",
    "sample_id",
    "seed",
    "k",
    "lambda_raw",
    "lambda_trunc",
    "truncation_hit",
    "in_E",
    "in_F",
];

/// Rows in `(eps, sample, k)` order.
pub fn record_rows(result: &EnsembleResult) -> Vec<RecordRow> {
    let mut rows = Vec::with_capacity(result.records.len() * result.k_indices.len());
    for r in &result.records {
        for (pos, &k) in result.k_indices.iter().enumerate() {
            rows.push(RecordRow {
                eps: r.eps,
                sample_id: r.sample_id,
                seed: r.seed,
                k,
                lambda_raw: r.lambda_raw[pos],
                lambda_trunc: r.lambda_trunc[pos],
                truncation_hit: r.truncation_hit,
                in_e: r.events.map(|e| e.in_e),
                in_f: r.events.map(|e| e.in_f),
            });
        }
    }
    rows
}

pub fn write_records_csv<W: Write>(rows: &[RecordRow], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(RECORD_COLUMNS)?;
    let flag = |b: Option<bool>| b.map_or(String::new(), |b| b.to_string());
    for r in rows {
        out.write_record([
            fmt_f64(r.eps),
            r.sample_id.to_string(),
            r.seed.to_string(),
            r.k.to_string(),
            fmt_f64(r.lambda_raw),
            fmt_f64(r.lambda_trunc),
            r.truncation_hit.to_string(),
            flag(r.in_e),
            flag(r.in_f),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(reader: R) -> Result<Vec<RecordRow>> {
    let mut input = csv::Reader::from_reader(reader);
    let header: Vec<String> = input.headers()?.iter().map(str::to_owned).collect();
    if header != RECORD_COLUMNS {
        return Err(Error::InvalidParameter(format!(
            "unexpected records header {header:?}"
        )));
    }
    input
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Log likelihood ratio of one tilted sample, for `weights.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub eps: f64,
    pub sample_id: usize,
    pub seed: u64,
    pub log_weight: f64,
}

/// One row per sample; empty unless the ensemble was tilted.
pub fn weight_rows(result: &EnsembleResult) -> Vec<WeightRow> {
    if result.records.iter().all(|r| r.log_weight == 0.0) {
        return Vec::new();
    }
    result
        .records
        .iter()
        .map(|r| WeightRow {
            eps: r.eps,
            sample_id: r.sample_id,
            seed: r.seed,
            log_weight: r.log_weight,
        })
        .collect()
}

pub fn write_weights_csv<W: Write>(rows: &[WeightRow], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["eps", "sample_id", "seed", "log_weight"])?;
    for r in rows {
        out.write_record([
            fmt_f64(r.eps),
            r.sample_id.to_string(),
            r.seed.to_string(),
            fmt_f64(r.log_weight),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Metadata stored next to a binary potential dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSidecar {
    pub seed: u64,
    pub eps: f64,
    pub lattice_hash: String,
    pub sites: usize,
    pub truncated: bool,
    pub kappa: Option<f64>,
}

fn sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

/// Writes `<stem>.bin` (little-endian f64 per site) and `<stem>.json`.
pub fn write_sample(
    stem: &Path,
    sample: &PotentialSample,
    lattice: &LatticeDomain,
) -> Result<PathBuf> {
    if sample.values.len() != lattice.len() {
        return Err(Error::LatticeMismatch {
            expected: lattice.len(),
            found: sample.values.len(),
        });
    }
    let bin = stem.with_extension("bin");
    let bytes: Vec<u8> = sample.values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(&bin, bytes)?;
    let sidecar = SampleSidecar {
        seed: sample.seed,
        eps: sample.eps,
        lattice_hash: lattice.content_hash(),
        sites: lattice.len(),
        truncated: sample.truncated,
        kappa: sample.kappa,
    };
    write_json(&sidecar_path(&bin), &sidecar)?;
    Ok(bin)
}

/// Reads a dump; when `lattice` is given its hash must match the sidecar.
pub fn read_sample(bin: &Path, lattice: Option<&LatticeDomain>) -> Result<PotentialSample> {
    let sidecar: SampleSidecar = read_json(&sidecar_path(bin))?;
    let bytes = fs::read(bin)?;
    if bytes.len() != 8 * sidecar.sites {
        return Err(Error::LatticeMismatch {
            expected: sidecar.sites,
            found: bytes.len() / 8,
        });
    }
    if let Some(lat) = lattice {
        if lat.content_hash() != sidecar.lattice_hash {
            return Err(Error::InvalidParameter(format!(
                "{} was written for a different lattice",
                bin.display()
            )));
        }
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(PotentialSample {
        values,
        seed: sidecar.seed,
        eps: sidecar.eps,
        truncated: sidecar.truncated,
        kappa: sidecar.kappa,
    })
}
