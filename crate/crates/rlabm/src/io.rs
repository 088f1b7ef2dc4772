//! On-disk artifacts: metrics and trace CSVs, manifests, saved policies and
//! edge lists.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rlabm_core::flu::{ContactNetwork, Edge};
use rlabm_core::nn::{Activation, Layer, LayerSpec, MlpParams};
use rlabm_core::sim::EpisodeTrace;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, HarnessResult};
use crate::metrics::{MetricRow, MetricsTable};

const POLICY_MAGIC: &[u8; 4] = b"RLMP";
const POLICY_VERSION: u32 = 1;

fn open(path: &Path) -> HarnessResult<File> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => HarnessError::MissingFile(path.to_path_buf()),
        _ => e.into(),
    })
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> HarnessError {
    HarnessError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn csv_line(e: &csv::Error) -> u64 {
    e.position().map_or(0, |p| p.line())
}

pub fn write_metrics(path: &Path, table: &MetricsTable) -> HarnessResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in table.rows() {
        w.serialize(row)?;
    }
    if table.is_empty() {
        w.write_record(["run_id", "trial", "epoch", "metric", "value"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> HarnessResult<MetricsTable> {
    let mut r = csv::Reader::from_reader(BufReader::new(open(path)?));
    let mut rows = Vec::new();
    for rec in r.deserialize::<MetricRow>() {
        rows.push(rec.map_err(|e| parse_err(path, csv_line(&e), e.to_string()))?);
    }
    let run_id = rows.first().map(|r| r.run_id.clone()).unwrap_or_default();
    Ok(MetricsTable::from_rows(run_id, rows))
}

/// How the step index and the first summary column are labelled in
/// `trace.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    /// One row per game step; attendance is the number of seats choosing 1.
    MinorityGame,
    /// One row per season.
    Flu,
}

/// Writes one row per step: the index, the environment's summary columns,
/// then every learner's action and reward joined with `;`.
pub fn write_trace(path: &Path, trace: &EpisodeTrace, kind: TraceKind) -> HarnessResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    let index = match kind {
        TraceKind::MinorityGame => "step",
        TraceKind::Flu => "season",
    };
    let mut header = vec![index.to_string()];
    for c in &trace.summary_columns {
        header.push(match (kind, c.as_str()) {
            (TraceKind::MinorityGame, "attendance") => "count_choosing_1".to_string(),
            _ => c.clone(),
        });
    }
    header.push("rl_actions".into());
    header.push("rl_rewards".into());
    w.write_record(&header)?;
    for (t, step) in trace.steps.iter().enumerate() {
        let mut rec = vec![t.to_string()];
        for (c, v) in trace.summary_columns.iter().zip(&step.summary) {
            // Counts and flags are integral; keep them free of a trailing ".0".
            let integral = matches!(
                c.as_str(),
                "attendance" | "minority" | "tie" | "default_split_tie" | "n_immune"
            );
            rec.push(if integral { format!("{}", *v as i64) } else { v.to_string() });
        }
        rec.push(join(&step.actions));
        rec.push(join(&step.rewards));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

/// Reads the per-step columns of a trace back as (header, rows of numbers).
/// The `;`-joined learner columns are dropped.
pub fn read_trace_columns(path: &Path) -> HarnessResult<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_reader(BufReader::new(open(path)?));
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let keep = header.len().saturating_sub(2);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| parse_err(path, csv_line(&e), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .iter()
            .take(keep)
            .map(|f| f.parse::<f64>().map_err(|e| parse_err(path, line, format!("{f:?}: {e}"))))
            .collect::<HarnessResult<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header[..keep].to_vec(), rows))
}

/// Everything needed to trace a run's artifacts back to their inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub kind: String,
    pub seed: u64,
    /// Seeds handed to each trial, in trial order.
    pub trial_seeds: Vec<u64>,
    pub spec: serde_json::Value,
    pub summary: serde_json::Map<String, serde_json::Value>,
    pub artifacts: Vec<String>,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub created: u64,
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> HarnessResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, manifest)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> HarnessResult<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => HarnessError::MissingFile(path.to_path_buf()),
        _ => e.into(),
    })?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line() as u64, e.to_string()))
}

/// Serializes policies as `RLMP`, format version, policy count, then per
/// policy its layer count and for every layer `inputs`, `outputs`,
/// activation tag, row-major weights and biases. Integers are u32 and
/// floats f64, all little-endian.
pub fn encode_policies(policies: &[MlpParams]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(POLICY_MAGIC);
    out.extend_from_slice(&POLICY_VERSION.to_le_bytes());
    out.extend_from_slice(&(policies.len() as u32).to_le_bytes());
    for p in policies {
        out.extend_from_slice(&(p.layers().len() as u32).to_le_bytes());
        for l in p.layers() {
            out.extend_from_slice(&(l.spec.inputs as u32).to_le_bytes());
            out.extend_from_slice(&(l.spec.outputs as u32).to_le_bytes());
            out.push(match l.spec.activation {
                Activation::Tanh => 0,
                Activation::Identity => 1,
            });
            for v in l.weights.iter().chain(&l.biases) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, String> {
        let bytes = self.take(n.checked_mul(8).ok_or("size overflow")?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode_policies(bytes: &[u8]) -> Result<Vec<MlpParams>, String> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != POLICY_MAGIC {
        return Err("not a policy file (bad magic)".into());
    }
    let version = c.u32()?;
    if version != POLICY_VERSION {
        return Err(format!("unsupported policy format version {version}"));
    }
    let count = c.u32()?;
    let mut out = Vec::new();
    for _ in 0..count {
        let n_layers = c.u32()?;
        let mut layers = Vec::new();
        for _ in 0..n_layers {
            let inputs = c.u32()? as usize;
            let outputs = c.u32()? as usize;
            let activation = match c.take(1)?[0] {
                0 => Activation::Tanh,
                1 => Activation::Identity,
                t => return Err(format!("unknown activation tag {t}")),
            };
            let weights = c.f64s(inputs.checked_mul(outputs).ok_or("size overflow")?)?;
            let biases = c.f64s(outputs)?;
            layers.push(Layer {
                spec: LayerSpec {
                    inputs,
                    outputs,
                    activation,
                },
                weights,
                biases,
            });
        }
        out.push(MlpParams::from_layers(layers).map_err(|e| e.to_string())?);
    }
    if c.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - c.pos));
    }
    Ok(out)
}

pub fn write_policies(path: &Path, policies: &[MlpParams]) -> HarnessResult<()> {
    std::fs::write(path, encode_policies(policies))?;
    Ok(())
}

pub fn read_policies(path: &Path) -> HarnessResult<Vec<MlpParams>> {
    let mut bytes = Vec::new();
    open(path)?.read_to_end(&mut bytes)?;
    decode_policies(&bytes).map_err(|m| parse_err(path, 0, m))
}

#[derive(Debug, Deserialize)]
struct EdgeRow {
    i: usize,
    j: usize,
    lambda: f64,
}

/// Reads an `i,j,lambda` edge list. The node count is one past the largest
/// index unless `nodes` is given.
pub fn read_network(path: &Path, nodes: Option<usize>) -> HarnessResult<ContactNetwork> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(BufReader::new(open(path)?));
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != ["i", "j", "lambda"] {
        return Err(parse_err(path, 1, format!("expected header i,j,lambda, found {}", header.join(","))));
    }
    let mut edges = Vec::new();
    let mut seen = std::collections::HashMap::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| parse_err(path, csv_line(&e), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: EdgeRow = rec
            .deserialize(Some(&csv::StringRecord::from(header.clone())))
            .map_err(|e| parse_err(path, line, e.to_string()))?;
        if row.i == row.j {
            return Err(parse_err(path, line, format!("self-loop on node {}", row.i)));
        }
        if !(row.lambda.is_finite() && row.lambda > 0.0) {
            return Err(parse_err(path, line, format!("intensity {} must be positive", row.lambda)));
        }
        if let Some(n) = nodes {
            if row.i.max(row.j) >= n {
                return Err(parse_err(path, line, format!("node {} outside 0..{n}", row.i.max(row.j))));
            }
        }
        if let Some(first) = seen.insert((row.i.min(row.j), row.i.max(row.j)), line) {
            return Err(parse_err(path, line, format!("edge ({}, {}) already given on line {first}", row.i, row.j)));
        }
        edges.push(Edge {
            i: row.i,
            j: row.j,
            lambda: row.lambda,
        });
    }
    let n = nodes.unwrap_or_else(|| edges.iter().map(|e| e.i.max(e.j) + 1).max().unwrap_or(0));
    ContactNetwork::from_edges(n, edges).map_err(|e| parse_err(path, 0, e.to_string()))
}

pub fn write_network(path: &Path, network: &ContactNetwork) -> HarnessResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["i", "j", "lambda"])?;
    for e in network.edges() {
        w.write_record([e.i.to_string(), e.j.to_string(), e.lambda.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
