//! File formats: points and matrices as CSV, samples as JSON lines or CSV
//! with a leading metadata record, graphs as whitespace edge lists.
//!
//! Floating-point values are written with 17 significant digits, so every
//! file round-trips bit-exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use elens::ensemble::SampleSet;
use elens::kernels::{GraphLaplacian, PointCloud};
use elens::nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a point cloud as CSV with header `x1..xd`.
pub fn write_points<W: Write>(mut out: W, cloud: &PointCloud) -> std::io::Result<()> {
    let d = cloud.dim();
    let header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for i in 0..cloud.len() {
        let row: Vec<String> = cloud.point(i).iter().map(|&v| fmt_f64(v)).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads a point cloud written by [`write_points`].
pub fn read_points(path: &Path) -> CliResult<PointCloud> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let row: Result<Vec<f64>, _> = record.iter().map(|f| f.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| CliError::Format {
            path: path.display().to_string(),
            message: format!("bad coordinate: {e}"),
        })?);
    }
    PointCloud::from_rows(&rows).map_err(CliError::from)
}

/// Writes a matrix as headerless CSV.
pub fn write_matrix<W: Write>(mut out: W, matrix: &DMatrix<f64>) -> std::io::Result<()> {
    for i in 0..matrix.nrows() {
        let row: Vec<String> = (0..matrix.ncols())
            .map(|j| fmt_f64(matrix[(i, j)]))
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads a matrix written by [`write_matrix`].
pub fn read_matrix(path: &Path) -> CliResult<DMatrix<f64>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let row: Result<Vec<f64>, _> = record.iter().map(|f| f.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| CliError::Format {
            path: path.display().to_string(),
            message: format!("bad entry: {e}"),
        })?);
    }
    let nrows = rows.len();
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::Format {
            path: path.display().to_string(),
            message: "ragged rows".into(),
        });
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Metadata record leading every sample file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SampleMetadata {
    pub kind: String,
    pub n: usize,
    pub seed: u64,
    pub rng: String,
    pub sampler: String,
    pub mode: String,
    pub draws: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lengthscale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_size: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thin: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleRecord {
    indices: Vec<usize>,
}

/// Writes samples as JSON lines: the metadata object, then one
/// `{"indices":[...]}` record per draw.
pub fn write_samples_jsonl<W: Write>(
    mut out: W,
    meta: &SampleMetadata,
    samples: &[SampleSet],
) -> std::io::Result<()> {
    writeln!(out, "{}", serde_json::to_string(meta)?)?;
    for s in samples {
        let record = SampleRecord {
            indices: s.indices().to_vec(),
        };
        writeln!(out, "{}", serde_json::to_string(&record)?)?;
    }
    Ok(())
}

/// Writes samples as CSV: a `#`-prefixed metadata line, a header, then
/// `draw,size,indices` rows with space-separated indices.
pub fn write_samples_csv<W: Write>(
    mut out: W,
    meta: &SampleMetadata,
    samples: &[SampleSet],
) -> std::io::Result<()> {
    writeln!(out, "# {}", serde_json::to_string(meta)?)?;
    writeln!(out, "draw,size,indices")?;
    for (i, s) in samples.iter().enumerate() {
        let indices: Vec<String> = s.indices().iter().map(|v| v.to_string()).collect();
        writeln!(out, "{},{},{}", i, s.len(), indices.join(" "))?;
    }
    Ok(())
}

/// Reads either sample format back.
pub fn read_samples(path: &Path) -> CliResult<(SampleMetadata, Vec<SampleSet>)> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();
    let first = lines
        .next()
        .ok_or_else(|| CliError::Format {
            path: path.display().to_string(),
            message: "empty file".into(),
        })?
        .map_err(|e| CliError::io(path, e))?;
    let bad = |message: String| CliError::Format {
        path: path.display().to_string(),
        message,
    };
    if let Some(json) = first.strip_prefix("# ") {
        // CSV layout.
        let meta: SampleMetadata =
            serde_json::from_str(json).map_err(|e| bad(format!("metadata: {e}")))?;
        let mut samples = Vec::new();
        for line in lines {
            let line = line.map_err(|e| CliError::io(path, e))?;
            if line.starts_with("draw,") || line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.splitn(3, ',').collect();
            if fields.len() != 3 {
                return Err(bad(format!("bad row: {line}")));
            }
            let indices: Result<Vec<usize>, _> = fields[2]
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect();
            let indices = indices.map_err(|e| bad(format!("bad index: {e}")))?;
            samples.push(SampleSet::new(indices).map_err(CliError::from)?);
        }
        Ok((meta, samples))
    } else {
        let meta: SampleMetadata =
            serde_json::from_str(&first).map_err(|e| bad(format!("metadata: {e}")))?;
        let mut samples = Vec::new();
        for line in lines {
            let line = line.map_err(|e| CliError::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let record: SampleRecord =
                serde_json::from_str(&line).map_err(|e| bad(format!("record: {e}")))?;
            samples.push(SampleSet::new(record.indices).map_err(CliError::from)?);
        }
        Ok((meta, samples))
    }
}

/// Reads a whitespace edge list (`u v [weight]`, `#` comments allowed)
/// into a graph Laplacian over vertices `0..=max_vertex`.
pub fn read_graph(path: &Path) -> CliResult<GraphLaplacian> {
    let mut text = String::new();
    File::open(path)
        .map_err(|e| CliError::io(path, e))?
        .read_to_string(&mut text)
        .map_err(|e| CliError::io(path, e))?;
    let bad = |message: String| CliError::Format {
        path: path.display().to_string(),
        message,
    };
    let mut edges = Vec::new();
    let mut max_vertex = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 && fields.len() != 3 {
            return Err(bad(format!("line {}: expected 'u v [w]'", lineno + 1)));
        }
        let u: usize = fields[0]
            .parse()
            .map_err(|e| bad(format!("line {}: {e}", lineno + 1)))?;
        let v: usize = fields[1]
            .parse()
            .map_err(|e| bad(format!("line {}: {e}", lineno + 1)))?;
        let w: f64 = if fields.len() == 3 {
            fields[2]
                .parse()
                .map_err(|e| bad(format!("line {}: {e}", lineno + 1)))?
        } else {
            1.0
        };
        max_vertex = max_vertex.max(u).max(v);
        edges.push((u, v, w));
    }
    if edges.is_empty() {
        return Err(bad("no edges".into()));
    }
    GraphLaplacian::from_edges(max_vertex + 1, &edges).map_err(CliError::from)
}

/// Writes an edge list recoverable by [`read_graph`].
pub fn write_graph<W: Write>(mut out: W, lap: &GraphLaplacian) -> std::io::Result<()> {
    let m = lap.matrix();
    for i in 0..lap.n() {
        for j in (i + 1)..lap.n() {
            let w = -m[(i, j)];
            if w > 0.0 {
                writeln!(out, "{} {} {}", i, j, fmt_f64(w))?;
            }
        }
    }
    Ok(())
}
