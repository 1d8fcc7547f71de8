//! Stable file formats: dataset CSV (header row of column names, one
//! observation per row), ground-truth model JSON, learn-result JSON and
//! metrics JSON. Writers are atomic (temp file + rename) so reruns either
//! replace a file completely or not at all.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use crate::datagen::{Dataset, Provenance, ScenarioSpec};
use crate::learner::{LearnResult, StepDiagnostic};
use crate::model::{ErrorLaw, LinearSemModel};
use crate::{bagus::BagusConfig, Error, Result};

/// Writes `content` to `path` atomically.
pub fn write_atomic(path: &Path, content: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into())
    ));
    fs::write(&tmp, content)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Serializes any value as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut buf = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::Data(format!("json serialization: {e}")))?;
    buf.push(b'\n');
    write_atomic(path, &buf)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Writes a dataset as CSV: header = column names, one observation per row.
pub fn write_dataset_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(&data.column_names)
            .map_err(|e| Error::Data(format!("csv write: {e}")))?;
        for i in 0..data.n() {
            let row: Vec<String> = (0..data.p()).map(|j| format!("{}", data.x[(i, j)])).collect();
            w.write_record(&row)
                .map_err(|e| Error::Data(format!("csv write: {e}")))?;
        }
        w.flush()?;
    }
    write_atomic(path, &buf)
}

/// Reads a dataset CSV. Malformed cells are reported with their 1-based
/// data row and the offending column name.
pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: header: {e}", path.display())))?
        .clone();
    let column_names: Vec<String> = headers.iter().map(str::to_string).collect();
    let p = column_names.len();
    if p == 0 {
        return Err(Error::Data(format!("{}: no columns", path.display())));
    }
    let mut values: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for (ridx, record) in reader.records().enumerate() {
        let record = record
            .map_err(|e| Error::Data(format!("{}: row {}: {e}", path.display(), ridx + 1)))?;
        if record.len() != p {
            return Err(Error::Data(format!(
                "{}: row {} has {} fields, expected {p}",
                path.display(),
                ridx + 1,
                record.len()
            )));
        }
        for (cidx, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Data(format!(
                    "{}: row {}, column '{}': non-numeric value '{field}'",
                    path.display(),
                    ridx + 1,
                    column_names[cidx]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "{}: row {}, column '{}': non-finite value",
                    path.display(),
                    ridx + 1,
                    column_names[cidx]
                )));
            }
            values.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Data(format!("{}: no observations", path.display())));
    }
    let x = DMatrix::from_row_iterator(n, p, values.into_iter());
    Ok(Dataset {
        x,
        column_names,
        provenance: Provenance::External {
            source: path.display().to_string(),
        },
    })
}

/// Ground-truth model document: weights, variances, error laws, edges and
/// the generating scenario when one exists.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelJson {
    pub columns: Vec<String>,
    /// Row-major weight matrix; `b[j][k]` is the weight of edge `k -> j`.
    pub b: Vec<Vec<f64>>,
    pub sigma2: Vec<f64>,
    pub error_laws: Vec<ErrorLaw>,
    /// Directed edges `(parent, child)` as 0-based column indices.
    pub edges: Vec<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSpec>,
}

impl ModelJson {
    pub fn from_model(
        model: &LinearSemModel,
        columns: Vec<String>,
        scenario: Option<ScenarioSpec>,
    ) -> Self {
        let p = model.p();
        let b = (0..p)
            .map(|j| (0..p).map(|k| model.b()[(j, k)]).collect())
            .collect();
        ModelJson {
            columns,
            b,
            sigma2: model.sigma2().iter().cloned().collect(),
            error_laws: model.error_laws().to_vec(),
            edges: model.dag().edges().iter().cloned().collect(),
            scenario,
        }
    }

    /// Rebuilds the validated model; the edge list must agree with the
    /// support of `b`.
    pub fn to_model(&self) -> Result<LinearSemModel> {
        let p = self.sigma2.len();
        if self.b.len() != p || self.b.iter().any(|row| row.len() != p) {
            return Err(Error::Data("model json: b is not p x p".into()));
        }
        let b = DMatrix::from_fn(p, p, |j, k| self.b[j][k]);
        let model = LinearSemModel::new(
            b,
            DVector::from_vec(self.sigma2.clone()),
            self.error_laws.clone(),
        )?;
        let declared: std::collections::BTreeSet<(usize, usize)> =
            self.edges.iter().cloned().collect();
        if &declared != model.dag().edges() {
            return Err(Error::Data(
                "model json: edge list disagrees with the support of b".into(),
            ));
        }
        Ok(model)
    }
}

/// One estimated edge with its inclusion probability at selection time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeJson {
    pub parent: usize,
    pub parent_name: String,
    pub child: usize,
    pub child_name: String,
    pub inclusion_probability: f64,
}

/// Learn-result document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnResultJson {
    pub columns: Vec<String>,
    pub ordering: Vec<usize>,
    pub edges: Vec<EdgeJson>,
    pub steps: Vec<StepDiagnostic>,
    pub config_used: BagusConfig,
    pub warnings: Vec<String>,
}

impl LearnResultJson {
    pub fn from_result(res: &LearnResult, columns: Vec<String>) -> Self {
        let edges = res
            .edges_hat
            .iter()
            .map(|&(parent, child)| {
                // Inclusion probability recorded at the step that chose `child`.
                let prob = res
                    .steps
                    .iter()
                    .find(|s| s.chosen == child)
                    .and_then(|s| {
                        s.subset
                            .iter()
                            .position(|&v| v == parent)
                            .map(|i| s.inclusion_row[i])
                    })
                    .unwrap_or(f64::NAN);
                EdgeJson {
                    parent,
                    parent_name: columns[parent].clone(),
                    child,
                    child_name: columns[child].clone(),
                    inclusion_probability: prob,
                }
            })
            .collect();
        LearnResultJson {
            columns,
            ordering: res.ordering_hat.0.clone(),
            edges,
            steps: res.steps.clone(),
            config_used: res.config_used.clone(),
            warnings: res.warnings.clone(),
        }
    }
}

/// Writes the edge list as CSV: `parent, child, inclusion_probability`
/// (names, not indices, for the two node columns).
pub fn write_edge_list_csv(path: &Path, result: &LearnResultJson) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["parent", "child", "inclusion_probability"])
            .map_err(|e| Error::Data(format!("csv write: {e}")))?;
        for e in &result.edges {
            w.write_record([
                e.parent_name.as_str(),
                e.child_name.as_str(),
                &format!("{}", e.inclusion_probability),
            ])
            .map_err(|e| Error::Data(format!("csv write: {e}")))?;
        }
        w.flush()?;
    }
    write_atomic(path, &buf)
}

/// Metrics document produced by graph comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsJson {
    pub hamming: usize,
    pub ordering_ok: Option<bool>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Raw sweep rows with the pinned column set.
pub fn write_sweep_raw_csv(path: &Path, rows: &[crate::eval::SweepRow]) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record([
            "p",
            "d_M",
            "n",
            "error_spec",
            "seed",
            "hamming",
            "ordering_ok",
            "runtime_ms",
        ])
        .map_err(|e| Error::Data(format!("csv write: {e}")))?;
        for r in rows {
            w.write_record([
                r.p.to_string(),
                r.d_m.to_string(),
                r.n.to_string(),
                r.error_spec.clone(),
                r.seed.to_string(),
                r.hamming.map(|h| h.to_string()).unwrap_or_default(),
                r.ordering_ok.map(|o| o.to_string()).unwrap_or_default(),
                r.runtime_ms.to_string(),
            ])
            .map_err(|e| Error::Data(format!("csv write: {e}")))?;
        }
        w.flush()?;
    }
    write_atomic(path, &buf)
}

/// Aggregate sweep cells, including the rescaled axis `C = n / log p`.
pub fn write_sweep_aggregate_csv(path: &Path, cells: &[crate::eval::CellAggregate]) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record([
            "p",
            "d_M",
            "n",
            "error_spec",
            "C",
            "mean_hamming",
            "sd_hamming",
            "ordering_ok_rate",
            "replications",
            "failures",
        ])
        .map_err(|e| Error::Data(format!("csv write: {e}")))?;
        for c in cells {
            w.write_record([
                c.p.to_string(),
                c.d_m.to_string(),
                c.n.to_string(),
                c.error_spec.clone(),
                format!("{}", c.c_scaled),
                format!("{}", c.mean_hamming),
                format!("{}", c.sd_hamming),
                format!("{}", c.ordering_ok_rate),
                c.replications.to_string(),
                c.failures.to_string(),
            ])
            .map_err(|e| Error::Data(format!("csv write: {e}")))?;
        }
        w.flush()?;
    }
    write_atomic(path, &buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{default_column_names, ErrorSpec};
    use tempfile::tempdir;

    #[test]
    fn dataset_csv_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let spec = ScenarioSpec::new(4, 2, 25, ErrorSpec::GaussianEqualVar, 5);
        let sc = crate::datagen::generate_scenario(&spec).unwrap();
        write_dataset_csv(&path, &sc.dataset).unwrap();
        let back = read_dataset_csv(&path).unwrap();
        assert_eq!(back.column_names, sc.dataset.column_names);
        assert_eq!(back.x, sc.dataset.x); // shortest-round-trip float formatting
    }

    #[test]
    fn csv_parse_error_names_row_and_column() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b\n1.0,2.0\n3.0,oops\n").unwrap();
        let err = read_dataset_csv(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2"), "{msg}");
        assert!(msg.contains("'b'"), "{msg}");
    }

    #[test]
    fn model_json_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("truth.json");
        let spec = ScenarioSpec::new(5, 2, 10, ErrorSpec::SubGaussianMix, 3);
        let sc = crate::datagen::generate_scenario(&spec).unwrap();
        let doc = ModelJson::from_model(&sc.model, default_column_names(5), Some(spec));
        write_json(&path, &doc).unwrap();
        let back: ModelJson = read_json(&path).unwrap();
        let model = back.to_model().unwrap();
        assert_eq!(model.b(), sc.model.b());
        assert_eq!(model.dag().edges(), sc.model.dag().edges());
    }

    #[test]
    fn model_json_rejects_inconsistent_edges() {
        let spec = ScenarioSpec::new(4, 2, 10, ErrorSpec::GaussianEqualVar, 1);
        let sc = crate::datagen::generate_scenario(&spec).unwrap();
        let mut doc = ModelJson::from_model(&sc.model, default_column_names(4), None);
        doc.edges.push((0, 1));
        doc.edges.push((1, 0)); // cannot both be present in the support
        assert!(doc.to_model().is_err());
    }
}
