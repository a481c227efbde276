//! File formats: correlation/covariance matrices and sample tables as CSV,
//! tree models as a versioned JSON document.
//!
//! Matrix CSV carries variable names in both the first row and the first
//! column; sample CSV carries names in the header with one observation per
//! row. The two are told apart by the first cell of the first data row:
//! a number means samples, anything else means a matrix.

use std::collections::HashMap;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    CorrelationMatrix, CovarianceMatrix, Edge, Leaf, NodeRef, Tolerances, TreeModel,
};
use crate::oracle::SampleMatrix;

// ---------------------------------------------------------------------------
// CSV matrices and samples
// ---------------------------------------------------------------------------

/// What a CSV file holds, decided by [`sniff_csv`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvKind {
    Matrix,
    Samples,
}

/// Decide whether CSV text is a named matrix or a sample table: sample rows
/// start with a number, matrix rows with a variable name.
pub fn sniff_csv(text: &str) -> Result<CsvKind> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let _header = records.next().transpose()?.ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let first_data = records.next().transpose()?.ok_or(Error::Parse {
        line: 2,
        message: "no data rows".into(),
    })?;
    let first_cell = first_data.get(0).unwrap_or("");
    if first_cell.parse::<f64>().is_ok() {
        Ok(CsvKind::Samples)
    } else {
        Ok(CsvKind::Matrix)
    }
}

fn record_line(record: &csv::StringRecord, fallback: usize) -> usize {
    record
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(fallback)
}

fn parse_cell(record: &csv::StringRecord, index: usize, line: usize) -> Result<f64> {
    let raw = record.get(index).ok_or(Error::Parse {
        line,
        message: format!("missing column {}", index + 1),
    })?;
    raw.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("column {}: '{raw}' is not a number", index + 1),
    })
}

/// Read a named square matrix: header `,name1,name2,...`, then one row per
/// variable starting with its name. Returns names and raw entries; callers
/// decide whether they are correlations or covariances.
pub fn read_matrix_csv<R: Read>(reader: R) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut records = reader.records();

    let header = records.next().transpose()?.ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let n = names.len();
    if n == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "header names no variables".into(),
        });
    }

    let mut entries = DMatrix::zeros(n, n);
    let mut row = 0usize;
    for record in records {
        let record = record?;
        let line = record_line(&record, row + 2);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if row >= n {
            return Err(Error::Parse {
                line,
                message: format!("more than {n} data rows for {n} names"),
            });
        }
        let label = record.get(0).unwrap_or("");
        if label != names[row] {
            return Err(Error::Parse {
                line,
                message: format!(
                    "row label '{label}' does not match header name '{}'",
                    names[row]
                ),
            });
        }
        if record.len() != n + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} columns, found {}", n + 1, record.len()),
            });
        }
        for col in 0..n {
            entries[(row, col)] = parse_cell(&record, col + 1, line)?;
        }
        row += 1;
    }
    if row != n {
        return Err(Error::Parse {
            line: row + 2,
            message: format!("only {row} data rows for {n} names"),
        });
    }
    Ok((names, entries))
}

/// Write a named square matrix in the format [`read_matrix_csv`] accepts.
pub fn write_matrix_csv<W: Write>(
    writer: W,
    names: &[String],
    entries: &DMatrix<f64>,
) -> Result<()> {
    if entries.nrows() != names.len() || entries.ncols() != names.len() {
        return Err(Error::DimensionMismatch {
            expected: names.len(),
            actual: entries.nrows(),
        });
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![String::new()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for (i, name) in names.iter().enumerate() {
        let mut record = vec![name.clone()];
        record.extend((0..names.len()).map(|j| entries[(i, j)].to_string()));
        w.write_record(&record)?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

/// Read a sample table: header of variable names, one observation per row.
pub fn read_samples_csv<R: Read>(reader: R) -> Result<SampleMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = reader.records();

    let header = records.next().transpose()?.ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let names: Vec<String> = header.iter().map(str::to_owned).collect();
    let n = names.len();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in records {
        let record = record?;
        let line = record_line(&record, rows.len() + 2);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if record.len() != n {
            return Err(Error::Parse {
                line,
                message: format!("expected {n} columns, found {}", record.len()),
            });
        }
        let mut row = Vec::with_capacity(n);
        for col in 0..n {
            row.push(parse_cell(&record, col, line)?);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 2,
            message: "no observations".into(),
        });
    }
    let values = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    SampleMatrix::new(names, values)
}

/// Write a sample table in the format [`read_samples_csv`] accepts.
pub fn write_samples_csv<W: Write>(writer: W, samples: &SampleMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(samples.columns())?;
    for i in 0..samples.n_obs() {
        let record: Vec<String> = (0..samples.n_vars())
            .map(|j| samples.get(i, j).to_string())
            .collect();
        w.write_record(&record)?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// JSON model document
// ---------------------------------------------------------------------------

/// Serialized form of a [`TreeModel`]. Hidden nodes get ids `w1`, `w2`, ...;
/// edge endpoints refer to leaves by name and hidden nodes by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModelDocument {
    pub schema_version: u32,
    pub leaves: Vec<LeafDoc>,
    pub hidden: Vec<HiddenDoc>,
    pub edges: Vec<EdgeDoc>,
    /// Hidden id of the sampling root.
    pub root: String,
    pub flags: FlagsDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafDoc {
    pub name: String,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenDoc {
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub endpoint_a: String,
    pub endpoint_b: String,
    pub correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagsDoc {
    pub degenerate: bool,
    pub notes: Vec<String>,
}

pub const SCHEMA_VERSION: u32 = 1;

fn hidden_id(index: usize) -> String {
    format!("w{}", index + 1)
}

/// Convert a model to its document form. Fails if a leaf name collides with
/// a generated hidden id or another leaf name.
pub fn model_to_document(t: &TreeModel) -> Result<TreeModelDocument> {
    let mut seen = HashMap::new();
    for (i, leaf) in t.leaves().iter().enumerate() {
        if seen.insert(leaf.name.clone(), i).is_some() {
            return Err(Error::InvalidArgument(format!(
                "duplicate leaf name '{}'",
                leaf.name
            )));
        }
    }
    for h in 0..t.hidden_count() {
        if seen.contains_key(&hidden_id(h)) {
            return Err(Error::InvalidArgument(format!(
                "leaf name '{}' collides with a hidden node id",
                hidden_id(h)
            )));
        }
    }
    let node_name = |node: NodeRef| match node {
        NodeRef::Leaf(l) => t.leaf(l).name.clone(),
        NodeRef::Hidden(h) => hidden_id(h),
    };
    Ok(TreeModelDocument {
        schema_version: SCHEMA_VERSION,
        leaves: t
            .leaves()
            .iter()
            .map(|l| LeafDoc {
                name: l.name.clone(),
                mean: l.mean,
                variance: l.variance,
            })
            .collect(),
        hidden: (0..t.hidden_count())
            .map(|h| HiddenDoc { id: hidden_id(h) })
            .collect(),
        edges: t
            .edges()
            .iter()
            .map(|e| EdgeDoc {
                endpoint_a: node_name(e.a),
                endpoint_b: node_name(e.b),
                correlation: e.correlation,
            })
            .collect(),
        root: match t.root() {
            NodeRef::Hidden(h) => hidden_id(h),
            NodeRef::Leaf(l) => t.leaf(l).name.clone(),
        },
        flags: FlagsDoc {
            degenerate: t.is_degenerate(),
            notes: t.notes().to_vec(),
        },
    })
}

/// Rebuild a model from its document form and validate it. The reported
/// violations make an invalid file diagnosable.
pub fn model_from_document(doc: &TreeModelDocument) -> Result<TreeModel> {
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::InvalidArgument(format!(
            "unsupported schema_version {} (this build reads {})",
            doc.schema_version, SCHEMA_VERSION
        )));
    }
    let mut by_name: HashMap<&str, NodeRef> = HashMap::new();
    for (i, leaf) in doc.leaves.iter().enumerate() {
        if by_name.insert(&leaf.name, NodeRef::Leaf(i)).is_some() {
            return Err(Error::InvalidArgument(format!(
                "duplicate node name '{}'",
                leaf.name
            )));
        }
    }
    for (h, hidden) in doc.hidden.iter().enumerate() {
        if by_name.insert(&hidden.id, NodeRef::Hidden(h)).is_some() {
            return Err(Error::InvalidArgument(format!(
                "duplicate node name '{}'",
                hidden.id
            )));
        }
    }
    let resolve = |name: &str| {
        by_name.get(name).copied().ok_or_else(|| {
            Error::InvalidArgument(format!("edge endpoint '{name}' is not a declared node"))
        })
    };
    let mut edges = Vec::with_capacity(doc.edges.len());
    for e in &doc.edges {
        edges.push(Edge::new(
            resolve(&e.endpoint_a)?,
            resolve(&e.endpoint_b)?,
            e.correlation,
        ));
    }
    let root = match resolve(&doc.root)? {
        NodeRef::Hidden(h) => h,
        NodeRef::Leaf(_) => {
            return Err(Error::InvalidArgument(format!(
                "root '{}' must be a hidden node",
                doc.root
            )))
        }
    };
    let leaves: Vec<Leaf> = doc
        .leaves
        .iter()
        .map(|l| Leaf {
            name: l.name.clone(),
            mean: l.mean,
            variance: l.variance,
        })
        .collect();
    let mut model =
        TreeModel::new(leaves, doc.hidden.len(), edges, root).with_degenerate(doc.flags.degenerate);
    for note in &doc.flags.notes {
        model.push_note(note.clone());
    }
    let report = model.validate(&Tolerances::default());
    if !report.passed() {
        return Err(Error::InvalidTree { report });
    }
    Ok(model)
}

/// Serialize a model as pretty JSON with a trailing newline.
pub fn write_model_json<W: Write>(mut writer: W, t: &TreeModel) -> Result<()> {
    let doc = model_to_document(t)?;
    serde_json::to_writer_pretty(&mut writer, &doc)?;
    writer.write_all(b"\n")?;
    Ok(())
}

/// Read and validate a model from JSON.
pub fn read_model_json<R: Read>(reader: R) -> Result<TreeModel> {
    let doc: TreeModelDocument = serde_json::from_reader(reader)?;
    model_from_document(&doc)
}

/// Interpret named matrix entries as a correlation or covariance matrix and
/// return the correlation form plus per-leaf statistics (means zero; unit
/// variances unless covariances were given).
pub fn matrix_to_correlations(
    names: &[String],
    entries: DMatrix<f64>,
    covariance: bool,
) -> Result<(Vec<Leaf>, CorrelationMatrix)> {
    if covariance {
        let cov = CovarianceMatrix::from_parts(vec![0.0; names.len()], entries)?;
        let leaves = names
            .iter()
            .enumerate()
            .map(|(i, name)| Leaf {
                name: name.clone(),
                mean: 0.0,
                variance: cov.get(i, i),
            })
            .collect();
        Ok((leaves, cov.to_correlation()?))
    } else {
        let leaves = names.iter().map(Leaf::standard).collect();
        Ok((leaves, CorrelationMatrix::from_matrix(entries)?))
    }
}
