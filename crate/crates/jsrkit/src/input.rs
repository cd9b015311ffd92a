//! Matrix-set input documents.
//!
//! Two on-disk formats describe a matrix set: a JSON document
//! `{"name": str?, "matrices": [[[row], [row], ...], ...], "metadata": {..}?}`
//! and a plain-text format with one matrix per blank-line-separated block,
//! rows on lines, entries whitespace-separated. Both parse into
//! [`InputDocument`], which validates shape and converts to a
//! [`MatrixSet`](crate::bounds::MatrixSet).

use crate::bounds::{BoundsError, MatrixSet};
use crate::linalg::DenseMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid input document: {0}")]
    Schema(String),
}

/// On-disk encodings of a matrix set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Json,
    Txt,
}

/// A parsed matrix-set file: one or more square matrices of a common
/// dimension, an optional name, and free-form metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub matrices: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl InputDocument {
    /// Checks the shape invariants: at least one matrix, all square of the
    /// same dimension, every entry finite.
    pub fn validate(&self) -> Result<(), InputError> {
        let first = self
            .matrices
            .first()
            .ok_or_else(|| InputError::Schema("document contains no matrices".into()))?;
        let n = first.len();
        if n == 0 {
            return Err(InputError::Schema("matrix 1 is empty".into()));
        }
        for (k, grid) in self.matrices.iter().enumerate() {
            if grid.len() != n {
                return Err(InputError::Schema(format!(
                    "matrix {} has {} rows, expected {n}",
                    k + 1,
                    grid.len()
                )));
            }
            for (r, row) in grid.iter().enumerate() {
                if row.len() != n {
                    return Err(InputError::Schema(format!(
                        "matrix {}, row {} has {} entries, expected {n}",
                        k + 1,
                        r + 1,
                        row.len()
                    )));
                }
                if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                    return Err(InputError::Schema(format!(
                        "matrix {}, row {}, column {} is not finite",
                        k + 1,
                        r + 1,
                        c + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_matrix_set(&self) -> Result<MatrixSet, InputError> {
        self.validate()?;
        let mut matrices = Vec::with_capacity(self.matrices.len());
        for grid in &self.matrices {
            matrices
                .push(DenseMatrix::from_rows(grid).map_err(|e| InputError::Schema(e.to_string()))?);
        }
        MatrixSet::new(matrices, self.name.clone()).map_err(|e: BoundsError| match e {
            BoundsError::InvalidArgument(msg) => InputError::Schema(msg),
            other => InputError::Schema(other.to_string()),
        })
    }
}

pub fn parse_json(text: &str) -> Result<InputDocument, InputError> {
    let doc: InputDocument = serde_json::from_str(text)?;
    doc.validate()?;
    Ok(doc)
}

/// Parses the plain-text format: matrices separated by one or more blank
/// lines, one row per line, entries separated by whitespace. Lines starting
/// with `#` are comments.
pub fn parse_txt(text: &str) -> Result<InputDocument, InputError> {
    let mut matrices: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut current: Vec<Vec<f64>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            if !current.is_empty() {
                matrices.push(std::mem::take(&mut current));
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for token in line.split_whitespace() {
            let value: f64 = token.parse().map_err(|_| {
                InputError::Schema(format!(
                    "line {}: cannot parse '{token}' as a number",
                    lineno + 1
                ))
            })?;
            row.push(value);
        }
        current.push(row);
    }
    if !current.is_empty() {
        matrices.push(current);
    }
    let doc = InputDocument { name: None, matrices, metadata: BTreeMap::new() };
    doc.validate()?;
    Ok(doc)
}

pub fn load(path: &Path, format: InputFormat) -> Result<InputDocument, InputError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| InputError::Io { path: path.display().to_string(), source })?;
    match format {
        InputFormat::Json => parse_json(&text),
        InputFormat::Txt => parse_txt(&text),
    }
}
