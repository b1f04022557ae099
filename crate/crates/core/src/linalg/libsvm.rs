//! LIBSVM text format reader.
//!
//! One sample per line, `label idx:val idx:val ...`, feature indices
//! 1-based, `#` starts a comment. Rows become samples, columns features;
//! the feature dimension is the largest index seen unless overridden.

use std::fs;
use std::path::Path;

use nalgebra::DVector;
use thiserror::Error;

use super::{Matrix, ProblemInstance};

#[derive(Debug, Error)]
pub enum LibsvmError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: duplicate feature index {index}")]
    DuplicateFeature { line: usize, index: usize },
    #[error("line {line}: feature index {index} exceeds declared dimension {dim}")]
    IndexBeyondDim {
        line: usize,
        index: usize,
        dim: usize,
    },
    #[error("empty dataset: no samples found")]
    EmptyDataset,
}

pub fn read_libsvm(path: &Path) -> Result<ProblemInstance, LibsvmError> {
    read_impl(path, None)
}

/// Like [`read_libsvm`] but with a fixed feature dimension; indices beyond
/// it are rejected.
pub fn read_libsvm_with_dim(path: &Path, dim: usize) -> Result<ProblemInstance, LibsvmError> {
    read_impl(path, Some(dim))
}

fn read_impl(path: &Path, dim_override: Option<usize>) -> Result<ProblemInstance, LibsvmError> {
    let text = fs::read_to_string(path).map_err(|source| LibsvmError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_libsvm(&text, dim_override)
}

pub(crate) fn parse_libsvm(
    text: &str,
    dim_override: Option<usize>,
) -> Result<ProblemInstance, LibsvmError> {
    let mut labels: Vec<f64> = Vec::new();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut max_index = 0usize;

    for (lineno, raw) in text.lines().enumerate() {
        let line_id = lineno + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let mut fields = line.split_whitespace();
        let Some(label_str) = fields.next() else {
            continue;
        };
        let label: f64 = label_str.parse().map_err(|_| LibsvmError::Malformed {
            line: line_id,
            msg: format!("invalid label `{label_str}`"),
        })?;
        let row = labels.len();
        labels.push(label);

        let mut seen_on_line: Vec<usize> = Vec::new();
        for field in fields {
            let (idx_str, val_str) = field.split_once(':').ok_or_else(|| {
                LibsvmError::Malformed {
                    line: line_id,
                    msg: format!("expected `index:value`, got `{field}`"),
                }
            })?;
            let idx: usize = idx_str.parse().map_err(|_| LibsvmError::Malformed {
                line: line_id,
                msg: format!("invalid feature index `{idx_str}`"),
            })?;
            if idx == 0 {
                return Err(LibsvmError::Malformed {
                    line: line_id,
                    msg: "feature indices are 1-based".into(),
                });
            }
            let val: f64 = val_str.parse().map_err(|_| LibsvmError::Malformed {
                line: line_id,
                msg: format!("invalid feature value `{val_str}`"),
            })?;
            if seen_on_line.contains(&idx) {
                return Err(LibsvmError::DuplicateFeature {
                    line: line_id,
                    index: idx,
                });
            }
            if let Some(dim) = dim_override {
                if idx > dim {
                    return Err(LibsvmError::IndexBeyondDim {
                        line: line_id,
                        index: idx,
                        dim,
                    });
                }
            }
            seen_on_line.push(idx);
            max_index = max_index.max(idx);
            triplets.push((row, idx - 1, val));
        }
    }

    if labels.is_empty() {
        return Err(LibsvmError::EmptyDataset);
    }
    let ncols = dim_override.unwrap_or(max_index);
    if ncols == 0 {
        return Err(LibsvmError::EmptyDataset);
    }
    let a = Matrix::from_triplets(labels.len(), ncols, &triplets)
        .expect("indices validated during parse");
    let b = DVector::from_vec(labels);
    Ok(ProblemInstance::new(a, b).expect("dimensions consistent by construction"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn parses_two_line_sample() {
        let p = parse_libsvm("1 1:2.0 3:1.0\n-1 2:4.0\n", None).unwrap();
        let expected = DMatrix::from_row_slice(2, 3, &[2.0, 0.0, 1.0, 0.0, 4.0, 0.0]);
        assert_eq!(p.a.to_dense(), expected);
        assert!(matches!(p.a, Matrix::Sparse(_)));
        assert_eq!(p.b, DVector::from_vec(vec![1.0, -1.0]));
    }

    #[test]
    fn comment_only_input_is_empty() {
        let err = parse_libsvm("# header\n   # another\n", None).unwrap_err();
        assert!(matches!(err, LibsvmError::EmptyDataset));
    }

    #[test]
    fn duplicate_index_is_flagged() {
        let err = parse_libsvm("1 1:2.0 1:3.0\n", None).unwrap_err();
        assert!(matches!(
            err,
            LibsvmError::DuplicateFeature { line: 1, index: 1 }
        ));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_libsvm("1 1:2.0\nbogus-label 1:1\n", None).unwrap_err();
        match err {
            LibsvmError::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn dimension_override_extends_and_rejects() {
        let p = parse_libsvm("1 1:2.0\n", Some(5)).unwrap();
        assert_eq!(p.a.ncols(), 5);
        assert!(matches!(
            parse_libsvm("1 7:2.0\n", Some(5)),
            Err(LibsvmError::IndexBeyondDim { .. })
        ));
    }

    #[test]
    fn trailing_comment_is_ignored() {
        let p = parse_libsvm("2.5 1:1.0 # tail comment 9:9\n", None).unwrap();
        assert_eq!(p.a.ncols(), 1);
        assert_eq!(p.b[0], 2.5);
    }
}
