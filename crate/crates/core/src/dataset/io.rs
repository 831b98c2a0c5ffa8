//! CSV ingestion and export.
//!
//! Dialect: comma separated, mandatory header row, UTF-8, `.` decimal point.
//! The treatment column must hold the integers `0` or `1`; every other bound
//! column must parse as a finite real. Rows that fail validation are rejected
//! with the offending line and column, never imputed.

use super::{DatasetError, GroundTruth, ObservationalDataset};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

/// Binds CSV columns to dataset roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub treatment: String,
    pub outcome: String,
    /// Covariate columns in order. `None` takes every column not bound to
    /// another role, in header order.
    #[serde(default)]
    pub covariates: Option<Vec<String>>,
    #[serde(default)]
    pub mu0: Option<String>,
    #[serde(default)]
    pub mu1: Option<String>,
    #[serde(default)]
    pub propensity: Option<String>,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            treatment: "t".into(),
            outcome: "y".into(),
            covariates: None,
            mu0: None,
            mu1: None,
            propensity: None,
        }
    }
}

impl ColumnSchema {
    /// Schema for files written by [`write_csv`] with truth columns inline.
    pub fn with_truth_columns() -> Self {
        Self {
            mu0: Some("mu0".into()),
            mu1: Some("mu1".into()),
            propensity: Some("true_propensity".into()),
            ..Self::default()
        }
    }

    fn bound_roles(&self) -> Vec<&str> {
        let mut roles = vec![self.treatment.as_str(), self.outcome.as_str()];
        roles.extend(
            [&self.mu0, &self.mu1, &self.propensity]
                .into_iter()
                .flatten()
                .map(String::as_str),
        );
        roles
    }
}

fn open(path: &Path) -> Result<csv::Reader<File>, DatasetError> {
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn header_index(headers: &csv::StringRecord) -> Result<HashMap<String, usize>, DatasetError> {
    let mut index = HashMap::new();
    for (i, name) in headers.iter().enumerate() {
        if index.insert(name.to_string(), i).is_some() {
            return Err(DatasetError::DuplicateColumn(name.to_string()));
        }
    }
    Ok(index)
}

fn lookup(index: &HashMap<String, usize>, name: &str) -> Result<usize, DatasetError> {
    index
        .get(name)
        .copied()
        .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
}

fn parse_real(field: &str, line: u64, column: &str) -> Result<f64, DatasetError> {
    let v: f64 = field.parse().map_err(|_| DatasetError::NonNumeric {
        line,
        column: column.to_string(),
        value: field.to_string(),
    })?;
    if !v.is_finite() {
        return Err(DatasetError::NonFinite {
            line,
            column: column.to_string(),
        });
    }
    Ok(v)
}

/// Load and validate a dataset from `path` according to `schema`.
pub fn load_csv(path: &Path, schema: &ColumnSchema) -> Result<ObservationalDataset, DatasetError> {
    let mut reader = open(path)?;
    let csv_err = |source| DatasetError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let headers = reader.headers().map_err(csv_err)?.clone();
    let index = header_index(&headers)?;

    let roles = schema.bound_roles();
    for (i, a) in roles.iter().enumerate() {
        if roles[..i].contains(a) {
            return Err(DatasetError::DuplicateColumn(a.to_string()));
        }
    }
    let covariate_names: Vec<String> = match &schema.covariates {
        Some(names) => {
            for (i, a) in names.iter().enumerate() {
                if names[..i].contains(a) || roles.contains(&a.as_str()) {
                    return Err(DatasetError::DuplicateColumn(a.clone()));
                }
            }
            names.clone()
        }
        None => headers
            .iter()
            .filter(|h| !roles.contains(h))
            .map(str::to_string)
            .collect(),
    };
    if covariate_names.is_empty() {
        return Err(DatasetError::Invalid("no covariate columns".into()));
    }
    let cov_idx: Vec<usize> = covariate_names
        .iter()
        .map(|c| lookup(&index, c))
        .collect::<Result<_, _>>()?;
    let t_idx = lookup(&index, &schema.treatment)?;
    let y_idx = lookup(&index, &schema.outcome)?;
    let opt_idx = |name: &Option<String>| name.as_deref().map(|c| lookup(&index, c)).transpose();
    let mu0_idx = opt_idx(&schema.mu0)?;
    let mu1_idx = opt_idx(&schema.mu1)?;
    let p_idx = opt_idx(&schema.propensity)?;
    if mu0_idx.is_some() != mu1_idx.is_some() {
        return Err(DatasetError::Invalid(
            "mu0 and mu1 columns must be given together".into(),
        ));
    }

    let mut covariates = Vec::new();
    let mut treatments = Vec::new();
    let mut outcomes = Vec::new();
    let (mut mu0, mut mu1, mut prop) = (Vec::new(), Vec::new(), Vec::new());

    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        for (&ci, name) in cov_idx.iter().zip(&covariate_names) {
            covariates.push(parse_real(field(ci), line, name)?);
        }
        treatments.push(match field(t_idx) {
            "0" => false,
            "1" => true,
            other => {
                return Err(DatasetError::NonBinaryTreatment {
                    line,
                    column: schema.treatment.clone(),
                    value: other.to_string(),
                })
            }
        });
        outcomes.push(parse_real(field(y_idx), line, &schema.outcome)?);
        if let (Some(a), Some(b)) = (mu0_idx, mu1_idx) {
            mu0.push(parse_real(
                field(a),
                line,
                schema.mu0.as_deref().unwrap_or_default(),
            )?);
            mu1.push(parse_real(
                field(b),
                line,
                schema.mu1.as_deref().unwrap_or_default(),
            )?);
        }
        if let Some(pi) = p_idx {
            prop.push(parse_real(
                field(pi),
                line,
                schema.propensity.as_deref().unwrap_or_default(),
            )?);
        }
    }

    let truth = mu0_idx.map(|_| GroundTruth {
        mu0,
        mu1,
        true_propensity: p_idx.map(|_| prop),
    });
    ObservationalDataset::new(covariate_names, covariates, treatments, outcomes, truth)
}

/// Read a truth side-file (`mu0`, `mu1`, optional `true_propensity`) aligned
/// row-by-row with a dataset of `n` units.
pub fn load_truth_csv(path: &Path, n: usize) -> Result<GroundTruth, DatasetError> {
    let mut reader = open(path)?;
    let csv_err = |source| DatasetError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let headers = reader.headers().map_err(csv_err)?.clone();
    let index = header_index(&headers)?;
    let a = lookup(&index, "mu0")?;
    let b = lookup(&index, "mu1")?;
    let p = index.get("true_propensity").copied();
    let (mut mu0, mut mu1, mut prop) = (Vec::new(), Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        mu0.push(parse_real(field(a), line, "mu0")?);
        mu1.push(parse_real(field(b), line, "mu1")?);
        if let Some(pi) = p {
            prop.push(parse_real(field(pi), line, "true_propensity")?);
        }
    }
    if mu0.len() != n {
        return Err(DatasetError::Invalid(format!(
            "truth file has {} rows, dataset has {n}",
            mu0.len()
        )));
    }
    let truth = GroundTruth {
        mu0,
        mu1,
        true_propensity: p.map(|_| prop),
    };
    truth.validate(n)?;
    Ok(truth)
}

fn create(path: &Path) -> Result<csv::Writer<File>, DatasetError> {
    let file = File::create(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::Writer::from_writer(file))
}

/// Write covariates, `t` and `y`; with `include_truth`, also `mu0`, `mu1`
/// and (if known) `true_propensity` as extra columns.
///
/// Reals are written in shortest round-trip form, so reloading reproduces
/// every value bit-for-bit.
pub fn write_csv(
    data: &ObservationalDataset,
    path: &Path,
    include_truth: bool,
) -> Result<(), DatasetError> {
    let csv_err = |source| DatasetError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = create(path)?;
    let truth = data.truth().filter(|_| include_truth);
    let mut header: Vec<&str> = data.covariate_names().iter().map(String::as_str).collect();
    header.extend(["t", "y"]);
    if let Some(t) = truth {
        header.extend(["mu0", "mu1"]);
        if t.true_propensity.is_some() {
            header.push("true_propensity");
        }
    }
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..data.n() {
        let mut rec: Vec<String> = data.row(i).iter().map(f64::to_string).collect();
        rec.push(if data.treatments()[i] { "1" } else { "0" }.into());
        rec.push(data.outcomes()[i].to_string());
        if let Some(t) = truth {
            rec.push(t.mu0[i].to_string());
            rec.push(t.mu1[i].to_string());
            if let Some(p) = &t.true_propensity {
                rec.push(p[i].to_string());
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Write the truth side-file read by [`load_truth_csv`].
pub fn write_truth_csv(truth: &GroundTruth, path: &Path) -> Result<(), DatasetError> {
    let csv_err = |source| DatasetError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = create(path)?;
    let mut header = vec!["unit_index", "mu0", "mu1"];
    if truth.true_propensity.is_some() {
        header.push("true_propensity");
    }
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..truth.mu0.len() {
        let mut rec = vec![
            i.to_string(),
            truth.mu0[i].to_string(),
            truth.mu1[i].to_string(),
        ];
        if let Some(p) = &truth.true_propensity {
            rec.push(p[i].to_string());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file_with(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_small_file() {
        let f = file_with("a,b,t,y\n1,2,0,3.5\n4,5,1,6\n7,8,1,9\n");
        let data = load_csv(f.path(), &ColumnSchema::default()).unwrap();
        assert_eq!((data.n(), data.d()), (3, 2));
        assert_eq!(data.covariate_names(), &["a", "b"]);
        assert_eq!(data.treatments(), &[false, true, true]);
        assert_eq!(data.outcomes(), &[3.5, 6.0, 9.0]);
        assert!(data.truth().is_none());
    }

    #[test]
    fn non_binary_treatment_names_the_line() {
        let f = file_with("a,t,y\n1,0,1\n2,2,1\n");
        match load_csv(f.path(), &ColumnSchema::default()) {
            Err(DatasetError::NonBinaryTreatment { line, value, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(value, "2");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_and_non_finite_cells() {
        let f = file_with("a,t,y\n1,0,abc\n");
        let err = load_csv(f.path(), &ColumnSchema::default()).unwrap_err();
        assert!(
            matches!(err, DatasetError::NonNumeric { line: 2, ref column, .. } if column == "y")
        );
        let f = file_with("a,t,y\ninf,0,1\n");
        let err = load_csv(f.path(), &ColumnSchema::default()).unwrap_err();
        assert!(matches!(err, DatasetError::NonFinite { line: 2, ref column } if column == "a"));
    }

    #[test]
    fn missing_and_duplicate_columns() {
        let f = file_with("a,t,outcome\n1,0,1\n");
        assert!(matches!(
            load_csv(f.path(), &ColumnSchema::default()),
            Err(DatasetError::MissingColumn(c)) if c == "y"
        ));
        let f = file_with("a,a,t,y\n1,1,0,1\n");
        assert!(matches!(
            load_csv(f.path(), &ColumnSchema::default()),
            Err(DatasetError::DuplicateColumn(_))
        ));
        let f = file_with("a,t,y\n1,0,1\n");
        let schema = ColumnSchema {
            covariates: Some(vec!["a".into(), "a".into()]),
            ..ColumnSchema::default()
        };
        assert!(matches!(
            load_csv(f.path(), &schema),
            Err(DatasetError::DuplicateColumn(_))
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_csv(Path::new("/nonexistent/data.csv"), &ColumnSchema::default());
        assert!(matches!(err, Err(DatasetError::Io { .. })));
    }

    #[test]
    fn ihdp_style_file_with_truth_columns() {
        let mut text = String::new();
        let names: Vec<String> = (1..=25).map(|j| format!("x{j}")).collect();
        text.push_str(&format!(
            "treatment,y_factual,mu0,mu1,{}\n",
            names.join(",")
        ));
        for i in 0..4 {
            let xs: Vec<String> = (0..25)
                .map(|j| format!("{}", (i * 25 + j) as f64 / 10.0))
                .collect();
            text.push_str(&format!("{},{}.5,1.0,4.0,{}\n", i % 2, i, xs.join(",")));
        }
        let f = file_with(&text);
        let schema = ColumnSchema {
            treatment: "treatment".into(),
            outcome: "y_factual".into(),
            mu0: Some("mu0".into()),
            mu1: Some("mu1".into()),
            ..ColumnSchema::default()
        };
        let data = load_csv(f.path(), &schema).unwrap();
        assert_eq!(data.d(), 25);
        assert_eq!(data.true_ate(), Some(3.0));
        assert_eq!(data.row(1)[0], 2.5);
    }
}
