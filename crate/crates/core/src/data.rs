//! Dataset container, the two-Gaussian generator, and schema-driven CSV
//! ingestion.
//!
//! CSV files are UTF-8, comma-separated, decimal-point reals, optional
//! header. A [`CsvSchema`] names the label column, an optional group column
//! (e.g. a year for grouped cross-validation), an optional label mapping for
//! classification, and which columns are features. Rows with blanks or
//! non-numeric feature cells are rejected with the offending location.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, RandomStream};

/// An in-memory dataset: features, targets, optional per-row group keys.
///
/// Classification targets are in {-1, +1}; regression targets are plain
/// reals. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    features: Matrix,
    targets: Vec<f64>,
    groups: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Matrix,
        targets: Vec<f64>,
        groups: Option<Vec<String>>,
    ) -> Result<Self> {
        if targets.len() != features.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature rows but {} targets",
                features.rows(),
                targets.len()
            )));
        }
        if let Some(g) = &groups {
            if g.len() != features.rows() {
                return Err(Error::ShapeMismatch(format!(
                    "{} feature rows but {} group labels",
                    features.rows(),
                    g.len()
                )));
            }
        }
        if let Some(v) = targets.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite target {v}")));
        }
        Ok(Self {
            name: name.into(),
            features,
            targets,
            groups,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn groups(&self) -> Option<&[String]> {
        self.groups.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    /// Row subset preserving order, with group labels carried along.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let features = self.features.select_rows(indices)?;
        let targets = indices.iter().map(|&i| self.targets[i]).collect();
        let groups = self
            .groups
            .as_ref()
            .map(|g| indices.iter().map(|&i| g[i].clone()).collect());
        Dataset::new(self.name.clone(), features, targets, groups)
    }

    /// Splits into two disjoint row subsets. The index sets must not overlap
    /// and must be in range.
    pub fn split_rows(&self, first: &[usize], second: &[usize]) -> Result<(Dataset, Dataset)> {
        let mut seen = vec![false; self.len()];
        for &i in first.iter().chain(second) {
            if i >= self.len() {
                return Err(Error::InvalidArgument(format!(
                    "row index {i} out of range for {} rows",
                    self.len()
                )));
            }
            if seen[i] {
                return Err(Error::InvalidArgument(format!(
                    "row index {i} appears in both splits"
                )));
            }
            seen[i] = true;
        }
        Ok((self.subset(first)?, self.subset(second)?))
    }

    /// Distinct group keys in sorted order with their row indices.
    pub fn group_index(&self) -> Result<BTreeMap<String, Vec<usize>>> {
        let groups = self.groups.as_ref().ok_or_else(|| {
            Error::Data(format!("dataset '{}' has no group labels", self.name))
        })?;
        let mut map: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, g) in groups.iter().enumerate() {
            map.entry(g.clone()).or_default().push(i);
        }
        Ok(map)
    }
}

/// Two isotropic Gaussian clouds in the plane, labeled +1 / -1.
///
/// Draws `n_per_class` positive points around `center_pos`, then
/// `n_per_class` negative points around `center_neg`; each coordinate is an
/// independent `N(center, sigma^2)` draw.
pub fn gen_synthetic_gaussian(
    n_per_class: usize,
    center_pos: [f64; 2],
    center_neg: [f64; 2],
    sigma: f64,
    rng: &mut RandomStream,
) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(Error::InvalidArgument("n_per_class must be >= 1".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be > 0, got {sigma}"
        )));
    }
    let mut rows = Vec::with_capacity(2 * n_per_class);
    let mut targets = Vec::with_capacity(2 * n_per_class);
    for (center, label) in [(center_pos, 1.0), (center_neg, -1.0)] {
        for _ in 0..n_per_class {
            let x0 = center[0] + sigma * rng.standard_normal();
            let x1 = center[1] + sigma * rng.standard_normal();
            rows.push(vec![x0, x1]);
            targets.push(label);
        }
    }
    Dataset::new("synthetic-gaussian", Matrix::from_rows(&rows)?, targets, None)
}

/// Synthetic grouped regression data for exercising the grouped
/// leave-one-group-out pipeline: a smooth nonlinear target with
/// group-specific offsets and noise that grows with the first coordinate,
/// so the rejector has structure to find.
pub fn gen_synthetic_grouped(
    n_per_group: usize,
    n_groups: usize,
    dim: usize,
    noise_std: f64,
    rng: &mut RandomStream,
) -> Result<Dataset> {
    if n_per_group == 0 || n_groups < 2 || dim == 0 {
        return Err(Error::InvalidArgument(
            "need n_per_group >= 1, n_groups >= 2, dim >= 1".into(),
        ));
    }
    let mut rows = Vec::with_capacity(n_per_group * n_groups);
    let mut targets = Vec::with_capacity(n_per_group * n_groups);
    let mut groups = Vec::with_capacity(n_per_group * n_groups);
    for g in 0..n_groups {
        let offset = 0.1 * g as f64;
        for _ in 0..n_per_group {
            let x = rng.sample_normal(dim, 0.0, 1.0)?;
            let s: f64 = x.iter().sum::<f64>() / (dim as f64).sqrt();
            let local_noise = noise_std * (1.0 + 4.0 * x[0].abs());
            let y = s.sin() + 0.5 * s + offset + local_noise * rng.standard_normal();
            rows.push(x);
            targets.push(y);
            groups.push(format!("group{g}"));
        }
    }
    Dataset::new(
        "synthetic-grouped",
        Matrix::from_rows(&rows)?,
        targets,
        Some(groups),
    )
}

/// A column referenced by header name or zero-based index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl ColumnRef {
    fn resolve(&self, headers: Option<&[String]>, n_cols: usize) -> Result<usize> {
        match self {
            ColumnRef::Index(i) => {
                if *i >= n_cols {
                    Err(Error::Data(format!(
                        "column index {i} out of range for {n_cols} columns"
                    )))
                } else {
                    Ok(*i)
                }
            }
            ColumnRef::Name(name) => {
                let headers = headers.ok_or_else(|| {
                    Error::Data(format!(
                        "column '{name}' referenced by name but the file has no header"
                    ))
                })?;
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::Data(format!("no column named '{name}'")))
            }
        }
    }
}

/// Declarative description of how to read a CSV file into a [`Dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub path: PathBuf,
    #[serde(default)]
    pub has_header: bool,
    pub label_column: ColumnRef,
    #[serde(default)]
    pub group_column: Option<ColumnRef>,
    /// Mapping from raw label text to +1/-1 for classification; omit for
    /// regression (labels parse as reals).
    #[serde(default)]
    pub label_mapping: Option<BTreeMap<String, f64>>,
    /// Explicit feature columns; omitted means all remaining columns.
    #[serde(default)]
    pub feature_columns: Option<Vec<ColumnRef>>,
    /// Dataset name for reports; defaults to the file stem.
    #[serde(default)]
    pub name: Option<String>,
}

impl CsvSchema {
    pub fn load(schema_path: &Path) -> Result<CsvSchema> {
        let text = std::fs::read_to_string(schema_path).map_err(|e| {
            Error::Data(format!("cannot read schema {}: {e}", schema_path.display()))
        })?;
        let mut schema: CsvSchema = serde_json::from_str(&text)?;
        // A relative data path is resolved against the schema's directory.
        if schema.path.is_relative() {
            if let Some(dir) = schema_path.parent() {
                schema.path = dir.join(&schema.path);
            }
        }
        Ok(schema)
    }
}

/// Reads a CSV file according to `schema`.
pub fn load_csv_dataset(schema: &CsvSchema) -> Result<Dataset> {
    let file = std::fs::File::open(&schema.path).map_err(|e| {
        Error::Data(format!("cannot open {}: {e}", schema.path.display()))
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(file);

    let headers: Option<Vec<String>> = if schema.has_header {
        Some(
            reader
                .headers()
                .map_err(|e| Error::Data(format!("bad header: {e}")))?
                .iter()
                .map(|s| s.to_string())
                .collect(),
        )
    } else {
        None
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    let mut groups: Vec<String> = Vec::new();
    let mut feature_cols: Option<Vec<usize>> = None;
    let mut label_col = 0;
    let mut group_col: Option<usize> = None;

    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            Error::Data(format!("{}: row {}: {e}", schema.path.display(), row_idx + 1))
        })?;
        let n_cols = record.len();
        if feature_cols.is_none() {
            label_col = schema.label_column.resolve(headers.as_deref(), n_cols)?;
            group_col = schema
                .group_column
                .as_ref()
                .map(|c| c.resolve(headers.as_deref(), n_cols))
                .transpose()?;
            let cols = match &schema.feature_columns {
                Some(explicit) => {
                    let cols = explicit
                        .iter()
                        .map(|c| c.resolve(headers.as_deref(), n_cols))
                        .collect::<Result<Vec<_>>>()?;
                    if cols.contains(&label_col) {
                        return Err(Error::Data(
                            "label column listed among feature columns".into(),
                        ));
                    }
                    cols
                }
                None => (0..n_cols)
                    .filter(|&j| j != label_col && Some(j) != group_col)
                    .collect(),
            };
            feature_cols = Some(cols);
        }
        let cols = feature_cols.as_ref().unwrap();

        let mut row = Vec::with_capacity(cols.len());
        for &j in cols {
            let cell = record.get(j).ok_or_else(|| {
                Error::Data(format!("row {} is missing column {j}", row_idx + 1))
            })?;
            let value: f64 = cell.parse().map_err(|_| {
                Error::Data(format!(
                    "row {}, column {}: non-numeric feature cell '{cell}'",
                    row_idx + 1,
                    j
                ))
            })?;
            if !value.is_finite() {
                return Err(Error::Data(format!(
                    "row {}, column {}: non-finite feature value",
                    row_idx + 1,
                    j
                )));
            }
            row.push(value);
        }
        rows.push(row);

        let raw_label = record.get(label_col).ok_or_else(|| {
            Error::Data(format!("row {} is missing the label column", row_idx + 1))
        })?;
        let target = match &schema.label_mapping {
            Some(mapping) => *mapping.get(raw_label).ok_or_else(|| {
                Error::Data(format!(
                    "row {}: unmapped label value '{raw_label}' (mapping covers: {})",
                    row_idx + 1,
                    mapping.keys().cloned().collect::<Vec<_>>().join(", ")
                ))
            })?,
            None => raw_label.parse().map_err(|_| {
                Error::Data(format!(
                    "row {}: non-numeric regression target '{raw_label}'",
                    row_idx + 1
                ))
            })?,
        };
        targets.push(target);

        if let Some(gc) = group_col {
            let g = record.get(gc).ok_or_else(|| {
                Error::Data(format!("row {} is missing the group column", row_idx + 1))
            })?;
            groups.push(g.to_string());
        }
    }

    if rows.is_empty() {
        return Err(Error::Data(format!(
            "{} contains no data rows",
            schema.path.display()
        )));
    }

    let name = schema.name.clone().unwrap_or_else(|| {
        schema
            .path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "csv".to_string())
    });
    Dataset::new(
        name,
        Matrix::from_rows(&rows)?,
        targets,
        if groups.is_empty() { None } else { Some(groups) },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn synthetic_shape_and_label_balance() {
        let mut rng = RandomStream::new(1);
        let data =
            gen_synthetic_gaussian(200, [0.5, 0.5], [-0.5, -0.5], 1.0, &mut rng).unwrap();
        assert_eq!(data.len(), 400);
        assert_eq!(data.dim(), 2);
        let pos = data.targets().iter().filter(|&&y| y == 1.0).count();
        assert_eq!(pos, 200);
    }

    #[test]
    fn synthetic_degenerate_sigma_concentrates_on_centers() {
        let mut rng = RandomStream::new(2);
        let data =
            gen_synthetic_gaussian(50, [0.5, 0.5], [-0.5, -0.5], 1e-9, &mut rng).unwrap();
        for i in 0..50 {
            assert!((data.row(i)[0] - 0.5).abs() < 1e-6);
            assert!((data.row(i)[1] - 0.5).abs() < 1e-6);
        }
        assert!(gen_synthetic_gaussian(5, [0.0; 2], [1.0; 2], 0.0, &mut rng).is_err());
    }

    #[test]
    fn synthetic_is_seed_stable() {
        let mut a = RandomStream::new(33);
        let mut b = RandomStream::new(33);
        let d1 = gen_synthetic_gaussian(20, [0.5, 0.5], [-0.5, -0.5], 1.0, &mut a).unwrap();
        let d2 = gen_synthetic_gaussian(20, [0.5, 0.5], [-0.5, -0.5], 1.0, &mut b).unwrap();
        assert_eq!(d1, d2);
    }

    /// Closed-form check: scores along the optimal direction have
    /// AUC = Phi(||mu+ - mu-|| / (sigma * sqrt(2))), which is Phi(1) for the
    /// default geometry at sigma = 1.
    #[test]
    fn synthetic_optimal_direction_auc_matches_gaussian_formula() {
        let mut rng = RandomStream::new(404);
        let data =
            gen_synthetic_gaussian(50_000, [0.5, 0.5], [-0.5, -0.5], 1.0, &mut rng).unwrap();
        let scores: Vec<f64> = (0..data.len())
            .map(|i| data.row(i)[0] + data.row(i)[1])
            .collect();
        let auc = crate::eval::auc_roc(&scores, data.targets()).unwrap();
        let phi_1 = 0.8413447460685429;
        assert!((auc - phi_1).abs() < 0.01, "auc {auc}");
    }

    #[test]
    fn split_rows_partition_cases() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let data = Dataset::new("t", x, vec![1.0, -1.0, 1.0], None).unwrap();

        let (all, none) = data.split_rows(&[0, 1, 2], &[]).unwrap();
        assert_eq!(all, data);
        assert!(none.is_empty());

        let (first, rest) = data.split_rows(&[0], &[1, 2]).unwrap();
        assert_eq!(first.row(0), &[1.0]);
        assert_eq!(rest.len(), 2);
        assert_eq!(first.len() + rest.len(), data.len());

        assert!(data.split_rows(&[0, 1], &[1]).is_err());
        assert!(data.split_rows(&[5], &[]).is_err());
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_classification_with_mapping() {
        let f = write_temp("5.0,1.5,1\n3.0,2.5,2\n");
        let schema = CsvSchema {
            path: f.path().to_path_buf(),
            has_header: false,
            label_column: ColumnRef::Index(2),
            group_column: None,
            label_mapping: Some(BTreeMap::from([
                ("1".to_string(), 1.0),
                ("2".to_string(), -1.0),
            ])),
            feature_columns: None,
            name: Some("toy".into()),
        };
        let data = load_csv_dataset(&schema).unwrap();
        assert_eq!(data.targets(), &[1.0, -1.0]);
        assert_eq!(data.dim(), 2);
        assert_eq!(data.row(1), &[3.0, 2.5]);
    }

    #[test]
    fn csv_unmapped_label_is_reported() {
        let f = write_temp("1.0,3\n");
        let schema = CsvSchema {
            path: f.path().to_path_buf(),
            has_header: false,
            label_column: ColumnRef::Index(1),
            group_column: None,
            label_mapping: Some(BTreeMap::from([("1".to_string(), 1.0)])),
            feature_columns: None,
            name: None,
        };
        let err = load_csv_dataset(&schema).unwrap_err().to_string();
        assert!(err.contains("unmapped label value '3'"), "{err}");
    }

    #[test]
    fn csv_non_numeric_cell_names_row_and_column() {
        let f = write_temp("1.0,2.0,0.5\n1.0,oops,0.7\n");
        let schema = CsvSchema {
            path: f.path().to_path_buf(),
            has_header: false,
            label_column: ColumnRef::Index(2),
            group_column: None,
            label_mapping: None,
            feature_columns: None,
            name: None,
        };
        let err = load_csv_dataset(&schema).unwrap_err().to_string();
        assert!(err.contains("row 2") && err.contains("column 1"), "{err}");
    }

    #[test]
    fn csv_missing_file_and_header_names() {
        let schema = CsvSchema {
            path: PathBuf::from("/nonexistent/x.csv"),
            has_header: false,
            label_column: ColumnRef::Index(0),
            group_column: None,
            label_mapping: None,
            feature_columns: None,
            name: None,
        };
        assert!(load_csv_dataset(&schema).is_err());

        let f = write_temp("a,b,y,grp\n1,2,0.5,g1\n3,4,0.25,g2\n");
        let schema = CsvSchema {
            path: f.path().to_path_buf(),
            has_header: true,
            label_column: ColumnRef::Name("y".into()),
            group_column: Some(ColumnRef::Name("grp".into())),
            label_mapping: None,
            feature_columns: None,
            name: None,
        };
        let data = load_csv_dataset(&schema).unwrap();
        assert_eq!(data.dim(), 2);
        assert_eq!(data.groups().unwrap(), &["g1".to_string(), "g2".to_string()]);
        assert_eq!(data.targets(), &[0.5, 0.25]);
    }

    #[test]
    fn grouped_synthetic_has_all_groups() {
        let mut rng = RandomStream::new(9);
        let data = gen_synthetic_grouped(30, 6, 4, 0.1, &mut rng).unwrap();
        assert_eq!(data.len(), 180);
        let index = data.group_index().unwrap();
        assert_eq!(index.len(), 6);
        assert!(index.values().all(|v| v.len() == 30));
    }
}
