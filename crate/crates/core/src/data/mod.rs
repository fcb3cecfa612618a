//! Tabular data: design matrices, targets, masking, splitting.

mod csv_io;
mod schema;

pub use csv_io::{load_csv, CsvOptions, Encoding};
pub use schema::{Column, ColumnKind, FeatureSchema, INTERCEPT};

use std::collections::BTreeSet;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::loss::Target;

/// `n × (p+1)` feature matrix whose first column is the intercept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    values: Array2<f64>,
    schema: FeatureSchema,
}

impl DesignMatrix {
    pub fn new(values: Array2<f64>, schema: FeatureSchema) -> Result<Self> {
        if values.ncols() != schema.width() {
            return Err(Error::DimensionMismatch { expected: schema.width(), found: values.ncols() });
        }
        if values.nrows() == 0 {
            return Err(Error::Empty("design matrix has no rows".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("design matrix has non-finite entries".into()));
        }
        if values.column(0).iter().any(|&v| v != 1.0) {
            return Err(Error::Data("column 0 must be identically 1".into()));
        }
        for (j, c) in schema.columns().iter().enumerate() {
            if c.kind == ColumnKind::CategoricalDummy
                && values.column(j).iter().any(|&v| v != 0.0 && v != 1.0)
            {
                return Err(Error::Data(format!("dummy column '{}' is not 0/1", c.name)));
            }
        }
        Ok(DesignMatrix { values, schema })
    }

    /// Prepends the intercept to a raw `n × p` feature block.
    pub fn with_intercept(features: ArrayView2<f64>, schema: FeatureSchema) -> Result<Self> {
        let (n, p) = features.dim();
        let mut values = Array2::ones((n, p + 1));
        values.slice_mut(ndarray::s![.., 1..]).assign(&features);
        DesignMatrix::new(values, schema)
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    pub fn feature_count(&self) -> usize {
        self.values.ncols() - 1
    }

    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        DesignMatrix { values: self.values.select(Axis(0), rows), schema: self.schema.clone() }
    }

    /// Drops feature column `j`, e.g. for leave-one-covariate-out refits.
    pub fn without_column(&self, j: usize) -> Result<DesignMatrix> {
        let schema = self.schema.without(j)?;
        let keep: Vec<usize> = (0..self.width()).filter(|&c| c != j).collect();
        Ok(DesignMatrix { values: self.values.select(Axis(1), &keep), schema })
    }

    /// Keeps the intercept and the listed feature columns.
    pub fn select_columns(&self, keep: &[usize]) -> Result<DesignMatrix> {
        let schema = self.schema.select(keep)?;
        let mut cols = vec![0];
        cols.extend(keep.iter().copied().filter(|&j| j != 0));
        Ok(DesignMatrix { values: self.values.select(Axis(1), &cols), schema })
    }

    pub(crate) fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }
}

/// Response vector. Class indices are zero-based (`0..class_count`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TargetVector {
    Regression { values: Vec<f64> },
    Classification { labels: Vec<usize>, class_count: usize },
}

impl TargetVector {
    pub fn regression(values: Vec<f64>) -> Self {
        TargetVector::Regression { values }
    }

    pub fn classification(labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&c| c >= class_count) {
            return Err(Error::IndexOutOfRange { index: bad, bound: class_count });
        }
        Ok(TargetVector::Classification { labels, class_count })
    }

    pub fn len(&self) -> usize {
        match self {
            TargetVector::Regression { values } => values.len(),
            TargetVector::Classification { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Target {
        match self {
            TargetVector::Regression { values } => Target::Real(values[i]),
            TargetVector::Classification { labels, .. } => Target::Class(labels[i]),
        }
    }

    /// Output width a model needs: 1 for regression, `C` for classification.
    pub fn output_width(&self) -> usize {
        match self {
            TargetVector::Regression { .. } => 1,
            TargetVector::Classification { class_count, .. } => *class_count,
        }
    }

    pub fn class_count(&self) -> Option<usize> {
        match self {
            TargetVector::Classification { class_count, .. } => Some(*class_count),
            TargetVector::Regression { .. } => None,
        }
    }

    pub fn select(&self, rows: &[usize]) -> TargetVector {
        match self {
            TargetVector::Regression { values } => {
                TargetVector::Regression { values: rows.iter().map(|&i| values[i]).collect() }
            }
            TargetVector::Classification { labels, class_count } => TargetVector::Classification {
                labels: rows.iter().map(|&i| labels[i]).collect(),
                class_count: *class_count,
            },
        }
    }

    /// Per-class row counts (classification only).
    pub fn class_counts(&self) -> Option<Vec<usize>> {
        match self {
            TargetVector::Classification { labels, class_count } => {
                let mut counts = vec![0; *class_count];
                for &c in labels {
                    counts[c] += 1;
                }
                Some(counts)
            }
            TargetVector::Regression { .. } => None,
        }
    }
}

/// Design matrix and response of equal length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: DesignMatrix,
    pub y: TargetVector,
}

impl Dataset {
    pub fn new(x: DesignMatrix, y: TargetVector) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), found: y.len() });
        }
        Ok(Dataset { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        if rows.is_empty() {
            return Err(Error::EmptyPartition("no rows selected".into()));
        }
        Ok(Dataset { x: self.x.select_rows(rows), y: self.y.select(rows) })
    }

    /// The first `n` rows.
    pub fn head(&self, n: usize) -> Result<Dataset> {
        let rows: Vec<usize> = (0..n.min(self.len())).collect();
        self.select_rows(&rows)
    }

    pub fn without_column(&self, j: usize) -> Result<Dataset> {
        Ok(Dataset { x: self.x.without_column(j)?, y: self.y.clone() })
    }

    pub fn select_columns(&self, keep: &[usize]) -> Result<Dataset> {
        Ok(Dataset { x: self.x.select_columns(keep)?, y: self.y.clone() })
    }
}

/// Which columns stay active when masking, and what inactive columns become.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    active: BTreeSet<usize>,
    pub numeric_fill: f64,
    pub categorical_fill: f64,
}

pub const DEFAULT_CATEGORICAL_FILL: f64 = 0.5;

impl MaskSpec {
    /// Keeps the intercept plus `columns`, with default fills (0 and 0.5).
    pub fn keep<I: IntoIterator<Item = usize>>(columns: I) -> Self {
        let mut active: BTreeSet<usize> = columns.into_iter().collect();
        active.insert(0);
        MaskSpec { active, numeric_fill: 0.0, categorical_fill: DEFAULT_CATEGORICAL_FILL }
    }

    pub fn with_fills(mut self, numeric_fill: f64, categorical_fill: f64) -> Result<Self> {
        if !(categorical_fill > 0.0 && categorical_fill < 1.0) {
            return Err(invalid(format!("categorical fill {categorical_fill} must lie strictly inside (0, 1)")));
        }
        if !numeric_fill.is_finite() {
            return Err(invalid("numeric fill must be finite"));
        }
        self.numeric_fill = numeric_fill;
        self.categorical_fill = categorical_fill;
        Ok(self)
    }

    pub fn active(&self) -> &BTreeSet<usize> {
        &self.active
    }
}

/// Fill values shared by every mask of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskFill {
    pub numeric: f64,
    pub categorical: f64,
}

impl Default for MaskFill {
    fn default() -> Self {
        MaskFill { numeric: 0.0, categorical: DEFAULT_CATEGORICAL_FILL }
    }
}

impl MaskFill {
    pub fn spec<I: IntoIterator<Item = usize>>(&self, columns: I) -> Result<MaskSpec> {
        MaskSpec::keep(columns).with_fills(self.numeric, self.categorical)
    }
}

/// Masks a design matrix, returning a new array.
pub fn apply_mask(matrix: &DesignMatrix, mask: &MaskSpec) -> Result<Array2<f64>> {
    mask_values(matrix.values(), matrix.schema(), mask)
}

/// Array-level masking: active columns are copied, inactive numeric columns
/// become `numeric_fill` and inactive dummies become `categorical_fill`.
/// The intercept is never touched.
pub fn mask_values(values: ArrayView2<f64>, schema: &FeatureSchema, mask: &MaskSpec) -> Result<Array2<f64>> {
    if values.ncols() != schema.width() {
        return Err(Error::DimensionMismatch { expected: schema.width(), found: values.ncols() });
    }
    if let Some(&j) = mask.active.iter().find(|&&j| j >= schema.width()) {
        return Err(Error::IndexOutOfRange { index: j, bound: schema.width() });
    }
    let mut out = values.to_owned();
    for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
        if j == 0 || mask.active.contains(&j) {
            continue;
        }
        col.fill(match schema.kind(j) {
            ColumnKind::Numeric => mask.numeric_fill,
            ColumnKind::CategoricalDummy => mask.categorical_fill,
        });
    }
    Ok(out)
}

/// Shuffled partition of `0..n` into parts sized by `fractions`.
///
/// Each size is floored first; leftover rows go one at a time to the parts in
/// declaration order.
pub fn split_indices(n: usize, fractions: &[f64], seed: u64) -> Result<Vec<Vec<usize>>> {
    if fractions.iter().any(|&f| !(f >= 0.0 && f.is_finite())) {
        return Err(invalid("split fractions must be nonnegative"));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("split fractions sum to {total}, not 1")));
    }
    let mut sizes: Vec<usize> = fractions.iter().map(|f| (f * n as f64 + 1e-9).floor() as usize).collect();
    let leftover = n - sizes.iter().sum::<usize>().min(n);
    let parts = sizes.len();
    for i in 0..leftover {
        sizes[i % parts] += 1;
    }
    if let Some(i) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptyPartition(format!("split part {i} would be empty")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut parts = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for s in sizes {
        parts.push(perm[start..start + s].to_vec());
        start += s;
    }
    Ok(parts)
}

/// Train / validation / test split.
pub fn split(dataset: &Dataset, fractions: [f64; 3], seed: u64) -> Result<[Dataset; 3]> {
    let parts = split_indices(dataset.len(), &fractions, seed)?;
    Ok([
        dataset.select_rows(&parts[0])?,
        dataset.select_rows(&parts[1])?,
        dataset.select_rows(&parts[2])?,
    ])
}

/// Per-column centring and scaling for numeric features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    /// `(column, mean, stddev)` for every standardized column.
    pub columns: Vec<(usize, f64, f64)>,
}

impl Standardization {
    /// Fits population (divide-by-n) statistics on every numeric feature column.
    pub fn fit(matrix: &DesignMatrix) -> Self {
        let n = matrix.nrows() as f64;
        let values = matrix.values();
        let columns = (1..matrix.width())
            .filter(|&j| matrix.schema().kind(j) == ColumnKind::Numeric)
            .map(|j| {
                let col = values.column(j);
                let mean = col.sum() / n;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                (j, mean, if sd > 0.0 { sd } else { 1.0 })
            })
            .collect();
        Standardization { columns }
    }

    pub fn apply(&self, matrix: &DesignMatrix) -> DesignMatrix {
        let mut out = matrix.clone();
        let values = out.values_mut();
        for &(j, mean, sd) in &self.columns {
            values.column_mut(j).mapv_inplace(|v| (v - mean) / sd);
        }
        out
    }

    pub fn apply_dataset(&self, data: &Dataset) -> Dataset {
        Dataset { x: self.apply(&data.x), y: data.y.clone() }
    }
}

/// Split, then standardize every part with statistics from the training part.
pub fn split_standardized(dataset: &Dataset, fractions: [f64; 3], seed: u64) -> Result<([Dataset; 3], Standardization)> {
    let [train, val, test] = split(dataset, fractions, seed)?;
    let st = Standardization::fit(&train.x);
    Ok(([st.apply_dataset(&train), st.apply_dataset(&val), st.apply_dataset(&test)], st))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "by", content = "name")]
pub enum PartitionKey {
    Class,
    /// A dummy group, or a numeric column with a few discrete values.
    Group(String),
}

/// Splits a dataset into disjoint sub-datasets keyed by class or group.
pub fn partition(dataset: &Dataset, key: &PartitionKey) -> Result<Vec<(String, Dataset)>> {
    let keys: Vec<String> = match key {
        PartitionKey::Class => match &dataset.y {
            TargetVector::Classification { labels, .. } => labels.iter().map(|c| format!("class-{c}")).collect(),
            TargetVector::Regression { .. } => return Err(invalid("class partition needs a classification target")),
        },
        PartitionKey::Group(name) => group_keys(&dataset.x, name)?,
    };
    let mut labels: Vec<String> = keys.clone();
    labels.sort();
    labels.dedup();
    labels
        .into_iter()
        .map(|label| {
            let rows: Vec<usize> = (0..keys.len()).filter(|&i| keys[i] == label).collect();
            Ok((label, dataset.select_rows(&rows)?))
        })
        .collect()
}

fn group_keys(x: &DesignMatrix, name: &str) -> Result<Vec<String>> {
    let schema = x.schema();
    if let Some((_, cols)) = schema.groups().into_iter().find(|(g, _)| g == name) {
        return Ok((0..x.nrows())
            .map(|i| {
                cols.iter()
                    .find(|&&j| x.values()[[i, j]] == 1.0)
                    .map(|&j| schema.name(j).to_string())
                    .unwrap_or_else(|| format!("{name}_other"))
            })
            .collect());
    }
    match schema.index_of(name) {
        Some(j) if j > 0 => Ok(x.values().column(j).iter().map(|v| format!("{name}={v}")).collect()),
        _ => Err(invalid(format!("unknown partition column '{name}'"))),
    }
}
