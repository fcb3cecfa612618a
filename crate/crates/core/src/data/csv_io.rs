use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Column, Dataset, DesignMatrix, FeatureSchema, Standardization, TargetVector};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvOptions {
    pub target: String,
    /// Columns to one-hot encode; every other column must be numeric.
    pub categorical: Vec<String>,
    /// Columns to ignore entirely (ids and the like).
    pub drop: Vec<String>,
    pub delimiter: u8,
    /// Treat the target as class labels instead of real values.
    pub classification: bool,
    /// Standardize numeric columns using all rows. Pipelines that split first
    /// leave this off and fit [`Standardization`] on the training part.
    pub standardize: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            target: "y".into(),
            categorical: Vec::new(),
            drop: Vec::new(),
            delimiter: b',',
            classification: false,
            standardize: false,
        }
    }
}

/// Column encoding learned from a file, reusable on later files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Encoding {
    pub sources: Vec<SourceColumn>,
    /// Original class labels, in index order.
    pub class_labels: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SourceColumn {
    Numeric { name: String },
    Categorical { name: String, levels: Vec<String> },
}

impl Encoding {
    pub fn schema(&self) -> Result<FeatureSchema> {
        let mut cols = Vec::new();
        for s in &self.sources {
            match s {
                SourceColumn::Numeric { name } => cols.push(Column::numeric(name)),
                SourceColumn::Categorical { name, levels } => {
                    cols.extend(levels.iter().map(|l| Column::dummy(format!("{name}_{l}"), name)))
                }
            }
        }
        FeatureSchema::new(cols)
    }
}

struct RawTable {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path, delimiter: u8) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new().delimiter(delimiter).trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
    if rows.is_empty() {
        return Err(Error::Empty(format!("{} has no data rows", path.display())));
    }
    Ok(RawTable { headers, rows })
}

fn sorted_levels(values: impl Iterator<Item = String>) -> Vec<String> {
    let mut levels: Vec<String> = values.collect();
    levels.sort_by(|a, b| match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y),
        _ => a.cmp(b),
    });
    levels.dedup();
    levels
}

/// Reads a delimited file with a header row, one-hot encodes categorical
/// columns and prepends the intercept. Pass a previously learned `encoding`
/// to encode a second file identically.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions, encoding: Option<&Encoding>) -> Result<(Dataset, Encoding)> {
    let path = path.as_ref();
    let table = read_table(path, opts.delimiter)?;
    let target_idx = table
        .headers
        .iter()
        .position(|h| *h == opts.target)
        .ok_or_else(|| Error::Data(format!("target column '{}' not found", opts.target)))?;

    let encoding = match encoding {
        Some(e) => e.clone(),
        None => learn_encoding(&table, target_idx, opts),
    };
    let schema = encoding.schema()?;
    let n = table.rows.len();
    let mut values = Array2::<f64>::zeros((n, schema.width()));
    values.column_mut(0).fill(1.0);

    let mut col = 1;
    for source in &encoding.sources {
        let (name, levels) = match source {
            SourceColumn::Numeric { name } => (name, None),
            SourceColumn::Categorical { name, levels } => (name, Some(levels)),
        };
        let src = table
            .headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("column '{name}' not found")))?;
        match levels {
            None => {
                for (i, row) in table.rows.iter().enumerate() {
                    let cell = &row[src];
                    values[[i, col]] = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                        Error::Data(format!("non-numeric value '{cell}' in column '{name}', row {}", i + 1))
                    })?;
                }
                col += 1;
            }
            Some(levels) => {
                for (i, row) in table.rows.iter().enumerate() {
                    match levels.iter().position(|l| *l == row[src]) {
                        Some(k) => values[[i, col + k]] = 1.0,
                        None => log::warn!("unseen level '{}' in column '{name}'", row[src]),
                    }
                }
                col += levels.len();
            }
        }
    }

    let y = if opts.classification {
        let labels = encoding.class_labels.clone().unwrap_or_default();
        let idx = table
            .rows
            .iter()
            .map(|r| {
                labels
                    .iter()
                    .position(|l| *l == r[target_idx])
                    .ok_or_else(|| Error::Data(format!("unknown class label '{}'", r[target_idx])))
            })
            .collect::<Result<Vec<usize>>>()?;
        if labels.len() < 2 {
            log::warn!("target '{}' has a single class", opts.target);
        }
        TargetVector::classification(idx, labels.len().max(1))?
    } else {
        TargetVector::regression(
            table
                .rows
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    r[target_idx]
                        .parse::<f64>()
                        .map_err(|_| Error::Data(format!("non-numeric target '{}' at row {}", r[target_idx], i + 1)))
                })
                .collect::<Result<Vec<f64>>>()?,
        )
    };

    let mut x = DesignMatrix::new(values, schema)?;
    if opts.standardize {
        x = Standardization::fit(&x).apply(&x);
    }
    Ok((Dataset::new(x, y)?, encoding))
}

fn learn_encoding(table: &RawTable, target_idx: usize, opts: &CsvOptions) -> Encoding {
    let sources = table
        .headers
        .iter()
        .enumerate()
        .filter(|(j, h)| *j != target_idx && !opts.drop.contains(h))
        .map(|(j, h)| {
            if opts.categorical.contains(h) {
                SourceColumn::Categorical {
                    name: h.clone(),
                    levels: sorted_levels(table.rows.iter().map(|r| r[j].clone())),
                }
            } else {
                SourceColumn::Numeric { name: h.clone() }
            }
        })
        .collect();
    let class_labels = opts
        .classification
        .then(|| sorted_levels(table.rows.iter().map(|r| r[target_idx].clone())));
    Encoding { sources, class_labels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn one_hot_and_intercept() {
        let f = write("cat,num,y\nA,1,0.5\nB,2,1.5\nA,3,2.5\n");
        let opts = CsvOptions { categorical: vec!["cat".into()], ..Default::default() };
        let (d, enc) = load_csv(f.path(), &opts, None).unwrap();
        let names: Vec<&str> = d.x.schema().columns().iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["intercept", "cat_A", "cat_B", "num"]);
        assert_eq!(d.x.values().row(1).to_vec(), vec![1.0, 0.0, 1.0, 2.0]);
        assert_eq!(enc.schema().unwrap(), *d.x.schema());
    }

    #[test]
    fn standardize_all_rows() {
        let f = write("num,y\n1,0\n2,0\n3,0\n");
        let opts = CsvOptions { standardize: true, ..Default::default() };
        let (d, _) = load_csv(f.path(), &opts, None).unwrap();
        let col = d.x.values().column(1).to_vec();
        assert!((col[0] + 1.2247448713915890).abs() < 1e-12);
        assert_eq!(col[1], 0.0);
    }

    #[test]
    fn errors() {
        let f = write("a,b\n1,2\n");
        assert!(load_csv(f.path(), &CsvOptions::default(), None).is_err());
        let f = write("a,y\nx,2\n");
        assert!(matches!(load_csv(f.path(), &CsvOptions::default(), None), Err(Error::Data(_))));
        let f = write("a,y\n");
        assert!(matches!(load_csv(f.path(), &CsvOptions::default(), None), Err(Error::Empty(_))));
    }

    #[test]
    fn single_class_is_accepted() {
        let f = write("a,y\n1,yes\n2,yes\n");
        let opts = CsvOptions { classification: true, ..Default::default() };
        let (d, enc) = load_csv(f.path(), &opts, None).unwrap();
        assert_eq!(d.y.class_count(), Some(1));
        assert_eq!(enc.class_labels.unwrap(), vec!["yes".to_string()]);
    }

    #[test]
    fn reuses_encoding() {
        let f1 = write("c,y\nA,1\nB,2\n");
        let f2 = write("c,y\nB,1\nC,2\n");
        let opts = CsvOptions { categorical: vec!["c".into()], ..Default::default() };
        let (_, enc) = load_csv(f1.path(), &opts, None).unwrap();
        let (d2, _) = load_csv(f2.path(), &opts, Some(&enc)).unwrap();
        assert_eq!(d2.x.width(), 3);
        assert_eq!(d2.x.values().row(1).to_vec(), vec![1.0, 0.0, 0.0]);
    }
}
