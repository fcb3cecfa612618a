use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnKind {
    Numeric,
    CategoricalDummy,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    /// Source categorical variable for dummy columns.
    pub group: Option<String>,
}

impl Column {
    pub fn numeric(name: impl Into<String>) -> Self {
        Column { name: name.into(), kind: ColumnKind::Numeric, group: None }
    }

    pub fn dummy(name: impl Into<String>, group: impl Into<String>) -> Self {
        Column { name: name.into(), kind: ColumnKind::CategoricalDummy, group: Some(group.into()) }
    }
}

pub const INTERCEPT: &str = "intercept";

/// Column layout of a design matrix. Column 0 is always the intercept.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    columns: Vec<Column>,
}

impl FeatureSchema {
    /// Builds a schema from the feature columns; the intercept is prepended.
    pub fn new(features: Vec<Column>) -> Result<Self> {
        let mut columns = Vec::with_capacity(features.len() + 1);
        columns.push(Column::numeric(INTERCEPT));
        columns.extend(features);
        let schema = FeatureSchema { columns };
        schema.validate()?;
        Ok(schema)
    }

    /// All-numeric schema with features named `X1..Xp`.
    pub fn numeric(p: usize) -> Self {
        FeatureSchema::new((1..=p).map(|j| Column::numeric(format!("X{j}"))).collect())
            .expect("numeric schema is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.columns.first().ok_or_else(|| invalid("schema has no columns"))?;
        if first.kind != ColumnKind::Numeric || first.name != INTERCEPT {
            return Err(invalid("column 0 must be the numeric intercept"));
        }
        if self.columns.len() < 2 {
            return Err(invalid("schema needs at least one feature"));
        }
        for c in &self.columns[1..] {
            if c.kind == ColumnKind::CategoricalDummy && c.group.is_none() {
                return Err(invalid(format!("dummy column '{}' has no group", c.name)));
            }
        }
        Ok(())
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    /// Total width including the intercept (`p + 1`).
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    /// Number of testable features `p`.
    pub fn feature_count(&self) -> usize {
        self.columns.len() - 1
    }

    pub fn name(&self, j: usize) -> &str {
        &self.columns[j].name
    }

    pub fn kind(&self, j: usize) -> ColumnKind {
        self.columns[j].kind
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Dummy groups in order of first appearance, with their column indices.
    pub fn groups(&self) -> Vec<(String, Vec<usize>)> {
        let mut out: Vec<(String, Vec<usize>)> = Vec::new();
        for (j, c) in self.columns.iter().enumerate() {
            if let Some(g) = &c.group {
                match out.iter_mut().find(|(name, _)| name == g) {
                    Some((_, cols)) => cols.push(j),
                    None => out.push((g.clone(), vec![j])),
                }
            }
        }
        out
    }

    /// Schema with column `j` (a feature, never the intercept) removed.
    pub fn without(&self, j: usize) -> Result<Self> {
        if j == 0 || j >= self.width() {
            return Err(invalid(format!("cannot remove column {j}")));
        }
        let mut columns = self.columns.clone();
        columns.remove(j);
        let s = FeatureSchema { columns };
        s.validate()?;
        Ok(s)
    }

    /// Schema restricted to the given columns (the intercept is always kept).
    pub fn select(&self, keep: &[usize]) -> Result<Self> {
        let mut columns = vec![self.columns[0].clone()];
        for &j in keep.iter().filter(|&&j| j != 0) {
            columns.push(self.columns.get(j).cloned().ok_or_else(|| invalid(format!("column {j} out of range")))?);
        }
        let s = FeatureSchema { columns };
        s.validate()?;
        Ok(s)
    }
}
