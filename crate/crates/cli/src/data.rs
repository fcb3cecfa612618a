//! Turning the `[data]` section into train, validation and inference sets.

use serde::{Deserialize, Serialize};

use sfit::data::{load_csv, split, CsvOptions, Dataset, Encoding, Standardization};
use sfit::seed::{derive_seed, STREAM_DATA, STREAM_SPLIT};
use sfit::sim::{gen_correlated_toy, gen_main_dgp};

use crate::config::{DataSection, Source};
use crate::CliError;

/// Everything needed to rebuild the same partitions later.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataProvenance {
    pub section: DataSection,
    pub root_seed: u64,
    pub data_seed: u64,
    pub split_seed: u64,
    pub encoding: Option<Encoding>,
    pub standardization: Option<Standardization>,
}

pub struct Prepared {
    pub train: Dataset,
    pub validation: Dataset,
    pub inference: Dataset,
    pub provenance: DataProvenance,
}

fn csv_options(section: &DataSection) -> Result<CsvOptions, CliError> {
    if !section.delimiter.is_ascii() {
        return Err(CliError::Config(format!("data.delimiter: '{}' is not an ASCII character", section.delimiter)));
    }
    Ok(CsvOptions {
        target: section.target.clone(),
        categorical: section.categorical.clone(),
        drop: section.drop.clone(),
        delimiter: section.delimiter as u8,
        classification: section.classification,
        standardize: false,
    })
}

fn load(section: &DataSection, data_seed: u64, encoding: Option<&Encoding>) -> Result<(Dataset, Option<Encoding>), CliError> {
    match section.source {
        Source::Csv => {
            let path = section.path.as_ref().ok_or_else(|| CliError::Config("data.path: required for csv input".into()))?;
            let (d, enc) = load_csv(path, &csv_options(section)?, encoding).map_err(CliError::runtime)?;
            Ok((d, Some(enc)))
        }
        Source::MainDgp => Ok((gen_main_dgp(section.rows, data_seed).map_err(CliError::runtime)?, None)),
        Source::CorrelatedToy => Ok((gen_correlated_toy(section.rows, data_seed).map_err(CliError::runtime)?, None)),
    }
}

/// Loads or simulates the data, splits it, and fits standardization on the
/// training part when enabled.
pub fn prepare(section: &DataSection, root_seed: u64, standardize: bool) -> Result<Prepared, CliError> {
    let data_seed = derive_seed(root_seed, STREAM_DATA, 0);
    let split_seed = derive_seed(root_seed, STREAM_SPLIT, 0);
    let (data, encoding) = load(section, data_seed, None)?;
    let [train, validation, inference] = split(&data, section.split, split_seed).map_err(CliError::runtime)?;
    let standardization = standardize.then(|| Standardization::fit(&train.x));
    let apply = |d: Dataset| match &standardization {
        Some(s) => s.apply_dataset(&d),
        None => d,
    };
    Ok(Prepared {
        train: apply(train),
        validation: apply(validation),
        inference: apply(inference),
        provenance: DataProvenance {
            section: section.clone(),
            root_seed,
            data_seed,
            split_seed,
            encoding,
            standardization: standardization.clone(),
        },
    })
}

/// Rebuilds the partitions recorded in `provenance`. A different `section`
/// (for example another CSV file) is read with the recorded encoding and
/// standardization, and used whole as the inference set.
pub fn rebuild(provenance: &DataProvenance, section: Option<&DataSection>) -> Result<Prepared, CliError> {
    let Some(other) = section.filter(|s| *s != &provenance.section) else {
        let mut p = prepare(&provenance.section, provenance.root_seed, provenance.standardization.is_some())?;
        // keep the stored statistics, bit for bit
        p.provenance = provenance.clone();
        return Ok(p);
    };
    let (data, _) = load(other, provenance.data_seed, provenance.encoding.as_ref())?;
    let data = match &provenance.standardization {
        Some(s) => s.apply_dataset(&data),
        None => data,
    };
    Ok(Prepared {
        train: data.head(0).map_err(CliError::runtime)?,
        validation: data.head(0).map_err(CliError::runtime)?,
        inference: data,
        provenance: provenance.clone(),
    })
}
