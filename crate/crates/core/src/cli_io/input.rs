//! CSV ingestion of finite populations.

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::ResponseKind;
use crate::error::{Error, Result};
use crate::sampling::Population;
use crate::simulation::generators::standardize;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `y = 1` when the value exceeds the threshold.
    #[default]
    Above,
    /// `y = 1` when the value is below the threshold.
    Below,
}

/// Column roles for a population file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationCsv {
    pub response: String,
    pub predictors: Vec<String>,
    pub observers: Vec<String>,
    /// Turns the response into a binary one when set.
    pub threshold: Option<f64>,
    pub direction: Direction,
    /// Centre and scale predictors (and a continuous response) to unit sample sd.
    pub standardize: bool,
}

impl PopulationCsv {
    fn validate(&self) -> Result<()> {
        if self.response.is_empty() {
            return Err(Error::Config("input mapping needs a response column".into()));
        }
        if self.predictors.is_empty() {
            return Err(Error::Config("input mapping needs at least one predictor column".into()));
        }
        if let Some(t) = self.threshold {
            if !t.is_finite() {
                return Err(Error::Config("threshold must be finite".into()));
            }
        }
        Ok(())
    }

    fn binarize(&self, v: f64) -> f64 {
        match (self.threshold, self.direction) {
            (None, _) => v,
            (Some(t), Direction::Above) => f64::from(u8::from(v > t)),
            (Some(t), Direction::Below) => f64::from(u8::from(v < t)),
        }
    }
}

pub fn load_population(path: &Path, mapping: &PopulationCsv) -> Result<Population> {
    let file = std::fs::File::open(path).map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    load_population_from_reader(file, mapping)
}

/// Rows keep file order; lines starting with `#` are skipped.
pub fn load_population_from_reader<R: Read>(reader: R, mapping: &PopulationCsv) -> Result<Population> {
    mapping.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Data(format!("cannot read header row: {e}")))?
        .clone();
    if headers.is_empty() {
        return Err(Error::Data("file is empty".into()));
    }
    let locate = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("column `{name}` not found in header")))
    };
    let response_col = locate(&mapping.response)?;
    let predictor_cols = mapping.predictors.iter().map(|c| locate(c)).collect::<Result<Vec<_>>>()?;
    let observer_cols = mapping.observers.iter().map(|c| locate(c)).collect::<Result<Vec<_>>>()?;

    let mut response = Vec::new();
    let mut predictors = Vec::new();
    let mut scores = Vec::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("malformed CSV: {e}")))?;
        let line = record.position().map_or(row_idx as u64 + 2, |p| p.line());
        let cell = |col: usize| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Data(format!("line {line}, column `{}`: cannot parse `{raw}` as a finite number", &headers[col])))
        };
        response.push(mapping.binarize(cell(response_col)?));
        for &c in &predictor_cols {
            predictors.push(cell(c)?);
        }
        for &c in &observer_cols {
            scores.push(cell(c)?);
        }
    }
    let n = response.len();
    if n == 0 {
        return Err(Error::Data("file has a header but no data rows".into()));
    }
    let mut response = DVector::from_vec(response);
    let mut predictors = DMatrix::from_row_slice(n, predictor_cols.len(), &predictors);
    if mapping.standardize {
        for mut col in predictors.column_iter_mut() {
            let z = standardize(&col.clone_owned());
            col.copy_from(&z);
        }
        if mapping.threshold.is_none() {
            response = standardize(&response);
        }
    }
    let kind = if mapping.threshold.is_some() {
        ResponseKind::Binary
    } else {
        ResponseKind::Continuous
    };
    Population::new(
        response,
        predictors,
        DMatrix::from_row_slice(n, observer_cols.len(), &scores),
        kind,
    )
    .map_err(|e| Error::Data(e.to_string()))
}
