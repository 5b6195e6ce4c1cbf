//! Tabular data: CSV ingestion, min-max feature scaling, seeded splits.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::Matrix;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalerParams {
    pub fn fit(features: &Matrix) -> Self {
        let m = features.cols();
        let mut min = vec![f64::INFINITY; m];
        let mut max = vec![f64::NEG_INFINITY; m];
        for i in 0..features.rows() {
            for (j, &v) in features.row(i).iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        if features.rows() == 0 {
            min.fill(0.0);
            max.fill(0.0);
        }
        Self { min, max }
    }

    /// Maps each column to `[0, 1]`; constant columns map to `0`.
    pub fn transform(&self, features: &Matrix) -> Result<Matrix> {
        self.check_width(features)?;
        Ok(Matrix::from_fn(features.rows(), features.cols(), |i, j| {
            let range = self.max[j] - self.min[j];
            if range > 0.0 {
                (features.get(i, j) - self.min[j]) / range
            } else {
                0.0
            }
        }))
    }

    pub fn inverse_transform(&self, scaled: &Matrix) -> Result<Matrix> {
        self.check_width(scaled)?;
        Ok(Matrix::from_fn(scaled.rows(), scaled.cols(), |i, j| {
            self.min[j] + scaled.get(i, j) * (self.max[j] - self.min[j])
        }))
    }

    fn check_width(&self, features: &Matrix) -> Result<()> {
        if features.cols() != self.min.len() {
            return Err(Error::shape(format!(
                "scaler fitted on {} features, got {}",
                self.min.len(),
                features.cols()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Matrix,
    pub targets: Vec<f64>,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub scaler: Option<ScalerParams>,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        targets: Vec<f64>,
        feature_names: Vec<String>,
        target_name: impl Into<String>,
    ) -> Result<Self> {
        if features.rows() != targets.len() {
            return Err(Error::shape(format!(
                "{} feature rows but {} targets",
                features.rows(),
                targets.len()
            )));
        }
        if feature_names.len() != features.cols() {
            return Err(Error::shape(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                features.cols()
            )));
        }
        if let Some(i) = targets.iter().position(|t| !t.is_finite()) {
            return Err(Error::data(format!("target at row {} is not finite", i + 1)));
        }
        Ok(Self {
            features,
            targets,
            feature_names,
            target_name: target_name.into(),
            scaler: None,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            scaler: self.scaler.clone(),
        }
    }

    /// Writes the dataset as a header + numeric rows CSV, target last.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut header = self.feature_names.clone();
        header.push(self.target_name.clone());
        w.write_record(&header).map_err(|e| csv_error(path, e))?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.features.row(i).iter().map(|v| v.to_string()).collect();
            rec.push(self.targets[i].to_string());
            w.write_record(&rec).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::data(format!("{}: {other:?}", path.display())),
    }
}

/// Target column given by header name, or by zero-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetColumn {
    Index(usize),
    Name(String),
}

impl From<&str> for TargetColumn {
    fn from(s: &str) -> Self {
        TargetColumn::Name(s.to_string())
    }
}

impl TargetColumn {
    fn resolve(&self, header: &[String]) -> Result<usize> {
        match self {
            TargetColumn::Index(i) if *i < header.len() => Ok(*i),
            TargetColumn::Index(i) => Err(Error::config(format!(
                "target column index {i} out of range ({} columns)",
                header.len()
            ))),
            TargetColumn::Name(name) => {
                if let Some(i) = header.iter().position(|h| h == name) {
                    return Ok(i);
                }
                // A bare number that is not a header name is a position.
                match name.parse::<usize>() {
                    Ok(i) if i < header.len() => Ok(i),
                    _ => Err(Error::config(format!(
                        "target column '{name}' not found in header [{}]",
                        header.join(", ")
                    ))),
                }
            }
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, target: &TargetColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, target).map_err(|e| match e {
        Error::Data(msg) => Error::data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn read_csv(reader: impl std::io::Read, target: &TargetColumn) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::data(format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::data("empty file"));
    }
    let t = target.resolve(&header)?;
    let m = header.len() - 1;

    let mut features = Vec::new();
    let mut targets = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::data(format!("row {row}: {e}")))?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                row,
                column: String::new(),
                message: format!("expected {} cells, found {}", header.len(), record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: header[j].clone(),
                message: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: header[j].clone(),
                    message: format!("'{cell}' is not finite"),
                });
            }
            if j == t {
                targets.push(v);
            } else {
                features.push(v);
            }
        }
    }
    if targets.is_empty() {
        return Err(Error::data("no data rows"));
    }
    let names = header
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != t)
        .map(|(_, h)| h.clone())
        .collect();
    let n = targets.len();
    Dataset::new(Matrix::new(n, m, features)?, targets, names, header[t].clone())
}

/// Fits a min-max scaler on the features and attaches it.
pub fn minmax_scale(mut dataset: Dataset) -> Dataset {
    let scaler = ScalerParams::fit(&dataset.features);
    dataset.features = scaler
        .transform(&dataset.features)
        .expect("scaler fitted on the same matrix");
    dataset.scaler = Some(scaler);
    dataset
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    /// 10% test, then 10% of the remainder for validation.
    fn default() -> Self {
        Self {
            train: 0.81,
            validation: 0.09,
            test: 0.10,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Self {
        Self {
            train,
            validation,
            test,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::config(format!(
                "split ratios must be nonnegative, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("split ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl SplitIndices {
    /// Train and validation indices together, i.e. the data the VAE sees.
    pub fn fitting(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.train.iter().chain(&self.validation).copied().collect();
        all.sort_unstable();
        all
    }
}

/// Seeded three-way split. Validation and test sizes are `floor(n * ratio)`;
/// the remainder goes to train. Each list is returned sorted.
pub fn split(n: usize, ratios: SplitRatios, seed: u64) -> Result<SplitIndices> {
    ratios.validate()?;
    let size = |r: f64| ((n as f64) * r + 1e-9).floor() as usize;
    let n_val = size(ratios.validation);
    let n_test = size(ratios.test);
    let n_train = n.saturating_sub(n_val + n_test);
    for (name, ratio, count) in [
        ("train", ratios.train, n_train),
        ("validation", ratios.validation, n_val),
        ("test", ratios.test, n_test),
    ] {
        if ratio > 0.0 && count == 0 {
            return Err(Error::data(format!(
                "{name} split is empty: n={n} is too small for ratio {ratio}"
            )));
        }
    }

    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from_seed(seed));
    let mut test = perm[..n_test].to_vec();
    let mut validation = perm[n_test..n_test + n_val].to_vec();
    let mut train = perm[n_test + n_val..].to_vec();
    test.sort_unstable();
    validation.sort_unstable();
    train.sort_unstable();
    Ok(SplitIndices {
        train,
        validation,
        test,
        seed,
    })
}
