//! Tabular given-data samples: typed columns, encoding, subsampling.
//!
//! A [`Dataset`] holds `n` rows of `d` typed inputs plus one numeric output.
//! Inputs are continuous, discrete-integer with a declared support, or
//! categorical with a declared level set. [`encode`] turns an input subset
//! into the numeric matrix the nearest-neighbor machinery works on: one-hot
//! columns for categoricals, every column standardized to mean 0 and
//! population standard deviation 1, constant columns dropped.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::Coalition;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("missing column '{0}' in header")]
    MissingColumn(String),
    #[error("no column specs given")]
    NoSpecs,
    #[error("duplicate column name '{0}'")]
    DuplicateColumn(String),
    #[error("expected exactly one output column, found {0}")]
    OutputColumnCount(usize),
    #[error("output column '{0}' must be numeric")]
    NonNumericOutput(String),
    #[error("categorical column '{0}' declares no levels")]
    EmptyLevelSet(String),
    #[error("categorical column '{0}' declares duplicate level '{1}'")]
    DuplicateLevel(String, String),
    #[error("row {row}, column '{column}': cannot parse '{value}'")]
    UnparsableCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column '{column}': value '{value}' is outside the declared set")]
    ValueOutsideSupport {
        row: usize,
        column: String,
        value: String,
    },
    #[error("dataset has fewer than two rows")]
    TooFewRows,
    #[error("column '{column}' has {got} values, expected {expected}")]
    LengthMismatch {
        column: String,
        got: usize,
        expected: usize,
    },
    #[error("categorical code {code} out of range for column '{column}'")]
    CategoryCodeOutOfRange { column: String, code: u32 },
    #[error("non-finite value in column '{0}'")]
    NonFiniteValue(String),
    #[error("empty subset")]
    EmptySubset,
    #[error("subset references input {0} but the dataset has {1} inputs")]
    SubsetOutOfRange(usize, usize),
    #[error("subsample fraction {0} is outside (0, 1]")]
    InvalidFraction(f64),
    #[error("subsample of {0} rows is too small")]
    SubsampleTooSmall(usize),
    #[error("row selection must be strictly ascending and within 0..{n}")]
    BadRowSelection { n: usize },
    #[error("degenerate output: variance is zero")]
    DegenerateOutput,
    #[error("encoded matrix constructor: {0} values do not fill {1} rows x {2} columns")]
    RawShapeMismatch(usize, usize, usize),
}

/// Declared support of a discrete-integer input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IntSupport {
    Range { min: i64, max: i64 },
    Set { values: Vec<i64> },
}

impl IntSupport {
    pub fn contains(&self, v: i64) -> bool {
        match self {
            IntSupport::Range { min, max } => (*min..=*max).contains(&v),
            IntSupport::Set { values } => values.contains(&v),
        }
    }
}

/// Input column type plus its declared domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric {
        #[serde(default)]
        min: Option<f64>,
        #[serde(default)]
        max: Option<f64>,
    },
    Integer {
        #[serde(flatten)]
        support: IntSupport,
    },
    Categorical { levels: Vec<String> },
}

impl ColumnKind {
    pub fn numeric() -> Self {
        ColumnKind::Numeric {
            min: None,
            max: None,
        }
    }

    pub fn numeric_range(min: f64, max: f64) -> Self {
        ColumnKind::Numeric {
            min: Some(min),
            max: Some(max),
        }
    }

    pub fn integer_range(min: i64, max: i64) -> Self {
        ColumnKind::Integer {
            support: IntSupport::Range { min, max },
        }
    }

    pub fn integer_set(values: &[i64]) -> Self {
        ColumnKind::Integer {
            support: IntSupport::Set {
                values: values.to_vec(),
            },
        }
    }

    pub fn categorical(levels: &[&str]) -> Self {
        ColumnKind::Categorical {
            levels: levels.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// One column declaration: name, kind, and whether it is the output.
///
/// Serializes flat: `{"name": "age", "type": "integer", "min": 0, "max": 18}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
    #[serde(default)]
    pub output: bool,
}

impl ColumnSpec {
    pub fn input(name: &str, kind: ColumnKind) -> Self {
        ColumnSpec {
            name: name.to_string(),
            kind,
            output: false,
        }
    }

    pub fn output(name: &str) -> Self {
        ColumnSpec {
            name: name.to_string(),
            kind: ColumnKind::numeric(),
            output: true,
        }
    }
}

/// Column storage matching its declared kind. Categorical values are level
/// codes into the declared level list.
#[derive(Clone, Debug, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Integer(Vec<i64>),
    Categorical(Vec<u32>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Integer(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A bit pattern identifying the row's value, for exact-duplicate grouping.
    pub fn key_bits(&self, row: usize) -> u64 {
        match self {
            ColumnData::Numeric(v) => v[row].to_bits(),
            ColumnData::Integer(v) => v[row] as u64,
            ColumnData::Categorical(v) => v[row] as u64,
        }
    }

    fn gather(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => {
                ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect())
            }
            ColumnData::Integer(v) => {
                ColumnData::Integer(rows.iter().map(|&r| v[r]).collect())
            }
            ColumnData::Categorical(v) => {
                ColumnData::Categorical(rows.iter().map(|&r| v[r]).collect())
            }
        }
    }
}

/// An immutable sample: `d` typed input columns and one numeric output.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    input_specs: Vec<ColumnSpec>,
    inputs: Vec<ColumnData>,
    output_name: String,
    output: Vec<f64>,
}

impl Dataset {
    /// Assembles a dataset from pre-built columns, validating shapes, supports
    /// and finiteness.
    pub fn from_parts(
        input_specs: Vec<ColumnSpec>,
        inputs: Vec<ColumnData>,
        output_name: &str,
        output: Vec<f64>,
    ) -> Result<Self, DatasetError> {
        if input_specs.is_empty() {
            return Err(DatasetError::NoSpecs);
        }
        let mut seen = HashSet::new();
        for spec in &input_specs {
            if spec.output {
                return Err(DatasetError::OutputColumnCount(2));
            }
            if !seen.insert(spec.name.clone()) {
                return Err(DatasetError::DuplicateColumn(spec.name.clone()));
            }
            validate_kind(spec)?;
        }
        if !seen.insert(output_name.to_string()) {
            return Err(DatasetError::DuplicateColumn(output_name.to_string()));
        }
        let n = output.len();
        if n < 2 {
            return Err(DatasetError::TooFewRows);
        }
        if inputs.len() != input_specs.len() {
            return Err(DatasetError::LengthMismatch {
                column: "<inputs>".into(),
                got: inputs.len(),
                expected: input_specs.len(),
            });
        }
        if output.iter().any(|y| !y.is_finite()) {
            return Err(DatasetError::NonFiniteValue(output_name.to_string()));
        }
        for (spec, data) in input_specs.iter().zip(&inputs) {
            if data.len() != n {
                return Err(DatasetError::LengthMismatch {
                    column: spec.name.clone(),
                    got: data.len(),
                    expected: n,
                });
            }
            validate_column(spec, data)?;
        }
        Ok(Dataset {
            input_specs,
            inputs,
            output_name: output_name.to_string(),
            output,
        })
    }

    pub fn n(&self) -> usize {
        self.output.len()
    }

    /// Number of inputs.
    pub fn d(&self) -> usize {
        self.input_specs.len()
    }

    pub fn input_specs(&self) -> &[ColumnSpec] {
        &self.input_specs
    }

    pub fn input_names(&self) -> Vec<&str> {
        self.input_specs.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn input(&self, i: usize) -> &ColumnData {
        &self.inputs[i]
    }

    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn output_name(&self) -> &str {
        &self.output_name
    }
}

fn validate_kind(spec: &ColumnSpec) -> Result<(), DatasetError> {
    if let ColumnKind::Categorical { levels } = &spec.kind {
        if levels.is_empty() {
            return Err(DatasetError::EmptyLevelSet(spec.name.clone()));
        }
        let mut seen = HashSet::new();
        for level in levels {
            if !seen.insert(level) {
                return Err(DatasetError::DuplicateLevel(
                    spec.name.clone(),
                    level.clone(),
                ));
            }
        }
    }
    Ok(())
}

fn validate_column(spec: &ColumnSpec, data: &ColumnData) -> Result<(), DatasetError> {
    match (&spec.kind, data) {
        (ColumnKind::Numeric { min, max }, ColumnData::Numeric(values)) => {
            for (row, v) in values.iter().enumerate() {
                if !v.is_finite() {
                    return Err(DatasetError::NonFiniteValue(spec.name.clone()));
                }
                let below = min.is_some_and(|m| *v < m);
                let above = max.is_some_and(|m| *v > m);
                if below || above {
                    return Err(DatasetError::ValueOutsideSupport {
                        row: row + 1,
                        column: spec.name.clone(),
                        value: format!("{v}"),
                    });
                }
            }
        }
        (ColumnKind::Integer { support }, ColumnData::Integer(values)) => {
            for (row, v) in values.iter().enumerate() {
                if !support.contains(*v) {
                    return Err(DatasetError::ValueOutsideSupport {
                        row: row + 1,
                        column: spec.name.clone(),
                        value: format!("{v}"),
                    });
                }
            }
        }
        (ColumnKind::Categorical { levels }, ColumnData::Categorical(codes)) => {
            for code in codes {
                if *code as usize >= levels.len() {
                    return Err(DatasetError::CategoryCodeOutOfRange {
                        column: spec.name.clone(),
                        code: *code,
                    });
                }
            }
        }
        _ => {
            return Err(DatasetError::LengthMismatch {
                column: spec.name.clone(),
                got: data.len(),
                expected: data.len(),
            })
        }
    }
    Ok(())
}

/// Loads a UTF-8, comma-separated file with a header row. `specs` names the
/// columns to read (inputs plus exactly one output); extra file columns are
/// ignored. Row numbers in errors are 1-based data rows.
pub fn load_csv<P: AsRef<Path>>(path: P, specs: &[ColumnSpec]) -> Result<Dataset, DatasetError> {
    let path_str = path.as_ref().display().to_string();
    if specs.is_empty() {
        return Err(DatasetError::NoSpecs);
    }
    let outputs: Vec<&ColumnSpec> = specs.iter().filter(|s| s.output).collect();
    if outputs.len() != 1 {
        return Err(DatasetError::OutputColumnCount(outputs.len()));
    }
    let output_spec = outputs[0];
    if !matches!(output_spec.kind, ColumnKind::Numeric { .. }) {
        return Err(DatasetError::NonNumericOutput(output_spec.name.clone()));
    }
    let input_specs: Vec<ColumnSpec> =
        specs.iter().filter(|s| !s.output).cloned().collect();
    if input_specs.is_empty() {
        return Err(DatasetError::NoSpecs);
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => DatasetError::Io {
                path: path_str.clone(),
                source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
            },
            _ => DatasetError::Csv {
                path: path_str.clone(),
                source: e,
            },
        })?;

    let headers = reader
        .headers()
        .map_err(|e| DatasetError::Csv {
            path: path_str.clone(),
            source: e,
        })?
        .clone();
    let col_index = |name: &str| -> Result<usize, DatasetError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
    };

    let input_positions: Vec<usize> = input_specs
        .iter()
        .map(|s| col_index(&s.name))
        .collect::<Result<_, _>>()?;
    let output_position = col_index(&output_spec.name)?;

    let mut inputs: Vec<ColumnData> = input_specs
        .iter()
        .map(|s| match &s.kind {
            ColumnKind::Numeric { .. } => ColumnData::Numeric(Vec::new()),
            ColumnKind::Integer { .. } => ColumnData::Integer(Vec::new()),
            ColumnKind::Categorical { .. } => ColumnData::Categorical(Vec::new()),
        })
        .collect();
    let mut output = Vec::new();

    for (row_idx, record) in reader.records().enumerate() {
        let row = row_idx + 1;
        let record = record.map_err(|e| DatasetError::Csv {
            path: path_str.clone(),
            source: e,
        })?;
        for (spec_idx, spec) in input_specs.iter().enumerate() {
            let raw = record.get(input_positions[spec_idx]).unwrap_or("");
            parse_cell(spec, raw, row, &mut inputs[spec_idx])?;
        }
        let raw = record.get(output_position).unwrap_or("");
        let y: f64 = raw.parse().map_err(|_| DatasetError::UnparsableCell {
            row,
            column: output_spec.name.clone(),
            value: raw.to_string(),
        })?;
        if !y.is_finite() {
            return Err(DatasetError::UnparsableCell {
                row,
                column: output_spec.name.clone(),
                value: raw.to_string(),
            });
        }
        output.push(y);
    }

    Dataset::from_parts(input_specs, inputs, &output_spec.name, output)
}

fn parse_cell(
    spec: &ColumnSpec,
    raw: &str,
    row: usize,
    into: &mut ColumnData,
) -> Result<(), DatasetError> {
    match (&spec.kind, into) {
        (ColumnKind::Numeric { min, max }, ColumnData::Numeric(values)) => {
            let v: f64 = raw.parse().map_err(|_| DatasetError::UnparsableCell {
                row,
                column: spec.name.clone(),
                value: raw.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DatasetError::UnparsableCell {
                    row,
                    column: spec.name.clone(),
                    value: raw.to_string(),
                });
            }
            if min.is_some_and(|m| v < m) || max.is_some_and(|m| v > m) {
                return Err(DatasetError::ValueOutsideSupport {
                    row,
                    column: spec.name.clone(),
                    value: raw.to_string(),
                });
            }
            values.push(v);
        }
        (ColumnKind::Integer { support }, ColumnData::Integer(values)) => {
            let v: i64 = raw.parse().map_err(|_| DatasetError::UnparsableCell {
                row,
                column: spec.name.clone(),
                value: raw.to_string(),
            })?;
            if !support.contains(v) {
                return Err(DatasetError::ValueOutsideSupport {
                    row,
                    column: spec.name.clone(),
                    value: raw.to_string(),
                });
            }
            values.push(v);
        }
        (ColumnKind::Categorical { levels }, ColumnData::Categorical(codes)) => {
            match levels.iter().position(|l| l == raw) {
                Some(code) => codes.push(code as u32),
                None => {
                    return Err(DatasetError::ValueOutsideSupport {
                        row,
                        column: spec.name.clone(),
                        value: raw.to_string(),
                    })
                }
            }
        }
        _ => unreachable!("column storage built from the same spec"),
    }
    Ok(())
}

/// Metadata for one encoded (numeric) column.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedColumn {
    /// Index of the source input within the dataset's input list.
    pub input: usize,
    /// Column label, e.g. `pitch` or `gender=F`.
    pub name: String,
    pub mean: f64,
    /// Population standard deviation of the raw column.
    pub sd: f64,
}

/// Row-major standardized numeric matrix over an input subset.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedMatrix {
    n: usize,
    m: usize,
    values: Vec<f64>,
    columns: Vec<EncodedColumn>,
    dropped: Vec<String>,
}

impl EncodedMatrix {
    /// Wraps a raw row-major matrix as-is (no standardization); for building
    /// neighbor indexes over externally prepared point sets.
    pub fn from_raw(n: usize, m: usize, values: Vec<f64>) -> Result<Self, DatasetError> {
        if values.len() != n * m {
            return Err(DatasetError::RawShapeMismatch(values.len(), n, m));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            let _ = bad;
            return Err(DatasetError::NonFiniteValue("<raw>".into()));
        }
        let columns = (0..m)
            .map(|c| EncodedColumn {
                input: c,
                name: format!("c{c}"),
                mean: 0.0,
                sd: 1.0,
            })
            .collect();
        Ok(EncodedMatrix {
            n,
            m,
            values,
            columns,
            dropped: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of encoded columns (after dropping constants).
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn point(&self, row: usize) -> &[f64] {
        &self.values[row * self.m..(row + 1) * self.m]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn columns(&self) -> &[EncodedColumn] {
        &self.columns
    }

    /// Names of columns dropped because they were constant.
    pub fn dropped(&self) -> &[String] {
        &self.dropped
    }
}

/// Encodes the given input subset as a standardized numeric matrix.
///
/// Categorical inputs expand to one indicator column per declared level;
/// numeric and integer inputs pass through as a single column. Every column is
/// standardized to mean 0 and population standard deviation 1. Constant
/// columns carry no distance information and are dropped with a logged
/// warning.
pub fn encode(ds: &Dataset, subset: Coalition) -> Result<EncodedMatrix, DatasetError> {
    if subset.is_empty() {
        return Err(DatasetError::EmptySubset);
    }
    if let Some(bad) = subset.members().find(|&i| i >= ds.d()) {
        return Err(DatasetError::SubsetOutOfRange(bad, ds.d()));
    }
    let n = ds.n();
    let mut raw_cols: Vec<(usize, String, Vec<f64>)> = Vec::new();
    for i in subset.members() {
        let spec = &ds.input_specs()[i];
        match (&spec.kind, ds.input(i)) {
            (ColumnKind::Numeric { .. }, ColumnData::Numeric(values)) => {
                raw_cols.push((i, spec.name.clone(), values.clone()));
            }
            (ColumnKind::Integer { .. }, ColumnData::Integer(values)) => {
                raw_cols.push((
                    i,
                    spec.name.clone(),
                    values.iter().map(|&v| v as f64).collect(),
                ));
            }
            (ColumnKind::Categorical { levels }, ColumnData::Categorical(codes)) => {
                for (code, level) in levels.iter().enumerate() {
                    let indicator = codes
                        .iter()
                        .map(|&c| if c as usize == code { 1.0 } else { 0.0 })
                        .collect();
                    raw_cols.push((i, format!("{}={}", spec.name, level), indicator));
                }
            }
            _ => unreachable!("column storage matches its spec by construction"),
        }
    }

    let mut values = Vec::new();
    let mut columns = Vec::new();
    let mut dropped = Vec::new();
    let mut kept_cols: Vec<Vec<f64>> = Vec::new();
    for (input, name, col) in raw_cols {
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        if sd <= 1e-12 * mean.abs().max(1.0) {
            log::warn!("encode: dropping constant column '{name}'");
            dropped.push(name);
            continue;
        }
        kept_cols.push(col.iter().map(|v| (v - mean) / sd).collect());
        columns.push(EncodedColumn {
            input,
            name,
            mean,
            sd,
        });
    }
    let m = kept_cols.len();
    values.reserve(n * m);
    for row in 0..n {
        for col in &kept_cols {
            values.push(col[row]);
        }
    }
    Ok(EncodedMatrix {
        n,
        m,
        values,
        columns,
        dropped,
    })
}

/// Draws `floor(fraction * n)` rows uniformly without replacement, preserving
/// the original row order. `fraction` must lie in `(0, 1]`; `fraction = 1`
/// returns the dataset unchanged.
pub fn subsample(ds: &Dataset, fraction: f64, seed: u64) -> Result<Dataset, DatasetError> {
    let rows = subsample_rows(ds.n(), fraction, seed)?;
    if rows.len() == ds.n() {
        return Ok(ds.clone());
    }
    take_rows(ds, &rows)
}

/// The row indices [`subsample`] would keep: a uniform without-replacement
/// draw of ⌊fraction·n⌋ rows, returned in ascending order.
pub fn subsample_rows(n: usize, fraction: f64, seed: u64) -> Result<Vec<usize>, DatasetError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DatasetError::InvalidFraction(fraction));
    }
    let m = ((fraction * n as f64) + 1e-9).floor() as usize;
    if m < 2 {
        return Err(DatasetError::SubsampleTooSmall(m));
    }
    if m == n {
        return Ok((0..n).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = rand::seq::index::sample(&mut rng, n, m).into_vec();
    rows.sort_unstable();
    Ok(rows)
}

/// A new dataset holding only the given rows (ascending, in-range, ≥ 2).
pub fn take_rows(ds: &Dataset, rows: &[usize]) -> Result<Dataset, DatasetError> {
    if rows.len() < 2 {
        return Err(DatasetError::SubsampleTooSmall(rows.len()));
    }
    for (i, &r) in rows.iter().enumerate() {
        if r >= ds.n() || (i > 0 && rows[i - 1] >= r) {
            return Err(DatasetError::BadRowSelection { n: ds.n() });
        }
    }
    let inputs = ds.inputs.iter().map(|c| c.gather(rows)).collect();
    let output = rows.iter().map(|&r| ds.output[r]).collect();
    Ok(Dataset {
        input_specs: ds.input_specs.clone(),
        inputs,
        output_name: ds.output_name.clone(),
        output,
    })
}

/// Sample variance of the output (n−1 denominator). Errors if the output is
/// constant, since variance shares are then undefined.
pub fn variance_total(ds: &Dataset) -> Result<f64, DatasetError> {
    let y = ds.output();
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    if var <= 0.0 || !var.is_finite() {
        return Err(DatasetError::DegenerateOutput);
    }
    Ok(var)
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Dataset[{} rows, {} inputs -> {}]",
            self.n(),
            self.d(),
            self.output_name
        )
    }
}
