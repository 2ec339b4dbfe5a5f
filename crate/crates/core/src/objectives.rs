//! Sparse logistic regression and least squares objectives, dataset loading
//! and planted synthetic instances.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Objective, SupportSet};

/// Labelled samples with rows `z^i` and labels `t_i ∈ {-1, +1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: DMatrix<f64>,
    labels: DVector<f64>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(samples: DMatrix<f64>, labels: DVector<f64>, feature_names: Option<Vec<String>>) -> Result<Self> {
        if samples.nrows() != labels.len() {
            return Err(Error::DimensionMismatch { expected: samples.nrows(), found: labels.len() });
        }
        if let Some(names) = &feature_names {
            if names.len() != samples.ncols() {
                return Err(Error::DimensionMismatch { expected: samples.ncols(), found: names.len() });
            }
        }
        if let Some(t) = labels.iter().find(|&&t| t != 1.0 && t != -1.0) {
            return Err(Error::InvalidConfig(format!("label {t} is not in {{-1, +1}}")));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset contains non-finite entries".into()));
        }
        Ok(Self { samples, labels, feature_names })
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn labels(&self) -> &DVector<f64> {
        &self.labels
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.samples.ncols()
    }

    /// Appends a constant-one column.
    pub fn with_intercept(self) -> Self {
        let n = self.samples.ncols();
        let samples = self.samples.insert_column(n, 1.0);
        let feature_names = self.feature_names.map(|mut v| {
            v.push("intercept".into());
            v
        });
        Self { samples, labels: self.labels, feature_names }
    }
}

fn largest_eigenvalue(gram: DMatrix<f64>) -> f64 {
    if gram.nrows() == 0 {
        return 0.0;
    }
    gram.symmetric_eigenvalues().max()
}

/// `softplus(a) = log(1 + e^a)` without overflow.
pub fn softplus(a: f64) -> f64 {
    if a > 0.0 {
        a + (-a).exp().ln_1p()
    } else {
        a.exp().ln_1p()
    }
}

/// `1 / (1 + e^{-a})` without overflow.
pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// `L(w) = Σ_i log(1 + exp(-t_i ⟨w, z^i⟩))`.
#[derive(Clone, Debug)]
pub struct LogisticObjective {
    data: Dataset,
    lipschitz: f64,
}

impl LogisticObjective {
    pub fn new(data: Dataset) -> Self {
        let z = data.samples();
        let lipschitz = 0.25 * largest_eigenvalue(z.tr_mul(z));
        Self { data, lipschitz }
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }
}

/// Value and gradient of the logistic loss at `w`.
pub fn logistic_eval(w: &DVector<f64>, d: &Dataset) -> (f64, DVector<f64>) {
    let margins = d.samples() * w;
    let mut value = 0.0;
    let mut coeff = DVector::zeros(d.n_samples());
    for i in 0..d.n_samples() {
        let t = d.labels()[i];
        let m = t * margins[i];
        value += softplus(-m);
        coeff[i] = -t * sigmoid(-m);
    }
    (value, d.samples().tr_mul(&coeff))
}

impl Objective for LogisticObjective {
    fn dim(&self) -> usize {
        self.data.n_features()
    }

    fn value_and_gradient(&self, w: &DVector<f64>) -> (f64, DVector<f64>) {
        logistic_eval(w, &self.data)
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
}

/// `½ ||A x - b||²`.
#[derive(Clone, Debug)]
pub struct LeastSquaresObjective {
    a: DMatrix<f64>,
    b: DVector<f64>,
    lipschitz: f64,
}

impl LeastSquaresObjective {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), found: b.len() });
        }
        let lipschitz = largest_eigenvalue(a.tr_mul(&a));
        Ok(Self { a, b, lipschitz })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.b
    }
}

impl Objective for LeastSquaresObjective {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let r = &self.a * x - &self.b;
        (0.5 * r.norm_squared(), self.a.tr_mul(&r))
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
}

/// How to read a CSV file into a [`Dataset`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub label_column: String,
    #[serde(default)]
    pub categorical_columns: Vec<String>,
    #[serde(default = "default_true")]
    pub standardize: bool,
    #[serde(default)]
    pub add_intercept: bool,
}

fn default_true() -> bool {
    true
}

impl CsvSchema {
    pub fn new(label_column: impl Into<String>) -> Self {
        Self { label_column: label_column.into(), categorical_columns: Vec::new(), standardize: true, add_intercept: false }
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "?" | "NA" | "na" | "NaN" | "nan")
}

fn data_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::Data { path: path.to_path_buf(), reason: reason.into() }
}

/// Maps a two-class label column to ±1, lexicographically smaller class
/// first.
fn binary_labels(path: &Path, raw: &[String]) -> Result<DVector<f64>> {
    let classes: BTreeSet<&str> = raw.iter().map(String::as_str).collect();
    if classes.len() != 2 {
        return Err(data_error(path, format!("label column has {} classes, expected 2", classes.len())));
    }
    let negative = *classes.iter().next().unwrap();
    Ok(DVector::from_iterator(raw.len(), raw.iter().map(|c| if c == negative { -1.0 } else { 1.0 })))
}

/// Centers each column and scales it to unit sample standard deviation
/// (`N - 1` denominator). Constant columns end up identically zero.
pub fn standardize_columns(m: &mut DMatrix<f64>) {
    let rows = m.nrows();
    if rows == 0 {
        return;
    }
    for mut col in m.column_iter_mut() {
        let mean = col.iter().sum::<f64>() / rows as f64;
        col.add_scalar_mut(-mean);
        // second pass removes the rounding left by the first
        let residual_mean = col.iter().sum::<f64>() / rows as f64;
        col.add_scalar_mut(-residual_mean);
        if rows < 2 {
            continue;
        }
        let sd = (col.iter().map(|v| v * v).sum::<f64>() / (rows - 1) as f64).sqrt();
        if sd > 0.0 {
            col /= sd;
        }
    }
}

/// Reads a comma-separated file with a header row. Rows with a missing cell
/// are dropped, categorical columns are one-hot encoded (one column per
/// level, levels in sorted order) and, if requested, the remaining numeric
/// columns are standardized.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| data_error(path, e.to_string()))?;
    let headers: Vec<String> = reader.headers().map_err(|e| data_error(path, e.to_string()))?.iter().map(String::from).collect();
    let label_idx = headers
        .iter()
        .position(|h| *h == schema.label_column)
        .ok_or_else(|| data_error(path, format!("no column named `{}`", schema.label_column)))?;
    for c in &schema.categorical_columns {
        if !headers.contains(c) {
            return Err(data_error(path, format!("no categorical column named `{c}`")));
        }
    }

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| data_error(path, e.to_string()))?;
        if record.len() != headers.len() {
            return Err(data_error(path, format!("row {} has {} fields, expected {}", line + 2, record.len(), headers.len())));
        }
        if record.iter().any(is_missing) {
            continue;
        }
        rows.push(record.iter().map(String::from).collect());
    }
    if rows.is_empty() {
        return Err(data_error(path, "no complete rows"));
    }

    let labels_raw: Vec<String> = rows.iter().map(|r| r[label_idx].clone()).collect();
    let labels = binary_labels(path, &labels_raw)?;

    enum Column {
        Numeric(Vec<f64>),
        OneHot(Vec<String>, BTreeMap<String, usize>),
    }
    let mut names = Vec::new();
    let mut columns = Vec::new();
    for (j, header) in headers.iter().enumerate() {
        if j == label_idx {
            continue;
        }
        if schema.categorical_columns.contains(header) {
            let values: Vec<String> = rows.iter().map(|r| r[j].clone()).collect();
            let levels: BTreeSet<String> = values.iter().cloned().collect();
            let level_idx: BTreeMap<String, usize> = levels.into_iter().enumerate().map(|(k, l)| (l, k)).collect();
            names.extend(level_idx.keys().map(|l| format!("{header}={l}")));
            columns.push(Column::OneHot(values, level_idx));
        } else {
            let mut values = Vec::with_capacity(rows.len());
            for (r, row) in rows.iter().enumerate() {
                let v: f64 = row[j]
                    .parse()
                    .map_err(|_| data_error(path, format!("cannot parse `{}` in column `{header}` (data row {})", row[j], r + 1)))?;
                if !v.is_finite() {
                    return Err(data_error(path, format!("non-finite value in column `{header}`")));
                }
                values.push(v);
            }
            names.push(header.clone());
            columns.push(Column::Numeric(values));
        }
    }

    let mut samples = DMatrix::zeros(rows.len(), names.len());
    let mut numeric_cols = Vec::new();
    let mut c = 0;
    for col in &columns {
        match col {
            Column::Numeric(v) => {
                for (r, &x) in v.iter().enumerate() {
                    samples[(r, c)] = x;
                }
                numeric_cols.push(c);
                c += 1;
            }
            Column::OneHot(v, levels) => {
                for (r, l) in v.iter().enumerate() {
                    samples[(r, c + levels[l])] = 1.0;
                }
                c += levels.len();
            }
        }
    }
    if schema.standardize && !numeric_cols.is_empty() {
        let mut numeric = samples.select_columns(&numeric_cols);
        standardize_columns(&mut numeric);
        for (k, &c) in numeric_cols.iter().enumerate() {
            samples.set_column(c, &numeric.column(k));
        }
    }

    let data = Dataset::new(samples, labels, Some(names))?;
    Ok(if schema.add_intercept { data.with_intercept() } else { data })
}

/// Reads the sparse `label index:value ...` format (1-based indices).
/// `n_features` defaults to the largest index seen.
pub fn load_libsvm(path: &Path, n_features: Option<usize>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let mut labels_raw = Vec::new();
    let mut entries: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_idx = 0;
    for (line_no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let label = parts.next().unwrap();
        let label: f64 = label.parse().map_err(|_| data_error(path, format!("bad label `{label}` on line {}", line_no + 1)))?;
        let mut row = Vec::new();
        for tok in parts {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| data_error(path, format!("expected index:value, found `{tok}` on line {}", line_no + 1)))?;
            let i: usize = i.parse().map_err(|_| data_error(path, format!("bad index `{i}` on line {}", line_no + 1)))?;
            let v: f64 = v.parse().map_err(|_| data_error(path, format!("bad value `{v}` on line {}", line_no + 1)))?;
            if i == 0 {
                return Err(data_error(path, format!("indices are 1-based (line {})", line_no + 1)));
            }
            max_idx = max_idx.max(i);
            row.push((i - 1, v));
        }
        labels_raw.push(label);
        entries.push(row);
    }
    if entries.is_empty() {
        return Err(data_error(path, "no samples"));
    }
    let n = n_features.unwrap_or(max_idx);
    if max_idx > n {
        return Err(data_error(path, format!("feature index {max_idx} exceeds n_features = {n}")));
    }
    let mut samples = DMatrix::zeros(entries.len(), n);
    for (r, row) in entries.iter().enumerate() {
        for &(c, v) in row {
            samples[(r, c)] = v;
        }
    }
    let mut classes: Vec<f64> = labels_raw.clone();
    classes.sort_by(f64::total_cmp);
    classes.dedup();
    if classes.len() != 2 {
        return Err(data_error(path, format!("found {} label classes, expected 2", classes.len())));
    }
    let labels = DVector::from_iterator(labels_raw.len(), labels_raw.iter().map(|&l| if l == classes[0] { -1.0 } else { 1.0 }));
    Dataset::new(samples, labels, None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantedKind {
    LeastSquares,
    Logistic,
}

/// Synthetic instance with a known sparse generating vector.
#[derive(Clone)]
pub struct Planted {
    pub objective: Arc<dyn Objective>,
    pub support: SupportSet,
    pub x_star: DVector<f64>,
    pub dataset: Option<Dataset>,
}

fn planted_vector(rng: &mut ChaCha8Rng, n: usize, s_true: usize) -> (SupportSet, DVector<f64>) {
    let support = SupportSet::new(index::sample(rng, n, s_true).into_vec());
    let mut x = DVector::zeros(n);
    for &i in support.indices() {
        x[i] = if rng.random::<bool>() { 1.0 } else { -1.0 };
    }
    (support, x)
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // fill row-major so that the stream does not depend on storage order
    let mut m = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m[(r, c)] = rng.sample(StandardNormal);
        }
    }
    m
}

/// Least squares with standard normal `A` (`rows × n`) and
/// `b = A x* + noise · ε`, where `x*` has `±1` entries on `s_true`
/// random coordinates.
pub fn synth_least_squares(n: usize, s_true: usize, rows: usize, noise: f64, seed: u64) -> Result<Planted> {
    if s_true > n {
        return Err(Error::InvalidConfig(format!("s_true = {s_true} exceeds n = {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (support, x_star) = planted_vector(&mut rng, n, s_true);
    let a = gaussian_matrix(&mut rng, rows, n);
    let eps = DVector::from_iterator(rows, (0..rows).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let b = &a * &x_star + noise * eps;
    let objective = Arc::new(LeastSquaresObjective::new(a, b)?);
    Ok(Planted { objective, support, x_star, dataset: None })
}

/// Logistic regression with standard normal features; labels are drawn
/// from `P(t = 1) = sigmoid(⟨w*, z⟩)` and then flipped with probability
/// `noise`.
pub fn synth_logistic(n: usize, s_true: usize, samples: usize, noise: f64, seed: u64) -> Result<Planted> {
    if s_true > n {
        return Err(Error::InvalidConfig(format!("s_true = {s_true} exceeds n = {n}")));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::InvalidConfig(format!("label flip probability {noise} is outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (support, w_star) = planted_vector(&mut rng, n, s_true);
    let z = gaussian_matrix(&mut rng, samples, n);
    let margins = &z * &w_star;
    let labels = DVector::from_iterator(
        samples,
        margins.iter().map(|&m| {
            let mut t = if rng.random::<f64>() < sigmoid(m) { 1.0 } else { -1.0 };
            if rng.random::<f64>() < noise {
                t = -t;
            }
            t
        }),
    );
    let data = Dataset::new(z, labels, None)?;
    let objective = Arc::new(LogisticObjective::new(data.clone()));
    Ok(Planted { objective, support, x_star: w_star, dataset: Some(data) })
}

/// Dispatches to [`synth_least_squares`] or [`synth_logistic`].
pub fn synth_planted(kind: PlantedKind, n: usize, s_true: usize, rows: usize, noise: f64, seed: u64) -> Result<Planted> {
    match kind {
        PlantedKind::LeastSquares => synth_least_squares(n, s_true, rows, noise, seed),
        PlantedKind::Logistic => synth_logistic(n, s_true, rows, noise, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use std::io::Write;

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn logistic_at_origin() {
        let data = Dataset::new(
            DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 3.0, -2.0]),
            dvector![1.0, -1.0, 1.0],
            None,
        )
        .unwrap();
        let (f, g) = logistic_eval(&DVector::zeros(2), &data);
        assert!((f - 3.0 * std::f64::consts::LN_2).abs() < 1e-15);
        // -½ Σ t_i z_i
        let expected: DVector<f64> = -0.5 * dvector![1.0 + 1.0 + 3.0, 2.0 - 0.5 - 2.0];
        assert!((g - expected).norm() < 1e-15);
    }

    #[test]
    fn logistic_large_margin_is_stable() {
        let data = Dataset::new(DMatrix::from_element(1, 1, 1.0), dvector![1.0], None).unwrap();
        let (f, _) = logistic_eval(&dvector![40.0], &data);
        assert!((f - (-40.0f64).exp()).abs() < 1e-15);
        for w in [1e3, -1e3] {
            let (f, g) = logistic_eval(&dvector![w], &data);
            assert!(f.is_finite() && g[0].is_finite());
        }
        assert_eq!(logistic_eval(&dvector![-1e3], &data).0, 1e3);
    }

    #[test]
    fn least_squares_gradient_is_exact() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let obj = LeastSquaresObjective::new(a, dvector![1.0, 1.0]).unwrap();
        let (f, g) = obj.value_and_gradient(&dvector![1.0, 0.0]);
        // r = (0, 2)
        assert_eq!(f, 2.0);
        assert_eq!(g, dvector![6.0, 8.0]);
        assert!((obj.lipschitz().unwrap() - (15.0 + 221f64.sqrt())).abs() < 1e-10);
    }

    #[test]
    fn csv_standardizes_and_maps_labels() {
        let f = write_temp("x,y,label\n1,10,a\n2,20,b\n4,30,a\n");
        let d = load_csv(f.path(), &CsvSchema::new("label")).unwrap();
        assert_eq!(d.labels(), &dvector![-1.0, 1.0, -1.0]);
        for col in d.samples().column_iter() {
            let mean = col.iter().sum::<f64>() / 3.0;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
            assert!(mean.abs() <= 1e-12);
            assert!((sd - 1.0).abs() < 1e-12);
        }
        // x = (1, 2, 4): mean 7/3, sample sd sqrt(7/3)
        let expected = (1.0 - 7.0 / 3.0) / (7.0f64 / 3.0).sqrt();
        assert!((d.samples()[(0, 0)] - expected).abs() < 1e-12);
    }

    #[test]
    fn csv_drops_missing_rows_and_one_hot_encodes() {
        let f = write_temp("age,color,label\n30,red,yes\n,blue,no\n40,green,no\n50,red,yes\n");
        let schema = CsvSchema { categorical_columns: vec!["color".into()], ..CsvSchema::new("label") };
        let d = load_csv(f.path(), &schema).unwrap();
        assert_eq!(d.n_samples(), 3);
        // age + two levels (green, red) surviving the drop
        assert_eq!(d.feature_names().unwrap(), &["age", "color=green", "color=red"]);
        assert_eq!(d.samples().column(2).as_slice(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn csv_errors() {
        let f = write_temp("x,label\n1,a\n2,a\n");
        assert!(matches!(load_csv(f.path(), &CsvSchema::new("label")), Err(Error::Data { .. })));
        let f = write_temp("x,label\n1,a\nfoo,b\n");
        assert!(matches!(load_csv(f.path(), &CsvSchema::new("label")), Err(Error::Data { .. })));
        let f = write_temp("x,label\n,a\n");
        assert!(matches!(load_csv(f.path(), &CsvSchema::new("label")), Err(Error::Data { .. })));
    }

    #[test]
    fn constant_column_becomes_zero() {
        let mut m = DMatrix::from_row_slice(3, 1, &[5.0, 5.0, 5.0]);
        standardize_columns(&mut m);
        assert!(m.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn libsvm_round_trip() {
        let f = write_temp("+1 1:0.5 3:2\n-1 2:1.5\n# comment\n+1 3:-1\n");
        let d = load_libsvm(f.path(), None).unwrap();
        assert_eq!(d.n_features(), 3);
        assert_eq!(d.labels(), &dvector![1.0, -1.0, 1.0]);
        assert_eq!(d.samples()[(0, 2)], 2.0);
        assert_eq!(d.samples()[(1, 1)], 1.5);
        assert!(load_libsvm(f.path(), Some(2)).is_err());
    }

    #[test]
    fn planted_instances_are_deterministic() {
        let a = synth_least_squares(8, 2, 16, 0.1, 7).unwrap();
        let b = synth_least_squares(8, 2, 16, 0.1, 7).unwrap();
        let x = DVector::from_element(8, 0.3);
        assert_eq!(a.objective.value(&x).to_bits(), b.objective.value(&x).to_bits());
        assert_eq!(a.support, b.support);
        let c = synth_logistic(8, 3, 50, 0.0, 7).unwrap();
        let d = synth_logistic(8, 3, 50, 0.0, 7).unwrap();
        assert_eq!(c.dataset, d.dataset);
        assert_eq!(c.support.len(), 3);
    }

    #[test]
    fn empty_planted_support() {
        let p = synth_least_squares(5, 0, 10, 1.0, 3).unwrap();
        assert!(p.support.is_empty());
        assert_eq!(p.x_star, DVector::zeros(5));
    }
}
