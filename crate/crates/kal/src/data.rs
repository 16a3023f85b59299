//! Datasets, loaders, and cross-validation fold plans.
//!
//! Three tabular tasks ship with the crate, each paired with a rule
//! file the selection strategies can use:
//!
//! * **xor** — two uniform features in the unit square, label on when
//!   exactly one feature exceeds one half. Generated on demand with a
//!   seed ([`make_xor`]).
//! * **iris** — the 150 classic flower measurements, bundled as CSV,
//!   features min-max scaled into `[0, 1]`.
//! * **insurance** — a medical-charges regression over age, sex,
//!   body-mass index, children, smoking status, and region. The
//!   bundled CSV is *synthetic*: it is drawn from a seeded generator
//!   ([`synthesize_insurance`]) whose charge structure follows the
//!   smoker/age/bmi bands the rule file describes, with noise. The
//!   loader reads any real file with the same columns.
//!
//! Each dataset carries two feature matrices: `x_model`, what the
//! network consumes (z-scored for insurance), and `x_pred`, what rule
//! predicates read (always natural units). For xor and iris the two
//! coincide.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::knowledge::{self, KnowledgeBase, Schema};

/// Ground-truth targets in whichever shape the task calls for.
#[derive(Clone, Debug, PartialEq)]
pub enum Labels {
    /// One class index per sample.
    Classes(Vec<usize>),
    /// One {0, 1} row per sample, one column per head.
    Bitmap(Array2<f64>),
    /// One real target per sample, natural units.
    Real(Vec<f64>),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Classes(v) => v.len(),
            Labels::Bitmap(m) => m.nrows(),
            Labels::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The labels at `indices`, in order.
    pub fn subset(&self, indices: &[usize]) -> Labels {
        match self {
            Labels::Classes(v) => Labels::Classes(indices.iter().map(|&i| v[i]).collect()),
            Labels::Bitmap(m) => {
                let mut out = Array2::zeros((indices.len(), m.ncols()));
                for (row, &i) in indices.iter().enumerate() {
                    out.row_mut(row).assign(&m.row(i));
                }
                Labels::Bitmap(out)
            }
            Labels::Real(v) => Labels::Real(indices.iter().map(|&i| v[i]).collect()),
        }
    }

    /// Class index per sample, if this is a class-shaped label set.
    pub fn as_classes(&self) -> Option<&[usize]> {
        match self {
            Labels::Classes(v) => Some(v),
            _ => None,
        }
    }

    /// Real target per sample, if this is a regression label set.
    pub fn as_real(&self) -> Option<&[f64]> {
        match self {
            Labels::Real(v) => Some(v),
            _ => None,
        }
    }
}

/// A loaded task: features for the network, features for the rules,
/// targets, shape, and the rule source bundled with it.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub name: String,
    /// Features the network trains on.
    pub x_model: Array2<f64>,
    /// Features rule predicates read (natural units).
    pub x_pred: Array2<f64>,
    pub labels: Labels,
    pub schema: Schema,
    pub feature_names: Vec<String>,
    /// Class display names; empty for regression.
    pub class_names: Vec<String>,
    /// Bundled rule source text; may be empty.
    pub rules_source: String,
    /// Mean and standard deviation of the regression target over the
    /// whole dataset, used to standardize training targets.
    pub target_stats: Option<(f64, f64)>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x_model.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parses the bundled rule source against this dataset's schema.
    pub fn knowledge(&self) -> Result<KnowledgeBase, knowledge::KnowledgeError> {
        knowledge::parse_knowledge(&self.rules_source, &self.schema)
    }
}

/// Problems reading or shaping data.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{dataset} line {line}: {message}")]
    Format { dataset: &'static str, line: usize, message: String },
    #[error("cannot split {n} samples into {k} folds")]
    BadFoldCount { n: usize, k: usize },
}

const XOR_RULES: &str = include_str!("../data/xor.kal");
const IRIS_RULES: &str = include_str!("../data/iris.kal");
const INSURANCE_RULES: &str = include_str!("../data/insurance.kal");
const IRIS_CSV: &str = include_str!("../data/iris.csv");
const INSURANCE_CSV: &str = include_str!("../data/insurance.csv");

/// Number of rows in the bundled insurance file (matches the size of
/// the well-known real medical-charges table).
pub const INSURANCE_ROWS: usize = 1338;

/// Seed the bundled insurance file was generated with.
pub const INSURANCE_SEED: u64 = 20240817;

/// `n` points uniform in the unit square, labeled by exclusive-or of
/// the two half-plane tests. Deterministic in `seed`.
pub fn make_xor(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((n, 2));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (rng.random::<f64>(), rng.random::<f64>());
        x[[i, 0]] = a;
        x[[i, 1]] = b;
        y.push(usize::from((a > 0.5) != (b > 0.5)));
    }
    Dataset {
        name: "xor".into(),
        x_pred: x.clone(),
        x_model: x,
        labels: Labels::Classes(y),
        schema: Schema::binary(2),
        feature_names: vec!["x1".into(), "x2".into()],
        class_names: vec!["off".into(), "on".into()],
        rules_source: XOR_RULES.to_string(),
        target_stats: None,
    }
}

/// The bundled iris table.
pub fn iris() -> Dataset {
    parse_iris_csv(IRIS_CSV).expect("bundled iris data is well-formed")
}

/// Loads an iris CSV (`sepal_length,sepal_width,petal_length,
/// petal_width,species`) from disk.
pub fn load_iris(path: &Path) -> Result<Dataset, DataError> {
    parse_iris_csv(&read(path)?)
}

/// Parses iris CSV text: four measurements and a species name per row.
/// Species accept an optional `Iris-` prefix and both `versicolor`
/// spellings. Features are min-max scaled into `[0, 1]` column-wise
/// over the whole table.
pub fn parse_iris_csv(text: &str) -> Result<Dataset, DataError> {
    const DS: &str = "iris";
    let mut reader = csv_reader(text);
    check_header(
        &mut reader,
        DS,
        &["sepal_length", "sepal_width", "petal_length", "petal_width", "species"],
    )?;
    let mut rows: Vec<[f64; 4]> = Vec::new();
    let mut classes = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| bad_row(DS, line, e.to_string()))?;
        if record.len() != 5 {
            return Err(bad_row(DS, line, format!("expected 5 fields, found {}", record.len())));
        }
        let mut values = [0.0; 4];
        for (j, value) in values.iter_mut().enumerate() {
            *value = parse_number(DS, line, record.get(j).unwrap())?;
        }
        let species = record.get(4).unwrap().trim().to_ascii_lowercase();
        let species = species.strip_prefix("iris-").unwrap_or(&species);
        let class = match species {
            "setosa" => 0,
            "versicolor" | "versicolour" => 1,
            "virginica" => 2,
            other => return Err(bad_row(DS, line, format!("unknown species `{other}`"))),
        };
        rows.push(values);
        classes.push(class);
    }
    if rows.is_empty() {
        return Err(bad_row(DS, 2, "no data rows".into()));
    }
    let mut x = Array2::zeros((rows.len(), 4));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            x[[i, j]] = v;
        }
    }
    min_max_scale(&mut x);
    Ok(Dataset {
        name: "iris".into(),
        x_pred: x.clone(),
        x_model: x,
        labels: Labels::Classes(classes),
        schema: Schema::multiclass(4, 3),
        feature_names: ["sepal_length", "sepal_width", "petal_length", "petal_width"]
            .map(String::from)
            .to_vec(),
        class_names: ["setosa", "versicolour", "virginica"].map(String::from).to_vec(),
        rules_source: IRIS_RULES.to_string(),
        target_stats: None,
    })
}

/// The bundled (synthetic) insurance table.
pub fn insurance() -> Dataset {
    parse_insurance_csv(INSURANCE_CSV).expect("bundled insurance data is well-formed")
}

/// Loads an insurance CSV (`age,sex,bmi,children,smoker,region,
/// charges`) from disk.
pub fn load_insurance(path: &Path) -> Result<Dataset, DataError> {
    parse_insurance_csv(&read(path)?)
}

/// Parses insurance CSV text. Categorical columns are encoded
/// numerically (`female/male` as 0/1, `no/yes` as 0/1, regions
/// northeast/northwest/southeast/southwest as 0–3); the network sees
/// z-scored features while predicates read the natural-unit columns.
pub fn parse_insurance_csv(text: &str) -> Result<Dataset, DataError> {
    const DS: &str = "insurance";
    let mut reader = csv_reader(text);
    check_header(&mut reader, DS, &["age", "sex", "bmi", "children", "smoker", "region", "charges"])?;
    let mut features: Vec<[f64; 6]> = Vec::new();
    let mut charges = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| bad_row(DS, line, e.to_string()))?;
        if record.len() != 7 {
            return Err(bad_row(DS, line, format!("expected 7 fields, found {}", record.len())));
        }
        let field = |j: usize| record.get(j).unwrap().trim();
        let sex = match field(1).to_ascii_lowercase().as_str() {
            "female" => 0.0,
            "male" => 1.0,
            other => return Err(bad_row(DS, line, format!("unknown sex `{other}`"))),
        };
        let smoker = match field(4).to_ascii_lowercase().as_str() {
            "no" => 0.0,
            "yes" => 1.0,
            other => return Err(bad_row(DS, line, format!("unknown smoker flag `{other}`"))),
        };
        let region = match field(5).to_ascii_lowercase().as_str() {
            "northeast" => 0.0,
            "northwest" => 1.0,
            "southeast" => 2.0,
            "southwest" => 3.0,
            other => return Err(bad_row(DS, line, format!("unknown region `{other}`"))),
        };
        features.push([
            parse_number(DS, line, field(0))?,
            sex,
            parse_number(DS, line, field(2))?,
            parse_number(DS, line, field(3))?,
            smoker,
            region,
        ]);
        charges.push(parse_number(DS, line, field(6))?);
    }
    if features.is_empty() {
        return Err(bad_row(DS, 2, "no data rows".into()));
    }
    let mut x_pred = Array2::zeros((features.len(), 6));
    for (i, row) in features.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            x_pred[[i, j]] = v;
        }
    }
    let x_model = z_score(&x_pred);
    let mean = charges.iter().sum::<f64>() / charges.len() as f64;
    let var = charges.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / charges.len() as f64;
    let std = var.sqrt().max(1e-12);
    Ok(Dataset {
        name: "insurance".into(),
        x_model,
        x_pred,
        labels: Labels::Real(charges),
        schema: Schema::regression(6),
        feature_names: ["age", "sex", "bmi", "children", "smoker", "region"]
            .map(String::from)
            .to_vec(),
        class_names: Vec::new(),
        rules_source: INSURANCE_RULES.to_string(),
        target_stats: Some((mean, std)),
    })
}

/// Generates a synthetic insurance CSV whose charges follow the band
/// structure of the bundled rules: non-smokers pay a few hundred
/// dollars per year of age (crossing 7 500 around age 40), smokers pay
/// a large surcharge growing with body-mass index (crossing 30 000
/// around bmi 30), everything blurred with Gaussian noise.
/// Deterministic in `seed`; the bundled file is
/// `synthesize_insurance(INSURANCE_ROWS, INSURANCE_SEED)`.
pub fn synthesize_insurance(rows: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::with_capacity(rows * 48);
    out.push_str("age,sex,bmi,children,smoker,region,charges\n");
    let regions = ["northeast", "northwest", "southeast", "southwest"];
    for _ in 0..rows {
        let age = rng.random_range(18..=64u32);
        let sex = if rng.random::<f64>() < 0.5 { "female" } else { "male" };
        let bmi = (normal(&mut rng) * 6.0 + 30.5).clamp(16.0, 50.0);
        let children = pick_weighted(&mut rng, &[0.42, 0.24, 0.16, 0.12, 0.04, 0.02]);
        let smoker = rng.random::<f64>() < 0.2;
        let region = regions[rng.random_range(0..regions.len())];
        let charge = if smoker {
            10_500.0 + 650.0 * bmi + 120.0 * children as f64 + normal(&mut rng) * 1_500.0
        } else {
            250.0 + 175.0 * age as f64 + 90.0 * children as f64 + normal(&mut rng) * 500.0
        }
        .max(1_100.0);
        let smoker = if smoker { "yes" } else { "no" };
        writeln!(out, "{age},{sex},{bmi:.1},{children},{smoker},{region},{charge:.2}").unwrap();
    }
    out
}

/// Standard normal draw via Box–Muller.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = rng.random::<f64>().max(1e-12);
    let u2 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn pick_weighted(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut roll = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        roll -= w;
        if roll <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// One cross-validation split: row indices for training (the labeled
/// pool plus the unlabeled pool) and held-out evaluation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// A deterministic k-fold partition of a dataset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }
}

/// Splits `labels.len()` samples into `k` folds, stratified by class
/// for class-shaped labels so every fold sees every class. The same
/// `(labels, k, seed)` always yields the same plan.
pub fn fold_plan(labels: &Labels, k: usize, seed: u64) -> Result<FoldPlan, DataError> {
    let n = labels.len();
    if k < 2 || k > n {
        return Err(DataError::BadFoldCount { n, k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<usize>> = match labels {
        Labels::Classes(classes) => {
            let n_classes = classes.iter().copied().max().unwrap_or(0) + 1;
            let mut groups = vec![Vec::new(); n_classes];
            for (i, &c) in classes.iter().enumerate() {
                groups[c].push(i);
            }
            groups
        }
        _ => vec![(0..n).collect()],
    };
    let mut test_sets = vec![Vec::new(); k];
    let mut next = 0usize;
    for mut group in groups {
        shuffle(&mut group, &mut rng);
        for idx in group {
            test_sets[next % k].push(idx);
            next += 1;
        }
    }
    let folds = test_sets
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let mut in_test = vec![false; n];
            test.iter().for_each(|&i| in_test[i] = true);
            let train = (0..n).filter(|&i| !in_test[i]).collect();
            Fold { train, test }
        })
        .collect();
    Ok(FoldPlan { folds })
}

fn shuffle(indices: &mut [usize], rng: &mut ChaCha8Rng) {
    // Fisher–Yates, explicit so the draw order is pinned down by the
    // seed rather than by rand's slice internals.
    for i in (1..indices.len()).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }
}

fn read(path: &Path) -> Result<String, DataError> {
    std::fs::read_to_string(path)
        .map_err(|source| DataError::Io { path: path.display().to_string(), source })
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes())
}

fn check_header(
    reader: &mut csv::Reader<&[u8]>,
    dataset: &'static str,
    expected: &[&str],
) -> Result<(), DataError> {
    let headers = reader.headers().map_err(|e| bad_row(dataset, 1, e.to_string()))?;
    let found: Vec<&str> = headers.iter().collect();
    if found != expected {
        return Err(bad_row(
            dataset,
            1,
            format!("expected header `{}`, found `{}`", expected.join(","), found.join(",")),
        ));
    }
    Ok(())
}

fn bad_row(dataset: &'static str, line: usize, message: String) -> DataError {
    DataError::Format { dataset, line, message }
}

fn parse_number(dataset: &'static str, line: usize, text: &str) -> Result<f64, DataError> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| bad_row(dataset, line, format!("`{text}` is not a number")))
}

/// Scales each column of `x` into `[0, 1]` by its min and max
/// (constant columns become all zero).
fn min_max_scale(x: &mut Array2<f64>) {
    for mut col in x.columns_mut() {
        let min = col.iter().copied().fold(f64::INFINITY, f64::min);
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = max - min;
        if span > 0.0 {
            col.mapv_inplace(|v| (v - min) / span);
        } else {
            col.fill(0.0);
        }
    }
}

/// Column-wise z-scoring (constant columns become all zero).
fn z_score(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut col in out.columns_mut() {
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
        let std = var.sqrt();
        if std > 0.0 {
            col.mapv_inplace(|v| (v - mean) / std);
        } else {
            col.fill(0.0);
        }
    }
    out
}
