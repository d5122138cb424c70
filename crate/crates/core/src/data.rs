//! Dataset ingestion, scaling, stratified splitting and synthetic toys.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::{Dataset, Mode, OrdinalModel};

/// SplitMix64 finalizer; derives independent stream seeds from a base seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// CSV

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoadWarning {
    /// Only one class occurs in the file; no model can be fitted to it.
    DegenerateLabels { class: usize },
    /// Labels in `1..=k` that never occur.
    EmptyClasses(Vec<usize>),
}

impl std::fmt::Display for LoadWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LoadWarning::DegenerateLabels { class } => {
                write!(f, "degenerate labels: every row has class {class}")
            }
            LoadWarning::EmptyClasses(c) => write!(f, "classes without samples: {c:?}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CsvData {
    pub dataset: Dataset,
    pub header: Option<Vec<String>>,
    pub warnings: Vec<LoadWarning>,
}

/// Load a comma-separated file whose last column is an integer label in
/// `1..=k` (`k` = largest label). A first row with any non-numeric cell is
/// treated as a header.
pub fn load_csv(path: impl AsRef<Path>) -> Result<CsvData> {
    let path = path.as_ref();
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| parse_err(format!("line {line}: {e}")))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if idx == 0 && record.iter().any(|c| c.parse::<f64>().is_err()) {
            header = Some(record.iter().map(str::to_owned).collect());
            continue;
        }
        let cols = record.len();
        if cols < 2 {
            return Err(parse_err(format!(
                "line {line}: need at least one feature and a label"
            )));
        }
        match width {
            None => width = Some(cols),
            Some(w) if w != cols => {
                return Err(parse_err(format!(
                    "line {line}: {cols} columns, expected {w}"
                )))
            }
            _ => {}
        }
        let mut row = Vec::with_capacity(cols - 1);
        for (c, cell) in record.iter().take(cols - 1).enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                parse_err(format!(
                    "line {line}, column {}: `{cell}` is not numeric",
                    c + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(parse_err(format!(
                    "line {line}, column {}: non-finite value `{cell}`",
                    c + 1
                )));
            }
            row.push(v);
        }
        let cell = &record[cols - 1];
        let label: f64 = cell.parse().map_err(|_| {
            parse_err(format!(
                "line {line}, column {cols}: label `{cell}` is not numeric"
            ))
        })?;
        if !(label >= 1.0 && label.fract() == 0.0 && label < u32::MAX as f64) {
            return Err(parse_err(format!(
                "line {line}, column {cols}: label `{cell}` is not an integer ≥ 1"
            )));
        }
        rows.push(row);
        labels.push(label as usize);
    }
    if rows.is_empty() {
        return Err(parse_err("no data rows".into()));
    }
    let k = labels.iter().copied().max().unwrap_or(1);
    let p = rows[0].len();
    let features = Array2::from_shape_vec((rows.len(), p), rows.concat())
        .map_err(|e| parse_err(e.to_string()))?;
    let dataset = Dataset::new(features, labels, k)?;

    let mut warnings = Vec::new();
    let counts = dataset.class_counts();
    if dataset.classes_present() < 2 {
        warnings.push(LoadWarning::DegenerateLabels {
            class: dataset.labels()[0],
        });
    }
    let empty: Vec<usize> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == 0)
        .map(|(i, _)| i + 1)
        .collect();
    if !empty.is_empty() {
        warnings.push(LoadWarning::EmptyClasses(empty));
    }
    Ok(CsvData {
        dataset,
        header,
        warnings,
    })
}

/// Write `features..., label` rows. Values use the shortest representation
/// that parses back to the same `f64`.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let names: Vec<String> = (1..=data.p()).map(|c| format!("x{c}")).collect();
    writeln!(out, "{},label", names.join(",")).expect("string write");
    for i in 0..data.n() {
        for v in data.row(i) {
            write!(out, "{v},").expect("string write");
        }
        writeln!(out, "{}", data.labels()[i]).expect("string write");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Scaling

/// Per-feature centering and scaling fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    /// Population standard deviations; zero-variance features use 1.
    pub sds: Vec<f64>,
}

impl Scaler {
    pub fn fit(train: &Dataset) -> Self {
        let n = train.n() as f64;
        let x = train.features();
        let means: Vec<f64> = x.columns().into_iter().map(|c| c.sum() / n).collect();
        let sds = x
            .columns()
            .into_iter()
            .zip(&means)
            .map(|(c, m)| {
                let var = c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
                let sd = var.sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { means, sds }
    }

    pub fn transform(&self, data: &Dataset) -> Result<Dataset> {
        if data.p() != self.means.len() {
            return Err(Error::dim("scaler features", self.means.len(), data.p()));
        }
        let mut x = data.features().clone();
        for mut row in x.rows_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (*v - self.means[c]) / self.sds[c];
            }
        }
        data.with_features(x)
    }
}

/// Scale `train` and every set in `apply_to` by the training statistics.
/// Returns the scaled training set followed by the others, plus the means
/// and standard deviations used.
pub fn standardize(
    train: &Dataset,
    apply_to: &[&Dataset],
) -> Result<(Vec<Dataset>, Vec<f64>, Vec<f64>)> {
    let scaler = Scaler::fit(train);
    let mut out = vec![scaler.transform(train)?];
    for d in apply_to {
        out.push(scaler.transform(d)?);
    }
    Ok((out, scaler.means, scaler.sds))
}

// ---------------------------------------------------------------------------
// Splitting

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
}

fn indices_by_class(data: &Dataset) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); data.k()];
    for (i, &y) in data.labels().iter().enumerate() {
        by_class[y - 1].push(i);
    }
    by_class
}

/// Stratified k-fold assignment: each class is shuffled and dealt
/// round-robin across folds, continuing from where the previous class
/// stopped (the first class starts at a seed-derived offset).
pub fn stratified_kfold(data: &Dataset, folds: usize, seed: u64) -> Result<Vec<Fold>> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    if folds > data.n() {
        return Err(Error::InvalidParameter(format!(
            "{folds} folds requested for {} samples",
            data.n()
        )));
    }
    let mut rng = rng(seed);
    let mut cursor = rng.gen_range(0..folds);
    let mut assignment = vec![0usize; data.n()];
    for mut members in indices_by_class(data) {
        members.shuffle(&mut rng);
        for &i in &members {
            assignment[i] = cursor;
            cursor = (cursor + 1) % folds;
        }
    }
    Ok((0..folds)
        .map(|f| {
            let (valid, train): (Vec<usize>, Vec<usize>) =
                (0..data.n()).partition(|&i| assignment[i] == f);
            Fold { train, valid }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub fractions: Vec<f64>,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitPlan {
    pub fn new(fractions: Vec<f64>, seed: u64, stratified: bool) -> Result<Self> {
        if fractions.is_empty() || fractions.iter().any(|&f| !(f > 0.0 && f < 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "split fractions must lie in (0, 1): {fractions:?}"
            )));
        }
        let total: f64 = fractions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "split fractions sum to {total}, not 1"
            )));
        }
        Ok(Self {
            fractions,
            seed,
            stratified,
        })
    }

    /// Stratified train/test split with the given training fraction.
    pub fn train_test(train_fraction: f64, seed: u64) -> Result<Self> {
        Self::new(vec![train_fraction, 1.0 - train_fraction], seed, true)
    }

    /// Index sets, one per fraction, each sorted ascending.
    pub fn split(&self, data: &Dataset) -> Vec<Vec<usize>> {
        let mut rng = rng(self.seed);
        let mut parts = vec![Vec::new(); self.fractions.len()];
        let groups = if self.stratified {
            indices_by_class(data)
        } else {
            vec![(0..data.n()).collect()]
        };
        for mut members in groups {
            members.shuffle(&mut rng);
            let m = members.len() as f64;
            let mut start = 0;
            let mut cum = 0.0;
            for (part, f) in parts.iter_mut().zip(&self.fractions) {
                cum += f;
                let end = ((cum * m).round() as usize).min(members.len());
                part.extend_from_slice(&members[start..end.max(start)]);
                start = end.max(start);
            }
            // Rounding slack goes to the last part.
            if start < members.len() {
                parts
                    .last_mut()
                    .expect("non-empty")
                    .extend_from_slice(&members[start..]);
            }
        }
        for p in &mut parts {
            p.sort_unstable();
        }
        parts
    }
}

// ---------------------------------------------------------------------------
// Synthetic data

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Shared direction with monotone thresholds (satisfies the OL model).
    ParallelBands,
    /// Per-threshold directions rotated in the first feature plane, spread
    /// evenly over `total_angle_deg`.
    RotatingBoundaries { total_angle_deg: f64 },
    /// Radial ordinal bands in the first feature plane.
    ConcentricRings,
}

impl SyntheticKind {
    pub fn name(&self) -> &'static str {
        match self {
            SyntheticKind::ParallelBands => "parallel_bands",
            SyntheticKind::RotatingBoundaries { .. } => "rotating_boundaries",
            SyntheticKind::ConcentricRings => "concentric_rings",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n: usize,
    pub k: usize,
    /// Feature dimension.
    pub p: usize,
    /// Standard deviation of the latent-score noise.
    pub noise_sd: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(kind: SyntheticKind, n: usize, k: usize, noise_sd: f64, seed: u64) -> Self {
        Self {
            kind,
            n,
            k,
            p: 2,
            noise_sd,
            seed,
        }
    }

    pub fn with_dim(mut self, p: usize) -> Self {
        self.p = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidParameter("synthetic data needs k ≥ 2".into()));
        }
        if self.n < self.k {
            return Err(Error::InvalidParameter(format!(
                "n = {} is smaller than k = {}",
                self.n, self.k
            )));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidParameter("noise_sd must be ≥ 0".into()));
        }
        let min_p = match self.kind {
            SyntheticKind::ParallelBands => 1,
            _ => 2,
        };
        if self.p < min_p {
            return Err(Error::InvalidParameter(format!(
                "{} needs at least {min_p} features",
                self.kind.name()
            )));
        }
        Ok(())
    }
}

/// Parameters that generated a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruth {
    /// Labels are `predict` of this model on `score − noise`.
    Linear(OrdinalModel),
    /// Labels count the radii below `‖x_{1:2}‖ + noise`.
    Radial { radii: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub data: Dataset,
    pub truth: GroundTruth,
    pub spec: SyntheticSpec,
}

/// Thresholds placing classes at equal probability under a `N(0, scale²)`
/// latent score.
fn balanced_thresholds(k: usize, scale: f64) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (1..k)
        .map(|j| scale * normal.inverse_cdf(j as f64 / k as f64))
        .collect()
}

/// Generate a dataset; regenerates bit-identically from `spec`.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<Synthetic> {
    spec.validate()?;
    let SyntheticSpec {
        n, k, p, noise_sd, ..
    } = *spec;
    let mut rng = rng(spec.seed);
    let mut features = Array2::zeros((n, p));
    let mut labels = Vec::with_capacity(n);

    let truth = match spec.kind {
        SyntheticKind::ParallelBands => {
            let w = vec![1.0 / (p as f64).sqrt(); p];
            let theta = balanced_thresholds(k, (1.0 + noise_sd * noise_sd).sqrt());
            OrdinalModel::parallel(&w, &theta).map(GroundTruth::Linear)?
        }
        SyntheticKind::RotatingBoundaries { total_angle_deg } => {
            let total = total_angle_deg.to_radians();
            let mut weights = Array2::zeros((k - 1, p));
            for j in 0..k - 1 {
                let frac = if k > 2 {
                    j as f64 / (k - 2) as f64
                } else {
                    0.5
                };
                let angle = -0.5 * total + frac * total;
                weights[(j, 0)] = angle.cos();
                weights[(j, 1)] = angle.sin();
            }
            let theta = balanced_thresholds(k, (1.0 + noise_sd * noise_sd).sqrt());
            let mode = if total == 0.0 { Mode::Ol } else { Mode::Gol };
            OrdinalModel::new(mode, weights, Array1::from(theta), None).map(GroundTruth::Linear)?
        }
        SyntheticKind::ConcentricRings => GroundTruth::Radial {
            // (j/k)^{2/3} keeps every band populated while leaving the best
            // slab classifier close to the majority rate.
            radii: (1..k)
                .map(|j| (j as f64 / k as f64).powf(2.0 / 3.0))
                .collect(),
        },
    };

    for i in 0..n {
        let mut row = features.row_mut(i);
        let label = match &truth {
            GroundTruth::Linear(model) => {
                for v in row.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                let noise: f64 = if noise_sd > 0.0 {
                    noise_sd * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                let x = row.to_vec();
                let g = model.decision_values(&x)?;
                1 + g.iter().filter(|&&v| v - noise < 0.0).count()
            }
            GroundTruth::Radial { radii } => {
                let r: f64 = rng.gen::<f64>().sqrt();
                let angle = rng.gen::<f64>() * std::f64::consts::TAU;
                row[0] = r * angle.cos();
                row[1] = r * angle.sin();
                for v in row.iter_mut().skip(2) {
                    *v = rng.gen_range(-1.0..1.0);
                }
                let noise: f64 = if noise_sd > 0.0 {
                    noise_sd * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                let radius = (row[0] * row[0] + row[1] * row[1]).sqrt() + noise;
                1 + radii.iter().filter(|&&b| radius > b).count()
            }
        };
        labels.push(label);
    }
    let data = Dataset::new(features, labels, k)?;
    Ok(Synthetic {
        data,
        truth,
        spec: *spec,
    })
}

impl Synthetic {
    /// `key = value` description of the generating parameters.
    pub fn params_text(&self) -> String {
        let s = &self.spec;
        let mut out = String::new();
        let _ = writeln!(out, "kind = {}", s.kind.name());
        if let SyntheticKind::RotatingBoundaries { total_angle_deg } = s.kind {
            let _ = writeln!(out, "total_angle_deg = {total_angle_deg}");
        }
        let _ = writeln!(out, "n = {}", s.n);
        let _ = writeln!(out, "k = {}", s.k);
        let _ = writeln!(out, "p = {}", s.p);
        let _ = writeln!(out, "noise_sd = {}", s.noise_sd);
        let _ = writeln!(out, "seed = {}", s.seed);
        match &self.truth {
            GroundTruth::Linear(m) => {
                for (j, row) in m.weights().rows().into_iter().enumerate() {
                    let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                    let _ = writeln!(out, "w{} = {}", j + 1, vals.join(" "));
                }
                let th: Vec<String> = m.thresholds().iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "thresholds = {}", th.join(" "));
            }
            GroundTruth::Radial { radii } => {
                let r: Vec<String> = radii.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "radii = {}", r.join(" "));
            }
        }
        out
    }

    /// Write `<path>` as CSV and `<path>.params.txt` alongside it.
    pub fn export(&self, path: impl AsRef<Path>) -> Result<PathBuf> {
        let path = path.as_ref();
        write_csv(&self.data, path)?;
        let mut sidecar = path.as_os_str().to_owned();
        sidecar.push(".params.txt");
        let sidecar = PathBuf::from(sidecar);
        fs::write(&sidecar, self.params_text()).map_err(|e| Error::io(&sidecar, e))?;
        Ok(sidecar)
    }
}

// ---------------------------------------------------------------------------
// Benchmark layout

/// Expected `(name, n, p, k)` of the tabular benchmark files, stored as
/// `<dir>/<name>.csv`.
pub const BENCHMARK_SHAPES: [(&str, usize, usize, usize); 17] = [
    ("ERA", 1000, 4, 9),
    ("ESL", 488, 4, 9),
    ("LEV", 1000, 4, 5),
    ("SWD", 1000, 10, 4),
    ("automobile", 205, 71, 6),
    ("balance-scale", 625, 4, 3),
    ("bondrate", 57, 37, 5),
    ("car", 1728, 21, 4),
    ("contact-lenses", 24, 6, 3),
    ("eucalyptus", 736, 91, 5),
    ("newthyroid", 215, 5, 3),
    ("pasture", 36, 25, 3),
    ("squash-stored", 52, 51, 3),
    ("squash-unstored", 52, 52, 3),
    ("tae", 151, 54, 3),
    ("toy", 300, 2, 5),
    ("winequality-red", 1599, 11, 6),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeCheck {
    pub name: &'static str,
    pub expected: (usize, usize, usize),
    /// `None` when the file is absent; `Err` text when it failed to load.
    pub found: Option<std::result::Result<(usize, usize, usize), String>>,
}

impl ShapeCheck {
    pub fn matches(&self) -> bool {
        matches!(&self.found, Some(Ok(s)) if *s == self.expected)
    }
}

/// Load every benchmark file present under `dir` and compare `(n, p, k)`.
pub fn check_benchmark_shapes(dir: impl AsRef<Path>) -> Vec<ShapeCheck> {
    let dir = dir.as_ref();
    BENCHMARK_SHAPES
        .iter()
        .map(|&(name, n, p, k)| {
            let path = dir.join(format!("{name}.csv"));
            let found = path.exists().then(|| {
                load_csv(&path)
                    .map(|c| (c.dataset.n(), c.dataset.p(), c.dataset.k()))
                    .map_err(|e| e.to_string())
            });
            ShapeCheck {
                name,
                expected: (n, p, k),
                found,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use ndarray::array;

    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn csv_with_and_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(&dir, "a.csv", "f1,f2,y\n1.0,2.0,1\n3,4,3\n");
        let c = load_csv(&a).unwrap();
        assert_eq!(c.header.as_deref().unwrap()[2], "y");
        assert_eq!((c.dataset.n(), c.dataset.p(), c.dataset.k()), (2, 2, 3));
        assert_eq!(c.warnings, vec![LoadWarning::EmptyClasses(vec![2])]);

        let b = write(&dir, "b.csv", "1.0,2.0,1\n");
        let c = load_csv(&b).unwrap();
        assert!(c.header.is_none());
        assert_eq!((c.dataset.n(), c.dataset.p(), c.dataset.k()), (1, 2, 1));
        assert_eq!(c.warnings, vec![LoadWarning::DegenerateLabels { class: 1 }]);
    }

    #[test]
    fn csv_errors_carry_location() {
        let dir = tempfile::tempdir().unwrap();
        let bad = write(&dir, "bad.csv", "1,2,1\n1,nan,2\n");
        let msg = load_csv(&bad).unwrap_err().to_string();
        assert!(msg.contains("line 2, column 2"), "{msg}");
        let bad = write(&dir, "lab.csv", "1,2,0\n");
        assert!(load_csv(&bad).unwrap_err().to_string().contains("label"));
        let bad = write(&dir, "frac.csv", "1,2,1.5\n");
        assert!(load_csv(&bad).is_err());
        let empty = write(&dir, "empty.csv", "");
        assert!(load_csv(&empty).is_err());
        let err = load_csv(dir.path().join("missing.csv")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let s = make_synthetic(&SyntheticSpec::new(
            SyntheticKind::ParallelBands,
            50,
            4,
            0.3,
            9,
        ))
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let sidecar = s.export(&path).unwrap();
        let back = load_csv(&path).unwrap().dataset;
        assert_eq!(back, s.data);
        let params = fs::read_to_string(sidecar).unwrap();
        assert!(params.contains("kind = parallel_bands"));
        assert!(params.contains("thresholds = "));
    }

    #[test]
    fn standardize_examples() {
        let train = Dataset::new(array![[1.0, 5.0], [3.0, 5.0]], vec![1, 2], 2).unwrap();
        let valid = Dataset::new(array![[2.0, 5.0]], vec![1], 2).unwrap();
        let (scaled, means, sds) = standardize(&train, &[&valid]).unwrap();
        assert_eq!(means, vec![2.0, 5.0]);
        assert_eq!(sds, vec![1.0, 1.0]);
        assert_eq!(scaled[0].features(), &array![[-1.0, 0.0], [1.0, 0.0]]);
        assert_eq!(scaled[1].features(), &array![[0.0, 0.0]]);
    }

    #[test]
    fn kfold_exact_divisibility() {
        let rows: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64]).collect();
        let labels = vec![1, 1, 1, 2, 2, 2, 3, 3, 3];
        let data = Dataset::from_rows(&rows, labels.clone()).unwrap();
        for seed in 0..5 {
            let folds = stratified_kfold(&data, 3, seed).unwrap();
            for f in &folds {
                let classes: BTreeSet<usize> = f.valid.iter().map(|&i| labels[i]).collect();
                assert_eq!(f.valid.len(), 3);
                assert_eq!(classes.len(), 3);
            }
        }
        assert!(stratified_kfold(&data, 10, 0).is_err());
        assert!(stratified_kfold(&data, 1, 0).is_err());
    }

    #[test]
    fn kfold_determinism() {
        let s = make_synthetic(&SyntheticSpec::new(
            SyntheticKind::ParallelBands,
            100,
            3,
            0.5,
            1,
        ))
        .unwrap();
        let a = stratified_kfold(&s.data, 3, 11).unwrap();
        let b = stratified_kfold(&s.data, 3, 11).unwrap();
        let c = stratified_kfold(&s.data, 3, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn split_plan_validation_and_stratification() {
        assert!(SplitPlan::new(vec![0.5, 0.4], 0, true).is_err());
        assert!(SplitPlan::new(vec![1.2, -0.2], 0, true).is_err());
        let s = make_synthetic(&SyntheticSpec::new(
            SyntheticKind::ParallelBands,
            200,
            4,
            0.0,
            2,
        ))
        .unwrap();
        let plan = SplitPlan::train_test(0.75, 5).unwrap();
        let parts = plan.split(&s.data);
        assert_eq!(parts[0].len() + parts[1].len(), 200);
        let train = s.data.subset(&parts[0]);
        for (c, &total) in train.class_counts().iter().zip(&s.data.class_counts()) {
            assert!((*c as f64 - 0.75 * total as f64).abs() <= 1.0);
        }
        assert_eq!(plan.split(&s.data), parts);
        let three = SplitPlan::new(vec![0.6, 0.2, 0.2], 3, false)
            .unwrap()
            .split(&s.data);
        let all: BTreeSet<usize> = three.iter().flatten().copied().collect();
        assert_eq!(all.len(), 200);
    }

    #[test]
    fn parallel_bands_oracle_model_is_exact() {
        let s = make_synthetic(&SyntheticSpec::new(
            SyntheticKind::ParallelBands,
            300,
            5,
            0.0,
            3,
        ))
        .unwrap();
        let GroundTruth::Linear(model) = &s.truth else {
            panic!("linear truth expected")
        };
        assert_eq!(model.predict_dataset(&s.data).unwrap(), s.data.labels());
        assert_eq!(s.data.classes_present(), 5);
    }

    #[test]
    fn rings_radii_and_labels() {
        let s = make_synthetic(&SyntheticSpec::new(
            SyntheticKind::ConcentricRings,
            400,
            3,
            0.0,
            4,
        ))
        .unwrap();
        let GroundTruth::Radial { radii } = &s.truth else {
            panic!("radial truth expected")
        };
        for i in 0..s.data.n() {
            let x = s.data.row(i);
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            let y = 1 + radii.iter().filter(|&&b| r > b).count();
            assert_eq!(y, s.data.labels()[i]);
        }
    }

    #[test]
    fn synthetic_regenerates_bit_identically() {
        let spec = SyntheticSpec::new(
            SyntheticKind::RotatingBoundaries {
                total_angle_deg: 30.0,
            },
            120,
            4,
            0.2,
            77,
        )
        .with_dim(3);
        let a = make_synthetic(&spec).unwrap();
        let b = make_synthetic(&spec).unwrap();
        assert_eq!(a.data, b.data);
        assert!(make_synthetic(&SyntheticSpec::new(
            SyntheticKind::ParallelBands,
            2,
            3,
            0.0,
            0
        ))
        .is_err());
    }

    #[test]
    fn shape_check_reports_absent_and_present() {
        let dir = tempfile::tempdir().unwrap();
        let s = make_synthetic(&SyntheticSpec::new(
            SyntheticKind::ParallelBands,
            300,
            5,
            0.5,
            0,
        ))
        .unwrap();
        write_csv(&s.data, dir.path().join("toy.csv")).unwrap();
        let checks = check_benchmark_shapes(dir.path());
        let toy = checks.iter().find(|c| c.name == "toy").unwrap();
        assert!(toy.matches());
        assert!(checks.iter().filter(|c| c.found.is_none()).count() == 16);
    }
}
