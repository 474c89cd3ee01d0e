//! Random dataset generation and dimension proxies.
//!
//! Samples are `X = Z diag(λ)^{1/2}` where `Z` has i.i.d. entries from one
//! of six scalar distributions. Every draw is keyed by a 64-bit seed, so the
//! same [`SampleSpec`] always produces the same [`Dataset`] regardless of the
//! thread it runs on.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("invalid sample spec: {0}")]
    InvalidSpec(String),
    #[error("dataset line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Scalar distributions used for the entries of `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    /// Uniform on [-1, 1].
    Uniform,
    /// Bernoulli(1/2) on {0, 1}.
    Bernoulli,
    /// Uniform on {-1, +1}.
    Rademacher,
    /// Laplace with unit scale (variance 2).
    Laplacian,
    Gaussian,
    /// Normal with mean 1 and unit variance.
    GaussianBiased,
}

impl DistributionKind {
    pub const ALL: [DistributionKind; 6] = [
        DistributionKind::Uniform,
        DistributionKind::Bernoulli,
        DistributionKind::Rademacher,
        DistributionKind::Laplacian,
        DistributionKind::Gaussian,
        DistributionKind::GaussianBiased,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistributionKind::Uniform => "uniform",
            DistributionKind::Bernoulli => "bernoulli",
            DistributionKind::Rademacher => "rademacher",
            DistributionKind::Laplacian => "laplacian",
            DistributionKind::Gaussian => "gaussian",
            DistributionKind::GaussianBiased => "gaussian_biased",
        }
    }

    /// (mean, variance) of a single entry.
    pub fn moments(self) -> (f64, f64) {
        match self {
            DistributionKind::Uniform => (0.0, 1.0 / 3.0),
            DistributionKind::Bernoulli => (0.5, 0.25),
            DistributionKind::Rademacher => (0.0, 1.0),
            DistributionKind::Laplacian => (0.0, 2.0),
            DistributionKind::Gaussian => (0.0, 1.0),
            DistributionKind::GaussianBiased => (1.0, 1.0),
        }
    }

    /// Stable tag mixed into per-trial seeds.
    fn tag(self) -> u64 {
        match self {
            DistributionKind::Uniform => 1,
            DistributionKind::Bernoulli => 2,
            DistributionKind::Rademacher => 3,
            DistributionKind::Laplacian => 4,
            DistributionKind::Gaussian => 5,
            DistributionKind::GaussianBiased => 6,
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            DistributionKind::Uniform => rng.random_range(-1.0..=1.0),
            DistributionKind::Bernoulli => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    0.0
                }
            }
            DistributionKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            DistributionKind::Laplacian => {
                // inverse CDF on u in (-1/2, 1/2)
                let u: f64 = rng.random::<f64>() - 0.5;
                let a = 1.0 - 2.0 * u.abs();
                if a <= 0.0 {
                    return 0.0;
                }
                -u.signum() * a.ln()
            }
            DistributionKind::Gaussian => StandardNormal.sample(rng),
            DistributionKind::GaussianBiased => {
                let z: f64 = StandardNormal.sample(rng);
                z + 1.0
            }
        }
    }
}

impl fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistributionKind {
    type Err = SampleError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DistributionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SampleError::InvalidSpec(format!("unknown distribution `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LabelMode {
    /// First `floor(n/2)` samples are +1, the rest -1.
    BalancedFixed,
    /// `y_i = sign(vᵀ x_i)` with `sign(0) = +1`; `v` must be a unit vector.
    LinearSeparator(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpec {
    pub n: usize,
    pub d: usize,
    pub distribution: DistributionKind,
    pub lambda: Vec<f64>,
    pub label_mode: LabelMode,
    pub seed: u64,
}

impl SampleSpec {
    pub fn isotropic(n: usize, d: usize, distribution: DistributionKind, seed: u64) -> Self {
        Self { n, d, distribution, lambda: vec![1.0; d], label_mode: LabelMode::BalancedFixed, seed }
    }

    pub fn validate(&self) -> Result<(), SampleError> {
        if self.n == 0 || self.d == 0 {
            return Err(SampleError::InvalidSpec("n and d must be positive".into()));
        }
        validate_lambda(&self.lambda)?;
        if self.lambda.len() != self.d {
            return Err(SampleError::InvalidSpec(format!(
                "lambda has length {} but d = {}",
                self.lambda.len(),
                self.d
            )));
        }
        if let LabelMode::LinearSeparator(v) = &self.label_mode {
            if v.len() != self.d {
                return Err(SampleError::InvalidSpec("separator length differs from d".into()));
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(SampleError::InvalidSpec(format!("separator norm {norm} is not 1")));
            }
        }
        Ok(())
    }
}

fn validate_lambda(lambda: &[f64]) -> Result<(), SampleError> {
    if lambda.is_empty() {
        return Err(SampleError::InvalidSpec("lambda is empty".into()));
    }
    if lambda.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
        return Err(SampleError::InvalidSpec("lambda entries must be finite and nonnegative".into()));
    }
    if lambda.iter().all(|&l| l == 0.0) {
        return Err(SampleError::InvalidSpec("lambda is identically zero".into()));
    }
    Ok(())
}

/// Feature matrix with fixed ±1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Matrix,
    y: Vec<f64>,
    lambda: Vec<f64>,
    spec_hash: u64,
}

impl Dataset {
    /// Wraps existing data. Labels must be exactly ±1.
    pub fn new(x: Matrix, y: Vec<f64>, lambda: Vec<f64>) -> Result<Self, SampleError> {
        if x.rows() == 0 || x.cols() == 0 {
            return Err(SampleError::InvalidSpec("dataset must have n, d >= 1".into()));
        }
        if y.len() != x.rows() {
            return Err(SampleError::InvalidSpec(format!("{} labels for {} rows", y.len(), x.rows())));
        }
        if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
            return Err(SampleError::InvalidSpec(format!("label {bad} is not +1 or -1")));
        }
        if lambda.len() != x.cols() {
            return Err(SampleError::InvalidSpec("lambda length differs from d".into()));
        }
        validate_lambda(&lambda)?;
        let mut h = SeedHasher::new(0x5eed_da7a);
        for v in x.as_slice().iter().chain(&y).chain(&lambda) {
            h.push(v.to_bits());
        }
        Ok(Self { x, y, lambda, spec_hash: h.finish() })
    }

    /// Convenience constructor with isotropic `λ = 1`.
    pub fn from_rows(rows: &[Vec<f64>], y: &[f64]) -> Result<Self, SampleError> {
        let x = Matrix::from_rows(rows).map_err(|e| SampleError::InvalidSpec(e.to_string()))?;
        let d = x.cols();
        Self::new(x, y.to_vec(), vec![1.0; d])
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn spec_hash(&self) -> u64 {
        self.spec_hash
    }

    pub fn lambda_l1(&self) -> f64 {
        self.lambda.iter().sum()
    }

    /// Same labels and λ, features replaced.
    pub fn with_features(&self, x: Matrix) -> Result<Self, SampleError> {
        Self::new(x, self.y.clone(), self.lambda.clone())
    }

    /// Same features, labels replaced.
    pub fn with_labels(&self, y: Vec<f64>) -> Result<Self, SampleError> {
        Self::new(self.x.clone(), y, self.lambda.clone())
    }

    /// Rows reordered so that new row `k` is old row `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, SampleError> {
        let rows: Vec<Vec<f64>> = perm.iter().map(|&i| self.x.row(i).to_vec()).collect();
        let x = Matrix::from_rows(&rows).map_err(|e| SampleError::InvalidSpec(e.to_string()))?;
        Self::new(x, perm.iter().map(|&i| self.y[i]).collect(), self.lambda.clone())
    }

    /// Writes `y,x1,...,xd` CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), SampleError> {
        let header: Vec<String> =
            std::iter::once("y".to_string()).chain((1..=self.d()).map(|j| format!("x{j}"))).collect();
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.n() {
            let mut line = format!("{}", self.y[i]);
            for v in self.x.row(i) {
                line.push(',');
                line.push_str(&v.to_string());
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Reads the `y,x1,...,xd` CSV written by [`Dataset::write_csv`].
    /// Imported data gets isotropic `λ = 1`.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, SampleError> {
        let mut lines = r.lines().enumerate();
        let (_, header) = lines.next().ok_or(SampleError::Format { line: 1, msg: "empty file".into() })?;
        let header = header?;
        let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
        if cols.len() < 2 || cols[0] != "y" {
            return Err(SampleError::Format { line: 1, msg: "header must be `y,x1,...,xd`".into() });
        }
        for (j, c) in cols.iter().enumerate().skip(1) {
            if *c != format!("x{j}") {
                return Err(SampleError::Format { line: 1, msg: format!("expected column x{j}, found `{c}`") });
            }
        }
        let d = cols.len() - 1;
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != d + 1 {
                return Err(SampleError::Format {
                    line: lineno,
                    msg: format!("expected {} fields, found {}", d + 1, fields.len()),
                });
            }
            let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.trim().parse::<f64>()).collect();
            let parsed = parsed.map_err(|e| SampleError::Format { line: lineno, msg: e.to_string() })?;
            if parsed[0] != 1.0 && parsed[0] != -1.0 {
                return Err(SampleError::Format { line: lineno, msg: format!("label {} is not ±1", parsed[0]) });
            }
            if parsed.iter().any(|v| !v.is_finite()) {
                return Err(SampleError::Format { line: lineno, msg: "non-finite value".into() });
            }
            y.push(parsed[0]);
            rows.push(parsed[1..].to_vec());
        }
        if rows.is_empty() {
            return Err(SampleError::Format { line: 2, msg: "no data rows".into() });
        }
        Self::from_rows(&rows, &y)
    }
}

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive 64-bit hash over a sequence of words.
#[derive(Debug, Clone, Copy)]
pub struct SeedHasher(u64);

impl SeedHasher {
    pub fn new(key: u64) -> Self {
        Self(splitmix64(key))
    }

    pub fn push(&mut self, word: u64) -> &mut Self {
        self.0 = splitmix64(self.0 ^ splitmix64(word));
        self
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

/// Seed for one Monte Carlo trial; independent of execution order.
pub fn trial_seed(master_seed: u64, distribution: DistributionKind, n: usize, d: usize, trial: u64) -> u64 {
    let mut h = SeedHasher::new(master_seed);
    h.push(distribution.tag()).push(n as u64).push(d as u64).push(trial);
    h.finish()
}

/// Draws a dataset; the same spec always yields a bit-identical result.
pub fn draw_dataset(spec: &SampleSpec) -> Result<Dataset, SampleError> {
    spec.validate()?;
    let (n, d) = (spec.n, spec.d);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let scales: Vec<f64> = spec.lambda.iter().map(|l| l.sqrt()).collect();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        for &s in &scales {
            let z = spec.distribution.sample(&mut rng);
            // exact zero columns where λ_j = 0
            data.push(if s == 0.0 { 0.0 } else { z * s });
        }
    }
    let x = Matrix::from_row_major(n, d, data).expect("n*d entries");
    let y: Vec<f64> = match &spec.label_mode {
        LabelMode::BalancedFixed => (0..n).map(|i| if i < n / 2 { 1.0 } else { -1.0 }).collect(),
        LabelMode::LinearSeparator(v) => (0..n)
            .map(|i| if crate::linalg::dot(x.row(i), v) >= 0.0 { 1.0 } else { -1.0 })
            .collect(),
    };
    let mut h = SeedHasher::new(spec.seed);
    h.push(n as u64).push(d as u64).push(spec.distribution.tag());
    for l in &spec.lambda {
        h.push(l.to_bits());
    }
    if let LabelMode::LinearSeparator(v) = &spec.label_mode {
        for c in v {
            h.push(c.to_bits());
        }
    }
    Ok(Dataset { x, y, lambda: spec.lambda.clone(), spec_hash: h.finish() })
}

/// `(d₂, d∞) = (‖λ‖₁²/‖λ‖₂², ‖λ‖₁/‖λ‖∞)`.
pub fn dimension_proxies(lambda: &[f64]) -> Result<(f64, f64), SampleError> {
    validate_lambda(lambda)?;
    let l1: f64 = lambda.iter().sum();
    let l2sq: f64 = lambda.iter().map(|l| l * l).sum();
    let linf = lambda.iter().copied().fold(0.0, f64::max);
    Ok((l1 * l1 / l2sq, l1 / linf))
}
