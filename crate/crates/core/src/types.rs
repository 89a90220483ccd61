//! Validated value types shared across the crate.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Absolute tolerance on `Σθ = 1`.
pub const SIMPLEX_SUM_TOL: f64 = 1e-9;

/// Smallest admissible simplex entry. Exact zeros are rejected because the
/// test divides by `θ₀^S` and the confidence programs take `log θ`.
pub const SIMPLEX_MIN_ENTRY: f64 = 1e-12;

/// A probability vector on the (d−1)-simplex with strictly positive entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        validate_simplex(&values)?;
        Ok(Self(values))
    }

    /// The uniform vector `(1/d, …, 1/d)`.
    pub fn uniform(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidSimplex(format!(
                "need at least 2 entries, got {d}"
            )));
        }
        Ok(Self(vec![1.0 / d as f64; d]))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }
}

impl TryFrom<Vec<f64>> for SimplexVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<SimplexVector> for Vec<f64> {
    fn from(v: SimplexVector) -> Self {
        v.0
    }
}

impl AsRef<[f64]> for SimplexVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Checks the simplex invariants and returns the validated vector.
pub fn validate_simplex(values: &[f64]) -> Result<SimplexVector> {
    if values.len() < 2 {
        return Err(Error::InvalidSimplex(format!(
            "need at least 2 entries, got {}",
            values.len()
        )));
    }
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() || v < SIMPLEX_MIN_ENTRY {
            return Err(Error::InvalidSimplex(format!(
                "entry {i} = {v} is below the minimum {SIMPLEX_MIN_ENTRY}"
            )));
        }
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
        return Err(Error::InvalidSimplex(format!(
            "entries sum to {sum}, expected 1"
        )));
    }
    Ok(SimplexVector(values.to_vec()))
}

/// Per-arm event counts `S_n` and their total `n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CountVectorRepr", into = "CountVectorRepr")]
pub struct CountVector {
    counts: Vec<u64>,
    total: u64,
}

#[derive(Serialize, Deserialize)]
struct CountVectorRepr {
    counts: Vec<u64>,
    n: u64,
}

impl TryFrom<CountVectorRepr> for CountVector {
    type Error = Error;

    fn try_from(r: CountVectorRepr) -> Result<Self> {
        let c = CountVector::new(r.counts);
        if c.total != r.n {
            return Err(Error::Domain(format!(
                "count total {} does not match stored n {}",
                c.total, r.n
            )));
        }
        Ok(c)
    }
}

impl From<CountVector> for CountVectorRepr {
    fn from(c: CountVector) -> Self {
        Self {
            n: c.total,
            counts: c.counts,
        }
    }
}

impl CountVector {
    pub fn new(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            counts: vec![0; d],
            total: 0,
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, i: usize) -> u64 {
        self.counts[i]
    }

    pub(crate) fn increment(&mut self, arm: usize) {
        self.counts[arm] += 1;
        self.total += 1;
    }

    pub(crate) fn add(&mut self, other: &CountVector) {
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        self.total += other.total;
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }
}

/// Dirichlet concentration parameters, every entry strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DirichletParams(Vec<f64>);

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::Domain("Dirichlet parameters are empty".into()));
        }
        if let Some((i, a)) = alpha
            .iter()
            .enumerate()
            .find(|(_, a)| !(a.is_finite() && **a > 0.0))
        {
            return Err(Error::Domain(format!(
                "Dirichlet parameter {i} = {a} is not strictly positive"
            )));
        }
        Ok(Self(alpha))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// `α + S`, elementwise.
    pub fn add_counts(&self, counts: &CountVector) -> Result<Self> {
        check_len(self.dim(), counts.dim())?;
        Ok(Self(
            self.0
                .iter()
                .zip(counts.counts())
                .map(|(a, &s)| a + s as f64)
                .collect(),
        ))
    }

    pub(crate) fn bump(&mut self, arm: usize) {
        self.0[arm] += 1.0;
    }
}

impl TryFrom<Vec<f64>> for DirichletParams {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DirichletParams> for Vec<f64> {
    fn from(p: DirichletParams) -> Self {
        p.0
    }
}

/// A closed interval `[lo, hi]` on the extended real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval bounds out of order: [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn unbounded() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Applies a monotone increasing map to both ends.
    pub fn map_monotone(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            lo: f(self.lo),
            hi: f(self.hi),
        }
    }
}
