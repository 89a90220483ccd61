//! The sequential multinomial test.
//!
//! Observations are one-hot `Multinomial(1, θ)` draws. Against the point null
//! `θ = θ₀` the alternative places a `Dirichlet(α₀)` prior on `θ`; the
//! resulting posterior odds (with unit prior odds)
//!
//! ```text
//!     O_n(θ₀) = Beta(α₀ + S_n) / Beta(α₀) · θ₀^{-S_n}
//! ```
//!
//! form a nonnegative martingale under the null with `O_0 = 1`. Rejecting as
//! soon as `O_n ≥ 1/u` therefore has Type I error at most `u` under
//! continuous monitoring, and `p_n = 1 / sup_{m≤n} O_m` is a sequential
//! p-value.
//!
//! The state is kept in log space. A single observation on arm `i` multiplies
//! the odds by `Beta(α + e_i) / Beta(α) / θ₀ᵢ = αᵢ / (|α| θ₀ᵢ)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, check_level, Error, Result};
use crate::special::log_multivariate_beta_unchecked;
use crate::types::{CountVector, DirichletParams, SimplexVector};

/// Dirichlet prior over alternatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Prior {
    /// `α₀ᵢ = 1`.
    Uniform,
    /// `α₀ᵢ = k·θ₀ᵢ`, concentrating prior mass about the null.
    Concentrated { k: f64 },
}

impl Prior {
    /// Concentrated with `k = d`, which equals the uniform prior when `θ₀` is uniform.
    pub fn default_for(d: usize) -> Self {
        Prior::Concentrated { k: d as f64 }
    }

    pub fn alpha0(&self, theta0: &SimplexVector) -> Result<DirichletParams> {
        match *self {
            Prior::Uniform => DirichletParams::new(vec![1.0; theta0.dim()]),
            Prior::Concentrated { k } => {
                if !(k > 0.0) || !k.is_finite() {
                    return Err(Error::Domain(format!(
                        "prior concentration k must be > 0, got {k}"
                    )));
                }
                DirichletParams::new(theta0.values().iter().map(|t| k * t).collect())
            }
        }
    }
}

/// Running sufficient statistics of one sequential test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsState {
    theta0: SimplexVector,
    alpha0: DirichletParams,
    alpha: DirichletParams,
    counts: CountVector,
    log_odds: f64,
    log_running_max_odds: f64,
    n: u64,
}

impl OddsState {
    /// Fresh state at `n = 0` with `O_0 = 1`.
    pub fn new(theta0: SimplexVector, prior: Prior) -> Result<Self> {
        let alpha0 = prior.alpha0(&theta0)?;
        Self::with_alpha0(theta0, alpha0)
    }

    /// Fresh state with an explicit Dirichlet prior.
    pub fn with_alpha0(theta0: SimplexVector, alpha0: DirichletParams) -> Result<Self> {
        check_len(theta0.dim(), alpha0.dim())?;
        let d = theta0.dim();
        Ok(Self {
            theta0,
            alpha: alpha0.clone(),
            alpha0,
            counts: CountVector::zeros(d),
            log_odds: 0.0,
            log_running_max_odds: 0.0,
            n: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta0.dim()
    }

    pub fn theta0(&self) -> &SimplexVector {
        &self.theta0
    }

    pub fn alpha0(&self) -> &DirichletParams {
        &self.alpha0
    }

    pub fn alpha(&self) -> &DirichletParams {
        &self.alpha
    }

    pub fn counts(&self) -> &CountVector {
        &self.counts
    }

    pub fn log_odds(&self) -> f64 {
        self.log_odds
    }

    pub fn log_running_max_odds(&self) -> f64 {
        self.log_running_max_odds
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Returns the state after one observation on `arm`.
    pub fn update(&self, arm: usize) -> Result<Self> {
        let mut next = self.clone();
        next.observe(arm)?;
        Ok(next)
    }

    /// In-place form of [`OddsState::update`].
    pub fn observe(&mut self, arm: usize) -> Result<()> {
        let d = self.dim();
        if arm >= d {
            return Err(Error::ArmOutOfRange { arm, d });
        }
        let alpha_sum = self.alpha0.sum() + self.n as f64;
        let a = self.alpha.values()[arm];
        self.log_odds += (a / (alpha_sum * self.theta0.get(arm))).ln();
        self.alpha.bump(arm);
        self.counts.increment(arm);
        self.n += 1;
        if self.log_odds > self.log_running_max_odds {
            self.log_running_max_odds = self.log_odds;
        }
        Ok(())
    }

    /// Adds a block of counts at once.
    ///
    /// The log odds after the call equal those from observing the events one at
    /// a time in any order, since they depend on the data only through `S_n`.
    /// The running maximum is refreshed once, at the end of the block.
    pub fn update_batch(&self, new_counts: &CountVector) -> Result<Self> {
        check_len(self.dim(), new_counts.dim())?;
        if new_counts.total() == 0 {
            return Ok(self.clone());
        }
        let alpha = self.alpha.add_counts(new_counts)?;
        let delta_beta = log_multivariate_beta_unchecked(alpha.values().iter().copied())
            - log_multivariate_beta_unchecked(self.alpha.values().iter().copied());
        let null_term: f64 = new_counts
            .counts()
            .iter()
            .zip(self.theta0.values())
            .filter(|(&s, _)| s > 0)
            .map(|(&s, t)| s as f64 * t.ln())
            .sum();
        let mut next = self.clone();
        next.log_odds += delta_beta - null_term;
        next.alpha = alpha;
        next.counts.add(new_counts);
        next.n += new_counts.total();
        next.log_running_max_odds = next.log_running_max_odds.max(next.log_odds);
        Ok(next)
    }

    /// `p_n = min(p_{n−1}, 1/O_n)`, derived from the running maximum.
    pub fn sequential_p(&self) -> f64 {
        (-self.log_running_max_odds).exp().clamp(f64::MIN_POSITIVE, 1.0)
    }

    /// True once the odds have ever reached `1/u`.
    pub fn should_reject(&self, u: f64) -> Result<bool> {
        check_level(u)?;
        Ok(self.log_running_max_odds >= -u.ln())
    }

    /// `log O_n / n`, which tends to `KL(θ ‖ θ₀)` under the alternative.
    pub fn kl_rate(&self) -> Result<f64> {
        if self.n == 0 {
            return Err(Error::Domain("kl_rate is undefined at n = 0".into()));
        }
        Ok(self.log_odds / self.n as f64)
    }

    /// Checks the internal consistency of a deserialized state.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        check_len(d, self.alpha0.dim())?;
        check_len(d, self.alpha.dim())?;
        check_len(d, self.counts.dim())?;
        if self.counts.total() != self.n {
            return Err(Error::Domain("count total does not match n".into()));
        }
        let expected = self.alpha0.add_counts(&self.counts)?;
        let agrees = expected
            .values()
            .iter()
            .zip(self.alpha.values())
            .all(|(e, a)| (e - a).abs() <= 1e-9 * e.max(1.0));
        if !agrees {
            return Err(Error::Domain("posterior parameters do not match prior plus counts".into()));
        }
        if !self.log_odds.is_finite() || !(self.log_running_max_odds >= self.log_odds.max(0.0)) {
            return Err(Error::Domain("log odds and running maximum are inconsistent".into()));
        }
        let recomputed = batch_log_odds(&self.theta0, &self.alpha0, &self.counts)?;
        if (recomputed - self.log_odds).abs() > 1e-6 * recomputed.abs().max(1.0) {
            return Err(Error::Domain(format!(
                "stored log odds {} disagree with the counts ({recomputed})",
                self.log_odds
            )));
        }
        Ok(())
    }

    /// `log Beta(α₀ + S_n) − log Beta(α₀)`, the log marginal likelihood of the
    /// data under the alternative up to the multinomial coefficient.
    pub fn log_marginal(&self) -> f64 {
        log_multivariate_beta_unchecked(self.alpha.values().iter().copied())
            - log_multivariate_beta_unchecked(self.alpha0.values().iter().copied())
    }
}

/// Convenience wrapper matching the free-function surface.
pub fn init_state(theta0: SimplexVector, prior: Prior) -> Result<OddsState> {
    OddsState::new(theta0, prior)
}

/// `KL(θ ‖ θ₀) = Σ θᵢ log(θᵢ/θ₀ᵢ)`.
pub fn kl_divergence(theta: &SimplexVector, theta0: &SimplexVector) -> Result<f64> {
    check_len(theta0.dim(), theta.dim())?;
    let kl: f64 = theta
        .values()
        .iter()
        .zip(theta0.values())
        .map(|(t, t0)| t * (t / t0).ln())
        .sum();
    Ok(kl.max(0.0))
}

/// Log odds straight from the closed form, used to cross-check the recursion.
pub fn batch_log_odds(
    theta0: &SimplexVector,
    alpha0: &DirichletParams,
    counts: &CountVector,
) -> Result<f64> {
    check_len(theta0.dim(), counts.dim())?;
    let posterior = alpha0.add_counts(counts)?;
    let null_term: f64 = counts
        .counts()
        .iter()
        .zip(theta0.values())
        .map(|(&s, t)| s as f64 * t.ln())
        .sum();
    Ok(log_multivariate_beta_unchecked(posterior.values().iter().copied())
        - log_multivariate_beta_unchecked(alpha0.values().iter().copied())
        - null_term)
}
