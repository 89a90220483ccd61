//! Monte-Carlo experiments: Type I error under continuous monitoring against
//! a peeking χ² baseline, power, coverage, and the Bernoulli and Poisson
//! scenarios.
//!
//! Replication `r` of an experiment with seed `s` draws from a generator
//! seeded by [`derive_seed`]`(s, r)`, so results do not depend on how
//! replications are scheduled across threads.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{self, Write};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contrasts::{
    composite_p, contrast_ci, softmax_rho_values, ContrastSpec, LinearHypothesis,
};
use crate::error::{check_len, check_level, Error, Result};
use crate::pointproc::{simulate_processes, IntensitySpec, MarkedEvent};
use crate::report::{csv_line, fmt_float, fmt_opt};
use crate::seqtest::{OddsState, Prior};
use crate::special::{chi2_critical_value, chi2_sf};
use crate::types::{CountVector, Interval, SimplexVector};

/// SplitMix64 mix of `base` and `index`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// ChaCha8 generator for `seed`, on an independent `stream`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Inverse-CDF sampler for a categorical distribution.
#[derive(Debug, Clone)]
pub struct CategoricalSampler {
    cdf: Vec<f64>,
}

impl CategoricalSampler {
    pub fn new(p: &[f64]) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = p
            .iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect();
        let total = acc;
        cdf.iter_mut().for_each(|c| *c /= total);
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Self { cdf }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let v: f64 = rng.random();
        self.cdf.iter().position(|&c| v < c).unwrap_or(self.cdf.len() - 1)
    }
}

/// Pearson's χ² goodness-of-fit p-value with `d − 1` degrees of freedom.
pub fn pearson_chi2_p(counts: &CountVector, theta0: &SimplexVector) -> Result<f64> {
    check_len(theta0.dim(), counts.dim())?;
    let n = counts.total();
    if n == 0 {
        return Err(Error::Domain("χ² test needs at least one observation".into()));
    }
    let stat = pearson_statistic(counts.counts(), theta0.values(), n as f64);
    chi2_sf(stat, (theta0.dim() - 1) as f64)
}

fn pearson_statistic(counts: &[u64], theta0: &[f64], n: f64) -> f64 {
    counts
        .iter()
        .zip(theta0)
        .map(|(&s, t)| {
            let e = n * t;
            let r = s as f64 - e;
            r * r / e
        })
        .sum()
}

/// Settings shared by the Type I, power and coverage experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub theta_true: SimplexVector,
    pub theta0: SimplexVector,
    pub n_max: u64,
    pub reps: u64,
    pub u: f64,
    pub seed: u64,
    pub prior: Prior,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        check_len(self.theta0.dim(), self.theta_true.dim())?;
        check_level(self.u)?;
        if self.reps == 0 || self.n_max == 0 {
            return Err(Error::InvalidConfig("reps and n_max must be >= 1".into()));
        }
        self.prior.alpha0(&self.theta0)?;
        Ok(())
    }

    fn null_state(&self) -> Result<OddsState> {
        OddsState::new(self.theta0.clone(), self.prior)
    }
}

/// Outcome of one replication of a rejection experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub rep: u64,
    /// First `n` at which the sequential test rejected.
    pub sequential_rejection: Option<u64>,
    /// First `n` at which the peeking χ² test rejected.
    pub chi2_rejection: Option<u64>,
    /// Observations drawn before the replication stopped.
    pub n_observed: u64,
    pub log_odds: f64,
    pub sequential_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub reps: u64,
    pub reject_count_sequential: u64,
    pub reject_count_chi2: u64,
    /// First sequential rejection time → number of replications.
    pub first_rejection_histogram: BTreeMap<u64, u64>,
    pub runtime_seconds: f64,
    pub replications: Vec<ReplicationOutcome>,
}

impl ExperimentResult {
    fn from_outcomes(replications: Vec<ReplicationOutcome>, runtime_seconds: f64) -> Self {
        let mut hist = BTreeMap::new();
        for r in &replications {
            if let Some(n) = r.sequential_rejection {
                *hist.entry(n).or_insert(0) += 1;
            }
        }
        Self {
            reps: replications.len() as u64,
            reject_count_sequential: replications.iter().filter(|r| r.sequential_rejection.is_some()).count() as u64,
            reject_count_chi2: replications.iter().filter(|r| r.chi2_rejection.is_some()).count() as u64,
            first_rejection_histogram: hist,
            runtime_seconds,
            replications,
        }
    }

    pub fn sequential_rate(&self) -> f64 {
        self.reject_count_sequential as f64 / self.reps as f64
    }

    pub fn chi2_rate(&self) -> f64 {
        self.reject_count_chi2 as f64 / self.reps as f64
    }

    /// One row per replication, then a summary row. Runtime is left out so
    /// that output depends only on the configuration.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(
            b"kind,rep,sequential_rejection_n,chi2_rejection_n,n_observed,log_odds,sequential_p\n",
        )?;
        for r in &self.replications {
            w.write_all(
                csv_line([
                    "rep".to_string(),
                    r.rep.to_string(),
                    opt_u64(r.sequential_rejection),
                    opt_u64(r.chi2_rejection),
                    r.n_observed.to_string(),
                    fmt_float(r.log_odds),
                    fmt_float(r.sequential_p),
                ])
                .as_bytes(),
            )?;
        }
        w.write_all(
            csv_line([
                "summary".to_string(),
                self.reps.to_string(),
                self.reject_count_sequential.to_string(),
                self.reject_count_chi2.to_string(),
                String::new(),
                String::new(),
                String::new(),
            ])
            .as_bytes(),
        )
    }

    pub fn summary_line(&self) -> String {
        format!(
            "reps={} sequential_rejections={} ({:.4}) chi2_rejections={} ({:.4}) runtime={:.2}s",
            self.reps,
            self.reject_count_sequential,
            self.sequential_rate(),
            self.reject_count_chi2,
            self.chi2_rate(),
            self.runtime_seconds
        )
    }
}

fn opt_u64(x: Option<u64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

struct Chi2Monitor {
    theta0: Vec<f64>,
    critical: f64,
    df: f64,
    u: f64,
    min_n: u64,
}

impl Chi2Monitor {
    fn new(theta0: &SimplexVector, u: f64) -> Result<Self> {
        let df = (theta0.dim() - 1) as f64;
        Ok(Self {
            theta0: theta0.values().to_vec(),
            critical: chi2_critical_value(u, df)?,
            df,
            u,
            min_n: (theta0.dim() as u64).max(5),
        })
    }

    fn rejects(&self, counts: &[u64], n: u64) -> bool {
        if n < self.min_n {
            return false;
        }
        let stat = pearson_statistic(counts, &self.theta0, n as f64);
        if (stat - self.critical).abs() <= 1e-9 * self.critical {
            chi2_sf(stat, self.df).map(|p| p < self.u).unwrap_or(false)
        } else {
            stat > self.critical
        }
    }
}

fn run_rejection_replication(
    cfg: &ExperimentConfig,
    start: &OddsState,
    sampler: &CategoricalSampler,
    chi2: &Chi2Monitor,
    rep: u64,
) -> ReplicationOutcome {
    let mut rng = rng_for(derive_seed(cfg.seed, rep), 0);
    let mut state = start.clone();
    let threshold = -cfg.u.ln();
    let mut seq = None;
    let mut chi = None;
    for _ in 0..cfg.n_max {
        let arm = sampler.sample(&mut rng);
        state.observe(arm).expect("sampled arm is in range");
        let n = state.n();
        if seq.is_none() && state.log_running_max_odds() >= threshold {
            seq = Some(n);
        }
        if chi.is_none() && chi2.rejects(state.counts().counts(), n) {
            chi = Some(n);
        }
        if seq.is_some() && chi.is_some() {
            break;
        }
    }
    ReplicationOutcome {
        rep,
        sequential_rejection: seq,
        chi2_rejection: chi,
        n_observed: state.n(),
        log_odds: state.log_odds(),
        sequential_p: state.sequential_p(),
    }
}

fn run_rejection_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let clock = Instant::now();
    let start = cfg.null_state()?;
    let sampler = CategoricalSampler::new(cfg.theta_true.values());
    let chi2 = Chi2Monitor::new(&cfg.theta0, cfg.u)?;
    let outcomes: Vec<ReplicationOutcome> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| run_rejection_replication(cfg, &start, &sampler, &chi2, rep))
        .collect();
    Ok(ExperimentResult::from_outcomes(outcomes, clock.elapsed().as_secs_f64()))
}

/// Streams `n_max` draws from the null per replication and counts the
/// replications in which each rule ever rejects.
pub fn run_type1_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    if cfg.theta_true != cfg.theta0 {
        return Err(Error::InvalidConfig(
            "a Type I experiment needs theta_true equal to theta0".into(),
        ));
    }
    run_rejection_experiment(cfg)
}

/// As [`run_type1_experiment`] with data drawn from `theta_true`.
pub fn run_power_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_rejection_experiment(cfg)
}

/// The inhomogeneous Bernoulli design: unit `i` is assigned arm `g` with
/// probability `ρ_g` and succeeds with probability `μ(i) e^{δ_g}`, where
/// `μ(i) = ½ sin(7πi/units) + ½`. Only successes reach the test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliScenario {
    pub rho: SimplexVector,
    pub delta: Vec<f64>,
    pub units: u64,
}

impl Default for BernoulliScenario {
    fn default() -> Self {
        Self {
            rho: SimplexVector::new(vec![0.1, 0.3, 0.6]).expect("valid simplex"),
            delta: vec![0.2f64.ln(), 0.3f64.ln(), 0.4f64.ln()],
            units: 30_000,
        }
    }
}

impl BernoulliScenario {
    pub fn validate(&self) -> Result<()> {
        check_len(self.rho.dim(), self.delta.len())?;
        if self.units == 0 {
            return Err(Error::InvalidConfig("units must be >= 1".into()));
        }
        if let Some(d) = self.delta.iter().find(|d| !(d.is_finite() && **d <= 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "δ = {d} gives a success probability above 1; need δ <= 0"
            )));
        }
        Ok(())
    }

    pub fn mu(&self, unit: u64) -> f64 {
        0.5 * (7.0 * PI * unit as f64 / self.units as f64).sin() + 0.5
    }

    /// Mark distribution of the successes, `σ_ρ(δ)`.
    pub fn theta(&self) -> Result<Vec<f64>> {
        softmax_rho_values(self.rho.values(), &self.delta)
    }

    /// `(unit, arm)` for each success, in unit order.
    pub fn successes(&self, seed: u64) -> Result<Vec<(u64, usize)>> {
        self.validate()?;
        let mut rng = rng_for(seed, 0);
        let assign = CategoricalSampler::new(self.rho.values());
        let rate: Vec<f64> = self.delta.iter().map(|d| d.exp()).collect();
        let mut out = Vec::new();
        for unit in 1..=self.units {
            let g = assign.sample(&mut rng);
            let v: f64 = rng.random();
            if v < self.mu(unit) * rate[g] {
                out.push((unit, g));
            }
        }
        Ok(out)
    }
}

/// Per-success record of the Bernoulli scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub n: u64,
    pub unit: u64,
    pub arm: usize,
    pub log_odds: f64,
    pub sequential_p: f64,
    pub contrast_cis: Vec<Interval>,
    /// Running minimum of the composite p-value.
    pub composite_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliTrajectory {
    pub steps: Vec<TrajectoryStep>,
    pub n_contrasts: usize,
}

impl BernoulliTrajectory {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = vec![
            "n".to_string(),
            "unit".into(),
            "arm".into(),
            "log_odds".into(),
            "sequential_p".into(),
        ];
        for k in 0..self.n_contrasts {
            header.push(format!("contrast{k}_lo"));
            header.push(format!("contrast{k}_hi"));
        }
        header.push("composite_p".into());
        w.write_all(csv_line(header).as_bytes())?;
        for s in &self.steps {
            let mut row = vec![
                s.n.to_string(),
                s.unit.to_string(),
                s.arm.to_string(),
                fmt_float(s.log_odds),
                fmt_float(s.sequential_p),
            ];
            for ci in &s.contrast_cis {
                row.push(fmt_float(ci.lo));
                row.push(fmt_float(ci.hi));
            }
            row.push(fmt_opt(s.composite_p));
            w.write_all(csv_line(row).as_bytes())?;
        }
        Ok(())
    }
}

/// Runs one Bernoulli scenario stream against the equality null `θ₀ = ρ`,
/// recording contrast intervals and the composite p-value after every success.
pub fn run_bernoulli_scenario(
    scenario: &BernoulliScenario,
    u: f64,
    prior: Prior,
    contrasts: &[ContrastSpec],
    hypothesis: Option<&LinearHypothesis>,
    seed: u64,
) -> Result<BernoulliTrajectory> {
    check_level(u)?;
    for c in contrasts {
        check_len(scenario.rho.dim(), c.dim())?;
    }
    let successes = scenario.successes(seed)?;
    let mut state = OddsState::new(scenario.rho.clone(), prior)?;
    let mut running = 1.0f64;
    let mut steps = Vec::with_capacity(successes.len());
    for (unit, arm) in successes {
        state.observe(arm)?;
        let cis = contrasts
            .iter()
            .map(|c| contrast_ci(&state, &scenario.rho, u, c))
            .collect::<Result<Vec<_>>>()?;
        let composite = match hypothesis {
            Some(h) => {
                running = running.min(composite_p(&state, &scenario.rho, h)?);
                Some(running)
            }
            None => None,
        };
        steps.push(TrajectoryStep {
            n: state.n(),
            unit,
            arm,
            log_odds: state.log_odds(),
            sequential_p: state.sequential_p(),
            contrast_cis: cis,
            composite_p: composite,
        });
    }
    Ok(BernoulliTrajectory {
        steps,
        n_contrasts: contrasts.len(),
    })
}

/// What a coverage experiment checks along each stream.
#[derive(Debug, Clone, PartialEq)]
pub enum CoverageTarget {
    /// `θ_true ∈ C_n(u)` at every `n`. This implies that every marginal
    /// interval, and every linear functional bound, covers.
    SimplexCoordinates,
    /// Every contrast interval covers its true value at every success of a
    /// Bernoulli scenario stream. `theta0` and `theta_true` of the config
    /// are not used; the null is `ρ`.
    Contrasts {
        scenario: BernoulliScenario,
        contrasts: Vec<ContrastSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageOutcome {
    pub rep: u64,
    pub covered: bool,
    pub first_miss: Option<u64>,
    pub n_observed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub reps: u64,
    pub covered: u64,
    pub runtime_seconds: f64,
    pub replications: Vec<CoverageOutcome>,
}

impl CoverageReport {
    pub fn coverage(&self) -> f64 {
        self.covered as f64 / self.reps as f64
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(b"kind,rep,covered,first_miss_n,n_observed\n")?;
        for r in &self.replications {
            w.write_all(
                csv_line([
                    "rep".to_string(),
                    r.rep.to_string(),
                    (r.covered as u8).to_string(),
                    opt_u64(r.first_miss),
                    r.n_observed.to_string(),
                ])
                .as_bytes(),
            )?;
        }
        w.write_all(
            csv_line([
                "summary".to_string(),
                self.reps.to_string(),
                self.covered.to_string(),
                String::new(),
                fmt_float(self.coverage()),
            ])
            .as_bytes(),
        )
    }

    pub fn summary_line(&self) -> String {
        format!(
            "reps={} covered={} coverage={:.4} runtime={:.2}s",
            self.reps,
            self.covered,
            self.coverage(),
            self.runtime_seconds
        )
    }
}

// Tracks log O_n(θ) for a fixed θ with the same prior as the test.
fn tracker(theta: Vec<f64>, state: &OddsState) -> Result<OddsState> {
    OddsState::with_alpha0(SimplexVector::new(theta)?, state.alpha0().clone())
}

fn coverage_simplex(cfg: &ExperimentConfig, rep: u64) -> Result<CoverageOutcome> {
    let mut rng = rng_for(derive_seed(cfg.seed, rep), 0);
    let sampler = CategoricalSampler::new(cfg.theta_true.values());
    let state = cfg.null_state()?;
    let mut truth = tracker(cfg.theta_true.values().to_vec(), &state)?;
    let threshold = -cfg.u.ln();
    for _ in 0..cfg.n_max {
        truth.observe(sampler.sample(&mut rng))?;
        if truth.log_odds() >= threshold {
            return Ok(CoverageOutcome {
                rep,
                covered: false,
                first_miss: Some(truth.n()),
                n_observed: truth.n(),
            });
        }
    }
    Ok(CoverageOutcome {
        rep,
        covered: true,
        first_miss: None,
        n_observed: truth.n(),
    })
}

fn coverage_contrasts(
    cfg: &ExperimentConfig,
    scenario: &BernoulliScenario,
    contrasts: &[ContrastSpec],
    rep: u64,
) -> Result<CoverageOutcome> {
    let successes = scenario.successes(derive_seed(cfg.seed, rep))?;
    let mut state = OddsState::new(scenario.rho.clone(), cfg.prior)?;
    let mut truth = tracker(scenario.theta()?, &state)?;
    let targets: Vec<f64> = contrasts.iter().map(|c| c.apply(&scenario.delta)).collect();
    let threshold = -cfg.u.ln();
    for &(_, arm) in &successes {
        state.observe(arm)?;
        truth.observe(arm)?;
        // Inside the simplex set every contrast interval covers; only
        // compute the intervals when that shortcut does not apply.
        if truth.log_odds() < threshold {
            continue;
        }
        for (c, &target) in contrasts.iter().zip(&targets) {
            if !contrast_ci(&state, &scenario.rho, cfg.u, c)?.contains(target) {
                return Ok(CoverageOutcome {
                    rep,
                    covered: false,
                    first_miss: Some(state.n()),
                    n_observed: state.n(),
                });
            }
        }
    }
    Ok(CoverageOutcome {
        rep,
        covered: true,
        first_miss: None,
        n_observed: state.n(),
    })
}

/// Fraction of replications whose target stays covered along the whole stream.
pub fn run_coverage_experiment(cfg: &ExperimentConfig, target: &CoverageTarget) -> Result<CoverageReport> {
    cfg.validate()?;
    if let CoverageTarget::Contrasts { scenario, contrasts } = target {
        scenario.validate()?;
        for c in contrasts {
            check_len(scenario.rho.dim(), c.dim())?;
        }
    }
    let clock = Instant::now();
    let replications = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| match target {
            CoverageTarget::SimplexCoordinates => coverage_simplex(cfg, rep),
            CoverageTarget::Contrasts { scenario, contrasts } => {
                coverage_contrasts(cfg, scenario, contrasts, rep)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoverageReport {
        reps: replications.len() as u64,
        covered: replications.iter().filter(|r| r.covered).count() as u64,
        runtime_seconds: clock.elapsed().as_secs_f64(),
        replications,
    })
}

/// Marked Poisson processes with intensities `ρᵢ e^{δᵢ} λ(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonScenario {
    pub rho: SimplexVector,
    pub delta: Vec<f64>,
    pub base: IntensitySpec,
    pub horizon: f64,
}

impl Default for PoissonScenario {
    fn default() -> Self {
        Self {
            rho: SimplexVector::new(vec![0.8, 0.2]).expect("valid simplex"),
            delta: vec![0.0, 1.5],
            base: IntensitySpec::canary_ramp(2500.0).expect("valid intensity"),
            horizon: 1.0,
        }
    }
}

impl PoissonScenario {
    pub fn events(&self, seed: u64) -> Result<Vec<MarkedEvent>> {
        check_len(self.rho.dim(), self.delta.len())?;
        simulate_processes(self.rho.values(), &self.delta, &self.base, self.horizon, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonOutcome {
    pub rep: u64,
    pub counts: Vec<u64>,
    pub log_odds: f64,
    pub sequential_p: f64,
    /// First event index at which the equality test rejected.
    pub rejection_n: Option<u64>,
    /// `exp` of the interval for `δ_{d−1} − δ₀` at the end of the stream.
    pub ratio_ci: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonReport {
    pub replications: Vec<PoissonOutcome>,
    pub runtime_seconds: f64,
}

impl PoissonReport {
    pub fn total_events(&self) -> u64 {
        self.replications.iter().map(|r| r.counts.iter().sum::<u64>()).sum()
    }

    /// Pooled fraction of events carrying the last mark.
    pub fn pooled_last_fraction(&self) -> f64 {
        let last: u64 = self
            .replications
            .iter()
            .map(|r| r.counts.last().copied().unwrap_or(0))
            .sum();
        last as f64 / self.total_events() as f64
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.replications.first().map_or(0, |r| r.counts.len());
        let mut header = vec!["kind".to_string(), "rep".into(), "n".into()];
        header.extend((0..d).map(|i| format!("count{i}")));
        header.extend(
            ["log_odds", "sequential_p", "rejection_n", "ratio_lo", "ratio_hi", "last_fraction"]
                .map(String::from),
        );
        w.write_all(csv_line(header).as_bytes())?;
        for r in &self.replications {
            let n: u64 = r.counts.iter().sum();
            let mut row = vec!["rep".to_string(), r.rep.to_string(), n.to_string()];
            row.extend(r.counts.iter().map(|c| c.to_string()));
            row.extend([
                fmt_float(r.log_odds),
                fmt_float(r.sequential_p),
                opt_u64(r.rejection_n),
                fmt_float(r.ratio_ci.lo),
                fmt_float(r.ratio_ci.hi),
                fmt_float(r.counts.last().copied().unwrap_or(0) as f64 / n.max(1) as f64),
            ]);
            w.write_all(csv_line(row).as_bytes())?;
        }
        let mut row = vec![
            "summary".to_string(),
            self.replications.len().to_string(),
            self.total_events().to_string(),
        ];
        row.extend((0..d).map(|i| {
            self.replications.iter().map(|r| r.counts[i]).sum::<u64>().to_string()
        }));
        row.extend([
            String::new(),
            String::new(),
            self.replications.iter().filter(|r| r.rejection_n.is_some()).count().to_string(),
            String::new(),
            String::new(),
            fmt_float(self.pooled_last_fraction()),
        ]);
        w.write_all(csv_line(row).as_bytes())
    }

    pub fn summary_line(&self) -> String {
        format!(
            "reps={} events={} last_mark_fraction={:.6} runtime={:.2}s",
            self.replications.len(),
            self.total_events(),
            self.pooled_last_fraction(),
            self.runtime_seconds
        )
    }
}

/// Replicates the Poisson scenario, feeding each merged stream to the
/// equality test `θ₀ = ρ`.
pub fn run_poisson_scenario(
    scenario: &PoissonScenario,
    reps: u64,
    u: f64,
    prior: Prior,
    seed: u64,
) -> Result<PoissonReport> {
    check_level(u)?;
    check_len(scenario.rho.dim(), scenario.delta.len())?;
    if reps == 0 {
        return Err(Error::InvalidConfig("reps must be >= 1".into()));
    }
    let d = scenario.rho.dim();
    let contrast = ContrastSpec::difference(d, 0, d - 1)?;
    let clock = Instant::now();
    let replications = (0..reps)
        .into_par_iter()
        .map(|rep| -> Result<PoissonOutcome> {
            let events = scenario.events(derive_seed(seed, rep))?;
            let mut state = OddsState::new(scenario.rho.clone(), prior)?;
            let mut rejection_n = None;
            let threshold = -u.ln();
            for e in &events {
                state.observe(e.arm)?;
                if rejection_n.is_none() && state.log_running_max_odds() >= threshold {
                    rejection_n = Some(state.n());
                }
            }
            let ci = contrast_ci(&state, &scenario.rho, u, &contrast)?;
            Ok(PoissonOutcome {
                rep,
                counts: state.counts().counts().to_vec(),
                log_odds: state.log_odds(),
                sequential_p: state.sequential_p(),
                rejection_n,
                ratio_ci: ci.map_monotone(f64::exp),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PoissonReport {
        replications,
        runtime_seconds: clock.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simplex(v: &[f64]) -> SimplexVector {
        SimplexVector::new(v.to_vec()).unwrap()
    }

    fn cfg(theta_true: &[f64], theta0: &[f64], n_max: u64, reps: u64) -> ExperimentConfig {
        ExperimentConfig {
            theta_true: simplex(theta_true),
            theta0: simplex(theta0),
            n_max,
            reps,
            u: 0.05,
            seed: 7,
            prior: Prior::Uniform,
        }
    }

    #[test]
    fn chi2_examples() {
        let p = pearson_chi2_p(&CountVector::new(vec![10, 10]), &simplex(&[0.5, 0.5])).unwrap();
        assert_eq!(p, 1.0);
        let p = pearson_chi2_p(&CountVector::new(vec![16, 4]), &simplex(&[0.5, 0.5])).unwrap();
        assert!((p - 0.007_290_358_091_535_641_5).abs() < 1e-10);
        let a = pearson_chi2_p(&CountVector::new(vec![3, 9, 5]), &SimplexVector::uniform(3).unwrap()).unwrap();
        let b = pearson_chi2_p(&CountVector::new(vec![9, 5, 3]), &SimplexVector::uniform(3).unwrap()).unwrap();
        assert_eq!(a, b);
        assert!(pearson_chi2_p(&CountVector::zeros(2), &simplex(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn chi2_monitor_agrees_with_p() {
        let theta0 = simplex(&[0.1, 0.4, 0.5]);
        let mon = Chi2Monitor::new(&theta0, 0.05).unwrap();
        for counts in [[2u64, 10, 8], [5, 5, 10], [0, 12, 8], [1, 3, 16]] {
            let cv = CountVector::new(counts.to_vec());
            let p = pearson_chi2_p(&cv, &theta0).unwrap();
            assert_eq!(mon.rejects(&counts, cv.total()), p < 0.05, "{counts:?}");
        }
        assert!(!mon.rejects(&[4, 0, 0], 4));
    }

    #[test]
    fn seeds_and_sampler() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        let s = CategoricalSampler::new(&[0.0, 1.0]);
        let mut rng = rng_for(3, 0);
        assert!((0..100).all(|_| s.sample(&mut rng) == 1));
    }

    #[test]
    fn type1_is_deterministic() {
        let c = cfg(&[0.5, 0.5], &[0.5, 0.5], 1, 1);
        let a = run_type1_experiment(&c).unwrap();
        let b = run_type1_experiment(&c).unwrap();
        assert_eq!(a.replications, b.replications);
        assert_eq!(a.replications[0].n_observed, 1);
        let bad = cfg(&[0.4, 0.6], &[0.5, 0.5], 10, 1);
        assert!(run_type1_experiment(&bad).is_err());
    }

    #[test]
    fn power_far_alternative() {
        let c = cfg(&[0.1, 0.3, 0.6], &[0.8, 0.1, 0.1], 200, 50);
        let r = run_power_experiment(&c).unwrap();
        assert_eq!(r.reject_count_sequential, 50);
        assert_eq!(r.first_rejection_histogram.values().sum::<u64>(), 50);
    }

    #[test]
    fn csv_has_summary_and_no_runtime() {
        let c = cfg(&[0.5, 0.5], &[0.5, 0.5], 20, 3);
        let r = run_type1_experiment(&c).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().last().unwrap().starts_with("summary,3,"));
    }

    #[test]
    fn bernoulli_scenario_basics() {
        let sc = BernoulliScenario {
            units: 2000,
            ..Default::default()
        };
        let th = sc.theta().unwrap();
        assert!((th[2] - 24.0 / 35.0).abs() < 1e-15);
        let a = sc.successes(5).unwrap();
        assert_eq!(a, sc.successes(5).unwrap());
        assert!(a.windows(2).all(|w| w[0].0 < w[1].0));
        let bad = BernoulliScenario {
            delta: vec![0.1, 0.0, 0.0],
            ..Default::default()
        };
        assert!(bad.successes(1).is_err());
    }

    #[test]
    fn bernoulli_trajectory_records_each_success() {
        let sc = BernoulliScenario {
            units: 1500,
            ..Default::default()
        };
        let contrasts = [ContrastSpec::difference(3, 1, 2).unwrap()];
        let h = LinearHypothesis::dominates(3, 0, &[1, 2]).unwrap();
        let tr = run_bernoulli_scenario(&sc, 0.05, Prior::Uniform, &contrasts, Some(&h), 3).unwrap();
        assert_eq!(tr.steps.len(), sc.successes(3).unwrap().len());
        let ps: Vec<f64> = tr.steps.iter().map(|s| s.composite_p.unwrap()).collect();
        assert!(ps.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn coverage_degenerate_two_arm() {
        let c = cfg(&[0.5, 0.5], &[0.5, 0.5], 300, 200);
        let r = run_coverage_experiment(&c, &CoverageTarget::SimplexCoordinates).unwrap();
        assert!(r.coverage() >= 0.95 - 3.0 * (0.05f64 * 0.95 / 200.0).sqrt());
    }

    #[test]
    fn poisson_scenario_runs() {
        let sc = PoissonScenario {
            horizon: 0.2,
            ..Default::default()
        };
        let r = run_poisson_scenario(&sc, 3, 0.05, Prior::Uniform, 11).unwrap();
        assert_eq!(r.replications.len(), 3);
        assert!(r.total_events() > 0);
        for rep in &r.replications {
            assert!(rep.ratio_ci.lo <= rep.ratio_ci.hi);
        }
    }
}
