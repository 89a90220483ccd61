//! Marked inhomogeneous Poisson processes.
//!
//! If process `i` has intensity `ρᵢ e^{δᵢ} λ(t)` for a shared `λ`, then the
//! mark of each point of the superposed process is an independent
//! `Multinomial(1, σ_ρ(δ))` draw, whatever `λ` is. Sorting marked events by
//! time therefore yields a stream the sequential test can consume directly.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::contrasts::softmax_rho;
use crate::error::{check_len, Error, Result};
use crate::sim::rng_for;
use crate::types::SimplexVector;

/// One point of a marked process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkedEvent {
    pub t: f64,
    pub arm: usize,
}

impl MarkedEvent {
    pub fn new(t: f64, arm: usize, d: usize) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::Domain(format!("event time {t} is not finite")));
        }
        if arm >= d {
            return Err(Error::ArmOutOfRange { arm, d });
        }
        Ok(Self { t, arm })
    }
}

/// Shape of an intensity function `λ(t) ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntensityKind {
    Constant { rate: f64 },
    /// `scale · sigmoid(sin(angular_freq · t) + slope · t + offset)`.
    SinusoidSigmoid {
        scale: f64,
        angular_freq: f64,
        slope: f64,
        offset: f64,
    },
    /// Piecewise linear through `(t, rate)` knots, constant beyond the ends.
    Tabulated { knots: Vec<(f64, f64)> },
}

/// An intensity together with the dominating rate used for thinning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensitySpec {
    #[serde(flatten)]
    pub kind: IntensityKind,
    pub lambda_max: f64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl IntensitySpec {
    pub fn new(kind: IntensityKind, lambda_max: f64) -> Result<Self> {
        let spec = Self { kind, lambda_max };
        spec.validate()?;
        Ok(spec)
    }

    pub fn constant(rate: f64) -> Result<Self> {
        Self::new(IntensityKind::Constant { rate }, rate)
    }

    /// `scale · sigmoid(sin(10πt) + 8t − 4)`, dominated by `scale`.
    pub fn canary_ramp(scale: f64) -> Result<Self> {
        Self::new(
            IntensityKind::SinusoidSigmoid {
                scale,
                angular_freq: 10.0 * PI,
                slope: 8.0,
                offset: -4.0,
            },
            scale,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_max >= 0.0 && self.lambda_max.is_finite()) {
            return Err(Error::InvalidIntensity(format!(
                "lambda_max must be finite and >= 0, got {}",
                self.lambda_max
            )));
        }
        match &self.kind {
            IntensityKind::Constant { rate } => {
                if !(*rate >= 0.0 && rate.is_finite()) {
                    return Err(Error::InvalidIntensity(format!("rate {rate} is not >= 0")));
                }
                if *rate > self.lambda_max {
                    return Err(Error::DominanceViolated {
                        t: 0.0,
                        value: *rate,
                        lambda_max: self.lambda_max,
                    });
                }
            }
            IntensityKind::SinusoidSigmoid {
                scale,
                angular_freq,
                slope,
                offset,
            } => {
                if !(*scale >= 0.0) || ![*scale, *angular_freq, *slope, *offset].iter().all(|v| v.is_finite()) {
                    return Err(Error::InvalidIntensity(
                        "sinusoid-sigmoid parameters must be finite with scale >= 0".into(),
                    ));
                }
            }
            IntensityKind::Tabulated { knots } => {
                if knots.is_empty() {
                    return Err(Error::InvalidIntensity("no knots".into()));
                }
                for (k, &(t, v)) in knots.iter().enumerate() {
                    if !t.is_finite() || !(v >= 0.0 && v.is_finite()) {
                        return Err(Error::InvalidIntensity(format!("knot {k} = ({t}, {v}) is invalid")));
                    }
                    if k > 0 && !(t > knots[k - 1].0) {
                        return Err(Error::InvalidIntensity("knot times must increase strictly".into()));
                    }
                    if v > self.lambda_max {
                        return Err(Error::DominanceViolated {
                            t,
                            value: v,
                            lambda_max: self.lambda_max,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// `λ(t)`.
    pub fn rate(&self, t: f64) -> f64 {
        match &self.kind {
            IntensityKind::Constant { rate } => *rate,
            IntensityKind::SinusoidSigmoid {
                scale,
                angular_freq,
                slope,
                offset,
            } => scale * sigmoid((angular_freq * t).sin() + slope * t + offset),
            IntensityKind::Tabulated { knots } => {
                let first = knots[0];
                let last = knots[knots.len() - 1];
                if t <= first.0 {
                    return first.1;
                }
                if t >= last.0 {
                    return last.1;
                }
                let k = knots.partition_point(|&(tk, _)| tk <= t);
                let (t0, v0) = knots[k - 1];
                let (t1, v1) = knots[k];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// The intensity multiplied by `factor`, with the dominating rate scaled alike.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor >= 0.0 && factor.is_finite()) {
            return Err(Error::InvalidIntensity(format!("scale factor {factor} is not >= 0")));
        }
        let kind = match &self.kind {
            IntensityKind::Constant { rate } => IntensityKind::Constant { rate: rate * factor },
            IntensityKind::SinusoidSigmoid {
                scale,
                angular_freq,
                slope,
                offset,
            } => IntensityKind::SinusoidSigmoid {
                scale: scale * factor,
                angular_freq: *angular_freq,
                slope: *slope,
                offset: *offset,
            },
            IntensityKind::Tabulated { knots } => IntensityKind::Tabulated {
                knots: knots.iter().map(|&(t, v)| (t, v * factor)).collect(),
            },
        };
        Self::new(kind, self.lambda_max * factor)
    }

    /// `Λ([0, horizon])` by composite Simpson's rule.
    pub fn integrated(&self, horizon: f64, intervals: usize) -> f64 {
        let m = intervals.max(2) & !1;
        let h = horizon / m as f64;
        let mut acc = self.rate(0.0) + self.rate(horizon);
        for k in 1..m {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * self.rate(k as f64 * h);
        }
        acc * h / 3.0
    }
}

/// Mark distribution of the superposed process; the same map as
/// [`softmax_rho`].
pub fn mark_probability(rho: &SimplexVector, delta: &[f64]) -> Result<SimplexVector> {
    softmax_rho(rho, delta)
}

/// Arms in time order. Ties keep their input order.
pub fn events_to_observations(events: &[MarkedEvent]) -> Vec<usize> {
    let mut sorted: Vec<&MarkedEvent> = events.iter().collect();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    sorted.into_iter().map(|e| e.arm).collect()
}

pub(crate) fn thin_with(rng: &mut ChaCha8Rng, spec: &IntensitySpec, horizon: f64) -> Result<Vec<f64>> {
    spec.validate()?;
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::Domain(format!("horizon {horizon} must be finite and >= 0")));
    }
    let mut out = Vec::new();
    if spec.lambda_max == 0.0 {
        return Ok(out);
    }
    let gap = Exp::new(spec.lambda_max).map_err(|e| Error::InvalidIntensity(e.to_string()))?;
    let mut t = 0.0;
    loop {
        t += gap.sample(rng);
        if t > horizon {
            break;
        }
        let r = spec.rate(t);
        if r > spec.lambda_max {
            return Err(Error::DominanceViolated {
                t,
                value: r,
                lambda_max: spec.lambda_max,
            });
        }
        let v: f64 = rng.random();
        if v * spec.lambda_max < r {
            out.push(t);
        }
    }
    Ok(out)
}

/// Event times on `[0, horizon]` of a Poisson process with intensity
/// `spec`, by thinning a homogeneous process at `lambda_max`.
pub fn simulate_thinned(spec: &IntensitySpec, horizon: f64, seed: u64) -> Result<Vec<f64>> {
    thin_with(&mut rng_for(seed, 0), spec, horizon)
}

/// Simulates process `i` with intensity `ρᵢ e^{δᵢ} λ(t)` for each arm and
/// merges the marked points by time.
pub fn simulate_marked_system(
    rho: &SimplexVector,
    delta: &[f64],
    base: &IntensitySpec,
    horizon: f64,
    seed: u64,
) -> Result<Vec<MarkedEvent>> {
    check_len(rho.dim(), delta.len())?;
    simulate_processes(rho.values(), delta, base, horizon, seed)
}

pub(crate) fn simulate_processes(
    rho: &[f64],
    delta: &[f64],
    base: &IntensitySpec,
    horizon: f64,
    seed: u64,
) -> Result<Vec<MarkedEvent>> {
    let mut events = Vec::new();
    for (arm, (r, d)) in rho.iter().zip(delta).enumerate() {
        let spec = base.scaled(r * d.exp())?;
        let mut rng = rng_for(seed, arm as u64);
        events.extend(thin_with(&mut rng, &spec, horizon)?.into_iter().map(|t| MarkedEvent { t, arm }));
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(events)
}
