//! `simulate` subcommands: CSV on stdout or `--out`, a summary on stderr.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context};

use super::config::{CoverageKind, RunConfig};
use super::input::EventRecord;
use super::{SimArgs, SimKind, EXIT_OK};
use crate::error::Error;
use crate::report::{fmt_float, fmt_opt};
use crate::sim::{
    run_bernoulli_scenario, run_coverage_experiment, run_poisson_scenario, run_power_experiment,
    run_type1_experiment, BernoulliScenario, CoverageTarget, ExperimentConfig, PoissonScenario,
};

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_events(path: &Path, events: impl Iterator<Item = EventRecord>) -> anyhow::Result<()> {
    let mut w = BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    for e in events {
        serde_json::to_writer(&mut w, &e)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn experiment(cfg: &RunConfig, seed: u64, kind: SimKind) -> anyhow::Result<ExperimentConfig> {
    let theta0 = cfg.theta0()?;
    let theta_true = match (kind, &cfg.theta_true) {
        (SimKind::Type1, None) => theta0.clone(),
        _ => cfg.theta_true()?,
    };
    Ok(ExperimentConfig {
        prior: cfg.prior(theta0.dim()),
        theta_true,
        theta0,
        n_max: RunConfig::require(cfg.n_max, "n_max")?,
        reps: RunConfig::require(cfg.reps, "reps")?,
        u: cfg.level()?,
        seed,
    })
}

fn bernoulli(cfg: &RunConfig) -> anyhow::Result<BernoulliScenario> {
    let mut sc = BernoulliScenario::default();
    if cfg.rho.is_some() {
        sc.rho = cfg.rho()?;
    }
    if let Some(delta) = &cfg.delta {
        sc.delta = delta.clone();
    }
    if let Some(units) = cfg.units {
        sc.units = units;
    }
    sc.validate()?;
    Ok(sc)
}

fn poisson(cfg: &RunConfig) -> anyhow::Result<PoissonScenario> {
    let mut sc = PoissonScenario::default();
    if cfg.rho.is_some() {
        sc.rho = cfg.rho()?;
    }
    if let Some(delta) = &cfg.delta {
        sc.delta = delta.clone();
    }
    if let Some(spec) = &cfg.intensity {
        spec.validate()?;
        sc.base = spec.clone();
    }
    if let Some(h) = cfg.horizon {
        if !(h > 0.0 && h.is_finite()) {
            bail!(Error::InvalidConfig(format!("horizon must be > 0, got {h}")));
        }
        sc.horizon = h;
    }
    if sc.delta.len() != sc.rho.dim() {
        bail!(Error::DimensionMismatch {
            expected: sc.rho.dim(),
            got: sc.delta.len()
        });
    }
    Ok(sc)
}

pub fn run_simulate(kind: SimKind, args: &SimArgs) -> anyhow::Result<i32> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(u) = args.u {
        cfg.u = Some(u);
    }
    let seed = cfg.seed(args.seed);
    let mut out = output(args.out.as_deref())?;
    match kind {
        SimKind::Type1 | SimKind::Power => {
            let ecfg = experiment(&cfg, seed, kind)?;
            let res = if kind == SimKind::Type1 {
                run_type1_experiment(&ecfg)?
            } else {
                run_power_experiment(&ecfg)?
            };
            res.write_csv(&mut out)?;
            eprintln!("{}", res.summary_line());
        }
        SimKind::Coverage => {
            let target = match cfg.target.unwrap_or(CoverageKind::Simplex) {
                CoverageKind::Simplex => CoverageTarget::SimplexCoordinates,
                CoverageKind::Contrasts => {
                    let scenario = bernoulli(&cfg)?;
                    let contrasts = cfg.contrast_specs(scenario.rho.dim())?;
                    CoverageTarget::Contrasts {
                        scenario,
                        contrasts,
                    }
                }
            };
            let ecfg = match &target {
                CoverageTarget::SimplexCoordinates => experiment(&cfg, seed, kind)?,
                CoverageTarget::Contrasts { scenario, .. } => ExperimentConfig {
                    theta_true: scenario.rho.clone(),
                    theta0: scenario.rho.clone(),
                    n_max: scenario.units,
                    reps: RunConfig::require(cfg.reps, "reps")?,
                    u: cfg.level()?,
                    seed,
                    prior: cfg.prior(scenario.rho.dim()),
                },
            };
            let res = run_coverage_experiment(&ecfg, &target)?;
            res.write_csv(&mut out)?;
            eprintln!("{}", res.summary_line());
        }
        SimKind::Bernoulli => {
            let sc = bernoulli(&cfg)?;
            let d = sc.rho.dim();
            let contrasts = cfg.contrast_specs(d)?;
            let hypothesis = cfg.hypothesis(d)?;
            let tr = run_bernoulli_scenario(
                &sc,
                cfg.level()?,
                cfg.prior(d),
                &contrasts,
                hypothesis.as_ref(),
                seed,
            )?;
            tr.write_csv(&mut out)?;
            if let Some(path) = &args.events {
                write_events(
                    path,
                    tr.steps.iter().map(|s| EventRecord { arm: s.arm, t: None }),
                )?;
            }
            let last = tr.steps.last();
            eprintln!(
                "successes={} final_p={} final_composite_p={}",
                tr.steps.len(),
                fmt_float(last.map_or(1.0, |s| s.sequential_p)),
                fmt_opt(last.and_then(|s| s.composite_p))
            );
        }
        SimKind::Poisson => {
            let sc = poisson(&cfg)?;
            let reps = cfg.reps.unwrap_or(1);
            let d = sc.rho.dim();
            let res = run_poisson_scenario(&sc, reps, cfg.level()?, cfg.prior(d), seed)?;
            res.write_csv(&mut out)?;
            if let Some(path) = &args.events {
                let events = sc.events(crate::sim::derive_seed(seed, 0))?;
                write_events(
                    path,
                    events.iter().map(|e| EventRecord {
                        arm: e.arm,
                        t: Some(e.t),
                    }),
                )?;
            }
            eprintln!("{}", res.summary_line());
        }
    }
    out.flush()?;
    Ok(EXIT_OK)
}
