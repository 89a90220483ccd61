//! The streaming commands: `srm`, `convert` and `canary`.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};

use anyhow::Context;
use serde::Serialize;

use super::checkpoint::{StreamCheckpoint, CHECKPOINT_VERSION};
use super::config::{digest, direction_hypothesis, Direction, RunConfig};
use super::input::{EventReader, ReorderBuffer, TimestampMode};
use super::{StreamArgs, EXIT_OK, EXIT_REJECTED};
use crate::confset::marginal_ci;
use crate::contrasts::{
    contrast_ci, contrast_mle, CompositePStream, ContrastSpec, LinearConstraint,
};
use crate::report::{csv_line, fmt_float, fmt_opt};
use crate::seqtest::{OddsState, Prior};
use crate::types::SimplexVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamKind {
    Srm,
    Convert,
    Canary,
}

impl StreamKind {
    fn name(self) -> &'static str {
        match self {
            StreamKind::Srm => "srm",
            StreamKind::Convert => "convert",
            StreamKind::Canary => "canary",
        }
    }
}

/// The configuration after defaults and overrides; its digest guards checkpoints.
#[derive(Debug, Clone, Serialize)]
struct Effective {
    command: StreamKind,
    theta0: SimplexVector,
    u: f64,
    prior: Prior,
    contrasts: Vec<ContrastSpec>,
    hypothesis: Option<Vec<LinearConstraint>>,
    report_every: u64,
    reorder_window: Option<f64>,
}

struct Analysis {
    kind: StreamKind,
    u: f64,
    d: usize,
    rho: SimplexVector,
    contrasts: Vec<ContrastSpec>,
    composite: Option<CompositePStream>,
}

fn bool_field(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

impl Analysis {
    fn header(&self) -> Vec<String> {
        let mut h = vec!["n".to_string()];
        if self.kind == StreamKind::Canary {
            h.push("t".into());
        }
        h.extend(["log_odds", "p_value", "reject"].map(String::from));
        match self.kind {
            StreamKind::Srm => {
                for i in 0..self.d {
                    h.push(format!("theta{i}_lo"));
                    h.push(format!("theta{i}_hi"));
                }
            }
            StreamKind::Convert => {
                for k in 0..self.contrasts.len() {
                    h.push(format!("contrast{k}_mle"));
                    h.push(format!("contrast{k}_lo"));
                    h.push(format!("contrast{k}_hi"));
                }
            }
            StreamKind::Canary => {
                for k in 1..self.d {
                    h.push(format!("ratio{k}_mle"));
                    h.push(format!("ratio{k}_lo"));
                    h.push(format!("ratio{k}_hi"));
                }
            }
        }
        if self.composite.is_some() {
            h.push("composite_p".into());
            h.push("composite_reject".into());
        }
        h
    }

    fn after_event(&mut self, state: &OddsState) -> anyhow::Result<()> {
        if let Some(c) = &mut self.composite {
            c.update(state)?;
        }
        Ok(())
    }

    fn row(&self, state: &OddsState, t: Option<f64>) -> anyhow::Result<Vec<String>> {
        let mut r = vec![state.n().to_string()];
        if self.kind == StreamKind::Canary {
            r.push(fmt_opt(t));
        }
        r.push(fmt_float(state.log_odds()));
        r.push(fmt_float(state.sequential_p()));
        r.push(bool_field(state.should_reject(self.u)?));
        match self.kind {
            StreamKind::Srm => {
                for i in 0..self.d {
                    let ci = marginal_ci(state, self.u, i)?;
                    r.push(fmt_float(ci.lo));
                    r.push(fmt_float(ci.hi));
                }
            }
            StreamKind::Convert => {
                for c in &self.contrasts {
                    let ci = contrast_ci(state, &self.rho, self.u, c)?;
                    r.push(fmt_opt(contrast_mle(state, &self.rho, c)?));
                    r.push(fmt_float(ci.lo));
                    r.push(fmt_float(ci.hi));
                }
            }
            StreamKind::Canary => {
                for c in &self.contrasts {
                    let ci = contrast_ci(state, &self.rho, self.u, c)?.map_monotone(f64::exp);
                    r.push(fmt_opt(contrast_mle(state, &self.rho, c)?.map(f64::exp)));
                    r.push(fmt_float(ci.lo));
                    r.push(fmt_float(ci.hi));
                }
            }
        }
        if let Some(c) = &self.composite {
            r.push(fmt_float(c.running_min()));
            r.push(bool_field(c.running_min() <= self.u));
        }
        Ok(r)
    }

    fn rejected(&self, state: &OddsState) -> anyhow::Result<bool> {
        let composite = self.composite.as_ref().is_some_and(|c| c.running_min() <= self.u);
        Ok(state.should_reject(self.u)? || composite)
    }
}

struct Runner {
    analysis: Analysis,
    state: OddsState,
    report_every: u64,
    out: Box<dyn Write>,
}

impl Runner {
    fn write_row(&mut self, t: Option<f64>) -> anyhow::Result<()> {
        let row = self.analysis.row(&self.state, t)?;
        self.out.write_all(csv_line(row).as_bytes())?;
        Ok(())
    }

    fn observe(&mut self, arm: usize, t: Option<f64>) -> anyhow::Result<()> {
        self.state.observe(arm)?;
        self.analysis.after_event(&self.state)?;
        if self.state.n() % self.report_every == 0 {
            self.write_row(t)?;
        }
        Ok(())
    }
}

fn open_input(args: &StreamArgs) -> anyhow::Result<Box<dyn BufRead>> {
    match &args.input {
        Some(p) if p.as_os_str() != "-" => {
            let f = File::open(p).with_context(|| format!("opening input {}", p.display()))?;
            Ok(Box::new(BufReader::new(f)))
        }
        _ => Ok(Box::new(BufReader::new(io::stdin().lock()))),
    }
}

fn open_output(args: &StreamArgs, append: bool) -> anyhow::Result<Box<dyn Write>> {
    match &args.out {
        Some(p) => {
            let f = if append {
                OpenOptions::new().create(true).append(true).open(p)
            } else {
                File::create(p)
            }
            .with_context(|| format!("opening output {}", p.display()))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

/// Runs a streaming command and returns the process exit code.
pub fn run_stream(
    kind: StreamKind,
    args: &StreamArgs,
    reorder_window: Option<f64>,
    direction: Option<Direction>,
    finalize: bool,
) -> anyhow::Result<i32> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(u) = args.u {
        cfg.u = Some(u);
    }
    if let Some(k) = args.report_every {
        cfg.report_every = Some(k);
    }
    let u = cfg.level()?;
    let report_every = cfg.report_every()?;

    let (theta0, rho) = match kind {
        StreamKind::Srm => {
            let t = cfg.theta0()?;
            (t.clone(), t)
        }
        StreamKind::Convert | StreamKind::Canary => {
            let r = cfg.rho()?;
            (crate::contrasts::null_from_equality(&r), r)
        }
    };
    let d = theta0.dim();
    let prior = cfg.prior(d);
    let contrasts = match kind {
        StreamKind::Srm => Vec::new(),
        StreamKind::Convert => cfg.contrast_specs(d)?,
        StreamKind::Canary => (1..d)
            .map(|k| ContrastSpec::difference(d, 0, k))
            .collect::<crate::Result<Vec<_>>>()?,
    };
    let hypothesis = match (kind, direction) {
        (StreamKind::Canary, Some(dir)) => Some(direction_hypothesis(dir, d)?),
        (StreamKind::Canary, None) | (StreamKind::Srm, _) => None,
        (StreamKind::Convert, _) => cfg.hypothesis(d)?,
    };
    let window = match kind {
        StreamKind::Canary => Some(reorder_window.unwrap_or(0.0)),
        _ => None,
    };
    let effective = Effective {
        command: kind,
        theta0: theta0.clone(),
        u,
        prior,
        contrasts: contrasts.clone(),
        hypothesis: hypothesis.as_ref().map(|h| h.constraints().to_vec()),
        report_every,
        reorder_window: window,
    };
    let config_digest = digest(&effective);

    let restored = match &args.checkpoint {
        Some(p) if p.exists() => Some(StreamCheckpoint::restore(p, kind.name(), &config_digest)?),
        _ => None,
    };

    let mut composite = match &hypothesis {
        Some(h) => Some(CompositePStream::new(rho.clone(), h.clone())?),
        None => None,
    };
    let (state, mut events_processed, mut reorder, timestamps) = match &restored {
        Some(cp) => {
            if let (Some(c), Some(p)) = (composite.take(), cp.composite_running_min) {
                composite = Some(c.with_running_min(p)?);
            }
            (cp.state.clone(), cp.events_processed, cp.reorder.clone(), cp.timestamps)
        }
        None => {
            let reorder = match window {
                Some(w) => Some(ReorderBuffer::new(w)?),
                None => None,
            };
            (OddsState::new(theta0, prior)?, 0, reorder, TimestampMode::Unknown)
        }
    };

    let mut runner = Runner {
        analysis: Analysis {
            kind,
            u,
            d,
            rho: rho.clone(),
            contrasts,
            composite,
        },
        state,
        report_every,
        out: open_output(args, restored.is_some())?,
    };
    if restored.is_none() {
        let header = runner.analysis.header();
        runner.out.write_all(csv_line(header).as_bytes())?;
        runner.write_row(None)?;
    }

    let mut reader = EventReader {
        d,
        require_t: kind == StreamKind::Canary,
        strict: args.strict,
        mode: timestamps,
        skipped: 0,
    };
    reader.for_each(open_input(args)?, |rec| {
        events_processed += 1;
        match reorder.as_mut() {
            Some(buf) => {
                let t = rec.t.expect("timestamps are required");
                for (t, arm) in buf.push(t, rec.arm)? {
                    runner.observe(arm, Some(t))?;
                }
            }
            None => runner.observe(rec.arm, rec.t)?,
        }
        Ok(())
    })?;
    if let Some(buf) = reorder.as_mut() {
        if args.checkpoint.is_none() || finalize {
            for (t, arm) in buf.flush() {
                runner.observe(arm, Some(t))?;
            }
        }
    }
    runner.out.flush()?;

    if let Some(path) = &args.checkpoint {
        let cp = StreamCheckpoint {
            version: CHECKPOINT_VERSION,
            command: kind.name().into(),
            config_digest,
            state: runner.state.clone(),
            rho: (kind != StreamKind::Srm).then(|| rho.clone()),
            events_processed,
            composite_running_min: runner.analysis.composite.as_ref().map(|c| c.running_min()),
            timestamps: reader.mode,
            reorder,
        };
        cp.save(path)?;
    }
    if reader.skipped > 0 {
        eprintln!("{} malformed line(s) skipped", reader.skipped);
    }
    Ok(if runner.analysis.rejected(&runner.state)? {
        EXIT_REJECTED
    } else {
        EXIT_OK
    })
}
