//! NDJSON event ingestion and bounded-window time reordering.

use std::io::BufRead;

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};

/// One input line: `{"arm": 1}` or `{"arm": 1, "t": 0.25}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub arm: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

/// Whether records carry timestamps; fixed by the first valid record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimestampMode {
    Unknown,
    With,
    Without,
}

pub struct EventReader {
    pub d: usize,
    pub require_t: bool,
    pub strict: bool,
    pub mode: TimestampMode,
    pub skipped: u64,
}

impl EventReader {
    fn parse(&mut self, line: &str) -> anyhow::Result<EventRecord> {
        let rec: EventRecord = serde_json::from_str(line).context("malformed event")?;
        if rec.arm >= self.d {
            bail!("arm {} out of range for {} arms", rec.arm, self.d);
        }
        match rec.t {
            Some(t) if !t.is_finite() => bail!("timestamp {t} is not finite"),
            None if self.require_t => bail!("missing timestamp `t`"),
            _ => {}
        }
        let has_t = if rec.t.is_some() {
            TimestampMode::With
        } else {
            TimestampMode::Without
        };
        match self.mode {
            TimestampMode::Unknown => self.mode = has_t,
            m if m != has_t => bail!("either every event carries `t` or none does"),
            _ => {}
        }
        Ok(rec)
    }

    /// Calls `f` on every valid record. Malformed lines abort in strict
    /// mode and are reported and skipped otherwise.
    pub fn for_each<R: BufRead>(
        &mut self,
        input: R,
        mut f: impl FnMut(EventRecord) -> anyhow::Result<()>,
    ) -> anyhow::Result<()> {
        for (idx, line) in input.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.with_context(|| format!("reading input line {lineno}"))?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            match self.parse(trimmed) {
                Ok(rec) => f(rec).with_context(|| format!("line {lineno}"))?,
                Err(e) if self.strict => return Err(anyhow!("line {lineno}: {e:#}")),
                Err(e) => {
                    eprintln!("warning: line {lineno}: {e:#}; skipped");
                    self.skipped += 1;
                }
            }
        }
        Ok(())
    }
}

/// Releases events in time order once they are older than the newest
/// timestamp by more than `window`. Ties keep arrival order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReorderBuffer {
    pub window: f64,
    pub pending: Vec<(f64, usize)>,
    pub last_released: Option<f64>,
    pub newest: Option<f64>,
}

impl ReorderBuffer {
    pub fn new(window: f64) -> anyhow::Result<Self> {
        if !(window >= 0.0 && window.is_finite()) {
            bail!("reorder window must be finite and >= 0, got {window}");
        }
        Ok(Self {
            window,
            pending: Vec::new(),
            last_released: None,
            newest: None,
        })
    }

    pub fn push(&mut self, t: f64, arm: usize) -> anyhow::Result<Vec<(f64, usize)>> {
        if let Some(last) = self.last_released {
            if t < last {
                bail!(
                    "event at t = {t} arrived after t = {last} was released; \
                     it is out of order by more than the reorder window ({})",
                    self.window
                );
            }
        }
        let at = self.pending.partition_point(|e| e.0 <= t);
        self.pending.insert(at, (t, arm));
        let newest = self.newest.map_or(t, |n| n.max(t));
        self.newest = Some(newest);
        let watermark = newest - self.window;
        let ready = self.pending.partition_point(|e| e.0 <= watermark);
        Ok(self.release(ready))
    }

    pub fn flush(&mut self) -> Vec<(f64, usize)> {
        self.release(self.pending.len())
    }

    fn release(&mut self, k: usize) -> Vec<(f64, usize)> {
        let out: Vec<(f64, usize)> = self.pending.drain(..k).collect();
        if let Some(&(t, _)) = out.last() {
            self.last_released = Some(t);
        }
        out
    }
}
