//! Check results and suite reports.

use std::time::Instant;

use integrable_core::table::Table;
use rayon::prelude::*;
use serde::Serialize;

use integrable_core::sample::Sampler;

/// How a check relates to the claim it tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Standard,
    /// A quantitative claim evaluated exactly as written, including a
    /// constant that the corrected twin replaces.
    AsWritten,
    /// Same claim with the corrected constant.
    Corrected,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub kind: CheckKind,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub samples: usize,
    /// Samples whose evaluation raised an error (degenerate point, branch
    /// path failure); they do not enter the residual, and more than 1% of
    /// them fails the check.
    pub skipped: usize,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub note: String,
    #[serde(skip)]
    pub per_trial: Vec<f64>,
}

impl Check {
    pub fn new(name: &str, kind: CheckKind, tolerance: f64, m: Measured, wall_time_s: f64) -> Self {
        let max_residual = if m.residual.is_nan() { f64::INFINITY } else { m.residual };
        // Skips are tolerated at degenerate points only: at most 1% of the
        // samples, and never all of them.
        let pass = max_residual <= tolerance && m.samples > m.skipped && m.skipped * 100 <= m.samples;
        Self {
            name: name.to_string(),
            kind,
            max_residual,
            tolerance,
            pass,
            samples: m.samples,
            skipped: m.skipped,
            wall_time_s,
            note: m.note,
            per_trial: m.per_trial,
        }
    }

    /// Name with a `_as_written` / `_corrected` suffix for twin checks.
    pub fn column(&self) -> String {
        match self.kind {
            CheckKind::Standard => self.name.clone(),
            CheckKind::AsWritten => format!("{}_as_written", self.name),
            CheckKind::Corrected => format!("{}_corrected", self.name),
        }
    }

    pub fn line(&self) -> String {
        let kind = match self.kind {
            CheckKind::Standard => "",
            CheckKind::AsWritten => " [as written]",
            CheckKind::Corrected => " [corrected]",
        };
        let skipped = if self.skipped > 0 { format!(", {} skipped", self.skipped) } else { String::new() };
        let note = if self.note.is_empty() { String::new() } else { format!("; {}", self.note) };
        format!(
            "{} {}{kind}: max residual {:.3e} vs tolerance {:.1e} ({} samples{skipped}, {:.2} s){note}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.max_residual,
            self.tolerance,
            self.samples,
            self.wall_time_s,
        )
    }
}

/// Raw outcome of a measurement.
#[derive(Clone, Debug, Default)]
pub struct Measured {
    pub residual: f64,
    pub samples: usize,
    pub skipped: usize,
    pub note: String,
    pub per_trial: Vec<f64>,
}

impl Measured {
    pub fn single(residual: f64) -> Self {
        Self { residual, samples: 1, ..Default::default() }
    }

    pub fn failed(message: impl Into<String>) -> Self {
        Self { residual: f64::INFINITY, samples: 1, skipped: 1, note: message.into(), per_trial: Vec::new() }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

/// Runs `f` and times it.
pub fn timed(name: &str, kind: CheckKind, tolerance: f64, f: impl FnOnce() -> Measured) -> Check {
    let start = Instant::now();
    let m = f();
    Check::new(name, kind, tolerance, m, start.elapsed().as_secs_f64())
}

/// Evaluates `f` on `trials` independent samplers keyed by (seed, key,
/// trial), in parallel, and keeps the per-trial residuals in trial order.
pub fn over_trials<F>(seed: u64, key: &str, trials: usize, f: F) -> Measured
where
    F: Fn(&mut Sampler) -> integrable_core::Result<f64> + Sync,
{
    let results: Vec<_> = (0..trials as u64).into_par_iter().map(|t| f(&mut Sampler::new(seed, key, t))).collect();
    let mut m = Measured { samples: trials, ..Default::default() };
    let mut first_error = None;
    for r in results {
        match r {
            Ok(v) => {
                let v = if v.is_nan() { f64::INFINITY } else { v };
                m.residual = m.residual.max(v);
                m.per_trial.push(v);
            }
            Err(e) => {
                m.skipped += 1;
                m.per_trial.push(f64::NAN);
                first_error.get_or_insert_with(|| e.to_string());
            }
        }
    }
    if let Some(e) = first_error {
        m.note = format!("first error: {e}");
    }
    m
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub n: usize,
    pub trials: usize,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per trial, one column per check that ran on every trial.
    pub fn trial_table(&self) -> Table {
        let cols: Vec<&Check> = self.checks.iter().filter(|c| c.per_trial.len() == self.trials).collect();
        let mut t = Table::new(std::iter::once("trial".to_string()).chain(cols.iter().map(|c| c.column())));
        for i in 0..self.trials {
            t.push(std::iter::once(i as f64).chain(cols.iter().map(|c| c.per_trial[i])).collect());
        }
        t
    }
}
