//! Accuracy and overlap of single models against the ensemble.
//!
//! Every sample falls into exactly one region: the set of single models that
//! got it right, possibly empty. For each region the report gives `α`, the
//! number of samples in it, and `β`, how many of those the ensemble also got
//! right. It is printed as `α|β`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleWeights;
use crate::error::{Error, Result};

fn symmetric_difference<A, B>(a: &BTreeMap<String, A>, b: &BTreeMap<String, B>) -> Vec<String> {
    let left: BTreeSet<&String> = a.keys().collect();
    let right: BTreeSet<&String> = b.keys().collect();
    left.symmetric_difference(&right).map(|s| s.to_string()).collect()
}

/// Fraction of ids whose predicted label equals the gold label.
pub fn accuracy(predictions: &BTreeMap<String, usize>, gold: &BTreeMap<String, usize>) -> Result<f64> {
    let diff = symmetric_difference(predictions, gold);
    if !diff.is_empty() {
        return Err(Error::IdMismatch(diff));
    }
    if gold.is_empty() {
        return Err(Error::InvalidInput("accuracy of an empty split".into()));
    }
    let hits = gold.iter().filter(|(id, g)| predictions[*id] == **g).count();
    Ok(hits as f64 / gold.len() as f64)
}

/// Per-sample correctness of one system.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectnessBitmap {
    pub system: String,
    pub correct: BTreeMap<String, bool>,
}

impl CorrectnessBitmap {
    pub fn from_predictions(
        system: impl Into<String>,
        predictions: &BTreeMap<String, usize>,
        gold: &BTreeMap<String, usize>,
    ) -> Result<Self> {
        let diff = symmetric_difference(predictions, gold);
        if !diff.is_empty() {
            return Err(Error::IdMismatch(diff));
        }
        Ok(Self {
            system: system.into(),
            correct: gold.iter().map(|(id, g)| (id.clone(), predictions[id] == *g)).collect(),
        })
    }

    pub fn hits(&self) -> usize {
        self.correct.values().filter(|&&c| c).count()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VennRegion {
    /// Single models correct on the samples of this region; empty for the
    /// none-correct region.
    pub members: Vec<String>,
    pub alpha: usize,
    pub beta: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VennReport {
    pub regions: Vec<VennRegion>,
}

impl VennReport {
    pub fn region(&self, members: &[&str]) -> Option<&VennRegion> {
        let want: BTreeSet<&str> = members.iter().copied().collect();
        self.regions.iter().find(|r| r.members.iter().map(String::as_str).collect::<BTreeSet<_>>() == want)
    }

    pub fn total(&self) -> usize {
        self.regions.iter().map(|r| r.alpha).sum()
    }
}

/// Region masks in display order: singletons, pairs, ..., all, then none.
fn region_order(n: usize) -> Vec<u32> {
    let mut masks: Vec<u32> = (1..1u32 << n).collect();
    let members = |m: u32| (0..n).filter(|i| m >> i & 1 == 1).collect::<Vec<_>>();
    masks.sort_by_key(|&m| (m.count_ones(), members(m)));
    masks.push(0);
    masks
}

/// Cross-tabulates single-model correctness with the ensemble's.
pub fn overlap_analysis(singles: &[CorrectnessBitmap], ensemble: &CorrectnessBitmap) -> Result<VennReport> {
    if singles.is_empty() || singles.len() > 16 {
        return Err(Error::InvalidInput(format!("{} single models; need 1 to 16", singles.len())));
    }
    for s in singles {
        let diff = symmetric_difference(&s.correct, &ensemble.correct);
        if !diff.is_empty() {
            return Err(Error::IdMismatch(diff));
        }
    }
    let mut counts = vec![(0usize, 0usize); 1 << singles.len()];
    for (id, &ens) in &ensemble.correct {
        let mask = singles.iter().enumerate().fold(0u32, |m, (i, s)| if s.correct[id] { m | 1 << i } else { m });
        let c = &mut counts[mask as usize];
        c.0 += 1;
        c.1 += usize::from(ens);
    }
    let regions = region_order(singles.len())
        .into_iter()
        .map(|m| VennRegion {
            members: (0..singles.len()).filter(|i| m >> i & 1 == 1).map(|i| singles[i].system.clone()).collect(),
            alpha: counts[m as usize].0,
            beta: counts[m as usize].1,
        })
        .collect();
    Ok(VennReport { regions })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemAccuracy {
    pub system: String,
    pub accuracy: f64,
    pub samples: usize,
}

/// Everything `evaluate` and `overlap` report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub accuracies: Vec<SystemAccuracy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<EnsembleWeights>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub venn: Option<VennReport>,
    /// Resolved configuration of the run that produced the report.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub config: serde_json::Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum ReportFormat {
    #[default]
    Text,
    Structured,
}

/// Deterministic rendering. The structured form is JSON and reads back with
/// [`parse_report`].
pub fn render_report(report: &EvaluationReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Structured => {
            serde_json::to_string_pretty(report).expect("report values are serializable") + "\n"
        }
        ReportFormat::Text => render_text(report),
    }
}

pub fn parse_report(text: &str) -> Result<EvaluationReport> {
    serde_json::from_str(text).map_err(|e| Error::Format(format!("report: {e}")))
}

fn render_text(report: &EvaluationReport) -> String {
    let mut out = String::new();
    if !report.accuracies.is_empty() {
        let width = report.accuracies.iter().map(|a| a.system.len()).max().unwrap_or(0).max(6);
        let _ = writeln!(out, "{:<width$}  {:>8}  {:>7}", "system", "accuracy", "samples");
        for a in &report.accuracies {
            let _ = writeln!(out, "{:<width$}  {:>7.2}%  {:>7}", a.system, 100.0 * a.accuracy, a.samples);
        }
    }
    if let Some(w) = &report.weights {
        if !out.is_empty() {
            out.push('\n');
        }
        let width = w.backends.iter().map(String::len).max().unwrap_or(0).max(7);
        let _ = writeln!(out, "{:<width$}  {:>8}  {:>10}", "backend", "weight", "normalized");
        for ((b, raw), norm) in w.backends.iter().zip(&w.weights).zip(w.normalized()) {
            let _ = writeln!(out, "{b:<width$}  {raw:>8.4}  {norm:>10.4}");
        }
    }
    if let Some(venn) = &report.venn {
        if !out.is_empty() {
            out.push('\n');
        }
        let label = |r: &VennRegion| {
            if r.members.is_empty() {
                "(none)".to_string()
            } else {
                r.members.join(" & ")
            }
        };
        let width = venn.regions.iter().map(|r| label(r).len()).max().unwrap_or(0).max(6);
        let _ = writeln!(out, "{:<width$}  alpha|beta", "region");
        for r in &venn.regions {
            let _ = writeln!(out, "{:<width$}  {}|{}", label(r), r.alpha, r.beta);
        }
    }
    out
}
