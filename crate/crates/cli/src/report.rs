use std::path::Path;

use explain_core::explanation::Explanation;
use explain_core::pipeline::{Budget, RexConfig, StageTimings};
use explain_core::{Label, Outcome, Provenance};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Summary {
    pub file: String,
    pub label: Label,
    pub confidence: f64,
    pub size_px: usize,
    pub size_frac: f64,
    pub source: Provenance,
}

impl Summary {
    pub fn new(k: usize, e: &Explanation) -> Self {
        Self {
            file: mask_file_name(k),
            label: e.label,
            confidence: e.confidence,
            size_px: e.size(),
            size_frac: e.size_fraction(),
            source: e.source.clone(),
        }
    }
}

/// Wall-clock per stage in milliseconds.
#[derive(Debug, Serialize)]
pub struct Timings {
    pub rank_ms: f64,
    pub search_ms: f64,
    pub drain_ms: f64,
    pub recursive_ms: f64,
    pub extract_ms: f64,
    pub emission_ms: f64,
}

impl From<&StageTimings> for Timings {
    fn from(t: &StageTimings) -> Self {
        let ms = |d: std::time::Duration| d.as_secs_f64() * 1e3;
        Self {
            rank_ms: ms(t.rank),
            search_ms: ms(t.search),
            drain_ms: ms(t.drain),
            recursive_ms: ms(t.recursive),
            extract_ms: ms(t.extract),
            emission_ms: ms(t.emission),
        }
    }
}

/// Contents of `report.json`. Timings stay `null` unless requested so that
/// reruns are byte-identical.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub input: String,
    pub classifier: String,
    pub config: RexConfig,
    pub label: Label,
    pub confidence: f64,
    pub explanations: Vec<Summary>,
    pub calls: u64,
    pub budget: Budget,
    pub successful_searches: usize,
    pub timings: Option<Timings>,
    pub seed: u64,
}

impl RunReport {
    pub fn new(input: &Path, classifier: String, config: RexConfig, outcome: &Outcome, timings: bool) -> Self {
        Self {
            input: input.display().to_string(),
            classifier,
            config,
            label: outcome.verdict.label,
            confidence: outcome.verdict.confidence,
            explanations: outcome.explanations.iter().enumerate().map(|(k, e)| Summary::new(k, e)).collect(),
            calls: outcome.budget.total,
            budget: outcome.budget.clone(),
            successful_searches: outcome.successful_searches,
            timings: timings.then(|| Timings::from(&outcome.timings)),
            seed: config.seed,
        }
    }
}

pub fn mask_file_name(k: usize) -> String {
    format!("explanation_{k}.pbm")
}
