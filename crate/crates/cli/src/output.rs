//! JSON result documents and CSV tables.

use dfroute::experiments::{AgreementReport, RatioRow, SizeStats, TrialRecord};
use dfroute::{CandidateSet, CodewordMode, NnaOutcome, RateReport, Route, Strategy};
use serde::{Deserialize, Serialize};

/// Bumped on any incompatible change to [`ResultDocument`].
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub schema_version: u32,
    #[serde(flatten)]
    pub body: ResultBody,
}

impl ResultDocument {
    pub fn new(body: ResultBody) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            body,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("result documents serialize");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResultBody {
    Rate { report: RateReport },
    Search(SearchOutput),
    Sweep { rows: Vec<RatioRow> },
    Stats { rows: Vec<SizeStats> },
    Trials { records: Vec<TrialRow> },
    Agreement { report: AgreementReport },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Brute,
    Nna,
    Nnsa,
    Mspa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutput {
    pub algorithm: Algo,
    pub strategy: Strategy,
    pub mode: Option<CodewordMode>,
    /// One-line human summary.
    pub summary: String,
    pub best_routes: Vec<Route>,
    /// `None` when NNA terminated prematurely.
    pub max_rate: Option<f64>,
    pub routes_evaluated: usize,
    pub failed: Vec<Route>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<CandidateSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nna: Option<NnaOutcome>,
    /// Wall-clock seconds, present only when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_secs: Option<f64>,
}

/// Flat CSV row for candidate-set statistics. Medians are lower medians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub nodes: usize,
    pub trials: usize,
    pub route_count: u64,
    pub lower_median_candidates: f64,
    pub mean_candidates: f64,
    pub min_candidates: f64,
    pub max_candidates: f64,
    pub lower_median_ratio: f64,
    pub mean_ratio: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

impl From<&SizeStats> for StatsRow {
    fn from(s: &SizeStats) -> Self {
        Self {
            nodes: s.nodes,
            trials: s.trials,
            route_count: s.route_count,
            lower_median_candidates: s.candidates.median,
            mean_candidates: s.candidates.mean,
            min_candidates: s.candidates.min,
            max_candidates: s.candidates.max,
            lower_median_ratio: s.ratio.median,
            mean_ratio: s.ratio.mean,
            min_ratio: s.ratio.min,
            max_ratio: s.ratio.max,
        }
    }
}

/// Per-trial CSV row; wall-clock time is left out so output is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub nodes: usize,
    pub trial: usize,
    pub seed: u64,
    pub digest: String,
    pub rate_sh: Option<f64>,
    pub rate_mh: Option<f64>,
    pub rate_df: Option<f64>,
    pub candidates: Option<usize>,
}

impl From<&TrialRecord> for TrialRow {
    fn from(r: &TrialRecord) -> Self {
        Self {
            nodes: r.nodes,
            trial: r.trial,
            seed: r.seed,
            digest: r.digest.clone(),
            rate_sh: r.rates.map(|x| x.sh),
            rate_mh: r.rates.map(|x| x.mh),
            rate_df: r.rates.map(|x| x.df),
            candidates: r.candidates,
        }
    }
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
