//! Seeded Monte Carlo studies: rate-ratio sweeps on line routes, NNSA
//! candidate-set statistics on square networks, and agreement of the search
//! heuristics with brute force.
//!
//! Randomness comes from ChaCha8 seeded per trial with [`trial_seed`], after
//! first mixing the node count into the run seed. Any trial can be
//! regenerated alone and results do not depend on `jobs`.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::network::{Network, NetworkError, NodeSpec};
use crate::rate::{self, CodewordMode, RateError, Route, Strategy};
use crate::search::{self, NnaOutcome, SearchError};

/// Attempts before coincident-node rejection sampling gives up.
pub const MAX_GENERATION_ATTEMPTS: usize = 100;

/// Largest node count for candidate-set statistics (|Π(S)| must be
/// enumerable for the ratio to mean anything).
pub const MAX_STATS_NODES: usize = 12;

/// Largest node count for brute-force agreement trials.
pub const MAX_AGREEMENT_NODES: usize = 7;

/// Relative tolerance for exact (independent-codeword) agreement.
pub const EXACT_AGREEMENT_TOL: f64 = 1e-12;

/// Absolute tolerance for agreement under optimized splits.
pub const CORRELATED_AGREEMENT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("could not place {nodes} separated nodes in {attempts} attempts")]
    Generation { nodes: usize, attempts: usize },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Search(#[from] SearchError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RatioSweep,
    NnsaStats,
    OracleAgreement,
}

/// End-to-end length of a generated line route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineSpacing {
    /// Fixed length in meters (case 1 uses 10).
    Fixed(f64),
    /// One meter per hop of the full route: `|M| - 1` (case 2).
    PerHop,
}

impl LineSpacing {
    pub fn length(self, route_len: usize) -> f64 {
        match self {
            Self::Fixed(d) => d,
            Self::PerHop => (route_len - 1) as f64,
        }
    }

    /// Case 1 or case 2 of the line study.
    pub fn from_case(case: u8) -> Option<Self> {
        match case {
            1 => Some(Self::Fixed(10.0)),
            2 => Some(Self::PerHop),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub node_counts: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub spacing: LineSpacing,
    /// Side of the square area for random networks, in meters.
    pub side: f64,
    pub mode: CodewordMode,
    /// Worker threads; 0 or 1 runs on the calling thread. Output is
    /// identical either way.
    pub jobs: usize,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, node_counts: Vec<usize>, trials: usize, seed: u64) -> Self {
        Self {
            kind,
            node_counts,
            trials,
            seed,
            spacing: LineSpacing::Fixed(10.0),
            side: 1.0,
            mode: CodewordMode::Independent,
            jobs: 1,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidConfig(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.node_counts.is_empty() {
            return bad("no node counts given".into());
        }
        if let Some(&d) = self.node_counts.iter().find(|&&d| d < 2) {
            return bad(format!("node count {d} is below 2"));
        }
        if !(self.side.is_finite() && self.side > 0.0) {
            return bad("area side must be positive".into());
        }
        if let LineSpacing::Fixed(d) = self.spacing {
            if !(d.is_finite() && d > 0.0) {
                return bad("line length must be positive".into());
            }
        }
        let limit = match self.kind {
            ExperimentKind::RatioSweep => {
                if self.mode != CodewordMode::Independent {
                    return bad("ratio sweeps use independent codewords".into());
                }
                None
            }
            ExperimentKind::NnsaStats => Some(MAX_STATS_NODES),
            ExperimentKind::OracleAgreement => Some(MAX_AGREEMENT_NODES),
        };
        if let Some(limit) = limit {
            if let Some(&d) = self.node_counts.iter().find(|&&d| d > limit) {
                return bad(format!("node count {d} exceeds the limit of {limit}"));
            }
        }
        Ok(())
    }

    fn run_trials<T, F>(&self, f: F) -> Result<Vec<T>, ExperimentError>
    where
        T: Send,
        F: Fn(usize) -> Result<T, ExperimentError> + Sync,
    {
        if self.jobs <= 1 {
            return (0..self.trials).map(f).collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
        pool.install(|| (0..self.trials).into_par_iter().map(&f).collect())
    }
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `splitmix64(seed ^ splitmix64(trial))`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    splitmix64(seed ^ splitmix64(trial as u64))
}

/// Per-trial seed that also separates node counts within one run.
fn point_seed(seed: u64, nodes: usize, trial: usize) -> u64 {
    trial_seed(splitmix64(seed ^ (nodes as u64).rotate_left(32)), trial)
}

/// `d` nodes uniform on the unit square with unit powers, κ = 1, η = 2.
pub fn gen_square_network(d: usize, seed: u64) -> Result<Network, ExperimentError> {
    gen_square_network_with(d, 1.0, seed)
}

pub fn gen_square_network_with(d: usize, side: f64, seed: u64) -> Result<Network, ExperimentError> {
    if d < 2 {
        return Err(NetworkError::TooFewNodes(d).into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let pos: Vec<(f64, f64)> = (0..d)
            .map(|_| (rng.gen_range(0.0..side), rng.gen_range(0.0..side)))
            .collect();
        match Network::with_unit_powers(&pos, 1.0, 2.0) {
            Ok(net) => return Ok(net),
            Err(NetworkError::CoincidentNodes(..)) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(ExperimentError::Generation {
        nodes: d,
        attempts: MAX_GENERATION_ATTEMPTS,
    })
}

/// A straight-line route of `n` nodes from (0,0) to (`length`,0) with the
/// interior nodes uniform on the segment. Ids follow the x order, so the
/// route is `{1, 2, ..., n}`.
pub fn gen_line_route(n: usize, length: f64, seed: u64) -> Result<(Network, Route), ExperimentError> {
    if n < 2 {
        return Err(NetworkError::TooFewNodes(n).into());
    }
    if !(length.is_finite() && length > 0.0) {
        return Err(ExperimentError::InvalidConfig("line length must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let xs: Vec<f64> = (0..n - 2).map(|_| rng.gen_range(0.0..length)).collect();
        match line_route(&xs, length) {
            Ok(out) => return Ok(out),
            Err(ExperimentError::Network(NetworkError::CoincidentNodes(..))) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(ExperimentError::Generation {
        nodes: n,
        attempts: MAX_GENERATION_ATTEMPTS,
    })
}

/// Line route with the given interior offsets (any order) between endpoints
/// at 0 and `length`.
pub fn line_route(interior: &[f64], length: f64) -> Result<(Network, Route), ExperimentError> {
    let mut xs = interior.to_vec();
    xs.sort_by(f64::total_cmp);
    let mut pos = Vec::with_capacity(xs.len() + 2);
    pos.push((0.0, 0.0));
    pos.extend(xs.iter().map(|&x| (x, 0.0)));
    pos.push((length, 0.0));
    let net = Network::with_unit_powers(&pos, 1.0, 2.0)?;
    let route = Route::new(&net, (1..=net.len()).collect()).map_err(RateError::from)?;
    Ok((net, route))
}

/// Hex SHA-256 of the network's constants and node records.
pub fn network_digest(net: &Network) -> String {
    let mut h = Sha256::new();
    h.update(net.kappa().to_le_bytes());
    h.update(net.eta().to_le_bytes());
    for n in net.nodes() {
        h.update((n.id as u64).to_le_bytes());
        for v in [n.x, n.y, n.transmit_power, n.noise_power] {
            h.update(v.to_le_bytes());
        }
    }
    let mut out = String::with_capacity(64);
    for b in h.finalize() {
        write!(out, "{b:02x}").unwrap();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyRates {
    pub sh: f64,
    pub mh: f64,
    pub df: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub nodes: usize,
    pub digest: String,
    pub rates: Option<StrategyRates>,
    pub candidates: Option<usize>,
    /// Wall-clock seconds; not part of any deterministic output.
    pub elapsed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub route_len: usize,
    pub trials: usize,
    pub mean_sh: f64,
    pub mean_mh: f64,
    pub mean_df: f64,
    pub df_over_sh: f64,
    pub df_over_mh: f64,
    pub mh_over_sh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSweep {
    pub rows: Vec<RatioRow>,
    pub records: Vec<TrialRecord>,
}

/// Ratios of average SH, MH and independent-codeword DF rates on random line
/// routes, one row per route length.
pub fn ratio_sweep(cfg: &ExperimentConfig) -> Result<RatioSweep, ExperimentError> {
    cfg.validate()?;
    if cfg.kind != ExperimentKind::RatioSweep {
        return Err(ExperimentError::InvalidConfig("expected a ratio sweep".into()));
    }
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for &n in &cfg.node_counts {
        let length = cfg.spacing.length(n);
        let batch = cfg.run_trials(|trial| {
            let started = Instant::now();
            let seed = point_seed(cfg.seed, n, trial);
            let (net, route) = gen_line_route(n, length, seed)?;
            let rates = StrategyRates {
                sh: rate::rate_sh(&net).supported_rate,
                mh: rate::rate_mh(&net, &route).supported_rate,
                df: rate::rate_df_independent(&net, &route).supported_rate,
            };
            Ok(TrialRecord {
                trial,
                seed,
                nodes: n,
                digest: network_digest(&net),
                rates: Some(rates),
                candidates: None,
                elapsed: started.elapsed().as_secs_f64(),
            })
        })?;
        let count = batch.len() as f64;
        let mean = |f: fn(&StrategyRates) -> f64| {
            batch.iter().map(|r| f(r.rates.as_ref().unwrap())).sum::<f64>() / count
        };
        let (sh, mh, df) = (mean(|r| r.sh), mean(|r| r.mh), mean(|r| r.df));
        rows.push(RatioRow {
            route_len: n,
            trials: batch.len(),
            mean_sh: sh,
            mean_mh: mh,
            mean_df: df,
            df_over_sh: df / sh,
            df_over_mh: df / mh,
            mh_over_sh: mh / sh,
        });
        records.extend(batch);
    }
    Ok(RatioSweep { rows, records })
}

/// Distribution summary. `median` is the lower median.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Distribution {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            median: v[(v.len() - 1) / 2],
            min: v[0],
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeStats {
    pub nodes: usize,
    pub trials: usize,
    /// |Π(S)|, the denominator of `ratio`.
    pub route_count: u64,
    pub candidates: Distribution,
    pub ratio: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub rows: Vec<SizeStats>,
    pub records: Vec<TrialRecord>,
}

/// NNSA candidate-set size relative to the full route space on random
/// square networks.
pub fn nnsa_size_stats(cfg: &ExperimentConfig) -> Result<SummaryStats, ExperimentError> {
    cfg.validate()?;
    if cfg.kind != ExperimentKind::NnsaStats {
        return Err(ExperimentError::InvalidConfig("expected candidate-set statistics".into()));
    }
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for &d in &cfg.node_counts {
        let batch = cfg.run_trials(|trial| {
            let started = Instant::now();
            let seed = point_seed(cfg.seed, d, trial);
            let net = gen_square_network_with(d, cfg.side, seed)?;
            let cands = search::run_nnsa(&net);
            Ok(TrialRecord {
                trial,
                seed,
                nodes: d,
                digest: network_digest(&net),
                rates: None,
                candidates: Some(cands.len()),
                elapsed: started.elapsed().as_secs_f64(),
            })
        })?;
        let total = search::route_count(d) as u64;
        let sizes: Vec<f64> = batch.iter().map(|r| r.candidates.unwrap() as f64).collect();
        let ratios: Vec<f64> = sizes.iter().map(|&s| s / total as f64).collect();
        rows.push(SizeStats {
            nodes: d,
            trials: batch.len(),
            route_count: total,
            candidates: Distribution::of(&sizes).unwrap(),
            ratio: Distribution::of(&ratios).unwrap(),
        });
        records.extend(batch);
    }
    Ok(SummaryStats { rows, records })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Nna,
    Nnsa,
    Mspa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub algorithm: Algorithm,
    pub route: Route,
    pub expected: f64,
    pub found: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementTrial {
    /// Trial index, or `None` for an injected fixture.
    pub trial: Option<usize>,
    pub seed: Option<u64>,
    pub digest: String,
    pub brute_max: f64,
    pub nnsa_best: f64,
    pub mspa: f64,
    /// `None` when NNA terminated prematurely.
    pub nna: Option<f64>,
    pub disagreements: Vec<Disagreement>,
    /// Full node list, kept only when a disagreement occurred.
    pub counterexample: Option<Vec<NodeSpec>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub mode: CodewordMode,
    pub trials: Vec<AgreementTrial>,
    pub nna_completed: usize,
}

impl AgreementReport {
    pub fn disagreements(&self, algorithm: Algorithm) -> usize {
        self.trials
            .iter()
            .flat_map(|t| &t.disagreements)
            .filter(|d| d.algorithm == algorithm)
            .count()
    }
}

/// Compares NNA (when it completes), the best NNSA candidate and the MSPA
/// route against brute force on random square networks. `fixtures` are
/// evaluated first, outside the seeded population.
pub fn oracle_agreement_trials(
    cfg: &ExperimentConfig,
    fixtures: &[Network],
) -> Result<AgreementReport, ExperimentError> {
    cfg.validate()?;
    if cfg.kind != ExperimentKind::OracleAgreement {
        return Err(ExperimentError::InvalidConfig("expected agreement trials".into()));
    }
    let mut trials = Vec::new();
    for net in fixtures {
        trials.push(agreement_trial(net, cfg.mode, None, None)?);
    }
    for &d in &cfg.node_counts {
        trials.extend(cfg.run_trials(|trial| {
            let seed = point_seed(cfg.seed, d, trial);
            let net = gen_square_network_with(d, cfg.side, seed)?;
            agreement_trial(&net, cfg.mode, Some(trial), Some(seed))
        })?);
    }
    let nna_completed = trials.iter().filter(|t| t.nna.is_some()).count();
    Ok(AgreementReport {
        mode: cfg.mode,
        trials,
        nna_completed,
    })
}

pub fn agrees(expected: f64, found: f64, mode: CodewordMode) -> bool {
    match mode {
        CodewordMode::Independent => (expected - found).abs() <= EXACT_AGREEMENT_TOL * expected.abs(),
        CodewordMode::Correlated => (expected - found).abs() <= CORRELATED_AGREEMENT_TOL,
    }
}

fn agreement_trial(
    net: &Network,
    mode: CodewordMode,
    trial: Option<usize>,
    seed: Option<u64>,
) -> Result<AgreementTrial, ExperimentError> {
    let brute = search::brute_force_optimum(net, Strategy::DecodeForward, mode)?;
    let best = search::best_candidates(net, &search::run_nnsa(net), mode)?;
    let mspa_route = search::run_mspa(net);
    let mspa = rate::rate_df(net, &mspa_route, mode)?.supported_rate;
    let nna = match search::run_nna(net) {
        NnaOutcome::Completed { route } => Some((rate::rate_df(net, &route, mode)?.supported_rate, route)),
        NnaOutcome::Premature { .. } => None,
    };

    let mut disagreements = Vec::new();
    let mut check = |algorithm, route: &Route, found: f64| {
        if !agrees(brute.max_rate, found, mode) {
            disagreements.push(Disagreement {
                algorithm,
                route: route.clone(),
                expected: brute.max_rate,
                found,
            });
        }
    };
    check(Algorithm::Nnsa, &best.best_routes[0], best.max_rate);
    check(Algorithm::Mspa, &mspa_route, mspa);
    if let Some((rate, route)) = &nna {
        check(Algorithm::Nna, route, *rate);
    }
    let counterexample = (!disagreements.is_empty()).then(|| net.nodes().to_vec());
    Ok(AgreementTrial {
        trial,
        seed,
        digest: network_digest(net),
        brute_max: brute.max_rate,
        nnsa_best: best.max_rate,
        mspa,
        nna: nna.map(|(r, _)| r),
        disagreements,
        counterexample,
    })
}
