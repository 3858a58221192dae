//! Achievable rates of single-hop, multi-hop and decode-and-forward coding on
//! a route.
//!
//! Rates are in bits per (real) channel use: `0.5 * log2(1 + snr)`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Network, NodeId};
use crate::splits;

/// Default convergence tolerance on the rate objective for correlated
/// decode-and-forward.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RouteError {
    #[error("a route needs at least 2 nodes, got {0}")]
    TooShort(usize),
    #[error("route must start at the source (node 1), starts at {0}")]
    WrongSource(NodeId),
    #[error("route must end at the destination (node {expected}), ends at {found}")]
    WrongDestination { expected: NodeId, found: NodeId },
    #[error("node {0} appears more than once in the route")]
    Duplicate(NodeId),
    #[error("route references unknown node {0}")]
    UnknownId(NodeId),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error("route position {position} is outside 2..={len}")]
    PositionOutOfRange { position: usize, len: usize },
    #[error("invalid power split: {0}")]
    InvalidSplit(String),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("power-split optimization did not converge after {iterations} Newton steps")]
    DidNotConverge {
        iterations: usize,
        /// Best split found and its report.
        best: Box<RateReport>,
    },
}

/// An ordered, duplicate-free node sequence from the source to the
/// destination.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Route(Vec<NodeId>);

impl Route {
    pub fn new(net: &Network, nodes: Vec<NodeId>) -> Result<Self, RouteError> {
        if nodes.len() < 2 {
            return Err(RouteError::TooShort(nodes.len()));
        }
        let mut seen = vec![false; net.len() + 1];
        for &id in &nodes {
            if !net.contains(id) {
                return Err(RouteError::UnknownId(id));
            }
            if seen[id] {
                return Err(RouteError::Duplicate(id));
            }
            seen[id] = true;
        }
        if nodes[0] != net.source() {
            return Err(RouteError::WrongSource(nodes[0]));
        }
        let last = *nodes.last().unwrap();
        if last != net.destination() {
            return Err(RouteError::WrongDestination {
                expected: net.destination(),
                found: last,
            });
        }
        Ok(Self(nodes))
    }

    /// The direct route `{1, D}`.
    pub fn direct(net: &Network) -> Self {
        Self(vec![net.source(), net.destination()])
    }

    /// Wraps a sequence the caller has already checked.
    pub(crate) fn from_trusted(nodes: Vec<NodeId>) -> Self {
        Self(nodes)
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Node at 1-based route position.
    #[inline]
    pub fn at(&self, position: usize) -> NodeId {
        self.0[position - 1]
    }

    pub fn into_inner(self) -> Vec<NodeId> {
        self.0
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, id) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{id}")?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    SingleHop,
    MultiHop,
    DecodeForward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodewordMode {
    /// All power on the next hop's sub-codeword.
    Independent,
    /// Free power splits across all downstream sub-codewords.
    Correlated,
}

/// Power-split coefficients `alpha[i][j]` for route positions `1 <= i < j <= len`.
///
/// Transmitter at position `i` spends fraction `alpha[i][j]` of its power on
/// the sub-codeword first decoded at position `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSplit {
    route_len: usize,
    alpha: Vec<f64>,
}

impl PowerSplit {
    /// All-zero split for a route of `route_len` nodes.
    pub fn zeros(route_len: usize) -> Self {
        Self {
            route_len,
            alpha: vec![0.0; pair_count(route_len)],
        }
    }

    /// Next-hop-only split used with independent codewords.
    pub fn independent(route_len: usize) -> Self {
        let mut s = Self::zeros(route_len);
        for i in 1..route_len {
            s.set(i, i + 1, 1.0);
        }
        s
    }

    pub fn route_len(&self) -> usize {
        self.route_len
    }

    #[inline]
    pub(crate) fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(1 <= i && i < j && j <= self.route_len);
        let m = self.route_len;
        // rows 1..i-1 hold (m-1) + (m-2) + ... + (m-i+1) entries
        (i - 1) * m - (i - 1) * i / 2 + (j - i - 1)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.alpha[self.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.index(i, j);
        self.alpha[k] = value;
    }

    /// Coefficients in row-major order: (1,2), (1,3), ..., (2,3), ...
    pub fn as_slice(&self) -> &[f64] {
        &self.alpha
    }

    pub(crate) fn from_raw(route_len: usize, alpha: Vec<f64>) -> Self {
        debug_assert_eq!(alpha.len(), pair_count(route_len));
        Self { route_len, alpha }
    }

    /// Total fraction used by the transmitter at position `i`.
    pub fn row_sum(&self, i: usize) -> f64 {
        (i + 1..=self.route_len).map(|j| self.get(i, j)).sum()
    }

    pub fn validate(&self) -> Result<(), RateError> {
        if self.alpha.len() != pair_count(self.route_len) {
            return Err(RateError::InvalidSplit("coefficient count mismatch".into()));
        }
        if let Some(a) = self.alpha.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(RateError::InvalidSplit(format!("coefficient {a} is not in [0, 1]")));
        }
        for i in 1..self.route_len {
            let sum = self.row_sum(i);
            if sum > 1.0 + 1e-12 {
                return Err(RateError::InvalidSplit(format!(
                    "transmitter at position {i} uses {sum} of its power"
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn pair_count(route_len: usize) -> usize {
    route_len * route_len.saturating_sub(1) / 2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceptionRate {
    /// 1-based route position (2 ..= len).
    pub position: usize,
    pub node: NodeId,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub route: Route,
    pub strategy: Strategy,
    /// Set for decode-and-forward only.
    pub mode: Option<CodewordMode>,
    pub per_node: Vec<ReceptionRate>,
    /// Route position of the smallest reception rate (first on ties).
    pub bottleneck: usize,
    pub supported_rate: f64,
    /// Set for decode-and-forward only.
    pub splits: Option<PowerSplit>,
}

impl RateReport {
    fn from_rates(
        route: &Route,
        strategy: Strategy,
        mode: Option<CodewordMode>,
        rates: Vec<f64>,
        splits: Option<PowerSplit>,
    ) -> Self {
        let mut bottleneck = 2;
        let mut supported = f64::INFINITY;
        let per_node = rates
            .into_iter()
            .enumerate()
            .map(|(k, rate)| {
                let position = k + 2;
                if rate < supported {
                    supported = rate;
                    bottleneck = position;
                }
                ReceptionRate {
                    position,
                    node: route.at(position),
                    rate,
                }
            })
            .collect();
        Self {
            route: route.clone(),
            strategy,
            mode,
            per_node,
            bottleneck,
            supported_rate: supported,
            splits,
        }
    }

    /// Reception rate at a 1-based route position.
    pub fn rate_at(&self, position: usize) -> Option<f64> {
        position
            .checked_sub(2)
            .and_then(|k| self.per_node.get(k))
            .map(|r| r.rate)
    }
}

/// Gaussian capacity, bits per real channel use.
#[inline]
pub fn awgn_rate(snr: f64) -> f64 {
    0.5 * snr.ln_1p() / std::f64::consts::LN_2
}

fn check_position(route: &Route, t: usize) -> Result<(), RateError> {
    if t < 2 || t > route.len() {
        return Err(RateError::PositionOutOfRange {
            position: t,
            len: route.len(),
        });
    }
    Ok(())
}

/// SNR of the direct source-to-destination link.
pub fn sh_snr(net: &Network) -> f64 {
    let d = net.destination();
    net.power(1, d) / net.noise(d)
}

pub fn rate_sh(net: &Network) -> RateReport {
    let route = Route::direct(net);
    RateReport::from_rates(
        &route,
        Strategy::SingleHop,
        None,
        vec![awgn_rate(sh_snr(net))],
        None,
    )
}

/// Multi-hop SNR at route position `t`.
///
/// The receiver decodes only its predecessor. Every other route transmitter
/// except the receiver itself counts as interference; off-route nodes are
/// silent.
pub fn mh_snr(net: &Network, route: &Route, t: usize) -> Result<f64, RateError> {
    check_position(route, t)?;
    Ok(mh_snr_unchecked(net, route, t))
}

fn mh_snr_unchecked(net: &Network, route: &Route, t: usize) -> f64 {
    let rx = route.at(t);
    let signal = net.power(route.at(t - 1), rx);
    let interference: f64 = (1..route.len())
        .filter(|&i| i != t - 1 && i != t)
        .map(|i| net.power(route.at(i), rx))
        .sum();
    signal / (interference + net.noise(rx))
}

pub fn rate_mh(net: &Network, route: &Route) -> RateReport {
    let rates = (2..=route.len())
        .map(|t| awgn_rate(mh_snr_unchecked(net, route, t)))
        .collect();
    RateReport::from_rates(route, Strategy::MultiHop, None, rates, None)
}

/// Decode-and-forward SNR at route position `t` under the given split:
///
/// `N^-1 * sum_{j=2..=t} ( sum_{i<j} sqrt(alpha_ij * P_{m_i m_t}) )^2`
///
/// Every sub-codeword block up to `t` contributes, not only block `t`.
pub fn df_snr(net: &Network, route: &Route, splits: &PowerSplit, t: usize) -> Result<f64, RateError> {
    check_position(route, t)?;
    if splits.route_len() != route.len() {
        return Err(RateError::InvalidSplit(format!(
            "split is for a {}-node route, route has {} nodes",
            splits.route_len(),
            route.len()
        )));
    }
    splits.validate()?;
    Ok(df_snr_unchecked(net, route, splits, t))
}

pub(crate) fn df_snr_unchecked(net: &Network, route: &Route, splits: &PowerSplit, t: usize) -> f64 {
    let rx = route.at(t);
    let mut total = 0.0;
    for j in 2..=t {
        let amplitude: f64 = (1..j)
            .map(|i| (splits.get(i, j) * net.power(route.at(i), rx)).sqrt())
            .sum();
        total += amplitude * amplitude;
    }
    total / net.noise(rx)
}

/// Reception SNR at position `t` with independent codewords: every upstream
/// route node's received power adds up.
pub fn df_independent_snr(net: &Network, route: &Route, t: usize) -> Result<f64, RateError> {
    check_position(route, t)?;
    Ok(df_independent_snr_unchecked(net, route, t))
}

fn df_independent_snr_unchecked(net: &Network, route: &Route, t: usize) -> f64 {
    let rx = route.at(t);
    let mut sum = 0.0;
    for i in 1..t {
        sum += net.power(route.at(i), rx);
    }
    sum / net.noise(rx)
}

pub fn rate_df_independent(net: &Network, route: &Route) -> RateReport {
    let rates = (2..=route.len())
        .map(|t| awgn_rate(df_independent_snr_unchecked(net, route, t)))
        .collect();
    RateReport::from_rates(
        route,
        Strategy::DecodeForward,
        Some(CodewordMode::Independent),
        rates,
        Some(PowerSplit::independent(route.len())),
    )
}

/// Report for decode-and-forward under an explicit split.
pub fn rate_df_with_splits(
    net: &Network,
    route: &Route,
    splits: &PowerSplit,
) -> Result<RateReport, RateError> {
    if splits.route_len() != route.len() {
        return Err(RateError::InvalidSplit("split/route length mismatch".into()));
    }
    splits.validate()?;
    let rates = (2..=route.len())
        .map(|t| awgn_rate(df_snr_unchecked(net, route, splits, t)))
        .collect();
    Ok(RateReport::from_rates(
        route,
        Strategy::DecodeForward,
        Some(CodewordMode::Correlated),
        rates,
        Some(splits.clone()),
    ))
}

/// Max-min optimal power splits for correlated codewords.
///
/// Every transmitter's split sums to one in the returned report. The
/// supported rate is within `tol` of the global optimum.
pub fn optimize_splits(net: &Network, route: &Route, tol: f64) -> Result<RateReport, RateError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(RateError::BadTolerance(tol));
    }
    let outcome = splits::maximize_min_snr(net, route, tol);
    let report = rate_df_with_splits(net, route, &outcome.splits)?;
    if outcome.converged {
        Ok(report)
    } else {
        Err(RateError::DidNotConverge {
            iterations: outcome.newton_steps,
            best: Box::new(report),
        })
    }
}

/// Decode-and-forward rate on `route`, with the power split chosen by `mode`.
pub fn rate_df(net: &Network, route: &Route, mode: CodewordMode) -> Result<RateReport, RateError> {
    match mode {
        CodewordMode::Independent => Ok(rate_df_independent(net, route)),
        CodewordMode::Correlated => optimize_splits(net, route, DEFAULT_TOLERANCE),
    }
}

/// Rate of `route` under `strategy`. Single-hop ignores the route.
pub fn rate(
    net: &Network,
    route: &Route,
    strategy: Strategy,
    mode: CodewordMode,
) -> Result<RateReport, RateError> {
    match strategy {
        Strategy::SingleHop => Ok(rate_sh(net)),
        Strategy::MultiHop => Ok(rate_mh(net, route)),
        Strategy::DecodeForward => rate_df(net, route, mode),
    }
}
