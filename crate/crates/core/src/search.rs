//! Route search: exhaustive enumeration, the nearest-neighbor chain (NNA),
//! nearest-neighbor-set branching (NNSA), the maximum sum-of-received-power
//! greedy heuristic (MSPA), and pruning of optimal routes.

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Network, NodeId};
use crate::rate::{
    self, awgn_rate, CodewordMode, RateError, RateReport, Route, Strategy, DEFAULT_TOLERANCE,
};

/// Relative tolerance for comparing received powers.
pub const DOMINANCE_TOLERANCE: f64 = 1e-12;

/// Largest network brute force accepts without an explicit override.
pub const MAX_BRUTE_FORCE_NODES: usize = 12;

/// Relative tolerance under which two exact (closed-form) route rates tie.
pub const EXACT_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("brute force over {nodes} nodes exceeds the {limit}-node limit")]
    TooLarge { nodes: usize, limit: usize },
    #[error("every node is already on the partial route")]
    EmptyRemainder,
    #[error("partial route is invalid: {0}")]
    InvalidPrefix(String),
    #[error("route supports {rate}, below the target {target}")]
    TargetUnreachable { target: f64, rate: f64 },
    #[error("candidate set is empty")]
    NoCandidates,
    #[error("no candidate could be evaluated")]
    AllCandidatesFailed,
    #[error(transparent)]
    Rate(#[from] RateError),
}

/// Number of routes in the full search space of a `d`-node network:
/// `sum_{k=0}^{d-2} (d-2)! / (d-2-k)!`.
pub fn route_count(d: usize) -> u128 {
    if d < 2 {
        return 0;
    }
    let relays = (d - 2) as u128;
    let mut total = 0u128;
    let mut term = 1u128;
    for k in 0..=relays {
        total += term;
        term *= relays - k;
    }
    total
}

/// Every route from source to destination, shortest first, lexicographic
/// within a length.
pub fn enumerate_routes(net: &Network) -> impl Iterator<Item = Route> + '_ {
    let d = net.destination();
    let relays: Vec<NodeId> = (2..d).collect();
    (0..=relays.len()).flat_map(move |k| {
        relays.clone().into_iter().permutations(k).map(move |mid| {
            let mut ids = Vec::with_capacity(k + 2);
            ids.push(1);
            ids.extend(mid);
            ids.push(d);
            Route::from_trusted(ids)
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Every route attaining `max_rate`, shortest first, then lexicographic.
    pub best_routes: Vec<Route>,
    pub max_rate: f64,
    pub strategy: Strategy,
    pub mode: Option<CodewordMode>,
    pub routes_evaluated: usize,
    /// Routes whose rate could not be computed (optimizer failures); they are
    /// excluded from the argmax.
    pub failed: Vec<Route>,
}

/// Keeps every route within the tie tolerance of the running maximum.
struct ArgmaxSet {
    best: Vec<(Route, f64)>,
    max: f64,
    abs_tol: f64,
}

impl ArgmaxSet {
    fn new(abs_tol: f64) -> Self {
        Self {
            best: Vec::new(),
            max: f64::NEG_INFINITY,
            abs_tol,
        }
    }

    fn tol(&self, max: f64) -> f64 {
        (EXACT_TIE_TOLERANCE * max.abs()).max(self.abs_tol)
    }

    fn offer(&mut self, route: impl FnOnce() -> Route, rate: f64) {
        if rate > self.max {
            self.max = rate;
            let floor = self.max - self.tol(self.max);
            self.best.retain(|(_, r)| *r >= floor);
            self.best.push((route(), rate));
        } else if rate >= self.max - self.tol(self.max) {
            self.best.push((route(), rate));
        }
    }

    fn finish(mut self) -> (Vec<Route>, f64) {
        self.best
            .sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
        (self.best.into_iter().map(|(r, _)| r).collect(), self.max)
    }
}

fn tie_tolerance(strategy: Strategy, mode: CodewordMode) -> f64 {
    match (strategy, mode) {
        (Strategy::DecodeForward, CodewordMode::Correlated) => DEFAULT_TOLERANCE,
        _ => 0.0,
    }
}

/// Exact optimum over every route. Refuses networks above
/// [`MAX_BRUTE_FORCE_NODES`].
pub fn brute_force_optimum(
    net: &Network,
    strategy: Strategy,
    mode: CodewordMode,
) -> Result<SearchResult, SearchError> {
    brute_force_optimum_with(net, strategy, mode, false)
}

pub fn brute_force_optimum_with(
    net: &Network,
    strategy: Strategy,
    mode: CodewordMode,
    allow_large: bool,
) -> Result<SearchResult, SearchError> {
    if net.len() > MAX_BRUTE_FORCE_NODES && !allow_large {
        return Err(SearchError::TooLarge {
            nodes: net.len(),
            limit: MAX_BRUTE_FORCE_NODES,
        });
    }
    let report_mode = (strategy == Strategy::DecodeForward).then_some(mode);
    let mut argmax = ArgmaxSet::new(tie_tolerance(strategy, mode));
    let mut failed = Vec::new();
    let mut evaluated = 0;
    match (strategy, mode) {
        (Strategy::SingleHop, _) => {
            evaluated = 1;
            let rate = rate::rate_sh(net).supported_rate;
            argmax.offer(|| Route::direct(net), rate);
        }
        (Strategy::DecodeForward, CodewordMode::Independent) => {
            let mut walker = PrefixWalker {
                net,
                argmax: &mut argmax,
                evaluated: 0,
            };
            walker.run();
            evaluated = walker.evaluated;
        }
        _ => {
            for route in enumerate_routes(net) {
                evaluated += 1;
                match rate::rate(net, &route, strategy, mode) {
                    Ok(rep) => argmax.offer(|| route, rep.supported_rate),
                    Err(_) => failed.push(route),
                }
            }
        }
    }
    let (best_routes, max_rate) = argmax.finish();
    Ok(SearchResult {
        best_routes,
        max_rate,
        strategy,
        mode: report_mode,
        routes_evaluated: evaluated,
        failed,
    })
}

/// Depth-first walk over route prefixes for independent-codeword DF.
///
/// A node's reception rate depends only on the nodes ahead of it, so each
/// prefix carries the running power sums at every unused node and the
/// minimum reception rate so far. Sums accumulate in route order, which keeps
/// results bit-identical to evaluating each route from scratch.
struct PrefixWalker<'a> {
    net: &'a Network,
    argmax: &'a mut ArgmaxSet,
    evaluated: usize,
}

impl PrefixWalker<'_> {
    fn run(&mut self) {
        let d = self.net.destination();
        let mut sums = vec![0.0; d + 1];
        for (t, s) in sums.iter_mut().enumerate().skip(2) {
            *s += self.net.power(1, t);
        }
        let mut used = vec![false; d + 1];
        used[1] = true;
        let mut prefix = vec![1];
        self.walk(&mut prefix, &mut used, &sums, f64::INFINITY);
    }

    fn walk(&mut self, prefix: &mut Vec<NodeId>, used: &mut [bool], sums: &[f64], prefix_min: f64) {
        let net = self.net;
        let d = net.destination();
        self.evaluated += 1;
        let dest_rate = awgn_rate(sums[d] / net.noise(d));
        let route_rate = if dest_rate < prefix_min { dest_rate } else { prefix_min };
        self.argmax.offer(
            || {
                let mut ids = prefix.clone();
                ids.push(d);
                Route::from_trusted(ids)
            },
            route_rate,
        );
        for relay in 2..d {
            if used[relay] {
                continue;
            }
            let relay_rate = awgn_rate(sums[relay] / net.noise(relay));
            let next_min = if relay_rate < prefix_min { relay_rate } else { prefix_min };
            let mut next = sums.to_vec();
            for (t, s) in next.iter_mut().enumerate().skip(2) {
                if !used[t] && t != relay {
                    *s += net.power(relay, t);
                }
            }
            used[relay] = true;
            prefix.push(relay);
            self.walk(prefix, used, &next, next_min);
            prefix.pop();
            used[relay] = false;
        }
    }
}

/// True if `n` dominates `a` as seen from every node of `prefix`: never
/// weaker, and strictly stronger from at least one prefix node.
pub fn dominates(net: &Network, prefix: &[NodeId], n: NodeId, a: NodeId) -> bool {
    let mut strict = false;
    for &m in prefix {
        let (pn, pa) = (net.power(m, n), net.power(m, a));
        if pn < pa * (1.0 - DOMINANCE_TOLERANCE) {
            return false;
        }
        if pn > pa * (1.0 + DOMINANCE_TOLERANCE) {
            strict = true;
        }
    }
    strict
}

fn check_prefix(net: &Network, partial: &[NodeId]) -> Result<Vec<bool>, SearchError> {
    if partial.first() != Some(&net.source()) {
        return Err(SearchError::InvalidPrefix("must start at the source".into()));
    }
    let mut used = vec![false; net.len() + 1];
    for &id in partial {
        if !net.contains(id) {
            return Err(SearchError::InvalidPrefix(format!("unknown node {id}")));
        }
        if used[id] {
            return Err(SearchError::InvalidPrefix(format!("node {id} repeated")));
        }
        used[id] = true;
    }
    if used[net.destination()] {
        return Err(SearchError::InvalidPrefix("already contains the destination".into()));
    }
    Ok(used)
}

/// Smallest non-empty set of unused nodes that each dominate every unused
/// node outside the set.
///
/// Strict dominance is antisymmetric, so the valid sets form a chain and the
/// smallest one is unique. For each seed node the closure adds every node not
/// dominated by some member; the smallest closure is the answer (first seed
/// in ascending id order on equal sizes).
pub fn nearest_neighbor_set(net: &Network, partial: &[NodeId]) -> Result<Vec<NodeId>, SearchError> {
    let used = check_prefix(net, partial)?;
    let remainder: Vec<NodeId> = (1..=net.len()).filter(|&id| !used[id]).collect();
    if remainder.is_empty() {
        return Err(SearchError::EmptyRemainder);
    }
    let mut best: Option<Vec<NodeId>> = None;
    for &seed in &remainder {
        let set = dominant_closure(net, partial, &remainder, seed);
        if best.as_ref().is_none_or(|b| set.len() < b.len()) {
            let done = set.len() == 1;
            best = Some(set);
            if done {
                break;
            }
        }
    }
    Ok(best.unwrap())
}

/// Smallest set containing `seed` whose members all dominate every
/// non-member of `remainder`, in ascending id order.
fn dominant_closure(net: &Network, partial: &[NodeId], remainder: &[NodeId], seed: NodeId) -> Vec<NodeId> {
    let mut inside: Vec<bool> = remainder.iter().map(|&a| a == seed).collect();
    loop {
        let mut grew = false;
        for (k, &a) in remainder.iter().enumerate() {
            if inside[k] {
                continue;
            }
            let dominated = remainder
                .iter()
                .zip(&inside)
                .all(|(&n, &member)| !member || dominates(net, partial, n, a));
            if !dominated {
                inside[k] = true;
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    remainder
        .iter()
        .zip(&inside)
        .filter(|(_, &member)| member)
        .map(|(&n, _)| n)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NnaOutcome {
    Completed { route: Route },
    /// No unique nearest neighbor after `partial`; `ties` is the nearest
    /// neighbor set at that point.
    Premature { partial: Vec<NodeId>, ties: Vec<NodeId> },
}

pub fn run_nna(net: &Network) -> NnaOutcome {
    let d = net.destination();
    let mut partial = vec![net.source()];
    loop {
        let set = nearest_neighbor_set(net, &partial).expect("prefix is valid and incomplete");
        if set.len() != 1 {
            return NnaOutcome::Premature { partial, ties: set };
        }
        partial.push(set[0]);
        if set[0] == d {
            return NnaOutcome::Completed {
                route: Route::from_trusted(partial),
            };
        }
    }
}

/// One NNSA expansion: `prefix` branched to each node of `neighbors`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branching {
    pub prefix: Vec<NodeId>,
    pub neighbors: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<Route>,
    pub provenance: Vec<Branching>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Branches every partial route on its nearest neighbor set until each
/// branch reaches the destination.
pub fn run_nnsa(net: &Network) -> CandidateSet {
    let d = net.destination();
    let mut candidates = Vec::new();
    let mut provenance = Vec::new();
    let mut stack = vec![vec![net.source()]];
    while let Some(prefix) = stack.pop() {
        let set = nearest_neighbor_set(net, &prefix).expect("prefix is valid and incomplete");
        // Reverse push so branches pop in ascending neighbor order.
        for &n in set.iter().rev() {
            let mut next = prefix.clone();
            next.push(n);
            stack.push(next);
        }
        provenance.push(Branching {
            prefix,
            neighbors: set,
        });
        while let Some(top) = stack.last() {
            if *top.last().unwrap() == d {
                candidates.push(Route::from_trusted(stack.pop().unwrap()));
            } else {
                break;
            }
        }
    }
    CandidateSet {
        candidates,
        provenance,
    }
}

/// Evaluates each candidate with decode-and-forward and keeps the best.
pub fn best_candidates(
    net: &Network,
    cands: &CandidateSet,
    mode: CodewordMode,
) -> Result<SearchResult, SearchError> {
    if cands.is_empty() {
        return Err(SearchError::NoCandidates);
    }
    let mut argmax = ArgmaxSet::new(tie_tolerance(Strategy::DecodeForward, mode));
    let mut failed = Vec::new();
    for route in &cands.candidates {
        match rate::rate_df(net, route, mode) {
            Ok(rep) => argmax.offer(|| route.clone(), rep.supported_rate),
            Err(_) => failed.push(route.clone()),
        }
    }
    if failed.len() == cands.len() {
        return Err(SearchError::AllCandidatesFailed);
    }
    let (best_routes, max_rate) = argmax.finish();
    Ok(SearchResult {
        best_routes,
        max_rate,
        strategy: Strategy::DecodeForward,
        mode: Some(mode),
        routes_evaluated: cands.len(),
        failed,
    })
}

/// MSPA route plus operation counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MspaTrace {
    pub route: Route,
    /// Additions into the cached per-node received-power sums.
    pub sum_updates: usize,
    /// Candidate comparisons while picking the next hop.
    pub comparisons: usize,
}

pub fn run_mspa(net: &Network) -> Route {
    run_mspa_traced(net).route
}

/// Greedily appends the unused node with the largest total received power
/// from the current route. Ties (within [`DOMINANCE_TOLERANCE`]) go to the
/// smallest id.
pub fn run_mspa_traced(net: &Network) -> MspaTrace {
    let d = net.destination();
    let mut sums = vec![0.0; d + 1];
    let mut used = vec![false; d + 1];
    let mut route = vec![net.source()];
    used[1] = true;
    let mut last = net.source();
    let mut sum_updates = 0;
    let mut comparisons = 0;
    loop {
        for t in 2..=d {
            if !used[t] {
                sums[t] += net.power(last, t);
                sum_updates += 1;
            }
        }
        let mut pick: Option<NodeId> = None;
        for t in 2..=d {
            if used[t] {
                continue;
            }
            match pick {
                None => pick = Some(t),
                Some(p) => {
                    comparisons += 1;
                    if sums[t] > sums[p] * (1.0 + DOMINANCE_TOLERANCE) {
                        pick = Some(t);
                    }
                }
            }
        }
        let next = pick.expect("destination is never used before the end");
        used[next] = true;
        route.push(next);
        if next == d {
            break;
        }
        last = next;
    }
    MspaTrace {
        route: Route::from_trusted(route),
        sum_updates,
        comparisons,
    }
}

/// Drops relays from `route` while the rate stays at or above `target`.
///
/// Each pass removes the single relay whose removal leaves the highest rate
/// (earliest position on ties), as long as that rate still meets the target.
/// The result is minimal under single-relay removal.
pub fn prune_shortest(
    net: &Network,
    route: &Route,
    target: f64,
    mode: CodewordMode,
) -> Result<Route, SearchError> {
    let meets = |rep: &RateReport| rep.supported_rate >= target * (1.0 - EXACT_TIE_TOLERANCE);
    let start = rate::rate_df(net, route, mode)?;
    if !meets(&start) {
        return Err(SearchError::TargetUnreachable {
            target,
            rate: start.supported_rate,
        });
    }
    let mut current = route.clone();
    loop {
        let mut best: Option<(Route, f64)> = None;
        for pos in 2..current.len() {
            let mut ids = current.nodes().to_vec();
            ids.remove(pos - 1);
            let shorter = Route::from_trusted(ids);
            let rep = rate::rate_df(net, &shorter, mode)?;
            if meets(&rep) && best.as_ref().is_none_or(|(_, r)| rep.supported_rate > *r) {
                best = Some((shorter, rep.supported_rate));
            }
        }
        match best {
            Some((shorter, _)) => current = shorter,
            None => return Ok(current),
        }
    }
}
