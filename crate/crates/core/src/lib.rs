//! Rate computation and optimal route search for single-source,
//! single-destination wireless relay networks under single-hop, multi-hop and
//! decode-and-forward coding.

pub mod experiments;
pub mod network;
pub mod rate;
pub mod search;
mod splits;

pub use network::{Network, NetworkError, NodeId, NodeSpec, PowerMatrix};
pub use rate::{
    CodewordMode, PowerSplit, RateError, RateReport, ReceptionRate, Route, RouteError, Strategy,
};
pub use search::{
    brute_force_optimum, enumerate_routes, nearest_neighbor_set, run_mspa, run_nna, run_nnsa,
    CandidateSet, NnaOutcome, SearchError, SearchResult,
};
