//! Planar node layout and the deterministic path-loss channel.
//!
//! Received power from node `i` at node `t` is `kappa * d_it^(-eta) * P_i`,
//! all in linear watts. A [`Network`] is validated on construction and caches
//! the full [`PowerMatrix`] so that rate evaluation never recomputes
//! distances.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Node label. Node 1 is the source and node `D` (the node count) is the
/// destination.
pub type NodeId = usize;

/// Nodes closer than this are rejected as coincident.
pub const MIN_SEPARATION: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("a network needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("duplicate node id {0}")]
    DuplicateId(NodeId),
    #[error("node ids must be exactly 1..={expected_max}, found id {id}")]
    NonContiguousIds { id: NodeId, expected_max: usize },
    #[error("nodes {0} and {1} coincide (distance {2:e} m)")]
    CoincidentNodes(NodeId, NodeId, f64),
    #[error("node {0} has a non-positive transmit or noise power")]
    NonPositivePower(NodeId),
    #[error("node {0} has a non-finite coordinate")]
    NonFinitePosition(NodeId),
    #[error("path-loss exponent {0} is below 2")]
    EtaTooSmall(f64),
    #[error("kappa must be positive and finite, got {0}")]
    NonPositiveKappa(f64),
    #[error("unknown node id {0}")]
    UnknownId(NodeId),
    #[error("node {0} was given as both transmitter and receiver")]
    SameNode(NodeId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    /// `P_i`, watts.
    pub transmit_power: f64,
    /// `N_i`, watts.
    pub noise_power: f64,
}

impl NodeSpec {
    /// A node with unit transmit and noise power.
    pub fn unit(id: NodeId, x: f64, y: f64) -> Self {
        Self {
            id,
            x,
            y,
            transmit_power: 1.0,
            noise_power: 1.0,
        }
    }
}

/// Received powers `P_it` for every ordered pair `i != t`.
///
/// Indexed by 1-based node ids. The diagonal holds NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerMatrix {
    size: usize,
    entries: Vec<f64>,
}

impl PowerMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    /// `P_it`, the power node `t` receives from node `i`.
    #[inline]
    pub fn get(&self, i: NodeId, t: NodeId) -> f64 {
        self.entries[(i - 1) * self.size + (t - 1)]
    }
}

/// A validated network. Nodes are stored ordered by id.
#[derive(Debug, Clone)]
pub struct Network {
    nodes: Vec<NodeSpec>,
    kappa: f64,
    eta: f64,
    powers: PowerMatrix,
}

/// Equality over the defining data; the cached matrix (NaN diagonal) follows.
impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.kappa == other.kappa && self.eta == other.eta
    }
}

impl Network {
    /// Validates the node list and path-loss constants (`validate_network`).
    ///
    /// Nodes may be given in any order; they are sorted by id.
    pub fn new(mut nodes: Vec<NodeSpec>, kappa: f64, eta: f64) -> Result<Self, NetworkError> {
        if nodes.len() < 2 {
            return Err(NetworkError::TooFewNodes(nodes.len()));
        }
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(NetworkError::NonPositiveKappa(kappa));
        }
        if !(eta.is_finite() && eta >= 2.0) {
            return Err(NetworkError::EtaTooSmall(eta));
        }
        nodes.sort_by_key(|n| n.id);
        for pair in nodes.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(NetworkError::DuplicateId(pair[0].id));
            }
        }
        let count = nodes.len();
        for (idx, node) in nodes.iter().enumerate() {
            if node.id != idx + 1 {
                return Err(NetworkError::NonContiguousIds {
                    id: node.id,
                    expected_max: count,
                });
            }
            if !(node.x.is_finite() && node.y.is_finite()) {
                return Err(NetworkError::NonFinitePosition(node.id));
            }
            let powers_ok = node.transmit_power.is_finite()
                && node.noise_power.is_finite()
                && node.transmit_power > 0.0
                && node.noise_power > 0.0;
            if !powers_ok {
                return Err(NetworkError::NonPositivePower(node.id));
            }
        }
        for (a, na) in nodes.iter().enumerate() {
            for nb in &nodes[a + 1..] {
                let d = (na.x - nb.x).hypot(na.y - nb.y);
                if d < MIN_SEPARATION {
                    return Err(NetworkError::CoincidentNodes(na.id, nb.id, d));
                }
            }
        }
        let powers = build_power_matrix(&nodes, kappa, eta);
        Ok(Self {
            nodes,
            kappa,
            eta,
            powers,
        })
    }

    /// Convenience constructor: nodes at `positions` (ids 1, 2, ...) with
    /// unit transmit and noise power.
    pub fn with_unit_powers(
        positions: &[(f64, f64)],
        kappa: f64,
        eta: f64,
    ) -> Result<Self, NetworkError> {
        let nodes = positions
            .iter()
            .enumerate()
            .map(|(k, &(x, y))| NodeSpec::unit(k + 1, x, y))
            .collect();
        Self::new(nodes, kappa, eta)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn source(&self) -> NodeId {
        1
    }

    pub fn destination(&self) -> NodeId {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn contains(&self, id: NodeId) -> bool {
        (1..=self.nodes.len()).contains(&id)
    }

    pub fn node(&self, id: NodeId) -> Result<&NodeSpec, NetworkError> {
        if self.contains(id) {
            Ok(&self.nodes[id - 1])
        } else {
            Err(NetworkError::UnknownId(id))
        }
    }

    /// `N_t` for a known id. Panics on an unknown id.
    #[inline]
    pub fn noise(&self, id: NodeId) -> f64 {
        self.nodes[id - 1].noise_power
    }

    fn check_pair(&self, i: NodeId, t: NodeId) -> Result<(&NodeSpec, &NodeSpec), NetworkError> {
        let a = self.node(i)?;
        let b = self.node(t)?;
        if i == t {
            return Err(NetworkError::SameNode(i));
        }
        Ok((a, b))
    }

    /// Euclidean distance between two distinct nodes, in meters.
    pub fn distance(&self, i: NodeId, t: NodeId) -> Result<f64, NetworkError> {
        let (a, b) = self.check_pair(i, t)?;
        Ok((a.x - b.x).hypot(a.y - b.y))
    }

    /// `P_it = kappa * d_it^(-eta) * P_i`, evaluated directly from positions.
    pub fn received_power(&self, i: NodeId, t: NodeId) -> Result<f64, NetworkError> {
        let d = self.distance(i, t)?;
        Ok(self.kappa * d.powf(-self.eta) * self.nodes[i - 1].transmit_power)
    }

    /// The cached matrix of all received powers.
    pub fn power_matrix(&self) -> &PowerMatrix {
        &self.powers
    }

    /// Cached `P_it` for known, distinct ids.
    #[inline]
    pub fn power(&self, i: NodeId, t: NodeId) -> f64 {
        self.powers.get(i, t)
    }
}

fn build_power_matrix(nodes: &[NodeSpec], kappa: f64, eta: f64) -> PowerMatrix {
    let size = nodes.len();
    let half_eta = 0.5 * eta;
    let mut entries = vec![f64::NAN; size * size];
    for (a, tx) in nodes.iter().enumerate() {
        for (b, rx) in nodes.iter().enumerate() {
            if a == b {
                continue;
            }
            let (dx, dy) = (tx.x - rx.x, tx.y - rx.y);
            let gain = kappa / (dx * dx + dy * dy).powf(half_eta);
            entries[a * size + b] = gain * tx.transmit_power;
        }
    }
    PowerMatrix { size, entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn net_a() -> Network {
        Network::with_unit_powers(
            &[(0.0, 0.0), (0.418, 0.0), (0.209, 0.6755), (0.995, 0.0)],
            1.0,
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn accepts_four_node_fixture() {
        let net = net_a();
        assert_eq!(net.len(), 4);
        assert_eq!(net.source(), 1);
        assert_eq!(net.destination(), 4);
    }

    #[test]
    fn rejects_coincident_nodes() {
        let err = Network::with_unit_powers(&[(0.0, 0.0), (0.0, 0.0)], 1.0, 2.0).unwrap_err();
        assert!(matches!(err, NetworkError::CoincidentNodes(1, 2, _)));
    }

    #[test]
    fn rejects_small_eta() {
        let err = Network::with_unit_powers(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)], 1.0, 1.5)
            .unwrap_err();
        assert_eq!(err, NetworkError::EtaTooSmall(1.5));
    }

    #[test]
    fn rejects_bad_ids_and_powers() {
        let dup = vec![NodeSpec::unit(1, 0.0, 0.0), NodeSpec::unit(1, 1.0, 0.0)];
        assert_eq!(
            Network::new(dup, 1.0, 2.0).unwrap_err(),
            NetworkError::DuplicateId(1)
        );
        let gap = vec![NodeSpec::unit(1, 0.0, 0.0), NodeSpec::unit(3, 1.0, 0.0)];
        assert!(matches!(
            Network::new(gap, 1.0, 2.0).unwrap_err(),
            NetworkError::NonContiguousIds { id: 3, .. }
        ));
        let mut weak = NodeSpec::unit(2, 1.0, 0.0);
        weak.noise_power = 0.0;
        let nodes = vec![NodeSpec::unit(1, 0.0, 0.0), weak];
        assert_eq!(
            Network::new(nodes, 1.0, 2.0).unwrap_err(),
            NetworkError::NonPositivePower(2)
        );
        assert_eq!(
            Network::with_unit_powers(&[(0.0, 0.0)], 1.0, 2.0).unwrap_err(),
            NetworkError::TooFewNodes(1)
        );
    }

    #[test]
    fn sorts_nodes_by_id() {
        let nodes = vec![NodeSpec::unit(2, 1.0, 0.0), NodeSpec::unit(1, 0.0, 0.0)];
        let net = Network::new(nodes, 1.0, 2.0).unwrap();
        assert_eq!(net.nodes()[0].id, 1);
        assert_relative_eq!(net.node(2).unwrap().x, 1.0);
    }

    #[test]
    fn distances_on_fixture() {
        let net = net_a();
        assert_relative_eq!(net.distance(1, 2).unwrap(), 0.418, max_relative = 1e-15);
        assert_relative_eq!(
            net.distance(1, 3).unwrap(),
            (0.209f64.powi(2) + 0.6755f64.powi(2)).sqrt(),
            max_relative = 1e-15
        );
        assert_relative_eq!(net.distance(1, 3).unwrap(), 0.70709, epsilon = 1e-5);
        assert_relative_eq!(net.distance(3, 4).unwrap(), 1.03639, epsilon = 1e-5);
        assert_eq!(net.distance(1, 1), Err(NetworkError::SameNode(1)));
        assert_eq!(net.distance(1, 9), Err(NetworkError::UnknownId(9)));
    }

    #[test]
    fn received_powers_on_fixture() {
        let net = net_a();
        assert_relative_eq!(net.received_power(1, 2).unwrap(), 1.0 / (0.418 * 0.418), max_relative = 1e-14);
        assert_relative_eq!(net.received_power(1, 2).unwrap(), 5.72329, epsilon = 5e-5);
        assert_relative_eq!(net.received_power(2, 4).unwrap(), 3.00365, epsilon = 1e-5);
        assert_relative_eq!(net.received_power(1, 4).unwrap(), 1.01008, epsilon = 1e-5);
        assert_relative_eq!(net.power(1, 3), 2.00008, epsilon = 1e-5);
    }

    #[test]
    fn unit_two_node_matrix() {
        let net = Network::with_unit_powers(&[(0.0, 0.0), (1.0, 0.0)], 1.0, 2.0).unwrap();
        assert_eq!(net.power(1, 2), 1.0);
        assert_eq!(net.power(2, 1), 1.0);
        assert!(net.power_matrix().get(1, 1).is_nan());
    }

    #[test]
    fn doubling_distances_quarters_power() {
        let pos = [(0.0, 0.0), (0.3, 0.1), (1.0, -0.4), (2.0, 0.5)];
        let doubled: Vec<_> = pos.iter().map(|&(x, y)| (2.0 * x, 2.0 * y)).collect();
        let a = Network::with_unit_powers(&pos, 1.0, 2.0).unwrap();
        let b = Network::with_unit_powers(&doubled, 1.0, 2.0).unwrap();
        for i in 1..=4 {
            for t in (1..=4).filter(|&t| t != i) {
                assert_relative_eq!(b.power(i, t), a.power(i, t) / 4.0, max_relative = 1e-14);
            }
        }
    }
}
