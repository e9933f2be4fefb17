use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::AttackSpec;
use crate::detector::DetectorConfig;
use crate::model::{NodeId, RplConstants};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("node_count must be at least 2, got {0}")]
    TooFewNodes(usize),
    #[error("link_loss must be in [0, 1), got {0}")]
    BadLoss(f64),
    #[error("duration must be positive")]
    BadDuration,
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("attack references unknown or sink node {0}")]
    BadAttackNode(NodeId),
    #[error("attack on node {0} has zero delta")]
    ZeroDelta(NodeId),
    #[error("explicit topology lists {positions} positions for {nodes} nodes")]
    PositionCount { positions: usize, nodes: usize },
    #[error("invalid ETX value {0}")]
    BadEtx(f64),
    #[error("invalid constants: {0}")]
    Constants(#[from] crate::model::ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Node 0 is always the sink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Topology {
    /// Uniform placement in a `width` x `height` field with the sink at the centre.
    Random { width: f64, height: f64 },
    /// Sink at the origin, node `i` at `i * spacing` along the x axis.
    Line { spacing: f64 },
    Explicit { positions: Vec<Position> },
}

impl Default for Topology {
    fn default() -> Self {
        Topology::Random {
            width: 300.0,
            height: 300.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkEtx {
    pub a: NodeId,
    pub b: NodeId,
    pub etx: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EtxAssignment {
    Uniform { value: f64 },
    /// Symmetric per-link overrides; unlisted links use `default`.
    PerLink { default: f64, links: Vec<LinkEtx> },
    /// `1 / (1 - link_loss)` on every link.
    LossDerived,
}

impl Default for EtxAssignment {
    fn default() -> Self {
        EtxAssignment::Uniform { value: 1.0 }
    }
}

fn d_node_count() -> usize {
    50
}
fn d_tx_range() -> f64 {
    50.0
}
fn d_packet_interval() -> f64 {
    120.0
}
fn d_duration() -> f64 {
    1200.0
}
fn d_startup_delay() -> f64 {
    1000.0
}
fn d_hop_latency() -> f64 {
    10.0
}
fn d_dao_delay() -> f64 {
    1.0
}
fn d_dis_interval() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Label used in metric reports.
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub topology: Topology,
    /// Total nodes including the sink.
    #[serde(default = "d_node_count")]
    pub node_count: usize,
    /// Metres.
    #[serde(default = "d_tx_range")]
    pub tx_range: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub link_loss: f64,
    #[serde(default)]
    pub etx: EtxAssignment,
    /// Seconds between data packets per node.
    #[serde(default = "d_packet_interval")]
    pub packet_interval: f64,
    /// Seconds of timer activity; in-flight packets drain afterwards.
    #[serde(default = "d_duration")]
    pub duration: f64,
    #[serde(default)]
    pub attacks: Vec<AttackSpec>,
    #[serde(default)]
    pub consts: RplConstants,
    /// Boot times are uniform in `[0, startup_delay]` milliseconds.
    #[serde(default = "d_startup_delay")]
    pub startup_delay: f64,
    /// Per-hop transmission latency, milliseconds.
    #[serde(default = "d_hop_latency")]
    pub hop_latency: f64,
    /// Seconds between a route change and the resulting DAO.
    #[serde(default = "d_dao_delay")]
    pub dao_delay: f64,
    /// Seconds between DIS retries while unjoined.
    #[serde(default = "d_dis_interval")]
    pub dis_interval: f64,
    #[serde(default)]
    pub detector: DetectorConfig,
    /// When set, nodes stop using flagged nodes as parents.
    #[serde(default)]
    pub evict_malicious: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn line(node_count: usize, spacing: f64) -> Scenario {
        Scenario {
            topology: Topology::Line { spacing },
            node_count,
            ..Scenario::default()
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.node_count < 2 {
            return Err(ScenarioError::TooFewNodes(self.node_count));
        }
        if !(0.0..1.0).contains(&self.link_loss) {
            return Err(ScenarioError::BadLoss(self.link_loss));
        }
        if self.duration.is_nan() || self.duration <= 0.0 {
            return Err(ScenarioError::BadDuration);
        }
        for (name, v) in [
            ("tx_range", self.tx_range),
            ("packet_interval", self.packet_interval),
            ("dao_delay", self.dao_delay),
            ("dis_interval", self.dis_interval),
            ("consts.dio_interval", self.consts.dio_interval),
            ("consts.dao_refresh_interval", self.consts.dao_refresh_interval),
        ] {
            if v.is_nan() || v <= 0.0 {
                return Err(ScenarioError::NonPositive(name));
            }
        }
        if self.startup_delay.is_nan() || self.startup_delay < 0.0 {
            return Err(ScenarioError::NonPositive("startup_delay"));
        }
        if self.hop_latency.is_nan() || self.hop_latency < 0.0 {
            return Err(ScenarioError::NonPositive("hop_latency"));
        }
        self.consts.validate()?;
        for a in &self.attacks {
            if a.node.0 == 0 || a.node.0 as usize >= self.node_count {
                return Err(ScenarioError::BadAttackNode(a.node));
            }
            if a.delta() == 0 {
                return Err(ScenarioError::ZeroDelta(a.node));
            }
        }
        if let Topology::Explicit { positions } = &self.topology {
            if positions.len() != self.node_count {
                return Err(ScenarioError::PositionCount {
                    positions: positions.len(),
                    nodes: self.node_count,
                });
            }
        }
        match &self.etx {
            EtxAssignment::Uniform { value } => check_etx(*value)?,
            EtxAssignment::PerLink { default, links } => {
                check_etx(*default)?;
                for l in links {
                    check_etx(l.etx)?;
                }
            }
            EtxAssignment::LossDerived => {}
        }
        Ok(())
    }
}

fn check_etx(v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() && v >= 1.0 {
        Ok(())
    } else {
        Err(ScenarioError::BadEtx(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{AttackKind, LieTarget, Onset};

    #[test]
    fn defaults() {
        let s = Scenario::default();
        assert_eq!(s.node_count, 50);
        assert_eq!(s.tx_range, 50.0);
        assert_eq!(s.packet_interval, 120.0);
        assert_eq!(s.startup_delay, 1000.0);
        assert_eq!(s.topology, Topology::Random { width: 300.0, height: 300.0 });
        assert_eq!(s.etx, EtxAssignment::Uniform { value: 1.0 });
        s.validate().unwrap();
    }

    #[test]
    fn rejects_invalid() {
        let mut s = Scenario::line(3, 40.0);
        s.link_loss = 1.0;
        assert!(matches!(s.validate(), Err(ScenarioError::BadLoss(_))));
        let mut s = Scenario::line(1, 40.0);
        assert!(matches!(s.validate(), Err(ScenarioError::TooFewNodes(1))));
        s.node_count = 3;
        s.attacks.push(AttackSpec::new(NodeId(0), AttackKind::Decreased, Onset::ImmediateOnJoin, LieTarget::Sink));
        assert!(matches!(s.validate(), Err(ScenarioError::BadAttackNode(_))));
        s.attacks[0] = AttackSpec::new(NodeId(2), AttackKind::Decreased, Onset::ImmediateOnJoin, LieTarget::Sink)
            .with_delta(0);
        assert!(matches!(s.validate(), Err(ScenarioError::ZeroDelta(_))));
    }

    #[test]
    fn rejects_unknown_fields() {
        assert!(Scenario::from_json(r#"{"nodes": 3}"#).is_err());
    }

    #[test]
    fn parses_full_document() {
        let json = r#"{
            "name": "line3",
            "topology": {"kind": "line", "spacing": 40},
            "node_count": 3,
            "seed": 7,
            "duration": 600,
            "attacks": [{"node": 2, "kind": "decreased", "onset": {"delayed": 300}, "lie_target": "sink"}],
            "etx": {"kind": "per_link", "default": 1.0, "links": [{"a": 0, "b": 1, "etx": 2.0}]}
        }"#;
        let s = Scenario::from_json(json).unwrap();
        s.validate().unwrap();
        assert_eq!(s.attacks[0].node, NodeId(2));
        assert_eq!(s.topology, Topology::Line { spacing: 40.0 });
    }
}
