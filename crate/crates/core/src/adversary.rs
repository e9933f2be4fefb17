//! Rank-attack adversary: pure transformations of the DIOs and DAOs an
//! attacking node emits.

use serde::{Deserialize, Serialize};

use crate::mac::{hmac, tuple_bytes};
use crate::model::{NodeId, Rank, SecretKey, SimTime, DEFAULT_MIN_HOP_RANK_INCREASE, INFINITE_RANK};
use crate::model::DioMessage;
use crate::wire::DaoMessage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Decreased,
    Increased,
}

impl AttackKind {
    /// Default delta for a given MinHopRankIncrease: 1.2 hops down, 5 hops up.
    pub fn default_delta(self, min_hop: u16) -> u16 {
        match self {
            AttackKind::Decreased => ((min_hop as u32 * 6 + 2) / 5) as u16,
            AttackKind::Increased => (min_hop as u32 * 5).min(u16::MAX as u32) as u16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Onset {
    ImmediateOnJoin,
    /// Activation time in simulated seconds.
    Delayed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LieTarget {
    /// False rank in DAOs, truthful DIOs.
    Sink,
    /// False rank in DIOs, truthful DAOs.
    Neighbors,
    /// Truthful rank, but a falsified parent rank in DAOs.
    FrameParent,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    pub node: NodeId,
    pub kind: AttackKind,
    /// Rank delta in rank units; defaults per kind when absent.
    #[serde(default)]
    pub delta_r: Option<u16>,
    pub onset: Onset,
    pub lie_target: LieTarget,
    /// Without the key a tampered DAO keeps its original MAC.
    #[serde(default = "default_true")]
    pub has_key: bool,
}

impl AttackSpec {
    pub fn new(node: NodeId, kind: AttackKind, onset: Onset, lie_target: LieTarget) -> Self {
        AttackSpec {
            node,
            kind,
            delta_r: None,
            onset,
            lie_target,
            has_key: true,
        }
    }

    pub fn with_delta(mut self, delta: u16) -> Self {
        self.delta_r = Some(delta);
        self
    }

    pub fn delta(&self) -> u16 {
        self.delta_r
            .unwrap_or_else(|| self.kind.default_delta(DEFAULT_MIN_HOP_RANK_INCREASE))
    }

    /// `ImmediateOnJoin` is active whenever the node has something to send.
    pub fn is_active(&self, now: SimTime) -> bool {
        match self.onset {
            Onset::ImmediateOnJoin => true,
            Onset::Delayed(secs) => now >= SimTime::from_secs(secs),
        }
    }
}

fn shift(rank: Rank, spec: &AttackSpec) -> Rank {
    if rank.is_infinite() {
        return rank;
    }
    let r = rank.get() as u32;
    let d = spec.delta() as u32;
    let v = match spec.kind {
        AttackKind::Decreased => r.saturating_sub(d).max(1),
        AttackKind::Increased => (r + d).min(INFINITE_RANK as u32 - 1),
    };
    Rank::new(v as u16).expect("clamped to a valid rank")
}

pub fn advertised_rank(true_rank: Rank, spec: &AttackSpec, now: SimTime) -> Rank {
    if spec.is_active(now) {
        shift(true_rank, spec)
    } else {
        true_rank
    }
}

pub fn apply_to_dio(dio: DioMessage, spec: &AttackSpec, now: SimTime) -> DioMessage {
    if spec.lie_target != LieTarget::Neighbors || !spec.is_active(now) {
        return dio;
    }
    DioMessage {
        advertised_rank: shift(dio.advertised_rank, spec),
        ..dio
    }
}

pub fn apply_to_dao(dao: DaoMessage, spec: &AttackSpec, key: &SecretKey, now: SimTime) -> DaoMessage {
    if !spec.is_active(now) {
        return dao;
    }
    let mut out = dao;
    match spec.lie_target {
        LieTarget::Neighbors => return dao,
        LieTarget::Sink => out.transit.rank = shift(dao.transit.rank, spec),
        LieTarget::FrameParent => out.transit.parent_rank = shift(dao.transit.parent_rank, spec),
    }
    if spec.has_key {
        let t = &out.transit;
        out.transit.mac = hmac(&tuple_bytes(out.origin, t.rank, out.target_parent, t.parent_rank), key);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::distributed_prepare;
    use crate::wire::TransitInfoExt;

    fn rank(v: u16) -> Rank {
        Rank::new(v).unwrap()
    }

    fn spec(kind: AttackKind, target: LieTarget, onset: Onset) -> AttackSpec {
        AttackSpec::new(NodeId(2), kind, onset, target).with_delta(300)
    }

    fn dao(key: &SecretKey) -> DaoMessage {
        let add = distributed_prepare(NodeId(2), rank(512), NodeId(1), rank(256), key);
        let t = TransitInfoExt::new(NodeId(1), add.parent_rank, add.rank, add.mac);
        DaoMessage::new(NodeId(2), NodeId(0), 0, t)
    }

    fn verifies(d: &DaoMessage, key: &SecretKey) -> bool {
        let t = &d.transit;
        hmac(&tuple_bytes(d.origin, t.rank, d.target_parent, t.parent_rank), key) == t.mac
    }

    #[test]
    fn rank_shifts() {
        let now = SimTime::ZERO;
        let dec = spec(AttackKind::Decreased, LieTarget::Sink, Onset::ImmediateOnJoin);
        let inc = spec(AttackKind::Increased, LieTarget::Sink, Onset::ImmediateOnJoin);
        assert_eq!(advertised_rank(rank(512), &dec, now), rank(212));
        assert_eq!(advertised_rank(rank(512), &inc, now), rank(812));
        assert_eq!(advertised_rank(rank(100), &dec, now), rank(1));
        assert_eq!(advertised_rank(rank(65500), &inc, now), rank(0xFFFE));
        assert!(advertised_rank(Rank::INFINITE, &dec, now).is_infinite());
    }

    #[test]
    fn onset_gates_lies() {
        let s = spec(AttackKind::Decreased, LieTarget::Sink, Onset::Delayed(300.0));
        assert_eq!(advertised_rank(rank(512), &s, SimTime::from_secs(299.9)), rank(512));
        assert_eq!(advertised_rank(rank(512), &s, SimTime::from_secs(300.0)), rank(212));
    }

    #[test]
    fn default_deltas() {
        assert_eq!(AttackKind::Decreased.default_delta(256), 307);
        assert_eq!(AttackKind::Increased.default_delta(256), 1280);
        let s = AttackSpec::new(NodeId(1), AttackKind::Decreased, Onset::ImmediateOnJoin, LieTarget::Sink);
        assert_eq!(s.delta(), 307);
    }

    #[test]
    fn dio_lies_only_to_neighbors() {
        let dio = DioMessage {
            sender: NodeId(2),
            advertised_rank: rank(512),
            dodag_version: 0,
        };
        let now = SimTime::ZERO;
        let n = spec(AttackKind::Decreased, LieTarget::Neighbors, Onset::ImmediateOnJoin);
        assert_eq!(apply_to_dio(dio, &n, now).advertised_rank, rank(212));
        let s = spec(AttackKind::Decreased, LieTarget::Sink, Onset::ImmediateOnJoin);
        assert_eq!(apply_to_dio(dio, &s, now), dio);
        let later = spec(AttackKind::Decreased, LieTarget::Neighbors, Onset::Delayed(10.0));
        assert_eq!(apply_to_dio(dio, &later, now), dio);
    }

    #[test]
    fn dao_lies_to_sink_with_valid_mac() {
        let key = SecretKey::default();
        let now = SimTime::ZERO;
        let s = spec(AttackKind::Decreased, LieTarget::Sink, Onset::ImmediateOnJoin);
        let out = apply_to_dao(dao(&key), &s, &key, now);
        assert_eq!(out.transit.rank, rank(212));
        assert!(verifies(&out, &key));

        let n = spec(AttackKind::Decreased, LieTarget::Neighbors, Onset::ImmediateOnJoin);
        assert_eq!(apply_to_dao(dao(&key), &n, &key, now), dao(&key));
    }

    #[test]
    fn keyless_tamper_leaves_stale_mac() {
        let key = SecretKey::default();
        let mut s = spec(AttackKind::Increased, LieTarget::Sink, Onset::ImmediateOnJoin);
        s.has_key = false;
        let out = apply_to_dao(dao(&key), &s, &key, SimTime::ZERO);
        assert_eq!(out.transit.rank, rank(812));
        assert_eq!(out.transit.mac, dao(&key).transit.mac);
        assert!(!verifies(&out, &key));
    }

    #[test]
    fn frame_parent_alters_parent_rank() {
        let key = SecretKey::default();
        let s = spec(AttackKind::Increased, LieTarget::FrameParent, Onset::ImmediateOnJoin);
        let out = apply_to_dao(dao(&key), &s, &key, SimTime::ZERO);
        assert_eq!(out.transit.rank, rank(512));
        assert_eq!(out.transit.parent_rank, rank(556));
        assert!(verifies(&out, &key));
    }

    #[test]
    fn spec_json_shape() {
        let json = r#"{"node":4,"kind":"increased","onset":{"delayed":300.0},"lie_target":"sink"}"#;
        let s: AttackSpec = serde_json::from_str(json).unwrap();
        assert_eq!(s.delta(), 1280);
        assert!(s.has_key);
        assert_eq!(s.onset, Onset::Delayed(300.0));
        let imm: Onset = serde_json::from_str(r#""immediate_on_join""#).unwrap();
        assert_eq!(imm, Onset::ImmediateOnJoin);
    }
}
