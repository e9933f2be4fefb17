//! Rank attack detection.
//!
//! The distributed half runs on every non-sink node just before a DAO is
//! sent: it MACs the `(ID_N, R_N, ID_P, R_P)` tuple and places `R_N`, `R_P`
//! and the tag into the Transit option. The centralized half runs on the
//! sink for every received DAO:
//!
//! 1. recompute the MAC; on mismatch discard the DAO without touching state;
//! 2. upsert the tuple into the [`InformationTable`];
//! 3. if the origin has children on record, every child-reported parent rank
//!    must equal the origin's claimed rank, else the origin is flagged;
//! 4. otherwise flag the origin when `R_N < R_P + MinHopRankIncrease`
//!    (decreased rank) or `R_N > R_P + MFRI` (increased rank).
//!
//! MFRI for a parent `P` is `(R_child_min - R_P) * (1 + PST)` when `P` has
//! more than one child on record, and `hops * MinHopRankIncrease * (1 + PST)`
//! (default `hops = 2`) when it has exactly one.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mac::{hmac, tuple_bytes};
use crate::model::{
    DetectionOutcome, DiscardReason, MacTag, MaliciousCause, NodeId, Rank, RplConstants,
    SecretKey, SimTime,
};
use crate::wire::DaoMessage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DetectError {
    #[error("node {0} has no children in the information table")]
    NoChildren(NodeId),
}

/// Values the distributed module inserts into the DAO Transit option.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransitAdditions {
    pub rank: Rank,
    pub parent_rank: Rank,
    pub mac: MacTag,
}

pub fn distributed_prepare(
    id_n: NodeId,
    r_n: Rank,
    id_p: NodeId,
    r_p: Rank,
    key: &SecretKey,
) -> TransitAdditions {
    TransitAdditions {
        rank: r_n,
        parent_rank: r_p,
        mac: hmac(&tuple_bytes(id_n, r_n, id_p, r_p), key),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InfoTableEntry {
    pub id_n: NodeId,
    pub r_n: Rank,
    pub id_p: NodeId,
    pub r_p: Rank,
    pub updated_at: SimTime,
    /// Rank this node claimed before its most recent rank change.
    pub previous_r_n: Option<Rank>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InformationTable {
    entries: BTreeMap<NodeId, InfoTableEntry>,
}

impl InformationTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: NodeId) -> Option<&InfoTableEntry> {
        self.entries.get(&id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &InfoTableEntry> {
        self.entries.values()
    }

    pub fn upsert(&mut self, id_n: NodeId, r_n: Rank, id_p: NodeId, r_p: Rank, now: SimTime) {
        let previous_r_n = match self.entries.get(&id_n) {
            Some(old) if old.r_n != r_n => Some(old.r_n),
            Some(old) => old.previous_r_n,
            None => None,
        };
        self.entries.insert(
            id_n,
            InfoTableEntry {
                id_n,
                r_n,
                id_p,
                r_p,
                updated_at: now,
                previous_r_n,
            },
        );
    }

    /// Entries naming `parent` as their preferred parent.
    pub fn children_of(&self, parent: NodeId) -> impl Iterator<Item = &InfoTableEntry> {
        self.entries
            .values()
            .filter(move |e| e.id_p == parent && e.id_n != parent)
    }
}

/// What a node's children say its rank is.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChildParentRank {
    Absent,
    Unanimous(Rank),
    Conflicting(BTreeSet<Rank>),
}

pub fn get_child_parent_rank(table: &InformationTable, id: NodeId) -> ChildParentRank {
    let reported: BTreeSet<Rank> = table.children_of(id).map(|e| e.r_p).collect();
    match reported.len() {
        0 => ChildParentRank::Absent,
        1 => ChildParentRank::Unanimous(*reported.iter().next().unwrap()),
        _ => ChildParentRank::Conflicting(reported),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct RankThreshold(f64);

impl RankThreshold {
    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MfriFactor {
    /// `1 + PST` (2.5)
    #[default]
    OnePlusPst,
    /// `PST` alone (1.5)
    Pst,
}

fn default_single_child_hops() -> f64 {
    2.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    #[serde(default)]
    pub mfri_factor: MfriFactor,
    /// Single-child MFRI in hops of `min_hop_rank_increase`.
    #[serde(default = "default_single_child_hops")]
    pub single_child_hops: f64,
    /// Accept child reports that still carry the parent's previous rank.
    /// Disable to get the strict one-shot comparison.
    #[serde(default = "default_true")]
    pub tolerate_rank_transition: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            mfri_factor: MfriFactor::OnePlusPst,
            single_child_hops: default_single_child_hops(),
            tolerate_rank_transition: true,
        }
    }
}

impl DetectorConfig {
    fn factor(&self, consts: &RplConstants) -> f64 {
        let pst = consts.parent_switching_threshold();
        match self.mfri_factor {
            MfriFactor::OnePlusPst => 1.0 + pst,
            MfriFactor::Pst => pst,
        }
    }
}

pub fn get_mfri(
    table: &InformationTable,
    id_p: NodeId,
    r_p: Rank,
    consts: &RplConstants,
    config: &DetectorConfig,
) -> Result<RankThreshold, DetectError> {
    let mut count = 0usize;
    let mut min_child = u16::MAX;
    for child in table.children_of(id_p) {
        count += 1;
        min_child = min_child.min(child.r_n.get());
    }
    let factor = config.factor(consts);
    let single =
        || config.single_child_hops * consts.min_hop_rank_increase as f64 * (1.0 + consts.parent_switching_threshold());
    match count {
        0 => Err(DetectError::NoChildren(id_p)),
        1 => Ok(RankThreshold(single())),
        // Children recorded against an older, higher parent rank leave no
        // usable spacing; fall back to the single-child bound.
        _ if min_child <= r_p.get() => Ok(RankThreshold(single())),
        _ => Ok(RankThreshold((min_child - r_p.get()) as f64 * factor)),
    }
}

pub fn check_decreased(r_n: Rank, r_p: Rank, consts: &RplConstants) -> bool {
    (r_n.get() as u32) < r_p.get() as u32 + consts.min_hop_rank_increase as u32
}

pub fn check_increased(r_n: Rank, r_p: Rank, mfri: RankThreshold) -> bool {
    r_n.get() as f64 > r_p.get() as f64 + mfri.value()
}

/// Processes one DAO against the sink's state. Flags accumulate in
/// `malicious`; a DAO that fails MAC verification leaves both untouched.
pub fn centralized_process(
    dao: &DaoMessage,
    key: &SecretKey,
    table: &mut InformationTable,
    malicious: &mut BTreeSet<NodeId>,
    consts: &RplConstants,
    config: &DetectorConfig,
    now: SimTime,
) -> DetectionOutcome {
    let id_n = dao.origin;
    let id_p = dao.target_parent;
    let r_n = dao.transit.rank;
    let r_p = dao.transit.parent_rank;

    let expected = hmac(&tuple_bytes(id_n, r_n, id_p, r_p), key);
    if expected != dao.transit.mac {
        return DetectionOutcome::Discarded(DiscardReason::MacMismatch);
    }

    table.upsert(id_n, r_n, id_p, r_p, now);

    let entry = *table.get(id_n).expect("just inserted");
    let mut accepted = vec![r_n];
    if config.tolerate_rank_transition {
        accepted.extend(entry.previous_r_n);
    }
    let mismatch = match get_child_parent_rank(table, id_n) {
        ChildParentRank::Absent => false,
        ChildParentRank::Unanimous(r) => !accepted.contains(&r),
        ChildParentRank::Conflicting(set) => set.iter().any(|r| !accepted.contains(r)),
    };
    if mismatch {
        malicious.insert(id_n);
        return DetectionOutcome::Malicious(MaliciousCause::ChildParentRankMismatch);
    }

    let mfri = get_mfri(table, id_p, r_p, consts, config)
        .expect("origin is recorded as a child of its own parent");
    let cause = if check_decreased(r_n, r_p, consts) {
        Some(MaliciousCause::DecreasedRank)
    } else if check_increased(r_n, r_p, mfri) {
        Some(MaliciousCause::IncreasedRank)
    } else {
        None
    };
    match cause {
        Some(cause) => {
            malicious.insert(id_n);
            DetectionOutcome::Malicious(cause)
        }
        None => DetectionOutcome::Accepted,
    }
}

/// Sink-side detector state.
#[derive(Debug, Clone)]
pub struct CentralizedDetector {
    key: SecretKey,
    consts: RplConstants,
    config: DetectorConfig,
    table: InformationTable,
    malicious: BTreeSet<NodeId>,
}

impl CentralizedDetector {
    pub fn new(key: SecretKey, consts: RplConstants, config: DetectorConfig) -> Self {
        CentralizedDetector {
            key,
            consts,
            config,
            table: InformationTable::new(),
            malicious: BTreeSet::new(),
        }
    }

    pub fn process(&mut self, dao: &DaoMessage, now: SimTime) -> DetectionOutcome {
        centralized_process(
            dao,
            &self.key,
            &mut self.table,
            &mut self.malicious,
            &self.consts,
            &self.config,
            now,
        )
    }

    pub fn table(&self) -> &InformationTable {
        &self.table
    }

    pub fn malicious(&self) -> &BTreeSet<NodeId> {
        &self.malicious
    }

    pub fn is_malicious(&self, id: NodeId) -> bool {
        self.malicious.contains(&id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::TransitInfoExt;

    fn rank(v: u16) -> Rank {
        Rank::new(v).unwrap()
    }

    fn consts() -> RplConstants {
        RplConstants::default()
    }

    fn dao(id: u16, r: u16, parent: u16, pr: u16, key: &SecretKey) -> DaoMessage {
        let add = distributed_prepare(NodeId(id), rank(r), NodeId(parent), rank(pr), key);
        let transit = TransitInfoExt::new(NodeId(parent), add.parent_rank, add.rank, add.mac);
        DaoMessage::new(NodeId(id), NodeId(0), 0, transit)
    }

    fn table(rows: &[(u16, u16, u16, u16)]) -> InformationTable {
        let mut t = InformationTable::new();
        for &(n, rn, p, rp) in rows {
            t.upsert(NodeId(n), rank(rn), NodeId(p), rank(rp), SimTime::ZERO);
        }
        t
    }

    #[test]
    fn prepare_macs_the_tuple() {
        let key = SecretKey::default();
        let add = distributed_prepare(NodeId(3), rank(512), NodeId(0), rank(256), &key);
        assert_eq!(add.rank, rank(512));
        assert_eq!(add.parent_rank, rank(256));
        let msg = [0x00, 0x03, 0x02, 0x00, 0x00, 0x00, 0x01, 0x00];
        assert_eq!(add.mac, hmac(&msg, &key));
        assert_eq!(
            add,
            distributed_prepare(NodeId(3), rank(512), NodeId(0), rank(256), &key)
        );
    }

    #[test]
    fn child_parent_rank_lookup() {
        let t = table(&[(6, 768, 5, 512), (7, 768, 5, 512)]);
        assert_eq!(
            get_child_parent_rank(&t, NodeId(5)),
            ChildParentRank::Unanimous(rank(512))
        );
        assert_eq!(get_child_parent_rank(&t, NodeId(9)), ChildParentRank::Absent);

        let t = table(&[(6, 768, 5, 512), (7, 468, 5, 212)]);
        assert_eq!(
            get_child_parent_rank(&t, NodeId(5)),
            ChildParentRank::Conflicting([rank(212), rank(512)].into())
        );
    }

    #[test]
    fn mfri_values() {
        let c = consts();
        let cfg = DetectorConfig::default();
        let t = table(&[(6, 768, 5, 512), (7, 1024, 5, 512)]);
        assert_eq!(get_mfri(&t, NodeId(5), rank(512), &c, &cfg).unwrap().value(), 640.0);
        let t = table(&[(6, 768, 5, 512)]);
        assert_eq!(get_mfri(&t, NodeId(5), rank(512), &c, &cfg).unwrap().value(), 1280.0);
        assert_eq!(
            get_mfri(&t, NodeId(9), rank(512), &c, &cfg),
            Err(DetectError::NoChildren(NodeId(9)))
        );

        let pst_only = DetectorConfig {
            mfri_factor: MfriFactor::Pst,
            ..cfg
        };
        let t = table(&[(6, 768, 5, 512), (7, 1024, 5, 512)]);
        assert_eq!(get_mfri(&t, NodeId(5), rank(512), &c, &pst_only).unwrap().value(), 384.0);
    }

    #[test]
    fn mfri_stale_children_fall_back() {
        let t = table(&[(6, 768, 5, 512), (7, 700, 5, 512)]);
        let v = get_mfri(&t, NodeId(5), rank(768), &consts(), &DetectorConfig::default());
        assert_eq!(v.unwrap().value(), 1280.0);
    }

    #[test]
    fn decreased_condition() {
        let c = consts();
        assert!(check_decreased(rank(300), rank(256), &c));
        assert!(!check_decreased(rank(512), rank(256), &c));
        assert!(!check_decreased(rank(768), rank(256), &c));
        assert!(check_decreased(rank(0xFFFE), rank(0xFFFE), &c));
    }

    #[test]
    fn increased_condition() {
        let m = RankThreshold(640.0);
        assert!(check_increased(rank(1200), rank(512), m));
        assert!(!check_increased(rank(1152), rank(512), m));
        assert!(!check_increased(rank(768), rank(512), m));
    }

    #[test]
    fn legit_dao_accepted() {
        let key = SecretKey::default();
        let mut det = CentralizedDetector::new(key, consts(), DetectorConfig::default());
        assert_eq!(det.process(&dao(1, 512, 0, 256, &key), SimTime(1)), DetectionOutcome::Accepted);
        assert_eq!(det.process(&dao(2, 768, 1, 512, &key), SimTime(2)), DetectionOutcome::Accepted);
        assert_eq!(det.process(&dao(1, 512, 0, 256, &key), SimTime(3)), DetectionOutcome::Accepted);
        assert!(det.malicious().is_empty());
        assert_eq!(det.table().len(), 2);
    }

    #[test]
    fn forged_mac_discarded_without_state_change() {
        let key = SecretKey::default();
        let mut det = CentralizedDetector::new(key, consts(), DetectorConfig::default());
        det.process(&dao(1, 512, 0, 256, &key), SimTime(1));
        let before = det.table().clone();
        let mut forged = dao(2, 768, 1, 512, &key);
        forged.transit.rank = rank(600);
        assert_eq!(
            det.process(&forged, SimTime(2)),
            DetectionOutcome::Discarded(DiscardReason::MacMismatch)
        );
        let other_key = dao(2, 768, 1, 512, &SecretKey::new([7; 16]));
        assert_eq!(
            det.process(&other_key, SimTime(3)),
            DetectionOutcome::Discarded(DiscardReason::MacMismatch)
        );
        assert_eq!(det.table(), &before);
        assert!(det.malicious().is_empty());
    }

    #[test]
    fn neighbor_liar_caught_by_children() {
        let key = SecretKey::default();
        let mut det = CentralizedDetector::new(key, consts(), DetectorConfig::default());
        det.process(&dao(1, 512, 0, 256, &key), SimTime(1));
        // child heard a falsified DIO advertising 212
        det.process(&dao(2, 468, 1, 212, &key), SimTime(2));
        assert_eq!(
            det.process(&dao(1, 512, 0, 256, &key), SimTime(3)),
            DetectionOutcome::Malicious(MaliciousCause::ChildParentRankMismatch)
        );
        assert!(det.is_malicious(NodeId(1)));
        assert!(!det.is_malicious(NodeId(2)));
    }

    #[test]
    fn sink_liar_caught_by_thresholds() {
        let key = SecretKey::default();
        let mut det = CentralizedDetector::new(key, consts(), DetectorConfig::default());
        det.process(&dao(1, 512, 0, 256, &key), SimTime(1));
        assert_eq!(
            det.process(&dao(2, 461, 1, 512, &key), SimTime(2)),
            DetectionOutcome::Malicious(MaliciousCause::DecreasedRank)
        );
        assert_eq!(
            det.process(&dao(3, 512 + 1280, 1, 512, &key), SimTime(3)),
            DetectionOutcome::Accepted,
            "sibling 2 leaves no spacing above 512, so the single-child bound applies"
        );
        assert_eq!(
            det.process(&dao(4, 2048, 1, 512, &key), SimTime(4)),
            DetectionOutcome::Malicious(MaliciousCause::IncreasedRank)
        );
    }

    #[test]
    fn legit_rank_change_tolerated_only_in_transition_mode() {
        let key = SecretKey::default();
        for tolerate in [true, false] {
            let cfg = DetectorConfig {
                tolerate_rank_transition: tolerate,
                ..DetectorConfig::default()
            };
            let mut det = CentralizedDetector::new(key, consts(), cfg);
            det.process(&dao(1, 768, 5, 512, &key), SimTime(1));
            det.process(&dao(2, 1024, 1, 768, &key), SimTime(2));
            // node 1 found a better parent; child 2 has not re-reported yet
            let out = det.process(&dao(1, 512, 0, 256, &key), SimTime(3));
            assert_eq!(out.is_malicious(), !tolerate);
        }
    }

    #[test]
    fn malicious_set_is_monotone_and_idempotent() {
        let key = SecretKey::default();
        let mut det = CentralizedDetector::new(key, consts(), DetectorConfig::default());
        det.process(&dao(1, 300, 0, 256, &key), SimTime(1));
        assert!(det.is_malicious(NodeId(1)));
        det.process(&dao(1, 300, 0, 256, &key), SimTime(2));
        det.process(&dao(1, 512, 0, 256, &key), SimTime(3));
        assert_eq!(det.malicious().len(), 1);
    }
}
