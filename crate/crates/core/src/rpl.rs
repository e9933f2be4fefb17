//! Per-node RPL state: MRHOF-style rank computation over ETX, preferred
//! parent selection with switching hysteresis, DIO/DIS handling and DAO
//! construction for non-storing mode.

use thiserror::Error;

use crate::detector::distributed_prepare;
use crate::model::{DioMessage, DisMessage, EtxMetric, NodeId, Rank, RplConstants, SecretKey};
use crate::wire::{DaoMessage, TransitInfoExt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RplError {
    #[error("computed rank exceeds 16 bits")]
    RankOverflow,
    #[error("no usable parent candidates")]
    NoCandidates,
    #[error("node is not joined to the DODAG")]
    NotJoined,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub id: NodeId,
    pub rank: Rank,
    pub etx: EtxMetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParentChoice {
    pub parent: NodeId,
    pub parent_rank: Rank,
    /// The selecting node's resulting rank.
    pub rank: Rank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    BroadcastDio(Rank),
    SendDao,
}

/// `parent_rank + round(etx * MinHopRankIncrease)`.
pub fn compute_rank(
    parent_rank: Rank,
    link: EtxMetric,
    consts: &RplConstants,
) -> Result<Rank, RplError> {
    if parent_rank.is_infinite() {
        return Err(RplError::RankOverflow);
    }
    let step = (link.value() * consts.min_hop_rank_increase as f64).round();
    let total = parent_rank.get() as f64 + step;
    if total >= Rank::INFINITE.get() as f64 {
        return Err(RplError::RankOverflow);
    }
    Rank::new(total as u16).map_err(|_| RplError::RankOverflow)
}

/// Picks the candidate yielding the lowest own rank (ties: lower advertised
/// rank, then lower id). An existing parent is kept unless the best
/// candidate improves on it by more than `PST * MinHopRankIncrease`.
pub fn select_parent(
    candidates: &[Candidate],
    current: Option<NodeId>,
    consts: &RplConstants,
) -> Result<ParentChoice, RplError> {
    let usable = candidates.iter().filter_map(|c| {
        compute_rank(c.rank, c.etx, consts).ok().map(|rank| ParentChoice {
            parent: c.id,
            parent_rank: c.rank,
            rank,
        })
    });

    let mut best: Option<ParentChoice> = None;
    let mut incumbent: Option<ParentChoice> = None;
    for choice in usable {
        if Some(choice.parent) == current {
            incumbent = Some(choice);
        }
        let better = match best {
            None => true,
            Some(b) => {
                (choice.rank, choice.parent_rank, choice.parent) < (b.rank, b.parent_rank, b.parent)
            }
        };
        if better {
            best = Some(choice);
        }
    }
    let best = best.ok_or(RplError::NoCandidates)?;
    match incumbent {
        Some(inc) if (inc.rank.get() as f64 - best.rank.get() as f64) <= consts.switching_hysteresis() => {
            Ok(inc)
        }
        _ => Ok(best),
    }
}

#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: NodeId,
    pub root: NodeId,
    pub rank: Rank,
    pub preferred_parent: Option<NodeId>,
    pub parent_rank: Option<Rank>,
    pub candidates: Vec<Candidate>,
    pub joined: bool,
    pub dao_sequence: u8,
    pub dodag_version: u8,
}

impl NodeState {
    pub fn new(id: NodeId, root: NodeId) -> Self {
        NodeState {
            id,
            root,
            rank: Rank::INFINITE,
            preferred_parent: None,
            parent_rank: None,
            candidates: Vec::new(),
            joined: false,
            dao_sequence: 0,
            dodag_version: 0,
        }
    }

    pub fn sink(id: NodeId, consts: &RplConstants) -> Self {
        NodeState {
            rank: consts.root_rank(),
            joined: true,
            ..NodeState::new(id, id)
        }
    }

    pub fn is_sink(&self) -> bool {
        self.id == self.root
    }

    pub fn dio(&self) -> DioMessage {
        DioMessage {
            sender: self.id,
            advertised_rank: self.rank,
            dodag_version: self.dodag_version,
        }
    }

    fn upsert_candidate(&mut self, cand: Candidate) {
        match self.candidates.iter_mut().find(|c| c.id == cand.id) {
            Some(slot) => *slot = cand,
            None => {
                self.candidates.push(cand);
                self.candidates.sort_by_key(|c| c.id);
            }
        }
    }

    /// Drops a neighbor from the candidate set and re-selects.
    pub fn remove_candidate(&mut self, id: NodeId, consts: &RplConstants) -> Vec<Action> {
        self.candidates.retain(|c| c.id != id);
        self.reselect(consts)
    }

    fn reselect(&mut self, consts: &RplConstants) -> Vec<Action> {
        if self.is_sink() {
            return Vec::new();
        }
        let before = (self.joined, self.preferred_parent, self.rank);
        let current = if self.joined { self.preferred_parent } else { None };
        match select_parent(&self.candidates, current, consts) {
            Ok(choice) => {
                self.joined = true;
                self.preferred_parent = Some(choice.parent);
                self.parent_rank = Some(choice.parent_rank);
                self.rank = choice.rank;
            }
            Err(_) => {
                self.joined = false;
                self.preferred_parent = None;
                self.parent_rank = None;
                self.rank = Rank::INFINITE;
            }
        }
        let after = (self.joined, self.preferred_parent, self.rank);
        if before == after {
            Vec::new()
        } else if self.joined {
            vec![Action::SendDao, Action::BroadcastDio(self.rank)]
        } else {
            vec![Action::BroadcastDio(Rank::INFINITE)]
        }
    }
}

pub fn handle_dio(
    state: &mut NodeState,
    dio: &DioMessage,
    link: EtxMetric,
    consts: &RplConstants,
) -> Vec<Action> {
    if state.is_sink() || dio.sender == state.id {
        return Vec::new();
    }
    if dio.advertised_rank.is_infinite() {
        state.candidates.retain(|c| c.id != dio.sender);
    } else {
        state.upsert_candidate(Candidate {
            id: dio.sender,
            rank: dio.advertised_rank,
            etx: link,
        });
    }
    state.reselect(consts)
}

pub fn handle_dis(state: &NodeState, _dis: &DisMessage) -> Vec<Action> {
    if state.joined {
        vec![Action::BroadcastDio(state.rank)]
    } else {
        Vec::new()
    }
}

/// Builds a DAO carrying the node's true rank, parent rank and MAC.
pub fn build_dao(state: &mut NodeState, key: &SecretKey) -> Result<DaoMessage, RplError> {
    let (parent, parent_rank) = match (state.joined, state.preferred_parent, state.parent_rank) {
        (true, Some(p), Some(r)) if !state.is_sink() => (p, r),
        _ => return Err(RplError::NotJoined),
    };
    let add = distributed_prepare(state.id, state.rank, parent, parent_rank, key);
    let mut transit = TransitInfoExt::new(parent, add.parent_rank, add.rank, add.mac);
    transit.path_sequence = state.dao_sequence;
    let dao = DaoMessage::new(state.id, state.root, state.dao_sequence, transit);
    state.dao_sequence = state.dao_sequence.wrapping_add(1);
    Ok(dao)
}
