use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use super::energy::{EnergyEvent, EnergyLedger, MAC_CYCLES};
use super::radio::{deliver, in_range};
use super::scenario::{EtxAssignment, Position, Scenario, ScenarioError, Topology};
use super::trace::{DropReason, MsgKind, SimTrace, TraceEvent};
use crate::adversary::{apply_to_dao, apply_to_dio, AttackSpec, Onset};
use crate::detector::CentralizedDetector;
use crate::metrics::GroundTruth;
use crate::model::{DisMessage, EtxMetric, NodeId, SecretKey, SimTime};
use crate::rpl::{build_dao, handle_dio, handle_dis, Action, NodeState};
use crate::wire::DaoMessage;

/// On-air sizes for messages whose layout is not modelled byte for byte.
pub const DIO_BYTES: u32 = 24;
pub const DIS_BYTES: u32 = 2;
pub const DATA_BYTES: u32 = 32;
pub const HOP_LIMIT: u8 = 64;

const SINK: NodeId = NodeId(0);
const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("no node is within radio range of the sink")]
    DisconnectedRoot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NodeSnapshot {
    pub id: NodeId,
    pub joined: bool,
    pub rank: u16,
    pub parent: Option<NodeId>,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub trace: SimTrace,
    pub ledger: EnergyLedger,
    pub detector: CentralizedDetector,
    pub truth: GroundTruth,
    pub positions: Vec<Position>,
    pub nodes: Vec<NodeSnapshot>,
}

/// Hop counts from the sink over the unit-disk graph; `None` if unreachable.
pub fn hop_distances(positions: &[Position], tx_range: f64) -> Vec<Option<u32>> {
    let mut dist = vec![None; positions.len()];
    if positions.is_empty() {
        return dist;
    }
    dist[0] = Some(0);
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].expect("queued nodes have a distance");
        for v in 0..positions.len() {
            if dist[v].is_none() && in_range(&positions[u], &positions[v], tx_range) {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Node positions for a scenario. Random layouts are redrawn until every
/// node reaches the sink, keeping the best-connected draw if none does.
pub fn place_nodes<R: Rng>(scenario: &Scenario, rng: &mut R) -> Result<Vec<Position>, SimError> {
    let n = scenario.node_count;
    let positions = match &scenario.topology {
        Topology::Line { spacing } => (0..n)
            .map(|i| Position { x: i as f64 * spacing, y: 0.0 })
            .collect(),
        Topology::Explicit { positions } => positions.clone(),
        Topology::Random { width, height } => {
            let mut best: Option<(usize, Vec<Position>)> = None;
            for _ in 0..MAX_PLACEMENT_ATTEMPTS {
                let mut ps = vec![Position { x: width / 2.0, y: height / 2.0 }];
                ps.extend((1..n).map(|_| Position {
                    x: rng.gen::<f64>() * width,
                    y: rng.gen::<f64>() * height,
                }));
                let reach = hop_distances(&ps, scenario.tx_range)
                    .iter()
                    .filter(|d| d.is_some())
                    .count();
                if best.as_ref().is_none_or(|(r, _)| reach > *r) {
                    best = Some((reach, ps));
                }
                if reach == n {
                    break;
                }
            }
            best.expect("at least one attempt").1
        }
    };
    if !positions[1..].iter().any(|p| in_range(&positions[0], p, scenario.tx_range)) {
        return Err(SimError::DisconnectedRoot);
    }
    Ok(positions)
}

#[derive(Debug, Clone)]
enum Packet {
    Dio(crate::model::DioMessage),
    Dis(DisMessage),
    Dao { bytes: Vec<u8>, hops: u8 },
    Data { origin: NodeId, hops: u8 },
}

impl Packet {
    fn kind(&self) -> MsgKind {
        match self {
            Packet::Dio(_) => MsgKind::Dio,
            Packet::Dis(_) => MsgKind::Dis,
            Packet::Dao { .. } => MsgKind::Dao,
            Packet::Data { .. } => MsgKind::Data,
        }
    }

    fn size(&self) -> u32 {
        match self {
            Packet::Dio(_) => DIO_BYTES,
            Packet::Dis(_) => DIS_BYTES,
            Packet::Dao { bytes, .. } => bytes.len() as u32,
            Packet::Data { .. } => DATA_BYTES,
        }
    }
}

#[derive(Debug, Clone)]
enum Ev {
    Boot(NodeId),
    Recv { to: NodeId, from: NodeId, msg_id: u64, pkt: Packet },
    DioTimer(NodeId),
    DaoFire(NodeId),
    DaoRefresh(NodeId),
    DisTimer(NodeId),
    DataTimer(NodeId),
    Onset(NodeId),
}

#[derive(Debug)]
struct Queued {
    time: SimTime,
    seq: u64,
    ev: Ev,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Timers {
    periodic_started: bool,
    dao_pending: bool,
}

struct Engine<'a> {
    sc: &'a Scenario,
    rng: ChaCha8Rng,
    now: SimTime,
    end: SimTime,
    queue: BinaryHeap<Reverse<Queued>>,
    seq: u64,
    next_msg: u64,
    pos: Vec<Position>,
    neighbors: Vec<Vec<NodeId>>,
    per_link: BTreeMap<(u16, u16), EtxMetric>,
    nodes: Vec<NodeState>,
    booted: Vec<bool>,
    timers: Vec<Timers>,
    attacks: Vec<Option<AttackSpec>>,
    key: SecretKey,
    detector: CentralizedDetector,
    ledger: EnergyLedger,
    trace: SimTrace,
    truth: GroundTruth,
    evicted: BTreeSet<NodeId>,
}

pub fn run(scenario: &Scenario) -> Result<SimOutput, SimError> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let pos = place_nodes(scenario, &mut rng)?;
    let n = scenario.node_count;

    let neighbors = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && in_range(&pos[i], &pos[j], scenario.tx_range))
                .map(|j| NodeId(j as u16))
                .collect()
        })
        .collect();

    let mut per_link = BTreeMap::new();
    if let EtxAssignment::PerLink { links, .. } = &scenario.etx {
        for l in links {
            let key = (l.a.0.min(l.b.0), l.a.0.max(l.b.0));
            per_link.insert(key, EtxMetric::new(l.etx).expect("validated"));
        }
    }

    let mut attacks = vec![None; n];
    let mut truth = GroundTruth::default();
    for a in &scenario.attacks {
        let slot = &mut attacks[a.node.0 as usize];
        if slot.is_none() {
            *slot = Some(*a);
            truth.attackers.insert(a.node);
        }
    }

    let key = SecretKey::default();
    let mut nodes: Vec<NodeState> = (0..n).map(|i| NodeState::new(NodeId(i as u16), SINK)).collect();
    nodes[0] = NodeState::sink(SINK, &scenario.consts);

    let mut eng = Engine {
        sc: scenario,
        rng,
        now: SimTime::ZERO,
        end: SimTime::from_secs(scenario.duration),
        queue: BinaryHeap::new(),
        seq: 0,
        next_msg: 0,
        pos,
        neighbors,
        per_link,
        nodes,
        booted: vec![false; n],
        timers: vec![Timers::default(); n],
        attacks,
        key,
        detector: CentralizedDetector::new(key, scenario.consts, scenario.detector),
        ledger: EnergyLedger::new(n),
        trace: SimTrace::new(),
        truth,
        evicted: BTreeSet::new(),
    };

    for i in 0..n {
        let ms = eng.rng.gen::<f64>() * scenario.startup_delay;
        eng.schedule(SimTime::from_millis(ms), Ev::Boot(NodeId(i as u16)));
    }
    for a in eng.attacks.clone().into_iter().flatten() {
        if let Onset::Delayed(secs) = a.onset {
            eng.schedule(SimTime::from_secs(secs), Ev::Onset(a.node));
        }
    }
    eng.run_loop();

    let nodes = eng
        .nodes
        .iter()
        .map(|s| NodeSnapshot {
            id: s.id,
            joined: s.joined,
            rank: s.rank.get(),
            parent: s.preferred_parent,
        })
        .collect();
    Ok(SimOutput {
        trace: eng.trace,
        ledger: eng.ledger,
        detector: eng.detector,
        truth: eng.truth,
        positions: eng.pos,
        nodes,
    })
}

impl Engine<'_> {
    fn schedule(&mut self, time: SimTime, ev: Ev) {
        let is_timer = !matches!(ev, Ev::Recv { .. });
        if is_timer && time > self.end {
            return;
        }
        self.seq += 1;
        self.queue.push(Reverse(Queued { time, seq: self.seq, ev }));
    }

    fn after_secs(&self, secs: f64) -> SimTime {
        self.now + SimTime::from_secs(secs)
    }

    fn hop_delay(&self) -> SimTime {
        self.now + SimTime::from_millis(self.sc.hop_latency)
    }

    fn msg_id(&mut self) -> u64 {
        self.next_msg += 1;
        self.next_msg
    }

    fn log(&mut self, event: TraceEvent) {
        self.trace.push(event);
    }

    fn link_etx(&self, a: NodeId, b: NodeId) -> EtxMetric {
        match &self.sc.etx {
            EtxAssignment::Uniform { value } => EtxMetric::new(*value).expect("validated"),
            EtxAssignment::PerLink { default, .. } => self
                .per_link
                .get(&(a.0.min(b.0), a.0.max(b.0)))
                .copied()
                .unwrap_or_else(|| EtxMetric::new(*default).expect("validated")),
            EtxAssignment::LossDerived => {
                EtxMetric::new(1.0 / (1.0 - self.sc.link_loss)).expect("loss below 1")
            }
        }
    }

    fn run_loop(&mut self) {
        while let Some(Reverse(q)) = self.queue.pop() {
            self.now = q.time;
            match q.ev {
                Ev::Boot(n) => self.on_boot(n),
                Ev::Recv { to, from, msg_id, pkt } => self.on_recv(to, from, msg_id, pkt),
                Ev::DioTimer(n) => {
                    if self.nodes[n.0 as usize].joined {
                        self.emit_dio(n);
                    }
                    let t = self.after_secs(self.sc.consts.dio_interval);
                    self.schedule(t, Ev::DioTimer(n));
                }
                Ev::DaoFire(n) => {
                    self.timers[n.0 as usize].dao_pending = false;
                    self.originate_dao(n);
                }
                Ev::DaoRefresh(n) => {
                    self.originate_dao(n);
                    let t = self.after_secs(self.sc.consts.dao_refresh_interval);
                    self.schedule(t, Ev::DaoRefresh(n));
                }
                Ev::DisTimer(n) => {
                    if !self.nodes[n.0 as usize].joined {
                        self.emit_dis(n);
                        let t = self.after_secs(self.sc.dis_interval);
                        self.schedule(t, Ev::DisTimer(n));
                    }
                }
                Ev::DataTimer(n) => {
                    self.originate_data(n);
                    let t = self.after_secs(self.sc.packet_interval);
                    self.schedule(t, Ev::DataTimer(n));
                }
                Ev::Onset(n) => self.on_onset(n),
            }
        }
    }

    fn on_boot(&mut self, n: NodeId) {
        self.booted[n.0 as usize] = true;
        self.log(TraceEvent::Boot { t: self.now, node: n });
        if n == SINK {
            self.emit_dio(n);
            let t = self.after_secs(self.sc.consts.dio_interval);
            self.schedule(t, Ev::DioTimer(n));
        } else {
            self.emit_dis(n);
            let t = self.after_secs(self.sc.dis_interval);
            self.schedule(t, Ev::DisTimer(n));
        }
    }

    fn activate(&mut self, n: NodeId) {
        if self.truth.onsets.contains_key(&n) {
            return;
        }
        self.truth.onsets.insert(n, self.now);
        self.log(TraceEvent::AttackActivated { t: self.now, node: n });
    }

    fn on_onset(&mut self, n: NodeId) {
        self.activate(n);
        if self.nodes[n.0 as usize].joined {
            self.emit_dio(n);
            self.request_dao(n);
        }
    }

    fn broadcast(&mut self, n: NodeId, pkt: Packet) {
        let msg_id = self.msg_id();
        let bytes = pkt.size();
        self.log(TraceEvent::Tx {
            t: self.now,
            msg_id,
            node: n,
            kind: pkt.kind(),
            bytes,
            to: None,
        });
        self.ledger.account(n, EnergyEvent::Tx(bytes as u64));
        let at = self.hop_delay();
        let receivers = self.neighbors[n.0 as usize].clone();
        for m in receivers {
            let ok = deliver(
                &self.pos[n.0 as usize],
                &self.pos[m.0 as usize],
                self.sc.tx_range,
                self.sc.link_loss,
                &mut self.rng,
            );
            if ok {
                self.schedule(at, Ev::Recv { to: m, from: n, msg_id, pkt: pkt.clone() });
            }
        }
    }

    fn emit_dio(&mut self, n: NodeId) {
        let mut dio = self.nodes[n.0 as usize].dio();
        if let Some(spec) = self.attacks[n.0 as usize] {
            dio = apply_to_dio(dio, &spec, self.now);
        }
        self.broadcast(n, Packet::Dio(dio));
    }

    fn emit_dis(&mut self, n: NodeId) {
        self.broadcast(n, Packet::Dis(DisMessage { sender: n }));
    }

    /// Sends `pkt` one hop up the preferred-parent chain.
    fn forward(&mut self, n: NodeId, msg_id: u64, pkt: Packet) {
        let kind = pkt.kind();
        let hops = match &pkt {
            Packet::Dao { hops, .. } | Packet::Data { hops, .. } => *hops,
            _ => unreachable!("only DAO and data are routed"),
        };
        let state = &self.nodes[n.0 as usize];
        let parent = match state.preferred_parent {
            Some(p) if state.joined => p,
            _ => {
                let reason = DropReason::NoRoute;
                self.log(TraceEvent::Drop { t: self.now, msg_id, node: n, kind, reason });
                return;
            }
        };
        if hops >= HOP_LIMIT {
            let reason = DropReason::HopLimit;
            self.log(TraceEvent::Drop { t: self.now, msg_id, node: n, kind, reason });
            return;
        }
        let bytes = pkt.size();
        self.log(TraceEvent::Tx {
            t: self.now,
            msg_id,
            node: n,
            kind,
            bytes,
            to: Some(parent),
        });
        self.ledger.account(n, EnergyEvent::Tx(bytes as u64));
        let ok = deliver(
            &self.pos[n.0 as usize],
            &self.pos[parent.0 as usize],
            self.sc.tx_range,
            self.sc.link_loss,
            &mut self.rng,
        );
        if !ok {
            let reason = DropReason::Loss;
            self.log(TraceEvent::Drop { t: self.now, msg_id, node: n, kind, reason });
            return;
        }
        let pkt = match pkt {
            Packet::Dao { bytes, hops } => Packet::Dao { bytes, hops: hops + 1 },
            Packet::Data { origin, hops } => Packet::Data { origin, hops: hops + 1 },
            other => other,
        };
        let at = self.hop_delay();
        self.schedule(at, Ev::Recv { to: parent, from: n, msg_id, pkt });
    }

    fn on_recv(&mut self, to: NodeId, from: NodeId, msg_id: u64, pkt: Packet) {
        if !self.booted[to.0 as usize] {
            return;
        }
        let bytes = pkt.size();
        self.ledger.account(to, EnergyEvent::Rx(bytes as u64));
        self.log(TraceEvent::Rx {
            t: self.now,
            msg_id,
            node: to,
            from,
            kind: pkt.kind(),
            bytes,
        });
        match pkt {
            Packet::Dio(dio) => {
                if self.evicted.contains(&dio.sender) {
                    return;
                }
                let etx = self.link_etx(to, from);
                let consts = self.sc.consts;
                self.with_route_change(to, |s| handle_dio(s, &dio, etx, &consts));
            }
            Packet::Dis(dis) => {
                let actions = handle_dis(&self.nodes[to.0 as usize], &dis);
                self.apply_actions(to, actions);
            }
            Packet::Dao { bytes, hops } => {
                if to == SINK {
                    self.sink_receive(msg_id, &bytes);
                } else {
                    self.forward(to, msg_id, Packet::Dao { bytes, hops });
                }
            }
            Packet::Data { origin, hops } => {
                if to == SINK {
                    self.log(TraceEvent::DataDelivered { t: self.now, msg_id, node: origin, hops });
                } else {
                    self.forward(to, msg_id, Packet::Data { origin, hops });
                }
            }
        }
    }

    /// Runs a state update and logs and reacts to any route change.
    fn with_route_change<F>(&mut self, n: NodeId, update: F)
    where
        F: FnOnce(&mut NodeState) -> Vec<Action>,
    {
        let i = n.0 as usize;
        let before = (self.nodes[i].joined, self.nodes[i].preferred_parent, self.nodes[i].rank);
        let actions = update(&mut self.nodes[i]);
        let s = &self.nodes[i];
        let (joined, parent, rank) = (s.joined, s.preferred_parent, s.rank);
        let t = self.now;
        match (before.0, joined) {
            (false, true) => {
                let parent = parent.expect("joined nodes have a parent");
                self.log(TraceEvent::Join { t, node: n, parent, rank: rank.get() });
                self.on_first_join(n);
            }
            (true, false) => {
                self.log(TraceEvent::Detach { t, node: n });
                let at = self.after_secs(self.sc.dis_interval);
                self.schedule(at, Ev::DisTimer(n));
            }
            (true, true) if before.1 != parent => {
                let (old, new) = (before.1.expect("was joined"), parent.expect("is joined"));
                self.log(TraceEvent::ParentSwitch { t, node: n, old, new, rank: rank.get() });
            }
            (true, true) if before.2 != rank => {
                self.log(TraceEvent::RankChange { t, node: n, rank: rank.get() })
            }
            _ => {}
        }
        self.apply_actions(n, actions);
    }

    fn on_first_join(&mut self, n: NodeId) {
        let i = n.0 as usize;
        if let Some(spec) = self.attacks[i] {
            if spec.onset == Onset::ImmediateOnJoin {
                self.activate(n);
            }
        }
        if self.timers[i].periodic_started {
            return;
        }
        self.timers[i].periodic_started = true;
        let c = self.sc.consts;
        let t = self.after_secs(c.dio_interval);
        self.schedule(t, Ev::DioTimer(n));
        let t = self.after_secs(c.dao_refresh_interval);
        self.schedule(t, Ev::DaoRefresh(n));
        let t = self.after_secs(self.sc.packet_interval);
        self.schedule(t, Ev::DataTimer(n));
    }

    fn apply_actions(&mut self, n: NodeId, actions: Vec<Action>) {
        for a in actions {
            match a {
                Action::BroadcastDio(_) => self.emit_dio(n),
                Action::SendDao => self.request_dao(n),
            }
        }
    }

    fn request_dao(&mut self, n: NodeId) {
        let i = n.0 as usize;
        if n == SINK || self.timers[i].dao_pending {
            return;
        }
        let t = self.after_secs(self.sc.dao_delay);
        if t <= self.end {
            self.timers[i].dao_pending = true;
            self.schedule(t, Ev::DaoFire(n));
        }
    }

    fn originate_dao(&mut self, n: NodeId) {
        let i = n.0 as usize;
        let Ok(mut dao) = build_dao(&mut self.nodes[i], &self.key) else {
            return;
        };
        if let Some(spec) = self.attacks[i] {
            dao = apply_to_dao(dao, &spec, &self.key, self.now);
        }
        self.ledger.account(n, EnergyEvent::Cycles(MAC_CYCLES));
        let msg_id = self.msg_id();
        self.log(TraceEvent::DaoOriginated {
            t: self.now,
            msg_id,
            node: n,
            parent: dao.target_parent,
            rank: dao.transit.rank.get(),
            parent_rank: dao.transit.parent_rank.get(),
        });
        self.forward(n, msg_id, Packet::Dao { bytes: dao.encode(), hops: 0 });
    }

    fn originate_data(&mut self, n: NodeId) {
        if !self.nodes[n.0 as usize].joined {
            return;
        }
        let msg_id = self.msg_id();
        self.log(TraceEvent::DataSent { t: self.now, msg_id, node: n });
        self.forward(n, msg_id, Packet::Data { origin: n, hops: 0 });
    }

    fn sink_receive(&mut self, msg_id: u64, bytes: &[u8]) {
        let dao = match DaoMessage::decode(bytes) {
            Ok(d) => d,
            Err(e) => {
                self.log(TraceEvent::DaoDecodeError { t: self.now, msg_id, error: e.to_string() });
                return;
            }
        };
        self.ledger.account(SINK, EnergyEvent::Cycles(MAC_CYCLES));
        let outcome = self.detector.process(&dao, self.now);
        self.log(TraceEvent::Verdict { t: self.now, msg_id, node: dao.origin, outcome });
        if outcome.is_malicious() && self.sc.evict_malicious && self.evicted.insert(dao.origin) {
            let consts = self.sc.consts;
            for i in 1..self.nodes.len() {
                let id = NodeId(i as u16);
                if id != dao.origin {
                    self.with_route_change(id, |s| s.remove_candidate(dao.origin, &consts));
                }
            }
        }
    }
}
