//! Evaluation metrics computed from a finished run.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::model::{NodeId, SimTime};
use crate::sim::{EnergyLedger, SimOutput, SimTrace, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("rate is undefined: denominator is zero")]
    UndefinedRate,
    #[error("no data packets were sent")]
    NoTraffic,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GroundTruth {
    pub attackers: BTreeSet<NodeId>,
    /// Activation time per attacker; absent if the attack never activated.
    pub onsets: BTreeMap<NodeId, SimTime>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// `all_nodes` counts the nodes eligible for a verdict, i.e. excluding the sink.
pub fn confusion(detected: &BTreeSet<NodeId>, truth: &GroundTruth, all_nodes: usize) -> Confusion {
    let tp = detected.intersection(&truth.attackers).count();
    let fp = detected.len() - tp;
    let fn_ = truth.attackers.len() - tp;
    Confusion {
        tp,
        tn: all_nodes.saturating_sub(tp + fp + fn_),
        fp,
        fn_,
    }
}

pub fn accuracy(detected: &BTreeSet<NodeId>, truth: &GroundTruth, all_nodes: usize) -> f64 {
    let c = confusion(detected, truth, all_nodes);
    if all_nodes == 0 {
        return 1.0;
    }
    (c.tp + c.tn) as f64 / all_nodes as f64
}

pub fn fpr(detected: &BTreeSet<NodeId>, truth: &GroundTruth, legit_count: usize) -> Result<f64, MetricError> {
    if legit_count == 0 {
        return Err(MetricError::UndefinedRate);
    }
    let fp = detected.difference(&truth.attackers).count();
    Ok(fp as f64 / legit_count as f64)
}

pub fn fnr(detected: &BTreeSet<NodeId>, truth: &GroundTruth, attacker_count: usize) -> Result<f64, MetricError> {
    if attacker_count == 0 {
        return Err(MetricError::UndefinedRate);
    }
    let missed = truth.attackers.difference(detected).count();
    Ok(missed as f64 / attacker_count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Latency {
    Detected(SimTime),
    NotDetected,
}

/// Time from activation to the first malicious verdict, per attacker.
pub fn detection_latency(trace: &SimTrace, truth: &GroundTruth) -> BTreeMap<NodeId, Latency> {
    let mut first_flag: BTreeMap<NodeId, SimTime> = BTreeMap::new();
    for e in trace.events() {
        if let TraceEvent::Verdict { t, node, outcome, .. } = e {
            if outcome.is_malicious() {
                first_flag.entry(*node).or_insert(*t);
            }
        }
    }
    truth
        .attackers
        .iter()
        .map(|a| {
            let lat = match (truth.onsets.get(a), first_flag.get(a)) {
                (Some(on), Some(flag)) => Latency::Detected(flag.saturating_sub(*on)),
                _ => Latency::NotDetected,
            };
            (*a, lat)
        })
        .collect()
}

pub fn pdr(trace: &SimTrace) -> Result<f64, MetricError> {
    let (mut sent, mut delivered) = (0usize, 0usize);
    for e in trace.events() {
        match e {
            TraceEvent::DataSent { .. } => sent += 1,
            TraceEvent::DataDelivered { .. } => delivered += 1,
            _ => {}
        }
    }
    if sent == 0 {
        return Err(MetricError::NoTraffic);
    }
    Ok(delivered as f64 / sent as f64)
}

pub fn total_energy(ledger: &EnergyLedger) -> f64 {
    ledger.total_mj()
}

/// Network-wide communication energy (mJ) of each DAO, keyed by message id.
pub fn per_dao_energy(trace: &SimTrace) -> BTreeMap<u64, f64> {
    use crate::sim::energy::{RX_MJ_PER_BYTE, TX_MJ_PER_BYTE};
    use crate::sim::MsgKind;
    let mut out: BTreeMap<u64, f64> = BTreeMap::new();
    for e in trace.events() {
        match e {
            TraceEvent::Tx { msg_id, kind: MsgKind::Dao, bytes, .. } => {
                *out.entry(*msg_id).or_default() += *bytes as f64 * TX_MJ_PER_BYTE;
            }
            TraceEvent::Rx { msg_id, kind: MsgKind::Dao, bytes, .. } => {
                *out.entry(*msg_id).or_default() += *bytes as f64 * RX_MJ_PER_BYTE;
            }
            _ => {}
        }
    }
    out
}

/// Summary of one run. Rates with a zero denominator are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub accuracy: f64,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    /// Mean over detected attackers, seconds.
    pub latency: Option<f64>,
    pub pdr: Option<f64>,
    pub energy_mj: f64,
    pub attackers: usize,
    pub detected: usize,
}

impl RunMetrics {
    pub fn from_output(out: &SimOutput) -> RunMetrics {
        let eligible = out.nodes.len().saturating_sub(1);
        let detected: BTreeSet<NodeId> = out
            .detector
            .malicious()
            .iter()
            .copied()
            .filter(|n| n.0 != 0)
            .collect();
        let truth = &out.truth;
        let legit = eligible - truth.attackers.len();
        let lats: Vec<f64> = detection_latency(&out.trace, truth)
            .values()
            .filter_map(|l| match l {
                Latency::Detected(t) => Some(t.as_secs()),
                Latency::NotDetected => None,
            })
            .collect();
        RunMetrics {
            accuracy: accuracy(&detected, truth, eligible),
            fpr: fpr(&detected, truth, legit).ok(),
            fnr: fnr(&detected, truth, truth.attackers.len()).ok(),
            latency: (!lats.is_empty()).then(|| lats.iter().sum::<f64>() / lats.len() as f64),
            pdr: pdr(&out.trace).ok(),
            energy_mj: total_energy(&out.ledger),
            attackers: truth.attackers.len(),
            detected: detected.len(),
        }
    }

    /// `(name, value)` pairs in a fixed order; undefined values are skipped.
    pub fn named(&self) -> Vec<(&'static str, f64)> {
        let mut v = vec![("accuracy", self.accuracy)];
        v.extend(self.fpr.map(|x| ("fpr", x)));
        v.extend(self.fnr.map(|x| ("fnr", x)));
        v.extend(self.latency.map(|x| ("latency_s", x)));
        v.extend(self.pdr.map(|x| ("pdr", x)));
        v.push(("energy_mj", self.energy_mj));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DetectionOutcome, MaliciousCause};

    fn ids(v: &[u16]) -> BTreeSet<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    fn truth(v: &[u16]) -> GroundTruth {
        GroundTruth {
            attackers: ids(v),
            onsets: BTreeMap::new(),
        }
    }

    #[test]
    fn accuracy_examples() {
        let t = truth(&[1, 2, 3, 4, 5]);
        assert_eq!(accuracy(&ids(&[1, 2, 3, 4, 5]), &t, 50), 1.0);
        assert_eq!(accuracy(&ids(&[1, 2, 3, 4, 9]), &t, 50), 0.96);
        assert_eq!(accuracy(&ids(&[]), &truth(&[]), 50), 1.0);
    }

    #[test]
    fn rate_examples() {
        let t = truth(&[1, 2, 3, 4, 5]);
        let f = fpr(&ids(&[10, 11, 12]), &t, 45).unwrap();
        assert!((f - 3.0 / 45.0).abs() < 1e-12);
        assert_eq!(fnr(&ids(&[1, 2, 3, 4]), &t, 5), Ok(0.2));
        assert_eq!(fnr(&ids(&[]), &truth(&[]), 0), Err(MetricError::UndefinedRate));
    }

    #[test]
    fn confusion_sums() {
        let t = truth(&[1, 2, 3]);
        let c = confusion(&ids(&[2, 3, 7, 8]), &t, 20);
        assert_eq!(c.tp + c.tn + c.fp + c.fn_, 20);
        let acc = accuracy(&ids(&[2, 3, 7, 8]), &t, 20);
        assert_eq!(acc + (c.fp + c.fn_) as f64 / 20.0, 1.0);
    }

    fn verdict(t: f64, node: u16) -> TraceEvent {
        TraceEvent::Verdict {
            t: SimTime::from_secs(t),
            msg_id: 0,
            node: NodeId(node),
            outcome: DetectionOutcome::Malicious(MaliciousCause::DecreasedRank),
        }
    }

    #[test]
    fn latency_per_attacker() {
        let mut trace = SimTrace::new();
        trace.push(verdict(412.0, 1));
        trace.push(verdict(500.0, 1));
        let mut t = truth(&[1, 2]);
        t.onsets.insert(NodeId(1), SimTime::from_secs(300.0));
        t.onsets.insert(NodeId(2), SimTime::from_secs(300.0));
        let lat = detection_latency(&trace, &t);
        assert_eq!(lat[&NodeId(1)], Latency::Detected(SimTime::from_secs(112.0)));
        assert_eq!(lat[&NodeId(2)], Latency::NotDetected);
    }

    #[test]
    fn pdr_counts() {
        let mut trace = SimTrace::new();
        assert_eq!(pdr(&trace), Err(MetricError::NoTraffic));
        for i in 0..10 {
            trace.push(TraceEvent::DataSent { t: SimTime(i), msg_id: i, node: NodeId(1) });
        }
        for i in 0..9 {
            trace.push(TraceEvent::DataDelivered { t: SimTime(20), msg_id: i, node: NodeId(1), hops: 1 });
        }
        assert_eq!(pdr(&trace), Ok(0.9));
    }

    #[test]
    fn energy_of_one_hop() {
        use crate::sim::EnergyEvent;
        let mut l = EnergyLedger::new(2);
        l.account(NodeId(1), EnergyEvent::Tx(78));
        l.account(NodeId(0), EnergyEvent::Rx(78));
        assert!((total_energy(&l) - 0.27768).abs() < 1e-12);
    }
}
