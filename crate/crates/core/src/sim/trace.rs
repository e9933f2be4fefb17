//! Simulation event log, exported as one JSON object per line.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::model::{DetectionOutcome, NodeId, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MsgKind {
    Dio,
    Dis,
    Dao,
    Data,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Loss,
    NoRoute,
    HopLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Boot { t: SimTime, node: NodeId },
    /// `to` is absent for broadcasts.
    Tx {
        t: SimTime,
        msg_id: u64,
        node: NodeId,
        kind: MsgKind,
        bytes: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        to: Option<NodeId>,
    },
    Rx {
        t: SimTime,
        msg_id: u64,
        node: NodeId,
        from: NodeId,
        kind: MsgKind,
        bytes: u32,
    },
    Drop {
        t: SimTime,
        msg_id: u64,
        node: NodeId,
        kind: MsgKind,
        reason: DropReason,
    },
    Join { t: SimTime, node: NodeId, parent: NodeId, rank: u16 },
    ParentSwitch { t: SimTime, node: NodeId, old: NodeId, new: NodeId, rank: u16 },
    RankChange { t: SimTime, node: NodeId, rank: u16 },
    Detach { t: SimTime, node: NodeId },
    AttackActivated { t: SimTime, node: NodeId },
    DaoOriginated {
        t: SimTime,
        msg_id: u64,
        node: NodeId,
        parent: NodeId,
        rank: u16,
        parent_rank: u16,
    },
    Verdict {
        t: SimTime,
        msg_id: u64,
        node: NodeId,
        outcome: DetectionOutcome,
    },
    DaoDecodeError { t: SimTime, msg_id: u64, error: String },
    DataSent { t: SimTime, msg_id: u64, node: NodeId },
    DataDelivered { t: SimTime, msg_id: u64, node: NodeId, hops: u8 },
}

impl TraceEvent {
    pub fn time(&self) -> SimTime {
        use TraceEvent::*;
        match self {
            Boot { t, .. }
            | Tx { t, .. }
            | Rx { t, .. }
            | Drop { t, .. }
            | Join { t, .. }
            | ParentSwitch { t, .. }
            | RankChange { t, .. }
            | Detach { t, .. }
            | AttackActivated { t, .. }
            | DaoOriginated { t, .. }
            | Verdict { t, .. }
            | DaoDecodeError { t, .. }
            | DataSent { t, .. }
            | DataDelivered { t, .. } => *t,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimTrace {
    events: Vec<TraceEvent>,
}

impl SimTrace {
    pub fn new() -> Self {
        SimTrace::default()
    }

    pub fn push(&mut self, event: TraceEvent) {
        debug_assert!(self.events.last().is_none_or(|e| e.time() <= event.time()));
        self.events.push(event);
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn from_jsonl(text: &str) -> Result<SimTrace, serde_json::Error> {
        let events = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(SimTrace { events })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MaliciousCause;

    #[test]
    fn jsonl_round_trip() {
        let mut t = SimTrace::new();
        t.push(TraceEvent::Boot { t: SimTime(5), node: NodeId(1) });
        t.push(TraceEvent::Tx {
            t: SimTime(6),
            msg_id: 1,
            node: NodeId(1),
            kind: MsgKind::Dis,
            bytes: 2,
            to: None,
        });
        t.push(TraceEvent::Verdict {
            t: SimTime(9),
            msg_id: 3,
            node: NodeId(2),
            outcome: DetectionOutcome::Malicious(MaliciousCause::IncreasedRank),
        });
        let text = t.to_jsonl();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with(r#"{"event":"boot","t":5,"node":1}"#));
        assert!(text.contains(r#""outcome":{"verdict":"malicious","cause":"increased_rank"}"#));
        assert_eq!(SimTrace::from_jsonl(&text).unwrap(), t);
    }
}
