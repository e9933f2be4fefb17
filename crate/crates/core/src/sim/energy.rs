//! Per-node energy accounting with fixed per-byte and per-cycle costs.

use serde::Serialize;

use crate::model::NodeId;

pub const TX_MJ_PER_BYTE: f64 = 0.00189;
pub const RX_MJ_PER_BYTE: f64 = 0.00167;
/// 3 V x 1.8 mA x 0.125 us.
pub const NJ_PER_CYCLE: f64 = 0.675;
/// Cycles for one MAC generation or verification.
pub const MAC_CYCLES: u64 = 6032;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyEvent {
    Tx(u64),
    Rx(u64),
    Cycles(u64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct NodeEnergy {
    pub tx_bytes: u64,
    pub rx_bytes: u64,
    pub compute_cycles: u64,
}

impl NodeEnergy {
    pub fn comm_mj(&self) -> f64 {
        self.tx_bytes as f64 * TX_MJ_PER_BYTE + self.rx_bytes as f64 * RX_MJ_PER_BYTE
    }

    pub fn comp_nj(&self) -> f64 {
        self.compute_cycles as f64 * NJ_PER_CYCLE
    }

    pub fn total_mj(&self) -> f64 {
        self.comm_mj() + self.comp_nj() * 1e-6
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EnergyLedger {
    nodes: Vec<NodeEnergy>,
}

impl EnergyLedger {
    pub fn new(node_count: usize) -> Self {
        EnergyLedger {
            nodes: vec![NodeEnergy::default(); node_count],
        }
    }

    pub fn account(&mut self, node: NodeId, event: EnergyEvent) {
        let slot = &mut self.nodes[node.0 as usize];
        match event {
            EnergyEvent::Tx(b) => slot.tx_bytes += b,
            EnergyEvent::Rx(b) => slot.rx_bytes += b,
            EnergyEvent::Cycles(c) => slot.compute_cycles += c,
        }
    }

    pub fn node(&self, node: NodeId) -> &NodeEnergy {
        &self.nodes[node.0 as usize]
    }

    pub fn nodes(&self) -> &[NodeEnergy] {
        &self.nodes
    }

    pub fn total_mj(&self) -> f64 {
        self.nodes.iter().map(NodeEnergy::total_mj).sum()
    }
}
