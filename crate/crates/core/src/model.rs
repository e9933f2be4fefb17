//! Protocol-level domain types shared by every other module.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved rank value meaning "not part of the DODAG".
pub const INFINITE_RANK: u16 = 0xFFFF;

/// Default RFC 6550 `MinHopRankIncrease`.
pub const DEFAULT_MIN_HOP_RANK_INCREASE: u16 = 256;

/// Parent-Switching-Threshold, kept as an exact ratio.
pub const PARENT_SWITCHING_THRESHOLD: (u32, u32) = (3, 2);

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ModelError {
    #[error("rank must be non-zero")]
    ZeroRank,
    #[error("ETX value {0} is not a finite number >= 1")]
    BadEtx(f64),
    #[error("secret key must be exactly 16 bytes, got {0}")]
    BadKeyLength(usize),
    #[error("min_hop_rank_increase must be positive")]
    ZeroHopIncrease,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub u16);

/// Simulated time in microseconds.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_secs(secs: f64) -> SimTime {
        SimTime((secs * 1e6).round().max(0.0) as u64)
    }

    pub fn from_millis(ms: f64) -> SimTime {
        SimTime((ms * 1e3).round().max(0.0) as u64)
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl std::ops::Add for SimTime {
    type Output = SimTime;

    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u16> for NodeId {
    fn from(v: u16) -> Self {
        NodeId(v)
    }
}

/// RPL rank in rank units. Zero is never a valid rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub struct Rank(u16);

impl Rank {
    pub const INFINITE: Rank = Rank(INFINITE_RANK);

    pub fn new(value: u16) -> Result<Self, ModelError> {
        if value == 0 {
            Err(ModelError::ZeroRank)
        } else {
            Ok(Rank(value))
        }
    }

    pub fn get(self) -> u16 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0 == INFINITE_RANK
    }
}

impl TryFrom<u16> for Rank {
    type Error = ModelError;

    fn try_from(value: u16) -> Result<Self, Self::Error> {
        Rank::new(value)
    }
}

impl From<Rank> for u16 {
    fn from(r: Rank) -> u16 {
        r.0
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("INF")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

fn default_min_hop() -> u16 {
    DEFAULT_MIN_HOP_RANK_INCREASE
}

fn default_dio_interval() -> f64 {
    60.0
}

fn default_dao_refresh() -> f64 {
    120.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RplConstants {
    #[serde(default = "default_min_hop")]
    pub min_hop_rank_increase: u16,
    /// Defaults to `min_hop_rank_increase` when absent.
    #[serde(default)]
    pub root_rank: Option<Rank>,
    /// Periodic DIO rebroadcast interval, simulated seconds.
    #[serde(default = "default_dio_interval")]
    pub dio_interval: f64,
    /// Periodic DAO refresh interval, simulated seconds.
    #[serde(default = "default_dao_refresh")]
    pub dao_refresh_interval: f64,
}

impl Default for RplConstants {
    fn default() -> Self {
        RplConstants {
            min_hop_rank_increase: DEFAULT_MIN_HOP_RANK_INCREASE,
            root_rank: None,
            dio_interval: default_dio_interval(),
            dao_refresh_interval: default_dao_refresh(),
        }
    }
}

impl RplConstants {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.min_hop_rank_increase == 0 {
            return Err(ModelError::ZeroHopIncrease);
        }
        Ok(())
    }

    pub fn root_rank(&self) -> Rank {
        self.root_rank
            .unwrap_or(Rank(self.min_hop_rank_increase.max(1)))
    }

    /// PST as a float; 3/2 is exactly representable.
    pub fn parent_switching_threshold(&self) -> f64 {
        let (num, den) = PARENT_SWITCHING_THRESHOLD;
        num as f64 / den as f64
    }

    /// Rank improvement a candidate must beat before a node abandons its parent.
    pub fn switching_hysteresis(&self) -> f64 {
        self.parent_switching_threshold() * self.min_hop_rank_increase as f64
    }
}

/// Expected transmission count of a link.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct EtxMetric(f64);

impl EtxMetric {
    pub const UNIT: EtxMetric = EtxMetric(1.0);

    pub fn new(value: f64) -> Result<Self, ModelError> {
        if value.is_finite() && value >= 1.0 {
            Ok(EtxMetric(value))
        } else {
            Err(ModelError::BadEtx(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for EtxMetric {
    type Error = ModelError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        EtxMetric::new(value)
    }
}

impl From<EtxMetric> for f64 {
    fn from(e: EtxMetric) -> f64 {
        e.0
    }
}

/// Network-wide pre-shared key. The first half keys the inner hash, the
/// second half the outer hash.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SecretKey([u8; 16]);

impl SecretKey {
    pub const fn new(bytes: [u8; 16]) -> Self {
        SecretKey(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, ModelError> {
        let arr: [u8; 16] = bytes
            .try_into()
            .map_err(|_| ModelError::BadKeyLength(bytes.len()))?;
        Ok(SecretKey(arr))
    }

    pub fn bytes(&self) -> &[u8; 16] {
        &self.0
    }

    pub fn inner(&self) -> &[u8] {
        &self.0[..8]
    }

    pub fn outer(&self) -> &[u8] {
        &self.0[8..]
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

impl Default for SecretKey {
    fn default() -> Self {
        SecretKey(*b"leader-rpl-key16")
    }
}

/// 96-bit message authentication tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct MacTag(pub [u8; 12]);

impl MacTag {
    pub const LEN: usize = 12;

    pub fn bytes(&self) -> &[u8; 12] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DioMessage {
    pub sender: NodeId,
    pub advertised_rank: Rank,
    pub dodag_version: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DisMessage {
    pub sender: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaliciousCause {
    DecreasedRank,
    IncreasedRank,
    ChildParentRankMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    MacMismatch,
}

/// Sink verdict for one received DAO.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "cause", rename_all = "snake_case")]
pub enum DetectionOutcome {
    Accepted,
    Discarded(DiscardReason),
    Malicious(MaliciousCause),
}

impl DetectionOutcome {
    pub fn is_malicious(&self) -> bool {
        matches!(self, DetectionOutcome::Malicious(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_rejects_zero() {
        assert_eq!(Rank::new(0), Err(ModelError::ZeroRank));
        assert_eq!(Rank::new(1).unwrap().get(), 1);
        assert!(Rank::new(0xFFFF).unwrap().is_infinite());
    }

    #[test]
    fn key_halves_reassemble() {
        let bytes: [u8; 16] = core::array::from_fn(|i| i as u8 * 7);
        let key = SecretKey::new(bytes);
        let mut joined = key.inner().to_vec();
        joined.extend_from_slice(key.outer());
        assert_eq!(joined, bytes);
        assert!(SecretKey::from_slice(&bytes[..15]).is_err());
    }

    #[test]
    fn constants_defaults() {
        let c = RplConstants::default();
        assert_eq!(c.root_rank().get(), 256);
        assert_eq!(c.parent_switching_threshold(), 1.5);
        assert_eq!(c.switching_hysteresis(), 384.0);
    }

    #[test]
    fn etx_bounds() {
        assert!(EtxMetric::new(0.99).is_err());
        assert!(EtxMetric::new(f64::INFINITY).is_err());
        assert!(EtxMetric::new(f64::NAN).is_err());
        assert_eq!(EtxMetric::new(1.0).unwrap(), EtxMetric::UNIT);
    }

    #[test]
    fn outcome_serializes_tagged() {
        let s = serde_json::to_string(&DetectionOutcome::Malicious(MaliciousCause::DecreasedRank))
            .unwrap();
        assert_eq!(s, r#"{"verdict":"malicious","cause":"decreased_rank"}"#);
        let s = serde_json::to_string(&DetectionOutcome::Accepted).unwrap();
        assert_eq!(s, r#"{"verdict":"accepted"}"#);
    }
}
