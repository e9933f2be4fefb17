//! Parameter sweeps over seeded scenario runs, executed in parallel.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{AttackKind, AttackSpec, LieTarget, Onset};
use crate::metrics::RunMetrics;
use crate::model::NodeId;
use crate::sim::{self, hop_distances, place_nodes, Scenario, SimError};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep needs at least one value")]
    NoValues,
    #[error("runs_per_point must be at least 1")]
    NoRuns,
    #[error("invalid sweep value {0}")]
    BadValue(f64),
    #[error("point {point}, run {run}: {source}")]
    Run {
        point: f64,
        run: usize,
        #[source]
        source: SimError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    MaliciousFraction,
    AttackerHopDistance,
    NodeCount,
}

fn d_runs() -> usize {
    10
}

/// Attack applied to every attacker a sweep places.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackTemplate {
    pub kind: AttackKind,
    #[serde(default)]
    pub delta_r: Option<u16>,
    pub onset: Onset,
    pub lie_target: LieTarget,
}

impl Default for AttackTemplate {
    fn default() -> Self {
        AttackTemplate {
            kind: AttackKind::Decreased,
            delta_r: None,
            onset: Onset::ImmediateOnJoin,
            lie_target: LieTarget::Neighbors,
        }
    }
}

impl AttackTemplate {
    fn at(&self, node: NodeId) -> AttackSpec {
        AttackSpec {
            node,
            kind: self.kind,
            delta_r: self.delta_r,
            onset: self.onset,
            lie_target: self.lie_target,
            has_key: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    #[serde(default = "d_runs")]
    pub runs_per_point: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub attack: AttackTemplate,
    #[serde(default)]
    pub base: Scenario,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.values.is_empty() {
            return Err(SweepError::NoValues);
        }
        if self.runs_per_point == 0 {
            return Err(SweepError::NoRuns);
        }
        for &v in &self.values {
            let ok = match self.variable {
                SweepVariable::MaliciousFraction => (0.0..=1.0).contains(&v),
                SweepVariable::AttackerHopDistance => v >= 1.0 && v.fract() == 0.0,
                SweepVariable::NodeCount => v >= 2.0 && v.fract() == 0.0 && v <= u16::MAX as f64,
            };
            if !ok {
                return Err(SweepError::BadValue(v));
            }
        }
        Ok(())
    }

    /// Run seeds depend only on the master seed and run index, so every
    /// point sees the same placements.
    pub fn run_seeds(&self) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        (0..self.runs_per_point).map(|_| rng.gen()).collect()
    }

    /// The scenario for one run, or `None` if the point cannot be realised
    /// on this placement (no node at the requested hop distance).
    pub fn scenario_for(&self, value: f64, seed: u64) -> Option<Scenario> {
        let mut sc = self.base.clone();
        sc.seed = seed;
        match self.variable {
            SweepVariable::MaliciousFraction => {
                let eligible = sc.node_count - 1;
                let k = ((value * sc.node_count as f64).round() as usize).min(eligible);
                // One permutation per seed: attacker sets are nested across points.
                let mut ids: Vec<u16> = (1..sc.node_count as u16).collect();
                ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_a77a_c4e5));
                sc.attacks = ids[..k].iter().map(|&i| self.attack.at(NodeId(i))).collect();
            }
            SweepVariable::AttackerHopDistance => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let ps = place_nodes(&sc, &mut rng).ok()?;
                let hops = hop_distances(&ps, sc.tx_range);
                let at: Vec<u16> = (1..sc.node_count)
                    .filter(|&i| hops[i] == Some(value as u32))
                    .map(|i| i as u16)
                    .collect();
                let pick = at.choose(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x4 ^ value as u64))?;
                sc.attacks = vec![self.attack.at(NodeId(*pick))];
            }
            SweepVariable::NodeCount => {
                sc.node_count = value as usize;
                sc.attacks.retain(|a| (a.node.0 as usize) < sc.node_count);
            }
        }
        Some(sc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointResult {
    pub value: f64,
    /// `None` for runs the point could not be realised on.
    pub runs: Vec<Option<RunMetrics>>,
}

pub const METRICS: [&str; 6] = ["accuracy", "fpr", "fnr", "latency_s", "pdr", "energy_mj"];

impl PointResult {
    /// Per-run values of one metric. FNR with no attackers counts as 0.
    pub fn values(&self, metric: &str) -> Vec<(usize, f64)> {
        self.runs
            .iter()
            .enumerate()
            .filter_map(|(i, r)| {
                let r = r.as_ref()?;
                let v = match metric {
                    "accuracy" => Some(r.accuracy),
                    "fpr" => r.fpr,
                    "fnr" => r.fnr.or((r.attackers == 0).then_some(0.0)),
                    "latency_s" => r.latency,
                    "pdr" => r.pdr,
                    "energy_mj" => Some(r.energy_mj),
                    _ => None,
                };
                v.map(|v| (i, v))
            })
            .collect()
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        let v = self.values(metric);
        (!v.is_empty()).then(|| v.iter().map(|(_, x)| x).sum::<f64>() / v.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    NonIncreasing,
    NonDecreasing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendCheck {
    pub metric: &'static str,
    pub direction: Direction,
    pub inversions: usize,
    pub means: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub variable: SweepVariable,
    pub points: Vec<PointResult>,
}

const TREND_EPS: f64 = 1e-12;

pub fn count_inversions(means: &[Option<f64>], dir: Direction) -> usize {
    let defined: Vec<f64> = means.iter().flatten().copied().collect();
    defined
        .windows(2)
        .filter(|w| match dir {
            Direction::NonIncreasing => w[1] > w[0] + TREND_EPS,
            Direction::NonDecreasing => w[1] < w[0] - TREND_EPS,
        })
        .count()
}

impl SweepResult {
    pub fn means(&self, metric: &str) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.mean(metric)).collect()
    }

    /// Expected monotone trends for the swept variable.
    pub fn trends(&self) -> Vec<TrendCheck> {
        use Direction::*;
        let expected: &[(&'static str, Direction)] = match self.variable {
            SweepVariable::MaliciousFraction => &[
                ("accuracy", NonIncreasing),
                ("fpr", NonDecreasing),
                ("fnr", NonDecreasing),
                ("pdr", NonIncreasing),
            ],
            SweepVariable::AttackerHopDistance => &[("latency_s", NonDecreasing)],
            SweepVariable::NodeCount => &[],
        };
        expected
            .iter()
            .map(|&(metric, direction)| {
                let means = self.means(metric);
                TrendCheck {
                    metric,
                    direction,
                    inversions: count_inversions(&means, direction),
                    means,
                }
            })
            .collect()
    }

    /// Long-format CSV for one metric: `metric,point,run,value`, with a
    /// `mean` row closing each point.
    pub fn metric_csv(&self, metric: &str) -> String {
        let mut out = String::from("metric,point,run,value\n");
        for p in &self.points {
            for (run, v) in p.values(metric) {
                writeln!(out, "{metric},{},{run},{v}", p.value).unwrap();
            }
            if let Some(m) = p.mean(metric) {
                writeln!(out, "{metric},{},mean,{m}", p.value).unwrap();
            }
        }
        out
    }

    /// Means keyed by metric name, one entry per point.
    pub fn summary(&self) -> BTreeMap<&'static str, Vec<(f64, Option<f64>)>> {
        METRICS
            .iter()
            .map(|&m| (m, self.points.iter().map(|p| (p.value, p.mean(m))).collect()))
            .collect()
    }
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, SweepError> {
    spec.validate()?;
    let seeds = spec.run_seeds();
    let jobs: Vec<(usize, usize)> = (0..spec.values.len())
        .flat_map(|p| (0..seeds.len()).map(move |r| (p, r)))
        .collect();
    let results: Vec<Result<Option<RunMetrics>, SweepError>> = jobs
        .par_iter()
        .map(|&(p, r)| {
            let value = spec.values[p];
            let Some(sc) = spec.scenario_for(value, seeds[r]) else {
                return Ok(None);
            };
            let out = sim::run(&sc).map_err(|source| SweepError::Run { point: value, run: r, source })?;
            Ok(Some(RunMetrics::from_output(&out)))
        })
        .collect();

    let mut points: Vec<PointResult> = spec
        .values
        .iter()
        .map(|&value| PointResult { value, runs: Vec::new() })
        .collect();
    for (&(p, _), res) in jobs.iter().zip(results) {
        points[p].runs.push(res?);
    }
    Ok(SweepResult {
        variable: spec.variable,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(variable: SweepVariable, values: Vec<f64>) -> SweepSpec {
        SweepSpec {
            variable,
            values,
            runs_per_point: 2,
            master_seed: 9,
            attack: AttackTemplate::default(),
            base: Scenario {
                node_count: 20,
                duration: 400.0,
                ..Scenario::default()
            },
        }
    }

    #[test]
    fn inversion_count() {
        let m = [Some(1.0), Some(0.9), Some(0.95), Some(0.8)];
        assert_eq!(count_inversions(&m, Direction::NonIncreasing), 1);
        assert_eq!(count_inversions(&m, Direction::NonDecreasing), 2);
        assert_eq!(count_inversions(&[Some(1.0), None, Some(2.0)], Direction::NonDecreasing), 0);
    }

    #[test]
    fn attacker_sets_are_nested() {
        let s = spec(SweepVariable::MaliciousFraction, vec![0.1, 0.3]);
        let seed = s.run_seeds()[0];
        let a: Vec<NodeId> = s.scenario_for(0.1, seed).unwrap().attacks.iter().map(|a| a.node).collect();
        let b: Vec<NodeId> = s.scenario_for(0.3, seed).unwrap().attacks.iter().map(|a| a.node).collect();
        assert_eq!(a.len(), 2);
        assert_eq!(b.len(), 6);
        assert_eq!(&b[..2], &a[..]);
    }

    #[test]
    fn rejects_empty_and_bad_values() {
        assert!(matches!(spec(SweepVariable::NodeCount, vec![]).validate(), Err(SweepError::NoValues)));
        let bad = spec(SweepVariable::MaliciousFraction, vec![1.5]);
        assert!(matches!(bad.validate(), Err(SweepError::BadValue(_))));
    }

    #[test]
    fn sweep_is_deterministic() {
        let s = spec(SweepVariable::MaliciousFraction, vec![0.0, 0.2]);
        let a = run_sweep(&s).unwrap();
        let b = run_sweep(&s).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.points[0].runs.len(), 2);
        assert_eq!(a.metric_csv("accuracy"), b.metric_csv("accuracy"));
        assert!(a.metric_csv("accuracy").starts_with("metric,point,run,value\naccuracy,0,0,"));
    }
}
