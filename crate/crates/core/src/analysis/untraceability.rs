//! Cross-run comparison of trajectories and community memberships.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::anova::{anova_one_way, AnovaResult};
use super::metrics::{canonical_labels, rand_index};
use crate::engine::RunRecord;
use crate::scalar::Real;

/// Number of time samples each trajectory is resampled to.
pub const RESAMPLE_POINTS: usize = 100;

/// p-values under this are printed as `0.00`.
pub const P_DISPLAY_FLOOR: f64 = 1e-12;

/// The parts of a run the cross-run comparison needs; buildable from an
/// in-memory record or from a trajectory log on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub seed: u64,
    pub converged: bool,
    /// Per robot id: `(t, x, y)` samples in time order.
    pub trajectories: Vec<Vec<(f64, f64, f64)>>,
    /// Member ids per community.
    pub communities: Vec<Vec<usize>>,
}

impl RunTrace {
    pub fn from_record<T: Real>(record: &RunRecord<T>) -> Self {
        let n = record.swarm_size();
        let mut trajectories = vec![Vec::new(); n];
        for snap in &record.snapshots {
            for (id, r) in snap.robots.iter().enumerate() {
                trajectories[id].push((
                    snap.t.to_f64_lossy(),
                    r.pose.x.to_f64_lossy(),
                    r.pose.y.to_f64_lossy(),
                ));
            }
        }
        RunTrace {
            seed: record.seed,
            converged: record.converged(),
            trajectories,
            communities: record
                .final_partition
                .iter()
                .map(|c| c.members.clone())
                .collect(),
        }
    }

    pub fn swarm_size(&self) -> usize {
        self.trajectories.len()
    }

    pub fn duration(&self) -> f64 {
        self.trajectories
            .iter()
            .filter_map(|t| t.last().map(|s| s.0))
            .fold(0.0, f64::max)
    }

    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![usize::MAX; self.swarm_size()];
        for (c, members) in self.communities.iter().enumerate() {
            for &m in members {
                labels[m] = c;
            }
        }
        let mut next = self.communities.len();
        for l in labels.iter_mut().filter(|l| **l == usize::MAX) {
            *l = next;
            next += 1;
        }
        labels
    }
}

/// Linear interpolation of one coordinate at `times`; held constant outside
/// the sampled span.
pub fn resample(
    track: &[(f64, f64, f64)],
    times: &[f64],
    coord: impl Fn(&(f64, f64, f64)) -> f64,
) -> Vec<f64> {
    times
        .iter()
        .map(|&t| {
            if track.is_empty() {
                return f64::NAN;
            }
            let k = track.partition_point(|s| s.0 <= t);
            if k == 0 {
                return coord(&track[0]);
            }
            if k == track.len() {
                return coord(&track[k - 1]);
            }
            let (a, b) = (&track[k - 1], &track[k]);
            let w = if b.0 > a.0 {
                (t - a.0) / (b.0 - a.0)
            } else {
                0.0
            };
            coord(a) + w * (coord(b) - coord(a))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotAnova {
    pub robot_id: usize,
    pub x: AnovaResult<f64>,
    pub y: AnovaResult<f64>,
    pub min_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPartition {
    pub seed: u64,
    pub converged: bool,
    pub n_communities: usize,
    pub communities: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandPair {
    pub run_a: usize,
    pub run_b: usize,
    pub rand_index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UntraceabilityReport {
    pub swarm_size: usize,
    pub n_runs: usize,
    pub n_converged: usize,
    /// Fewer than two converged runs.
    pub inconclusive: bool,
    pub per_robot: Vec<RobotAnova>,
    pub partitions: Vec<RunPartition>,
    pub distinct_partitions: usize,
    pub rand_pairs: Vec<RandPair>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReportError {
    #[error("need at least two runs, got {0}")]
    TooFewRuns(usize),
    #[error("runs disagree on swarm size ({0} vs {1})")]
    MixedSwarmSizes(usize, usize),
}

pub fn untraceability_report<T: Real>(
    records: &[RunRecord<T>],
) -> Result<UntraceabilityReport, ReportError> {
    let traces: Vec<RunTrace> = records.iter().map(RunTrace::from_record).collect();
    untraceability_report_from(&traces)
}

/// Per-robot one-way ANOVA across runs (runs are the groups, resampled
/// positions the observations), plus partition variability.
pub fn untraceability_report_from(
    traces: &[RunTrace],
) -> Result<UntraceabilityReport, ReportError> {
    if traces.len() < 2 {
        return Err(ReportError::TooFewRuns(traces.len()));
    }
    let swarm_size = traces[0].swarm_size();
    if let Some(t) = traces.iter().find(|t| t.swarm_size() != swarm_size) {
        return Err(ReportError::MixedSwarmSizes(swarm_size, t.swarm_size()));
    }
    let n_converged = traces.iter().filter(|t| t.converged).count();

    let horizon = traces
        .iter()
        .map(RunTrace::duration)
        .fold(f64::INFINITY, f64::min);
    let times: Vec<f64> = (0..RESAMPLE_POINTS)
        .map(|k| horizon * k as f64 / (RESAMPLE_POINTS - 1) as f64)
        .collect();

    let mut per_robot = Vec::with_capacity(swarm_size);
    for id in 0..swarm_size {
        let xs: Vec<Vec<f64>> = traces
            .iter()
            .map(|t| resample(&t.trajectories[id], &times, |s| s.1))
            .collect();
        let ys: Vec<Vec<f64>> = traces
            .iter()
            .map(|t| resample(&t.trajectories[id], &times, |s| s.2))
            .collect();
        let x = anova_one_way(&xs).expect("two or more groups of 100 samples");
        let y = anova_one_way(&ys).expect("two or more groups of 100 samples");
        per_robot.push(RobotAnova {
            robot_id: id,
            min_p: x.p_value.min(y.p_value),
            x,
            y,
        });
    }

    let partitions: Vec<RunPartition> = traces
        .iter()
        .map(|t| RunPartition {
            seed: t.seed,
            converged: t.converged,
            n_communities: t.communities.len(),
            communities: t.communities.clone(),
        })
        .collect();
    let labels: Vec<Vec<usize>> = traces
        .iter()
        .map(|t| canonical_labels(&t.labels()))
        .collect();
    let mut distinct: Vec<&Vec<usize>> = Vec::new();
    for l in &labels {
        if !distinct.contains(&l) {
            distinct.push(l);
        }
    }
    let mut rand_pairs = Vec::new();
    for a in 0..labels.len() {
        for b in a + 1..labels.len() {
            rand_pairs.push(RandPair {
                run_a: a,
                run_b: b,
                rand_index: rand_index(&labels[a], &labels[b]),
            });
        }
    }

    Ok(UntraceabilityReport {
        swarm_size,
        n_runs: traces.len(),
        n_converged,
        inconclusive: n_converged < 2,
        per_robot,
        partitions,
        distinct_partitions: distinct.len(),
        rand_pairs,
    })
}

pub fn format_p(p: f64) -> String {
    if p < P_DISPLAY_FLOOR {
        "0.00".to_string()
    } else if p < 1e-3 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

impl UntraceabilityReport {
    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Swarm size {}: {} runs, {} converged{}",
            self.swarm_size,
            self.n_runs,
            self.n_converged,
            if self.inconclusive {
                " (inconclusive)"
            } else {
                ""
            }
        );
        let _ = writeln!(
            s,
            "{:>6}  {:>6}  {:>11}  Members",
            "Run", "Seed", "Communities"
        );
        for (i, p) in self.partitions.iter().enumerate() {
            let members: Vec<String> = p
                .communities
                .iter()
                .map(|c| {
                    format!(
                        "{{{}}}",
                        c.iter()
                            .map(|m| m.to_string())
                            .collect::<Vec<_>>()
                            .join(",")
                    )
                })
                .collect();
            let _ = writeln!(
                s,
                "{:>6}  {:>6}  {:>11}  {}",
                i + 1,
                p.seed,
                p.n_communities,
                members.join(" ")
            );
        }
        let _ = writeln!(s, "Distinct partitions: {}", self.distinct_partitions);
        let min_rand = self
            .rand_pairs
            .iter()
            .map(|r| r.rand_index)
            .fold(f64::INFINITY, f64::min);
        if min_rand.is_finite() {
            let _ = writeln!(s, "Smallest pairwise Rand index: {min_rand:.4}");
        }
        let _ = writeln!(
            s,
            "{:>6}  {:>10}  {:>10}  {:>10}  {:>10}",
            "Robot", "F(x)", "p(x)", "F(y)", "p(y)"
        );
        for r in &self.per_robot {
            let _ = writeln!(
                s,
                "{:>6}  {:>10.3}  {:>10}  {:>10.3}  {:>10}",
                r.robot_id,
                r.x.f,
                format_p(r.x.p_value),
                r.y.f,
                format_p(r.y.p_value)
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(seed: u64, offset: f64, communities: Vec<Vec<usize>>) -> RunTrace {
        let trajectories = (0..4)
            .map(|id| {
                (0..50)
                    .map(|k| {
                        (
                            k as f64,
                            id as f64 + offset + 0.01 * k as f64,
                            (k as f64).sin(),
                        )
                    })
                    .collect()
            })
            .collect();
        RunTrace {
            seed,
            converged: true,
            trajectories,
            communities,
        }
    }

    #[test]
    fn resample_interpolates_and_clamps() {
        let track = vec![(0.0, 0.0, 0.0), (2.0, 2.0, 4.0)];
        assert_eq!(
            resample(&track, &[-1.0, 0.5, 1.0, 3.0], |s| s.1),
            vec![0.0, 0.5, 1.0, 2.0]
        );
        assert_eq!(resample(&track, &[1.0], |s| s.2), vec![2.0]);
    }

    #[test]
    fn duplicated_runs_are_indistinguishable() {
        let t = trace(1, 0.0, vec![vec![0, 1, 2]]);
        let rep = untraceability_report_from(&[t.clone(), t.clone(), t]).unwrap();
        assert!(rep.per_robot.iter().all(|r| r.min_p == 1.0));
        assert!(rep.rand_pairs.iter().all(|p| p.rand_index == 1.0));
        assert_eq!(rep.distinct_partitions, 1);
        assert!(!rep.inconclusive);
    }

    #[test]
    fn shifted_runs_are_distinguishable() {
        let a = trace(1, 0.0, vec![vec![0, 1, 2]]);
        let b = trace(2, 5.0, vec![vec![1, 2, 3]]);
        let rep = untraceability_report_from(&[a, b]).unwrap();
        assert!(rep.per_robot.iter().all(|r| r.x.p_value < 1e-12));
        assert_eq!(rep.distinct_partitions, 2);
        assert!(rep.rand_pairs[0].rand_index < 1.0);
        assert!(rep.to_text().contains("0.00"));
    }

    #[test]
    fn input_validation() {
        let a = trace(1, 0.0, vec![]);
        assert_eq!(
            untraceability_report_from(&[a.clone()]),
            Err(ReportError::TooFewRuns(1))
        );
        let mut b = a.clone();
        b.trajectories.pop();
        assert_eq!(
            untraceability_report_from(&[a.clone(), b]),
            Err(ReportError::MixedSwarmSizes(4, 3))
        );
        let mut c = a.clone();
        c.converged = false;
        let rep = untraceability_report_from(&[a, c]).unwrap();
        assert!(rep.inconclusive);
    }
}
