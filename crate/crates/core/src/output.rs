//! Trajectory logs (CSV) and run summaries (JSON).
//!
//! The trajectory log has the fixed header
//! `t,robot_id,x,y,theta,state,v,omega,goal_x,goal_y` and one row per robot
//! per sampled snapshot. Goals are written in the global frame. Floats use
//! the shortest round-trip representation, so identical runs produce
//! byte-identical files.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::analysis::{detect_communities_within, RunTrace};
use crate::controller::StateTag;
use crate::engine::RunRecord;
use crate::params::Params;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub robot_id: usize,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub state: StateTag,
    pub v: f64,
    pub omega: f64,
    pub goal_x: f64,
    pub goal_y: f64,
}

/// Writes every `stride`-th recorded snapshot, always including the last.
pub fn write_trajectory_csv<T: Real, W: Write>(
    record: &RunRecord<T>,
    stride: usize,
    writer: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let stride = stride.max(1);
    let last = record.snapshots.len().saturating_sub(1);
    for (k, snap) in record.snapshots.iter().enumerate() {
        if k % stride != 0 && k != last {
            continue;
        }
        for (id, r) in snap.robots.iter().enumerate() {
            w.serialize(TrajectoryRow {
                t: snap.t.to_f64_lossy(),
                robot_id: id,
                x: r.pose.x.to_f64_lossy(),
                y: r.pose.y.to_f64_lossy(),
                theta: r.pose.theta.to_f64_lossy(),
                state: r.state,
                v: r.command.v.to_f64_lossy(),
                omega: r.command.omega.to_f64_lossy(),
                goal_x: r.goal.x.to_f64_lossy(),
                goal_y: r.goal.y.to_f64_lossy(),
            })?;
        }
    }
    if record.snapshots.is_empty() {
        w.write_record([
            "t", "robot_id", "x", "y", "theta", "state", "v", "omega", "goal_x", "goal_y",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_csv<R: Read>(reader: R) -> csv::Result<Vec<TrajectoryRow>> {
    csv::Reader::from_reader(reader).deserialize().collect()
}

/// Groups rows into per-robot `(t, x, y)` tracks.
pub fn tracks_from_rows(rows: &[TrajectoryRow]) -> Vec<Vec<(f64, f64, f64)>> {
    let n = rows.iter().map(|r| r.robot_id + 1).max().unwrap_or(0);
    let mut tracks = vec![Vec::new(); n];
    for r in rows {
        tracks[r.robot_id].push((r.t, r.x, r.y));
    }
    tracks
}

/// Machine-readable outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub synergy_time: Option<f64>,
    pub n_communities: usize,
    pub communities: Vec<Vec<usize>>,
    pub min_interrobot_distance: f64,
    pub warnings: Vec<String>,
    pub swarm_size: usize,
    pub converged: bool,
    pub t_end: f64,
    pub outliers: Vec<usize>,
    /// Community count when robots link only within twice the goal radius.
    pub n_communities_at_2dg: usize,
    pub resume_events: usize,
    pub params: Params<f64>,
    /// Trajectory log written next to this summary, if any.
    #[serde(default)]
    pub trajectory_file: Option<String>,
}

impl RunSummary {
    pub fn from_record<T: Real>(record: &RunRecord<T>) -> Self {
        let two_dg = record.params.goal_radius + record.params.goal_radius;
        let (tight, _) = detect_communities_within(
            &record.final_poses,
            &record.final_stopped,
            two_dg,
            record.params.min_community_size,
        );
        RunSummary {
            seed: record.seed,
            synergy_time: record.synergy_time.map(Real::to_f64_lossy),
            n_communities: record.n_communities(),
            communities: record
                .final_partition
                .iter()
                .map(|c| c.members.clone())
                .collect(),
            min_interrobot_distance: record.min_interrobot_distance.to_f64_lossy(),
            warnings: record.warnings.clone(),
            swarm_size: record.swarm_size(),
            converged: record.converged(),
            t_end: record.t_end.to_f64_lossy(),
            outliers: record.outliers.clone(),
            n_communities_at_2dg: tight.len(),
            resume_events: record.resume_events,
            params: record.params.cast(),
            trajectory_file: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Combines this summary with a trajectory log into a cross-run trace.
    pub fn trace(&self, rows: &[TrajectoryRow]) -> RunTrace {
        let mut trajectories = tracks_from_rows(rows);
        trajectories.resize(self.swarm_size, Vec::new());
        RunTrace {
            seed: self.seed,
            converged: self.converged,
            trajectories,
            communities: self.communities.clone(),
        }
    }
}
