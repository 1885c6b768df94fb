//! Lock-step world simulation, timed robot injection, convergence
//! detection and run recording.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{detect_communities, Community};
use crate::controller::{decide, AgentState, StateTag};
use crate::geometry::{Point, Pose};
use crate::navigation::{
    integrate_unicycle, navigation_command, nearest_threat, safety_brake, wall_blocker,
    wall_repulsion, Threat, VelocityCommand,
};
use crate::params::{Params, ParamsError};
use crate::scalar::Real;
use crate::sensing::{blocker_ahead, detect_neighbors};

/// A robot entering the arena at a given time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spawn<T> {
    pub time: T,
    pub pose: Pose<T>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("robot {index} starts outside the environment bounds")]
    OutsideBounds { index: usize },
    #[error("robots {a} and {b} start {distance:.3} m apart, closer than two body radii")]
    Overlap { a: usize, b: usize, distance: f64 },
    #[error("spawn {index} lies outside the environment bounds")]
    SpawnOutsideBounds { index: usize },
    #[error("robot {index} left the environment at ({x:.3}, {y:.3})")]
    LeftEnvironment { index: usize, x: f64, y: f64 },
    #[error("could not place {requested} robots without overlap after {attempts} draws")]
    Placement { requested: usize, attempts: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Severity {
    Info,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Info => "INFO",
            Severity::Error => "ERROR",
        };
        write!(f, "{level} [{}] {}", self.code, self.message)
    }
}

/// Parameter-selection diagnostics for a swarm of `swarm_size` robots.
///
/// * ERROR when the safe distance exceeds the goal radius: robots keep
///   avoiding each other instead of stopping, so synergy is unreachable.
/// * INFO when the range is below four goal radii: communities are not
///   guaranteed to be non-collinear.
/// * INFO when `M >= S/2 + 1`: at most one community can form.
pub fn check_params<T: Real>(params: &Params<T>, swarm_size: usize) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if let Err(e) = params.validate() {
        out.push(Diagnostic {
            severity: Severity::Error,
            code: "invalid".into(),
            message: e.to_string(),
        });
    }
    if params.safe_distance > params.goal_radius {
        out.push(Diagnostic {
            severity: Severity::Error,
            code: "synergy-condition".into(),
            message: format!(
                "safe distance {} exceeds goal radius {}; robots cannot stop in a community",
                params.safe_distance, params.goal_radius
            ),
        });
    }
    let four_dg = T::lit(4.0) * params.goal_radius;
    if params.sensing_range < four_dg {
        out.push(Diagnostic {
            severity: Severity::Info,
            code: "compactness".into(),
            message: format!(
                "sensing range {} < 4 * goal radius = {}; non-collinear communities are not guaranteed",
                params.sensing_range, four_dg
            ),
        });
    }
    if swarm_size > 0 && 2 * params.min_community_size >= swarm_size + 2 {
        out.push(Diagnostic {
            severity: Severity::Info,
            code: "single-community".into(),
            message: format!(
                "M = {} >= S/2 + 1 with S = {}; at most one community can form",
                params.min_community_size, swarm_size
            ),
        });
    }
    out
}

/// Everything the engine records about one robot at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSample<T> {
    pub pose: Pose<T>,
    pub state: StateTag,
    pub stopped: bool,
    pub command: VelocityCommand<T>,
    /// Current goal in the global frame.
    pub goal: Point<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot<T> {
    pub t: T,
    /// Indexed by robot id; robots spawned later are absent from earlier snapshots.
    pub robots: Vec<RobotSample<T>>,
}

impl<T: Real> Snapshot<T> {
    pub fn all_stopped(&self) -> bool {
        !self.robots.is_empty() && self.robots.iter().all(|r| r.stopped)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord<T> {
    pub seed: u64,
    pub params: Params<T>,
    pub snapshots: Vec<Snapshot<T>>,
    pub synergy_time: Option<T>,
    pub t_end: T,
    pub final_poses: Vec<Pose<T>>,
    pub final_stopped: Vec<bool>,
    pub final_partition: Vec<Community<T>>,
    pub outliers: Vec<usize>,
    pub min_interrobot_distance: T,
    /// Times a stopped robot lost its community condition and moved again.
    pub resume_events: usize,
    pub warnings: Vec<String>,
}

impl<T: Real> RunRecord<T> {
    pub fn converged(&self) -> bool {
        self.synergy_time.is_some()
    }

    pub fn swarm_size(&self) -> usize {
        self.final_poses.len()
    }

    pub fn n_communities(&self) -> usize {
        self.final_partition.len()
    }

    /// Per-robot label vector: community index, or a fresh label per outlier.
    pub fn partition_labels(&self) -> Vec<usize> {
        partition_labels(self.swarm_size(), &self.final_partition)
    }
}

pub fn partition_labels<T>(n: usize, communities: &[Community<T>]) -> Vec<usize> {
    let mut labels = vec![usize::MAX; n];
    for (c, community) in communities.iter().enumerate() {
        for &m in &community.members {
            labels[m] = c;
        }
    }
    let mut next = communities.len();
    for l in labels.iter_mut().filter(|l| **l == usize::MAX) {
        *l = next;
        next += 1;
    }
    labels
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Record every `record_stride`-th step (the final step is always kept).
    pub record_stride: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { record_stride: 1 }
    }
}

/// Mutable simulation state. Poses and agents are index-aligned by robot id.
#[derive(Debug, Clone)]
pub struct World<T> {
    pub params: Params<T>,
    pub poses: Vec<Pose<T>>,
    pub agents: Vec<AgentState<T>>,
    pub commands: Vec<VelocityCommand<T>>,
    /// Pending spawns ordered by time.
    pub pending_spawns: Vec<Spawn<T>>,
    pub step_count: u64,
    pub warnings: Vec<String>,
    pub resume_events: usize,
    rngs: Vec<ChaCha8Rng>,
}

impl<T: Real> World<T> {
    pub fn new(
        params: Params<T>,
        initial: Vec<Pose<T>>,
        mut spawns: Vec<Spawn<T>>,
    ) -> Result<Self, EngineError> {
        params.validate()?;
        for (i, p) in initial.iter().enumerate() {
            if !params.env_bounds.contains(&p.position()) {
                return Err(EngineError::OutsideBounds { index: i });
            }
        }
        let min_gap = params.body_radius + params.body_radius;
        for a in 0..initial.len() {
            for b in a + 1..initial.len() {
                let d = initial[a].distance(&initial[b]);
                if d < min_gap {
                    return Err(EngineError::Overlap {
                        a,
                        b,
                        distance: d.to_f64_lossy(),
                    });
                }
            }
        }
        for (i, s) in spawns.iter().enumerate() {
            if !params.env_bounds.contains(&s.pose.position()) {
                return Err(EngineError::SpawnOutsideBounds { index: i });
            }
        }
        spawns.sort_by(|a, b| {
            a.time
                .partial_cmp(&b.time)
                .unwrap_or(std::cmp::Ordering::Equal)
        });

        let mut world = World {
            poses: Vec::new(),
            agents: Vec::new(),
            commands: Vec::new(),
            pending_spawns: spawns,
            step_count: 0,
            warnings: Vec::new(),
            resume_events: 0,
            rngs: Vec::new(),
            params,
        };
        for pose in initial {
            world.add_robot(pose);
        }
        Ok(world)
    }

    pub fn t(&self) -> T {
        T::lit(self.step_count as f64) * self.params.dt
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn all_stopped(&self) -> bool {
        !self.agents.is_empty() && self.agents.iter().all(|a| a.stopped)
    }

    fn add_robot(&mut self, pose: Pose<T>) {
        let id = self.poses.len() as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.params.seed);
        // stream 0 is reserved for initial placement
        rng.set_stream(id + 1);
        self.poses.push(Pose::new(pose.x, pose.y, pose.theta));
        let mut agent = AgentState::default();
        // the navigation controller starts out in free motion
        agent.engagement.last_v = self.params.v_max;
        self.agents.push(agent);
        self.commands.push(VelocityCommand::zero());
        self.rngs.push(rng);
    }

    /// Goal of robot `i` in the global frame.
    pub fn goal_global(&self, i: usize) -> Point<T> {
        self.poses[i].to_global(&self.agents[i].goal_local)
    }

    /// Decides every robot from one shared snapshot, then moves them all.
    ///
    /// Returns the decisions taken at the pre-step time together with the
    /// poses they were taken from.
    pub fn step(&mut self) -> Result<Snapshot<T>, EngineError> {
        let t = self.t();
        let snapshot = self.poses.clone();
        for i in 0..snapshot.len() {
            let neighbors = detect_neighbors(i, &snapshot, &self.params);
            let was_stopped = self.agents[i].stopped;
            let mut next = decide(
                &self.agents[i],
                &neighbors,
                &snapshot[i],
                &self.params,
                &mut self.rngs[i],
            );
            if was_stopped && !next.stopped {
                self.resume_events += 1;
            }
            let cmd = if next.stopped {
                next.engagement.engaged = false;
                next.engagement.brake_turn = T::zero();
                VelocityCommand::zero()
            } else {
                let wall = wall_repulsion(&snapshot[i], &self.params.env_bounds, &self.params)
                    .map_err(|_| EngineError::LeftEnvironment {
                        index: i,
                        x: snapshot[i].x.to_f64_lossy(),
                        y: snapshot[i].y.to_f64_lossy(),
                    })?;
                let threat = nearest_threat(&neighbors, wall);
                let cmd = navigation_command(
                    &next.goal_local,
                    threat,
                    &mut next.engagement,
                    t,
                    &self.params,
                );
                let blocker = if self.params.brake_distance > T::zero() {
                    let robot = blocker_ahead(i, &snapshot, self.params.brake_distance)
                        .map(|(distance, bearing)| Threat { distance, bearing });
                    let wall = wall_blocker(
                        &snapshot[i],
                        &self.params.env_bounds,
                        self.params.brake_distance,
                    );
                    match (robot, wall) {
                        (Some(r), Some(w)) => Some(if w.distance < r.distance { w } else { r }),
                        (r, w) => r.or(w),
                    }
                } else {
                    None
                };
                match blocker {
                    Some(b) => safety_brake(b.bearing, &mut next.engagement, &self.params),
                    None => {
                        next.engagement.brake_turn = T::zero();
                        cmd
                    }
                }
            };
            self.agents[i] = next;
            self.commands[i] = cmd;
        }
        let decided = self.sample();

        for (pose, cmd) in self.poses.iter_mut().zip(&self.commands) {
            *pose = integrate_unicycle(pose, cmd, self.params.dt);
        }
        for (i, p) in self.poses.iter().enumerate() {
            if !self.params.env_bounds.contains(&p.position()) {
                return Err(EngineError::LeftEnvironment {
                    index: i,
                    x: p.x.to_f64_lossy(),
                    y: p.y.to_f64_lossy(),
                });
            }
        }

        self.step_count += 1;
        self.process_spawns();
        Ok(decided)
    }

    fn process_spawns(&mut self) {
        let now = self.t();
        let half_step = self.params.dt / T::lit(2.0);
        let min_gap = self.params.body_radius + self.params.body_radius;
        let mut deferred = Vec::new();
        let due: Vec<Spawn<T>> = {
            let split = self
                .pending_spawns
                .iter()
                .take_while(|s| s.time <= now + half_step * T::lit(1e-6))
                .count();
            self.pending_spawns.drain(..split).collect()
        };
        for spawn in due {
            let blocked = self.poses.iter().any(|p| p.distance(&spawn.pose) < min_gap);
            if blocked {
                self.warnings.push(format!(
                    "spawn at ({}, {}) deferred at t={} (overlaps an existing robot)",
                    spawn.pose.x, spawn.pose.y, now
                ));
                deferred.push(spawn);
            } else {
                self.add_robot(spawn.pose);
            }
        }
        for (k, s) in deferred.into_iter().enumerate() {
            self.pending_spawns.insert(k, s);
        }
    }

    fn sample(&self) -> Snapshot<T> {
        let robots = (0..self.len())
            .map(|i| RobotSample {
                pose: self.poses[i],
                state: self.agents[i].state_tag,
                stopped: self.agents[i].stopped,
                command: self.commands[i],
                goal: self.goal_global(i),
            })
            .collect();
        Snapshot {
            t: self.t(),
            robots,
        }
    }

    fn min_pairwise_distance(&self) -> T {
        let mut best = T::infinity();
        for a in 0..self.poses.len() {
            for b in a + 1..self.poses.len() {
                best = best.min(self.poses[a].distance(&self.poses[b]));
            }
        }
        best
    }
}

/// Runs with default options (every step recorded).
pub fn run<T: Real>(
    params: Params<T>,
    initial: Vec<Pose<T>>,
    spawns: Vec<Spawn<T>>,
) -> Result<RunRecord<T>, EngineError> {
    run_with(params, initial, spawns, RunOptions::default())
}

/// Steps until every robot has been stopped for the hold window with no
/// spawn pending, or until `t_max`.
///
/// Snapshots hold the decisions made at their time stamp together with the
/// poses those decisions were made from.
pub fn run_with<T: Real>(
    params: Params<T>,
    initial: Vec<Pose<T>>,
    spawns: Vec<Spawn<T>>,
    options: RunOptions,
) -> Result<RunRecord<T>, EngineError> {
    let stride = options.record_stride.max(1) as u64;
    let mut world = World::new(params, initial, spawns)?;
    let mut warnings = Vec::new();
    if world.params.safe_distance > world.params.goal_radius {
        warnings.push(
            "necessary condition to achieve synergy unmet: safe_distance > goal_radius".to_string(),
        );
    }

    let mut snapshots = Vec::new();
    let mut min_distance = world.min_pairwise_distance();
    let mut window_start: Option<T> = None;
    let mut synergy_time = None;

    loop {
        let t = world.t();
        let snap = world.step()?;
        let settled = snap.all_stopped()
            && world.pending_spawns.is_empty()
            && snap.robots.len() == world.len();
        if settled {
            let start = *window_start.get_or_insert(t);
            if t - start >= world.params.hold_window {
                synergy_time = Some(start);
            }
        } else {
            window_start = None;
        }

        let done = synergy_time.is_some() || world.t() >= world.params.t_max;
        if (world.step_count - 1) % stride == 0 || done {
            snapshots.push(snap);
        }
        min_distance = min_distance.min(world.min_pairwise_distance());
        if done {
            break;
        }
    }

    warnings.append(&mut world.warnings);
    let final_poses = world.poses.clone();
    let final_stopped: Vec<bool> = world.agents.iter().map(|a| a.stopped).collect();
    let (final_partition, outliers) =
        detect_communities(&final_poses, &final_stopped, &world.params);
    Ok(RunRecord {
        seed: world.params.seed,
        t_end: world.t(),
        snapshots,
        synergy_time,
        final_poses,
        final_stopped,
        final_partition,
        outliers,
        min_interrobot_distance: min_distance,
        resume_events: world.resume_events,
        warnings,
        params: world.params,
    })
}

/// How initial headings are chosen when poses are drawn at random.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadingMode {
    #[default]
    Uniform,
    /// Facing directly away from the centre of the goal region.
    Outward,
}

/// Uniform positions in the goal region with rejection of overlaps.
///
/// With `mutually_unseen` a candidate is also rejected when it would see, or
/// be seen by, a robot already placed, so no robot starts with a neighbour.
/// Draws come from stream 0 of the run seed, so layouts are reproducible and
/// independent of the robots' own streams.
pub fn sample_initial_poses<T: Real>(
    params: &Params<T>,
    count: usize,
    min_separation: T,
    heading: HeadingMode,
    mutually_unseen: bool,
) -> Result<Vec<Pose<T>>, EngineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(0);
    let bounds = params.goal_bounds;
    let center = bounds.center();
    let max_attempts = 10_000 * count.max(1);
    let mut poses: Vec<Pose<T>> = Vec::with_capacity(count);
    let mut attempts = 0;
    while poses.len() < count {
        if attempts >= max_attempts {
            return Err(EngineError::Placement {
                requested: count,
                attempts,
            });
        }
        attempts += 1;
        let p = crate::controller::sample_wander_goal(&bounds, &mut rng);
        let theta: T = rng.gen_range(-T::PI()..T::PI());
        if poses
            .iter()
            .any(|q| q.position().distance(&p) < min_separation)
        {
            continue;
        }
        let theta = match heading {
            HeadingMode::Uniform => theta,
            HeadingMode::Outward => {
                let (dx, dy) = (p.x - center.x, p.y - center.y);
                if dx == T::zero() && dy == T::zero() {
                    theta
                } else {
                    dy.atan2(dx)
                }
            }
        };
        poses.push(Pose::new(p.x, p.y, theta));
        if mutually_unseen
            && (0..poses.len()).any(|i| !detect_neighbors(i, &poses, params).is_empty())
        {
            poses.pop();
        }
    }
    Ok(poses)
}
