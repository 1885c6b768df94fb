//! Per-robot community-forming decision logic.
//!
//! Each control tick a robot looks at its neighbour set and picks a goal:
//! a wander goal when it sees nobody, the centroid of itself and its
//! neighbours otherwise. Reaching the centroid with enough neighbours stops
//! the robot; reaching it with too few sends it wandering again.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Point, Pose, Rect};
use crate::params::Params;
use crate::scalar::Real;
use crate::sensing::NeighborSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateTag {
    /// Member of a community.
    S1,
    /// Has neighbours but is not (yet) part of a community.
    S2,
    /// Sees nobody; wandering.
    S3,
}

impl fmt::Display for StateTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StateTag::S1 => "S1",
            StateTag::S2 => "S2",
            StateTag::S3 => "S3",
        })
    }
}

/// Avoidance bookkeeping for the linear-velocity decay law.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Engagement<T> {
    pub engaged: bool,
    /// Time the current avoidance episode began.
    pub t_e: T,
    /// Linear velocity frozen at the start of the episode.
    pub v_at_engage: T,
    /// Last commanded linear velocity.
    pub last_v: T,
    /// Turn direction held for the current safety-brake episode; zero when
    /// the brake is released.
    pub brake_turn: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState<T> {
    pub state_tag: StateTag,
    /// Current goal in the robot's body frame.
    pub goal_local: Point<T>,
    /// Wander goal held on the robot's behalf in the global frame.
    pub wander_goal_global: Option<Point<T>>,
    pub engagement: Engagement<T>,
    pub stopped: bool,
    /// Neighbour count seen when the robot last stopped.
    pub stopped_with: Option<usize>,
}

impl<T: Real> Default for AgentState<T> {
    fn default() -> Self {
        AgentState {
            state_tag: StateTag::S3,
            goal_local: Point::origin(),
            wander_goal_global: None,
            engagement: Engagement::default(),
            stopped: false,
            stopped_with: None,
        }
    }
}

/// State implied by the neighbour count alone. `S1` here only means the
/// size condition holds; [`decide`] also requires the goal to be reached.
pub fn classify_state(neighbor_count: usize, min_community_size: usize) -> StateTag {
    if neighbor_count == 0 {
        StateTag::S3
    } else if neighbor_count + 1 < min_community_size {
        StateTag::S2
    } else {
        StateTag::S1
    }
}

/// Centroid of the robot (at its own origin) and its neighbours.
///
/// # Panics
/// On an empty neighbour set; callers branch to wandering first.
pub fn centroid_goal<T: Real>(neighbors: &NeighborSet<T>) -> Point<T> {
    assert!(
        !neighbors.is_empty(),
        "centroid goal needs at least one neighbour"
    );
    let (sx, sy) = neighbors
        .iter()
        .fold((T::zero(), T::zero()), |(sx, sy), o| {
            (sx + o.x_local, sy + o.y_local)
        });
    let denom = T::from_usize_lossy(neighbors.len() + 1);
    Point::new(sx / denom, sy / denom)
}

/// Uniform draw over `bounds`.
pub fn sample_wander_goal<T: Real, R: Rng + ?Sized>(bounds: &Rect<T>, rng: &mut R) -> Point<T> {
    let draw = |lo: T, hi: T, rng: &mut R| if lo < hi { rng.gen_range(lo..hi) } else { lo };
    let x = draw(bounds.min_x, bounds.max_x, rng);
    let y = draw(bounds.min_y, bounds.max_y, rng);
    Point::new(x, y)
}

/// One control tick.
///
/// `odometry` is the robot's pose as tracked on its behalf; it is only used
/// to express a freshly drawn wander goal in the robot frame and never
/// enters the neighbour-based branch.
pub fn decide<T: Real, R: Rng + ?Sized>(
    agent: &AgentState<T>,
    neighbors: &NeighborSet<T>,
    odometry: &Pose<T>,
    params: &Params<T>,
    rng: &mut R,
) -> AgentState<T> {
    let mut next = agent.clone();

    // A stopped robot keeps its goal until its neighbour count changes.
    if agent.stopped && agent.stopped_with == Some(neighbors.len()) {
        return next;
    }
    next.stopped_with = None;

    if neighbors.is_empty() {
        next.state_tag = StateTag::S3;
        next.stopped = false;
        next.goal_local = fresh_wander_goal(&mut next, odometry, params, rng);
        return next;
    }

    let goal = centroid_goal(neighbors);
    let size_ok = neighbors.len() + 1 >= params.min_community_size;
    if goal.norm() <= params.goal_radius {
        if size_ok {
            next.state_tag = StateTag::S1;
            next.stopped = true;
            next.stopped_with = Some(neighbors.len());
            next.goal_local = Point::origin();
            next.wander_goal_global = None;
        } else {
            next.state_tag = StateTag::S2;
            next.stopped = false;
            next.goal_local = fresh_wander_goal(&mut next, odometry, params, rng);
        }
    } else {
        next.state_tag = StateTag::S2;
        next.stopped = false;
        next.goal_local = goal;
        next.wander_goal_global = None;
    }
    next
}

/// Draws a new wander goal on every pass through a wandering branch and
/// records it in the global frame.
fn fresh_wander_goal<T: Real, R: Rng + ?Sized>(
    agent: &mut AgentState<T>,
    odometry: &Pose<T>,
    params: &Params<T>,
    rng: &mut R,
) -> Point<T> {
    let target = sample_wander_goal(&params.goal_bounds, rng);
    agent.wander_goal_global = Some(target);
    odometry.to_local(&target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(points: &[(f64, f64)]) -> NeighborSet<f64> {
        NeighborSet::from_polar(points.iter().map(|&(x, y)| (x.hypot(y), y.atan2(x))))
    }

    fn close(a: Point<f64>, x: f64, y: f64) -> bool {
        (a.x - x).abs() < 1e-12 && (a.y - y).abs() < 1e-12
    }

    #[test]
    fn classification() {
        assert_eq!(classify_state(0, 3), StateTag::S3);
        assert_eq!(classify_state(1, 3), StateTag::S2);
        assert_eq!(classify_state(2, 3), StateTag::S1);
        assert_eq!(classify_state(1, 2), StateTag::S1);
    }

    #[test]
    fn centroid_examples() {
        assert!(close(centroid_goal(&set(&[(2.0, 0.0)])), 1.0, 0.0));
        assert!(close(
            centroid_goal(&set(&[(1.0, 0.0), (0.0, 1.0)])),
            1.0 / 3.0,
            1.0 / 3.0
        ));
        assert!(close(
            centroid_goal(&set(&[(3.0, 0.0), (-3.0, 0.0)])),
            0.0,
            0.0
        ));
    }

    #[test]
    #[should_panic]
    fn centroid_of_nothing_is_a_contract_violation() {
        centroid_goal(&NeighborSet::<f64>::default());
    }

    #[test]
    fn wander_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = sample_wander_goal(&Rect::new(0.0, 0.0, 0.0, 0.0), &mut rng);
        assert_eq!(g, Point::new(0.0, 0.0));

        let bounds = Rect::centered_square(24.0);
        let a: Vec<_> = {
            let mut r = ChaCha8Rng::seed_from_u64(9);
            (0..5)
                .map(|_| sample_wander_goal(&bounds, &mut r))
                .collect()
        };
        let b: Vec<_> = {
            let mut r = ChaCha8Rng::seed_from_u64(9);
            (0..5)
                .map(|_| sample_wander_goal(&bounds, &mut r))
                .collect()
        };
        assert_eq!(a, b);

        let mut r = ChaCha8Rng::seed_from_u64(3);
        let n = 10_000;
        let (mut sx, mut sy) = (0.0, 0.0);
        for _ in 0..n {
            let p = sample_wander_goal(&bounds, &mut r);
            assert!(bounds.contains(&p));
            sx += p.x;
            sy += p.y;
        }
        assert!((sx / n as f64).abs() < 0.5 && (sy / n as f64).abs() < 0.5);
    }

    #[test]
    fn stops_with_enough_neighbours_at_goal() {
        let params = Params::<f64>::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // two neighbours whose centroid with self is (0.5, 0)
        let n = set(&[(0.75, 0.5), (0.75, -0.5)]);
        assert!(close(centroid_goal(&n), 0.5, 0.0));
        let next = decide(
            &AgentState::default(),
            &n,
            &Pose::default(),
            &params,
            &mut rng,
        );
        assert!(next.stopped);
        assert_eq!(next.state_tag, StateTag::S1);
        assert_eq!(next.goal_local, Point::origin());
    }

    #[test]
    fn too_few_neighbours_at_goal_resamples_wander() {
        let params = Params::<f64>::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n = set(&[(0.4, 0.0)]);
        assert!(close(centroid_goal(&n), 0.2, 0.0));
        let next = decide(
            &AgentState::default(),
            &n,
            &Pose::default(),
            &params,
            &mut rng,
        );
        assert!(!next.stopped);
        assert_eq!(next.state_tag, StateTag::S2);
        let w = next.wander_goal_global.expect("wander goal drawn");
        assert!(params.goal_bounds.contains(&w));
        assert!(close(next.goal_local, w.x, w.y));
    }

    #[test]
    fn lone_robot_draws_a_wander_goal_each_tick() {
        let params = Params::<f64>::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let empty = NeighborSet::default();
        let odo = Pose::new(1.0, -2.0, 0.5);
        let first = decide(&AgentState::default(), &empty, &odo, &params, &mut rng);
        assert_eq!(first.state_tag, StateTag::S3);
        let g = first.wander_goal_global.unwrap();
        assert!(params.goal_bounds.contains(&g));
        let back = odo.to_global(&first.goal_local);
        assert!((back.x - g.x).abs() < 1e-9 && (back.y - g.y).abs() < 1e-9);

        let second = decide(&first, &empty, &odo, &params, &mut rng);
        assert_ne!(second.wander_goal_global, first.wander_goal_global);
    }

    #[test]
    fn stopped_robot_holds_until_neighbour_count_changes() {
        let params = Params::<f64>::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = set(&[(0.75, 0.5), (0.75, -0.5)]);
        let stopped = decide(
            &AgentState::default(),
            &n,
            &Pose::default(),
            &params,
            &mut rng,
        );
        assert!(stopped.stopped);
        assert_eq!(stopped.stopped_with, Some(2));

        // Same count, centroid now out of reach: still held.
        let drifted = set(&[(2.0, 0.5), (2.0, -0.5)]);
        let held = decide(&stopped, &drifted, &Pose::default(), &params, &mut rng);
        assert_eq!(held, stopped);

        let grown = set(&[(2.0, 0.5), (2.0, -0.5), (2.5, 0.0)]);
        let moved = decide(&stopped, &grown, &Pose::default(), &params, &mut rng);
        assert!(!moved.stopped);
        assert_eq!(moved.stopped_with, None);
    }

    #[test]
    fn stopped_robot_resumes_when_goal_moves_away() {
        let params = Params::<f64>::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let stopped = AgentState {
            stopped: true,
            state_tag: StateTag::S1,
            ..Default::default()
        };
        let n = set(&[(0.75, 0.5), (0.75, -0.5), (2.9, 0.0)]);
        let next = decide(&stopped, &n, &Pose::default(), &params, &mut rng);
        assert!(centroid_goal(&n).norm() > params.goal_radius);
        assert!(!next.stopped);
        assert_eq!(next.state_tag, StateTag::S2);

        let alone = decide(
            &stopped,
            &NeighborSet::default(),
            &Pose::default(),
            &params,
            &mut rng,
        );
        assert!(!alone.stopped);
        assert_eq!(alone.state_tag, StateTag::S3);
    }

    #[test]
    fn reference_gains_satisfy_the_synergy_condition() {
        let p = Params::<f64>::default();
        assert!(p.safe_distance <= p.goal_radius);
    }

    proptest! {
        #[test]
        fn centroid_contracts(pts in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..8)) {
            let n = set(&pts);
            let g = centroid_goal(&n);
            let max_r = n.iter().map(|o| o.distance).fold(0.0, f64::max);
            let k = n.len() as f64;
            prop_assert!(g.norm() <= max_r * k / (k + 1.0) + 1e-12);
        }

        #[test]
        fn stopping_requires_size_and_reach(pts in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 0..6),
                                             m in 2usize..6, seed in 0u64..100) {
            let params = Params::<f64> { min_community_size: m, ..Default::default() };
            let n = set(&pts);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let next = decide(&AgentState::default(), &n, &Pose::default(), &params, &mut rng);
            if next.stopped {
                prop_assert_eq!(next.state_tag, StateTag::S1);
                prop_assert!(n.len() + 1 >= m);
                prop_assert!(centroid_goal(&n).norm() <= params.goal_radius);
            } else {
                prop_assert!(next.state_tag != StateTag::S1);
            }
            let mut rng2 = ChaCha8Rng::seed_from_u64(seed);
            prop_assert_eq!(next, decide(&AgentState::default(), &n, &Pose::default(), &params, &mut rng2));
        }
    }
}
