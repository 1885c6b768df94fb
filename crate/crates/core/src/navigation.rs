//! Goal-seeking unicycle controller with a reactive avoidance branch, plus
//! explicit-Euler kinematics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::Engagement;
use crate::geometry::{Point, Pose, Rect};
use crate::params::Params;
use crate::scalar::{sgn, wrap_angle, Real};
use crate::sensing::NeighborSet;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand<T> {
    pub v: T,
    pub omega: T,
}

impl<T: Real> VelocityCommand<T> {
    pub fn zero() -> Self {
        VelocityCommand {
            v: T::zero(),
            omega: T::zero(),
        }
    }
}

/// Closest thing to steer away from, in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threat<T> {
    pub distance: T,
    pub bearing: T,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NavigationError {
    #[error("robot at ({x}, {y}) is outside the environment bounds")]
    OutsideBounds { x: f64, y: f64 },
}

/// Full speed outside the safe distance, otherwise the speed frozen at the
/// start of the avoidance episode decaying linearly towards zero.
pub fn linear_velocity<T: Real>(d_min: T, v_at_engage: T, t: T, t_e: T, params: &Params<T>) -> T {
    if d_min > params.safe_distance {
        return params.v_max;
    }
    (v_at_engage - (t - t_e) * params.decel).max(T::zero())
}

pub fn angular_velocity<T: Real>(
    heading_error: T,
    nearest_bearing: T,
    d_min: T,
    params: &Params<T>,
) -> T {
    if d_min > params.safe_distance {
        params.turn_gain * sgn(heading_error)
    } else {
        params.avoid_turn_gain * sgn(heading_error)
            - params.avoid_bearing_gain * sgn(nearest_bearing)
    }
}

/// Nearest wall point within `radius` in the forward half-plane, checking
/// all four walls so that corners are handled.
pub fn wall_blocker<T: Real>(pose: &Pose<T>, env_bounds: &Rect<T>, radius: T) -> Option<Threat<T>> {
    [
        Point::new(env_bounds.min_x, pose.y),
        Point::new(env_bounds.max_x, pose.y),
        Point::new(pose.x, env_bounds.min_y),
        Point::new(pose.x, env_bounds.max_y),
    ]
    .into_iter()
    .filter_map(|p| {
        let distance = pose.position().distance(&p);
        let local = pose.to_local(&p);
        let bearing = local.y.atan2(local.x);
        (distance <= radius && bearing.abs() <= T::FRAC_PI_2())
            .then_some(Threat { distance, bearing })
    })
    .min_by(|a, b| {
        a.distance
            .partial_cmp(&b.distance)
            .unwrap_or(std::cmp::Ordering::Equal)
    })
}

/// Command issued while another robot or a wall is inside the brake
/// distance ahead: hold position and turn away from it at the avoidance
/// gain `K`.
///
/// The turn direction is chosen once per braking episode so that a robot
/// wedged between two equally close blockers does not dither between them.
pub fn safety_brake<T: Real>(
    blocker_bearing: T,
    engagement: &mut Engagement<T>,
    params: &Params<T>,
) -> VelocityCommand<T> {
    if engagement.brake_turn == T::zero() {
        engagement.brake_turn = if blocker_bearing > T::zero() {
            -T::one()
        } else {
            T::one()
        };
    }
    VelocityCommand {
        v: T::zero(),
        omega: engagement.brake_turn * params.avoid_bearing_gain,
    }
}

/// One explicit-Euler step of unicycle kinematics.
pub fn integrate_unicycle<T: Real>(pose: &Pose<T>, cmd: &VelocityCommand<T>, dt: T) -> Pose<T> {
    let (s, c) = pose.theta.sin_cos();
    Pose {
        x: pose.x + cmd.v * c * dt,
        y: pose.y + cmd.v * s * dt,
        theta: wrap_angle(pose.theta + cmd.omega * dt),
    }
}

/// Nearest wall point as a virtual neighbour once it is within the safe distance.
pub fn wall_repulsion<T: Real>(
    pose: &Pose<T>,
    env_bounds: &Rect<T>,
    params: &Params<T>,
) -> Result<Option<Threat<T>>, NavigationError> {
    if !env_bounds.contains(&pose.position()) {
        return Err(NavigationError::OutsideBounds {
            x: pose.x.to_f64_lossy(),
            y: pose.y.to_f64_lossy(),
        });
    }
    let candidates = [
        (
            pose.x - env_bounds.min_x,
            Point::new(env_bounds.min_x, pose.y),
        ),
        (
            env_bounds.max_x - pose.x,
            Point::new(env_bounds.max_x, pose.y),
        ),
        (
            pose.y - env_bounds.min_y,
            Point::new(pose.x, env_bounds.min_y),
        ),
        (
            env_bounds.max_y - pose.y,
            Point::new(pose.x, env_bounds.max_y),
        ),
    ];
    let (distance, wall_point) = candidates
        .into_iter()
        .fold(None, |best: Option<(T, Point<T>)>, c| match best {
            Some(b) if b.0 <= c.0 => Some(b),
            _ => Some(c),
        })
        .expect("four walls");
    if distance > params.safe_distance {
        return Ok(None);
    }
    let local = pose.to_local(&wall_point);
    Ok(Some(Threat {
        distance,
        bearing: local.y.atan2(local.x),
    }))
}

/// Picks the avoidance target: the nearest sensed neighbour, or the wall
/// when it is closer and lies in the forward half-plane.
pub fn nearest_threat<T: Real>(
    neighbors: &NeighborSet<T>,
    wall: Option<Threat<T>>,
) -> Option<Threat<T>> {
    let robot = neighbors.nearest().map(|o| Threat {
        distance: o.distance,
        bearing: o.bearing,
    });
    let wall = wall.filter(|w| w.bearing.abs() <= T::FRAC_PI_2());
    match (robot, wall) {
        (Some(r), Some(w)) => Some(if w.distance < r.distance { w } else { r }),
        (r, w) => r.or(w),
    }
}

/// Velocity command towards `goal_local`, updating avoidance bookkeeping.
///
/// An avoidance episode starts when the threat comes within the safe
/// distance; the linear velocity is frozen at its last value and then
/// decays. Leaving the safe distance ends the episode.
pub fn navigation_command<T: Real>(
    goal_local: &Point<T>,
    threat: Option<Threat<T>>,
    engagement: &mut Engagement<T>,
    t: T,
    params: &Params<T>,
) -> VelocityCommand<T> {
    let (d_min, bearing) =
        threat.map_or((T::infinity(), T::zero()), |th| (th.distance, th.bearing));
    if d_min <= params.safe_distance {
        if !engagement.engaged {
            engagement.engaged = true;
            engagement.t_e = t;
            engagement.v_at_engage = engagement.last_v;
        }
    } else {
        engagement.engaged = false;
    }
    let heading_error = goal_local.y.atan2(goal_local.x);
    let v = linear_velocity(d_min, engagement.v_at_engage, t, engagement.t_e, params);
    let omega = angular_velocity(heading_error, bearing, d_min, params);
    engagement.last_v = v;
    VelocityCommand { v, omega }
}
