//! Algorithm, controller and environment constants.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Rect;
use crate::scalar::Real;

/// Every constant a run depends on.
///
/// Lengths are meters, angles radians, times simulated seconds. The defaults
/// are the flagship configuration: a 40 m square arena, a 24 m square
/// wander-goal region, 3 m sensing range, a 120 degree field of view and the
/// reference controller gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params<T> {
    /// Sensing range `R`; a neighbour must be strictly closer than this.
    pub sensing_range: T,
    /// Half-angle `Delta` of the sensing cone.
    pub fov_half_angle: T,
    /// Safe distance `D_s` below which the avoidance branch engages.
    pub safe_distance: T,
    /// Goal-reached radius `D_g`.
    pub goal_radius: T,
    /// Minimum community size `M`, counting the robot itself.
    pub min_community_size: usize,
    pub v_max: T,
    /// Free-motion turn gain `k`.
    pub turn_gain: T,
    /// Goal-seeking turn gain `beta` used while avoiding.
    pub avoid_turn_gain: T,
    /// Turn-away gain `K` used while avoiding.
    pub avoid_bearing_gain: T,
    /// Linear deceleration `lambda` applied while avoiding.
    pub decel: T,
    pub dt: T,
    pub t_max: T,
    /// How long every robot must stay stopped before the run counts as converged.
    pub hold_window: T,
    pub env_bounds: Rect<T>,
    /// Region wander goals are drawn from.
    pub goal_bounds: Rect<T>,
    pub body_radius: T,
    /// Range of the forward safety brake: linear speed is cut to zero while
    /// another robot is this close in the forward half-plane. Zero disables it.
    pub brake_distance: T,
    pub seed: u64,
}

impl<T: Real> Default for Params<T> {
    fn default() -> Self {
        Params {
            sensing_range: T::lit(3.0),
            fov_half_angle: T::FRAC_PI_3(),
            safe_distance: T::lit(0.775),
            goal_radius: T::lit(0.875),
            min_community_size: 3,
            v_max: T::lit(0.22),
            turn_gain: T::lit(0.3),
            avoid_turn_gain: T::lit(0.3),
            avoid_bearing_gain: T::lit(0.866),
            decel: T::lit(1e-5),
            dt: T::lit(0.1),
            t_max: T::lit(2000.0),
            hold_window: T::lit(5.0),
            env_bounds: Rect::centered_square(T::lit(40.0)),
            goal_bounds: Rect::centered_square(T::lit(24.0)),
            body_radius: T::lit(0.1),
            brake_distance: T::lit(0.3),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("field-of-view half-angle must lie in (0, pi], got {0}")]
    FovOutOfRange(f64),
    #[error("minimum community size must be at least 2, got {0}")]
    CommunityTooSmall(usize),
    #[error("goal bounds must be a valid rectangle inside the environment bounds")]
    GoalBoundsOutsideEnv,
    #[error("environment bounds must have positive extent")]
    DegenerateEnv,
}

impl<T: Real> Params<T> {
    /// Checks the structural invariants. Lemma-level diagnostics (safe
    /// distance versus goal radius and so on) live in
    /// [`crate::engine::check_params`] instead; they never make a
    /// parameter set unusable.
    pub fn validate(&self) -> Result<(), ParamsError> {
        let positive = [
            ("sensing_range", self.sensing_range),
            ("safe_distance", self.safe_distance),
            ("goal_radius", self.goal_radius),
            ("v_max", self.v_max),
            ("dt", self.dt),
            ("t_max", self.t_max),
            ("body_radius", self.body_radius),
        ];
        for (name, value) in positive {
            if !(value > T::zero()) {
                return Err(ParamsError::NonPositive {
                    name,
                    value: value.to_f64_lossy(),
                });
            }
        }
        for (name, value) in [
            ("turn_gain", self.turn_gain),
            ("avoid_turn_gain", self.avoid_turn_gain),
            ("avoid_bearing_gain", self.avoid_bearing_gain),
            ("decel", self.decel),
            ("hold_window", self.hold_window),
            ("brake_distance", self.brake_distance),
        ] {
            if value < T::zero() || value.is_nan() {
                return Err(ParamsError::NonPositive {
                    name,
                    value: value.to_f64_lossy(),
                });
            }
        }
        if !(self.fov_half_angle > T::zero() && self.fov_half_angle <= T::PI()) {
            return Err(ParamsError::FovOutOfRange(
                self.fov_half_angle.to_f64_lossy(),
            ));
        }
        if self.min_community_size < 2 {
            return Err(ParamsError::CommunityTooSmall(self.min_community_size));
        }
        if !(self.env_bounds.width() > T::zero() && self.env_bounds.height() > T::zero()) {
            return Err(ParamsError::DegenerateEnv);
        }
        if !self.goal_bounds.is_valid() || !self.env_bounds.contains_rect(&self.goal_bounds) {
            return Err(ParamsError::GoalBoundsOutsideEnv);
        }
        Ok(())
    }

    /// Square environment centred on the origin whose area per robot is
    /// `area_per_robot`; the goal square keeps the default 24/40 side ratio.
    pub fn with_specific_area(self, area_per_robot: T, swarm_size: usize) -> Self {
        let side = (area_per_robot * T::from_usize_lossy(swarm_size)).sqrt();
        Params {
            env_bounds: Rect::centered_square(side),
            goal_bounds: Rect::centered_square(side * T::lit(0.6)),
            ..self
        }
    }

    /// Lossless for `f64`, rounding for `f32`.
    pub fn cast<U: Real>(&self) -> Params<U> {
        let c = |v: T| U::lit(v.to_f64_lossy());
        let r = |b: &Rect<T>| Rect::new(c(b.min_x), c(b.min_y), c(b.max_x), c(b.max_y));
        Params {
            sensing_range: c(self.sensing_range),
            fov_half_angle: c(self.fov_half_angle),
            safe_distance: c(self.safe_distance),
            goal_radius: c(self.goal_radius),
            min_community_size: self.min_community_size,
            v_max: c(self.v_max),
            turn_gain: c(self.turn_gain),
            avoid_turn_gain: c(self.avoid_turn_gain),
            avoid_bearing_gain: c(self.avoid_bearing_gain),
            decel: c(self.decel),
            dt: c(self.dt),
            t_max: c(self.t_max),
            hold_window: c(self.hold_window),
            env_bounds: r(&self.env_bounds),
            goal_bounds: r(&self.goal_bounds),
            body_radius: c(self.body_radius),
            brake_distance: c(self.brake_distance),
            seed: self.seed,
        }
    }
}
