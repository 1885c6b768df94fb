//! Ground-truth range/bearing sensor with a conic field of view and
//! line-of-sight occlusion by other robot bodies.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{point_segment_distance, Pose};
use crate::params::Params;
use crate::scalar::{wrap_angle, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensingError {
    #[error("observer and target share a position; bearing is undefined")]
    CoincidentPositions,
}

/// One detected robot as seen from the observer's body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation<T> {
    /// Identifier local to the observer and to this sweep.
    pub local_id: usize,
    pub distance: T,
    /// Signed bearing relative to the observer heading.
    pub bearing: T,
    pub x_local: T,
    pub y_local: T,
}

impl<T: Real> Observation<T> {
    pub fn new(local_id: usize, distance: T, bearing: T) -> Self {
        let (s, c) = bearing.sin_cos();
        Observation {
            local_id,
            distance,
            bearing,
            x_local: distance * c,
            y_local: distance * s,
        }
    }
}

/// Neighbours from one sweep, ordered by ascending distance then bearing.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NeighborSet<T> {
    pub observations: Vec<Observation<T>>,
}

impl<T: Real> NeighborSet<T> {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Observation<T>> {
        self.observations.iter()
    }

    /// The closest observation, if any.
    pub fn nearest(&self) -> Option<&Observation<T>> {
        self.observations.first()
    }

    /// Builds a set from raw polar readings, sorting and assigning local ids.
    pub fn from_polar(readings: impl IntoIterator<Item = (T, T)>) -> Self {
        let mut polar: Vec<(T, T)> = readings.into_iter().collect();
        polar.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
        });
        let observations = polar
            .into_iter()
            .enumerate()
            .map(|(id, (d, b))| Observation::new(id, d, b))
            .collect();
        NeighborSet { observations }
    }
}

/// Distance and signed bearing of `target` seen from `observer`.
pub fn relative_polar<T: Real>(
    observer: &Pose<T>,
    target: &Pose<T>,
) -> Result<(T, T), SensingError> {
    let dx = target.x - observer.x;
    let dy = target.y - observer.y;
    let d = dx.hypot(dy);
    if d == T::zero() {
        return Err(SensingError::CoincidentPositions);
    }
    Ok((d, wrap_angle(dy.atan2(dx) - observer.theta)))
}

/// True iff some body in `others` cuts the sight line from observer to target.
///
/// Bodies are disks of `body_radius` centred on each pose; the line of sight
/// runs centre to centre.
pub fn is_occluded<T: Real>(
    observer: &Pose<T>,
    target: &Pose<T>,
    others: &[Pose<T>],
    body_radius: T,
) -> bool {
    let a = observer.position();
    let b = target.position();
    others
        .iter()
        .any(|o| point_segment_distance(&o.position(), &a, &b) < body_radius)
}

/// Neighbour set of robot `observer_index` in the snapshot `world`.
///
/// A robot is a neighbour when it is strictly inside the sensing range, its
/// bearing magnitude is at most the half-angle, and no third body blocks the
/// sight line. An occluder that satisfies range and bearing is reported on
/// its own account.
/// Nearest robot within `radius` in the observer's forward half-plane
/// (bearing within a right angle) as `(distance, bearing)`. This is the
/// short-range proximity check behind the safety brake; it ignores the
/// sensing cone.
pub fn blocker_ahead<T: Real>(
    observer_index: usize,
    world: &[Pose<T>],
    radius: T,
) -> Option<(T, T)> {
    let observer = &world[observer_index];
    world
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != observer_index)
        .filter_map(|(_, target)| relative_polar(observer, target).ok())
        .filter(|(d, b)| *d <= radius && b.abs() <= T::FRAC_PI_2())
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal))
}

pub fn detect_neighbors<T: Real>(
    observer_index: usize,
    world: &[Pose<T>],
    params: &Params<T>,
) -> NeighborSet<T> {
    let observer = &world[observer_index];
    let mut readings = Vec::new();
    for (j, target) in world.iter().enumerate() {
        if j == observer_index {
            continue;
        }
        let Ok((d, bearing)) = relative_polar(observer, target) else {
            continue;
        };
        if !(d < params.sensing_range) || bearing.abs() > params.fov_half_angle {
            continue;
        }
        let blocked = world.iter().enumerate().any(|(k, other)| {
            k != observer_index
                && k != j
                && point_segment_distance(
                    &other.position(),
                    &observer.position(),
                    &target.position(),
                ) < params.body_radius
        });
        if !blocked {
            readings.push((d, bearing));
        }
    }
    NeighborSet::from_polar(readings)
}
