//! Post-hoc community detection and compactness checks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point, Pose};
use crate::params::Params;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Community<T> {
    /// Robot ids in ascending order.
    pub members: Vec<usize>,
    pub centroid: Point<T>,
    /// Largest pairwise member distance.
    pub diameter: T,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CommunityError {
    #[error("collinearity needs at least three members, got {0}")]
    TooFewMembers(usize),
    #[error("member id {0} has no pose")]
    UnknownMember(usize),
}

/// Communities among stopped robots, linking any two within the sensing range.
pub fn detect_communities<T: Real>(
    final_poses: &[Pose<T>],
    stopped: &[bool],
    params: &Params<T>,
) -> (Vec<Community<T>>, Vec<usize>) {
    detect_communities_within(
        final_poses,
        stopped,
        params.sensing_range,
        params.min_community_size,
    )
}

/// Connected components of stopped robots under `link_distance`; components
/// smaller than `min_size` and robots still moving are returned as outliers.
pub fn detect_communities_within<T: Real>(
    poses: &[Pose<T>],
    stopped: &[bool],
    link_distance: T,
    min_size: usize,
) -> (Vec<Community<T>>, Vec<usize>) {
    assert_eq!(
        poses.len(),
        stopped.len(),
        "poses and stop flags must be index-aligned"
    );
    let n = poses.len();
    let mut component = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for seed in 0..n {
        if !stopped[seed] || component[seed] != usize::MAX {
            continue;
        }
        let id = groups.len();
        let mut members = vec![seed];
        component[seed] = id;
        let mut cursor = 0;
        while cursor < members.len() {
            let a = members[cursor];
            cursor += 1;
            for b in 0..n {
                if stopped[b]
                    && component[b] == usize::MAX
                    && poses[a].distance(&poses[b]) <= link_distance
                {
                    component[b] = id;
                    members.push(b);
                }
            }
        }
        members.sort_unstable();
        groups.push(members);
    }

    let mut communities = Vec::new();
    let mut outliers: Vec<usize> = (0..n).filter(|&i| !stopped[i]).collect();
    for members in groups {
        if members.len() >= min_size {
            communities.push(summarize(&members, poses));
        } else {
            outliers.extend(members);
        }
    }
    outliers.sort_unstable();
    (communities, outliers)
}

fn summarize<T: Real>(members: &[usize], poses: &[Pose<T>]) -> Community<T> {
    let k = T::from_usize_lossy(members.len());
    let (sx, sy) = members.iter().fold((T::zero(), T::zero()), |(sx, sy), &m| {
        (sx + poses[m].x, sy + poses[m].y)
    });
    let mut diameter = T::zero();
    for (i, &a) in members.iter().enumerate() {
        for &b in &members[i + 1..] {
            diameter = diameter.max(poses[a].distance(&poses[b]));
        }
    }
    Community {
        members: members.to_vec(),
        centroid: Point::new(sx / k, sy / k),
        diameter,
    }
}

/// Smallest, over member triples, of the largest distance from a triple
/// member to that triple's total-least-squares line. Zero iff some triple is
/// exactly collinear.
pub fn collinearity_residual<T: Real>(
    community: &Community<T>,
    final_poses: &[Pose<T>],
) -> Result<T, CommunityError> {
    let m = &community.members;
    if m.len() < 3 {
        return Err(CommunityError::TooFewMembers(m.len()));
    }
    let pts = m
        .iter()
        .map(|&id| {
            final_poses
                .get(id)
                .map(Pose::position)
                .ok_or(CommunityError::UnknownMember(id))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut best = T::infinity();
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            for c in b + 1..pts.len() {
                best = best.min(triple_line_residual(&[pts[a], pts[b], pts[c]]));
            }
        }
    }
    Ok(best)
}

/// Largest point-to-line distance for the total-least-squares line of three
/// points. When the scatter is isotropic every centroidal line is a
/// least-squares fit and the one with the smallest worst-case distance is
/// used.
pub(crate) fn triple_line_residual<T: Real>(pts: &[Point<T>; 3]) -> T {
    let three = T::lit(3.0);
    let cx = (pts[0].x + pts[1].x + pts[2].x) / three;
    let cy = (pts[0].y + pts[1].y + pts[2].y) / three;
    let centered = pts.map(|p| Point::new(p.x - cx, p.y - cy));
    let (mut sxx, mut syy, mut sxy) = (T::zero(), T::zero(), T::zero());
    for p in &centered {
        sxx = sxx + p.x * p.x;
        syy = syy + p.y * p.y;
        sxy = sxy + p.x * p.y;
    }
    let worst = |dir: Point<T>| -> T {
        let n = dir.norm();
        if n == T::zero() {
            return T::infinity();
        }
        centered
            .iter()
            .map(|p| ((p.x * dir.y - p.y * dir.x) / n).abs())
            .fold(T::zero(), T::max)
    };

    let spread = sxx + syy;
    if spread == T::zero() {
        return T::zero();
    }
    let gap = ((sxx - syy) * (sxx - syy) + T::lit(4.0) * sxy * sxy).sqrt();
    if gap > T::lit(1e-9) * spread {
        let phi = (T::lit(2.0) * sxy).atan2(sxx - syy) / T::lit(2.0);
        return worst(Point::new(phi.cos(), phi.sin()));
    }
    // Isotropic: the min-max line through the centroid either passes through
    // one point or balances two, i.e. runs along p_a or p_a +/- p_b.
    let mut candidates = centered.to_vec();
    for a in 0..3 {
        for b in a + 1..3 {
            candidates.push(Point::new(
                centered[a].x + centered[b].x,
                centered[a].y + centered[b].y,
            ));
            candidates.push(Point::new(
                centered[a].x - centered[b].x,
                centered[a].y - centered[b].y,
            ));
        }
    }
    candidates
        .into_iter()
        .map(worst)
        .fold(T::infinity(), T::min)
}
