//! Run-level metrics and small statistics helpers.

use crate::engine::RunRecord;
use crate::params::Params;
use crate::scalar::Real;

/// Earliest snapshot time from which every robot stays stopped until the
/// end of the record, provided that stretch lasts at least the hold window.
///
/// Resolution is that of the recorded snapshots.
pub fn synergy_time<T: Real>(record: &RunRecord<T>) -> Option<T> {
    let snaps = &record.snapshots;
    let last = snaps.last()?;
    if !last.all_stopped() || last.robots.len() != record.swarm_size() {
        return None;
    }
    let start_idx = snaps
        .iter()
        .rposition(|s| !s.all_stopped())
        .map_or(0, |i| i + 1);
    let start = snaps[start_idx].t;
    (last.t - start >= record.params.hold_window).then_some(start)
}

/// Environment area per robot.
pub fn swarm_specific_area<T: Real>(area: T, swarm_size: usize) -> T {
    area / T::from_usize_lossy(swarm_size)
}

/// Sensing-cone area `Delta * R^2` as a percentage of the area per robot.
pub fn percentage_sensing_area<T: Real>(params: &Params<T>, env_area: T, swarm_size: usize) -> T {
    let sector = params.fov_half_angle * params.sensing_range * params.sensing_range;
    T::lit(100.0) * sector / swarm_specific_area(env_area, swarm_size)
}

/// Fraction of robot pairs on which two labelings agree (same group in
/// both, or different groups in both).
pub fn rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same robots");
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut agree = 0u64;
    let mut total = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            total += 1;
            if (a[i] == a[j]) == (b[i] == b[j]) {
                agree += 1;
            }
        }
    }
    agree as f64 / total as f64
}

/// Relabels by first occurrence so equal partitions compare equal.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Sample standard deviation; `None` below two values.
pub fn std_dev(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let ss: f64 = values.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation; `None` when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let (mx, my) = (mean(&rx)?, mean(&ry)?);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::StateTag;
    use crate::engine::{RobotSample, Snapshot};
    use crate::geometry::{Point, Pose};
    use crate::navigation::VelocityCommand;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_3;

    fn record(stopped_by_time: &[(f64, Vec<bool>)]) -> RunRecord<f64> {
        let snapshots = stopped_by_time
            .iter()
            .map(|(t, flags)| Snapshot {
                t: *t,
                robots: flags
                    .iter()
                    .map(|&s| RobotSample {
                        pose: Pose::default(),
                        state: if s { StateTag::S1 } else { StateTag::S3 },
                        stopped: s,
                        command: VelocityCommand::zero(),
                        goal: Point::origin(),
                    })
                    .collect(),
            })
            .collect::<Vec<_>>();
        let n = stopped_by_time.last().map_or(0, |s| s.1.len());
        RunRecord {
            seed: 0,
            params: Params::default(),
            t_end: stopped_by_time.last().map_or(0.0, |s| s.0),
            snapshots,
            synergy_time: None,
            final_poses: vec![Pose::default(); n],
            final_stopped: stopped_by_time.last().map_or(vec![], |s| s.1.clone()),
            final_partition: vec![],
            outliers: vec![],
            min_interrobot_distance: 1.0,
            resume_events: 0,
            warnings: vec![],
        }
    }

    #[test]
    fn synergy_time_cases() {
        let all = (0..=60)
            .map(|k| (k as f64 * 0.1, vec![true, true]))
            .collect::<Vec<_>>();
        assert_eq!(synergy_time(&record(&all)), Some(0.0));

        let wander = (0..=60)
            .map(|k| (k as f64 * 0.1, vec![true, false]))
            .collect::<Vec<_>>();
        assert_eq!(synergy_time(&record(&wander)), None);

        let late: Vec<_> = (0..=100)
            .map(|k| (k as f64 * 0.1, vec![true, k >= 40]))
            .collect();
        let st = synergy_time(&record(&late)).unwrap();
        assert!((st - 4.0).abs() < 1e-9);

        let short: Vec<_> = (0..=100)
            .map(|k| (k as f64 * 0.1, vec![true, k >= 70]))
            .collect();
        assert_eq!(
            synergy_time(&record(&short)),
            None,
            "stretch shorter than the hold window"
        );
    }

    #[test]
    fn sensing_percentage_examples() {
        let p = Params::<f64> {
            sensing_range: 3.0,
            fov_half_angle: FRAC_PI_3,
            ..Default::default()
        };
        let direct = 100.0 * (FRAC_PI_3 * 9.0) / (1600.0 / 20.0);
        let pct = percentage_sensing_area(&p, 1600.0, 20);
        assert!((pct - direct).abs() < 1e-12);
        assert!((pct - 11.78).abs() < 0.005);
        let zero = Params::<f64> {
            fov_half_angle: 0.0,
            ..p.clone()
        };
        assert_eq!(percentage_sensing_area(&zero, 1600.0, 20), 0.0);
        assert!((percentage_sensing_area(&p, 1600.0, 40) - 2.0 * pct).abs() < 1e-12);
    }

    #[test]
    fn rand_index_examples() {
        assert_eq!(rand_index(&[0, 0, 1, 1], &[5, 5, 9, 9]), 1.0);
        // pairs: (01) same/diff, (02) diff/diff, (03) diff/diff, (12) diff/same,
        // (13) diff/diff, (23) same/diff -> 3 of 6 agree
        assert_eq!(rand_index(&[0, 0, 1, 1], &[0, 1, 1, 2]), 0.5);
    }

    #[test]
    fn ranks_and_spearman() {
        assert_eq!(
            average_ranks(&[10.0, 20.0, 20.0, 5.0]),
            vec![2.0, 3.5, 3.5, 1.0]
        );
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 40.0, 90.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(spearman(&[1.0, 2.0], &[1.0, 1.0]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert!((std_dev(&[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn rand_index_bounds(a in prop::collection::vec(0usize..4, 2..15), seed in any::<u64>()) {
            let b: Vec<usize> = a.iter().enumerate().map(|(i, _)| ((seed >> (i % 60)) & 3) as usize).collect();
            let r = rand_index(&a, &b);
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert_eq!(rand_index(&a, &a), 1.0);
            let same = canonical_labels(&a) == canonical_labels(&b);
            prop_assert_eq!(r == 1.0, same);
        }
    }
}
