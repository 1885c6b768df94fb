//! Scenario files: a TOML document with a parameter block, an initial
//! layout and optional spawn events.
//!
//! ```toml
//! seed = 7
//! swarm_size = 6            # random layout when [[robots]] is absent
//! heading = "outward"       # "uniform" (default) or "outward"
//! min_separation = 0.5      # random layout only; default 2 * body_radius
//! mutually_unseen = true    # random layout only; no robot starts with a neighbour
//! record_stride = 10        # keep every 10th step in the trajectory log
//!
//! [params]
//! sensing_range = 1.6
//! fov_half_angle_deg = 60.0 # or fov_half_angle in radians
//! min_community_size = 3
//! env_size = 5.0            # square centred on the origin, or env_bounds = [x0, y0, x1, y1]
//! goal_size = 4.0           # likewise goal_bounds
//!
//! [[robots]]
//! x = 0.0
//! y = 1.0
//! theta_deg = 90.0          # or theta in radians
//!
//! [[spawns]]
//! time = 60.0
//! x = -2.0
//! y = -2.0
//! theta_deg = 45.0
//! ```
//!
//! Every `[params]` key is optional and falls back to [`Params::default`].
//! Infinite range is written `sensing_range = inf`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{sample_initial_poses, EngineError, HeadingMode, Spawn};
use crate::geometry::{Pose, Rect};
use crate::params::Params;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Layout(#[from] EngineError),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub sensing_range: Option<f64>,
    pub fov_half_angle: Option<f64>,
    pub fov_half_angle_deg: Option<f64>,
    pub safe_distance: Option<f64>,
    pub goal_radius: Option<f64>,
    pub min_community_size: Option<usize>,
    pub v_max: Option<f64>,
    pub turn_gain: Option<f64>,
    pub avoid_turn_gain: Option<f64>,
    pub avoid_bearing_gain: Option<f64>,
    pub decel: Option<f64>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub hold_window: Option<f64>,
    pub env_size: Option<f64>,
    pub env_bounds: Option<[f64; 4]>,
    pub goal_size: Option<f64>,
    pub goal_bounds: Option<[f64; 4]>,
    pub body_radius: Option<f64>,
    pub brake_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseFile {
    pub x: f64,
    pub y: f64,
    pub theta: Option<f64>,
    pub theta_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpawnFile {
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub theta: Option<f64>,
    pub theta_deg: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub seed: Option<u64>,
    pub swarm_size: Option<usize>,
    pub heading: Option<HeadingMode>,
    pub min_separation: Option<f64>,
    pub mutually_unseen: Option<bool>,
    pub record_stride: Option<usize>,
    #[serde(default)]
    pub params: ParamsFile,
    #[serde(default)]
    pub robots: Vec<PoseFile>,
    #[serde(default)]
    pub spawns: Vec<SpawnFile>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    Explicit(Vec<Pose<f64>>),
    Random {
        count: usize,
        heading: HeadingMode,
        min_separation: f64,
        mutually_unseen: bool,
    },
}

/// A resolved scenario ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: Params<f64>,
    pub layout: Layout,
    pub spawns: Vec<Spawn<f64>>,
    pub record_stride: usize,
}

fn angle(rad: Option<f64>, deg: Option<f64>, what: &str) -> Result<f64, ScenarioError> {
    match (rad, deg) {
        (Some(_), Some(_)) => Err(ScenarioError::Invalid(format!(
            "{what}: give radians or degrees, not both"
        ))),
        (Some(r), None) => Ok(r),
        (None, Some(d)) => Ok(d.to_radians()),
        (None, None) => Ok(0.0),
    }
}

fn bounds(
    size: Option<f64>,
    rect: Option<[f64; 4]>,
    default: Rect<f64>,
    what: &str,
) -> Result<Rect<f64>, ScenarioError> {
    match (size, rect) {
        (Some(_), Some(_)) => Err(ScenarioError::Invalid(format!(
            "{what}: give a size or bounds, not both"
        ))),
        (Some(s), None) => Ok(Rect::centered_square(s)),
        (None, Some([a, b, c, d])) => Ok(Rect::new(a, b, c, d)),
        (None, None) => Ok(default),
    }
}

impl ParamsFile {
    pub fn resolve(&self, seed: u64) -> Result<Params<f64>, ScenarioError> {
        let d = Params::<f64>::default();
        let fov = match (self.fov_half_angle, self.fov_half_angle_deg) {
            (None, None) => d.fov_half_angle,
            (r, g) => angle(r, g, "fov_half_angle")?,
        };
        let env_bounds = bounds(self.env_size, self.env_bounds, d.env_bounds, "environment")?;
        let goal_default = if self.env_size.is_some() || self.env_bounds.is_some() {
            env_bounds
        } else {
            d.goal_bounds
        };
        let params = Params {
            sensing_range: self.sensing_range.unwrap_or(d.sensing_range),
            fov_half_angle: fov,
            safe_distance: self.safe_distance.unwrap_or(d.safe_distance),
            goal_radius: self.goal_radius.unwrap_or(d.goal_radius),
            min_community_size: self.min_community_size.unwrap_or(d.min_community_size),
            v_max: self.v_max.unwrap_or(d.v_max),
            turn_gain: self.turn_gain.unwrap_or(d.turn_gain),
            avoid_turn_gain: self.avoid_turn_gain.unwrap_or(d.avoid_turn_gain),
            avoid_bearing_gain: self.avoid_bearing_gain.unwrap_or(d.avoid_bearing_gain),
            decel: self.decel.unwrap_or(d.decel),
            dt: self.dt.unwrap_or(d.dt),
            t_max: self.t_max.unwrap_or(d.t_max),
            hold_window: self.hold_window.unwrap_or(d.hold_window),
            env_bounds,
            goal_bounds: bounds(
                self.goal_size,
                self.goal_bounds,
                goal_default,
                "goal region",
            )?,
            body_radius: self.body_radius.unwrap_or(d.body_radius),
            brake_distance: self.brake_distance.unwrap_or(d.brake_distance),
            seed,
        };
        params
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        Ok(params)
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = toml::from_str(text)?;
        Self::from_file(&file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn from_file(file: &ScenarioFile) -> Result<Self, ScenarioError> {
        let params = file.params.resolve(file.seed.unwrap_or(0))?;
        let layout = if file.robots.is_empty() {
            let count = file.swarm_size.ok_or_else(|| {
                ScenarioError::Invalid("either [[robots]] or swarm_size is required".into())
            })?;
            Layout::Random {
                count,
                heading: file.heading.unwrap_or_default(),
                min_separation: file.min_separation.unwrap_or(2.0 * params.body_radius),
                mutually_unseen: file.mutually_unseen.unwrap_or(false),
            }
        } else {
            if let Some(n) = file.swarm_size {
                if n != file.robots.len() {
                    return Err(ScenarioError::Invalid(format!(
                        "swarm_size = {n} but {} robots are listed",
                        file.robots.len()
                    )));
                }
            }
            let poses = file
                .robots
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    Ok(Pose::new(
                        r.x,
                        r.y,
                        angle(r.theta, r.theta_deg, &format!("robots[{i}]"))?,
                    ))
                })
                .collect::<Result<Vec<_>, ScenarioError>>()?;
            Layout::Explicit(poses)
        };
        let spawns = file
            .spawns
            .iter()
            .enumerate()
            .map(|(i, s)| {
                Ok(Spawn {
                    time: s.time,
                    pose: Pose::new(
                        s.x,
                        s.y,
                        angle(s.theta, s.theta_deg, &format!("spawns[{i}]"))?,
                    ),
                })
            })
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        Ok(Scenario {
            params,
            layout,
            spawns,
            record_stride: file.record_stride.unwrap_or(1).max(1),
        })
    }

    pub fn swarm_size(&self) -> usize {
        match &self.layout {
            Layout::Explicit(p) => p.len(),
            Layout::Random { count, .. } => *count,
        }
    }

    /// Same scenario under another seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut s = self.clone();
        s.params.seed = seed;
        s
    }

    pub fn initial_poses(&self) -> Result<Vec<Pose<f64>>, ScenarioError> {
        match &self.layout {
            Layout::Explicit(p) => Ok(p.clone()),
            Layout::Random {
                count,
                heading,
                min_separation,
                mutually_unseen,
            } => Ok(sample_initial_poses(
                &self.params,
                *count,
                *min_separation,
                *heading,
                *mutually_unseen,
            )?),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCENARIO_2: &str = r#"
seed = 3
record_stride = 5

[params]
sensing_range = 1.6
env_size = 5.0
goal_size = 4.0
fov_half_angle_deg = 60.0

[[robots]]
x = -1.0
y = -1.0
theta_deg = 45.0

[[robots]]
x = 1.0
y = 1.0
theta = 3.14159

[[spawns]]
time = 60.0
x = 2.0
y = -2.0
theta_deg = 135.0
"#;

    #[test]
    fn parses_explicit_layout_and_spawns() {
        let s = Scenario::parse(SCENARIO_2).unwrap();
        assert_eq!(s.params.seed, 3);
        assert_eq!(s.params.sensing_range, 1.6);
        assert_eq!(s.params.env_bounds, Rect::centered_square(5.0));
        assert_eq!(s.params.goal_bounds, Rect::centered_square(4.0));
        assert_eq!(s.record_stride, 5);
        assert_eq!(s.swarm_size(), 2);
        assert_eq!(s.spawns.len(), 1);
        assert!((s.spawns[0].pose.theta - 135f64.to_radians()).abs() < 1e-12);
        let poses = s.initial_poses().unwrap();
        assert!((poses[0].theta - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn random_layout_defaults() {
        let s = Scenario::parse("swarm_size = 20\nseed = 11\n").unwrap();
        assert_eq!(
            s.params,
            Params {
                seed: 11,
                ..Params::default()
            }
        );
        let poses = s.initial_poses().unwrap();
        assert_eq!(poses.len(), 20);
        assert_eq!(poses, s.initial_poses().unwrap());
        assert_ne!(poses, s.with_seed(12).initial_poses().unwrap());
    }

    #[test]
    fn env_only_makes_goal_region_match() {
        let s = Scenario::parse("swarm_size = 2\n[params]\nenv_size = 10.0\n").unwrap();
        assert_eq!(s.params.goal_bounds, s.params.env_bounds);
    }

    #[test]
    fn infinite_range_parses() {
        let s = Scenario::parse(
            "swarm_size = 6\n[params]\nsensing_range = inf\nfov_half_angle_deg = 180.0\n",
        )
        .unwrap();
        assert!(s.params.sensing_range.is_infinite());
        assert!((s.params.fov_half_angle - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = Scenario::parse("swarm_size = 6\n[params]\nsensing_rnage = 2.0\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        let err = Scenario::parse("swarm_size = \"six\"\n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn semantic_errors() {
        assert!(matches!(
            Scenario::parse("seed = 1\n"),
            Err(ScenarioError::Invalid(_))
        ));
        assert!(matches!(
            Scenario::parse("swarm_size = 3\n[params]\nmin_community_size = 1\n"),
            Err(ScenarioError::Invalid(_))
        ));
        assert!(matches!(
            Scenario::parse(
                "swarm_size = 3\n[params]\nenv_size = 5.0\nenv_bounds = [0.0, 0.0, 1.0, 1.0]\n"
            ),
            Err(ScenarioError::Invalid(_))
        ));
        assert!(matches!(
            Scenario::parse("swarm_size = 3\n[[robots]]\nx = 0.0\ny = 0.0\n"),
            Err(ScenarioError::Invalid(_))
        ));
    }
}
