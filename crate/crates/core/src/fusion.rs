//! Simulated lidar raycasting over the category mask and the camera+lidar
//! fusion arbiter that keeps steering updates flowing between mask updates.
//!
//! The lidar and the mask share one world model, so the whole loop is
//! verifiable at desk scale: [`run_loop`] drives a simulated clock with the
//! trajectory replanned at `mask_rate` and [`fuse`] evaluated at
//! `lidar_rate` against the most recent trajectory. An obstacle appearing
//! mid-interval is therefore answered within one lidar period, well before
//! the next replan.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::mask::{to_category_mask, CategoryMask, ClassSchema, LabelMask};
use crate::planner::{
    build_fields, find_local_destination, plan_trajectory, ApfParams, Trajectory,
};

/// Vehicle pose in mask coordinates; heading in radians, measured from +x
/// with y down (straight "up" the mask is -π/2).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// One sweep of simulated ranges, beams uniformly spaced across `fov`
/// centered on the pose heading.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LidarScan {
    pub pose: Pose,
    pub fov: f64,
    pub max_range: f64,
    pub ranges: Vec<f64>,
}

impl LidarScan {
    pub fn beam_angle(&self, beam: usize) -> f64 {
        beam_angle(self.pose.heading, self.fov, self.ranges.len(), beam)
    }
}

fn beam_angle(heading: f64, fov: f64, n_beams: usize, beam: usize) -> f64 {
    if n_beams <= 1 {
        heading
    } else {
        heading - fov / 2.0 + beam as f64 * fov / (n_beams - 1) as f64
    }
}

/// Wrap an angle difference into (-π, π].
fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let wrapped = (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if wrapped <= -std::f64::consts::PI {
        wrapped + two_pi
    } else {
        wrapped
    }
}

/// Cast `n_beams` rays from the pose, stepping 0.5 cells at a time until a
/// blocked cell or `max_range`. Cells outside the mask do not stop a ray.
pub fn simulate_lidar(
    cat: &CategoryMask,
    pose: Pose,
    n_beams: usize,
    fov: f64,
    max_range: f64,
) -> Result<LidarScan> {
    if n_beams == 0 || !max_range.is_finite() || max_range <= 0.0 || !fov.is_finite() || fov < 0.0 {
        return Err(Error::InvalidParams(
            "lidar needs beams, a positive max_range and a non-negative fov".into(),
        ));
    }
    let inside = pose.x >= -0.5
        && pose.y >= -0.5
        && pose.x < cat.width() as f64 - 0.5
        && pose.y < cat.height() as f64 - 0.5;
    if !inside {
        return Err(Error::PoseNotTraversable(pose.x, pose.y));
    }
    let (px, py) = (pose.x.round() as usize, pose.y.round() as usize);
    if cat.is_blocked(px, py) {
        return Err(Error::PoseNotTraversable(pose.x, pose.y));
    }

    let steps = (max_range / 0.5).ceil() as usize;
    let mut ranges = Vec::with_capacity(n_beams);
    for beam in 0..n_beams {
        let angle = beam_angle(pose.heading, fov, n_beams, beam);
        let (dx, dy) = (angle.cos(), angle.sin());
        let mut range = max_range;
        for step in 1..=steps {
            let t = (step as f64 * 0.5).min(max_range);
            let x = pose.x + t * dx;
            let y = pose.y + t * dy;
            let cx = x.round() as isize;
            let cy = y.round() as isize;
            if cx >= 0
                && cy >= 0
                && cx < cat.width() as isize
                && cy < cat.height() as isize
                && cat.is_blocked(cx as usize, cy as usize)
            {
                range = t;
                break;
            }
        }
        ranges.push(range);
    }
    Ok(LidarScan {
        pose,
        fov,
        max_range,
        ranges,
    })
}

/// Where a steering command came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandSource {
    Trajectory,
    LidarOverride,
    Stop,
}

/// Heading and speed handed to the drive controller.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SteeringCommand {
    pub heading: f64,
    pub speed_scale: f64,
    pub source: CommandSource,
}

/// Arbitration thresholds for [`fuse`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionParams {
    /// Beams shorter than this inside the cone force an override.
    pub safety_range: f64,
    /// Angular width of the cone checked around the desired heading.
    pub cone: f64,
    /// Trajectory points closer than this are skipped when picking the
    /// heading target.
    pub lookahead: f64,
}

impl Default for FusionParams {
    fn default() -> Self {
        FusionParams {
            safety_range: 6.0,
            cone: std::f64::consts::FRAC_PI_4,
            lookahead: 2.0,
        }
    }
}

/// Arbitrate between the planned trajectory and the live scan. With the cone
/// around the desired heading clear, follow the trajectory at full speed;
/// with the cone blocked, steer toward the longest beam at half speed; with
/// every beam short, stop. The emitted heading never points along a beam
/// shorter than `safety_range`.
pub fn fuse(traj: &Trajectory, scan: &LidarScan, params: &FusionParams) -> SteeringCommand {
    let pose = Vec2::new(scan.pose.x, scan.pose.y);
    let target = traj
        .points
        .iter()
        .find(|p| p.dist(pose) > params.lookahead)
        .or_else(|| traj.points.last())
        .copied()
        .unwrap_or(pose);
    let to_target = target - pose;
    let desired = if to_target.norm() < 1e-9 {
        scan.pose.heading
    } else {
        to_target.y.atan2(to_target.x)
    };

    let cone_blocked = scan.ranges.iter().enumerate().any(|(beam, &range)| {
        wrap_angle(scan.beam_angle(beam) - desired).abs() <= params.cone / 2.0
            && range < params.safety_range
    });
    if !cone_blocked {
        return SteeringCommand {
            heading: desired,
            speed_scale: 1.0,
            source: CommandSource::Trajectory,
        };
    }

    let (best_beam, best_range) = scan
        .ranges
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.total_cmp(b))
        .map(|(beam, &range)| (beam, range))
        .expect("scan has at least one beam");
    if best_range >= params.safety_range {
        SteeringCommand {
            heading: scan.beam_angle(best_beam),
            speed_scale: 0.5,
            source: CommandSource::LidarOverride,
        }
    } else {
        SteeringCommand {
            heading: desired,
            speed_scale: 0.0,
            source: CommandSource::Stop,
        }
    }
}

/// Lidar geometry used by the simulation loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LidarConfig {
    pub n_beams: usize,
    pub fov: f64,
    pub max_range: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        LidarConfig {
            n_beams: 41,
            fov: std::f64::consts::PI,
            max_range: 60.0,
        }
    }
}

/// An obstacle rectangle stamped into the world at simulation time `t`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObstacleInjection {
    pub t: f64,
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    pub class_id: u8,
}

/// Full description of one simulation run.
#[derive(Debug, Clone)]
pub struct SimScenario {
    pub mask: LabelMask,
    pub schema: ClassSchema,
    pub pose: Pose,
    pub lidar: LidarConfig,
    pub lidar_rate: f64,
    pub mask_rate: f64,
    pub duration: f64,
    pub apf: ApfParams,
    pub fusion: FusionParams,
    pub injections: Vec<ObstacleInjection>,
}

/// One line of the simulation event log.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SimEvent {
    /// A mask-rate tick: the trajectory was rebuilt (or failed to).
    Replan {
        t: f64,
        dest: Option<[usize; 2]>,
        points: usize,
        fallback_used: bool,
    },
    /// A lidar-rate tick: a steering command was emitted.
    Command {
        t: f64,
        #[serde(flatten)]
        command: SteeringCommand,
    },
}

impl SimEvent {
    pub fn time(&self) -> f64 {
        match self {
            SimEvent::Replan { t, .. } | SimEvent::Command { t, .. } => *t,
        }
    }
}

/// Drive the two logical rates on one simulated clock. Ticks that coincide
/// replan first, then fuse, so equal rates give exactly one command per
/// replan. Injections take effect at the first tick at or after their time.
pub fn run_loop(scenario: &SimScenario) -> Result<Vec<SimEvent>> {
    let rates_valid = scenario.lidar_rate.is_finite()
        && scenario.mask_rate.is_finite()
        && scenario.mask_rate > 0.0
        && scenario.lidar_rate >= scenario.mask_rate;
    if !rates_valid {
        return Err(Error::InvalidParams(
            "need lidar_rate >= mask_rate > 0".into(),
        ));
    }
    if !scenario.duration.is_finite() || scenario.duration <= 0.0 {
        return Err(Error::InvalidParams("duration must be positive".into()));
    }
    scenario.apf.validate()?;
    scenario.mask.validate(&scenario.schema)?;

    let mut world = scenario.mask.clone();
    let mut injections: Vec<&ObstacleInjection> = scenario.injections.iter().collect();
    injections.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut next_injection = 0usize;

    let mut cat = to_category_mask(&world, &scenario.schema);
    let mut trajectory: Option<Trajectory> = None;
    let mut events = Vec::new();
    let (mut mask_tick, mut lidar_tick) = (0u64, 0u64);
    let eps = 1e-9;

    loop {
        let t_mask = mask_tick as f64 / scenario.mask_rate;
        let t_lidar = lidar_tick as f64 / scenario.lidar_rate;
        let t = t_mask.min(t_lidar);
        if t > scenario.duration + eps {
            break;
        }

        // World changes land before the tick that observes them.
        let mut dirty = false;
        while next_injection < injections.len() && injections[next_injection].t <= t + eps {
            stamp(&mut world, injections[next_injection], &scenario.schema)?;
            next_injection += 1;
            dirty = true;
        }
        if dirty {
            cat = to_category_mask(&world, &scenario.schema);
        }

        if t_mask <= t_lidar + eps {
            trajectory = replan(&cat, scenario, &mut events, t_mask);
            mask_tick += 1;
        } else {
            let command = steer(&cat, scenario, trajectory.as_ref());
            events.push(SimEvent::Command {
                t: t_lidar,
                command,
            });
            lidar_tick += 1;
        }
    }
    Ok(events)
}

fn stamp(world: &mut LabelMask, injection: &ObstacleInjection, schema: &ClassSchema) -> Result<()> {
    if injection.class_id as usize >= schema.len() {
        return Err(Error::LabelOutOfRange {
            label: injection.class_id,
            classes: schema.len(),
        });
    }
    let x1 = (injection.x + injection.w).min(world.width());
    let y1 = (injection.y + injection.h).min(world.height());
    for y in injection.y.min(world.height())..y1 {
        for x in injection.x.min(world.width())..x1 {
            world.set(x, y, injection.class_id);
        }
    }
    Ok(())
}

fn replan(
    cat: &CategoryMask,
    scenario: &SimScenario,
    events: &mut Vec<SimEvent>,
    t: f64,
) -> Option<Trajectory> {
    let start = Vec2::new(scenario.pose.x, scenario.pose.y);
    let planned = find_local_destination(cat, &scenario.apf).and_then(|dest| {
        build_fields(cat, dest)
            .and_then(|fields| plan_trajectory(cat, start, dest, &fields, &scenario.apf))
            .ok()
            .map(|traj| (dest, traj))
    });
    match planned {
        Some((dest, traj)) => {
            events.push(SimEvent::Replan {
                t,
                dest: Some([dest.0, dest.1]),
                points: traj.points.len(),
                fallback_used: traj.fallback_used,
            });
            Some(traj)
        }
        None => {
            events.push(SimEvent::Replan {
                t,
                dest: None,
                points: 0,
                fallback_used: false,
            });
            None
        }
    }
}

fn steer(cat: &CategoryMask, scenario: &SimScenario, traj: Option<&Trajectory>) -> SteeringCommand {
    let scan = simulate_lidar(
        cat,
        scenario.pose,
        scenario.lidar.n_beams,
        scenario.lidar.fov,
        scenario.lidar.max_range,
    );
    match (traj, scan) {
        (Some(traj), Ok(scan)) => fuse(traj, &scan, &scenario.fusion),
        _ => SteeringCommand {
            heading: scenario.pose.heading,
            speed_scale: 0.0,
            source: CommandSource::Stop,
        },
    }
}
