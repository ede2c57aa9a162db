//! Local destination selection, artificial potential field forces, trajectory
//! descent with a wavefront fallback, and cubic Bezier smoothing.
//!
//! The planner descends the net of an attractive force toward the local
//! destination and a repulsive force accumulated from eight directional
//! probes into the obstacle distance field. Where the potential field stalls
//! (equidistant obstacles, local minima, tight goals near obstacles) the
//! remainder of the route is completed by strict descent on the wavefront
//! hop field, which always terminates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{
    brushfire, clamp_round, dir_unit, gradient_map, wavefront, DistanceField, GradientField,
    WavefrontField, DIR_STEPS, INF, UNREACHABLE,
};
use crate::geometry::Vec2;
use crate::mask::CategoryMask;

/// Gains and thresholds for the potential field descent. Distances are in
/// grid cells of the planning mask.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ApfParams {
    /// Attractive gain toward the destination.
    pub k_att: f64,
    /// Repulsive gain away from obstacles.
    pub k_rep: f64,
    /// Obstacle influence distance: probes seeing at least this much
    /// clearance contribute nothing.
    pub d_0: f64,
    /// Offset of the eight directional samples from the current position.
    pub probe_radius: f64,
    /// Cells advanced per descent step.
    pub step_size: f64,
    /// Step budget before the wavefront fallback takes over.
    pub max_iters: usize,
    /// Arrival tolerance around the destination.
    pub goal_eps: f64,
    /// Number of recent steps examined by the stall detector.
    pub stuck_window: usize,
    /// Net displacement under which the descent counts as stalled.
    pub stuck_eps: f64,
    /// Clearance below which the alternative repulsive force engages.
    pub too_close: f64,
    /// Minimum traversable run width the vehicle fits through.
    pub vehicle_width: usize,
}

impl Default for ApfParams {
    fn default() -> Self {
        ApfParams {
            k_att: 1.0,
            k_rep: 100.0,
            d_0: 8.0,
            probe_radius: 8.0,
            step_size: 1.0,
            max_iters: 5000,
            goal_eps: 2.0,
            stuck_window: 10,
            stuck_eps: 1.0,
            too_close: 2.0,
            vehicle_width: 8,
        }
    }
}

impl ApfParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k_att", self.k_att),
            ("k_rep", self.k_rep),
            ("d_0", self.d_0),
            ("probe_radius", self.probe_radius),
            ("step_size", self.step_size),
            ("goal_eps", self.goal_eps),
            ("stuck_eps", self.stuck_eps),
            ("too_close", self.too_close),
        ];
        for (name, value) in positive {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if self.max_iters == 0 || self.vehicle_width == 0 {
            return Err(Error::InvalidParams(
                "max_iters and vehicle_width must be positive".into(),
            ));
        }
        if self.goal_eps >= self.d_0 {
            return Err(Error::InvalidParams(format!(
                "goal_eps ({}) must be below d_0 ({})",
                self.goal_eps, self.d_0
            )));
        }
        if self.stuck_window < 2 {
            return Err(Error::InvalidParams("stuck_window must be >= 2".into()));
        }
        Ok(())
    }
}

/// Ordered polyline of continuous mask coordinates from start to destination.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<Vec2>,
    pub smoothed: bool,
    pub fallback_used: bool,
}

/// The three grid fields one planning pass needs.
#[derive(Debug, Clone)]
pub struct PlannerFields {
    pub dist: DistanceField,
    pub grad: GradientField,
    pub wave: WavefrontField,
}

/// Build distance, gradient and wavefront fields for a mask and destination.
pub fn build_fields(cat: &CategoryMask, dest: (usize, usize)) -> Result<PlannerFields> {
    let dist = brushfire(cat);
    let grad = gradient_map(&dist);
    let wave = wavefront(cat, dest)?;
    Ok(PlannerFields { dist, grad, wave })
}

/// Scan rows bottom to top for traversable runs at least `vehicle_width`
/// wide. The scan stops at the first row without a qualifying run; the
/// destination is the center of the longest qualifying run (ties → leftmost)
/// on the last row that still qualified. Returns `None` when the bottom row
/// already has no qualifying run.
pub fn find_local_destination(cat: &CategoryMask, params: &ApfParams) -> Option<(usize, usize)> {
    let mut dest = None;
    for y in (0..cat.height()).rev() {
        match widest_run(cat, y, params.vehicle_width) {
            Some((start, len)) => dest = Some((start + (len - 1) / 2, y)),
            None => break,
        }
    }
    dest
}

/// Longest traversable run of at least `min_width` cells on row `y`,
/// returned as (start, length); ties keep the leftmost run.
fn widest_run(cat: &CategoryMask, y: usize, min_width: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    let mut run_start = None;
    for x in 0..=cat.width() {
        let open = x < cat.width() && cat.is_traversable(x, y);
        match (open, run_start) {
            (true, None) => run_start = Some(x),
            (false, Some(start)) => {
                let len = x - start;
                if len >= min_width && best.is_none_or(|(_, blen)| len > blen) {
                    best = Some((start, len));
                }
                run_start = None;
            }
            _ => {}
        }
    }
    best
}

/// Attractive pull toward the goal: `-k_att * (q - q_goal)`.
pub fn attractive_force(q: Vec2, q_goal: Vec2, k_att: f64) -> Vec2 {
    (q - q_goal) * -k_att
}

/// Unit vectors of the eight probe directions (45° apart, 0° = +x).
const PROBE_UNITS: [(f64, f64); 8] = {
    const D: f64 = std::f64::consts::FRAC_1_SQRT_2;
    [
        (1.0, 0.0),
        (D, D),
        (0.0, 1.0),
        (-D, D),
        (-1.0, 0.0),
        (-D, -D),
        (0.0, -1.0),
        (D, -D),
    ]
};

/// Distance field samples at the eight probe offsets around `q`, clamped to
/// the grid.
pub fn probe_distances(q: Vec2, dist: &DistanceField, params: &ApfParams) -> [u32; 8] {
    let mut out = [INF; 8];
    for (slot, &(ux, uy)) in out.iter_mut().zip(PROBE_UNITS.iter()) {
        let (px, py) = clamp_round(
            q.x + params.probe_radius * ux,
            q.y + params.probe_radius * uy,
            dist.width(),
            dist.height(),
        );
        *slot = dist.get(px, py);
    }
    out
}

/// Repulsive force accumulated from the eight directional probes. A probe
/// with clearance `d < d_0` contributes `k_rep * (1/d - 1/d_0) / d²` pointing
/// away from the probe direction; clearance at or beyond `d_0` contributes
/// nothing. A probe landing on an obstacle cell (`d = 0`) contributes the
/// capped magnitude obtained by evaluating the same expression at d = 0.5.
pub fn repulsive_force(q: Vec2, dist: &DistanceField, params: &ApfParams) -> Vec2 {
    repulsive_from_probes(&probe_distances(q, dist, params), params)
}

fn repulsive_from_probes(probes: &[u32; 8], params: &ApfParams) -> Vec2 {
    let mut f = Vec2::new(0.0, 0.0);
    for (&d, &(ux, uy)) in probes.iter().zip(PROBE_UNITS.iter()) {
        let magnitude = match d {
            0 => params.k_rep * (2.0 - 1.0 / params.d_0) * 4.0,
            INF => continue,
            d => {
                let d = d as f64;
                if d >= params.d_0 {
                    continue;
                }
                params.k_rep * (1.0 / d - 1.0 / params.d_0) / (d * d)
            }
        };
        f = f + Vec2::new(-ux, -uy) * magnitude;
    }
    f
}

/// Sum of attractive and repulsive forces.
pub fn net_force(q: Vec2, q_goal: Vec2, dist: &DistanceField, params: &ApfParams) -> Vec2 {
    attractive_force(q, q_goal, params.k_att) + repulsive_force(q, dist, params)
}

/// Gradient-map escape force: unit direction of magnitude `k_rep` pointing
/// directly away from the nearest obstacle. Zero where the gradient is
/// undefined.
pub fn alternative_repulsive(q: Vec2, grad: &GradientField, params: &ApfParams) -> Vec2 {
    match grad.at_point(q.x, q.y) {
        Some(code) => {
            let (ux, uy) = dir_unit(code);
            Vec2::new(-ux, -uy) * params.k_rep
        }
        None => Vec2::new(0.0, 0.0),
    }
}

/// Decide whether the descent step at `q` should swap in the alternative
/// repulsive force: either an obstacle is closer than `too_close`, or at
/// least two probes tie for the minimum clearance inside the influence
/// radius. A tie that is exactly one opposite pair of probes is the benign
/// corridor configuration — the contributions cancel symmetrically and the
/// vehicle can drive between them — so it does not trigger.
pub fn alternative_triggered(
    q: Vec2,
    probes: &[u32; 8],
    dist: &DistanceField,
    params: &ApfParams,
) -> bool {
    let here = dist.at_point(q.x, q.y);
    if here != INF && (here as f64) < params.too_close {
        return true;
    }
    let min = *probes.iter().min().expect("eight probes");
    if min == INF || (min as f64) >= params.d_0 {
        return false;
    }
    let tied: Vec<usize> = (0..8).filter(|&i| probes[i] == min).collect();
    match tied.as_slice() {
        [_] => false,
        [a, b] => (a + 4) % 8 != *b,
        _ => true,
    }
}

/// Descend the net force from `start` until within `goal_eps` of `dest`.
/// When the descent stalls, steps into a blocked cell, or exhausts its
/// budget, the remaining route is completed by strict descent on the
/// wavefront hop field. Every emitted point lies on a traversable cell.
pub fn plan_trajectory(
    cat: &CategoryMask,
    start: Vec2,
    dest: (usize, usize),
    fields: &PlannerFields,
    params: &ApfParams,
) -> Result<Trajectory> {
    params.validate()?;
    let (sx, sy) = clamp_round(start.x, start.y, cat.width(), cat.height());
    if cat.is_blocked(sx, sy) {
        return Err(Error::PoseNotTraversable(start.x, start.y));
    }
    if !cat.is_traversable(dest.0, dest.1) {
        return Err(Error::DestinationNotTraversable(dest.0, dest.1));
    }
    if fields.wave.get(sx, sy) == UNREACHABLE {
        return Err(Error::NoPath);
    }

    let goal = Vec2::new(dest.0 as f64, dest.1 as f64);
    let mut points = vec![start];
    let mut q = start;
    let mut reached = q.dist(goal) <= params.goal_eps;
    let mut needs_fallback = false;

    for _ in 0..params.max_iters {
        if reached {
            break;
        }
        let probes = probe_distances(q, &fields.dist, params);
        let repulsive = if alternative_triggered(q, &probes, &fields.dist, params) {
            alternative_repulsive(q, &fields.grad, params)
        } else {
            repulsive_from_probes(&probes, params)
        };
        let force = attractive_force(q, goal, params.k_att) + repulsive;
        debug_assert!(force.x.is_finite() && force.y.is_finite());

        let norm = force.norm();
        if norm < 1e-12 {
            needs_fallback = true; // exact local minimum
            break;
        }
        let mut next = q + force * (params.step_size / norm);
        next.x = next.x.clamp(0.0, (cat.width() - 1) as f64);
        next.y = next.y.clamp(0.0, (cat.height() - 1) as f64);
        let (cx, cy) = clamp_round(next.x, next.y, cat.width(), cat.height());
        if cat.is_blocked(cx, cy) {
            needs_fallback = true; // force is pushing into an obstacle cell
            break;
        }
        points.push(next);
        q = next;
        if q.dist(goal) <= params.goal_eps {
            reached = true;
            break;
        }
        if points.len() > params.stuck_window {
            let anchor = points[points.len() - 1 - params.stuck_window];
            if q.dist(anchor) < params.stuck_eps {
                needs_fallback = true;
                break;
            }
        }
    }
    if !reached && !needs_fallback {
        needs_fallback = true; // step budget exhausted
    }

    if needs_fallback {
        descend_wavefront(&mut points, &fields.wave)?;
    }
    if points.len() < 2 {
        points.push(goal);
    }
    Ok(Trajectory {
        points,
        smoothed: false,
        fallback_used: needs_fallback,
    })
}

/// Complete a trajectory by walking strictly decreasing hop counts to the
/// destination. BFS guarantees every reachable cell has a hop-1 neighbor, so
/// this terminates in exactly `hops` steps.
fn descend_wavefront(points: &mut Vec<Vec2>, wave: &WavefrontField) -> Result<()> {
    // Resume from the most recent emitted point that the wavefront reaches.
    let resume = points
        .iter()
        .rposition(|p| wave.at_point(p.x, p.y) != UNREACHABLE)
        .ok_or(Error::NoPath)?;
    points.truncate(resume + 1);
    let last = points[resume];
    let (mut x, mut y) = clamp_round(last.x, last.y, wave.width(), wave.height());
    let mut hops = wave.get(x, y);
    if Vec2::new(x as f64, y as f64).dist(last) > 1e-9 {
        points.push(Vec2::new(x as f64, y as f64));
    }
    while hops > 0 {
        let mut stepped = false;
        for &(dx, dy) in &DIR_STEPS {
            let nx = x as i32 + dx;
            let ny = y as i32 + dy;
            if nx < 0 || ny < 0 || nx >= wave.width() as i32 || ny >= wave.height() as i32 {
                continue;
            }
            if wave.get(nx as usize, ny as usize) == hops - 1 {
                x = nx as usize;
                y = ny as usize;
                hops -= 1;
                points.push(Vec2::new(x as f64, y as f64));
                stepped = true;
                break;
            }
        }
        debug_assert!(stepped, "BFS cell without a descending neighbor");
        if !stepped {
            return Err(Error::NoPath);
        }
    }
    Ok(())
}

/// Smooth a trajectory with one cubic Bezier through four of its points
/// (indices 0, n/3, 2n/3, n-1), sampled at the original point count.
/// Endpoints are preserved exactly. If any smoothed sample lands on a
/// blocked cell the original trajectory is returned unchanged.
pub fn smooth_bezier(traj: Trajectory, cat: &CategoryMask) -> Trajectory {
    let n = traj.points.len();
    if n < 4 {
        return traj;
    }
    let control = [
        traj.points[0],
        traj.points[n / 3],
        traj.points[2 * n / 3],
        traj.points[n - 1],
    ];
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64;
        let p = cubic_bezier(&control, t);
        let (cx, cy) = clamp_round(p.x, p.y, cat.width(), cat.height());
        if cat.is_blocked(cx, cy) {
            return traj; // smoothing would cut a corner through an obstacle
        }
        samples.push(p);
    }
    Trajectory {
        points: samples,
        smoothed: true,
        fallback_used: traj.fallback_used,
    }
}

fn cubic_bezier(p: &[Vec2; 4], t: f64) -> Vec2 {
    let u = 1.0 - t;
    p[0] * (u * u * u) + p[1] * (3.0 * u * u * t) + p[2] * (3.0 * u * t * t) + p[3] * (t * t * t)
}

/// Total absolute turning angle of a polyline, the oracle quantity for
/// smoothing tests.
pub fn turning_angle(points: &[Vec2]) -> f64 {
    let mut total = 0.0;
    for w in points.windows(3) {
        let a = w[1] - w[0];
        let b = w[2] - w[1];
        if a.norm() < 1e-12 || b.norm() < 1e-12 {
            continue;
        }
        let cross = a.x * b.y - a.y * b.x;
        let dot = a.x * b.x + a.y * b.y;
        total += cross.atan2(dot).abs();
    }
    total
}
