//! End-to-end local navigation pass: warp → condense → destination → fields
//! → potential-field descent → smoothing → fused steering command.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{fuse, simulate_lidar, FusionParams, LidarConfig, Pose, SteeringCommand};
use crate::geometry::{condense, fit_homography, warp_mask, QuadCorrespondence, Vec2};
use crate::mask::{to_category_mask, CategoryMask, ClassSchema, LabelMask};
use crate::planner::{
    build_fields, find_local_destination, plan_trajectory, smooth_bezier, ApfParams, PlannerFields,
    Trajectory,
};

/// Everything one pipeline run needs besides the mask itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Camera-to-ground correspondence; `None` skips the aerial warp.
    pub calibration: Option<QuadCorrespondence>,
    /// Output size of the warp; `None` keeps the input size.
    pub warp_dims: Option<(usize, usize)>,
    /// Halve the aerial mask before planning.
    pub condense: bool,
    pub apf: ApfParams,
    pub fusion: FusionParams,
    pub lidar: LidarConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            calibration: None,
            warp_dims: None,
            condense: true,
            apf: ApfParams::default(),
            fusion: FusionParams::default(),
            lidar: LidarConfig::default(),
        }
    }
}

/// Result of one pipeline run, in planning-mask coordinates.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// The mask actually planned on (after warp and condense).
    pub planning_mask: LabelMask,
    pub category: CategoryMask,
    pub start: Vec2,
    pub destination: (usize, usize),
    pub trajectory: Trajectory,
    pub steering: SteeringCommand,
    pub fields: PlannerFields,
}

/// Heading pointing up the mask (away from the vehicle).
pub const HEADING_UP: f64 = -std::f64::consts::FRAC_PI_2;

/// Run the full chain on an in-memory mask. Errors carry the stage they
/// occurred in; a blocked bottom row surfaces as [`Error::NoDestination`]
/// and an unreachable destination as [`Error::NoPath`].
pub fn run_pipeline(
    mask: &LabelMask,
    schema: &ClassSchema,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    mask.validate(schema).map_err(|e| e.at_stage("input"))?;
    config.apf.validate().map_err(|e| e.at_stage("config"))?;

    let aerial = match &config.calibration {
        Some(corr) => {
            let h = fit_homography(corr).map_err(|e| e.at_stage("warp"))?;
            let (out_w, out_h) = config.warp_dims.unwrap_or((mask.width(), mask.height()));
            warp_mask(mask, &h, out_w, out_h, schema.fill_label())
                .map_err(|e| e.at_stage("warp"))?
        }
        None => mask.clone(),
    };

    let planning_mask = if config.condense {
        condense(&aerial, schema)
    } else {
        aerial
    };
    let category = to_category_mask(&planning_mask, schema);

    let destination = find_local_destination(&category, &config.apf).ok_or(Error::NoDestination)?;
    let start = bottom_start(&category, &config.apf).ok_or(Error::NoDestination)?;

    let fields = build_fields(&category, destination).map_err(|e| e.at_stage("fields"))?;
    let trajectory = plan_trajectory(&category, start, destination, &fields, &config.apf)
        .map_err(|e| e.at_stage("plan"))?;
    let trajectory = smooth_bezier(trajectory, &category);

    let pose = Pose {
        x: start.x,
        y: start.y,
        heading: HEADING_UP,
    };
    let scan = simulate_lidar(
        &category,
        pose,
        config.lidar.n_beams,
        config.lidar.fov,
        config.lidar.max_range,
    )
    .map_err(|e| e.at_stage("fuse"))?;
    let steering = fuse(&trajectory, &scan, &config.fusion);

    Ok(PipelineOutput {
        planning_mask,
        category,
        start,
        destination,
        trajectory,
        steering,
        fields,
    })
}

/// The vehicle enters at the bottom of the mask: start at the center of the
/// widest qualifying traversable run on the bottom row.
fn bottom_start(category: &CategoryMask, apf: &ApfParams) -> Option<Vec2> {
    let y = category.height() - 1;
    let mut best: Option<(usize, usize)> = None;
    let mut run_start = None;
    for x in 0..=category.width() {
        let open = x < category.width() && category.is_traversable(x, y);
        match (open, run_start) {
            (true, None) => run_start = Some(x),
            (false, Some(start)) => {
                let len = x - start;
                if len >= apf.vehicle_width && best.is_none_or(|(_, blen)| len > blen) {
                    best = Some((start, len));
                }
                run_start = None;
            }
            _ => {}
        }
    }
    best.map(|(start, len)| Vec2::new((start + (len - 1) / 2) as f64, y as f64))
}
