//! Synthetic occupancy scenario generator: seeded masks with crack
//! polylines, debris blobs, puddle ellipses and wall segments, plus a
//! guaranteed traversable corridor from the bottom row to the top.
//!
//! The corridor is carved after the obstacles are stamped, so the guarantee
//! holds by construction; a wavefront connectivity check still runs as a
//! safety net and the generator retries with a derived seed before giving
//! up. Everything is deterministic for a fixed seed.

use std::fs;
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::wavefront;
use crate::fields::UNREACHABLE;
use crate::mask::{to_category_mask, ClassSchema, LabelMask};

/// Obstacle counts and corridor guarantee for one batch of masks.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub cracks: usize,
    pub blobs: usize,
    pub puddles: usize,
    pub walls: usize,
    pub corridor_width: usize,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            seed: 42,
            width: 128,
            height: 128,
            cracks: 3,
            blobs: 3,
            puddles: 2,
            walls: 1,
            corridor_width: 20,
        }
    }
}

/// One generated mask and the corridor geometry that makes it solvable.
#[derive(Debug, Clone)]
pub struct GeneratedMask {
    pub mask: LabelMask,
    /// Carved corridor center x per row (index = row).
    pub corridor_centers: Vec<usize>,
}

impl GeneratedMask {
    /// Corridor center on the bottom row, a safe start cell.
    pub fn bottom_start(&self) -> (usize, usize) {
        (
            *self.corridor_centers.last().expect("one center per row"),
            self.corridor_centers.len() - 1,
        )
    }
}

/// Index entry for one mask file in a generated batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub corridor_centers: Vec<usize>,
    pub bottom_start: [usize; 2],
}

/// Batch manifest written next to the mask files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: ScenarioSpec,
    pub count: usize,
    pub schema_file: String,
    pub masks: Vec<ManifestEntry>,
}

/// Generate the `index`-th mask of a batch. Deterministic in (spec, index).
pub fn generate_mask(spec: &ScenarioSpec, index: usize) -> Result<GeneratedMask> {
    if spec.width < 8 || spec.height < 8 {
        return Err(Error::InfeasibleScenario(format!(
            "mask {}x{} too small",
            spec.width, spec.height
        )));
    }
    if spec.corridor_width >= spec.width {
        return Err(Error::InfeasibleScenario(format!(
            "corridor width {} does not fit in mask width {}",
            spec.corridor_width, spec.width
        )));
    }
    let schema = ClassSchema::earthquake_demo();
    for attempt in 0..5u64 {
        let generated = build_one(spec, index as u64, attempt, &schema);
        if corridor_is_connected(&generated, &schema) {
            return Ok(generated);
        }
    }
    Err(Error::InfeasibleScenario(
        "obstacles preclude the corridor after retries".into(),
    ))
}

/// Generate a whole batch.
pub fn generate(spec: &ScenarioSpec, count: usize) -> Result<Vec<GeneratedMask>> {
    (0..count).map(|i| generate_mask(spec, i)).collect()
}

/// Generate `count` masks, write them as PGM plus `manifest.json` and
/// `schema.json` into `dir`.
pub fn write_scenarios(
    spec: &ScenarioSpec,
    count: usize,
    dir: impl AsRef<Path>,
) -> Result<Manifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let schema = ClassSchema::earthquake_demo();
    let schema_file = "schema.json".to_string();
    schema.save(dir.join(&schema_file))?;

    let mut entries = Vec::with_capacity(count);
    for (i, generated) in generate(spec, count)?.into_iter().enumerate() {
        let file = format!("mask_{i:04}.pgm");
        generated.mask.save(dir.join(&file))?;
        let (sx, sy) = generated.bottom_start();
        entries.push(ManifestEntry {
            file,
            corridor_centers: generated.corridor_centers,
            bottom_start: [sx, sy],
        });
    }
    let manifest = Manifest {
        spec: spec.clone(),
        count,
        schema_file,
        masks: entries,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(dir.join("manifest.json"), text).map_err(|e| Error::io(dir, e))?;
    Ok(manifest)
}

fn mix_seed(seed: u64, index: u64, attempt: u64) -> u64 {
    seed ^ (index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        ^ (attempt.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

fn build_one(spec: &ScenarioSpec, index: u64, attempt: u64, schema: &ClassSchema) -> GeneratedMask {
    let mut rng = StdRng::seed_from_u64(mix_seed(spec.seed, index, attempt));
    let road = schema.class_by_name("road").unwrap().id;
    let crack = schema.class_by_name("crack").unwrap().id;
    let puddle = schema.class_by_name("puddle").unwrap().id;
    let building = schema.class_by_name("building").unwrap().id;
    let debris = schema.class_by_name("debris").unwrap().id;

    let (w, h) = (spec.width, spec.height);
    let mut mask = LabelMask::filled(w, h, road);

    for _ in 0..spec.cracks {
        stamp_crack(&mut mask, &mut rng, crack);
    }
    for _ in 0..spec.blobs {
        stamp_blob(&mut mask, &mut rng, debris);
    }
    for _ in 0..spec.puddles {
        stamp_ellipse(&mut mask, &mut rng, puddle);
    }
    for _ in 0..spec.walls {
        stamp_wall(&mut mask, &mut rng, building);
    }

    let corridor_centers = carve_corridor(&mut mask, &mut rng, spec.corridor_width, road);
    GeneratedMask {
        mask,
        corridor_centers,
    }
}

/// Clear a meandering vertical band of `width` traversable cells covering
/// every row. Returns the band center per row.
fn carve_corridor(mask: &mut LabelMask, rng: &mut StdRng, width: usize, road: u8) -> Vec<usize> {
    let w = mask.width();
    let h = mask.height();
    if width == 0 {
        return vec![w / 2; h];
    }
    let half = width / 2;
    let lo = half;
    let hi = w - 1 - (width - 1 - half);
    let mut center = rng.gen_range(lo..=hi);
    let mut centers = vec![0usize; h];
    for y in (0..h).rev() {
        centers[y] = center;
        let start = center - half;
        for x in start..start + width {
            mask.set(x, y, road);
        }
        let drift: i64 = rng.gen_range(-1..=1);
        center = (center as i64 + drift).clamp(lo as i64, hi as i64) as usize;
    }
    centers
}

fn stamp_crack(mask: &mut LabelMask, rng: &mut StdRng, class: u8) {
    let w = mask.width() as f64;
    let h = mask.height() as f64;
    let mut x = rng.gen_range(0.0..w);
    let mut y = rng.gen_range(0.0..h);
    let mut angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let segments = rng.gen_range(3..=6);
    for _ in 0..segments {
        let length = rng.gen_range(6.0..(w / 3.0).max(8.0));
        let steps = (length * 2.0) as usize;
        for _ in 0..steps {
            x += 0.5 * angle.cos();
            y += 0.5 * angle.sin();
            stamp_disc(mask, x, y, 1.0, class);
        }
        angle += rng.gen_range(-0.9..0.9);
    }
}

fn stamp_blob(mask: &mut LabelMask, rng: &mut StdRng, class: u8) {
    let mut x = rng.gen_range(0..mask.width()) as i64;
    let mut y = rng.gen_range(0..mask.height()) as i64;
    let area = rng.gen_range(20..90);
    for _ in 0..area {
        stamp_disc(mask, x as f64, y as f64, 1.4, class);
        x += rng.gen_range(-1..=1);
        y += rng.gen_range(-1..=1);
    }
}

fn stamp_ellipse(mask: &mut LabelMask, rng: &mut StdRng, class: u8) {
    let cx = rng.gen_range(0..mask.width()) as f64;
    let cy = rng.gen_range(0..mask.height()) as f64;
    let rx = rng.gen_range(2.0..8.0);
    let ry = rng.gen_range(2.0..6.0);
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            let nx = (x as f64 - cx) / rx;
            let ny = (y as f64 - cy) / ry;
            if nx * nx + ny * ny <= 1.0 {
                mask.set(x, y, class);
            }
        }
    }
}

fn stamp_wall(mask: &mut LabelMask, rng: &mut StdRng, class: u8) {
    let horizontal = rng.gen_bool(0.5);
    let thickness = rng.gen_range(2..4usize);
    if horizontal {
        let y0 = rng.gen_range(0..mask.height().saturating_sub(thickness));
        let len = rng.gen_range(mask.width() / 6..mask.width() / 2);
        let x0 = rng.gen_range(0..mask.width() - len);
        for y in y0..y0 + thickness {
            for x in x0..x0 + len {
                mask.set(x, y, class);
            }
        }
    } else {
        let x0 = rng.gen_range(0..mask.width().saturating_sub(thickness));
        let len = rng.gen_range(mask.height() / 6..mask.height() / 2);
        let y0 = rng.gen_range(0..mask.height() - len);
        for y in y0..y0 + len {
            for x in x0..x0 + thickness {
                mask.set(x, y, class);
            }
        }
    }
}

fn stamp_disc(mask: &mut LabelMask, cx: f64, cy: f64, radius: f64, class: u8) {
    let r = radius.ceil() as i64;
    let (icx, icy) = (cx.round() as i64, cy.round() as i64);
    for dy in -r..=r {
        for dx in -r..=r {
            let x = icx + dx;
            let y = icy + dy;
            if x < 0 || y < 0 || x >= mask.width() as i64 || y >= mask.height() as i64 {
                continue;
            }
            let ddx = x as f64 - cx;
            let ddy = y as f64 - cy;
            if ddx * ddx + ddy * ddy <= radius * radius {
                mask.set(x as usize, y as usize, class);
            }
        }
    }
}

/// Safety net: the carved corridor must connect bottom start to the top row.
fn corridor_is_connected(generated: &GeneratedMask, schema: &ClassSchema) -> bool {
    let cat = to_category_mask(&generated.mask, schema);
    let dest = (generated.corridor_centers[0], 0);
    let (sx, sy) = generated.bottom_start();
    match wavefront(&cat, dest) {
        Ok(wave) => wave.get(sx, sy) != UNREACHABLE,
        Err(_) => false,
    }
}
