//! Perspective transform of masks to an aerial view and the 2× condensing
//! step that follows it.
//!
//! The camera-to-ground mapping is a fixed calibration given as four point
//! correspondences; [`fit_homography`] solves the exact 8-unknown linear
//! system for them. Warping uses inverse mapping with nearest-neighbor
//! sampling only — labels are categorical and must never be blended.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{Category, ClassSchema, LabelMask};

/// Continuous point in mask coordinates (x right, y down).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 2]", from = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub fn new(x: f64, y: f64) -> Vec2 {
        Vec2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Vec2) -> f64 {
        (self - other).norm()
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> [f64; 2] {
        [v.x, v.y]
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Vec2 {
        Vec2::new(a[0], a[1])
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

/// Four source points and their four destination images.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadCorrespondence {
    pub src: [Vec2; 4],
    pub dst: [Vec2; 4],
}

impl QuadCorrespondence {
    pub fn new(src: [Vec2; 4], dst: [Vec2; 4]) -> Result<QuadCorrespondence> {
        check_no_collinear_triple(&src, "src")?;
        check_no_collinear_triple(&dst, "dst")?;
        Ok(QuadCorrespondence { src, dst })
    }

    /// Load a calibration file: `{ "src": [[x,y],...4], "dst": [[x,y],...4] }`.
    pub fn load(path: impl AsRef<Path>) -> Result<QuadCorrespondence> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: QuadCorrespondence = serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        QuadCorrespondence::new(raw.src, raw.dst)
    }
}

fn check_no_collinear_triple(pts: &[Vec2; 4], which: &str) -> Result<()> {
    // Relative threshold: a triple is degenerate when the triangle it spans
    // is vanishingly thin compared to the quad's extent.
    let scale = pts
        .iter()
        .flat_map(|p| [p.x.abs(), p.y.abs()])
        .fold(1.0f64, f64::max);
    let eps = 1e-9 * scale * scale;
    for i in 0..4 {
        for j in (i + 1)..4 {
            for k in (j + 1)..4 {
                let ab = pts[j] - pts[i];
                let ac = pts[k] - pts[i];
                let cross = ab.x * ac.y - ab.y * ac.x;
                if cross.abs() <= eps {
                    return Err(Error::DegenerateCorrespondence(format!(
                        "{which} points {i}, {j}, {k} are collinear"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// 3×3 projective transform, normalized so `h[2][2] = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    pub h: [[f64; 3]; 3],
}

impl Homography {
    pub fn identity() -> Homography {
        Homography {
            h: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Homography {
        Homography {
            h: [[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]],
        }
    }

    /// Apply the transform to a point.
    pub fn project(&self, p: Vec2) -> Vec2 {
        let h = &self.h;
        let w = h[2][0] * p.x + h[2][1] * p.y + h[2][2];
        Vec2::new(
            (h[0][0] * p.x + h[0][1] * p.y + h[0][2]) / w,
            (h[1][0] * p.x + h[1][1] * p.y + h[1][2]) / w,
        )
    }

    pub fn det(&self) -> f64 {
        let h = &self.h;
        h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1])
            - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
            + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0])
    }

    /// Inverse transform via the adjugate, renormalized to `h[2][2] = 1`.
    pub fn inverse(&self) -> Result<Homography> {
        let det = self.det();
        if det.abs() <= 1e-12 {
            return Err(Error::SingularHomography(det));
        }
        let h = &self.h;
        let adj = [
            [
                h[1][1] * h[2][2] - h[1][2] * h[2][1],
                h[0][2] * h[2][1] - h[0][1] * h[2][2],
                h[0][1] * h[1][2] - h[0][2] * h[1][1],
            ],
            [
                h[1][2] * h[2][0] - h[1][0] * h[2][2],
                h[0][0] * h[2][2] - h[0][2] * h[2][0],
                h[0][2] * h[1][0] - h[0][0] * h[1][2],
            ],
            [
                h[1][0] * h[2][1] - h[1][1] * h[2][0],
                h[0][1] * h[2][0] - h[0][0] * h[2][1],
                h[0][0] * h[1][1] - h[0][1] * h[1][0],
            ],
        ];
        normalize(adj)
    }
}

fn normalize(h: [[f64; 3]; 3]) -> Result<Homography> {
    let pivot = h[2][2];
    if pivot.abs() <= 1e-15 {
        return Err(Error::SingularHomography(pivot));
    }
    let mut out = [[0.0; 3]; 3];
    for (row, src) in out.iter_mut().zip(h.iter()) {
        for (cell, &v) in row.iter_mut().zip(src.iter()) {
            *cell = v / pivot;
        }
    }
    Ok(Homography { h: out })
}

/// Solve the exact four-point homography as the standard 8-unknown linear
/// system, one pair of equations per correspondence.
pub fn fit_homography(corr: &QuadCorrespondence) -> Result<Homography> {
    let mut a = [[0.0f64; 9]; 8]; // augmented [A | b]
    for i in 0..4 {
        let s = corr.src[i];
        let d = corr.dst[i];
        a[2 * i] = [s.x, s.y, 1.0, 0.0, 0.0, 0.0, -d.x * s.x, -d.x * s.y, d.x];
        a[2 * i + 1] = [0.0, 0.0, 0.0, s.x, s.y, 1.0, -d.y * s.x, -d.y * s.y, d.y];
    }

    // Gaussian elimination with partial pivoting.
    for col in 0..8 {
        let pivot_row = (col..8)
            .max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))
            .expect("non-empty range");
        if a[pivot_row][col].abs() < 1e-12 {
            return Err(Error::DegenerateCorrespondence(
                "correspondence yields a singular system".into(),
            ));
        }
        a.swap(col, pivot_row);
        let pivot = a[col];
        for row in a.iter_mut().skip(col + 1) {
            let factor = row[col] / pivot[col];
            for (cell, &p) in row.iter_mut().zip(pivot.iter()).skip(col) {
                *cell -= factor * p;
            }
        }
    }
    let mut x = [0.0f64; 8];
    for row in (0..8).rev() {
        let mut acc = a[row][8];
        for k in (row + 1)..8 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }

    let h = Homography {
        h: [[x[0], x[1], x[2]], [x[3], x[4], x[5]], [x[6], x[7], 1.0]],
    };
    if h.det().abs() <= 1e-12 {
        return Err(Error::SingularHomography(h.det()));
    }
    Ok(h)
}

/// Warp a mask through `h` by inverse mapping with nearest-neighbor lookup.
/// Output pixels whose preimage falls outside the source get `fill`.
pub fn warp_mask(
    mask: &LabelMask,
    h: &Homography,
    out_w: usize,
    out_h: usize,
    fill: u8,
) -> Result<LabelMask> {
    let inv = h.inverse()?;
    let (w, h_in) = (mask.width() as isize, mask.height() as isize);
    let mut out = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        for x in 0..out_w {
            let src = inv.project(Vec2::new(x as f64, y as f64));
            let sx = src.x.round() as isize;
            let sy = src.y.round() as isize;
            if sx >= 0 && sx < w && sy >= 0 && sy < h_in {
                out.push(mask.get(sx as usize, sy as usize));
            } else {
                out.push(fill);
            }
        }
    }
    LabelMask::new(out_w, out_h, out)
}

/// Halve the mask per axis. Each output cell summarizes a 2×2 block with an
/// obstacle-priority reduction: if the block contains any obstacle-category
/// pixel the most frequent obstacle class wins (ties → lowest id), otherwise
/// the most frequent class wins (ties → lowest id). Shrinking must never
/// erase an obstacle. Odd dimensions are padded by edge replication.
pub fn condense(mask: &LabelMask, schema: &ClassSchema) -> LabelMask {
    let (w, h) = (mask.width(), mask.height());
    let out_w = w.div_ceil(2);
    let out_h = h.div_ceil(2);
    let mut out = Vec::with_capacity(out_w * out_h);
    for by in 0..out_h {
        for bx in 0..out_w {
            let mut block = [0u8; 4];
            for (i, (dy, dx)) in [(0, 0), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
                let x = (2 * bx + dx).min(w - 1);
                let y = (2 * by + dy).min(h - 1);
                block[i] = mask.get(x, y);
            }
            out.push(reduce_block(&block, schema));
        }
    }
    LabelMask::new(out_w, out_h, out).expect("halved dims are positive")
}

fn reduce_block(block: &[u8; 4], schema: &ClassSchema) -> u8 {
    let any_obstacle = block
        .iter()
        .any(|&l| schema.category_of(l) == Category::Obstacle);
    let mut best: Option<(u8, usize)> = None;
    for &label in block {
        if any_obstacle && schema.category_of(label) != Category::Obstacle {
            continue;
        }
        let count = block.iter().filter(|&&b| b == label).count();
        best = match best {
            Some((b_label, b_count))
                if (count, std::cmp::Reverse(label)) <= (b_count, std::cmp::Reverse(b_label)) =>
            {
                Some((b_label, b_count))
            }
            _ => Some((label, count)),
        };
    }
    best.expect("block is non-empty").0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::ClassSchema;

    fn unit_square() -> [Vec2; 4] {
        [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ]
    }

    #[test]
    fn identity_from_equal_quads() {
        let corr = QuadCorrespondence::new(unit_square(), unit_square()).unwrap();
        let h = fit_homography(&corr).unwrap();
        for (row, expect) in h.h.iter().zip(Homography::identity().h.iter()) {
            for (a, b) in row.iter().zip(expect.iter()) {
                assert!((a - b).abs() < 1e-12, "{:?}", h.h);
            }
        }
    }

    #[test]
    fn pure_translation_recovered() {
        let src = unit_square();
        let dst = src.map(|p| p + Vec2::new(10.0, 5.0));
        let corr = QuadCorrespondence::new(src, dst).unwrap();
        let h = fit_homography(&corr).unwrap();
        assert!((h.h[0][2] - 10.0).abs() < 1e-9);
        assert!((h.h[1][2] - 5.0).abs() < 1e-9);
        assert!((h.h[0][0] - 1.0).abs() < 1e-9);
        assert!((h.h[1][1] - 1.0).abs() < 1e-9);
        assert!(h.h[2][0].abs() < 1e-9 && h.h[2][1].abs() < 1e-9);
    }

    #[test]
    fn collinear_points_rejected() {
        let src = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(2.0, 2.0),
            Vec2::new(0.0, 1.0),
        ];
        let err = QuadCorrespondence::new(src, unit_square()).unwrap_err();
        assert!(matches!(err, Error::DegenerateCorrespondence(_)));
    }

    #[test]
    fn fit_residual_below_tolerance_on_fixed_quads() {
        // A perspective-looking trapezoid pair, the shape of a forward camera
        // calibration.
        let src = [
            Vec2::new(60.0, 350.0),
            Vec2::new(420.0, 350.0),
            Vec2::new(300.0, 180.0),
            Vec2::new(180.0, 180.0),
        ];
        let dst = [
            Vec2::new(160.0, 340.0),
            Vec2::new(320.0, 340.0),
            Vec2::new(320.0, 60.0),
            Vec2::new(160.0, 60.0),
        ];
        let corr = QuadCorrespondence::new(src, dst).unwrap();
        let h = fit_homography(&corr).unwrap();
        for i in 0..4 {
            let p = h.project(corr.src[i]);
            assert!(
                (p.x - corr.dst[i].x).abs() < 1e-9 && (p.y - corr.dst[i].y).abs() < 1e-9,
                "residual too large at {i}: {p:?}"
            );
        }
    }

    #[test]
    fn inverse_composes_to_identity() {
        let corr = QuadCorrespondence::new(
            [
                Vec2::new(0.0, 0.0),
                Vec2::new(9.0, 1.0),
                Vec2::new(8.0, 11.0),
                Vec2::new(-1.0, 9.0),
            ],
            unit_square(),
        )
        .unwrap();
        let h = fit_homography(&corr).unwrap();
        let inv = h.inverse().unwrap();
        let p = Vec2::new(3.7, 4.2);
        let back = inv.project(h.project(p));
        assert!(back.dist(p) < 1e-9);
    }

    #[test]
    fn identity_warp_is_bit_exact() {
        let schema = ClassSchema::earthquake_demo();
        let labels: Vec<u8> = (0..30 * 20).map(|i| (i % 9) as u8).collect();
        let mask = LabelMask::new(30, 20, labels).unwrap();
        let out = warp_mask(&mask, &Homography::identity(), 30, 20, schema.fill_label()).unwrap();
        assert_eq!(out, mask);
    }

    #[test]
    fn translation_warp_shifts_columns_and_fills_boundary() {
        let mut mask = LabelMask::filled(5, 3, 0);
        for y in 0..3 {
            mask.set(2, y, 7);
        }
        // Forward map shifts +1 in x, so output column 3 holds input column 2
        // and output column 0 has no preimage.
        let h = Homography::translation(1.0, 0.0);
        let out = warp_mask(&mask, &h, 5, 3, 8).unwrap();
        for y in 0..3 {
            assert_eq!(out.get(3, y), 7);
            assert_eq!(out.get(0, y), 8, "fill column expected at boundary");
        }
    }

    #[test]
    fn warp_never_invents_labels() {
        let mut mask = LabelMask::filled(16, 16, 0);
        mask.set(4, 4, 3);
        mask.set(10, 9, 5);
        let corr = QuadCorrespondence::new(
            [
                Vec2::new(0.0, 0.0),
                Vec2::new(15.0, 0.0),
                Vec2::new(14.0, 15.0),
                Vec2::new(1.0, 15.0),
            ],
            [
                Vec2::new(0.0, 0.0),
                Vec2::new(15.0, 0.0),
                Vec2::new(15.0, 15.0),
                Vec2::new(0.0, 15.0),
            ],
        )
        .unwrap();
        let h = fit_homography(&corr).unwrap();
        let out = warp_mask(&mask, &h, 16, 16, 8).unwrap();
        let allowed = [0u8, 3, 5, 8];
        assert!(out.labels().iter().all(|l| allowed.contains(l)));
    }

    #[test]
    fn condense_uniform_mask_halves_dimensions() {
        let schema = ClassSchema::earthquake_demo();
        let mask = LabelMask::filled(480, 360, 0);
        let out = condense(&mask, &schema);
        assert_eq!((out.width(), out.height()), (240, 180));
        assert!(out.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn condense_single_obstacle_pixel_wins_block() {
        let schema = ClassSchema::earthquake_demo();
        let crack = schema.class_by_name("crack").unwrap().id;
        // Block {road, road, road, crack} -> crack.
        let mut mask = LabelMask::filled(2, 2, 0);
        mask.set(1, 1, crack);
        let out = condense(&mask, &schema);
        assert_eq!(out.get(0, 0), crack);
    }

    #[test]
    fn condense_majority_among_obstacles() {
        let schema = ClassSchema::earthquake_demo();
        let crack = schema.class_by_name("crack").unwrap().id;
        let debris = schema.class_by_name("debris").unwrap().id;
        // Block {crack, crack, debris, road} -> crack.
        let mut mask = LabelMask::filled(2, 2, 0);
        mask.set(0, 0, crack);
        mask.set(1, 0, crack);
        mask.set(0, 1, debris);
        let out = condense(&mask, &schema);
        assert_eq!(out.get(0, 0), crack);
    }

    #[test]
    fn condense_obstacle_tie_takes_lowest_id() {
        let schema = ClassSchema::earthquake_demo();
        let crack = schema.class_by_name("crack").unwrap().id;
        let debris = schema.class_by_name("debris").unwrap().id;
        let mut mask = LabelMask::filled(2, 2, 0);
        mask.set(0, 0, debris);
        mask.set(1, 0, debris);
        mask.set(0, 1, crack);
        mask.set(1, 1, crack);
        let out = condense(&mask, &schema);
        assert_eq!(out.get(0, 0), crack.min(debris));
    }

    #[test]
    fn condense_odd_dims_pad_by_edge_replication() {
        let schema = ClassSchema::earthquake_demo();
        let mut mask = LabelMask::filled(3, 3, 0);
        mask.set(2, 2, 1);
        let out = condense(&mask, &schema);
        assert_eq!((out.width(), out.height()), (2, 2));
        // Bottom-right block replicates the single crack pixel.
        assert_eq!(out.get(1, 1), 1);
        assert_eq!(out.get(0, 0), 0);
    }
}
