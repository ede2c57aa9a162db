//! Grid fields driving the planner: obstacle distance (brushfire), direction
//! to the nearest obstacle (gradient map) and hop distance to the destination
//! (wavefront).
//!
//! All three use the 8-connected grid with unit edge cost, so the brushfire
//! distance is the discrete Chebyshev distance to the nearest obstacle cell.
//! Undefined-category cells are treated as obstacles: the vehicle must not
//! plan through unknown terrain.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::mask::{Category, CategoryMask};

/// Sentinel for cells with no obstacle reachable / no path to destination.
pub const INF: u32 = u32::MAX;

/// The eight direction codes, 45° apart; code 0 = +x, code 2 = +y (down in
/// mask coordinates). `step(code)` is the unit grid step for that code.
pub const DIR_STEPS: [(i32, i32); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Unit direction vectors for each code, ([`DIR_STEPS`] normalized).
pub fn dir_unit(code: u8) -> (f64, f64) {
    const D: f64 = std::f64::consts::FRAC_1_SQRT_2;
    match code {
        0 => (1.0, 0.0),
        1 => (D, D),
        2 => (0.0, 1.0),
        3 => (-D, D),
        4 => (-1.0, 0.0),
        5 => (-D, -D),
        6 => (0.0, -1.0),
        7 => (D, -D),
        _ => unreachable!("direction codes are 0..8"),
    }
}

/// Per-pixel distance in grid steps to the nearest obstacle cell.
#[derive(Debug, Clone)]
pub struct DistanceField {
    width: usize,
    height: usize,
    dist: Vec<u32>,
}

impl DistanceField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u32] {
        &self.dist
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.dist[y * self.width + x]
    }

    /// Distance at the cell containing a continuous point, clamped to bounds.
    pub fn at_point(&self, x: f64, y: f64) -> u32 {
        let (cx, cy) = clamp_round(x, y, self.width, self.height);
        self.get(cx, cy)
    }
}

/// Round a continuous point to its cell, clamped inside the grid.
pub fn clamp_round(x: f64, y: f64, width: usize, height: usize) -> (usize, usize) {
    let cx = x.round().clamp(0.0, (width - 1) as f64) as usize;
    let cy = y.round().clamp(0.0, (height - 1) as f64) as usize;
    (cx, cy)
}

/// Multi-source BFS from every obstacle (and undefined) cell over the
/// 8-connected grid. A mask with no such cells yields all-[`INF`].
pub fn brushfire(cat: &CategoryMask) -> DistanceField {
    let (w, h) = (cat.width(), cat.height());
    let mut dist = vec![INF; w * h];
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if cat.get(x, y) != Category::Traversable {
                dist[y * w + x] = 0;
                queue.push_back((x, y));
            }
        }
    }
    bfs_expand(&mut dist, &mut queue, w, h, |_, _| true);
    DistanceField {
        width: w,
        height: h,
        dist,
    }
}

/// Per-pixel direction code toward the nearest obstacle, `None` on obstacle
/// cells and where no obstacle is reachable.
#[derive(Debug, Clone)]
pub struct GradientField {
    width: usize,
    height: usize,
    dir: Vec<Option<u8>>,
}

impl GradientField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<u8> {
        self.dir[y * self.width + x]
    }

    pub fn at_point(&self, x: f64, y: f64) -> Option<u8> {
        let (cx, cy) = clamp_round(x, y, self.width, self.height);
        self.get(cx, cy)
    }
}

/// For every cell with finite nonzero distance, the direction code of the
/// 8-neighbor with minimum distance (ties → lowest code).
pub fn gradient_map(dist: &DistanceField) -> GradientField {
    let (w, h) = (dist.width, dist.height);
    let mut dir = vec![None; w * h];
    for y in 0..h {
        for x in 0..w {
            let d = dist.get(x, y);
            if d == 0 || d == INF {
                continue;
            }
            let mut best: Option<(u32, u8)> = None;
            for (code, &(dx, dy)) in DIR_STEPS.iter().enumerate() {
                let nx = x as i32 + dx;
                let ny = y as i32 + dy;
                if nx < 0 || ny < 0 || nx >= w as i32 || ny >= h as i32 {
                    continue;
                }
                let nd = dist.get(nx as usize, ny as usize);
                if best.is_none_or(|(bd, _)| nd < bd) {
                    best = Some((nd, code as u8));
                }
            }
            dir[y * w + x] = best.map(|(_, code)| code);
        }
    }
    GradientField {
        width: w,
        height: h,
        dir,
    }
}

/// BFS hop counts from the destination over traversable cells.
#[derive(Debug, Clone)]
pub struct WavefrontField {
    width: usize,
    height: usize,
    hops: Vec<u32>,
}

/// Alias for the wavefront sentinel, same value as [`INF`].
pub const UNREACHABLE: u32 = INF;

impl WavefrontField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u32] {
        &self.hops
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.hops[y * self.width + x]
    }

    pub fn at_point(&self, x: f64, y: f64) -> u32 {
        let (cx, cy) = clamp_round(x, y, self.width, self.height);
        self.get(cx, cy)
    }
}

/// 8-connected BFS from `dest` over traversable cells only.
pub fn wavefront(cat: &CategoryMask, dest: (usize, usize)) -> Result<WavefrontField> {
    let (w, h) = (cat.width(), cat.height());
    let (dx, dy) = dest;
    if dx >= w || dy >= h || !cat.is_traversable(dx, dy) {
        return Err(Error::DestinationNotTraversable(dx, dy));
    }
    let mut hops = vec![UNREACHABLE; w * h];
    hops[dy * w + dx] = 0;
    let mut queue = VecDeque::new();
    queue.push_back(dest);
    bfs_expand(&mut hops, &mut queue, w, h, |x, y| cat.is_traversable(x, y));
    Ok(WavefrontField {
        width: w,
        height: h,
        hops,
    })
}

/// Expand seeds already placed in `field` outward over cells admitted by
/// `open`, 8-connected, unit cost.
fn bfs_expand(
    field: &mut [u32],
    queue: &mut VecDeque<(usize, usize)>,
    w: usize,
    h: usize,
    open: impl Fn(usize, usize) -> bool,
) {
    while let Some((x, y)) = queue.pop_front() {
        let next = field[y * w + x] + 1;
        for &(dx, dy) in &DIR_STEPS {
            let nx = x as i32 + dx;
            let ny = y as i32 + dy;
            if nx < 0 || ny < 0 || nx >= w as i32 || ny >= h as i32 {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if field[ny * w + nx] != INF || !open(nx, ny) {
                continue;
            }
            field[ny * w + nx] = next;
            queue.push_back((nx, ny));
        }
    }
}
