//! Deterministic per-pixel argmax over a class-score volume, with a
//! sequential reference, a data-parallel version and a benchmark harness.
//!
//! The per-pixel reduction has no dependency between neighboring pixels, so
//! the parallel kernel simply splits the pixel domain into disjoint output
//! slices, one worker thread each; its output is bit-identical to the
//! sequential reference for every worker count. Ties resolve to the lowest
//! class index.

use std::time::Instant;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::LabelMask;

/// H×W×C scores in channel-plane (plane-major) layout, the shape a
/// segmentation network's final layer hands over: `scores[c * w*h + y*w + x]`.
#[derive(Debug, Clone)]
pub struct ScoreVolume {
    width: usize,
    height: usize,
    channels: usize,
    scores: Vec<f32>,
}

impl ScoreVolume {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        scores: Vec<f32>,
    ) -> Result<ScoreVolume> {
        if width == 0 || height == 0 || channels == 0 || channels > 256 {
            return Err(Error::InvalidParams(format!(
                "volume dims must be positive with at most 256 channels, got {width}x{height}x{channels}"
            )));
        }
        if scores.len() != width * height * channels {
            return Err(Error::InvalidParams(format!(
                "score buffer has {} entries, expected {}",
                scores.len(),
                width * height * channels
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidParams("scores must be finite".into()));
        }
        Ok(ScoreVolume {
            width,
            height,
            channels,
            scores,
        })
    }

    /// Seeded random volume, the benchmark and test workload.
    pub fn random(width: usize, height: usize, channels: usize, seed: u64) -> ScoreVolume {
        let mut rng = SmallRng::seed_from_u64(seed);
        let scores = (0..width * height * channels)
            .map(|_| rng.gen_range(-1.0f32..1.0))
            .collect();
        ScoreVolume::new(width, height, channels, scores).expect("generated volume is valid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Re-layout to pixel-major (interleaved) storage:
    /// `out[(y*w + x) * c + channel]`. The traversal cost difference between
    /// the two layouts is what the benchmark makes visible.
    pub fn to_interleaved(&self) -> Vec<f32> {
        let plane = self.width * self.height;
        let mut out = vec![0.0f32; self.scores.len()];
        for c in 0..self.channels {
            for p in 0..plane {
                out[p * self.channels + c] = self.scores[c * plane + p];
            }
        }
        out
    }
}

#[inline]
fn argmax_pixel(scores: &[f32], plane: usize, channels: usize, pixel: usize) -> u8 {
    let mut best = 0usize;
    let mut best_score = scores[pixel];
    for c in 1..channels {
        let s = scores[c * plane + pixel];
        if s > best_score {
            best = c;
            best_score = s;
        }
    }
    best as u8
}

/// Single-threaded reference: for each pixel, scan all channels and keep the
/// smallest index attaining the maximum score.
pub fn argmax_sequential(volume: &ScoreVolume) -> LabelMask {
    let plane = volume.width * volume.height;
    let labels = (0..plane)
        .map(|p| argmax_pixel(&volume.scores, plane, volume.channels, p))
        .collect();
    LabelMask::new(volume.width, volume.height, labels).expect("volume dims are positive")
}

/// Same reduction over an interleaved buffer from [`ScoreVolume::to_interleaved`].
pub fn argmax_sequential_interleaved(
    interleaved: &[f32],
    width: usize,
    height: usize,
    channels: usize,
) -> LabelMask {
    assert_eq!(interleaved.len(), width * height * channels);
    let labels = (0..width * height)
        .map(|p| {
            let row = &interleaved[p * channels..(p + 1) * channels];
            let mut best = 0usize;
            for (c, &s) in row.iter().enumerate().skip(1) {
                if s > row[best] {
                    best = c;
                }
            }
            best as u8
        })
        .collect();
    LabelMask::new(width, height, labels).expect("dims are positive")
}

/// Data-parallel argmax: the pixel domain is split into `workers` contiguous
/// chunks, each reduced independently into its own slice of the output.
/// Bit-identical to [`argmax_sequential`] for every worker count.
pub fn argmax_parallel(volume: &ScoreVolume, workers: usize) -> LabelMask {
    let workers = workers.max(1);
    let plane = volume.width * volume.height;
    if workers == 1 {
        return argmax_sequential(volume);
    }
    let mut labels = vec![0u8; plane];
    let chunk = plane.div_ceil(workers);
    std::thread::scope(|scope| {
        for (index, slice) in labels.chunks_mut(chunk).enumerate() {
            let scores = &volume.scores;
            let channels = volume.channels;
            scope.spawn(move || {
                let base = index * chunk;
                for (offset, label) in slice.iter_mut().enumerate() {
                    *label = argmax_pixel(scores, plane, channels, base + offset);
                }
            });
        }
    });
    LabelMask::new(volume.width, volume.height, labels).expect("volume dims are positive")
}

/// Timing comparison of the sequential, parallel and interleaved-layout
/// argmax paths, medians over `reps` runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub reps: usize,
    pub workers: usize,
    pub sequential_ms: f64,
    pub parallel_ms: f64,
    pub interleaved_ms: f64,
    pub speedup: f64,
}

fn median(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

fn time_ms(mut f: impl FnMut()) -> f64 {
    let start = Instant::now();
    f();
    start.elapsed().as_secs_f64() * 1000.0
}

/// Run both paths `reps` times and report median wall-clock times.
pub fn bench(volume: &ScoreVolume, reps: usize, workers: usize) -> BenchReport {
    let reps = reps.max(1);
    let interleaved = volume.to_interleaved();
    let mut seq = Vec::with_capacity(reps);
    let mut par = Vec::with_capacity(reps);
    let mut inter = Vec::with_capacity(reps);
    for _ in 0..reps {
        seq.push(time_ms(|| {
            std::hint::black_box(argmax_sequential(volume));
        }));
        par.push(time_ms(|| {
            std::hint::black_box(argmax_parallel(volume, workers));
        }));
        inter.push(time_ms(|| {
            std::hint::black_box(argmax_sequential_interleaved(
                &interleaved,
                volume.width,
                volume.height,
                volume.channels,
            ));
        }));
    }
    let sequential_ms = median(seq);
    let parallel_ms = median(par);
    BenchReport {
        width: volume.width,
        height: volume.height,
        channels: volume.channels,
        reps,
        workers,
        sequential_ms,
        parallel_ms,
        interleaved_ms: median(inter),
        speedup: sequential_ms / parallel_ms.max(1e-9),
    }
}
