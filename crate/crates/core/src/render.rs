//! Deterministic SVG overlays and PGM field heat dumps.
//!
//! The mask is emitted as one rect per horizontal same-class run colored by
//! the schema, the trajectory as a polyline whose vertices are verbatim in
//! the SVG text. Fixed inputs render to identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::INF;
use crate::mask::{ClassSchema, LabelMask};
use crate::planner::Trajectory;

/// Render a mask, an optional distance-field heat layer and an optional
/// trajectory polyline into an SVG document.
pub fn render_svg(
    mask: &LabelMask,
    schema: &ClassSchema,
    trajectory: Option<&Trajectory>,
    heat: Option<&[u32]>,
) -> String {
    let (w, h) = (mask.width(), mask.height());
    let mut svg = String::with_capacity(64 * 1024);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" shape-rendering="crispEdges">"#
    );

    for y in 0..h {
        let mut x = 0;
        while x < w {
            let label = mask.get(x, y);
            let mut run = 1;
            while x + run < w && mask.get(x + run, y) == label {
                run += 1;
            }
            let [r, g, b] = schema
                .class(label)
                .map(|c| c.color)
                .unwrap_or([255, 0, 255]);
            let _ = writeln!(
                svg,
                r##"<rect x="{x}" y="{y}" width="{run}" height="1" fill="#{r:02x}{g:02x}{b:02x}"/>"##
            );
            x += run;
        }
    }

    if let Some(values) = heat {
        let max = values
            .iter()
            .copied()
            .filter(|&v| v != INF)
            .max()
            .unwrap_or(0);
        if max > 0 {
            for y in 0..h {
                let mut x = 0;
                while x < w {
                    let level = heat_level(values[y * w + x], max);
                    let mut run = 1;
                    while x + run < w && heat_level(values[y * w + x + run], max) == level {
                        run += 1;
                    }
                    if level > 0 {
                        let _ = writeln!(
                            svg,
                            r##"<rect x="{x}" y="{y}" width="{run}" height="1" fill="#{level:02x}{level:02x}{level:02x}" opacity="0.35"/>"##
                        );
                    }
                    x += run;
                }
            }
        }
    }

    if let Some(traj) = trajectory {
        if !traj.points.is_empty() {
            let mut points = String::new();
            for p in &traj.points {
                let _ = write!(points, "{:.3},{:.3} ", p.x, p.y);
            }
            let _ = writeln!(
                svg,
                r##"<polyline points="{}" fill="none" stroke="#00e5ff" stroke-width="1.5"/>"##,
                points.trim_end()
            );
            let last = traj.points.last().unwrap();
            let _ = writeln!(
                svg,
                r##"<circle cx="{:.3}" cy="{:.3}" r="2.5" fill="none" stroke="#ffff00" stroke-width="1"/>"##,
                last.x, last.y
            );
        }
    }

    svg.push_str("</svg>\n");
    svg
}

fn heat_level(value: u32, max: u32) -> u8 {
    if value == INF {
        255
    } else {
        ((value as u64 * 255) / max as u64) as u8
    }
}

/// Dump a field as an 8-bit PGM heatmap, values normalized to 0..255 with
/// sentinels rendered white.
pub fn write_field_pgm(
    path: impl AsRef<Path>,
    values: &[u32],
    width: usize,
    height: usize,
) -> Result<()> {
    assert_eq!(values.len(), width * height);
    let path = path.as_ref();
    let max = values
        .iter()
        .copied()
        .filter(|&v| v != INF)
        .max()
        .unwrap_or(0)
        .max(1);
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let header = format!("P5\n{width} {height}\n255\n");
    let bytes: Vec<u8> = values.iter().map(|&v| heat_level(v, max)).collect();
    file.write_all(header.as_bytes())
        .and_then(|_| file.write_all(&bytes))
        .map_err(|e| Error::io(path, e))
}
