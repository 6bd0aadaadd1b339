//! Minimal SVG scatter plots with optional decision-region backgrounds.

use std::fmt::Write as _;

use sntg_core::trainer::predict_labels;
use sntg_core::{Matrix, Mlp};

use crate::error::CliResult;

pub const GRID: usize = 120;
const SIZE: f64 = 600.0;
const PAD: f64 = 10.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub class: usize,
    /// Drawn with an extra cross (labeled rows).
    pub marked: bool,
}

/// Predicted class on a `cells × cells` lattice covering the points' bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct Regions {
    pub cells: usize,
    pub bounds: Bounds,
    pub classes: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Bounds {
    fn of(points: &[Point]) -> Self {
        let mut b = Bounds {
            x0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y0: f64::INFINITY,
            y1: f64::NEG_INFINITY,
        };
        for p in points {
            b.x0 = b.x0.min(p.x);
            b.x1 = b.x1.max(p.x);
            b.y0 = b.y0.min(p.y);
            b.y1 = b.y1.max(p.y);
        }
        if !b.x0.is_finite() {
            return Bounds {
                x0: -1.0,
                x1: 1.0,
                y0: -1.0,
                y1: 1.0,
            };
        }
        let mx = 0.05 * (b.x1 - b.x0).max(1e-9);
        let my = 0.05 * (b.y1 - b.y0).max(1e-9);
        Bounds {
            x0: b.x0 - mx,
            x1: b.x1 + mx,
            y0: b.y0 - my,
            y1: b.y1 + my,
        }
    }

    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x0) / (self.x1 - self.x0) * (SIZE - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        SIZE - PAD - (y - self.y0) / (self.y1 - self.y0) * (SIZE - 2.0 * PAD)
    }
}

pub fn decision_grid(model: &Mlp, points: &[Point], cells: usize) -> CliResult<Regions> {
    let bounds = Bounds::of(points);
    let step_x = (bounds.x1 - bounds.x0) / cells as f64;
    let step_y = (bounds.y1 - bounds.y0) / cells as f64;
    let grid = Matrix::from_fn(cells * cells, 2, |r, c| {
        let (gx, gy) = (r % cells, r / cells);
        if c == 0 {
            bounds.x0 + (gx as f64 + 0.5) * step_x
        } else {
            bounds.y0 + (gy as f64 + 0.5) * step_y
        }
    });
    Ok(Regions {
        cells,
        bounds,
        classes: predict_labels(model, &grid)?,
    })
}

fn color(class: usize) -> &'static str {
    PALETTE[class % PALETTE.len()]
}

/// One `<circle>` per point; marked points also get a `<path class="labeled">` cross.
pub fn scatter(points: &[Point], num_classes: usize, regions: Option<&Regions>) -> String {
    let bounds = regions.map_or_else(|| Bounds::of(points), |r| r.bounds);
    let mut s = String::new();
    writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">
<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#
    )
    .unwrap();
    if let Some(r) = regions {
        let w = (SIZE - 2.0 * PAD) / r.cells as f64;
        s.push_str("<g class=\"regions\" fill-opacity=\"0.25\">\n");
        for (k, &class) in r.classes.iter().enumerate() {
            let (gx, gy) = (k % r.cells, k / r.cells);
            let x = PAD + gx as f64 * w;
            let y = SIZE - PAD - (gy + 1) as f64 * w;
            writeln!(
                s,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                w + 0.05,
                w + 0.05,
                color(class)
            )
            .unwrap();
        }
        s.push_str("</g>\n");
    }
    s.push_str("<g class=\"points\">\n");
    for p in points {
        writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.6" fill="{}"/>"#,
            bounds.px(p.x),
            bounds.py(p.y),
            color(p.class)
        )
        .unwrap();
    }
    s.push_str("</g>\n<g class=\"labeled\" stroke=\"black\" stroke-width=\"2\">\n");
    for p in points.iter().filter(|p| p.marked) {
        let (x, y) = (bounds.px(p.x), bounds.py(p.y));
        writeln!(
            s,
            r#"<path class="labeled" d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}"/>"#,
            x - 6.0,
            y - 6.0,
            x + 6.0,
            y + 6.0,
            x - 6.0,
            y + 6.0,
            x + 6.0,
            y - 6.0
        )
        .unwrap();
    }
    s.push_str("</g>\n<g class=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n");
    for k in 0..num_classes {
        let y = 20.0 + 16.0 * k as f64;
        writeln!(
            s,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">class {k}</text>"#,
            SIZE - 80.0,
            y - 9.0,
            color(k),
            SIZE - 65.0,
            y
        )
        .unwrap();
    }
    s.push_str("</g>\n</svg>\n");
    s
}
