use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Quadratic, Trajectory};
use crate::error::{Error, Result};

const SIZE: f64 = 600.0;
const MARGIN: f64 = 20.0;
const RESOLUTION: usize = 80;
const COLORS: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Plot window and number of contour levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub levels: usize,
}

impl ContourGrid {
    /// Bounding box of all points and the minimizer, padded by 10% per side.
    pub fn auto(q: &Quadratic, trajectories: &[Trajectory]) -> Self {
        let m = q.minimizer();
        let pts = trajectories.iter().flat_map(|t| t.points.iter()).chain(std::iter::once(&m));
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in pts {
            x0 = x0.min(p[0]);
            x1 = x1.max(p[0]);
            y0 = y0.min(p[1]);
            y1 = y1.max(p[1]);
        }
        let pad = |lo: f64, hi: f64| {
            let w = hi - lo;
            if w > 1e-9 {
                0.1 * w
            } else {
                0.5
            }
        };
        let (px, py) = (pad(x0, x1), pad(y0, y1));
        ContourGrid {
            x_min: x0 - px,
            x_max: x1 + px,
            y_min: y0 - py,
            y_max: y1 + py,
            levels: 12,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.x_max > self.x_min) || !(self.y_max > self.y_min) {
            return Err(Error::InvalidArgument(format!("degenerate plot window {self:?}")));
        }
        Ok(())
    }

    fn to_px(&self, p: [f64; 2]) -> (f64, f64) {
        let span = SIZE - 2.0 * MARGIN;
        (
            MARGIN + (p[0] - self.x_min) / (self.x_max - self.x_min) * span,
            SIZE - MARGIN - (p[1] - self.y_min) / (self.y_max - self.y_min) * span,
        )
    }
}

/// Contour plot of `q` with one polyline and one start marker per trajectory.
/// Output is byte-stable for identical inputs.
pub fn render_svg(q: &Quadratic, trajectories: &[Trajectory], grid: Option<&ContourGrid>) -> Result<String> {
    if trajectories.is_empty() {
        return Err(Error::Empty("no trajectories to render".into()));
    }
    let grid = match grid {
        Some(g) => g.clone(),
        None => ContourGrid::auto(q, trajectories),
    };
    grid.validate()?;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    for (level, segments) in contours(q, &grid) {
        if segments.is_empty() {
            continue;
        }
        let mut d = String::new();
        for (a, b) in segments {
            let (ax, ay) = grid.to_px(a);
            let (bx, by) = grid.to_px(b);
            let _ = write!(d, "M{ax:.4} {ay:.4}L{bx:.4} {by:.4}");
        }
        let _ = writeln!(
            svg,
            r##"<path class="contour" data-level="{level:.4}" d="{d}" stroke="#bbbbbb" stroke-width="1" fill="none"/>"##
        );
    }
    for (i, t) in trajectories.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = t
            .points
            .iter()
            .map(|&p| {
                let (x, y) = grid.to_px(p);
                format!("{x:.4},{y:.4}")
            })
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="trajectory" data-method="{}" data-eta="{}" data-gamma="{}" points="{}" stroke="{color}" stroke-width="1.5" fill="none"/>"#,
            t.method,
            t.eta,
            t.gamma,
            pts.join(" ")
        );
        let (x, y) = grid.to_px(t.points[0]);
        let _ = writeln!(svg, r#"<circle cx="{x:.4}" cy="{y:.4}" r="4" fill="{color}"/>"#);
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Rows `method,step,w1,w2,f,gradnorm`, one per recorded point.
pub fn render_csv(trajectories: &[Trajectory]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "step", "w1", "w2", "f", "gradnorm"])?;
    for t in trajectories {
        for (i, p) in t.points.iter().enumerate() {
            w.write_record([
                t.method.name().to_string(),
                i.to_string(),
                p[0].to_string(),
                p[1].to_string(),
                t.f_values[i].to_string(),
                t.grad_norms[i].to_string(),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

type Segment = ([f64; 2], [f64; 2]);

/// Marching squares over a `RESOLUTION²` sample of `f`, with levels spaced
/// quadratically between the window's minimum and maximum.
fn contours(q: &Quadratic, grid: &ContourGrid) -> Vec<(f64, Vec<Segment>)> {
    let n = RESOLUTION;
    let xs: Vec<f64> = (0..=n)
        .map(|i| grid.x_min + (grid.x_max - grid.x_min) * i as f64 / n as f64)
        .collect();
    let ys: Vec<f64> = (0..=n)
        .map(|j| grid.y_min + (grid.y_max - grid.y_min) * j as f64 / n as f64)
        .collect();
    let vals: Vec<Vec<f64>> = ys
        .iter()
        .map(|&y| xs.iter().map(|&x| q.eval(&[x, y])).collect())
        .collect();
    let lo = vals.iter().flatten().copied().fold(f64::MAX, f64::min);
    let hi = vals.iter().flatten().copied().fold(f64::MIN, f64::max);

    (1..=grid.levels)
        .map(|k| {
            let frac = k as f64 / (grid.levels + 1) as f64;
            let level = lo + (hi - lo) * frac * frac;
            let mut segs = Vec::new();
            for j in 0..n {
                for i in 0..n {
                    let corners = [
                        ([xs[i], ys[j]], vals[j][i]),
                        ([xs[i + 1], ys[j]], vals[j][i + 1]),
                        ([xs[i + 1], ys[j + 1]], vals[j + 1][i + 1]),
                        ([xs[i], ys[j + 1]], vals[j + 1][i]),
                    ];
                    cell_segments(&corners, level, &mut segs);
                }
            }
            (level, segs)
        })
        .collect()
}

fn cell_segments(c: &[([f64; 2], f64); 4], level: f64, out: &mut Vec<Segment>) {
    let crossing = |a: usize, b: usize| -> Option<[f64; 2]> {
        let ((pa, va), (pb, vb)) = (c[a], c[b]);
        if (va < level) == (vb < level) {
            return None;
        }
        let t = (level - va) / (vb - va);
        Some([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])])
    };
    let hits: Vec<[f64; 2]> = [(0, 1), (1, 2), (2, 3), (3, 0)]
        .iter()
        .filter_map(|&(a, b)| crossing(a, b))
        .collect();
    // 2 crossings: one segment; 4 crossings (saddle): pair them in edge order
    for pair in hits.chunks_exact(2) {
        out.push((pair[0], pair[1]));
    }
}
