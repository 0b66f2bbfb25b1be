//! Heat-map rendering of a predicted surface on a regular grid.

use std::fmt::Write as _;

use crate::error::{IbrError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSurface {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `z[iy][ix]`.
    pub z: Vec<Vec<f64>>,
    pub x_label: String,
    pub y_label: String,
    pub z_label: String,
}

fn distinct_sorted(v: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = v.collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

impl GridSurface {
    /// Infers the grid from `(x, y, z)` triples; every combination of the
    /// distinct coordinates must appear exactly once.
    pub fn from_points(points: &[[f64; 3]], labels: [&str; 3]) -> Result<Self> {
        let xs = distinct_sorted(points.iter().map(|p| p[0]));
        let ys = distinct_sorted(points.iter().map(|p| p[1]));
        if xs.len() < 2 || ys.len() < 2 {
            return Err(IbrError::InvalidInput(format!(
                "surface needs at least 2 distinct values per axis, got {} x {}",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() * ys.len() != points.len() {
            return Err(IbrError::InvalidInput(format!(
                "{} points do not form a {} x {} grid",
                points.len(),
                xs.len(),
                ys.len()
            )));
        }
        let mut z = vec![vec![f64::NAN; xs.len()]; ys.len()];
        for p in points {
            let ix = xs.binary_search_by(|v| v.total_cmp(&p[0])).expect("present");
            let iy = ys.binary_search_by(|v| v.total_cmp(&p[1])).expect("present");
            if !z[iy][ix].is_nan() {
                return Err(IbrError::InvalidInput(format!("duplicate grid point ({}, {})", p[0], p[1])));
            }
            z[iy][ix] = p[2];
        }
        Ok(Self {
            xs,
            ys,
            z,
            x_label: labels[0].to_string(),
            y_label: labels[1].to_string(),
            z_label: labels[2].to_string(),
        })
    }

    fn z_range(&self) -> (f64, f64) {
        self.z
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Whitespace-separated matrix, one line per y value.
    pub fn to_matrix_text(&self) -> String {
        let mut out = String::new();
        for row in &self.z {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn to_svg(&self, title: &str) -> String {
        const CELL_AREA: f64 = 400.0;
        const MARGIN: f64 = 60.0;
        const LEGEND: f64 = 80.0;
        let (nx, ny) = (self.xs.len(), self.ys.len());
        let (cw, ch) = (CELL_AREA / nx as f64, CELL_AREA / ny as f64);
        let width = CELL_AREA + 2.0 * MARGIN + LEGEND;
        let height = CELL_AREA + 2.0 * MARGIN;
        let (lo, hi) = self.z_range();
        let span = hi - lo;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="30" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
            MARGIN + CELL_AREA / 2.0,
            escape(title)
        );
        for (iy, row) in self.z.iter().enumerate() {
            for (ix, &v) in row.iter().enumerate() {
                let t = if span > 0.0 { (v - lo) / span } else { 0.0 };
                let x = MARGIN + ix as f64 * cw;
                // y increases upwards
                let y = MARGIN + (ny - 1 - iy) as f64 * ch;
                let _ = writeln!(
                    s,
                    r#"<rect x="{x:.3}" y="{y:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                    cw + 0.01,
                    ch + 0.01,
                    palette(t)
                );
            }
        }
        let bottom = MARGIN + CELL_AREA;
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN}" y="{MARGIN}" width="{CELL_AREA}" height="{CELL_AREA}" fill="none" stroke="black"/>"#
        );
        let axis_text = |s: &mut String, x: f64, y: f64, anchor: &str, text: &str| {
            let _ = writeln!(
                s,
                r#"<text x="{x:.3}" y="{y:.3}" text-anchor="{anchor}" font-family="sans-serif" font-size="12">{}</text>"#,
                escape(text)
            );
        };
        axis_text(&mut s, MARGIN, bottom + 18.0, "start", &tick(self.xs[0]));
        axis_text(&mut s, MARGIN + CELL_AREA, bottom + 18.0, "end", &tick(self.xs[nx - 1]));
        axis_text(&mut s, MARGIN + CELL_AREA / 2.0, bottom + 40.0, "middle", &self.x_label);
        axis_text(&mut s, MARGIN - 6.0, bottom, "end", &tick(self.ys[0]));
        axis_text(&mut s, MARGIN - 6.0, MARGIN + 10.0, "end", &tick(self.ys[ny - 1]));
        let _ = writeln!(
            s,
            r#"<text x="20" y="{:.3}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 20 {:.3})">{}</text>"#,
            MARGIN + CELL_AREA / 2.0,
            MARGIN + CELL_AREA / 2.0,
            escape(&self.y_label)
        );

        // colour legend
        let lx = MARGIN + CELL_AREA + 20.0;
        let steps = 20;
        for i in 0..steps {
            let t = 1.0 - i as f64 / (steps - 1) as f64;
            let y = MARGIN + i as f64 * CELL_AREA / steps as f64;
            let _ = writeln!(
                s,
                r#"<rect x="{lx:.3}" y="{y:.3}" width="16" height="{:.3}" fill="{}"/>"#,
                CELL_AREA / steps as f64 + 0.01,
                palette(t)
            );
        }
        axis_text(&mut s, lx + 20.0, MARGIN + 10.0, "start", &tick(hi));
        axis_text(&mut s, lx + 20.0, bottom, "start", &tick(lo));
        axis_text(&mut s, lx, MARGIN - 8.0, "start", &self.z_label);
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    format!("{v:.4}").trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Fixed five-stop blue-to-yellow palette, `t` in [0, 1].
fn palette(t: f64) -> String {
    const STOPS: [[f64; 3]; 5] = [
        [68.0, 1.0, 84.0],
        [59.0, 82.0, 139.0],
        [33.0, 145.0, 140.0],
        [94.0, 201.0, 98.0],
        [253.0, 231.0, 37.0],
    ];
    let t = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - i as f64;
    let c: Vec<u8> =
        (0..3).map(|j| (STOPS[i][j] + f * (STOPS[i + 1][j] - STOPS[i][j])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}
