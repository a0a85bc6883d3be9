// SPDX-License-Identifier: MIT OR Apache-2.0

//! Static SVG rendering of a ratio series with its detection.
//!
//! Upper panel: `T` against `i`, the `τ` line, candidate intervals shaded
//! (kept and discarded in different classes) and a marker at `ẑ - 2α + 1`
//! for every estimate. Lower panel: the screened MOSUM norm. Values of `T`
//! above the cap are drawn at the cap.

use std::fmt::Write as _;

use crate::detector::Analysis;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlotOptions {
    pub width: f64,
    pub height: f64,
    /// Upper limit of the `T` axis.
    pub t_cap: f64,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self {
            width: 900.0,
            height: 520.0,
            t_cap: 3.0,
        }
    }
}

struct Panel {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xmax: f64,
    ymax: f64,
}

impl Panel {
    fn x(&self, i: f64) -> f64 {
        self.x0 + (i - 1.0) / (self.xmax - 1.0).max(1.0) * self.w
    }

    fn y(&self, v: f64) -> f64 {
        self.y0 + self.h - v.clamp(0.0, self.ymax) / self.ymax * self.h
    }

    fn polyline(&self, out: &mut String, class: &str, values: &[f64]) {
        let _ = write!(out, r#"<polyline class="{class}" fill="none" points=""#);
        for (k, v) in values.iter().enumerate() {
            let _ = write!(out, "{:.2},{:.2} ", self.x(k as f64 + 1.0), self.y(*v));
        }
        out.push_str("\"/>\n");
    }

    fn frame(&self, out: &mut String, label: &str) {
        let _ = writeln!(
            out,
            r##"<rect class="frame" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
            self.x0, self.y0, self.w, self.h
        );
        let _ = writeln!(
            out,
            r#"<text class="label" x="{:.2}" y="{:.2}" font-size="12">{label}</text>"#,
            self.x0 + 4.0,
            self.y0 + 14.0
        );
        let _ = writeln!(
            out,
            r#"<text class="tick" x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{:.3}</text>"#,
            self.x0 - 4.0,
            self.y0 + 10.0,
            self.ymax
        );
    }
}

/// Renders `analysis` as a standalone SVG document.
pub fn render_svg(analysis: &Analysis, options: &PlotOptions) -> String {
    let series = &analysis.series;
    let det = &analysis.detection;
    let (w, h) = (options.width, options.height);
    let margin = 50.0;
    let gap = 30.0;
    let upper_h = (h - 2.0 * margin - gap) * 0.65;
    let lower_h = (h - 2.0 * margin - gap) - upper_h;
    let xmax = series.signal.len().max(2) as f64;
    let t_max = series.t.iter().cloned().fold(0.0, f64::max);
    let top = Panel {
        x0: margin,
        y0: margin,
        w: w - 2.0 * margin,
        h: upper_h,
        xmax,
        ymax: t_max.clamp(1.2, options.t_cap.max(1.2)),
    };
    let s_max = series.signal.iter().cloned().fold(0.0, f64::max);
    let bottom = Panel {
        x0: margin,
        y0: margin + upper_h + gap,
        w: w - 2.0 * margin,
        h: lower_h,
        xmax,
        ymax: if s_max > 0.0 { s_max * 1.05 } else { 1.0 },
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    out.push_str(
        "<style>.t-curve{stroke:#1f4e9c;stroke-width:1}.signal{stroke:#555;stroke-width:1}\
.tau{stroke:#c0392b;stroke-dasharray:5 3}.kept{fill:#2e8b57;fill-opacity:0.18}\
.pruned{fill:#999;fill-opacity:0.18}.zhat{stroke:#2e8b57;stroke-width:1.5}</style>\n",
    );
    let _ = writeln!(
        out,
        r#"<text class="title" x="{margin}" y="{:.2}" font-size="14">K = {}, alpha = {}, tau = {}</text>"#,
        margin - 16.0,
        det.k_hat,
        det.alpha,
        analysis.tau
    );
    for c in &det.intervals {
        let lo = (c.start.max(1)) as f64;
        let hi = c.anchor as f64;
        let class = if c.status.is_kept() { "kept" } else { "pruned" };
        let _ = writeln!(
            out,
            r#"<rect class="{class}" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"><title>anchor {} {:?}</title></rect>"#,
            top.x(lo),
            top.y0,
            (top.x(hi) - top.x(lo)).max(1.0),
            top.h,
            c.anchor,
            c.status
        );
    }
    top.frame(&mut out, "T(i)");
    top.polyline(&mut out, "t-curve", &series.t);
    let _ = writeln!(
        out,
        r#"<line class="tau" x1="{:.2}" x2="{:.2}" y1="{:.2}" y2="{:.2}"/>"#,
        top.x0,
        top.x0 + top.w,
        top.y(analysis.tau),
        top.y(analysis.tau)
    );
    for &z in &det.locations {
        let r = (z + 1).saturating_sub(2 * det.alpha).max(1) as f64;
        let _ = writeln!(
            out,
            r#"<line class="zhat" x1="{x:.2}" x2="{x:.2}" y1="{:.2}" y2="{:.2}"><title>z = {z}</title></line>"#,
            top.y0,
            top.y0 + top.h,
            x = top.x(r)
        );
    }
    bottom.frame(&mut out, "screened MOSUM norm");
    bottom.polyline(&mut out, "signal", &series.signal);
    out.push_str("</svg>\n");
    out
}
