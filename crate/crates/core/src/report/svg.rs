use std::fmt::Write;

use super::{
    FingerprintGrid, RowOrdering, UniverseLayout, COLOR_BAR, COLOR_CLASS_NODE, COLOR_HIGH, COLOR_LOW, COLOR_MID,
    COLOR_SHARED, SPECIALIST_OFFSET, UNIVERSE_RADIUS,
};
use crate::analysis::{AssociationRow, Band, Heatmap};
use crate::data::{DimensionId, N_DIMS};

pub(super) fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn open(out: &mut String, width: f64, height: f64, label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" role="img" aria-label="{}">"#,
        escape(label)
    );
}

const CELL: f64 = 12.0;
const GAP: f64 = 1.0;
const LABEL_W: f64 = 180.0;
const HEADER_H: f64 = 36.0;

/// 11 x 64 grid: one row per class, one column per dimension.
pub fn render_fingerprint(grid: &FingerprintGrid, ordering: &RowOrdering) -> String {
    let grid = grid.ordered(ordering);
    let width = LABEL_W + N_DIMS as f64 * CELL + 10.0;
    let height = HEADER_H + grid.rows.len() as f64 * CELL + 10.0;
    let mut out = String::new();
    open(&mut out, width, height, "Embedding fingerprint");
    for d in DimensionId::all() {
        let x = LABEL_W + d.index() as f64 * CELL + CELL / 2.0;
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" font-size="7" text-anchor="start" transform="rotate(-90 {x:.1} {:.1})">{}</text>"#,
            HEADER_H - 4.0,
            HEADER_H - 4.0,
            d.label()
        );
    }
    for (r, (class, cells)) in grid.rows.iter().zip(&grid.cells).enumerate() {
        let y = HEADER_H + r as f64 * CELL;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="9" text-anchor="end">{}</text>"#,
            LABEL_W - 6.0,
            y + CELL - 3.0,
            escape(class.name())
        );
        for (c, state) in cells.iter().enumerate() {
            let x = LABEL_W + c as f64 * CELL;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.1}" y="{y:.1}" width="{w:.1}" height="{w:.1}" fill="{}"/>"#,
                state.color(),
                w = CELL - GAP
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

const UNIVERSE_SIZE: f64 = 360.0;

pub fn render_universe(layout: &UniverseLayout) -> String {
    let c = UNIVERSE_SIZE / 2.0;
    let mut out = String::new();
    open(&mut out, UNIVERSE_SIZE, UNIVERSE_SIZE, "Embedding universe");
    // SVG y grows downwards; flip so that positive y is up.
    let _ = writeln!(out, r#"<g transform="translate({c:.1} {c:.1}) scale(1 -1)">"#);
    if !layout.class_nodes.is_empty() {
        let _ = writeln!(
            out,
            r##"<circle cx="0" cy="0" r="{UNIVERSE_RADIUS:.1}" fill="none" stroke="#bbbbbb" stroke-dasharray="3 3"/>"##
        );
    }
    for n in &layout.shared_nodes {
        for cls in &n.classes {
            if let Some(cn) = layout.class_nodes.iter().find(|c| c.class == *cls) {
                let _ = writeln!(
                    out,
                    r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#dddddd" stroke-width="0.6"/>"##,
                    n.x, n.y, cn.x, cn.y
                );
            }
        }
    }
    for n in &layout.class_nodes {
        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="7" fill="{COLOR_CLASS_NODE}"/>"#, n.x, n.y);
    }
    for n in &layout.shared_nodes {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{COLOR_SHARED}"><title>{}</title></circle>"#,
            n.x,
            n.y,
            n.dimension.label()
        );
    }
    for n in &layout.specialist_nodes {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{}"><title>{}</title></circle>"#,
            n.x,
            n.y,
            n.shade.color(),
            n.dimension.label()
        );
    }
    out.push_str("</g>\n");
    // Labels outside the flipped group so text stays upright.
    let label_r = (UNIVERSE_RADIUS + SPECIALIST_OFFSET + 16.0) / UNIVERSE_RADIUS;
    for n in &layout.class_nodes {
        let (x, y) = (c + n.x * label_r, c - n.y * label_r);
        let anchor = if n.x > 1.0 {
            "start"
        } else if n.x < -1.0 {
            "end"
        } else {
            "middle"
        };
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="8" text-anchor="{anchor}">{}</text>"#,
            escape(n.class.name())
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Horizontal bars for the `top` highest association scores of one class.
pub fn render_frequency_chart(row: &AssociationRow, top: usize) -> String {
    let mut order: Vec<usize> = (0..row.scores.len()).collect();
    order.sort_by(|&a, &b| row.scores[b].total_cmp(&row.scores[a]).then(a.cmp(&b)));
    order.retain(|&i| row.scores[i] > 0.0);
    order.truncate(top);
    let (bar_h, label_w, plot_w) = (14.0, 40.0, 220.0);
    let height = 24.0 + order.len() as f64 * bar_h + 6.0;
    let mut out = String::new();
    open(&mut out, label_w + plot_w + 50.0, height, &format!("Top-2 frequency, {}", row.class.name()));
    let _ = writeln!(
        out,
        r#"<text x="4" y="14" font-size="10">{} (n = {})</text>"#,
        escape(row.class.name()),
        row.experiments
    );
    for (i, &d) in order.iter().enumerate() {
        let y = 24.0 + i as f64 * bar_h;
        let s = row.scores[d];
        let label = DimensionId::new(d).expect("index in range").label();
        let _ = writeln!(out, r#"<text x="4" y="{:.1}" font-size="9">{label}</text>"#, y + 10.0);
        let _ = writeln!(
            out,
            r#"<rect x="{label_w:.1}" y="{y:.1}" width="{:.2}" height="{:.1}" fill="{COLOR_BAR}"/>"#,
            s.min(1.0) * plot_w,
            bar_h - 3.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.1}" font-size="8">{s:.4}</text>"#,
            label_w + s.min(1.0) * plot_w + 3.0,
            y + 9.0
        );
    }
    out.push_str("</svg>\n");
    out
}

fn band_color(b: Band) -> &'static str {
    match b {
        Band::High => COLOR_HIGH,
        Band::Mid => COLOR_MID,
        Band::Low => COLOR_LOW,
    }
}

/// Occupied cells on a plain lon/lat grid, north up.
pub fn render_heatmap(heatmap: &Heatmap) -> String {
    let mut out = String::new();
    if heatmap.cells.is_empty() {
        open(&mut out, 200.0, 30.0, "Accuracy heatmap");
        out.push_str(r#"<text x="4" y="18" font-size="10">no cells</text>"#);
        out.push_str("\n</svg>\n");
        return out;
    }
    let lon0 = heatmap.cells.iter().map(|c| c.lon_index).min().unwrap_or(0);
    let lon1 = heatmap.cells.iter().map(|c| c.lon_index).max().unwrap_or(0);
    let lat0 = heatmap.cells.iter().map(|c| c.lat_index).min().unwrap_or(0);
    let lat1 = heatmap.cells.iter().map(|c| c.lat_index).max().unwrap_or(0);
    let (cols, rows) = ((lon1 - lon0 + 1) as f64, (lat1 - lat0 + 1) as f64);
    let px = (640.0 / cols.max(rows)).clamp(2.0, 16.0);
    let (margin, legend_h) = (30.0, 22.0);
    let width = margin + cols * px + 10.0;
    let height = legend_h + rows * px + margin;
    open(&mut out, width.max(300.0), height, "Accuracy heatmap");
    for (i, band) in [Band::High, Band::Mid, Band::Low].iter().enumerate() {
        let x = 4.0 + i as f64 * 90.0;
        let _ = writeln!(out, r#"<rect x="{x:.1}" y="4" width="10" height="10" fill="{}"/>"#, band_color(*band));
        let _ = writeln!(out, r#"<text x="{:.1}" y="13" font-size="9">{}</text>"#, x + 14.0, escape(band.label()));
    }
    let _ = writeln!(
        out,
        r##"<rect x="{margin:.1}" y="{legend_h:.1}" width="{:.1}" height="{:.1}" fill="#f5f5f5" stroke="#cccccc"/>"##,
        cols * px,
        rows * px
    );
    for c in &heatmap.cells {
        let x = margin + (c.lon_index - lon0) as f64 * px;
        let y = legend_h + (lat1 - c.lat_index) as f64 * px;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.1}" y="{y:.1}" width="{px:.1}" height="{px:.1}" fill="{}"><title>{:.4} ({} experiments)</title></rect>"#,
            band_color(c.band),
            c.mean_accuracy,
            c.experiments
        );
    }
    let deg = heatmap.cell_deg;
    let _ = writeln!(
        out,
        r#"<text x="{margin:.1}" y="{:.1}" font-size="9">lon {} to {}, lat {} to {} (cell {deg} deg)</text>"#,
        legend_h + rows * px + 14.0,
        lon0 as f64 * deg,
        (lon1 + 1) as f64 * deg,
        lat0 as f64 * deg,
        (lat1 + 1) as f64 * deg
    );
    out.push_str("</svg>\n");
    out
}
