//! Hand-built SVG figures for the correlation study. No plotting backend:
//! the output must be byte-stable across runs and platforms, so geometry is
//! computed from integers and every float is formatted the same way.

use std::fmt::Write as _;

use crate::analysis::{BoxplotRow, HeatmapTable};
use crate::error::{Error, Result};

const CELL_W: i64 = 64;
const CELL_H: i64 = 28;
const HEAT_LEFT: i64 = 150;
const HEAT_TOP: i64 = 96;

const BOX_SLOT_W: i64 = 70;
const BOX_LEFT: i64 = 64;
const BOX_TOP: i64 = 20;
const BOX_PLOT_H: i64 = 280;

fn escape_text(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Diverging color for rho in [-1, 1]: blue through white to red.
fn diverging_color(v: f64) -> String {
    let v = v.clamp(-1.0, 1.0);
    let (target, t): ((f64, f64, f64), f64) = if v >= 0.0 {
        ((178.0, 24.0, 43.0), v)
    } else {
        ((33.0, 102.0, 172.0), -v)
    };
    let ch = |to: f64| (255.0 + t * (to - 255.0)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", ch(target.0), ch(target.1), ch(target.2))
}

fn format_rho(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

/// Metric x generator heatmap. Undefined cells are flat gray with no value
/// text; strong cells switch to white text for contrast.
pub fn render_heatmap_svg(table: &HeatmapTable) -> Result<String> {
    if table.row_labels.is_empty() || table.col_labels.is_empty() {
        return Err(Error::EmptyTable);
    }
    let n_rows = table.row_labels.len() as i64;
    let n_cols = table.col_labels.len() as i64;
    let width = HEAT_LEFT + CELL_W * n_cols + 20;
    let height = HEAT_TOP + CELL_H * n_rows + 16;

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(out, r##"<rect width="{width}" height="{height}" fill="#ffffff"/>"##);

    for (j, label) in table.col_labels.iter().enumerate() {
        let cx = HEAT_LEFT + j as i64 * CELL_W + CELL_W / 2;
        let _ = writeln!(
            out,
            r#"<text x="{cx}" y="{y}" font-family="sans-serif" font-size="11" text-anchor="start" transform="rotate(-45 {cx} {y})">{t}</text>"#,
            y = HEAT_TOP - 8,
            t = escape_text(label)
        );
    }

    for (i, label) in table.row_labels.iter().enumerate() {
        let y = HEAT_TOP + i as i64 * CELL_H + CELL_H / 2 + 4;
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="11" text-anchor="end">{t}</text>"#,
            x = HEAT_LEFT - 6,
            t = escape_text(label)
        );
    }

    for i in 0..table.row_labels.len() {
        for j in 0..table.col_labels.len() {
            let x = HEAT_LEFT + j as i64 * CELL_W;
            let y = HEAT_TOP + i as i64 * CELL_H;
            match table.get(i, j) {
                Some(v) => {
                    let _ = writeln!(
                        out,
                        r#"<rect x="{x}" y="{y}" width="{w}" height="{h}" fill="{fill}"/>"#,
                        w = CELL_W - 1,
                        h = CELL_H - 1,
                        fill = diverging_color(v)
                    );
                    let text_fill = if v.abs() > 0.6 { "#ffffff" } else { "#000000" };
                    let _ = writeln!(
                        out,
                        r#"<text x="{cx}" y="{cy}" font-family="monospace" font-size="11" text-anchor="middle" fill="{text_fill}">{t}</text>"#,
                        cx = x + (CELL_W - 1) / 2,
                        cy = y + CELL_H / 2 + 4,
                        t = format_rho(v)
                    );
                }
                None => {
                    let _ = writeln!(
                        out,
                        r##"<rect x="{x}" y="{y}" width="{w}" height="{h}" fill="#cccccc"/>"##,
                        w = CELL_W - 1,
                        h = CELL_H - 1,
                    );
                }
            }
        }
    }

    out.push_str("</svg>\n");
    Ok(out)
}

fn box_y(v: f64) -> f64 {
    BOX_TOP as f64 + (1.0 - v) / 2.0 * BOX_PLOT_H as f64
}

/// One box-and-whisker glyph per metric, drawn from the pooled (both-target)
/// rows on a fixed [-1, 1] axis so figures from different runs compare
/// directly.
pub fn render_boxplot_svg(rows: &[BoxplotRow]) -> Result<String> {
    let pooled: Vec<&BoxplotRow> = rows.iter().filter(|r| r.target.is_none()).collect();
    if pooled.is_empty() {
        return Err(Error::EmptySummaries);
    }
    let n = pooled.len() as i64;
    let width = BOX_LEFT + BOX_SLOT_W * n + 16;
    let height = BOX_TOP + BOX_PLOT_H + 110;

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(out, r##"<rect width="{width}" height="{height}" fill="#ffffff"/>"##);

    for tick in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let y = box_y(tick);
        let _ = writeln!(
            out,
            r##"<line x1="{x1}" y1="{y}" x2="{x2}" y2="{y}" stroke="#dddddd" stroke-width="1"/>"##,
            x1 = BOX_LEFT,
            x2 = BOX_LEFT + BOX_SLOT_W * n,
        );
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{ty}" font-family="sans-serif" font-size="11" text-anchor="end">{t}</text>"#,
            x = BOX_LEFT - 8,
            ty = y + 4.0,
            t = format_rho(tick)
        );
    }
    let _ = writeln!(
        out,
        r##"<line x1="{x}" y1="{y1}" x2="{x}" y2="{y2}" stroke="#000000" stroke-width="1"/>"##,
        x = BOX_LEFT,
        y1 = box_y(1.0),
        y2 = box_y(-1.0),
    );

    for (i, row) in pooled.iter().enumerate() {
        let cx = BOX_LEFT + i as i64 * BOX_SLOT_W + BOX_SLOT_W / 2;
        let half_box = 18;
        let half_cap = 10;
        // whisker spine plus caps
        let _ = writeln!(
            out,
            r##"<line x1="{cx}" y1="{y1}" x2="{cx}" y2="{y2}" stroke="#000000" stroke-width="1"/>"##,
            y1 = box_y(row.max),
            y2 = box_y(row.min),
        );
        for v in [row.min, row.max] {
            let _ = writeln!(
                out,
                r##"<line x1="{x1}" y1="{y}" x2="{x2}" y2="{y}" stroke="#000000" stroke-width="1"/>"##,
                x1 = cx - half_cap,
                x2 = cx + half_cap,
                y = box_y(v),
            );
        }
        let _ = writeln!(
            out,
            r##"<rect x="{x}" y="{y}" width="{w}" height="{h}" fill="#7fb3d5" stroke="#000000" stroke-width="1"/>"##,
            x = cx - half_box,
            y = box_y(row.q3),
            w = half_box * 2,
            h = box_y(row.q1) - box_y(row.q3),
        );
        let _ = writeln!(
            out,
            r##"<line x1="{x1}" y1="{y}" x2="{x2}" y2="{y}" stroke="#000000" stroke-width="2"/>"##,
            x1 = cx - half_box,
            x2 = cx + half_box,
            y = box_y(row.median),
        );
        let ly = BOX_TOP + BOX_PLOT_H + 16;
        let _ = writeln!(
            out,
            r#"<text x="{cx}" y="{ly}" font-family="sans-serif" font-size="11" text-anchor="end" transform="rotate(-45 {cx} {ly})">{t}</text>"#,
            t = escape_text(row.metric.name())
        );
    }

    out.push_str("</svg>\n");
    Ok(out)
}
