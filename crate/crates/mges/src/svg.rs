//! Deterministic SVG emission for every plot kind the pipeline produces.
//! No timestamps, fixed 6-significant-digit coordinates, index-ordered
//! elements: identical input yields byte-identical output, which makes
//! the plots diffable and hashable.

use crate::cluster::Dendrogram;
use crate::ingest::GridGeometry;
use crate::matrix::Matrix;
use crate::netmod::{GenePairCondition, ModState, ModuleResult, RelNet};
use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 52.0;

/// Fixed-precision coordinate formatting: six significant digits, no
/// trailing zeros.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return "0".to_string(); // callers filter; keep output well-formed
    }
    let mag = v.abs().log10().floor() as i32;
    let decimals = (5 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

struct Scale {
    lo: f64,
    hi: f64,
    out_lo: f64,
    out_hi: f64,
}

impl Scale {
    fn new(values: impl Iterator<Item = f64>, out_lo: f64, out_hi: f64) -> Scale {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if lo == hi {
            lo -= 0.5;
            hi += 0.5;
        }
        Scale { lo, hi, out_lo, out_hi }
    }

    fn map(&self, v: f64) -> f64 {
        self.out_lo + (v - self.lo) / (self.hi - self.lo) * (self.out_hi - self.out_lo)
    }
}

fn open_svg(out: &mut String, width: f64, height: f64) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" \
         viewBox=\"0 0 {} {}\">\n<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n",
        fmt_sig(width),
        fmt_sig(height),
        fmt_sig(width),
        fmt_sig(height),
        fmt_sig(width),
        fmt_sig(height),
    );
}

fn close_svg(out: &mut String) {
    out.push_str("</svg>\n");
}

fn text(out: &mut String, x: f64, y: f64, anchor: &str, size: f64, content: &str) {
    let _ = write!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" \
         font-size=\"{}\">{}</text>\n",
        fmt_sig(x),
        fmt_sig(y),
        fmt_sig(size),
        content.replace('&', "&amp;").replace('<', "&lt;")
    );
}

fn line(out: &mut String, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
    let _ = write!(
        out,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{stroke}\" stroke-width=\"{}\"/>\n",
        fmt_sig(x1),
        fmt_sig(y1),
        fmt_sig(x2),
        fmt_sig(y2),
        fmt_sig(width),
    );
}

fn axes(out: &mut String, xs: &Scale, ys: &Scale, x_label: &str, y_label: &str) {
    line(out, MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, "black", 1.0);
    line(out, MARGIN, MARGIN, MARGIN, HEIGHT - MARGIN, "black", 1.0);
    for i in 0..=4 {
        let fx = xs.lo + (xs.hi - xs.lo) * i as f64 / 4.0;
        let px = xs.map(fx);
        line(out, px, HEIGHT - MARGIN, px, HEIGHT - MARGIN + 4.0, "black", 1.0);
        text(out, px, HEIGHT - MARGIN + 16.0, "middle", 10.0, &fmt_sig(fx));
        let fy = ys.lo + (ys.hi - ys.lo) * i as f64 / 4.0;
        let py = ys.map(fy);
        line(out, MARGIN - 4.0, py, MARGIN, py, "black", 1.0);
        text(out, MARGIN - 6.0, py + 3.0, "end", 10.0, &fmt_sig(fy));
    }
    text(out, WIDTH / 2.0, HEIGHT - 12.0, "middle", 12.0, x_label);
    text(out, 14.0, MARGIN - 10.0, "start", 12.0, y_label);
}

/// Symmetric diverging color around zero: blue, white, red.
fn diverging(v: f64, max_abs: f64) -> String {
    if v.is_nan() {
        return "#bbbbbb".to_string();
    }
    let t = if max_abs > 0.0 { (v / max_abs).clamp(-1.0, 1.0) } else { 0.0 };
    let (r, g, b) = if t >= 0.0 {
        let u = 1.0 - t;
        (255.0, 255.0 * u, 255.0 * u)
    } else {
        let u = 1.0 + t;
        (255.0 * u, 255.0 * u, 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

/// Scatter of (A, W) per spot with an optional fitted curve overlay.
pub fn wa_plot(a: &[f64], w: &[f64], curve: Option<&[(f64, f64)]>, title: &str) -> String {
    let mut out = String::new();
    open_svg(&mut out, WIDTH, HEIGHT);
    let xs = Scale::new(a.iter().copied(), MARGIN, WIDTH - MARGIN);
    let ys = Scale::new(w.iter().copied(), HEIGHT - MARGIN, MARGIN);
    axes(&mut out, &xs, &ys, "A (mean log2 intensity)", "W (log2 ratio)");
    text(&mut out, WIDTH / 2.0, 24.0, "middle", 13.0, title);
    for (&av, &wv) in a.iter().zip(w) {
        if av.is_finite() && wv.is_finite() {
            let _ = write!(
                out,
                "<circle cx=\"{}\" cy=\"{}\" r=\"1.6\" fill=\"#1f6fb0\" fill-opacity=\"0.6\"/>\n",
                fmt_sig(xs.map(av)),
                fmt_sig(ys.map(wv)),
            );
        }
    }
    if let Some(points) = curve {
        let mut path = String::new();
        let mut first = true;
        for &(x, y) in points {
            if !(x.is_finite() && y.is_finite()) {
                continue;
            }
            let _ = write!(
                path,
                "{}{} {}",
                if first { "M" } else { " L" },
                fmt_sig(xs.map(x)),
                fmt_sig(ys.map(y)),
            );
            first = false;
        }
        let _ = write!(out, "<path d=\"{path}\" fill=\"none\" stroke=\"#d03a2b\" stroke-width=\"1.5\"/>\n");
    }
    close_svg(&mut out);
    out
}

/// Chip-layout lattice colored by W (grey for missing): one cell per spot
/// on the (gridR * tipR) x (gridC * tipC) physical grid.
pub fn spatial_plot(values: &[f64], grid: &GridGeometry, title: &str) -> String {
    let rows = grid.grid_r * grid.tip_r;
    let cols = grid.grid_c * grid.tip_c;
    let cell = ((WIDTH - 2.0 * MARGIN) / cols as f64).min((HEIGHT - 2.0 * MARGIN) / rows as f64);
    let mut out = String::new();
    open_svg(&mut out, WIDTH, HEIGHT);
    text(&mut out, WIDTH / 2.0, 24.0, "middle", 13.0, title);
    let max_abs = values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    for (idx, &v) in values.iter().enumerate() {
        let (r, c) = grid.chip_position(idx);
        let x = MARGIN + c as f64 * cell;
        let y = MARGIN + r as f64 * cell;
        let _ = write!(
            out,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
            fmt_sig(x),
            fmt_sig(y),
            fmt_sig(cell),
            fmt_sig(cell),
            diverging(v, max_abs),
        );
    }
    close_svg(&mut out);
    out
}

fn quartiles(sorted: &[f64]) -> (f64, f64, f64) {
    // type-7 quantiles (linear interpolation)
    let q = |p: f64| -> f64 {
        let n = sorted.len();
        if n == 1 {
            return sorted[0];
        }
        let h = p * (n - 1) as f64;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    (q(0.25), q(0.5), q(0.75))
}

/// Box-and-whisker plot per named group; whiskers at the most extreme
/// values within 1.5 IQR, outliers as points.
pub fn boxplot(groups: &[(String, Vec<f64>)], title: &str, y_label: &str) -> String {
    let mut out = String::new();
    open_svg(&mut out, WIDTH, HEIGHT);
    text(&mut out, WIDTH / 2.0, 24.0, "middle", 13.0, title);
    let all: Vec<f64> =
        groups.iter().flat_map(|(_, v)| v.iter().copied()).filter(|v| v.is_finite()).collect();
    let ys = Scale::new(all.iter().copied(), HEIGHT - MARGIN, MARGIN);
    line(&mut out, MARGIN, MARGIN, MARGIN, HEIGHT - MARGIN, "black", 1.0);
    for i in 0..=4 {
        let fy = ys.lo + (ys.hi - ys.lo) * i as f64 / 4.0;
        let py = ys.map(fy);
        line(&mut out, MARGIN - 4.0, py, MARGIN, py, "black", 1.0);
        text(&mut out, MARGIN - 6.0, py + 3.0, "end", 10.0, &fmt_sig(fy));
    }
    text(&mut out, 14.0, MARGIN - 10.0, "start", 12.0, y_label);
    let slot = (WIDTH - 2.0 * MARGIN) / groups.len() as f64;
    for (gi, (name, values)) in groups.iter().enumerate() {
        let center = MARGIN + slot * (gi as f64 + 0.5);
        let half = (slot * 0.3).min(40.0);
        let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        text(&mut out, center, HEIGHT - MARGIN + 16.0, "middle", 10.0, name);
        if sorted.is_empty() {
            continue;
        }
        let (q1, med, q3) = quartiles(&sorted);
        let iqr = q3 - q1;
        let lo_fence = q1 - 1.5 * iqr;
        let hi_fence = q3 + 1.5 * iqr;
        let whisk_lo = sorted.iter().copied().find(|&v| v >= lo_fence).unwrap_or(q1);
        let whisk_hi =
            sorted.iter().rev().copied().find(|&v| v <= hi_fence).unwrap_or(q3);
        let _ = write!(
            out,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#cfe3f2\" stroke=\"black\"/>\n",
            fmt_sig(center - half),
            fmt_sig(ys.map(q3)),
            fmt_sig(2.0 * half),
            fmt_sig((ys.map(q1) - ys.map(q3)).abs()),
        );
        line(&mut out, center - half, ys.map(med), center + half, ys.map(med), "black", 1.5);
        line(&mut out, center, ys.map(q3), center, ys.map(whisk_hi), "black", 1.0);
        line(&mut out, center, ys.map(q1), center, ys.map(whisk_lo), "black", 1.0);
        line(&mut out, center - half / 2.0, ys.map(whisk_hi), center + half / 2.0, ys.map(whisk_hi), "black", 1.0);
        line(&mut out, center - half / 2.0, ys.map(whisk_lo), center + half / 2.0, ys.map(whisk_lo), "black", 1.0);
        for &v in &sorted {
            if v < lo_fence || v > hi_fence {
                let _ = write!(
                    out,
                    "<circle cx=\"{}\" cy=\"{}\" r=\"2\" fill=\"none\" stroke=\"black\"/>\n",
                    fmt_sig(center),
                    fmt_sig(ys.map(v)),
                );
            }
        }
    }
    close_svg(&mut out);
    out
}

/// Dendrogram with leaves in canonical order and elbow connectors.
pub fn dendrogram(tree: &Dendrogram, title: &str) -> String {
    let n = tree.leaves();
    let mut out = String::new();
    open_svg(&mut out, WIDTH, HEIGHT);
    text(&mut out, WIDTH / 2.0, 24.0, "middle", 13.0, title);
    if n == 0 {
        close_svg(&mut out);
        return out;
    }
    let order = tree.leaf_order();
    let mut leaf_x = vec![0.0; n];
    let span = WIDTH - 2.0 * MARGIN;
    for (pos, &leaf) in order.iter().enumerate() {
        leaf_x[leaf] = MARGIN + span * (pos as f64 + 0.5) / n as f64;
    }
    let max_h = tree.merges.last().map(|m| m.height).unwrap_or(1.0).max(1e-300);
    let y_of = |h: f64| HEIGHT - MARGIN - (h / max_h) * (HEIGHT - 2.0 * MARGIN - 20.0);
    // node positions: leaves at height 0, internal nodes at their merge
    let mut node_x = leaf_x.clone();
    let mut node_y = vec![HEIGHT - MARGIN; n];
    for m in &tree.merges {
        let (xa, ya) = (node_x[m.a], node_y[m.a]);
        let (xb, yb) = (node_x[m.b], node_y[m.b]);
        let y = y_of(m.height);
        line(&mut out, xa, ya, xa, y, "black", 1.0);
        line(&mut out, xb, yb, xb, y, "black", 1.0);
        line(&mut out, xa, y, xb, y, "black", 1.0);
        node_x.push((xa + xb) / 2.0);
        node_y.push(y);
    }
    for (pos, &leaf) in order.iter().enumerate() {
        let x = MARGIN + span * (pos as f64 + 0.5) / n as f64;
        let _ = write!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" \
             font-size=\"9\" transform=\"rotate(-90 {} {})\">{}</text>\n",
            fmt_sig(x),
            fmt_sig(HEIGHT - MARGIN + 10.0),
            fmt_sig(x),
            fmt_sig(HEIGHT - MARGIN + 10.0),
            tree.leaf_labels[leaf].replace('&', "&amp;").replace('<', "&lt;"),
        );
    }
    close_svg(&mut out);
    out
}

/// Heatmap with a symmetric diverging scale around zero.
pub fn heatmap(
    m: &Matrix,
    row_labels: &[String],
    col_labels: &[String],
    title: &str,
) -> String {
    let mut out = String::new();
    open_svg(&mut out, WIDTH, HEIGHT);
    text(&mut out, WIDTH / 2.0, 24.0, "middle", 13.0, title);
    let label_space = 110.0;
    let grid_w = WIDTH - MARGIN - label_space - MARGIN;
    let grid_h = HEIGHT - 2.0 * MARGIN;
    let cw = grid_w / m.cols() as f64;
    let ch = grid_h / m.rows() as f64;
    let max_abs = m
        .data()
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            let _ = write!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
                fmt_sig(MARGIN + c as f64 * cw),
                fmt_sig(MARGIN + r as f64 * ch),
                fmt_sig(cw),
                fmt_sig(ch),
                diverging(m.at(r, c), max_abs),
            );
        }
        if r < row_labels.len() {
            text(
                &mut out,
                MARGIN + grid_w + 6.0,
                MARGIN + r as f64 * ch + ch / 2.0 + 3.0,
                "start",
                (ch * 0.8).min(10.0),
                &row_labels[r],
            );
        }
    }
    for (c, label) in col_labels.iter().enumerate() {
        let x = MARGIN + c as f64 * cw + cw / 2.0;
        let y = MARGIN + grid_h + 12.0;
        let _ = write!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" \
             font-size=\"9\" transform=\"rotate(-60 {} {})\">{}</text>\n",
            fmt_sig(x),
            fmt_sig(y),
            fmt_sig(x),
            fmt_sig(y),
            label.replace('&', "&amp;").replace('<', "&lt;"),
        );
    }
    close_svg(&mut out);
    out
}

/// Volcano scatter: effect against -log10 p.
pub fn volcano(points: &[(f64, f64)], title: &str) -> String {
    let mut out = String::new();
    open_svg(&mut out, WIDTH, HEIGHT);
    let xs = Scale::new(points.iter().map(|p| p.0), MARGIN, WIDTH - MARGIN);
    let ys = Scale::new(points.iter().map(|p| p.1).chain([0.0]), HEIGHT - MARGIN, MARGIN);
    axes(&mut out, &xs, &ys, "log2 fold change", "-log10 raw p");
    text(&mut out, WIDTH / 2.0, 24.0, "middle", 13.0, title);
    for &(x, y) in points {
        if x.is_finite() && y.is_finite() {
            let _ = write!(
                out,
                "<circle cx=\"{}\" cy=\"{}\" r=\"2\" fill=\"#333333\" fill-opacity=\"0.7\"/>\n",
                fmt_sig(xs.map(x)),
                fmt_sig(ys.map(y)),
            );
        }
    }
    close_svg(&mut out);
    out
}

/// Relevance network on a deterministic circular layout; retained edges
/// only.
pub fn network_plot(net: &RelNet, title: &str) -> String {
    let n = net.gene_ids.len();
    let mut out = String::new();
    open_svg(&mut out, WIDTH, HEIGHT);
    text(&mut out, WIDTH / 2.0, 24.0, "middle", 13.0, title);
    let cx = WIDTH / 2.0;
    let cy = HEIGHT / 2.0 + 10.0;
    let radius = (WIDTH.min(HEIGHT) / 2.0) - MARGIN - 30.0;
    let pos = |i: usize| -> (f64, f64) {
        let angle = std::f64::consts::TAU * i as f64 / n as f64 - std::f64::consts::FRAC_PI_2;
        (cx + radius * angle.cos(), cy + radius * angle.sin())
    };
    for &(i, j, p) in &net.edges {
        let (x1, y1) = pos(i);
        let (x2, y2) = pos(j);
        let width = 0.8 + 2.0 * (1.0 - (p / net.cut_pval.max(1e-300)).min(1.0));
        line(&mut out, x1, y1, x2, y2, "#1f6fb0", width);
    }
    for i in 0..n {
        let (x, y) = pos(i);
        let _ = write!(
            out,
            "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"#e8a33d\" stroke=\"black\"/>\n",
            fmt_sig(x),
            fmt_sig(y),
        );
        let lx = cx + (radius + 14.0) * ((x - cx) / radius);
        let ly = cy + (radius + 14.0) * ((y - cy) / radius);
        text(&mut out, lx, ly + 3.0, "middle", 9.0, &net.gene_ids[i]);
    }
    close_svg(&mut out);
    out
}

/// Per-condition scatter of one gene pair with regression lines.
pub fn gene_pair_plot(conditions: &[GenePairCondition], gene_x: &str, gene_y: &str) -> String {
    const COLORS: [&str; 4] = ["#1f6fb0", "#d03a2b", "#3a9a4e", "#8a56b0"];
    let mut out = String::new();
    open_svg(&mut out, WIDTH, HEIGHT);
    let xs = Scale::new(
        conditions.iter().flat_map(|c| c.points.iter().map(|p| p.0)),
        MARGIN,
        WIDTH - MARGIN,
    );
    let ys = Scale::new(
        conditions.iter().flat_map(|c| c.points.iter().map(|p| p.1)),
        HEIGHT - MARGIN,
        MARGIN,
    );
    axes(&mut out, &xs, &ys, gene_x, gene_y);
    text(
        &mut out,
        WIDTH / 2.0,
        24.0,
        "middle",
        13.0,
        &format!("{gene_x} vs {gene_y}"),
    );
    for (ci, cond) in conditions.iter().enumerate() {
        let color = COLORS[ci % COLORS.len()];
        for &(x, y) in &cond.points {
            let _ = write!(
                out,
                "<circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"{color}\" fill-opacity=\"0.8\"/>\n",
                fmt_sig(xs.map(x)),
                fmt_sig(ys.map(y)),
            );
        }
        if !cond.degenerate {
            let y1 = cond.intercept + cond.slope * xs.lo;
            let y2 = cond.intercept + cond.slope * xs.hi;
            line(&mut out, xs.map(xs.lo), ys.map(y1), xs.map(xs.hi), ys.map(y2), color, 1.5);
        }
        text(
            &mut out,
            WIDTH - MARGIN,
            MARGIN + 14.0 * ci as f64,
            "end",
            11.0,
            &format!("{} (slope {})", cond.condition, fmt_sig(cond.slope)),
        );
    }
    close_svg(&mut out);
    out
}

/// Activation map of gene groups: signed score heatmap with state glyphs.
pub fn module_map(res: &ModuleResult, title: &str) -> String {
    let mut out = heatmap(
        &res.scores,
        &res.group_names,
        &res.column_names,
        title,
    );
    // annotate states on top of the score cells
    let label_space = 110.0;
    let grid_w = WIDTH - MARGIN - label_space - MARGIN;
    let grid_h = HEIGHT - 2.0 * MARGIN;
    let cw = grid_w / res.column_names.len() as f64;
    let ch = grid_h / res.group_names.len() as f64;
    let mut extra = String::new();
    for (gi, row) in res.states.iter().enumerate() {
        for (ci, state) in row.iter().enumerate() {
            let glyph = match state {
                ModState::Induced => "+",
                ModState::Repressed => "-",
                ModState::Inactive => "",
            };
            if !glyph.is_empty() {
                text(
                    &mut extra,
                    MARGIN + ci as f64 * cw + cw / 2.0,
                    MARGIN + gi as f64 * ch + ch / 2.0 + 3.0,
                    "middle",
                    (ch * 0.7).min(11.0),
                    glyph,
                );
            }
        }
    }
    let insert_at = out.rfind("</svg>").unwrap();
    out.insert_str(insert_at, &extra);
    out
}
