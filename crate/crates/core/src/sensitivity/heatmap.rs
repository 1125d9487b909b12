use std::fmt::Write as _;

use crate::basis::BasisId;
use crate::beat::{fmt_f64, format_beat, to_f64, whole, Beat};
use crate::error::{Error, Result};

use super::{rank_influential, SensitivityGraph};

/// Colour of the largest positive value (stronger in performance A).
pub const POSITIVE_RGB: [u8; 3] = [230, 97, 1];
/// Colour of the largest negative value (stronger in performance B).
pub const NEGATIVE_RGB: [u8; 3] = [94, 60, 153];
pub const NEUTRAL_RGB: [u8; 3] = [247, 247, 247];

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapOptions {
    /// Rows shown, most influential first.
    pub top_k: usize,
    /// Half-open beat range; the whole graph when `None`.
    pub window: Option<(Beat, Beat)>,
    /// Bar starts, numbered from 1.
    pub bar_lines: Vec<Beat>,
    pub title: String,
    /// Names of the positive and negative sides, e.g. two performers.
    pub labels: Option<(String, String)>,
    pub pixels_per_beat: f64,
    pub row_height: f64,
}

impl Default for HeatmapOptions {
    fn default() -> Self {
        HeatmapOptions {
            top_k: 12,
            window: None,
            bar_lines: Vec::new(),
            title: String::new(),
            labels: None,
            pixels_per_beat: 24.0,
            row_height: 18.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub svg: String,
    /// Shown rows with their ranking score.
    pub rows: Vec<(BasisId, f64)>,
    /// The plotted values: `beat` then one column per shown row.
    pub csv: String,
}

/// Diverging colour for `value` on a scale symmetric about 0.
pub(crate) fn colour(value: f64, max_abs: f64) -> [u8; 3] {
    if max_abs <= 0.0 || value == 0.0 {
        return NEUTRAL_RGB;
    }
    let t = (value.abs() / max_abs).min(1.0);
    let end = if value > 0.0 { POSITIVE_RGB } else { NEGATIVE_RGB };
    let mix = |a: u8, b: u8| (f64::from(a) + (f64::from(b) - f64::from(a)) * t).round() as u8;
    [mix(NEUTRAL_RGB[0], end[0]), mix(NEUTRAL_RGB[1], end[1]), mix(NEUTRAL_RGB[2], end[2])]
}

fn hex(c: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// End of the last grid cell: one typical step past the last time.
fn graph_end(times: &[Beat]) -> Beat {
    match times {
        [] => whole(0),
        [only] => only + whole(1),
        [.., a, b] => b + (b - a),
    }
}

/// Renders the `top_k` most influential rows of `graph` in the window as a
/// self-contained SVG, plus a CSV of the exact plotted values.
pub fn render_heatmap(graph: &SensitivityGraph, options: &HeatmapOptions) -> Result<Heatmap> {
    if graph.times.is_empty() || graph.columns.is_empty() {
        return Err(Error::Sensitivity("empty graph".into()));
    }
    let window = options.window.unwrap_or((graph.times[0], graph_end(&graph.times)));
    let rows = rank_influential(graph, window, options.top_k)?;
    let steps: Vec<usize> = (0..graph.times.len())
        .filter(|&t| graph.times[t] >= window.0 && graph.times[t] < window.1)
        .collect();
    let cols: Vec<usize> = rows.iter().map(|(id, _)| graph.column_index(id).expect("ranked column")).collect();
    let max_abs = steps
        .iter()
        .flat_map(|&t| cols.iter().map(move |&k| (t, k)))
        .map(|(t, k)| graph.data[[t, k]].abs())
        .fold(0.0, f64::max);

    let label_width = 7.0 * rows.iter().map(|(id, _)| id.to_string().len()).max().unwrap_or(0) as f64 + 16.0;
    let (top, ppb, rh) = (56.0, options.pixels_per_beat, options.row_height);
    let x_of = |b: Beat| label_width + to_f64(b - window.0) * ppb;
    let plot_w = to_f64(window.1 - window.0) * ppb;
    let plot_h = rh * rows.len() as f64;
    let width = label_width + plot_w + 16.0;
    let height = top + plot_h + 40.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.1}\" height=\"{height:.1}\" viewBox=\"0 0 {width:.1} {height:.1}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let _ = writeln!(s, "<!-- expressdyn {} -->", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    if !options.title.is_empty() {
        let _ = writeln!(s, "<text x=\"{label_width:.1}\" y=\"16\" font-size=\"13\">{}</text>", escape(&options.title));
    }
    let legend = match &options.labels {
        Some((a, b)) => format!("orange: stronger in {}; purple: stronger in {}", escape(a), escape(b)),
        None => "orange: raises loudness; purple: lowers loudness".to_string(),
    };
    let _ = writeln!(
        s,
        "<text x=\"{label_width:.1}\" y=\"32\" fill=\"#444\">{legend} (scale ±{})</text>",
        format_args!("{max_abs:.4}")
    );

    for (r, (id, _)) in rows.iter().enumerate() {
        let y = top + rh * r as f64;
        let k = cols[r];
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            label_width - 6.0,
            y + rh * 0.7,
            escape(&id.to_string())
        );
        for (i, &t) in steps.iter().enumerate() {
            let start = graph.times[t];
            let end = steps.get(i + 1).map_or(window.1, |&n| graph.times[n]).min(window.1);
            let v = graph.data[[t, k]];
            let _ = writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{rh:.2}\" fill=\"{}\"><title>{} @ {}: {}</title></rect>",
                x_of(start),
                to_f64(end - start) * ppb,
                hex(colour(v, max_abs)),
                escape(&id.to_string()),
                format_beat(start),
                fmt_f64(v)
            );
        }
    }

    for (n, &bar) in options.bar_lines.iter().enumerate() {
        if bar < window.0 || bar >= window.1 {
            continue;
        }
        let x = x_of(bar);
        let _ = writeln!(
            s,
            "<line x1=\"{x:.2}\" y1=\"{:.1}\" x2=\"{x:.2}\" y2=\"{:.1}\" stroke=\"#222\" stroke-width=\"0.8\"/>",
            top - 6.0,
            top + plot_h
        );
        let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{:.1}\">{}</text>", x + 2.0, top - 8.0, n + 1);
    }
    let _ = writeln!(
        s,
        "<rect x=\"{label_width:.1}\" y=\"{top:.1}\" width=\"{plot_w:.2}\" height=\"{plot_h:.2}\" fill=\"none\" stroke=\"#888\"/>"
    );
    let axis_y = top + plot_h + 14.0;
    let _ = writeln!(s, "<text x=\"{label_width:.1}\" y=\"{axis_y:.1}\">beat {}</text>", format_beat(window.0));
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{axis_y:.1}\" text-anchor=\"end\">beat {}</text>",
        label_width + plot_w,
        format_beat(window.1)
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" fill=\"#444\">score time (beats; bar numbers on top)</text>",
        label_width + plot_w / 2.0,
        axis_y + 16.0
    );
    s.push_str("</svg>\n");

    let mut csv_out = String::from("beat");
    for (id, _) in &rows {
        let _ = write!(csv_out, ",{id}");
    }
    csv_out.push('\n');
    for &t in &steps {
        csv_out.push_str(&fmt_f64(to_f64(graph.times[t])));
        for &k in &cols {
            let _ = write!(csv_out, ",{}", fmt_f64(graph.data[[t, k]]));
        }
        csv_out.push('\n');
    }
    Ok(Heatmap { svg: s, rows, csv: csv_out })
}
