//! Minimal static SVG charts.
//!
//! The CSV outputs are the contract; these renderings are a convenience for
//! eyeballing trends, so the charts stay deliberately simple: multi-series
//! line charts and stacked proportion areas over monthly buckets.

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

const PALETTE: [&str; 8] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" \
         text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        esc(title)
    )
}

fn x_pos(i: usize, n: usize) -> f64 {
    let span = WIDTH - MARGIN_L - MARGIN_R;
    if n <= 1 {
        MARGIN_L + span / 2.0
    } else {
        MARGIN_L + span * i as f64 / (n - 1) as f64
    }
}

fn y_pos(value: f64, max: f64) -> f64 {
    let span = HEIGHT - MARGIN_T - MARGIN_B;
    HEIGHT - MARGIN_B - span * (value / max.max(1e-12))
}

fn axes(labels: &[String], y_max: f64) -> String {
    let mut out = String::new();
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let y0 = HEIGHT - MARGIN_B;
    out.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{MARGIN_T}\" x2=\"{x0}\" y2=\"{y0}\" stroke=\"black\"/>\n"
    ));
    // Up to 8 x ticks.
    let n = labels.len();
    let tick_every = (n / 8).max(1);
    for (i, label) in labels.iter().enumerate() {
        if i % tick_every != 0 && i != n - 1 {
            continue;
        }
        let x = x_pos(i, n);
        out.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{y0}\" x2=\"{x}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{x}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" \
             text-anchor=\"middle\">{}</text>\n",
            y0 + 5.0,
            y0 + 18.0,
            esc(label)
        ));
    }
    for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let v = y_max * frac;
        let y = y_pos(v, y_max);
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" \
             text-anchor=\"end\">{:.4}</text>\n",
            x0 - 6.0,
            y + 3.0,
            v
        ));
    }
    out
}

fn legend(names: &[&str]) -> String {
    let mut out = String::new();
    for (i, name) in names.iter().enumerate() {
        let y = MARGIN_T + 16.0 * i as f64;
        let x = WIDTH - MARGIN_R + 12.0;
        out.push_str(&format!(
            "<rect x=\"{x}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n\
             <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            y - 9.0,
            PALETTE[i % PALETTE.len()],
            x + 14.0,
            y,
            esc(name)
        ));
    }
    out
}

/// Multi-series line chart over shared x labels.
pub fn line_chart(title: &str, x_labels: &[String], series: &[(&str, Vec<f64>)]) -> String {
    let y_max = series
        .iter()
        .flat_map(|(_, ys)| ys.iter().copied())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let mut out = header(title);
    out.push_str(&axes(x_labels, y_max));
    for (si, (_, ys)) in series.iter().enumerate() {
        let points: Vec<String> = ys
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", x_pos(i, x_labels.len()), y_pos(v, y_max)))
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            PALETTE[si % PALETTE.len()],
            points.join(" ")
        ));
    }
    out.push_str(&legend(&series.iter().map(|(n, _)| *n).collect::<Vec<_>>()));
    out.push_str("</svg>\n");
    out
}

/// Stacked proportion chart: each series is a fraction per x position;
/// fractions at one position are stacked to 1.
pub fn stacked_area(title: &str, x_labels: &[String], series: &[(&str, Vec<f64>)]) -> String {
    let n = x_labels.len();
    let mut out = header(title);
    out.push_str(&axes(x_labels, 1.0));
    let mut base = vec![0.0; n];
    for (si, (_, fractions)) in series.iter().enumerate() {
        let mut top: Vec<(f64, f64)> = Vec::with_capacity(n);
        for i in 0..n {
            top.push((x_pos(i, n), y_pos(base[i] + fractions[i], 1.0)));
        }
        let mut path: Vec<String> = top.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        for i in (0..n).rev() {
            path.push(format!("{:.2},{:.2}", x_pos(i, n), y_pos(base[i], 1.0)));
        }
        out.push_str(&format!(
            "<polygon fill=\"{}\" fill-opacity=\"0.8\" stroke=\"none\" points=\"{}\"/>\n",
            PALETTE[si % PALETTE.len()],
            path.join(" ")
        ));
        for i in 0..n {
            base[i] += fractions[i];
        }
    }
    out.push_str(&legend(&series.iter().map(|(n, _)| *n).collect::<Vec<_>>()));
    out.push_str("</svg>\n");
    out
}
