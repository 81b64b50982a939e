//! Minimal SVG writers for convergence curves, partitions and interface values.

use std::fmt::Write as _;

use oras_core::partition::Partition;
use oras_core::schwarz::InterfaceMatrix;

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn header(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// Semilog plot of positive series against their index.
pub fn line_plot(x_label: &str, series: &[(&str, Vec<f64>)]) -> String {
    let positive = |v: &f64| v.is_finite() && *v > 0.0;
    let logs: Vec<f64> = series.iter().flat_map(|(_, s)| s.iter().filter(|v| positive(v)).map(|v| v.log10())).collect();
    let (lo, hi) = logs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() { (lo.floor(), hi.ceil().max(lo.floor() + 1.0)) } else { (-1.0, 0.0) };
    let len = series.iter().map(|(_, s)| s.len()).max().unwrap_or(1).max(2) - 1;
    let px = |i: usize| MARGIN + (W - 2.0 * MARGIN) * i as f64 / len as f64;
    let py = |l: f64| H - MARGIN - (H - 2.0 * MARGIN) * (l - lo) / (hi - lo);

    let mut s = header(W, H);
    writeln!(
        s,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>",
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    )
    .unwrap();
    for decade in lo as i32..=hi as i32 {
        let y = py(decade as f64);
        writeln!(
            s,
            "<line x1=\"{MARGIN}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/><text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">1e{decade}</text>",
            W - MARGIN,
            MARGIN - 6.0,
            y + 4.0
        )
        .unwrap();
    }
    writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{x_label} (0 to {len})</text>",
        W / 2.0,
        H - 16.0
    )
    .unwrap();
    for (k, (label, values)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| positive(v))
            .map(|(i, v)| format!("{:.1},{:.1}", px(i), py(v.log10())))
            .collect();
        writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            points.join(" ")
        )
        .unwrap();
        writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">{label}</text>",
            W - MARGIN - 150.0,
            MARGIN + 18.0 * (k as f64 + 1.0)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn to_canvas(coords: &[[f64; 2]]) -> impl Fn([f64; 2]) -> (f64, f64) {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &[x, y] in coords {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-12);
    let side = H - 2.0 * MARGIN;
    move |[x, y]| (MARGIN + side * (x - x0) / span, H - MARGIN - side * (y - y0) / span)
}

fn hue_color(i: usize) -> String {
    let hue = (i as f64 * 137.508) % 360.0;
    format!("hsl({hue:.0},65%,50%)")
}

/// Nodes coloured by owning subdomain; overlap nodes get a dark outline.
pub fn partition_plot(coords: &[[f64; 2]], partition: &Partition) -> String {
    let map = to_canvas(coords);
    let mut covered = vec![0usize; coords.len()];
    for i in 0..partition.n_subdomains() {
        for &v in partition.overlapped(i) {
            covered[v] += 1;
        }
    }
    let r = (3.0 * (400.0 / coords.len().max(1) as f64).sqrt()).clamp(0.8, 6.0);
    let mut s = header(H, H);
    for (v, &p) in coords.iter().enumerate() {
        let (x, y) = map(p);
        let stroke = if covered[v] > 1 { " stroke=\"#222\" stroke-width=\"0.6\"" } else { "" };
        writeln!(
            s,
            "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"{r:.2}\" fill=\"{}\"{stroke}/>",
            hue_color(partition.owner()[v])
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn diverging(v: f64, scale: f64) -> String {
    let t = if scale > 0.0 { (v / scale).clamp(-1.0, 1.0) } else { 0.0 };
    let fade = |c: f64| (255.0 * (1.0 - t.abs()) + c * t.abs()).round() as u8;
    let (r, g, b) = if t >= 0.0 { (fade(178.0), fade(24.0), fade(43.0)) } else { (fade(33.0), fade(102.0), fade(172.0)) };
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Interface values: self-loops as nodes, off-diagonal entries as edges; red positive, blue negative.
pub fn interface_heatmap(coords: &[[f64; 2]], interfaces: &[InterfaceMatrix]) -> String {
    let map = to_canvas(coords);
    let scale = interfaces
        .iter()
        .flat_map(|m| m.values.iter())
        .fold(0.0f64, |a, v| a.max(v.abs()));
    let mut s = header(H, H);
    for &p in coords {
        let (x, y) = map(p);
        writeln!(s, "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"0.8\" fill=\"#bbb\"/>").unwrap();
    }
    for m in interfaces {
        for (&(p, q), &v) in m.pattern.edges.iter().zip(&m.values) {
            if p < q {
                let ((x1, y1), (x2, y2)) = (map(coords[p]), map(coords[q]));
                writeln!(
                    s,
                    "<line x1=\"{x1:.1}\" y1=\"{y1:.1}\" x2=\"{x2:.1}\" y2=\"{y2:.1}\" stroke=\"{}\" stroke-width=\"2\"/>",
                    diverging(v, scale)
                )
                .unwrap();
            }
        }
        for (&(p, q), &v) in m.pattern.edges.iter().zip(&m.values) {
            if p == q {
                let (x, y) = map(coords[p]);
                writeln!(
                    s,
                    "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"3\" fill=\"{}\" stroke=\"#333\" stroke-width=\"0.4\"/>",
                    diverging(v, scale)
                )
                .unwrap();
            }
        }
    }
    writeln!(s, "<text x=\"8\" y=\"16\">max |L| = {scale:.4e}</text>").unwrap();
    s.push_str("</svg>\n");
    s
}
