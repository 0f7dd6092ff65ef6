//! Static SVG charts: ROC curves, loss histories and grouped bars.

use std::fmt::Write as _;

use crate::adversarial::LossRecord;

use super::RocPoint;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 52.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            name: name.into(),
            points,
            dashed: false,
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

fn bounds(series: &[Series]) -> ((f64, f64), (f64, f64)) {
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return ((0.0, 1.0), (0.0, 1.0));
    }
    let pad = |a: f64, b: f64| if b > a { (a, b) } else { (a - 0.5, b + 0.5) };
    (pad(x0, x1), pad(y0, y1))
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, (W - RIGHT + LEFT) / 2.0, escape(title));
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (l, r, t, b) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(out, r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#, r - l, b - t);
    for i in 0..=5 {
        let fx = f.x.0 + (f.x.1 - f.x.0) * i as f64 / 5.0;
        let fy = f.y.0 + (f.y.1 - f.y.0) * i as f64 / 5.0;
        let (x, y) = (f.px(fx), f.py(fy));
        let _ = writeln!(out, r##"<line x1="{x:.1}" y1="{b}" x2="{x:.1}" y2="{t}" stroke="#e0e0e0"/>"##);
        let _ = writeln!(out, r##"<line x1="{l}" y1="{y:.1}" x2="{r}" y2="{y:.1}" stroke="#e0e0e0"/>"##);
        let _ = writeln!(out, r#"<text x="{x:.1}" y="{}" text-anchor="middle">{}</text>"#, b + 16.0, tick(fx));
        let _ = writeln!(out, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, l - 6.0, y + 4.0, tick(fy));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (l + r) / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (t + b) / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 || v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn legend(out: &mut String, names: &[(String, &str, bool)]) {
    for (i, (name, color, dashed)) in names.iter().enumerate() {
        let y = TOP + 12.0 + 18.0 * i as f64;
        let x = W - RIGHT + 12.0;
        let dash = if *dashed { r#" stroke-dasharray="5,3""# } else { "" };
        let _ = writeln!(out, r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"{dash}/>"#, x + 22.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, x + 28.0, y + 4.0, escape(name));
    }
}

/// Line chart; axis ranges default to the data bounds.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], range: Option<((f64, f64), (f64, f64))>) -> String {
    let (x, y) = range.unwrap_or_else(|| bounds(series));
    let f = Frame { x, y };
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, x_label, y_label);
    let mut names = Vec::new();
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
            .collect();
        let dash = if s.dashed { r#" stroke-dasharray="5,3""# } else { "" };
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
            pts.join(" ")
        );
        names.push((s.name.clone(), color, s.dashed));
    }
    legend(&mut out, &names);
    out.push_str("</svg>\n");
    out
}

/// ROC curves with the chance diagonal.
pub fn roc_chart(curves: &[(String, Vec<RocPoint>)]) -> String {
    let mut series: Vec<Series> = curves
        .iter()
        .map(|(name, c)| Series::new(name.clone(), c.iter().map(|p| (p.fp_rate, p.tp_rate)).collect()))
        .collect();
    series.push(Series {
        name: "chance".into(),
        points: vec![(0.0, 0.0), (1.0, 1.0)],
        dashed: true,
    });
    line_chart("ROC", "FP rate", "TP rate", &series, Some(((0.0, 1.0), (0.0, 1.0))))
}

/// Block means of a history column, at most `max_points` per series.
fn thin(history: &[LossRecord], f: fn(&LossRecord) -> f64, max_points: usize) -> Vec<(f64, f64)> {
    let block = history.len().div_ceil(max_points.max(1)).max(1);
    history
        .chunks(block)
        .map(|c| {
            let x = c.iter().map(|r| r.iter as f64).sum::<f64>() / c.len() as f64;
            (x, c.iter().map(f).sum::<f64>() / c.len() as f64)
        })
        .collect()
}

/// Loss curves of a run, optionally overlaid with a baseline run (dashed).
pub fn loss_chart(history: &[LossRecord], baseline: Option<&[LossRecord]>) -> String {
    let cols: [(&str, fn(&LossRecord) -> f64); 3] = [("L_P", |r| r.l_p), ("L_D", |r| r.l_d), ("L_C", |r| r.l_c)];
    let mut series = Vec::new();
    for (name, f) in cols {
        series.push(Series::new(name, thin(history, f, 400)));
    }
    if let Some(b) = baseline {
        for (name, f) in cols {
            series.push(Series {
                name: format!("{name} baseline"),
                points: thin(b, f, 400),
                dashed: true,
            });
        }
    }
    line_chart("Training losses", "iteration", "loss (nats)", &series, None)
}

/// Vertical bars, one per `(label, value)`, values in `[0, 1]`.
pub fn bar_chart(title: &str, y_label: &str, bars: &[(String, f64)]) -> String {
    let f = Frame { x: (0.0, 1.0), y: (0.0, 1.0) };
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, "", y_label);
    let n = bars.len().max(1) as f64;
    let slot = (W - LEFT - RIGHT) / n;
    for (i, (label, v)) in bars.iter().enumerate() {
        let x = LEFT + slot * i as f64 + slot * 0.15;
        let top = f.py(v.clamp(0.0, 1.0));
        let _ = writeln!(
            out,
            r#"<rect x="{x:.1}" y="{top:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
            slot * 0.7,
            H - BOTTOM - top,
            PALETTE[0]
        );
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{v:.3}</text>"#, x + slot * 0.35, top - 4.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{}" text-anchor="middle" font-size="10">{}</text>"#, x + slot * 0.35, H - BOTTOM + 30.0, escape(label));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_well_formed() {
        let curve = vec![
            RocPoint { threshold: f64::INFINITY, fp_rate: 0.0, tp_rate: 0.0 },
            RocPoint { threshold: 0.5, fp_rate: 0.1, tp_rate: 0.8 },
            RocPoint { threshold: f64::NEG_INFINITY, fp_rate: 1.0, tp_rate: 1.0 },
        ];
        let svg = roc_chart(&[("model".into(), curve)]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        let hist: Vec<LossRecord> = (0..1000)
            .map(|i| LossRecord { iter: i, l_p: 0.7, l_d: 1.6, l_c: 1.6, v: -0.9 })
            .collect();
        let svg = loss_chart(&hist, Some(&hist));
        assert_eq!(svg.matches("<polyline").count(), 6);
        let svg = bar_chart("acc <by> motion", "accuracy", &[("sitting".into(), 0.9), ("walking".into(), 0.8)]);
        assert!(svg.contains("acc &lt;by&gt; motion"));
        assert_eq!(svg.matches("<rect").count(), 4);
    }
}
