//! Minimal SVG line plots (mean curves with ±1 std whiskers).

use std::fmt::Write;

pub struct Series {
    pub label: String,
    pub color: &'static str,
    /// `(x, mean, std)`.
    pub points: Vec<(f64, f64, f64)>,
}

pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub series: Vec<Series>,
    /// Dashed horizontal reference lines `(y, label, color)`.
    pub hlines: Vec<(f64, String, &'static str)>,
    /// Vertical reference lines `(x, label)`.
    pub vlines: Vec<(f64, String)>,
    /// Upper end of the y axis; larger values are drawn at the edge.
    pub y_max: Option<f64>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

fn nice_ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / count as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(t);
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.0e}")
    }
}

impl Plot {
    pub fn render(&self) -> String {
        let tx = |x: f64| if self.log_x { x.log10() } else { x };
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for s in &self.series {
            for &(x, m, sd) in &s.points {
                if x.is_finite() && m.is_finite() {
                    xs.push(tx(x));
                    ys.push(m - sd.max(0.0));
                    ys.push(m + sd.max(0.0));
                }
            }
        }
        xs.extend(self.vlines.iter().map(|v| tx(v.0)));
        ys.extend(self.hlines.iter().map(|h| h.0));
        let (mut x0, mut x1) = bounds(&xs);
        let (mut y0, mut y1) = bounds(&ys);
        if x1 <= x0 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 <= y0 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        if let Some(m) = self.y_max {
            y1 = y1.min(m);
        }
        let pad = 0.05 * (y1 - y0);
        y0 = if y0 >= 0.0 { 0.0 } else { y0 - pad };
        y1 += pad;
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let px = |x: f64| LEFT + (tx(x) - x0) / (x1 - x0) * pw;
        let py = |y: f64| TOP + (1.0 - (y.clamp(y0, y1) - y0) / (y1 - y0)) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
        );
        // axes ticks
        let xticks: Vec<f64> = if self.log_x {
            (x0.ceil() as i32..=x1.floor() as i32).map(|e| 10f64.powi(e)).collect()
        } else {
            nice_ticks(x0, x1, 6)
        };
        for t in xticks {
            let x = px(t);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#444"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
                TOP + ph,
                TOP + ph + 5.0,
                TOP + ph + 19.0,
                fmt_tick(t)
            );
        }
        for t in nice_ticks(y0, y1, 6) {
            let y = py(t);
            let _ = writeln!(
                s,
                r##"<line x1="{:.1}" y1="{y:.1}" x2="{LEFT}" y2="{y:.1}" stroke="#444"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
                LEFT - 5.0,
                LEFT - 8.0,
                y + 4.0,
                fmt_tick(t)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            H - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        let mut legend_y = TOP + 10.0;
        let legend_x = LEFT + pw + 12.0;
        for (y, label, color) in &self.hlines {
            let yy = py(*y);
            let _ = writeln!(
                s,
                r#"<line x1="{LEFT}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="{color}" stroke-dasharray="6 4"/>"#,
                LEFT + pw
            );
            legend(&mut s, legend_x, legend_y, color, label, true);
            legend_y += 18.0;
        }
        for (x, label) in &self.vlines {
            let xx = px(*x);
            let _ = writeln!(
                s,
                r##"<line x1="{xx:.1}" y1="{TOP}" x2="{xx:.1}" y2="{:.1}" stroke="#888"/><text x="{:.1}" y="{:.1}" fill="#555">{}</text>"##,
                TOP + ph,
                xx + 4.0,
                TOP + 14.0,
                escape(label)
            );
        }
        for series in &self.series {
            let pts: Vec<&(f64, f64, f64)> =
                series.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
            if pts.is_empty() {
                continue;
            }
            let path: Vec<String> = pts
                .iter()
                .map(|p| format!("{:.1},{:.1}", px(p.0), py(p.1)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
                path.join(" "),
                series.color
            );
            for p in pts {
                let (x, lo, hi) = (px(p.0), py(p.1 - p.2), py(p.1 + p.2));
                let _ = writeln!(
                    s,
                    r#"<line x1="{x:.1}" y1="{lo:.1}" x2="{x:.1}" y2="{hi:.1}" stroke="{c}"/><line x1="{:.1}" y1="{lo:.1}" x2="{:.1}" y2="{lo:.1}" stroke="{c}"/><line x1="{:.1}" y1="{hi:.1}" x2="{:.1}" y2="{hi:.1}" stroke="{c}"/>"#,
                    x - 3.0,
                    x + 3.0,
                    x - 3.0,
                    x + 3.0,
                    c = series.color
                );
            }
            legend(&mut s, legend_x, legend_y, series.color, &series.label, false);
            legend_y += 18.0;
        }
        s.push_str("</svg>\n");
        s
    }
}

fn legend(s: &mut String, x: f64, y: f64, color: &str, label: &str, dashed: bool) {
    let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
    let _ = writeln!(
        s,
        r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
        x + 22.0,
        x + 28.0,
        y + 4.0,
        escape(label)
    );
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().filter(|x| x.is_finite()).fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_well_formed_document() {
        let p = Plot {
            title: "t < 1".into(),
            x_label: "d".into(),
            y_label: "loss".into(),
            log_x: true,
            series: vec![Series {
                label: "loss".into(),
                color: "#1f77b4",
                points: vec![(25.0, f64::NAN, 0.0), (400.0, 2.0, 0.5), (12800.0, 1.0, 0.1)],
            }],
            hlines: vec![(1.0, "null".into(), "#d62728")],
            vlines: vec![(200.0, "d/n = 1".into())],
            y_max: Some(3.0),
        };
        let svg = p.render();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("t &lt; 1"));
        assert!(!svg.contains("NaN"));
        assert_eq!(svg, p.render());
    }
}
