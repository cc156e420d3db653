//! Minimal SVG line charts, written as plain markup.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 300.0;
const LEFT: f64 = 56.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 32.0;
const BOTTOM: f64 = 36.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    /// One value per x position; gaps break the line.
    pub values: Vec<Option<f64>>,
    /// Stroke width, e.g. to encode a cluster size.
    pub weight: f64,
}

impl Series {
    pub fn new(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        Self {
            name: name.into(),
            values,
            weight: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineChart {
    pub title: String,
    pub x_labels: Vec<String>,
    pub y_label: String,
    /// Fixed upper bound of the y axis; the data maximum when unset.
    pub y_max: Option<f64>,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn nice_max(m: f64) -> f64 {
    if !(m > 0.0) {
        return 1.0;
    }
    let mag = 10f64.powf(m.log10().floor());
    [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|s| s * mag)
        .find(|&v| v >= m)
        .unwrap_or(10.0 * mag)
}

impl LineChart {
    fn body(&self, out: &mut String) {
        let plot_w = WIDTH - LEFT - RIGHT;
        let plot_h = HEIGHT - TOP - BOTTOM;
        let data_max = self
            .series
            .iter()
            .flat_map(|s| s.values.iter().flatten())
            .fold(0.0f64, |a, &b| a.max(b));
        let y_max = self.y_max.unwrap_or_else(|| nice_max(data_max));
        let n = self.x_labels.len();
        let x_at = |i: usize| {
            if n <= 1 {
                LEFT + plot_w / 2.0
            } else {
                LEFT + plot_w * i as f64 / (n - 1) as f64
            }
        };
        let y_at = |v: f64| TOP + plot_h * (1.0 - (v / y_max).clamp(0.0, 1.0));

        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="20" font-size="14" text-anchor="middle">{}</text>"#,
            LEFT + plot_w / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{LEFT:.1}" y="{TOP:.1}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="#999"/>"##
        );
        for t in 0..=4 {
            let v = y_max * t as f64 / 4.0;
            let y = y_at(v);
            let _ = writeln!(
                out,
                r##"<line x1="{LEFT:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#eee"/><text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"##,
                LEFT + plot_w,
                LEFT - 4.0,
                y + 3.0,
                trim_number(v)
            );
        }
        let step = n.div_ceil(12).max(1);
        for (i, label) in self.x_labels.iter().enumerate().step_by(step) {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"#,
                x_at(i),
                TOP + plot_h + 14.0,
                escape(label)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="12" y="{:.1}" font-size="11" transform="rotate(-90 12 {:.1})" text-anchor="middle">{}</text>"#,
            TOP + plot_h / 2.0,
            TOP + plot_h / 2.0,
            escape(&self.y_label)
        );
        for (k, s) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let mut run = Vec::new();
            let mut runs = Vec::new();
            for (i, v) in s.values.iter().enumerate() {
                match v {
                    Some(v) => run.push(format!("{:.1},{:.1}", x_at(i), y_at(*v))),
                    None => runs.push(std::mem::take(&mut run)),
                }
            }
            runs.push(run);
            for run in runs.into_iter().filter(|r| !r.is_empty()) {
                if run.len() == 1 {
                    let (x, y) = run[0].split_once(',').unwrap();
                    let _ = writeln!(out, r#"<circle cx="{x}" cy="{y}" r="2.5" fill="{color}"/>"#);
                } else {
                    let _ = writeln!(
                        out,
                        r#"<polyline fill="none" stroke="{color}" stroke-width="{:.1}" points="{}"/>"#,
                        s.weight,
                        run.join(" ")
                    );
                }
            }
            let ly = TOP + 12.0 + 14.0 * k as f64;
            let lx = WIDTH - RIGHT + 10.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}" font-size="10">{}</text>"#,
                lx + 16.0,
                lx + 20.0,
                ly + 3.0,
                escape(&s.name)
            );
        }
    }

    pub fn to_svg(&self) -> String {
        stack(std::slice::from_ref(self))
    }
}

fn trim_number(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Charts one above the other in a single document.
pub fn stack(charts: &[LineChart]) -> String {
    let total = HEIGHT * charts.len().max(1) as f64;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH:.0}\" height=\"{total:.0}\" viewBox=\"0 0 {WIDTH:.0} {total:.0}\" font-family=\"sans-serif\">\n"
    );
    for (i, c) in charts.iter().enumerate() {
        let _ = writeln!(out, r#"<g transform="translate(0 {:.0})">"#, HEIGHT * i as f64);
        c.body(&mut out);
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart() -> LineChart {
        LineChart {
            title: "a < b".into(),
            x_labels: vec!["2019".into(), "2020".into(), "2021".into()],
            y_label: "IS".into(),
            y_max: Some(1.0),
            series: vec![Series::new("IS", vec![None, Some(0.5), Some(1.0)])],
        }
    }

    #[test]
    fn renders_escaped_markup_with_gaps() {
        let svg = chart().to_svg();
        assert!(svg.starts_with("<svg "));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("points=\"273.0,148.0 490.0,32.0\""));
    }

    #[test]
    fn identical_input_identical_output() {
        assert_eq!(chart().to_svg(), chart().to_svg());
        assert_eq!(stack(&[chart(), chart()]).matches("<g ").count(), 2);
    }

    #[test]
    fn nice_axis_bounds() {
        assert_eq!(nice_max(0.0), 1.0);
        assert_eq!(nice_max(7.0), 10.0);
        assert_eq!(nice_max(120.0), 200.0);
        assert_eq!(nice_max(2.2), 2.5);
    }
}
