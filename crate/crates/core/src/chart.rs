//! Minimal SVG 1.1 line charts for share trajectories.

use std::fmt::Write as _;

/// Version tag written into every chart as a comment.
pub const GENERATOR: &str = concat!("repinf-chart ", env!("CARGO_PKG_VERSION"));

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

/// Chart contents: simulated series as polylines, optional observed points
/// as markers, optional vertical marker at the train/validation boundary.
#[derive(Debug, Clone, Default)]
pub struct LineChart {
    pub title: String,
    pub lines: Vec<Series>,
    pub markers: Vec<Series>,
    pub boundary: Option<usize>,
    pub x_labels: Vec<String>,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 450.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

impl LineChart {
    fn len(&self) -> usize {
        self.lines
            .iter()
            .chain(&self.markers)
            .map(|s| s.values.len())
            .max()
            .unwrap_or(0)
    }

    /// Shares live in `[0, 1]`; the y axis always spans that range.
    pub fn to_svg(&self) -> String {
        let len = self.len().max(2);
        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let px = |t: usize| MARGIN_LEFT + plot_w * t as f64 / (len - 1) as f64;
        let py = |v: f64| MARGIN_TOP + plot_h * (1.0 - v.clamp(0.0, 1.0));

        let mut s = String::new();
        s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        writeln!(s, "<!-- generator: {GENERATOR} -->").unwrap();
        writeln!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
        )
        .unwrap();
        writeln!(
            s,
            "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
        )
        .unwrap();
        writeln!(
            s,
            "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
            MARGIN_LEFT + plot_w / 2.0,
            escape(&self.title)
        )
        .unwrap();

        // axes and horizontal grid
        for tick in 0..=4 {
            let v = tick as f64 / 4.0;
            let y = py(v);
            writeln!(
                s,
                "<line x1=\"{MARGIN_LEFT}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>",
                MARGIN_LEFT + plot_w
            )
            .unwrap();
            writeln!(
                s,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{v:.2}</text>",
                MARGIN_LEFT - 6.0,
                y + 4.0
            )
            .unwrap();
        }
        writeln!(
            s,
            "<line x1=\"{MARGIN_LEFT}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
            MARGIN_TOP + plot_h,
            MARGIN_LEFT + plot_w,
            MARGIN_TOP + plot_h
        )
        .unwrap();
        writeln!(
            s,
            "<line x1=\"{MARGIN_LEFT}\" y1=\"{MARGIN_TOP}\" x2=\"{MARGIN_LEFT}\" y2=\"{:.2}\" stroke=\"black\"/>",
            MARGIN_TOP + plot_h
        )
        .unwrap();
        let step = (len / 8).max(1);
        for (t, label) in self.x_labels.iter().enumerate().step_by(step) {
            writeln!(
                s,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
                px(t),
                MARGIN_TOP + plot_h + 18.0,
                escape(label)
            )
            .unwrap();
        }

        if let Some(b) = self.boundary {
            let x = px(b);
            writeln!(
                s,
                "<line x1=\"{x:.2}\" y1=\"{MARGIN_TOP}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#555555\" stroke-dasharray=\"6,4\"/>",
                MARGIN_TOP + plot_h
            )
            .unwrap();
            writeln!(
                s,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\">validation</text>",
                x + 4.0,
                MARGIN_TOP + 12.0
            )
            .unwrap();
        }

        let mut legend_y = MARGIN_TOP + 10.0;
        let legend_x = MARGIN_LEFT + plot_w + 15.0;
        for (k, series) in self.lines.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let points: Vec<String> = series
                .values
                .iter()
                .enumerate()
                .map(|(t, &v)| format!("{:.2},{:.2}", px(t), py(v)))
                .collect();
            writeln!(
                s,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
                points.join(" ")
            )
            .unwrap();
            writeln!(
                s,
                "<text x=\"{legend_x:.2}\" y=\"{legend_y:.2}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>",
                escape(&series.name)
            )
            .unwrap();
            legend_y += 18.0;
        }
        for (k, series) in self.markers.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            for (t, &v) in series.values.iter().enumerate() {
                writeln!(
                    s,
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"none\" stroke=\"{color}\"/>",
                    px(t),
                    py(v)
                )
                .unwrap();
            }
            writeln!(
                s,
                "<text x=\"{legend_x:.2}\" y=\"{legend_y:.2}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">o {}</text>",
                escape(&series.name)
            )
            .unwrap();
            legend_y += 18.0;
        }
        s.push_str("</svg>\n");
        s
    }
}
