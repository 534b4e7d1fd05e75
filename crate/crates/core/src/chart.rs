//! Minimal SVG line charts: axes, ticks, polylines and a legend, written as
//! plain strings with no rendering dependency. CSV stays the canonical
//! output; these charts exist for quick visual inspection.

/// One named polyline.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub width: usize,
    pub height: usize,
}

const PALETTE: [&str; 6] = ["#1f6fb2", "#d1495b", "#3c8d53", "#8a5fbf", "#c77d2e", "#4f4f4f"];
const MARGIN_LEFT: f64 = 62.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 34.0;
const MARGIN_BOTTOM: f64 = 46.0;

impl LineChart {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        LineChart {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            series: Vec::new(),
            width: 720,
            height: 420,
        }
    }

    pub fn add_series(&mut self, label: &str, points: Vec<(f64, f64)>) -> &mut Self {
        self.series.push(Series { label: label.to_string(), points });
        self
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                if x.is_finite() && y.is_finite() {
                    xs.push(x);
                    ys.push(y);
                }
            }
        }
        if xs.is_empty() {
            return (0.0, 1.0, 0.0, 1.0);
        }
        let (mut x0, mut x1) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        let (mut y0, mut y1) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        if x0 == x1 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y0 == y1 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        // A touch of headroom so curves stay off the frame.
        let pad = 0.04 * (y1 - y0);
        (x0, x1, y0 - pad, y1 + pad)
    }

    /// Renders the chart to a standalone SVG document.
    pub fn render(&self) -> String {
        let (w, h) = (self.width as f64, self.height as f64);
        let (x0, x1, y0, y1) = self.bounds();
        let plot_w = w - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = h - MARGIN_TOP - MARGIN_BOTTOM;
        let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
        let sy = |y: f64| MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

        let mut svg = String::new();
        svg.push_str(&format!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
            self.width, self.height, self.width, self.height
        ));
        svg.push('\n');
        svg.push_str(&format!(r#"<rect width="{w}" height="{h}" fill="white"/>"#));
        svg.push('\n');
        svg.push_str(&format!(
            r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14" font-weight="bold">{}</text>"#,
            w / 2.0,
            escape(&self.title)
        ));
        svg.push('\n');

        // Frame
        svg.push_str(&format!(
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#333" stroke-width="1"/>"##,
            MARGIN_LEFT, MARGIN_TOP, plot_w, plot_h
        ));
        svg.push('\n');

        // Ticks and grid lines
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let px = sx(fx);
            svg.push_str(&format!(
                r##"<line x1="{px}" y1="{}" x2="{px}" y2="{}" stroke="#ccc" stroke-width="0.5"/>"##,
                MARGIN_TOP,
                MARGIN_TOP + plot_h
            ));
            svg.push_str(&format!(
                r#"<text x="{px}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="10">{}</text>"#,
                MARGIN_TOP + plot_h + 16.0,
                tick_label(fx)
            ));
            svg.push('\n');
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let py = sy(fy);
            svg.push_str(&format!(
                r##"<line x1="{}" y1="{py}" x2="{}" y2="{py}" stroke="#ccc" stroke-width="0.5"/>"##,
                MARGIN_LEFT,
                MARGIN_LEFT + plot_w
            ));
            svg.push_str(&format!(
                r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="10">{}</text>"#,
                MARGIN_LEFT - 6.0,
                py + 3.0,
                tick_label(fy)
            ));
            svg.push('\n');
        }

        // Axis labels
        svg.push_str(&format!(
            r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#,
            MARGIN_LEFT + plot_w / 2.0,
            h - 10.0,
            escape(&self.x_label)
        ));
        svg.push_str(&format!(
            r#"<text x="14" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11" transform="rotate(-90 14 {})">{}</text>"#,
            MARGIN_TOP + plot_h / 2.0,
            MARGIN_TOP + plot_h / 2.0,
            escape(&self.y_label)
        ));
        svg.push('\n');

        // Series polylines and legend
        for (idx, series) in self.series.iter().enumerate() {
            let color = PALETTE[idx % PALETTE.len()];
            let pts: Vec<String> = series
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            svg.push_str(&format!(
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.6"/>"#,
                pts.join(" ")
            ));
            svg.push('\n');
            let ly = MARGIN_TOP + 14.0 + 16.0 * idx as f64;
            svg.push_str(&format!(
                r#"<rect x="{}" y="{}" width="12" height="3" fill="{color}"/>"#,
                MARGIN_LEFT + 10.0,
                ly - 4.0
            ));
            svg.push_str(&format!(
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10">{}</text>"#,
                MARGIN_LEFT + 27.0,
                ly,
                escape(&series.label)
            ));
            svg.push('\n');
        }

        svg.push_str("</svg>\n");
        svg
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (0.01..10000.0).contains(&a) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_wellformed_svg() {
        let mut chart = LineChart::new("demo", "x", "y");
        chart.add_series("a", vec![(0.0, 0.0), (1.0, 1.0), (2.0, 0.5)]);
        chart.add_series("b", vec![(0.0, 1.0), (2.0, -1.0)]);
        let svg = chart.render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("demo"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let mut chart = LineChart::new("d", "x", "y");
        chart.add_series("s", vec![(0.0, 0.3), (1.0, 0.7)]);
        assert_eq!(chart.render(), chart.render());
    }
}
