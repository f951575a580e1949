//! Minimal static SVG line charts (no scripting) for risk traces and
//! per-particle panels.

use std::fmt::Write as _;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Dashed lines are used for overlays/predictions.
    pub dashed: bool,
}

#[derive(Debug, Clone)]
pub struct SvgChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
    pub width: f64,
    pub height: f64,
}

impl SvgChart {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_x: true,
            log_y: false,
            series: Vec::new(),
            width: 840.0,
            height: 520.0,
        }
    }

    pub fn push_series(&mut self, label: impl Into<String>, xs: Vec<f64>, ys: Vec<f64>) {
        self.series.push(Series {
            label: label.into(),
            xs,
            ys,
            dashed: false,
        });
    }

    pub fn push_dashed(&mut self, label: impl Into<String>, xs: Vec<f64>, ys: Vec<f64>) {
        self.series.push(Series {
            label: label.into(),
            xs,
            ys,
            dashed: true,
        });
    }

    fn transform(v: f64, log: bool) -> Option<f64> {
        if log {
            if v > 0.0 {
                Some(v.log10())
            } else {
                None
            }
        } else {
            Some(v)
        }
    }

    /// Render the chart as a standalone SVG document.
    pub fn render(&self) -> String {
        let (ml, mr, mt, mb) = (72.0, 150.0, 42.0, 58.0);
        let pw = self.width - ml - mr;
        let ph = self.height - mt - mb;

        // data ranges in (possibly log-transformed) coordinates
        let mut xmin = f64::INFINITY;
        let mut xmax = f64::NEG_INFINITY;
        let mut ymin = f64::INFINITY;
        let mut ymax = f64::NEG_INFINITY;
        for s in &self.series {
            for (&x, &y) in s.xs.iter().zip(&s.ys) {
                if let (Some(tx), Some(ty)) =
                    (Self::transform(x, self.log_x), Self::transform(y, self.log_y))
                {
                    xmin = xmin.min(tx);
                    xmax = xmax.max(tx);
                    ymin = ymin.min(ty);
                    ymax = ymax.max(ty);
                }
            }
        }
        if !xmin.is_finite() || xmin == xmax {
            xmin = 0.0;
            xmax = 1.0;
        }
        if !ymin.is_finite() || ymin == ymax {
            ymin = 0.0;
            ymax = 1.0;
        }
        let ypad = 0.04 * (ymax - ymin);
        ymin -= ypad;
        ymax += ypad;

        let sx = |tx: f64| ml + (tx - xmin) / (xmax - xmin) * pw;
        let sy = |ty: f64| mt + ph - (ty - ymin) / (ymax - ymin) * ph;

        let mut svg = String::new();
        let _ = write!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            w = self.width,
            h = self.height
        );
        svg.push_str("<style>text{font-family:sans-serif;font-size:13px;} .title{font-size:15px;font-weight:bold;} .axis{stroke:#000;stroke-width:1;} .grid{stroke:#ccc;stroke-width:0.5;stroke-dasharray:2,4;}</style>");
        let _ = write!(
            svg,
            r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#,
            self.width, self.height
        );
        let _ = write!(
            svg,
            r#"<text class="title" x="{}" y="24" text-anchor="middle">{}</text>"#,
            ml + pw / 2.0,
            xml_escape(&self.title)
        );

        // ticks
        let x_ticks = ticks(xmin, xmax, self.log_x);
        let y_ticks = ticks(ymin, ymax, self.log_y);
        for &t in &x_ticks {
            let x = sx(t);
            let _ = write!(
                svg,
                r#"<line class="grid" x1="{x}" y1="{mt}" x2="{x}" y2="{}"/>"#,
                mt + ph
            );
            let label = if self.log_x { pow_label(t) } else { trim_num(t) };
            let _ = write!(
                svg,
                r#"<text x="{x}" y="{}" text-anchor="middle">{label}</text>"#,
                mt + ph + 18.0
            );
        }
        for &t in &y_ticks {
            let y = sy(t);
            let _ = write!(
                svg,
                r#"<line class="grid" x1="{ml}" y1="{y}" x2="{}" y2="{y}"/>"#,
                ml + pw
            );
            let label = if self.log_y { pow_label(t) } else { trim_num(t) };
            let _ = write!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="end">{label}</text>"#,
                ml - 6.0,
                y + 4.0
            );
        }
        // axes
        let _ = write!(
            svg,
            r#"<line class="axis" x1="{ml}" y1="{}" x2="{}" y2="{}"/>"#,
            mt + ph,
            ml + pw,
            mt + ph
        );
        let _ = write!(
            svg,
            r#"<line class="axis" x1="{ml}" y1="{mt}" x2="{ml}" y2="{}"/>"#,
            mt + ph
        );
        let _ = write!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            ml + pw / 2.0,
            mt + ph + 42.0,
            xml_escape(&self.x_label)
        );
        let _ = write!(
            svg,
            r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
            mt + ph / 2.0,
            mt + ph / 2.0,
            xml_escape(&self.y_label)
        );

        // polylines
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let mut points = String::new();
            for (&x, &y) in s.xs.iter().zip(&s.ys) {
                if let (Some(tx), Some(ty)) =
                    (Self::transform(x, self.log_x), Self::transform(y, self.log_y))
                {
                    let _ = write!(points, "{:.2},{:.2} ", sx(tx), sy(ty));
                }
            }
            let dash = if s.dashed { r#" stroke-dasharray="6,4""# } else { "" };
            let _ = write!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
                points.trim_end()
            );
            // legend entry
            let ly = mt + 14.0 + 18.0 * i as f64;
            let _ = write!(
                svg,
                r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>"#,
                ml + pw + 10.0,
                ml + pw + 34.0
            );
            let _ = write!(
                svg,
                r#"<text x="{}" y="{}">{}</text>"#,
                ml + pw + 40.0,
                ly + 4.0,
                xml_escape(&s.label)
            );
        }
        svg.push_str("</svg>");
        svg
    }
}

/// Stack charts vertically into one SVG document.
pub fn render_stacked(charts: &[SvgChart]) -> String {
    let width = charts.iter().map(|c| c.width).fold(0.0, f64::max);
    let height: f64 = charts.iter().map(|c| c.height).sum();
    let mut svg = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let mut y = 0.0;
    for c in charts {
        let inner = c.render();
        // strip the outer svg element and translate
        let body = inner
            .strip_prefix('<')
            .and_then(|s| s.split_once('>'))
            .map(|(_, rest)| rest.strip_suffix("</svg>").unwrap_or(rest))
            .unwrap_or("");
        let _ = write!(svg, r#"<g transform="translate(0 {y})">{body}</g>"#);
        y += c.height;
    }
    svg.push_str("</svg>");
    svg
}

fn ticks(lo: f64, hi: f64, log: bool) -> Vec<f64> {
    if log {
        let a = lo.ceil() as i64;
        let b = hi.floor() as i64;
        if b >= a && (b - a) <= 24 {
            let step = 1 + (b - a) as usize / 12;
            return (a..=b).step_by(step).map(|k| k as f64).collect();
        }
    }
    let span = hi - lo;
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|s| s * mag)
        .find(|s| span / s <= 7.0)
        .unwrap_or(mag * 10.0);
    let first = (lo / step).ceil() * step;
    let mut out = Vec::new();
    let mut t = first;
    while t <= hi + 1e-12 * span.abs() {
        out.push(t);
        t += step;
    }
    out
}

fn pow_label(exp: f64) -> String {
    if (exp - exp.round()).abs() < 1e-9 {
        format!("1e{}", exp.round() as i64)
    } else {
        format!("{exp:.2}")
    }
}

fn trim_num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
