//! Minimal static SVG line plots.

use std::fmt::Write;

const W: f64 = 760.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Dashed,
    Markers,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// (lower, upper) per point, drawn as a shaded band or error bars
    pub band: Option<Vec<(f64, f64)>>,
    pub style: Style,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>, style: Style) -> Self {
        Self {
            name: name.into(),
            points,
            band: None,
            style,
        }
    }

    pub fn with_band(mut self, band: Vec<(f64, f64)>) -> Self {
        self.band = Some(band);
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_log: bool,
    pub y_log: bool,
    pub series: Vec<Series>,
    /// shown under the axes and repeated in <desc>
    pub footer: Vec<String>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            if let Some(u) = tr(v, log) {
                lo = lo.min(u);
                hi = hi.max(u);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 * lo.abs().max(1e-300) || hi == lo {
            let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
            lo -= pad;
            hi += pad;
        }
        let pad = 0.04 * (hi - lo);
        Self {
            lo: lo - pad,
            hi: hi + pad,
            log,
        }
    }

    fn frac(&self, v: f64) -> Option<f64> {
        tr(v, self.log).map(|u| (u - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo.ceil() as i64, self.hi.floor() as i64);
            let step = ((b - a) / 6 + 1).max(1);
            return (a..=b)
                .step_by(step as usize)
                .map(|e| (e as f64, format!("1e{e}")))
                .collect();
        }
        let span = self.hi - self.lo;
        let raw = span / 6.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| span / s <= 7.0)
            .unwrap_or(10.0 * mag);
        let mut out = Vec::new();
        let mut t = (self.lo / step).ceil() * step;
        while t <= self.hi + 1e-9 * step {
            out.push((t, fmt_tick(t, step)));
            t += step;
        }
        out
    }
}

fn tr(v: f64, log: bool) -> Option<f64> {
    if !v.is_finite() {
        return None;
    }
    if log {
        (v > 0.0).then(|| v.log10())
    } else {
        Some(v)
    }
}

fn fmt_tick(t: f64, step: f64) -> String {
    let t = if t.abs() < 1e-9 * step { 0.0 } else { t };
    if step >= 1.0 && t.abs() < 1e6 {
        format!("{t:.0}")
    } else if step >= 1e-3 && t.abs() < 1e6 {
        let digits = (-step.log10().floor()).max(0.0) as usize;
        format!("{t:.digits$}")
    } else {
        format!("{t:.2e}")
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

impl Plot {
    pub fn render(&self) -> String {
        let xs = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.0));
        let ys = self.series.iter().flat_map(|s| {
            let band = s.band.iter().flatten().flat_map(|b| [b.0, b.1]);
            s.points.iter().map(|p| p.1).chain(band)
        });
        let ax = Axis::fit(xs, self.x_log);
        let ay = Axis::fit(ys, self.y_log);
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let px = |v: f64| ax.frac(v).map(|f| LEFT + f * pw);
        let py = |v: f64| ay.frac(v).map(|f| TOP + (1.0 - f) * ph);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, "<desc>{}</desc>", esc(&self.footer.join("; ")));
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + pw / 2.0,
            esc(&self.title)
        );
        for (t, label) in ax.ticks() {
            let x = LEFT + (t - ax.lo) / (ax.hi - ax.lo) * pw;
            let _ = writeln!(
                s,
                "<line x1=\"{x:.1}\" y1=\"{TOP}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#eee\"/><text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{label}</text>",
                TOP + ph,
                TOP + ph + 16.0
            );
        }
        for (t, label) in ay.ticks() {
            let y = TOP + (1.0 - (t - ay.lo) / (ay.hi - ay.lo)) * ph;
            let _ = writeln!(
                s,
                "<line x1=\"{LEFT}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#eee\"/><text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{label}</text>",
                LEFT + pw,
                LEFT - 6.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            s,
            "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"#333\"/>"
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            TOP + ph + 36.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            esc(&self.y_label)
        );

        for (k, ser) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            if let Some(band) = &ser.band {
                let pairs: Vec<(f64, f64, f64)> = ser
                    .points
                    .iter()
                    .zip(band)
                    .filter_map(|(p, b)| {
                        Some((px(p.0)?, py(b.0.max(f64::MIN_POSITIVE))?, py(b.1)?))
                    })
                    .collect();
                if ser.style == Style::Markers {
                    for (x, lo, hi) in &pairs {
                        let _ = writeln!(
                            s,
                            r#"<line x1="{x:.1}" y1="{lo:.1}" x2="{x:.1}" y2="{hi:.1}" stroke="{color}"/>"#
                        );
                    }
                } else if pairs.len() > 1 {
                    let mut poly: Vec<String> = pairs
                        .iter()
                        .map(|(x, _, hi)| format!("{x:.1},{hi:.1}"))
                        .collect();
                    poly.extend(
                        pairs
                            .iter()
                            .rev()
                            .map(|(x, lo, _)| format!("{x:.1},{lo:.1}")),
                    );
                    let _ = writeln!(
                        s,
                        r#"<polygon points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#,
                        poly.join(" ")
                    );
                }
            }
            let pts: Vec<(f64, f64)> = ser
                .points
                .iter()
                .filter_map(|p| Some((px(p.0)?, py(p.1)?)))
                .collect();
            match ser.style {
                Style::Markers => {
                    for (x, y) in &pts {
                        let _ = writeln!(
                            s,
                            r#"<circle cx="{x:.1}" cy="{y:.1}" r="3.5" fill="{color}"/>"#
                        );
                    }
                }
                Style::Line | Style::Dashed => {
                    let dash = if ser.style == Style::Dashed {
                        r#" stroke-dasharray="6 4""#
                    } else {
                        ""
                    };
                    let line: Vec<String> =
                        pts.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
                    let _ = writeln!(
                        s,
                        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>"#,
                        line.join(" ")
                    );
                }
            }
            let ly = TOP + 14.0 + 20.0 * k as f64;
            let lx = LEFT + pw + 14.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="3"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                lx + 22.0,
                lx + 28.0,
                ly + 4.0,
                esc(&ser.name)
            );
        }
        for (k, line) in self.footer.iter().enumerate() {
            let _ = writeln!(
                s,
                "<text x=\"8\" y=\"{:.1}\" font-size=\"9\" fill=\"#666\">{}</text>",
                H - 18.0 + 10.0 * k as f64 - 10.0 * (self.footer.len().saturating_sub(2)) as f64,
                esc(line)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_series_and_footer() {
        let p = Plot {
            title: "decay".into(),
            x_label: "t".into(),
            y_label: "E rho".into(),
            y_log: true,
            series: vec![
                Series::new("mc", vec![(0.0, 1.0), (1.0, 0.5), (2.0, 0.25)], Style::Line)
                    .with_band(vec![(0.9, 1.1), (0.4, 0.6), (0.2, 0.3)]),
                Series::new("bound", vec![(0.0, 1.0), (2.0, 0.1)], Style::Dashed),
            ],
            footer: vec!["config_sha256=abc".into()],
            ..Default::default()
        };
        let svg = p.render();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("config_sha256=abc"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<polygon").count(), 1);
    }

    #[test]
    fn non_positive_values_are_skipped_on_log_axes() {
        let p = Plot {
            y_log: true,
            series: vec![Series::new(
                "z",
                vec![(0.0, 0.0), (1.0, -1.0), (2.0, 3.0)],
                Style::Markers,
            )],
            ..Default::default()
        };
        assert_eq!(p.render().matches("<circle").count(), 1);
    }

    #[test]
    fn linear_ticks_are_round() {
        let a = Axis::fit([0.0, 4.0].into_iter(), false);
        let labels: Vec<String> = a.ticks().into_iter().map(|t| t.1).collect();
        assert!(
            labels.contains(&"0".to_string()) && labels.contains(&"4".to_string()),
            "{labels:?}"
        );
    }
}
