//! Minimal SVG charts: axes with ticks, polylines, markers and bars.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

pub const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

#[derive(Debug, Clone, Copy)]
pub enum Marker {
    Dot,
    Cross,
}

enum Item {
    Line(Vec<(f64, f64)>, &'static str),
    Points(Vec<(f64, f64)>, &'static str, Marker),
    /// `(x0, x1, height)`
    Bars(Vec<(f64, f64, f64)>, &'static str),
}

pub struct Chart {
    title: String,
    x_label: String,
    y_label: String,
    log_x: bool,
    items: Vec<Item>,
    legend: Vec<(String, &'static str)>,
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let m = if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        format!("{}", (v * 1e6).round() / 1e6)
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Chart {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Chart {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_x: false,
            items: Vec::new(),
            legend: Vec::new(),
        }
    }

    pub fn log_x(mut self) -> Self {
        self.log_x = true;
        self
    }

    pub fn line(&mut self, pts: Vec<(f64, f64)>, color: &'static str) -> &mut Self {
        self.items.push(Item::Line(pts, color));
        self
    }

    pub fn points(&mut self, pts: Vec<(f64, f64)>, color: &'static str, m: Marker) -> &mut Self {
        self.items.push(Item::Points(pts, color, m));
        self
    }

    pub fn bars(&mut self, bars: Vec<(f64, f64, f64)>, color: &'static str) -> &mut Self {
        self.items.push(Item::Bars(bars, color));
        self
    }

    pub fn legend(&mut self, label: &str, color: &'static str) -> &mut Self {
        self.legend.push((label.into(), color));
        self
    }

    fn xs_ys(&self) -> (Vec<f64>, Vec<f64>) {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for it in &self.items {
            match it {
                Item::Line(p, _) | Item::Points(p, _, _) => {
                    for &(x, y) in p {
                        xs.push(x);
                        ys.push(y);
                    }
                }
                Item::Bars(b, _) => {
                    for &(x0, x1, h) in b {
                        xs.extend([x0, x1]);
                        ys.extend([0.0, h]);
                    }
                }
            }
        }
        let keep = |v: &f64| v.is_finite() && (!self.log_x || *v > 0.0);
        let xs = xs.into_iter().filter(keep).collect();
        let ys = ys.into_iter().filter(|v| v.is_finite()).collect();
        (xs, ys)
    }

    pub fn render(&self) -> String {
        let (xs, ys) = self.xs_ys();
        let range = |v: &[f64]| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo <= 0.0 {
                let d = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
                (lo - d, hi + d)
            } else {
                (lo, hi)
            }
        };
        let (mut x0, mut x1) = range(&xs);
        if self.log_x {
            x0 = x0.log10().floor();
            x1 = x1.log10().ceil();
            if x1 <= x0 {
                x1 = x0 + 1.0;
            }
        }
        let (y0, y1) = range(&ys);
        let ystep = nice_step(y1 - y0);
        let (y0, y1) = ((y0 / ystep).floor() * ystep, (y1 / ystep).ceil() * ystep);
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let log_x = self.log_x;
        let sx = move |x: f64| {
            let x = if log_x { x.log10() } else { x };
            LEFT + (x - x0) / (x1 - x0) * pw
        };
        let sy = move |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            esc(&self.title)
        );
        // y ticks and grid
        let n_y = ((y1 - y0) / ystep).round() as i64;
        for i in 0..=n_y {
            let y = y0 + i as f64 * ystep;
            let py = sy(y);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ddd"/><text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"##,
                W - RIGHT,
                LEFT - 6.0,
                py + 4.0,
                fmt_tick(y)
            );
        }
        // x ticks
        let ticks: Vec<f64> = if log_x {
            (x0 as i64..=x1 as i64).map(|e| 10f64.powi(e as i32)).collect()
        } else {
            let step = nice_step(x1 - x0);
            let first = (x0 / step).ceil() as i64;
            let last = (x1 / step).floor() as i64;
            (first..=last).map(|k| k as f64 * step).collect()
        };
        for x in ticks {
            let px = sx(x);
            let _ = writeln!(
                s,
                r##"<line x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{:.2}" stroke="#eee"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                H - BOTTOM,
                H - BOTTOM + 16.0,
                fmt_tick(x)
            );
        }
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            H - 16.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text transform="translate(18 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
            TOP + ph / 2.0,
            esc(&self.y_label)
        );

        let finite = |&(x, y): &(f64, f64)| x.is_finite() && y.is_finite() && (!log_x || x > 0.0);
        for it in &self.items {
            match it {
                Item::Bars(bars, c) => {
                    for &(a, b, h) in bars {
                        let (px, py) = (sx(a), sy(h));
                        let _ = writeln!(
                            s,
                            r#"<rect x="{px:.2}" y="{py:.2}" width="{:.2}" height="{:.2}" fill="{c}" fill-opacity="0.5" stroke="{c}"/>"#,
                            sx(b) - px,
                            sy(y0.max(0.0)) - py
                        );
                    }
                }
                Item::Line(pts, c) => {
                    let path: Vec<String> = pts
                        .iter()
                        .filter(|p| finite(p))
                        .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                        .collect();
                    if path.len() > 1 {
                        let _ = writeln!(
                            s,
                            r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#,
                            path.join(" ")
                        );
                    }
                }
                Item::Points(pts, c, m) => {
                    for &(x, y) in pts.iter().filter(|p| finite(p)) {
                        let (px, py) = (sx(x), sy(y));
                        match m {
                            Marker::Dot => {
                                let _ = writeln!(
                                    s,
                                    r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{c}"/>"#
                                );
                            }
                            Marker::Cross => {
                                let _ = writeln!(
                                    s,
                                    r#"<path d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}" stroke="{c}" stroke-width="2"/>"#,
                                    px - 5.0,
                                    py - 5.0,
                                    px + 5.0,
                                    py + 5.0,
                                    px - 5.0,
                                    py + 5.0,
                                    px + 5.0,
                                    py - 5.0
                                );
                            }
                        }
                    }
                }
            }
        }
        for (i, (label, c)) in self.legend.iter().enumerate() {
            let y = TOP + 16.0 + 18.0 * i as f64;
            let x = W - RIGHT - 170.0;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{:.1}" width="12" height="12" fill="{c}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                y - 10.0,
                x + 18.0,
                y,
                esc(label)
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
    fn renders_well_formed() {
        let mut c = Chart::new("t <x>", "x", "y").log_x();
        c.line(vec![(1e-7, 1.0), (1e-5, -2.0)], COLORS[0])
            .points(vec![(1e-6, 0.0)], COLORS[1], Marker::Cross)
            .legend("AH", COLORS[0]);
        let s = c.render();
        assert!(s.starts_with("<svg"));
        assert!(s.trim_end().ends_with("</svg>"));
        assert!(s.contains("<polyline"));
        assert!(s.contains("t &lt;x&gt;"));
        assert!(!s.contains("NaN"));
    }

    #[test]
    fn empty_chart() {
        let s = Chart::new("", "", "").render();
        assert!(s.contains("</svg>"));
    }

    #[test]
    fn nice_steps() {
        assert_eq!(nice_step(6.0), 1.0);
        assert_eq!(nice_step(60.0), 10.0);
        assert_eq!(nice_step(12.0), 2.0);
    }
}
