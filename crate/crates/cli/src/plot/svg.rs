//! Minimal deterministic SVG canvas with linear or log axes.

use std::fmt::Write as _;

/// Six significant digits, shortest round-trip form of the rounded value.
pub fn num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return "0".to_owned();
    }
    let rounded: f64 = format!("{x:.5e}").parse().unwrap_or(x);
    format!("{rounded}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[derive(Debug, Clone)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub log: bool,
    pub label: String,
    pub ticks: Vec<f64>,
}

impl Axis {
    /// Linear axis over the data range with a small pad and 1-2-5 ticks.
    pub fn linear(values: impl IntoIterator<Item = f64>, label: &str, include_zero: bool) -> Self {
        let (mut lo, mut hi) = bounds(values);
        if include_zero {
            lo = lo.min(0.0);
            hi = hi.max(0.0);
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        let (lo, hi) = (lo - if include_zero && lo == 0.0 { 0.0 } else { pad }, hi + pad);
        Self {
            lo,
            hi,
            log: false,
            label: label.to_owned(),
            ticks: nice_ticks(lo, hi),
        }
    }

    /// Log axis; ticks at the supplied values (or decades when none are given).
    pub fn log(values: impl IntoIterator<Item = f64>, label: &str, ticks: Option<Vec<f64>>) -> Self {
        let (lo, hi) = bounds(values.into_iter().filter(|v| *v > 0.0));
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo / 2.0, hi * 2.0) };
        let span = (hi / lo).ln();
        let (lo, hi) = (lo * (-0.05 * span).exp(), hi * (0.05 * span).exp());
        let ticks = ticks.unwrap_or_else(|| {
            let (a, b) = (lo.log10().floor() as i32, hi.log10().ceil() as i32);
            let mantissas: &[f64] = if b - a <= 2 { &[1.0, 2.0, 5.0] } else { &[1.0] };
            (a..=b)
                .flat_map(|e| mantissas.iter().map(move |m| m * 10f64.powi(e)))
                .filter(|t| (lo..=hi).contains(t))
                .collect()
        });
        Self {
            lo,
            hi,
            log: true,
            label: label.to_owned(),
            ticks,
        }
    }

    fn unit(&self, v: f64) -> f64 {
        if self.log {
            (v.ln() - self.lo.ln()) / (self.hi.ln() - self.lo.ln())
        } else {
            (v - self.lo) / (self.hi - self.lo)
        }
    }
}

fn bounds(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values.into_iter().filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

pub struct Canvas {
    width: f64,
    height: f64,
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
    title: String,
    x: Axis,
    y: Axis,
    body: String,
    legend: Vec<(String, String, bool)>,
}

impl Canvas {
    pub fn new(width: f64, height: f64, title: &str, x: Axis, y: Axis) -> Self {
        Self {
            width,
            height,
            left: 70.0,
            right: 20.0,
            top: 40.0,
            bottom: 55.0,
            title: title.to_owned(),
            x,
            y,
            body: String::new(),
            legend: Vec::new(),
        }
    }

    pub fn px(&self, v: f64) -> f64 {
        self.left + self.x.unit(v) * (self.width - self.left - self.right)
    }

    pub fn py(&self, v: f64) -> f64 {
        self.height - self.bottom - self.y.unit(v) * (self.height - self.top - self.bottom)
    }

    fn path_data(&self, points: &[[f64; 2]], closed: bool) -> String {
        let mut d = String::new();
        for (i, p) in points.iter().enumerate() {
            let _ = write!(
                d,
                "{}{} {}",
                if i == 0 { "M" } else { " L" },
                num(self.px(p[0])),
                num(self.py(p[1]))
            );
        }
        if closed {
            d.push_str(" Z");
        }
        d
    }

    pub fn path(&mut self, class: &str, points: &[[f64; 2]], closed: bool, color: &str, dashed: bool) {
        let d = self.path_data(points, closed);
        let _ = writeln!(
            self.body,
            r#"<path class="{class}" d="{d}" fill="none" stroke="{color}" stroke-width="1.5"{}/>"#,
            if dashed { r#" stroke-dasharray="5 3""# } else { "" }
        );
    }

    pub fn circle(&mut self, class: &str, at: [f64; 2], r: f64, color: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle class="{class}" cx="{}" cy="{}" r="{}" fill="{color}"/>"#,
            num(self.px(at[0])),
            num(self.py(at[1])),
            num(r)
        );
    }

    pub fn square(&mut self, class: &str, at: [f64; 2], half: f64, color: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect class="{class}" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            num(self.px(at[0]) - half),
            num(self.py(at[1]) - half),
            num(2.0 * half),
            num(2.0 * half)
        );
    }

    /// Bar from `y = base` to `y = value` centred on `x`, `width` in data units.
    pub fn bar(&mut self, class: &str, x: f64, width: f64, base: f64, value: f64, color: &str) {
        let (x0, x1) = (self.px(x - width / 2.0), self.px(x + width / 2.0));
        let (y0, y1) = (self.py(base), self.py(value));
        let _ = writeln!(
            self.body,
            r#"<rect class="{class}" x="{}" y="{}" width="{}" height="{}" fill="{color}"/>"#,
            num(x0),
            num(y0.min(y1)),
            num(x1 - x0),
            num((y1 - y0).abs())
        );
    }

    pub fn legend(&mut self, label: &str, color: &str, dashed: bool) {
        self.legend.push((label.to_owned(), color.to_owned(), dashed));
    }

    pub fn finish(self) -> String {
        let (w, h) = (self.width, self.height);
        let (x0, x1) = (self.left, w - self.right);
        let (y0, y1) = (h - self.bottom, self.top);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="12">"#,
            num(w),
            num(h),
            num(w),
            num(h)
        );
        let _ = writeln!(s, r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#, num(w), num(h));
        let _ = writeln!(
            s,
            r#"<text class="title" x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            num(w / 2.0),
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r##"<path class="axes" d="M{} {} L{} {} L{} {}" fill="none" stroke="#000"/>"##,
            num(x0),
            num(y1),
            num(x0),
            num(y0),
            num(x1),
            num(y0)
        );
        for &t in &self.x.ticks {
            if t < self.x.lo || t > self.x.hi {
                continue;
            }
            let px = self.px(t);
            let _ = writeln!(
                s,
                r##"<path class="tick" d="M{} {} L{} {}" stroke="#000"/><text x="{}" y="{}" text-anchor="middle">{}</text>"##,
                num(px),
                num(y0),
                num(px),
                num(y0 + 5.0),
                num(px),
                num(y0 + 18.0),
                num(t)
            );
        }
        for &t in &self.y.ticks {
            if t < self.y.lo || t > self.y.hi {
                continue;
            }
            let py = self.py(t);
            let _ = writeln!(
                s,
                r##"<path class="tick" d="M{} {} L{} {}" stroke="#000"/><text x="{}" y="{}" text-anchor="end">{}</text>"##,
                num(x0 - 5.0),
                num(py),
                num(x0),
                num(py),
                num(x0 - 8.0),
                num(py + 4.0),
                num(t)
            );
        }
        let _ = writeln!(
            s,
            r#"<text class="xlabel" x="{}" y="{}" text-anchor="middle">{}</text>"#,
            num((x0 + x1) / 2.0),
            num(h - 12.0),
            escape(&self.x.label)
        );
        let _ = writeln!(
            s,
            r#"<text class="ylabel" x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            num((y0 + y1) / 2.0),
            num((y0 + y1) / 2.0),
            escape(&self.y.label)
        );
        s.push_str(&self.body);
        for (i, (label, color, dashed)) in self.legend.iter().enumerate() {
            let ly = self.top + 8.0 + 16.0 * i as f64;
            let lx = x1 - 185.0;
            let _ = writeln!(
                s,
                r#"<path class="legend" d="M{} {} L{} {}" stroke="{color}" stroke-width="2"{}/><text x="{}" y="{}">{}</text>"#,
                num(lx),
                num(ly),
                num(lx + 20.0),
                num(ly),
                if *dashed { r#" stroke-dasharray="5 3""# } else { "" },
                num(lx + 25.0),
                num(ly + 4.0),
                escape(label)
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
    fn six_significant_digits() {
        assert_eq!(num(123.456789), "123.457");
        assert_eq!(num(0.1 + 0.2), "0.3");
        assert_eq!(num(-1.0e-7), "-0.0000001");
        assert_eq!(num(2.0), "2");
    }

    #[test]
    fn ticks_cover_range() {
        assert_eq!(nice_ticks(0.0, 10.0), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
    }
}
