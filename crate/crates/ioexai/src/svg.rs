//! Standalone SVG charts: bars, grouped bars, box summaries and a heat
//! table. Output depends only on the inputs; coordinates are printed with
//! three decimals so reruns are byte-identical.

use std::fmt::Write;

use ioexai_core::dataset::Summary;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 80.0;
const PALETTE: [&str; 6] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#b07aa1"];

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

struct Canvas {
    body: String,
    width: f64,
    height: f64,
}

impl Canvas {
    fn new(title: &str, width: f64, height: f64) -> Self {
        let mut c = Self { body: String::new(), width, height };
        c.text(width / 2.0, 24.0, "middle", 16.0, title);
        c
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.3}" y="{y:.3}" width="{:.3}" height="{:.3}" fill="{fill}"/>"#,
            w.max(0.0),
            h.max(0.0)
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke="{stroke}" stroke-width="1"/>"#
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, size: f64, text: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.3}" y="{y:.3}" text-anchor="{anchor}" font-family="sans-serif" font-size="{size:.0}">{}</text>"#,
            escape(text)
        );
    }

    fn rotated(&mut self, x: f64, y: f64, text: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.3}" y="{y:.3}" text-anchor="end" font-family="sans-serif" font-size="11" transform="rotate(-30 {x:.3} {y:.3})">{}</text>"#,
            escape(text)
        );
    }

    fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n<rect x=\"0\" y=\"0\" width=\"{w:.0}\" height=\"{h:.0}\" fill=\"#ffffff\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

/// Value axis covering `lo..hi` (always including 0 for bar charts).
struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn covering(values: impl Iterator<Item = f64>, include_zero: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if include_zero {
            lo = lo.min(0.0);
            hi = hi.max(0.0);
        }
        if hi - lo < 1e-12 {
            hi = lo + 1.0;
        }
        Self { lo, hi }
    }

    fn y(&self, v: f64) -> f64 {
        let plot = HEIGHT - TOP - BOTTOM;
        TOP + plot * (self.hi - v) / (self.hi - self.lo)
    }

    fn draw(&self, c: &mut Canvas, label: &str) {
        c.line(LEFT, TOP, LEFT, HEIGHT - BOTTOM, "#333333");
        for k in 0..=4 {
            let v = self.lo + (self.hi - self.lo) * f64::from(k) / 4.0;
            let y = self.y(v);
            c.line(LEFT - 4.0, y, WIDTH - RIGHT, y, "#dddddd");
            c.text(LEFT - 6.0, y + 4.0, "end", 10.0, &format!("{v:.3}"));
        }
        let _ = writeln!(
            c.body,
            r#"<text x="16" y="{:.3}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {:.3})">{}</text>"#,
            (TOP + HEIGHT - BOTTOM) / 2.0,
            (TOP + HEIGHT - BOTTOM) / 2.0,
            escape(label)
        );
        let zero = self.y(0.0_f64.clamp(self.lo, self.hi));
        c.line(LEFT, zero, WIDTH - RIGHT, zero, "#333333");
    }
}

/// One bar per `(label, value)`. Non-finite values leave an empty slot.
pub fn bar_chart(title: &str, y_label: &str, bars: &[(String, f64)]) -> String {
    let series = vec![(String::new(), bars.iter().map(|b| b.1).collect())];
    let groups: Vec<String> = bars.iter().map(|b| b.0.clone()).collect();
    grouped_bars(title, y_label, &groups, &series)
}

/// `series[s].1[g]` is the bar of series `s` in group `g`.
pub fn grouped_bars(title: &str, y_label: &str, groups: &[String], series: &[(String, Vec<f64>)]) -> String {
    let mut c = Canvas::new(title, WIDTH, HEIGHT);
    let axis = Axis::covering(series.iter().flat_map(|s| s.1.iter().copied()), true);
    axis.draw(&mut c, y_label);
    let n_groups = groups.len().max(1) as f64;
    let slot = (WIDTH - LEFT - RIGHT) / n_groups;
    let n_series = series.len().max(1) as f64;
    let bar = slot * 0.8 / n_series;
    for (g, name) in groups.iter().enumerate() {
        let x0 = LEFT + slot * g as f64 + slot * 0.1;
        for (s, (_, values)) in series.iter().enumerate() {
            let Some(&v) = values.get(g) else { continue };
            if !v.is_finite() {
                continue;
            }
            let (a, b) = (axis.y(v), axis.y(0.0_f64.clamp(axis.lo, axis.hi)));
            c.rect(x0 + bar * s as f64, a.min(b), bar, (a - b).abs(), PALETTE[s % PALETTE.len()]);
        }
        c.rotated(x0 + slot * 0.4, HEIGHT - BOTTOM + 14.0, name);
    }
    if series.len() > 1 || series.first().is_some_and(|s| !s.0.is_empty()) {
        for (s, (name, _)) in series.iter().enumerate() {
            let x = LEFT + 10.0 + 130.0 * s as f64;
            c.rect(x, HEIGHT - 18.0, 10.0, 10.0, PALETTE[s % PALETTE.len()]);
            c.text(x + 14.0, HEIGHT - 9.0, "start", 11.0, name);
        }
    }
    c.finish()
}

/// Box-and-whisker per distribution: whiskers at min/max, box p25..p75,
/// a line at the median and a dot at the mean.
pub fn box_summary(title: &str, y_label: &str, boxes: &[(String, Summary)]) -> String {
    let mut c = Canvas::new(title, WIDTH, HEIGHT);
    let axis = Axis::covering(boxes.iter().flat_map(|b| [b.1.min, b.1.max]), false);
    axis.draw(&mut c, y_label);
    let slot = (WIDTH - LEFT - RIGHT) / boxes.len().max(1) as f64;
    for (i, (name, s)) in boxes.iter().enumerate() {
        let mid = LEFT + slot * (i as f64 + 0.5);
        let half = slot * 0.25;
        let colour = PALETTE[i % PALETTE.len()];
        c.line(mid, axis.y(s.min), mid, axis.y(s.max), "#333333");
        c.line(mid - half / 2.0, axis.y(s.min), mid + half / 2.0, axis.y(s.min), "#333333");
        c.line(mid - half / 2.0, axis.y(s.max), mid + half / 2.0, axis.y(s.max), "#333333");
        c.rect(mid - half, axis.y(s.p75), 2.0 * half, axis.y(s.p25) - axis.y(s.p75), colour);
        c.line(mid - half, axis.y(s.p50), mid + half, axis.y(s.p50), "#000000");
        let _ = writeln!(c.body, r##"<circle cx="{mid:.3}" cy="{:.3}" r="3" fill="#000000"/>"##, axis.y(s.mean));
        c.rotated(mid, HEIGHT - BOTTOM + 14.0, name);
    }
    c.finish()
}

fn heat_colour(v: f64) -> String {
    if !v.is_finite() {
        return "#cccccc".into();
    }
    // Blue for −1, white for 0, red for +1.
    let t = v.clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

/// Square table of `values` (row-major) with one labelled cell per entry.
pub fn heat_table(title: &str, names: &[String], values: &[f64]) -> String {
    let k = names.len();
    let cell = 60.0;
    let margin = 90.0;
    let side = margin + cell * k as f64 + 20.0;
    let mut c = Canvas::new(title, side, side + 20.0);
    for (i, name) in names.iter().enumerate() {
        c.text(margin - 6.0, margin + cell * (i as f64 + 0.5) + 4.0, "end", 11.0, name);
        c.text(margin + cell * (i as f64 + 0.5), margin - 8.0, "middle", 11.0, name);
    }
    for i in 0..k {
        for j in 0..k {
            let v = values.get(i * k + j).copied().unwrap_or(f64::NAN);
            let (x, y) = (margin + cell * j as f64, margin + cell * i as f64);
            c.rect(x, y, cell, cell, &heat_colour(v));
            let label = if v.is_finite() { format!("{v:.3}") } else { "n/a".into() };
            c.text(x + cell / 2.0, y + cell / 2.0 + 4.0, "middle", 11.0, &label);
        }
    }
    c.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parses(svg: &str) -> roxmltree::Document<'_> {
        roxmltree::Document::parse(svg).unwrap()
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(escape(r#"a<b & "c">'"#), "a&lt;b &amp; &quot;c&quot;&gt;&apos;");
    }

    #[test]
    fn charts_are_valid_xml() {
        let bars = vec![("et <dl>".to_string(), 8.29), ("ada".to_string(), f64::NAN), ("neg".into(), -1.0)];
        let doc_src = bar_chart("rates & more", "Mbps", &bars);
        let doc = parses(&doc_src);
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        // Background plus two finite bars.
        assert_eq!(doc.descendants().filter(|n| n.has_tag_name("rect")).count(), 3);
        assert!(doc.descendants().any(|n| n.text() == Some("et <dl>")));

        let s = Summary { count: 3, min: 1.0, p25: 2.0, p50: 3.0, p75: 4.0, max: 5.0, mean: 3.0 };
        parses(&box_summary("cqi", "CQI", &[("truth".into(), s), ("et".into(), s)]));
        parses(&grouped_bars("g", "y", &["a".into()], &[("x".into(), vec![1.0]), ("y".into(), vec![2.0])]));
        let heat = heat_table("corr", &["sinr".into(), "rsrq".into()], &[1.0, 0.27, 0.27, f64::NAN]);
        let doc = parses(&heat);
        assert!(doc.descendants().any(|n| n.text() == Some("0.270")));
        assert!(doc.descendants().any(|n| n.text() == Some("n/a")));
    }

    #[test]
    fn empty_inputs_still_render() {
        parses(&bar_chart("none", "y", &[]));
        parses(&box_summary("none", "y", &[]));
        parses(&heat_table("none", &[], &[]));
    }

    #[test]
    fn colours() {
        assert_eq!(heat_colour(1.0), "#ff0000");
        assert_eq!(heat_colour(0.0), "#ffffff");
        assert_eq!(heat_colour(-1.0), "#0000ff");
        assert_eq!(heat_colour(f64::NAN), "#cccccc");
    }
}
