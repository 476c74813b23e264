//! Self-contained SVG charts. The plotted table is embedded as a CSV
//! comment so a chart can be diffed and re-read without the CSV next to it.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde_json::Value;

use crate::report::{cell_text, Chart, Table};

const W: f64 = 720.0;
const PANEL_H: f64 = 300.0;
const TOP: f64 = 48.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Fixed-precision coordinates so output bytes do not depend on float noise.
fn f(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        String::from("0.00")
    } else {
        s
    }
}

fn tick_label(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e9 {
        format!("{x:.0}")
    } else if x.abs() >= 0.01 {
        format!("{x:.3}")
    } else {
        format!("{x:.2e}")
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    v.as_f64().filter(|x| x.is_finite())
}

/// Axis bounds padded to include zero when close, never degenerate.
fn bounds(vals: impl Iterator<Item = f64>, with_zero: bool) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if with_zero {
        lo = lo.min(0.0);
        hi = hi.max(0.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    (lo, hi)
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

struct Frame {
    y0: f64,
    xlo: f64,
    xhi: f64,
    ylo: f64,
    yhi: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.xlo) / (self.xhi - self.xlo) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + PANEL_H - (y - self.ylo) / (self.yhi - self.ylo) * PANEL_H
    }

    fn axes(&self, out: &mut String, label: &str, xticks: Option<&[f64]>) {
        let (x0, x1) = (LEFT, W - RIGHT);
        let _ = writeln!(out, r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#444"/>"##, f(x0), f(self.y0), f(x1 - x0), f(PANEL_H));
        for t in ticks(self.ylo, self.yhi) {
            let y = self.py(t);
            let _ = writeln!(out, r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#ddd"/>"##, f(x0), f(y), f(x1), f(y));
            let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end" font-size="10">{}</text>"#, f(x0 - 4.0), f(y + 3.0), tick_label(t));
        }
        if self.ylo < 0.0 && self.yhi > 0.0 {
            let y = self.py(0.0);
            let _ = writeln!(out, r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#888"/>"##, f(x0), f(y), f(x1), f(y));
        }
        if let Some(xt) = xticks {
            for &t in xt {
                let x = self.px(t);
                let _ = writeln!(
                    out,
                    r#"<text x="{}" y="{}" text-anchor="middle" font-size="10">{}</text>"#,
                    f(x),
                    f(self.y0 + PANEL_H + 14.0),
                    tick_label(t)
                );
            }
        }
        if !label.is_empty() {
            let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="12" font-weight="bold">{}</text>"#, f(x0), f(self.y0 - 6.0), esc(label));
        }
    }
}

/// Distinct values of a column in first-seen order.
fn distinct(t: &Table, col: Option<usize>) -> Vec<String> {
    let mut seen = Vec::new();
    match col {
        None => seen.push(String::new()),
        Some(c) => {
            for r in &t.rows {
                let v = cell_text(&r[c]);
                if !seen.contains(&v) {
                    seen.push(v);
                }
            }
        }
    }
    seen
}

fn matches(r: &[Value], col: Option<usize>, v: &str) -> bool {
    col.is_none_or(|c| cell_text(&r[c]) == v)
}

pub fn render(title: &str, t: &Table, chart: &Chart) -> String {
    let facet_col = match chart {
        Chart::Lines { facet, .. } | Chart::Bars { facet, .. } => facet.as_deref().and_then(|c| t.col(c)),
    };
    let facets = distinct(t, facet_col);
    let height = TOP + facets.len() as f64 * (PANEL_H + BOTTOM) + 10.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif">"#,
        f(W),
        f(height),
        f(W),
        f(height)
    );
    let _ = writeln!(out, "<!-- data\n{}-->", t.to_csv().replace("--", "- -"));
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" font-size="15">{}</text>"#, f(LEFT), esc(title));
    for (i, fv) in facets.iter().enumerate() {
        let y0 = TOP + 12.0 + i as f64 * (PANEL_H + BOTTOM);
        let rows: Vec<&Vec<Value>> = t.rows.iter().filter(|r| matches(r, facet_col, fv)).collect();
        match chart {
            Chart::Lines { x, ys, se, series, .. } => lines(&mut out, t, &rows, y0, fv, x, ys, se.as_deref(), series.as_deref()),
            Chart::Bars { x, y, se, .. } => bars(&mut out, t, &rows, y0, fv, x, y, se.as_deref()),
        }
    }
    out.push_str("</svg>\n");
    out
}

type Points = Vec<(f64, f64, Option<f64>)>;

#[allow(clippy::too_many_arguments)]
fn lines(out: &mut String, t: &Table, rows: &[&Vec<Value>], y0: f64, label: &str, x: &str, ys: &[String], se: Option<&str>, series: Option<&str>) {
    let xc = t.col(x);
    let sec = se.and_then(|c| t.col(c));
    let serc = series.and_then(|c| t.col(c));
    let mut curves: BTreeMap<usize, (String, Points)> = BTreeMap::new();
    let names = if serc.is_some() { distinct_rows(rows, serc) } else { Vec::new() };
    for r in rows {
        let Some(xv) = xc.and_then(|c| as_f64(&r[c])) else { continue };
        for (k, yname) in ys.iter().enumerate() {
            let Some(yv) = t.col(yname).and_then(|c| as_f64(&r[c])) else { continue };
            let (key, name) = match serc {
                Some(c) => {
                    let n = cell_text(&r[c]);
                    (names.iter().position(|m| *m == n).unwrap_or(0) * ys.len() + k, n)
                }
                None => (k, yname.clone()),
            };
            let sev = sec.and_then(|c| as_f64(&r[c]));
            curves.entry(key).or_insert_with(|| (name, Vec::new())).1.push((xv, yv, sev));
        }
    }
    let all = || curves.values().flat_map(|(_, p)| p.iter());
    let (xlo, xhi) = bounds(all().map(|p| p.0), false);
    let (ylo, yhi) = bounds(all().flat_map(|p| [p.1 - 1.96 * p.2.unwrap_or(0.0), p.1 + 1.96 * p.2.unwrap_or(0.0)]), true);
    let fr = Frame { y0, xlo, xhi, ylo, yhi };
    fr.axes(out, label, Some(&ticks(xlo, xhi)));
    for (n, (key, (name, pts))) in curves.iter().enumerate() {
        let colour = PALETTE[key % PALETTE.len()];
        if pts.iter().any(|p| p.2.is_some()) {
            let upper = pts.iter().map(|p| format!("{},{}", f(fr.px(p.0)), f(fr.py(p.1 + 1.96 * p.2.unwrap_or(0.0)))));
            let lower = pts.iter().rev().map(|p| format!("{},{}", f(fr.px(p.0)), f(fr.py(p.1 - 1.96 * p.2.unwrap_or(0.0)))));
            let poly: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(out, r#"<polygon points="{}" fill="{colour}" fill-opacity="0.15" stroke="none"/>"#, poly.join(" "));
        }
        let line: Vec<String> = pts.iter().map(|p| format!("{},{}", f(fr.px(p.0)), f(fr.py(p.1)))).collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#, line.join(" "));
        legend(out, y0, n, colour, name);
    }
}

fn distinct_rows(rows: &[&Vec<Value>], col: Option<usize>) -> Vec<String> {
    let mut seen = Vec::new();
    if let Some(c) = col {
        for r in rows {
            let v = cell_text(&r[c]);
            if !seen.contains(&v) {
                seen.push(v);
            }
        }
    }
    seen
}

fn legend(out: &mut String, y0: f64, n: usize, colour: &str, name: &str) {
    let y = y0 + 10.0 + n as f64 * 16.0;
    let x = W - RIGHT + 10.0;
    let _ = writeln!(out, r#"<rect x="{}" y="{}" width="10" height="10" fill="{colour}"/>"#, f(x), f(y - 9.0));
    let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="10">{}</text>"#, f(x + 14.0), f(y), esc(name));
}

#[allow(clippy::too_many_arguments)]
fn bars(out: &mut String, t: &Table, rows: &[&Vec<Value>], y0: f64, label: &str, x: &str, y: &str, se: Option<&str>) {
    let (xc, yc, sec) = (t.col(x), t.col(y), se.and_then(|c| t.col(c)));
    let items: Vec<(String, Option<f64>, Option<f64>)> = rows
        .iter()
        .map(|r| {
            (
                xc.map(|c| cell_text(&r[c])).unwrap_or_default(),
                yc.and_then(|c| as_f64(&r[c])),
                sec.and_then(|c| as_f64(&r[c])),
            )
        })
        .collect();
    let (ylo, yhi) = bounds(
        items.iter().flat_map(|(_, v, e)| {
            let v = v.unwrap_or(0.0);
            let e = 1.96 * e.unwrap_or(0.0);
            [v - e, v + e]
        }),
        true,
    );
    let n = items.len().max(1) as f64;
    let fr = Frame { y0, xlo: 0.0, xhi: n, ylo, yhi };
    fr.axes(out, label, None);
    let slot = (W - LEFT - RIGHT) / n;
    let base = fr.py(0.0);
    for (i, (cat, v, e)) in items.iter().enumerate() {
        let cx = fr.px(i as f64 + 0.5);
        let v = v.unwrap_or(0.0);
        let top = fr.py(v);
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
            f(cx - slot * 0.35),
            f(top.min(base)),
            f(slot * 0.7),
            f((top - base).abs()),
            PALETTE[0]
        );
        if let Some(e) = e {
            let (a, b) = (fr.py(v - 1.96 * e), fr.py(v + 1.96 * e));
            let _ = writeln!(out, r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#222"/>"##, f(cx), f(a), f(cx), f(b));
        }
        let ly = y0 + PANEL_H + 12.0;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="9" text-anchor="end" transform="rotate(-35 {} {})">{}</text>"#,
            f(cx),
            f(ly),
            f(cx),
            f(ly),
            esc(cat)
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> Table {
        Table {
            preset: "t".into(),
            columns: vec!["h".into(), "estimate".into(), "se".into(), "term".into()],
            rows: (0..4).map(|h| vec![Value::from(h), Value::from(h as f64 * 0.5), Value::from(0.1), Value::from("a--b")]).collect(),
        }
    }

    #[test]
    fn comment_never_contains_double_dash() {
        let svg = render("x", &table(), &Chart::Lines { x: "h".into(), ys: vec!["estimate".into()], se: Some("se".into()), series: None, facet: None });
        let body = &svg[svg.find("<!-- ").unwrap() + 4..svg.find("-->").unwrap()];
        assert!(!body.contains("--"));
        assert!(svg.contains("<polygon"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn flat_bars_still_render() {
        let mut t = table();
        for r in t.rows.iter_mut() {
            r[1] = Value::from(0.0);
        }
        let svg = render("x", &t, &Chart::Bars { x: "term".into(), y: "estimate".into(), se: None, facet: None });
        assert_eq!(svg.matches("<rect").count(), 2 + 4);
    }
}
