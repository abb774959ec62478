//! Static SVG charts with fixed-precision coordinates.

use std::fmt::Write;

const W: f64 = 800.0;
const H: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{:.2}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        W / 2.0,
        escape(title)
    );
    s
}

fn axes(s: &mut String, y_lo: f64, y_hi: f64, sy: &dyn Fn(f64) -> f64) {
    let _ = writeln!(
        s,
        "<line x1=\"{LEFT:.2}\" y1=\"{TOP:.2}\" x2=\"{LEFT:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n<line x1=\"{LEFT:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
        H - BOTTOM,
        H - BOTTOM,
        W - RIGHT,
        H - BOTTOM
    );
    for k in 0..=4 {
        let v = y_lo + (y_hi - y_lo) * k as f64 / 4.0;
        let y = sy(v);
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{LEFT:.2}\" y2=\"{y:.2}\" stroke=\"black\"/><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{v:.2}</text>",
            LEFT - 4.0,
            LEFT - 6.0,
            y + 4.0
        );
    }
}

fn legend(s: &mut String, names: &[&str]) {
    for (i, n) in names.iter().enumerate() {
        let x = LEFT + 10.0 + 150.0 * (i % 5) as f64;
        let y = H - 18.0 + if i >= 5 { 12.0 } else { 0.0 } - 6.0;
        let _ = writeln!(
            s,
            "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"12\" height=\"4\" fill=\"{}\"/><text x=\"{:.2}\" y=\"{y:.2}\">{}</text>",
            y - 6.0,
            PALETTE[i % PALETTE.len()],
            x + 16.0,
            escape(n)
        );
    }
}

/// Line chart over a categorical x axis; `None` breaks a line.
pub fn line_chart(title: &str, x_labels: &[String], series: &[(String, Vec<Option<f64>>)]) -> String {
    let (y_lo, y_hi) = range(series.iter().flat_map(|(_, v)| v.iter().flatten().copied()));
    let n = x_labels.len().max(2);
    let sx = |i: usize| LEFT + (W - LEFT - RIGHT) * i as f64 / (n - 1) as f64;
    let sy = |v: f64| TOP + (H - TOP - BOTTOM) * (y_hi - v) / (y_hi - y_lo);
    let mut s = open(title);
    axes(&mut s, y_lo, y_hi, &sy);
    let step = (x_labels.len() / 8).max(1);
    for (i, l) in x_labels.iter().enumerate().step_by(step) {
        let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>", sx(i), H - BOTTOM + 16.0, escape(l));
    }
    for (k, (_, vals)) in series.iter().enumerate() {
        let mut d = String::new();
        let mut pen = false;
        for (i, v) in vals.iter().enumerate() {
            match v.filter(|v| v.is_finite()) {
                Some(v) => {
                    let _ = write!(d, "{}{:.2},{:.2} ", if pen { "L" } else { "M" }, sx(i), sy(v));
                    pen = true;
                }
                None => pen = false,
            }
        }
        let _ = writeln!(s, "<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>", d.trim_end(), PALETTE[k % PALETTE.len()]);
    }
    legend(&mut s, &series.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}

/// Stacked density curves, one row per label, sharing the x axis.
pub fn ridgeline(title: &str, rows: &[(String, Vec<(f64, f64)>)]) -> String {
    let (x_lo, x_hi) = range(rows.iter().flat_map(|(_, c)| c.iter().map(|p| p.0)));
    let peak = rows.iter().flat_map(|(_, c)| c.iter().map(|p| p.1)).filter(|v| v.is_finite()).fold(0.0, f64::max).max(1e-12);
    let band = (H - TOP - BOTTOM) / (rows.len().max(1) as f64 + 1.0);
    let sx = |x: f64| LEFT + 40.0 + (W - LEFT - 40.0 - RIGHT) * (x - x_lo) / (x_hi - x_lo);
    let mut s = open(title);
    for (k, (label, curve)) in rows.iter().enumerate() {
        let base = TOP + band * (k as f64 + 2.0);
        let mut d = String::new();
        for (i, (x, y)) in curve.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, sx(*x), base - 2.0 * band * y / peak);
        }
        let _ = writeln!(
            s,
            "<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\"/><text x=\"{:.2}\" y=\"{base:.2}\" text-anchor=\"end\">{}</text>",
            d.trim_end(),
            PALETTE[k % PALETTE.len()],
            LEFT + 36.0,
            escape(label)
        );
    }
    for k in 0..=4 {
        let v = x_lo + (x_hi - x_lo) * k as f64 / 4.0;
        let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{v:.2}</text>", sx(v), H - BOTTOM + 16.0);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_deterministic_documents() {
        let x: Vec<String> = (0..10).map(|i| format!("200{i}Q1")).collect();
        let series = vec![
            ("GaR".to_string(), (0..10).map(|i| Some(i as f64 * 0.1)).collect()),
            ("GiS <joint>".to_string(), (0..10).map(|i| if i == 4 { None } else { Some(-(i as f64)) }).collect()),
        ];
        let a = line_chart("t", &x, &series);
        assert_eq!(a, line_chart("t", &x, &series));
        assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
        assert!(a.contains("&lt;joint&gt;"));
        assert_eq!(a.matches("<path").count(), 2);
        let r = ridgeline("d", &[("a".into(), vec![(0.0, 0.1), (1.0, 0.3)]), ("b".into(), vec![(0.0, 0.2), (1.0, 0.0)])]);
        assert_eq!(r.matches("<path").count(), 2);
        // flat input still yields a finite scale
        assert!(!line_chart("flat", &x[..1], &[("c".into(), vec![Some(1.0)])]).contains("NaN"));
    }
}
