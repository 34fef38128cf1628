//! Static SVG line plot of a trace: every signal divided by its value at
//! the first sample (or by its maximum when that is zero), against time.

use std::fmt::Write;

use steadyscan::trace::Trace;

const W: f64 = 900.0;
const H: f64 = 480.0;
const PAD: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub fn render(trace: &Trace, title: &str) -> String {
    let t0 = trace.times.first().copied().unwrap_or(0.0);
    let t1 = trace.times.last().copied().unwrap_or(1.0).max(t0 + f64::MIN_POSITIVE);
    let series: Vec<Vec<f64>> = (0..trace.names.len())
        .map(|j| {
            let col = trace.column(j);
            let first = col.first().copied().unwrap_or(0.0);
            let max = col.iter().copied().fold(0.0f64, f64::max);
            let d = if first > 0.0 { first } else if max > 0.0 { max } else { 1.0 };
            col.into_iter().map(|v| v / d).collect()
        })
        .collect();
    let ymax = series.iter().flatten().copied().fold(1.0f64, f64::max) * 1.05;
    let x = |t: f64| PAD + (t - t0) / (t1 - t0) * (W - 2.0 * PAD);
    let y = |v: f64| H - PAD - v / ymax * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{}" font-family="sans-serif" font-size="12">"#,
        H + 20.0 * (trace.names.len() as f64 / 5.0).ceil()
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{PAD}" y="25" font-size="15">{}</text>"#, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{PAD},{PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    for k in 0..=4 {
        let v = ymax * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.2}</text>"#, PAD - 6.0, y(v) + 4.0);
        let t = t0 + (t1 - t0) * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{t:.3e}</text>"#, x(t), H - PAD + 18.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">time (s)</text>"#, W / 2.0, H - 15.0);
    for ev in &trace.events {
        let _ = writeln!(
            s,
            r#"<line x1="{0:.1}" x2="{0:.1}" y1="{PAD}" y2="{1}" stroke="gray" stroke-dasharray="4 3"/><text x="{0:.1}" y="{2}" fill="gray">{3}</text>"#,
            x(ev.time),
            H - PAD,
            PAD - 4.0,
            escape(&ev.label)
        );
    }
    // Thin the polyline to at most ~2000 points per series.
    let stride = (trace.times.len() / 2000).max(1);
    for (j, vals) in series.iter().enumerate() {
        let color = COLORS[j % COLORS.len()];
        let mut d = String::new();
        for (k, (&t, &v)) in trace.times.iter().zip(vals).enumerate() {
            if k % stride != 0 && k + 1 != trace.times.len() {
                continue;
            }
            let _ = write!(d, "{}{:.1},{:.1} ", if d.is_empty() { "M" } else { "L" }, x(t), y(v));
        }
        let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.3"/>"#, d.trim_end());
        let (lx, ly) = (PAD + 160.0 * (j % 5) as f64, H + 5.0 + 20.0 * (j / 5) as f64);
        let _ = writeln!(
            s,
            r#"<rect x="{lx}" y="{}" width="12" height="3" fill="{color}"/><text x="{}" y="{ly}">{}</text>"#,
            ly - 5.0,
            lx + 16.0,
            escape(&trace.names[j])
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
