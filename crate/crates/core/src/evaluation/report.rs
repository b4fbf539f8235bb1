use std::fmt::Write;

use super::CmcCurve;

/// A named CMC curve for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSeries {
    pub name: String,
    pub curve: CmcCurve,
}

/// CSV with one row per rank and one column per curve. The first line is a
/// `#` comment carrying the run configuration.
pub fn cmc_csv(series: &[CurveSeries], config: &serde_json::Value) -> String {
    let mut out = format!("# config: {config}\nrank");
    for s in series {
        out.push(',');
        out.push_str(&s.name);
    }
    out.push('\n');
    let ranks = series
        .iter()
        .map(|s| s.curve.values.len())
        .max()
        .unwrap_or(0);
    for r in 0..ranks {
        write!(out, "{}", r + 1).unwrap();
        for s in series {
            match s.curve.values.get(r) {
                Some(v) => write!(out, ",{v}").unwrap(),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

/// Standalone SVG line plot of the curves (rank on x, recognition rate in
/// percent on y).
pub fn cmc_svg(series: &[CurveSeries], config: &serde_json::Value) -> String {
    let (width, height) = (640.0, 420.0);
    let (left, right, top, bottom) = (60.0, 20.0, 20.0, 50.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;
    let ranks = series
        .iter()
        .map(|s| s.curve.values.len())
        .max()
        .unwrap_or(1)
        .max(1);
    let x_of = |rank: usize| {
        if ranks == 1 {
            left + plot_w / 2.0
        } else {
            left + plot_w * (rank - 1) as f64 / (ranks - 1) as f64
        }
    };
    let y_of = |p: f64| top + plot_h * (1.0 - p);

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, "<desc>{}</desc>", escape_xml(&config.to_string())).unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();

    for i in 0..=10 {
        let p = i as f64 / 10.0;
        let y = y_of(p);
        writeln!(
            svg,
            r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            left + plot_w,
            left - 6.0,
            y + 4.0,
            i * 10
        )
        .unwrap();
    }
    let step = (ranks / 10).max(1);
    for rank in (1..=ranks).filter(|r| *r == 1 || r % step == 0) {
        let x = x_of(rank);
        writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{rank}</text>"##,
            top + plot_h,
            top + plot_h + 5.0,
            top + plot_h + 18.0
        )
        .unwrap();
    }
    writeln!(
        svg,
        r##"<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#000"/>"##
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Rank</text>"#,
        left + plot_w / 2.0,
        height - 10.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">Recognition rate (%)</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    )
    .unwrap();

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = s
            .curve
            .values
            .iter()
            .enumerate()
            .map(|(r, &p)| format!("{:.2},{:.2}", x_of(r + 1), y_of(p)))
            .collect();
        writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        )
        .unwrap();
        let ly = top + plot_h - 20.0 - 18.0 * i as f64;
        writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            left + plot_w - 170.0,
            left + plot_w - 145.0,
            left + plot_w - 140.0,
            ly + 4.0,
            escape_xml(&s.name)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}
