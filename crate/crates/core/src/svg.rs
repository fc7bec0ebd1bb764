//! Minimal self-contained SVG bar and line charts for the emitted figures.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn header(title: &str) -> String {
    format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">
<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>
"#,
        WIDTH / 2.0,
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Bar chart over uniform bins.
pub fn write_bar_chart(path: &Path, title: &str, values: &[f64]) -> Result<()> {
    let mut svg = header(title);
    let max = values.iter().cloned().fold(f64::MIN, f64::max).max(1e-12);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let bar_w = plot_w / values.len() as f64;
    for (i, &v) in values.iter().enumerate() {
        let h = (v / max).max(0.0) * plot_h;
        let x = MARGIN + i as f64 * bar_w;
        let y = HEIGHT - MARGIN - h;
        svg.push_str(&format!(
            r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{h:.2}" fill="steelblue"/>"#,
            bar_w * 0.9
        ));
        svg.push('\n');
    }
    svg.push_str(&axis_lines());
    svg.push_str("</svg>\n");
    File::create(path)?.write_all(svg.as_bytes())?;
    Ok(())
}

/// One polyline per named series.
pub fn write_line_chart(path: &Path, title: &str, series: &[(&str, &[f64])]) -> Result<()> {
    let mut svg = header(title);
    let all: Vec<f64> = series.iter().flat_map(|(_, v)| v.iter().copied()).collect();
    let max = all.iter().cloned().fold(f64::MIN, f64::max);
    let min = all.iter().cloned().fold(f64::MAX, f64::min);
    let range = (max - min).max(1e-12);
    let n = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0).max(2);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let colors = ["steelblue", "crimson", "seagreen", "darkorange"];
    for (k, (name, values)) in series.iter().enumerate() {
        let color = colors[k % colors.len()];
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let x = MARGIN + plot_w * i as f64 / (n - 1) as f64;
                let y = HEIGHT - MARGIN - plot_h * (v - min) / range;
                format!("{x:.2},{y:.2}")
            })
            .collect();
        svg.push_str(&format!(
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points.join(" ")
        ));
        svg.push('\n');
        svg.push_str(&format!(
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 120.0,
            30.0 + 15.0 * k as f64,
            escape(name)
        ));
        svg.push('\n');
    }
    svg.push_str(&axis_lines());
    svg.push_str("</svg>\n");
    File::create(path)?.write_all(svg.as_bytes())?;
    Ok(())
}

fn axis_lines() -> String {
    format!(
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>
<line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>
"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_valid_svg_files() {
        let dir = tempfile::tempdir().unwrap();
        let bar = dir.path().join("bar.svg");
        write_bar_chart(&bar, "bars", &[1.0, 3.0, 2.0]).unwrap();
        let text = std::fs::read_to_string(&bar).unwrap();
        assert!(text.starts_with("<svg"));
        assert!(text.trim_end().ends_with("</svg>"));
        assert_eq!(text.matches("<rect").count(), 4); // background + 3 bars

        let line = dir.path().join("line.svg");
        write_line_chart(&line, "loss", &[("train", &[1.0, 0.5][..]), ("val", &[1.1, 0.7][..])])
            .unwrap();
        let text = std::fs::read_to_string(&line).unwrap();
        assert_eq!(text.matches("<polyline").count(), 2);
    }
}
