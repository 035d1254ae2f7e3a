//! CSV and SVG emission.
//!
//! Every file starts with a comment block echoing the resolved scenario, so
//! results stay reproducible from the artifact alone. CSV uses `,` as the
//! separator, `.` decimals and a header row; comment lines are prefixed
//! with `#`. Plots are self-contained SVG: line charts as polylines,
//! heatmaps as rect grids, no external tooling required.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::Error;
use crate::Result;

fn create(path: &Path) -> Result<std::fs::File> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Write a CSV table; `comments` become `#`-prefixed header lines.
pub fn write_csv(
    path: &Path,
    comments: &[String],
    columns: &[&str],
    rows: impl Iterator<Item = Vec<f64>>,
) -> Result<()> {
    let mut file = create(path)?;
    let mut text = String::new();
    for line in comments {
        let _ = writeln!(text, "# {line}");
    }
    let _ = writeln!(text, "{}", columns.join(","));
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(text, "{}", cells.join(","));
    }
    file.write_all(text.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Write a plain text report with the comment header.
pub fn write_text(path: &Path, comments: &[String], body: &str) -> Result<()> {
    let mut file = create(path)?;
    let mut text = String::new();
    for line in comments {
        let _ = writeln!(text, "# {line}");
    }
    text.push_str(body);
    file.write_all(text.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))
}

const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

struct Axis {
    lo: f64,
    hi: f64,
    span_px: f64,
    offset_px: f64,
    flip: bool,
}

impl Axis {
    fn map(&self, v: f64) -> f64 {
        let t = if self.hi > self.lo {
            (v - self.lo) / (self.hi - self.lo)
        } else {
            0.5
        };
        if self.flip {
            self.offset_px + self.span_px * (1.0 - t)
        } else {
            self.offset_px + self.span_px * t
        }
    }

    fn ticks(&self) -> Vec<f64> {
        (0..=4)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / 4.0)
            .collect()
    }
}

fn svg_header(out: &mut String, title: &str, comments: &[String]) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, "<!--");
    for line in comments {
        let _ = writeln!(out, "  {}", line.replace("--", "=="));
    }
    let _ = writeln!(out, "-->");
    let _ = writeln!(
        out,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<text x="{:.1}" y="24" font-family="monospace" font-size="15" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        xml_escape(title)
    );
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn axes(out: &mut String, x: &Axis, y: &Axis, x_label: &str, y_label: &str) {
    let (x0, x1) = (MARGIN_L, WIDTH - MARGIN_R);
    let (y0, y1) = (HEIGHT - MARGIN_B, MARGIN_T);
    let _ = writeln!(
        out,
        r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>
<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#
    );
    for t in x.ticks() {
        let px = x.map(t);
        let _ = writeln!(
            out,
            r#"<line x1="{px:.1}" y1="{y0}" x2="{px:.1}" y2="{:.1}" stroke="black"/>
<text x="{px:.1}" y="{:.1}" font-family="monospace" font-size="11" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 18.0,
            format_tick(t)
        );
    }
    for t in y.ticks() {
        let py = y.map(t);
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{py:.1}" x2="{x0}" y2="{py:.1}" stroke="black"/>
<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            format_tick(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="12" text-anchor="middle">{}</text>
<text x="16" y="{:.1}" font-family="monospace" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 14.0,
        xml_escape(x_label),
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        xml_escape(y_label)
    );
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// A named series for [`svg_line_chart`].
pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
    /// Plot `log10(|y|)` instead of `y`.
    pub log_y: bool,
}

/// Multi-series line chart.
pub fn svg_line_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series<'_>],
    comments: &[String],
) -> Result<()> {
    let transform = |s: &Series<'_>, v: f64| {
        if s.log_y {
            v.abs().max(1e-300).log10()
        } else {
            v
        }
    };
    let mut x_lo = f64::INFINITY;
    let mut x_hi = f64::NEG_INFINITY;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            x_lo = x_lo.min(x);
            x_hi = x_hi.max(x);
            let ty = transform(s, y);
            y_lo = y_lo.min(ty);
            y_hi = y_hi.max(ty);
        }
    }
    if !x_lo.is_finite() {
        (x_lo, x_hi, y_lo, y_hi) = (0.0, 1.0, 0.0, 1.0);
    }
    if (y_hi - y_lo).abs() < 1e-300 {
        y_hi = y_lo + 1.0;
    }
    let x_axis = Axis {
        lo: x_lo,
        hi: x_hi,
        span_px: WIDTH - MARGIN_L - MARGIN_R,
        offset_px: MARGIN_L,
        flip: false,
    };
    let y_axis = Axis {
        lo: y_lo,
        hi: y_hi,
        span_px: HEIGHT - MARGIN_T - MARGIN_B,
        offset_px: MARGIN_T,
        flip: true,
    };

    let mut out = String::new();
    svg_header(&mut out, title, comments);
    axes(&mut out, &x_axis, &y_axis, x_label, y_label);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut points = String::new();
        for &(x, y) in &s.points {
            let _ = write!(
                points,
                "{:.2},{:.2} ",
                x_axis.map(x),
                y_axis.map(transform(s, y))
            );
        }
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>"#
        );
        let ly = MARGIN_T + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="12" height="3" fill="{color}"/>
<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11">{}</text>"#,
            WIDTH - MARGIN_R - 150.0,
            ly,
            WIDTH - MARGIN_R - 132.0,
            ly + 5.0,
            xml_escape(s.name)
        );
    }
    out.push_str("</svg>\n");
    create(path)?
        .write_all(out.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Five-anchor sequential colormap (dark blue → yellow).
fn colormap(t: f64) -> String {
    const ANCHORS: [(f64, f64, f64); 5] = [
        (0.267, 0.005, 0.329),
        (0.229, 0.322, 0.546),
        (0.127, 0.566, 0.551),
        (0.369, 0.788, 0.383),
        (0.993, 0.906, 0.144),
    ];
    let t = t.clamp(0.0, 1.0) * (ANCHORS.len() - 1) as f64;
    let i = (t.floor() as usize).min(ANCHORS.len() - 2);
    let w = t - i as f64;
    let mix = |a: f64, b: f64| a + (b - a) * w;
    format!(
        "#{:02x}{:02x}{:02x}",
        (mix(ANCHORS[i].0, ANCHORS[i + 1].0) * 255.0) as u8,
        (mix(ANCHORS[i].1, ANCHORS[i + 1].1) * 255.0) as u8,
        (mix(ANCHORS[i].2, ANCHORS[i + 1].2) * 255.0) as u8,
    )
}

/// 2-D heatmap as a rect grid. `values[row][col]`, rows along the y axis
/// (bottom to top), columns along x.
#[allow(clippy::too_many_arguments)]
pub fn svg_heatmap(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    x_range: (f64, f64),
    y_range: (f64, f64),
    values: &[Vec<f64>],
    comments: &[String],
) -> Result<()> {
    let rows = values.len().max(1);
    let cols = values.first().map(|r| r.len()).unwrap_or(0).max(1);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for row in values {
        for &v in row {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || (hi - lo).abs() < 1e-300 {
        lo = 0.0;
        hi = 1.0;
    }
    let x_axis = Axis {
        lo: x_range.0,
        hi: x_range.1,
        span_px: WIDTH - MARGIN_L - MARGIN_R,
        offset_px: MARGIN_L,
        flip: false,
    };
    let y_axis = Axis {
        lo: y_range.0,
        hi: y_range.1,
        span_px: HEIGHT - MARGIN_T - MARGIN_B,
        offset_px: MARGIN_T,
        flip: true,
    };
    let cell_w = (WIDTH - MARGIN_L - MARGIN_R) / cols as f64;
    let cell_h = (HEIGHT - MARGIN_T - MARGIN_B) / rows as f64;

    let mut out = String::new();
    svg_header(&mut out, title, comments);
    for (r, row) in values.iter().enumerate() {
        // Row 0 sits at the bottom of the plot.
        let py = HEIGHT - MARGIN_B - (r + 1) as f64 * cell_h;
        for (c, &v) in row.iter().enumerate() {
            let px = MARGIN_L + c as f64 * cell_w;
            let t = (v - lo) / (hi - lo);
            let _ = writeln!(
                out,
                r#"<rect x="{px:.2}" y="{py:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                cell_w + 0.5,
                cell_h + 0.5,
                colormap(t)
            );
        }
    }
    axes(&mut out, &x_axis, &y_axis, x_label, y_label);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11">range [{}, {}]</text>"#,
        MARGIN_L,
        MARGIN_T - 8.0,
        format_tick(lo),
        format_tick(hi)
    );
    out.push_str("</svg>\n");
    create(path)?
        .write_all(out.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_deterministic_and_headed() {
        let dir = std::env::temp_dir().join("agepop-csv-test");
        let path = dir.join("t.csv");
        let rows = || vec![vec![0.0, 1.5], vec![0.1, -2.25e-7]].into_iter();
        write_csv(&path, &["k = v".to_string()], &["t", "value"], rows()).unwrap();
        let first = std::fs::read(&path).unwrap();
        write_csv(&path, &["k = v".to_string()], &["t", "value"], rows()).unwrap();
        let second = std::fs::read(&path).unwrap();
        assert_eq!(first, second);
        let text = String::from_utf8(first).unwrap();
        assert!(text.starts_with("# k = v\n"));
        assert!(text.contains("t,value"));
        assert!(text.contains("0.1,-0.000000225"));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn svg_files_are_wellformed_enough() {
        let dir = std::env::temp_dir().join("agepop-svg-test");
        let line = dir.join("line.svg");
        svg_line_chart(
            &line,
            "demo",
            "t",
            "value",
            &[Series {
                name: "d",
                points: vec![(0.0, 1.0), (1.0, 0.1)],
                log_y: true,
            }],
            &[String::from("cfg = 1")],
        )
        .unwrap();
        let text = std::fs::read_to_string(&line).unwrap();
        assert!(text.starts_with("<svg"));
        assert!(text.trim_end().ends_with("</svg>"));
        assert!(text.contains("polyline"));

        let heat = dir.join("heat.svg");
        svg_heatmap(
            &heat,
            "field",
            "t",
            "a",
            (0.0, 1.0),
            (0.0, 1.0),
            &[vec![0.0, 0.5], vec![1.0, 0.25]],
            &[],
        )
        .unwrap();
        let text = std::fs::read_to_string(&heat).unwrap();
        assert_eq!(text.matches("<rect").count(), 5); // 4 cells + background
        std::fs::remove_dir_all(&dir).ok();
    }
}
