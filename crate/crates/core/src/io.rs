//! Artifact files. Every file carries the hash of the config that produced it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};

/// JSON envelope with the producing config's hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub config_sha256: String,
    pub data: T,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Invalid(format!("{}: {e}", path.display()))
}

/// Writes `text` to `dir/name`, creating `dir`.
pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

/// CSV body prefixed with a `# config_sha256=` comment line.
pub fn stamp_csv(hash: &str, body: &str) -> String {
    format!("# config_sha256={hash}\n{body}")
}

pub fn stamp_json<T: Serialize>(hash: &str, data: &T) -> Result<String> {
    let env = Stamped {
        config_sha256: hash.to_string(),
        data,
    };
    serde_json::to_string_pretty(&env)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::Invalid(e.to_string()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Stamped<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

/// Data series for [`svg_plot`].
pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// Axes and decorations for [`svg_plot`].
#[derive(Default)]
pub struct PlotSpec<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub log_x: bool,
    pub log_y: bool,
    /// Labelled markers drawn as circles.
    pub markers: Vec<(f64, f64, String)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A self-contained SVG line plot.
pub fn svg_plot(hash: &str, spec: &PlotSpec<'_>, series: &[Series<'_>]) -> String {
    let (w, h, ml, mr, mt, mb) = (720.0, 440.0, 70.0, 150.0, 40.0, 50.0);
    let tx = |v: f64| if spec.log_x { v.log10() } else { v };
    let ty = |v: f64| if spec.log_y { v.log10() } else { v };
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .chain(spec.markers.iter().map(|m| (m.0, m.1)))
        .filter(|&(x, y)| tx(x).is_finite() && ty(y).is_finite())
        .map(|(x, y)| (tx(x), ty(y)))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = pts.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-300 {
        (x0, x1) = (x0 - 0.5, x1 + 0.5);
    }
    if y1 - y0 < 1e-12 * y1.abs().max(1e-300) {
        let pad = 0.5 * y0.abs().max(1.0);
        (y0, y1) = (y0 - pad, y1 + pad);
    }
    let pw = w - ml - mr;
    let ph = h - mt - mb;
    let px = |x: f64| ml + (tx(x) - x0) / (x1 - x0) * pw;
    let py = |y: f64| mt + ph - (ty(y) - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, "<!-- config_sha256={hash} -->");
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        ml + pw / 2.0,
        esc(spec.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (vx, vy) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let lx = if spec.log_x {
            format!("1e{vx:.2}")
        } else {
            format!("{vx:.3}")
        };
        let ly = if spec.log_y {
            format!("1e{vy:.2}")
        } else {
            format!("{vy:.3e}")
        };
        let gx = ml + f * pw;
        let gy = mt + ph - f * ph;
        let _ = writeln!(
            s,
            r#"<text x="{gx}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{lx}</text>"#,
            mt + ph + 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{ly}</text>"#,
            ml - 4.0,
            gy + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        ml + pw / 2.0,
        h - 10.0,
        esc(spec.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        mt + ph / 2.0,
        mt + ph / 2.0,
        esc(spec.y_label)
    );

    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let path: Vec<String> = ser
            .points
            .iter()
            .filter(|&&(x, y)| tx(x).is_finite() && ty(y).is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        if !path.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                path.join(" ")
            );
        }
        let ly = mt + 14.0 + 18.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            w - mr + 10.0,
            w - mr + 30.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            w - mr + 34.0,
            ly + 4.0,
            esc(ser.label)
        );
    }
    for (x, y, label) in &spec.markers {
        if tx(*x).is_finite() && ty(*y).is_finite() {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="black"/>"#,
                px(*x),
                py(*y)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10">{}</text>"#,
                px(*x) + 5.0,
                py(*y) - 6.0,
                esc(label)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stamped_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let text = stamp_json("abc", &vec![1.5, 2.0]).unwrap();
        let path = write_text(dir.path(), "v.json", &text).unwrap();
        let back: Stamped<Vec<f64>> = read_json(&path).unwrap();
        assert_eq!(back.config_sha256, "abc");
        assert_eq!(back.data, vec![1.5, 2.0]);
    }

    #[test]
    fn csv_stamp_is_first_line() {
        let s = stamp_csv("ff", "a,b\n1,2\n");
        assert_eq!(s.lines().next(), Some("# config_sha256=ff"));
    }

    #[test]
    fn svg_is_self_contained() {
        let spec = PlotSpec {
            title: "t <1>",
            log_y: true,
            markers: vec![(0.5, 1.0, "m".into())],
            ..Default::default()
        };
        let svg = svg_plot(
            "h",
            &spec,
            &[Series {
                label: "a",
                points: vec![(0.1, 1.0), (0.2, 0.0), (0.3, 4.0)],
            }],
        );
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("config_sha256=h"));
        assert!(svg.contains("t &lt;1&gt;"));
        assert!(!svg.contains("href"));
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn svg_handles_empty_and_flat_data() {
        let spec = PlotSpec::default();
        assert!(svg_plot("h", &spec, &[]).contains("</svg>"));
        let flat = svg_plot(
            "h",
            &spec,
            &[Series {
                label: "c",
                points: vec![(0.0, 2.0), (1.0, 2.0)],
            }],
        );
        assert!(!flat.contains("NaN"));
    }
}
