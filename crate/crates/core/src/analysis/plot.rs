use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::eigenmap::EigenmapCoords;
use crate::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f",
];
const UNGROUPED: &str = "#444444";

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn axis_map(values: impl Iterator<Item = f64> + Clone, lo_px: f64, hi_px: f64) -> impl Fn(f64) -> f64 {
    let lo = values.clone().fold(f64::INFINITY, f64::min);
    let hi = values.fold(f64::NEG_INFINITY, f64::max);
    let span = if hi - lo > 1e-12 { hi - lo } else { 1.0 };
    let mid = 0.5 * (lo + hi);
    move |v| {
        let t = if hi - lo > 1e-12 { (v - lo) / span } else { 0.5 + (v - mid) };
        lo_px + t * (hi_px - lo_px)
    }
}

/// Scatter plot with one labeled point per language, colored by group.
pub fn render_svg(coords: &EigenmapCoords, groups: &BTreeMap<String, String>) -> Result<String> {
    if coords.langs.len() != coords.coords.len() {
        return Err(Error::invalid("eigenmap languages and coordinates differ in length"));
    }
    if coords.coords.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric {
            term: "eigenmap coordinates".into(),
        });
    }
    let labels: Vec<&String> = {
        let mut g: Vec<&String> = groups.values().collect();
        g.sort();
        g.dedup();
        g
    };
    let color = |lang: &str| {
        groups
            .get(lang)
            .and_then(|g| labels.iter().position(|l| *l == g))
            .map_or(UNGROUPED, |i| PALETTE[i % PALETTE.len()])
    };
    let fx = axis_map(coords.coords.iter().map(|c| c[0]), MARGIN, WIDTH - MARGIN);
    let fy = axis_map(coords.coords.iter().map(|c| c[1]), HEIGHT - MARGIN, MARGIN);

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    for (lang, c) in coords.langs.iter().zip(&coords.coords) {
        let (x, y) = (fx(c[0]), fy(c[1]));
        let group = groups.get(lang).map(String::as_str).unwrap_or("");
        writeln!(
            svg,
            r#"<circle cx="{x:.3}" cy="{y:.3}" r="6" fill="{}" data-group="{}"/>"#,
            color(lang),
            escape(group)
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="12">{}</text>"#,
            x + 8.0,
            y + 4.0,
            escape(lang)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_scatter(coords: &EigenmapCoords, groups: &BTreeMap<String, String>, path: &Path) -> Result<()> {
    let svg = render_svg(coords, groups)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coords() -> EigenmapCoords {
        EigenmapCoords {
            langs: vec!["a".into(), "b".into(), "c<".into()],
            coords: vec![[0.1, -0.2], [-0.3, 0.0], [0.2, 0.2]],
            eigenvalues: vec![0.0, 1.0, 1.5],
        }
    }

    #[test]
    fn one_point_and_label_per_language() {
        let groups = BTreeMap::from([("a".to_string(), "g1".to_string()), ("b".to_string(), "g2".to_string())]);
        let svg = render_svg(&coords(), &groups).unwrap();
        assert_eq!(svg.matches("<circle").count(), 3);
        assert_eq!(svg.matches("<text").count(), 3);
        assert!(svg.contains("c&lt;"));
    }

    #[test]
    fn identical_input_identical_file() {
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("1.svg"), dir.path().join("2.svg"));
        emit_scatter(&coords(), &BTreeMap::new(), &p1).unwrap();
        emit_scatter(&coords(), &BTreeMap::new(), &p2).unwrap();
        assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let err = emit_scatter(&coords(), &BTreeMap::new(), Path::new("/nonexistent/dir/x.svg")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
