//! Static SVG plots derived from report tables.

use std::path::Path;

use plotters::prelude::*;
use thiserror::Error;

use crate::report::Table;

#[derive(Debug, Error)]
#[error("plot {path}: {message}")]
pub struct PlotError {
    path: String,
    message: String,
}

/// One named curve of `(x, y)` points.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn log_range(values: impl Iterator<Item = f64>) -> Option<std::ops::Range<f64>> {
    let (lo, hi) = values
        .filter(|v| *v > 0.0 && v.is_finite())
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    (lo <= hi).then(|| lo / 2.0..hi * 2.0)
}

/// Log–log line plot; curves with no positive points are dropped.
pub fn loglog(path: &Path, title: &str, x_desc: &str, y_desc: &str, series: &[Series]) -> Result<(), PlotError> {
    let err = |e: &dyn std::fmt::Display| PlotError {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let positive = |p: &&(f64, f64)| p.0 > 0.0 && p.1 > 0.0 && p.1.is_finite();
    let xs = log_range(series.iter().flat_map(|s| s.points.iter().filter(positive).map(|p| p.0)));
    let ys = log_range(series.iter().flat_map(|s| s.points.iter().filter(positive).map(|p| p.1)));
    let (Some(xr), Some(yr)) = (xs, ys) else {
        return Err(err(&"no positive data to plot"));
    };
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(xr.log_scale(), yr.log_scale())
        .map_err(|e| err(&e))?;
    chart
        .configure_mesh()
        .x_desc(x_desc)
        .y_desc(y_desc)
        .y_label_formatter(&|v| format!("{v:.0e}"))
        .draw()
        .map_err(|e| err(&e))?;
    for (k, s) in series.iter().enumerate() {
        let color = Palette99::pick(k).to_rgba();
        let pts: Vec<(f64, f64)> = s.points.iter().filter(positive).copied().collect();
        if pts.is_empty() {
            continue;
        }
        chart
            .draw_series(LineSeries::new(pts, color.stroke_width(2)))
            .map_err(|e| err(&e))?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| err(&e))?;
    root.present().map_err(|e| err(&e))
}

/// Series `(x, column)` of a table, one per value of `group` when given.
pub fn table_series(table: &Table, x: &str, columns: &[&str], group: Option<&str>) -> Vec<Series> {
    let idx = |name: &str| table.columns.iter().position(|c| c == name);
    let Some(xi) = idx(x) else {
        return Vec::new();
    };
    let gi = group.and_then(idx);
    let mut groups: Vec<String> = Vec::new();
    for row in &table.rows {
        let g = gi.map_or(String::new(), |k| row[k].clone());
        if !groups.contains(&g) {
            groups.push(g);
        }
    }
    let mut out = Vec::new();
    for g in &groups {
        for &col in columns {
            let Some(ci) = idx(col) else { continue };
            let points = table
                .rows
                .iter()
                .filter(|r| gi.is_none_or(|k| &r[k] == g))
                .filter_map(|r| Some((r[xi].parse().ok()?, r[ci].parse().ok()?)))
                .collect();
            let label = match (group, g.is_empty()) {
                (Some(name), false) => format!("{col} ({name} = {g})"),
                _ => col.to_string(),
            };
            out.push(Series { label, points });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_an_svg_and_rejects_empty_data() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.svg");
        let mut t = Table::new("asd", &["t", "h", "err"]);
        for (t_, h, e) in [(0.1, 0.1, 1e-3), (0.1, 0.05, 6e-5), (1.0, 0.1, 2e-3), (1.0, 0.05, 1e-4)] {
            t.push(vec![t_.to_string(), h.to_string(), e.to_string()]);
        }
        let series = table_series(&t, "h", &["err"], Some("t"));
        assert_eq!(series.len(), 2);
        loglog(&path, "residual", "h", "err", &series).unwrap();
        assert!(std::fs::read_to_string(&path).unwrap().starts_with("<svg"));
        let empty = [Series { label: "x".into(), points: vec![(1.0, 0.0)] }];
        assert!(loglog(&dir.path().join("q.svg"), "x", "x", "y", &empty).is_err());
    }
}
