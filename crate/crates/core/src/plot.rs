//! Marginal means with t intervals for profile plots of RM designs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::confidence::{t_quantile, xml_escape};
use crate::design::{DesignLayout, DesignMode};
use crate::error::{Error, Result};
use crate::estimation::ModelFit;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotPoint {
    /// Labels of all but the last selected factor, e.g. `sex=M`; empty for one factor.
    pub series: String,
    /// Level of the last selected factor.
    pub level: String,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

fn factor_names(layout: &DesignLayout) -> String {
    layout
        .factors
        .iter()
        .map(|f| f.name.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Resolve `a:b` style selections to factor indices, in the given order.
pub fn resolve_selection(layout: &DesignLayout, selection: Option<&str>) -> Result<Vec<usize>> {
    let sel = match selection {
        Some(s) if !s.trim().is_empty() => s,
        _ if layout.factors.len() == 1 => return Ok(vec![0]),
        _ => {
            return Err(Error::NotPlottable(format!(
                "the design has several factors, choose the factor(s) to plot from: {}",
                factor_names(layout)
            )))
        }
    };
    let mut idx = Vec::new();
    for name in sel.split(':').map(str::trim) {
        let k = layout
            .factors
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| Error::UnknownFactor {
                name: name.to_string(),
                valid: factor_names(layout),
            })?;
        if idx.contains(&k) {
            return Err(Error::InvalidArgument(format!(
                "factor `{name}` selected twice"
            )));
        }
        idx.push(k);
    }
    Ok(idx)
}

/// Unweighted marginal means over the collapsed cells with Satterthwaite t
/// intervals: `se² = Σ_i w_i' V_i w_i / n_i`.
pub fn marginal_means(
    fit: &ModelFit,
    layout: &DesignLayout,
    selected: &[usize],
    alpha: f64,
) -> Result<Vec<PlotPoint>> {
    if layout.mode != DesignMode::Rm {
        return Err(Error::NotPlottable(
            "profile plots are only available for repeated measures designs".into(),
        ));
    }
    if selected.is_empty() {
        return Err(Error::InvalidArgument("no factor selected".into()));
    }
    let n_whole = layout.n_whole();
    let d = layout.d();
    let label_of = |i: usize, s: usize, k: usize| -> &str {
        if k < n_whole {
            &layout.cells[i][k]
        } else {
            &layout.component_levels[s][k - n_whole]
        }
    };

    let mut combos: Vec<Vec<String>> = vec![Vec::new()];
    for &k in selected {
        let mut next = Vec::new();
        for c in &combos {
            for l in &layout.factors[k].levels {
                let mut c = c.clone();
                c.push(l.clone());
                next.push(c);
            }
        }
        combos = next;
    }

    let mut points = Vec::with_capacity(combos.len());
    for combo in combos {
        let mut w = vec![vec![0.0; d]; layout.a()];
        let mut count = 0usize;
        for (i, wi) in w.iter_mut().enumerate() {
            for (s, ws) in wi.iter_mut().enumerate() {
                if selected
                    .iter()
                    .zip(&combo)
                    .all(|(&k, l)| label_of(i, s, k) == l)
                {
                    *ws = 1.0;
                    count += 1;
                }
            }
        }
        let series = selected[..selected.len() - 1]
            .iter()
            .zip(&combo)
            .map(|(&k, l)| format!("{}={l}", layout.factors[k].name))
            .collect::<Vec<_>>()
            .join(", ");
        let level = combo.last().expect("non-empty selection").clone();
        if count == 0 {
            continue;
        }
        let scale = 1.0 / count as f64;
        let mut mean = 0.0;
        let mut parts = Vec::with_capacity(layout.a());
        for (i, wi) in w.iter().enumerate() {
            let cell = &fit.cells[i];
            let wv = nalgebra::DVector::from_iterator(d, wi.iter().map(|v| v * scale));
            mean += wv.dot(&cell.mean);
            let v = wv.dot(&(&cell.cov * &wv)) / cell.n as f64;
            parts.push((v, cell.n));
        }
        let var: f64 = parts.iter().map(|p| p.0).sum();
        let (lower, upper) = if var > 0.0 {
            let denom: f64 = parts
                .iter()
                .filter(|p| p.0 > 0.0)
                .map(|&(v, n)| v * v / (n as f64 - 1.0))
                .sum();
            let df = var * var / denom;
            let half = t_quantile(df, 1.0 - alpha / 2.0)? * var.sqrt();
            (mean - half, mean + half)
        } else {
            (mean, mean)
        };
        points.push(PlotPoint {
            series,
            level,
            mean,
            lower,
            upper,
        });
    }
    Ok(points)
}

pub fn to_csv(points: &[PlotPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["series", "level", "mean", "lower", "upper"])?;
    for p in points {
        w.write_record([
            p.series.clone(),
            p.level.clone(),
            p.mean.to_string(),
            p.lower.to_string(),
            p.upper.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

/// Means with error bars; series offset by `gap` (in level units) from
/// each other.
pub fn to_svg(points: &[PlotPoint], x_name: &str, title: &str, gap: f64) -> String {
    let mut levels: Vec<&str> = Vec::new();
    let mut series: Vec<&str> = Vec::new();
    for p in points {
        if !levels.contains(&p.level.as_str()) {
            levels.push(&p.level);
        }
        if !series.contains(&p.series.as_str()) {
            series.push(&p.series);
        }
    }
    let ymin = points.iter().map(|p| p.lower).fold(f64::INFINITY, f64::min);
    let ymax = points
        .iter()
        .map(|p| p.upper)
        .fold(f64::NEG_INFINITY, f64::max);
    let span = (ymax - ymin).max(1e-9);
    let (ymin, ymax) = (ymin - 0.1 * span, ymax + 0.1 * span);

    let (w, h, m, legend) = (
        560.0,
        420.0,
        60.0,
        if series.len() > 1 { 160.0 } else { 0.0 },
    );
    let plot_w = w - 2.0 * m - legend;
    let nx = levels.len() as f64;
    let sx = |pos: f64| m + (pos + 0.5) / nx * plot_w;
    let sy = |y: f64| h - m - (y - ymin) / (ymax - ymin) * (h - 2.0 * m);
    let ns = series.len() as f64;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        m + plot_w / 2.0,
        xml_escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{m}" y="{m}" width="{plot_w}" height="{}" fill="none" stroke="black"/>"#,
        h - 2.0 * m
    );
    for (j, l) in levels.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(j as f64),
            h - m + 16.0,
            xml_escape(l)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        m + plot_w / 2.0,
        h - 16.0,
        xml_escape(x_name)
    );
    for k in 0..=4 {
        let v = ymin + (ymax - ymin) * k as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3}</text>"#,
            m - 6.0,
            sy(v) + 4.0
        );
    }
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let offset = (si as f64 - (ns - 1.0) / 2.0) * gap;
        let pts: Vec<(f64, &PlotPoint)> = points
            .iter()
            .filter(|p| p.series == *s)
            .map(|p| {
                let j = levels.iter().position(|l| *l == p.level).unwrap_or(0);
                (sx(j as f64 + offset), p)
            })
            .collect();
        let line: Vec<String> = pts
            .iter()
            .map(|(x, p)| format!("{x:.2},{:.2}", sy(p.mean)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        for (x, p) in &pts {
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}"/>"#,
                sy(p.lower),
                sy(p.upper)
            );
            for y in [p.lower, p.upper] {
                let _ = writeln!(
                    svg,
                    r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}"/>"#,
                    x - 4.0,
                    sy(y),
                    x + 4.0,
                    sy(y)
                );
            }
            let _ = writeln!(
                svg,
                r#"<circle cx="{x:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                sy(p.mean)
            );
        }
        if series.len() > 1 {
            let ly = m + 16.0 * si as f64;
            let lx = w - m - legend + 16.0;
            let _ = writeln!(
                svg,
                r#"<rect x="{lx:.2}" y="{:.2}" width="10" height="10" fill="{color}"/>"#,
                ly - 9.0
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#,
                lx + 14.0,
                xml_escape(s)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Write `plot.csv` and `plot.svg` into `dir`.
pub fn emit_plot_data(
    fit: &ModelFit,
    layout: &DesignLayout,
    selection: Option<&str>,
    alpha: f64,
    gap: f64,
    dir: &Path,
) -> Result<(PathBuf, PathBuf)> {
    let selected = resolve_selection(layout, selection)?;
    let points = marginal_means(fit, layout, &selected, alpha)?;
    let names: Vec<&str> = selected
        .iter()
        .map(|&k| layout.factors[k].name.as_str())
        .collect();
    let x_name = *names.last().expect("non-empty selection");
    let title = format!("Effect of {}", names.join(":"));
    let csv_path = dir.join("plot.csv");
    let svg_path = dir.join("plot.svg");
    std::fs::write(&csv_path, to_csv(&points)?)?;
    std::fs::write(&svg_path, to_svg(&points, x_name, &title, gap))?;
    Ok((csv_path, svg_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{parse_formula, FactorKind, FactorSpec, FormulaMode};
    use crate::estimation::{fit_samples, Samples};
    use crate::linalg::Matrix;

    fn rm_layout() -> DesignLayout {
        let p = parse_formula("y ~ g * t", FormulaMode::Rm).unwrap();
        let t =
            FactorSpec::from_observed("t", FactorKind::SubPlot, ["1", "2"].into_iter()).unwrap();
        DesignLayout::build(
            &p,
            DesignMode::Rm,
            &[vec!["A".into()], vec!["B".into()]],
            vec![t],
            vec![],
            false,
        )
        .unwrap()
    }

    fn fit() -> ModelFit {
        fit_samples(
            &Samples {
                cells: vec![
                    Matrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 3.0]),
                    Matrix::from_row_slice(2, 2, &[5.0, 0.0, 7.0, 2.0]),
                ],
            },
            &[],
        )
        .unwrap()
    }

    #[test]
    fn single_factor_marginals() {
        let layout = rm_layout();
        let f = fit();
        let pts = marginal_means(&f, &layout, &[0], 0.05).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].level, "A");
        assert_eq!(pts[0].series, "");
        // (2 + 3) / 2
        assert!((pts[0].mean - 2.5).abs() < 1e-12);
        // one cell: df = n - 1, se² = 1'V1/(4 n)
        let c = &f.cells[0].cov;
        let v = (c[(0, 0)] + c[(1, 1)] + 2.0 * c[(0, 1)]) / 4.0 / 3.0;
        let half = t_quantile(2.0, 0.975).unwrap() * v.sqrt();
        assert!((pts[0].upper - 2.5 - half).abs() < 1e-12);

        let pts = marginal_means(&f, &layout, &[1], 0.05).unwrap();
        assert_eq!(pts.len(), 2);
        assert!((pts[1].mean - (3.0 + 1.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn interaction_series() {
        let layout = rm_layout();
        let pts = marginal_means(&fit(), &layout, &[0, 1], 0.05).unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[2].series, "g=B");
        assert_eq!(pts[2].level, "1");
        assert!((pts[2].mean - 6.0).abs() < 1e-12);
    }

    #[test]
    fn selection_rules() {
        let layout = rm_layout();
        assert!(matches!(
            resolve_selection(&layout, None),
            Err(Error::NotPlottable(_))
        ));
        assert_eq!(resolve_selection(&layout, Some("t:g")).unwrap(), vec![1, 0]);
        match resolve_selection(&layout, Some("h")) {
            Err(Error::UnknownFactor { name, valid }) => {
                assert_eq!(name, "h");
                assert_eq!(valid, "g, t");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_and_svg_output() {
        let layout = rm_layout();
        let pts = marginal_means(&fit(), &layout, &[0, 1], 0.05).unwrap();
        let csv = to_csv(&pts).unwrap();
        assert!(csv.starts_with("series,level,mean,lower,upper\n"));
        assert_eq!(csv.lines().count(), 5);
        let svg = to_svg(&pts, "t", "Effect of g:t", 0.1);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<circle").count(), 4);
    }
}
