//! Component-wise confidence intervals and confidence ellipsoids for contrasts.

use std::fmt::Write as _;

use nalgebra::DVector;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::estimation::ModelFit;
use crate::linalg::{self, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CiMethod {
    /// `mean ± t_{n-1, 1-α/2} · se`
    TQuantile,
    /// `mean ± sqrt(q*) · se`, `q*` a resampled WTS critical value.
    Resampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

pub fn t_quantile(df: f64, p: f64) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::InvalidArgument(format!("t distribution with {df} df: {e}")))?;
    Ok(dist.inverse_cdf(p))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

pub fn t_interval(mean: f64, variance: f64, n: usize, alpha: f64) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "t interval needs n >= 2, got {n}"
        )));
    }
    if variance < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "negative variance {variance}"
        )));
    }
    let half = if variance == 0.0 {
        0.0
    } else {
        t_quantile((n - 1) as f64, 1.0 - alpha / 2.0)? * (variance / n as f64).sqrt()
    };
    Ok(ConfidenceInterval {
        estimate: mean,
        lower: mean - half,
        upper: mean + half,
        level: 1.0 - alpha,
    })
}

/// Interval scaled by the root of a resampled WTS critical value.
pub fn resampling_interval(
    mean: f64,
    variance: f64,
    n: usize,
    critical_value: f64,
    alpha: f64,
) -> Result<ConfidenceInterval> {
    if !(critical_value >= 0.0) || n == 0 || variance < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "resampling interval needs q* >= 0, n >= 1, variance >= 0 (got {critical_value}, {n}, {variance})"
        )));
    }
    let half = critical_value.sqrt() * (variance / n as f64).sqrt();
    Ok(ConfidenceInterval {
        estimate: mean,
        lower: mean - half,
        upper: mean + half,
        level: 1.0 - alpha,
    })
}

/// `{Hμ : N (H X̄ - Hμ)' (H D H')^+ (H X̄ - Hμ) <= c}` as center, axes and scales.
#[derive(Debug, Clone)]
pub struct ConfidenceEllipsoid {
    pub center: DVector<f64>,
    /// Half-axis lengths, descending.
    pub scales: Vec<f64>,
    /// Column `k` is the direction of `scales[k]`.
    pub axes: Matrix,
    /// `H D_N H'`
    pub shape: Matrix,
    pub n_total: usize,
    pub critical_value: f64,
}

pub fn conf_ellipsoid(
    fit: &ModelFit,
    contrast: &Matrix,
    critical_value: f64,
) -> Result<ConfidenceEllipsoid> {
    let ad = fit.mean_vector.len();
    if contrast.ncols() != ad {
        return Err(Error::Shape(format!(
            "contrast has {} columns, model has {ad} means",
            contrast.ncols()
        )));
    }
    if contrast.nrows() == 0 || contrast.nrows() > ad {
        return Err(Error::Shape(format!(
            "contrast must have between 1 and {ad} rows, got {}",
            contrast.nrows()
        )));
    }
    if !(critical_value >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "critical value must be >= 0, got {critical_value}"
        )));
    }
    let center = contrast * &fit.mean_vector;
    let shape = contrast * &fit.d_n * contrast.transpose();
    let shape = (&shape + shape.transpose()) * 0.5;
    let eig = linalg::sym_eigen(&shape)?;
    let big_n = fit.n_total as f64;
    let scales = eig
        .eigenvalues
        .iter()
        .map(|&l| (l.max(0.0) * critical_value / big_n).sqrt())
        .collect();
    let mut axes = eig.eigenvectors;
    for mut col in axes.column_iter_mut() {
        if let Some(first) = col.iter().copied().find(|v| v.abs() > 1e-12) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
    Ok(ConfidenceEllipsoid {
        center,
        scales,
        axes,
        shape,
        n_total: fit.n_total,
        critical_value,
    })
}

impl ConfidenceEllipsoid {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `N (center - p)' (H D H')^+ (center - p)`
    pub fn quadratic_form(&self, point: &DVector<f64>) -> f64 {
        let diff = &self.center - point;
        let pinv = linalg::moore_penrose(&self.shape);
        self.n_total as f64 * diff.dot(&(pinv * &diff))
    }

    /// Sum of squared axis coordinates in units of the scales; `<= 1` inside.
    pub fn normalized_radius(&self, point: &DVector<f64>) -> f64 {
        let coords = self.axes.transpose() * (point - &self.center);
        coords
            .iter()
            .zip(&self.scales)
            .map(|(&c, &s)| {
                if s > 0.0 {
                    (c / s).powi(2)
                } else if c.abs() <= 1e-12 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .sum()
    }

    pub fn contains(&self, point: &DVector<f64>) -> bool {
        self.normalized_radius(point) <= 1.0
    }

    /// SVG drawing of a two-dimensional region.
    pub fn to_svg(&self, labels: [&str; 2]) -> Result<String> {
        if self.dim() != 2 {
            return Err(Error::NotPlottable(format!(
                "confidence regions can only be plotted for 2-dimensional contrasts, this one has {}",
                self.dim()
            )));
        }
        let pts: Vec<(f64, f64)> = (0..=128)
            .map(|k| {
                let t = k as f64 / 128.0 * std::f64::consts::TAU;
                let (c, s) = (t.cos() * self.scales[0], t.sin() * self.scales[1]);
                (
                    self.center[0] + c * self.axes[(0, 0)] + s * self.axes[(0, 1)],
                    self.center[1] + c * self.axes[(1, 0)] + s * self.axes[(1, 1)],
                )
            })
            .collect();
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for &(x, y) in &pts {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
        let pad = |lo: f64, hi: f64| {
            let w = (hi - lo).max(1e-9);
            (lo - 0.1 * w, hi + 0.1 * w)
        };
        let (xmin, xmax) = pad(xmin, xmax);
        let (ymin, ymax) = pad(ymin, ymax);
        let (w, h, m) = (480.0, 480.0, 60.0);
        let sx = |x: f64| m + (x - xmin) / (xmax - xmin) * (w - 2.0 * m);
        let sy = |y: f64| h - m - (y - ymin) / (ymax - ymin) * (h - 2.0 * m);

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            w - 2.0 * m,
            h - 2.0 * m
        );
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="steelblue" fill-opacity="0.25" stroke="steelblue" stroke-width="2"/>"#,
            path.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="black"/>"#,
            sx(self.center[0]),
            sy(self.center[1])
        );
        for (v, x) in [(xmin, m), (xmax, w - m)] {
            let _ = writeln!(
                svg,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{v:.3}</text>"#,
                h - m + 16.0
            );
        }
        for (v, y) in [(ymin, h - m), (ymax, m)] {
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{y:.2}" text-anchor="end">{v:.3}</text>"#,
                m - 4.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            w / 2.0,
            h - 12.0,
            xml_escape(labels[0])
        );
        let _ = writeln!(
            svg,
            r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
            h / 2.0,
            h / 2.0,
            xml_escape(labels[1])
        );
        svg.push_str("</svg>\n");
        Ok(svg)
    }
}

pub(crate) fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
