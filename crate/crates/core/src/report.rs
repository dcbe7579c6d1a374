//! Text and JSON rendering of an [`OutputReport`].

use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::analysis::OutputReport;
use crate::design::DesignMode;
use crate::statistics::{Df2, TestResult};

fn fmt_num(v: f64, dec: usize) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "Inf".into() } else { "-Inf".into() };
    }
    let s = format!("{v:.dec$}");
    // no "-0.000"
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn fmt_opt(v: Option<f64>, dec: usize) -> String {
    v.map(|x| fmt_num(x, dec)).unwrap_or_else(|| "NA".into())
}

/// Percent label of a confidence level, e.g. `95` or `97.5`.
pub fn level_label(level: f64) -> String {
    let pct = format!("{:.6}", level * 100.0);
    pct.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Columns padded to a common width; the first `left` columns left-aligned.
fn table(header: &[String], rows: &[Vec<String>], left: usize) -> String {
    let ncol = header.len();
    let mut width = vec![0usize; ncol];
    for row in std::iter::once(header).chain(rows.iter().map(|r| r.as_slice())) {
        for (j, c) in row.iter().enumerate() {
            width[j] = width[j].max(c.chars().count());
        }
    }
    let mut out = String::new();
    for row in std::iter::once(header).chain(rows.iter().map(|r| r.as_slice())) {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(j, c)| {
                if j < left {
                    format!("{c:<w$}", w = width[j])
                } else {
                    format!("{c:>w$}", w = width[j])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn descriptive(report: &OutputReport) -> String {
    let d = &report.descriptive;
    let dec = report.decimals;
    let mut header = d.label_names.clone();
    header.push("n".into());
    let rows: Vec<Vec<String>>;
    match d.mode {
        DesignMode::Rm => {
            let pct = level_label(d.level);
            header.push("Means".into());
            header.push(format!("Lower {pct} %"));
            header.push(format!("Upper {pct} %"));
            rows = d
                .rows
                .iter()
                .map(|r| {
                    let mut v = r.labels.clone();
                    v.push(r.n.to_string());
                    v.push(fmt_num(r.means[0], dec));
                    v.push(fmt_num(r.lower[0], dec));
                    v.push(fmt_num(r.upper[0], dec));
                    v
                })
                .collect();
        }
        DesignMode::Manova => {
            header.extend(d.mean_names.iter().cloned());
            rows = d
                .rows
                .iter()
                .map(|r| {
                    let mut v = r.labels.clone();
                    v.push(r.n.to_string());
                    v.extend(r.means.iter().map(|&m| fmt_num(m, dec)));
                    v
                })
                .collect();
        }
    }
    table(&header, &rows, d.label_names.len())
}

fn wts_table(rows: &[TestResult], dec: usize) -> String {
    let header: Vec<String> = ["", "Test statistic", "df", "p-value"]
        .map(String::from)
        .to_vec();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|t| {
            vec![
                t.effect_name.clone(),
                fmt_num(t.statistic, dec),
                fmt_opt(t.df1, 0),
                fmt_opt(t.p_asymptotic, dec),
            ]
        })
        .collect();
    table(&header, &body, 1)
}

fn ats_table(rows: &[TestResult], dec: usize) -> String {
    let header: Vec<String> = ["", "Test statistic", "df1", "df2", "p-value"]
        .map(String::from)
        .to_vec();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|t| {
            vec![
                t.effect_name.clone(),
                fmt_num(t.statistic, dec),
                fmt_opt(t.df1, dec),
                match t.df2 {
                    Some(Df2::Finite(v)) => fmt_num(v, dec),
                    Some(Df2::Infinite) => "Inf".into(),
                    None => "NA".into(),
                },
                fmt_opt(t.p_asymptotic, dec),
            ]
        })
        .collect();
    table(&header, &body, 1)
}

fn mats_table(rows: &[TestResult], dec: usize) -> String {
    let header: Vec<String> = ["", "Test statistic"].map(String::from).to_vec();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|t| vec![t.effect_name.clone(), fmt_num(t.statistic, dec)])
        .collect();
    table(&header, &body, 1)
}

pub fn render_text(report: &OutputReport) -> String {
    let dec = report.decimals;
    let mut out = String::new();
    let _ = writeln!(out, "Call:\n{}\n", report.call);
    if !report.dropped_subjects.is_empty() {
        let _ = writeln!(
            out,
            "Dropped {} subject(s) with missing values: {}\n",
            report.dropped_subjects.len(),
            report.dropped_subjects.join(", ")
        );
    }
    let _ = writeln!(out, "Descriptive:\n{}", descriptive(report));
    let _ = writeln!(
        out,
        "Wald-Type Statistic (WTS):\n{}",
        wts_table(&report.wts, dec)
    );
    if let Some(ats) = &report.ats {
        let _ = writeln!(out, "ANOVA-Type Statistic (ATS):\n{}", ats_table(ats, dec));
    }
    if let Some(mats) = &report.mats {
        let _ = writeln!(
            out,
            "modified ANOVA-Type Statistic (MATS):\n{}",
            mats_table(mats, dec)
        );
    }

    let rs = &report.resampling;
    let mut header = vec![String::new()];
    header.extend(
        rs.kinds
            .iter()
            .map(|k| format!("{} ({})", rs.scheme, k.label())),
    );
    let body: Vec<Vec<String>> = rs
        .rows
        .iter()
        .map(|r| {
            let mut v = vec![r.effect.clone()];
            v.extend(r.p_values.iter().map(|&p| fmt_opt(p, dec)));
            v
        })
        .collect();
    let _ = writeln!(
        out,
        "p-values resampling ({} iterations, seed {}):\n{}",
        rs.iterations,
        rs.seed,
        table(&header, &body, 1)
    );

    if let Some(cr) = &report.confidence_region {
        let _ = writeln!(out, "Confidence region for {}:", cr.effect);
        let _ = writeln!(
            out,
            "Center:\n{}",
            cr.center
                .iter()
                .map(|&c| fmt_num(c, dec))
                .collect::<Vec<_>>()
                .join("\n")
        );
        let _ = writeln!(
            out,
            "\nScale:\n{}",
            cr.scales
                .iter()
                .map(|&s| fmt_num(s, dec))
                .collect::<Vec<_>>()
                .join("  ")
        );
        let axes: Vec<Vec<String>> = cr
            .axes
            .iter()
            .map(|row| row.iter().map(|&v| fmt_num(v, dec)).collect())
            .collect();
        let header: Vec<String> = (1..=cr.axes.len()).map(|k| format!("[{k}]")).collect();
        let _ = writeln!(out, "\nEigenvectors:\n{}", table(&header, &axes, 0));
    }
    out.trim_end().to_string() + "\n"
}

fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("NaN")
    } else if v > 0.0 {
        json!("Inf")
    } else {
        json!("-Inf")
    }
}

fn test_json(t: &TestResult) -> Value {
    json!({
        "effect": t.effect_name,
        "statistic": num(t.statistic),
        "df1": t.df1.map(num),
        "df2": t.df2.map(|d| match d {
            Df2::Finite(v) => num(v),
            Df2::Infinite => json!("Inf"),
        }),
        "p_value": t.p_asymptotic.map(num),
        "p_value_resampling": t.p_resampling.map(num),
    })
}

/// Unrounded machine-readable report.
pub fn to_json(report: &OutputReport) -> serde_json::Result<String> {
    let d = &report.descriptive;
    let descriptive = json!({
        "label_names": d.label_names,
        "mean_names": d.mean_names,
        "level": d.level,
        "rows": d.rows.iter().map(|r| json!({
            "labels": r.labels,
            "n": r.n,
            "means": r.means.iter().map(|&v| num(v)).collect::<Vec<_>>(),
            "lower": r.lower.iter().map(|&v| num(v)).collect::<Vec<_>>(),
            "upper": r.upper.iter().map(|&v| num(v)).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    });
    let rs = &report.resampling;
    let mut doc = json!({
        "call": report.call,
        "mode": report.mode,
        "alpha": report.alpha,
        "ci_method": report.ci_method,
        "n_subjects": report.n_subjects,
        "dropped_subjects": report.dropped_subjects,
        "descriptive": descriptive,
        "wts": report.wts.iter().map(test_json).collect::<Vec<_>>(),
        "resampling": {
            "scheme": rs.scheme.label(),
            "iterations": rs.iterations,
            "seed": rs.seed,
            "kinds": rs.kinds.iter().map(|k| k.label()).collect::<Vec<_>>(),
            "rows": rs.rows.iter().map(|r| json!({
                "effect": r.effect,
                "p_values": r.p_values.iter().map(|p| p.map(num)).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        },
    });
    if let Some(ats) = &report.ats {
        doc["ats"] = json!(ats.iter().map(test_json).collect::<Vec<_>>());
    }
    if let Some(mats) = &report.mats {
        doc["mats"] = json!(mats.iter().map(test_json).collect::<Vec<_>>());
    }
    if let Some(cr) = &report.confidence_region {
        doc["confidence_region"] = json!({
            "effect": cr.effect,
            "center": cr.center.iter().map(|&v| num(v)).collect::<Vec<_>>(),
            "scales": cr.scales.iter().map(|&v| num(v)).collect::<Vec<_>>(),
            "axes": cr.axes,
            "critical_value": num(cr.critical_value),
        });
    }
    serde_json::to_string_pretty(&doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_num(11.16749, 3), "11.167");
        assert_eq!(fmt_num(-0.0001, 3), "0.000");
        assert_eq!(fmt_num(-0.0006, 3), "-0.001");
        assert_eq!(fmt_num(f64::INFINITY, 3), "Inf");
        assert_eq!(fmt_opt(None, 3), "NA");
        assert_eq!(fmt_num(2.0, 0), "2");
    }

    #[test]
    fn level_labels() {
        assert_eq!(level_label(0.95), "95");
        assert_eq!(level_label(0.99), "99");
        assert_eq!(level_label(1.0 - 0.025), "97.5");
    }

    #[test]
    fn table_alignment() {
        let t = table(
            &["".into(), "x".into()],
            &[
                vec!["Group".into(), "1.000".into()],
                vec!["T".into(), "10.5".into()],
            ],
            1,
        );
        assert_eq!(t, "           x\nGroup  1.000\nT       10.5\n");
    }
}
