//! Per-cell summaries and pooled quantities.

use std::collections::HashMap;

use nalgebra::DVector;
use serde::Serialize;

use crate::confidence::{self, CiMethod};
use crate::design::{DesignLayout, DesignMode};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// One measurement: `cell` and `component` are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub subject: String,
    pub cell: usize,
    pub component: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: String,
    pub cell: usize,
    pub values: Vec<f64>,
}

/// Canonical dataset: complete subjects, each assigned to one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    a: usize,
    d: usize,
    subjects: Vec<Subject>,
    cell_labels: Vec<String>,
}

/// Observations grouped by cell: one `n_i x d` matrix per cell, subjects
/// in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub cells: Vec<Matrix>,
}

impl Samples {
    pub fn d(&self) -> usize {
        self.cells.first().map_or(0, |c| c.ncols())
    }

    pub fn n_total(&self) -> usize {
        self.cells.iter().map(|c| c.nrows()).sum()
    }
}

fn default_labels(a: usize) -> Vec<String> {
    (1..=a).map(|i| format!("cell {i}")).collect()
}

impl Dataset {
    pub fn from_subjects(a: usize, d: usize, subjects: Vec<Subject>) -> Result<Dataset> {
        if a == 0 || d == 0 {
            return Err(Error::InvalidDimension(format!(
                "dataset needs a >= 1 and d >= 1, got a = {a}, d = {d}"
            )));
        }
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for s in &subjects {
            if s.cell >= a {
                return Err(Error::InvalidArgument(format!(
                    "subject `{}` has cell index {} but a = {a}",
                    s.id, s.cell
                )));
            }
            if s.values.len() != d {
                return Err(Error::MissingData {
                    subject: s.id.clone(),
                    detail: format!("{} of {d} components present", s.values.len()),
                });
            }
            if let Some(v) = s.values.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("value {v} of subject `{}`", s.id)));
            }
            if let Some(&other) = seen.get(s.id.as_str()) {
                return Err(Error::SubjectInMultipleCells {
                    subject: s.id.clone(),
                    first: format!("cell {}", other + 1),
                    second: format!("cell {}", s.cell + 1),
                });
            }
            seen.insert(&s.id, s.cell);
        }
        Ok(Dataset {
            a,
            d,
            subjects,
            cell_labels: default_labels(a),
        })
    }

    /// Assemble subjects from individual records; subject order is order of
    /// first appearance.
    pub fn from_records(a: usize, d: usize, records: &[Record]) -> Result<Dataset> {
        let mut order: Vec<String> = Vec::new();
        let mut by_subject: HashMap<String, (usize, Vec<Option<f64>>)> = HashMap::new();
        for r in records {
            if r.component >= d {
                return Err(Error::InvalidArgument(format!(
                    "record of subject `{}` has component index {} but d = {d}",
                    r.subject, r.component
                )));
            }
            let entry = by_subject.entry(r.subject.clone()).or_insert_with(|| {
                order.push(r.subject.clone());
                (r.cell, vec![None; d])
            });
            if entry.0 != r.cell {
                return Err(Error::SubjectInMultipleCells {
                    subject: r.subject.clone(),
                    first: format!("cell {}", entry.0 + 1),
                    second: format!("cell {}", r.cell + 1),
                });
            }
            if entry.1[r.component].is_some() {
                return Err(Error::DuplicateRecord {
                    subject: r.subject.clone(),
                    component: format!("{}", r.component + 1),
                });
            }
            entry.1[r.component] = Some(r.value);
        }
        let mut subjects = Vec::with_capacity(order.len());
        for id in order {
            let (cell, vals) = by_subject.remove(&id).expect("inserted above");
            let present = vals.iter().filter(|v| v.is_some()).count();
            if present != d {
                return Err(Error::MissingData {
                    subject: id,
                    detail: format!("{present} of {d} components present"),
                });
            }
            subjects.push(Subject {
                id,
                cell,
                values: vals.into_iter().map(|v| v.expect("checked")).collect(),
            });
        }
        Dataset::from_subjects(a, d, subjects)
    }

    pub fn with_cell_labels(mut self, labels: Vec<String>) -> Dataset {
        if labels.len() == self.a {
            self.cell_labels = labels;
        }
        self
    }

    pub fn a(&self) -> usize {
        self.a
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn cell_labels(&self) -> &[String] {
        &self.cell_labels
    }

    pub fn records(&self) -> Vec<Record> {
        self.subjects
            .iter()
            .flat_map(|s| {
                s.values.iter().enumerate().map(move |(k, &v)| Record {
                    subject: s.id.clone(),
                    cell: s.cell,
                    component: k,
                    value: v,
                })
            })
            .collect()
    }

    pub fn cell_sizes(&self) -> Vec<usize> {
        let mut n = vec![0; self.a];
        for s in &self.subjects {
            n[s.cell] += 1;
        }
        n
    }

    pub fn samples(&self) -> Samples {
        let sizes = self.cell_sizes();
        let mut cells: Vec<Matrix> = sizes.iter().map(|&n| Matrix::zeros(n, self.d)).collect();
        let mut fill = vec![0usize; self.a];
        for s in &self.subjects {
            let row = fill[s.cell];
            for (k, &v) in s.values.iter().enumerate() {
                cells[s.cell][(row, k)] = v;
            }
            fill[s.cell] += 1;
        }
        Samples { cells }
    }
}

#[derive(Debug, Clone)]
pub struct CellSummary {
    pub n: usize,
    pub mean: DVector<f64>,
    /// Unbiased covariance (divisor `n - 1`).
    pub cov: Matrix,
    pub variances: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct ModelFit {
    /// Stacked cell means `(X̄_1', ..., X̄_a')'`.
    pub mean_vector: DVector<f64>,
    /// `⊕ N V_i / n_i`
    pub sigma_n: Matrix,
    /// `⊕ N σ²_is / n_i` (diagonal)
    pub d_n: Matrix,
    pub n_total: usize,
    pub cells: Vec<CellSummary>,
}

impl ModelFit {
    pub fn a(&self) -> usize {
        self.cells.len()
    }

    pub fn d(&self) -> usize {
        self.cells.first().map_or(0, |c| c.mean.len())
    }
}

fn summarize_cell(x: &Matrix) -> CellSummary {
    let n = x.nrows();
    let d = x.ncols();
    let mean = DVector::from_fn(d, |k, _| x.column(k).sum() / n as f64);
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        for k in 0..d {
            row[k] -= mean[k];
        }
    }
    let cov = centered.tr_mul(&centered) / (n as f64 - 1.0);
    let cov = (&cov + cov.transpose()) * 0.5;
    let variances = cov.diagonal();
    CellSummary {
        n,
        mean,
        cov,
        variances,
    }
}

/// Fit from grouped samples; every cell needs at least two subjects.
pub fn fit_samples(samples: &Samples, cell_labels: &[String]) -> Result<ModelFit> {
    if samples.cells.is_empty() {
        return Err(Error::InvalidArgument("no cells".into()));
    }
    for (i, c) in samples.cells.iter().enumerate() {
        if c.nrows() < 2 {
            let cell = cell_labels
                .get(i)
                .cloned()
                .unwrap_or_else(|| format!("cell {}", i + 1));
            return Err(Error::InsufficientData { cell, n: c.nrows() });
        }
    }
    let cells: Vec<CellSummary> = samples.cells.iter().map(summarize_cell).collect();
    let n_total: usize = cells.iter().map(|c| c.n).sum();
    let big_n = n_total as f64;
    let d = samples.d();
    let a = cells.len();

    let mean_vector =
        DVector::from_iterator(a * d, cells.iter().flat_map(|c| c.mean.iter().copied()));
    let blocks: Vec<Matrix> = cells
        .iter()
        .map(|c| &c.cov * (big_n / c.n as f64))
        .collect();
    let sigma_n = linalg::direct_sum(&blocks)?;
    let d_n = Matrix::from_diagonal(&sigma_n.diagonal());
    Ok(ModelFit {
        mean_vector,
        sigma_n,
        d_n,
        n_total,
        cells,
    })
}

pub fn summarize(data: &Dataset) -> Result<ModelFit> {
    fit_samples(&data.samples(), data.cell_labels())
}

#[derive(Debug, Clone, Serialize)]
pub struct DescriptiveRow {
    /// Whole-plot labels, followed by sub-plot labels in RM mode.
    pub labels: Vec<String>,
    pub n: usize,
    pub means: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DescriptiveTable {
    pub mode: DesignMode,
    /// Column headers for `labels`.
    pub label_names: Vec<String>,
    /// Column headers for the mean columns (MANOVA) or `["Means"]` (RM).
    pub mean_names: Vec<String>,
    /// Confidence level `1 - alpha`.
    pub level: f64,
    pub rows: Vec<DescriptiveRow>,
}

/// Descriptive table with component-wise intervals.
///
/// For [`CiMethod::Resampling`], `cell_quantiles[i]` is the resampled WTS
/// critical value for cell `i`.
pub fn descriptive_table(
    fit: &ModelFit,
    layout: &DesignLayout,
    alpha: f64,
    method: CiMethod,
    cell_quantiles: Option<&[f64]>,
) -> Result<DescriptiveTable> {
    let interval = |i: usize, s: usize| -> Result<confidence::ConfidenceInterval> {
        let c = &fit.cells[i];
        match method {
            CiMethod::TQuantile => confidence::t_interval(c.mean[s], c.variances[s], c.n, alpha),
            CiMethod::Resampling => {
                let q = cell_quantiles
                    .and_then(|q| q.get(i).copied())
                    .ok_or_else(|| {
                        Error::InvalidArgument(
                            "resampling intervals need resampled cell quantiles".into(),
                        )
                    })?;
                confidence::resampling_interval(c.mean[s], c.variances[s], c.n, q, alpha)
            }
        }
    };

    let whole_names: Vec<String> = layout.whole_factors().map(|f| f.name.clone()).collect();
    let mut rows = Vec::new();
    let (label_names, mean_names) = match layout.mode {
        DesignMode::Rm => {
            for (i, cell) in layout.cells.iter().enumerate() {
                for s in 0..layout.d() {
                    let ci = interval(i, s)?;
                    let mut labels = cell.clone();
                    labels.extend(layout.component_levels[s].iter().cloned());
                    rows.push(DescriptiveRow {
                        labels,
                        n: fit.cells[i].n,
                        means: vec![ci.estimate],
                        lower: vec![ci.lower],
                        upper: vec![ci.upper],
                    });
                }
            }
            let mut names = whole_names;
            names.extend(layout.sub_factors().map(|f| f.name.clone()));
            (names, vec!["Means".to_string()])
        }
        DesignMode::Manova => {
            for (i, cell) in layout.cells.iter().enumerate() {
                let cis = (0..layout.d())
                    .map(|s| interval(i, s))
                    .collect::<Result<Vec<_>>>()?;
                rows.push(DescriptiveRow {
                    labels: cell.clone(),
                    n: fit.cells[i].n,
                    means: cis.iter().map(|c| c.estimate).collect(),
                    lower: cis.iter().map(|c| c.lower).collect(),
                    upper: cis.iter().map(|c| c.upper).collect(),
                });
            }
            (whole_names, layout.components.clone())
        }
    };
    Ok(DescriptiveTable {
        mode: layout.mode,
        label_names,
        mean_names,
        level: 1.0 - alpha,
        rows,
    })
}
