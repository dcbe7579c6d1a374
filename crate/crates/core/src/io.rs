//! Delimited-text ingestion for long and wide data.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use log::warn;

use crate::design::{DesignLayout, FactorKind, FactorSpec, FormulaMode, ParsedFormula, Response};
use crate::error::{Error, Result};
use crate::estimation::{Dataset, Subject};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvDialect {
    pub separator: u8,
    pub decimal: char,
    pub has_header: bool,
}

impl Default for CsvDialect {
    fn default() -> Self {
        CsvDialect {
            separator: b',',
            decimal: '.',
            has_header: true,
        }
    }
}

/// Raw string cells; without a header row columns are named `V1..Vn`.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// File line of the first data row.
    first_line: usize,
}

impl Table {
    pub fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::UnknownColumn {
                name: name.to_string(),
                available: self.headers.join(", "),
            })
    }

    pub fn line_of(&self, row: usize) -> usize {
        self.first_line + row
    }
}

pub fn parse_table<R: Read>(reader: R, dialect: &CsvDialect) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(dialect.separator)
        .has_headers(false)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let mut headers = Vec::new();
    if dialect.has_header {
        match records.next() {
            Some(r) => headers = r?.iter().map(|s| s.to_string()).collect(),
            None => return Err(Error::InvalidArgument("input file is empty".into())),
        }
    }
    let mut rows = Vec::new();
    for r in records {
        rows.push(r?.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    }
    if !dialect.has_header {
        let n = rows.first().map(|r: &Vec<String>| r.len()).unwrap_or(0);
        headers = (1..=n).map(|k| format!("V{k}")).collect();
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument("input file has no data rows".into()));
    }
    Ok(Table {
        headers,
        rows,
        first_line: if dialect.has_header { 2 } else { 1 },
    })
}

pub fn read_table(path: &Path, dialect: &CsvDialect) -> Result<Table> {
    let file = std::fs::File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    parse_table(file, dialect)
}

fn is_na(s: &str) -> bool {
    s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan")
}

/// `None` for missing values.
pub fn parse_value(s: &str, decimal: char) -> Option<Option<f64>> {
    let s = s.trim();
    if is_na(s) {
        return Some(None);
    }
    let owned;
    let s = if decimal != '.' {
        if s.contains('.') {
            return None;
        }
        owned = s.replace(decimal, ".");
        owned.as_str()
    } else {
        s
    };
    s.parse::<f64>().ok().filter(|v| v.is_finite()).map(Some)
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    pub nested_levels_unique: bool,
    /// Drop subjects with missing values instead of failing.
    pub na_drop: bool,
    /// Long MANOVA: column holding the component label.
    pub dimension: Option<String>,
}

#[derive(Debug, Clone)]
pub struct LoadedData {
    pub dataset: Dataset,
    pub layout: DesignLayout,
    pub dropped_subjects: Vec<String>,
}

struct RawRow {
    line: usize,
    subject: String,
    whole: Vec<String>,
    /// Sub-plot labels (RM) or dimension label (long MANOVA).
    slot: Vec<String>,
    value: Option<f64>,
}

fn factor_label(table: &Table, row: usize, col: usize) -> Result<String> {
    let v = &table.rows[row][col];
    if is_na(v) {
        return Err(Error::MissingData {
            subject: format!("(line {})", table.line_of(row)),
            detail: format!("factor column `{}` is empty", table.headers[col]),
        });
    }
    Ok(v.clone())
}

fn numeric(table: &Table, row: usize, col: usize, decimal: char) -> Result<Option<f64>> {
    parse_value(&table.rows[row][col], decimal).ok_or_else(|| Error::ParseNumber {
        row: table.line_of(row),
        column: table.headers[col].clone(),
        value: table.rows[row][col].clone(),
    })
}

/// Long data: one row per measurement.
///
/// In RM mode the last `n_subplot` formula factors are sub-plot factors and
/// index the components. In MANOVA mode components come from the dimension
/// column, or else from the order of each subject's rows.
pub fn load_long(
    table: &Table,
    parsed: &ParsedFormula,
    mode: FormulaMode,
    subject_column: &str,
    n_subplot: usize,
    dialect: &CsvDialect,
    opts: &IngestOptions,
) -> Result<LoadedData> {
    let response = match &parsed.response {
        Response::Single(r) => r.clone(),
        Response::Columns(_) => {
            return Err(Error::Formula(
                "long data needs a single response column, not cbind(...)".into(),
            ))
        }
    };
    let n_sub = if mode == FormulaMode::Rm {
        n_subplot
    } else {
        0
    };
    if n_sub > parsed.factors.len() {
        return Err(Error::InvalidArgument(format!(
            "{n_sub} sub-plot factors requested but the formula has only {} factors",
            parsed.factors.len()
        )));
    }
    let n_whole = parsed.factors.len() - n_sub;
    let resp_col = table.column(&response)?;
    let subj_col = table.column(subject_column)?;
    let factor_cols: Vec<usize> = parsed
        .factors
        .iter()
        .map(|f| table.column(f))
        .collect::<Result<_>>()?;
    let dim_col = match (&opts.dimension, mode) {
        (Some(d), FormulaMode::ManovaLong) => Some(table.column(d)?),
        _ => None,
    };

    let mut raw = Vec::with_capacity(table.rows.len());
    let mut occurrences: HashMap<String, usize> = HashMap::new();
    for r in 0..table.rows.len() {
        let subject = table.rows[r][subj_col].clone();
        if is_na(&subject) {
            return Err(Error::MissingData {
                subject: format!("(line {})", table.line_of(r)),
                detail: format!("subject column `{subject_column}` is empty"),
            });
        }
        let whole = factor_cols[..n_whole]
            .iter()
            .map(|&c| factor_label(table, r, c))
            .collect::<Result<Vec<_>>>()?;
        let slot = match mode {
            FormulaMode::Rm => factor_cols[n_whole..]
                .iter()
                .map(|&c| factor_label(table, r, c))
                .collect::<Result<Vec<_>>>()?,
            _ => match dim_col {
                Some(c) => vec![factor_label(table, r, c)?],
                None => {
                    let k = occurrences.entry(subject.clone()).or_insert(0);
                    *k += 1;
                    vec![format!("Mean {k}")]
                }
            },
        };
        raw.push(RawRow {
            line: table.line_of(r),
            value: numeric(table, r, resp_col, dialect.decimal)?,
            subject,
            whole,
            slot,
        });
    }

    let mut dropped: Vec<String> = Vec::new();
    for row in &raw {
        if row.value.is_none() {
            if !opts.na_drop {
                return Err(Error::MissingData {
                    subject: row.subject.clone(),
                    detail: format!("response `{response}` is missing on line {}", row.line),
                });
            }
            if !dropped.contains(&row.subject) {
                dropped.push(row.subject.clone());
            }
        }
    }
    let kept: Vec<&RawRow> = raw
        .iter()
        .filter(|r| !dropped.contains(&r.subject))
        .collect();

    // Subjects in order of first appearance, with a consistent whole-plot cell.
    let mut order: Vec<String> = Vec::new();
    let mut whole_of: HashMap<&str, &Vec<String>> = HashMap::new();
    for row in &kept {
        match whole_of.get(row.subject.as_str()) {
            None => {
                order.push(row.subject.clone());
                whole_of.insert(&row.subject, &row.whole);
            }
            Some(w) if **w != row.whole => {
                return Err(Error::SubjectInMultipleCells {
                    subject: row.subject.clone(),
                    first: w.join(":"),
                    second: row.whole.join(":"),
                })
            }
            Some(_) => {}
        }
    }
    if order.is_empty() {
        return Err(Error::InvalidArgument("no complete subjects left".into()));
    }

    let (sub_specs, dims) = match mode {
        FormulaMode::Rm => {
            let specs = (0..n_sub)
                .map(|k| {
                    FactorSpec::from_observed(
                        &parsed.factors[n_whole + k],
                        FactorKind::SubPlot,
                        kept.iter().map(|r| r.slot[k].as_str()),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            (specs, Vec::new())
        }
        _ => {
            let mut dims: Vec<String> = Vec::new();
            for r in &kept {
                if !dims.contains(&r.slot[0]) {
                    dims.push(r.slot[0].clone());
                }
            }
            if dim_col.is_none() {
                // occurrence labels "Mean k" appear in increasing k
                dims.sort_by_key(|l| l[5..].parse::<usize>().unwrap_or(0));
            }
            (Vec::new(), dims)
        }
    };
    let whole_observed: Vec<Vec<String>> =
        order.iter().map(|s| whole_of[s.as_str()].clone()).collect();
    let layout = DesignLayout::build(
        parsed,
        mode.design_mode(),
        &whole_observed,
        sub_specs,
        dims,
        opts.nested_levels_unique,
    )?;
    let d = layout.d();
    let dim_index: HashMap<&str, usize> = layout
        .components
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();

    let mut values: HashMap<&str, Vec<Option<f64>>> =
        order.iter().map(|s| (s.as_str(), vec![None; d])).collect();
    for row in &kept {
        let comp = match mode {
            FormulaMode::Rm => layout.component_index(&row.slot),
            _ => dim_index.get(row.slot[0].as_str()).copied(),
        }
        .expect("component labels come from the data");
        let slot = &mut values.get_mut(row.subject.as_str()).expect("known subject")[comp];
        if slot.is_some() {
            return Err(Error::DuplicateRecord {
                subject: row.subject.clone(),
                component: layout.components[comp].clone(),
            });
        }
        *slot = row.value;
    }

    let mut subjects = Vec::with_capacity(order.len());
    for id in &order {
        let vals = &values[id.as_str()];
        let missing: Vec<&str> = vals
            .iter()
            .zip(&layout.components)
            .filter(|(v, _)| v.is_none())
            .map(|(_, c)| c.as_str())
            .collect();
        if !missing.is_empty() {
            if opts.na_drop {
                dropped.push(id.clone());
                continue;
            }
            return Err(Error::MissingData {
                subject: id.clone(),
                detail: format!("no measurement for component(s) {}", missing.join(", ")),
            });
        }
        let cell = layout
            .cell_index(whole_of[id.as_str()])
            .expect("cells come from the data");
        subjects.push(Subject {
            id: id.clone(),
            cell,
            values: vals.iter().map(|v| v.expect("checked")).collect(),
        });
    }
    finish(layout, subjects, dropped)
}

/// Wide data: one row per subject, response columns from `cbind(...)`.
pub fn load_wide(
    table: &Table,
    parsed: &ParsedFormula,
    dialect: &CsvDialect,
    opts: &IngestOptions,
) -> Result<LoadedData> {
    let responses = match &parsed.response {
        Response::Columns(c) => c.clone(),
        Response::Single(r) => vec![r.clone()],
    };
    let resp_cols: Vec<usize> = responses
        .iter()
        .map(|r| table.column(r))
        .collect::<Result<_>>()?;
    let factor_cols: Vec<usize> = parsed
        .factors
        .iter()
        .map(|f| table.column(f))
        .collect::<Result<_>>()?;

    let mut dropped = Vec::new();
    let mut rows = Vec::new();
    for r in 0..table.rows.len() {
        let id = format!("{}", r + 1);
        let whole = factor_cols
            .iter()
            .map(|&c| factor_label(table, r, c))
            .collect::<Result<Vec<_>>>()?;
        let vals = resp_cols
            .iter()
            .map(|&c| numeric(table, r, c, dialect.decimal))
            .collect::<Result<Vec<_>>>()?;
        if let Some(k) = vals.iter().position(|v| v.is_none()) {
            if opts.na_drop {
                dropped.push(id);
                continue;
            }
            return Err(Error::MissingData {
                subject: id,
                detail: format!(
                    "response `{}` is missing on line {}",
                    responses[k],
                    table.line_of(r)
                ),
            });
        }
        rows.push((
            id,
            whole,
            vals.into_iter()
                .map(|v| v.expect("checked"))
                .collect::<Vec<_>>(),
        ));
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no complete subjects left".into()));
    }
    let whole_observed: Vec<Vec<String>> = rows.iter().map(|r| r.1.clone()).collect();
    let layout = DesignLayout::build(
        parsed,
        FormulaMode::ManovaWide.design_mode(),
        &whole_observed,
        Vec::new(),
        responses,
        opts.nested_levels_unique,
    )?;
    let subjects = rows
        .into_iter()
        .map(|(id, whole, values)| Subject {
            cell: layout.cell_index(&whole).expect("cells come from the data"),
            id,
            values,
        })
        .collect();
    finish(layout, subjects, dropped)
}

fn finish(
    layout: DesignLayout,
    subjects: Vec<Subject>,
    dropped: Vec<String>,
) -> Result<LoadedData> {
    let mut counts = vec![0usize; layout.a()];
    for s in &subjects {
        counts[s.cell] += 1;
    }
    if let Some(i) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyCell {
            cell: layout.cell_label(i),
        });
    }
    if !dropped.is_empty() {
        warn!(
            "dropped {} subject(s) with missing values: {}",
            dropped.len(),
            dropped.join(", ")
        );
    }
    let labels = (0..layout.a()).map(|i| layout.cell_label(i)).collect();
    let dataset =
        Dataset::from_subjects(layout.a(), layout.d(), subjects)?.with_cell_labels(labels);
    Ok(LoadedData {
        dataset,
        layout,
        dropped_subjects: dropped,
    })
}

pub fn read_long_csv(
    path: &Path,
    parsed: &ParsedFormula,
    mode: FormulaMode,
    subject_column: &str,
    n_subplot: usize,
    dialect: &CsvDialect,
    opts: &IngestOptions,
) -> Result<LoadedData> {
    let table = read_table(path, dialect)?;
    load_long(
        &table,
        parsed,
        mode,
        subject_column,
        n_subplot,
        dialect,
        opts,
    )
}

pub fn read_wide_csv(
    path: &Path,
    parsed: &ParsedFormula,
    dialect: &CsvDialect,
    opts: &IngestOptions,
) -> Result<LoadedData> {
    let table = read_table(path, dialect)?;
    load_wide(&table, parsed, dialect, opts)
}
