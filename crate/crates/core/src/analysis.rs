//! End-to-end pipeline from a data file to an [`OutputReport`].

use std::path::PathBuf;

use log::info;
use serde::Serialize;

use crate::confidence::{self, CiMethod, ConfidenceEllipsoid};
use crate::design::{
    self, parse_formula, DesignLayout, DesignMode, FormulaMode, Hypothesis, ParsedFormula,
};
use crate::error::{Error, Result, Stage};
use crate::estimation::{descriptive_table, summarize, DescriptiveTable, ModelFit};
use crate::io::{self, CsvDialect, IngestOptions, LoadedData};
use crate::resampling::{self, ResamplingConfig, Scheme};
use crate::statistics::{self, StatisticKind, TestResult};

#[derive(Debug, Clone)]
pub struct AnalysisRequest {
    pub mode: FormulaMode,
    pub formula: String,
    pub data_path: PathBuf,
    /// Subject column (RM and long MANOVA).
    pub subject: Option<String>,
    /// Component label column for long MANOVA.
    pub dimension: Option<String>,
    pub n_subplot_factors: usize,
    pub iterations: usize,
    pub alpha: f64,
    /// Defaults to `Perm` for RM and `paramBS` for MANOVA.
    pub resampling: Option<Scheme>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub ci_method: CiMethod,
    pub decimals: usize,
    pub nested_levels_unique: bool,
    pub na_drop: bool,
    pub dialect: CsvDialect,
    /// Effect for a confidence region (MANOVA); `Some("")` picks the only effect.
    pub confidence_region: Option<String>,
}

impl AnalysisRequest {
    pub fn new(
        mode: FormulaMode,
        formula: impl Into<String>,
        data_path: impl Into<PathBuf>,
    ) -> Self {
        AnalysisRequest {
            mode,
            formula: formula.into(),
            data_path: data_path.into(),
            subject: None,
            dimension: None,
            n_subplot_factors: 1,
            iterations: 10_000,
            alpha: 0.05,
            resampling: None,
            seed: None,
            workers: None,
            ci_method: CiMethod::TQuantile,
            decimals: 3,
            nested_levels_unique: false,
            na_drop: false,
            dialect: CsvDialect::default(),
            confidence_region: None,
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.resampling.unwrap_or(match self.mode {
            FormulaMode::Rm => Scheme::Perm,
            _ => Scheme::ParamBs,
        })
    }

    fn resampling_config(&self) -> ResamplingConfig {
        ResamplingConfig {
            scheme: self.scheme(),
            iterations: self.iterations,
            seed: self.seed,
            workers: self.workers,
            alpha: self.alpha,
        }
    }

    fn validate(&self) -> Result<()> {
        self.resampling_config().validate(self.mode.design_mode())?;
        if self.mode != FormulaMode::ManovaWide && self.subject.is_none() {
            return Err(Error::InvalidArgument(
                "a subject column is required for long data".into(),
            ));
        }
        if self.mode == FormulaMode::Rm && self.n_subplot_factors == 0 {
            return Err(Error::InvalidArgument(
                "repeated measures designs need at least one sub-plot factor".into(),
            ));
        }
        if self.confidence_region.is_some() && self.mode == FormulaMode::Rm {
            return Err(Error::InvalidArgument(
                "confidence regions are only available for MANOVA designs".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResamplingRow {
    pub effect: String,
    /// One entry per [`ResamplingTable::kinds`]; `None` prints as NA.
    pub p_values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResamplingTable {
    pub scheme: Scheme,
    pub iterations: usize,
    pub seed: u64,
    pub kinds: Vec<StatisticKind>,
    pub rows: Vec<ResamplingRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfidenceRegion {
    pub effect: String,
    pub center: Vec<f64>,
    pub scales: Vec<f64>,
    /// Row-major `r x r`, column `k` is the direction of `scales[k]`.
    pub axes: Vec<Vec<f64>>,
    pub critical_value: f64,
    #[serde(skip)]
    pub ellipsoid: ConfidenceEllipsoid,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputReport {
    pub call: String,
    pub mode: FormulaMode,
    pub alpha: f64,
    pub decimals: usize,
    pub ci_method: CiMethod,
    pub n_subjects: usize,
    pub dropped_subjects: Vec<String>,
    pub descriptive: DescriptiveTable,
    pub wts: Vec<TestResult>,
    /// RM only.
    pub ats: Option<Vec<TestResult>>,
    /// MANOVA only.
    pub mats: Option<Vec<TestResult>>,
    pub resampling: ResamplingTable,
    pub confidence_region: Option<ConfidenceRegion>,
    #[serde(skip)]
    pub layout: DesignLayout,
    #[serde(skip)]
    pub fit: ModelFit,
}

pub fn load(request: &AnalysisRequest) -> Result<(ParsedFormula, LoadedData)> {
    request.validate().map_err(|e| e.in_stage(Stage::Formula))?;
    let parsed =
        parse_formula(&request.formula, request.mode).map_err(|e| e.in_stage(Stage::Formula))?;
    let opts = IngestOptions {
        nested_levels_unique: request.nested_levels_unique,
        na_drop: request.na_drop,
        dimension: request.dimension.clone(),
    };
    let loaded = match request.mode {
        FormulaMode::ManovaWide => {
            io::read_wide_csv(&request.data_path, &parsed, &request.dialect, &opts)
        }
        mode => io::read_long_csv(
            &request.data_path,
            &parsed,
            mode,
            request.subject.as_deref().unwrap_or_default(),
            request.n_subplot_factors,
            &request.dialect,
            &opts,
        ),
    }
    .map_err(|e| e.in_stage(Stage::Ingestion))?;
    Ok((parsed, loaded))
}

pub fn run_analysis(request: &AnalysisRequest) -> Result<OutputReport> {
    let (parsed, loaded) = load(request)?;
    analyze(request, &parsed, loaded)
}

/// Pipeline after ingestion.
pub fn analyze(
    request: &AnalysisRequest,
    parsed: &ParsedFormula,
    loaded: LoadedData,
) -> Result<OutputReport> {
    request.validate().map_err(|e| e.in_stage(Stage::Formula))?;
    let LoadedData {
        dataset,
        layout,
        dropped_subjects,
    } = loaded;
    let fit = summarize(&dataset).map_err(|e| e.in_stage(Stage::Summary))?;
    let hypotheses: Vec<Hypothesis> =
        design::all_hypotheses(&layout).map_err(|e| e.in_stage(Stage::Hypotheses))?;

    let second = match layout.mode {
        DesignMode::Rm => StatisticKind::Ats,
        DesignMode::Manova => StatisticKind::Mats,
    };
    let stats = |kind| -> Result<Vec<TestResult>> {
        hypotheses
            .iter()
            .map(|h| statistics::test(&fit, h, kind))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_stage(Stage::Statistics))
    };
    let mut wts = stats(StatisticKind::Wts)?;
    let mut other = stats(second)?;

    let config = request.resampling_config();
    let samples = dataset.samples();
    let kinds = [StatisticKind::Wts, second];
    let run = resampling::run_resampling(&samples, &fit, &hypotheses, &kinds, &config)
        .map_err(|e| e.in_stage(Stage::Resampling))?;
    info!(
        "{} resampling with {} iterations, seed {}",
        run.scheme, run.iterations, run.seed
    );
    for t in wts.iter_mut().chain(other.iter_mut()) {
        t.p_resampling = run.get(&t.effect_name, t.kind).and_then(|r| r.p_value);
    }
    let rows = hypotheses
        .iter()
        .map(|h| ResamplingRow {
            effect: h.effect_name.clone(),
            p_values: kinds
                .iter()
                .map(|&k| run.get(&h.effect_name, k).and_then(|r| r.p_value))
                .collect(),
        })
        .collect();

    let cell_quantiles = match request.ci_method {
        CiMethod::TQuantile => None,
        CiMethod::Resampling => Some(
            resampling::resampled_cell_quantiles(&samples, &fit, &config, run.seed)
                .map_err(|e| e.in_stage(Stage::Confidence))?,
        ),
    };
    let descriptive = descriptive_table(
        &fit,
        &layout,
        request.alpha,
        request.ci_method,
        cell_quantiles.as_deref(),
    )
    .map_err(|e| e.in_stage(Stage::Confidence))?;

    let confidence_region = match &request.confidence_region {
        None => None,
        Some(name) => Some(
            confidence_region(&layout, &fit, &run, name)
                .map_err(|e| e.in_stage(Stage::Confidence))?,
        ),
    };

    let (ats, mats) = match layout.mode {
        DesignMode::Rm => (Some(other), None),
        DesignMode::Manova => (None, Some(other)),
    };
    Ok(OutputReport {
        call: parsed.text.clone(),
        mode: request.mode,
        alpha: request.alpha,
        decimals: request.decimals,
        ci_method: request.ci_method,
        n_subjects: dataset.subjects().len(),
        dropped_subjects,
        descriptive,
        wts,
        ats,
        mats,
        resampling: ResamplingTable {
            scheme: run.scheme,
            iterations: run.iterations,
            seed: run.seed,
            kinds: kinds.to_vec(),
            rows,
        },
        confidence_region,
        layout,
        fit,
    })
}

fn confidence_region(
    layout: &DesignLayout,
    fit: &ModelFit,
    run: &resampling::ResamplingRun,
    name: &str,
) -> Result<ConfidenceRegion> {
    let effect = if name.is_empty() {
        match layout.effects.as_slice() {
            [only] => only.name.clone(),
            effects => {
                return Err(Error::InvalidArgument(format!(
                    "the design has several effects, choose one for the confidence region: {}",
                    effects
                        .iter()
                        .map(|e| e.name.as_str())
                        .collect::<Vec<_>>()
                        .join(", ")
                )))
            }
        }
    } else {
        name.to_string()
    };
    let contrast = design::effect_contrast(layout, &effect)?;
    let crit = run
        .get(&effect, StatisticKind::Mats)
        .and_then(|r| r.critical_value)
        .ok_or_else(|| Error::UnknownEffect(effect.clone()))?;
    let ellipsoid = confidence::conf_ellipsoid(fit, &contrast, crit)?;
    let r = ellipsoid.dim();
    Ok(ConfidenceRegion {
        effect,
        center: ellipsoid.center.iter().copied().collect(),
        scales: ellipsoid.scales.clone(),
        axes: (0..r)
            .map(|i| (0..r).map(|j| ellipsoid.axes[(i, j)]).collect())
            .collect(),
        critical_value: crit,
        ellipsoid,
    })
}
