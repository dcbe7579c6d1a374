//! Parametric bootstrap, wild bootstrap and pooled permutation.
//!
//! Every (effect, iteration) pair draws from its own ChaCha stream, so the
//! resampled values depend only on the seed and never on scheduling.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::design::{DesignMode, Hypothesis};
use crate::error::{Error, Result};
use crate::estimation::{fit_samples, ModelFit, Samples};
use crate::linalg::{self, Matrix};
use crate::statistics::{self, StatisticKind};

/// Stream index reserved for the per-cell interval quantiles.
const CELL_QUANTILE_STREAM: u64 = 0xFFFF;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scheme {
    ParamBs,
    WildBs,
    Perm,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::ParamBs => "paramBS",
            Scheme::WildBs => "WildBS",
            Scheme::Perm => "Perm",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Scheme> {
        match s.to_ascii_lowercase().as_str() {
            "parambs" => Ok(Scheme::ParamBs),
            "wildbs" => Ok(Scheme::WildBs),
            "perm" => Ok(Scheme::Perm),
            _ => Err(Error::UnsupportedScheme(format!(
                "unknown resampling scheme `{s}` (expected paramBS, WildBS or Perm)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResamplingConfig {
    pub scheme: Scheme,
    pub iterations: usize,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub alpha: f64,
}

impl Default for ResamplingConfig {
    fn default() -> Self {
        ResamplingConfig {
            scheme: Scheme::ParamBs,
            iterations: 10_000,
            seed: None,
            workers: None,
            alpha: 0.05,
        }
    }
}

impl ResamplingConfig {
    pub fn validate(&self, mode: DesignMode) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidArgument(
                "number of resampling iterations must be at least 1".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidArgument(
                "number of workers must be at least 1".into(),
            ));
        }
        if self.scheme == Scheme::Perm && mode == DesignMode::Manova {
            return Err(Error::UnsupportedScheme(
                "the permutation scheme is only available for repeated measures designs: permuting components with different scalings is meaningless".into(),
            ));
        }
        Ok(())
    }

    /// The configured seed, or a fresh random one.
    pub fn resolve_seed(&self) -> u64 {
        self.seed.unwrap_or_else(rand::random)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResamplingResult {
    pub effect_name: String,
    pub statistic_kind: StatisticKind,
    pub observed: f64,
    #[serde(skip)]
    pub resampled_values: Vec<f64>,
    /// `None` when the combination is not available (ATS under permutation).
    pub p_value: Option<f64>,
    pub critical_value: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ResamplingRun {
    pub seed: u64,
    pub scheme: Scheme,
    pub iterations: usize,
    pub results: Vec<ResamplingResult>,
}

impl ResamplingRun {
    pub fn get(&self, effect: &str, kind: StatisticKind) -> Option<&ResamplingResult> {
        self.results
            .iter()
            .find(|r| r.effect_name == effect && r.statistic_kind == kind)
    }
}

pub fn stream_rng(seed: u64, effect_index: u64, iteration: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((effect_index << 48) | (iteration & ((1 << 48) - 1)));
    rng
}

/// `#{v >= observed} / B`
pub fn p_value(resampled: &[f64], observed: f64) -> f64 {
    if resampled.is_empty() {
        return f64::NAN;
    }
    let hits = resampled.iter().filter(|&&v| v >= observed).count();
    hits as f64 / resampled.len() as f64
}

/// The `ceil((1 - alpha) B)`-th order statistic.
pub fn critical_value(resampled: &[f64], alpha: f64) -> f64 {
    if resampled.is_empty() {
        return f64::NAN;
    }
    let mut sorted = resampled.to_vec();
    sorted.sort_by(f64::total_cmp);
    let b = sorted.len();
    let k = ((1.0 - alpha) * b as f64 - 1e-9).ceil() as usize;
    sorted[k.clamp(1, b) - 1]
}

/// Symmetric roots of the cell covariances.
pub fn cell_roots(fit: &ModelFit) -> Result<Vec<Matrix>> {
    fit.cells.iter().map(|c| linalg::psd_sqrt(&c.cov)).collect()
}

/// `n_i` draws of `L_i z` per cell, `z` standard normal.
pub fn param_bootstrap_iteration<R: Rng>(
    roots: &[Matrix],
    sizes: &[usize],
    rng: &mut R,
) -> Samples {
    let cells = roots
        .iter()
        .zip(sizes)
        .map(|(l, &n)| {
            let d = l.nrows();
            let z = Matrix::from_fn(d, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            (l * z).transpose()
        })
        .collect();
    Samples { cells }
}

/// Per-cell residuals `X_ik - X̄_i`.
pub fn centered(samples: &Samples) -> Samples {
    let cells = samples
        .cells
        .iter()
        .map(|x| {
            let n = x.nrows() as f64;
            let mean = x.row_sum() / n;
            let mut c = x.clone();
            for mut row in c.row_iter_mut() {
                row -= &mean;
            }
            c
        })
        .collect();
    Samples { cells }
}

/// One Rademacher sign per subject applied to its residual vector.
pub fn wild_bootstrap_iteration<R: Rng>(residuals: &Samples, rng: &mut R) -> Samples {
    let cells = residuals
        .cells
        .iter()
        .map(|x| {
            let mut c = x.clone();
            for mut row in c.row_iter_mut() {
                if rng.random::<bool>() {
                    row.neg_mut();
                }
            }
            c
        })
        .collect();
    Samples { cells }
}

/// Shuffle all `N d` values jointly and refill the subject slots.
pub fn permutation_iteration<R: Rng>(samples: &Samples, rng: &mut R) -> Samples {
    let mut pool: Vec<f64> = samples
        .cells
        .iter()
        .flat_map(|x| x.transpose().as_slice().to_vec())
        .collect();
    pool.shuffle(rng);
    let mut it = pool.into_iter();
    let cells = samples
        .cells
        .iter()
        .map(|x| Matrix::from_row_iterator(x.nrows(), x.ncols(), it.by_ref().take(x.len())))
        .collect();
    Samples { cells }
}

enum Generator {
    Param {
        roots: Vec<Matrix>,
        sizes: Vec<usize>,
    },
    Wild {
        residuals: Samples,
    },
    Perm {
        samples: Samples,
    },
}

impl Generator {
    fn new(scheme: Scheme, samples: &Samples, fit: &ModelFit) -> Result<Generator> {
        Ok(match scheme {
            Scheme::ParamBs => Generator::Param {
                roots: cell_roots(fit)?,
                sizes: samples.cells.iter().map(|c| c.nrows()).collect(),
            },
            Scheme::WildBs => Generator::Wild {
                residuals: centered(samples),
            },
            Scheme::Perm => Generator::Perm {
                samples: samples.clone(),
            },
        })
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> Samples {
        match self {
            Generator::Param { roots, sizes } => param_bootstrap_iteration(roots, sizes, rng),
            Generator::Wild { residuals } => wild_bootstrap_iteration(residuals, rng),
            Generator::Perm { samples } => permutation_iteration(samples, rng),
        }
    }
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Resample every hypothesis and statistic kind.
///
/// Each iteration builds one resampled dataset per effect and evaluates all
/// requested kinds on it. ATS under permutation is reported without a
/// p-value.
pub fn run_resampling(
    samples: &Samples,
    fit: &ModelFit,
    hypotheses: &[Hypothesis],
    kinds: &[StatisticKind],
    config: &ResamplingConfig,
) -> Result<ResamplingRun> {
    let mode = hypotheses
        .first()
        .map(|h| h.mode)
        .unwrap_or(DesignMode::Manova);
    config.validate(mode)?;
    if config.scheme == Scheme::Perm
        && !kinds.is_empty()
        && kinds.iter().all(|&k| k == StatisticKind::Ats)
    {
        return Err(Error::UnsupportedStatistic(
            "the permutation scheme cannot be used with the ATS alone".into(),
        ));
    }
    let seed = config.resolve_seed();
    let generator = Generator::new(config.scheme, samples, fit)?;
    let active: Vec<StatisticKind> = kinds
        .iter()
        .copied()
        .filter(|&k| !(config.scheme == Scheme::Perm && k == StatisticKind::Ats))
        .collect();
    let b = config.iterations;

    let per_effect: Vec<Vec<Vec<f64>>> = with_pool(config.workers, || {
        hypotheses
            .iter()
            .enumerate()
            .map(|(e, hyp)| {
                (0..b)
                    .into_par_iter()
                    .map(|it| {
                        let mut rng = stream_rng(seed, e as u64, it as u64);
                        let star = generator.draw(&mut rng);
                        let fit_star = fit_samples(&star, &[])?;
                        active
                            .iter()
                            .map(|&k| statistics::evaluate(&fit_star, hyp, k))
                            .collect::<Result<Vec<f64>>>()
                    })
                    .collect::<Result<Vec<Vec<f64>>>>()
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut results = Vec::with_capacity(hypotheses.len() * kinds.len());
    for (hyp, rows) in hypotheses.iter().zip(&per_effect) {
        for &kind in kinds {
            let observed = statistics::evaluate(fit, hyp, kind)?;
            match active.iter().position(|&k| k == kind) {
                Some(j) => {
                    let values: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                    results.push(ResamplingResult {
                        effect_name: hyp.effect_name.clone(),
                        statistic_kind: kind,
                        observed,
                        p_value: Some(p_value(&values, observed)),
                        critical_value: Some(critical_value(&values, config.alpha)),
                        resampled_values: values,
                    });
                }
                None => results.push(ResamplingResult {
                    effect_name: hyp.effect_name.clone(),
                    statistic_kind: kind,
                    observed,
                    resampled_values: Vec::new(),
                    p_value: None,
                    critical_value: None,
                }),
            }
        }
    }
    Ok(ResamplingRun {
        seed,
        scheme: config.scheme,
        iterations: b,
        results,
    })
}

/// `n (m - c)' V^+ (m - c)` for one sample.
fn one_sample_wts(x: &Matrix, center: f64) -> f64 {
    let n = x.nrows() as f64;
    let mean = x.row_sum().transpose() / n;
    let mut cov = Matrix::zeros(x.ncols(), x.ncols());
    for row in x.row_iter() {
        let r = row.transpose() - &mean;
        cov += &r * r.transpose();
    }
    cov /= n - 1.0;
    let diff = mean.add_scalar(-center);
    let pinv = linalg::moore_penrose(&cov);
    (n * diff.dot(&(pinv * &diff))).max(0.0)
}

/// Per-cell `(1 - alpha)` quantiles of the resampled one-sample WTS, used
/// for resampling-based intervals.
pub fn resampled_cell_quantiles(
    samples: &Samples,
    fit: &ModelFit,
    config: &ResamplingConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    if config.iterations == 0 {
        return Err(Error::InvalidArgument(
            "number of resampling iterations must be at least 1".into(),
        ));
    }
    let generator = Generator::new(config.scheme, samples, fit)?;
    let center = match config.scheme {
        Scheme::Perm => {
            let total: f64 = samples.cells.iter().map(|c| c.sum()).sum();
            total / (samples.n_total() * samples.d()) as f64
        }
        _ => 0.0,
    };
    let draws: Vec<Vec<f64>> = with_pool(config.workers, || {
        (0..config.iterations)
            .into_par_iter()
            .map(|it| {
                let mut rng = stream_rng(seed, CELL_QUANTILE_STREAM, it as u64);
                let star = generator.draw(&mut rng);
                star.cells
                    .iter()
                    .map(|x| one_sample_wts(x, center))
                    .collect()
            })
            .collect()
    })?;
    Ok((0..samples.cells.len())
        .map(|i| {
            let v: Vec<f64> = draws.iter().map(|d| d[i]).collect();
            critical_value(&v, config.alpha)
        })
        .collect())
}
