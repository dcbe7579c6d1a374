//! Wald-type (WTS), ANOVA-type (ATS) and modified ANOVA-type (MATS) statistics.
//!
//! All three are evaluated in the coordinates of an orthonormal basis `K` of
//! the range of `T` (`T = K'K`), which turns `T A T` into `K' (K A K') K` and
//! lets the Moore-Penrose inverse act on an `rank(T) x rank(T)` matrix.

use nalgebra::DVector;
use serde::{Serialize, Serializer};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

use crate::design::{DesignMode, Hypothesis};
use crate::error::{Error, Result};
use crate::estimation::ModelFit;
use crate::linalg::{self, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum StatisticKind {
    Wts,
    Ats,
    Mats,
}

impl StatisticKind {
    pub fn label(self) -> &'static str {
        match self {
            StatisticKind::Wts => "WTS",
            StatisticKind::Ats => "ATS",
            StatisticKind::Mats => "MATS",
        }
    }
}

/// Denominator degrees of freedom of the ATS F approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Df2 {
    Finite(f64),
    Infinite,
}

impl Serialize for Df2 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Df2::Finite(v) => s.serialize_f64(*v),
            Df2::Infinite => s.serialize_str("Inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtsValue {
    /// Studentized `Q_N / tr(T Σ_N)`.
    pub statistic: f64,
    pub df1: f64,
    pub df2: Df2,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    pub effect_name: String,
    pub kind: StatisticKind,
    pub statistic: f64,
    pub df1: Option<f64>,
    pub df2: Option<Df2>,
    pub p_asymptotic: Option<f64>,
    pub p_resampling: Option<f64>,
}

fn check_dims(fit: &ModelFit, hyp: &Hypothesis) -> Result<()> {
    let ad = fit.mean_vector.len();
    if hyp.dim() != ad {
        return Err(Error::Shape(format!(
            "hypothesis `{}` acts on {} means, model has {ad}",
            hyp.effect_name,
            hyp.dim()
        )));
    }
    Ok(())
}

/// `N v' (K A K')^+ v` with `v = K X̄`.
fn studentized_form(fit: &ModelFit, hyp: &Hypothesis, cov: &Matrix) -> f64 {
    let k = &hyp.basis;
    let v = k * &fit.mean_vector;
    let m = k * cov * k.transpose();
    let pinv = linalg::moore_penrose(&m);
    let q = fit.n_total as f64 * v.dot(&(pinv * &v));
    q.max(0.0)
}

/// `T_N = N X̄' T (T Σ_N T)^+ T X̄`
pub fn wts(fit: &ModelFit, hyp: &Hypothesis) -> Result<f64> {
    check_dims(fit, hyp)?;
    Ok(studentized_form(fit, hyp, &fit.sigma_n))
}

/// `M_N = N X̄' T (T D_N T)^+ T X̄`
pub fn mats(fit: &ModelFit, hyp: &Hypothesis) -> Result<f64> {
    check_dims(fit, hyp)?;
    if fit.d_n.diagonal().iter().all(|&v| v > 0.0) {
        Ok(equilibrated_form(fit, hyp, &fit.d_n))
    } else {
        Ok(studentized_form(fit, hyp, &fit.d_n))
    }
}

/// `N (E T X̄)' (E A E)^+ (E T X̄)` with `A = T C T`, `E = diag(A)^{-1/2}`.
///
/// Equal to the plain form whenever `T X̄` lies in the range of `A` (any
/// generalized inverse gives the same quadratic form there), but unaffected
/// by component scalings that commute with `T`.
fn equilibrated_form(fit: &ModelFit, hyp: &Hypothesis, cov: &Matrix) -> f64 {
    let t = &hyp.t;
    let a = t * cov * t;
    let e: Vec<f64> = (0..a.nrows())
        .map(|j| {
            if t.row(j).norm_squared() > 1e-12 && a[(j, j)] > 0.0 {
                1.0 / a[(j, j)].sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let tx = t * &fit.mean_vector;
    let w = DVector::from_fn(tx.len(), |j, _| e[j] * tx[j]);
    let b = Matrix::from_fn(a.nrows(), a.ncols(), |i, j| e[i] * a[(i, j)] * e[j]);
    let b = (&b + b.transpose()) * 0.5;
    let pinv = linalg::moore_penrose(&b);
    (fit.n_total as f64 * w.dot(&(pinv * &w))).max(0.0)
}

/// `Q_N = N X̄' T X̄`, reported as `Q_N / tr(T Σ_N)` with Box-type degrees
/// of freedom.
pub fn ats(fit: &ModelFit, hyp: &Hypothesis) -> Result<AtsValue> {
    check_dims(fit, hyp)?;
    if hyp.mode != DesignMode::Rm {
        return Err(Error::UnsupportedStatistic(
            "the ATS is only available for repeated measures designs: it is not invariant under scale transformations of the components".into(),
        ));
    }
    let k = &hyp.basis;
    let v = k * &fit.mean_vector;
    let q = fit.n_total as f64 * v.norm_squared();
    let m = k * &fit.sigma_n * k.transpose();
    let tr = m.trace();
    let tr_sq = m.norm_squared();

    let statistic = if tr > 0.0 {
        q / tr
    } else if q == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let df1 = tr * tr / tr_sq;

    let df2 = if hyp.whole_plot_only {
        // tr(D_T² Σ_N² Λ), D_T = diag(T), Λ = diag(1 / (n_i - 1)) per block
        let d = fit.d();
        let denom: f64 = fit
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let s_block = fit.sigma_n.view((i * d, i * d), (d, d));
                let s_sq = s_block * s_block;
                (0..d)
                    .map(|s| {
                        let t = hyp.t[(i * d + s, i * d + s)];
                        t * t * s_sq[(s, s)]
                    })
                    .sum::<f64>()
                    / (c.n as f64 - 1.0)
            })
            .sum();
        Df2::Finite(tr * tr / denom)
    } else {
        Df2::Infinite
    };
    Ok(AtsValue {
        statistic,
        df1,
        df2,
    })
}

pub fn evaluate(fit: &ModelFit, hyp: &Hypothesis, kind: StatisticKind) -> Result<f64> {
    match kind {
        StatisticKind::Wts => wts(fit, hyp),
        StatisticKind::Mats => mats(fit, hyp),
        StatisticKind::Ats => ats(fit, hyp).map(|a| a.statistic),
    }
}

/// Upper tail of `χ²_rank` at `statistic`.
pub fn wts_pvalue_asymptotic(statistic: f64, rank: usize) -> Result<f64> {
    if rank == 0 {
        return Err(Error::DegenerateHypothesis(
            "χ² reference distribution needs rank >= 1".into(),
        ));
    }
    chi2_sf(statistic, rank as f64)
}

fn chi2_sf(x: f64, df: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let dist = ChiSquared::new(df)
        .map_err(|e| Error::Numerical(format!("χ² distribution with {df} df: {e}")))?;
    Ok(dist.sf(x).clamp(0.0, 1.0))
}

/// Upper tail of `F(df1, df2)`; `df2 = ∞` means `χ²_df1 / df1`.
pub fn ats_pvalue(value: &AtsValue) -> Result<f64> {
    let x = value.statistic;
    if x <= 0.0 || x.is_nan() {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    if !(value.df1 > 0.0) || !value.df1.is_finite() {
        return Err(Error::Numerical(format!(
            "ATS numerator degrees of freedom {} are not usable",
            value.df1
        )));
    }
    match value.df2 {
        Df2::Infinite => chi2_sf(value.df1 * x, value.df1),
        Df2::Finite(df2) => {
            let dist = FisherSnedecor::new(value.df1, df2).map_err(|e| {
                Error::Numerical(format!("F({}, {df2}) distribution: {e}", value.df1))
            })?;
            Ok(dist.sf(x).clamp(0.0, 1.0))
        }
    }
}

/// Observed statistic with asymptotic inference where available.
pub fn test(fit: &ModelFit, hyp: &Hypothesis, kind: StatisticKind) -> Result<TestResult> {
    let base = TestResult {
        effect_name: hyp.effect_name.clone(),
        kind,
        statistic: 0.0,
        df1: None,
        df2: None,
        p_asymptotic: None,
        p_resampling: None,
    };
    match kind {
        StatisticKind::Wts => {
            let s = wts(fit, hyp)?;
            Ok(TestResult {
                statistic: s,
                df1: Some(hyp.rank as f64),
                p_asymptotic: Some(wts_pvalue_asymptotic(s, hyp.rank)?),
                ..base
            })
        }
        StatisticKind::Ats => {
            let a = ats(fit, hyp)?;
            let p = if a.df1.is_finite() {
                Some(ats_pvalue(&a)?)
            } else {
                None
            };
            Ok(TestResult {
                statistic: a.statistic,
                df1: Some(a.df1),
                df2: Some(a.df2),
                p_asymptotic: p,
                ..base
            })
        }
        StatisticKind::Mats => Ok(TestResult {
            statistic: mats(fit, hyp)?,
            ..base
        }),
    }
}
