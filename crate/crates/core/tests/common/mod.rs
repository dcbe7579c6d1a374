//! Dense reference implementations used as test oracles.
//!
//! Everything here works on plain `Vec<Vec<f64>>` and a one-sided Jacobi
//! SVD, so it shares no numerical code with the library.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Dense = Vec<Vec<f64>>;

pub fn zeros(m: usize, n: usize) -> Dense {
    vec![vec![0.0; n]; m]
}

pub fn identity(n: usize) -> Dense {
    let mut a = zeros(n, n);
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    a
}

pub fn rows(a: &Dense) -> usize {
    a.len()
}

pub fn cols(a: &Dense) -> usize {
    a.first().map_or(0, |r| r.len())
}

pub fn transpose(a: &Dense) -> Dense {
    let (m, n) = (rows(a), cols(a));
    (0..n).map(|j| (0..m).map(|i| a[i][j]).collect()).collect()
}

pub fn mul(a: &Dense, b: &Dense) -> Dense {
    let (m, k, n) = (rows(a), cols(a), cols(b));
    assert_eq!(k, rows(b));
    let mut c = zeros(m, n);
    for i in 0..m {
        for l in 0..k {
            let x = a[i][l];
            if x == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i][j] += x * b[l][j];
            }
        }
    }
    c
}

pub fn mul_vec(a: &Dense, v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sub(a: &Dense, b: &Dense) -> Dense {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x - y).collect())
        .collect()
}

pub fn scale(a: &Dense, s: f64) -> Dense {
    a.iter()
        .map(|r| r.iter().map(|x| x * s).collect())
        .collect()
}

pub fn frob(a: &Dense) -> f64 {
    a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn trace(a: &Dense) -> f64 {
    (0..rows(a)).map(|i| a[i][i]).sum()
}

pub fn kron(a: &Dense, b: &Dense) -> Dense {
    let (ma, na, mb, nb) = (rows(a), cols(a), rows(b), cols(b));
    let mut c = zeros(ma * mb, na * nb);
    for i in 0..ma {
        for j in 0..na {
            for k in 0..mb {
                for l in 0..nb {
                    c[i * mb + k][j * nb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    c
}

pub fn block_diag(blocks: &[Dense]) -> Dense {
    let n: usize = blocks.iter().map(rows).sum();
    let mut c = zeros(n, n);
    let mut off = 0;
    for b in blocks {
        for i in 0..rows(b) {
            for j in 0..cols(b) {
                c[off + i][off + j] = b[i][j];
            }
        }
        off += rows(b);
    }
    c
}

/// `I - J/n`
pub fn centering(n: usize) -> Dense {
    let mut p = identity(n);
    for row in p.iter_mut() {
        for x in row.iter_mut() {
            *x -= 1.0 / n as f64;
        }
    }
    p
}

pub fn ones_row(n: usize, value: f64) -> Dense {
    vec![vec![value; n]]
}

pub fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Dense {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn to_nalgebra(a: &Dense) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(rows(a), cols(a), |i, j| a[i][j])
}

/// One-sided Jacobi SVD of a tall matrix: returns `(U, s, V)` with
/// `A = U diag(s) V'`, `U` being `m x n` with orthonormal nonzero columns.
fn jacobi_svd_tall(a: &Dense) -> (Dense, Vec<f64>, Dense) {
    let (m, n) = (rows(a), cols(a));
    let mut u = a.clone();
    let mut v = identity(n);
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for row in u.iter() {
                    alpha += row[p] * row[p];
                    beta += row[q] * row[q];
                    gamma += row[p] * row[q];
                }
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for row in u.iter_mut() {
                    let (x, y) = (row[p], row[q]);
                    row[p] = c * x - s * y;
                    row[q] = s * x + c * y;
                }
                for row in v.iter_mut() {
                    let (x, y) = (row[p], row[q]);
                    row[p] = c * x - s * y;
                    row[q] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut s = vec![0.0; n];
    for j in 0..n {
        let norm = (0..m).map(|i| u[i][j] * u[i][j]).sum::<f64>().sqrt();
        s[j] = norm;
        if norm > 0.0 {
            for row in u.iter_mut() {
                row[j] /= norm;
            }
        }
    }
    (u, s, v)
}

/// Pseudoinverse with relative cutoff `max(m, n) * eps * s_max`.
pub fn pinv(a: &Dense) -> Dense {
    let (m, n) = (rows(a), cols(a));
    if m == 0 || n == 0 {
        return zeros(n, m);
    }
    if m < n {
        return transpose(&pinv(&transpose(a)));
    }
    let (u, s, v) = jacobi_svd_tall(a);
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let cutoff = m.max(n) as f64 * f64::EPSILON * smax * 16.0;
    let mut p = zeros(n, m);
    for k in 0..n {
        if s[k] <= cutoff {
            continue;
        }
        for i in 0..n {
            let vik = v[i][k] / s[k];
            for j in 0..m {
                p[i][j] += vik * u[j][k];
            }
        }
    }
    p
}

/// Cell data: `cells[i][subject][component]`.
pub type Cells = Vec<Vec<Vec<f64>>>;

pub struct DenseFit {
    pub n_total: f64,
    pub sizes: Vec<usize>,
    pub mean: Vec<f64>,
    /// `N V_i / n_i` blocks.
    pub blocks: Vec<Dense>,
    pub sigma: Dense,
    pub diag: Dense,
}

pub fn dense_fit(cells: &Cells) -> DenseFit {
    let n_total: usize = cells.iter().map(|c| c.len()).sum();
    let big_n = n_total as f64;
    let mut mean = Vec::new();
    let mut blocks = Vec::new();
    for c in cells {
        let n = c.len() as f64;
        let d = c[0].len();
        let m: Vec<f64> = (0..d)
            .map(|k| c.iter().map(|r| r[k]).sum::<f64>() / n)
            .collect();
        let mut v = zeros(d, d);
        for r in c {
            for s in 0..d {
                for t in 0..d {
                    v[s][t] += (r[s] - m[s]) * (r[t] - m[t]);
                }
            }
        }
        blocks.push(scale(&v, big_n / (n * (n - 1.0))));
        mean.extend(m);
    }
    let sigma = block_diag(&blocks);
    let mut diag = zeros(rows(&sigma), rows(&sigma));
    for i in 0..rows(&sigma) {
        diag[i][i] = sigma[i][i];
    }
    DenseFit {
        n_total: big_n,
        sizes: cells.iter().map(|c| c.len()).collect(),
        mean,
        blocks,
        sigma,
        diag,
    }
}

/// `H' (H H')^+ H`
pub fn projector(h: &Dense) -> Dense {
    let ht = transpose(h);
    mul(&mul(&ht, &pinv(&mul(h, &ht))), h)
}

fn quadratic(fit: &DenseFit, t: &Dense, cov: &Dense) -> f64 {
    let tm = mul_vec(t, &fit.mean);
    let mid = pinv(&mul(&mul(t, cov), t));
    fit.n_total * dot(&tm, &mul_vec(&mid, &tm))
}

pub fn wts(fit: &DenseFit, t: &Dense) -> f64 {
    quadratic(fit, t, &fit.sigma)
}

pub fn mats(fit: &DenseFit, t: &Dense) -> f64 {
    quadratic(fit, t, &fit.diag)
}

pub struct DenseAts {
    pub statistic: f64,
    pub df1: f64,
    pub df2: f64,
}

/// ATS with Box-type degrees of freedom; `df2` is the whole-plot
/// denominator `tr(TΣ)² / tr(D_T² Σ² Λ)`.
pub fn ats(fit: &DenseFit, t: &Dense) -> DenseAts {
    let tm = mul_vec(t, &fit.mean);
    let q = fit.n_total * dot(&fit.mean, &tm);
    let ts = mul(t, &fit.sigma);
    let tr = trace(&ts);
    let tr2 = trace(&mul(&ts, &ts));
    let mut denom = 0.0;
    let mut off = 0;
    for (b, &n) in fit.blocks.iter().zip(&fit.sizes) {
        let b2 = mul(b, b);
        for s in 0..rows(b) {
            let tss = t[off + s][off + s];
            denom += tss * tss * b2[s][s] / (n as f64 - 1.0);
        }
        off += rows(b);
    }
    DenseAts {
        statistic: q / tr,
        df1: tr * tr / tr2,
        df2: tr * tr / denom,
    }
}

/// Squared Welch t statistic.
pub fn welch_sq(x: &[f64], y: &[f64]) -> f64 {
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (n - 1.0);
        (m, var / n)
    };
    let (mx, sx) = stats(x);
    let (my, sy) = stats(y);
    let t = (mx - my) / (sx + sy).sqrt();
    t * t
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_dense(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Dense {
    (0..m)
        .map(|_| (0..n).map(|_| normal(rng)).collect())
        .collect()
}

/// Random covariance `B B' + eps I` with heterogeneous scale.
pub fn random_cov(rng: &mut ChaCha8Rng, d: usize) -> Dense {
    let b = random_dense(rng, d, d);
    let mut c = mul(&b, &transpose(&b));
    let s = rng.random_range(0.5..3.0);
    for (i, row) in c.iter_mut().enumerate() {
        row[i] += 0.1;
        for x in row.iter_mut() {
            *x *= s;
        }
    }
    c
}

/// Lower Cholesky factor of a positive definite matrix.
pub fn cholesky(a: &Dense) -> Dense {
    let n = rows(a);
    let mut l = zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][j] = (a[i][i] - s).max(0.0).sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

pub fn mvn_sample(rng: &mut ChaCha8Rng, mean: &[f64], chol: &Dense, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..mean.len()).map(|_| normal(rng)).collect();
            mul_vec(chol, &z)
                .iter()
                .zip(mean)
                .map(|(a, m)| a + m)
                .collect()
        })
        .collect()
}

pub fn to_samples(cells: &Cells) -> mvrm_core::estimation::Samples {
    mvrm_core::estimation::Samples {
        cells: cells
            .iter()
            .map(|c| nalgebra::DMatrix::from_fn(c.len(), c[0].len(), |i, j| c[i][j]))
            .collect(),
    }
}

/// Kolmogorov-Smirnov statistic of a sample against U(0, 1).
pub fn ks_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let lo = x - i as f64 / n;
            let hi = (i + 1) as f64 / n - x;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS p-value with the Stephens small-sample correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let x = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        p += if k % 2 == 1 { term } else { -term };
    }
    (2.0 * p).clamp(0.0, 1.0)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
