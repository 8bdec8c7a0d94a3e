//! Matrix-product statistics of the harmonic extension cocycle: pressure
//! function, Lyapunov exponent, critical summability exponent, convexity
//! diagnostics.
//!
//! Two matrix norms are supported. `MaxRowSum` is submultiplicative, so the
//! finite-word values `P_m` are certified upper bounds of the limit but
//! converge with an O(1/m) gap. `EnergyHs` is the dimension-normalized
//! Hilbert-Schmidt norm of the energy inner product; it makes the
//! second-moment identity `sum_words mu_a ||S_a||^2 = (r mu)^m` exact, at
//! the price of submultiplicativity. All finite-m values are
//! norm-dependent; only the limit is not.

use crate::error::{Error, Result};
use crate::self_similar::SelfSimilarStructure;
use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Above this many words, exact enumeration refuses and Monte Carlo takes over.
pub const ENUMERATION_CAP: u64 = 2_000_000;

const MC_CHUNK: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum MatrixNorm {
    /// max_i sum_j |A(i,j)|; submultiplicative
    MaxRowSum,
    /// sqrt(tr(G^{-1} A^T G A) / d); exact second moments, not submultiplicative
    EnergyHs,
}

impl std::str::FromStr for MatrixNorm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rowsum" | "max-row-sum" => Ok(MatrixNorm::MaxRowSum),
            "energy" | "energy-hs" => Ok(MatrixNorm::EnergyHs),
            other => Err(Error::InvalidParameter(format!(
                "unknown matrix norm {other:?} (expected rowsum | energy-hs)"
            ))),
        }
    }
}

/// max_i sum_j |A(i,j)|.
pub fn max_row_sum(a: &DMatrix<f64>) -> f64 {
    (0..a.nrows())
        .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
}

/// The harmonic quotient matrices with their weights and energy Gram.
#[derive(Debug, Clone)]
pub struct MatrixEnsemble {
    matrices: Vec<DMatrix<f64>>,
    weights: Vec<f64>,
    gram: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    uniform_r: Option<f64>,
}

impl MatrixEnsemble {
    pub fn new(
        matrices: Vec<DMatrix<f64>>,
        weights: Vec<f64>,
        gram: DMatrix<f64>,
        uniform_r: Option<f64>,
    ) -> Result<Self> {
        if matrices.is_empty() || matrices.len() != weights.len() {
            return Err(Error::SizeMismatch {
                expected: matrices.len(),
                got: weights.len(),
            });
        }
        let d = gram.nrows();
        if matrices.iter().any(|m| m.nrows() != d || m.ncols() != d) {
            return Err(Error::InvalidParameter(
                "ensemble matrices must be square and match the Gram".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w <= 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(
                "weights must be positive and sum to one".into(),
            ));
        }
        let gram_inv = gram
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::SingularSystem("energy Gram is singular".into()))?;
        Ok(MatrixEnsemble {
            matrices,
            weights,
            gram,
            gram_inv,
            uniform_r,
        })
    }

    pub fn from_structure(ss: &SelfSimilarStructure) -> Result<Self> {
        let hm = ss.harmonic_matrices()?;
        MatrixEnsemble::new(
            hm.a_tilde,
            ss.measure_weights().to_vec(),
            hm.gram,
            ss.uniform_r(),
        )
    }

    pub fn arity(&self) -> usize {
        self.matrices.len()
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn uniform_r(&self) -> Option<f64> {
        self.uniform_r
    }

    pub fn uniform_weight(&self) -> Option<f64> {
        let w0 = self.weights[0];
        self.weights
            .iter()
            .all(|&w| (w - w0).abs() < 1e-14)
            .then_some(w0)
    }

    pub fn norm(&self, a: &DMatrix<f64>, norm: MatrixNorm) -> f64 {
        match norm {
            MatrixNorm::MaxRowSum => max_row_sum(a),
            MatrixNorm::EnergyHs => {
                let m = &self.gram_inv * a.transpose() * &self.gram * a;
                (m.trace() / self.dim() as f64).max(0.0).sqrt()
            }
        }
    }

    fn words(&self, m: usize) -> Result<u64> {
        let mut count: u64 = 1;
        for _ in 0..m {
            count = count
                .checked_mul(self.arity() as u64)
                .filter(|&c| c <= ENUMERATION_CAP)
                .ok_or(Error::EnumerationCap {
                    words: u64::MAX,
                    cap: ENUMERATION_CAP,
                })?;
        }
        Ok(count)
    }

    /// Norms and weights of every length-m product, in word-lexicographic
    /// order with the last-applied letter outermost.
    pub fn enumerate_words(&self, m: usize, norm: MatrixNorm) -> Result<WordTable> {
        let count = self.words(m).map_err(|_| Error::EnumerationCap {
            words: (self.arity() as f64).powi(m as i32) as u64,
            cap: ENUMERATION_CAP,
        })?;
        let mut norms = Vec::with_capacity(count as usize);
        let mut weights = Vec::with_capacity(count as usize);
        let identity = DMatrix::identity(self.dim(), self.dim());
        // depth-first: product = A_{letter} * partial, weight multiplies
        let mut stack: Vec<(usize, DMatrix<f64>, f64)> = vec![(0, identity, 1.0)];
        while let Some((depth, partial, weight)) = stack.pop() {
            if depth == m {
                norms.push(self.norm(&partial, norm));
                weights.push(weight);
                continue;
            }
            // reversed push order keeps the visit lexicographic
            for j in (0..self.arity()).rev() {
                stack.push((
                    depth + 1,
                    &self.matrices[j] * &partial,
                    weight * self.weights[j],
                ));
            }
        }
        Ok(WordTable { m, norms, weights })
    }
}

/// Exact per-word data at one product length.
#[derive(Debug, Clone)]
pub struct WordTable {
    pub m: usize,
    pub norms: Vec<f64>,
    pub weights: Vec<f64>,
}

impl WordTable {
    /// P_m(p) = (1/m) log sum_words mu_word ||S_word||^p.
    pub fn pressure(&self, p: f64) -> f64 {
        let sum: f64 = self
            .norms
            .iter()
            .zip(&self.weights)
            .map(|(&n, &w)| w * n.powf(p))
            .sum();
        sum.ln() / self.m as f64
    }

    /// (1/m) sum_words mu_word log ||S_word||, the exact m-step Lyapunov value.
    pub fn log_mean(&self) -> f64 {
        let sum: f64 = self
            .norms
            .iter()
            .zip(&self.weights)
            .map(|(&n, &w)| w * n.ln())
            .sum();
        sum / self.m as f64
    }
}

/// Exact pressure value by full word enumeration.
pub fn pressure_exact(ens: &MatrixEnsemble, p: f64, m: usize, norm: MatrixNorm) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "product length must be >= 1".into(),
        ));
    }
    Ok(ens.enumerate_words(m, norm)?.pressure(p))
}

/// Monte Carlo pressure estimate: `(estimate, standard error)`.
///
/// Sampling is chunked with one deterministic stream per chunk (seed xor
/// chunk index) and reduced in chunk order, so the result is bit-identical
/// for any worker count.
pub fn pressure_mc(
    ens: &MatrixEnsemble,
    p: f64,
    m: usize,
    samples: u64,
    seed: u64,
    norm: MatrixNorm,
) -> Result<(f64, f64)> {
    let (sum, sumsq, n) = mc_moments(ens, m, samples, seed, norm, |x| x.powf(p))?;
    let mean = sum / n;
    if mean <= 0.0 {
        return Err(Error::InvalidParameter("all sampled norms vanished".into()));
    }
    // variance of the sample mean
    let var = ((sumsq / n) - mean * mean).max(0.0) / (n - 1.0).max(1.0);
    let estimate = mean.ln() / m as f64;
    let stderr = var.sqrt() / (mean * m as f64);
    Ok((estimate, stderr))
}

fn mc_moments(
    ens: &MatrixEnsemble,
    m: usize,
    samples: u64,
    seed: u64,
    norm: MatrixNorm,
    f: impl Fn(f64) -> f64 + Sync,
) -> Result<(f64, f64, f64)> {
    if samples < 100 {
        return Err(Error::InvalidParameter(
            "Monte Carlo needs at least 100 samples".into(),
        ));
    }
    let cumulative: Vec<f64> = ens
        .weights
        .iter()
        .scan(0.0, |acc, &w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let chunks = samples.div_ceil(MC_CHUNK);
    let partials: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ chunk);
            let lo = chunk * MC_CHUNK;
            let hi = ((chunk + 1) * MC_CHUNK).min(samples);
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in lo..hi {
                let mut product = DMatrix::identity(ens.dim(), ens.dim());
                for _ in 0..m {
                    let r: f64 = rng.random();
                    let j = cumulative
                        .iter()
                        .position(|&c| r < c)
                        .unwrap_or(ens.arity() - 1);
                    product = &ens.matrices[j] * product;
                }
                let v = f(ens.norm(&product, norm));
                sum += v;
                sumsq += v * v;
            }
            (sum, sumsq)
        })
        .collect();
    let (sum, sumsq) = partials
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (s, q)| (a + s, b + q));
    Ok((sum, sumsq, samples as f64))
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct LyapunovEstimate {
    /// Monte Carlo estimate of (1/m) E log ||S_m||
    pub estimate: f64,
    pub stderr: f64,
    /// one-sided finite difference of the exact pressure curve at zero,
    /// available when the word count fits the enumeration cap
    pub derivative_at_zero: Option<f64>,
}

pub fn lyapunov(
    ens: &MatrixEnsemble,
    m: usize,
    samples: u64,
    seed: u64,
    norm: MatrixNorm,
) -> Result<LyapunovEstimate> {
    let (sum, sumsq, n) = mc_moments(ens, m, samples, seed, norm, |x| x.ln())?;
    let mean = sum / n;
    let var = ((sumsq / n) - mean * mean).max(0.0) / (n - 1.0).max(1.0);
    let derivative_at_zero = match ens.enumerate_words(m, norm) {
        Ok(table) => {
            let delta = 1e-6;
            Some(table.pressure(delta) / delta)
        }
        Err(Error::EnumerationCap { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(LyapunovEstimate {
        estimate: mean / m as f64,
        stderr: var.sqrt() / m as f64,
        derivative_at_zero,
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CriticalExponent {
    /// (m, q_m) along the requested schedule
    pub entries: Vec<(usize, f64)>,
    /// Aitken extrapolation of the last three entries, when defined
    pub extrapolated: Option<f64>,
}

/// Solve `P_m(q) = log mu` by bisection on [0.1, 2.5] to 1e-10 for every m
/// in the schedule. Requires uniform measure weights.
pub fn critical_exponent(
    ens: &MatrixEnsemble,
    schedule: &[usize],
    norm: MatrixNorm,
) -> Result<CriticalExponent> {
    let mu = ens
        .uniform_weight()
        .ok_or_else(|| Error::InvalidParameter("critical exponent needs uniform weights".into()))?;
    let target = mu.ln();
    let mut entries = Vec::with_capacity(schedule.len());
    for &m in schedule {
        let table = ens.enumerate_words(m, norm)?;
        let (mut lo, mut hi) = (0.1f64, 2.5f64);
        let f_lo = table.pressure(lo) - target;
        let f_hi = table.pressure(hi) - target;
        if f_lo.signum() == f_hi.signum() {
            return Err(Error::NoSignChange { lo, hi });
        }
        // pressure is decreasing in p, so f_lo > 0 > f_hi
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if table.pressure(mid) - target > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        entries.push((m, 0.5 * (lo + hi)));
    }
    let extrapolated = if entries.len() >= 3 {
        let k = entries.len();
        let (q0, q1, q2) = (entries[k - 3].1, entries[k - 2].1, entries[k - 1].1);
        let denom = q2 - 2.0 * q1 + q0;
        (denom.abs() > 1e-14).then(|| q2 - (q2 - q1) * (q2 - q1) / denom)
    } else {
        None
    };
    Ok(CriticalExponent {
        entries,
        extrapolated,
    })
}

/// Exact pressure values on a p-grid for each product length in `ms`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PressureCurve {
    pub ps: Vec<f64>,
    pub rows: Vec<PressureRow>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct PressureRow {
    pub m: usize,
    pub values: Vec<f64>,
    /// standard errors when the row was sampled rather than enumerated
    pub stderr: Option<Vec<f64>>,
}

pub fn pressure_curve(
    ens: &MatrixEnsemble,
    ps: &[f64],
    ms: &[usize],
    norm: MatrixNorm,
) -> Result<PressureCurve> {
    let mut rows = Vec::with_capacity(ms.len());
    for &m in ms {
        let table = ens.enumerate_words(m, norm)?;
        rows.push(PressureRow {
            m,
            values: ps.iter().map(|&p| table.pressure(p)).collect(),
            stderr: None,
        });
    }
    Ok(PressureCurve {
        ps: ps.to_vec(),
        rows,
    })
}

/// One sampled row for a product length beyond the enumeration cap.
pub fn pressure_row_mc(
    ens: &MatrixEnsemble,
    ps: &[f64],
    m: usize,
    samples: u64,
    seed: u64,
    norm: MatrixNorm,
) -> Result<PressureRow> {
    let mut values = Vec::with_capacity(ps.len());
    let mut stderr = Vec::with_capacity(ps.len());
    for &p in ps {
        let (est, se) = pressure_mc(ens, p, m, samples, seed, norm)?;
        values.push(est);
        stderr.push(se);
    }
    Ok(PressureRow {
        m,
        values,
        stderr: Some(stderr),
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ConvexityReport {
    /// all second differences >= -1e-9
    pub convex: bool,
    /// the interior minimum second difference clears the tolerance
    pub strictly_convex: bool,
    pub min_second_difference: f64,
    /// 2 P'(0) - P(2): strictly negative exactly when the curve bends
    pub jensen_gap: f64,
}

/// Second-difference diagnostics of one pressure row on a uniform p-grid.
pub fn convexity_report(
    ps: &[f64],
    values: &[f64],
    lyapunov_exponent: f64,
    pressure_at_two: f64,
    strict_tol: f64,
) -> Result<ConvexityReport> {
    if ps.len() != values.len() || ps.len() < 3 {
        return Err(Error::InvalidParameter(
            "convexity needs at least three grid values".into(),
        ));
    }
    let h = ps[1] - ps[0];
    for w in ps.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1.0) {
            return Err(Error::InvalidParameter("p-grid is not uniform".into()));
        }
    }
    let mut min_d2 = f64::INFINITY;
    for k in 1..values.len() - 1 {
        let d2 = values[k + 1] - 2.0 * values[k] + values[k - 1];
        min_d2 = min_d2.min(d2);
    }
    Ok(ConvexityReport {
        convex: min_d2 >= -1e-9,
        strictly_convex: min_d2 > strict_tol,
        min_second_difference: min_d2,
        jensen_gap: 2.0 * lyapunov_exponent - pressure_at_two,
    })
}

/// Heuristic indicators for the random-product hypotheses: a contraction
/// score (smallest ratio of the two largest singular values over sampled
/// long products; near zero means products approach rank one) and whether
/// a common invariant line among the generators' eigenvectors survives.
/// Diagnostics only; no finite computation certifies these semigroup
/// properties.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ProductSemigroupDiagnostics {
    pub contraction_ratio: f64,
    pub invariant_line_found: bool,
}

pub fn product_semigroup_diagnostics(
    ens: &MatrixEnsemble,
    m: usize,
    samples: u64,
    seed: u64,
) -> Result<ProductSemigroupDiagnostics> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cumulative: Vec<f64> = ens
        .weights
        .iter()
        .scan(0.0, |acc, &w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let mut ratio: f64 = f64::INFINITY;
    for _ in 0..samples.max(1) {
        let mut product = DMatrix::identity(ens.dim(), ens.dim());
        for _ in 0..m {
            let r: f64 = rng.random();
            let j = cumulative
                .iter()
                .position(|&c| r < c)
                .unwrap_or(ens.arity() - 1);
            product = &ens.matrices[j] * product;
        }
        let svd = product.svd(false, false);
        let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if s.len() >= 2 && s[0] > 0.0 {
            ratio = ratio.min(s[1] / s[0]);
        } else {
            ratio = 0.0;
        }
    }

    // candidate invariant lines: dominant eigendirections of the generators
    // by power iteration (heuristic; complex spectra simply fail to settle)
    let mut invariant_line_found = false;
    for generator in &ens.matrices {
        let mut v = nalgebra::DVector::from_fn(ens.dim(), |i, _| 1.0 + 0.1 * i as f64);
        v /= v.norm();
        for _ in 0..500 {
            let next = generator * &v;
            let norm = next.norm();
            if norm < 1e-300 {
                break;
            }
            v = next / norm;
        }
        let img = generator * &v;
        if (&img - &v * img.dot(&v)).norm() > 1e-10 * img.norm().max(1e-300) {
            continue; // no settled direction for this generator
        }
        let preserved = ens.matrices.iter().all(|a| {
            let img = a * &v;
            (&img - &v * img.dot(&v)).norm() <= 1e-9 * img.norm().max(1e-300)
        });
        if preserved {
            invariant_line_found = true;
        }
    }
    Ok(ProductSemigroupDiagnostics {
        contraction_ratio: if ratio.is_finite() { ratio } else { 0.0 },
        invariant_line_found,
    })
}
