//! Discrete Laplacian eigenproblems for the level forms, Weyl-slope
//! estimation of the spectral dimension, and the eigenfunction realization
//! of the gradient-side orthonormal basis.

use crate::error::{Error, Result};
use crate::fredholm::Multiplier;
use crate::hilbert_module::{derivation, HodgeBasis, ModuleElement};
use crate::resistance_form::{ResistanceForm, VertexFunction};
use nalgebra::DMatrix;

/// Discretization of the self-similar measure on V_n: each cell's mass is
/// split evenly over its boundary vertices.
#[derive(Debug, Clone)]
pub struct VertexMeasure {
    pub level: usize,
    pub masses: Vec<f64>,
}

impl VertexMeasure {
    /// `weights` are the per-child measure factors; level-0 cells share the
    /// total mass equally.
    pub fn assemble(form: &ResistanceForm, weights: &[f64], level: usize) -> Result<VertexMeasure> {
        let structure = form.structure();
        if weights.len() != structure.arity() {
            return Err(Error::SizeMismatch {
                expected: structure.arity(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::NonPositiveMass);
        }
        let base = structure.cells(0).len() as f64;
        let mut masses = vec![0.0f64; structure.vertex_count(level)];
        for (idx, cell) in structure.cells(level).iter().enumerate() {
            let mut measure = 1.0 / base;
            let mut rest = idx;
            for _ in 0..level {
                // digits of idx in base arity, least significant = last letter
                measure *= weights[rest % structure.arity()];
                rest /= structure.arity();
            }
            let share = measure / cell.vertices.len() as f64;
            for v in &cell.vertices {
                masses[v.0] += share;
            }
        }
        Ok(VertexMeasure { level, masses })
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Rescale so the masses sum to `total` (drops the probability
    /// normalization when a different total mass is wanted).
    pub fn with_total(mut self, total: f64) -> Self {
        let current = self.total();
        for m in &mut self.masses {
            *m *= total / current;
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum BoundaryCondition {
    Neumann,
    /// homogeneous condition on V_0
    Dirichlet,
}

/// A generalized eigensystem L a = lambda M a for one level form.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub level: usize,
    pub boundary: BoundaryCondition,
    /// ascending
    pub eigenvalues: Vec<f64>,
    /// columns are mu-orthonormal eigenvectors on all of V_n (zero on V_0
    /// under the Dirichlet condition)
    pub vectors: DMatrix<f64>,
    pub measure: VertexMeasure,
}

/// Solve the level eigenproblem via the symmetric whitening
/// `M^{-1/2} L M^{-1/2}`.
pub fn laplacian_eigen(
    form: &ResistanceForm,
    measure: &VertexMeasure,
    boundary: BoundaryCondition,
) -> Result<EigenSystem> {
    let level = measure.level;
    let structure = form.structure();
    let nv = structure.vertex_count(level);
    if measure.masses.len() != nv {
        return Err(Error::SizeMismatch {
            expected: nv,
            got: measure.masses.len(),
        });
    }
    if measure.masses.iter().any(|&m| m <= 0.0) {
        return Err(Error::NonPositiveMass);
    }
    let keep: Vec<usize> = match boundary {
        BoundaryCondition::Neumann => (0..nv).collect(),
        BoundaryCondition::Dirichlet => (structure.vertex_count(0)..nv).collect(),
    };
    if keep.is_empty() {
        return Err(Error::InvalidParameter(
            "Dirichlet condition removes every vertex".into(),
        ));
    }
    let l = form.level_network(level).laplacian();
    let n = keep.len();
    let mut sym = DMatrix::zeros(n, n);
    for (i, &vi) in keep.iter().enumerate() {
        let si = 1.0 / measure.masses[vi].sqrt();
        for (j, &vj) in keep.iter().enumerate() {
            let sj = 1.0 / measure.masses[vj].sqrt();
            sym[(i, j)] = si * l[(vi, vj)] * sj;
        }
    }
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let mut vectors = DMatrix::zeros(nv, n);
    for (col, &i) in order.iter().enumerate() {
        for (row, &v) in keep.iter().enumerate() {
            vectors[(v, col)] = eig.eigenvectors[(row, i)] / measure.masses[v].sqrt();
        }
    }
    Ok(EigenSystem {
        level,
        boundary,
        eigenvalues,
        vectors,
        measure: measure.clone(),
    })
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenfunction(&self, k: usize) -> VertexFunction {
        VertexFunction::new(self.level, self.vectors.column(k).iter().copied().collect())
    }

    /// Largest residual `||L a - lambda M a||_inf` over all eigenpairs.
    pub fn relation_residual(&self, form: &ResistanceForm) -> f64 {
        let l = form.level_network(self.level).laplacian();
        let mut worst = 0.0f64;
        for k in 0..self.len() {
            let a = self.vectors.column(k);
            let la = &l * a;
            for (v, &mass) in self.measure.masses.iter().enumerate() {
                let r = la[v] - self.eigenvalues[k] * mass * a[v];
                // Dirichlet rows pinned to zero are excluded
                if self.boundary == BoundaryCondition::Dirichlet
                    && v < form.structure().vertex_count(0)
                {
                    continue;
                }
                worst = worst.max(r.abs());
            }
        }
        worst
    }

    /// Largest deviation of the mu-Gram from the identity.
    pub fn orthonormality_residual(&self) -> f64 {
        let n = self.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let g: f64 = (0..self.vectors.nrows())
                    .map(|v| self.vectors[(v, i)] * self.vectors[(v, j)] * self.measure.masses[v])
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    /// Number of eigenvalues at or below `cut`.
    pub fn count_below(&self, cut: f64) -> usize {
        self.eigenvalues.iter().filter(|&&l| l <= cut).count()
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct WeylFit {
    pub slope: f64,
    pub intercept: f64,
    /// rms residual of the least-squares fit
    pub residual: f64,
    pub points: usize,
    pub window: (f64, f64),
}

/// Least-squares slope of log N(lambda) against log lambda, pooled over the
/// given systems on their common reliable window. The top quarter of each
/// spectrum is excluded; an optional window intersects further.
pub fn weyl_fit(systems: &[EigenSystem], window: Option<(f64, f64)>) -> Result<WeylFit> {
    if systems.len() < 2 {
        return Err(Error::InvalidParameter(
            "the Weyl fit needs spectra from at least two levels".into(),
        ));
    }
    let mut lo = f64::MIN_POSITIVE;
    let mut hi = f64::INFINITY;
    for s in systems {
        let first_positive = s
            .eigenvalues
            .iter()
            .copied()
            .find(|&l| l > 1e-12)
            .ok_or_else(|| Error::InvalidParameter("spectrum has no positive part".into()))?;
        lo = lo.max(first_positive);
        let cut_idx = (3 * (s.len() - 1)) / 4;
        hi = hi.min(s.eigenvalues[cut_idx]);
    }
    if let Some((wlo, whi)) = window {
        lo = lo.max(wlo);
        hi = hi.min(whi);
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in systems {
        let mut count = 0usize;
        for &lambda in &s.eigenvalues {
            count += 1;
            if lambda >= lo && lambda <= hi && lambda > 0.0 {
                xs.push(lambda.ln());
                ys.push((count as f64).ln());
            }
        }
    }
    if xs.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "only {} eigenvalues in the fit window [{lo}, {hi}]",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - slope * x - intercept;
            e * e
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(WeylFit {
        slope,
        intercept,
        residual,
        points: xs.len(),
        window: (lo, hi),
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EigenBasisCheck {
    /// p-sum over the eigenbasis of the gradient side
    pub sum: f64,
    /// sum divided by E(a)^{p/2}
    pub energy_ratio: f64,
    /// Gram deviation of the normalized gradient basis from the identity
    pub gram_residual: f64,
    /// set when p does not exceed the supplied spectral dimension
    pub below_critical: bool,
}

/// Realize the gradient-side orthonormal basis from Dirichlet eigenfunctions
/// (`xi_k = lambda_k^{-1/2} derivation(a_k)`), verify its Gram, and compute
/// `sum_k || Pperp (a xi_k) ||^p` with `a` acting through cell averages at
/// the basis level.
pub fn eigenbasis_projection_sum(
    form: &ResistanceForm,
    basis: &HodgeBasis,
    system: &EigenSystem,
    a: &VertexFunction,
    p: f64,
    spectral_dim: Option<f64>,
) -> Result<EigenBasisCheck> {
    if system.boundary != BoundaryCondition::Dirichlet {
        return Err(Error::InvalidParameter(
            "the eigenbasis check needs the Dirichlet system".into(),
        ));
    }
    if system.level != basis.level() {
        return Err(Error::LevelMismatch {
            expected: basis.level(),
            got: system.level,
        });
    }
    if !(p > 0.0 && p <= 2.0) {
        return Err(Error::InvalidParameter(format!(
            "exponent {p} outside (0, 2]"
        )));
    }
    let mut xi: Vec<ModuleElement> = Vec::with_capacity(system.len());
    for k in 0..system.len() {
        let lam = system.eigenvalues[k];
        if lam <= 1e-12 {
            continue;
        }
        let mut d = derivation(form, &system.eigenfunction(k));
        d.scale(1.0 / lam.sqrt());
        xi.push(d);
    }
    // Gram of the xi against each other: E(a_j, a_k) = lambda_k delta_jk
    let mut gram_residual = 0.0f64;
    for i in 0..xi.len() {
        for j in i..xi.len() {
            let g = xi[i].inner(&xi[j], form)?;
            let target = if i == j { 1.0 } else { 0.0 };
            gram_residual = gram_residual.max((g - target).abs());
        }
    }

    let mult = Multiplier::from_vertex_average(form, a, basis.level())?;
    let mut sum = 0.0;
    for x in &xi {
        let ax = crate::fredholm::multiply(form, x, &mult)?;
        let perp = basis.apply_projection(form, &ax, false)?;
        sum += perp.norm(form).powf(p);
    }
    let energy = form.level_energy(&form.harmonic_extension(a, basis.level())?);
    let energy_ratio = if energy > 0.0 {
        sum / energy.powf(p / 2.0)
    } else {
        0.0
    };
    Ok(EigenBasisCheck {
        sum,
        energy_ratio,
        gram_residual,
        below_critical: spectral_dim.map(|d| p <= d).unwrap_or(false),
    })
}
