//! The operator F on H_N that is +1 on gradients and -1 on harmonic
//! 1-forms, commutators with multiplication operators, their singular
//! values, and summability diagnostics.

use crate::error::{Error, Result};
use crate::hilbert_module::{HodgeBasis, ModuleElement};
use crate::resistance_form::{ResistanceForm, VertexFunction};
use nalgebra::DMatrix;

/// A simple function constant on the cells of one level.
#[derive(Debug, Clone)]
pub struct Multiplier {
    pub level: usize,
    pub values: Vec<f64>,
}

impl Multiplier {
    pub fn constant(form: &ResistanceForm, level: usize, value: f64) -> Self {
        Multiplier {
            level,
            values: vec![value; form.structure().cells(level).len()],
        }
    }

    pub fn indicator(form: &ResistanceForm, level: usize, cell: usize) -> Self {
        let mut m = Multiplier::constant(form, level, 0.0);
        m.values[cell] = 1.0;
        m
    }

    /// Cell averages of the vertex values of `f`, harmonically extended to
    /// `level` first when needed.
    pub fn from_vertex_average(
        form: &ResistanceForm,
        f: &VertexFunction,
        level: usize,
    ) -> Result<Self> {
        let ext = if f.level < level {
            form.harmonic_extension(f, level)?
        } else if f.level == level {
            f.clone()
        } else {
            return Err(Error::LevelMismatch {
                expected: level,
                got: f.level,
            });
        };
        let values = form
            .structure()
            .cells(level)
            .iter()
            .map(|c| {
                c.vertices.iter().map(|v| ext.values[v.0]).sum::<f64>() / c.vertices.len() as f64
            })
            .collect();
        Ok(Multiplier { level, values })
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Value on the level-`level` cell `idx`, `level >= self.level`.
    pub fn value_on(&self, form: &ResistanceForm, level: usize, idx: usize) -> f64 {
        let anc = form.structure().ancestor(level, idx, self.level);
        self.values[anc]
    }

    /// Oscillation (sup - inf) of the simple function over cell (level, idx).
    pub fn oscillation_on(&self, form: &ResistanceForm, level: usize, idx: usize) -> f64 {
        if self.level <= level {
            return 0.0;
        }
        let span = form.structure().arity().pow((self.level - level) as u32);
        let vals = &self.values[idx * span..(idx + 1) * span];
        let max = vals.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let min = vals.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        max - min
    }

    pub fn global_oscillation(&self) -> f64 {
        let max = self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let min = self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        max - min
    }
}

/// Right module action: scale each N-cell's data by the multiplier's value
/// on the enclosing cell.
pub fn multiply(form: &ResistanceForm, u: &ModuleElement, a: &Multiplier) -> Result<ModuleElement> {
    if a.level > u.level {
        return Err(Error::LevelMismatch {
            expected: u.level,
            got: a.level,
        });
    }
    let mut out = u.clone();
    for idx in 0..out.cells.len() {
        let s = a.value_on(form, u.level, idx);
        for v in &mut out.cells[idx] {
            *v *= s;
        }
    }
    Ok(out)
}

/// F in Hodge coordinates: diagonal, +1 on gradient blocks, -1 on form blocks.
pub fn operator_f(basis: &HodgeBasis) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(basis.signs()))
}

/// Matrix of the multiplication operator in the Hodge basis:
/// `A_ij = <xi_i, xi_j a>`.
pub fn multiplication_matrix(
    form: &ResistanceForm,
    basis: &HodgeBasis,
    a: &Multiplier,
) -> Result<DMatrix<f64>> {
    let dim = basis.dim();
    let mut mat = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let image = multiply(form, basis.vector(j), a)?;
        let sj = basis.support(j);
        for i in 0..dim {
            let si = basis.support(i);
            if si.start >= sj.end || sj.start >= si.end {
                continue;
            }
            mat[(i, j)] = basis.vector(i).inner(&image, form)?;
        }
    }
    Ok(mat)
}

/// Matrix of [F, a] = F a - a F in Hodge coordinates.
pub fn commutator_matrix(
    form: &ResistanceForm,
    basis: &HodgeBasis,
    a: &Multiplier,
) -> Result<DMatrix<f64>> {
    let m = multiplication_matrix(form, basis, a)?;
    let mut c = DMatrix::zeros(basis.dim(), basis.dim());
    for i in 0..basis.dim() {
        for j in 0..basis.dim() {
            c[(i, j)] = (basis.sign(i) - basis.sign(j)) * m[(i, j)];
        }
    }
    Ok(c)
}

/// Sorted singular values.
#[derive(Debug, Clone)]
pub struct SingularSpectrum {
    pub values: Vec<f64>,
}

impl SingularSpectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Count of values above `rel_tol` times the largest; `abs_floor` guards
    /// against counting pure round-off when the whole matrix is zero.
    pub fn numerical_rank(&self, rel_tol: f64, abs_floor: f64) -> usize {
        let s0 = self.values.first().copied().unwrap_or(0.0);
        if s0 <= abs_floor {
            return 0;
        }
        self.values.iter().filter(|&&s| s > rel_tol * s0).count()
    }
}

pub fn singular_values(m: &DMatrix<f64>) -> SingularSpectrum {
    let svd = m.clone().svd(false, false);
    let mut values: Vec<f64> = svd.singular_values.iter().copied().collect();
    values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    SingularSpectrum { values }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct PSumEntry {
    pub p: f64,
    /// sum_k s_k^p
    pub p_sum: f64,
    /// sup_N N^{1/p - 1} sum_{k<N} s_k (log-normalized when p = 1)
    pub weak_sum: f64,
}

/// Prefix statistics of one singular spectrum.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SummabilityReport {
    pub entries: Vec<PSumEntry>,
    /// (log N)^{-1} sum_{k<N} s_k for N = 2..=len
    pub dixmier_partials: Vec<f64>,
    /// sum of all singular values at this truncation
    pub trace: f64,
}

pub fn summability_report(s: &SingularSpectrum, ps: &[f64]) -> Result<SummabilityReport> {
    for &p in ps {
        if !(p > 0.0 && p <= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "summability exponent {p} outside (0, 2]"
            )));
        }
    }
    let mut prefix = Vec::with_capacity(s.len() + 1);
    let mut acc = 0.0;
    prefix.push(0.0);
    for &v in &s.values {
        acc += v;
        prefix.push(acc);
    }
    let entries = ps
        .iter()
        .map(|&p| {
            let p_sum = s.values.iter().map(|v| v.powf(p)).sum();
            let weak_sum = if (p - 1.0).abs() < 1e-12 {
                (2..=s.len())
                    .map(|n| prefix[n] / (n as f64).ln())
                    .fold(0.0f64, f64::max)
            } else {
                (1..=s.len())
                    .map(|n| (n as f64).powf(1.0 / p - 1.0) * prefix[n])
                    .fold(0.0f64, f64::max)
            };
            PSumEntry { p, p_sum, weak_sum }
        })
        .collect();
    let dixmier_partials = (2..=s.len()).map(|n| prefix[n] / (n as f64).ln()).collect();
    Ok(SummabilityReport {
        entries,
        dixmier_partials,
        trace: prefix[s.len()],
    })
}

/// p-sums of a family of spectra at increasing truncation levels.
pub fn p_sum_series(spectra: &[SingularSpectrum], p: f64) -> Vec<f64> {
    spectra
        .iter()
        .map(|s| s.values.iter().map(|v| v.powf(p)).sum())
        .collect()
}

/// Both sides of the oscillation bound: the p-sum of `||[F,a] xi_k||` over
/// the Hodge basis against `sum over blocks of 8 L osc_alpha(a)^p`.
pub fn oscillation_bound_check(
    form: &ResistanceForm,
    basis: &HodgeBasis,
    a: &Multiplier,
    p: f64,
) -> Result<(f64, f64)> {
    if !(p > 0.0 && p < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "oscillation bound holds for p in (0, 2); got {p}"
        )));
    }
    let c = commutator_matrix(form, basis, a)?;
    let lhs = (0..c.ncols())
        .map(|j| c.column(j).norm().powf(p))
        .sum::<f64>();

    // L: the largest number of new vertices a subdivision puts in one cell
    let structure = form.structure();
    let mut l_bound = 1usize;
    for m in 0..basis.level() {
        let count_m = structure.vertex_count(m);
        for idx in 0..structure.cells(m).len() {
            let mut new_in_cell: Vec<usize> = structure
                .children_range(idx)
                .flat_map(|ci| {
                    structure
                        .cell(m + 1, ci)
                        .vertices
                        .iter()
                        .map(|v| v.0)
                        .filter(|&v| v >= count_m)
                        .collect::<Vec<_>>()
                })
                .collect();
            new_in_cell.sort_unstable();
            new_in_cell.dedup();
            l_bound = l_bound.max(new_in_cell.len());
        }
    }

    let mut rhs = 0.0;
    let mut base_counted = false;
    for block in basis.blocks() {
        if block.range.is_empty() {
            continue;
        }
        use crate::hilbert_module::BlockKind;
        match block.kind {
            BlockKind::BaseGradient | BlockKind::BaseForm => {
                if !base_counted {
                    rhs += 8.0 * l_bound as f64 * a.global_oscillation().powf(p);
                    base_counted = true;
                }
            }
            BlockKind::CellGradient { level, cell } | BlockKind::CellForm { level, cell } => {
                // both halves of J_alpha share one oscillation term; count it
                // on the gradient block and skip the form block of the same cell
                if matches!(block.kind, BlockKind::CellForm { .. }) {
                    let has_gradient_twin = basis.blocks().iter().any(|b| {
                        matches!(b.kind, BlockKind::CellGradient { level: l2, cell: c2 }
                            if l2 == level && c2 == cell && !b.range.is_empty())
                    });
                    if has_gradient_twin {
                        continue;
                    }
                }
                rhs += 8.0 * l_bound as f64 * a.oscillation_on(form, level, cell).powf(p);
            }
        }
    }
    Ok((lhs, rhs))
}

/// Localization defect of the block structure: for `v` orthogonal to the
/// copy of H_n and `alpha = (n, idx)`, both projections commute with right
/// multiplication by the cell indicator. Returns the larger residual.
pub fn localization_residual(
    form: &ResistanceForm,
    basis: &HodgeBasis,
    v: &ModuleElement,
    n: usize,
    idx: usize,
) -> Result<f64> {
    let coeffs = basis.coefficients(v, form)?;
    let norm = coeffs.norm().max(1e-300);
    let coarse: f64 = basis
        .indices_in(n)
        .into_iter()
        .map(|i| coeffs[i] * coeffs[i])
        .sum::<f64>()
        .sqrt();
    if coarse > 1e-9 * norm.max(1.0) {
        return Err(Error::NotOrthogonal {
            residual: coarse / norm,
        });
    }

    let ind = Multiplier::indicator(form, n, idx);
    let v_ind = multiply(form, v, &ind)?;

    let mut worst = 0.0f64;
    for gradient_side in [true, false] {
        let lhs = basis.apply_projection(form, &v_ind, gradient_side)?;
        let proj_v = basis.apply_projection(form, v, gradient_side)?;
        let mut rhs = multiply(form, &proj_v, &ind)?;
        rhs.axpy(-1.0, &lhs);
        worst = worst.max(rhs.norm(form));
    }
    Ok(worst)
}

/// Numerical rank of [F, a] (relative threshold 1e-9) with its bound,
/// the dimension of the copy of H_n at the multiplier's level.
pub fn rank_check(
    form: &ResistanceForm,
    basis: &HodgeBasis,
    a: &Multiplier,
) -> Result<(usize, usize)> {
    if a.level >= basis.level() {
        return Err(Error::LevelMismatch {
            expected: basis.level(),
            got: a.level,
        });
    }
    let c = commutator_matrix(form, basis, a)?;
    let s = singular_values(&c);
    let (bound, _, _) = basis.dims_at(a.level);
    let floor = 1e-12 * (1.0 + 4.0 * a.sup_norm());
    Ok((s.numerical_rank(1e-9, floor), bound))
}
