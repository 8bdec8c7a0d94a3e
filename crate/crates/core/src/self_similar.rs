//! Self-similar structures: a subdivision rule, a base network, resistance
//! factors and measure weights, plus the harmonic extension matrices they
//! induce.

use crate::cell_structure::{build_structure, CellStructure, SubdivisionRule};
use crate::error::{Error, Result};
use crate::resistance_form::{Network, ResistanceForm, VertexFunction};
use nalgebra::DMatrix;
use std::sync::Arc;

/// Tolerance for the renormalization fixed point check.
const FIXED_POINT_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SelfSimilarStructure {
    rule: SubdivisionRule,
    base: Network,
    r: Vec<f64>,
    mu: Vec<f64>,
}

impl SelfSimilarStructure {
    pub fn new(rule: SubdivisionRule, base: Network, r: Vec<f64>, mu: Vec<f64>) -> Result<Self> {
        if base.size() != rule.boundary_size() {
            return Err(Error::SizeMismatch {
                expected: rule.boundary_size(),
                got: base.size(),
            });
        }
        if r.len() != rule.arity() || mu.len() != rule.arity() {
            return Err(Error::SizeMismatch {
                expected: rule.arity(),
                got: r.len().min(mu.len()),
            });
        }
        if r.iter().any(|&x| x <= 0.0 || x >= 1.0) {
            return Err(Error::InvalidParameter(
                "resistance factors must lie in (0, 1)".into(),
            ));
        }
        if mu.iter().any(|&x| x <= 0.0 || x >= 1.0) {
            return Err(Error::InvalidParameter(
                "measure weights must lie in (0, 1)".into(),
            ));
        }
        let total: f64 = mu.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "measure weights sum to {total}, expected 1"
            )));
        }
        if !base.is_connected() {
            return Err(Error::Disconnected("base network is reducible".into()));
        }
        Ok(SelfSimilarStructure { rule, base, r, mu })
    }

    pub fn rule(&self) -> &SubdivisionRule {
        &self.rule
    }

    pub fn name(&self) -> &str {
        self.rule.name()
    }

    pub fn base_network(&self) -> &Network {
        &self.base
    }

    pub fn arity(&self) -> usize {
        self.rule.arity()
    }

    pub fn boundary_size(&self) -> usize {
        self.rule.boundary_size()
    }

    pub fn resistance_factors(&self) -> &[f64] {
        &self.r
    }

    pub fn measure_weights(&self) -> &[f64] {
        &self.mu
    }

    /// The common resistance factor, if all r_j agree.
    pub fn uniform_r(&self) -> Option<f64> {
        let r0 = self.r[0];
        self.r.iter().all(|&x| (x - r0).abs() < 1e-14).then_some(r0)
    }

    /// Expand to `depth`: cell alpha carries the base network scaled by
    /// `1 / r_alpha` where `r_alpha` is the product of the factors along
    /// the word.
    pub fn decimate(&self, depth: usize) -> Result<(CellStructure, ResistanceForm)> {
        let structure = Arc::new(build_structure(&self.rule, depth)?);
        let mut networks: Vec<Vec<Network>> = Vec::with_capacity(depth + 1);
        let mut scales = vec![1.0f64];
        for n in 0..=depth {
            networks.push(scales.iter().map(|&s| self.base.scaled(s)).collect());
            if n < depth {
                let mut next = Vec::with_capacity(scales.len() * self.arity());
                for &s in &scales {
                    for j in 0..self.arity() {
                        next.push(s / self.r[j]);
                    }
                }
                scales = next;
            }
        }
        let form = ResistanceForm::new(Arc::clone(&structure), networks)?;
        Ok((
            Arc::try_unwrap(structure).unwrap_or_else(|arc| (*arc).clone()),
            form,
        ))
    }

    /// Deviation of the level-1 trace from the base form. Zero (up to solver
    /// noise) iff the base network is a renormalization fixed point.
    pub fn fixed_point_residual(&self) -> Result<f64> {
        let (_, form) = self.decimate(1)?;
        form.check_compatibility(0)
    }

    /// Harmonic extension matrices A_j, their quotients modulo constants and
    /// the energy Gram of the quotient basis.
    pub fn harmonic_matrices(&self) -> Result<HarmonicMatrices> {
        let residual = self.fixed_point_residual()?;
        if residual > FIXED_POINT_TOL {
            return Err(Error::FixedPointViolation { residual });
        }
        let (structure, form) = self.decimate(1)?;
        let b = self.boundary_size();
        // column k of A_j: harmonic extension of the k-th boundary indicator,
        // restricted to child j in the child's vertex order
        let mut a: Vec<DMatrix<f64>> = (0..self.arity()).map(|_| DMatrix::zeros(b, b)).collect();
        for k in 0..b {
            let mut e = vec![0.0; b];
            e[k] = 1.0;
            let h = form.harmonic_extension(&VertexFunction::new(0, e), 1)?;
            for (j, aj) in a.iter_mut().enumerate() {
                let child = structure.cell(1, j);
                for (i, v) in child.vertices.iter().enumerate() {
                    aj[(i, k)] = h.values[v.0];
                }
            }
        }
        // quotient basis: differences against the first boundary vertex
        let q = b - 1;
        let mut a_tilde = Vec::with_capacity(self.arity());
        for aj in &a {
            let mut t = DMatrix::zeros(q, q);
            for k in 1..b {
                // image of the k-th difference basis vector = column k of A_j,
                // expressed in differences
                for i in 1..b {
                    t[(i - 1, k - 1)] = aj[(i, k)] - aj[(0, k)];
                }
            }
            a_tilde.push(t);
        }
        // energy Gram of the difference basis: G_kl = E_0(e_k, e_l)
        let mut gram = DMatrix::zeros(q, q);
        for k in 1..b {
            for l in 1..b {
                let mut ek = vec![0.0; b];
                ek[k] = 1.0;
                let mut el = vec![0.0; b];
                el[l] = 1.0;
                gram[(k - 1, l - 1)] = self.base.energy_bilinear(&ek, &el);
            }
        }
        Ok(HarmonicMatrices { a, a_tilde, gram })
    }

    /// The unique d in (0, 2) with sum_j (r_j mu_j)^{d/2} = 1.
    pub fn spectral_dimension(&self) -> Result<f64> {
        spectral_dimension(&self.r, &self.mu)
    }

    /// Unit interval: two halves, r = mu = 1/2, unit conductance base.
    pub fn interval() -> SelfSimilarStructure {
        SelfSimilarStructure::new(
            SubdivisionRule::interval(),
            Network::new(2, &[(0, 1, 1.0)]).unwrap(),
            vec![0.5; 2],
            vec![0.5; 2],
        )
        .unwrap()
    }

    /// Sierpinski gasket: r = 3/5, mu = 1/3, unit triangle base.
    pub fn gasket() -> SelfSimilarStructure {
        SelfSimilarStructure::new(
            SubdivisionRule::gasket(),
            Network::new(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap(),
            vec![0.6; 3],
            vec![1.0 / 3.0; 3],
        )
        .unwrap()
    }

    /// Vicsek cross: r = 1/3, mu = 1/5; the base form is the trace of the
    /// center star, a complete graph with conductances 1/4.
    pub fn vicsek() -> SelfSimilarStructure {
        SelfSimilarStructure::new(
            SubdivisionRule::vicsek(),
            Network::new(
                4,
                &[
                    (0, 1, 0.25),
                    (0, 2, 0.25),
                    (0, 3, 0.25),
                    (1, 2, 0.25),
                    (1, 3, 0.25),
                    (2, 3, 0.25),
                ],
            )
            .unwrap(),
            vec![1.0 / 3.0; 5],
            vec![0.2; 5],
        )
        .unwrap()
    }
}

/// Solve sum_j (r_j mu_j)^{d/2} = 1 for d in (0, 2) by bisection.
pub fn spectral_dimension(r: &[f64], mu: &[f64]) -> Result<f64> {
    if r.len() != mu.len() || r.is_empty() {
        return Err(Error::InvalidParameter("empty scaling data".into()));
    }
    if mu.iter().any(|&m| m <= 0.0) {
        return Err(Error::InvalidParameter("weights must be positive".into()));
    }
    let phi = |d: f64| -> f64 {
        r.iter()
            .zip(mu)
            .map(|(&rj, &mj)| (rj * mj).powf(d / 2.0))
            .sum::<f64>()
            - 1.0
    };
    if phi(2.0) >= 0.0 {
        return Err(Error::NoSpectralDimension(format!(
            "sum r_j mu_j = {} >= 1",
            phi(2.0) + 1.0
        )));
    }
    let (mut lo, mut hi) = (0.0f64, 2.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Harmonic extension matrices of a self-similar structure. `a_tilde` acts on
/// the quotient by constants in the difference basis `h(v_k) - h(v_0)`;
/// `gram` is the energy inner product in that basis, so adjoints taken with
/// respect to `gram` are basis-independent.
#[derive(Debug, Clone)]
pub struct HarmonicMatrices {
    pub a: Vec<DMatrix<f64>>,
    pub a_tilde: Vec<DMatrix<f64>>,
    pub gram: DMatrix<f64>,
}

impl HarmonicMatrices {
    pub fn arity(&self) -> usize {
        self.a.len()
    }

    pub fn quotient_dim(&self) -> usize {
        self.gram.nrows()
    }

    /// `max | sum_j A~_j^dagger A~_j - r I |` where the adjoint is taken with
    /// respect to the energy Gram. Requires equal resistance factors.
    pub fn self_similar_identity_residual(&self, r_factors: &[f64]) -> Result<f64> {
        let r0 = r_factors[0];
        if r_factors.iter().any(|&x| (x - r0).abs() > 1e-14) {
            return Err(Error::UnequalScalings);
        }
        // sum A~^T G A~ = r G  <=>  sum G^{-1} A~^T G A~ = r I
        let mut acc = DMatrix::zeros(self.quotient_dim(), self.quotient_dim());
        for t in &self.a_tilde {
            acc += t.transpose() * &self.gram * t;
        }
        let target = &self.gram * r0;
        let ginv = self
            .gram
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::SingularSystem("energy Gram is singular".into()))?;
        let diff = &ginv * (acc - target);
        Ok(diff.iter().fold(0.0f64, |m, &v| m.max(v.abs())))
    }
}
