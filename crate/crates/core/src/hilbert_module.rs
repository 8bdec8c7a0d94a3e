//! The finite-scale Hilbert module H_n: per-cell harmonic data modulo
//! constants with the energy inner product, the derivation, the projection
//! onto its image (computed two independent ways), and the full Hodge basis.

use crate::cell_structure::{CellStructure, VertexId};
use crate::error::{Error, Result};
use crate::resistance_form::{Network, ResistanceForm, VertexFunction};
use nalgebra::{DMatrix, DVector};
use std::ops::Range;

/// An element of H_n: one value vector per n-cell, canonicalized modulo
/// constants so that each cell's values sum to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleElement {
    pub level: usize,
    pub cells: Vec<Vec<f64>>,
}

impl ModuleElement {
    pub fn zero(form: &ResistanceForm, level: usize) -> Self {
        let cells = form
            .structure()
            .cells(level)
            .iter()
            .map(|c| vec![0.0; c.vertices.len()])
            .collect();
        ModuleElement { level, cells }
    }

    /// Canonical representative: subtract each cell's mean.
    pub fn canonicalize(&mut self) {
        for cell in &mut self.cells {
            if cell.is_empty() {
                continue;
            }
            let mean = cell.iter().sum::<f64>() / cell.len() as f64;
            for v in cell.iter_mut() {
                *v -= mean;
            }
        }
    }

    pub fn from_cell_values(level: usize, cells: Vec<Vec<f64>>) -> Self {
        let mut e = ModuleElement { level, cells };
        e.canonicalize();
        e
    }

    pub fn axpy(&mut self, a: f64, other: &ModuleElement) {
        for (c, oc) in self.cells.iter_mut().zip(&other.cells) {
            for (v, ov) in c.iter_mut().zip(oc) {
                *v += a * ov;
            }
        }
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.cells {
            for v in c.iter_mut() {
                *v *= a;
            }
        }
    }

    pub fn is_cell_zero(&self, idx: usize) -> bool {
        self.cells[idx].iter().all(|&v| v == 0.0)
    }

    /// sum over cells of E_alpha(u_alpha, v_alpha).
    pub fn inner(&self, other: &ModuleElement, form: &ResistanceForm) -> Result<f64> {
        if self.level != other.level {
            return Err(Error::LevelMismatch {
                expected: self.level,
                got: other.level,
            });
        }
        let mut acc = 0.0;
        for idx in 0..self.cells.len() {
            if self.is_cell_zero(idx) || other.is_cell_zero(idx) {
                continue;
            }
            acc += form.cell_energy(self.level, idx, &self.cells[idx], &other.cells[idx])?;
        }
        Ok(acc)
    }

    pub fn norm(&self, form: &ResistanceForm) -> f64 {
        self.inner(self, form).expect("same level").max(0.0).sqrt()
    }
}

/// The derivation at level n: per-cell restriction of `f`, mod constants.
pub fn derivation(form: &ResistanceForm, f: &VertexFunction) -> ModuleElement {
    let cells = (0..form.structure().cells(f.level).len())
        .map(|idx| form.restrict_to_cell(f, idx))
        .collect();
    ModuleElement::from_cell_values(f.level, cells)
}

/// The inclusion H_n into H_{n+1}: per-cell harmonic extension to children.
pub fn include(form: &ResistanceForm, u: &ModuleElement) -> Result<ModuleElement> {
    let level = u.level;
    if level >= form.depth() {
        return Err(Error::LevelOutOfRange {
            level: level + 1,
            depth: form.depth(),
        });
    }
    let structure = form.structure();
    let mut out = ModuleElement::zero(form, level + 1);
    for idx in 0..u.cells.len() {
        if u.is_cell_zero(idx) {
            continue;
        }
        let extended = form.extend_cell(level, idx, &u.cells[idx])?;
        for ci in structure.children_range(idx) {
            let child = structure.cell(level + 1, ci);
            out.cells[ci] = child.vertices.iter().map(|v| extended[&v.0]).collect();
        }
    }
    out.canonicalize();
    Ok(out)
}

/// Repeated inclusion up to level `m`.
pub fn include_to(form: &ResistanceForm, u: &ModuleElement, m: usize) -> Result<ModuleElement> {
    if m < u.level {
        return Err(Error::LevelMismatch {
            expected: u.level,
            got: m,
        });
    }
    let mut cur = u.clone();
    while cur.level < m {
        cur = include(form, &cur)?;
    }
    Ok(cur)
}

/// Projection onto the image of the derivation, by the weighted-graph
/// Neumann solve: find f on V_n with, at every vertex v,
/// `sum_{cells alpha containing v} d_n (f - u_alpha)(v) = 0`,
/// then Pu = derivation(f). Returns (f, Pu); f is pinned to zero at the
/// first vertex of V_0.
pub fn project_p(
    form: &ResistanceForm,
    u: &ModuleElement,
) -> Result<(VertexFunction, ModuleElement)> {
    let level = u.level;
    let structure = form.structure();
    let nv = structure.vertex_count(level);
    let mut rhs = vec![0.0f64; nv];
    for (idx, data) in u.cells.iter().enumerate() {
        if u.is_cell_zero(idx) {
            continue;
        }
        let fluxes = form.cell_network(level, idx).fluxes(data);
        for (k, v) in structure.cell(level, idx).vertices.iter().enumerate() {
            rhs[v.0] += fluxes[k];
        }
    }
    let scale = rhs.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let total: f64 = rhs.iter().sum();
    if total.abs() > 1e-8 * scale.max(1.0) {
        return Err(Error::SingularSystem(format!(
            "Neumann right-hand side sums to {total:e}, not solvable"
        )));
    }

    let level_net = form.level_network(level);
    let l = level_net.laplacian();
    // pin global vertex 0 and solve the reduced SPD system
    let reduced = l.view_range(1..nv, 1..nv).into_owned();
    let b = DVector::from_iterator(nv - 1, rhs[1..].iter().copied());
    let chol = reduced
        .cholesky()
        .ok_or_else(|| Error::SingularSystem("level network is disconnected".into()))?;
    let sol = chol.solve(&b);
    let mut f = vec![0.0; nv];
    f[1..].copy_from_slice(sol.as_slice());
    let f = VertexFunction::new(level, f);
    let pu = derivation(form, &f);
    Ok((f, pu))
}

/// The complementary projection: u - Pu.
pub fn project_p_perp(form: &ResistanceForm, u: &ModuleElement) -> Result<ModuleElement> {
    let (_, pu) = project_p(form, u)?;
    let mut out = u.clone();
    out.axpy(-1.0, &pu);
    out.canonicalize();
    Ok(out)
}

/// The split-vertex projection of the single-cell element h (x) 1_alpha,
/// where h is the tent function at `p` at the level of `alpha = (level, idx)`.
///
/// Vertex p is replaced by p_in and p_out; edges incident to p from cell
/// alpha's own network attach to p_in, edges from every other cell's network
/// attach to p_out. The harmonic function eta with eta(p_in) = 1,
/// eta(p_out) = 0 and no constraint elsewhere, read back cell by cell,
/// equals P^perp(h (x) 1_alpha). If the split disconnects p_in from p_out
/// the solution is locally constant and the projection is zero.
pub fn eta_projection(
    form: &ResistanceForm,
    p: VertexId,
    level: usize,
    idx: usize,
) -> Result<ModuleElement> {
    let structure = form.structure();
    let cell = structure.cell(level, idx);
    if !cell.contains(p) {
        return Err(Error::VertexNotInCell {
            vertex: p.0,
            cell: cell.address.to_string(),
        });
    }
    let nv = structure.vertex_count(level);
    let p_in = p.0; // reuse p's slot for p_in
    let p_out = nv;
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for ci in 0..structure.cells(level).len() {
        let verts = &structure.cell(level, ci).vertices;
        for &(a, b, c) in form.cell_network(level, ci).edges() {
            let map = |g: usize| -> usize {
                if g == p.0 {
                    if ci == idx {
                        p_in
                    } else {
                        p_out
                    }
                } else {
                    g
                }
            };
            edges.push((map(verts[a].0), map(verts[b].0), c));
        }
    }
    let split = Network::new(nv + 1, &edges)?;
    let eta = split.dirichlet_solve(&[(p_in, 1.0), (p_out, 0.0)])?;

    let cells = (0..structure.cells(level).len())
        .map(|ci| {
            structure
                .cell(level, ci)
                .vertices
                .iter()
                .map(|v| {
                    if v.0 == p.0 {
                        if ci == idx {
                            eta[p_in]
                        } else {
                            eta[p_out]
                        }
                    } else {
                        eta[v.0]
                    }
                })
                .collect()
        })
        .collect();
    Ok(ModuleElement::from_cell_values(level, cells))
}

/// Which part of the decomposition a Hodge block spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// gradients in H_0: the image of the derivation at level 0
    BaseGradient,
    /// harmonic 1-forms in H_0
    BaseForm,
    /// gradients of tent functions at the new vertices of one cell
    CellGradient { level: usize, cell: usize },
    /// 1-forms supported on one cell with vanishing boundary fluxes
    CellForm { level: usize, cell: usize },
}

impl BlockKind {
    pub fn is_gradient(&self) -> bool {
        matches!(
            self,
            BlockKind::BaseGradient | BlockKind::CellGradient { .. }
        )
    }

    /// Elements of this block lie in the copy of H_m for every m >= this.
    pub fn member_level(&self) -> usize {
        match self {
            BlockKind::BaseGradient | BlockKind::BaseForm => 0,
            BlockKind::CellGradient { level, .. } | BlockKind::CellForm { level, .. } => level + 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HodgeBlock {
    pub kind: BlockKind,
    pub range: Range<usize>,
}

/// Orthonormal basis of H_N organized by scale and cell, gradient blocks
/// before form blocks at each scale.
#[derive(Debug)]
pub struct HodgeBasis {
    level: usize,
    blocks: Vec<HodgeBlock>,
    vectors: Vec<ModuleElement>,
    /// +1 on gradient blocks, -1 on form blocks
    signs: Vec<f64>,
    /// support of each vector as a range of level-N cell indices
    supports: Vec<Range<usize>>,
}

impl HodgeBasis {
    /// Assemble the full decomposition of H_N.
    pub fn assemble(form: &ResistanceForm, n_level: usize) -> Result<HodgeBasis> {
        let structure = form.structure();
        if n_level > form.depth() {
            return Err(Error::LevelOutOfRange {
                level: n_level,
                depth: form.depth(),
            });
        }
        let dim_h: usize = structure
            .cells(n_level)
            .iter()
            .map(|c| c.vertices.len() - 1)
            .sum();
        const MAX_DIM: usize = 2500;
        if dim_h > MAX_DIM {
            return Err(Error::InvalidParameter(format!(
                "dim H_N = {dim_h} exceeds the dense-basis cap {MAX_DIM}; lower the level"
            )));
        }

        let mut builder = BasisBuilder {
            form,
            vectors: Vec::with_capacity(dim_h),
            signs: Vec::with_capacity(dim_h),
            supports: Vec::with_capacity(dim_h),
            blocks: Vec::new(),
        };

        // base gradient block: derivations of the V_0 indicator functions
        let v0 = structure.vertex_count(0);
        let mut base_grad = Vec::new();
        for k in 1..v0 {
            let mut e = vec![0.0; v0];
            e[k] = 1.0;
            let el = derivation(form, &VertexFunction::new(0, e));
            base_grad.push(include_to(form, &el, n_level)?);
        }
        let full = 0..structure.cells(n_level).len();
        builder.push_block(BlockKind::BaseGradient, base_grad, full.clone(), v0 - 1)?;

        // base form block: flux nullspace over the level-0 cells
        let base_cells: Vec<usize> = (0..structure.cells(0).len()).collect();
        let dim0: usize = structure
            .cells(0)
            .iter()
            .map(|c| c.vertices.len() - 1)
            .sum();
        let expected0 = (dim0 + 1).saturating_sub(v0);
        let patch0: Vec<VertexId> = (0..v0).map(VertexId).collect();
        let elements0 = if expected0 > 0 {
            flux_nullspace(form, 0, &base_cells, &patch0)?
                .into_iter()
                .map(|cells| {
                    let el = ModuleElement::from_cell_values(0, cells);
                    include_to(form, &el, n_level)
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        builder.push_block(BlockKind::BaseForm, elements0, full, expected0)?;

        // per-cell refinement blocks
        for m in 0..n_level {
            let count_m = structure.vertex_count(m);
            for idx in 0..structure.cells(m).len() {
                let children: Vec<usize> = structure.children_range(idx).collect();
                let mut patch_vertices: Vec<VertexId> = children
                    .iter()
                    .flat_map(|&ci| structure.cell(m + 1, ci).vertices.iter().copied())
                    .collect();
                patch_vertices.sort_unstable();
                patch_vertices.dedup();
                let new_vertices: Vec<VertexId> = patch_vertices
                    .iter()
                    .copied()
                    .filter(|v| v.0 >= count_m)
                    .collect();

                // support at level N: the descendants of this cell
                let span = structure.arity().pow((n_level - m - 1) as u32);
                let support_start = children[0] * span;
                let support = support_start..(children[children.len() - 1] + 1) * span;

                // gradient block: tents at the new vertices
                let mut grads = Vec::with_capacity(new_vertices.len());
                for &x in &new_vertices {
                    let mut e = vec![0.0; structure.vertex_count(m + 1)];
                    e[x.0] = 1.0;
                    let el = derivation(form, &VertexFunction::new(m + 1, e));
                    grads.push(include_to(form, &el, n_level)?);
                }
                builder.push_block(
                    BlockKind::CellGradient {
                        level: m,
                        cell: idx,
                    },
                    grads,
                    support.clone(),
                    new_vertices.len(),
                )?;

                // form block: flux nullspace of the once-subdivided cell
                let dim_children: usize = children
                    .iter()
                    .map(|&ci| structure.cell(m + 1, ci).vertices.len() - 1)
                    .sum();
                let expected = (dim_children + 1).saturating_sub(patch_vertices.len());
                let elements = if expected > 0 {
                    let null = flux_nullspace(form, m + 1, &children, &patch_vertices)?;
                    null.into_iter()
                        .map(|data| {
                            let mut el = ModuleElement::zero(form, m + 1);
                            for (&ci, cell_data) in children.iter().zip(data) {
                                el.cells[ci] = cell_data;
                            }
                            el.canonicalize();
                            include_to(form, &el, n_level)
                        })
                        .collect::<Result<Vec<_>>>()?
                } else {
                    Vec::new()
                };
                builder.push_block(
                    BlockKind::CellForm {
                        level: m,
                        cell: idx,
                    },
                    elements,
                    support,
                    expected,
                )?;
            }
        }

        if builder.vectors.len() != dim_h {
            return Err(Error::DimensionMismatch {
                what: "Hodge basis".into(),
                expected: dim_h,
                got: builder.vectors.len(),
            });
        }
        Ok(HodgeBasis {
            level: n_level,
            blocks: builder.blocks,
            vectors: builder.vectors,
            signs: builder.signs,
            supports: builder.supports,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn blocks(&self) -> &[HodgeBlock] {
        &self.blocks
    }

    pub fn vectors(&self) -> &[ModuleElement] {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> &ModuleElement {
        &self.vectors[i]
    }

    /// F-sign of basis vector i: +1 on gradients, -1 on forms.
    pub fn sign(&self, i: usize) -> f64 {
        self.signs[i]
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn support(&self, i: usize) -> Range<usize> {
        self.supports[i].clone()
    }

    pub fn gradient_dim(&self) -> usize {
        self.signs.iter().filter(|&&s| s > 0.0).count()
    }

    pub fn form_dim(&self) -> usize {
        self.signs.iter().filter(|&&s| s < 0.0).count()
    }

    /// Dimensions (dim H_n, gradient part, form part) of the copy of H_n
    /// inside H_N, counted from the assembled blocks.
    pub fn dims_at(&self, n: usize) -> (usize, usize, usize) {
        let mut grad = 0;
        let mut forms = 0;
        for b in &self.blocks {
            if b.kind.member_level() <= n {
                if b.kind.is_gradient() {
                    grad += b.range.len();
                } else {
                    forms += b.range.len();
                }
            }
        }
        (grad + forms, grad, forms)
    }

    /// Indices of basis vectors spanning the copy of H_n inside H_N.
    pub fn indices_in(&self, n: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for b in &self.blocks {
            if b.kind.member_level() <= n {
                out.extend(b.range.clone());
            }
        }
        out
    }

    /// Expansion coefficients of `u` in the orthonormal basis.
    pub fn coefficients(&self, u: &ModuleElement, form: &ResistanceForm) -> Result<DVector<f64>> {
        if u.level != self.level {
            return Err(Error::LevelMismatch {
                expected: self.level,
                got: u.level,
            });
        }
        let mut c = DVector::zeros(self.dim());
        for i in 0..self.dim() {
            c[i] = self.vectors[i].inner(u, form)?;
        }
        Ok(c)
    }

    pub fn element_from_coefficients(
        &self,
        form: &ResistanceForm,
        c: &DVector<f64>,
    ) -> ModuleElement {
        let mut out = ModuleElement::zero(form, self.level);
        for i in 0..self.dim() {
            if c[i] != 0.0 {
                out.axpy(c[i], &self.vectors[i]);
            }
        }
        out
    }

    /// P (gradient side) or P^perp (form side) applied through the basis.
    pub fn apply_projection(
        &self,
        form: &ResistanceForm,
        u: &ModuleElement,
        gradient_side: bool,
    ) -> Result<ModuleElement> {
        let mut c = self.coefficients(u, form)?;
        for i in 0..self.dim() {
            if (self.signs[i] > 0.0) != gradient_side {
                c[i] = 0.0;
            }
        }
        Ok(self.element_from_coefficients(form, &c))
    }

    /// Largest deviation of the basis Gram matrix from the identity.
    pub fn gram_residual(&self, form: &ResistanceForm) -> Result<f64> {
        let mut worst = 0.0f64;
        for i in 0..self.dim() {
            for j in i..self.dim() {
                if self.supports[i].start >= self.supports[j].end
                    || self.supports[j].start >= self.supports[i].end
                {
                    continue; // disjoint supports pair to exactly zero
                }
                let g = self.vectors[i].inner(&self.vectors[j], form)?;
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        Ok(worst)
    }
}

struct BasisBuilder<'a> {
    form: &'a ResistanceForm,
    vectors: Vec<ModuleElement>,
    signs: Vec<f64>,
    supports: Vec<Range<usize>>,
    blocks: Vec<HodgeBlock>,
}

impl<'a> BasisBuilder<'a> {
    /// Orthonormalize `candidates` against everything already built (modified
    /// Gram-Schmidt with one re-orthogonalization pass) and append them as a
    /// block. The block must contribute exactly `expected` dimensions.
    fn push_block(
        &mut self,
        kind: BlockKind,
        candidates: Vec<ModuleElement>,
        support: Range<usize>,
        expected: usize,
    ) -> Result<()> {
        if candidates.len() != expected {
            return Err(Error::DimensionMismatch {
                what: format!("{kind:?} candidates"),
                expected,
                got: candidates.len(),
            });
        }
        let start = self.vectors.len();
        for mut v in candidates {
            let original = v.norm(self.form);
            for _pass in 0..2 {
                for i in 0..self.vectors.len() {
                    // disjoint supports are exactly orthogonal; skip them
                    if self.supports[i].start >= support.end
                        || support.start >= self.supports[i].end
                    {
                        continue;
                    }
                    let c = self.vectors[i].inner(&v, self.form)?;
                    if c != 0.0 {
                        v.axpy(-c, &self.vectors[i]);
                    }
                }
            }
            let norm = v.norm(self.form);
            if norm.is_nan() || norm <= 1e-8 * original.max(1e-30) {
                return Err(Error::DimensionMismatch {
                    what: format!("{kind:?} lost a dimension in orthonormalization"),
                    expected,
                    got: self.vectors.len() - start,
                });
            }
            v.scale(1.0 / norm);
            self.vectors.push(v);
            self.signs.push(if kind.is_gradient() { 1.0 } else { -1.0 });
            self.supports.push(support.clone());
        }
        self.blocks.push(HodgeBlock {
            kind,
            range: start..self.vectors.len(),
        });
        Ok(())
    }
}

/// Basis of the space of per-cell data over `cells` at `level` (canonical
/// zero-sum per cell) whose vertex flux sums vanish at every vertex of
/// `patch_vertices`. Vectors come back as per-cell value lists in the order
/// of `cells`.
fn flux_nullspace(
    form: &ResistanceForm,
    level: usize,
    cells: &[usize],
    patch_vertices: &[VertexId],
) -> Result<Vec<Vec<Vec<f64>>>> {
    let structure = form.structure();
    let mut offsets = Vec::with_capacity(cells.len());
    let mut nvar = 0usize;
    for &ci in cells {
        offsets.push(nvar);
        nvar += structure.cell(level, ci).vertices.len();
    }
    let vpos: std::collections::BTreeMap<usize, usize> = patch_vertices
        .iter()
        .enumerate()
        .map(|(i, v)| (v.0, i))
        .collect();
    let nflux = patch_vertices.len();
    let nrows = nflux + cells.len();
    let mut c = DMatrix::<f64>::zeros(nrows, nvar);
    for (k, &ci) in cells.iter().enumerate() {
        let cell = structure.cell(level, ci);
        let l = form.cell_network(level, ci).laplacian();
        for (a, va) in cell.vertices.iter().enumerate() {
            let row = vpos[&va.0];
            for b in 0..cell.vertices.len() {
                c[(row, offsets[k] + b)] += l[(a, b)];
            }
        }
        // canonical zero-sum constraint for this cell
        for b in 0..cell.vertices.len() {
            c[(nflux + k, offsets[k] + b)] = 1.0;
        }
    }
    // nullspace from the spectral decomposition of C^T C
    let cc = c.transpose() * &c;
    let eig = cc.symmetric_eigen();
    // numerical zeros of C^T C sit near 1e-16 * lam_max; genuine eigenvalues
    // of these small patch systems are orders of magnitude above this cut
    let lam_max = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v));
    let tol = lam_max.max(1.0) * 1e-12;
    let mut idx: Vec<usize> = (0..nvar).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let mut out = Vec::new();
    for &i in &idx {
        if eig.eigenvalues[i] > tol {
            break;
        }
        let col = eig.eigenvectors.column(i);
        let mut per_cell = Vec::with_capacity(cells.len());
        for (k, &ci) in cells.iter().enumerate() {
            let n = structure.cell(level, ci).vertices.len();
            per_cell.push((0..n).map(|b| col[offsets[k] + b]).collect::<Vec<f64>>());
        }
        out.push(per_cell);
    }
    Ok(out)
}

/// One row of the closed-form dimension table: `dim H_n = sum (|V_a| - 1)`,
/// gradient part `|V_n| - 1`, form part the difference plus one.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DimensionRow {
    pub level: usize,
    pub dim_h: usize,
    pub dim_gradient: usize,
    pub dim_form: usize,
}

pub fn dimension_report(structure: &CellStructure, n_max: usize) -> Result<Vec<DimensionRow>> {
    if n_max > structure.depth() {
        return Err(Error::LevelOutOfRange {
            level: n_max,
            depth: structure.depth(),
        });
    }
    Ok((0..=n_max)
        .map(|n| {
            let dim_h: usize = structure
                .cells(n)
                .iter()
                .map(|c| c.vertices.len() - 1)
                .sum();
            DimensionRow {
                level: n,
                dim_h,
                dim_gradient: structure.vertex_count(n) - 1,
                dim_form: dim_h + 1 - structure.vertex_count(n),
            }
        })
        .collect())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::cell_structure::quantum_graph_structure;
    use crate::self_similar::SelfSimilarStructure;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn gasket(depth: usize) -> ResistanceForm {
        SelfSimilarStructure::gasket().decimate(depth).unwrap().1
    }

    fn interval(depth: usize) -> ResistanceForm {
        SelfSimilarStructure::interval().decimate(depth).unwrap().1
    }

    pub(crate) fn theta(depth: usize) -> ResistanceForm {
        let cs = Arc::new(quantum_graph_structure(&[(0, 1), (0, 1), (0, 1)], depth).unwrap());
        let nets: Vec<Vec<Network>> = (0..=depth)
            .map(|n| {
                (0..cs.cells(n).len())
                    .map(|_| Network::new(2, &[(0, 1, (1u64 << n) as f64)]).unwrap())
                    .collect()
            })
            .collect();
        ResistanceForm::new(cs, nets).unwrap()
    }

    pub(crate) fn random_element(
        form: &ResistanceForm,
        level: usize,
        rng: &mut ChaCha8Rng,
    ) -> ModuleElement {
        let cells = form
            .structure()
            .cells(level)
            .iter()
            .map(|c| {
                (0..c.vertices.len())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect()
            })
            .collect();
        ModuleElement::from_cell_values(level, cells)
    }

    #[test]
    fn inner_product_basics() {
        let form = gasket(1);
        let mut u = ModuleElement::zero(&form, 1);
        u.cells[0] = vec![1.0, 0.0, 0.0];
        u.canonicalize();
        let e = form.cell_energy(1, 0, &u.cells[0], &u.cells[0]).unwrap();
        assert!((u.inner(&u, &form).unwrap() - e).abs() < 1e-12);

        let mut v = ModuleElement::zero(&form, 1);
        v.cells[1] = vec![0.0, 2.0, -1.0];
        v.canonicalize();
        assert_eq!(u.inner(&v, &form).unwrap(), 0.0);

        // derivation of a harmonic extension keeps the coarse energy
        let h = form
            .harmonic_extension(&VertexFunction::new(0, vec![1.0, 0.0, 0.0]), 1)
            .unwrap();
        let dh = derivation(&form, &h);
        assert!((dh.inner(&dh, &form).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn derivation_interval_level_one() {
        let form = interval(1);
        let f = VertexFunction::new(1, vec![0.0, 1.0, 0.5]);
        let df = derivation(&form, &f);
        for idx in 0..2 {
            let c = &df.cells[idx];
            assert!((c[0].abs() - 0.25).abs() < 1e-14);
            assert!((c[1].abs() - 0.25).abs() < 1e-14);
        }
        assert!((df.inner(&df, &form).unwrap() - 1.0).abs() < 1e-12);

        let c = derivation(&form, &VertexFunction::new(1, vec![3.0; 3]));
        assert!(c.norm(&form) < 1e-15);

        // linearity
        let g = VertexFunction::new(1, vec![0.3, -0.7, 0.1]);
        let mut sum_vals = f.values.clone();
        for (a, b) in sum_vals.iter_mut().zip(&g.values) {
            *a += b;
        }
        let both = derivation(&form, &VertexFunction::new(1, sum_vals));
        let mut parts = derivation(&form, &f);
        parts.axpy(1.0, &derivation(&form, &g));
        parts.canonicalize();
        for (x, y) in both
            .cells
            .iter()
            .flatten()
            .zip(parts.cells.iter().flatten())
        {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn include_preserves_norm_and_commutes_with_derivation() {
        let form = gasket(2);
        let h0 = VertexFunction::new(0, vec![1.0, 0.0, 0.0]);
        let h1 = form.harmonic_extension(&h0, 1).unwrap();
        let h2 = form.harmonic_extension(&h0, 2).unwrap();
        let included = include(&form, &derivation(&form, &h1)).unwrap();
        let direct = derivation(&form, &h2);
        for (x, y) in included
            .cells
            .iter()
            .flatten()
            .zip(direct.cells.iter().flatten())
        {
            assert!((x - y).abs() < 1e-12);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let u = random_element(&form, 1, &mut rng);
            let v = include(&form, &u).unwrap();
            worst = worst.max((v.norm(&form) - u.norm(&form)).abs());
        }
        assert!(worst < 1e-10, "norm drift {worst}");

        let u = random_element(&form, 0, &mut rng);
        let two = include(&form, &include(&form, &u).unwrap()).unwrap();
        let direct = include_to(&form, &u, 2).unwrap();
        for (x, y) in two
            .cells
            .iter()
            .flatten()
            .zip(direct.cells.iter().flatten())
        {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_fixes_gradients_and_is_pythagorean() {
        let form = gasket(1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);

        let g = VertexFunction::new(1, (0..6).map(|_| rng.random_range(-1.0..1.0)).collect());
        let dg = derivation(&form, &g);
        let (f, pu) = project_p(&form, &dg).unwrap();
        let mut diff = dg.clone();
        diff.axpy(-1.0, &pu);
        assert!(diff.norm(&form) < 1e-10);
        let shift = g.values[0] - f.values[0];
        for (a, b) in f.values.iter().zip(&g.values) {
            assert!((a + shift - b).abs() < 1e-10);
        }

        for _ in 0..50 {
            let u = random_element(&form, 1, &mut rng);
            let (_, pu) = project_p(&form, &u).unwrap();
            let perp = project_p_perp(&form, &u).unwrap();
            let n2 = u.inner(&u, &form).unwrap();
            let p2 = pu.inner(&pu, &form).unwrap();
            let q2 = perp.inner(&perp, &form).unwrap();
            assert!((n2 - p2 - q2).abs() < 1e-10 * n2.max(1.0));
            let (_, p_of_perp) = project_p(&form, &perp).unwrap();
            assert!(p_of_perp.norm(&form) < 1e-10);
        }
    }

    #[test]
    fn tree_projection_is_identity() {
        let form = interval(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let u = random_element(&form, 3, &mut rng);
            let perp = project_p_perp(&form, &u).unwrap();
            assert!(perp.norm(&form) < 1e-10);
        }
    }

    #[test]
    fn eta_projection_matches_neumann_solve() {
        let form = gasket(2);
        let structure = form.structure_arc();
        let mut worst = 0.0f64;
        for level in 1..=2usize {
            for idx in 0..structure.cells(level).len() {
                let cell = structure.cell(level, idx).clone();
                for &p in &cell.vertices {
                    let eta = eta_projection(&form, p, level, idx).unwrap();
                    let mut u = ModuleElement::zero(&form, level);
                    let local = cell.local_index(p).unwrap();
                    u.cells[idx][local] = 1.0;
                    u.canonicalize();
                    let perp = project_p_perp(&form, &u).unwrap();
                    let mut diff = eta.clone();
                    diff.axpy(-1.0, &perp);
                    worst = worst.max(diff.norm(&form));
                }
            }
        }
        assert!(worst < 1e-10, "eta vs Neumann deviation {worst}");
    }

    #[test]
    fn eta_linearity_across_cells_at_a_vertex() {
        // summing the eta projections over the cells meeting at p agrees with
        // P^perp applied to the sum of the single-cell elements
        let form = gasket(1);
        let structure = form.structure_arc();
        let p = VertexId(3); // a midpoint, shared by two cells
        let cells: Vec<usize> = structure.cells_containing(1, p).to_vec();
        assert_eq!(cells.len(), 2);
        let mut eta_sum = ModuleElement::zero(&form, 1);
        let mut u_sum = ModuleElement::zero(&form, 1);
        for &idx in &cells {
            eta_sum.axpy(1.0, &eta_projection(&form, p, 1, idx).unwrap());
            let local = structure.cell(1, idx).local_index(p).unwrap();
            u_sum.cells[idx][local] += 1.0;
        }
        u_sum.canonicalize();
        eta_sum.canonicalize();
        let perp = project_p_perp(&form, &u_sum).unwrap();
        let mut diff = eta_sum;
        diff.axpy(-1.0, &perp);
        assert!(diff.norm(&form) < 1e-10);
    }

    #[test]
    fn eta_projection_is_zero_on_trees() {
        let form = interval(1);
        let eta = eta_projection(&form, VertexId(2), 1, 0).unwrap();
        assert!(eta.norm(&form) < 1e-14);
    }

    #[test]
    fn hodge_dimensions() {
        let form = gasket(2);
        let basis = HodgeBasis::assemble(&form, 1).unwrap();
        assert_eq!(basis.dim(), 6);
        assert_eq!(basis.gradient_dim(), 5);
        assert_eq!(basis.form_dim(), 1);
        let basis2 = HodgeBasis::assemble(&form, 2).unwrap();
        assert_eq!(basis2.dim(), 18);
        assert_eq!(basis2.gradient_dim(), 14);
        assert_eq!(basis2.form_dim(), 4);
        assert!(basis2.gram_residual(&form).unwrap() < 1e-9);

        let interval_form = interval(4);
        let b = HodgeBasis::assemble(&interval_form, 4).unwrap();
        assert_eq!(b.dim(), 16);
        assert_eq!(b.form_dim(), 0);
    }

    #[test]
    fn hodge_projection_agrees_with_neumann_solve() {
        let form = gasket(2);
        let basis = HodgeBasis::assemble(&form, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let u = random_element(&form, 2, &mut rng);
            let via_basis = basis.apply_projection(&form, &u, false).unwrap();
            let direct = project_p_perp(&form, &u).unwrap();
            let mut diff = via_basis.clone();
            diff.axpy(-1.0, &direct);
            assert!(diff.norm(&form) < 1e-9);
        }
    }

    #[test]
    fn inclusion_intertwines_projections() {
        let form = gasket(2);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let u = random_element(&form, 1, &mut rng);
            let (_, pu) = project_p(&form, &u).unwrap();
            let left = include(&form, &pu).unwrap();
            let (_, right) = project_p(&form, &include(&form, &u).unwrap()).unwrap();
            let mut diff = left.clone();
            diff.axpy(-1.0, &right);
            assert!(diff.norm(&form) < 1e-10);
        }
    }

    #[test]
    fn dimension_report_formulas() {
        let form = gasket(3);
        let rows = dimension_report(form.structure(), 3).unwrap();
        assert_eq!(
            (rows[1].dim_h, rows[1].dim_gradient, rows[1].dim_form),
            (6, 5, 1)
        );
        assert_eq!(
            (rows[2].dim_h, rows[2].dim_gradient, rows[2].dim_form),
            (18, 14, 4)
        );
        let basis = HodgeBasis::assemble(&form, 3).unwrap();
        for row in &rows {
            let (h, g, f) = basis.dims_at(row.level);
            assert_eq!(h, row.dim_h);
            assert_eq!(g, row.dim_gradient);
            assert_eq!(f, row.dim_form);
        }

        // triangle quantum graph at level 0: three edges on three vertices
        let tri = quantum_graph_structure(&[(0, 1), (1, 2), (2, 0)], 0).unwrap();
        let rows = dimension_report(&tri, 0).unwrap();
        assert_eq!(
            (rows[0].dim_h, rows[0].dim_gradient, rows[0].dim_form),
            (3, 2, 1)
        );
        // theta graph: two vertices, three parallel edges
        let theta_form = theta(2);
        let rows = dimension_report(theta_form.structure(), 0).unwrap();
        assert_eq!(
            (rows[0].dim_h, rows[0].dim_gradient, rows[0].dim_form),
            (3, 1, 2)
        );

        let (vs, vform) = SelfSimilarStructure::vicsek().decimate(2).unwrap();
        let rows = dimension_report(&vs, 2).unwrap();
        assert!(rows.iter().all(|r| r.dim_form == 0));
        let basis = HodgeBasis::assemble(&vform, 2).unwrap();
        assert_eq!(basis.form_dim(), 0);
    }

    #[test]
    fn theta_hodge_blocks() {
        let form = theta(2);
        let basis = HodgeBasis::assemble(&form, 2).unwrap();
        // 12 half-half-edges at level 2; |V_2| = 11
        assert_eq!(basis.dim(), 12);
        assert_eq!(basis.gradient_dim(), 10);
        assert_eq!(basis.form_dim(), 2);
        assert!(basis.gram_residual(&form).unwrap() < 1e-10);
    }
}
