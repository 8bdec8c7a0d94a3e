//! Conductance networks, traces via Schur complement, harmonic extension,
//! normal derivatives and energy measures.

use crate::cell_structure::{CellStructure, VertexId};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Conductances below this fraction of the largest entry are dropped when a
/// Schur complement is converted back to a pair list.
const CONDUCTANCE_DROP: f64 = 1e-13;

/// A finite resistor network: symmetric nonnegative conductances with zero
/// diagonal, stored as a canonical pair list (x < y, zero entries dropped).
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    size: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl Network {
    pub fn new(size: usize, raw_edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(a, b, c) in raw_edges {
            if a >= size || b >= size {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a},{b}) out of range for {size} vertices"
                )));
            }
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop at {a}")));
            }
            if c < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "negative conductance {c} on edge ({a},{b})"
                )));
            }
            let key = (a.min(b), a.max(b));
            *map.entry(key).or_insert(0.0) += c;
        }
        let edges = map
            .into_iter()
            .filter(|&(_, c)| c > 0.0)
            .map(|((a, b), c)| (a, b, c))
            .collect();
        Ok(Network { size, edges })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn scaled(&self, factor: f64) -> Network {
        Network {
            size: self.size,
            edges: self
                .edges
                .iter()
                .map(|&(a, b, c)| (a, b, c * factor))
                .collect(),
        }
    }

    /// Graph Laplacian L = D - C, so that u^T L u = sum_{x<y} c_xy (u(x)-u(y))^2
    /// matches the energy with every unordered pair counted once.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.size, self.size);
        for &(a, b, c) in &self.edges {
            l[(a, a)] += c;
            l[(b, b)] += c;
            l[(a, b)] -= c;
            l[(b, a)] -= c;
        }
        l
    }

    /// E(u, v) = sum_{x<y} c_xy (u(x)-u(y)) (v(x)-v(y)).
    pub fn energy_bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.size);
        debug_assert_eq!(v.len(), self.size);
        self.edges
            .iter()
            .map(|&(a, b, c)| c * (u[a] - u[b]) * (v[a] - v[b]))
            .sum()
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        self.energy_bilinear(u, u)
    }

    /// Flux of `h` out of vertex `p` through this network's edges:
    /// `sum_q c_pq (h(p) - h(q))`, i.e. row p of the Laplacian applied to h.
    pub fn flux(&self, h: &[f64], p: usize) -> f64 {
        self.edges
            .iter()
            .map(|&(a, b, c)| {
                if a == p {
                    c * (h[a] - h[b])
                } else if b == p {
                    c * (h[b] - h[a])
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// All vertex fluxes at once: L h.
    pub fn fluxes(&self, h: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size];
        for &(a, b, c) in &self.edges {
            let d = c * (h[a] - h[b]);
            out[a] += d;
            out[b] -= d;
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        if self.size == 0 {
            return true;
        }
        self.component_of(0).len() == self.size
    }

    fn component_of(&self, start: usize) -> Vec<usize> {
        let mut adj = vec![Vec::new(); self.size];
        for &(a, b, _) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.size];
        let mut stack = vec![start];
        seen[start] = true;
        let mut out = Vec::new();
        while let Some(x) = stack.pop() {
            out.push(x);
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        out
    }

    /// Trace of the form onto `boundary`: the Schur complement
    /// `L_BB - L_BI L_II^{-1} L_IB` reinterpreted as pairwise conductances.
    pub fn trace_to(&self, boundary: &[usize]) -> Result<Network> {
        if boundary.is_empty() {
            return Err(Error::InvalidParameter("empty boundary".into()));
        }
        let mut is_boundary = vec![false; self.size];
        for &b in boundary {
            if b >= self.size {
                return Err(Error::InvalidParameter(format!(
                    "boundary vertex {b} out of range"
                )));
            }
            if is_boundary[b] {
                return Err(Error::InvalidParameter(format!(
                    "boundary vertex {b} listed twice"
                )));
            }
            is_boundary[b] = true;
        }
        let interior: Vec<usize> = (0..self.size).filter(|&x| !is_boundary[x]).collect();
        if interior.is_empty() {
            return Ok(self.clone());
        }
        // every interior vertex must reach the boundary
        {
            let mut adj = vec![Vec::new(); self.size];
            for &(a, b, _) in &self.edges {
                adj[a].push(b);
                adj[b].push(a);
            }
            let mut seen = is_boundary.clone();
            let mut stack: Vec<usize> = boundary.to_vec();
            while let Some(x) = stack.pop() {
                for &y in &adj[x] {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
            if let Some(v) = (0..self.size).find(|&x| !seen[x]) {
                return Err(Error::DisconnectedInterior { vertex: v });
            }
        }

        let l = self.laplacian();
        let nb = boundary.len();
        let ni = interior.len();
        let mut l_bb = DMatrix::zeros(nb, nb);
        let mut l_bi = DMatrix::zeros(nb, ni);
        let mut l_ii = DMatrix::zeros(ni, ni);
        for (i, &bi) in boundary.iter().enumerate() {
            for (j, &bj) in boundary.iter().enumerate() {
                l_bb[(i, j)] = l[(bi, bj)];
            }
            for (j, &ij) in interior.iter().enumerate() {
                l_bi[(i, j)] = l[(bi, ij)];
            }
        }
        for (i, &ii) in interior.iter().enumerate() {
            for (j, &ij) in interior.iter().enumerate() {
                l_ii[(i, j)] = l[(ii, ij)];
            }
        }
        let chol = l_ii
            .clone()
            .cholesky()
            .ok_or_else(|| Error::SingularSystem("interior block is singular".into()))?;
        let x = chol.solve(&l_bi.transpose()); // L_II^{-1} L_IB
        let schur = &l_bb - &l_bi * x;

        let scale = schur
            .iter()
            .fold(0.0f64, |acc, &v| acc.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let mut edges = Vec::new();
        for i in 0..nb {
            for j in i + 1..nb {
                let c = -0.5 * (schur[(i, j)] + schur[(j, i)]);
                if c > CONDUCTANCE_DROP * scale {
                    edges.push((i, j, c));
                }
            }
        }
        Network::new(nb, &edges)
    }

    /// R(x, y) = 1 / (conductance of the two-point trace).
    pub fn effective_resistance(&self, x: usize, y: usize) -> Result<f64> {
        if x == y {
            return Err(Error::InvalidParameter(
                "effective resistance needs distinct vertices".into(),
            ));
        }
        if !self.is_connected() {
            return Err(Error::Disconnected("network is disconnected".into()));
        }
        let two_point = self.trace_to(&[x, y])?;
        let c = two_point
            .edges
            .first()
            .map(|&(_, _, c)| c)
            .ok_or_else(|| Error::Disconnected(format!("no path between {x} and {y}")))?;
        Ok(1.0 / c)
    }

    /// Solve the Dirichlet problem with the given vertex values pinned and
    /// all other vertices harmonic. Components not touching any pinned
    /// vertex are forbidden.
    pub fn dirichlet_solve(&self, pinned: &[(usize, f64)]) -> Result<Vec<f64>> {
        let mut fixed = vec![None; self.size];
        for &(v, val) in pinned {
            fixed[v] = Some(val);
        }
        let free: Vec<usize> = (0..self.size).filter(|&v| fixed[v].is_none()).collect();
        let mut values = vec![0.0; self.size];
        for &(v, val) in pinned {
            values[v] = val;
        }
        if free.is_empty() {
            return Ok(values);
        }
        let pos: BTreeMap<usize, usize> = free.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut l_ff = DMatrix::zeros(free.len(), free.len());
        let mut rhs = DVector::zeros(free.len());
        for &(a, b, c) in &self.edges {
            match (pos.get(&a), pos.get(&b)) {
                (Some(&ia), Some(&ib)) => {
                    l_ff[(ia, ia)] += c;
                    l_ff[(ib, ib)] += c;
                    l_ff[(ia, ib)] -= c;
                    l_ff[(ib, ia)] -= c;
                }
                (Some(&ia), None) => {
                    l_ff[(ia, ia)] += c;
                    rhs[ia] += c * values[b];
                }
                (None, Some(&ib)) => {
                    l_ff[(ib, ib)] += c;
                    rhs[ib] += c * values[a];
                }
                (None, None) => {}
            }
        }
        let chol = l_ff.cholesky().ok_or_else(|| {
            Error::SingularSystem(
                "Dirichlet system is singular (free component with no pinned vertex)".into(),
            )
        })?;
        let sol = chol.solve(&rhs);
        for (i, &v) in free.iter().enumerate() {
            values[v] = sol[i];
        }
        Ok(values)
    }
}

/// Values of a function on `V_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexFunction {
    pub level: usize,
    pub values: Vec<f64>,
}

impl VertexFunction {
    pub fn new(level: usize, values: Vec<f64>) -> Self {
        VertexFunction { level, values }
    }
}

/// A compatible sequence of cell conductance networks over a cell structure.
#[derive(Debug, Clone)]
pub struct ResistanceForm {
    structure: Arc<CellStructure>,
    /// cell_networks[level][cell] is E_alpha on the local indices of V_alpha
    cell_networks: Vec<Vec<Network>>,
}

impl ResistanceForm {
    pub fn new(structure: Arc<CellStructure>, cell_networks: Vec<Vec<Network>>) -> Result<Self> {
        if cell_networks.len() != structure.depth() + 1 {
            return Err(Error::SizeMismatch {
                expected: structure.depth() + 1,
                got: cell_networks.len(),
            });
        }
        for (n, nets) in cell_networks.iter().enumerate() {
            if nets.len() != structure.cells(n).len() {
                return Err(Error::SizeMismatch {
                    expected: structure.cells(n).len(),
                    got: nets.len(),
                });
            }
            for (i, net) in nets.iter().enumerate() {
                let cell = structure.cell(n, i);
                if net.size() != cell.vertices.len() {
                    return Err(Error::SizeMismatch {
                        expected: cell.vertices.len(),
                        got: net.size(),
                    });
                }
                if !net.is_connected() {
                    return Err(Error::Disconnected(format!(
                        "cell network of {} is not irreducible",
                        cell.address
                    )));
                }
            }
        }
        Ok(ResistanceForm {
            structure,
            cell_networks,
        })
    }

    pub fn structure(&self) -> &CellStructure {
        &self.structure
    }

    pub fn structure_arc(&self) -> Arc<CellStructure> {
        Arc::clone(&self.structure)
    }

    pub fn depth(&self) -> usize {
        self.structure.depth()
    }

    pub fn cell_network(&self, level: usize, idx: usize) -> &Network {
        &self.cell_networks[level][idx]
    }

    /// Replace the network on one cell (conductance overrides).
    pub fn set_cell_network(&mut self, level: usize, idx: usize, net: Network) -> Result<()> {
        let cell = self.structure.cell(level, idx);
        if net.size() != cell.vertices.len() {
            return Err(Error::SizeMismatch {
                expected: cell.vertices.len(),
                got: net.size(),
            });
        }
        self.cell_networks[level][idx] = net;
        Ok(())
    }

    /// The level form E_n = sum over n-cells of E_alpha, assembled on
    /// the global vertex ids `0..|V_n|`.
    pub fn level_network(&self, n: usize) -> Network {
        let mut edges = Vec::new();
        for (i, net) in self.cell_networks[n].iter().enumerate() {
            let verts = &self.structure.cell(n, i).vertices;
            for &(a, b, c) in net.edges() {
                edges.push((verts[a].0, verts[b].0, c));
            }
        }
        Network::new(self.structure.vertex_count(n), &edges).expect("cell edges are valid")
    }

    /// Max conductance deviation between the trace of E_{n+1} onto V_n and E_n.
    pub fn check_compatibility(&self, n: usize) -> Result<f64> {
        if n >= self.depth() {
            return Err(Error::LevelOutOfRange {
                level: n + 1,
                depth: self.depth(),
            });
        }
        let fine = self.level_network(n + 1);
        let coarse = self.level_network(n);
        let boundary: Vec<usize> = (0..self.structure.vertex_count(n)).collect();
        let traced = fine.trace_to(&boundary)?;
        Ok(max_edge_deviation(&traced, &coarse))
    }

    /// Values on V_alpha of a global function on V_n, for cell (n, idx).
    pub fn restrict_to_cell(&self, f: &VertexFunction, idx: usize) -> Vec<f64> {
        self.structure
            .cell(f.level, idx)
            .vertices
            .iter()
            .map(|v| f.values[v.0])
            .collect()
    }

    /// Harmonic extension of boundary data on one cell to its children:
    /// returns the values on all vertices of the child cells, as a map from
    /// global vertex id to value. Boundary vertices keep their given values.
    pub fn extend_cell(
        &self,
        level: usize,
        idx: usize,
        values_on_cell: &[f64],
    ) -> Result<BTreeMap<usize, f64>> {
        let cell = self.structure.cell(level, idx);
        if values_on_cell.len() != cell.vertices.len() {
            return Err(Error::SizeMismatch {
                expected: cell.vertices.len(),
                got: values_on_cell.len(),
            });
        }
        // local vertex set: union of the children's vertices
        let mut local_ids: Vec<usize> = Vec::new();
        let mut local_of: BTreeMap<usize, usize> = BTreeMap::new();
        let range = self.structure.children_range(idx);
        for ci in range.clone() {
            for v in &self.structure.cell(level + 1, ci).vertices {
                local_of.entry(v.0).or_insert_with(|| {
                    local_ids.push(v.0);
                    local_ids.len() - 1
                });
            }
        }
        let mut edges = Vec::new();
        for ci in range {
            let child = self.structure.cell(level + 1, ci);
            for &(a, b, c) in self.cell_networks[level + 1][ci].edges() {
                edges.push((
                    local_of[&child.vertices[a].0],
                    local_of[&child.vertices[b].0],
                    c,
                ));
            }
        }
        let local = Network::new(local_ids.len(), &edges)?;
        let pinned: Vec<(usize, f64)> = cell
            .vertices
            .iter()
            .zip(values_on_cell)
            .map(|(v, &val)| (local_of[&v.0], val))
            .collect();
        let sol = local.dirichlet_solve(&pinned)?;
        Ok(local_ids
            .iter()
            .enumerate()
            .map(|(li, &gid)| (gid, sol[li]))
            .collect())
    }

    /// Level-by-level, cell-by-cell harmonic extension of `f` to level `m`.
    pub fn harmonic_extension(&self, f: &VertexFunction, m: usize) -> Result<VertexFunction> {
        if m < f.level {
            return Err(Error::LevelMismatch {
                expected: f.level,
                got: m,
            });
        }
        if m > self.depth() {
            return Err(Error::LevelOutOfRange {
                level: m,
                depth: self.depth(),
            });
        }
        if f.values.len() != self.structure.vertex_count(f.level) {
            return Err(Error::SizeMismatch {
                expected: self.structure.vertex_count(f.level),
                got: f.values.len(),
            });
        }
        let mut values = f.values.clone();
        for k in f.level..m {
            values.resize(self.structure.vertex_count(k + 1), 0.0);
            for idx in 0..self.structure.cells(k).len() {
                let cell_values: Vec<f64> = self
                    .structure
                    .cell(k, idx)
                    .vertices
                    .iter()
                    .map(|v| values[v.0])
                    .collect();
                for (gid, val) in self.extend_cell(k, idx, &cell_values)? {
                    values[gid] = val;
                }
            }
        }
        Ok(VertexFunction::new(m, values))
    }

    /// E_alpha(u, v) on cell (level, idx); vectors are local to V_alpha.
    pub fn cell_energy(&self, level: usize, idx: usize, u: &[f64], v: &[f64]) -> Result<f64> {
        let net = &self.cell_networks[level][idx];
        if u.len() != net.size() || v.len() != net.size() {
            return Err(Error::SizeMismatch {
                expected: net.size(),
                got: u.len().max(v.len()),
            });
        }
        Ok(net.energy_bilinear(u, v))
    }

    /// Energy of a function given on V_n under the level form E_n.
    pub fn level_energy(&self, f: &VertexFunction) -> f64 {
        self.level_network(f.level).energy(&f.values)
    }

    /// Normal derivative of cell-harmonic data `h` (values on V_alpha) at the
    /// local vertex `p`, on the cell's own network. The sign convention makes
    /// the Gauss-Green identity read E_alpha(u, h) = sum_p u(p) d h(p).
    pub fn normal_derivative(
        &self,
        level: usize,
        idx: usize,
        h: &[f64],
        p: VertexId,
    ) -> Result<f64> {
        let cell = self.structure.cell(level, idx);
        let local = cell.local_index(p).ok_or_else(|| Error::VertexNotInCell {
            vertex: p.0,
            cell: cell.address.to_string(),
        })?;
        if h.len() != cell.vertices.len() {
            return Err(Error::SizeMismatch {
                expected: cell.vertices.len(),
                got: h.len(),
            });
        }
        Ok(self.cell_networks[level][idx].flux(h, local))
    }

    /// Energy measure of the n-harmonic function determined by `u` on V_n,
    /// evaluated on every m-cell: nu_u(X_alpha) = E_alpha(u|V_alpha).
    pub fn energy_measure(&self, u: &VertexFunction, m: usize) -> Result<Vec<f64>> {
        if m < u.level {
            return Err(Error::LevelMismatch {
                expected: u.level,
                got: m,
            });
        }
        let ext = self.harmonic_extension(u, m)?;
        (0..self.structure.cells(m).len())
            .map(|idx| {
                let vals = self.restrict_to_cell(&ext, idx);
                self.cell_energy(m, idx, &vals, &vals)
            })
            .collect()
    }
}

/// Max deviation between two networks' conductances over the union of edges.
pub fn max_edge_deviation(a: &Network, b: &Network) -> f64 {
    let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for &(x, y, c) in a.edges() {
        map.insert((x, y), c);
    }
    let mut worst = 0.0f64;
    for &(x, y, c) in b.edges() {
        let d = (map.remove(&(x, y)).unwrap_or(0.0) - c).abs();
        worst = worst.max(d);
    }
    for (_, c) in map {
        worst = worst.max(c.abs());
    }
    worst
}
