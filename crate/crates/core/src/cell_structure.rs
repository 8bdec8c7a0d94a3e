//! Finitely ramified cell structures at finite depth.
//!
//! A structure is a hierarchy of cells, each carrying a finite boundary
//! vertex set, such that cells of the same level meet only in boundary
//! vertices. Vertex ids are assigned level by level and never reassigned,
//! so `V_n` is always the id range `0..vertex_count(n)`.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fmt;

/// Index of a vertex, globally unique within a structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub usize);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Address of a cell: the sequence of child indices from the top.
///
/// For subdivision structures the empty word is the root cell. For quantum
/// graph structures the first symbol selects the edge, so level-0 cells have
/// words of length one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellAddress {
    pub word: Vec<u32>,
}

impl CellAddress {
    pub fn root() -> Self {
        CellAddress { word: Vec::new() }
    }

    pub fn child(&self, j: u32) -> Self {
        let mut word = self.word.clone();
        word.push(j);
        CellAddress { word }
    }
}

impl fmt::Display for CellAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.word.is_empty() {
            return write!(f, "\u{03b5}");
        }
        let parts: Vec<String> = self.word.iter().map(|j| j.to_string()).collect();
        write!(f, "{}", parts.join("."))
    }
}

/// One cell: its address and its boundary vertex list, in rule order.
#[derive(Debug, Clone)]
pub struct Cell {
    pub address: CellAddress,
    pub vertices: Vec<VertexId>,
}

impl Cell {
    pub fn contains(&self, v: VertexId) -> bool {
        self.vertices.contains(&v)
    }

    pub fn local_index(&self, v: VertexId) -> Option<usize> {
        self.vertices.iter().position(|&w| w == v)
    }
}

#[derive(Debug, Clone)]
struct Level {
    cells: Vec<Cell>,
    vertex_count: usize,
    /// for each vertex id, the indices of the cells at this level containing it
    vertex_cells: Vec<Vec<usize>>,
}

impl Level {
    fn index_vertices(&mut self) {
        let mut vc = vec![Vec::new(); self.vertex_count];
        for (i, cell) in self.cells.iter().enumerate() {
            for &v in &cell.vertices {
                vc[v.0].push(i);
            }
        }
        self.vertex_cells = vc;
    }
}

/// A finitely ramified cell structure truncated at finite depth.
#[derive(Debug, Clone)]
pub struct CellStructure {
    name: String,
    depth: usize,
    arity: usize,
    levels: Vec<Level>,
}

impl CellStructure {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of children each cell subdivides into.
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn cells(&self, level: usize) -> &[Cell] {
        &self.levels[level].cells
    }

    pub fn cell(&self, level: usize, idx: usize) -> &Cell {
        &self.levels[level].cells[idx]
    }

    /// `|V_n|`; vertex ids at level n are exactly `0..vertex_count(n)`.
    pub fn vertex_count(&self, level: usize) -> usize {
        self.levels[level].vertex_count
    }

    /// Indices of the level-`level` cells containing vertex `v`.
    pub fn cells_containing(&self, level: usize, v: VertexId) -> &[usize] {
        &self.levels[level].vertex_cells[v.0]
    }

    /// Children of cell `idx` at `level` occupy this range at `level + 1`.
    pub fn children_range(&self, idx: usize) -> std::ops::Range<usize> {
        self.arity * idx..self.arity * (idx + 1)
    }

    /// Index at `to_level` of the ancestor of cell `idx` at `from_level`.
    pub fn ancestor(&self, from_level: usize, idx: usize, to_level: usize) -> usize {
        assert!(to_level <= from_level);
        idx / self.arity.pow((from_level - to_level) as u32)
    }

    pub fn find_cell(&self, addr: &CellAddress) -> Option<(usize, usize)> {
        for (n, level) in self.levels.iter().enumerate() {
            if let Some(i) = level.cells.iter().position(|c| &c.address == addr) {
                return Some((n, i));
            }
        }
        None
    }

    /// Assemble a structure from explicit per-level cell lists. Intended for
    /// hand-specified structures and validation counterexamples; prefer
    /// [`build_structure`] for rule-generated hierarchies.
    pub fn from_levels(
        name: &str,
        arity: usize,
        level_cells: Vec<Vec<Cell>>,
        level_vertex_counts: Vec<usize>,
    ) -> Result<Self> {
        if level_cells.is_empty() || level_cells.len() != level_vertex_counts.len() {
            return Err(Error::InvalidParameter(
                "level lists must be nonempty and of equal length".into(),
            ));
        }
        let depth = level_cells.len() - 1;
        for n in 0..depth {
            if level_cells[n + 1].len() != level_cells[n].len() * arity {
                return Err(Error::InvalidParameter(format!(
                    "level {} has {} cells, expected {} (arity {arity})",
                    n + 1,
                    level_cells[n + 1].len(),
                    level_cells[n].len() * arity
                )));
            }
        }
        let mut levels = Vec::with_capacity(level_cells.len());
        for (cells, vertex_count) in level_cells.into_iter().zip(level_vertex_counts) {
            for cell in &cells {
                if let Some(v) = cell.vertices.iter().find(|v| v.0 >= vertex_count) {
                    return Err(Error::Construction {
                        address: cell.address.to_string(),
                        reason: format!("vertex {v} beyond declared vertex count {vertex_count}"),
                    });
                }
            }
            let mut level = Level {
                cells,
                vertex_count,
                vertex_cells: Vec::new(),
            };
            level.index_vertices();
            levels.push(level);
        }
        Ok(CellStructure {
            name: name.to_string(),
            depth,
            arity,
            levels,
        })
    }

    /// Bipartite cell-vertex incidence graph at level `n`: nodes are the
    /// n-cells and the vertices of `V_n`, edges are memberships. Returns its
    /// first Betti number, which equals
    /// `sum_alpha (|V_alpha| - 1) - |V_n| + 1`.
    pub fn cycle_rank(&self, n: usize) -> Result<usize> {
        if n > self.depth {
            return Err(Error::LevelOutOfRange {
                level: n,
                depth: self.depth,
            });
        }
        let level = &self.levels[n];
        let ncells = level.cells.len();
        let nverts = level.vertex_count;
        // connectivity of the incidence graph via union-find over cells+vertices
        let mut parent: Vec<usize> = (0..ncells + nverts).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut edges = 0usize;
        for (i, cell) in level.cells.iter().enumerate() {
            for &v in &cell.vertices {
                edges += 1;
                let a = find(&mut parent, i);
                let b = find(&mut parent, ncells + v.0);
                if a != b {
                    parent[a] = b;
                }
            }
        }
        let mut components = 0usize;
        for x in 0..ncells + nverts {
            if find(&mut parent, x) == x {
                components += 1;
            }
        }
        if components != 1 {
            return Err(Error::Disconnected(format!(
                "level-{n} incidence graph has {components} components"
            )));
        }
        Ok(edges + 1 - ncells - nverts)
    }

    /// True iff the cell-vertex incidence graph is loop-free at every level.
    pub fn is_tree(&self) -> Result<bool> {
        for n in 0..=self.depth {
            if self.cycle_rank(n)? > 0 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Check FRCS4, FRCS6 and vertex nesting on the truncated hierarchy.
    pub fn validate_frcs(&self) -> ValidationReport {
        let mut violations = Vec::new();
        // FRCS4: V_alpha subset of the union of the children's vertex sets
        for n in 0..self.depth {
            for (i, cell) in self.levels[n].cells.iter().enumerate() {
                let range = self.children_range(i);
                for &v in &cell.vertices {
                    let covered = self.levels[n + 1].cells[range.clone()]
                        .iter()
                        .any(|c| c.contains(v));
                    if !covered {
                        violations.push(FrcsViolation::MissingBoundaryVertex {
                            level: n,
                            cell: cell.address.clone(),
                            vertex: v,
                        });
                    }
                }
            }
        }
        // FRCS6: the deepest-level vertices shared by two n-cells must lie in
        // both boundary sets. Shared vertices are found through descendants.
        for n in 0..=self.depth {
            let mut owners: BTreeMap<VertexId, Vec<usize>> = BTreeMap::new();
            for (i, _) in self.levels[n].cells.iter().enumerate() {
                for v in self.descendant_vertices(n, i) {
                    owners.entry(v).or_default().push(i);
                }
            }
            for (v, cells) in owners {
                if cells.len() < 2 {
                    continue;
                }
                for k in 0..cells.len() {
                    for l in k + 1..cells.len() {
                        let (a, b) = (cells[k], cells[l]);
                        let ca = &self.levels[n].cells[a];
                        let cb = &self.levels[n].cells[b];
                        if !(ca.contains(v) && cb.contains(v)) {
                            violations.push(FrcsViolation::InteriorOverlap {
                                level: n,
                                cell_a: ca.address.clone(),
                                cell_b: cb.address.clone(),
                                vertex: v,
                            });
                        }
                    }
                }
            }
        }
        // vertex nesting V_n subset V_{n+1}
        for n in 0..self.depth {
            let mut seen = vec![false; self.levels[n].vertex_count];
            for cell in &self.levels[n + 1].cells {
                for &v in &cell.vertices {
                    if v.0 < seen.len() {
                        seen[v.0] = true;
                    }
                }
            }
            for (v, ok) in seen.iter().enumerate() {
                if !ok {
                    violations.push(FrcsViolation::VertexNotNested {
                        level: n,
                        vertex: VertexId(v),
                    });
                }
            }
        }
        ValidationReport { violations }
    }

    /// All deepest-level vertex ids lying in the closure of cell (n, idx).
    fn descendant_vertices(&self, n: usize, idx: usize) -> Vec<VertexId> {
        let mut lo = idx;
        let mut hi = idx + 1;
        for m in n..self.depth {
            let _ = m;
            lo *= self.arity;
            hi *= self.arity;
        }
        let mut out: Vec<VertexId> = self.levels[self.depth].cells[lo..hi]
            .iter()
            .flat_map(|c| c.vertices.iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// The structure truncated to `depth`, without reconstruction.
    pub fn truncate(&self, depth: usize) -> Result<CellStructure> {
        if depth > self.depth {
            return Err(Error::LevelOutOfRange {
                level: depth,
                depth: self.depth,
            });
        }
        Ok(CellStructure {
            name: self.name.clone(),
            depth,
            arity: self.arity,
            levels: self.levels[..=depth].to_vec(),
        })
    }
}

/// Outcome of [`CellStructure::validate_frcs`]; empty means valid.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub violations: Vec<FrcsViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone)]
pub enum FrcsViolation {
    /// FRCS4: a boundary vertex of a cell missing from all of its children.
    MissingBoundaryVertex {
        level: usize,
        cell: CellAddress,
        vertex: VertexId,
    },
    /// FRCS6: two same-level cells sharing a vertex that is not boundary to both.
    InteriorOverlap {
        level: usize,
        cell_a: CellAddress,
        cell_b: CellAddress,
        vertex: VertexId,
    },
    /// V_n not contained in V_{n+1}.
    VertexNotNested { level: usize, vertex: VertexId },
}

impl fmt::Display for FrcsViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrcsViolation::MissingBoundaryVertex {
                level,
                cell,
                vertex,
            } => write!(
                f,
                "FRCS4: vertex {vertex} of level-{level} cell {cell} not covered by its children"
            ),
            FrcsViolation::InteriorOverlap {
                level,
                cell_a,
                cell_b,
                vertex,
            } => write!(
                f,
                "FRCS6: level-{level} cells {cell_a} and {cell_b} overlap at non-boundary vertex {vertex}"
            ),
            FrcsViolation::VertexNotNested { level, vertex } => {
                write!(f, "vertex {vertex} of V_{level} missing from V_{}", level + 1)
            }
        }
    }
}

/// How one cell subdivides: per-child images of a virtual slot list in which
/// slots `0..boundary_size` are the parent's boundary vertices and higher
/// slots are vertices created by the subdivision. Children sharing a new
/// vertex reference the same slot.
#[derive(Debug, Clone)]
pub struct SubdivisionRule {
    name: String,
    arity: usize,
    boundary_size: usize,
    new_slots: usize,
    child_maps: Vec<Vec<usize>>,
}

impl SubdivisionRule {
    pub fn new(
        name: &str,
        boundary_size: usize,
        child_maps: Vec<Vec<usize>>,
        identifications: &[(usize, usize)],
    ) -> Result<Self> {
        if child_maps.is_empty() {
            return Err(Error::InvalidRule(
                "rule must have at least one child".into(),
            ));
        }
        if boundary_size == 0 {
            return Err(Error::InvalidRule("boundary size must be positive".into()));
        }
        let arity = child_maps.len();
        let max_slot = child_maps
            .iter()
            .flat_map(|m| m.iter().copied())
            .max()
            .unwrap_or(0);

        // identifications merge virtual slots; merging two parent slots would
        // glue the parent boundary, which no valid subdivision does
        let mut canon: Vec<usize> = (0..=max_slot).collect();
        fn find(c: &mut [usize], mut x: usize) -> usize {
            while c[x] != x {
                c[x] = c[c[x]];
                x = c[x];
            }
            x
        }
        for &(a, b) in identifications {
            if a > max_slot || b > max_slot {
                return Err(Error::InvalidRule(format!(
                    "identification ({a},{b}) references unused slot"
                )));
            }
            let (ra, rb) = (find(&mut canon, a), find(&mut canon, b));
            if ra < boundary_size && rb < boundary_size && ra != rb {
                return Err(Error::InvalidRule(format!(
                    "identification ({a},{b}) merges two parent boundary slots"
                )));
            }
            // keep parent slots canonical
            if ra < rb {
                canon[rb] = ra;
            } else {
                canon[ra] = rb;
            }
        }
        let mut child_maps: Vec<Vec<usize>> = child_maps
            .iter()
            .map(|m| m.iter().map(|&s| find(&mut canon, s)).collect())
            .collect();

        for (j, m) in child_maps.iter().enumerate() {
            if m.len() != boundary_size {
                return Err(Error::InvalidRule(format!(
                    "child {j} lists {} boundary vertices, expected {boundary_size}",
                    m.len()
                )));
            }
            let mut sorted = m.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != boundary_size {
                return Err(Error::InvalidRule(format!(
                    "child {j} repeats a vertex slot"
                )));
            }
        }

        // renumber surviving new slots densely
        let mut slot_rename: BTreeMap<usize, usize> = BTreeMap::new();
        for s in 0..boundary_size {
            slot_rename.insert(s, s);
        }
        let mut next = boundary_size;
        for m in child_maps.iter_mut() {
            for s in m.iter_mut() {
                if *s >= boundary_size {
                    let e = slot_rename.entry(*s).or_insert_with(|| {
                        let v = next;
                        next += 1;
                        v
                    });
                    *s = *e;
                }
            }
        }

        let rule = SubdivisionRule {
            name: name.to_string(),
            arity,
            boundary_size,
            new_slots: next - boundary_size,
            child_maps,
        };
        Ok(rule)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn boundary_size(&self) -> usize {
        self.boundary_size
    }

    pub fn new_slots(&self) -> usize {
        self.new_slots
    }

    pub fn child_maps(&self) -> &[Vec<usize>] {
        &self.child_maps
    }

    /// Parent slots that appear in no child map break FRCS4 at every cell.
    fn uncovered_parent_slot(&self) -> Option<usize> {
        (0..self.boundary_size).find(|s| !self.child_maps.iter().any(|m| m.contains(s)))
    }

    /// Unit interval bisection: two children sharing the midpoint.
    pub fn interval() -> SubdivisionRule {
        SubdivisionRule::new("interval", 2, vec![vec![0, 2], vec![2, 1]], &[]).unwrap()
    }

    /// Sierpinski gasket: three corner triangles pairwise sharing a midpoint.
    /// Slot 3 is the midpoint of (1,2), slot 4 of (0,2), slot 5 of (0,1).
    pub fn gasket() -> SubdivisionRule {
        SubdivisionRule::new(
            "gasket",
            3,
            vec![vec![0, 5, 4], vec![5, 1, 3], vec![4, 3, 2]],
            &[],
        )
        .unwrap()
    }

    /// Vicsek cross: four corner squares glued to a center square at its
    /// corners (slots 4..8); slots 8..16 are the free corners.
    pub fn vicsek() -> SubdivisionRule {
        SubdivisionRule::new(
            "vicsek",
            4,
            vec![
                vec![0, 8, 4, 9],
                vec![10, 1, 11, 5],
                vec![6, 12, 2, 13],
                vec![14, 7, 15, 3],
                vec![4, 5, 6, 7],
            ],
            &[],
        )
        .unwrap()
    }
}

/// Expand `rule` to the given depth with a single root cell.
///
/// Vertex ids are stable under increasing depth: rebuilding deeper and
/// truncating reproduces the shallower structure exactly.
pub fn build_structure(rule: &SubdivisionRule, depth: usize) -> Result<CellStructure> {
    let root = Cell {
        address: CellAddress::root(),
        vertices: (0..rule.boundary_size).map(VertexId).collect(),
    };
    grow(rule.name(), rule, vec![root], rule.boundary_size, depth)
}

fn grow(
    name: &str,
    rule: &SubdivisionRule,
    base_cells: Vec<Cell>,
    base_vertex_count: usize,
    depth: usize,
) -> Result<CellStructure> {
    if let Some(slot) = rule.uncovered_parent_slot() {
        return Err(Error::Construction {
            address: base_cells
                .first()
                .map(|c| c.address.to_string())
                .unwrap_or_default(),
            reason: format!("rule never maps parent boundary slot {slot} into a child (FRCS4)"),
        });
    }
    let mut levels = Vec::with_capacity(depth + 1);
    let mut level = Level {
        cells: base_cells,
        vertex_count: base_vertex_count,
        vertex_cells: Vec::new(),
    };
    level.index_vertices();
    levels.push(level);

    for _ in 0..depth {
        let prev = levels.last().unwrap();
        let mut next_vertex = prev.vertex_count;
        let mut cells = Vec::with_capacity(prev.cells.len() * rule.arity);
        for cell in &prev.cells {
            // fresh ids for this cell's new slots, in slot order
            let mut slot_ids: Vec<Option<VertexId>> =
                vec![None; rule.boundary_size + rule.new_slots];
            for (s, id) in slot_ids.iter_mut().enumerate().take(rule.boundary_size) {
                *id = Some(cell.vertices[s]);
            }
            for j in 0..rule.arity {
                let mut vertices = Vec::with_capacity(rule.boundary_size);
                for &slot in &rule.child_maps[j] {
                    let id = slot_ids[slot].get_or_insert_with(|| {
                        let v = VertexId(next_vertex);
                        next_vertex += 1;
                        v
                    });
                    vertices.push(*id);
                }
                cells.push(Cell {
                    address: cell.address.child(j as u32),
                    vertices,
                });
            }
        }
        let mut level = Level {
            cells,
            vertex_count: next_vertex,
            vertex_cells: Vec::new(),
        };
        level.index_vertices();
        levels.push(level);
    }

    Ok(CellStructure {
        name: name.to_string(),
        depth,
        arity: rule.arity,
        levels,
    })
}

/// A metric graph as a cell structure: each edge is a level-0 cell and every
/// level splits every edge-cell at its midpoint.
pub fn quantum_graph_structure(
    edges: &[(usize, usize)],
    subdivisions: usize,
) -> Result<CellStructure> {
    if edges.is_empty() {
        return Err(Error::InvalidParameter("edge list is empty".into()));
    }
    let nv = edges.iter().map(|&(a, b)| a.max(b)).max().unwrap() + 1;
    for &(a, b) in edges {
        if a == b {
            return Err(Error::InvalidParameter(format!(
                "self-loop at vertex {a}; split it with an auxiliary vertex"
            )));
        }
    }
    // connectivity
    let mut parent: Vec<usize> = (0..nv).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
        }
    }
    let roots: Vec<usize> = (0..nv).filter(|&x| find(&mut parent, x) == x).collect();
    if roots.len() != 1 {
        return Err(Error::Disconnected(format!(
            "graph has {} components",
            roots.len()
        )));
    }

    let base_cells: Vec<Cell> = edges
        .iter()
        .enumerate()
        .map(|(e, &(a, b))| Cell {
            address: CellAddress {
                word: vec![e as u32],
            },
            vertices: vec![VertexId(a), VertexId(b)],
        })
        .collect();
    grow(
        "quantum_graph",
        &SubdivisionRule::interval(),
        base_cells,
        nv,
        subdivisions,
    )
}
