//! Edge configurations: for each permutation `sigma`, cells `(sigma(j), j)`
//! range over an edge of their entry and every other cell sits at a vertex.
//!
//! Enumeration order is part of the report contract. Permutations come even
//! first, then odd, each group in lexicographic one-line order; for `n = 3`
//! this is `123, 231, 312, 132, 213, 321`. Within a permutation, cell choices
//! form a mixed-radix counter over cells in column-major order with the last
//! cell varying fastest.

use serde::{Deserialize, Serialize};

use crate::det::{ParametricDeterminant, PolyMatrix};
use crate::error::{Error, Result};
use crate::family::{EdgeSegment, Entry, MatrixFamily};
use crate::poly::Polynomial;

/// Largest matrix size the enumerating drivers accept.
pub const MAX_DRIVER_N: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CellChoice {
    /// Off-pattern cell fixed at a vertex of its entry.
    Vertex { index: usize, poly: Polynomial },
    /// Pattern cell ranging over an edge of its entry.
    Edge { index: usize, segment: EdgeSegment },
}

/// One member of the edge-configuration union.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeConfiguration {
    pub index: u64,
    n: usize,
    /// `sigma[col]` is the zero-based row of the pattern cell in `col`.
    sigma: Vec<usize>,
    /// Row-major.
    cells: Vec<CellChoice>,
    /// Columns whose pattern edge is nondegenerate; `lambda[j]` drives `params[j]`.
    params: Vec<usize>,
}

impl EdgeConfiguration {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sigma(&self) -> &[usize] {
        &self.sigma
    }

    /// One-line notation, one-based: `[sigma(1), ..., sigma(n)]`.
    pub fn sigma_one_line(&self) -> Vec<usize> {
        self.sigma.iter().map(|r| r + 1).collect()
    }

    pub fn cell(&self, row: usize, col: usize) -> &CellChoice {
        &self.cells[row * self.n + col]
    }

    pub fn cells(&self) -> &[CellChoice] {
        &self.cells
    }

    /// Number of free parameters.
    pub fn k(&self) -> usize {
        self.params.len()
    }

    pub fn param_columns(&self) -> &[usize] {
        &self.params
    }

    fn edge(&self, col: usize) -> &EdgeSegment {
        match self.cell(self.sigma[col], col) {
            CellChoice::Edge { segment, .. } => segment,
            CellChoice::Vertex { .. } => unreachable!("pattern cell holds an edge"),
        }
    }

    /// Concrete matrix at `lambda`; degenerate pattern cells sit at their single point.
    pub fn instantiate(&self, lambda: &[f64]) -> Result<PolyMatrix> {
        if lambda.len() != self.k() {
            return Err(Error::DimensionMismatch { expected: self.k(), got: lambda.len() });
        }
        let mut m = self.base_matrix();
        for (&col, &l) in self.params.iter().zip(lambda) {
            m.set(self.sigma[col], col, self.edge(col).at(l));
        }
        Ok(m)
    }

    /// Matrix with every pattern cell at its `p0` endpoint.
    pub fn base_matrix(&self) -> PolyMatrix {
        let cells = self
            .cells
            .iter()
            .map(|c| match c {
                CellChoice::Vertex { poly, .. } => poly.clone(),
                CellChoice::Edge { segment, .. } => segment.p0.clone(),
            })
            .collect();
        PolyMatrix::new(self.n, cells).expect("square by construction")
    }

    /// Multi-affine determinant in the configuration's parameters.
    pub fn det_parametric(&self) -> ParametricDeterminant {
        let varying: Vec<(usize, usize, Polynomial)> = self
            .params
            .iter()
            .map(|&col| {
                let e = self.edge(col);
                (self.sigma[col], col, &e.p1 - &e.p0)
            })
            .collect();
        ParametricDeterminant::from_affine_cells(&self.base_matrix(), &varying)
    }

    /// Full-length `lambda` (one slot per column) from the free parameters;
    /// degenerate columns report 0.
    pub fn column_lambdas(&self, lambda: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (&col, &l) in self.params.iter().zip(lambda) {
            out[col] = l;
        }
        out
    }
}

/// All permutations of `0..n`, even ones first, each group lexicographic.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut even = Vec::new();
    let mut odd = Vec::new();
    loop {
        if parity(&perm) == 0 {
            even.push(perm.clone());
        } else {
            odd.push(perm.clone());
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    even.extend(odd);
    even
}

fn parity(perm: &[usize]) -> usize {
    let mut inv = 0;
    for i in 0..perm.len() {
        for j in i + 1..perm.len() {
            if perm[i] > perm[j] {
                inv += 1;
            }
        }
    }
    inv % 2
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Per-cell vertex and edge options.
#[derive(Clone, Debug)]
struct CellOptions {
    vertices: Vec<(usize, Polynomial)>,
    edges: Vec<EdgeSegment>,
}

impl CellOptions {
    fn build(entry: &Entry, dedup: bool) -> Result<Self> {
        let verts = entry.vertices()?;
        let mut vertices: Vec<(usize, Polynomial)> = verts.iter().cloned().enumerate().collect();
        let mut edges = entry.edges()?;
        if edges.is_empty() {
            // fixed entry: the pattern cell stays at its only vertex
            edges.push(EdgeSegment::point(verts[0].clone(), 0));
        }
        if dedup {
            let mut uniq: Vec<(usize, Polynomial)> = Vec::new();
            for v in vertices {
                if !uniq.iter().any(|u| u.1 == v.1) {
                    uniq.push(v);
                }
            }
            vertices = uniq;
            let any_proper = edges.iter().any(|e| !e.is_degenerate());
            let mut kept: Vec<EdgeSegment> = Vec::new();
            for e in edges {
                if any_proper && e.is_degenerate() {
                    continue;
                }
                if !kept.iter().any(|k| k.same_as(&e)) {
                    kept.push(e);
                }
            }
            edges = kept;
        }
        Ok(Self { vertices, edges })
    }
}

/// Random-access view of the configuration stream.
#[derive(Clone, Debug)]
pub struct ConfigEnumerator {
    n: usize,
    perms: Vec<Vec<usize>>,
    options: Vec<CellOptions>,
    /// `offsets[p]` is the index of the first configuration of `perms[p]`.
    offsets: Vec<u64>,
    total: u64,
}

impl ConfigEnumerator {
    pub fn new(fam: &MatrixFamily) -> Result<Self> {
        Self::with_dedup(fam, false)
    }

    /// With `dedup`, identical vertices and edges within a cell are listed once
    /// and point edges are dropped from cells that have proper ones.
    pub fn with_dedup(fam: &MatrixFamily, dedup: bool) -> Result<Self> {
        let n = fam.n();
        if n > MAX_DRIVER_N {
            return Err(Error::TooLarge { n, limit: MAX_DRIVER_N });
        }
        let options = fam
            .entries()
            .iter()
            .map(|e| CellOptions::build(e, dedup))
            .collect::<Result<Vec<_>>>()?;
        let perms = permutations(n);
        let mut offsets = Vec::with_capacity(perms.len());
        let mut total: u64 = 0;
        for sigma in &perms {
            offsets.push(total);
            let mut count: u64 = 1;
            for (idx, opt) in options.iter().enumerate() {
                let (row, col) = (idx / n, idx % n);
                let radix = if sigma[col] == row { opt.edges.len() } else { opt.vertices.len() };
                count = count.checked_mul(radix as u64).ok_or(Error::CountOverflow)?;
            }
            total = total.checked_add(count).ok_or(Error::CountOverflow)?;
        }
        Ok(Self { n, perms, options, offsets, total })
    }

    pub fn len(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn permutations(&self) -> &[Vec<usize>] {
        &self.perms
    }

    /// Configuration at position `index` of the deterministic order.
    pub fn get(&self, index: u64) -> Option<EdgeConfiguration> {
        if index >= self.total {
            return None;
        }
        let p = self.offsets.partition_point(|&o| o <= index) - 1;
        let sigma = &self.perms[p];
        let mut rem = index - self.offsets[p];
        let n = self.n;
        // column-major cell order, last cell fastest
        let order: Vec<usize> = (0..n).flat_map(|col| (0..n).map(move |row| row * n + col)).collect();
        let mut digits = vec![0usize; n * n];
        for &cell in order.iter().rev() {
            let (row, col) = (cell / n, cell % n);
            let opt = &self.options[cell];
            let radix = if sigma[col] == row { opt.edges.len() } else { opt.vertices.len() } as u64;
            digits[cell] = (rem % radix) as usize;
            rem /= radix;
        }
        let cells: Vec<CellChoice> = (0..n * n)
            .map(|cell| {
                let (row, col) = (cell / n, cell % n);
                let opt = &self.options[cell];
                if sigma[col] == row {
                    let segment = opt.edges[digits[cell]].clone();
                    CellChoice::Edge { index: digits[cell], segment }
                } else {
                    let (index, poly) = opt.vertices[digits[cell]].clone();
                    CellChoice::Vertex { index, poly }
                }
            })
            .collect();
        let params = (0..n)
            .filter(|&col| match &cells[sigma[col] * n + col] {
                CellChoice::Edge { segment, .. } => !segment.is_degenerate(),
                CellChoice::Vertex { .. } => false,
            })
            .collect();
        Some(EdgeConfiguration { index, n, sigma: sigma.clone(), cells, params })
    }

    pub fn iter(&self) -> impl Iterator<Item = EdgeConfiguration> + '_ {
        self.range(0, self.total)
    }

    /// Configurations with indices in `[start, end)`.
    pub fn range(&self, start: u64, end: u64) -> impl Iterator<Item = EdgeConfiguration> + '_ {
        (start..end.min(self.total)).filter_map(move |i| self.get(i))
    }
}

/// Lazily yields every configuration in deterministic order.
pub fn enumerate_configs(fam: &MatrixFamily) -> Result<impl Iterator<Item = EdgeConfiguration>> {
    let en = ConfigEnumerator::new(fam)?;
    let total = en.len();
    Ok((0..total).map(move |i| en.get(i).expect("index in range")))
}

/// Length of [`enumerate_configs`]: the sum over permutations of the product
/// of per-cell option counts.
pub fn count_configs(fam: &MatrixFamily) -> Result<u64> {
    Ok(ConfigEnumerator::new(fam)?.len())
}

/// A sub-family produced by a column or row reduction: at most one cell
/// ranges over an edge, every other cell is fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedFamily {
    /// `(row, col)` of the edge cell, if any.
    pub edge_cell: Option<(usize, usize)>,
    /// Vertex indices chosen for the other reduced cells: `((row, col), index)`.
    pub vertex_choices: Vec<((usize, usize), usize)>,
    pub family: MatrixFamily,
}

/// Column-reduction output: one entry of the column on an edge, the rest at vertices.
pub type ReducedColumnFamily = ReducedFamily;

fn fixed_poly(entry: &Entry) -> Result<Polynomial> {
    Ok(entry.vertices()?.swap_remove(0))
}

fn base_fixed_entries(fam: &MatrixFamily) -> Result<Vec<Entry>> {
    fam.entries()
        .iter()
        .map(|e| if e.is_fixed() { fixed_poly(e).map(Entry::fixed) } else { Ok(e.clone()) })
        .collect()
}

fn edge_options(entry: &Entry) -> Result<Vec<EdgeSegment>> {
    let edges = entry.edges()?;
    if edges.is_empty() {
        Ok(vec![EdgeSegment::point(fixed_poly(entry)?, 0)])
    } else {
        Ok(edges)
    }
}

fn edge_entry(seg: &EdgeSegment) -> Entry {
    if seg.is_degenerate() {
        Entry::fixed(seg.p0.clone())
    } else {
        Entry::polytope(vec![seg.p0.clone(), seg.p1.clone()])
    }
}

/// Cartesian product of option lists, last list fastest.
fn product(radices: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &r in radices {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..r).map(move |d| {
                    let mut v = prefix.clone();
                    v.push(d);
                    v
                })
            })
            .collect();
    }
    out
}

/// Right-hand side of the column reduction: for each row `i`, entry
/// `(i, col)` on each of its edges and the other entries of the column at
/// each of their vertices. Entries outside `col` must be fixed.
pub fn reduce_column(fam: &MatrixFamily, col: usize) -> Result<Vec<ReducedColumnFamily>> {
    let n = fam.n();
    if col >= n {
        return Err(Error::DimensionMismatch { expected: n, got: col });
    }
    for r in 0..n {
        for c in 0..n {
            if c != col && !fam.entry(r, c).is_fixed() {
                return Err(Error::NotSingleColumnFamily { col });
            }
        }
    }
    let base = base_fixed_entries(fam)?;
    let column_vertices: Vec<Vec<Polynomial>> =
        (0..n).map(|r| fam.entry(r, col).vertices()).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for i in 0..n {
        let edges = edge_options(fam.entry(i, col))?;
        let others: Vec<usize> = (0..n).filter(|&r| r != i).collect();
        let radices: Vec<usize> = others.iter().map(|&r| column_vertices[r].len()).collect();
        for seg in &edges {
            for choice in product(&radices) {
                let mut entries = base.clone();
                entries[i * n + col] = edge_entry(seg);
                let mut vertex_choices = Vec::with_capacity(others.len());
                for (&r, &v) in others.iter().zip(&choice) {
                    entries[r * n + col] = Entry::fixed(column_vertices[r][v].clone());
                    vertex_choices.push(((r, col), v));
                }
                out.push(ReducedFamily {
                    edge_cell: (!seg.is_degenerate()).then_some((i, col)),
                    vertex_choices,
                    family: MatrixFamily::new(n, entries, fam.region())?,
                });
            }
        }
    }
    Ok(out)
}

/// Right-hand side of the row reduction for two uncertain cells `(row, i)`
/// and `(row, j)`: one cell on an edge while the other sits at a vertex, in
/// both arrangements. Every other entry must be fixed.
pub fn reduce_row(fam: &MatrixFamily, row: usize, i: usize, j: usize) -> Result<Vec<ReducedFamily>> {
    let n = fam.n();
    if row >= n || i >= n || j >= n || i == j {
        return Err(Error::NotTwoCellFamily { row, i, j });
    }
    for r in 0..n {
        for c in 0..n {
            if !(r == row && (c == i || c == j)) && !fam.entry(r, c).is_fixed() {
                return Err(Error::NotTwoCellFamily { row, i, j });
            }
        }
    }
    let base = base_fixed_entries(fam)?;
    let (ei, ej) = (fam.entry(row, i), fam.entry(row, j));
    let (vi, vj) = (ei.vertices()?, ej.vertices()?);
    let (edges_i, edges_j) = (ei.edges()?, ej.edges()?);
    let mut out = Vec::new();
    let mut push = |edge_col: usize, seg: Option<&EdgeSegment>, vert_col: usize, v: usize, vp: &Polynomial| {
        let mut entries = base.clone();
        if let Some(seg) = seg {
            entries[row * n + edge_col] = edge_entry(seg);
        }
        entries[row * n + vert_col] = Entry::fixed(vp.clone());
        MatrixFamily::new(n, entries, fam.region()).map(|family| {
            out.push(ReducedFamily {
                edge_cell: seg.map(|_| (row, edge_col)),
                vertex_choices: vec![((row, vert_col), v)],
                family,
            })
        })
    };
    if edges_i.is_empty() && edges_j.is_empty() {
        // both fixed: the single member, recorded with cell i at its vertex
        push(j, None, i, 0, &vi[0])?;
        let last = out.last_mut().unwrap();
        last.family.entry_mut(row, j).clone_from(&Entry::fixed(vj[0].clone()));
        return Ok(out);
    }
    for (v, vp) in vi.iter().enumerate() {
        for seg in &edges_j {
            push(j, Some(seg), i, v, vp)?;
        }
    }
    for seg in &edges_i {
        for (v, vp) in vj.iter().enumerate() {
            push(i, Some(seg), j, v, vp)?;
        }
    }
    Ok(out)
}
