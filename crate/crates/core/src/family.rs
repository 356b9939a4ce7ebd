//! Uncertainty model: polytopic and interval entries, Kharitonov vertex and
//! edge construction, and whole-matrix families.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::region::Region;

/// Convex hull of finitely many vertex polynomials. One vertex means a fixed entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolytopeEntry {
    pub vertices: Vec<Polynomial>,
}

/// Interval polynomial: coefficient `l` ranges over `[lower[l], upper[l]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalEntry {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Entry {
    Polytope(PolytopeEntry),
    Interval(IntervalEntry),
}

/// `lambda * p1 + (1 - lambda) * p0` for `lambda` in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeSegment {
    pub p0: Polynomial,
    pub p1: Polynomial,
    /// Vertex indices of `p0` and `p1` within the owning entry's vertex set.
    pub ends: (usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyMode {
    Polytope,
    Interval,
    Mixed,
}

impl fmt::Display for FamilyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilyMode::Polytope => "polytope",
            FamilyMode::Interval => "interval",
            FamilyMode::Mixed => "mixed",
        })
    }
}

/// Square grid of uncertain entries together with the stability region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixFamily {
    n: usize,
    entries: Vec<Entry>,
    region: Region,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiagnosticKind {
    DuplicateVertex { first: usize, second: usize },
    BoundOrder { index: usize, lower: f64, upper: f64 },
    LengthMismatch { lower: usize, upper: usize },
    EmptyEntry,
    NonFinite,
    MixedMode { expected: FamilyMode },
    InvalidRegion { message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// `(row, col)`, zero-based; `None` for family-level problems.
    pub cell: Option<(usize, usize)>,
    #[serde(flatten)]
    pub kind: DiagnosticKind,
}

impl Diagnostic {
    pub fn severity(&self) -> Severity {
        match self.kind {
            DiagnosticKind::DuplicateVertex { .. } => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some((i, j)) = self.cell {
            write!(f, "entry ({}, {}): ", i + 1, j + 1)?;
        }
        match &self.kind {
            DiagnosticKind::DuplicateVertex { first, second } => {
                write!(f, "vertices {} and {} are identical", first + 1, second + 1)
            }
            DiagnosticKind::BoundOrder { index, lower, upper } => {
                write!(f, "coefficient {index}: lower bound {lower} exceeds upper bound {upper}")
            }
            DiagnosticKind::LengthMismatch { lower, upper } => {
                write!(f, "lower has {lower} coefficients but upper has {upper}")
            }
            DiagnosticKind::EmptyEntry => f.write_str("entry has no coefficients or vertices"),
            DiagnosticKind::NonFinite => f.write_str("non-finite coefficient"),
            DiagnosticKind::MixedMode { expected } => {
                write!(f, "entry kind does not match {expected} mode")
            }
            DiagnosticKind::InvalidRegion { message } => write!(f, "region: {message}"),
        }
    }
}

impl PolytopeEntry {
    pub fn new(vertices: Vec<Polynomial>) -> Self {
        Self { vertices }
    }

    pub fn fixed(p: Polynomial) -> Self {
        Self { vertices: vec![p] }
    }

    pub fn m(&self) -> usize {
        self.vertices.len()
    }

    /// All `m(m-1)/2` unordered vertex pairs; empty for a fixed entry.
    pub fn edges(&self) -> Vec<EdgeSegment> {
        let m = self.vertices.len();
        let mut out = Vec::with_capacity(m * m.saturating_sub(1) / 2);
        for r in 0..m {
            for t in r + 1..m {
                out.push(EdgeSegment::new(self.vertices[r].clone(), self.vertices[t].clone(), (r, t)));
            }
        }
        out
    }
}

/// Kharitonov lower/upper selection pattern, indexed by `l mod 4`.
/// `true` picks the upper bound.
const KHARITONOV_PATTERN: [[bool; 4]; 4] = [
    [false, false, true, true],
    [false, true, true, false],
    [true, false, false, true],
    [true, true, false, false],
];

/// Kharitonov edge pairs, zero-based: (1,2), (2,4), (4,3), (3,1).
pub const KHARITONOV_EDGE_PAIRS: [(usize, usize); 4] = [(0, 1), (1, 3), (3, 2), (2, 0)];

impl IntervalEntry {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self { lower, upper }
    }

    pub fn point(coeffs: Vec<f64>) -> Self {
        Self { lower: coeffs.clone(), upper: coeffs }
    }

    fn check(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(Error::DimensionMismatch { expected: self.lower.len(), got: self.upper.len() });
        }
        if self.lower.is_empty() {
            return Err(Error::EmptyCoefficients);
        }
        for (index, (&lower, &upper)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(lower <= upper) {
                return Err(Error::BoundOrderViolation { index, lower, upper });
            }
        }
        Ok(())
    }

    pub fn contains_coeffs(&self, coeffs: &[f64], tol: f64) -> bool {
        let len = self.lower.len().max(coeffs.len());
        (0..len).all(|l| {
            let c = coeffs.get(l).copied().unwrap_or(0.0);
            let lo = self.lower.get(l).copied().unwrap_or(0.0);
            let hi = self.upper.get(l).copied().unwrap_or(0.0);
            c >= lo - tol && c <= hi + tol
        })
    }

    /// The four Kharitonov polynomials `c1..c4`.
    pub fn kharitonov_vertices(&self) -> Result<[Polynomial; 4]> {
        self.check()?;
        Ok(KHARITONOV_PATTERN.map(|pattern| {
            let coeffs: Vec<f64> = (0..self.lower.len())
                .map(|l| if pattern[l % 4] { self.upper[l] } else { self.lower[l] })
                .collect();
            Polynomial::new(coeffs)
        }))
    }

    /// Segments `(c1,c2)`, `(c2,c4)`, `(c4,c3)`, `(c3,c1)`.
    pub fn kharitonov_edges(&self) -> Result<Vec<EdgeSegment>> {
        let v = self.kharitonov_vertices()?;
        Ok(KHARITONOV_EDGE_PAIRS
            .iter()
            .map(|&(r, t)| EdgeSegment::new(v[r].clone(), v[t].clone(), (r, t)))
            .collect())
    }

    pub fn is_point(&self) -> bool {
        self.lower == self.upper
    }
}

impl EdgeSegment {
    pub fn new(p0: Polynomial, p1: Polynomial, ends: (usize, usize)) -> Self {
        Self { p0, p1, ends }
    }

    /// A segment collapsed onto one polynomial.
    pub fn point(p: Polynomial, index: usize) -> Self {
        Self { p0: p.clone(), p1: p, ends: (index, index) }
    }

    pub fn is_degenerate(&self) -> bool {
        self.p0 == self.p1
    }

    pub fn at(&self, lambda: f64) -> Polynomial {
        self.p0.lerp(&self.p1, lambda)
    }

    /// Same point set, ignoring orientation.
    pub fn same_as(&self, other: &EdgeSegment) -> bool {
        (self.p0 == other.p0 && self.p1 == other.p1) || (self.p0 == other.p1 && self.p1 == other.p0)
    }
}

impl Entry {
    pub fn fixed(p: Polynomial) -> Self {
        Entry::Polytope(PolytopeEntry::fixed(p))
    }

    pub fn polytope(vertices: Vec<Polynomial>) -> Self {
        Entry::Polytope(PolytopeEntry::new(vertices))
    }

    pub fn interval(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Entry::Interval(IntervalEntry::new(lower, upper))
    }

    /// Vertex set: polytope vertices, or the four Kharitonov polynomials.
    pub fn vertices(&self) -> Result<Vec<Polynomial>> {
        match self {
            Entry::Polytope(p) => Ok(p.vertices.clone()),
            Entry::Interval(q) => Ok(q.kharitonov_vertices()?.to_vec()),
        }
    }

    /// Edge set: all vertex pairs, or the four Kharitonov edges.
    pub fn edges(&self) -> Result<Vec<EdgeSegment>> {
        match self {
            Entry::Polytope(p) => Ok(p.edges()),
            Entry::Interval(q) => q.kharitonov_edges(),
        }
    }

    /// True when the entry is a single polynomial.
    pub fn is_fixed(&self) -> bool {
        match self {
            Entry::Polytope(p) => p.vertices.len() == 1,
            Entry::Interval(q) => q.is_point(),
        }
    }

    pub fn mode(&self) -> FamilyMode {
        match self {
            Entry::Polytope(_) => FamilyMode::Polytope,
            Entry::Interval(_) => FamilyMode::Interval,
        }
    }

    fn diagnose(&self, cell: (usize, usize), out: &mut Vec<Diagnostic>) {
        let mut push = |kind| out.push(Diagnostic { cell: Some(cell), kind });
        match self {
            Entry::Polytope(p) => {
                if p.vertices.is_empty() {
                    push(DiagnosticKind::EmptyEntry);
                }
                for a in 0..p.vertices.len() {
                    for b in a + 1..p.vertices.len() {
                        if p.vertices[a] == p.vertices[b] {
                            push(DiagnosticKind::DuplicateVertex { first: a, second: b });
                        }
                    }
                }
            }
            Entry::Interval(q) => {
                if q.lower.is_empty() || q.upper.is_empty() {
                    push(DiagnosticKind::EmptyEntry);
                }
                if q.lower.len() != q.upper.len() {
                    push(DiagnosticKind::LengthMismatch { lower: q.lower.len(), upper: q.upper.len() });
                }
                if q.lower.iter().chain(&q.upper).any(|c| !c.is_finite()) {
                    push(DiagnosticKind::NonFinite);
                }
                for (index, (&lower, &upper)) in q.lower.iter().zip(&q.upper).enumerate() {
                    if lower > upper {
                        push(DiagnosticKind::BoundOrder { index, lower, upper });
                    }
                }
            }
        }
    }
}

impl MatrixFamily {
    /// Builds an `n x n` family from row-major entries.
    pub fn new(n: usize, entries: Vec<Entry>, region: Region) -> Result<Self> {
        if n == 0 {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: entries.len() });
        }
        Ok(Self { n, entries, region })
    }

    pub fn from_rows(rows: Vec<Vec<Entry>>, region: Region) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: bad.len() });
        }
        Self::new(n, rows.into_iter().flatten().collect(), region)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn with_region(mut self, region: Region) -> Self {
        self.region = region;
        self
    }

    pub fn entry(&self, row: usize, col: usize) -> &Entry {
        &self.entries[row * self.n + col]
    }

    pub fn entry_mut(&mut self, row: usize, col: usize) -> &mut Entry {
        &mut self.entries[row * self.n + col]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn mode(&self) -> FamilyMode {
        let first = self.entries[0].mode();
        if self.entries.iter().all(|e| e.mode() == first) {
            first
        } else {
            FamilyMode::Mixed
        }
    }

    /// Structural problems; an empty list means well-formed.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if let Err(e) = self.region.check() {
            out.push(Diagnostic {
                cell: None,
                kind: DiagnosticKind::InvalidRegion { message: e.to_string() },
            });
        }
        for i in 0..self.n {
            for j in 0..self.n {
                self.entry(i, j).diagnose((i, j), &mut out);
            }
        }
        out
    }

    /// [`validate`](Self::validate) plus a check that every entry matches `mode`.
    pub fn validate_for(&self, mode: FamilyMode) -> Vec<Diagnostic> {
        let mut out = self.validate();
        for i in 0..self.n {
            for j in 0..self.n {
                if self.entry(i, j).mode() != mode {
                    out.push(Diagnostic {
                        cell: Some((i, j)),
                        kind: DiagnosticKind::MixedMode { expected: mode },
                    });
                }
            }
        }
        out
    }

    /// Errors only; warnings such as duplicate vertices pass.
    pub fn ensure_valid_for(&self, mode: FamilyMode) -> Result<()> {
        let errors: Vec<Diagnostic> = self
            .validate_for(mode)
            .into_iter()
            .filter(|d| d.severity() == Severity::Error)
            .collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::ValidationFailure(errors))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[f64]) -> Polynomial {
        Polynomial::new(c.to_vec())
    }

    /// Two vertices per cell, 3x3.
    fn sample_3x3() -> MatrixFamily {
        let mut rows = Vec::new();
        for i in 0..3 {
            let mut row = Vec::new();
            for j in 0..3 {
                let e = if i == j {
                    Entry::polytope(vec![p(&[2.0, 3.0, 1.0]), p(&[3.0, 4.0, 1.0])])
                } else {
                    Entry::polytope(vec![p(&[0.1]), p(&[-0.1, 0.05])])
                };
                row.push(e);
            }
            rows.push(row);
        }
        MatrixFamily::from_rows(rows, Region::HurwitzHalfPlane).unwrap()
    }

    #[test]
    fn validate_examples() {
        assert!(sample_3x3().validate().is_empty());

        let bad = MatrixFamily::new(1, vec![Entry::interval(vec![2.0], vec![1.0])], Region::HurwitzHalfPlane)
            .unwrap();
        let d = bad.validate();
        assert_eq!(d.len(), 1);
        assert!(matches!(d[0].kind, DiagnosticKind::BoundOrder { index: 0, .. }));

        let dup = MatrixFamily::new(
            1,
            vec![Entry::polytope(vec![p(&[1.0, 1.0]), p(&[1.0, 1.0])])],
            Region::HurwitzHalfPlane,
        )
        .unwrap();
        let d = dup.validate();
        assert_eq!(d.len(), 1);
        assert!(matches!(d[0].kind, DiagnosticKind::DuplicateVertex { first: 0, second: 1 }));
        assert_eq!(d[0].severity(), Severity::Warning);
        assert!(dup.ensure_valid_for(FamilyMode::Polytope).is_ok());
    }

    #[test]
    fn validate_flags_mixed_mode_and_empty() {
        let fam = MatrixFamily::new(
            2,
            vec![
                Entry::interval(vec![1.0], vec![2.0]),
                Entry::fixed(p(&[0.0])),
                Entry::fixed(p(&[0.0])),
                Entry::polytope(vec![]),
            ],
            Region::HurwitzHalfPlane,
        )
        .unwrap();
        assert_eq!(fam.mode(), FamilyMode::Mixed);
        assert_eq!(fam.validate().len(), 1);
        let d = fam.validate_for(FamilyMode::Interval);
        assert_eq!(d.iter().filter(|d| matches!(d.kind, DiagnosticKind::MixedMode { .. })).count(), 3);
        assert!(matches!(fam.ensure_valid_for(FamilyMode::Interval), Err(Error::ValidationFailure(_))));
    }

    #[test]
    fn shape_is_checked() {
        let r = MatrixFamily::from_rows(
            vec![vec![Entry::fixed(p(&[1.0])), Entry::fixed(p(&[1.0]))], vec![Entry::fixed(p(&[1.0]))]],
            Region::HurwitzHalfPlane,
        );
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn kharitonov_vertex_example() {
        let e = IntervalEntry::new(vec![1.0, 3.0, 5.0], vec![2.0, 4.0, 6.0]);
        let [c1, c2, c3, c4] = e.kharitonov_vertices().unwrap();
        assert_eq!(c1, p(&[1.0, 3.0, 6.0]));
        assert_eq!(c2, p(&[1.0, 4.0, 6.0]));
        assert_eq!(c3, p(&[2.0, 3.0, 5.0]));
        assert_eq!(c4, p(&[2.0, 4.0, 5.0]));
    }

    #[test]
    fn kharitonov_pattern_has_period_four() {
        let lower = vec![0.0; 8];
        let upper = vec![1.0; 8];
        let e = IntervalEntry::new(lower, upper);
        let [c1, c2, c3, c4] = e.kharitonov_vertices().unwrap();
        assert_eq!(c1.coeffs(), &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        assert_eq!(c2.coeffs(), &[0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        assert_eq!(c3.coeffs(), &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        assert_eq!(c4.coeffs(), &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn kharitonov_point_and_constant() {
        let pt = IntervalEntry::point(vec![1.0, 2.0, 3.0]);
        let v = pt.kharitonov_vertices().unwrap();
        assert!(v.iter().all(|c| *c == v[0]));
        let edges = pt.kharitonov_edges().unwrap();
        assert_eq!(edges.len(), 4);
        assert!(edges.iter().all(EdgeSegment::is_degenerate));

        let k = IntervalEntry::new(vec![0.0], vec![1.0]);
        let [c1, c2, c3, c4] = k.kharitonov_vertices().unwrap();
        assert!(c1.is_zero() && c2.is_zero());
        assert_eq!(c3, Polynomial::one());
        assert_eq!(c4, Polynomial::one());
    }

    #[test]
    fn kharitonov_rejects_bad_bounds() {
        let e = IntervalEntry::new(vec![2.0], vec![1.0]);
        assert!(matches!(e.kharitonov_vertices(), Err(Error::BoundOrderViolation { index: 0, .. })));
        assert!(e.kharitonov_edges().is_err());
    }

    #[test]
    fn kharitonov_edges_pair_listed_vertices() {
        let e = IntervalEntry::new(vec![1.0, 3.0, 5.0], vec![2.0, 4.0, 6.0]);
        let v = e.kharitonov_vertices().unwrap();
        let edges = e.kharitonov_edges().unwrap();
        let expect = [(0, 1), (1, 3), (3, 2), (2, 0)];
        for (seg, (r, t)) in edges.iter().zip(expect) {
            assert_eq!(seg.ends, (r, t));
            assert_eq!(seg.p0, v[r]);
            assert_eq!(seg.p1, v[t]);
        }
    }

    #[test]
    fn single_varying_coefficient_collapses_edges() {
        let e = IntervalEntry::new(vec![0.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]);
        let edges = e.kharitonov_edges().unwrap();
        let (degenerate, proper): (Vec<_>, Vec<_>) = edges.iter().partition(|s| s.is_degenerate());
        // (c1,c2) and (c4,c3) collapse to points; the two proper edges are one
        // segment traversed in opposite directions.
        assert_eq!(degenerate.len(), 2);
        assert_eq!(proper.len(), 2);
        assert!(proper[0].same_as(proper[1]));
        assert_ne!(proper[0], proper[1]);
    }

    #[test]
    fn polytope_edge_counts() {
        let v = |m: usize| PolytopeEntry::new((0..m).map(|i| p(&[i as f64, 1.0])).collect());
        assert_eq!(v(2).edges().len(), 1);
        assert!(v(1).edges().is_empty());
        assert_eq!(v(4).edges().len(), 6);
    }

    #[test]
    fn kharitonov_vertices_lie_in_box_and_edges_midpoints_too() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let len = rng.random_range(1..8);
            let lower: Vec<f64> = (0..len).map(|_| rng.random_range(-5.0..5.0)).collect();
            let upper: Vec<f64> = lower.iter().map(|l| l + rng.random_range(0.0..3.0)).collect();
            let e = IntervalEntry::new(lower, upper);
            for c in e.kharitonov_vertices().unwrap() {
                assert!(e.contains_coeffs(c.coeffs(), 0.0));
            }
            for seg in e.kharitonov_edges().unwrap() {
                assert!(e.contains_coeffs(seg.at(0.5).coeffs(), 1e-12));
            }
        }
    }

    #[test]
    fn polytope_edges_draw_from_vertices() {
        for m in 1..7 {
            let verts: Vec<Polynomial> = (0..m).map(|i| p(&[i as f64, 2.0, -1.0])).collect();
            let e = PolytopeEntry::new(verts.clone());
            let edges = e.edges();
            assert_eq!(edges.len(), m * (m - 1) / 2);
            for s in edges {
                assert_eq!(verts[s.ends.0], s.p0);
                assert_eq!(verts[s.ends.1], s.p1);
            }
        }
    }
}
