//! Brute-force cross-checks by sampling members of the full family.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::det::PolyMatrix;
use crate::edges::{CellChoice, EdgeConfiguration};
use crate::error::{Error, Result};
use crate::family::{Entry, MatrixFamily};
use crate::poly::{ComplexValue, Polynomial};
use crate::stab::worst_root;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SampleScheme {
    /// Dirichlet-uniform weights for polytope cells, uniform coefficients for interval cells.
    Random,
    /// Every lattice point with spacing `1 / level` (simplex lattice for
    /// polytope cells, per-coefficient grid for interval cells), then random
    /// members for whatever budget remains. `level = 1` gives every vertex matrix.
    Grid { level: usize },
}

/// Parameters of one cell of a family member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CellParams {
    /// Convex weights over the polytope vertices.
    Weights { w: Vec<f64> },
    /// Coefficients of an interval cell, ascending.
    Coefficients { c: Vec<f64> },
}

/// A member of the full family, cell by cell in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberRecord {
    pub cells: Vec<CellParams>,
}

impl MemberRecord {
    fn check_shape(&self, fam: &MatrixFamily) -> Result<()> {
        let cells = fam.n() * fam.n();
        if self.cells.len() != cells {
            return Err(Error::DimensionMismatch { expected: cells, got: self.cells.len() });
        }
        for (entry, params) in fam.entries().iter().zip(&self.cells) {
            let (want, got) = match (entry, params) {
                (Entry::Polytope(p), CellParams::Weights { w }) => (p.m(), w.len()),
                (Entry::Interval(q), CellParams::Coefficients { c }) => (q.lower.len(), c.len()),
                (Entry::Polytope(p), _) => (p.m(), 0),
                (Entry::Interval(q), _) => (q.lower.len(), 0),
            };
            if want != got {
                return Err(Error::DimensionMismatch { expected: want, got });
            }
        }
        Ok(())
    }

    pub fn matrix(&self, fam: &MatrixFamily) -> Result<PolyMatrix> {
        self.check_shape(fam)?;
        let cells = fam
            .entries()
            .iter()
            .zip(&self.cells)
            .map(|(entry, params)| match (entry, params) {
                (Entry::Polytope(p), CellParams::Weights { w }) => {
                    let len = p.vertices.iter().map(|v| v.coeffs().len()).max().unwrap_or(1);
                    let mut acc = vec![0.0; len];
                    for (wi, v) in w.iter().zip(&p.vertices) {
                        for (a, c) in acc.iter_mut().zip(v.coeffs()) {
                            *a += wi * c;
                        }
                    }
                    Polynomial::new(acc)
                }
                (_, CellParams::Coefficients { c }) => Polynomial::new(c.clone()),
                _ => unreachable!("shape checked"),
            })
            .collect();
        PolyMatrix::new(fam.n(), cells)
    }

    pub fn determinant(&self, fam: &MatrixFamily) -> Result<Polynomial> {
        Ok(self.matrix(fam)?.det())
    }

    /// True when the record describes a member of `fam` up to `tol`.
    pub fn is_member(&self, fam: &MatrixFamily, tol: f64) -> bool {
        self.check_shape(fam).is_ok()
            && fam.entries().iter().zip(&self.cells).all(|(entry, params)| match (entry, params) {
                (Entry::Polytope(_), CellParams::Weights { w }) => {
                    w.iter().all(|&x| x >= -tol) && (w.iter().sum::<f64>() - 1.0).abs() <= tol
                }
                (Entry::Interval(q), CellParams::Coefficients { c }) => q.contains_coeffs(c, tol),
                _ => false,
            })
    }

    /// Nearest member in the simple sense: clamp and renormalize weights, clamp coefficients.
    pub fn project(&mut self, fam: &MatrixFamily) {
        for (entry, params) in fam.entries().iter().zip(self.cells.iter_mut()) {
            match (entry, params) {
                (Entry::Polytope(_), CellParams::Weights { w }) => {
                    for x in w.iter_mut() {
                        *x = x.max(0.0);
                    }
                    let s: f64 = w.iter().sum();
                    if s > 0.0 {
                        w.iter_mut().for_each(|x| *x /= s);
                    } else {
                        let m = w.len() as f64;
                        w.iter_mut().for_each(|x| *x = 1.0 / m);
                    }
                }
                (Entry::Interval(q), CellParams::Coefficients { c }) => {
                    for ((x, lo), hi) in c.iter_mut().zip(&q.lower).zip(&q.upper) {
                        *x = x.clamp(*lo, *hi);
                    }
                }
                _ => {}
            }
        }
    }

    /// The member a configuration reaches at `lambda` (its free parameters).
    pub fn from_configuration(fam: &MatrixFamily, cfg: &EdgeConfiguration, lambda: &[f64]) -> Result<Self> {
        if lambda.len() != cfg.k() {
            return Err(Error::DimensionMismatch { expected: cfg.k(), got: lambda.len() });
        }
        let n = fam.n();
        let col_lambda = cfg.column_lambdas(lambda);
        let cells = (0..n * n)
            .map(|cell| {
                let (row, col) = (cell / n, cell % n);
                let entry = fam.entry(row, col);
                match (entry, cfg.cell(row, col)) {
                    (Entry::Polytope(p), CellChoice::Vertex { index, .. }) => {
                        let mut w = vec![0.0; p.m()];
                        w[*index] = 1.0;
                        CellParams::Weights { w }
                    }
                    (Entry::Polytope(p), CellChoice::Edge { segment, .. }) => {
                        let mut w = vec![0.0; p.m()];
                        let l = col_lambda[col];
                        w[segment.ends.0] += 1.0 - l;
                        w[segment.ends.1] += l;
                        CellParams::Weights { w }
                    }
                    (Entry::Interval(q), CellChoice::Vertex { poly, .. }) => {
                        CellParams::Coefficients { c: padded(poly, q.lower.len()) }
                    }
                    (Entry::Interval(q), CellChoice::Edge { segment, .. }) => {
                        CellParams::Coefficients { c: padded(&segment.at(col_lambda[col]), q.lower.len()) }
                    }
                }
            })
            .collect();
        Ok(Self { cells })
    }
}

fn padded(p: &Polynomial, len: usize) -> Vec<f64> {
    (0..len).map(|l| p.coeff(l)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleVerdict {
    StableAtAllSamples,
    UnstableSampleFound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstMember {
    pub sample_index: u64,
    pub member: MemberRecord,
    /// Smallest root margin; negative infinity for an identically zero determinant.
    pub margin: f64,
    pub root: Option<ComplexValue>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub samples: u64,
    /// `None` when every sampled determinant is a nonzero constant.
    pub worst_margin: Option<f64>,
    pub worst_member: Option<WorstMember>,
    pub verdict: OracleVerdict,
}

/// Smallest root margin of a determinant: `None` for a nonzero constant,
/// negative infinity for the zero polynomial.
pub fn determinant_margin(det: &Polynomial, fam: &MatrixFamily) -> (Option<f64>, Option<ComplexValue>) {
    if det.is_zero() {
        return (Some(f64::NEG_INFINITY), None);
    }
    match worst_root(det, &fam.region()).expect("nonzero polynomial") {
        Some((m, z)) => (Some(m), Some(z)),
        None => (None, None),
    }
}

fn random_member(fam: &MatrixFamily, rng: &mut ChaCha8Rng) -> MemberRecord {
    let cells = fam
        .entries()
        .iter()
        .map(|entry| match entry {
            Entry::Polytope(p) => {
                let mut w: Vec<f64> = (0..p.m()).map(|_| rng.sample::<f64, _>(Exp1)).collect();
                let s: f64 = w.iter().sum();
                w.iter_mut().for_each(|x| *x /= s);
                CellParams::Weights { w }
            }
            Entry::Interval(q) => CellParams::Coefficients {
                c: q.lower
                    .iter()
                    .zip(&q.upper)
                    .map(|(&lo, &hi)| if lo == hi { lo } else { rng.random_range(lo..=hi) })
                    .collect(),
            },
        })
        .collect();
    MemberRecord { cells }
}

/// Lattice points of one cell at the given level.
fn cell_lattice(entry: &Entry, level: usize) -> Vec<CellParams> {
    match entry {
        Entry::Polytope(p) => {
            let m = p.m();
            let mut out = Vec::new();
            let mut parts = vec![0usize; m];
            compositions(level, 0, &mut parts, &mut |parts| {
                out.push(CellParams::Weights { w: parts.iter().map(|&k| k as f64 / level as f64).collect() });
            });
            out
        }
        Entry::Interval(q) => {
            let axes: Vec<Vec<f64>> = q
                .lower
                .iter()
                .zip(&q.upper)
                .map(|(&lo, &hi)| {
                    if lo == hi {
                        vec![lo]
                    } else {
                        (0..=level).map(|i| lo + (hi - lo) * i as f64 / level as f64).collect()
                    }
                })
                .collect();
            let mut out = vec![Vec::new()];
            for axis in axes {
                out = out
                    .into_iter()
                    .flat_map(|prefix: Vec<f64>| {
                        axis.iter().map(move |&x| {
                            let mut v = prefix.clone();
                            v.push(x);
                            v
                        })
                    })
                    .collect();
            }
            out.into_iter().map(|c| CellParams::Coefficients { c }).collect()
        }
    }
}

/// Every way to split `total` into `parts.len() - start` ordered nonnegative parts.
fn compositions(total: usize, start: usize, parts: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if start + 1 == parts.len() {
        parts[start] = total;
        f(parts);
        return;
    }
    for k in (0..=total).rev() {
        parts[start] = k;
        compositions(total - k, start + 1, parts, f);
    }
}

struct Lattice {
    cells: Vec<Vec<CellParams>>,
    len: u64,
}

impl Lattice {
    fn new(fam: &MatrixFamily, level: usize) -> Self {
        let cells: Vec<Vec<CellParams>> = fam.entries().iter().map(|e| cell_lattice(e, level.max(1))).collect();
        let len = cells
            .iter()
            .try_fold(1u64, |acc, c| acc.checked_mul(c.len() as u64))
            .unwrap_or(u64::MAX);
        Self { cells, len }
    }

    /// Mixed-radix decode, last cell fastest.
    fn get(&self, mut index: u64) -> MemberRecord {
        let mut out = vec![None; self.cells.len()];
        for (i, options) in self.cells.iter().enumerate().rev() {
            let r = options.len() as u64;
            out[i] = Some(options[(index % r) as usize].clone());
            index /= r;
        }
        MemberRecord { cells: out.into_iter().map(Option::unwrap).collect() }
    }
}

struct Sample {
    index: u64,
    member: MemberRecord,
    margin: Option<f64>,
    root: Option<ComplexValue>,
}

fn worse(a: Sample, b: Sample) -> Sample {
    let key = |s: &Sample| s.margin.unwrap_or(f64::INFINITY);
    match key(&a).total_cmp(&key(&b)) {
        std::cmp::Ordering::Less => a,
        std::cmp::Ordering::Greater => b,
        std::cmp::Ordering::Equal => {
            if a.index <= b.index {
                a
            } else {
                b
            }
        }
    }
}

/// Draws `budget` members and reports the one whose determinant has the
/// smallest root margin. Sample `i` depends only on `(seed, i)`.
pub fn sample_family(fam: &MatrixFamily, scheme: SampleScheme, budget: u64, seed: u64) -> Result<SampleReport> {
    let diags: Vec<_> = fam
        .validate()
        .into_iter()
        .filter(|d| d.severity() == crate::family::Severity::Error)
        .collect();
    if !diags.is_empty() {
        return Err(Error::ValidationFailure(diags));
    }
    let all_fixed = fam.entries().iter().all(Entry::is_fixed);
    let budget = if all_fixed { budget.min(1) } else { budget };
    let lattice = match scheme {
        SampleScheme::Grid { level } => Some(Lattice::new(fam, level)),
        SampleScheme::Random => None,
    };
    let draw = |i: u64| -> Sample {
        let member = match &lattice {
            Some(l) if i < l.len => l.get(i),
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i);
                random_member(fam, &mut rng)
            }
        };
        let det = member.determinant(fam).expect("shape from family");
        let (margin, root) = determinant_margin(&det, fam);
        Sample { index: i, member, margin, root }
    };
    let worst = (0..budget).into_par_iter().map(draw).reduce_with(worse);
    let worst_margin = worst.as_ref().and_then(|s| s.margin);
    let verdict = match worst_margin {
        Some(m) if m < 0.0 => OracleVerdict::UnstableSampleFound,
        _ => OracleVerdict::StableAtAllSamples,
    };
    Ok(SampleReport {
        samples: budget,
        worst_margin,
        worst_member: worst.and_then(|s| {
            s.margin.map(|margin| WorstMember { sample_index: s.index, member: s.member, margin, root: s.root })
        }),
        verdict,
    })
}

fn member_margin(fam: &MatrixFamily, m: &MemberRecord) -> f64 {
    match m.determinant(fam) {
        Ok(det) => determinant_margin(&det, fam).0.unwrap_or(f64::INFINITY),
        Err(_) => f64::INFINITY,
    }
}

/// Local search for a family member with negative root margin, starting
/// from `hint`: random perturbations at shrinking scales, then coordinate
/// descent. Uses at most `budget` determinant evaluations.
pub fn find_counterexample_near(fam: &MatrixFamily, hint: &MemberRecord, budget: u64) -> Option<MemberRecord> {
    if hint.check_shape(fam).is_err() {
        return None;
    }
    if hint.is_member(fam, 1e-12) && member_margin(fam, hint) < 0.0 {
        return Some(hint.clone());
    }
    let mut best = hint.clone();
    best.project(fam);
    let mut best_m = member_margin(fam, &best);
    let mut used = 1u64;
    if best_m < 0.0 {
        return Some(best);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x0c0ffee);
    let widths: Vec<f64> = fam
        .entries()
        .iter()
        .map(|e| match e {
            Entry::Polytope(_) => 1.0,
            Entry::Interval(q) => q.lower.iter().zip(&q.upper).fold(0.0, |m, (l, h)| f64::max(m, h - l)),
        })
        .collect();
    let try_candidate = |cand: MemberRecord, best: &mut MemberRecord, best_m: &mut f64, used: &mut u64| {
        *used += 1;
        let m = member_margin(fam, &cand);
        if m < *best_m {
            *best = cand;
            *best_m = m;
        }
    };
    let mut h = 0.1;
    while used < budget && best_m >= 0.0 {
        // random perturbations
        for _ in 0..16 {
            if used >= budget {
                break;
            }
            let mut cand = best.clone();
            for (params, width) in cand.cells.iter_mut().zip(&widths) {
                let v = match params {
                    CellParams::Weights { w } => w,
                    CellParams::Coefficients { c } => c,
                };
                for x in v.iter_mut() {
                    *x += h * width * rng.random_range(-1.0..=1.0);
                }
            }
            cand.project(fam);
            try_candidate(cand, &mut best, &mut best_m, &mut used);
        }
        // coordinate steps
        'coords: for cell in 0..best.cells.len() {
            let len = match &best.cells[cell] {
                CellParams::Weights { w } => w.len(),
                CellParams::Coefficients { c } => c.len(),
            };
            for j in 0..len {
                for sign in [-1.0, 1.0] {
                    if used >= budget {
                        break 'coords;
                    }
                    let mut cand = best.clone();
                    match &mut cand.cells[cell] {
                        CellParams::Weights { w } => w[j] += sign * h,
                        CellParams::Coefficients { c } => c[j] += sign * h * widths[cell],
                    }
                    cand.project(fam);
                    try_candidate(cand, &mut best, &mut best_m, &mut used);
                }
            }
        }
        h = if h < 1e-6 { 0.1 } else { h * 0.5 };
    }
    (best_m < 0.0).then_some(best)
}
