//! Decision procedures: point stability, the Routh array, the exact segment
//! test, the multi-affine box test and the configuration drivers.

use std::f64::consts::{PI, TAU};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::det::ParametricDeterminant;
use crate::edges::{ConfigEnumerator, EdgeConfiguration};
use crate::error::{Error, Result};
use crate::family::{EdgeSegment, FamilyMode, MatrixFamily};
use crate::poly::{complex_roots, ComplexValue, Polynomial};
use crate::region::{Region, SweepRange};

/// A root counts as inside only when its margin exceeds this times `max(1, |z|)`.
pub const MARGIN_FLOOR: f64 = 1e-12;
/// A witness reproduces when its worst root margin is at most this times `max(1, |z|)`.
pub const WITNESS_TOL: f64 = 1e-9;
/// Configurations per batch handed to the worker pool. Fixed so that the
/// early-exit point does not depend on the number of workers.
pub const CHUNK_SIZE: u64 = 256;
/// Boundary evaluations allowed per box test.
pub const SWEEP_BUDGET: u64 = 1 << 18;
const WITNESS_ATTEMPTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Initial boundary sample count.
    pub boundary_grid: usize,
    /// Maximum bisection depth along the boundary.
    pub refine_depth: u32,
    /// Maximum subdivision depth of the parameter box.
    pub box_depth: u32,
    /// Relative hull-exclusion margin.
    pub zero_margin: f64,
    /// Relative floor on the leading coefficient.
    pub degree_eps: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { boundary_grid: 512, refine_depth: 40, box_depth: 12, zero_margin: 1e-7, degree_eps: 1e-9 }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidTolerances(format!("{what} must be positive")));
        if self.boundary_grid < 2 {
            return Err(Error::InvalidTolerances("boundary_grid must be at least 2".into()));
        }
        if self.refine_depth == 0 {
            return bad("refine_depth");
        }
        if self.box_depth == 0 {
            return bad("box_depth");
        }
        if !(self.zero_margin > 0.0 && self.zero_margin.is_finite()) {
            return bad("zero_margin");
        }
        if !(self.degree_eps > 0.0 && self.degree_eps.is_finite()) {
            return bad("degree_eps");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    RobustlyStable,
    Unstable,
    Degenerate,
    Inconclusive,
}

impl Status {
    fn rank(self) -> u8 {
        match self {
            Status::RobustlyStable => 0,
            Status::Inconclusive => 1,
            Status::Degenerate => 2,
            Status::Unstable => 3,
        }
    }

    /// Aggregation order: Unstable over Degenerate over Inconclusive over stable.
    pub fn dominant(self, other: Status) -> Status {
        if other.rank() > self.rank() {
            other
        } else {
            self
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Status::RobustlyStable => 0,
            Status::Unstable => 1,
            Status::Degenerate => 2,
            Status::Inconclusive => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::RobustlyStable => "robustly_stable",
            Status::Unstable => "unstable",
            Status::Degenerate => "degenerate",
            Status::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Short machine-readable cause attached to every verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    RootsInside,
    NoRoots,
    RootOutside,
    ZeroDeterminant,
    DegreeDrop,
    CommonBoundaryRoot,
    BoundaryCrossing,
    NearCrossing,
    UnresolvedZero,
    RefineDepth,
    SweepBudget,
    AllConfigurationsStable,
    ConfigurationUnstable,
    ConfigurationDegenerate,
    ConfigurationInconclusive,
}

/// A member with a root outside the region, or on its boundary within tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub config_index: Option<u64>,
    /// Free parameters of the configuration (empty for a single polynomial).
    pub lambda: Vec<f64>,
    pub root: ComplexValue,
    pub root_margin: f64,
}

/// Work done by a boundary sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepStats {
    pub evaluations: u64,
    pub max_depth: u32,
    /// Smallest certified `|D| / scale` over evaluated boundary points.
    pub min_exclusion: Option<f64>,
}

impl SweepStats {
    fn merge(self, other: SweepStats) -> SweepStats {
        let min_exclusion = match (self.min_exclusion, other.min_exclusion) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        SweepStats {
            evaluations: self.evaluations + other.evaluations,
            max_depth: self.max_depth.max(other.max_depth),
            min_exclusion,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: Status,
    /// Smallest root margin seen; `None` when every member is a nonzero constant.
    pub margin: Option<f64>,
    pub reason: Reason,
    pub witness: Option<Witness>,
    /// Configuration that decided the verdict, for driver results.
    pub config_index: Option<u64>,
    pub sweep: Option<SweepStats>,
}

impl Verdict {
    pub fn new(status: Status, reason: Reason) -> Self {
        Self { status, margin: None, reason, witness: None, config_index: None, sweep: None }
    }

    fn with_margin(mut self, margin: Option<f64>) -> Self {
        self.margin = margin;
        self
    }

    fn unstable(w: Witness, reason: Reason) -> Self {
        let mut v = Verdict::new(Status::Unstable, reason).with_margin(Some(w.root_margin));
        v.witness = Some(w);
        v
    }

    pub fn is_stable(&self) -> bool {
        self.status == Status::RobustlyStable
    }
}

fn inside(margin: f64, z: ComplexValue) -> bool {
    margin > MARGIN_FLOOR * z.norm().max(1.0)
}

/// True when a root with this margin certifies instability.
pub fn reproduces(margin: f64, z: ComplexValue) -> bool {
    margin <= WITNESS_TOL * z.norm().max(1.0)
}

/// Root with the smallest region margin, or `None` for a nonzero constant.
pub fn worst_root(p: &Polynomial, r: &Region) -> Result<Option<(f64, ComplexValue)>> {
    Ok(p.roots()?
        .into_iter()
        .map(|z| (r.margin(z), z))
        .min_by(|a, b| a.0.total_cmp(&b.0)))
}

pub fn point_stable(p: &Polynomial, r: &Region) -> Result<Verdict> {
    match worst_root(p, r)? {
        None => Ok(Verdict::new(Status::RobustlyStable, Reason::NoRoots)),
        Some((m, z)) if inside(m, z) => {
            Ok(Verdict::new(Status::RobustlyStable, Reason::RootsInside).with_margin(Some(m)))
        }
        Some((m, z)) => Ok(Verdict::unstable(
            Witness { config_index: None, lambda: Vec::new(), root: z, root_margin: m },
            Reason::RootOutside,
        )),
    }
}

/// Routh array rows, highest power first, leading coefficient made positive.
#[derive(Clone, Debug, PartialEq)]
pub struct RouthTable {
    pub rows: Vec<Vec<f64>>,
    /// Rows whose zero pivot was replaced by a small positive value.
    pub epsilon_rows: Vec<usize>,
}

impl RouthTable {
    pub fn first_column(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r[0]).collect()
    }

    /// Sign changes down the first column: the number of open right-half-plane
    /// roots when no epsilon substitution happened.
    pub fn sign_changes(&self) -> usize {
        self.first_column().windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count()
    }
}

pub fn routh_table(p: &Polynomial) -> Result<RouthTable> {
    if p.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let d = p.degree();
    let sign = p.leading().signum();
    let desc: Vec<f64> = (0..=d).rev().map(|i| sign * p.coeff(i)).collect();
    let width = d / 2 + 1;
    let mut r0: Vec<f64> = desc.iter().step_by(2).copied().collect();
    r0.resize(width, 0.0);
    let mut rows = vec![r0];
    let mut epsilon_rows = Vec::new();
    if d == 0 {
        return Ok(RouthTable { rows, epsilon_rows });
    }
    let mut r1: Vec<f64> = desc.iter().skip(1).step_by(2).copied().collect();
    r1.resize(width, 0.0);
    patch_row(&mut r1, 1, &rows[0], &mut epsilon_rows)?;
    rows.push(r1);
    for i in 2..=d {
        let (a, b) = (&rows[i - 2], &rows[i - 1]);
        let pivot = b[0];
        let mut next = vec![0.0; width];
        for j in 0..width - 1 {
            let (x, y) = (pivot * a[j + 1], a[0] * b[j + 1]);
            // differences within rounding of their inputs are exact zeros
            if (x - y).abs() > 64.0 * f64::EPSILON * (x.abs() + y.abs()) {
                next[j] = (x - y) / pivot;
            }
        }
        patch_row(&mut next, i, b, &mut epsilon_rows)?;
        rows.push(next);
    }
    Ok(RouthTable { rows, epsilon_rows })
}

fn patch_row(row: &mut [f64], index: usize, prev: &[f64], eps_rows: &mut Vec<usize>) -> Result<()> {
    if row.iter().all(|&v| v == 0.0) {
        return Err(Error::IndeterminateRouthRow { row: index });
    }
    if row[0] == 0.0 {
        let scale = prev.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        row[0] = 1e-9 * scale;
        eps_rows.push(index);
    }
    Ok(())
}

/// Hurwitz test by the Routh array. An all-zero row means roots on the
/// imaginary axis and yields `false`.
pub fn hurwitz_algebraic(p: &Polynomial) -> Result<bool> {
    match routh_table(p) {
        Ok(t) => Ok(t.epsilon_rows.is_empty() && t.first_column().iter().all(|&v| v > 0.0)),
        Err(Error::IndeterminateRouthRow { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

fn boundary_grid(sweep: &SweepRange, count: usize) -> Vec<f64> {
    let n = count.max(2);
    (0..=n)
        .map(|i| {
            let u = i as f64 / n as f64;
            if sweep.periodic {
                sweep.lo + (sweep.hi - sweep.lo) * u
            } else {
                // denser near the real axis, where low-frequency crossings sit
                sweep.lo + (sweep.hi - sweep.lo) * u * u
            }
        })
        .collect()
}

/// Coefficients of `p(a + b t)`.
fn compose_affine(p: &Polynomial, a: ComplexValue, b: ComplexValue) -> Vec<ComplexValue> {
    let mut q = vec![ComplexValue::new(0.0, 0.0)];
    for &c in p.coeffs().iter().rev() {
        let mut next = vec![ComplexValue::new(0.0, 0.0); q.len() + 1];
        for (i, &qi) in q.iter().enumerate() {
            next[i] += qi * a;
            next[i + 1] += qi * b;
        }
        next[0] += c;
        q = next;
    }
    q
}

fn cmul(a: &[ComplexValue], b: &[ComplexValue]) -> Vec<ComplexValue> {
    let mut out = vec![ComplexValue::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn csub(a: &[ComplexValue], b: &[ComplexValue]) -> Vec<ComplexValue> {
    (0..a.len().max(b.len()))
        .map(|i| {
            let x = a.get(i).copied().unwrap_or_default();
            let y = b.get(i).copied().unwrap_or_default();
            x - y
        })
        .collect()
}

/// Boundary parameters where `p0(s) / delta(s)` may be real, from the roots
/// of the polynomial form of `Im(p0(s) * conj(delta(s))) = 0`.
fn algebraic_crossings(p0: &Polynomial, delta: &Polynomial, r: &Region, sweep: &SweepRange) -> Vec<f64> {
    const SLACK: f64 = 1e-6;
    match *r {
        Region::Disk { center, radius } => {
            let b = ComplexValue::new(radius, 0.0);
            let q0 = compose_affine(p0, center, b);
            let qd = compose_affine(delta, center, b);
            let d = q0.len().max(qd.len()) - 1;
            // z^d * conj(q(1/conj z)) on the unit circle
            let rev_conj = |q: &[ComplexValue]| {
                let mut out = vec![ComplexValue::new(0.0, 0.0); d + 1];
                for (l, c) in q.iter().enumerate() {
                    out[d - l] = c.conj();
                }
                out
            };
            let g = csub(&cmul(&q0, &rev_conj(&qd)), &cmul(&rev_conj(&q0), &qd));
            complex_roots(&g)
                .into_iter()
                .filter(|z| (z.norm() - 1.0).abs() <= SLACK)
                .map(|z| z.arg().rem_euclid(TAU))
                .collect()
        }
        _ => {
            let sigma = match *r {
                Region::ShiftedHalfPlane { sigma } => sigma,
                _ => 0.0,
            };
            let a = ComplexValue::new(sigma, 0.0);
            let b = ComplexValue::new(0.0, 1.0);
            let q0 = compose_affine(p0, a, b);
            let qd = compose_affine(delta, a, b);
            let conj = |q: &[ComplexValue]| q.iter().map(|c| c.conj()).collect::<Vec<_>>();
            let g = csub(&cmul(&q0, &conj(&qd)), &cmul(&conj(&q0), &qd));
            complex_roots(&g)
                .into_iter()
                .filter(|t| t.im.abs() <= SLACK * (1.0 + t.re.abs()))
                .map(|t| t.re.abs())
                .filter(|&w| w <= sweep.hi * (1.0 + 1e-9))
                .collect()
        }
    }
}

/// Sign changes of `Im(p0(s) * conj(delta(s)))` over the boundary grid, refined by bisection.
fn scanned_crossings(p0: &Polynomial, delta: &Polynomial, r: &Region, sweep: &SweepRange, tol: &Tolerances) -> Vec<f64> {
    let g = |theta: f64| {
        let s = r.boundary(theta).s;
        (p0.eval(s) * delta.eval(s).conj()).im
    };
    let grid = boundary_grid(sweep, tol.boundary_grid);
    let vals: Vec<f64> = grid.iter().map(|&t| g(t)).collect();
    let mut out = Vec::new();
    for i in 0..grid.len() {
        if vals[i] == 0.0 {
            out.push(grid[i]);
            continue;
        }
        if i + 1 < grid.len() && vals[i + 1] != 0.0 && (vals[i] > 0.0) != (vals[i + 1] > 0.0) {
            let (mut a, mut b, mut ga) = (grid[i], grid[i + 1], vals[i]);
            for _ in 0..tol.refine_depth {
                let m = 0.5 * (a + b);
                let gm = g(m);
                if gm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if (gm > 0.0) == (ga > 0.0) {
                    a = m;
                    ga = gm;
                } else {
                    b = m;
                }
            }
            out.push(0.5 * (a + b));
        }
    }
    out
}

/// Worst member of a segment near `lambda`, if it reproduces as a witness.
fn segment_witness(seg: &EdgeSegment, r: &Region, lambda: f64) -> Option<Witness> {
    let mut best: Option<Witness> = None;
    let mut probe = |l: f64| {
        let l = l.clamp(0.0, 1.0);
        if let Ok(Some((m, z))) = worst_root(&seg.at(l), r) {
            if best.as_ref().is_none_or(|b| m < b.root_margin) {
                best = Some(Witness { config_index: None, lambda: vec![l], root: z, root_margin: m });
            }
        }
    };
    probe(lambda);
    for h in [1e-9, 1e-7, 1e-5, 1e-3, 1e-2] {
        probe(lambda - h);
        probe(lambda + h);
    }
    best.filter(|w| reproduces(w.root_margin, w.root))
}

/// Stability of every member `(1 - lambda) p0 + lambda p1`, `lambda` in `[0, 1]`.
///
/// A root can only leave the region through the boundary; at a boundary point
/// `s` the member vanishes exactly when `lambda = -p0(s) / (p1(s) - p0(s))` is
/// real and in range. Candidate boundary points come from a sign-change scan
/// and from the roots of the polynomial form of the reality condition.
pub fn segment_stable(seg: &EdgeSegment, r: &Region, tol: &Tolerances) -> Verdict {
    let (p0, p1) = (&seg.p0, &seg.p1);
    if p0.is_zero() || p1.is_zero() {
        return Verdict::new(Status::Degenerate, Reason::ZeroDeterminant);
    }
    if seg.is_degenerate() {
        return point_stable(p0, r).expect("nonzero polynomial");
    }
    let lead_ok = |p: &Polynomial| p.leading().abs() >= tol.degree_eps * p.max_abs_coeff();
    if p0.degree() != p1.degree()
        || p0.leading().signum() != p1.leading().signum()
        || !lead_ok(p0)
        || !lead_ok(p1)
    {
        return Verdict::new(Status::Degenerate, Reason::DegreeDrop);
    }
    let delta = p1 - p0;
    let mut margins: Vec<f64> = Vec::new();
    for (lam, p) in [(0.0, p0), (1.0, p1)] {
        match worst_root(p, r).expect("nonzero polynomial") {
            Some((m, z)) if !inside(m, z) => {
                if delta.eval(z).norm() <= 1e-12 * delta.magnitude_at(z) && m.abs() <= WITNESS_TOL * z.norm().max(1.0) {
                    return Verdict::new(Status::Degenerate, Reason::CommonBoundaryRoot);
                }
                let w = Witness { config_index: None, lambda: vec![lam], root: z, root_margin: m };
                return Verdict::unstable(w, Reason::RootOutside);
            }
            Some((m, _)) => margins.push(m),
            None => {}
        }
    }
    if p0.degree() == 0 {
        return Verdict::new(Status::RobustlyStable, Reason::NoRoots);
    }
    let pd = ParametricDeterminant::from_terms(1, vec![p0.clone(), delta.clone()]);
    let Ok(sweep) = r.sweep_range(&pd) else {
        return Verdict::new(Status::Degenerate, Reason::DegreeDrop);
    };
    let mut thetas = vec![sweep.lo];
    if sweep.periodic {
        thetas.push(PI);
    }
    thetas.extend(algebraic_crossings(p0, &delta, r, &sweep));
    thetas.extend(scanned_crossings(p0, &delta, r, &sweep, tol));

    let mut lambdas: Vec<f64> = (1..16).map(|i| i as f64 / 16.0).collect();
    let mut near = false;
    for theta in thetas {
        let s = r.boundary(theta).s;
        let (a, b) = (p0.eval(s), delta.eval(s));
        if b.norm() <= 1e-12 * delta.magnitude_at(s) {
            if a.norm() <= 1e-9 * p0.magnitude_at(s) {
                return Verdict::new(Status::Degenerate, Reason::CommonBoundaryRoot);
            }
            continue;
        }
        let lam = -(a * b.conj()).re / b.norm_sqr();
        if !(-1e-9..=1.0 + 1e-9).contains(&lam) {
            continue;
        }
        let lam = lam.clamp(0.0, 1.0);
        if let Some(w) = segment_witness(seg, r, lam) {
            return Verdict::unstable(w, Reason::BoundaryCrossing);
        }
        if let Ok(Some((m, z))) = worst_root(&seg.at(lam), r) {
            if m <= tol.zero_margin * z.norm().max(1.0) {
                near = true;
            }
        }
        lambdas.push(lam);
    }
    if near {
        return Verdict::new(Status::Inconclusive, Reason::NearCrossing);
    }
    for lam in lambdas {
        if let Ok(Some((m, z))) = worst_root(&seg.at(lam), r) {
            // the scan can miss nothing that the roots see
            if !inside(m, z) {
                if let Some(w) = segment_witness(seg, r, lam) {
                    return Verdict::unstable(w, Reason::BoundaryCrossing);
                }
                return Verdict::new(Status::Inconclusive, Reason::NearCrossing);
            }
            margins.push(m);
        }
    }
    let margin = margins.into_iter().reduce(f64::min);
    Verdict::new(Status::RobustlyStable, Reason::RootsInside).with_margin(margin)
}

/// Distance from the origin to the convex hull of `pts`; zero when inside.
pub fn hull_distance(pts: &[ComplexValue]) -> f64 {
    let mut p: Vec<(f64, f64)> = pts.iter().map(|z| (z.re, z.im)).collect();
    p.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    p.dedup();
    if p.len() == 1 {
        return p[0].0.hypot(p[0].1);
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> =
            if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    if hull.len() <= 2 {
        let (a, b) = (hull[0], *hull.last().unwrap());
        return segment_distance(a, b);
    }
    let m = hull.len();
    let origin = (0.0, 0.0);
    if (0..m).all(|i| cross(hull[i], hull[(i + 1) % m], origin) >= 0.0) {
        return 0.0;
    }
    (0..m)
        .map(|i| segment_distance(hull[i], hull[(i + 1) % m]))
        .fold(f64::INFINITY, f64::min)
}

fn segment_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (-(a.0 * dx + a.1 * dy) / len2).clamp(0.0, 1.0) };
    (a.0 + t * dx).hypot(a.1 + t * dy)
}

enum Exclusion {
    /// Every sub-box hull misses the origin; the smallest distance.
    Clear(f64),
    /// A sub-box at maximum depth whose hull still holds the origin.
    Hit { lo: Vec<f64>, hi: Vec<f64> },
}

/// Branch and bound over the parameter box: the value set of a multi-affine
/// map over a box lies in the hull of its corner values.
fn exclusion(terms: &[ComplexValue], k: usize, max_depth: u32, thresh: f64) -> Exclusion {
    let mut stack = vec![(vec![0.0; k], vec![1.0; k], 0u32)];
    let mut min_d = f64::INFINITY;
    while let Some((lo, hi, depth)) = stack.pop() {
        let vals = ParametricDeterminant::corner_values(terms, &lo, &hi);
        let d = hull_distance(&vals);
        if d > thresh {
            min_d = min_d.min(d);
            continue;
        }
        if depth >= max_depth {
            return Exclusion::Hit { lo, hi };
        }
        let axis = (0..k)
            .reduce(|best, j| if hi[j] - lo[j] > hi[best] - lo[best] { j } else { best })
            .expect("k > 0");
        let mid = 0.5 * (lo[axis] + hi[axis]);
        let (mut hi_a, mut lo_b) = (hi.clone(), lo.clone());
        hi_a[axis] = mid;
        lo_b[axis] = mid;
        stack.push((lo_b, hi, depth + 1));
        stack.push((lo, hi_a, depth + 1));
    }
    Exclusion::Clear(min_d)
}

struct Sweeper<'a> {
    pd: &'a ParametricDeterminant,
    r: &'a Region,
    tol: &'a Tolerances,
    cmax: Vec<f64>,
    sweep: SweepRange,
    evals: u64,
    max_depth: u32,
    min_excl: f64,
    attempts: usize,
    unresolved: Option<Reason>,
    rng: ChaCha8Rng,
}

impl Sweeper<'_> {
    /// Upper bound on `|D(s, lambda)|` over the box.
    fn magnitude(&self, s: ComplexValue) -> f64 {
        let a = s.norm();
        self.cmax.iter().rev().fold(0.0, |acc, c| acc * a + c)
    }

    /// Lipschitz constant of `theta -> D(s(theta), lambda)` on `[a, b]`, uniform in lambda.
    fn lipschitz(&self, a: f64, b: f64) -> f64 {
        let smax = self.r.boundary_modulus_bound(a, b);
        let dmax = self
            .cmax
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (l, c)| acc * smax + l as f64 * c);
        dmax * self.r.boundary_speed()
    }

    fn ds_dtheta(&self, s: ComplexValue) -> ComplexValue {
        match *self.r {
            Region::Disk { center, .. } => ComplexValue::new(0.0, 1.0) * (s - center),
            _ => ComplexValue::new(0.0, 1.0),
        }
    }

    /// Certified lower bound on `|D|` at `theta`, `None` when unresolved.
    fn probe(&mut self, theta: f64) -> std::result::Result<Option<f64>, Witness> {
        self.evals += 1;
        let s = self.r.boundary(theta).s;
        let terms = self.pd.eval_terms(s);
        let mag = self.magnitude(s);
        match exclusion(&terms, self.pd.k(), self.tol.box_depth, self.tol.zero_margin * mag) {
            Exclusion::Clear(d) => {
                self.min_excl = self.min_excl.min(d / mag);
                Ok(Some(d))
            }
            Exclusion::Hit { lo, hi } => {
                if self.attempts < WITNESS_ATTEMPTS {
                    self.attempts += 1;
                    if let Some(w) = self.confirm(theta, &lo, &hi) {
                        return Err(w);
                    }
                }
                self.unresolved = Some(Reason::UnresolvedZero);
                Ok(None)
            }
        }
    }

    fn run(&mut self) -> std::result::Result<(), Witness> {
        let grid = boundary_grid(&self.sweep, self.tol.boundary_grid);
        let mut vals = Vec::with_capacity(grid.len());
        for &t in &grid {
            vals.push(self.probe(t)?);
        }
        let mut stack: Vec<(f64, Option<f64>, f64, Option<f64>, u32)> = (0..grid.len() - 1)
            .rev()
            .map(|i| (grid[i], vals[i], grid[i + 1], vals[i + 1], 0))
            .collect();
        while let Some((a, da, b, db, depth)) = stack.pop() {
            let (Some(da), Some(db)) = (da, db) else { continue };
            if da + db > self.lipschitz(a, b) * (b - a) {
                continue;
            }
            if depth >= self.tol.refine_depth {
                self.unresolved.get_or_insert(Reason::RefineDepth);
                continue;
            }
            if self.evals >= SWEEP_BUDGET {
                self.unresolved.get_or_insert(Reason::SweepBudget);
                continue;
            }
            let m = 0.5 * (a + b);
            let dm = self.probe(m)?;
            self.max_depth = self.max_depth.max(depth + 1);
            stack.push((m, dm, b, Some(db), depth + 1));
            stack.push((a, Some(da), m, dm, depth + 1));
        }
        Ok(())
    }

    /// Gauss-Newton on `D(s(theta), lambda) = 0`, minimum-norm steps.
    fn gauss_newton(&self, mut lam: Vec<f64>, mut theta: f64) -> Vec<f64> {
        let k = lam.len();
        for _ in 0..60 {
            let s = self.r.boundary(theta).s;
            let terms = self.pd.eval_terms(s);
            let f = ParametricDeterminant::eval_from_terms(&terms, &lam);
            if f.norm() <= 1e-14 * self.magnitude(s) {
                break;
            }
            let mut cols: Vec<ComplexValue> = (0..k)
                .map(|j| {
                    let (mut l1, mut l0) = (lam.clone(), lam.clone());
                    l1[j] = 1.0;
                    l0[j] = 0.0;
                    ParametricDeterminant::eval_from_terms(&terms, &l1)
                        - ParametricDeterminant::eval_from_terms(&terms, &l0)
                })
                .collect();
            let member = self.pd.eval_poly(&lam).expect("length k");
            cols.push(member.derivative().eval(s) * self.ds_dtheta(s));
            let (mut a11, mut a12, mut a22) = (0.0, 0.0, 0.0);
            for c in &cols {
                a11 += c.re * c.re;
                a12 += c.re * c.im;
                a22 += c.im * c.im;
            }
            let mu = 1e-14 * (a11 + a22) + f64::MIN_POSITIVE;
            let (b11, b22) = (a11 + mu, a22 + mu);
            let det = b11 * b22 - a12 * a12;
            if det == 0.0 || !det.is_finite() {
                break;
            }
            let y0 = (-f.re * b22 + f.im * a12) / det;
            let y1 = (-f.im * b11 + f.re * a12) / det;
            for (j, c) in cols.iter().enumerate() {
                let step = c.re * y0 + c.im * y1;
                if j < k {
                    lam[j] = (lam[j] + step).clamp(0.0, 1.0);
                } else if self.sweep.periodic {
                    theta = (theta + step).rem_euclid(TAU);
                } else {
                    theta = (theta + step).clamp(self.sweep.lo, self.sweep.hi);
                }
            }
        }
        lam
    }

    /// Looks for a member with a root outside, or on the boundary, near the hit.
    fn confirm(&mut self, theta: f64, lo: &[f64], hi: &[f64]) -> Option<Witness> {
        let k = lo.len();
        let mut best: Option<Witness> = None;
        let consider = |lam: &[f64], best: &mut Option<Witness>| {
            let p = self.pd.eval_poly(lam).expect("length k");
            if let Ok(Some((m, z))) = worst_root(&p, self.r) {
                if best.as_ref().is_none_or(|b| m < b.root_margin) {
                    *best = Some(Witness { config_index: None, lambda: lam.to_vec(), root: z, root_margin: m });
                }
            }
        };
        let centre: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let mut seeds = vec![centre];
        for _ in 0..2 {
            seeds.push(lo.iter().zip(hi).map(|(a, b)| self.rng.random_range(*a..=*b)).collect());
        }
        for seed in seeds {
            let lam = self.gauss_newton(seed, theta);
            consider(&lam, &mut best);
            for h in [1e-6, 1e-4, 1e-2, 1e-1] {
                for _ in 0..6 {
                    let trial: Vec<f64> = (0..k)
                        .map(|j| (lam[j] + h * self.rng.random_range(-1.0..=1.0)).clamp(0.0, 1.0))
                        .collect();
                    consider(&trial, &mut best);
                }
            }
            if best.as_ref().is_some_and(|w| w.root_margin < 0.0) {
                break;
            }
        }
        best.filter(|w| reproduces(w.root_margin, w.root))
    }
}

fn corner(mask: usize, k: usize) -> Vec<f64> {
    (0..k).map(|j| ((mask >> j) & 1) as f64).collect()
}

/// D-stability of `{D(s, lambda) : lambda in [0, 1]^k}` by zero exclusion.
///
/// Every box corner is point-checked. Along the boundary, the hull of the
/// corner values excludes zero from the value set; the box is bisected where
/// the hull is too coarse. Between samples, a Lipschitz bound on `|D|` in the
/// boundary parameter certifies the gaps.
pub fn box_stable(pd: &ParametricDeterminant, r: &Region, tol: &Tolerances) -> Verdict {
    let boxes = pd.coefficient_box();
    let cmax: Vec<f64> = boxes.iter().map(|b| b.max_abs()).collect();
    let scale = cmax.iter().copied().fold(0.0, f64::max);
    let Some(deg) = pd.degree() else {
        return Verdict::new(Status::Degenerate, Reason::ZeroDeterminant);
    };
    if boxes[deg].min_abs() < tol.degree_eps * scale {
        return Verdict::new(Status::Degenerate, Reason::DegreeDrop);
    }
    let k = pd.k();
    let mut corner_margin: Option<f64> = None;
    for mask in 0..1usize << k {
        let lam = corner(mask, k);
        let p = pd.eval_poly(&lam).expect("length k");
        match worst_root(&p, r) {
            Ok(None) => {}
            Ok(Some((m, z))) if inside(m, z) => {
                corner_margin = Some(corner_margin.map_or(m, |c| c.min(m)));
            }
            Ok(Some((m, z))) => {
                let w = Witness { config_index: None, lambda: lam, root: z, root_margin: m };
                return Verdict::unstable(w, Reason::RootOutside);
            }
            Err(_) => return Verdict::new(Status::Degenerate, Reason::ZeroDeterminant),
        }
    }
    if deg == 0 {
        return Verdict::new(Status::RobustlyStable, Reason::NoRoots);
    }
    if k == 0 {
        return Verdict::new(Status::RobustlyStable, Reason::RootsInside).with_margin(corner_margin);
    }
    let Ok(sweep) = r.sweep_range(pd) else {
        return Verdict::new(Status::Degenerate, Reason::DegreeDrop);
    };
    let mut sw = Sweeper {
        pd,
        r,
        tol,
        cmax,
        sweep,
        evals: 0,
        max_depth: 0,
        min_excl: f64::INFINITY,
        attempts: 0,
        unresolved: None,
        rng: ChaCha8Rng::seed_from_u64(0x5eed),
    };
    let outcome = sw.run();
    let stats = SweepStats {
        evaluations: sw.evals,
        max_depth: sw.max_depth,
        min_exclusion: sw.min_excl.is_finite().then_some(sw.min_excl),
    };
    let mut v = match (outcome, sw.unresolved) {
        (Err(w), _) => Verdict::unstable(w, Reason::BoundaryCrossing),
        (Ok(()), Some(reason)) => Verdict::new(Status::Inconclusive, reason).with_margin(corner_margin),
        (Ok(()), None) => Verdict::new(Status::RobustlyStable, Reason::RootsInside).with_margin(corner_margin),
    };
    v.sweep = Some(stats);
    v
}

/// Box test of one configuration, tagged with its index.
pub fn check_configuration(cfg: &EdgeConfiguration, r: &Region, tol: &Tolerances) -> Verdict {
    let mut v = box_stable(&cfg.det_parametric(), r, tol);
    v.config_index = Some(cfg.index);
    if let Some(w) = v.witness.as_mut() {
        w.config_index = Some(cfg.index);
    }
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub index: u64,
    pub status: Status,
    pub margin: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct DriverOptions {
    pub tol: Tolerances,
    /// Worker threads; `None` uses the machine default.
    pub jobs: Option<usize>,
    /// Skip repeated vertices and edges within a cell.
    pub dedup: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FamilyAnalysis {
    pub mode: FamilyMode,
    pub configuration_count: u64,
    /// One entry per checked configuration, in index order. Checking stops
    /// after the batch holding the first unstable configuration.
    pub summaries: Vec<ConfigSummary>,
    pub verdict: Verdict,
}

pub fn analyze_family(fam: &MatrixFamily, tol: &Tolerances) -> Result<Verdict> {
    let opts = DriverOptions { tol: *tol, ..Default::default() };
    Ok(analyze_family_with(fam, &opts)?.verdict)
}

pub fn analyze_family_with(fam: &MatrixFamily, opts: &DriverOptions) -> Result<FamilyAnalysis> {
    fam.region().check()?;
    fam.ensure_valid_for(FamilyMode::Polytope)?;
    drive(fam, FamilyMode::Polytope, opts)
}

/// Interval families are only decided for the Hurwitz half-plane.
pub fn analyze_interval(fam: &MatrixFamily, tol: &Tolerances) -> Result<Verdict> {
    let opts = DriverOptions { tol: *tol, ..Default::default() };
    Ok(analyze_interval_with(fam, &opts)?.verdict)
}

pub fn analyze_interval_with(fam: &MatrixFamily, opts: &DriverOptions) -> Result<FamilyAnalysis> {
    if !fam.region().is_hurwitz() {
        return Err(Error::RegionNotHurwitz);
    }
    fam.ensure_valid_for(FamilyMode::Interval)?;
    drive(fam, FamilyMode::Interval, opts)
}

fn drive(fam: &MatrixFamily, mode: FamilyMode, opts: &DriverOptions) -> Result<FamilyAnalysis> {
    opts.tol.validate()?;
    let en = ConfigEnumerator::with_dedup(fam, opts.dedup)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Internal(e.to_string()))?;
    let region = fam.region();
    let total = en.len();
    let mut results: Vec<Verdict> = Vec::new();
    let mut start = 0;
    while start < total {
        let end = (start + CHUNK_SIZE).min(total);
        let chunk: Vec<Verdict> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|i| check_configuration(&en.get(i).expect("index in range"), &region, &opts.tol))
                .collect()
        });
        let stop = chunk.iter().any(|v| v.status == Status::Unstable);
        results.extend(chunk);
        if stop {
            break;
        }
        start = end;
    }
    let summaries = results
        .iter()
        .map(|v| ConfigSummary { index: v.config_index.expect("tagged"), status: v.status, margin: v.margin })
        .collect();
    Ok(FamilyAnalysis { mode, configuration_count: total, summaries, verdict: aggregate(&results) })
}

/// Combines per-configuration verdicts; the lowest-index configuration with
/// the dominant status decides.
pub fn aggregate(results: &[Verdict]) -> Verdict {
    let status = results.iter().fold(Status::RobustlyStable, |s, v| s.dominant(v.status));
    let sweep = results.iter().filter_map(|v| v.sweep).reduce(SweepStats::merge);
    if status == Status::RobustlyStable {
        let margin = results.iter().filter_map(|v| v.margin).reduce(f64::min);
        let mut v = Verdict::new(status, Reason::AllConfigurationsStable).with_margin(margin);
        v.sweep = sweep;
        return v;
    }
    let mut v = results
        .iter()
        .find(|v| v.status == status)
        .cloned()
        .expect("dominant status occurs");
    v.reason = match status {
        Status::Unstable => Reason::ConfigurationUnstable,
        Status::Degenerate => Reason::ConfigurationDegenerate,
        _ => Reason::ConfigurationInconclusive,
    };
    v.sweep = sweep;
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[f64]) -> Polynomial {
        Polynomial::new(c.to_vec())
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn point_examples() {
        let h = Region::HurwitzHalfPlane;
        let v = point_stable(&p(&[1.0, 1.0]), &h).unwrap();
        assert_eq!(v.status, Status::RobustlyStable);
        assert!((v.margin.unwrap() - 1.0).abs() < 1e-12);

        let v = point_stable(&p(&[-1.0, 1.0]), &h).unwrap();
        assert_eq!(v.status, Status::Unstable);
        assert!((v.witness.unwrap().root - ComplexValue::new(1.0, 0.0)).norm() < 1e-12);

        let v = point_stable(&p(&[6.0, 11.0, 6.0, 1.0]), &h).unwrap();
        assert_eq!(v.status, Status::RobustlyStable);
        assert!((v.margin.unwrap() - 1.0).abs() < 1e-9);

        assert_eq!(point_stable(&p(&[0.0]), &h), Err(Error::ZeroPolynomial));
        let v = point_stable(&p(&[3.0]), &h).unwrap();
        assert_eq!((v.status, v.margin), (Status::RobustlyStable, None));
    }

    #[test]
    fn routh_examples() {
        assert!(hurwitz_algebraic(&p(&[1.0, 1.0, 1.0])).unwrap());
        assert!(!hurwitz_algebraic(&p(&[1.0, 0.0, 1.0])).unwrap());
        assert!(!hurwitz_algebraic(&p(&[1.0, 1.0, 1.0, 1.0])).unwrap());
        assert!(matches!(routh_table(&p(&[1.0, 1.0, 1.0, 1.0])), Err(Error::IndeterminateRouthRow { row: 2 })));
        assert!(hurwitz_algebraic(&p(&[6.0, 11.0, 6.0, 1.0])).unwrap());
        // negative leading coefficient is normalized
        assert!(hurwitz_algebraic(&p(&[-6.0, -11.0, -6.0, -1.0])).unwrap());
        assert!(hurwitz_algebraic(&p(&[2.0])).unwrap());
        // (s - 1)(s + 2)(s + 3): one right-half-plane root
        let t = routh_table(&p(&[-6.0, 1.0, 4.0, 1.0])).unwrap();
        assert_eq!(t.sign_changes(), 1);
    }

    #[test]
    fn hull_distance_examples() {
        let c = |re, im| ComplexValue::new(re, im);
        assert_eq!(hull_distance(&[c(3.0, 4.0)]), 5.0);
        assert_eq!(hull_distance(&[c(1.0, 1.0), c(-1.0, 1.0), c(0.0, -1.0)]), 0.0);
        assert!((hull_distance(&[c(1.0, -1.0), c(1.0, 1.0), c(2.0, 0.0)]) - 1.0).abs() < 1e-15);
        assert!((hull_distance(&[c(-1.0, 2.0), c(1.0, 2.0)]) - 2.0).abs() < 1e-15);
        // collinear through the origin
        assert_eq!(hull_distance(&[c(-1.0, -1.0), c(2.0, 2.0), c(0.5, 0.5)]), 0.0);
    }

    #[test]
    fn segment_examples() {
        let h = Region::HurwitzHalfPlane;
        let fixed = EdgeSegment::new(p(&[1.0, 1.0]), p(&[1.0, 1.0]), (0, 1));
        assert_eq!(segment_stable(&fixed, &h, &tol()).status, Status::RobustlyStable);

        let s = EdgeSegment::new(p(&[1.0, 2.0, 1.0]), p(&[4.0, 3.0, 1.0]), (0, 1));
        assert_eq!(segment_stable(&s, &h, &tol()).status, Status::RobustlyStable);

        let drop = EdgeSegment::new(p(&[1.0, 1.0]), p(&[1.0, 1.0, 1.0]), (0, 1));
        assert_eq!(segment_stable(&drop, &h, &tol()).status, Status::Degenerate);

        let flip = EdgeSegment::new(p(&[1.0, 1.0]), p(&[1.0, -1.0]), (0, 1));
        assert_eq!(segment_stable(&flip, &h, &tol()).status, Status::Degenerate);
    }

    #[test]
    fn segment_finds_interior_crossing() {
        // s^3 + a s^2 + b s + c is Hurwitz iff a, b, c > 0 and a b > c
        let p0 = p(&[0.005, 0.1, 0.1, 1.0]);
        let p1 = p(&[8.0, 3.0, 3.0, 1.0]);
        assert!(hurwitz_algebraic(&p0).unwrap() && hurwitz_algebraic(&p1).unwrap());
        let seg = EdgeSegment::new(p0, p1, (0, 1));
        let v = segment_stable(&seg, &Region::HurwitzHalfPlane, &tol());
        assert_eq!(v.status, Status::Unstable);
        let w = v.witness.unwrap();
        assert!(w.lambda[0] > 0.0 && w.lambda[0] < 1.0);
        let m = worst_root(&seg.at(w.lambda[0]), &Region::HurwitzHalfPlane).unwrap().unwrap();
        assert!(m.0 < 0.0);
    }

    #[test]
    fn box_k0_is_point_test() {
        let q = p(&[6.0, 11.0, 6.0, 1.0]);
        let v = box_stable(&ParametricDeterminant::constant(q.clone()), &Region::HurwitzHalfPlane, &tol());
        assert_eq!(v, point_stable(&q, &Region::HurwitzHalfPlane).unwrap());
    }

    #[test]
    fn box_flags_degree_drop() {
        let pd = ParametricDeterminant::from_terms(1, vec![p(&[1.0, 1.0]), p(&[0.0, -2.0])]);
        let v = box_stable(&pd, &Region::HurwitzHalfPlane, &tol());
        assert_eq!((v.status, v.reason), (Status::Degenerate, Reason::DegreeDrop));
    }

    #[test]
    fn box_finds_interior_instability() {
        let p0 = p(&[0.005, 0.1, 0.1, 1.0]);
        let p1 = p(&[8.0, 3.0, 3.0, 1.0]);
        let pd = ParametricDeterminant::from_terms(1, vec![p0.clone(), &p1 - &p0]);
        let v = box_stable(&pd, &Region::HurwitzHalfPlane, &tol());
        assert_eq!(v.status, Status::Unstable);
        let w = v.witness.unwrap();
        let m = worst_root(&pd.eval_poly(&w.lambda).unwrap(), &Region::HurwitzHalfPlane).unwrap().unwrap();
        assert!(reproduces(m.0, m.1));
    }

    #[test]
    fn disk_segment_and_box() {
        let d = Region::unit_disk();
        // roots 0.5 and -0.5 moving to 0.2 and -0.3
        let seg = EdgeSegment::new(p(&[-0.25, 0.0, 1.0]), p(&[-0.06, 0.1, 1.0]), (0, 1));
        assert_eq!(segment_stable(&seg, &d, &tol()).status, Status::RobustlyStable);
        let pd = ParametricDeterminant::from_terms(1, vec![seg.p0.clone(), &seg.p1 - &seg.p0]);
        assert_eq!(box_stable(&pd, &d, &tol()).status, Status::RobustlyStable);
        // roots pass through -1.2 at one end
        let seg = EdgeSegment::new(p(&[-0.25, 0.0, 1.0]), p(&[1.44, 2.4, 1.0]), (0, 1));
        assert_eq!(segment_stable(&seg, &d, &tol()).status, Status::Unstable);
    }

    #[test]
    fn status_dominance() {
        use Status::*;
        assert_eq!(RobustlyStable.dominant(Inconclusive), Inconclusive);
        assert_eq!(Inconclusive.dominant(Degenerate), Degenerate);
        assert_eq!(Unstable.dominant(Degenerate), Unstable);
        assert_eq!(Degenerate.dominant(RobustlyStable), Degenerate);
    }

    #[test]
    fn tolerances_validate() {
        assert!(Tolerances::default().validate().is_ok());
        let bad = Tolerances { zero_margin: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
