//! Determinants of polynomial matrices, concrete and multi-affine parametric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{ComplexValue, Polynomial, NORMALIZE_REL_TOL};

/// Square matrix of polynomials, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyMatrix {
    n: usize,
    cells: Vec<Polynomial>,
}

impl PolyMatrix {
    pub fn new(n: usize, cells: Vec<Polynomial>) -> Result<Self> {
        if n == 0 || cells.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: cells.len() });
        }
        Ok(Self { n, cells })
    }

    pub fn from_rows(rows: Vec<Vec<Polynomial>>) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: bad.len() });
        }
        Self::new(n, rows.into_iter().flatten().collect())
    }

    pub fn identity(n: usize) -> Self {
        let cells = (0..n * n)
            .map(|k| if k / n == k % n { Polynomial::one() } else { Polynomial::zero() })
            .collect();
        Self { n, cells }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> &Polynomial {
        &self.cells[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, p: Polynomial) {
        self.cells[row * self.n + col] = p;
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        for c in 0..self.n {
            self.cells.swap(a * self.n + c, b * self.n + c);
        }
    }

    pub fn swap_cols(&mut self, a: usize, b: usize) {
        for r in 0..self.n {
            self.cells.swap(r * self.n + a, r * self.n + b);
        }
    }

    pub fn rows(&self) -> Vec<Vec<Polynomial>> {
        self.cells.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    /// Determinant by Laplace expansion memoized over column subsets.
    pub fn det(&self) -> Polynomial {
        det_matrix(self)
    }
}

/// Exact determinant in the polynomial ring: `O(2^n n)` ring operations.
///
/// `minors[mask]` holds the determinant of the leading `popcount(mask)` rows
/// restricted to the columns in `mask`; expansion runs along the last of those rows.
pub fn det_matrix(m: &PolyMatrix) -> Polynomial {
    let n = m.n;
    let mut minors: Vec<Option<Polynomial>> = vec![None; 1 << n];
    minors[0] = Some(Polynomial::one());
    for mask in 1usize..(1 << n) {
        let row = mask.count_ones() as usize - 1;
        let mut acc = Polynomial::zero();
        for col in 0..n {
            if mask & (1 << col) == 0 {
                continue;
            }
            let entry = m.get(row, col);
            if entry.is_zero() {
                continue;
            }
            let rest = mask & !(1 << col);
            let sub = minors[rest].as_ref().unwrap();
            if sub.is_zero() {
                continue;
            }
            let above = (mask >> (col + 1)).count_ones();
            let term = entry * sub;
            acc = if above % 2 == 0 { &acc + &term } else { &acc - &term };
        }
        minors[mask] = Some(acc);
    }
    minors.pop().flatten().unwrap()
}

/// Closed range of a real quantity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffRange {
    pub lo: f64,
    pub hi: f64,
}

impl CoeffRange {
    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn max_abs(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn contains_zero(&self) -> bool {
        self.lo <= 0.0 && self.hi >= 0.0
    }

    /// Smallest `|x|` over the range.
    pub fn min_abs(&self) -> f64 {
        if self.contains_zero() {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }
}

/// `D(s, lambda) = sum over subsets S of c_S(s) * prod_{j in S} lambda_j`.
///
/// Terms are indexed by bitmask: bit `j` of the index selects `lambda_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParametricDeterminant {
    k: usize,
    terms: Vec<Polynomial>,
}

impl ParametricDeterminant {
    pub fn constant(p: Polynomial) -> Self {
        Self { k: 0, terms: vec![p] }
    }

    /// Panics unless `terms.len() == 2^k`.
    pub fn from_terms(k: usize, terms: Vec<Polynomial>) -> Self {
        assert_eq!(terms.len(), 1 << k, "need one term per parameter subset");
        Self { k, terms }
    }

    /// Determinant of `base` with `varying[j] = (row, col, delta)` added as
    /// `lambda_j * delta` to cell `(row, col)`. Columns must be distinct, which
    /// keeps the result multi-affine.
    pub fn from_affine_cells(base: &PolyMatrix, varying: &[(usize, usize, Polynomial)]) -> Self {
        let k = varying.len();
        debug_assert!({
            let mut cols: Vec<usize> = varying.iter().map(|v| v.1).collect();
            cols.sort_unstable();
            cols.windows(2).all(|w| w[0] != w[1])
        });
        // multilinearity in columns: choosing the delta column for j in S
        let terms = (0..1usize << k)
            .map(|mask| {
                let mut m = base.clone();
                for (j, (row, col, delta)) in varying.iter().enumerate() {
                    if mask & (1 << j) != 0 {
                        for r in 0..m.n {
                            let cell = if r == *row { delta.clone() } else { Polynomial::zero() };
                            m.set(r, *col, cell);
                        }
                    }
                }
                det_matrix(&m)
            })
            .collect();
        Self { k, terms }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn terms(&self) -> &[Polynomial] {
        &self.terms
    }

    pub fn term(&self, mask: usize) -> &Polynomial {
        &self.terms[mask]
    }

    /// Member polynomial at `lambda`.
    pub fn eval_poly(&self, lambda: &[f64]) -> Result<Polynomial> {
        if lambda.len() != self.k {
            return Err(Error::DimensionMismatch { expected: self.k, got: lambda.len() });
        }
        let len = self.terms.iter().map(|t| t.coeffs().len()).max().unwrap_or(1);
        let mut out = vec![0.0; len];
        for (mask, t) in self.terms.iter().enumerate() {
            let w: f64 = (0..self.k)
                .filter(|j| mask & (1 << j) != 0)
                .map(|j| lambda[j])
                .product();
            if w == 0.0 {
                continue;
            }
            for (o, c) in out.iter_mut().zip(t.coeffs()) {
                *o += w * c;
            }
        }
        Ok(Polynomial::new(out))
    }

    /// `c_S(s)` for every subset.
    pub fn eval_terms(&self, s: ComplexValue) -> Vec<ComplexValue> {
        self.terms.iter().map(|t| t.eval(s)).collect()
    }

    /// `D(s, lambda)` from precomputed term values.
    pub fn eval_from_terms(terms: &[ComplexValue], lambda: &[f64]) -> ComplexValue {
        let mut buf = terms.to_vec();
        collapse(&mut buf, lambda);
        buf[0]
    }

    pub fn eval(&self, s: ComplexValue, lambda: &[f64]) -> ComplexValue {
        Self::eval_from_terms(&self.eval_terms(s), lambda)
    }

    /// Values at every corner of the box `[lo, hi]`, indexed by bitmask
    /// (bit `j` set means `lambda_j = hi[j]`).
    pub fn corner_values(terms: &[ComplexValue], lo: &[f64], hi: &[f64]) -> Vec<ComplexValue> {
        let mut t = terms.to_vec();
        let k = lo.len();
        for j in 0..k {
            let bit = 1 << j;
            for mask in 0..t.len() {
                if mask & bit == 0 {
                    let a = t[mask];
                    let b = t[mask | bit];
                    t[mask] = a + b * lo[j];
                    t[mask | bit] = a + b * hi[j];
                }
            }
        }
        t
    }

    /// Exact range of each coefficient over `[0,1]^k`, by scanning box corners.
    pub fn coefficient_box(&self) -> Vec<CoeffRange> {
        let len = self.terms.iter().map(|t| t.coeffs().len()).max().unwrap_or(1);
        (0..len)
            .map(|l| {
                let mut vals: Vec<f64> = self.terms.iter().map(|t| t.coeff(l)).collect();
                // subset-sum transform: vals[mask] = sum over S within mask of c_S
                for j in 0..self.k {
                    let bit = 1 << j;
                    for mask in 0..vals.len() {
                        if mask & bit != 0 {
                            vals[mask] += vals[mask ^ bit];
                        }
                    }
                }
                let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                CoeffRange { lo, hi }
            })
            .collect()
    }

    /// Highest power whose coefficient is not identically negligible over the box.
    pub fn degree(&self) -> Option<usize> {
        let boxes = self.coefficient_box();
        let scale = boxes.iter().fold(0.0_f64, |m, b| m.max(b.max_abs()));
        if scale == 0.0 {
            return None;
        }
        boxes
            .iter()
            .rposition(|b| b.max_abs() > NORMALIZE_REL_TOL * scale)
    }
}

/// Evaluates the multi-affine form in place; afterwards `buf[0]` holds the value.
fn collapse(buf: &mut [ComplexValue], lambda: &[f64]) {
    for (j, &l) in lambda.iter().enumerate() {
        let bit = 1 << j;
        for mask in 0..buf.len() {
            if mask & bit == 0 {
                let b = buf[mask | bit];
                buf[mask] += b * l;
            }
        }
    }
}
