//! Dense real-coefficient univariate polynomials.
//!
//! Coefficients are stored in ascending order: `coeffs[i]` multiplies `s^i`.
//! Every constructor normalizes, dropping trailing coefficients that are
//! negligible relative to the largest one; the zero polynomial is `[0.0]`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Evaluation codomain for boundary sweeps and root locations.
pub type ComplexValue = Complex64;

/// Relative threshold below which trailing coefficients are dropped.
pub const NORMALIZE_REL_TOL: f64 = 1e-12;

/// Scaled residual accepted for a computed root.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-9;

const ABERTH_MAX_ITER: usize = 500;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Polynomial {
    coeffs: Vec<f64>,
    truncated: bool,
}

impl PartialEq for Polynomial {
    fn eq(&self, other: &Self) -> bool {
        self.coeffs == other.coeffs
    }
}

impl TryFrom<Vec<f64>> for Polynomial {
    type Error = Error;

    fn try_from(coeffs: Vec<f64>) -> Result<Self> {
        Polynomial::try_new(coeffs)
    }
}

impl From<Polynomial> for Vec<f64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl Polynomial {
    /// Builds a normalized polynomial from ascending coefficients.
    ///
    /// Panics on an empty slice; use [`Polynomial::try_new`] for untrusted input.
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        Self::try_new(coeffs).expect("polynomial needs at least one coefficient")
    }

    pub fn try_new(coeffs: impl Into<Vec<f64>>) -> Result<Self> {
        let coeffs = coeffs.into();
        if coeffs.is_empty() {
            return Err(Error::EmptyCoefficients);
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCoefficient);
        }
        Ok(Self::normalized(coeffs))
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![0.0], truncated: false }
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::normalized(vec![c])
    }

    /// `s - root` for a real root.
    pub fn linear_factor(root: f64) -> Self {
        Self::normalized(vec![-root, 1.0])
    }

    /// Monic polynomial with the given real roots.
    pub fn from_real_roots(roots: &[f64]) -> Self {
        roots
            .iter()
            .fold(Self::one(), |acc, &r| &acc * &Self::linear_factor(r))
    }

    fn normalized(mut coeffs: Vec<f64>) -> Self {
        let scale = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        let floor = NORMALIZE_REL_TOL * scale;
        let mut truncated = false;
        while coeffs.len() > 1 {
            let last = *coeffs.last().unwrap();
            if last == 0.0 {
                coeffs.pop();
            } else if last.abs() <= floor {
                coeffs.pop();
                truncated = true;
            } else {
                break;
            }
        }
        if coeffs.len() == 1 && coeffs[0].abs() <= floor && coeffs[0] != 0.0 {
            coeffs[0] = 0.0;
            truncated = true;
        }
        Self { coeffs, truncated }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `s^i`, zero past the degree.
    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    /// True when normalization dropped a nonzero (but negligible) leading coefficient.
    pub fn was_truncated(&self) -> bool {
        self.truncated
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    /// Degree of the polynomial; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len).map(|i| self.coeff(i) + other.coeff(i)).collect();
        Self::normalized(coeffs)
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len).map(|i| self.coeff(i) - other.coeff(i)).collect();
        Self::normalized(coeffs)
    }

    pub fn scale(&self, c: f64) -> Polynomial {
        Self::normalized(self.coeffs.iter().map(|x| c * x).collect())
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::normalized(out)
    }

    /// `(1 - t) * self + t * other`.
    pub fn lerp(&self, other: &Polynomial, t: f64) -> Polynomial {
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len)
            .map(|i| (1.0 - t) * self.coeff(i) + t * other.coeff(i))
            .collect();
        Self::normalized(coeffs)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() == 1 {
            return Self::zero();
        }
        Self::normalized(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| i as f64 * c)
                .collect(),
        )
    }

    /// Horner evaluation at a complex point.
    pub fn eval(&self, z: ComplexValue) -> ComplexValue {
        self.coeffs
            .iter()
            .rev()
            .fold(ComplexValue::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// `sum |c_i| |z|^i`, the natural scale for residuals at `z`.
    pub fn magnitude_at(&self, z: ComplexValue) -> f64 {
        let r = z.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c.abs())
    }

    /// Coefficients of `p(s + shift)`.
    pub fn taylor_shift(&self, shift: f64) -> Polynomial {
        let mut c = self.coeffs.clone();
        let n = c.len();
        for i in 0..n {
            for j in (i..n - 1).rev() {
                c[j] += shift * c[j + 1];
            }
        }
        Self::normalized(c)
    }

    /// `1 + max_{i<d} |c_i| / |c_d|`; every root lies inside this radius.
    pub fn cauchy_root_bound(&self) -> Result<f64> {
        if self.is_zero() {
            return Err(Error::ZeroLeadingCoefficient);
        }
        let lead = self.leading().abs();
        let d = self.degree();
        let num = self.coeffs[..d].iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        Ok(1.0 + num / lead)
    }

    /// All complex roots with multiplicity.
    pub fn roots(&self) -> Result<Vec<ComplexValue>> {
        if self.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        let coeffs: Vec<ComplexValue> =
            self.coeffs.iter().map(|&c| ComplexValue::new(c, 0.0)).collect();
        Ok(complex_roots(&coeffs))
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if *c == 0.0 && !(self.is_zero() && i == 0) {
                continue;
            }
            if !first {
                f.write_str(if *c < 0.0 { " - " } else { " + " })?;
            } else if *c < 0.0 {
                f.write_str("-")?;
            }
            let a = c.abs();
            match i {
                0 => write!(f, "{a}")?,
                1 => write!(f, "{a}s")?,
                _ => write!(f, "{a}s^{i}")?,
            }
            first = false;
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        Polynomial::add(self, rhs)
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        Polynomial::sub(self, rhs)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        Polynomial::mul(self, rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

fn horner_with_derivative(coeffs: &[ComplexValue], z: ComplexValue) -> (ComplexValue, ComplexValue) {
    let mut p = ComplexValue::new(0.0, 0.0);
    let mut dp = ComplexValue::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

fn residual_scale(coeffs: &[ComplexValue], z: ComplexValue) -> f64 {
    let r = z.norm();
    coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
}

/// Roots of a complex-coefficient polynomial (ascending coefficients) by
/// Aberth–Ehrlich simultaneous iteration followed by one Newton refinement
/// per root. Exact zero low-order coefficients yield exact zero roots.
pub fn complex_roots(coeffs: &[ComplexValue]) -> Vec<ComplexValue> {
    let mut hi = coeffs.len();
    while hi > 0 && coeffs[hi - 1] == ComplexValue::new(0.0, 0.0) {
        hi -= 1;
    }
    let lo = coeffs[..hi]
        .iter()
        .position(|c| *c != ComplexValue::new(0.0, 0.0))
        .unwrap_or(hi);
    if hi == 0 {
        return Vec::new();
    }
    let mut roots = vec![ComplexValue::new(0.0, 0.0); lo];
    let core = &coeffs[lo..hi];
    let deg = core.len() - 1;
    match deg {
        0 => return roots,
        1 => {
            roots.push(-core[0] / core[1]);
            return roots;
        }
        _ => {}
    }

    let lead = core[deg];
    let monic: Vec<ComplexValue> = core.iter().map(|c| c / lead).collect();
    let mut z = initial_guesses(&monic);
    aberth_iterate(&monic, &mut z);

    for r in z.iter_mut() {
        polish(core, r);
    }
    roots.extend(z);
    roots
}

/// Starting points on circles whose radii follow the upper convex hull of
/// `(i, log|a_i|)` (the Newton polygon), as in Bini's initialization.
fn initial_guesses(monic: &[ComplexValue]) -> Vec<ComplexValue> {
    let deg = monic.len() - 1;
    let pts: Vec<(f64, f64)> = monic
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|(i, c)| (i as f64, c.norm().ln()))
        .collect();
    // upper hull, monotone chain
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mut guesses = Vec::with_capacity(deg);
    let offset = 0.4;
    for w in hull.windows(2) {
        let (i0, l0) = w[0];
        let (i1, l1) = w[1];
        let count = (i1 - i0) as usize;
        let radius = ((l0 - l1) / (i1 - i0)).exp();
        let base = offset + 2.0 * std::f64::consts::PI * (guesses.len() as f64) / (deg as f64);
        for k in 0..count {
            let angle = base + 2.0 * std::f64::consts::PI * (k as f64) / (count as f64);
            guesses.push(ComplexValue::from_polar(radius, angle));
        }
    }
    guesses
}

fn aberth_iterate(monic: &[ComplexValue], z: &mut [ComplexValue]) {
    let n = z.len();
    let mut done = vec![false; n];
    for _ in 0..ABERTH_MAX_ITER {
        let mut all_done = true;
        for i in 0..n {
            if done[i] {
                continue;
            }
            let zi = z[i];
            let (p, dp) = horner_with_derivative(monic, zi);
            let scale = residual_scale(monic, zi);
            if p.norm() <= f64::EPSILON * scale {
                done[i] = true;
                continue;
            }
            let ratio = p / dp;
            let sum: ComplexValue = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = zi - z[j];
                    if d.norm() == 0.0 {
                        ComplexValue::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let denom = ComplexValue::new(1.0, 0.0) - ratio * sum;
            let step = if denom.norm() == 0.0 || !denom.is_finite() || !ratio.is_finite() {
                // perturb out of a stationary configuration
                ComplexValue::new(1e-3 * (1.0 + zi.norm()), 1e-3)
            } else {
                ratio / denom
            };
            z[i] = zi - step;
            if step.norm() <= 4.0 * f64::EPSILON * z[i].norm().max(f64::MIN_POSITIVE) {
                done[i] = true;
            } else {
                all_done = false;
            }
        }
        if all_done {
            break;
        }
    }
}

/// One Newton step on the unscaled polynomial, kept only if it reduces the residual.
fn polish(coeffs: &[ComplexValue], r: &mut ComplexValue) {
    let (p, dp) = horner_with_derivative(coeffs, *r);
    if dp.norm() == 0.0 || p.norm() == 0.0 {
        return;
    }
    let cand = *r - p / dp;
    let (pc, _) = horner_with_derivative(coeffs, cand);
    if cand.is_finite() && pc.norm() < p.norm() {
        *r = cand;
    }
}
