#![allow(dead_code)]

use edgestab::family::{Entry, MatrixFamily};
use edgestab::{Polynomial, Region};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn p(c: &[f64]) -> Polynomial {
    Polynomial::new(c.to_vec())
}

pub fn random_poly(rng: &mut ChaCha8Rng, max_deg: usize, range: f64) -> Polynomial {
    let d = rng.random_range(0..=max_deg);
    Polynomial::new((0..=d).map(|_| rng.random_range(-range..=range)).collect::<Vec<_>>())
}

/// Product of random stable first- and second-order factors.
pub fn hurwitz_poly(rng: &mut ChaCha8Rng, deg: usize) -> Polynomial {
    let mut out = Polynomial::one();
    let mut left = deg;
    while left > 0 {
        if left >= 2 && rng.random_bool(0.5) {
            let b = rng.random_range(0.2..3.0);
            let c = rng.random_range(0.2..3.0);
            out = &out * &p(&[c, b, 1.0]);
            left -= 2;
        } else {
            out = &out * &p(&[rng.random_range(0.2..3.0), 1.0]);
            left -= 1;
        }
    }
    out.scale(rng.random_range(0.5..2.0))
}

pub fn jitter(rng: &mut ChaCha8Rng, q: &Polynomial, eps: f64) -> Polynomial {
    Polynomial::new(q.coeffs().iter().map(|c| c + rng.random_range(-eps..=eps)).collect::<Vec<_>>())
}

/// Diagonally dominant family around Hurwitz diagonal entries.
pub fn near_stable_family(rng: &mut ChaCha8Rng, n: usize, m: usize, eps: f64, off: f64) -> MatrixFamily {
    let entries = (0..n * n)
        .map(|cell| {
            let nominal = if cell / n == cell % n {
                let d = rng.random_range(1..=2);
                hurwitz_poly(rng, d)
            } else {
                random_poly(rng, 1, off)
            };
            Entry::polytope((0..m).map(|_| jitter(rng, &nominal, eps)).collect())
        })
        .collect();
    MatrixFamily::new(n, entries, Region::HurwitzHalfPlane).unwrap()
}

pub fn random_family(rng: &mut ChaCha8Rng, n: usize, m: usize, max_deg: usize) -> MatrixFamily {
    let entries = (0..n * n)
        .map(|_| Entry::polytope((0..m).map(|_| random_poly(rng, max_deg, 5.0)).collect()))
        .collect();
    MatrixFamily::new(n, entries, Region::HurwitzHalfPlane).unwrap()
}
