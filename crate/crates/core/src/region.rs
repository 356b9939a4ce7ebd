//! Stability regions: membership, signed margins and boundary parameterizations.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::det::ParametricDeterminant;
use crate::error::{Error, Result};
use crate::poly::ComplexValue;

/// An open, simply-connected region of the complex plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Region {
    /// `Re s < 0`.
    #[serde(rename = "hurwitz")]
    HurwitzHalfPlane,
    /// `Re s < sigma`.
    #[serde(rename = "shifted")]
    ShiftedHalfPlane { sigma: f64 },
    /// `|s - center| < radius`.
    #[serde(rename = "disk")]
    Disk { center: ComplexValue, radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPoint {
    pub theta: f64,
    pub s: ComplexValue,
}

/// Result of a membership query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Membership {
    pub inside: bool,
    /// Distance to the boundary; negative outside.
    pub margin: f64,
}

/// Boundary parameter interval swept by zero-exclusion tests.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRange {
    pub lo: f64,
    pub hi: f64,
    /// Disk sweeps wrap around: `hi` and `lo` name the same boundary point.
    pub periodic: bool,
}

impl Region {
    pub fn unit_disk() -> Self {
        Region::Disk { center: ComplexValue::new(0.0, 0.0), radius: 1.0 }
    }

    pub fn check(&self) -> Result<()> {
        match *self {
            Region::HurwitzHalfPlane => Ok(()),
            Region::ShiftedHalfPlane { sigma } if sigma.is_finite() => Ok(()),
            Region::ShiftedHalfPlane { .. } => Err(Error::InvalidRegion("shift must be finite".into())),
            Region::Disk { center, radius } => {
                if !(radius.is_finite() && radius > 0.0) {
                    Err(Error::InvalidRegion("disk radius must be positive".into()))
                } else if !center.is_finite() {
                    Err(Error::InvalidRegion("disk center must be finite".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn is_hurwitz(&self) -> bool {
        matches!(self, Region::HurwitzHalfPlane)
    }

    pub fn is_half_plane(&self) -> bool {
        !matches!(self, Region::Disk { .. })
    }

    /// Signed distance from `z` to the boundary, positive inside.
    pub fn margin(&self, z: ComplexValue) -> f64 {
        match *self {
            Region::HurwitzHalfPlane => -z.re,
            Region::ShiftedHalfPlane { sigma } => sigma - z.re,
            Region::Disk { center, radius } => radius - (z - center).norm(),
        }
    }

    pub fn contains(&self, z: ComplexValue) -> Membership {
        let margin = self.margin(z);
        Membership { inside: margin > 0.0, margin }
    }

    pub fn boundary(&self, theta: f64) -> BoundaryPoint {
        let s = match *self {
            Region::HurwitzHalfPlane => ComplexValue::new(0.0, theta),
            Region::ShiftedHalfPlane { sigma } => ComplexValue::new(sigma, theta),
            Region::Disk { center, radius } => center + ComplexValue::from_polar(radius, theta),
        };
        BoundaryPoint { theta, s }
    }

    /// Upper bound on `|ds/dtheta|` along the boundary parameterization.
    pub fn boundary_speed(&self) -> f64 {
        match *self {
            Region::Disk { radius, .. } => radius,
            _ => 1.0,
        }
    }

    /// Largest `|s|` on the boundary for parameters in `[lo, hi]`.
    pub fn boundary_modulus_bound(&self, lo: f64, hi: f64) -> f64 {
        match *self {
            Region::HurwitzHalfPlane => lo.abs().max(hi.abs()),
            Region::ShiftedHalfPlane { sigma } => sigma.hypot(lo.abs().max(hi.abs())),
            Region::Disk { center, radius } => center.norm() + radius,
        }
    }

    /// Boundary parameter range that every family member's boundary roots fall into.
    ///
    /// Half-planes sweep `[0, w]` only: real coefficients make boundary roots
    /// come in conjugate pairs. `w` is the Cauchy bound of the worst member in
    /// the exact coefficient box.
    pub fn sweep_range(&self, pd: &ParametricDeterminant) -> Result<SweepRange> {
        let bound = family_cauchy_bound(pd)?;
        match *self {
            Region::Disk { .. } => Ok(SweepRange { lo: 0.0, hi: TAU, periodic: true }),
            _ => Ok(SweepRange { lo: 0.0, hi: bound, periodic: false }),
        }
    }
}

/// Cauchy bound uniform over the coefficient box of `pd`.
pub fn family_cauchy_bound(pd: &ParametricDeterminant) -> Result<f64> {
    let boxes = pd.coefficient_box();
    let degree = pd.degree().ok_or(Error::DegreeDrop { lo: 0.0, hi: 0.0 })?;
    let lead = boxes[degree];
    if lead.lo <= 0.0 && lead.hi >= 0.0 {
        return Err(Error::DegreeDrop { lo: lead.lo, hi: lead.hi });
    }
    let min_lead = lead.lo.abs().min(lead.hi.abs());
    let num = boxes[..degree]
        .iter()
        .fold(0.0_f64, |m, b| m.max(b.lo.abs()).max(b.hi.abs()));
    Ok(1.0 + num / min_lead)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;
    use std::f64::consts::PI;

    #[test]
    fn contains_examples() {
        let h = Region::HurwitzHalfPlane;
        assert_eq!(h.contains(ComplexValue::new(-1.0, 0.0)), Membership { inside: true, margin: 1.0 });
        let on = h.contains(ComplexValue::new(0.0, 1.0));
        assert!(!on.inside);
        assert_eq!(on.margin, 0.0);
        let d = Region::unit_disk();
        assert_eq!(d.contains(ComplexValue::new(0.5, 0.0)), Membership { inside: true, margin: 0.5 });
        let s = Region::ShiftedHalfPlane { sigma: -0.5 };
        assert_eq!(s.margin(ComplexValue::new(-1.0, 3.0)), 0.5);
        assert!(!s.contains(ComplexValue::new(-0.25, 0.0)).inside);
    }

    #[test]
    fn boundary_examples() {
        assert_eq!(Region::HurwitzHalfPlane.boundary(0.0).s, ComplexValue::new(0.0, 0.0));
        let b = Region::unit_disk().boundary(PI).s;
        assert!((b - ComplexValue::new(-1.0, 0.0)).norm() < 1e-15);
        assert_eq!(
            Region::ShiftedHalfPlane { sigma: -0.5 }.boundary(2.0).s,
            ComplexValue::new(-0.5, 2.0)
        );
    }

    #[test]
    fn boundary_points_have_zero_margin() {
        let regions = [
            Region::HurwitzHalfPlane,
            Region::ShiftedHalfPlane { sigma: 0.7 },
            Region::Disk { center: ComplexValue::new(-0.3, 0.2), radius: 2.5 },
        ];
        for r in regions {
            for i in 0..100 {
                let theta = -10.0 + 0.2 * i as f64;
                assert!(r.margin(r.boundary(theta).s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sweep_range_examples() {
        let pd = ParametricDeterminant::constant(Polynomial::new(vec![1.0, 1.0]));
        let disk = Region::unit_disk().sweep_range(&pd).unwrap();
        assert_eq!((disk.lo, disk.hi), (0.0, TAU));
        let h = Region::HurwitzHalfPlane.sweep_range(&pd).unwrap();
        assert_eq!((h.lo, h.hi), (0.0, 2.0));
    }

    #[test]
    fn sweep_range_rejects_degree_drop() {
        // lead coefficient ranges over [-1, 1]
        let pd = ParametricDeterminant::from_terms(
            1,
            vec![Polynomial::new(vec![1.0, -1.0]), Polynomial::new(vec![0.0, 2.0])],
        );
        assert!(matches!(
            Region::HurwitzHalfPlane.sweep_range(&pd),
            Err(Error::DegreeDrop { .. })
        ));
    }

    #[test]
    fn region_check() {
        assert!(Region::Disk { center: ComplexValue::new(0.0, 0.0), radius: 0.0 }.check().is_err());
        assert!(Region::ShiftedHalfPlane { sigma: f64::NAN }.check().is_err());
        assert!(Region::HurwitzHalfPlane.check().is_ok());
    }

    #[test]
    fn real_polynomials_have_conjugate_root_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let deg = rng.random_range(2..8);
            let c: Vec<f64> = (0..=deg).map(|_| rng.random_range(-5.0..5.0)).collect();
            let p = Polynomial::new(c);
            let roots = p.roots().unwrap();
            for r in &roots {
                let partner = roots
                    .iter()
                    .map(|q| (q - r.conj()).norm())
                    .fold(f64::INFINITY, f64::min);
                assert!(partner < 1e-6 * (1.0 + r.norm()), "{r} has no conjugate partner");
            }
        }
    }
}
