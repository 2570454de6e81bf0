//! Paraxial ray-transfer (ABCD) matrices.
//!
//! A 2x2 real matrix maps the transverse ray vector (y, u) across an optical
//! element, with u the *reduced* slope n·dy/dz. In this convention every
//! passive element -- including a dielectric slab -- has unit determinant,
//! and the complex beam parameter transported by [`RayMatrix::transform_q`]
//! is the reduced q̃ = q/n. Conversions between q̃ and the physical q happen
//! where a beam is evaluated inside a medium, not here.
//!
//! Ring cavities with out-of-plane-free geometry separate into two
//! independent 1-D problems, one per transverse plane; [`TransversePlane`]
//! labels which one a matrix (or a derived quantity) belongs to.

use std::fmt;
use std::ops::Mul;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Transverse plane of an astigmatic system.
///
/// `Tangential` is the plane of incidence (in-plane for a planar ring),
/// `Sagittal` the plane perpendicular to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransversePlane {
    Tangential,
    Sagittal,
}

impl TransversePlane {
    pub const BOTH: [TransversePlane; 2] = [TransversePlane::Tangential, TransversePlane::Sagittal];

    /// Index for plane-keyed arrays: tangential = 0, sagittal = 1.
    pub fn index(self) -> usize {
        match self {
            TransversePlane::Tangential => 0,
            TransversePlane::Sagittal => 1,
        }
    }
}

impl fmt::Display for TransversePlane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransversePlane::Tangential => write!(f, "tangential"),
            TransversePlane::Sagittal => write!(f, "sagittal"),
        }
    }
}

/// 2x2 ray-transfer matrix [[a, b], [c, d]].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayMatrix<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
}

impl<T: Real> RayMatrix<T> {
    pub fn identity() -> Self {
        RayMatrix {
            a: T::one(),
            b: T::zero(),
            c: T::zero(),
            d: T::one(),
        }
    }

    /// Propagation over reduced length `l / n` of homogeneous medium.
    pub fn propagation(reduced_length: T) -> Self {
        RayMatrix {
            a: T::one(),
            b: reduced_length,
            c: T::zero(),
            d: T::one(),
        }
    }

    /// Thin lens (or equivalent mirror) of focal length `f`.
    pub fn thin_lens(f: T) -> Self {
        RayMatrix {
            a: T::one(),
            b: T::zero(),
            c: -f.recip(),
            d: T::one(),
        }
    }

    /// Focusing element of power `p = 1/f`; tolerates p = 0 (flat).
    pub fn focusing(power: T) -> Self {
        RayMatrix {
            a: T::one(),
            b: T::zero(),
            c: -power,
            d: T::one(),
        }
    }

    pub fn det(&self) -> T {
        self.a * self.d - self.b * self.c
    }

    /// Half trace m = (A + D)/2; the resonator is stable for |m| < 1.
    pub fn half_trace(&self) -> T {
        (self.a + self.d) / T::of(2.0)
    }

    /// Bilinear (Möbius) action on the reduced complex beam parameter:
    /// q̃' = (A q̃ + B) / (C q̃ + D).
    pub fn transform_q(&self, q: Complex<T>) -> Complex<T> {
        let num = q * self.a + self.b;
        let den = q * self.c + self.d;
        num / den
    }
}

/// Matrix product; `m2 * m1` applies `m1` first.
impl<T: Real> Mul for RayMatrix<T> {
    type Output = RayMatrix<T>;

    fn mul(self, rhs: RayMatrix<T>) -> RayMatrix<T> {
        RayMatrix {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn identity_is_neutral() {
        let m = RayMatrix {
            a: 0.3,
            b: 1.7,
            c: -0.2,
            d: 2.1,
        };
        let i = RayMatrix::identity();
        assert_eq!(i * m, m);
        assert_eq!(m * i, m);
    }

    #[test]
    fn lens_then_space_composition() {
        // Space L after lens f: [[1,L],[0,1]] [[1,0],[-1/f,1]].
        let f = 0.25;
        let l = 0.1;
        let m = RayMatrix::propagation(l) * RayMatrix::thin_lens(f);
        assert!(close(m.a, 1.0 - l / f, 1e-15));
        assert!(close(m.b, l, 1e-15));
        assert!(close(m.c, -1.0 / f, 1e-15));
        assert!(close(m.d, 1.0, 1e-15));
    }

    #[test]
    fn q_through_free_space_translates() {
        let q = Complex::new(-0.05f64, 0.012);
        let m = RayMatrix::propagation(0.03);
        let q2 = m.transform_q(q);
        assert!(close(q2.re, q.re + 0.03, 1e-15));
        assert!(close(q2.im, q.im, 1e-15));
    }

    fn arb_unimodular() -> impl Strategy<Value = RayMatrix<f64>> {
        // Build from elementary factors so det == 1 holds by construction.
        (-0.5f64..0.5, 0.001f64..0.2, -0.5f64..0.5, 0.001f64..0.2).prop_map(|(p1, l1, p2, l2)| {
            RayMatrix::propagation(l2)
                * RayMatrix::focusing(p2)
                * RayMatrix::propagation(l1)
                * RayMatrix::focusing(p1)
        })
    }

    proptest! {
        #[test]
        fn det_multiplicative(m1 in arb_unimodular(), m2 in arb_unimodular()) {
            let prod = m2 * m1;
            prop_assert!(close(prod.det(), m1.det() * m2.det(), 1e-12));
        }

        #[test]
        fn composition_associative(
            m1 in arb_unimodular(),
            m2 in arb_unimodular(),
            m3 in arb_unimodular(),
        ) {
            let left = (m3 * m2) * m1;
            let right = m3 * (m2 * m1);
            prop_assert!(close(left.a, right.a, 1e-12));
            prop_assert!(close(left.b, right.b, 1e-12));
            prop_assert!(close(left.c, right.c, 1e-12));
            prop_assert!(close(left.d, right.d, 1e-12));
        }

        // Möbius action composes: (M2 M1) q == M2 (M1 q).
        #[test]
        fn q_action_composes(m1 in arb_unimodular(), m2 in arb_unimodular()) {
            let q = Complex::new(-0.02f64, 0.008);
            let once = (m2 * m1).transform_q(q);
            let twice = m2.transform_q(m1.transform_q(q));
            prop_assert!((once - twice).norm() < 1e-10);
        }
    }
}
