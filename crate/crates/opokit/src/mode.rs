//! Astigmatic Gaussian modes and mode-overlap calculations.
//!
//! A fundamental Gaussian beam along one transverse axis is fully described
//! by its complex beam parameter q = (z - z_waist) + i z_R together with the
//! wavelength in the local medium. [`GaussianMode`] carries one q per
//! transverse plane at a single reference plane, which is enough to describe
//! the simply-astigmatic beams produced by planar ring cavities.
//!
//! Power coupling between two 1-D Gaussians has the closed form
//! |c|^2 = 2 sqrt(Im q1 Im q2) / |q1 - conj(q2)|, which is sech(d/2) with d
//! the hyperbolic (Poincaré upper-half-plane) distance between the two q
//! values. That identity does real work here: the circular beam that best
//! matches an astigmatic mode is the hyperbolic *midpoint* of the two axis
//! parameters, so the optimum is found in closed form rather than by a 2-D
//! search.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::ray::{RayMatrix, TransversePlane};
use crate::scalar::Real;

/// Two-axis Gaussian mode at a reference plane.
///
/// `q` holds the physical (not index-reduced) beam parameter per plane,
/// indexed by [`TransversePlane::index`]; `wavelength` is the wavelength in
/// the medium at the reference plane. All lengths in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMode<T> {
    q: [Complex<T>; 2],
    wavelength: T,
}

impl<T: Real> GaussianMode<T> {
    pub fn new(q_tangential: Complex<T>, q_sagittal: Complex<T>, wavelength: T) -> Result<Self> {
        if !(wavelength > T::zero()) || !wavelength.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "wavelength must be positive and finite, got {wavelength}"
            )));
        }
        for (q, plane) in [q_tangential, q_sagittal].iter().zip(TransversePlane::BOTH) {
            if !(q.im > T::zero()) || !q.re.is_finite() || !q.im.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "beam parameter in the {plane} plane must have positive imaginary part, got {q}"
                )));
            }
        }
        Ok(GaussianMode {
            q: [q_tangential, q_sagittal],
            wavelength,
        })
    }

    /// Circular (stigmatic) mode: identical q on both axes.
    pub fn circular(q: Complex<T>, wavelength: T) -> Result<Self> {
        Self::new(q, q, wavelength)
    }

    pub fn q(&self, plane: TransversePlane) -> Complex<T> {
        self.q[plane.index()]
    }

    pub fn wavelength(&self) -> T {
        self.wavelength
    }

    /// Rayleigh range z_R = Im q.
    pub fn rayleigh_range(&self, plane: TransversePlane) -> T {
        self.q(plane).im
    }

    /// Waist (1/e^2 intensity) radius: w0^2 = lambda z_R / pi.
    pub fn waist_radius(&self, plane: TransversePlane) -> T {
        (self.wavelength * self.q(plane).im / T::PI()).sqrt()
    }

    /// Signed distance from the reference plane to the waist, positive when
    /// the waist lies downstream of the plane.
    pub fn waist_position(&self, plane: TransversePlane) -> T {
        -self.q(plane).re
    }

    /// Beam (1/e^2 intensity) radius at the reference plane itself:
    /// w^2 = lambda |q|^2 / (pi Im q).
    pub fn beam_radius(&self, plane: TransversePlane) -> T {
        let q = self.q(plane);
        (self.wavelength * q.norm_sqr() / (T::PI() * q.im)).sqrt()
    }

    /// True when the two axis waists agree within relative `tol`.
    pub fn is_stigmatic(&self, tol: T) -> bool {
        let wt = self.waist_radius(TransversePlane::Tangential);
        let ws = self.waist_radius(TransversePlane::Sagittal);
        (wt - ws).abs() <= tol * wt.max(ws)
    }

    /// Propagate both axes through per-plane ABCD matrices. The matrices must
    /// describe a path through media with the same index at both ends, so the
    /// stored wavelength stays valid.
    pub fn transform(&self, tangential: &RayMatrix<T>, sagittal: &RayMatrix<T>) -> Result<Self> {
        Self::new(
            tangential.transform_q(self.q(TransversePlane::Tangential)),
            sagittal.transform_q(self.q(TransversePlane::Sagittal)),
            self.wavelength,
        )
    }
}

/// Hyperbolic distance between two beam parameters in the upper half-plane:
/// cosh d = 1 + |q1 - q2|^2 / (2 Im q1 Im q2).
pub fn hyperbolic_distance<T: Real>(q1: Complex<T>, q2: Complex<T>) -> T {
    let two = T::of(2.0);
    let arg = T::one() + (q1 - q2).norm_sqr() / (two * q1.im * q2.im);
    // acosh, stable for arg >= 1
    (arg + (arg * arg - T::one()).max(T::zero()).sqrt()).ln()
}

/// Power coupling between two 1-D Gaussian modes of the same wavelength:
/// |c|^2 = 2 sqrt(Im q1 Im q2) / |q1 - conj(q2)|.
pub fn axis_coupling<T: Real>(q1: Complex<T>, q2: Complex<T>) -> T {
    let two = T::of(2.0);
    two * (q1.im * q2.im).sqrt() / (q1 - q2.conj()).norm()
}

/// Fundamental-mode power coupling of two astigmatic Gaussian modes evaluated
/// at a common reference plane: the product of the per-axis couplings.
pub fn mode_overlap<T: Real>(a: &GaussianMode<T>, b: &GaussianMode<T>) -> Result<T> {
    let rel = (a.wavelength - b.wavelength).abs() / a.wavelength;
    if rel > T::of(1e-9) {
        return Err(Error::WavelengthMismatch {
            a_nm: a.wavelength.to_f64_lossy() * 1e9,
            b_nm: b.wavelength.to_f64_lossy() * 1e9,
        });
    }
    Ok(TransversePlane::BOTH
        .iter()
        .map(|&p| axis_coupling(a.q(p), b.q(p)))
        .product())
}

/// Midpoint of the hyperbolic geodesic between two upper-half-plane points.
fn geodesic_midpoint<T: Real>(q1: Complex<T>, q2: Complex<T>) -> Complex<T> {
    let dx = q1.re - q2.re;
    let scale = q1.norm().max(q2.norm());
    if dx.abs() <= T::of(1e-14) * scale {
        // Vertical geodesic: geometric mean of the imaginary parts.
        return Complex::new((q1.re + q2.re) / T::of(2.0), (q1.im * q2.im).sqrt());
    }
    // Half-circle centred on the real axis at xc with radius r.
    let xc = (q1.norm_sqr() - q2.norm_sqr()) / (T::of(2.0) * dx);
    let r = (q1 - Complex::new(xc, T::zero())).norm();
    let phi1 = q1.im.atan2(q1.re - xc);
    let phi2 = q2.im.atan2(q2.re - xc);
    // Arc length parameter along the geodesic is ln tan(phi/2); average it.
    let t = ((phi1 / T::of(2.0)).tan().ln() + (phi2 / T::of(2.0)).tan().ln()) / T::of(2.0);
    let phi_m = T::of(2.0) * t.exp().atan();
    Complex::new(xc + r * phi_m.cos(), r * phi_m.sin())
}

/// Best achievable power coupling between an astigmatic mode and *any*
/// circular Gaussian beam of the same wavelength, together with the optimal
/// circular mode.
///
/// The per-axis coupling is sech(d/2) in the hyperbolic metric, so the
/// product over both axes is maximised at the geodesic midpoint of the two
/// axis parameters, where it equals sech^2(d12/4).
pub fn best_circular_overlap<T: Real>(mode: &GaussianMode<T>) -> (T, GaussianMode<T>) {
    let qt = mode.q(TransversePlane::Tangential);
    let qs = mode.q(TransversePlane::Sagittal);
    let d = hyperbolic_distance(qt, qs);
    let qm = geodesic_midpoint(qt, qs);
    let quarter = d / T::of(4.0);
    let overlap = quarter.cosh().powi(-2);
    let best = GaussianMode::circular(qm, mode.wavelength())
        .expect("midpoint of upper-half-plane points stays in the upper half-plane");
    (overlap, best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LAMBDA: f64 = 860e-9;

    fn q(re_mm: f64, zr_mm: f64) -> Complex<f64> {
        Complex::new(re_mm * 1e-3, zr_mm * 1e-3)
    }

    #[test]
    fn identical_modes_couple_perfectly() {
        let m = GaussianMode::new(q(-2.0, 4.1), q(1.0, 3.7), LAMBDA).unwrap();
        let ov = mode_overlap(&m, &m).unwrap();
        assert!((ov - 1.0).abs() < 1e-12, "overlap {ov}");
    }

    #[test]
    fn overlap_is_symmetric_and_below_one() {
        let a = GaussianMode::new(q(-2.0, 4.1), q(1.0, 3.7), LAMBDA).unwrap();
        let b = GaussianMode::new(q(0.5, 5.0), q(-0.3, 2.9), LAMBDA).unwrap();
        let ab = mode_overlap(&a, &b).unwrap();
        let ba = mode_overlap(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-14);
        assert!(ab < 1.0 && ab > 0.0);
    }

    #[test]
    fn wavelength_mismatch_is_rejected() {
        let a = GaussianMode::new(q(0.0, 4.0), q(0.0, 4.0), 860e-9).unwrap();
        let b = GaussianMode::new(q(0.0, 4.0), q(0.0, 4.0), 1064e-9).unwrap();
        assert!(matches!(
            mode_overlap(&a, &b),
            Err(Error::WavelengthMismatch { .. })
        ));
    }

    #[test]
    fn waist_geometry_reference_case() {
        // w0 = 30 um at 860 nm: z_R = pi w0^2 / lambda.
        let w0 = 30e-6f64;
        let zr = std::f64::consts::PI * w0 * w0 / LAMBDA;
        let m = GaussianMode::new(Complex::new(0.0, zr), Complex::new(-0.01, zr), LAMBDA).unwrap();
        assert!((m.waist_radius(TransversePlane::Tangential) - w0).abs() < 1e-12);
        // Sagittal waist sits 10 mm downstream of the plane.
        assert!((m.waist_position(TransversePlane::Sagittal) - 0.01).abs() < 1e-15);
        // At the plane the sagittal beam is wider than at its waist.
        assert!(m.beam_radius(TransversePlane::Sagittal) > w0);
        assert!(
            (m.beam_radius(TransversePlane::Tangential) - w0).abs() < 1e-12,
            "at the waist the beam radius equals the waist radius"
        );
    }

    #[test]
    fn stigmatic_mode_couples_perfectly_to_itself_as_circular() {
        let m = GaussianMode::new(q(0.3, 6.0), q(0.3, 6.0), LAMBDA).unwrap();
        let (ov, best) = best_circular_overlap(&m);
        assert!((ov - 1.0).abs() < 1e-12);
        assert!((best.q(TransversePlane::Tangential) - q(0.3, 6.0)).norm() < 1e-9);
    }

    #[test]
    fn best_circular_beats_naive_candidates() {
        let m = GaussianMode::new(q(-1.0, 4.0), q(2.0, 7.0), LAMBDA).unwrap();
        let (ov, best) = best_circular_overlap(&m);
        // The optimum matches its own claimed value...
        let direct = mode_overlap(&m, &best).unwrap();
        assert!((ov - direct).abs() < 1e-10, "{ov} vs {direct}");
        // ...and beats circular modes built from either axis or the mean.
        for cand in [
            q(-1.0, 4.0),
            q(2.0, 7.0),
            q(0.5, 5.5),
            q(0.5, (4.0f64 * 7.0).sqrt()),
        ] {
            let c = GaussianMode::circular(cand, LAMBDA).unwrap();
            let o = mode_overlap(&m, &c).unwrap();
            assert!(o <= ov + 1e-12, "candidate {cand} gives {o} > {ov}");
        }
    }

    fn arb_q() -> impl Strategy<Value = Complex<f64>> {
        (-20e-3f64..20e-3, 0.5e-3f64..30e-3).prop_map(|(x, y)| Complex::new(x, y))
    }

    fn arb_abcd() -> impl Strategy<Value = RayMatrix<f64>> {
        (-30.0f64..30.0, 0.001f64..0.2, -30.0f64..30.0).prop_map(|(p1, l, p2)| {
            RayMatrix::focusing(p2) * RayMatrix::propagation(l) * RayMatrix::focusing(p1)
        })
    }

    proptest! {
        // Coupling of two 1-D modes is unchanged when both propagate through
        // the same lossless ABCD system.
        #[test]
        fn axis_coupling_invariant_under_joint_propagation(
            q1 in arb_q(), q2 in arb_q(), m in arb_abcd()
        ) {
            let before = axis_coupling(q1, q2);
            let after = axis_coupling(m.transform_q(q1), m.transform_q(q2));
            prop_assert!((before - after).abs() < 1e-9, "{before} vs {after}");
        }

        // Hyperbolic identity: per-axis power coupling equals sech(d/2).
        #[test]
        fn coupling_matches_hyperbolic_distance(q1 in arb_q(), q2 in arb_q()) {
            let c = axis_coupling(q1, q2);
            let d = hyperbolic_distance(q1, q2);
            prop_assert!((c - (d / 2.0).cosh().recip()).abs() < 1e-10);
        }

        // The geodesic midpoint is equidistant from both endpoints.
        #[test]
        fn midpoint_bisects(q1 in arb_q(), q2 in arb_q()) {
            let m = geodesic_midpoint(q1, q2);
            let d = hyperbolic_distance(q1, q2);
            let d1 = hyperbolic_distance(q1, m);
            let d2 = hyperbolic_distance(q2, m);
            prop_assert!((d1 - d2).abs() < 1e-9 * (1.0 + d));
            prop_assert!((d1 + d2 - d).abs() < 1e-9 * (1.0 + d));
        }

        // Shrinking one waist away from a matched pair only loses coupling.
        #[test]
        fn coupling_decreases_with_mismatch(zr in 1e-3f64..20e-3, s in 1.01f64..3.0) {
            let q1 = Complex::new(0.0, zr);
            let base = axis_coupling(q1, q1);
            let worse = axis_coupling(q1, Complex::new(0.0, zr / s));
            let worst = axis_coupling(q1, Complex::new(0.0, zr / (s * s)));
            prop_assert!(base >= worse && worse > worst);
        }

        // best_circular_overlap is never beaten by random circular probes.
        #[test]
        fn best_circular_is_an_upper_bound(
            qt in arb_q(), qs in arb_q(), probe in arb_q()
        ) {
            let m = GaussianMode::new(qt, qs, LAMBDA).unwrap();
            let (best, _) = best_circular_overlap(&m);
            let c = GaussianMode::circular(probe, LAMBDA).unwrap();
            let o = mode_overlap(&m, &c).unwrap();
            prop_assert!(o <= best + 1e-10, "probe {probe}: {o} > {best}");
        }
    }
}
