//! Ring-cavity geometry: round-trip matrices, stability, eigenmodes, scans.
//!
//! A [`CavityLayout`] is an ordered list of optical elements traversed once
//! per round trip, starting and ending at the reference plane. Because the
//! ray matrices use reduced slopes, a dielectric slab of length L and index n
//! contributes [[1, L/n], [0, 1]] and every round trip has determinant 1.
//!
//! Mirrors hit at non-normal incidence act with different effective curvature
//! in the two transverse planes (R cos(aoi) tangentially, R / cos(aoi)
//! sagittally), which is the whole source of astigmatism in a planar ring.
//! All public plane-resolved quantities take a [`TransversePlane`] selector.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mode::GaussianMode;
use crate::ray::{RayMatrix, TransversePlane};
use crate::scalar::Real;
use crate::units::SPEED_OF_LIGHT;

/// One element of a ring-cavity round trip. Lengths in metres, angles in
/// radians. Mirror radius of curvature is positive for a concave surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpticalElement<T> {
    FreeSpace { length: T },
    CurvedMirror { roc: T, aoi: T },
    FlatMirror { aoi: T },
    DielectricSlab { length: T, index: T },
}

impl<T: Real> OpticalElement<T> {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            OpticalElement::FreeSpace { length } => {
                if !(length >= T::zero()) || !length.is_finite() {
                    return bad(format!("free-space length must be >= 0, got {length}"));
                }
            }
            OpticalElement::CurvedMirror { roc, aoi } => {
                if roc == T::zero() || !roc.is_finite() {
                    return bad(format!("mirror ROC must be nonzero, got {roc}"));
                }
                if !(aoi >= T::zero() && aoi < T::FRAC_PI_2()) {
                    return bad(format!(
                        "angle of incidence must lie in [0, pi/2), got {aoi}"
                    ));
                }
            }
            OpticalElement::FlatMirror { aoi } => {
                if !(aoi >= T::zero() && aoi < T::FRAC_PI_2()) {
                    return bad(format!(
                        "angle of incidence must lie in [0, pi/2), got {aoi}"
                    ));
                }
            }
            OpticalElement::DielectricSlab { length, index } => {
                if !(length >= T::zero()) || !length.is_finite() {
                    return bad(format!("slab length must be >= 0, got {length}"));
                }
                if !(index > T::zero()) || !index.is_finite() {
                    return bad(format!("slab index must be positive, got {index}"));
                }
            }
        }
        Ok(())
    }

    /// Geometric length along the optical axis.
    pub fn geometric_length(&self) -> T {
        match *self {
            OpticalElement::FreeSpace { length }
            | OpticalElement::DielectricSlab { length, .. } => length,
            _ => T::zero(),
        }
    }

    /// Optical path length (geometric length times index).
    pub fn optical_length(&self) -> T {
        match *self {
            OpticalElement::FreeSpace { length } => length,
            OpticalElement::DielectricSlab { length, index } => length * index,
            _ => T::zero(),
        }
    }

    /// Effective mirror curvature in the given plane: R cos(aoi) tangential,
    /// R / cos(aoi) sagittal. Only meaningful for curved mirrors.
    pub fn effective_roc(&self, plane: TransversePlane) -> Option<T> {
        match *self {
            OpticalElement::CurvedMirror { roc, aoi } => Some(match plane {
                TransversePlane::Tangential => roc * aoi.cos(),
                TransversePlane::Sagittal => roc / aoi.cos(),
            }),
            _ => None,
        }
    }

    /// Ray-transfer matrix in the given transverse plane.
    pub fn matrix(&self, plane: TransversePlane) -> RayMatrix<T> {
        match *self {
            OpticalElement::FreeSpace { length } => RayMatrix::propagation(length),
            OpticalElement::DielectricSlab { length, index } => {
                RayMatrix::propagation(length / index)
            }
            OpticalElement::FlatMirror { .. } => RayMatrix::identity(),
            OpticalElement::CurvedMirror { .. } => {
                let r_eff = self
                    .effective_roc(plane)
                    .expect("curved mirror has an effective ROC");
                RayMatrix::thin_lens(r_eff / T::of(2.0))
            }
        }
    }
}

/// Output-coupler annotation: which curved mirror light exits through, and
/// the substrate index that turns its back surface into a thin lens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputCoupler<T> {
    pub element: usize,
    pub substrate_index: T,
}

/// Ring-cavity round trip, starting at the reference plane.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityLayout<T> {
    elements: Vec<OpticalElement<T>>,
    /// Vacuum wavelength, metres.
    wavelength: T,
    /// Human-readable description of where the round trip starts.
    reference_plane: String,
    /// Indices of free-space gaps that absorb mirror-spacing adjustments.
    scannable: Vec<usize>,
    output_coupler: Option<OutputCoupler<T>>,
}

impl<T: Real> CavityLayout<T> {
    pub fn new(elements: Vec<OpticalElement<T>>, wavelength: T) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidParameter("layout has no elements".into()));
        }
        if !(wavelength > T::zero()) || !wavelength.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        for e in &elements {
            e.validate()?;
        }
        Ok(CavityLayout {
            elements,
            wavelength,
            reference_plane: "start".into(),
            scannable: Vec::new(),
            output_coupler: None,
        })
    }

    pub fn with_reference_label(mut self, label: impl Into<String>) -> Self {
        self.reference_plane = label.into();
        self
    }

    /// Mark free-space gaps (by element index) as the ones that stretch or
    /// shrink when the curved-mirror spacing is adjusted.
    pub fn with_scannable_gaps(mut self, indices: Vec<usize>) -> Result<Self> {
        for &i in &indices {
            match self.elements.get(i) {
                Some(OpticalElement::FreeSpace { .. }) => {}
                Some(_) => {
                    return Err(Error::InvalidParameter(format!(
                        "scannable element {i} is not a free-space gap"
                    )))
                }
                None => {
                    return Err(Error::InvalidParameter(format!(
                        "scannable element index {i} out of range"
                    )))
                }
            }
        }
        self.scannable = indices;
        Ok(self)
    }

    pub fn with_output_coupler(mut self, element: usize, substrate_index: T) -> Result<Self> {
        match self.elements.get(element) {
            Some(OpticalElement::CurvedMirror { .. }) => {}
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "output coupler index {element} is not a curved mirror"
                )))
            }
        }
        if !(substrate_index > T::one()) {
            return Err(Error::InvalidParameter(format!(
                "output-coupler substrate index must exceed 1, got {substrate_index}"
            )));
        }
        self.output_coupler = Some(OutputCoupler {
            element,
            substrate_index,
        });
        Ok(self)
    }

    pub fn elements(&self) -> &[OpticalElement<T>] {
        &self.elements
    }

    pub fn wavelength(&self) -> T {
        self.wavelength
    }

    pub fn reference_plane(&self) -> &str {
        &self.reference_plane
    }

    pub fn output_coupler(&self) -> Option<OutputCoupler<T>> {
        self.output_coupler
    }

    /// Refractive index of the medium the reference plane sits in (the medium
    /// of the first element if it is a slab, vacuum/air otherwise).
    pub fn index_at_reference(&self) -> T {
        match self.elements.first() {
            Some(OpticalElement::DielectricSlab { index, .. }) => *index,
            _ => T::one(),
        }
    }

    /// Round-trip optical path length (geometric length weighted by index).
    pub fn optical_path_length(&self) -> T {
        self.elements.iter().map(|e| e.optical_length()).sum()
    }

    /// Round-trip geometric length.
    pub fn geometric_length(&self) -> T {
        self.elements.iter().map(|e| e.geometric_length()).sum()
    }

    /// Round-trip ABCD matrix in one transverse plane.
    pub fn roundtrip_matrix(&self, plane: TransversePlane) -> RayMatrix<T> {
        self.elements
            .iter()
            .fold(RayMatrix::identity(), |acc, e| e.matrix(plane) * acc)
    }

    /// Stability parameter m = (A + D)/2 of the round trip; |m| < 1 is stable.
    pub fn stability(&self, plane: TransversePlane) -> T {
        self.roundtrip_matrix(plane).half_trace()
    }

    pub fn is_stable(&self, plane: TransversePlane) -> bool {
        self.stability(plane).abs() < T::one()
    }

    /// Self-consistent reduced beam parameter at the reference plane.
    pub fn eigenmode_q(&self, plane: TransversePlane) -> Result<Complex<T>> {
        let m = self.roundtrip_matrix(plane);
        eigen_q(&m, plane, self.optical_path_length())
    }

    /// Waist radius of the resonant mode in one plane. Uses the reduced-q
    /// identity w^2 = lambda_vac * Im(q_reduced) / pi, valid at any reference
    /// plane regardless of the local medium.
    pub fn eigen_waist(&self, plane: TransversePlane) -> Result<T> {
        let q = self.eigenmode_q(plane)?;
        Ok((self.wavelength * q.im / T::PI()).sqrt())
    }

    /// Full two-axis eigenmode at the reference plane, expressed with the
    /// physical q (= n * q_reduced) and the in-medium wavelength.
    pub fn eigenmode(&self) -> Result<GaussianMode<T>> {
        let n = self.index_at_reference();
        let qt = self.eigenmode_q(TransversePlane::Tangential)? * n;
        let qs = self.eigenmode_q(TransversePlane::Sagittal)? * n;
        GaussianMode::new(qt, qs, self.wavelength / n)
    }

    /// Layout with the round trip re-rooted to start at element `start`
    /// (reference plane moves to just before that element).
    pub fn cycled(&self, start: usize) -> Result<Self> {
        if start >= self.elements.len() {
            return Err(Error::InvalidParameter(format!(
                "cycle start {start} out of range ({} elements)",
                self.elements.len()
            )));
        }
        let mut elements = self.elements[start..].to_vec();
        elements.extend_from_slice(&self.elements[..start]);
        let remap = |i: usize| (i + self.elements.len() - start) % self.elements.len();
        Ok(CavityLayout {
            elements,
            wavelength: self.wavelength,
            reference_plane: format!("{} (cycled to element {start})", self.reference_plane),
            scannable: self.scannable.iter().map(|&i| remap(i)).collect(),
            output_coupler: self.output_coupler.map(|oc| OutputCoupler {
                element: remap(oc.element),
                substrate_index: oc.substrate_index,
            }),
        })
    }

    /// Indices of the curved mirrors, in round-trip order.
    fn curved_mirror_indices(&self) -> Vec<usize> {
        self.elements
            .iter()
            .enumerate()
            .filter_map(|(i, e)| matches!(e, OpticalElement::CurvedMirror { .. }).then_some(i))
            .collect()
    }

    /// The curved-mirror spacing controlled by the scannable gaps: the
    /// geometric length of the round-trip arc between the two curved mirrors
    /// that contains all scannable gaps. `None` if no gaps are marked.
    pub fn mirror_spacing(&self) -> Option<T> {
        let (fixed, scan_len) = self.spacing_parts().ok()?;
        Some(fixed + scan_len)
    }

    /// Split the scannable arc into (fixed geometric length, current total
    /// length of the scannable gaps).
    fn spacing_parts(&self) -> Result<(T, T)> {
        if self.scannable.is_empty() {
            return Err(Error::InvalidParameter(
                "layout has no scannable gaps; mark the adjustable free-space elements".into(),
            ));
        }
        let mirrors = self.curved_mirror_indices();
        if mirrors.len() != 2 {
            return Err(Error::InvalidParameter(format!(
                "mirror-spacing adjustment needs exactly 2 curved mirrors, layout has {}",
                mirrors.len()
            )));
        }
        // Two arcs between the mirrors: [m0+1, m1) and ([m1+1, end) ++ [0, m0)).
        let n = self.elements.len();
        let inner: Vec<usize> = (mirrors[0] + 1..mirrors[1]).collect();
        let outer: Vec<usize> = (mirrors[1] + 1..n).chain(0..mirrors[0]).collect();
        let arc = if self.scannable.iter().all(|i| inner.contains(i)) {
            inner
        } else if self.scannable.iter().all(|i| outer.contains(i)) {
            outer
        } else {
            return Err(Error::InvalidParameter(
                "scannable gaps must all lie on the same arc between the curved mirrors".into(),
            ));
        };
        let mut fixed = T::zero();
        let mut scan_len = T::zero();
        for &i in &arc {
            let l = self.elements[i].geometric_length();
            if self.scannable.contains(&i) {
                scan_len += l;
            } else {
                fixed += l;
            }
        }
        Ok((fixed, scan_len))
    }

    /// Layout with the curved-mirror spacing set to `distance`, distributing
    /// the adjustable length equally over the scannable gaps.
    pub fn with_mirror_spacing(&self, distance: T) -> Result<Self> {
        let (fixed, _) = self.spacing_parts()?;
        if !(distance > fixed) {
            return Err(Error::InvalidParameter(format!(
                "mirror spacing {distance} must exceed the fixed arc length {fixed}"
            )));
        }
        let per_gap = (distance - fixed) / T::from_usize(self.scannable.len()).unwrap();
        let mut out = self.clone();
        for &i in &self.scannable {
            out.elements[i] = OpticalElement::FreeSpace { length: per_gap };
        }
        Ok(out)
    }
}

/// Eigen-q of a round-trip matrix: the fixed point of the Möbius action with
/// positive imaginary part,
/// q = (A - D)/(2C) + i sqrt(4 - (A + D)^2) / (2|C|).
fn eigen_q<T: Real>(
    m: &RayMatrix<T>,
    plane: TransversePlane,
    length_scale: T,
) -> Result<Complex<T>> {
    let half_trace = m.half_trace();
    if half_trace.abs() >= T::one() {
        // Distinguish a genuinely unstable resonator from a degenerate one
        // whose round trip is (close to) +/- identity, where every beam is
        // self-consistent and no unique mode exists.
        let tol = T::of(1e-9);
        let identity_like = m.b.abs() <= tol * length_scale
            && m.c.abs() * length_scale <= tol
            && (m.a - m.d).abs() <= tol;
        if identity_like {
            return Err(Error::DegenerateCavity { plane });
        }
        return Err(Error::UnstableCavity {
            plane,
            m: half_trace.to_f64_lossy(),
        });
    }
    let two = T::of(2.0);
    let re = (m.a - m.d) / (two * m.c);
    let disc = T::of(4.0) - (m.a + m.d).powi(2);
    let im = disc.sqrt() / (two * m.c.abs());
    Ok(Complex::new(re, im))
}

/// Half-linewidth, free spectral range and finesse of a cavity with
/// output-coupler power transmissivity `transmissivity` and round-trip
/// optical path length `optical_length` (metres). Valid in the high-finesse
/// limit, where f_HWHM = c T / (4 pi l) and finesse = 2 pi / T.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linewidth<T> {
    /// Cavity half width at half maximum, Hz.
    pub f_hwhm: T,
    /// Free spectral range c / l, Hz.
    pub fsr: T,
    /// fsr / (2 f_hwhm) = 2 pi / T.
    pub finesse: T,
}

pub fn linewidth<T: Real>(transmissivity: T, optical_length: T) -> Result<Linewidth<T>> {
    if !(transmissivity > T::zero() && transmissivity < T::one()) {
        return Err(Error::InvalidParameter(format!(
            "transmissivity must lie in (0, 1), got {transmissivity}"
        )));
    }
    if !(optical_length > T::zero()) || !optical_length.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "optical length must be positive, got {optical_length}"
        )));
    }
    let c = T::of(SPEED_OF_LIGHT);
    let f_hwhm = c * transmissivity / (T::of(4.0) * T::PI() * optical_length);
    let fsr = c / optical_length;
    Ok(Linewidth {
        f_hwhm,
        fsr,
        finesse: fsr / (T::of(2.0) * f_hwhm),
    })
}

/// One row of a waist-vs-spacing scan; `waist` is indexed by
/// [`TransversePlane::index`], `None` where that plane is not stable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaistScanRow<T> {
    pub distance: T,
    pub waist: [Option<T>; 2],
}

impl<T: Real> WaistScanRow<T> {
    pub fn waist(&self, plane: TransversePlane) -> Option<T> {
        self.waist[plane.index()]
    }
}

/// Evaluate the eigen-waists of `template(d)` over a grid of mirror spacings.
/// Unstable (or degenerate) planes yield `None`; any other failure aborts the
/// scan.
pub fn waist_scan<T, F>(template: F, distances: &[T]) -> Result<Vec<WaistScanRow<T>>>
where
    T: Real,
    F: Fn(T) -> Result<CavityLayout<T>> + Sync,
{
    distances
        .par_iter()
        .map(|&d| {
            let layout = template(d)?;
            let mut waist = [None, None];
            for plane in TransversePlane::BOTH {
                match layout.eigen_waist(plane) {
                    Ok(w) => waist[plane.index()] = Some(w),
                    Err(Error::UnstableCavity { .. }) | Err(Error::DegenerateCavity { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            Ok(WaistScanRow { distance: d, waist })
        })
        .collect()
}

/// Evenly spaced grid from `lo` to `hi` inclusive with the given step; the
/// last point is clamped onto `hi` when the step does not divide the span.
pub fn grid<T: Real>(lo: T, hi: T, step: T) -> Result<Vec<T>> {
    if !(step > T::zero()) || !(hi > lo) {
        return Err(Error::InvalidParameter(format!(
            "grid needs hi > lo and step > 0, got [{lo}, {hi}] step {step}"
        )));
    }
    let n = ((hi - lo) / step).round().to_f64_lossy() as usize;
    let n = n.max(1);
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let x = lo + step * T::from_usize(i).unwrap();
        out.push(if x > hi { hi } else { x });
    }
    if let Some(last) = out.last_mut() {
        *last = hi;
    }
    Ok(out)
}

/// Result of the circular-waist search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircularSolution<T> {
    /// Mirror spacing at which the two axis waists coincide, metres.
    pub distance: T,
    /// Common waist radius there, metres.
    pub waist: T,
}

/// Find the mirror spacing inside `bracket` where the tangential and sagittal
/// eigen-waists are equal.
///
/// Uses bisection on the waist difference when it changes sign across the
/// bracket, falling back to a golden-section minimisation of |difference| for
/// tangent (osculating) crossings. The result is located to within
/// `distance_tol` (metres). Both bracket endpoints must be stable in both
/// planes.
pub fn find_circular_spacing<T, F>(
    template: F,
    bracket: (T, T),
    distance_tol: T,
) -> Result<CircularSolution<T>>
where
    T: Real,
    F: Fn(T) -> Result<CavityLayout<T>>,
{
    let (lo, hi) = bracket;
    if !(hi > lo) || !(distance_tol > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "bracket must satisfy hi > lo (got [{lo}, {hi}]) with positive tolerance"
        )));
    }
    let eval = |d: T| -> Result<(T, T)> {
        let layout = template(d)?;
        Ok((
            layout.eigen_waist(TransversePlane::Tangential)?,
            layout.eigen_waist(TransversePlane::Sagittal)?,
        ))
    };
    let diff = |d: T| -> Result<T> {
        let (wt, ws) = eval(d)?;
        Ok(wt - ws)
    };

    let f_lo = diff(lo)?;
    let f_hi = diff(hi)?;
    let (w_ref, _) = eval(lo)?;
    let zero_tol = T::of(1e-9) * w_ref;

    let mm = |x: T| x.to_f64_lossy() * 1e3;

    // A bracket where the difference vanishes at both ends (and in the
    // middle) has no isolated root to report.
    if f_lo.abs() <= zero_tol && f_hi.abs() <= zero_tol {
        let mid = (lo + hi) / T::of(2.0);
        if diff(mid)?.abs() <= zero_tol {
            return Err(Error::DegenerateBracket {
                lo_mm: mm(lo),
                hi_mm: mm(hi),
            });
        }
    }

    let solution = |d: T| -> Result<CircularSolution<T>> {
        let (wt, ws) = eval(d)?;
        Ok(CircularSolution {
            distance: d,
            waist: (wt + ws) / T::of(2.0),
        })
    };

    if (f_lo <= T::zero()) != (f_hi <= T::zero()) {
        // Sign change: plain bisection.
        let (mut a, mut b, mut fa) = (lo, hi, f_lo);
        while b - a > distance_tol {
            let mid = (a + b) / T::of(2.0);
            let fm = diff(mid)?;
            if fm == T::zero() {
                return solution(mid);
            }
            if (fa <= T::zero()) != (fm <= T::zero()) {
                b = mid;
            } else {
                a = mid;
                fa = fm;
            }
        }
        return solution((a + b) / T::of(2.0));
    }

    // No sign change: golden-section search for a tangent root of |diff|.
    let inv_phi = T::of(0.618_033_988_749_894_9);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = diff(c)?.abs();
    let mut fd = diff(d)?.abs();
    while b - a > distance_tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = diff(c)?.abs();
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = diff(d)?.abs();
        }
    }
    let x = (a + b) / T::of(2.0);
    if diff(x)?.abs() <= T::of(1e-6) * w_ref {
        return solution(x);
    }
    Err(Error::NoCrossing {
        lo_mm: mm(lo),
        hi_mm: mm(hi),
    })
}

/// Focal length of the lens formed by a plano-concave output-coupler
/// substrate in the given plane: the concave reflecting surface (effective
/// curvature R_eff) refracts the transmitted beam as a diverging lens,
/// f = -R_eff / (n_substrate - 1).
pub fn extraction_lens_focal<T: Real>(
    roc: T,
    aoi: T,
    substrate_index: T,
    plane: TransversePlane,
) -> T {
    let r_eff = match plane {
        TransversePlane::Tangential => roc * aoi.cos(),
        TransversePlane::Sagittal => roc / aoi.cos(),
    };
    -r_eff / (substrate_index - T::one())
}

/// Mode-matching report for the beam leaving the cavity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractionReport<T> {
    /// Eigenmode evaluated just before the output coupler, inside the ring.
    pub cavity_mode: GaussianMode<T>,
    /// Transmitted mode after the substrate lens (equal to `cavity_mode`
    /// when the layout carries no output-coupler annotation).
    pub output_mode: GaussianMode<T>,
    /// Extraction-lens focal lengths per plane, `None` without a coupler.
    pub lens_focal: Option<[T; 2]>,
    /// Best power coupling to a circular Gaussian beam.
    pub best_circular_overlap: T,
    /// The circular mode achieving it.
    pub matched_mode: GaussianMode<T>,
}

/// Propagate the cavity eigenmode through the output-coupler substrate and
/// report how well any circular beam can match what comes out.
pub fn extraction_report<T: Real>(layout: &CavityLayout<T>) -> Result<ExtractionReport<T>> {
    let oc_index = layout.output_coupler().map(|oc| oc.element);
    // Express the eigenmode at the output coupler by re-rooting the ring.
    let at_oc = match oc_index {
        Some(i) => layout.cycled(i)?,
        None => layout.clone(),
    };
    let cavity_mode = at_oc.eigenmode()?;
    let (output_mode, lens_focal) = match layout.output_coupler() {
        Some(oc) => match layout.elements()[oc.element] {
            OpticalElement::CurvedMirror { roc, aoi } => {
                let f: [T; 2] = [
                    extraction_lens_focal(
                        roc,
                        aoi,
                        oc.substrate_index,
                        TransversePlane::Tangential,
                    ),
                    extraction_lens_focal(roc, aoi, oc.substrate_index, TransversePlane::Sagittal),
                ];
                let out = cavity_mode
                    .transform(&RayMatrix::thin_lens(f[0]), &RayMatrix::thin_lens(f[1]))?;
                (out, Some(f))
            }
            _ => unreachable!("output coupler is validated to be a curved mirror"),
        },
        None => (cavity_mode, None),
    };
    let (best, matched) = crate::mode::best_circular_overlap(&output_mode);
    Ok(ExtractionReport {
        cavity_mode,
        output_mode,
        lens_focal,
        best_circular_overlap: best,
        matched_mode: matched,
    })
}
