//! Analytic squeezing and anti-squeezing spectra of a sub-threshold OPO.
//!
//! A degenerate OPO below threshold emits a squeezed vacuum whose quadrature
//! noise, normalized to shot noise, follows a Lorentzian pair in the
//! measurement frequency f:
//!
//!   R∓(f) = 1 ∓ η ρ 4ξ / ((1 ± ξ)² + (f/f_HWHM)²)
//!
//! with ρ = T/(T+L) the escape efficiency, ξ = √(P/P_th) the normalized pump
//! amplitude, and η the end-to-end detection efficiency. The squeezed branch
//! carries the (1+ξ)² denominator — this keeps R₋ ∈ (0, 1] all the way to
//! threshold, where the anti-squeezed branch diverges as (1−ξ)⁻².
//!
//! Residual phase jitter between the squeezed quadrature and the homodyne
//! phase mixes the two branches: R'± = R±·cos²θ̄ + R∓·sin²θ̄. Near threshold
//! this mixing, not the optical loss, limits the observable squeezing, which
//! is why the squeezed level has an interior optimum in ξ.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::units::{db_from_linear, linear_from_db};

/// OPO cavity and pump operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpoParams<T> {
    /// Output-coupler power transmissivity, in (0, 1).
    pub transmissivity: T,
    /// Round-trip internal loss, in [0, 1).
    pub internal_loss: T,
    /// Cavity half width at half maximum, Hz.
    pub f_hwhm: T,
    /// Pump power, watts; must stay below threshold.
    pub pump_power: T,
    /// Oscillation threshold power, watts.
    pub threshold_power: T,
}

impl<T: Real> OpoParams<T> {
    pub fn new(
        transmissivity: T,
        internal_loss: T,
        f_hwhm: T,
        pump_power: T,
        threshold_power: T,
    ) -> Result<Self> {
        let p = OpoParams {
            transmissivity,
            internal_loss,
            f_hwhm,
            pump_power,
            threshold_power,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.transmissivity > T::zero() && self.transmissivity < T::one()) {
            return bad(format!(
                "transmissivity must lie in (0, 1), got {}",
                self.transmissivity
            ));
        }
        if !(self.internal_loss >= T::zero() && self.internal_loss < T::one()) {
            return bad(format!(
                "internal loss must lie in [0, 1), got {}",
                self.internal_loss
            ));
        }
        if !(self.f_hwhm > T::zero()) || !self.f_hwhm.is_finite() {
            return bad(format!("f_hwhm must be positive, got {}", self.f_hwhm));
        }
        if !(self.threshold_power > T::zero()) || !self.threshold_power.is_finite() {
            return bad(format!(
                "threshold power must be positive, got {}",
                self.threshold_power
            ));
        }
        if !(self.pump_power >= T::zero()) || !self.pump_power.is_finite() {
            return bad(format!(
                "pump power must be nonnegative, got {}",
                self.pump_power
            ));
        }
        if self.pump_power >= self.threshold_power {
            return Err(Error::AboveThreshold {
                xi: (self.pump_power / self.threshold_power)
                    .sqrt()
                    .to_f64_lossy(),
            });
        }
        Ok(())
    }

    pub fn escape_efficiency(&self) -> T {
        escape_efficiency(self.transmissivity, self.internal_loss)
            .expect("validated params have a well-defined escape efficiency")
    }

    pub fn xi(&self) -> T {
        normalized_pump(self.pump_power, self.threshold_power)
            .expect("validated params are sub-threshold")
    }

    pub fn with_pump(&self, pump_power: T) -> Result<Self> {
        Self::new(
            self.transmissivity,
            self.internal_loss,
            self.f_hwhm,
            pump_power,
            self.threshold_power,
        )
    }
}

/// Escape efficiency ρ = T / (T + L).
pub fn escape_efficiency<T: Real>(transmissivity: T, internal_loss: T) -> Result<T> {
    if !(transmissivity > T::zero()) || !(internal_loss >= T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "escape efficiency needs T > 0 and L >= 0, got T = {transmissivity}, L = {internal_loss}"
        )));
    }
    Ok(transmissivity / (transmissivity + internal_loss))
}

/// Normalized pump amplitude ξ = √(P / P_th); errors at or above threshold.
pub fn normalized_pump<T: Real>(pump_power: T, threshold_power: T) -> Result<T> {
    if !(threshold_power > T::zero()) || !(pump_power >= T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "normalized pump needs P >= 0 and P_th > 0, got P = {pump_power}, P_th = {threshold_power}"
        )));
    }
    let xi = (pump_power / threshold_power).sqrt();
    if xi >= T::one() {
        return Err(Error::AboveThreshold {
            xi: xi.to_f64_lossy(),
        });
    }
    Ok(xi)
}

/// Convert a shot-to-dark-noise clearance (dB) into the equivalent optical
/// loss of the electronic noise: L_elec = 10^(−SNR/10).
pub fn electronic_loss_from_snr<T: Real>(snr_db: T) -> Result<T> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "SNR must be finite, got {snr_db}"
        )));
    }
    Ok(linear_from_db(-snr_db))
}

/// Frequency-resolved loss fraction: sorted (Hz, fraction) knots with linear
/// interpolation and flat extrapolation beyond the tabulated range.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTable<T> {
    points: Vec<(T, T)>,
}

impl<T: Real> LossTable<T> {
    pub fn new(mut points: Vec<(T, T)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter(
                "loss table needs at least one point".into(),
            ));
        }
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite frequencies"));
        for &(f, l) in &points {
            if !(f >= T::zero()) || !f.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "loss-table frequency must be finite and >= 0, got {f}"
                )));
            }
            if !(l >= T::zero() && l < T::one()) {
                return Err(Error::InvalidParameter(format!(
                    "loss fraction must lie in [0, 1), got {l}"
                )));
            }
        }
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter(
                "loss table has duplicate frequencies".into(),
            ));
        }
        Ok(LossTable { points })
    }

    /// Frequency-independent loss.
    pub fn flat(loss: T) -> Result<Self> {
        Self::new(vec![(T::zero(), loss)])
    }

    /// Build from a dark-noise clearance table (Hz, SNR dB).
    pub fn from_snr(points: &[(T, T)]) -> Result<Self> {
        points
            .iter()
            .map(|&(f, snr)| Ok((f, electronic_loss_from_snr(snr)?)))
            .collect::<Result<Vec<_>>>()
            .and_then(Self::new)
    }

    pub fn loss_at(&self, f: T) -> T {
        let pts = &self.points;
        if f <= pts[0].0 {
            return pts[0].1;
        }
        if f >= pts[pts.len() - 1].0 {
            return pts[pts.len() - 1].1;
        }
        let i = pts.partition_point(|&(pf, _)| pf <= f);
        let (f0, l0) = pts[i - 1];
        let (f1, l1) = pts[i];
        l0 + (l1 - l0) * (f - f0) / (f1 - f0)
    }

    /// True when the table carries no frequency dependence.
    pub fn is_flat(&self) -> bool {
        self.points.iter().all(|&(_, l)| l == self.points[0].1)
    }

    pub fn points(&self) -> &[(T, T)] {
        &self.points
    }
}

/// Everything between the OPO output coupler and the recorded spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionChain<T> {
    /// Optical propagation loss, fraction in [0, 1).
    pub propagation_loss: T,
    /// Homodyne fringe visibility; mode-match efficiency is its square.
    pub visibility: T,
    /// Photodiode quantum efficiency, in (0, 1].
    pub photodiode_efficiency: T,
    /// Equivalent optical loss of the electronic noise vs frequency.
    pub electronic_loss: LossTable<T>,
    /// RMS phase jitter θ̄ between squeezed quadrature and homodyne phase,
    /// radians, in [0, π/2).
    pub phase_jitter_rms: T,
}

impl<T: Real> DetectionChain<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        let unit = |name: &str, v: T| -> Result<()> {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
            Ok(())
        };
        unit("propagation loss", self.propagation_loss)?;
        unit("visibility", self.visibility)?;
        unit("photodiode efficiency", self.photodiode_efficiency)?;
        if !(self.phase_jitter_rms >= T::zero() && self.phase_jitter_rms < T::FRAC_PI_2()) {
            return bad(format!(
                "phase jitter RMS must lie in [0, pi/2), got {}",
                self.phase_jitter_rms
            ));
        }
        Ok(())
    }

    /// Lossless chain with the given phase jitter (useful in tests).
    pub fn ideal() -> Self {
        DetectionChain {
            propagation_loss: T::zero(),
            visibility: T::one(),
            photodiode_efficiency: T::one(),
            electronic_loss: LossTable::flat(T::zero()).expect("zero loss is valid"),
            phase_jitter_rms: T::zero(),
        }
    }

    /// End-to-end detection efficiency
    /// η(f) = (1 − prop)·vis²·η_pd·(1 − L_elec(f)).
    pub fn total_efficiency(&self, f: T) -> T {
        (T::one() - self.propagation_loss)
            * self.visibility
            * self.visibility
            * self.photodiode_efficiency
            * (T::one() - self.electronic_loss.loss_at(f))
    }
}

/// Loss-degraded Lorentzian branches of the OPO output at frequency `f`:
/// returns (squeezed, anti-squeezed) as linear variances relative to shot.
pub fn raw_spectrum<T: Real>(opo: &OpoParams<T>, eta: T, f: T) -> (T, T) {
    let xi = opo.xi();
    let rho = opo.escape_efficiency();
    let x2 = (f / opo.f_hwhm).powi(2);
    let four_xi = T::of(4.0) * xi;
    let one = T::one();
    let r_minus = one - eta * rho * four_xi / ((one + xi).powi(2) + x2);
    let r_plus = one + eta * rho * four_xi / ((one - xi).powi(2) + x2);
    (r_minus, r_plus)
}

/// Phase-jitter mixing of the two branches:
/// R'± = R±·cos²θ̄ + R∓·sin²θ̄.
pub fn apply_phase_noise<T: Real>(r_minus: T, r_plus: T, theta_rms: T) -> (T, T) {
    let c2 = theta_rms.cos().powi(2);
    let s2 = theta_rms.sin().powi(2);
    (r_minus * c2 + r_plus * s2, r_plus * c2 + r_minus * s2)
}

/// Squeezed/anti-squeezed spectra on a shared frequency grid, as linear
/// variances relative to shot noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumPair<T> {
    pub frequencies: Vec<T>,
    pub squeezed: Vec<T>,
    pub antisqueezed: Vec<T>,
}

impl<T: Real> SpectrumPair<T> {
    pub fn squeezed_db(&self) -> Vec<T> {
        self.squeezed.iter().map(|&v| db_from_linear(v)).collect()
    }

    pub fn antisqueezed_db(&self) -> Vec<T> {
        self.antisqueezed
            .iter()
            .map(|&v| db_from_linear(v))
            .collect()
    }
}

/// Full model: Lorentzian branches with frequency-resolved detection
/// efficiency, then phase-jitter mixing, per grid point.
pub fn predicted_spectrum<T: Real>(
    opo: &OpoParams<T>,
    chain: &DetectionChain<T>,
    frequencies: &[T],
) -> Result<SpectrumPair<T>> {
    opo.validate()?;
    chain.validate()?;
    if frequencies.is_empty() {
        return Err(Error::InvalidParameter("frequency grid is empty".into()));
    }
    let pairs: Vec<(T, T)> = frequencies
        .par_iter()
        .map(|&f| {
            let (rm, rp) = raw_spectrum(opo, chain.total_efficiency(f), f);
            apply_phase_noise(rm, rp, chain.phase_jitter_rms)
        })
        .collect();
    Ok(SpectrumPair {
        frequencies: frequencies.to_vec(),
        squeezed: pairs.iter().map(|p| p.0).collect(),
        antisqueezed: pairs.iter().map(|p| p.1).collect(),
    })
}

/// Squeezed/anti-squeezed levels at one probe frequency for one pump power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpPoint<T> {
    pub pump_power: T,
    pub xi: T,
    pub squeezed_db: T,
    pub antisqueezed_db: T,
}

/// Pump-power dependence of both branches at a fixed probe frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpSweep<T> {
    pub probe_frequency: T,
    pub points: Vec<PumpPoint<T>>,
}

/// Evaluate the full model at `f_probe` for each pump power. Pump powers at
/// or above threshold are rejected; use [`theory_curve`] for the continuation
/// in ξ.
pub fn pump_sweep<T: Real>(
    opo: &OpoParams<T>,
    chain: &DetectionChain<T>,
    f_probe: T,
    pump_powers: &[T],
) -> Result<PumpSweep<T>> {
    chain.validate()?;
    let points = pump_powers
        .iter()
        .map(|&p| {
            let at = opo.with_pump(p)?;
            let (rm, rp) = raw_spectrum(&at, chain.total_efficiency(f_probe), f_probe);
            let (rm, rp) = apply_phase_noise(rm, rp, chain.phase_jitter_rms);
            Ok(PumpPoint {
                pump_power: p,
                xi: at.xi(),
                squeezed_db: db_from_linear(rm),
                antisqueezed_db: db_from_linear(rp),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PumpSweep {
        probe_frequency: f_probe,
        points,
    })
}

/// Theoretical continuation of the pump sweep over ξ ∈ (0, 1): `n` evenly
/// spaced points, each as (ξ, squeezed dB, anti-squeezed dB) at `f_probe`.
pub fn theory_curve<T: Real>(
    opo: &OpoParams<T>,
    chain: &DetectionChain<T>,
    f_probe: T,
    n: usize,
) -> Result<Vec<(T, T, T)>> {
    if n < 2 {
        return Err(Error::InvalidParameter(
            "theory curve needs at least 2 points".into(),
        ));
    }
    chain.validate()?;
    let eta = chain.total_efficiency(f_probe);
    let theta = chain.phase_jitter_rms;
    Ok((1..=n)
        .map(|i| {
            let xi = T::from_usize(i).unwrap() / T::from_usize(n + 1).unwrap();
            let at = OpoParams {
                pump_power: xi * xi * opo.threshold_power,
                ..*opo
            };
            let (rm, rp) = raw_spectrum(&at, eta, f_probe);
            let (rm, rp) = apply_phase_noise(rm, rp, theta);
            (xi, db_from_linear(rm), db_from_linear(rp))
        })
        .collect())
}

/// Best achievable squeezing over ξ ∈ (0, 1) at probe frequency `f_probe`:
/// returns (ξ_opt, squeezed dB there). With nonzero phase jitter the optimum
/// is interior (anti-squeezing leaks into the measurement near threshold);
/// without jitter it sits at the upper search edge.
pub fn optimal_squeezing<T: Real>(
    opo: &OpoParams<T>,
    chain: &DetectionChain<T>,
    f_probe: T,
) -> Result<(T, T)> {
    chain.validate()?;
    let eta = chain.total_efficiency(f_probe);
    let theta = chain.phase_jitter_rms;
    let level = |xi: T| -> T {
        let at = OpoParams {
            pump_power: xi * xi * opo.threshold_power,
            ..*opo
        };
        let (rm, rp) = raw_spectrum(&at, eta, f_probe);
        apply_phase_noise(rm, rp, theta).0
    };
    // Golden-section minimisation on a smooth unimodal objective.
    let inv_phi = T::of(0.618_033_988_749_894_9);
    let (mut a, mut b) = (T::of(1e-6), T::of(1.0 - 1e-6));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (level(c), level(d));
    for _ in 0..200 {
        if b - a < T::of(1e-10) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = level(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = level(d);
        }
    }
    let xi = (a + b) / T::of(2.0);
    Ok((xi, db_from_linear(level(xi))))
}
