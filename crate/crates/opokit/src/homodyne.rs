//! Stochastic time-domain synthesis of homodyne photocurrent records.
//!
//! The analytic model gives the *spectrum* of the measured quadrature; this
//! module realizes a Gaussian process with that spectrum so the acquisition
//! chain (spectrum analyzer, high-pass, finite averaging) can be exercised
//! end to end and checked against the closed-form curves.
//!
//! Pipeline, per record:
//!   1. Two independent unit-variance white sequences are shaped by the
//!      spectral factorization of the squeezed / anti-squeezed Lorentzians
//!      (single-pole single-zero filters, bilinear-discretized).
//!   2. A slowly wandering phase θ(t) (Gaussian, RMS θ̄, exponential
//!      correlation) plus the static lock angle rotates the measured
//!      quadrature: q = x_anti·sin(lock+θ) + x_sq·cos(lock+θ).
//!   3. Detection efficiency mixes in fresh vacuum: q' = √η q + √(1−η) v.
//!      When the efficiency is frequency-resolved (tabulated electronic
//!      loss), the scalar mix is replaced by a minimum-phase FIR pair with
//!      |F_sig|² = η(f) and |F_vac|² = 1 − η(f).
//!   4. An optional first-order high-pass models the analyzer input filter.
//!
//! Everything is deterministic for a fixed seed: each consumer of randomness
//! owns a dedicated counter-mode RNG stream, and white noise is produced in
//! fixed-size blocks with one stream per block, so generation order (or
//! thread count) cannot change the output.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{FftNum, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::squeezing::{DetectionChain, OpoParams};

/// Block length for white-noise generation; one RNG stream per block.
const WHITE_BLOCK: usize = 1 << 20;

/// Stream roles (kept distinct so pipeline stages never share randomness).
const ROLE_SQUEEZED: u64 = 0;
const ROLE_ANTISQUEEZED: u64 = 1;
const ROLE_VACUUM: u64 = 2;
const ROLE_JITTER: u64 = 3;
const ROLE_COUNT: u64 = 4;

/// FIR length and design-grid size for tabulated-efficiency shaping.
const FIR_TAPS: usize = 129;
const FIR_GRID: usize = 4096;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn key_from_seed(seed: u64) -> [u8; 32] {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

fn role_rng(seed: u64, role: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key_from_seed(seed));
    rng.set_stream(block * ROLE_COUNT + role);
    rng
}

/// Unit-variance Gaussian white noise, reproducible for (seed, role) and
/// independent across roles. Generated block-parallel with one counter-mode
/// stream per block, so the result does not depend on scheduling.
fn white_noise<T: Real>(seed: u64, role: u64, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n];
    out.par_chunks_mut(WHITE_BLOCK)
        .enumerate()
        .for_each(|(block, chunk)| {
            let mut rng = role_rng(seed, role, block as u64);
            for x in chunk.iter_mut() {
                *x = T::of(rng.sample::<f64, _>(StandardNormal));
            }
        });
    out
}

/// Continuous-time single-pole single-zero section H(s) = (s + zero)/(s + pole),
/// both in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalogSection<T> {
    pub zero: T,
    pub pole: T,
}

impl<T: Real> AnalogSection<T> {
    /// |H(i 2πf)|².
    pub fn magnitude_sq(&self, f: T) -> T {
        let w2 = (T::of(2.0) * T::PI() * f).powi(2);
        (w2 + self.zero * self.zero) / (w2 + self.pole * self.pole)
    }

    /// Bilinear transform at sample rate `fs`, prewarped so the response is
    /// exact at `prewarp` Hz.
    pub fn discretize(&self, fs: T, prewarp: T) -> FirstOrderSection<T> {
        let k = bilinear_k(fs, prewarp);
        let den = k + self.pole;
        FirstOrderSection {
            b0: (k + self.zero) / den,
            b1: (self.zero - k) / den,
            a1: (self.pole - k) / den,
        }
    }
}

fn bilinear_k<T: Real>(fs: T, prewarp: T) -> T {
    let w = T::of(2.0) * T::PI() * prewarp;
    if prewarp > T::zero() && prewarp < fs / T::of(2.0) {
        w / (w / (T::of(2.0) * fs)).tan()
    } else {
        T::of(2.0) * fs
    }
}

/// Digital first-order section y[n] = b0·x[n] + b1·x[n−1] − a1·y[n−1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderSection<T> {
    pub b0: T,
    pub b1: T,
    pub a1: T,
}

impl<T: Real> FirstOrderSection<T> {
    pub fn apply_in_place(&self, x: &mut [T]) {
        let (b0, b1, a1) = (self.b0, self.b1, self.a1);
        let mut x1 = T::zero();
        let mut y1 = T::zero();
        for v in x.iter_mut() {
            let xi = *v;
            let y = b0 * xi + (b1 * x1 - a1 * y1);
            *v = y;
            x1 = xi;
            y1 = y;
        }
    }

    /// |H(e^{i 2πf/fs})|².
    pub fn magnitude_sq(&self, f: T, fs: T) -> T {
        let w = T::of(2.0) * T::PI() * f / fs;
        let (s, c) = (w.sin(), w.cos());
        let num = Complex::new(self.b0 + self.b1 * c, -self.b1 * s);
        let den = Complex::new(T::one() + self.a1 * c, -self.a1 * s);
        num.norm_sqr() / den.norm_sqr()
    }
}

/// Spectral factorization of the two Lorentzian quadrature spectra (before
/// detection losses): with γ = 2π f_HWHM,
///   squeezed:      pole γ(1+ξ), zero γ√((1+ξ)² − 4ξρ)
///   anti-squeezed: pole γ(1−ξ), zero γ√((1−ξ)² + 4ξρ)
/// so that |H∓(i2πf)|² equals the η = 1 branches of the analytic model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureFilters<T> {
    pub squeezed: AnalogSection<T>,
    pub antisqueezed: AnalogSection<T>,
}

pub fn quadrature_filters<T: Real>(gamma: T, xi: T, rho: T) -> Result<QuadratureFilters<T>> {
    if !(gamma > T::zero()) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    if !(xi >= T::zero() && xi < T::one()) {
        return Err(Error::InvalidParameter(format!(
            "xi must lie in [0, 1), got {xi}"
        )));
    }
    if !(rho > T::zero() && rho <= T::one()) {
        return Err(Error::InvalidParameter(format!(
            "rho must lie in (0, 1], got {rho}"
        )));
    }
    let one = T::one();
    let four_xi_rho = T::of(4.0) * xi * rho;
    // (1+ξ)² ≥ 4ξ ≥ 4ξρ, so the squeezed radicand cannot go negative.
    let sq_rad = (one + xi).powi(2) - four_xi_rho;
    debug_assert!(sq_rad >= T::zero());
    Ok(QuadratureFilters {
        squeezed: AnalogSection {
            zero: gamma * sq_rad.sqrt(),
            pole: gamma * (one + xi),
        },
        antisqueezed: AnalogSection {
            zero: gamma * ((one - xi).powi(2) + four_xi_rho).sqrt(),
            pole: gamma * (one - xi),
        },
    })
}

/// First-order high-pass at `cutoff` Hz (exact half-power there).
pub fn highpass_section<T: Real>(cutoff: T, fs: T) -> FirstOrderSection<T> {
    let k = bilinear_k(fs, cutoff);
    let wc = T::of(2.0) * T::PI() * cutoff;
    let den = k + wc;
    FirstOrderSection {
        b0: k / den,
        b1: -k / den,
        a1: (wc - k) / den,
    }
}

/// Minimum-phase FIR whose power response approximates `power(f)` on
/// [0, fs/2]. Designed by the real-cepstrum method on a dense grid; accurate
/// for smooth, strictly positive targets (loss tables).
fn minimum_phase_fir<T, F>(power: F, fs: T, n_taps: usize, grid_n: usize) -> Vec<T>
where
    T: Real + FftNum,
    F: Fn(T) -> T,
{
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(grid_n);
    let ifft = planner.plan_fft_inverse(grid_n);
    let n_t = T::from_usize(grid_n).unwrap();
    let floor = T::of(1e-12);

    // Log-amplitude, even around Nyquist so the cepstrum is real.
    let mut buf: Vec<Complex<T>> = (0..grid_n)
        .map(|k| {
            let kf = if k <= grid_n / 2 { k } else { grid_n - k };
            let f = fs * T::from_usize(kf).unwrap() / n_t;
            let ln_amp = power(f).max(floor).ln() * T::of(0.5);
            Complex::new(ln_amp, T::zero())
        })
        .collect();
    ifft.process(&mut buf);

    // Fold the even cepstrum onto causal support (minimum-phase lifting).
    let half = grid_n / 2;
    let scale = T::one() / n_t;
    let mut cep = vec![Complex::new(T::zero(), T::zero()); grid_n];
    cep[0] = buf[0] * scale;
    for k in 1..half {
        cep[k] = buf[k] * (scale + scale);
    }
    cep[half] = buf[half] * scale;
    fft.process(&mut cep);
    let mut spec: Vec<Complex<T>> = cep.iter().map(|c| c.exp()).collect();
    ifft.process(&mut spec);
    (0..n_taps).map(|i| spec[i].re * scale).collect()
}

/// Causal FIR convolution with zero initial history.
fn fir_apply<T: Real>(taps: &[T], x: &[T]) -> Vec<T> {
    let mut y = vec![T::zero(); x.len()];
    let chunk = 1 << 16;
    y.par_chunks_mut(chunk).enumerate().for_each(|(ci, out)| {
        let base = ci * chunk;
        for (j, yo) in out.iter_mut().enumerate() {
            let i = base + j;
            let kmax = taps.len().min(i + 1);
            let mut acc = T::zero();
            for (k, &t) in taps.iter().take(kmax).enumerate() {
                acc += t * x[i - k];
            }
            *yo = acc;
        }
    });
    y
}

/// Configuration of one synthesized record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceConfig<T> {
    /// Samples per second.
    pub sample_rate: T,
    /// Record length in seconds.
    pub duration: T,
    pub rng_seed: u64,
    /// Homodyne lock angle, radians; 0 measures the squeezed quadrature,
    /// π/2 the anti-squeezed one.
    pub lock_angle: T,
    /// RMS of the slow phase wander, radians.
    pub phase_jitter_rms: T,
    /// Correlation time of the phase wander, seconds.
    pub jitter_correlation_time: T,
    /// Analyzer input high-pass; `None` disables it.
    pub highpass_cutoff: Option<T>,
}

impl<T: Real> TraceConfig<T> {
    /// 1 GHz sampling, 300 kHz high-pass, 1 ms jitter correlation.
    pub fn new(duration: T, rng_seed: u64) -> Self {
        TraceConfig {
            sample_rate: T::of(1e9),
            duration,
            rng_seed,
            lock_angle: T::zero(),
            phase_jitter_rms: T::zero(),
            jitter_correlation_time: T::of(1e-3),
            highpass_cutoff: Some(T::of(300e3)),
        }
    }

    pub fn n_samples(&self) -> usize {
        (self.sample_rate * self.duration).round().to_f64_lossy() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.sample_rate > T::zero()) || !self.sample_rate.is_finite() {
            return bad(format!(
                "sample rate must be positive, got {}",
                self.sample_rate
            ));
        }
        if self.n_samples() < (1 << 16) {
            return bad(format!(
                "record must hold at least 2^16 samples, got {}",
                self.n_samples()
            ));
        }
        if !(self.phase_jitter_rms >= T::zero() && self.phase_jitter_rms < T::FRAC_PI_2()) {
            return bad(format!(
                "phase jitter RMS must lie in [0, pi/2), got {}",
                self.phase_jitter_rms
            ));
        }
        if !(self.jitter_correlation_time > T::zero()) {
            return bad(format!(
                "jitter correlation time must be positive, got {}",
                self.jitter_correlation_time
            ));
        }
        if let Some(fc) = self.highpass_cutoff {
            if !(fc > T::zero() && fc < self.sample_rate / T::of(2.0)) {
                return bad(format!("high-pass cutoff must lie in (0, fs/2), got {fc}"));
            }
        }
        Ok(())
    }

    /// Companion configuration for the shot-noise reference: same timing and
    /// filtering, no jitter, and an independent seed derived from this one.
    pub fn shot_variant(&self) -> Self {
        let mut state = self.rng_seed ^ 0x5e3_705_7_0e_5_u64.wrapping_mul(0x2545f4914f6cdd1d);
        TraceConfig {
            rng_seed: splitmix64(&mut state),
            lock_angle: T::zero(),
            phase_jitter_rms: T::zero(),
            ..*self
        }
    }
}

/// A synthesized photocurrent record, in shot-noise-normalized quadrature
/// units (unit white variance at ξ = 0 and η = 1, before high-pass).
#[derive(Debug, Clone, PartialEq)]
pub struct Record<T> {
    pub samples: Vec<T>,
    pub sample_rate: T,
    pub seed: u64,
    /// Fingerprint of the generating parameters, for file headers.
    pub params_hash: u64,
    /// High-pass cutoff baked into the samples, if any.
    pub highpass_cutoff: Option<T>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn params_fingerprint<T: Real>(
    opo: &OpoParams<T>,
    chain: &DetectionChain<T>,
    tc: &TraceConfig<T>,
) -> u64 {
    let f = |x: T| format!("{:.17e}", x.to_f64_lossy());
    let mut s = String::new();
    for v in [
        opo.transmissivity,
        opo.internal_loss,
        opo.f_hwhm,
        opo.pump_power,
        opo.threshold_power,
        chain.propagation_loss,
        chain.visibility,
        chain.photodiode_efficiency,
        chain.phase_jitter_rms,
        tc.sample_rate,
        tc.duration,
        tc.lock_angle,
        tc.phase_jitter_rms,
        tc.jitter_correlation_time,
        tc.highpass_cutoff.unwrap_or(T::zero()),
    ] {
        s.push_str(&f(v));
        s.push('|');
    }
    for &(fq, l) in chain.electronic_loss.points() {
        s.push_str(&f(fq));
        s.push(',');
        s.push_str(&f(l));
        s.push(';');
    }
    s.push_str(&tc.rng_seed.to_string());
    fnv1a(s.as_bytes())
}

/// Synthesize one homodyne record of the OPO output through the detection
/// chain. The phase jitter of the simulation is taken from
/// `tc.phase_jitter_rms` (the chain's own θ̄ belongs to the analytic model).
pub fn generate_trace<T: Real + FftNum>(
    opo: &OpoParams<T>,
    chain: &DetectionChain<T>,
    tc: &TraceConfig<T>,
) -> Result<Record<T>> {
    opo.validate()?;
    chain.validate()?;
    tc.validate()?;
    let fs = tc.sample_rate;
    if opo.f_hwhm * T::of(4.0) > fs {
        return Err(Error::InvalidParameter(format!(
            "sample rate {fs} too low for a cavity linewidth of {} Hz",
            opo.f_hwhm
        )));
    }
    let n = tc.n_samples();
    let seed = tc.rng_seed;
    let xi = opo.xi();
    let gamma = T::of(2.0) * T::PI() * opo.f_hwhm;
    let filters = quadrature_filters(gamma, xi, opo.escape_efficiency())?;
    let prewarp = opo.f_hwhm;

    // Shaped quadratures.
    let mut q = white_noise(seed, ROLE_SQUEEZED, n);
    filters
        .squeezed
        .discretize(fs, prewarp)
        .apply_in_place(&mut q);

    // Rotate by lock angle + slow jitter; plain lock rotation when θ̄ = 0.
    let needs_anti = tc.phase_jitter_rms > T::zero() || tc.lock_angle != T::zero();
    if needs_anti {
        let mut anti = white_noise(seed, ROLE_ANTISQUEEZED, n);
        filters
            .antisqueezed
            .discretize(fs, prewarp)
            .apply_in_place(&mut anti);
        if tc.phase_jitter_rms > T::zero() {
            let alpha = (-(fs * tc.jitter_correlation_time).recip()).exp();
            let innov = tc.phase_jitter_rms * (T::one() - alpha * alpha).sqrt();
            let mut rng = role_rng(seed, ROLE_JITTER, 0);
            let mut theta = tc.phase_jitter_rms * T::of(rng.sample::<f64, _>(StandardNormal));
            for i in 0..n {
                if i > 0 {
                    theta = alpha * theta + innov * T::of(rng.sample::<f64, _>(StandardNormal));
                }
                let (s, c) = (tc.lock_angle + theta).sin_cos();
                q[i] = anti[i] * s + q[i] * c;
            }
        } else {
            let (s, c) = tc.lock_angle.sin_cos();
            for (qi, &ai) in q.iter_mut().zip(anti.iter()) {
                *qi = ai * s + *qi * c;
            }
        }
    }

    // Detection efficiency.
    if chain.electronic_loss.is_flat() {
        let eta = chain.total_efficiency(T::zero());
        if eta < T::one() {
            let amp_sig = eta.sqrt();
            let amp_vac = (T::one() - eta).sqrt();
            let vac = white_noise(seed, ROLE_VACUUM, n);
            for (qi, &vi) in q.iter_mut().zip(vac.iter()) {
                *qi = amp_sig * *qi + amp_vac * vi;
            }
        }
    } else {
        let fir_sig = minimum_phase_fir(|f| chain.total_efficiency(f), fs, FIR_TAPS, FIR_GRID);
        let fir_vac = minimum_phase_fir(
            |f| T::one() - chain.total_efficiency(f),
            fs,
            FIR_TAPS,
            FIR_GRID,
        );
        q = fir_apply(&fir_sig, &q);
        let vac = fir_apply(&fir_vac, &white_noise(seed, ROLE_VACUUM, n));
        for (qi, &vi) in q.iter_mut().zip(vac.iter()) {
            *qi += vi;
        }
    }

    if let Some(fc) = tc.highpass_cutoff {
        highpass_section(fc, fs).apply_in_place(&mut q);
    }

    Ok(Record {
        samples: q,
        sample_rate: fs,
        seed,
        params_hash: params_fingerprint(opo, chain, tc),
        highpass_cutoff: tc.highpass_cutoff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::squeezing::{raw_spectrum, LossTable};

    fn test_opo(pump: f64) -> OpoParams<f64> {
        OpoParams::new(0.146, 0.0030, 65e6, pump, 0.490).unwrap()
    }

    fn flat_chain(eta: f64, jitter: f64) -> DetectionChain<f64> {
        DetectionChain {
            propagation_loss: 1.0 - eta,
            visibility: 1.0,
            photodiode_efficiency: 1.0,
            electronic_loss: LossTable::flat(0.0).unwrap(),
            phase_jitter_rms: jitter,
        }
    }

    fn short_tc(seed: u64) -> TraceConfig<f64> {
        TraceConfig {
            highpass_cutoff: None,
            ..TraceConfig::new(65.536e-6, seed)
        }
    }

    #[test]
    fn filter_dc_identity() {
        let xi = 0.677630927179f64;
        let rho = 0.980;
        let gamma = 2.0 * std::f64::consts::PI * 65e6;
        let f = quadrature_filters(gamma, xi, rho).unwrap();
        let dc = f.squeezed.magnitude_sq(0.0);
        let expect = 1.0 - rho * 4.0 * xi / (1.0 + xi).powi(2);
        assert!((dc - expect).abs() < 1e-12, "{dc} vs {expect}");
        // Published working point lands near 5.6% residual noise power.
        assert!(dc > 0.05 && dc < 0.06, "{dc}");
        let dc_plus = f.antisqueezed.magnitude_sq(0.0);
        assert!((dc_plus - (1.0 + rho * 4.0 * xi / (1.0 - xi).powi(2))).abs() < 1e-9);
    }

    #[test]
    fn filters_match_lorentzian_branches() {
        let opo = test_opo(0.225);
        let gamma = 2.0 * std::f64::consts::PI * opo.f_hwhm;
        let f = quadrature_filters(gamma, opo.xi(), opo.escape_efficiency()).unwrap();
        for k in 0..200 {
            let freq = 10f64.powf(5.0 + 4.0 * k as f64 / 199.0); // 100 kHz .. 1 GHz
            let (rm, rp) = raw_spectrum(&opo, 1.0, freq);
            let hm = f.squeezed.magnitude_sq(freq);
            let hp = f.antisqueezed.magnitude_sq(freq);
            assert!((hm - rm).abs() <= 1e-9 * rm, "f = {freq}: {hm} vs {rm}");
            assert!((hp - rp).abs() <= 1e-9 * rp, "f = {freq}: {hp} vs {rp}");
        }
    }

    #[test]
    fn zero_pump_filters_pass_through_exactly() {
        let gamma = 2.0 * std::f64::consts::PI * 65e6;
        let f = quadrature_filters(gamma, 0.0, 0.98).unwrap();
        assert_eq!(f.squeezed.zero, f.squeezed.pole);
        let d = f.squeezed.discretize(2e9, 65e6);
        let x: Vec<f64> = (0..1000)
            .map(|i| ((i * 2654435761usize) % 997) as f64 - 498.0)
            .collect();
        let mut y = x.clone();
        d.apply_in_place(&mut y);
        assert_eq!(x, y, "xi = 0 must be a bit-exact pass-through");
    }

    #[test]
    fn bilinear_is_exact_at_prewarp_frequency() {
        let gamma = 2.0 * std::f64::consts::PI * 65e6;
        let f = quadrature_filters(gamma, 0.68, 0.98).unwrap();
        let fs = 2e9;
        for sec in [f.squeezed, f.antisqueezed] {
            let d = sec.discretize(fs, 65e6);
            let analog = sec.magnitude_sq(65e6);
            let digital = d.magnitude_sq(65e6, fs);
            assert!(
                (digital - analog).abs() < 1e-9 * analog,
                "{digital} vs {analog}"
            );
        }
    }

    #[test]
    fn highpass_blocks_dc_and_halves_at_cutoff() {
        let fs = 1e9f64;
        let hp = highpass_section(300e3, fs);
        assert_eq!(hp.b0 + hp.b1, 0.0, "exact null at DC");
        assert!(hp.magnitude_sq(0.0, fs) < 1e-30);
        let at_fc = hp.magnitude_sq(300e3, fs);
        assert!((at_fc - 0.5).abs() < 1e-9, "{at_fc}");
        assert!(hp.magnitude_sq(100e6, fs) > 0.99999);
    }

    #[test]
    fn white_noise_is_deterministic_and_role_separated() {
        let a: Vec<f64> = white_noise(42, ROLE_SQUEEZED, 4096);
        let b: Vec<f64> = white_noise(42, ROLE_SQUEEZED, 4096);
        assert_eq!(a, b);
        let c: Vec<f64> = white_noise(42, ROLE_VACUUM, 4096);
        assert_ne!(a, c);
        let d: Vec<f64> = white_noise(43, ROLE_SQUEEZED, 4096);
        assert_ne!(a, d);
        // Block boundaries do not depend on how much is requested.
        let long: Vec<f64> = white_noise(42, ROLE_SQUEEZED, 8192);
        assert_eq!(&long[..4096], &a[..]);
    }

    #[test]
    fn record_generation_is_deterministic() {
        let opo = test_opo(0.225);
        let chain = flat_chain(0.92, 0.0);
        let mut tc = short_tc(7);
        tc.phase_jitter_rms = 0.8f64.to_radians();
        let r1 = generate_trace(&opo, &chain, &tc).unwrap();
        let r2 = generate_trace(&opo, &chain, &tc).unwrap();
        assert_eq!(r1.samples, r2.samples);
        assert_eq!(r1.params_hash, r2.params_hash);
        tc.rng_seed = 8;
        let r3 = generate_trace(&opo, &chain, &tc).unwrap();
        assert_ne!(r1.samples, r3.samples);
        assert_ne!(r1.params_hash, r3.params_hash);
    }

    #[test]
    fn zero_jitter_ignores_jitter_parameters() {
        let opo = test_opo(0.225);
        let chain = flat_chain(0.92, 0.0);
        let mut a = short_tc(3);
        a.jitter_correlation_time = 1e-3;
        let mut b = short_tc(3);
        b.jitter_correlation_time = 5e-6;
        let ra = generate_trace(&opo, &chain, &a).unwrap();
        let rb = generate_trace(&opo, &chain, &b).unwrap();
        assert_eq!(ra.samples, rb.samples);
    }

    #[test]
    fn vacuum_record_has_unit_variance() {
        let opo = test_opo(0.0);
        let chain = flat_chain(1.0, 0.0);
        let tc = short_tc(11);
        let r = generate_trace(&opo, &chain, &tc).unwrap();
        let n = r.samples.len() as f64;
        let var: f64 = r.samples.iter().map(|&x| x * x).sum::<f64>() / n;
        // Var of the sample variance of white noise: 2/n.
        let bound = 3.0 * (2.0 / n).sqrt();
        assert!((var - 1.0).abs() < bound, "var = {var}, bound {bound}");
    }

    #[test]
    fn squeezed_record_variance_is_suppressed() {
        let opo = test_opo(0.225);
        let chain = flat_chain(0.92, 0.0);
        let tc = short_tc(13);
        let r = generate_trace(&opo, &chain, &tc).unwrap();
        let n = r.samples.len() as f64;
        let var: f64 = r.samples.iter().map(|&x| x * x).sum::<f64>() / n;
        // Broadband variance integrates the squeezed Lorentzian over the full
        // band; it must sit clearly below shot and above the DC floor.
        let (rm_dc, _) = raw_spectrum(&opo, 0.92, 0.0);
        assert!(var < 0.9, "var = {var}");
        assert!(var > rm_dc, "var = {var} vs DC {rm_dc}");
    }

    #[test]
    fn ou_jitter_is_stationary_with_requested_rms() {
        let fs = 1e9f64;
        let tau = 100e-9;
        let alpha: f64 = (-(fs * tau).recip()).exp();
        let rms = 0.1f64;
        let innov = rms * (1.0 - alpha * alpha).sqrt();
        let mut rng = role_rng(5, ROLE_JITTER, 0);
        let mut theta = rms * rng.sample::<f64, _>(StandardNormal);
        let n = 2_000_000usize;
        let mut sum2 = 0.0;
        for i in 0..n {
            if i > 0 {
                theta = alpha * theta + innov * rng.sample::<f64, _>(StandardNormal);
            }
            sum2 += theta * theta;
        }
        let got = (sum2 / n as f64).sqrt();
        assert!((got - rms).abs() < 0.05 * rms, "rms = {got}");
    }

    #[test]
    fn minimum_phase_fir_hits_smooth_targets() {
        let table = LossTable::new(vec![
            (0.0, 0.010),
            (10e6, 0.010),
            (30e6, 0.012),
            (60e6, 0.015),
            (100e6, 0.020),
            (150e6, 0.028),
            (200e6, 0.038),
        ])
        .unwrap();
        let chain = DetectionChain {
            propagation_loss: 0.034,
            visibility: 0.991,
            photodiode_efficiency: 0.98,
            electronic_loss: table,
            phase_jitter_rms: 0.0,
        };
        let fs = 2e9f64;
        let sig = minimum_phase_fir(|f| chain.total_efficiency(f), fs, FIR_TAPS, FIR_GRID);
        let vac = minimum_phase_fir(|f| 1.0 - chain.total_efficiency(f), fs, FIR_TAPS, FIR_GRID);
        let dtft_pow = |h: &[f64], f: f64| {
            let w = 2.0 * std::f64::consts::PI * f / fs;
            let mut acc = Complex::new(0.0, 0.0);
            for (k, &t) in h.iter().enumerate() {
                let ph = w * k as f64;
                acc += Complex::new(t * ph.cos(), -t * ph.sin());
            }
            acc.norm_sqr()
        };
        for i in 0..=80 {
            let f = 2.5e6 * i as f64; // 0 .. 200 MHz
            let want_sig = chain.total_efficiency(f);
            let got_sig = dtft_pow(&sig, f);
            assert!(
                (got_sig - want_sig).abs() < 1e-3,
                "sig at {f}: {got_sig} vs {want_sig}"
            );
            let want_vac = 1.0 - want_sig;
            let got_vac = dtft_pow(&vac, f);
            assert!(
                (got_vac - want_vac).abs() < 1e-3,
                "vac at {f}: {got_vac} vs {want_vac}"
            );
        }
    }

    #[test]
    fn config_validation_rejects_bad_setups() {
        let mut tc = TraceConfig::<f64>::new(1e-6, 1); // too short
        assert!(tc.validate().is_err());
        tc = TraceConfig::new(1e-3, 1);
        assert!(tc.validate().is_ok());
        tc.highpass_cutoff = Some(1e9);
        assert!(tc.validate().is_err());
        tc = TraceConfig::new(1e-3, 1);
        tc.phase_jitter_rms = 2.0;
        assert!(tc.validate().is_err());

        // Sample rate must clear the cavity linewidth comfortably.
        let opo = test_opo(0.225);
        let chain = flat_chain(0.92, 0.0);
        let mut slow = short_tc(1);
        slow.sample_rate = 1e8;
        slow.duration = 1e-3;
        assert!(generate_trace(&opo, &chain, &slow).is_err());
    }

    #[test]
    fn shot_variant_differs_only_in_noise_identity() {
        let tc = TraceConfig::<f64>::new(1e-3, 99);
        let shot = tc.shot_variant();
        assert_ne!(shot.rng_seed, tc.rng_seed);
        assert_eq!(shot.sample_rate, tc.sample_rate);
        assert_eq!(shot.duration, tc.duration);
        assert_eq!(shot.highpass_cutoff, tc.highpass_cutoff);
        assert_eq!(shot.phase_jitter_rms, 0.0);
        // Derivation is deterministic.
        assert_eq!(tc.shot_variant().rng_seed, shot.rng_seed);
    }
}
