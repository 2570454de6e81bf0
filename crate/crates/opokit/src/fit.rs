//! Parameter estimation: damped least squares on noise spectra and pump
//! sweeps.
//!
//! The forward model is the two-branch quadrature spectrum with phase-noise
//! mixing; residuals are taken in dB by default (linear weighting available).
//! The solver is a small Levenberg–Marquardt loop over at most five
//! parameters, with internally rescaled coordinates, projected bounds, a
//! finite-difference Jacobian, and a deterministic multi-start grid whose
//! starts run in parallel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::squeezing::apply_phase_noise;
use crate::units::db_from_linear;

/// Full parameter set of the spectrum model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezingModel<T> {
    /// Normalized pump amplitude √(P/P_th).
    pub xi: T,
    /// Cavity half linewidth, Hz.
    pub f_hwhm: T,
    /// Detection efficiency (propagation, visibility, photodiode,
    /// electronics) excluding cavity escape.
    pub eta: T,
    /// Cavity escape efficiency.
    pub rho: T,
    /// RMS phase noise, radians.
    pub theta: T,
}

impl<T: Real> SqueezingModel<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.xi >= T::zero() && self.xi < T::one()) {
            return bad(format!("xi must lie in [0, 1), got {}", self.xi));
        }
        if !(self.f_hwhm > T::zero()) || !self.f_hwhm.is_finite() {
            return bad(format!("f_hwhm must be positive, got {}", self.f_hwhm));
        }
        if !(self.eta > T::zero() && self.eta <= T::one()) {
            return bad(format!("eta must lie in (0, 1], got {}", self.eta));
        }
        if !(self.rho > T::zero() && self.rho <= T::one()) {
            return bad(format!("rho must lie in (0, 1], got {}", self.rho));
        }
        if !(self.theta >= T::zero() && self.theta < T::FRAC_PI_2()) {
            return bad(format!("theta must lie in [0, pi/2), got {}", self.theta));
        }
        Ok(())
    }

    /// (squeezed, anti-squeezed) relative noise power at `f`, linear.
    pub fn spectrum(&self, f: T) -> (T, T) {
        let x2 = (f / self.f_hwhm).powi(2);
        let coupling = self.eta * self.rho * T::of(4.0) * self.xi;
        let rm = T::one() - coupling / ((T::one() + self.xi).powi(2) + x2);
        let rp = T::one() + coupling / ((T::one() - self.xi).powi(2) + x2);
        apply_phase_noise(rm, rp, self.theta)
    }

    pub fn spectrum_db(&self, f: T) -> (T, T) {
        let (rm, rp) = self.spectrum(f);
        (db_from_linear(rm), db_from_linear(rp))
    }
}

/// Which parameters the fitter may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelParam {
    Xi,
    FHwhm,
    Eta,
    Rho,
    Theta,
}

impl ModelParam {
    pub const ALL: [ModelParam; 5] = [
        ModelParam::Xi,
        ModelParam::FHwhm,
        ModelParam::Eta,
        ModelParam::Rho,
        ModelParam::Theta,
    ];

    fn get<T: Real>(self, m: &SqueezingModel<T>) -> T {
        match self {
            ModelParam::Xi => m.xi,
            ModelParam::FHwhm => m.f_hwhm,
            ModelParam::Eta => m.eta,
            ModelParam::Rho => m.rho,
            ModelParam::Theta => m.theta,
        }
    }

    fn set<T: Real>(self, m: &mut SqueezingModel<T>, v: T) {
        match self {
            ModelParam::Xi => m.xi = v,
            ModelParam::FHwhm => m.f_hwhm = v,
            ModelParam::Eta => m.eta = v,
            ModelParam::Rho => m.rho = v,
            ModelParam::Theta => m.theta = v,
        }
    }
}

impl std::fmt::Display for ModelParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelParam::Xi => "xi",
            ModelParam::FHwhm => "f_hwhm",
            ModelParam::Eta => "eta",
            ModelParam::Rho => "rho",
            ModelParam::Theta => "theta",
        };
        f.write_str(s)
    }
}

/// Measured (or synthesized) spectra to fit. Branch vectors are aligned with
/// `frequencies`; non-finite entries count as missing. If a shot trace is
/// present, both branches are re-referenced to it before fitting.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectrumData<T> {
    pub frequencies: Vec<T>,
    pub squeezed_db: Option<Vec<T>>,
    pub antisqueezed_db: Option<Vec<T>>,
    pub shot_db: Option<Vec<T>>,
    /// Explicit bin mask (`false` excludes). On top of this, bins below
    /// 1 MHz are always excluded — the acquisition chain is unreliable there.
    pub mask: Option<Vec<bool>>,
}

impl<T: Real> SpectrumData<T> {
    pub fn validate(&self) -> Result<()> {
        let n = self.frequencies.len();
        let check = |name: &str, v: &Option<Vec<T>>| {
            if let Some(v) = v {
                if v.len() != n {
                    return Err(Error::InvalidParameter(format!(
                        "{name} has {} entries but the grid has {n}",
                        v.len()
                    )));
                }
            }
            Ok(())
        };
        check("squeezed_db", &self.squeezed_db)?;
        check("antisqueezed_db", &self.antisqueezed_db)?;
        check("shot_db", &self.shot_db)?;
        if let Some(m) = &self.mask {
            if m.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "mask has {} entries but the grid has {n}",
                    m.len()
                )));
            }
        }
        if self.squeezed_db.is_none() && self.antisqueezed_db.is_none() {
            return Err(Error::InvalidParameter(
                "spectrum data holds neither branch".into(),
            ));
        }
        Ok(())
    }

    fn bin_included(&self, i: usize) -> bool {
        let explicit = self.mask.as_ref().map_or(true, |m| m[i]);
        explicit && self.frequencies[i] >= T::of(1e6)
    }

    fn branch_value(&self, branch: &Option<Vec<T>>, i: usize) -> Option<T> {
        let raw = branch.as_ref().map(|v| v[i])?;
        if !raw.is_finite() {
            return None;
        }
        match &self.shot_db {
            Some(s) if s[i].is_finite() => Some(raw - s[i]),
            Some(_) => None,
            None => Some(raw),
        }
    }

    /// (frequency, squeezed?, anti?) rows that survive masking.
    fn usable_rows(&self) -> Vec<(T, Option<T>, Option<T>)> {
        (0..self.frequencies.len())
            .filter(|&i| self.bin_included(i))
            .filter_map(|i| {
                let sq = self.branch_value(&self.squeezed_db, i);
                let anti = self.branch_value(&self.antisqueezed_db, i);
                if sq.is_none() && anti.is_none() {
                    None
                } else {
                    Some((self.frequencies[i], sq, anti))
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem<T> {
    /// Fixed parameter values; for free parameters, the initial guess.
    pub base: SqueezingModel<T>,
    pub free: Vec<ModelParam>,
    /// Box bounds aligned with `free`.
    pub bounds: Vec<(T, T)>,
    /// Fit in linear relative power instead of dB.
    pub linear_residuals: bool,
    pub max_iterations: usize,
    /// Grid multi-start (recommended); when off, only `base` seeds the fit.
    pub multi_start: bool,
}

impl<T: Real> FitProblem<T> {
    pub fn new(base: SqueezingModel<T>, free: &[ModelParam]) -> Self {
        let bounds = free.iter().map(|p| default_bounds(*p, &base)).collect();
        FitProblem {
            base,
            free: free.to_vec(),
            bounds,
            linear_residuals: false,
            max_iterations: 200,
            multi_start: true,
        }
    }

    fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.free.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one parameter must be free".into(),
            ));
        }
        if self.free.len() != self.bounds.len() {
            return Err(Error::InvalidParameter(format!(
                "{} free parameters but {} bounds",
                self.free.len(),
                self.bounds.len()
            )));
        }
        for (i, p) in self.free.iter().enumerate() {
            if self.free[..i].contains(p) {
                return Err(Error::InvalidParameter(format!(
                    "parameter {p} listed twice"
                )));
            }
        }
        for (&(lo, hi), p) in self.bounds.iter().zip(self.free.iter()) {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "bad bounds ({lo}, {hi}) for {p}"
                )));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

fn default_bounds<T: Real>(p: ModelParam, base: &SqueezingModel<T>) -> (T, T) {
    match p {
        ModelParam::Xi => (T::zero(), T::of(0.999)),
        ModelParam::FHwhm => (base.f_hwhm / T::of(30.0), base.f_hwhm * T::of(30.0)),
        ModelParam::Eta => (T::of(0.01), T::one()),
        ModelParam::Rho => (T::of(0.01), T::one()),
        ModelParam::Theta => (T::zero(), T::of(0.5)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult<T> {
    /// Best-fit parameter set (fixed values carried through).
    pub model: SqueezingModel<T>,
    pub free: Vec<ModelParam>,
    /// Best-fit values of the free parameters, aligned with `free`.
    pub estimates: Vec<T>,
    /// Approximate 1σ errors from the final Jacobian.
    pub std_errors: Vec<T>,
    pub residual_rms_db: T,
    pub converged: bool,
    pub iterations: usize,
    /// Residual count (branch values, after masking).
    pub n_points: usize,
}

/// Residual vector for the rows; dB or linear per the problem flag.
fn residuals<T: Real>(
    rows: &[(T, Option<T>, Option<T>)],
    model: &SqueezingModel<T>,
    linear: bool,
    out: &mut Vec<T>,
) {
    out.clear();
    for &(f, sq, anti) in rows {
        let (rm, rp) = model.spectrum(f);
        if let Some(d) = sq {
            out.push(if linear {
                rm - crate::units::linear_from_db(d)
            } else {
                db_from_linear(rm.max(T::of(1e-12))) - d
            });
        }
        if let Some(d) = anti {
            out.push(if linear {
                rp - crate::units::linear_from_db(d)
            } else {
                db_from_linear(rp) - d
            });
        }
    }
}

fn ssr<T: Real>(r: &[T]) -> T {
    r.iter().map(|&x| x * x).sum()
}

/// Solve (A + λ diag(A)) δ = g for small symmetric positive-definite A by
/// Cholesky; `None` when the factorization breaks down.
fn solve_damped<T: Real>(a: &[Vec<T>], g: &[T], lambda: T) -> Option<Vec<T>> {
    let p = g.len();
    let mut m = vec![vec![T::zero(); p]; p];
    for i in 0..p {
        for j in 0..p {
            m[i][j] = a[i][j];
        }
        m[i][i] = a[i][i] * (T::one() + lambda) + T::of(1e-30);
    }
    // Cholesky m = L Lᵀ.
    let mut l = vec![vec![T::zero(); p]; p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = m[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > T::zero()) {
                    return None;
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    // Forward then back substitution.
    let mut y = vec![T::zero(); p];
    for i in 0..p {
        let mut s = g[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = vec![T::zero(); p];
    for i in (0..p).rev() {
        let mut s = y[i];
        for k in i + 1..p {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    Some(x)
}

struct LmOutcome<T> {
    x: Vec<T>,
    ssr: T,
    iterations: usize,
    converged: bool,
    /// SSR after each accepted step (monotone by construction).
    #[cfg_attr(not(test), allow(dead_code))]
    accepted_ssr: Vec<T>,
}

/// Damped least squares in rescaled coordinates u = x/s with projected box
/// bounds. `eval` fills the residual vector for a candidate x.
fn lm_minimize<T: Real>(
    x0: &[T],
    bounds: &[(T, T)],
    max_iterations: usize,
    mut eval: impl FnMut(&[T], &mut Vec<T>),
) -> LmOutcome<T> {
    let p = x0.len();
    let scale: Vec<T> = x0
        .iter()
        .zip(bounds)
        .map(|(&x, &(lo, hi))| {
            let s = x.abs().max((hi - lo) * T::of(1e-3));
            if s > T::zero() {
                s
            } else {
                T::one()
            }
        })
        .collect();
    let clamp = |x: &mut Vec<T>| {
        for ((v, &(lo, hi)), _) in x.iter_mut().zip(bounds).zip(0..) {
            *v = (*v).max(lo).min(hi);
        }
    };

    let mut x = x0.to_vec();
    clamp(&mut x);
    let mut r = Vec::new();
    eval(&x, &mut r);
    let n = r.len();
    let mut current = ssr(&r);
    let mut accepted_ssr = vec![current];
    let mut lambda = T::of(1e-3);
    let mut converged = false;
    let mut iterations = 0;

    let mut r_probe = Vec::with_capacity(n);
    let mut jac: Vec<Vec<T>> = Vec::new(); // columns, one per parameter
    while iterations < max_iterations {
        // Finite-difference Jacobian in u-coordinates (relative step 1e-6).
        jac.clear();
        for j in 0..p {
            let u = x[j] / scale[j];
            let du = T::of(1e-6) * u.abs().max(T::one());
            let mut xp = x.clone();
            xp[j] = (u + du) * scale[j];
            let (lo, hi) = bounds[j];
            if xp[j] > hi {
                xp[j] = (u - du) * scale[j];
            }
            xp[j] = xp[j].max(lo).min(hi);
            let actual_du = xp[j] / scale[j] - u;
            eval(&xp, &mut r_probe);
            let col: Vec<T> = if actual_du == T::zero() {
                vec![T::zero(); n]
            } else {
                r_probe
                    .iter()
                    .zip(r.iter())
                    .map(|(&rp, &r0)| (rp - r0) / actual_du)
                    .collect()
            };
            jac.push(col);
        }
        // Normal equations.
        let mut jtj = vec![vec![T::zero(); p]; p];
        let mut jtr = vec![T::zero(); p];
        for i in 0..p {
            for j in 0..=i {
                let s: T = jac[i].iter().zip(jac[j].iter()).map(|(&a, &b)| a * b).sum();
                jtj[i][j] = s;
                jtj[j][i] = s;
            }
            jtr[i] = jac[i].iter().zip(r.iter()).map(|(&a, &b)| a * b).sum();
        }
        let grad_norm = jtr.iter().map(|&g| g * g).sum::<T>().sqrt();
        if grad_norm <= T::of(1e-10) * (T::one() + current) {
            converged = true;
            break;
        }

        let mut stepped = false;
        while iterations < max_iterations {
            iterations += 1;
            let delta = match solve_damped(&jtj, &jtr, lambda) {
                Some(d) => d,
                None => {
                    lambda = lambda * T::of(10.0);
                    if lambda > T::of(1e14) {
                        break;
                    }
                    continue;
                }
            };
            let mut xn = x.clone();
            for j in 0..p {
                xn[j] = x[j] - delta[j] * scale[j];
            }
            clamp(&mut xn);
            eval(&xn, &mut r_probe);
            let next = ssr(&r_probe);
            if next.is_finite() && next < current {
                let improvement = current - next;
                x = xn;
                std::mem::swap(&mut r, &mut r_probe);
                current = next;
                accepted_ssr.push(current);
                lambda = (lambda / T::of(10.0)).max(T::of(1e-12));
                stepped = true;
                if improvement <= T::of(1e-12) * (T::one() + current) {
                    converged = true;
                }
                break;
            }
            lambda = lambda * T::of(10.0);
            if lambda > T::of(1e14) {
                // Cannot improve in any direction: local optimum at the
                // working precision.
                converged = true;
                break;
            }
        }
        if converged || !stepped {
            break;
        }
    }
    LmOutcome {
        x,
        ssr: current,
        iterations,
        converged,
        accepted_ssr,
    }
}

/// Multi-start grid: interior points per free parameter, capped so the
/// total start count stays at or below 625 (plus the user's initial guess).
fn start_grid<T: Real>(x0: &[T], bounds: &[(T, T)], enabled: bool) -> Vec<Vec<T>> {
    let mut starts = vec![x0.to_vec()];
    if !enabled {
        return starts;
    }
    let p = x0.len();
    let mut k = 5usize;
    while k > 1 && k.pow(p as u32) > 625 {
        k -= 1;
    }
    if k < 2 {
        return starts;
    }
    let total = k.pow(p as u32);
    for idx in 0..total {
        let mut rem = idx;
        let mut x = Vec::with_capacity(p);
        for &(lo, hi) in bounds {
            let i = rem % k;
            rem /= k;
            let frac = (T::from_usize(i).unwrap() + T::of(0.5)) / T::from_usize(k).unwrap();
            x.push(lo + (hi - lo) * frac);
        }
        starts.push(x);
    }
    starts
}

/// Fit the spectrum model to `data`. Returns the best local optimum over the
/// start grid; `converged = false` flags a fit that hit the iteration budget
/// (the best-so-far estimates are still returned).
pub fn fit_spectrum<T: Real>(
    data: &SpectrumData<T>,
    problem: &FitProblem<T>,
) -> Result<FitResult<T>> {
    data.validate()?;
    problem.validate()?;
    if problem.free.contains(&ModelParam::Eta) && problem.free.contains(&ModelParam::Rho) {
        return Err(Error::Unidentifiable(
            "eta and rho enter the spectrum only through their product; fit one and fix the other"
                .into(),
        ));
    }
    let rows = data.usable_rows();
    let n_points: usize = rows
        .iter()
        .map(|&(_, s, a)| s.is_some() as usize + a.is_some() as usize)
        .sum();
    let needed = 2 * problem.free.len();
    if rows.len() < needed {
        return Err(Error::TooFewPoints {
            needed,
            got: rows.len(),
        });
    }

    let x0: Vec<T> = problem.free.iter().map(|p| p.get(&problem.base)).collect();
    let starts = start_grid(&x0, &problem.bounds, problem.multi_start);
    let linear = problem.linear_residuals;
    let outcomes: Vec<LmOutcome<T>> = starts
        .par_iter()
        .map(|s| {
            let mut model = problem.base;
            lm_minimize(s, &problem.bounds, problem.max_iterations, |x, out| {
                for (param, &v) in problem.free.iter().zip(x) {
                    param.set(&mut model, v);
                }
                residuals(&rows, &model, linear, out);
            })
        })
        .collect();
    let best_idx = outcomes
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| {
            let ka = if a.ssr.is_finite() {
                a.ssr
            } else {
                T::infinity()
            };
            let kb = if b.ssr.is_finite() {
                b.ssr
            } else {
                T::infinity()
            };
            ka.partial_cmp(&kb).unwrap().then(i.cmp(j))
        })
        .map(|(i, _)| i)
        .unwrap();
    let best = &outcomes[best_idx];

    let mut model = problem.base;
    for (param, &v) in problem.free.iter().zip(&best.x) {
        param.set(&mut model, v);
    }
    let mut r = Vec::new();
    residuals(&rows, &model, linear, &mut r);
    let rms_db = if linear {
        // Convert the linear RMS to an equivalent dB figure for reporting.
        let mut rdb = Vec::new();
        residuals(&rows, &model, false, &mut rdb);
        (ssr(&rdb) / T::from_usize(rdb.len()).unwrap()).sqrt()
    } else {
        (ssr(&r) / T::from_usize(r.len()).unwrap()).sqrt()
    };
    let std_errors = standard_errors(&best.x, &problem.bounds, best.ssr, n_points, |x, out| {
        let mut m = problem.base;
        for (param, &v) in problem.free.iter().zip(x) {
            param.set(&mut m, v);
        }
        residuals(&rows, &m, linear, out);
    });

    Ok(FitResult {
        model,
        free: problem.free.clone(),
        estimates: best.x.clone(),
        std_errors,
        residual_rms_db: rms_db,
        converged: best.converged,
        iterations: best.iterations,
        n_points,
    })
}

/// 1σ errors from the finite-difference Jacobian at the optimum:
/// cov = ssr/(n−p) · (JᵀJ)⁻¹.
fn standard_errors<T: Real>(
    x: &[T],
    bounds: &[(T, T)],
    ssr_val: T,
    n: usize,
    mut eval: impl FnMut(&[T], &mut Vec<T>),
) -> Vec<T> {
    let p = x.len();
    if n <= p {
        return vec![T::nan(); p];
    }
    let mut r0 = Vec::new();
    eval(x, &mut r0);
    let mut jac: Vec<Vec<T>> = Vec::with_capacity(p);
    let mut rp = Vec::new();
    for j in 0..p {
        let du = T::of(1e-6) * x[j].abs().max(T::of(1e-6));
        let mut xp = x.to_vec();
        xp[j] = (x[j] + du).min(bounds[j].1);
        if xp[j] == x[j] {
            xp[j] = x[j] - du;
        }
        let actual = xp[j] - x[j];
        eval(&xp, &mut rp);
        jac.push(
            rp.iter()
                .zip(r0.iter())
                .map(|(&a, &b)| (a - b) / actual)
                .collect(),
        );
    }
    let mut jtj = vec![vec![T::zero(); p]; p];
    for i in 0..p {
        for j in 0..=i {
            let s: T = jac[i].iter().zip(jac[j].iter()).map(|(&a, &b)| a * b).sum();
            jtj[i][j] = s;
            jtj[j][i] = s;
        }
    }
    let sigma2 = ssr_val / T::from_usize(n - p).unwrap();
    // Invert via p solves against unit vectors.
    (0..p)
        .map(|i| {
            let mut e = vec![T::zero(); p];
            e[i] = T::one();
            match solve_damped(&jtj, &e, T::zero()) {
                Some(col) if col[i] > T::zero() => (sigma2 * col[i]).sqrt(),
                _ => T::nan(),
            }
        })
        .collect()
}

/// Pump-sweep observation at the probe frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpPointData<T> {
    /// Pump power, W.
    pub pump_power: T,
    pub squeezed_db: Option<T>,
    pub antisqueezed_db: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdEstimate<T> {
    /// Threshold pump power, W.
    pub threshold: T,
    pub std_error: T,
    pub residual_rms_db: T,
    pub converged: bool,
    pub iterations: usize,
    pub n_points: usize,
}

/// Estimate the oscillation threshold from sub-threshold pump points at
/// `probe_frequency`, holding (f_hwhm, eta, rho, theta) of `fixed` constant
/// (its `xi` is ignored). One-dimensional damped least squares over P_th.
pub fn estimate_threshold<T: Real>(
    points: &[PumpPointData<T>],
    probe_frequency: T,
    fixed: &SqueezingModel<T>,
) -> Result<ThresholdEstimate<T>> {
    fixed.validate()?;
    if !(probe_frequency > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "probe frequency must be positive, got {probe_frequency}"
        )));
    }
    let rows: Vec<&PumpPointData<T>> = points
        .iter()
        .filter(|p| {
            p.pump_power >= T::zero()
                && (matches!(p.squeezed_db, Some(v) if v.is_finite())
                    || matches!(p.antisqueezed_db, Some(v) if v.is_finite()))
        })
        .collect();
    if rows.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: rows.len(),
        });
    }
    let p_max = rows
        .iter()
        .map(|p| p.pump_power)
        .fold(T::zero(), |a, b| a.max(b));
    if !(p_max > T::zero()) {
        return Err(Error::InvalidParameter(
            "pump points need at least one nonzero power".into(),
        ));
    }
    let bounds = [(p_max * T::of(1.0001), p_max * T::of(1e3))];
    let n_points: usize = rows
        .iter()
        .map(|p| p.squeezed_db.is_some() as usize + p.antisqueezed_db.is_some() as usize)
        .sum();

    let eval = |x: &[T], out: &mut Vec<T>| {
        let p_th = x[0];
        out.clear();
        for row in &rows {
            let mut m = *fixed;
            m.xi = (row.pump_power / p_th).sqrt().min(T::of(0.9999));
            let (sq, anti) = m.spectrum_db(probe_frequency);
            if let Some(d) = row.squeezed_db {
                if d.is_finite() {
                    out.push(sq - d);
                }
            }
            if let Some(d) = row.antisqueezed_db {
                if d.is_finite() {
                    out.push(anti - d);
                }
            }
        }
    };

    // Log-spaced starts above the highest pump point.
    let starts: Vec<Vec<T>> = (0..8)
        .map(|i| {
            let frac = T::from_usize(i).unwrap() / T::of(7.0);
            vec![p_max * T::of(1.05) * T::of(100.0).powf(frac)]
        })
        .collect();
    let outcomes: Vec<LmOutcome<T>> = starts
        .par_iter()
        .map(|s| lm_minimize(s, &bounds, 200, eval))
        .collect();
    let best = outcomes
        .into_iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| {
            let ka = if a.ssr.is_finite() {
                a.ssr
            } else {
                T::infinity()
            };
            let kb = if b.ssr.is_finite() {
                b.ssr
            } else {
                T::infinity()
            };
            ka.partial_cmp(&kb).unwrap().then(i.cmp(j))
        })
        .map(|(_, o)| o)
        .unwrap();

    let threshold = best.x[0];
    let rms = (best.ssr / T::from_usize(n_points.max(1)).unwrap()).sqrt();
    // Pinned at the edge of the admissible region with a bad residual means
    // the points do not look like a sub-threshold sweep at all.
    let pinned_low = threshold <= bounds[0].0 * (T::one() + T::of(1e-6));
    let pinned_high = threshold >= bounds[0].1 * (T::one() - T::of(1e-6));
    if (pinned_low || pinned_high) && rms > T::of(3.0) {
        return Err(Error::NoConvergence(format!(
            "pump points are inconsistent with a sub-threshold sweep \
             (threshold pinned at {} W with RMS residual {} dB)",
            threshold.to_f64_lossy(),
            rms.to_f64_lossy()
        )));
    }
    let se = standard_errors(&best.x, &bounds, best.ssr, n_points, eval);
    Ok(ThresholdEstimate {
        threshold,
        std_error: se[0],
        residual_rms_db: rms,
        converged: best.converged,
        iterations: best.iterations,
        n_points,
    })
}
