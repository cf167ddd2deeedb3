//! Analytic relative-phase localization.
//!
//! A record of l "left" and r "right" counts taken at phase-shifter setting
//! τ multiplies any flat relative-phase prior by the kernel
//!
//! ```text
//!     ρ(Δ) ∝ sin^{2l}((Δ−τ)/2) · cos^{2r}((Δ−τ)/2)
//! ```
//!
//! This module owns that kernel family: normalized densities, peak locations
//! Δ₀ = 2 arccos√(r/(l+r)) with their Gaussian asymptotics, the record
//! probability laws for Fock, Poissonian and thermal inputs, and the
//! Fock-basis expansion of the mirrored ("cat") limit state. Everything here
//! is closed-form or quadrature; the brute-force cross-checks live in
//! `focksim` and the integration tests.

use num_complex::Complex64;

use crate::numkernel::{self, Grid1D, TWO_PI};
use crate::{Error, Result};

/// Counts accumulated at one phase-shifter setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionRecord {
    /// counts at the left detector (the sin-kernel port)
    pub l: u64,
    /// counts at the right detector (the cos-kernel port)
    pub r: u64,
    /// phase-shifter setting, reduced to [0, 2π)
    pub tau: f64,
}

impl DetectionRecord {
    pub fn new(l: u64, r: u64, tau: f64) -> Self {
        Self { l, r, tau: wrap_tau(tau) }
    }

    #[inline]
    pub fn total(&self) -> u64 {
        self.l + self.r
    }
}

fn wrap_tau(tau: f64) -> f64 {
    let t = tau.rem_euclid(TWO_PI);
    // rem_euclid can return exactly 2π for tiny negative inputs
    if t >= TWO_PI {
        0.0
    } else {
        t
    }
}

/// Wrap an angle difference into [−π, π].
#[inline]
pub(crate) fn wrap_pm_pi(x: f64) -> f64 {
    let mut y = x.rem_euclid(TWO_PI);
    if y > std::f64::consts::PI {
        y -= TWO_PI;
    }
    y
}

/// Normalized probability density over the relative phase Δ ∈ [0, 2π).
#[derive(Debug, Clone)]
pub struct RelativePhaseDensity {
    pub grid: Grid1D,
    pub weights: Vec<f64>,
}

impl RelativePhaseDensity {
    pub fn uniform(grid: Grid1D) -> Result<Self> {
        require_phase_grid(&grid)?;
        let w = 1.0 / TWO_PI;
        Ok(Self { grid, weights: vec![w; grid.n] })
    }

    /// Build from unnormalized log-weights (max-subtracted internally).
    pub fn from_log_weights(grid: Grid1D, log_w: &[f64]) -> Result<Self> {
        require_phase_grid(&grid)?;
        let weights = numkernel::normalized_from_log(log_w, &grid)?;
        Ok(Self { grid, weights })
    }

    /// Grid argmax as (index, Δ value).
    pub fn argmax(&self) -> (usize, f64) {
        let mut best = 0;
        for i in 1..self.weights.len() {
            if self.weights[i] > self.weights[best] {
                best = i;
            }
        }
        (best, self.grid.point(best))
    }

    pub fn check_normalized(&self, tol: f64) -> Result<()> {
        let z = self.grid.integrate(&self.weights)?;
        if (z - 1.0).abs() > tol {
            return Err(Error::Validation(format!(
                "phase density integrates to {z}, outside 1 ± {tol}"
            )));
        }
        Ok(())
    }
}

fn require_phase_grid(grid: &Grid1D) -> Result<()> {
    let ok = grid.periodic && grid.lo == 0.0 && (grid.hi - TWO_PI).abs() < 1e-12;
    if !ok {
        return Err(Error::Config(
            "relative-phase densities need a periodic grid over [0, 2pi)".into(),
        ));
    }
    Ok(())
}

/// log of the single-setting record kernel sin^{2l}·cos^{2r}((Δ−τ)/2).
/// Zeros of the kernel come back as −inf, by design.
#[inline]
pub(crate) fn log_record_kernel(delta: f64, l: u64, r: u64, tau: f64) -> f64 {
    let x = (delta - tau) / 2.0;
    let (s, c) = (x.sin().abs(), x.cos().abs());
    let ls = if l == 0 { 0.0 } else { 2.0 * l as f64 * s.ln() };
    let rc = if r == 0 { 0.0 } else { 2.0 * r as f64 * c.ln() };
    ls + rc
}

/// Posterior relative-phase density of a single-setting record on a flat
/// prior. The empty record returns the uniform density.
pub fn clr_density(record: &DetectionRecord, grid: &Grid1D) -> Result<RelativePhaseDensity> {
    require_phase_grid(grid)?;
    if record.total() == 0 {
        return RelativePhaseDensity::uniform(*grid);
    }
    let log_w: Vec<f64> = grid
        .points()
        .map(|d| log_record_kernel(d, record.l, record.r, record.tau))
        .collect();
    RelativePhaseDensity::from_log_weights(*grid, &log_w)
}

/// Where a record localizes the relative phase, in the τ = 0 frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizationPeaks {
    /// principal peak Δ₀ ∈ [0, π]; the density actually peaks at τ + Δ₀
    pub delta0: f64,
    /// true iff the mirror peak at 2π − Δ₀ is also present
    pub mirrored: bool,
    /// standard deviation of the asymptotic Gaussian amplitude profile
    pub gaussian_width: f64,
}

/// Peak structure of the record kernel: Δ₀ = 2 arccos√(r/(l+r)), mirrored
/// at 2π − Δ₀ whenever both counts are nonzero. Width conventions (std of
/// the *amplitude* Gaussian, in the τ = 0 frame):
/// mixed records exp[−((l+r)/4)(Δ−Δ₀)²] ⇒ σ² = 2/(l+r);
/// single-port records exp[−(r/8)Δ²] or exp[−(l/8)(Δ−π)²] ⇒ σ = 2/√r, 2/√l.
pub fn localization_peaks(record: &DetectionRecord) -> Result<LocalizationPeaks> {
    let s = record.total();
    if s == 0 {
        return Err(Error::NoPeak("empty record localizes nothing".into()));
    }
    let (l, r) = (record.l, record.r);
    let delta0 = 2.0 * ((r as f64 / s as f64).sqrt()).acos();
    let (mirrored, gaussian_width) = if l == 0 {
        (false, 2.0 / (r as f64).sqrt())
    } else if r == 0 {
        (false, 2.0 / (l as f64).sqrt())
    } else {
        (true, (2.0 / s as f64).sqrt())
    };
    Ok(LocalizationPeaks { delta0, mirrored, gaussian_width })
}

/// Sup-norm distance between the max-normalized exact kernel *amplitude*
/// |sin^l cos^r((Δ−τ)/2)| and its Gaussian asymptote. For mixed records the
/// asymptote is a pair of Gaussians exp[−((l+r)/4)(Δ−τ∓Δ₀)²]; single-port
/// records use exp[−(r/8)(Δ−τ)²] resp. exp[−(l/8)(Δ−τ−π)²].
pub fn gaussian_asymptote_error(record: &DetectionRecord, grid: &Grid1D) -> Result<f64> {
    require_phase_grid(grid)?;
    let s = record.total();
    if s == 0 {
        return Err(Error::NoPeak("empty record has no asymptote".into()));
    }
    let (l, r, tau) = (record.l, record.r, record.tau);
    let peaks = localization_peaks(record)?;
    // max of the log-amplitude over the grid, for normalization
    let log_amp: Vec<f64> = grid
        .points()
        .map(|d| 0.5 * log_record_kernel(d, l, r, tau))
        .collect();
    let top = log_amp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sup = 0.0f64;
    for (i, d) in grid.points().enumerate() {
        let exact = (log_amp[i] - top).exp();
        let approx = if l > 0 && r > 0 {
            let q = s as f64 / 4.0;
            let dp = wrap_pm_pi(d - tau - peaks.delta0);
            let dm = wrap_pm_pi(d - tau + peaks.delta0);
            (-q * dp * dp).exp() + (-q * dm * dm).exp()
        } else if l == 0 {
            let dd = wrap_pm_pi(d - tau);
            (-(r as f64) / 8.0 * dd * dd).exp()
        } else {
            let dd = wrap_pm_pi(d - tau - std::f64::consts::PI);
            (-(l as f64) / 8.0 * dd * dd).exp()
        };
        sup = sup.max((exact - approx).abs());
    }
    Ok(sup)
}

/// Record probability for initial occupancy N per mode and leaked fraction
/// eps: a Poissonian factor in the total count s = l+r with mean 2εN times
/// the phase-average of the record kernel,
///
/// ```text
///     P(l,r) = Π_s(2εN) · C(s,l) · Γ(r+½)Γ(l+½)/(π Γ(s+1)).
/// ```
///
/// An approximation for Fock inputs (fractional error growing roughly like
/// 0.6 ε), exact for Poissonian inputs of mean N per mode.
pub fn plr_fock_approx(l: u64, r: u64, n_initial: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("leaked fraction must be in (0,1), got {eps}")));
    }
    if !(n_initial >= 1.0) || !n_initial.is_finite() {
        return Err(Error::Domain(format!(
            "initial occupancy must be >= 1, got {n_initial}"
        )));
    }
    let s = l + r;
    let log_p = numkernel::log_poissonian(s, 2.0 * eps * n_initial)?
        + numkernel::log_gamma(r as f64 + 0.5)
        + numkernel::log_gamma(l as f64 + 0.5)
        - std::f64::consts::PI.ln()
        - numkernel::log_factorial(l)
        - numkernel::log_factorial(r);
    Ok(log_p.exp())
}

/// Exact record probability for two independent thermal modes of mean
/// occupation nbar at leaked fraction eps:
/// P(l,r) = (N̄ε)^{l+r} / (1+εN̄)^{l+r+2} — it depends on (l,r) only
/// through the total count.
pub fn plr_thermal(l: u64, r: u64, nbar: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("leaked fraction must be in (0,1), got {eps}")));
    }
    if !(nbar > 0.0) || !nbar.is_finite() {
        return Err(Error::Domain(format!("thermal mean must be positive, got {nbar}")));
    }
    let s = (l + r) as f64;
    let q = nbar * eps;
    Ok((s * q.ln() - (s + 2.0) * q.ln_1p()).exp())
}

/// Fock-basis expansion of the mirrored limit state reached after a long
/// mixed record: a superposition of relative phases ±Δ₀ summed over the
/// global phase.
#[derive(Debug, Clone)]
pub struct CatStateDescriptor {
    pub gamma_mag: f64,
    pub delta0: f64,
    /// total photon number 2|γ|² of the expansion
    pub total_photons: u64,
    /// amplitude per m = 0..=total_photons; Σ|amp|² = 1
    pub fock_amplitudes: Vec<Complex64>,
}

/// Amplitudes √(Π_{2|γ|²−m}(|γ|²) Π_m(|γ|²)) · e^{imΔ₀}, normalized.
/// All 2|γ|²+1 amplitudes are strictly nonzero, so the induced two-mode
/// state has full Schmidt rank on its photon-number ladder.
pub fn cat_descriptor(gamma_sq: u64, delta0: f64) -> CatStateDescriptor {
    assert!(gamma_sq >= 1, "need |gamma|^2 >= 1");
    let total = 2 * gamma_sq;
    let mu = gamma_sq as f64;
    let log_mod: Vec<f64> = (0..=total)
        .map(|m| {
            0.5 * (numkernel::log_poissonian(total - m, mu).expect("mu > 0")
                + numkernel::log_poissonian(m, mu).expect("mu > 0"))
        })
        .collect();
    let top = log_mod.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut amps: Vec<Complex64> = log_mod
        .iter()
        .enumerate()
        .map(|(m, &lm)| {
            Complex64::from_polar((lm - top).exp(), m as f64 * delta0)
        })
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amps {
        *a /= norm;
    }
    CatStateDescriptor {
        gamma_mag: mu.sqrt(),
        delta0,
        total_photons: total,
        fock_amplitudes: amps,
    }
}

/// Measured width of a density peak: least-squares parabola on the
/// log-density over the contiguous window around the global maximum where
/// log ρ ≥ max − ½, reported as √(−1/c₂) for the fitted curvature c₂ —
/// i.e. √2 × the standard deviation of the local Gaussian profile, the same
/// convention as [`LocalizationPeaks::gaussian_width`].
pub fn fitted_peak_width(density: &RelativePhaseDensity) -> Result<f64> {
    let n = density.weights.len();
    let (i0, x0) = density.argmax();
    let log_w: Vec<f64> = density.weights.iter().map(|&w| w.ln()).collect();
    let top = log_w[i0];
    if !top.is_finite() {
        return Err(Error::NoPeak("density maximum is zero".into()));
    }
    // expand a contiguous window (periodic) while log stays within 1/2 of top
    let mut xs = vec![0.0f64];
    let mut ys = vec![0.0f64]; // log relative to top
    let h = density.grid.spacing();
    for dir in [-1i64, 1i64] {
        for step in 1..(n as i64) {
            let j = (i0 as i64 + dir * step).rem_euclid(n as i64) as usize;
            let y = log_w[j] - top;
            if !(y >= -0.5) {
                break;
            }
            xs.push(dir as f64 * step as f64 * h);
            ys.push(y);
            if step as usize * 2 >= n {
                break;
            }
        }
    }
    if xs.len() < 5 {
        return Err(Error::NoPeak(format!(
            "peak at {x0:.4} narrower than the grid ({} window points)",
            xs.len()
        )));
    }
    // normal equations for y = c2 x^2 + c1 x + c0
    let m = xs.len() as f64;
    let (mut sx, mut sx2, mut sx3, mut sx4) = (0.0, 0.0, 0.0, 0.0);
    let (mut sy, mut sxy, mut sx2y) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(&ys) {
        let x2 = x * x;
        sx += x;
        sx2 += x2;
        sx3 += x2 * x;
        sx4 += x2 * x2;
        sy += y;
        sxy += x * y;
        sx2y += x2 * y;
    }
    let c2 = solve3(
        [[sx4, sx3, sx2], [sx3, sx2, sx], [sx2, sx, m]],
        [sx2y, sxy, sy],
    )
    .ok_or_else(|| Error::NoPeak("degenerate window for parabola fit".into()))?[0];
    if !(c2 < 0.0) {
        return Err(Error::NoPeak(format!("non-concave log-density at peak (c2 = {c2})")));
    }
    Ok((-1.0 / c2).sqrt())
}

/// Solve a 3×3 linear system by Cramer's rule; None on (near-)singularity.
pub(crate) fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&a);
    if d.abs() < 1e-300 {
        return None;
    }
    let mut out = [0.0; 3];
    for k in 0..3 {
        let mut ak = a;
        for row in 0..3 {
            ak[row][k] = b[row];
        }
        out[k] = det(&ak) / d;
    }
    Some(out)
}
