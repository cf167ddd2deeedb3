//! Relative-position localization of two massive particles.
//!
//! The same measurement logic that locks a relative optical phase locks the
//! separation Δr = y − x of two particles once the probe couples only to the
//! relative coordinate. Two probes are covered:
//!
//! * a "rubber cavity" — light bouncing between mirrors mounted on the two
//!   particles — whose detections multiply the Δr density by
//!   sin^{2l}·cos^{2r}(√2 k Δr / 2), the phase kernel under Δ = √2 kΔr;
//! * free photons scattering off the pair, watched by an observer that can
//!   only tell "came through within ±ε of the forward direction" (forward)
//!   from "went elsewhere" (deflection). Averaging the unresolved scattering
//!   angle leaves Bessel-type diagonal kernels in Δr.
//!
//! Everything is represented as the diagonal position-space density: every
//! kernel in scope is multiplicative on the diagonal, and the off-diagonal
//! structure never enters the reported observables. Densities carry hard
//! support bounds (the particles live in a finite region), applied as
//! truncation of the relative coordinate.

use num_complex::Complex64;

use crate::numkernel::{self, Grid1D};
use crate::{Error, Result};

/// A probability density over the relative separation Δr = y − x.
#[derive(Debug, Clone)]
pub struct RelativePositionDensity {
    pub grid: Grid1D,
    pub density: Vec<f64>,
    /// hard support bounds (lower, upper); the density is zero outside
    pub region: (f64, f64),
}

impl RelativePositionDensity {
    /// Uniform density over the intersection of `region` with the grid.
    pub fn uniform(grid: Grid1D, region: (f64, f64)) -> Result<Self> {
        let (lo, hi) = region;
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!("bad support region ({lo}, {hi})")));
        }
        let raw: Vec<f64> = grid
            .points()
            .map(|z| if (lo..=hi).contains(&z) { 1.0 } else { 0.0 })
            .collect();
        Self::from_weights(grid, raw, region)
    }

    /// Normalize nonnegative weights into a density (zeros survive exactly).
    pub fn from_weights(grid: Grid1D, weights: Vec<f64>, region: (f64, f64)) -> Result<Self> {
        if weights.len() != grid.n {
            return Err(Error::Validation(format!(
                "grid has {} points but {} weights supplied",
                grid.n,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Validation("weights must be finite and nonnegative".into()));
        }
        let z = grid.integrate(&weights)?;
        if !(z > 0.0) {
            return Err(Error::Validation(format!("non-normalizable density, integral {z}")));
        }
        let density = weights.into_iter().map(|w| w / z).collect();
        Ok(Self { grid, density, region })
    }

    pub fn check_normalized(&self, tol: f64) -> Result<()> {
        let z = self.grid.integrate(&self.density)?;
        if (z - 1.0).abs() > tol {
            return Err(Error::Validation(format!(
                "position density integrates to {z}, outside 1 ± {tol}"
            )));
        }
        Ok(())
    }

    /// Grid argmax as (index, Δr value).
    pub fn argmax(&self) -> (usize, f64) {
        let mut best = 0;
        for i in 1..self.density.len() {
            if self.density[i] > self.density[best] {
                best = i;
            }
        }
        (best, self.grid.point(best))
    }

    /// ∫ |ρ − σ| dΔr between two densities on the same grid.
    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        if other.grid != self.grid {
            return Err(Error::Validation("L1 distance needs matching grids".into()));
        }
        let abs_diff: Vec<f64> = self
            .density
            .iter()
            .zip(&other.density)
            .map(|(a, b)| (a - b).abs())
            .collect();
        self.grid.integrate(&abs_diff)
    }

    /// Multiply by a pointwise nonnegative kernel and renormalize.
    fn updated_by(&self, kernel: impl Fn(f64) -> f64) -> Result<Self> {
        let weights: Vec<f64> = self
            .grid
            .points()
            .zip(&self.density)
            .map(|(z, &d)| d * kernel(z))
            .collect();
        Self::from_weights(self.grid, weights, self.region)
    }
}

// ---------------------------------------------------------------------------
// rubber cavity
// ---------------------------------------------------------------------------

/// Fold l "minus-port" and r "plus-port" rubber-cavity detections into the
/// prior: the photon round trip picks up the phase √2 kΔr, so the record
/// kernel is sin^{2l}(√2 kΔr/2)·cos^{2r}(√2 kΔr/2) — the optical-phase
/// kernel under Δ = √2 kΔr, with period π√2/k in the separation. The empty
/// record returns the prior unchanged.
pub fn rubber_cavity_localize(
    prior: &RelativePositionDensity,
    l: u64,
    r: u64,
    k: f64,
) -> Result<RelativePositionDensity> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Domain(format!("photon momentum must be positive, got {k}")));
    }
    if l + r == 0 {
        return Ok(prior.clone());
    }
    // log-domain so large counts cannot underflow the comb structure
    let log_w: Vec<f64> = prior
        .grid
        .points()
        .zip(&prior.density)
        .map(|(z, &d)| {
            let x = std::f64::consts::SQRT_2 * k * z / 2.0;
            let ls = if l == 0 { 0.0 } else { 2.0 * l as f64 * x.sin().abs().ln() };
            let rc = if r == 0 { 0.0 } else { 2.0 * r as f64 * x.cos().abs().ln() };
            d.ln() + ls + rc
        })
        .collect();
    let weights = numkernel::normalized_from_log(&log_w, &prior.grid)?;
    RelativePositionDensity::from_weights(prior.grid, weights, prior.region)
}

// ---------------------------------------------------------------------------
// coarse-grained scattering observer
// ---------------------------------------------------------------------------

/// What the narrow-field-of-view observer reports for one probe photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScatterOutcome {
    /// photon seen within ±ε of the incident direction (includes genuine
    /// small-angle scattering off the pair)
    Forward,
    /// photon seen anywhere else
    Deflect,
}

/// A bundle of coarse scattering events sharing one probe configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterRecord {
    pub forward: u64,
    pub deflect: u64,
    /// probe photon momentum
    pub k: f64,
    /// observer half-angle ε (radians)
    pub eps_angle: f64,
    /// cumulative momentum kick ζ handed to the centre of mass; pure
    /// bookkeeping, the relative-coordinate kernels never see it
    pub cumulative_kick: f64,
}

impl ScatterRecord {
    pub fn new(forward: u64, deflect: u64, k: f64, eps_angle: f64) -> Result<Self> {
        check_probe(k, eps_angle)?;
        Ok(Self { forward, deflect, k, eps_angle, cumulative_kick: 0.0 })
    }

    pub fn outcomes(&self) -> impl Iterator<Item = ScatterOutcome> {
        std::iter::repeat(ScatterOutcome::Forward)
            .take(self.forward as usize)
            .chain(std::iter::repeat(ScatterOutcome::Deflect).take(self.deflect as usize))
    }
}

fn check_probe(k: f64, eps_angle: f64) -> Result<()> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Domain(format!("photon momentum must be positive, got {k}")));
    }
    if !(0.0..0.5).contains(&eps_angle) {
        return Err(Error::Domain(format!(
            "observer half-angle must be small and nonnegative, got {eps_angle}"
        )));
    }
    Ok(())
}

/// The two single-photon diagonal kernels (forward, deflect) at separation
/// Δr. With the scattering angle unresolved beyond the ±ε window,
///
/// ```text
///   deflect(Δr) = ∫_{ε}^{2π−ε} (dθ/2π) cos²((k sinθ/2)·Δr)
///   forward(Δr) = ∫₀^{2π} (dθ/2π) sin²((k sinθ/2)·Δr)  +  ∫_{−ε}^{ε} (dθ/2π) cos²(…)
/// ```
///
/// — the sin² term is the unscattered amplitude interfering with itself, the
/// cos² window term is genuine small-angle scattering the observer cannot
/// distinguish from it. The two kernels sum to exactly 1 pointwise for every
/// ε. At ε = 0 they collapse to (1 ∓ J₀(kΔr))/2.
pub(crate) fn scatter_kernels(delta_r: f64, k: f64, eps_angle: f64) -> (f64, f64) {
    let half = |theta: f64| 0.5 * k * theta.sin() * delta_r;
    let s_full =
        numkernel::periodic_quadrature(|t| half(t).sin().powi(2), ANGULAR_POINTS)
            / numkernel::TWO_PI;
    let c_window = if eps_angle > 0.0 {
        // cos² is even in θ, so integrate [0, ε] and double
        2.0 * numkernel::simpson(|t| half(t).cos().powi(2), 0.0, eps_angle, 64)
            / numkernel::TWO_PI
    } else {
        0.0
    };
    let forward = s_full + c_window;
    let deflect = (1.0 - s_full) - c_window;
    (forward, deflect)
}

const ANGULAR_POINTS: usize = 512;

/// Bayes-update the separation density on one coarse scattering outcome.
pub fn coarse_scatter_update(
    prior: &RelativePositionDensity,
    outcome: ScatterOutcome,
    k: f64,
    eps_angle: f64,
) -> Result<RelativePositionDensity> {
    check_probe(k, eps_angle)?;
    prior.updated_by(|z| {
        let (fw, df) = scatter_kernels(z, k, eps_angle);
        match outcome {
            ScatterOutcome::Forward => fw,
            ScatterOutcome::Deflect => df,
        }
    })
}

/// Closed-form separation density after F forward and D deflection events
/// with a point-like (ε = 0) observer on a flat prior:
/// ρ(Δr) ∝ [1 − J₀(kΔr)]^F [1 + J₀(kΔr)]^D.
pub fn bessel_pattern(f: u64, d: u64, k: f64, grid: &Grid1D) -> Result<RelativePositionDensity> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Domain(format!("photon momentum must be positive, got {k}")));
    }
    if f + d == 0 {
        return Err(Error::Domain(
            "an empty scattering record updates nothing; need F + D >= 1".into(),
        ));
    }
    let log_w: Vec<f64> = grid
        .points()
        .map(|z| {
            let j = numkernel::bessel_j0(k * z);
            let lf = if f == 0 { 0.0 } else { f as f64 * (1.0 - j).max(0.0).ln() };
            let ld = if d == 0 { 0.0 } else { d as f64 * (1.0 + j).max(0.0).ln() };
            lf + ld
        })
        .collect();
    let weights = numkernel::normalized_from_log(&log_w, grid)?;
    RelativePositionDensity::from_weights(*grid, weights, (grid.lo, grid.hi))
}

// ---------------------------------------------------------------------------
// thermal particles and thermal light
// ---------------------------------------------------------------------------

/// Separation prior for two independent particles drawn uniformly over a
/// region (lo, hi) with thermal Gaussian wavepackets of spatial spread d:
/// the triangular autocorrelation of the region, smoothed at scale σ = d√2,
///
/// ```text
///     ρ(z) = [I₂(z+W) − 2·I₂(z) + I₂(z−W)] / W²,   I₂(t) = t·Φ_σ(t) + σ²·φ_σ(t),
/// ```
///
/// with W = hi − lo, then hard-truncated to the physical support [−W, W].
/// The temperature and mass enter only through d.
pub fn thermal_prior(region: (f64, f64), d: f64, grid: &Grid1D) -> Result<RelativePositionDensity> {
    let (lo, hi) = region;
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Config(format!("bad region ({lo}, {hi})")));
    }
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Config(format!("wavepacket spread must be positive, got {d}")));
    }
    let w = hi - lo;
    if w < 3.0 * d {
        return Err(Error::Config(format!(
            "region width {w} too narrow for spread {d}; need at least 3d"
        )));
    }
    let sigma = d * std::f64::consts::SQRT_2;
    let i2 = |t: f64| {
        let u = t / (sigma * std::f64::consts::SQRT_2);
        let cdf = 0.5 * (1.0 + libm::erf(u));
        let pdf = (-0.5 * (t / sigma) * (t / sigma)).exp()
            / (sigma * (numkernel::TWO_PI).sqrt());
        t * cdf + sigma * sigma * pdf
    };
    let weights: Vec<f64> = grid
        .points()
        .map(|z| {
            if z.abs() > w {
                0.0
            } else {
                ((i2(z + w) - 2.0 * i2(z) + i2(z - w)) / (w * w)).max(0.0)
            }
        })
        .collect();
    RelativePositionDensity::from_weights(*grid, weights, (-w, w))
}

/// Σ_n p_n cos(n·u) for thermal photon-number weights
/// p_n = n̄ⁿ/(1+n̄)^{n+1}, resummed in closed form:
/// the geometric series gives Re[1 / (1 + n̄(1 − e^{iu}))].
pub(crate) fn thermal_cos_resummed(u: f64, nbar: f64) -> f64 {
    let denom = Complex64::new(1.0 + nbar * (1.0 - u.cos()), -nbar * u.sin());
    (Complex64::ONE / denom).re
}

/// Thermal-light twins of [`scatter_kernels`]: the fixed momentum kick
/// k sinθ becomes n·k sinθ for the n-photon component, so under the thermal
/// mixture every cos(k sinθ Δr) in the single-photon kernels is replaced by
/// the resummed Σ_n p_n cos(n k sinθ Δr). The pair still sums to 1.
pub(crate) fn thermal_scatter_kernels(
    delta_r: f64,
    k: f64,
    eps_angle: f64,
    nbar: f64,
) -> (f64, f64) {
    let t_of = |theta: f64| thermal_cos_resummed(k * theta.sin() * delta_r, nbar);
    let s_full = numkernel::periodic_quadrature(|t| 0.5 * (1.0 - t_of(t)), ANGULAR_POINTS)
        / numkernel::TWO_PI;
    let c_window = if eps_angle > 0.0 {
        2.0 * numkernel::simpson(|t| 0.5 * (1.0 + t_of(t)), 0.0, eps_angle, 64)
            / numkernel::TWO_PI
    } else {
        0.0
    };
    let forward = s_full + c_window;
    let deflect = (1.0 - s_full) - c_window;
    (forward, deflect)
}

/// Run a sequence of coarse scattering outcomes with *thermal* probe pulses
/// of mean photon number nbar instead of single photons. Each event mixes
/// the n-photon kernels (kick scaled by n) with thermal weights; as n̄ → 0
/// the pulses are empty and the update degenerates to a constant kernel,
/// i.e. no information.
pub fn thermal_light_scatter(
    prior: &RelativePositionDensity,
    nbar: f64,
    outcomes: &[ScatterOutcome],
    k: f64,
    eps_angle: f64,
) -> Result<RelativePositionDensity> {
    check_probe(k, eps_angle)?;
    if !(nbar > 0.0) || !nbar.is_finite() {
        return Err(Error::Domain(format!("mean photon number must be positive, got {nbar}")));
    }
    let mut out = prior.clone();
    for oc in outcomes {
        out = out.updated_by(|z| {
            let (fw, df) = thermal_scatter_kernels(z, k, eps_angle, nbar);
            match oc {
                ScatterOutcome::Forward => fw,
                ScatterOutcome::Deflect => df,
            }
        })?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// COM ⊗ relative decomposition
// ---------------------------------------------------------------------------

/// A 1-D Gaussian wavepacket: mean momentum k, mean position a, spread d.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianWavepacket {
    pub k: f64,
    pub a: f64,
    pub d: f64,
}

impl GaussianWavepacket {
    pub fn new(k: f64, a: f64, d: f64) -> Result<Self> {
        if !(d > 0.0) || !d.is_finite() || !k.is_finite() || !a.is_finite() {
            return Err(Error::Config(format!(
                "wavepacket needs finite (k, a) and d > 0, got k={k}, a={a}, d={d}"
            )));
        }
        Ok(Self { k, a, d })
    }

    /// Normalized amplitude (πd²)^{−1/4}·exp(ikx − (x−a)²/(2d²)).
    pub fn evaluate(&self, x: f64) -> Complex64 {
        let norm = (std::f64::consts::PI * self.d * self.d).powf(-0.25);
        let gauss = (-(x - self.a) * (x - self.a) / (2.0 * self.d * self.d)).exp();
        Complex64::from_polar(norm * gauss, self.k * x)
    }
}

/// Split a product of equal-spread wavepackets into centre-of-mass and
/// relative factors, in the coordinates u_com = (x+y)/2, u_rel = (y−x)/2:
///
/// ```text
///     ψ_{k₁,a₁,d}(x) ψ_{k₂,a₂,d}(y)
///         = ψ_{k₁+k₂, (a₁+a₂)/2, d/√2}(u_com) · ψ_{k₂−k₁, (a₂−a₁)/2, d/√2}(u_rel)
/// ```
///
/// up to the constant Jacobian of the coordinate change. Relative-coordinate
/// measurements then factor out: they reshape the second factor and merely
/// translate the first.
pub fn com_rel_decompose(
    p1: &GaussianWavepacket,
    p2: &GaussianWavepacket,
) -> Result<(GaussianWavepacket, GaussianWavepacket)> {
    if (p1.d - p2.d).abs() > 1e-12 * p1.d.abs().max(p2.d.abs()) {
        return Err(Error::Config(format!(
            "decomposition needs equal spreads, got {} and {}",
            p1.d, p2.d
        )));
    }
    let half_spread = p1.d / std::f64::consts::SQRT_2;
    let com = GaussianWavepacket::new(p1.k + p2.k, 0.5 * (p1.a + p2.a), half_spread)?;
    let rel = GaussianWavepacket::new(p2.k - p1.k, 0.5 * (p2.a - p1.a), half_spread)?;
    Ok((com, rel))
}
