//! Log-domain special functions and quadrature shared by all other modules.
//!
//! Counts l+r run into the hundreds, so every count-dependent product
//! (factorials, Poissonian weights, sin^l·cos^r kernels) is assembled in
//! log-domain and exponentiated only after subtracting the maximum.
//! `log(0)` is represented as `-inf` and survives the exponentiation step
//! as an exact zero, which spares every caller from special-casing grid
//! points where a kernel vanishes.

use crate::{Error, Result};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// ln Γ(x). Thin wrapper over libm's lgamma (≈1 ulp); kept as a named
/// function so call sites read like the formulas they implement.
#[inline]
pub fn log_gamma(x: f64) -> f64 {
    libm::lgamma_r(x).0
}

/// ln n!
#[inline]
pub fn log_factorial(n: u64) -> f64 {
    log_gamma(n as f64 + 1.0)
}

/// ln Π_n(μ) for the Poissonian distribution Π_n(μ) = μⁿ e^{−μ} / n!.
pub fn log_poissonian(n: u64, mu: f64) -> Result<f64> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::Domain(format!(
            "poissonian mean must be positive and finite, got {mu}"
        )));
    }
    Ok(n as f64 * mu.ln() - mu - log_factorial(n))
}

/// Uniform double average of the detection kernel over both mode phases:
/// ∫∫ (dθ/2π)(dφ/2π) sin^{2l}((φ−θ)/2) cos^{2r}((φ−θ)/2)
///   = Γ(r+½)Γ(l+½) / (π Γ(r+l+1)).
pub fn phase_moment_integral(r: u64, l: u64) -> f64 {
    (log_gamma(r as f64 + 0.5) + log_gamma(l as f64 + 0.5)
        - std::f64::consts::PI.ln()
        - log_gamma((r + l) as f64 + 1.0))
    .exp()
}

/// Bessel function of the first kind, J₀ (libm-backed, musl port).
/// Validated in tests against the quadrature identity
/// J₀(x) = (1/2π)∫₀^{2π} cos(x sinθ) dθ and the first root.
#[inline]
pub fn bessel_j0(x: f64) -> f64 {
    libm::j0(x)
}

/// Trapezoidal rule for ∫₀^{2π} f, sampling n ≥ 4 equispaced points.
/// Spectrally accurate for smooth periodic integrands.
pub fn periodic_quadrature<F: Fn(f64) -> f64>(f: F, n: usize) -> f64 {
    assert!(n >= 4, "periodic quadrature needs at least 4 points");
    let h = TWO_PI / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        acc += f(i as f64 * h);
    }
    acc * h
}

/// Composite Simpson rule on [a, b] with an even number of panels. Used for
/// the short non-periodic angular segments of the scattering observer model.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    assert!(panels >= 2 && panels % 2 == 0, "need an even panel count >= 2");
    assert!(b >= a);
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for i in 1..panels {
        let w = if i % 2 == 0 { 2.0 } else { 4.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// A uniform 1-D grid. Periodic grids omit the duplicate endpoint, so the
/// spacing is (hi−lo)/n; bounded grids include both endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub periodic: bool,
}

impl Grid1D {
    pub fn new(lo: f64, hi: f64, n: usize, periodic: bool) -> Result<Self> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!("bad grid bounds [{lo}, {hi}]")));
        }
        if n < 2 {
            return Err(Error::Config(format!("grid needs n >= 2 points, got {n}")));
        }
        Ok(Self { lo, hi, n, periodic })
    }

    /// The standard relative-phase grid: Δ ∈ [0, 2π), periodic.
    pub fn phase(n: usize) -> Self {
        Self::new(0.0, TWO_PI, n, true).expect("static bounds")
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        if self.periodic {
            (self.hi - self.lo) / self.n as f64
        } else {
            (self.hi - self.lo) / (self.n - 1) as f64
        }
    }

    #[inline]
    pub fn point(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.spacing()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.point(i))
    }

    /// Quadrature of sampled values: rectangle rule on periodic grids
    /// (= trapezoid there), trapezoid on bounded grids.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.n {
            return Err(Error::Validation(format!(
                "grid has {} points but {} values supplied",
                self.n,
                values.len()
            )));
        }
        let h = self.spacing();
        let s = if self.periodic {
            values.iter().sum::<f64>()
        } else {
            values.iter().sum::<f64>() - 0.5 * (values[0] + values[self.n - 1])
        };
        Ok(s * h)
    }
}

/// Exponentiate log-weights after max-subtraction and normalize to unit
/// quadrature over `grid`. `-inf` entries become exact zeros.
pub fn normalized_from_log(log_w: &[f64], grid: &Grid1D) -> Result<Vec<f64>> {
    if log_w.len() != grid.n {
        return Err(Error::Validation(format!(
            "grid has {} points but {} log-weights supplied",
            grid.n,
            log_w.len()
        )));
    }
    let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::Validation(
            "all log-weights are -inf or NaN; nothing to normalize".into(),
        ));
    }
    let mut w: Vec<f64> = log_w.iter().map(|&lw| (lw - top).exp()).collect();
    let z = grid.integrate(&w)?;
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Validation(format!("non-normalizable weights, integral {z}")));
    }
    for v in &mut w {
        *v /= z;
    }
    Ok(w)
}
