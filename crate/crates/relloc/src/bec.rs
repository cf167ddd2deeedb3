//! Matter-wave interference between two released atom clouds.
//!
//! Two clouds (annihilation operators a, b) with relative wavevector 2k
//! overlap on a detection plane. Annihilating an atom at position x applies
//! ψ̂(x) ∝ a + e^{−2ikx} b, which is the right-port jump of
//! [`crate::focksim`] at shifter setting τ = 2kx — so every phase-locking
//! result carries over with the dictionary τ ↔ 2kx. The position enters only
//! through e^{−2ikx}: x is reducible mod π/k, and the upper half of that
//! period flips the sign, i.e. turns the jump into the left-port operator.
//! An atom record therefore drives the relative-phase posterior
//!
//! ```text
//!     ρ(Δ) ∝ Π_atoms cos²(k x_atom − Δ/2),
//! ```
//!
//! and once Δ has localized at Δ₀ the atom positions trace the fringe
//! cos²(kx − Δ₀/2). This module owns the position reduction, the two-setting
//! posterior that breaks the ±Δ₀ mirror, the exact joint law of two-setting
//! count events, and an atom-by-atom fringe simulator with a width timeline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::focksim::{AntiDiagState, Detector};
use crate::numkernel::{self, Grid1D, TWO_PI};
use crate::phaseloc::{self, DetectionRecord, RelativePhaseDensity};
use crate::{Error, Result};

/// A detection position folded into the fundamental domain [0, π/2k).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedPosition {
    /// folded position; the jump setting is τ = 2k·x_red
    pub x_red: f64,
    /// true when the fold crossed the sign flip: the jump is the left-port
    /// (anti-symmetric) operator instead of the right-port one
    pub flipped: bool,
}

/// Fold a detection position: x enters the jump operator only through
/// e^{−2ikx}, so positions repeat with period π/k, and the upper half-period
/// maps to the flipped (left-port) jump at the folded position.
pub fn reduce_position(x: f64, k: f64) -> Result<ReducedPosition> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Domain(format!("wavevector must be positive, got {k}")));
    }
    if !x.is_finite() {
        return Err(Error::Domain(format!("position must be finite, got {x}")));
    }
    let period = std::f64::consts::PI / k;
    let mut xm = x.rem_euclid(period);
    if xm >= period {
        xm = 0.0; // rem_euclid rounding at tiny negative x
    }
    let half = 0.5 * period;
    if xm < half {
        Ok(ReducedPosition { x_red: xm, flipped: false })
    } else {
        Ok(ReducedPosition { x_red: xm - half, flipped: true })
    }
}

/// Posterior from counts taken at two shifter settings: the two
/// single-setting kernels multiply. With the canonical settings 0 and π/2
/// the second record breaks the ±Δ₀ mirror symmetry of the first, which is
/// why two-setting records localize to a unique phase.
pub fn two_setting_density(
    first: &DetectionRecord,
    second: &DetectionRecord,
    grid: &Grid1D,
) -> Result<RelativePhaseDensity> {
    if first.total() + second.total() == 0 {
        return RelativePhaseDensity::uniform(*grid);
    }
    let log_w: Vec<f64> = grid
        .points()
        .map(|d| {
            phaseloc::log_record_kernel(d, first.l, first.r, first.tau)
                + phaseloc::log_record_kernel(d, second.l, second.r, second.tau)
        })
        .collect();
    RelativePhaseDensity::from_log_weights(*grid, &log_w)
}

/// One above-threshold two-setting count event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelyEvent {
    /// left counts among the M atoms taken at setting 0
    pub l1: u64,
    /// left counts among the M atoms taken at setting π/2
    pub l2: u64,
    pub probability: f64,
    /// location of the (unique) posterior peak for this event
    pub peak_delta: f64,
}

/// Joint law of two-setting count events for M atoms per setting.
#[derive(Debug, Clone)]
pub struct LikelyEvents {
    pub m_atoms: u64,
    /// the above-uniform cut: events kept iff p > 1/(M+1)²
    pub threshold: f64,
    /// above-threshold events, most probable first
    pub events: Vec<LikelyEvent>,
    /// total probability of the kept events
    pub kept_mass: f64,
    table: Vec<f64>,
}

impl LikelyEvents {
    /// P(l1, l2) from the full (M+1)² table.
    pub fn probability(&self, l1: u64, l2: u64) -> f64 {
        let side = self.m_atoms as usize + 1;
        self.table[l1 as usize * side + l2 as usize]
    }
}

/// Exact joint probability of observing l1 left counts among M atoms at
/// setting 0 and l2 among M more at setting π/2, for clouds with no prior
/// relative phase:
///
/// ```text
///     P(l1, l2) = (1/2π) ∫ dΔ  B(M, l1; sin²(Δ/2)) · B(M, l2; sin²((Δ−π/2)/2)),
/// ```
///
/// a flat phase average of independent binomial splits. Events above the
/// uniform benchmark 1/(M+1)² are returned with their posterior peaks; the
/// construction fails if any kept event's posterior is not single-peaked,
/// since a unique peak per likely event is the whole point of the second
/// setting.
pub fn likely_events(m_atoms: u64) -> Result<LikelyEvents> {
    if m_atoms < 1 {
        return Err(Error::Domain("need at least one atom per setting".into()));
    }
    let m = m_atoms as usize;
    let side = m + 1;
    // log C(M, l)
    let log_choose: Vec<f64> = (0..side)
        .map(|l| {
            numkernel::log_factorial(m as u64)
                - numkernel::log_factorial(l as u64)
                - numkernel::log_factorial((m - l) as u64)
        })
        .collect();
    // The integrand is a trigonometric polynomial of degree ≤ 2M, so a
    // uniform grid with > 4M+1 points integrates it exactly.
    let quad_n = (4 * m + 2).max(64).next_power_of_two();
    let mut table = vec![0.0f64; side * side];
    let binom_row = |tau: f64, delta: f64| -> Vec<f64> {
        (0..side)
            .map(|l| {
                (log_choose[l]
                    + phaseloc::log_record_kernel(delta, l as u64, (m - l) as u64, tau))
                .exp()
            })
            .collect()
    };
    for i in 0..quad_n {
        let delta = TWO_PI * i as f64 / quad_n as f64;
        let b1 = binom_row(0.0, delta);
        let b2 = binom_row(std::f64::consts::FRAC_PI_2, delta);
        for l1 in 0..side {
            for l2 in 0..side {
                table[l1 * side + l2] += b1[l1] * b2[l2];
            }
        }
    }
    for v in &mut table {
        *v /= quad_n as f64;
    }

    let threshold = 1.0 / (side * side) as f64;
    let mut kept: Vec<(usize, usize, f64)> = Vec::new();
    for l1 in 0..side {
        for l2 in 0..side {
            let p = table[l1 * side + l2];
            if p > threshold {
                kept.push((l1, l2, p));
            }
        }
    }
    kept.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap());
    let kept_mass = kept.iter().map(|&(_, _, p)| p).sum();

    let grid = Grid1D::phase(2048);
    let mut events = Vec::with_capacity(kept.len());
    for (l1, l2, p) in kept {
        let rec1 = DetectionRecord::new(l1 as u64, (m - l1) as u64, 0.0);
        let rec2 =
            DetectionRecord::new(l2 as u64, (m - l2) as u64, std::f64::consts::FRAC_PI_2);
        let dens = two_setting_density(&rec1, &rec2, &grid)?;
        let peak_delta = require_unique_peak(&dens).map_err(|e| {
            Error::Validation(format!(
                "event (l1={l1}, l2={l2}) of the M={m_atoms} table is not single-peaked: {e}"
            ))
        })?;
        events.push(LikelyEvent { l1: l1 as u64, l2: l2 as u64, probability: p, peak_delta });
    }
    Ok(LikelyEvents { m_atoms, threshold, events, kept_mass, table })
}

/// Peak position if the density has exactly one global peak: no other local
/// maximum may come within 0.1% of the top.
fn require_unique_peak(density: &RelativePhaseDensity) -> Result<f64> {
    let w = &density.weights;
    let n = w.len();
    let (imax, _) = density.argmax();
    let top = w[imax];
    if !(top > 0.0) {
        return Err(Error::NoPeak("density is identically zero".into()));
    }
    let mut candidates = 0usize;
    for i in 0..n {
        let prev = w[(i + n - 1) % n];
        let next = w[(i + 1) % n];
        if w[i] >= prev && w[i] >= next && w[i] >= 0.999 * top {
            candidates += 1;
        }
    }
    if candidates != 1 {
        return Err(Error::Validation(format!(
            "{candidates} near-degenerate local maxima"
        )));
    }
    Ok(density.grid.point(imax))
}

/// One simulated atom detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomDetection {
    /// representative position within one fringe period [0, π/k)
    pub x: f64,
    pub x_red: f64,
    pub flipped: bool,
    /// jump setting 2k·x_red actually applied
    pub tau: f64,
}

/// Posterior width after a given number of detections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthSample {
    pub detections: u64,
    pub width: f64,
}

/// An atom-by-atom interference run.
#[derive(Debug, Clone)]
pub struct FringeRun {
    pub k: f64,
    /// the Fock pair (n, m) the clouds started in
    pub initial_member: (usize, usize),
    pub atoms: Vec<AtomDetection>,
    /// fitted posterior width after each detection (entries where the
    /// parabola fit succeeded; always from the third detection on)
    pub width_timeline: Vec<WidthSample>,
    /// final relative-phase posterior
    pub posterior: RelativePhaseDensity,
}

const POSTERIOR_GRID: usize = 1024;

/// Simulate n_atoms successive atom detections from two clouds drawn as
/// independent Poisson(nbar) Fock pairs with no prior relative phase.
///
/// The atom-position marginal over one fold domain is flat for *any* state
/// (the two fold branches are the two ports, and their rates sum to the
/// remaining atom number), so each detection draws x_red uniformly, picks
/// the branch from the exact port probabilities, and applies the jump. The
/// run stops early if the clouds run out of atoms. Deterministic per seed.
pub fn simulate_fringes(nbar: f64, n_atoms: u64, k: f64, seed: u64) -> Result<FringeRun> {
    if !(nbar > 0.0) || !nbar.is_finite() {
        return Err(Error::Domain(format!("mean atom number must be positive, got {nbar}")));
    }
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Domain(format!("wavevector must be positive, got {k}")));
    }
    if n_atoms == 0 {
        return Err(Error::Domain("need at least one detection".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n0 = sample_poisson(nbar, &mut rng);
    let m0 = sample_poisson(nbar, &mut rng);
    let mut state = AntiDiagState::new(n0, m0);
    let grid = Grid1D::phase(POSTERIOR_GRID);
    let mut log_w = vec![0.0f64; grid.n];
    let half_period = std::f64::consts::FRAC_PI_2 / k;
    let mut atoms = Vec::with_capacity(n_atoms as usize);
    let mut width_timeline = Vec::new();
    for _ in 0..n_atoms {
        if state.photons_left() == 0 {
            break;
        }
        let x_red = rng.random::<f64>() * half_period;
        let tau = 2.0 * k * x_red;
        let (p_flip, p_keep) = state.branch_probs(tau);
        let total = p_flip + p_keep;
        if total <= 0.0 {
            break;
        }
        let flipped = rng.random::<f64>() * total < p_flip;
        let port = if flipped { Detector::Left } else { Detector::Right };
        state.apply(port, tau);
        state.renormalize();
        let x = if flipped { x_red + half_period } else { x_red };
        atoms.push(AtomDetection { x, x_red, flipped, tau });
        let (l, r) = if flipped { (1, 0) } else { (0, 1) };
        for (i, d) in grid.points().enumerate() {
            log_w[i] += phaseloc::log_record_kernel(d, l, r, tau);
        }
        if let Ok(density) = RelativePhaseDensity::from_log_weights(grid, &log_w) {
            if let Ok(width) = phaseloc::fitted_peak_width(&density) {
                width_timeline.push(WidthSample { detections: atoms.len() as u64, width });
            }
        }
    }
    if atoms.is_empty() {
        return Err(Error::Validation(
            "the drawn clouds were empty; no detections possible".into(),
        ));
    }
    let posterior = RelativePhaseDensity::from_log_weights(grid, &log_w)?;
    Ok(FringeRun { k, initial_member: (n0, m0), atoms, width_timeline, posterior })
}

/// Exact Poisson sampling by the exponential-race construction: the count is
/// the number of unit-rate arrivals before time λ. O(λ) draws, no underflow,
/// deterministic per RNG state.
fn sample_poisson(lambda: f64, rng: &mut ChaCha8Rng) -> usize {
    let mut t = 0.0f64;
    let mut n = 0usize;
    loop {
        // Exp(1) via inverse CDF; 1−u avoids ln(0)
        t += -(1.0 - rng.random::<f64>()).ln();
        if t > lambda {
            return n;
        }
        n += 1;
    }
}

/// Least-squares fringe fit on a 32-bin position histogram.
#[derive(Debug, Clone)]
pub struct FringeFit {
    /// fitted contrast √(a²+b²)/c of the model a·cos2kx + b·sin2kx + c
    pub visibility: f64,
    /// 1σ uncertainty of the contrast (delta method on the fit covariance)
    pub sigma_v: f64,
    /// fringe phase atan2(b, a), the fitted Δ₀
    pub phase: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// bin counts over one period [0, π/k)
    pub bins: Vec<f64>,
}

const FIT_BINS: usize = 32;

/// Fit the fringe cos²(kx − Δ₀/2) to detected positions: histogram one
/// period into 32 bins and solve the equivalent *linear* model
/// a·cos(2kx) + b·sin(2kx) + c by least squares. Contrast is √(a²+b²)/c and
/// its uncertainty comes from the residual variance through the normal
/// equations — no nonlinear optimizer, no starting guess.
pub fn fit_fringes(atoms: &[AtomDetection], k: f64) -> Result<FringeFit> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Domain(format!("wavevector must be positive, got {k}")));
    }
    if atoms.len() < 8 {
        return Err(Error::Validation(format!(
            "fringe fit needs at least 8 atoms, got {}",
            atoms.len()
        )));
    }
    let period = std::f64::consts::PI / k;
    let mut bins = vec![0.0f64; FIT_BINS];
    for a in atoms {
        let idx = ((a.x.rem_euclid(period) / period) * FIT_BINS as f64) as usize;
        bins[idx.min(FIT_BINS - 1)] += 1.0;
    }
    // design matrix rows (cos 2kx_j, sin 2kx_j, 1) at bin centers
    let mut xtx = [[0.0f64; 3]; 3];
    let mut xty = [0.0f64; 3];
    let mut rows = Vec::with_capacity(FIT_BINS);
    for (j, &h) in bins.iter().enumerate() {
        let x = (j as f64 + 0.5) / FIT_BINS as f64 * period;
        let row = [(2.0 * k * x).cos(), (2.0 * k * x).sin(), 1.0];
        for p in 0..3 {
            for q in 0..3 {
                xtx[p][q] += row[p] * row[q];
            }
            xty[p] += row[p] * h;
        }
        rows.push((row, h));
    }
    let sol = phaseloc::solve3(xtx, xty)
        .ok_or_else(|| Error::Validation("degenerate fringe design matrix".into()))?;
    let (a, b, c) = (sol[0], sol[1], sol[2]);
    if !(c > 0.0) {
        return Err(Error::UndefinedVisibility(format!(
            "fitted mean bin count is not positive (c = {c:.3})"
        )));
    }
    let amp = (a * a + b * b).sqrt();
    let visibility = amp / c;
    // residual variance and parameter covariance C = σ²(XᵀX)⁻¹
    let dof = (FIT_BINS - 3) as f64;
    let ssr: f64 = rows
        .iter()
        .map(|(row, h)| {
            let fit = row[0] * a + row[1] * b + row[2] * c;
            (h - fit) * (h - fit)
        })
        .sum();
    let sigma2 = ssr / dof;
    let mut cov = [[0.0f64; 3]; 3];
    for col in 0..3 {
        let mut e = [0.0; 3];
        e[col] = 1.0;
        let inv_col = phaseloc::solve3(xtx, e)
            .ok_or_else(|| Error::Validation("degenerate fringe design matrix".into()))?;
        for row in 0..3 {
            cov[row][col] = sigma2 * inv_col[row];
        }
    }
    // delta method: V = √(a²+b²)/c
    let g = if amp > 0.0 {
        [a / (c * amp), b / (c * amp), -amp / (c * c)]
    } else {
        [1.0 / c, 1.0 / c, 0.0]
    };
    let mut var_v = 0.0;
    for p in 0..3 {
        for q in 0..3 {
            var_v += g[p] * cov[p][q] * g[q];
        }
    }
    Ok(FringeFit {
        visibility,
        sigma_v: var_v.max(0.0).sqrt(),
        phase: b.atan2(a),
        a,
        b,
        c,
        bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn position_folding() {
        let k = 2.0;
        let period = std::f64::consts::PI / k;
        let r = reduce_position(0.75 * period, k).unwrap();
        assert!(r.flipped);
        assert_abs_diff_eq!(r.x_red, 0.25 * period, epsilon = 1e-14);
        let r = reduce_position(-0.25 * period, k).unwrap();
        assert!(r.flipped);
        assert_abs_diff_eq!(r.x_red, 0.25 * period, epsilon = 1e-13);
        let r = reduce_position(0.5 * period, k).unwrap();
        assert!(r.flipped);
        assert_abs_diff_eq!(r.x_red, 0.0, epsilon = 1e-14);
        let r = reduce_position(7.0 * period + 0.1, k).unwrap();
        assert!(!r.flipped);
        assert_abs_diff_eq!(r.x_red, 0.1, epsilon = 1e-12);
        assert!(reduce_position(1.0, 0.0).is_err());
        assert!(reduce_position(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn folded_jump_reproduces_the_continuous_fringe_law() {
        // detection at raw x must weight Δ by cos²(kx − Δ/2) regardless of
        // which fold branch it lands on
        let k = 3.0;
        for &x in &[0.05, 0.3, 0.7, 1.0, 1.4, 2.2, -0.6] {
            let rp = reduce_position(x, k).unwrap();
            let tau = 2.0 * k * rp.x_red;
            for &delta in &[0.0, 0.9, 2.5, 4.4] {
                let expected = (k * x - delta / 2.0).cos().powi(2);
                let (l, r) = if rp.flipped { (1, 0) } else { (0, 1) };
                let got = phaseloc::log_record_kernel(delta, l, r, tau).exp();
                assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn two_setting_density_is_the_kernel_product() {
        let grid = Grid1D::phase(512);
        let rec1 = DetectionRecord::new(2, 1, 0.0);
        let rec2 = DetectionRecord::new(1, 3, std::f64::consts::FRAC_PI_2);
        let dens = two_setting_density(&rec1, &rec2, &grid).unwrap();
        dens.check_normalized(1e-9).unwrap();
        // manual product, normalized the same way
        let log_w: Vec<f64> = grid
            .points()
            .map(|d| {
                phaseloc::log_record_kernel(d, 2, 1, 0.0)
                    + phaseloc::log_record_kernel(d, 1, 3, std::f64::consts::FRAC_PI_2)
            })
            .collect();
        let manual = RelativePhaseDensity::from_log_weights(grid, &log_w).unwrap();
        for (a, b) in dens.weights.iter().zip(&manual.weights) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-13);
        }
        // one empty record reduces to the single-setting density
        let empty = DetectionRecord::new(0, 0, std::f64::consts::FRAC_PI_2);
        let single = two_setting_density(&rec1, &empty, &grid).unwrap();
        let clr = phaseloc::clr_density(&rec1, &grid).unwrap();
        for (a, b) in single.weights.iter().zip(&clr.weights) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-13);
        }
        // both empty → uniform
        let flat = two_setting_density(&empty, &empty, &grid).unwrap();
        assert_abs_diff_eq!(flat.weights[3], 1.0 / TWO_PI, epsilon = 1e-12);
    }

    #[test]
    fn likely_event_table_is_normalized_and_engine_checked() {
        let m = 3usize;
        let out = likely_events(m as u64).unwrap();
        let side = m + 1;
        let total: f64 = (0..side)
            .flat_map(|l1| (0..side).map(move |l2| (l1, l2)))
            .map(|(l1, l2)| out.probability(l1 as u64, l2 as u64))
            .sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);

        // Independent route: drive the two-mode engine over a Poissonian
        // mixture and condition on M counts per setting. The conditional
        // split is mean-independent, so any sufficiently deep mixture works.
        let nbar = m as f64;
        let cutoff = (nbar + 6.0 * nbar.sqrt() + 2.0 * m as f64 + 6.0).ceil() as usize;
        let w: Vec<f64> = (0..=cutoff as u64)
            .map(|n| numkernel::log_poissonian(n, nbar).unwrap().exp())
            .collect();
        let mut table = vec![0.0f64; side * side];
        for n0 in 0..=cutoff {
            for m0 in 0..=cutoff {
                if n0 + m0 < 2 * m {
                    continue;
                }
                let weight = w[n0] * w[m0];
                for l2 in 0..side {
                    let mut st2 = AntiDiagState::new(n0, m0);
                    for _ in 0..(m - l2) {
                        st2.apply(Detector::Right, std::f64::consts::FRAC_PI_2);
                    }
                    for _ in 0..l2 {
                        st2.apply(Detector::Left, std::f64::consts::FRAC_PI_2);
                    }
                    for l1 in 0..side {
                        let mut st = st2.clone();
                        for _ in 0..(m - l1) {
                            st.apply(Detector::Right, 0.0);
                        }
                        for _ in 0..l1 {
                            st.apply(Detector::Left, 0.0);
                        }
                        let multiplicity = (-numkernel::log_factorial(l1 as u64)
                            - numkernel::log_factorial((m - l1) as u64)
                            - numkernel::log_factorial(l2 as u64)
                            - numkernel::log_factorial((m - l2) as u64))
                        .exp();
                        table[l1 * side + l2] += weight * multiplicity * st.norm_sq();
                    }
                }
            }
        }
        let z: f64 = table.iter().sum();
        for l1 in 0..side {
            for l2 in 0..side {
                assert_abs_diff_eq!(
                    table[l1 * side + l2] / z,
                    out.probability(l1 as u64, l2 as u64),
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn likely_events_m3_frozen_summary() {
        let out = likely_events(3).unwrap();
        assert_eq!(out.events.len(), 12);
        assert!((out.kept_mass - 0.9297).abs() < 1e-3, "mass = {}", out.kept_mass);
        // sorted descending, all above threshold
        for pair in out.events.windows(2) {
            assert!(pair[0].probability >= pair[1].probability);
        }
        assert!(out.events.iter().all(|e| e.probability > out.threshold));
        assert!(likely_events(0).is_err());
    }

    #[test]
    fn poisson_sampler_matches_the_pmf() {
        let lambda = 6.0;
        let trials = 40_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(313);
        let mut counts = [0usize; 32];
        let mut mean = 0.0;
        for _ in 0..trials {
            let n = sample_poisson(lambda, &mut rng);
            if n < counts.len() {
                counts[n] += 1;
            }
            mean += n as f64;
        }
        mean /= trials as f64;
        assert!((mean - lambda).abs() < 4.0 * (lambda / trials as f64).sqrt(), "mean {mean}");
        for (n, &c) in counts.iter().enumerate() {
            let p = numkernel::log_poissonian(n as u64, lambda).unwrap().exp();
            let sigma = (p * (1.0 - p) / trials as f64).sqrt();
            let got = c as f64 / trials as f64;
            assert!((got - p).abs() < 4.0 * sigma + 1e-9, "n={n}: {got} vs pmf {p}");
        }
    }

    #[test]
    fn fringe_run_is_deterministic_and_localizes() {
        let run1 = simulate_fringes(150.0, 120, 5.0, 42).unwrap();
        let run2 = simulate_fringes(150.0, 120, 5.0, 42).unwrap();
        assert_eq!(run1.atoms.len(), run2.atoms.len());
        for (a, b) in run1.atoms.iter().zip(&run2.atoms) {
            assert_eq!(a, b);
        }
        assert_eq!(run1.initial_member, run2.initial_member);
        let period = std::f64::consts::PI / 5.0;
        for a in &run1.atoms {
            assert!((0.0..period).contains(&a.x));
            assert!((0.0..TWO_PI).contains(&a.tau));
        }
        run1.posterior.check_normalized(1e-9).unwrap();
        // widths shrink as the record grows
        let first = run1.width_timeline.first().unwrap().width;
        let last = run1.width_timeline.last().unwrap().width;
        assert!(last < first, "widths {first} → {last}");
        assert!(last < 0.5, "final width {last}");
    }

    #[test]
    fn fringe_fit_recovers_a_planted_pattern() {
        // atoms placed by inverse-transform sampling of cos²(kx − Δ₀/2)
        let k = 4.0;
        let delta0 = 1.1;
        let period = std::f64::consts::PI / k;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut atoms = Vec::new();
        while atoms.len() < 4000 {
            let x = rng.random::<f64>() * period;
            let accept = (k * x - delta0 / 2.0).cos().powi(2);
            if rng.random::<f64>() < accept {
                atoms.push(AtomDetection { x, x_red: 0.0, flipped: false, tau: 0.0 });
            }
        }
        let fit = fit_fringes(&atoms, k).unwrap();
        assert!((fit.visibility - 1.0).abs() < 0.08, "V = {}", fit.visibility);
        assert!(
            phaseloc_wrap(fit.phase - delta0).abs() < 0.08,
            "phase = {}",
            fit.phase
        );
        assert!(fit.sigma_v < 0.05);
        // uniform atoms carry no fringe
        let flat: Vec<AtomDetection> = (0..4000)
            .map(|i| AtomDetection {
                x: (i as f64 + 0.5) / 4000.0 * period,
                x_red: 0.0,
                flipped: false,
                tau: 0.0,
            })
            .collect();
        let fit = fit_fringes(&flat, k).unwrap();
        assert!(fit.visibility < 0.02, "V = {}", fit.visibility);
        assert!(fit_fringes(&atoms[..3], k).is_err());
    }

    fn phaseloc_wrap(x: f64) -> f64 {
        let mut y = x.rem_euclid(TWO_PI);
        if y > std::f64::consts::PI {
            y -= TWO_PI;
        }
        y
    }
}
