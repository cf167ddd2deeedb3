//! Exact two-mode quantum-trajectory engine on a truncated Fock grid.
//!
//! The physical picture: two cavities (modes a, b) leak into a beam splitter
//! with a phase shifter τ on one arm; detectors sit at the two output ports.
//! A click at the left/right port applies the jump operator
//!
//! ```text
//!     K_{L,τ} = (a − e^{−iτ} b)/√2,      K_{R,τ} = (a + e^{−iτ} b)/√2,
//! ```
//!
//! and the no-click evolution after a total leaked fraction ε is the
//! damping D_ε = (1−ε)^{(n̂_a+n̂_b)/2}. The sign of the e^{−iτ} phase is
//! chosen so that a record taken at setting τ multiplies the relative-phase
//! posterior by sin^{2l}·cos^{2r}((Δ−τ)/2), i.e. the same frame as
//! [`crate::phaseloc`]; the coherent-family integration test pins this.
//!
//! K's at any settings commute with each other and (up to scalars) with the
//! damping, so the conditional state for a record (l, r) at fixed τ is
//! K_L^l K_R^r D_ε |ψ₀⟩ however the events were interleaved, and the exact
//! record probability for a number-diagonal ensemble is
//!
//! ```text
//!     P(l,r) = (ε/(1−ε))^{l+r} / (l!·r!) · Σ_members w · ‖K_L^l K_R^r D_ε |n,m⟩‖².
//! ```
//!
//! (Each of the l!·r! orderings of a given record is one continuous-time
//! history; commuting the K's past the damping turns the per-event leak
//! weights into the (ε/(1−ε))^{l+r} prefactor. The tests verify this sums
//! to one and reproduces every closed-form law in `phaseloc`.)
//!
//! Everything trajectory-shaped starts in a Fock member |n₀,m₀⟩ of a
//! number-diagonal mixture, and both damping and detections preserve the
//! anti-diagonal n+m = const of the amplitude grid, so the hot paths run on
//! an anti-diagonal vector of O(detections) complex coefficients rather
//! than the dense (cutoff+1)² grid.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numkernel::{self, Grid1D, TWO_PI};
use crate::par;
use crate::phaseloc::{self, RelativePhaseDensity};
use crate::{Error, Result};

/// Which output port clicked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detector {
    Left,
    Right,
}

/// One detection event: the port that clicked and the shifter setting at
/// the moment of the click (reduced to [0, 2π)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub detector: Detector,
    pub tau: f64,
}

impl JumpEvent {
    pub fn new(detector: Detector, tau: f64) -> Self {
        Self { detector, tau: tau.rem_euclid(TWO_PI) % TWO_PI }
    }
}

// ---------------------------------------------------------------------------
// dense state
// ---------------------------------------------------------------------------

/// A (possibly unnormalized) pure state of two modes, truncated at `cutoff`
/// photons per mode. Amplitudes are stored row-major over (n, m).
#[derive(Debug, Clone)]
pub struct TwoModeFockState {
    cutoff: usize,
    amps: Vec<Complex64>,
    /// accumulated ln of the squared norms divided out by `normalize`, so
    /// the joint probability of everything conditioned on so far stays
    /// recoverable as exp(norm_log)
    norm_log: f64,
}

impl TwoModeFockState {
    pub fn vacuum(cutoff: usize) -> Self {
        let side = cutoff + 1;
        let mut amps = vec![Complex64::ZERO; side * side];
        amps[0] = Complex64::ONE;
        Self { cutoff, amps, norm_log: 0.0 }
    }

    /// |n⟩|m⟩.
    pub fn fock(n: usize, m: usize, cutoff: usize) -> Result<Self> {
        if n > cutoff || m > cutoff {
            return Err(Error::CutoffOverflow(format!(
                "|{n},{m}> does not fit under cutoff {cutoff}"
            )));
        }
        let mut st = Self::vacuum(cutoff);
        st.amps[0] = Complex64::ZERO;
        let side = cutoff + 1;
        st.amps[n * side + m] = Complex64::ONE;
        Ok(st)
    }

    /// Truncated product of coherent states |α⟩|β⟩, normalized on the grid.
    /// The truncation tail must be below 1e−10.
    pub fn coherent_product(alpha: Complex64, beta: Complex64, cutoff: usize) -> Result<Self> {
        let side = cutoff + 1;
        let mode = |amp: Complex64| -> Vec<Complex64> {
            let mu = amp.norm_sqr();
            (0..side)
                .map(|n| {
                    let log_mod = if mu == 0.0 {
                        if n == 0 { 0.0 } else { f64::NEG_INFINITY }
                    } else {
                        0.5 * numkernel::log_poissonian(n as u64, mu).expect("mu > 0")
                    };
                    Complex64::from_polar(log_mod.exp(), n as f64 * amp.arg())
                })
                .collect()
        };
        let (va, vb) = (mode(alpha), mode(beta));
        let mut st = Self::vacuum(cutoff);
        for n in 0..side {
            for m in 0..side {
                st.amps[n * side + m] = va[n] * vb[m];
            }
        }
        let tail = 1.0 - st.norm_sq();
        if tail > 1e-10 {
            return Err(Error::CutoffOverflow(format!(
                "coherent tail mass {tail:.2e} above cutoff {cutoff}"
            )));
        }
        st.normalize()?;
        st.norm_log = 0.0;
        Ok(st)
    }

    #[inline]
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    #[inline]
    pub fn amp(&self, n: usize, m: usize) -> Complex64 {
        self.amps[n * (self.cutoff + 1) + m]
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    #[inline]
    pub fn norm_log(&self) -> f64 {
        self.norm_log
    }

    /// Normalize in place; returns the squared norm that was divided out
    /// and accumulates its log into `norm_log`.
    pub fn normalize(&mut self) -> Result<f64> {
        let n2 = self.norm_sq();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::Validation(format!("cannot normalize state with norm² {n2}")));
        }
        let inv = 1.0 / n2.sqrt();
        for a in &mut self.amps {
            *a *= inv;
        }
        self.norm_log += n2.ln();
        Ok(n2)
    }

    /// ⟨n̂_a⟩ and ⟨n̂_b⟩ of the *unnormalized* amplitudes (callers divide by
    /// norm_sq when they need expectations).
    pub fn mode_occupation_sums(&self) -> (f64, f64) {
        let side = self.cutoff + 1;
        let (mut na, mut nb) = (0.0, 0.0);
        for n in 0..side {
            for m in 0..side {
                let w = self.amps[n * side + m].norm_sqr();
                na += n as f64 * w;
                nb += m as f64 * w;
            }
        }
        (na, nb)
    }

    /// Σ ⟨a†b⟩ contribution of the unnormalized amplitudes.
    pub fn cross_moment_sum(&self) -> Complex64 {
        let side = self.cutoff + 1;
        let mut x = Complex64::ZERO;
        // a†b |n,m⟩ = √((n+1)m) |n+1, m−1⟩
        for n in 0..side - 1 {
            for m in 1..side {
                x += self.amps[(n + 1) * side + (m - 1)].conj()
                    * ((n + 1) as f64 * m as f64).sqrt()
                    * self.amps[n * side + m];
            }
        }
        x
    }

    /// Apply one jump operator. The result is unnormalized: its norm² is
    /// the (relative) probability of the click, and an identically-zero
    /// result signals an impossible detection (e.g. on vacuum).
    pub fn apply_detection(&self, event: &JumpEvent) -> TwoModeFockState {
        let side = self.cutoff + 1;
        let phase = Complex64::from_polar(1.0, -event.tau);
        let sign = match event.detector {
            Detector::Left => -1.0,
            Detector::Right => 1.0,
        };
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let mut out = vec![Complex64::ZERO; side * side];
        for n in 0..side {
            for m in 0..side {
                let a_part = if n + 1 < side {
                    ((n + 1) as f64).sqrt() * self.amps[(n + 1) * side + m]
                } else {
                    Complex64::ZERO
                };
                let b_part = if m + 1 < side {
                    ((m + 1) as f64).sqrt() * self.amps[n * side + m + 1]
                } else {
                    Complex64::ZERO
                };
                out[n * side + m] = (a_part + sign * phase * b_part) * inv_sqrt2;
            }
        }
        TwoModeFockState { cutoff: self.cutoff, amps: out, norm_log: self.norm_log }
    }

    /// No-count damping for a cumulative leaked fraction eps:
    /// amplitudes scale by (1−ε)^{(n+m)/2}.
    pub fn apply_leakage(&self, eps: f64) -> Result<TwoModeFockState> {
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::Domain(format!("leaked fraction must be in [0,1), got {eps}")));
        }
        let side = self.cutoff + 1;
        let half_log = 0.5 * (1.0 - eps).ln();
        let mut out = self.amps.clone();
        for n in 0..side {
            for m in 0..side {
                out[n * side + m] *= ((n + m) as f64 * half_log).exp();
            }
        }
        Ok(TwoModeFockState { cutoff: self.cutoff, amps: out, norm_log: self.norm_log })
    }
}

// ---------------------------------------------------------------------------
// anti-diagonal fast path
// ---------------------------------------------------------------------------

/// State reachable from |n₀,m₀⟩ by s detections: support on the
/// anti-diagonal n+m = n₀+m₀−s, indexed by the number i of a-mode removals.
/// Coefficient k (relative to `i_lo`) multiplies |n₀−(i_lo+k), m₀−(s−i_lo−k)⟩.
#[derive(Debug, Clone)]
pub(crate) struct AntiDiagState {
    pub n0: usize,
    pub m0: usize,
    pub s: usize,
    pub coeff: Vec<Complex64>,
}

impl AntiDiagState {
    pub fn new(n0: usize, m0: usize) -> Self {
        Self { n0, m0, s: 0, coeff: vec![Complex64::ONE] }
    }

    #[inline]
    pub fn i_lo(&self) -> usize {
        self.s.saturating_sub(self.m0)
    }

    /// remaining total photon number
    #[inline]
    pub fn photons_left(&self) -> usize {
        (self.n0 + self.m0).saturating_sub(self.s)
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeff.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn scale(&mut self, f: f64) {
        for c in &mut self.coeff {
            *c *= f;
        }
    }

    pub fn renormalize(&mut self) {
        let n = self.norm_sq().sqrt();
        if n > 0.0 {
            let inv = 1.0 / n;
            for c in &mut self.coeff {
                *c *= inv;
            }
        }
    }

    /// ⟨a†b⟩ sum of the unnormalized coefficients.
    pub fn cross_moment_sum(&self) -> Complex64 {
        let (n0, m0, s) = (self.n0, self.m0, self.s);
        let lo = self.i_lo();
        let mut x = Complex64::ZERO;
        for k in 1..self.coeff.len() {
            let i = lo + k;
            // pairs (i−1, i): a†b moves index i → i−1
            let f = ((n0 - i + 1) as f64 * (m0 + i - s) as f64).sqrt();
            x += self.coeff[k - 1].conj() * f * self.coeff[k];
        }
        x
    }

    /// Apply K_{L/R,τ}; support shrinks to the next anti-diagonal.
    pub fn apply(&mut self, detector: Detector, tau: f64) {
        let (n0, m0, s) = (self.n0, self.m0, self.s);
        if s >= n0 + m0 {
            // nothing left to detect
            self.s += 1;
            self.coeff = vec![];
            return;
        }
        let phase = Complex64::from_polar(1.0, -tau);
        let sign = match detector {
            Detector::Left => -1.0,
            Detector::Right => 1.0,
        };
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let old_lo = self.i_lo();
        let s1 = s + 1;
        let new_lo = s1.saturating_sub(m0);
        let new_hi = s1.min(n0);
        if new_lo > new_hi {
            self.s = s1;
            self.coeff = vec![];
            return;
        }
        let mut out = vec![Complex64::ZERO; new_hi - new_lo + 1];
        let old = |i: usize| -> Complex64 {
            if i < old_lo || i > s.min(n0) {
                Complex64::ZERO
            } else {
                self.coeff[i - old_lo]
            }
        };
        for (k, slot) in out.iter_mut().enumerate() {
            let i = new_lo + k;
            // a-removal source: index i−1 on the previous level
            let a_part = if i >= 1 {
                ((n0 - (i - 1)) as f64).sqrt() * old(i - 1)
            } else {
                Complex64::ZERO
            };
            // b-removal source: same index i, needs m₀−(s−i) ≥ 1
            let b_left = m0 as f64 - s as f64 + i as f64;
            let b_part = if b_left >= 1.0 {
                b_left.sqrt() * old(i)
            } else {
                Complex64::ZERO
            };
            *slot = (a_part + sign * phase * b_part) * inv_sqrt2;
        }
        self.s = s1;
        self.coeff = out;
    }

    /// (‖K_{L,τ}ψ‖², ‖K_{R,τ}ψ‖²) without building the branches:
    /// ‖K_±ψ‖² = ½[⟨n̂_a⟩+⟨n̂_b⟩ ± 2 Re(e^{−iτ}⟨a†b⟩)].
    pub fn branch_probs(&self, tau: f64) -> (f64, f64) {
        let ntot = self.photons_left() as f64 * self.norm_sq();
        let cross = (Complex64::from_polar(1.0, -tau) * self.cross_moment_sum()).re;
        let p_l = 0.5 * (ntot - 2.0 * cross);
        let p_r = 0.5 * (ntot + 2.0 * cross);
        (p_l.max(0.0), p_r.max(0.0))
    }

    /// Embed into a dense state under the given cutoff.
    pub fn to_dense(&self, cutoff: usize) -> Result<TwoModeFockState> {
        let mut st = TwoModeFockState::vacuum(cutoff);
        st.amps[0] = Complex64::ZERO;
        let side = cutoff + 1;
        let lo = self.i_lo();
        for (k, &c) in self.coeff.iter().enumerate() {
            let i = lo + k;
            let (n, m) = (self.n0 - i, self.m0 - (self.s - i));
            if n > cutoff || m > cutoff {
                return Err(Error::CutoffOverflow(format!(
                    "anti-diagonal support |{n},{m}> exceeds cutoff {cutoff}"
                )));
            }
            st.amps[n * side + m] = c;
        }
        Ok(st)
    }
}

// ---------------------------------------------------------------------------
// ensembles
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnsembleKind {
    Fock,
    Poissonian,
    Thermal,
}

/// A number-diagonal two-mode mixture: statistical weights over Fock pairs
/// (n, m). Poissonian and thermal ensembles are products of independent
/// single-mode distributions, truncated at `cutoff` per mode and
/// renormalized (truncated tail mass must be below 1e−10).
#[derive(Debug, Clone)]
pub struct MixedEnsemble {
    pub kind: EnsembleKind,
    pub cutoff: usize,
    /// mean occupation per mode for Poissonian/Thermal kinds
    pub nbar: Option<f64>,
    members: Vec<(f64, (usize, usize))>,
}

const ENSEMBLE_TAIL_TOL: f64 = 1e-10;

fn mode_weight_log(kind: EnsembleKind, nbar: f64, n: u64) -> f64 {
    match kind {
        EnsembleKind::Poissonian => numkernel::log_poissonian(n, nbar).expect("nbar > 0"),
        EnsembleKind::Thermal => {
            n as f64 * (nbar.ln() - nbar.ln_1p()) - nbar.ln_1p()
        }
        EnsembleKind::Fock => unreachable!("fock ensembles have explicit members"),
    }
}

impl MixedEnsemble {
    /// The pure product |n⟩|m⟩ as a trivial one-member ensemble.
    pub fn fock(n: usize, m: usize) -> Self {
        Self {
            kind: EnsembleKind::Fock,
            cutoff: n.max(m),
            nbar: None,
            members: vec![(1.0, (n, m))],
        }
    }

    pub fn poissonian(nbar: f64, cutoff: Option<usize>) -> Result<Self> {
        Self::product(EnsembleKind::Poissonian, nbar, cutoff)
    }

    pub fn thermal(nbar: f64, cutoff: Option<usize>) -> Result<Self> {
        Self::product(EnsembleKind::Thermal, nbar, cutoff)
    }

    fn product(kind: EnsembleKind, nbar: f64, cutoff: Option<usize>) -> Result<Self> {
        if !(nbar > 0.0) || !nbar.is_finite() {
            return Err(Error::Domain(format!("mean occupation must be positive, got {nbar}")));
        }
        let floor = (nbar + 5.0 * nbar.sqrt()).ceil() as usize;
        let cut = match cutoff {
            Some(c) => c,
            None => {
                // smallest cutoff with per-mode tail below half the budget
                let mut c = floor;
                while mode_tail(kind, nbar, c) >= 0.5 * ENSEMBLE_TAIL_TOL {
                    c += 1 + c / 8;
                    if c > 2_000_000 {
                        return Err(Error::CutoffOverflow(
                            "no workable cutoff below 2e6 photons per mode".into(),
                        ));
                    }
                }
                c
            }
        };
        let tail = mode_tail(kind, nbar, cut);
        if 2.0 * tail > ENSEMBLE_TAIL_TOL {
            return Err(Error::CutoffOverflow(format!(
                "per-mode tail mass {tail:.3e} at cutoff {cut} exceeds the {ENSEMBLE_TAIL_TOL:.0e} budget"
            )));
        }
        let w: Vec<f64> = (0..=cut as u64)
            .map(|n| mode_weight_log(kind, nbar, n).exp())
            .collect();
        let z: f64 = w.iter().sum();
        let mut members = Vec::with_capacity((cut + 1) * (cut + 1));
        for n in 0..=cut {
            for m in 0..=cut {
                members.push((w[n] * w[m] / (z * z), (n, m)));
            }
        }
        Ok(Self { kind, cutoff: cut, nbar: Some(nbar), members })
    }

    pub fn members(&self) -> &[(f64, (usize, usize))] {
        &self.members
    }
}

fn mode_tail(kind: EnsembleKind, nbar: f64, cut: usize) -> f64 {
    match kind {
        EnsembleKind::Thermal => {
            // geometric tail: (N̄/(1+N̄))^{cut+1}
            ((cut as f64 + 1.0) * (nbar.ln() - nbar.ln_1p())).exp()
        }
        EnsembleKind::Poissonian => {
            let head: f64 = (0..=cut as u64)
                .map(|n| numkernel::log_poissonian(n, nbar).expect("nbar > 0").exp())
                .sum();
            (1.0 - head).max(0.0)
        }
        EnsembleKind::Fock => 0.0,
    }
}

// ---------------------------------------------------------------------------
// exact record distribution
// ---------------------------------------------------------------------------

/// Exact probabilities P(l, r) for all records with l+r ≤ max_total.
#[derive(Debug, Clone)]
pub struct RecordDistribution {
    pub max_total: usize,
    p: Vec<f64>,
}

impl RecordDistribution {
    #[inline]
    pub fn p(&self, l: usize, r: usize) -> f64 {
        if l + r > self.max_total {
            0.0
        } else {
            self.p[l * (self.max_total + 1) + r]
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.p.iter().sum()
    }

    /// marginal over the total count s = l+r
    pub fn total_count_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.max_total + 1];
        for l in 0..=self.max_total {
            for r in 0..=(self.max_total - l) {
                m[l + r] += self.p(l, r);
            }
        }
        m
    }

    pub fn most_probable_total(&self) -> usize {
        let m = self.total_count_marginal();
        let mut best = 0;
        for (s, &v) in m.iter().enumerate() {
            if v > m[best] {
                best = s;
            }
        }
        best
    }
}

/// Exact record distribution by branch-norm enumeration:
/// P(l,r) = (ε/(1−ε))^{l+r}/(l!r!) · Σ w‖K_L^l K_R^r D_ε|n,m⟩‖².
/// The branch norms are τ-independent (the shifter phase is a per-basis-state
/// phase on each anti-diagonal), so no setting argument is needed.
pub fn exact_record_distribution(
    ensemble: &MixedEnsemble,
    eps: f64,
    max_total: usize,
) -> Result<RecordDistribution> {
    record_distribution_impl(ensemble, eps, max_total, false)
}

/// Serial twin of [`exact_record_distribution`]: identical output, member
/// fan-out forced onto one thread. Exists for the benchmark comparing the
/// data-parallel and sequential paths.
pub fn exact_record_distribution_serial(
    ensemble: &MixedEnsemble,
    eps: f64,
    max_total: usize,
) -> Result<RecordDistribution> {
    record_distribution_impl(ensemble, eps, max_total, true)
}

fn record_distribution_impl(
    ensemble: &MixedEnsemble,
    eps: f64,
    max_total: usize,
    serial: bool,
) -> Result<RecordDistribution> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("leaked fraction must be in (0,1), got {eps}")));
    }
    let side = max_total + 1;
    let members = ensemble.members();
    // log prefactor (ε/(1−ε))^{l+r}/(l!·r!)
    let log_pref: Vec<f64> = {
        let le = eps.ln() - (1.0 - eps).ln();
        (0..side)
            .flat_map(|l| {
                (0..side).map(move |r| {
                    (l + r) as f64 * le
                        - numkernel::log_factorial(l as u64)
                        - numkernel::log_factorial(r as u64)
                })
            })
            .collect()
    };
    let n_chunks = members.len().div_ceil(par::CHUNK);
    let per_chunk = |c: usize| -> Vec<f64> {
        let lo = c * par::CHUNK;
        let hi = (lo + par::CHUNK).min(members.len());
        let mut table = vec![0.0f64; side * side];
        for &(w, (n0, m0)) in &members[lo..hi] {
            accumulate_branch_norms(n0, m0, eps, max_total, |l, r, norm_sq| {
                table[l * side + r] += w * norm_sq;
            });
        }
        table
    };
    let partials: Vec<Vec<f64>> = if serial {
        par::map_indexed_serial(n_chunks, per_chunk)
    } else {
        par::map_indexed(n_chunks, per_chunk)
    };
    let mut p = vec![0.0f64; side * side];
    for t in &partials {
        for (acc, v) in p.iter_mut().zip(t) {
            *acc += v;
        }
    }
    for (idx, v) in p.iter_mut().enumerate() {
        if *v > 0.0 {
            *v = (v.ln() + log_pref[idx]).exp();
        }
    }
    Ok(RecordDistribution { max_total, p })
}

/// Enumerate ‖K_L^l K_R^r D_ε |n₀,m₀⟩‖² for all l+r ≤ max_total in
/// O(max_total³) by building K_R powers once and applying K_L incrementally.
/// All coefficients stay real at τ = 0, and the norms are τ-independent.
fn accumulate_branch_norms(
    n0: usize,
    m0: usize,
    eps: f64,
    max_total: usize,
    mut sink: impl FnMut(usize, usize, f64),
) {
    let damp = ((n0 + m0) as f64 * 0.5 * (1.0 - eps).ln()).exp();
    let mut right = AntiDiagState::new(n0, m0);
    right.scale(damp);
    for r in 0..=max_total {
        if r > 0 {
            right.apply(Detector::Right, 0.0);
        }
        let mut state = right.clone();
        for l in 0..=(max_total - r) {
            if l > 0 {
                state.apply(Detector::Left, 0.0);
            }
            let ns = state.norm_sq();
            if ns > 0.0 {
                sink(l, r, ns);
            }
            if state.coeff.is_empty() {
                break;
            }
        }
        if right.coeff.is_empty() {
            break;
        }
    }
}

/// Moment sums of the unnormalized conditional mixture after a record of
/// l left and r right counts at one shifter setting:
/// (Σ w‖φ‖², Σ w⟨n̂_tot⟩_φ, Σ w⟨a†b⟩_φ) over members φ = K_L^l K_R^r D_ε ψ.
/// Record prefactors common to every member are dropped (they cancel in any
/// normalized expectation).
pub(crate) fn conditional_record_moments(
    ensemble: &MixedEnsemble,
    eps: f64,
    l: u64,
    r: u64,
    tau: f64,
) -> Result<(f64, f64, Complex64)> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Domain(format!("leaked fraction must be in [0,1), got {eps}")));
    }
    let members = ensemble.members();
    let n_chunks = members.len().div_ceil(par::CHUNK);
    let parts: Vec<(f64, f64, Complex64)> = par::map_indexed(n_chunks, |c| {
        let lo = c * par::CHUNK;
        let hi = (lo + par::CHUNK).min(members.len());
        let (mut norm, mut photons) = (0.0f64, 0.0f64);
        let mut cross = Complex64::ZERO;
        for &(w, (n0, m0)) in &members[lo..hi] {
            if ((n0 + m0) as u64) < l + r {
                continue;
            }
            let mut st = AntiDiagState::new(n0, m0);
            st.scale(((n0 + m0) as f64 * 0.5 * (1.0 - eps).ln()).exp());
            for _ in 0..r {
                st.apply(Detector::Right, tau);
            }
            for _ in 0..l {
                st.apply(Detector::Left, tau);
            }
            let ns = st.norm_sq();
            if ns > 0.0 {
                norm += w * ns;
                photons += w * st.photons_left() as f64 * ns;
                cross += w * st.cross_moment_sum();
            }
        }
        (norm, photons, cross)
    });
    let mut total = (0.0, 0.0, Complex64::ZERO);
    for (n, p, x) in parts {
        total.0 += n;
        total.1 += p;
        total.2 += x;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// two-detection (HOM) ratio
// ---------------------------------------------------------------------------

/// Probability ratio (both photons at the same port) : (one at each port)
/// after exactly two detections on |N⟩|M⟩:
/// (N²+M²−N−M+4NM) / (N²+M²−N−M), infinite when the denominator vanishes
/// (N=M=1: the pair always exits together). The closed form is verified
/// against the four brute-force two-event branch norms before returning.
pub fn two_detection_ratio(n: usize, m: usize) -> Result<f64> {
    if n + m < 2 {
        return Err(Error::Domain(format!("need at least two photons, got |{n},{m}>")));
    }
    let (nf, mf) = (n as f64, m as f64);
    let den = nf * nf + mf * mf - nf - mf;
    let num = den + 4.0 * nf * mf;
    let closed = if den == 0.0 { f64::INFINITY } else { num / den };

    let pair_norm = |first: Detector, second: Detector| -> f64 {
        let mut st = AntiDiagState::new(n, m);
        st.apply(first, 0.0);
        st.apply(second, 0.0);
        st.norm_sq()
    };
    let same = pair_norm(Detector::Left, Detector::Left)
        + pair_norm(Detector::Right, Detector::Right);
    let diff = pair_norm(Detector::Left, Detector::Right)
        + pair_norm(Detector::Right, Detector::Left);
    let simulated = if diff == 0.0 { f64::INFINITY } else { same / diff };
    let agree = if closed.is_finite() {
        simulated.is_finite() && ((closed - simulated) / closed).abs() <= 1e-12
    } else {
        simulated.is_infinite()
    };
    if !agree {
        return Err(Error::Validation(format!(
            "two-detection ratio mismatch: closed form {closed}, simulated {simulated}"
        )));
    }
    Ok(closed)
}

// ---------------------------------------------------------------------------
// record sampling
// ---------------------------------------------------------------------------

/// How the phase-shifter setting evolves over a sampled record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauPolicy {
    /// one fixed setting for the whole record
    Fixed(f64),
    /// a fresh uniform setting drawn for every detection
    RandomPerEvent,
    /// τ = 0 for the first half of the detection target, π/2 afterwards
    TwoSetting,
}

#[derive(Debug, Clone)]
pub struct SampledTrajectory {
    pub events: Vec<JumpEvent>,
    pub final_state: TwoModeFockState,
    /// the Fock member (n, m) the trajectory started from
    pub initial_member: (usize, usize),
}

/// Leakage rounds per eps budget. Conditional-on-total-count record
/// statistics are exactly round-count independent; the total-count marginal
/// carries an O(ε/ROUNDS) discretization bias.
const LEAK_ROUNDS: u32 = 8192;

/// Sample one detection record: draw a Fock member of the ensemble, then run
/// leakage rounds with at most one detection per round until either the eps
/// budget is used up or `n_events` detections have occurred (pass u64::MAX
/// to always run the full budget). Deterministic for a fixed seed.
pub fn sample_record(
    ensemble: &MixedEnsemble,
    eps: f64,
    n_events: u64,
    policy: TauPolicy,
    seed: u64,
) -> Result<SampledTrajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_record_with_rng(ensemble, eps, n_events, policy, &mut rng)
}

/// Batch sampling with per-trajectory RNG streams: trajectory i uses the
/// master seed on stream i+1, so any subset of the batch can be reproduced
/// independently and the fan-out order does not matter.
pub fn sample_record_batch(
    ensemble: &MixedEnsemble,
    eps: f64,
    n_events: u64,
    policy: TauPolicy,
    master_seed: u64,
    n_trajectories: usize,
) -> Result<Vec<SampledTrajectory>> {
    let runs = par::map_indexed(n_trajectories, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(i as u64 + 1);
        sample_record_with_rng(ensemble, eps, n_events, policy, &mut rng)
    });
    runs.into_iter().collect()
}

/// Serial twin of [`sample_record_batch`]; identical output, used by the
/// benchmark comparing the two paths.
pub fn sample_record_batch_serial(
    ensemble: &MixedEnsemble,
    eps: f64,
    n_events: u64,
    policy: TauPolicy,
    master_seed: u64,
    n_trajectories: usize,
) -> Result<Vec<SampledTrajectory>> {
    let runs = par::map_indexed_serial(n_trajectories, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(i as u64 + 1);
        sample_record_with_rng(ensemble, eps, n_events, policy, &mut rng)
    });
    runs.into_iter().collect()
}

fn sample_member(ensemble: &MixedEnsemble, rng: &mut ChaCha8Rng) -> (usize, usize) {
    let u: f64 = rng.random();
    let mut cdf = 0.0;
    for &(w, nm) in ensemble.members() {
        cdf += w;
        if u < cdf {
            return nm;
        }
    }
    ensemble.members().last().expect("ensembles are nonempty").1
}

fn sample_record_with_rng(
    ensemble: &MixedEnsemble,
    eps: f64,
    n_events: u64,
    policy: TauPolicy,
    rng: &mut ChaCha8Rng,
) -> Result<SampledTrajectory> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("leaked fraction must be in (0,1), got {eps}")));
    }
    let (n0, m0) = sample_member(ensemble, rng);
    let mut state = AntiDiagState::new(n0, m0);
    let delta = 1.0 - (1.0 - eps).powf(1.0 / LEAK_ROUNDS as f64);
    let mut events: Vec<JumpEvent> = Vec::new();
    for _ in 0..LEAK_ROUNDS {
        if events.len() as u64 >= n_events {
            break;
        }
        // Damping is a scalar on the anti-diagonal (definite total photon
        // number), so a no-count round leaves the normalized state alone and
        // the count/no-count split is a scalar Bernoulli:
        //   p(detect) = δ·n_tot / (1 + δ·n_tot).
        let n_tot = state.photons_left() as f64;
        if n_tot == 0.0 {
            break;
        }
        let p_detect = delta * n_tot / (1.0 + delta * n_tot);
        if rng.random::<f64>() >= p_detect {
            continue;
        }
        // a detection fires: draw the setting, then the port
        let tau = match policy {
            TauPolicy::Fixed(t) => t.rem_euclid(TWO_PI) % TWO_PI,
            TauPolicy::RandomPerEvent => rng.random::<f64>() * TWO_PI,
            TauPolicy::TwoSetting => {
                let half = if n_events == u64::MAX { u64::MAX } else { n_events / 2 };
                if (events.len() as u64) < half {
                    0.0
                } else {
                    std::f64::consts::FRAC_PI_2
                }
            }
        };
        let (p_l, p_r) = state.branch_probs(tau);
        let total = p_l + p_r;
        if total <= 0.0 {
            break;
        }
        let det = if rng.random::<f64>() * total < p_l {
            Detector::Left
        } else {
            Detector::Right
        };
        state.apply(det, tau);
        state.renormalize();
        events.push(JumpEvent { detector: det, tau });
    }
    let final_state = state.to_dense(ensemble.cutoff)?;
    Ok(SampledTrajectory { events, final_state, initial_member: (n0, m0) })
}

// ---------------------------------------------------------------------------
// posterior phase density
// ---------------------------------------------------------------------------

/// Relative-phase posterior of an ordered event list on a flat prior.
///
/// Fock (n = m) and Poissonian inputs admit the analytic product posterior
/// Π_events sin²/cos²((Δ−τ_e)/2), independent of the leaked fraction. For
/// thermal inputs no such kernel survives the mixture, so the density is
/// defined *operationally* through the conditional state's interference
/// pattern: density(Δ) ∝ I_right(τ = Δ), the right-port click rate with the
/// shifter dialed to Δ. A state localized at Δ₀ has
/// I_right(τ) ∝ cos²((τ−Δ₀)/2), so the density peaks at Δ₀ as it should.
pub fn posterior_phase_density(
    ensemble: &MixedEnsemble,
    eps: f64,
    events: &[JumpEvent],
    grid: &Grid1D,
) -> Result<RelativePhaseDensity> {
    match ensemble.kind {
        EnsembleKind::Fock => {
            let (n0, m0) = ensemble.members()[0].1;
            if n0 != m0 {
                return Err(Error::Domain(format!(
                    "analytic posterior needs equal occupancies, got |{n0},{m0}>"
                )));
            }
            analytic_event_posterior(events, grid)
        }
        EnsembleKind::Poissonian => analytic_event_posterior(events, grid),
        EnsembleKind::Thermal => {
            if events.is_empty() {
                return RelativePhaseDensity::uniform(*grid);
            }
            let (photons, cross) = conditional_event_moments(ensemble, eps, events);
            if !(photons > 0.0) {
                return Err(Error::Validation(
                    "conditional state has no photons left; intensity curve is zero".into(),
                ));
            }
            let weights: Vec<f64> = grid
                .points()
                .map(|d| {
                    0.5 * photons + (Complex64::from_polar(1.0, -d) * cross).re
                })
                .collect();
            let log_w: Vec<f64> = weights.iter().map(|&w| w.max(0.0).ln()).collect();
            RelativePhaseDensity::from_log_weights(*grid, &log_w)
        }
    }
}

fn analytic_event_posterior(events: &[JumpEvent], grid: &Grid1D) -> Result<RelativePhaseDensity> {
    if events.is_empty() {
        return RelativePhaseDensity::uniform(*grid);
    }
    let log_w: Vec<f64> = grid
        .points()
        .map(|d| {
            events
                .iter()
                .map(|e| match e.detector {
                    Detector::Left => phaseloc::log_record_kernel(d, 1, 0, e.tau),
                    Detector::Right => phaseloc::log_record_kernel(d, 0, 1, e.tau),
                })
                .sum()
        })
        .collect();
    RelativePhaseDensity::from_log_weights(*grid, &log_w)
}

/// (total-photon sum, ⟨a†b⟩ sum) of the unnormalized conditional mixture
/// after the given ordered events.
fn conditional_event_moments(
    ensemble: &MixedEnsemble,
    eps: f64,
    events: &[JumpEvent],
) -> (f64, Complex64) {
    let members = ensemble.members();
    let n_chunks = members.len().div_ceil(par::CHUNK);
    let parts: Vec<(f64, Complex64)> = par::map_indexed(n_chunks, |c| {
        let lo = c * par::CHUNK;
        let hi = (lo + par::CHUNK).min(members.len());
        let mut photons = 0.0;
        let mut cross = Complex64::ZERO;
        for &(w, (n0, m0)) in &members[lo..hi] {
            if n0 + m0 < events.len() {
                continue;
            }
            let mut st = AntiDiagState::new(n0, m0);
            st.scale(((n0 + m0) as f64 * 0.5 * (1.0 - eps).ln()).exp());
            for e in events {
                st.apply(e.detector, e.tau);
            }
            let ns = st.norm_sq();
            if ns > 0.0 {
                photons += w * st.photons_left() as f64 * ns;
                cross += w * st.cross_moment_sum();
            }
        }
        (photons, cross)
    });
    let mut photons = 0.0;
    let mut cross = Complex64::ZERO;
    for (p, x) in parts {
        photons += p;
        cross += x;
    }
    (photons, cross)
}

// ---------------------------------------------------------------------------
// cat elimination
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CatElimination {
    /// the setting used for the extra detections: τ = −Δ₀ (mod 2π)
    pub shifted_tau: f64,
    pub events: Vec<JumpEvent>,
    pub final_state: TwoModeFockState,
    /// fraction of the extra counts at the majority port (None if no extras)
    pub dominant_fraction: Option<f64>,
}

/// Break a mirrored (±Δ₀) posterior by shifting the phase setting to
/// τ = −Δ₀ and continuing to detect. At the 2π−Δ₀ mirror the left-port rate
/// sin²((Δ−τ)/2) vanishes, so continued detections either pile up at the
/// right detector (that mirror wins) or kill it (left counts appear), and
/// the posterior ends single-peaked either way.
pub fn cat_elimination(
    state: &TwoModeFockState,
    peaks: &phaseloc::LocalizationPeaks,
    n_extra: u64,
    seed: u64,
) -> Result<CatElimination> {
    let shifted_tau = (-peaks.delta0).rem_euclid(TWO_PI) % TWO_PI;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = state.clone();
    st.normalize()?;
    let mut events = Vec::with_capacity(n_extra as usize);
    let (mut n_l, mut n_r) = (0u64, 0u64);
    for _ in 0..n_extra {
        let ev_l = JumpEvent { detector: Detector::Left, tau: shifted_tau };
        let ev_r = JumpEvent { detector: Detector::Right, tau: shifted_tau };
        let bl = st.apply_detection(&ev_l);
        let br = st.apply_detection(&ev_r);
        let (pl, pr) = (bl.norm_sq(), br.norm_sq());
        if pl + pr <= 0.0 {
            return Err(Error::Validation(
                "state ran out of photons during cat elimination".into(),
            ));
        }
        let pick_left = rng.random::<f64>() * (pl + pr) < pl;
        st = if pick_left {
            n_l += 1;
            events.push(ev_l);
            bl
        } else {
            n_r += 1;
            events.push(ev_r);
            br
        };
        st.normalize()?;
    }
    let dominant_fraction =
        (n_extra > 0).then(|| n_l.max(n_r) as f64 / n_extra as f64);
    Ok(CatElimination { shifted_tau, events, final_state: st, dominant_fraction })
}
