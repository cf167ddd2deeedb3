//! Matter-wave checks: two-setting posteriors at the predicted width, and
//! atom-by-atom fringe runs whose histogram fit agrees with the Bayesian
//! posterior they localized.

use relloc::bec::{fit_fringes, likely_events, simulate_fringes, two_setting_density};
use relloc::numkernel::{Grid1D, TWO_PI};
use relloc::phaseloc::{fitted_peak_width, DetectionRecord};

fn wrap_pm_pi(x: f64) -> f64 {
    let y = x.rem_euclid(TWO_PI);
    if y > std::f64::consts::PI { y - TWO_PI } else { y }
}

/// Every likely two-setting event for 3+3 atoms localizes the relative phase
/// to a width compatible with the 1/√n collapse law (n = 6 detections):
/// between 0.8·√(2/n) and 1.2·2/√n in the fitted-width convention.
#[test]
fn likely_event_widths_sit_in_the_collapse_band() {
    let m = 3u64;
    let table = likely_events(m).unwrap();
    assert!(!table.events.is_empty());
    let grid = Grid1D::phase(2048);
    let n = (2 * m) as f64;
    let (lo, hi) = (0.8 * (2.0 / n).sqrt(), 1.2 * 2.0 / n.sqrt());
    for ev in &table.events {
        let dens = two_setting_density(
            &DetectionRecord::new(ev.l1, m - ev.l1, 0.0),
            &DetectionRecord::new(ev.l2, m - ev.l2, std::f64::consts::FRAC_PI_2),
            &grid,
        )
        .unwrap();
        let w = fitted_peak_width(&dens).unwrap();
        assert!(
            (lo..=hi).contains(&w),
            "event ({}, {}): width {w} outside [{lo}, {hi}]",
            ev.l1,
            ev.l2
        );
        // and the stored peak is where that density actually peaks
        let (_, at) = dens.argmax();
        let d = wrap_pm_pi(at - ev.peak_delta).abs();
        assert!(d <= grid.spacing() + 1e-9, "peak {at} vs stored {}", ev.peak_delta);
    }
}

/// A 400-atom run: the least-squares fringe fit recovers high contrast, and
/// its fitted phase agrees with the run's own Bayesian posterior peak — two
/// estimates through completely different arithmetic.
#[test]
fn fringe_fit_and_posterior_agree_on_the_phase() {
    let k = 5.0;
    let run = simulate_fringes(300.0, 400, k, 7).unwrap();
    assert_eq!(run.atoms.len(), 400);

    let fit = fit_fringes(&run.atoms, k).unwrap();
    assert!(fit.visibility > 0.8, "contrast {}", fit.visibility);
    assert!(fit.sigma_v < 0.1, "sigma_v {}", fit.sigma_v);

    let (_, delta_hat) = run.posterior.argmax();
    let mismatch = wrap_pm_pi(fit.phase - delta_hat).abs();
    assert!(
        mismatch < 0.2,
        "fitted phase {} vs posterior peak {delta_hat}",
        fit.phase
    );

    // the posterior sharpens as atoms accumulate
    let first = run.width_timeline.first().unwrap().width;
    let last = run.width_timeline.last().unwrap().width;
    assert!(last < first, "width went {first} -> {last}");
    assert!(last < 0.3, "final width {last}");
}
