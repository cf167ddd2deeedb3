//! The nine experiments behind the CLI subcommands. Each one resolves its
//! parameters (flag > config file > default), runs the corresponding library
//! routines, and packs the results into an [`OutputDoc`].

use std::collections::BTreeMap;

use relloc::bec;
use relloc::focksim::{self, EnsembleKind, MixedEnsemble};
use relloc::numkernel::{Grid1D, TWO_PI};
use relloc::phaseloc::{self, DetectionRecord};
use relloc::posloc::{self, RelativePositionDensity, ScatterOutcome};
use relloc::visibility;
use relloc::{Error, Result};

use crate::output::{Column, OutputDoc};
use crate::Settings;

pub fn dispatch(name: &'static str, st: &Settings) -> Result<OutputDoc> {
    match name {
        "fock-phase" => fock_phase(st),
        "poissonian-phase" => poissonian_phase(st),
        "thermal-phase" => thermal_phase(st),
        "visibility-curves" => visibility_curves(st),
        "bec-likely-events" => bec_likely_events(st),
        "bec-fringes" => bec_fringes(st),
        "rubber-cavity" => rubber_cavity(st),
        "scattering" => scattering(st, false),
        "thermal-scattering" => scattering(st, true),
        other => Err(Error::Config(format!("unknown experiment '{other}'"))),
    }
}

fn parse_records(spec: &str) -> Result<Vec<(u64, u64)>> {
    let mut out = Vec::new();
    for part in spec.split(',') {
        let (l, r) = part
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("bad record '{part}', want 'l:r'")))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|e| Error::Config(format!("bad count '{s}': {e}")))
        };
        out.push((parse(l)?, parse(r)?));
    }
    if out.is_empty() {
        return Err(Error::Config("empty record schedule".into()));
    }
    Ok(out)
}

/// Relative-phase densities after fixed detection records on number-state
/// input — the kernel route, one density column per scheduled record.
fn fock_phase(st: &Settings) -> Result<OutputDoc> {
    let schedule = st.records.clone().unwrap_or_else(|| "1:0,5:0,15:0".into());
    let records = parse_records(&schedule)?;
    let n_grid = st.grid.unwrap_or(1024);
    let tau = st.tau.unwrap_or(0.0);
    let grid = Grid1D::phase(n_grid);

    let mut columns = Vec::new();
    for &(l, r) in &records {
        let dens = phaseloc::clr_density(&DetectionRecord::new(l, r, tau), &grid)?;
        columns.push(Column::density(format!("d_l{l}_r{r}"), dens.weights, grid));
    }
    let mut config = BTreeMap::new();
    config.insert("records".into(), schedule);
    config.insert("tau".into(), tau.to_string());
    config.insert("grid".into(), n_grid.to_string());
    config.insert("seed".into(), st.seed.to_string());
    Ok(OutputDoc {
        experiment: "fock-phase",
        domain_name: "delta".into(),
        domain: grid.points().collect(),
        columns,
        config,
    })
}

/// Record probabilities against their localization peaks Δ₀ — the scatter
/// behind the record-law plots. Defaults to the Poissonian-exact closed
/// form at mean N̄ per mode; pass --fock-n to switch to exact enumeration
/// for |N,N⟩ input instead.
fn poissonian_phase(st: &Settings) -> Result<OutputDoc> {
    let eps = st.eps.unwrap_or(0.2);
    let max_total = st.max_total.unwrap_or(30) as usize;
    let mut config = BTreeMap::new();
    config.insert("eps".into(), eps.to_string());
    config.insert("max_total".into(), max_total.to_string());
    config.insert("seed".into(), st.seed.to_string());

    let prob: Box<dyn Fn(u64, u64) -> Result<f64>> = match st.fock_n {
        Some(n) => {
            config.insert("fock_n".into(), n.to_string());
            let dist = focksim::exact_record_distribution(
                &MixedEnsemble::fock(n as usize, n as usize),
                eps,
                max_total,
            )?;
            Box::new(move |l, r| Ok(dist.p(l as usize, r as usize)))
        }
        None => {
            let nbar = st.nbar.unwrap_or(20.0);
            config.insert("nbar".into(), nbar.to_string());
            Box::new(move |l, r| phaseloc::plr_fock_approx(l, r, nbar, eps))
        }
    };

    let mut domain = Vec::new();
    let (mut p_col, mut l_col, mut r_col) = (Vec::new(), Vec::new(), Vec::new());
    for s in 1..=max_total as u64 {
        for l in 0..=s {
            let r = s - l;
            let peaks = phaseloc::localization_peaks(&DetectionRecord::new(l, r, 0.0))?;
            domain.push(peaks.delta0);
            p_col.push(prob(l, r)?);
            l_col.push(l as f64);
            r_col.push(r as f64);
        }
    }
    Ok(OutputDoc {
        experiment: "poissonian-phase",
        domain_name: "delta0".into(),
        domain,
        columns: vec![
            Column::plain("probability", p_col),
            Column::plain("l", l_col),
            Column::plain("r", r_col),
        ],
        config,
    })
}

/// Operational phase density of a thermal ensemble conditioned on one
/// record: the right-port intensity read as a function of the shifter
/// setting, normalized over the phase circle.
fn thermal_phase(st: &Settings) -> Result<OutputDoc> {
    let nbar = st.nbar.unwrap_or(5.0);
    let eps = st.eps.unwrap_or(0.1);
    let (l, r) = (st.l.unwrap_or(2), st.r.unwrap_or(1));
    let tau = st.tau.unwrap_or(0.0);
    let n_grid = st.grid.unwrap_or(1024);

    let ens = MixedEnsemble::thermal(nbar, st.cutoff)?;
    let grid = Grid1D::phase(n_grid);
    let record = DetectionRecord::new(l, r, tau);
    let curve = visibility::conditional_intensity_curve(&ens, eps, &record, &grid)?;
    let vis = visibility::visibility_of(&curve)?;
    let log_w: Vec<f64> = curve.values.iter().map(|&v| v.max(0.0).ln()).collect();
    let dens = relloc::numkernel::normalized_from_log(&log_w, &grid)?;

    let mut config = BTreeMap::new();
    config.insert("nbar".into(), nbar.to_string());
    config.insert("eps".into(), eps.to_string());
    config.insert("l".into(), l.to_string());
    config.insert("r".into(), r.to_string());
    config.insert("tau".into(), tau.to_string());
    config.insert("grid".into(), n_grid.to_string());
    config.insert("visibility".into(), vis.to_string());
    config.insert("seed".into(), st.seed.to_string());
    Ok(OutputDoc {
        experiment: "thermal-phase",
        domain_name: "delta".into(),
        domain: grid.points().collect(),
        columns: vec![
            Column::density("density", dens, grid),
            Column::plain("intensity", curve.values),
        ],
        config,
    })
}

/// Expected post-record visibility versus leaked fraction, Poissonian and
/// thermal inputs side by side.
fn visibility_curves(st: &Settings) -> Result<OutputDoc> {
    let nbar = st.nbar.unwrap_or(5.0);
    let lo = st.eps_min.unwrap_or(0.02);
    let hi = st.eps_max.unwrap_or(0.5);
    let steps = st.eps_steps.unwrap_or(25) as usize;
    if steps < 2 || !(hi > lo) || !(lo > 0.0) || !(hi < 1.0) {
        return Err(Error::Config(format!(
            "need 0 < eps_min < eps_max < 1 and at least 2 steps, got [{lo}, {hi}] x {steps}"
        )));
    }
    let mut domain = Vec::with_capacity(steps);
    let mut pois = Vec::with_capacity(steps);
    let mut therm = Vec::with_capacity(steps);
    for i in 0..steps {
        let eps = lo + (hi - lo) * i as f64 / (steps - 1) as f64;
        domain.push(eps);
        pois.push(visibility::expected_visibility(EnsembleKind::Poissonian, nbar, eps)?);
        therm.push(visibility::expected_visibility(EnsembleKind::Thermal, nbar, eps)?);
    }
    let mut config = BTreeMap::new();
    config.insert("nbar".into(), nbar.to_string());
    config.insert("eps_min".into(), lo.to_string());
    config.insert("eps_max".into(), hi.to_string());
    config.insert("eps_steps".into(), steps.to_string());
    config.insert("seed".into(), st.seed.to_string());
    Ok(OutputDoc {
        experiment: "visibility-curves",
        domain_name: "eps".into(),
        domain,
        columns: vec![
            Column::plain("v_poissonian", pois),
            Column::plain("v_thermal", therm),
        ],
        config,
    })
}

/// The above-uniform two-setting count events for M+M atoms, with their
/// exact probabilities and posterior peaks.
fn bec_likely_events(st: &Settings) -> Result<OutputDoc> {
    let m = st.m_atoms.unwrap_or(8);
    let table = bec::likely_events(m)?;
    let mut domain = Vec::new();
    let (mut l2c, mut pc, mut peakc) = (Vec::new(), Vec::new(), Vec::new());
    for ev in &table.events {
        domain.push(ev.l1 as f64);
        l2c.push(ev.l2 as f64);
        pc.push(ev.probability);
        peakc.push(ev.peak_delta);
    }
    let mut config = BTreeMap::new();
    config.insert("m_atoms".into(), m.to_string());
    config.insert("threshold".into(), table.threshold.to_string());
    config.insert("kept_mass".into(), table.kept_mass.to_string());
    config.insert("kept_events".into(), table.events.len().to_string());
    config.insert("seed".into(), st.seed.to_string());
    Ok(OutputDoc {
        experiment: "bec-likely-events",
        domain_name: "l1".into(),
        domain,
        columns: vec![
            Column::plain("l2", l2c),
            Column::plain("probability", pc),
            Column::plain("peak_delta", peakc),
        ],
        config,
    })
}

/// One seeded atom-interference run: fringe histogram over a period, its
/// normalized density, and the least-squares fitted fringe shape.
fn bec_fringes(st: &Settings) -> Result<OutputDoc> {
    let nbar = st.nbar.unwrap_or(600.0);
    let atoms = st.atoms.unwrap_or(1000);
    let k = st.k.unwrap_or(5.0);
    let run = bec::simulate_fringes(nbar, atoms, k, st.seed)?;
    let fit = bec::fit_fringes(&run.atoms, k)?;

    let n_bins = fit.bins.len();
    let period = std::f64::consts::PI / k;
    let grid = Grid1D::new(0.0, period, n_bins, true)?;
    let width = grid.spacing();
    let centers: Vec<f64> = (0..n_bins).map(|i| (i as f64 + 0.5) * width).collect();
    let total: f64 = fit.bins.iter().sum();
    let hist_density: Vec<f64> = fit.bins.iter().map(|c| c / (total * width)).collect();
    // fitted model at the bin centers, clamped and renormalized as a density
    let model: Vec<f64> = centers
        .iter()
        .map(|&x| (fit.c + fit.a * (2.0 * k * x).cos() + fit.b * (2.0 * k * x).sin()).max(0.0))
        .collect();
    let z = grid.integrate(&model)?;
    let fit_density: Vec<f64> = model.iter().map(|v| v / z).collect();

    let (_, peak) = run.posterior.argmax();
    let mut config = BTreeMap::new();
    config.insert("nbar".into(), nbar.to_string());
    config.insert("atoms".into(), atoms.to_string());
    config.insert("k".into(), k.to_string());
    config.insert("seed".into(), st.seed.to_string());
    config.insert("member_n".into(), run.initial_member.0.to_string());
    config.insert("member_m".into(), run.initial_member.1.to_string());
    config.insert("visibility".into(), fit.visibility.to_string());
    config.insert("sigma_v".into(), fit.sigma_v.to_string());
    config.insert("phase".into(), fit.phase.to_string());
    config.insert("posterior_peak".into(), peak.to_string());
    if let Some(w) = run.width_timeline.last() {
        config.insert("final_width".into(), w.width.to_string());
    }
    Ok(OutputDoc {
        experiment: "bec-fringes",
        domain_name: "x".into(),
        domain: centers,
        columns: vec![
            Column::plain("counts", fit.bins.clone()),
            Column::density("density", hist_density, grid),
            Column::density("fit_density", fit_density, grid),
        ],
        config,
    })
}

/// Separation density of the two cavity mirrors after a photon-count record,
/// against the flat prior it started from.
fn rubber_cavity(st: &Settings) -> Result<OutputDoc> {
    let (l, r) = (st.l.unwrap_or(0), st.r.unwrap_or(40));
    let k = st.k.unwrap_or(5.0);
    let half_width_wl = st.region.unwrap_or(2.0);
    let n_grid = st.grid.unwrap_or(2001);
    let w = half_width_wl * TWO_PI / k;
    let grid = Grid1D::new(-w, w, n_grid, false)?;
    let prior = RelativePositionDensity::uniform(grid, (-w, w))?;
    let post = posloc::rubber_cavity_localize(&prior, l, r, k)?;

    let mut config = BTreeMap::new();
    config.insert("l".into(), l.to_string());
    config.insert("r".into(), r.to_string());
    config.insert("k".into(), k.to_string());
    config.insert("region".into(), half_width_wl.to_string());
    config.insert("grid".into(), n_grid.to_string());
    config.insert("seed".into(), st.seed.to_string());
    Ok(OutputDoc {
        experiment: "rubber-cavity",
        domain_name: "delta_r".into(),
        domain: grid.points().collect(),
        columns: vec![
            Column::density("prior", prior.density, grid),
            Column::density("posterior", post.density, grid),
        ],
        config,
    })
}

/// Separation densities after scattering a fixed number of probe events,
/// one column per forward/deflection split — single-photon probes, or
/// thermal pulses of mean photon number n̄ for the thermal variant.
fn scattering(st: &Settings, thermal_light: bool) -> Result<OutputDoc> {
    let k = st.k.unwrap_or(5.0);
    let d_wl = st.d.unwrap_or(0.2);
    let events = st.events.unwrap_or(5);
    let eps_angle = st.eps_angle.unwrap_or(0.01);
    let region_wl = st.region.unwrap_or(2.0);
    let n_grid = st.grid.unwrap_or(1025);
    let lambda = TWO_PI / k;
    let w = region_wl * lambda;
    let grid = Grid1D::new(-w, w, n_grid, false)?;
    let prior = posloc::thermal_prior((0.0, w), d_wl * lambda, &grid)?;

    let mut columns = vec![Column::density("prior", prior.density.clone(), grid)];
    for f in 0..=events {
        let dcount = events - f;
        let outcomes: Vec<ScatterOutcome> = (0..events)
            .map(|i| if i < f { ScatterOutcome::Forward } else { ScatterOutcome::Deflect })
            .collect();
        let post = if thermal_light {
            posloc::thermal_light_scatter(
                &prior,
                st.nbar.unwrap_or(5.0),
                &outcomes,
                k,
                eps_angle,
            )?
        } else {
            let mut dens = prior.clone();
            for oc in &outcomes {
                dens = posloc::coarse_scatter_update(&dens, *oc, k, eps_angle)?;
            }
            dens
        };
        columns.push(Column::density(format!("f{f}_d{dcount}"), post.density, grid));
    }

    let mut config = BTreeMap::new();
    config.insert("k".into(), k.to_string());
    config.insert("d".into(), d_wl.to_string());
    config.insert("events".into(), events.to_string());
    config.insert("eps_angle".into(), eps_angle.to_string());
    config.insert("region".into(), region_wl.to_string());
    config.insert("grid".into(), n_grid.to_string());
    config.insert("seed".into(), st.seed.to_string());
    if thermal_light {
        config.insert("nbar".into(), st.nbar.unwrap_or(5.0).to_string());
    }
    Ok(OutputDoc {
        experiment: if thermal_light { "thermal-scattering" } else { "scattering" },
        domain_name: "delta_r".into(),
        domain: grid.points().collect(),
        columns,
        config,
    })
}
