//! `relloc` — experiment runner for the relative-localization engine.
//!
//! Each subcommand runs one experiment and emits a CSV or JSON document
//! whose header carries the fully resolved configuration. Runs are
//! deterministic: the same subcommand, parameters, and seed produce
//! byte-identical files.
//!
//! Exit codes: 0 success, 2 configuration error, 3 cutoff overflow,
//! 4 numerical-validation failure. Errors are written to stderr as a
//! one-line JSON object.

mod experiments;
mod output;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use relloc::Error;
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "relloc", version, about = "relative phase/position localization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Phase-kernel densities for a schedule of detection records
    FockPhase(RunArgs),
    /// Record probabilities vs localization peak (closed law or exact enumeration)
    PoissonianPhase(RunArgs),
    /// Conditional phase density of a thermal ensemble after one record
    ThermalPhase(RunArgs),
    /// Expected visibility vs leaked fraction, Poissonian and thermal
    VisibilityCurves(RunArgs),
    /// Likely two-setting count events for M+M atoms
    BecLikelyEvents(RunArgs),
    /// One seeded atom-interference run with fringe histogram and fit
    BecFringes(RunArgs),
    /// Mirror-separation density after a rubber-cavity photon record
    RubberCavity(RunArgs),
    /// Separation densities after single-photon scattering events
    Scattering(RunArgs),
    /// Separation densities after thermal-pulse scattering events
    ThermalScattering(RunArgs),
}

impl Command {
    fn split(self) -> (&'static str, RunArgs) {
        match self {
            Command::FockPhase(a) => ("fock-phase", a),
            Command::PoissonianPhase(a) => ("poissonian-phase", a),
            Command::ThermalPhase(a) => ("thermal-phase", a),
            Command::VisibilityCurves(a) => ("visibility-curves", a),
            Command::BecLikelyEvents(a) => ("bec-likely-events", a),
            Command::BecFringes(a) => ("bec-fringes", a),
            Command::RubberCavity(a) => ("rubber-cavity", a),
            Command::Scattering(a) => ("scattering", a),
            Command::ThermalScattering(a) => ("thermal-scattering", a),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; explicit flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed for sampled experiments
    #[arg(long)]
    seed: Option<u64>,
    /// output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,

    /// leaked photon fraction ε
    #[arg(long)]
    eps: Option<f64>,
    /// mean occupation per mode
    #[arg(long)]
    nbar: Option<f64>,
    /// exact-enumeration input |N,N⟩ (poissonian-phase only)
    #[arg(long)]
    fock_n: Option<u64>,
    /// probe momentum
    #[arg(long)]
    k: Option<f64>,
    /// wavepacket spread in probe wavelengths
    #[arg(long)]
    d: Option<f64>,
    /// number of scattering events
    #[arg(long)]
    events: Option<u64>,
    /// explicit Fock-space cutoff for mixed ensembles
    #[arg(long)]
    cutoff: Option<usize>,
    /// number of grid points
    #[arg(long)]
    grid: Option<usize>,
    /// left detector counts
    #[arg(long)]
    l: Option<u64>,
    /// right detector counts
    #[arg(long)]
    r: Option<u64>,
    /// phase-shifter setting
    #[arg(long)]
    tau: Option<f64>,
    /// atoms per setting (bec-likely-events)
    #[arg(long)]
    m_atoms: Option<u64>,
    /// record schedule 'l:r,l:r,...' (fock-phase)
    #[arg(long)]
    records: Option<String>,
    /// largest total count enumerated
    #[arg(long)]
    max_total: Option<u64>,
    /// observer forward half-angle ε (radians)
    #[arg(long)]
    eps_angle: Option<f64>,
    /// spatial extent in probe wavelengths
    #[arg(long)]
    region: Option<f64>,
    /// atoms detected in a fringe run
    #[arg(long)]
    atoms: Option<u64>,
    /// visibility sweep lower ε
    #[arg(long)]
    eps_min: Option<f64>,
    /// visibility sweep upper ε
    #[arg(long)]
    eps_max: Option<f64>,
    /// visibility sweep point count
    #[arg(long)]
    eps_steps: Option<u64>,
}

/// Flat key-value config file. Unknown keys are rejected so typos cannot
/// silently fall back to defaults.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    experiment: Option<String>,
    seed: Option<u64>,
    out: Option<String>,
    format: Option<String>,
    eps: Option<f64>,
    nbar: Option<f64>,
    fock_n: Option<u64>,
    k: Option<f64>,
    d: Option<f64>,
    events: Option<u64>,
    cutoff: Option<usize>,
    grid: Option<usize>,
    l: Option<u64>,
    r: Option<u64>,
    tau: Option<f64>,
    m_atoms: Option<u64>,
    records: Option<String>,
    max_total: Option<u64>,
    eps_angle: Option<f64>,
    region: Option<f64>,
    atoms: Option<u64>,
    eps_min: Option<f64>,
    eps_max: Option<f64>,
    eps_steps: Option<u64>,
}

/// Fully merged run parameters (flag > file; defaults applied per
/// experiment at the point of use).
pub struct Settings {
    pub seed: u64,
    pub eps: Option<f64>,
    pub nbar: Option<f64>,
    pub fock_n: Option<u64>,
    pub k: Option<f64>,
    pub d: Option<f64>,
    pub events: Option<u64>,
    pub cutoff: Option<usize>,
    pub grid: Option<usize>,
    pub l: Option<u64>,
    pub r: Option<u64>,
    pub tau: Option<f64>,
    pub m_atoms: Option<u64>,
    pub records: Option<String>,
    pub max_total: Option<u64>,
    pub eps_angle: Option<f64>,
    pub region: Option<f64>,
    pub atoms: Option<u64>,
    pub eps_min: Option<f64>,
    pub eps_max: Option<f64>,
    pub eps_steps: Option<u64>,
}

fn main() {
    let cli = Cli::parse();
    let (name, args) = cli.command.split();
    if let Err(err) = run(name, args) {
        let kind = match &err {
            Error::Config(_) => "config",
            Error::Domain(_) => "domain",
            Error::CutoffOverflow(_) => "cutoff-overflow",
            Error::Validation(_) => "validation",
            Error::NoPeak(_) => "no-peak",
            Error::UndefinedVisibility(_) => "undefined-visibility",
        };
        let obj = serde_json::json!({ "error": { "kind": kind, "message": err.to_string() } });
        eprintln!("{obj}");
        std::process::exit(match &err {
            Error::Config(_) | Error::Domain(_) => 2,
            Error::CutoffOverflow(_) => 3,
            Error::Validation(_) | Error::NoPeak(_) | Error::UndefinedVisibility(_) => 4,
        });
    }
}

fn run(name: &'static str, args: RunArgs) -> Result<(), Error> {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            toml::from_str::<FileConfig>(&text)
                .map_err(|e| Error::Config(format!("bad config {}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    if let Some(exp) = &file.experiment {
        if exp != name {
            return Err(Error::Config(format!(
                "config file is for experiment '{exp}' but subcommand is '{name}'"
            )));
        }
    }

    let format = match (args.format, file.format.as_deref()) {
        (Some(f), _) => f,
        (None, Some("csv")) => Format::Csv,
        (None, Some("json")) => Format::Json,
        (None, Some(other)) => {
            return Err(Error::Config(format!("unknown format '{other}'")))
        }
        (None, None) => Format::Csv,
    };
    let out = args.out.or_else(|| file.out.as_ref().map(PathBuf::from));

    let settings = Settings {
        seed: args.seed.or(file.seed).unwrap_or(0),
        eps: args.eps.or(file.eps),
        nbar: args.nbar.or(file.nbar),
        fock_n: args.fock_n.or(file.fock_n),
        k: args.k.or(file.k),
        d: args.d.or(file.d),
        events: args.events.or(file.events),
        cutoff: args.cutoff.or(file.cutoff),
        grid: args.grid.or(file.grid),
        l: args.l.or(file.l),
        r: args.r.or(file.r),
        tau: args.tau.or(file.tau),
        m_atoms: args.m_atoms.or(file.m_atoms),
        records: args.records.or(file.records),
        max_total: args.max_total.or(file.max_total),
        eps_angle: args.eps_angle.or(file.eps_angle),
        region: args.region.or(file.region),
        atoms: args.atoms.or(file.atoms),
        eps_min: args.eps_min.or(file.eps_min),
        eps_max: args.eps_max.or(file.eps_max),
        eps_steps: args.eps_steps.or(file.eps_steps),
    };

    let doc = experiments::dispatch(name, &settings)?;
    doc.validate()?;
    let rendered = match format {
        Format::Csv => doc.to_csv(),
        Format::Json => doc.to_json(),
    };
    match out {
        Some(path) => std::fs::write(&path, rendered).map_err(|e| {
            Error::Config(format!("cannot write {}: {e}", path.display()))
        })?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(rendered.as_bytes())
                .map_err(|e| Error::Config(format!("cannot write stdout: {e}")))?;
        }
    }
    Ok(())
}
