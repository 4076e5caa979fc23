//! Command-line front end for gaflab.
//!
//! Exit codes: 0 success, 1 failed check or runtime error, 2 usage error.

pub mod commands;
pub mod config;
pub mod error;
pub mod svg;
pub mod verify;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use gaflab::estimate::{EventKind, EventModel};
use gaflab::lemmas::OuLemma;

use crate::commands::Context;
use crate::config::CampaignConfig;
use crate::error::CliError;
use crate::verify::Suite;

#[derive(Debug, Parser)]
#[command(name = "gaflab", version, about = "Zeros, holes and overcrowding of the dynamical planar GAF")]
pub struct Cli {
    /// JSON run configuration (a saved estimator report also works)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// worker threads (results do not depend on it)
    #[arg(long, global = true, env = "GAFLAB_THREADS")]
    pub threads: Option<usize>,
    /// output directory
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample GAF snapshots and write their zeros in D_R (CSV and SVG)
    SampleZeros(Overrides),
    /// Evolve one GAF path and record its zeros on the time grid
    Evolve(Overrides),
    /// Estimate hole or overcrowding probabilities, optionally over a T sweep
    Estimate(Overrides),
    /// Survival probabilities of the complex OU process
    OuLemma(Overrides),
    /// Jensen identity residuals of random snapshots
    JensenCheck(Overrides),
    /// Run verification suites; exits 0 only if every check passes
    Verify(Overrides),
    /// Summarise saved JSON outputs and plot log p against T
    Report {
        inputs: Vec<PathBuf>,
    },
}

/// Flags that override fields of the configuration file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long = "R", allow_negative_numbers = true)]
    pub radius: Option<f64>,
    #[arg(long = "N")]
    pub n_points: Option<usize>,
    #[arg(long = "T", allow_negative_numbers = true)]
    pub horizon: Option<f64>,
    #[arg(long = "T-values", value_delimiter = ',', allow_negative_numbers = true)]
    pub horizons: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// number of samples
    #[arg(long)]
    pub n: Option<u64>,
    /// gaf, poisson_bm, perturbed_lattice or triangular_cluster
    #[arg(long)]
    pub model: Option<EventModel>,
    /// hole or crowd
    #[arg(long)]
    pub kind: Option<EventKind>,
    /// small_ball, large_ball, near_point or half_plane
    #[arg(long)]
    pub lemma: Option<OuLemma>,
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eps_tail: Option<f64>,
    /// lattice perturbation scale
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
    /// add a Poisson sample next to the zeros
    #[arg(long)]
    pub poisson: bool,
    #[arg(long)]
    pub min_successes: Option<u64>,
    #[arg(long)]
    pub max_n: Option<u64>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub suite: Vec<Suite>,
}

impl Overrides {
    fn to_config(&self) -> CampaignConfig {
        CampaignConfig {
            radius: self.radius,
            n_points: self.n_points,
            horizon: self.horizon,
            horizons: self.horizons.clone(),
            delta: self.delta,
            n: self.n,
            model: self.model,
            kind: self.kind,
            lemma: self.lemma,
            rho: self.rho,
            eps_tail: self.eps_tail,
            c: self.c,
            poisson: self.poisson.then_some(true),
            min_successes: self.min_successes,
            max_n: self.max_n,
            suite: (!self.suite.is_empty()).then(|| self.suite.clone()),
            ..Default::default()
        }
    }
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(msg) => {
            println!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<String, CliError> {
    let mut config = match &cli.config {
        Some(p) => CampaignConfig::load(p)?,
        None => CampaignConfig::default(),
    };
    let flags = match &cli.command {
        Command::Report { .. } => CampaignConfig::default(),
        Command::SampleZeros(o)
        | Command::Evolve(o)
        | Command::Estimate(o)
        | Command::OuLemma(o)
        | Command::JensenCheck(o)
        | Command::Verify(o) => o.to_config(),
    };
    config = config.overlay(&flags);
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    let ctx = Context { out: cli.out.clone(), config };
    let job = || match &cli.command {
        Command::SampleZeros(_) => commands::sample_zeros(&ctx),
        Command::Evolve(_) => commands::evolve(&ctx),
        Command::Estimate(_) => commands::estimate(&ctx),
        Command::OuLemma(_) => commands::ou_lemma(&ctx),
        Command::JensenCheck(_) => commands::jensen_check(&ctx),
        Command::Verify(_) => commands::verify(&ctx),
        Command::Report { inputs } => commands::report(&ctx, inputs),
    };
    match cli.threads {
        Some(0) => Err(CliError::Usage("`threads` must be at least 1".into())),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| CliError::Runtime(format!("cannot start thread pool: {e}")))?
            .install(job),
        None => job(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "gaflab", "estimate", "--R", "0.6", "--T-values", "2,4,6", "--kind", "crowd", "--N", "3", "--seed", "9",
        ])
        .unwrap();
        let Command::Estimate(o) = &cli.command else { panic!() };
        assert_eq!(o.horizons.as_deref(), Some(&[2.0, 4.0, 6.0][..]));
        assert_eq!(o.kind, Some(EventKind::Crowd));
        assert_eq!(cli.seed, Some(9));
    }

    #[test]
    fn unknown_suite_is_a_usage_error() {
        assert_eq!(run(["gaflab", "verify", "--suite", "nonsense"]), 2);
    }

    #[test]
    fn suites_parse_in_kebab_case() {
        let cli = Cli::try_parse_from(["gaflab", "verify", "--suite", "ou-lemmas,jensen"]).unwrap();
        let Command::Verify(o) = &cli.command else { panic!() };
        assert_eq!(o.suite, vec![Suite::OuLemmas, Suite::Jensen]);
    }
}
