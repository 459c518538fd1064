use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "ifsdim",
    version,
    about = "Invariant measures, exponents and dimensions of iterated function systems",
    long_about = "Invariant measures, exponents and dimensions of iterated function systems \
                  with place-dependent probabilities.\n\n\
                  A system comes from --config FILE (TOML, see docs/config.md) or from \
                  --system NAME (cantor, halves, uneven, paper-example). Flags override \
                  the file. Output goes to --out PATH (written atomically) or stdout.\n\n\
                  Exit codes: 0 success, 1 a check or estimate failed, 2 bad usage or config."
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Built-in system, replacing the config's [system].
    #[arg(long, global = true, value_name = "NAME")]
    pub system: Option<String>,
    /// p1 of the decade example.
    #[arg(long, global = true)]
    pub p1: Option<f64>,
    /// Master seed.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// JSON instead of CSV.
    #[arg(long, global = true)]
    pub json: bool,
    /// Output file instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// Inline chaos-game settings.
#[derive(Debug, Args, Default)]
pub struct SimArgs {
    /// Stored steps per trajectory.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Discarded steps before storing.
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub trajectories: Option<usize>,
    /// Keep every N-th point in the measure.
    #[arg(long)]
    pub thinning: Option<usize>,
    /// Starting point, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x0: Option<Vec<f64>>,
}

/// Where a subcommand gets its empirical measure.
#[derive(Debug, Args, Default)]
pub struct MeasureArgs {
    /// Binary snapshot written by `simulate --snapshot`; skips simulation.
    #[arg(long, value_name = "PATH")]
    pub measure: Option<PathBuf>,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the standing assumptions and sample the contraction-on-average margin.
    Validate {
        /// Points sampled for the probability and derivative checks.
        #[arg(long)]
        budget: Option<usize>,
        /// Pairs sampled for the margin.
        #[arg(long)]
        margin_budget: Option<usize>,
    },
    /// Run the chaos game and write trajectories as CSV.
    ///
    /// With several trajectories --out names a directory receiving
    /// trajectory-<i>.csv files.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        /// Also write the pooled measure as a binary snapshot.
        #[arg(long, value_name = "PATH")]
        snapshot: Option<PathBuf>,
    },
    /// Lyapunov exponent, entropy and their ratio s = eta / lambda.
    Estimate {
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Local dimension regression at measure-sampled centers.
    ///
    /// Needs a measure: either --measure PATH or the inline simulation flags
    /// (defaults from the config).
    Dimension {
        #[command(flatten)]
        source: MeasureArgs,
        #[arg(long)]
        centers: Option<usize>,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        r0: Option<f64>,
        /// Also run the Frostman mass-scaling check at this exponent.
        #[arg(long, value_name = "S")]
        frostman: Option<f64>,
    },
    /// Cover-based upper bound for the dimension (JSON report).
    ///
    /// Needs a measure: either --measure PATH or the inline simulation flags.
    CoverBound {
        #[command(flatten)]
        source: MeasureArgs,
        /// Word length.
        #[arg(long)]
        n: Option<usize>,
        /// Fixed epsilon in (0, 1/4); by default chosen from --width.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Filter band half-width in standard deviations of the length-n sums.
        #[arg(long)]
        width: Option<f64>,
        #[arg(long)]
        t_points: Option<usize>,
        #[arg(long)]
        max_cells: Option<usize>,
        /// Write the diameters of the accepted family as CSV here.
        #[arg(long, value_name = "PATH")]
        diameters: Option<PathBuf>,
    },
    /// Open set condition with separation and regularity (JSON report).
    CheckOsc {
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        density_floor: Option<f64>,
    },
    /// Cylinder measures mu_+ and mu_- of words.
    ///
    /// Needs a measure: either --measure PATH or the inline simulation flags.
    Cylinder {
        #[command(flatten)]
        source: MeasureArgs,
        /// Word over 1..k, e.g. 121; repeatable.
        #[arg(long = "word", value_name = "WORD")]
        words: Vec<String>,
        /// Without --word, every word of length 1..=max-len.
        #[arg(long)]
        max_len: Option<usize>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Simulate { .. } => "simulate",
            Command::Estimate { .. } => "estimate",
            Command::Dimension { .. } => "dimension",
            Command::CoverBound { .. } => "cover-bound",
            Command::CheckOsc { .. } => "check-osc",
            Command::Cylinder { .. } => "cylinder",
        }
    }
}
