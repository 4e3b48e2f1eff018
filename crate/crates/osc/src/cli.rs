//! Argument parsing. Flags override the configuration file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use osc_core::quench::Limit;

use crate::cache::Cache;
use crate::config::{AvgMethod, Mode, Operator, Route, RunConfig, SpaceKind};
use crate::run::{self, Command, Context};

#[derive(Parser, Debug)]
#[command(name = "osc", version, about = "Trap quenches of few bosons: work statistics and squared commutators")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for sweeps and time series.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Write a gnuplot script next to each CSV.
    #[arg(long, global = true)]
    pub emit_plot_script: bool,
    #[arg(long, global = true)]
    pub no_cache: bool,
    #[command(flatten)]
    pub over: Overrides,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Args, Debug, Default)]
pub struct Overrides {
    #[arg(long = "out", global = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long = "n", global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub g: Option<f64>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true)]
    pub e_cut: Option<f64>,
    #[arg(long, global = true)]
    pub n_orb: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, global = true, value_enum)]
    pub space: Option<SpaceKind>,
    #[arg(long, global = true, value_enum)]
    pub route: Option<Route>,
    /// Operator pair, e.g. `--ops x1,p1`.
    #[arg(long, global = true, value_enum, value_delimiter = ',')]
    pub ops: Option<Vec<Operator>>,
    #[arg(long, global = true, value_enum)]
    pub method: Option<AvgMethod>,
    #[arg(long, global = true)]
    pub t_max: Option<f64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true)]
    pub t_end: Option<f64>,
    #[arg(long, global = true)]
    pub n_times: Option<usize>,
    /// Resonance tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Completeness threshold.
    #[arg(long, global = true)]
    pub completeness: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Final-trap spectrum.
    Spectrum,
    /// Initial state and its overlaps with the final levels.
    Quench,
    /// Work distribution and its moments.
    Work,
    /// Time series of the squared commutator and its parts.
    Otoc,
    /// Infinite-time average of the squared commutator.
    Avg,
    /// Audit of the spectral conditions; exit code 3 when they fail.
    Check,
    /// Parameter sweep from the `[sweep]` table.
    Sweep,
    /// Scaling fits and linear relations of a sweep table.
    Fit {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Closed-form work variance at g = 0 or in the hard-core limit.
    Limits {
        #[arg(long, value_enum, default_value = "g0")]
        limit: LimitArg,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum LimitArg {
    G0,
    Tg,
}

impl Overrides {
    pub fn apply(&self, c: &mut RunConfig) {
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field.clone() { $target = v; })*
            };
        }
        set! {
            output_dir => c.output_dir,
            n => c.n,
            g => c.g,
            gamma => c.gamma,
            e_cut => c.e_cut,
            mode => c.mode,
            space => c.space,
            route => c.route,
            method => c.method,
            t_max => c.window.t_max,
            t_end => c.window.t_end,
            n_times => c.window.n_times,
            tol => c.tol.resonance,
            completeness => c.tol.completeness,
        }
        if let Some(d) = &self.cache_dir {
            c.cache_dir = Some(d.clone());
        }
        if let Some(k) = self.n_orb {
            c.n_orb = Some(k);
        }
        if let Some(dt) = self.dt {
            c.window.dt = Some(dt);
        }
        if let Some(ops) = &self.ops {
            c.ops = [ops[0], ops[1]];
        }
    }
}

/// Parse, configure and run; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let mut cfg = match &cli.config {
        Some(p) => match RunConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: invalid input: {e}");
                return 2;
            }
        },
        None => RunConfig::default(),
    };
    if cli.over.ops.as_ref().is_some_and(|o| o.len() != 2) {
        eprintln!("error: invalid input: --ops takes exactly two operators");
        return 2;
    }
    cli.over.apply(&mut cfg);
    let cache = if cli.no_cache { Cache::disabled() } else { Cache::resolve(cfg.cache_dir.as_deref()) };
    let cmd = match cli.cmd {
        Cmd::Spectrum => Command::Spectrum,
        Cmd::Quench => Command::Quench,
        Cmd::Work => Command::Work,
        Cmd::Otoc => Command::Otoc,
        Cmd::Avg => Command::Avg,
        Cmd::Check => Command::Check,
        Cmd::Sweep => Command::Sweep,
        Cmd::Fit { input } => Command::Fit { input },
        Cmd::Limits { limit } => Command::Limits {
            limit: match limit {
                LimitArg::G0 => Limit::G0,
                LimitArg::Tg => Limit::Tg,
            },
        },
    };
    let ctx = Context { cfg, cache, jobs: cli.jobs.max(1), plot: cli.emit_plot_script };
    run::run(&cmd, &ctx)
}
