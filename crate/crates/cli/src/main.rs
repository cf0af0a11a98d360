//! `dw`: command-line front end for the double-well numerics.
//!
//! Exit codes: 0 on success, 2 for invalid input, 1 for numerical failures.

mod commands;
mod output;
mod params;
mod sweep;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dw_core::Exec;

use commands::Target;
use output::Report;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] dw_core::Error),
    #[error("unknown key `{key}` for `{command}`")]
    UnknownKey { key: String, command: String },
    #[error("invalid value for `jobs`: must be at least 1")]
    Jobs,
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_validation() => 2,
            CliError::UnknownKey { .. } | CliError::Jobs => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "dw", version, about = "Bosons in single- and double-well traps")]
struct Cli {
    /// TOML or JSON file of parameters; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, value_name = "K")]
    jobs: Option<usize>,
    /// Output format; `sweep` defaults to csv, everything else to json.
    #[arg(long, global = true, value_enum)]
    out: Option<Format>,
    /// Write here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

/// Flag structs whose values land in the parameter map under `key`.
macro_rules! flags {
    ($name:ident { $($field:ident : $long:literal => $key:literal, $help:literal;)* }) => {
        #[derive(Debug, Default, Args)]
        struct $name {
            $(
                #[arg(long = $long, allow_hyphen_values = true, value_name = "VALUE", help = $help)]
                $field: Option<String>,
            )*
        }

        impl $name {
            fn pairs(&self) -> Vec<(&'static str, Option<&String>)> {
                vec![$(($key, self.$field.as_ref())),*]
            }
        }
    };
}

flags!(ModelFlags {
    s: "s" => "trap.s", "Trap exponent s in |x|^s";
    d: "d" => "trap.d", "Dimension used by the decay law";
    kernel: "kernel" => "kernel.shape", "triangle or truncated_gaussian";
    w0: "w0" => "kernel.w0", "Kernel height";
    rw: "Rw" => "kernel.Rw", "Kernel range";
    grid_n: "grid-n" => "grid.n", "Grid points";
    halfwidth: "halfwidth" => "grid.halfwidth", "Box half-width (default from the box rule)";
    tol: "tol" => "tol", "Residual tolerance of the Hartree solver";
    max_iter: "max-iter" => "max_iter", "Iteration cap of the Hartree solver";
});

flags!(HartreeFlags {
    lambda: "lambda" => "lambda", "Coupling";
    mass: "mass" => "mass", "Mass constraint";
    trap: "trap" => "trap", "single or double";
    l: "L" => "L", "Well separation for the double well";
    perturb: "perturb" => "perturb", "delta,center,ell: lower the potential on a strip";
});

flags!(TunnelFlags {
    lambda: "lambda" => "lambda", "Coupling";
    l: "L-list" => "L", "Comma-separated separations";
});

flags!(BogFlags {
    lambda: "lambda" => "lambda", "Coupling";
    modes: "modes" => "modes", "Excited modes kept";
});

flags!(BhFlags {
    n: "N" => "N", "Particle number";
    e_minus: "e-minus" => "e_minus", "Left one-body energy";
    e_plus: "e-plus" => "e_plus", "Right one-body energy";
    t: "T" => "T", "Tunneling energy";
    u: "U" => "U", "On-site interaction";
    state: "state" => "state", "ground, fock[:K], coherent, gaussian:SIGMA or squeezed:THETA:PHI";
});

flags!(BhScanFlags {
    n: "N" => "N", "Particle number";
    u: "U" => "U", "On-site interaction";
    range: "T-log-range" => "T_log_range", "a,b,steps: T = -10^x for x from a to b";
});

flags!(SplitFlags {
    n: "N" => "N", "Particle number";
    lambda: "lambda" => "lambda", "Coupling";
    modes: "modes" => "modes", "Excited modes kept";
    eb_nodes: "eb-nodes" => "eb_nodes", "Couplings where e_B is solved before interpolation";
});

flags!(TheoremFlags {
    n: "N" => "N", "Particle number";
    lambda: "lambda" => "lambda", "Coupling";
    modes: "modes" => "modes", "Excited modes kept";
});

flags!(CompareFlags {
    n: "N" => "N", "Particle number";
    lambda: "lambda" => "lambda", "Coupling";
    l: "L" => "L", "Well separation";
    epsilon: "epsilon" => "epsilon", "Margin in the localization criterion";
});

flags!(SweepFlags {
    lambda: "lambda" => "lambda", "Coupling (sweepable)";
    mass: "mass" => "mass", "Mass constraint";
    trap: "trap" => "trap", "single or double";
    l: "L" => "L", "Well separation (sweepable)";
    perturb: "perturb" => "perturb", "delta,center,ell";
    modes: "modes" => "modes", "Excited modes kept";
    big_n: "N" => "N", "Particle number";
    e_minus: "e-minus" => "e_minus", "Left one-body energy";
    e_plus: "e-plus" => "e_plus", "Right one-body energy";
    t: "T" => "T", "Tunneling energy (sweepable)";
    u: "U" => "U", "On-site interaction";
    state: "state" => "state", "Two-mode state";
    eb_nodes: "eb-nodes" => "eb_nodes", "e_B interpolation nodes";
    epsilon: "epsilon" => "epsilon", "Margin in the localization criterion";
    sigma: "sigma" => "sigma", "Gaussian state width (sweepable)";
    n: "n" => "n", "Left occupation for split energies or Fock states (sweepable)";
});

#[derive(Debug, Subcommand)]
enum Command {
    /// Hartree minimizer in a single or double well.
    Hartree {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        own: HartreeFlags,
        /// Include the x and u arrays in JSON output.
        #[arg(long)]
        profile: bool,
    },
    /// Tunneling energies along a list of separations.
    Tunnel {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        own: TunnelFlags,
    },
    /// Bogoliubov fluctuation energy.
    Bog {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        own: BogFlags,
    },
    /// Two-mode Bose-Hubbard state and its observables.
    Bh {
        #[command(flatten)]
        own: BhFlags,
    },
    /// Two-mode ground states along a logarithmic range of T.
    #[command(name = "bh-scan")]
    BhScan {
        #[command(flatten)]
        own: BhScanFlags,
    },
    /// Energies of n particles left, N-n right.
    Split {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        own: SplitFlags,
    },
    /// Leading-order energy per particle, by two routes.
    Theorem {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        own: TheoremFlags,
    },
    /// Localized versus delocalized energy at one separation.
    Compare {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        own: CompareFlags,
    },
    /// Run a command over every combination of list-valued keys.
    Sweep {
        #[arg(value_enum)]
        target: Target,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        own: SweepFlags,
        /// Pair the lists element by element instead of taking all combinations.
        #[arg(long)]
        zip: bool,
    },
}

fn execute(cli: &Cli) -> Result<Report, CliError> {
    let exec = Exec::default();
    let config = cli.config.as_deref();
    let (target, flags, profile): (Target, Vec<_>, bool) = match &cli.command {
        Command::Hartree { model, own, profile } => (Target::Hartree, [model.pairs(), own.pairs()].concat(), *profile),
        Command::Tunnel { model, own } => (Target::Tunnel, [model.pairs(), own.pairs()].concat(), false),
        Command::Bog { model, own } => (Target::Bog, [model.pairs(), own.pairs()].concat(), false),
        Command::Bh { own } => (Target::Bh, own.pairs(), false),
        Command::BhScan { own } => (Target::BhScan, own.pairs(), false),
        Command::Split { model, own } => (Target::Split, [model.pairs(), own.pairs()].concat(), false),
        Command::Theorem { model, own } => (Target::Theorem, [model.pairs(), own.pairs()].concat(), false),
        Command::Compare { model, own } => (Target::Compare, [model.pairs(), own.pairs()].concat(), false),
        Command::Sweep { target, model, own, zip } => {
            let mut allowed = target.keys();
            allowed.extend_from_slice(target.sweep_keys());
            let cfg = params::merge(target.name(), config, &[model.pairs(), own.pairs()].concat(), &allowed)?;
            return Ok(sweep::run_sweep(*target, &cfg, *zip, exec)?);
        }
    };
    let mut cfg = params::merge(target.name(), config, &flags, &target.keys())?;
    if profile {
        cfg.insert("profile".into(), serde_json::Value::Bool(true));
    }
    Ok(target.run(&cfg, exec)?)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Jobs);
        }
        pool = pool.num_threads(jobs);
    }
    let report = pool.build()?.install(|| execute(cli))?;

    let default = if matches!(cli.command, Command::Sweep { .. }) { Format::Csv } else { Format::Json };
    let mut buf = Vec::new();
    match cli.out.unwrap_or(default) {
        Format::Json => report.write_json(&mut buf)?,
        Format::Csv => report.write_csv(&mut buf)?,
    }
    match &cli.output {
        Some(path) => std::fs::write(path, &buf)?,
        None => std::io::stdout().lock().write_all(&buf)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("DW_LOG"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dw: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
