// `!(x >= 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use trs_core::oracle::{self, SimulationSpec};
use trs_core::scenario::{self, Scenario, SweepAxis, SweepSpec};

/// Equity total return swap pricer with funding adjustments.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Write CSV here instead of stdout.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Monte Carlo paths (overrides the scenario).
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Monte Carlo seed (overrides the scenario).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Par spread and its breakdown.
    Par,
    /// Leg values at a given spread.
    Value {
        /// Spread as a decimal; defaults to the scenario's contract spread.
        #[arg(long, allow_negative_numbers = true)]
        spread: Option<f64>,
    },
    /// Hedged-asset forwards on the equity dates (or `--times`).
    Forward {
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
    },
    /// Exact versus first-order par spread.
    Expand,
    /// Par spread over a parameter grid.
    Sweep(SweepArgs),
    /// Par spread moves for standard market bumps.
    Sens,
    /// Monte Carlo oracle checks; fails if any check fails.
    Validate {
        /// Disable antithetic pairing.
        #[arg(long)]
        plain: bool,
    },
}

#[derive(Args)]
struct SweepArgs {
    /// Axis name, overriding the scenario's sweep.
    #[arg(long)]
    axis: Option<String>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    grid: Option<Vec<f64>>,
    #[arg(long)]
    series: Option<String>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    series_values: Option<Vec<f64>>,
    /// Also write two-column `.dat` plot files into this directory.
    #[arg(long)]
    dat_dir: Option<PathBuf>,
}

fn sweep_spec(args: &SweepArgs, scenario: &Scenario) -> Result<SweepSpec> {
    let base = scenario.sweep.as_ref();
    let axis = match &args.axis {
        Some(a) => SweepAxis::parse(a)?,
        None => base.context("no sweep in the scenario and no --axis given")?.axis,
    };
    let grid = match &args.grid {
        Some(g) => g.clone(),
        None => match base {
            Some(b) if b.axis == axis => b.grid.clone(),
            _ => bail!("--grid is required when the axis differs from the scenario's sweep"),
        },
    };
    let series = match (&args.series, &args.series_values) {
        (Some(s), Some(v)) => Some((SweepAxis::parse(s)?, v.clone())),
        (None, None) if args.axis.is_none() => base.and_then(|b| b.series.clone()),
        (None, None) => None,
        _ => bail!("--series and --series-values go together"),
    };
    Ok(SweepSpec::new(axis, grid, series)?)
}

fn simulation(cli: &Cli, scenario: &Scenario, antithetic: bool) -> Result<SimulationSpec> {
    let base = scenario.simulation;
    let paths = cli
        .paths
        .or(base.map(|s| s.paths))
        .context("no [simulation] section and no --paths given")?;
    let seed = cli.seed.or(base.map(|s| s.seed)).unwrap_or(0);
    Ok(SimulationSpec::new(paths, seed, antithetic)?)
}

fn run(cli: &Cli) -> Result<bool> {
    let path = cli.config.as_ref().context("--config is required")?;
    let scenario = Scenario::load(path)?;
    let mut ok = true;
    let csv = match &cli.command {
        Command::Par => scenario::par_csv(&scenario.par_spread()?),
        Command::Value { spread } => {
            let k = spread
                .or(scenario.contract.spread)
                .context("no --spread given and the contract has no spread")?;
            scenario::value_csv(k, &scenario.pricer()?.value(k)?)
        }
        Command::Forward { times } => {
            let dates = times
                .clone()
                .unwrap_or_else(|| scenario.contract.equity.dates().to_vec());
            if dates.iter().any(|t| !(*t >= 0.0)) {
                bail!("forward times must be >= 0");
            }
            scenario::forward_csv(&dates, &scenario.forwards(&dates))
        }
        Command::Expand => scenario::expand_csv(&scenario)?,
        Command::Sweep(args) => {
            let spec = sweep_spec(args, &scenario)?;
            let rows = scenario::run_sweep(&scenario, &spec)?;
            if let Some(dir) = &args.dat_dir {
                std::fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
                for (name, body) in scenario::sweep_dat(&spec, &rows) {
                    let p = dir.join(name);
                    std::fs::write(&p, body).with_context(|| p.display().to_string())?;
                }
            }
            scenario::sweep_csv(&spec, &rows)
        }
        Command::Sens => scenario::sensitivities_csv(&scenario::run_sensitivities(&scenario)?),
        Command::Validate { plain } => {
            let antithetic = !plain && scenario.simulation.is_none_or(|s| s.antithetic);
            let spec = simulation(cli, &scenario, antithetic)?;
            let report = oracle::validate(
                &scenario.contract,
                &scenario.market,
                &scenario.curves,
                &scenario.hedge,
                &spec,
            )?;
            ok = report.passed();
            scenario::validation_csv(&report)
        }
    };
    match &cli.out {
        Some(p) => std::fs::write(p, csv).with_context(|| p.display().to_string())?,
        None => print!("{csv}"),
    }
    Ok(ok)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cli.threads {
            b = b.num_threads(n);
        }
        b.build()?
    };
    if !pool.install(|| run(&cli))? {
        bail!("validation failed");
    }
    Ok(())
}
