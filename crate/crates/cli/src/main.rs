use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dualband::channel::trace::{load_trace, save_trace};
use dualband::checks::run_fast_checks;
use dualband::config::{Policy, SweepAxis};
use dualband::env::{episode_channels, EnvAssets};
use dualband::experiment::{plot_columns, read_summary, run_experiment, write_output};
use dualband::ScenarioConfig;

#[derive(Parser, Debug)]
#[command(name = "dualband", version, about = "Dual-band link simulator and band/beam learners")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Root seed (overrides experiment.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for CSV output.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Restrict the run to these policies (repeatable).
    #[arg(long, global = true, value_enum)]
    policy: Vec<PolicyArg>,
    /// `section.key=value` config override (repeatable).
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment described by a TOML config (or the `desk`/`full` profile).
    Run { config: String },
    /// Run one config across the values of a sweep axis.
    Sweep {
        config: String,
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// Comma-separated sweep values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Channel trace tooling.
    Trace {
        #[command(subcommand)]
        command: TraceCommand,
    },
    /// Run the fast invariant and oracle checks.
    Check,
    /// Turn a summary.csv into whitespace-separated columns for plotting.
    PlotData {
        summary: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum TraceCommand {
    /// Generate and save one episode's channel trace.
    Gen {
        output: PathBuf,
        #[arg(long, default_value = "desk")]
        config: String,
        #[arg(long, value_enum, default_value = "mmwave")]
        band: BandArg,
        #[arg(long, default_value_t = 0)]
        episode: usize,
    },
    /// Print a trace's header and summary statistics.
    Info { file: PathBuf },
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum PolicyArg {
    Genie,
    Greedy,
    ThreeThreshold,
    Hrl,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Genie => Policy::Genie,
            PolicyArg::Greedy => Policy::Greedy,
            PolicyArg::ThreeThreshold => Policy::ThreeThreshold,
            PolicyArg::Hrl => Policy::Hrl,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum AxisArg {
    Power,
    RvqBits,
    VehicleDensity,
    UpperPeriod,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Power => SweepAxis::Power,
            AxisArg::RvqBits => SweepAxis::RvqBits,
            AxisArg::VehicleDensity => SweepAxis::VehicleDensity,
            AxisArg::UpperPeriod => SweepAxis::UpperPeriod,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum BandArg {
    Mmwave,
    Sub6,
}

/// A path that exists wins over a profile of the same name.
fn load_config(name: &str) -> dualband::Result<ScenarioConfig> {
    let path = Path::new(name);
    if !path.exists() && matches!(name, "desk" | "full") {
        return ScenarioConfig::profile(name);
    }
    ScenarioConfig::load(path)
}

fn effective_config(name: &str, common: &Common) -> dualband::Result<ScenarioConfig> {
    let mut cfg = load_config(name)?;
    for o in &common.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(seed) = common.seed {
        cfg.experiment.seed = seed;
    }
    if !common.policy.is_empty() {
        cfg.experiment.policies = common.policy.iter().map(|&p| p.into()).collect();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_header(command: &str, cfg: &ScenarioConfig) {
    println!("# dualband {command}");
    println!("# effective config:");
    for line in cfg.to_toml_string().lines() {
        println!("#   {line}");
    }
}

fn run(cfg: &ScenarioConfig, out_dir: &Path) -> dualband::Result<()> {
    let out = run_experiment(cfg)?;
    write_output(out_dir, cfg, &out)?;
    println!("policy,seed,sweep_value,tail_rate_bps,training_fraction,band_occupancy_mmwave");
    for r in &out.summary {
        println!(
            "{},{},{},{:.4e},{:.3},{:.3}",
            r.policy, r.seed, r.sweep_value, r.tail_rate_bps, r.training_fraction, r.band_occupancy_mmwave
        );
    }
    println!("# wrote {}", out_dir.display());
    Ok(())
}

fn trace(cmd: &TraceCommand, common: &Common) -> dualband::Result<()> {
    match cmd {
        TraceCommand::Gen { output, config, band, episode } => {
            let cfg = effective_config(config, common)?;
            let assets = EnvAssets::new(&cfg)?;
            let (mm, s6) = episode_channels(&assets, cfg.experiment.seed, *episode)?;
            let t = match band {
                BandArg::Mmwave => mm.materialize(),
                BandArg::Sub6 => s6.materialize(),
            };
            save_trace(&t, output)?;
            println!("wrote {} ({} slots, {} subcarriers, {}x{})", output.display(), t.n_slots, t.n_subcarriers, t.n_rx, t.n_tx);
        }
        TraceCommand::Info { file } => {
            let t = load_trace(file)?;
            let los = t.los_flag.iter().filter(|&&l| l).count();
            let mean_gain_db = 10.0 * (t.large_scale_gain.iter().sum::<f64>() / t.n_slots.max(1) as f64).log10();
            println!("band: {}", t.band.name());
            println!("antennas: {} tx x {} rx", t.n_tx, t.n_rx);
            println!("subcarriers: {}", t.n_subcarriers);
            println!("slots: {}", t.n_slots);
            println!("bandwidth_hz: {}", t.bandwidth_hz);
            println!("los_fraction: {:.3}", los as f64 / t.n_slots.max(1) as f64);
            println!("mean_large_scale_gain_db: {mean_gain_db:.2}");
        }
    }
    Ok(())
}

fn check() -> bool {
    let outcomes = run_fast_checks();
    for o in &outcomes {
        println!("{}", o.line());
    }
    outcomes.iter().all(|o| o.passed)
}

fn dispatch(cli: &Cli) -> dualband::Result<bool> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = effective_config(config, &cli.common)?;
            print_header("run", &cfg);
            run(&cfg, &cli.common.out_dir)?;
        }
        Command::Sweep { config, axis, values } => {
            let mut cfg = effective_config(config, &cli.common)?;
            cfg.experiment.sweep = (*axis).into();
            match cfg.experiment.sweep {
                SweepAxis::Power => cfg.experiment.transmit_power_dbm = values.clone(),
                _ => cfg.experiment.sweep_values = values.clone(),
            }
            cfg.validate()?;
            print_header("sweep", &cfg);
            run(&cfg, &cli.common.out_dir)?;
        }
        Command::Trace { command } => trace(command, &cli.common)?,
        Command::Check => return Ok(check()),
        Command::PlotData { summary, output } => {
            let text = plot_columns(&read_summary(summary)?);
            match output {
                Some(p) => std::fs::write(p, text).map_err(|e| dualband::Error::io(p, e))?,
                None => print!("{text}"),
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn profile_names_resolve_without_files() {
        assert_eq!(load_config("desk").unwrap(), ScenarioConfig::desk());
        assert!(load_config("no/such/file.toml").is_err());
    }

    #[test]
    fn overrides_and_flags_reach_the_config() {
        let cli = Cli::parse_from(["dualband", "--seed", "7", "--policy", "hrl", "--override", "env.m_dt=5", "run", "desk"]);
        let cfg = effective_config("desk", &cli.common).unwrap();
        assert_eq!(cfg.experiment.seed, 7);
        assert_eq!(cfg.env.m_dt, 5);
        assert_eq!(cfg.experiment.policies, vec![Policy::Hrl]);
    }
}
