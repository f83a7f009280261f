use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use offload_core::agent::TargetMode;
use offload_core::config::{load_config_with, reference_page, ExperimentConfig, Preset};
use offload_core::experiment::{run_eval, run_oracle_gap, run_sweep, run_train, RunReport};
use offload_core::Result;

#[derive(Parser)]
#[command(name = "offload", version, about = "Secrecy-constrained UAV edge offloading experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Comma-separated run seeds.
    #[arg(long, global = true, value_delimiter = ',')]
    seed: Option<Vec<u64>>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Bootstrap target: double or paper_eq24.
    #[arg(long, global = true)]
    mode: Option<TargetMode>,

    /// Action masking.
    #[arg(long, global = true)]
    mask: Option<Switch>,

    /// Base parameter set.
    #[arg(long, global = true)]
    preset: Option<PresetArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Train per-UAV networks and write metrics and checkpoints.
    Train,
    /// Run the trained checkpoints greedily and report delay and energy.
    Eval,
    /// Train and evaluate every policy at every device count.
    Sweep,
    /// Compare the trained policy with the enumerated optimum on a small instance.
    OracleGap,
    /// Print the configuration reference page.
    ConfigReference,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Table1,
    Consistent,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Table1 => Preset::Table1,
            PresetArg::Consistent => Preset::Consistent,
        }
    }
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let preset = cli.preset.map(Preset::from);
    let mut cfg = match &cli.config {
        Some(path) => load_config_with(path, preset)?,
        None => ExperimentConfig::with_preset(preset.unwrap_or_default()),
    };
    if let Some(seeds) = &cli.seed {
        cfg.seeds = seeds.clone();
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(mode) = cli.mode {
        cfg.agent.mode = mode;
    }
    if let Some(mask) = cli.mask {
        cfg.agent.masking = matches!(mask, Switch::On);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<RunReport> {
    if let Command::ConfigReference = cli.command {
        print!("{}", reference_page());
        return Ok(RunReport::default());
    }
    let cfg = resolve(cli)?;
    eprintln!("config_hash={}", cfg.hash());
    let report = match cli.command {
        Command::Train => run_train(&cfg)?,
        Command::Eval => {
            let (report, rows) = run_eval(&cfg)?;
            for r in rows {
                println!(
                    "seed {}: reward {:.3}, delay {:.3} s, energy {:.4e} J, violations {:.2}",
                    r.seed, r.mean_reward, r.mean_total_delay_s, r.mean_total_energy_j, r.mean_violations
                );
            }
            report
        }
        Command::Sweep => {
            let (report, rows) = run_sweep(&cfg)?;
            for r in rows {
                println!(
                    "N={:>3} {:<15} reward {:>12.3} ± {:<9.3} delay {:>10.3} s  energy {:.4e} J",
                    r.n_devices, r.policy, r.mean_reward, r.std_reward, r.mean_total_delay_s, r.mean_total_energy_j
                );
            }
            report
        }
        Command::OracleGap => {
            let (report, study) = run_oracle_gap(&cfg)?;
            println!("mean ratio {:.4} over {} slots", study.mean_ratio, study.rows.len());
            report
        }
        Command::ConfigReference => unreachable!(),
    };
    for c in &report.checks {
        println!("{c}");
    }
    for f in &report.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) if report.passed() => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
