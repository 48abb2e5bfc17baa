use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;
mod report;

use config::{DatasetKind, ExperimentConfig, SweepParam};
use error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "impact", version, about = "Tsetlin machine inference on simulated Y-Flash crossbars")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a coalesced Tsetlin machine and write a model file.
    Train(TrainArgs),
    /// Program a model onto simulated tiles and write snapshots and tuning reports.
    Map(MapArgs),
    /// Run inference on mapped tiles (or the golden model) and report accuracy and energy.
    Infer(InferArgs),
    /// Map and infer over a grid of one parameter and several seeds.
    Sweep(SweepArgs),
    /// Area, throughput and energy summary of a mapping.
    Report(ReportArgs),
    /// Print the default device configuration as TOML.
    DumpDeviceConfig(DumpArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Experiment configuration (TOML); flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed of every random stream.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long, value_enum)]
    dataset: Option<DatasetKind>,
    /// Directory holding the MNIST IDX files.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    train_csv: Option<PathBuf>,
    #[arg(long)]
    test_csv: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Use only the first N test samples.
    #[arg(long)]
    limit: Option<usize>,
    /// Use only the first N training samples.
    #[arg(long)]
    train_limit: Option<usize>,
}

#[derive(Debug, Args)]
struct DeviceArgs {
    /// Device file with `[device]` and `[variability]` tables.
    #[arg(long)]
    device_config: Option<PathBuf>,
    /// Switch every variability source off.
    #[arg(long)]
    nominal: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    clauses: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Vote clamp T.
    #[arg(long = "t")]
    t: Option<u32>,
    /// Specificity s.
    #[arg(long = "s")]
    s: Option<f64>,
    /// Model file to write (default: <output-dir>/model.cotm).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MapArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    device: DeviceArgs,
    #[arg(long)]
    model: PathBuf,
    /// Directory for snapshots and reports (default: <output-dir>/mapping).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    skip_finetune: bool,
    /// Write target conductances directly instead of pulsing.
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    max_cost: Option<f64>,
}

#[derive(Debug, Args)]
struct InferArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    device: DeviceArgs,
    /// Model file; required with --golden, otherwise used for agreement statistics.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Mapping directory written by `map`.
    #[arg(long)]
    tiles: Option<PathBuf>,
    /// Run the golden model only.
    #[arg(long)]
    golden: bool,
    /// Report file (default: <output-dir>/infer_report.json).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    device: DeviceArgs,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum)]
    param: Option<SweepParam>,
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// CSV file (default: <output-dir>/sweep.csv).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Mapping directory written by `map`.
    #[arg(long)]
    tiles: PathBuf,
    /// Report written by `infer`, for energy per datapoint.
    #[arg(long)]
    infer_report: Option<PathBuf>,
    /// Summary file (default: <output-dir>/summary.json; a CSV is written next to it).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DumpArgs {
    /// Write to a file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn resolve(&self, device: Option<&DeviceArgs>, data: Option<&DataArgs>, edit: impl FnOnce(&mut ExperimentConfig)) -> CliResult<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(self.config.as_deref())?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
        }
        if let Some(d) = device {
            if let Some(path) = &d.device_config {
                cfg.apply_device_file(path)?;
            }
            if d.nominal {
                cfg.variability = impact_core::device::VariabilityConfig::none();
            }
        }
        if let Some(d) = data {
            let c = &mut cfg.data;
            if let Some(v) = d.dataset {
                c.dataset = v;
            }
            if let Some(v) = &d.data_dir {
                c.data_dir = v.clone();
            }
            if let Some(v) = &d.train_csv {
                c.train_csv = Some(v.clone());
            }
            if let Some(v) = &d.test_csv {
                c.test_csv = Some(v.clone());
            }
            if let Some(v) = d.threshold {
                c.threshold = v;
            }
            if let Some(v) = d.limit {
                c.test_limit = Some(v);
            }
            if let Some(v) = d.train_limit {
                c.train_limit = Some(v);
            }
        }
        edit(&mut cfg);
        cfg.resolve()
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train(a) => {
            let cfg = a.common.resolve(None, Some(&a.data), |c| {
                if let Some(v) = a.clauses {
                    c.train.clauses = v;
                }
                if let Some(v) = a.epochs {
                    c.train.epochs = v;
                }
                if let Some(v) = a.t {
                    c.train.t = v;
                }
                if let Some(v) = a.s {
                    c.train.s = v;
                }
            })?;
            commands::train(&cfg, a.common.config.as_deref(), a.out)
        }
        Command::Map(a) => {
            let cfg = a.common.resolve(Some(&a.device), None, |c| {
                c.mapping.skip_finetune |= a.skip_finetune;
                c.mapping.exact |= a.exact;
                if let Some(v) = a.max_cost {
                    c.mapping.max_cost = v;
                }
            })?;
            commands::map(&cfg, a.common.config.as_deref(), &a.model, a.out)
        }
        Command::Infer(a) => {
            let cfg = a.common.resolve(Some(&a.device), Some(&a.data), |_| {})?;
            commands::infer(&cfg, a.common.config.as_deref(), a.model.as_deref(), a.tiles.as_deref(), a.golden, a.out)
        }
        Command::Sweep(a) => {
            let cfg = a.common.resolve(Some(&a.device), Some(&a.data), |c| {
                if let Some(p) = a.param {
                    c.sweep.param = Some(p);
                }
                if let Some(v) = &a.values {
                    c.sweep.values = v.clone();
                }
                if let Some(v) = &a.seeds {
                    c.sweep.seeds = v.clone();
                }
            })?;
            commands::sweep(&cfg, a.common.config.as_deref(), &a.model, a.out)
        }
        Command::Report(a) => {
            let cfg = a.common.resolve(None, None, |_| {})?;
            commands::report(&cfg, &a.tiles, a.infer_report.as_deref(), a.out)
        }
        Command::DumpDeviceConfig(a) => commands::dump_device_config(a.out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
