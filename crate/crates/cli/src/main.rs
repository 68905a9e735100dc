use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use qtherm::exec::{with_workers, Execution};
use qtherm_cli::config::{Config, Mode};
use qtherm_cli::plot::{self, HeatmapOptions, LineOptions, Table};
use qtherm_cli::sweeps::{self, SweepError};

#[derive(Parser)]
#[command(
    name = "qtherm",
    version,
    about = "Steady-state entanglement and entropy production sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Concurrence and entropy production over (beta_A, beta_S).
    EffectiveGrid(RunArgs),
    /// Full cavity model against the mapped effective model versus kappa/g.
    CavityKappaScan(RunArgs),
    /// Full cavity model over (p/g, kappa/g) with optimum refinement.
    CavityGrid(RunArgs),
    /// Dephasing, detuning and cavity-pump scans around a base point.
    Robustness(RunArgs),
    /// Stochastic entropy production ensembles.
    Trajectories(RunArgs),
    /// Render a sweep CSV as SVG.
    #[command(subcommand)]
    Plot(PlotCommand),
    /// Print the built-in configuration of a mode.
    DefaultConfig { mode: Mode },
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file laid over the mode defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Evaluate points one by one on the main thread.
    #[arg(long)]
    sequential: bool,
    /// Leave out the generation-time comment line.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Args)]
struct Common {
    /// Sweep CSV to read.
    #[arg(long)]
    input: PathBuf,
    /// SVG file to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    log_x: bool,
    #[arg(long)]
    log_y: bool,
    #[arg(long, default_value = "")]
    title: String,
}

#[derive(Subcommand)]
enum PlotCommand {
    Heatmap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        z: String,
        /// Contour level, e.g. 0.3333333333333333.
        #[arg(long)]
        contour: Option<f64>,
    },
    Lines {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        x: String,
        /// Comma-separated y columns.
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<String>,
        /// Column whose distinct values split the series.
        #[arg(long)]
        group: Option<String>,
    },
}

fn run_mode(mode: Mode, args: RunArgs) -> anyhow::Result<i32> {
    let user = match &args.config {
        Some(p) => Some(fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let name = args
        .config
        .as_deref()
        .map(Path::display)
        .map(|d| d.to_string())
        .unwrap_or_default();
    let mut cfg = Config::for_mode(mode, user.as_deref().map(|t| (t, name.as_str())))?;
    if let Some(seed) = args.seed {
        if cfg.contains("seed") {
            cfg.set("seed", &seed.to_string());
        } else {
            log::warn!("mode {mode} does not use a seed; --seed ignored");
        }
    }
    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::available()
    };
    let data = with_workers(args.workers, || sweeps::run(mode, &cfg, exec))?;

    let stamp = (!args.no_timestamp).then(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    match &args.out {
        Some(p) => {
            let f = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
            data.write_csv(io::BufWriter::new(f), stamp)?;
            for (k, v) in &data.summary {
                println!("{k}: {v}");
            }
        }
        None => {
            data.write_csv(io::stdout().lock(), stamp)?;
            for (k, v) in &data.summary {
                eprintln!("{k}: {v}");
            }
        }
    }
    if data.failures > 0 {
        eprintln!(
            "{} of {} points failed; see the `error` column",
            data.failures,
            data.rows.len()
        );
    }
    Ok(data.exit_code())
}

fn run_plot(cmd: PlotCommand) -> anyhow::Result<i32> {
    let (common, svg) = match cmd {
        PlotCommand::Heatmap {
            common,
            x,
            y,
            z,
            contour,
        } => {
            let table = read_table(&common.input)?;
            let opts = HeatmapOptions {
                log_x: common.log_x,
                log_y: common.log_y,
                contour,
                title: common.title.clone(),
            };
            let svg = plot::heatmap(&table, &x, &y, &z, &opts)?;
            (common, svg)
        }
        PlotCommand::Lines {
            common,
            x,
            y,
            group,
        } => {
            let table = read_table(&common.input)?;
            let opts = LineOptions {
                log_x: common.log_x,
                log_y: common.log_y,
                group,
                title: common.title.clone(),
            };
            let svg = plot::lines(&table, &x, &y, &opts)?;
            (common, svg)
        }
    };
    fs::write(&common.out, svg).with_context(|| format!("writing {}", common.out.display()))?;
    Ok(0)
}

fn read_table(path: &Path) -> anyhow::Result<Table> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Table::parse(&text)?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::EffectiveGrid(a) => run_mode(Mode::EffectiveGrid, a),
        Command::CavityKappaScan(a) => run_mode(Mode::CavityKappaScan, a),
        Command::CavityGrid(a) => run_mode(Mode::CavityGrid, a),
        Command::Robustness(a) => run_mode(Mode::Robustness, a),
        Command::Trajectories(a) => run_mode(Mode::Trajectories, a),
        Command::Plot(p) => run_plot(p),
        Command::DefaultConfig { mode } => {
            print!("{}", mode.default_config());
            let _ = io::stdout().flush();
            Ok(0)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            // Setup problems that stop the sweep before any point runs.
            let total = e
                .downcast_ref::<SweepError>()
                .is_some_and(|s| matches!(s, SweepError::Model(_)));
            ExitCode::from(if total { 3 } else { 1 })
        }
    }
}
