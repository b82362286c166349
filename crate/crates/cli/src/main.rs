//! Command-line front end: run the goodness-of-fit test on CSV data,
//! reproduce the Monte Carlo level/power experiments, and generate synthetic
//! datasets.
//!
//! Exit codes: 0 = accept (or command succeeded), 1 = reject, 2 = error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};

use elliptest::gof::{run_test, TestOptions};
use elliptest::harness::{
    emit_report, emit_report_to_path, log_returns, read_csv_matrix, simulate_level,
    simulate_power, substream, ColumnSelection, CovModelKind, CsvOptions, MixingSetting,
    ReportFormat, ShockKind, SimMode, SimulationConfig, SimulationReport,
};
use elliptest::models::{alternative_sample, elliptical_sample, AlternativeModel};
use elliptest::DataMatrix;

#[derive(Parser)]
#[command(
    name = "elliptest",
    version,
    about = "Goodness-of-fit testing for elliptical models in high dimensions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test a CSV dataset (rows = observations); exits 0 on accept, 1 on reject.
    Test(TestArgs),
    /// Estimate the empirical level of the test under a null model.
    SimulateLevel(SimArgs),
    /// Estimate the rejection-rate curve over a grid of perturbation sizes h.
    SimulatePower(SimArgs),
    /// Write a synthetic dataset to CSV.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct TestArgs {
    /// Numeric CSV file; rows are observations, columns are covariates.
    data: PathBuf,
    /// The file starts with a header row to skip.
    #[arg(long)]
    header: bool,
    /// Field delimiter.
    #[arg(long, default_value = ",")]
    delimiter: char,
    /// Column selection: "all", "first:K", "random:K:SEED", or a 1-based
    /// comma list like "1,4,7".
    #[arg(long, default_value = "all")]
    columns: String,
    /// Treat the input as positive prices and test their log returns.
    #[arg(long)]
    log_returns: bool,
    /// Subtract column means first (the usual choice for real data).
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    center: bool,
    /// Drop the last row when the row count is odd.
    #[arg(long)]
    drop_odd: bool,
    /// Shuffle rows with this seed before splitting.
    #[arg(long)]
    shuffle_seed: Option<u64>,
    /// Nominal level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Also write the JSON result to this path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    /// JSON config mirroring the simulation fields; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mixing setting i..v (level mode).
    #[arg(long)]
    setting: Option<String>,
    /// Shock family, laplace or beta (power mode).
    #[arg(long)]
    shock: Option<String>,
    /// Covariance model: spiked|toeplitz|decay|identity (or 1..4).
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// Monte Carlo datasets per cell (defaults: 2000 level, 500 power;
    /// raise to 10000 for paper scale).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated h grid in [0,1] (power mode).
    #[arg(long, value_delimiter = ',')]
    h_grid: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 = one per core.
    #[arg(long)]
    threads: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format: csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct GenerateArgs {
    /// Mixing setting i..v for a null (elliptical) dataset.
    #[arg(long)]
    setting: Option<String>,
    /// Covariance model: spiked|toeplitz|decay|identity (or 1..4).
    #[arg(long, default_value = "identity")]
    model: String,
    /// Perturbation size; with --shock this generates from the alternative.
    #[arg(long)]
    h: Option<f64>,
    /// Shock family for the alternative: laplace or beta.
    #[arg(long)]
    shock: Option<String>,
    #[arg(long, default_value_t = 400)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    p: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Optional-by-field mirror of [`SimulationConfig`] for --config files.
#[derive(Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialConfig {
    mode: Option<SimMode>,
    setting: Option<MixingSetting>,
    shock: Option<ShockKind>,
    model: Option<CovModelKind>,
    n: Option<usize>,
    p: Option<usize>,
    trials: Option<usize>,
    alpha: Option<f64>,
    h_grid: Option<Vec<f64>>,
    seed: Option<u64>,
    threads: Option<usize>,
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Test(args) => cmd_test(args),
        Command::SimulateLevel(args) => cmd_simulate(args, SimMode::Level),
        Command::SimulatePower(args) => cmd_simulate(args, SimMode::Power),
        Command::Generate(args) => cmd_generate(args),
    }
}

fn cmd_test(args: TestArgs) -> anyhow::Result<ExitCode> {
    let options = CsvOptions {
        header: args.header,
        delimiter: u8::try_from(args.delimiter).map_err(|_| anyhow!("delimiter must be ASCII"))?,
        columns: parse_columns(&args.columns)?,
    };
    let mut data = read_csv_matrix(&args.data, &options)
        .with_context(|| format!("reading {}", args.data.display()))?;
    if args.log_returns {
        data = log_returns(&data)?;
    }
    let opts = TestOptions {
        alpha: args.alpha,
        center: args.center,
        drop_odd_row: args.drop_odd,
        shuffle_seed: args.shuffle_seed,
    };
    let result = run_test(&data, &opts)?;
    let json = serde_json::to_string_pretty(&result)?;
    println!("{json}");
    if let Some(path) = &args.out {
        std::fs::write(path, json + "\n")?;
    }
    Ok(ExitCode::from(u8::from(result.reject)))
}

fn cmd_simulate(args: SimArgs, mode: SimMode) -> anyhow::Result<ExitCode> {
    let cfg = build_config(&args, mode)?;
    let report = match mode {
        SimMode::Level => simulate_level(&cfg)?,
        SimMode::Power => simulate_power(&cfg)?,
    };
    let format = match args.format.as_str() {
        "csv" => ReportFormat::Csv,
        "json" => ReportFormat::Json,
        other => bail!("unknown report format {other:?} (expected csv or json)"),
    };
    write_report(&report, args.out.as_deref(), format)?;
    let cells = report.rows.len();
    eprintln!(
        "{} trials x {cells} cell(s) in {:.1}s (seed {})",
        cfg.trials, report.wall_secs, cfg.seed
    );
    Ok(ExitCode::SUCCESS)
}

fn write_report(
    report: &SimulationReport,
    out: Option<&std::path::Path>,
    format: ReportFormat,
) -> anyhow::Result<()> {
    match out {
        Some(path) => emit_report_to_path(report, path, format)?,
        None => {
            let stdout = std::io::stdout();
            emit_report(report, stdout.lock(), format)?;
        }
    }
    Ok(())
}

fn build_config(args: &SimArgs, mode: SimMode) -> anyhow::Result<SimulationConfig> {
    let file: PartialConfig = match &args.config {
        Some(path) => serde_json::from_reader(
            File::open(path).with_context(|| format!("opening {}", path.display()))?,
        )
        .with_context(|| format!("parsing {}", path.display()))?,
        None => PartialConfig::default(),
    };
    if let Some(file_mode) = file.mode {
        if file_mode != mode {
            bail!("config file says mode = {file_mode}, but this subcommand runs {mode}");
        }
    }

    let setting = match &args.setting {
        Some(s) => Some(s.parse::<MixingSetting>()?),
        None => file.setting,
    };
    let shock = match &args.shock {
        Some(s) => Some(s.parse::<ShockKind>()?),
        None => file.shock,
    };
    let model = match &args.model {
        Some(s) => s.parse::<CovModelKind>()?,
        None => file.model.ok_or_else(|| anyhow!("missing --model"))?,
    };
    let default_trials = match mode {
        SimMode::Level => 2000,
        SimMode::Power => 500,
    };
    let default_h_grid: Vec<f64> = match mode {
        SimMode::Level => Vec::new(),
        SimMode::Power => (0..=10).map(|i| i as f64 / 10.0).collect(),
    };
    Ok(SimulationConfig {
        mode,
        setting: if mode == SimMode::Level { setting } else { None },
        shock: if mode == SimMode::Power { shock } else { None },
        model,
        n: args.n.or(file.n).ok_or_else(|| anyhow!("missing --n"))?,
        p: args.p.or(file.p).ok_or_else(|| anyhow!("missing --p"))?,
        trials: args.trials.or(file.trials).unwrap_or(default_trials),
        alpha: args.alpha.or(file.alpha).unwrap_or(0.05),
        h_grid: args.h_grid.clone().or(file.h_grid).unwrap_or(default_h_grid),
        seed: args.seed.or(file.seed).unwrap_or(0),
        threads: args.threads.or(file.threads).unwrap_or(0),
    })
}

fn cmd_generate(args: GenerateArgs) -> anyhow::Result<ExitCode> {
    let model = args.model.parse::<CovModelKind>()?.model();
    let (_, root) = model.build_with_root(args.p, &mut substream(args.seed, u64::MAX))?;
    let mut rng = substream(args.seed, 0);

    let data = match (args.h, &args.shock) {
        (Some(h), Some(shock)) => {
            let alt = AlternativeModel::new(root, h, shock.parse::<ShockKind>()?.family())?;
            alternative_sample(args.n, &alt, &mut rng)?
        }
        (Some(_), None) => bail!("--h needs --shock (laplace or beta)"),
        (None, Some(_)) => bail!("--shock needs --h in [0,1]"),
        (None, None) => {
            let setting = args
                .setting
                .as_deref()
                .ok_or_else(|| anyhow!("missing --setting (or use --h with --shock)"))?
                .parse::<MixingSetting>()?;
            elliptical_sample(args.n, &root, &setting.mixing(args.p)?, &mut rng)?
        }
    };
    match &args.out {
        Some(path) => write_matrix_csv(&data, BufWriter::new(File::create(path)?))?,
        None => {
            let stdout = std::io::stdout();
            write_matrix_csv(&data, stdout.lock())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn write_matrix_csv(data: &DataMatrix, mut w: impl Write) -> anyhow::Result<()> {
    for row in data.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

fn parse_columns(spec: &str) -> anyhow::Result<ColumnSelection> {
    let spec = spec.trim();
    if spec.eq_ignore_ascii_case("all") {
        return Ok(ColumnSelection::All);
    }
    if let Some(rest) = spec.strip_prefix("first:") {
        return Ok(ColumnSelection::Prefix(rest.parse()?));
    }
    if let Some(rest) = spec.strip_prefix("random:") {
        let (count, seed) = rest
            .split_once(':')
            .ok_or_else(|| anyhow!("random selection needs the form random:K:SEED"))?;
        return Ok(ColumnSelection::RandomSubset {
            count: count.parse()?,
            seed: seed.parse()?,
        });
    }
    let indices: Vec<usize> = spec
        .split(',')
        .map(|s| {
            let one_based: usize = s.trim().parse()?;
            if one_based == 0 {
                bail!("column numbers are 1-based");
            }
            Ok(one_based - 1)
        })
        .collect::<anyhow::Result<_>>()?;
    Ok(ColumnSelection::Indices(indices))
}
