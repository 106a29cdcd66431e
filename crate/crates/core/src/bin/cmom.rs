use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use cmom::study::{error_json, exit_code, run_study, Command, Overrides, StudyConfig};
use cmom::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Coverage,
    Sort,
    Alpha,
    Factors,
    Spanning,
    Fm,
    Doublesort,
    Summary,
    Corr,
    Growth,
    Synth,
    All,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Coverage => Command::Coverage,
            Cmd::Sort => Command::Sort,
            Cmd::Alpha => Command::Alpha,
            Cmd::Factors => Command::Factors,
            Cmd::Spanning => Command::Spanning,
            Cmd::Fm => Command::Fm,
            Cmd::Doublesort => Command::Doublesort,
            Cmd::Summary => Command::Summary,
            Cmd::Corr => Command::Corr,
            Cmd::Growth => Command::Growth,
            Cmd::Synth => Command::Synth,
            Cmd::All => Command::All,
        }
    }
}

/// Customer-momentum study runner.
///
/// Settings come from built-in defaults, then the --config file, then flags.
#[derive(Debug, Parser)]
#[command(name = "cmom", version, about)]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// TOML study configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// First month, YYYY-MM.
    #[arg(long)]
    from: Option<String>,
    /// Last month, YYYY-MM.
    #[arg(long)]
    to: Option<String>,
    #[arg(long, value_parser = ["ew", "vw"])]
    weights: Option<String>,
    /// 5 or 10.
    #[arg(long)]
    buckets: Option<usize>,
    /// Lag window j-k; repeat for several.
    #[arg(long = "lag")]
    lags: Vec<String>,
    #[arg(long)]
    nw_lags: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["md", "csv", "json"])]
    format: Option<String>,
    /// Worker threads; results are identical for any count.
    #[arg(long)]
    threads: Option<usize>,
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut cfg = match &cli.config {
        Some(p) => StudyConfig::load(p)?,
        None => StudyConfig::default(),
    };
    cfg.apply(&Overrides {
        data_dir: cli.data_dir,
        out_dir: cli.out,
        from: cli.from,
        to: cli.to,
        weights: cli.weights,
        buckets: cli.buckets,
        lags: cli.lags,
        nw_lags: cli.nw_lags,
        seed: cli.seed,
        format: cli.format,
        threads: cli.threads,
    });
    let outcome = run_study(&cfg, cli.command.into())?;
    for f in &outcome.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
