use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use molga::engine::{
    preset_names, preset_text, report_run_dir, ConfigSources, Engine, EngineError, RunConfig,
    RunMetrics, RunSummary,
};
use molga::llm_ops::LlmError;
use molga::molgraph::parse_smiles;
use molga::oracle::OracleError;
use molga::selfies::{decode_selfies, encode_selfies};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_ORACLE: u8 = 3;
const EXIT_CORRUPT: u8 = 4;

#[derive(Parser)]
#[command(name = "molga", version, about = "Evolutionary molecular optimization")]
struct Cli {
    /// Seed for every random choice; overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an optimization, or continue one with --resume.
    Run(RunArgs),
    /// Recompute metrics and the CSV report from a run directory.
    Report {
        dir: PathBuf,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Convert SMILES to SELFIES or back, one molecule per line.
    Convert(ConvertArgs),
    /// List bundled presets, or print one.
    Presets { name: Option<String> },
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML config file, applied after presets.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bundled preset; repeat to layer several, later ones win.
    #[arg(long = "preset")]
    presets: Vec<String>,
    /// `dotted.key=value`, applied last; the value is parsed as TOML.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Run directory to create.
    #[arg(long, default_value = "molga-run", conflicts_with = "resume")]
    out: PathBuf,
    /// Continue the run stored in this directory.
    #[arg(long, conflicts_with_all = ["config", "presets", "overrides"])]
    resume: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Notation {
    Smiles,
    Selfies,
}

#[derive(clap::Args)]
struct ConvertArgs {
    #[arg(long, value_enum)]
    from: Notation,
    /// Input file; standard input if absent.
    input: Option<PathBuf>,
    /// Output file; standard output if absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Where rejected lines go, as `line<TAB>input<TAB>reason`.
    #[arg(long, default_value = "rejects.tsv")]
    rejects: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl ToString) -> Self {
        Failure {
            code,
            message: message.to_string(),
        }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Failure::new(EXIT_FAILURE, format!("{}: {e}", path.display()))
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let code = match &e {
            EngineError::Config(_) | EngineError::Pool(_) => EXIT_CONFIG,
            EngineError::Oracle(OracleError::InvalidSpec(_) | OracleError::InvalidBounds { .. }) => EXIT_CONFIG,
            EngineError::Oracle(_) => EXIT_ORACLE,
            EngineError::Llm(
                LlmError::InvalidEndpoint(_) | LlmError::MissingKey(_) | LlmError::Template(_) | LlmError::Arity { .. },
            ) => EXIT_CONFIG,
            EngineError::Corrupt { .. } => EXIT_CORRUPT,
            _ => EXIT_FAILURE,
        };
        Failure::new(code, e)
    }
}

fn metrics_text(m: &RunMetrics) -> String {
    let mut lines = vec![
        format!("calls            {} ({} scored, {} failed)", m.calls, m.scored, m.failed),
        format!("best fitness     {}", m.best_fitness.map_or("-".into(), |f| format!("{f:.6}"))),
        format!("top-1 AUC        {:.6}", m.top1_auc),
        format!("top-10 AUC       {:.6}", m.top10_auc),
        format!("top-100 AUC      {:.6}", m.top100_auc),
        format!("top-10 mean      {:.6}", m.top10_mean),
    ];
    let optional = [
        ("sum of top-10 AUCs", m.sum_of_top10_aucs),
        ("hypervolume", m.hypervolume),
        ("structural div.", m.structural_diversity),
        ("objective div.", m.objective_diversity),
    ];
    for (name, v) in optional {
        if let Some(v) = v {
            lines.push(format!("{name:<17}{v:.6}"));
        }
    }
    lines.join("\n")
}

fn summary_text(dir: &Path, s: &RunSummary) -> String {
    format!(
        "run directory    {}\ntermination      {:?}\ngenerations      {}\noracle calls     {} of {}\n{}",
        dir.display(),
        s.termination,
        s.generations,
        s.used,
        s.budget,
        metrics_text(&s.metrics)
    )
}

fn cmd_run(args: RunArgs, seed: Option<u64>) -> Result<(), Failure> {
    let (mut engine, dir) = match args.resume {
        Some(dir) => {
            let engine = Engine::resume(&dir, None)?;
            if seed.is_some_and(|s| s != engine.config().seed) {
                return Err(Failure::new(EXIT_CONFIG, "--seed differs from the seed of the run being resumed"));
            }
            log::info!("resuming {} after generation {}", dir.display(), engine.generation());
            (engine, dir)
        }
        None => {
            let mut overrides = args.overrides;
            if let Some(s) = seed {
                overrides.push(format!("seed={s}"));
            }
            let sources = ConfigSources {
                presets: args.presets,
                file: args.config,
                overrides,
                ..Default::default()
            };
            if sources.presets.is_empty() && sources.file.is_none() {
                return Err(Failure::new(EXIT_CONFIG, "give --config or at least one --preset"));
            }
            let config = RunConfig::load(&sources).map_err(EngineError::from)?;
            let mut engine = Engine::new(config, None)?;
            engine.attach_run_dir(&args.out)?;
            (engine, args.out)
        }
    };
    let summary = engine.run()?;
    println!("{}", summary_text(&dir, &summary));
    Ok(())
}

fn cmd_report(dir: &Path, csv_path: Option<&Path>) -> Result<(), Failure> {
    let (metrics, csv) = report_run_dir(dir)?;
    match csv_path {
        Some(path) => {
            fs::write(path, csv).map_err(|e| Failure::io(path, e))?;
            println!("{}", metrics_text(&metrics));
        }
        None => {
            io::stdout().write_all(csv.as_bytes()).map_err(|e| Failure::io(Path::new("<stdout>"), e))?;
            eprintln!("{}", metrics_text(&metrics));
        }
    }
    Ok(())
}

fn convert_line(line: &str, from: Notation) -> Result<String, String> {
    match from {
        Notation::Smiles => {
            let mol = parse_smiles(line).map_err(|e| e.to_string())?;
            encode_selfies(&mol).map_err(|e| e.to_string())
        }
        Notation::Selfies => {
            let mol = decode_selfies(line).map_err(|e| e.to_string())?;
            if mol.is_empty() {
                return Err("decodes to an empty molecule".into());
            }
            Ok(mol.to_smiles())
        }
    }
}

fn cmd_convert(args: ConvertArgs) -> Result<(), Failure> {
    let input: Box<dyn BufRead> = match &args.input {
        Some(p) => Box::new(BufReader::new(fs::File::open(p).map_err(|e| Failure::io(p, e))?)),
        None => Box::new(BufReader::new(io::stdin())),
    };
    let mut output: Box<dyn Write> = match &args.output {
        Some(p) => Box::new(BufWriter::new(fs::File::create(p).map_err(|e| Failure::io(p, e))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    };
    let mut rejects =
        BufWriter::new(fs::File::create(&args.rejects).map_err(|e| Failure::io(&args.rejects, e))?);
    let out_err = |e| Failure::io(Path::new("<output>"), e);
    let (mut converted, mut rejected) = (0u64, 0u64);
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Failure::io(Path::new("<input>"), e))?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        match convert_line(text, args.from) {
            Ok(s) => {
                writeln!(output, "{s}").map_err(out_err)?;
                converted += 1;
            }
            Err(reason) => {
                writeln!(rejects, "{}\t{text}\t{reason}", i + 1).map_err(|e| Failure::io(&args.rejects, e))?;
                rejected += 1;
            }
        }
    }
    output.flush().map_err(out_err)?;
    rejects.flush().map_err(|e| Failure::io(&args.rejects, e))?;
    eprintln!("converted {converted}, rejected {rejected}");
    Ok(())
}

fn cmd_presets(name: Option<&str>) -> Result<(), Failure> {
    match name {
        Some(n) => {
            let text = preset_text(n).ok_or_else(|| Failure::new(EXIT_CONFIG, format!("unknown preset {n:?}")))?;
            print!("{text}");
        }
        None => {
            for n in preset_names() {
                println!("{n}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args, cli.seed),
        Command::Report { dir, csv } => cmd_report(&dir, csv.as_deref()),
        Command::Convert(args) => cmd_convert(args),
        Command::Presets { name } => cmd_presets(name.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
