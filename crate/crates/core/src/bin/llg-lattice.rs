use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};

use llg_lattice::experiment::{list_presets, run, ExperimentConfig, ExperimentError, Preset, MANIFEST_NAME};

#[derive(Parser)]
#[command(name = "llg-lattice", version, about = "Lattice LLG and harmonic map heat flow experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a config file and write its artifacts.
    #[command(group(ArgGroup::new("source").required(true).multiple(true).args(["preset", "config"])))]
    Run {
        #[arg(long)]
        preset: Option<String>,
        /// INI file; may name a preset under `[run]` and override any key.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; LLG_LATTICE_THREADS takes precedence.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print preset names with one-line descriptions.
    ListPresets,
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, ExperimentError> {
    match std::env::var("LLG_LATTICE_THREADS") {
        Ok(v) => v.trim().parse::<usize>().map(Some).map_err(|_| ExperimentError::Config {
            field: "LLG_LATTICE_THREADS".into(),
            reason: format!("`{v}` is not a thread count"),
        }),
        Err(_) => Ok(flag),
    }
}

fn configure_threads(n: Option<usize>) -> Result<(), ExperimentError> {
    if n == Some(0) {
        return Err(ExperimentError::Config {
            field: "threads".into(),
            reason: "must be ≥ 1".into(),
        });
    }
    #[cfg(feature = "parallel")]
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ExperimentError::Config {
                field: "threads".into(),
                reason: e.to_string(),
            })?;
    }
    Ok(())
}

fn execute(
    preset: Option<String>,
    config: Option<PathBuf>,
    out: PathBuf,
    seed: Option<u64>,
    threads: Option<usize>,
) -> Result<(), ExperimentError> {
    configure_threads(thread_count(threads)?)?;
    let preset = preset.map(|p| p.parse::<Preset>()).transpose()?;
    let text = config
        .map(|path| {
            std::fs::read_to_string(&path).map_err(|e| ExperimentError::Io {
                path,
                reason: e.to_string(),
            })
        })
        .transpose()?;
    let cfg = ExperimentConfig::build(preset, text.as_deref(), seed)?;
    let manifest = run(&cfg, &out)?;
    println!("preset {} seed {} -> {}", cfg.preset, cfg.seed, out.join(MANIFEST_NAME).display());
    for (key, value) in &manifest.summary {
        println!("  {key} = {value}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListPresets => {
            print!("{}", list_presets());
            ExitCode::SUCCESS
        }
        Command::Run {
            preset,
            config,
            out,
            seed,
            threads,
        } => match execute(preset, config, out, seed, threads) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
    }
}
