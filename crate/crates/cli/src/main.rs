use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use gluing_cli::{run, CliError, Command, ExperimentConfig};

/// Gluing experiments on the mode-0 neck model.
#[derive(Debug, Parser)]
#[command(name = "gluing", version)]
struct Args {
    /// Pipeline to run; overrides `command` in the config file.
    #[arg(value_enum)]
    command: Option<Command>,

    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory (default: `out` from the config, else `results`).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads for sweeps.
    #[arg(long)]
    jobs: Option<usize>,

    /// Seed for random sources; overrides `seed` in the config file.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(args: &Args) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match (&args.config, args.command) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(c)) => ExperimentConfig::new(c),
        (None, None) => return Err(CliError::Config("give a command or --config".into())),
    };
    if let Some(c) = args.command {
        cfg.command = c;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let result = (|| {
        if let Some(j) = args.jobs {
            if j == 0 {
                return Err(CliError::Config("`--jobs`: must be at least 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build_global()
                .map_err(|e| CliError::Config(format!("`--jobs`: {e}")))?;
        }
        let cfg = load(&args)?;
        let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("results"));
        let record = run(&cfg, &out)?;
        println!(
            "{} [{}]",
            record.command.as_str(),
            &record.config_hash[..12]
        );
        for (k, v) in &record.outputs {
            println!("  {k} = {v}");
        }
        for a in &record.artifacts {
            println!("  wrote {}", out.join(a).display());
        }
        Ok(())
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
