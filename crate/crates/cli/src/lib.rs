//! Command-line driver: configuration, command runners and output files.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::Parser;

pub use commands::{run, Report};
pub use config::RunConfig;
pub use error::CliError;

/// Reflection of wave packets under environmental decoherence.
///
/// Settings come from an optional config file of `key = value` lines,
/// overridden by `--key value` flags given after it.
#[derive(Debug, Parser)]
#[command(name = "reflectlab", version)]
pub struct Cli {
    /// Config file of `key = value` lines.
    #[arg(long, short)]
    pub config: Option<PathBuf>,

    /// Print every config key with a short description and exit.
    #[arg(long)]
    pub list_keys: bool,

    /// Command (timescales | unitary | model1 | qsd | model2 | figures)
    /// followed by overrides such as `--D_p 2`, `--outdir=out`, `--strict`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, num_args = 0..)]
    pub args: Vec<String>,
}

/// Builds the resolved config: defaults, then file, then command, then flags.
pub fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = cli.config.clone();
    let mut rest: &[String] = &cli.args;
    let command = match rest.first() {
        Some(c) if !c.starts_with('-') => {
            rest = &rest[1..];
            Some(c.as_str())
        }
        _ => None,
    };
    // `--config` may also follow the command
    let mut overrides = Vec::with_capacity(rest.len());
    let mut it = rest.iter();
    while let Some(a) = it.next() {
        if a == "--config" || a == "-c" {
            let path = it.next().ok_or_else(|| CliError::Config("`--config` needs a path".into()))?;
            config = Some(PathBuf::from(path));
        } else if let Some(path) = a.strip_prefix("--config=") {
            config = Some(PathBuf::from(path));
        } else {
            overrides.push(a.clone());
        }
    }
    let mut cfg = RunConfig::default();
    if let Some(path) = &config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    if let Some(c) = command {
        cfg.set("command", c)?;
    }
    cfg.apply_flags(&overrides)?;
    Ok(cfg)
}

/// Runs the parsed command line and returns the process exit code.
pub fn main_with(cli: Cli) -> u8 {
    if cli.list_keys {
        use std::io::Write;
        let mut stdout = std::io::stdout().lock();
        for (k, help) in config::KEYS {
            if writeln!(stdout, "{k:16} {help}").is_err() {
                break;
            }
        }
        return 0;
    }
    let result = resolve(&cli).and_then(|cfg| {
        if let Some(n) = cfg.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Config(format!("threads: {e}")))?;
        }
        run(&cfg).map(|r| (cfg, r))
    });
    match result {
        Ok((cfg, report)) => {
            print!("{}", report.text);
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!("wrote {}", cfg.outdir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
