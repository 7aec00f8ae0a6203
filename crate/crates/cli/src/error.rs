use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] reflectlab::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("regime warnings with --strict: {}", .0.join("; "))]
    Regime(Vec<String>),
}

impl CliError {
    /// 0 success, 1 i/o, 2 configuration or invalid input, 3 numerical
    /// failure, 4 regime warning under `--strict`.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
            CliError::Io(_) => 1,
            CliError::Regime(_) => 4,
        }
    }
}
