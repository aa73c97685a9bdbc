use locmix_core::counting::CountingError;
use locmix_core::cover::CoverError;
use locmix_core::fuchsian::FuchsianError;
use locmix_core::mixing::MixingError;
use locmix_core::symbolic::SymbolicError;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const IO: u8 = 1;
    pub const VALIDATION: u8 = 2;
    pub const GRAM_MISSING: u8 = 3;
    pub const BUDGET: u8 = 4;
    pub const NUMERIC: u8 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("{0}")]
    GramMissing(String),
    #[error("{0}")]
    Budget(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => exit::IO,
            CliError::Validation(_) => exit::VALIDATION,
            CliError::GramMissing(_) => exit::GRAM_MISSING,
            CliError::Budget(_) => exit::BUDGET,
            CliError::Numeric(_) => exit::NUMERIC,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<FuchsianError> for CliError {
    fn from(e: FuchsianError) -> Self {
        match e {
            FuchsianError::InvalidPresentation(_) | FuchsianError::RadiusTooLarge { .. } => {
                CliError::Validation(e.to_string())
            }
            FuchsianError::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            FuchsianError::CuspEscape { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<CoverError> for CliError {
    fn from(e: CoverError) -> Self {
        match e {
            CoverError::GramMissing { .. } => CliError::GramMissing(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<CountingError> for CliError {
    fn from(e: CountingError) -> Self {
        match e {
            CountingError::Fuchsian(f) => f.into(),
            CountingError::InsufficientData { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<MixingError> for CliError {
    fn from(e: MixingError) -> Self {
        match e {
            MixingError::Fuchsian(f) => f.into(),
            MixingError::Fit(f) => f.into(),
            MixingError::AllDiscarded => CliError::Numeric(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<SymbolicError> for CliError {
    fn from(e: SymbolicError) -> Self {
        match e {
            SymbolicError::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            SymbolicError::Numeric(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_exit_codes() {
        let budget: CliError = FuchsianError::BudgetExceeded { budget: 1 }.into();
        assert_eq!(budget.exit_code(), exit::BUDGET);
        let escape: CliError = MixingError::Fuchsian(FuchsianError::CuspEscape { height: 1e9 }).into();
        assert_eq!(escape.exit_code(), exit::NUMERIC);
        assert_eq!(CliError::from(MixingError::AllDiscarded).exit_code(), exit::NUMERIC);
        assert_eq!(CliError::from(MixingError::ZeroMass).exit_code(), exit::VALIDATION);
        let short: CliError = CountingError::InsufficientData { needed: 5, have: 2 }.into();
        assert_eq!(short.exit_code(), exit::NUMERIC);
        assert_eq!(CliError::from(SymbolicError::Numeric("nan".into())).exit_code(), exit::NUMERIC);
        let io: CliError = std::io::Error::other("disk").into();
        assert_eq!(io.exit_code(), exit::IO);
    }
}
