//! Error classification: every failure maps to a machine-readable code
//! with a distinct process exit status, emitted as JSON on stderr.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Code {
    Generic,
    FileNotFound,
    ConfigConflict,
    BudgetExhausted,
    MalformedInput,
    IdMismatch,
    CheckFailed,
}

impl Code {
    pub fn exit_code(self) -> i32 {
        match self {
            Code::Generic => 1,
            Code::FileNotFound => 2,
            Code::ConfigConflict => 3,
            Code::BudgetExhausted => 4,
            Code::MalformedInput => 5,
            Code::IdMismatch => 6,
            Code::CheckFailed => 7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Code::Generic => "error",
            Code::FileNotFound => "file-not-found",
            Code::ConfigConflict => "config-conflict",
            Code::BudgetExhausted => "budget-exhausted",
            Code::MalformedInput => "malformed-input",
            Code::IdMismatch => "id-mismatch",
            Code::CheckFailed => "check-failed",
        }
    }
}

#[derive(Debug)]
pub struct AppError {
    pub code: Code,
    pub message: String,
}

impl AppError {
    pub fn new(code: Code, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(Code::ConfigConflict, message)
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": {
                "code": self.code.name(),
                "exit": self.code.exit_code(),
                "message": self.message,
            }
        })
        .to_string()
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code.name(), self.message)
    }
}

impl std::error::Error for AppError {}

fn io_code(e: &std::io::Error) -> Code {
    if e.kind() == std::io::ErrorKind::NotFound {
        Code::FileNotFound
    } else {
        Code::Generic
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        Self::new(io_code(&e), e.to_string())
    }
}

impl From<tropiq::kg::KgError> for AppError {
    fn from(e: tropiq::kg::KgError) -> Self {
        use tropiq::kg::KgError;
        let code = match &e {
            KgError::Io { source, .. } => io_code(source),
            _ => Code::MalformedInput,
        };
        Self::new(code, e.to_string())
    }
}

impl From<tropiq::query::QueryError> for AppError {
    fn from(e: tropiq::query::QueryError) -> Self {
        Self::new(Code::MalformedInput, e.to_string())
    }
}

impl From<tropiq::confidence::ConfidenceError> for AppError {
    fn from(e: tropiq::confidence::ConfidenceError) -> Self {
        use tropiq::confidence::ConfidenceError;
        let code = match &e {
            ConfidenceError::Io { source, .. } => io_code(source),
            ConfidenceError::BadDimension | ConfidenceError::EmptyTrainSplit => {
                Code::ConfigConflict
            }
            _ => Code::MalformedInput,
        };
        Self::new(code, e.to_string())
    }
}

impl From<tropiq::oracle::OracleError> for AppError {
    fn from(e: tropiq::oracle::OracleError) -> Self {
        use tropiq::oracle::OracleError;
        let code = match &e {
            OracleError::BudgetExceeded { .. } => Code::BudgetExhausted,
            _ => Code::MalformedInput,
        };
        Self::new(code, e.to_string())
    }
}

impl From<tropiq::inference::InferenceError> for AppError {
    fn from(e: tropiq::inference::InferenceError) -> Self {
        use tropiq::inference::InferenceError;
        let code = match &e {
            InferenceError::EnumerationBudget { .. } => Code::BudgetExhausted,
            InferenceError::NoCycle => Code::Generic,
        };
        Self::new(code, e.to_string())
    }
}

impl From<tropiq::dataset::DatasetError> for AppError {
    fn from(e: tropiq::dataset::DatasetError) -> Self {
        use tropiq::dataset::DatasetError;
        let code = match &e {
            DatasetError::Oracle(tropiq::oracle::OracleError::BudgetExceeded { .. }) => {
                Code::BudgetExhausted
            }
            DatasetError::EvalOnlyTypeInTrain(_) => Code::ConfigConflict,
            _ => Code::MalformedInput,
        };
        Self::new(code, e.to_string())
    }
}

impl From<tropiq::metrics::MetricsError> for AppError {
    fn from(e: tropiq::metrics::MetricsError) -> Self {
        use tropiq::metrics::MetricsError;
        let code = match &e {
            MetricsError::IdMismatch(_) => Code::IdMismatch,
            MetricsError::Oracle(tropiq::oracle::OracleError::BudgetExceeded { .. }) => {
                Code::BudgetExhausted
            }
            _ => Code::MalformedInput,
        };
        Self::new(code, e.to_string())
    }
}
