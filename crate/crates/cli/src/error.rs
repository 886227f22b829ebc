//! Pipeline errors sorted into exit-code categories: configuration problems
//! exit 2, data/file problems exit 3, numeric failures exit 4.

use std::fmt;

use hvacopt_core::Error as CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Data,
    Numeric,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Config => 2,
            Category::Data => 3,
            Category::Numeric => 4,
        }
    }
}

#[derive(Debug)]
pub struct PipelineError {
    pub category: Category,
    pub message: String,
}

pub type PipelineResult<T> = Result<T, PipelineError>;

impl PipelineError {
    pub fn config(message: impl Into<String>) -> Self {
        PipelineError {
            category: Category::Config,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        PipelineError {
            category: Category::Data,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        PipelineError {
            category: Category::Numeric,
            message: message.into(),
        }
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.category {
            Category::Config => "config",
            Category::Data => "data",
            Category::Numeric => "numeric",
        };
        write!(f, "{kind} error: {}", self.message)
    }
}

impl std::error::Error for PipelineError {}

impl From<CoreError> for PipelineError {
    fn from(e: CoreError) -> Self {
        let category = match &e {
            CoreError::InvalidConfig(_) | CoreError::UnknownProfile(_) => Category::Config,
            CoreError::DimMismatch { .. }
            | CoreError::LengthMismatch { .. }
            | CoreError::SchemaMismatch(_)
            | CoreError::MissingPairing(_)
            | CoreError::EmptyInput(_) => Category::Data,
            CoreError::NonFinite(_)
            | CoreError::RankDeficient
            | CoreError::NonPositiveEstimate(_)
            | CoreError::NotInterior(_)
            | CoreError::Stall
            | CoreError::Divergence { .. } => Category::Numeric,
        };
        PipelineError {
            category,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::data(e.to_string())
    }
}
