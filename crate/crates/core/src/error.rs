use chrono::NaiveDate;
use thiserror::Error;

use crate::currency::CurrencyCode;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("currency {0} not found")]
    NotFound(CurrencyCode),

    #[error("size error: {0}")]
    Size(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate series for {currency}: {reason}")]
    Degenerate {
        currency: CurrencyCode,
        reason: String,
    },

    #[error("zero-variance series")]
    ZeroVariance,

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("window {id} ({start}..{end}): {source}")]
    Window {
        id: usize,
        start: NaiveDate,
        end: NaiveDate,
        #[source]
        source: Box<Error>,
    },

    #[error("fetch error for {currency}: {message}")]
    Fetch {
        currency: CurrencyCode,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn size(msg: impl Into<String>) -> Self {
        Error::Size(msg.into())
    }

    /// Attaches the offending currency to a zero-variance error.
    pub(crate) fn for_currency(self, currency: CurrencyCode) -> Self {
        match self {
            Error::ZeroVariance => Error::Degenerate {
                currency,
                reason: "zero variance".into(),
            },
            other => other,
        }
    }

    /// True for errors caused by bad input or usage rather than numerics or internals.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::NotFound(_)
            | Error::Size(_)
            | Error::Degenerate { .. }
            | Error::ZeroVariance
            | Error::Fetch { .. }
            | Error::Config(_)
            | Error::Io(_) => true,
            Error::Domain(_) | Error::Numeric(_) => false,
            Error::Window { source, .. } => source.is_input_error(),
        }
    }
}
