use std::path::PathBuf;

use crate::calendar::{Commodity, MonthStamp};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("calendar error: {0}")]
    Calendar(String),

    #[error("window {start}..={end} lies outside series range {series_start}..={series_end}")]
    Bounds {
        start: MonthStamp,
        end: MonthStamp,
        series_start: MonthStamp,
        series_end: MonthStamp,
    },

    #[error("missing month {0} in series")]
    Gap(MonthStamp),

    #[error("non-positive or non-finite price {value} at {stamp}")]
    NonPositive { stamp: MonthStamp, value: f64 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("insufficient history for {commodity} MY {requested}; first usable marketing year is {first_usable}")]
    History {
        commodity: Commodity,
        requested: i32,
        first_usable: i32,
    },

    #[error("optimizer did not converge for {0}")]
    Convergence(String),

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("schema error at {locator}: {message}")]
    Schema { locator: String, message: String },

    #[error("degenerate HAC variance with non-zero mean differential {0}")]
    DegenerateVariance(f64),

    #[error("selection failed: {0}")]
    Selection(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
