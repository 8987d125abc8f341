//! Traditional univariate forecasters.
//!
//! Each model follows the same two-step contract: fit on a [`MonthSeries`]
//! history, then forecast `h` months past its last stamp.
//!
//! [`MonthSeries`]: crate::calendar::MonthSeries

pub mod ets;
pub mod naive;
pub mod optim;
pub mod ptf;
pub mod sarima;
pub mod stl;

pub use ets::{ets_fit, ets_forecast, ComponentKind, EtsState};
pub use naive::{naive_forecast, seasonal_naive_forecast};
pub use ptf::{ptf_fit, ptf_forecast, PtfMode, PtfModel, PtfParams};
pub use sarima::{sarima_select_fit, sarima_fit, sarima_forecast, sarima_select, SarimaModel, SarimaOrder};
pub use stl::{stl_decompose, stl_forecast, StlComponents, StlParams};

use crate::error::{Error, Result};

pub(crate) fn check_horizon(h: usize) -> Result<()> {
    if h == 0 {
        return Err(Error::Input("forecast horizon must be at least 1".into()));
    }
    Ok(())
}
