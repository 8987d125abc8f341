use serde::{Deserialize, Serialize};

use crate::calendar::{Commodity, CommodityCalendar, MarketingYear, MonthSeries, MonthStamp};
use crate::error::{Error, Result};
use crate::ingest::Dataset;

pub const N_SPLITS: u32 = 16;
pub const FIRST_TRAIN_MY: i32 = 1997;
/// Marketing years in the first split's training window.
pub const BASE_TRAIN_YEARS: i32 = 10;
pub const VALIDATION_YEARS: i32 = 2;

/// Inclusive range of marketing years for one commodity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MyRange {
    pub commodity: Commodity,
    pub first: i32,
    pub last: i32,
}

impl MyRange {
    pub fn years(&self) -> usize {
        (self.last - self.first + 1) as usize
    }

    pub fn months(&self) -> usize {
        12 * self.years()
    }

    pub fn start(&self) -> MonthStamp {
        MarketingYear::new(self.commodity, self.first).first_month()
    }

    pub fn end(&self) -> MonthStamp {
        MarketingYear::new(self.commodity, self.last).last_month()
    }

    pub fn slice(&self, series: &MonthSeries) -> Result<MonthSeries> {
        series.slice_window((self.start(), self.end()))
    }
}

/// One expanding-window split: train from MY 1997, two validation years, one
/// test year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EvalSplit {
    pub id: u32,
    pub commodity: Commodity,
    pub train: MyRange,
    pub validation: MyRange,
    pub test: MyRange,
}

impl EvalSplit {
    pub fn new(commodity: Commodity, id: u32) -> Result<Self> {
        if !(1..=N_SPLITS).contains(&id) {
            return Err(Error::Input(format!("split id {id} outside 1..={N_SPLITS}")));
        }
        let train_last = FIRST_TRAIN_MY + BASE_TRAIN_YEARS - 1 + (id as i32 - 1);
        let range = |first, last| MyRange {
            commodity,
            first,
            last,
        };
        Ok(EvalSplit {
            id,
            commodity,
            train: range(FIRST_TRAIN_MY, train_last),
            validation: range(train_last + 1, train_last + VALIDATION_YEARS),
            test: range(train_last + VALIDATION_YEARS + 1, train_last + VALIDATION_YEARS + 1),
        })
    }

    pub fn test_year(&self) -> MarketingYear {
        MarketingYear::new(self.commodity, self.test.first)
    }

    /// Train and validation as one contiguous range.
    pub fn train_validation(&self) -> MyRange {
        MyRange {
            last: self.validation.last,
            ..self.train
        }
    }
}

/// The 16 splits for one commodity calendar.
pub fn make_splits(cal: &CommodityCalendar) -> Vec<EvalSplit> {
    (1..=N_SPLITS)
        .map(|id| EvalSplit::new(cal.commodity(), id).expect("id in range"))
        .collect()
}

/// [`make_splits`] after checking that the price history covers every window.
pub fn make_splits_checked(ds: &Dataset, cal: &CommodityCalendar) -> Result<Vec<EvalSplit>> {
    let splits = make_splits(cal);
    let c = cal.commodity();
    let first = splits[0].train.start();
    let last = splits[splits.len() - 1].test.end();
    let mut missing = Vec::new();
    let mut m = first;
    while m <= last {
        if ds.price(c, m).is_none() {
            missing.push(m);
        }
        m = m.succ();
    }
    if !missing.is_empty() {
        let shown: Vec<String> = missing.iter().take(6).map(|m| m.to_string()).collect();
        return Err(Error::Coverage(format!(
            "{c}: {} months missing between {first} and {last} ({}{})",
            missing.len(),
            shown.join(", "),
            if missing.len() > 6 { ", …" } else { "" }
        )));
    }
    Ok(splits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_shape() {
        let s = make_splits(&Commodity::Corn.calendar());
        assert_eq!(s.len(), 16);
        assert_eq!((s[0].train.first, s[0].train.last), (1997, 2006));
        assert_eq!((s[0].validation.first, s[0].validation.last), (2007, 2008));
        assert_eq!(s[0].test.first, 2009);
        assert_eq!(s[15].test.first, 2024);
        for (i, sp) in s.iter().enumerate() {
            assert_eq!(sp.train.months(), 120 + 12 * i);
            assert_eq!(sp.validation.months(), 24);
            assert_eq!(sp.test.months(), 12);
            assert_eq!(sp.train.end().succ(), sp.validation.start());
            assert_eq!(sp.validation.end().succ(), sp.test.start());
        }
    }
}
