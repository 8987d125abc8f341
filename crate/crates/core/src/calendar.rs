//! Monthly calendar stamps, price series and marketing-year arithmetic.
//!
//! Every commodity is reported on its own marketing year (MY): a 12-month
//! window that starts at a fixed calendar month and is named after the
//! calendar year in which it starts. Corn MY 2023 runs from September 2023
//! through August 2024.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A calendar month. Ordering is lexicographic on `(year, month)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MonthStamp {
    year: i32,
    month: u8,
}

impl MonthStamp {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Calendar(format!("month {month} outside 1..=12")));
        }
        Ok(MonthStamp {
            year,
            month: month as u8,
        })
    }

    /// Panicking constructor for literals in tests and tables.
    pub const fn ym(year: i32, month: u8) -> Self {
        assert!(month >= 1 && month <= 12);
        MonthStamp { year, month }
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month as u32
    }

    /// Months since year 0, January. Used for distance arithmetic.
    fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    fn from_ordinal(ord: i64) -> Self {
        let year = ord.div_euclid(12);
        let month = ord.rem_euclid(12) + 1;
        MonthStamp {
            year: year as i32,
            month: month as u8,
        }
    }

    pub fn succ(self) -> Self {
        self.add_months(1)
    }

    pub fn pred(self) -> Self {
        self.add_months(-1)
    }

    pub fn add_months(self, n: i64) -> Self {
        Self::from_ordinal(self.ordinal() + n)
    }

    /// Signed number of months from `self` to `other`.
    pub fn months_until(self, other: MonthStamp) -> i64 {
        other.ordinal() - self.ordinal()
    }

    pub fn from_date(date: chrono::NaiveDate) -> Self {
        use chrono::Datelike;
        MonthStamp {
            year: date.year(),
            month: date.month() as u8,
        }
    }

    pub fn first_day(self) -> chrono::NaiveDate {
        chrono::NaiveDate::from_ymd_opt(self.year, self.month as u32, 1)
            .expect("valid month stamp")
    }
}

impl fmt::Display for MonthStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Commodity {
    Corn,
    Soybeans,
    Wheat,
    Cotton,
}

impl Commodity {
    pub const ALL: [Commodity; 4] = [
        Commodity::Corn,
        Commodity::Soybeans,
        Commodity::Wheat,
        Commodity::Cotton,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Commodity::Corn => "corn",
            Commodity::Soybeans => "soybeans",
            Commodity::Wheat => "wheat",
            Commodity::Cotton => "cotton",
        }
    }

    pub fn calendar(self) -> CommodityCalendar {
        CommodityCalendar::for_commodity(self)
    }

    /// Grains average five prior years; cotton uses a seven-year Olympic mean.
    pub fn uses_olympic_average(self) -> bool {
        self == Commodity::Cotton
    }
}

impl fmt::Display for Commodity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Commodity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "corn" => Ok(Commodity::Corn),
            "soybeans" | "soybean" | "soy" => Ok(Commodity::Soybeans),
            "wheat" => Ok(Commodity::Wheat),
            "cotton" | "upland cotton" => Ok(Commodity::Cotton),
            other => Err(Error::Input(format!("unknown commodity '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceUnit {
    DollarsPerBushel,
    CentsPerPound,
}

impl fmt::Display for PriceUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriceUnit::DollarsPerBushel => "$/bu",
            PriceUnit::CentsPerPound => "cents/lb",
        })
    }
}

/// Marketing-year rules for one commodity. Only constructible through
/// [`CommodityCalendar::for_commodity`], so the start month and unit always
/// agree with the commodity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CommodityCalendar {
    commodity: Commodity,
    my_start_month: u8,
    unit: PriceUnit,
}

impl CommodityCalendar {
    pub const fn for_commodity(commodity: Commodity) -> Self {
        let (my_start_month, unit) = match commodity {
            Commodity::Corn | Commodity::Soybeans => (9, PriceUnit::DollarsPerBushel),
            Commodity::Wheat => (6, PriceUnit::DollarsPerBushel),
            Commodity::Cotton => (8, PriceUnit::CentsPerPound),
        };
        CommodityCalendar {
            commodity,
            my_start_month,
            unit,
        }
    }

    pub fn commodity(&self) -> Commodity {
        self.commodity
    }

    pub fn my_start_month(&self) -> u32 {
        self.my_start_month as u32
    }

    pub fn unit(&self) -> PriceUnit {
        self.unit
    }

    pub fn marketing_year(&self, start_year: i32) -> MarketingYear {
        MarketingYear::new(self.commodity, start_year)
    }

    /// The marketing year containing `stamp`.
    pub fn marketing_year_of(&self, stamp: MonthStamp) -> MarketingYear {
        let start_year = if stamp.month() >= self.my_start_month() {
            stamp.year()
        } else {
            stamp.year() - 1
        };
        self.marketing_year(start_year)
    }

    pub fn my_start(&self, start_year: i32) -> MonthStamp {
        MonthStamp::ym(start_year, self.my_start_month)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MarketingYear {
    pub commodity: Commodity,
    pub start_year: i32,
}

impl MarketingYear {
    pub fn new(commodity: Commodity, start_year: i32) -> Self {
        MarketingYear {
            commodity,
            start_year,
        }
    }

    pub fn first_month(&self) -> MonthStamp {
        self.commodity.calendar().my_start(self.start_year)
    }

    pub fn last_month(&self) -> MonthStamp {
        self.first_month().add_months(11)
    }

    /// The 12 stamps of the year, in marketing order.
    pub fn months(&self) -> impl Iterator<Item = MonthStamp> {
        let first = self.first_month();
        (0..12).map(move |i| first.add_months(i))
    }
}

impl fmt::Display for MarketingYear {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} MY {}", self.commodity, self.start_year)
    }
}

/// Inclusive 12-month window of `my` under `cal`.
pub fn marketing_year_window(
    cal: &CommodityCalendar,
    my: &MarketingYear,
) -> Result<(MonthStamp, MonthStamp)> {
    if cal.commodity != my.commodity {
        return Err(Error::Calendar(format!(
            "calendar for {} applied to {}",
            cal.commodity, my
        )));
    }
    let start = cal.my_start(my.start_year);
    Ok((start, start.add_months(11)))
}

/// Position of `stamp` inside its marketing year: 1 for the start month,
/// 12 for the month before the next start.
pub fn month_index_in_my(cal: &CommodityCalendar, stamp: MonthStamp) -> u32 {
    ((stamp.month() + 12 - cal.my_start_month()) % 12) + 1
}

/// A gap-free monthly sequence of strictly positive prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthSeries {
    start: MonthStamp,
    values: Vec<f64>,
}

impl MonthSeries {
    pub fn new(start: MonthStamp, values: Vec<f64>) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::NonPositive {
                    stamp: start.add_months(i as i64),
                    value: v,
                });
            }
        }
        Ok(MonthSeries { start, values })
    }

    /// Builds a series from stamped points, which must be sorted-able into a
    /// contiguous run. Duplicates and gaps are errors.
    pub fn from_points(mut points: Vec<(MonthStamp, f64)>) -> Result<Self> {
        points.sort_by_key(|p| p.0);
        let Some(&(start, _)) = points.first() else {
            return Err(Error::Input("empty series".into()));
        };
        let mut values = Vec::with_capacity(points.len());
        let mut expected = start;
        for (stamp, v) in points {
            if stamp < expected {
                return Err(Error::Integrity(format!("duplicate month {stamp}")));
            }
            if stamp != expected {
                return Err(Error::Gap(expected));
            }
            values.push(v);
            expected = expected.succ();
        }
        MonthSeries::new(start, values)
    }

    pub fn start(&self) -> MonthStamp {
        self.start
    }

    /// Stamp of the last element. Panics on an empty series.
    pub fn end(&self) -> MonthStamp {
        assert!(!self.values.is_empty(), "empty series has no end");
        self.start.add_months(self.values.len() as i64 - 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }

    pub fn stamp_at(&self, i: usize) -> MonthStamp {
        self.start.add_months(i as i64)
    }

    pub fn index_of(&self, stamp: MonthStamp) -> Option<usize> {
        let d = self.start.months_until(stamp);
        (d >= 0 && (d as usize) < self.values.len()).then_some(d as usize)
    }

    pub fn get(&self, stamp: MonthStamp) -> Option<f64> {
        self.index_of(stamp).map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (MonthStamp, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| (self.stamp_at(i), v))
    }

    /// Contiguous sub-series covering exactly `window` (inclusive).
    pub fn slice_window(&self, window: (MonthStamp, MonthStamp)) -> Result<MonthSeries> {
        let (lo, hi) = window;
        let bounds = || Error::Bounds {
            start: lo,
            end: hi,
            series_start: self.start,
            series_end: self.start.add_months(self.values.len() as i64 - 1),
        };
        if hi < lo || self.is_empty() {
            return Err(bounds());
        }
        let (Some(a), Some(b)) = (self.index_of(lo), self.index_of(hi)) else {
            return Err(bounds());
        };
        Ok(MonthSeries {
            start: lo,
            values: self.values[a..=b].to_vec(),
        })
    }

    /// Prefix of the series ending at `last` (inclusive).
    pub fn up_to(&self, last: MonthStamp) -> Result<MonthSeries> {
        self.slice_window((self.start, last))
    }

    /// Appends `other`, which must start the month after this series ends.
    pub fn concat(&self, other: &MonthSeries) -> Result<MonthSeries> {
        if self.is_empty() {
            return Ok(other.clone());
        }
        if other.start != self.end().succ() {
            return Err(Error::Gap(self.end().succ()));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Ok(MonthSeries {
            start: self.start,
            values,
        })
    }
}

/// Stamps of the `h` months following `last`.
pub fn future_stamps(last: MonthStamp, h: usize) -> impl Iterator<Item = MonthStamp> {
    (1..=h as i64).map(move |i| last.add_months(i))
}
