//! Ingestion of the ERS input/output files into a normalized [`Dataset`].
//!
//! Raw column names are not hard-coded: a [`ColumnMapping`] (TOML) names the
//! commodity, date, vintage and value columns. Rows that cannot be mapped are
//! rejected individually and reported with their line number; only I/O and
//! header problems abort a parse.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::calendar::{
    Commodity, CommodityCalendar, MarketingYear, MonthSeries, MonthStamp,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    PriceReceived,
    MarketingPct,
    FuturesPrice,
    Basis,
}

impl FieldKind {
    pub fn label(self) -> &'static str {
        match self {
            FieldKind::PriceReceived => "price_received",
            FieldKind::MarketingPct => "marketing_pct",
            FieldKind::FuturesPrice => "futures_price",
            FieldKind::Basis => "basis",
        }
    }
}

impl FromStr for FieldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "price_received" => Ok(FieldKind::PriceReceived),
            "marketing_pct" => Ok(FieldKind::MarketingPct),
            "futures_price" => Ok(FieldKind::FuturesPrice),
            "basis" => Ok(FieldKind::Basis),
            other => Err(Error::Input(format!("unknown field kind '{other}'"))),
        }
    }
}

/// One mapped row of the input file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawInputRecord {
    pub commodity: Commodity,
    /// Calendar month; for futures, the contract delivery month.
    pub stamp: MonthStamp,
    pub field_kind: FieldKind,
    pub value: f64,
    /// Publication date, or settlement date for futures.
    pub vintage: Option<NaiveDate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MyaKind {
    Forecast,
    Actual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MyaKey {
    pub commodity: Commodity,
    pub marketing_year: i32,
    pub kind: MyaKind,
    pub vintage: Option<NaiveDate>,
}

/// Published MYA forecasts and actuals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PublishedTable {
    entries: BTreeMap<MyaKey, f64>,
}

impl PublishedTable {
    pub fn insert(&mut self, key: MyaKey, value: f64) -> Result<()> {
        match self.entries.get(&key) {
            Some(&old) if old != value => Err(Error::Integrity(format!(
                "conflicting values {old} and {value} for {} MY {} ({:?}, vintage {:?})",
                key.commodity, key.marketing_year, key.kind, key.vintage
            ))),
            _ => {
                self.entries.insert(key, value);
                Ok(())
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MyaKey, f64)> {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    /// All forecast vintages for one marketing year, oldest first.
    pub fn forecast_vintages(&self, commodity: Commodity, my: i32) -> Vec<(NaiveDate, f64)> {
        self.entries
            .iter()
            .filter(|(k, _)| {
                k.commodity == commodity && k.marketing_year == my && k.kind == MyaKind::Forecast
            })
            .filter_map(|(k, v)| k.vintage.map(|d| (d, *v)))
            .collect()
    }

    /// Latest published actual for a marketing year.
    pub fn actual(&self, commodity: Commodity, my: i32) -> Option<f64> {
        self.entries
            .iter()
            .filter(|(k, _)| {
                k.commodity == commodity && k.marketing_year == my && k.kind == MyaKind::Actual
            })
            .map(|(_, v)| *v)
            .next_back()
    }

    /// USDA benchmark vintage: the second-latest forecast published strictly
    /// before the marketing year begins.
    pub fn benchmark_forecast(&self, my: &MarketingYear) -> Option<(NaiveDate, f64)> {
        let start = my.first_month().first_day();
        let before: Vec<_> = self
            .forecast_vintages(my.commodity, my.start_year)
            .into_iter()
            .filter(|(d, _)| *d < start)
            .collect();
        before.len().checked_sub(2).map(|i| before[i])
    }
}

/// Normalized monthly marketing weights `w_1..w_12` (marketing order).
#[derive(Debug, Clone, PartialEq)]
pub struct MarketingWeights {
    pub commodity: Commodity,
    pub my: MarketingYear,
    pub w: [f64; 12],
}

impl MarketingWeights {
    /// Normalizes raw (percent or fraction) values by their sum.
    pub fn from_raw(my: MarketingYear, raw: [f64; 12]) -> Result<Self> {
        if raw.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Input(format!("negative or non-finite marketing share for {my}")));
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(Error::Input(format!("marketing shares for {my} sum to zero")));
        }
        let mut w = raw;
        for v in &mut w {
            *v /= total;
        }
        Ok(MarketingWeights {
            commodity: my.commodity,
            my,
            w,
        })
    }

    pub fn uniform(my: MarketingYear) -> Self {
        MarketingWeights {
            commodity: my.commodity,
            my,
            w: [1.0 / 12.0; 12],
        }
    }
}

/// Futures settlements keyed by contract month then settlement date.
pub type FuturesBook = BTreeMap<MonthStamp, BTreeMap<NaiveDate, f64>>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    prices: BTreeMap<Commodity, BTreeMap<MonthStamp, f64>>,
    marketing_pct: BTreeMap<Commodity, BTreeMap<MonthStamp, f64>>,
    basis: BTreeMap<Commodity, BTreeMap<MonthStamp, f64>>,
    futures: BTreeMap<Commodity, FuturesBook>,
    published: PublishedTable,
}

impl Dataset {
    /// Collapses raw records: for monthly fields the latest vintage wins
    /// (a record without vintage counts as final). Conflicting duplicates
    /// with the same vintage are an integrity error.
    pub fn from_records(records: &[RawInputRecord], published: PublishedTable) -> Result<Self> {
        type Slot = (Option<NaiveDate>, f64);
        let mut monthly: BTreeMap<(Commodity, FieldKind, MonthStamp), Slot> = BTreeMap::new();
        let mut ds = Dataset {
            published,
            ..Dataset::default()
        };
        for r in records {
            if r.field_kind == FieldKind::FuturesPrice {
                let Some(date) = r.vintage else {
                    return Err(Error::Integrity(format!(
                        "futures record for {} contract {} has no settlement date",
                        r.commodity, r.stamp
                    )));
                };
                let slot = ds
                    .futures
                    .entry(r.commodity)
                    .or_default()
                    .entry(r.stamp)
                    .or_default();
                match slot.get(&date) {
                    Some(&old) if old != r.value => {
                        return Err(Error::Integrity(format!(
                            "conflicting settlements for {} contract {} on {date}",
                            r.commodity, r.stamp
                        )))
                    }
                    _ => {
                        slot.insert(date, r.value);
                    }
                }
                continue;
            }
            let key = (r.commodity, r.field_kind, r.stamp);
            let rank = |v: Option<NaiveDate>| v.unwrap_or(NaiveDate::MAX);
            match monthly.get(&key) {
                Some(&(v, old)) if rank(v) == rank(r.vintage) && old != r.value => {
                    return Err(Error::Integrity(format!(
                        "conflicting {} values for {} {}",
                        r.field_kind.label(),
                        r.commodity,
                        r.stamp
                    )))
                }
                Some(&(v, _)) if rank(v) > rank(r.vintage) => {}
                _ => {
                    monthly.insert(key, (r.vintage, r.value));
                }
            }
        }
        for ((c, kind, stamp), (_, value)) in monthly {
            let map = match kind {
                FieldKind::PriceReceived => &mut ds.prices,
                FieldKind::MarketingPct => &mut ds.marketing_pct,
                FieldKind::Basis => &mut ds.basis,
                FieldKind::FuturesPrice => unreachable!(),
            };
            map.entry(c).or_default().insert(stamp, value);
        }
        Ok(ds)
    }

    pub fn published(&self) -> &PublishedTable {
        &self.published
    }

    pub fn commodities(&self) -> impl Iterator<Item = Commodity> + '_ {
        self.prices.keys().copied()
    }

    pub fn price_points(&self, c: Commodity) -> Option<&BTreeMap<MonthStamp, f64>> {
        self.prices.get(&c)
    }

    /// Gap-free price series; a missing month is a hard error.
    pub fn price_series(&self, c: Commodity) -> Result<MonthSeries> {
        let pts = self
            .prices
            .get(&c)
            .ok_or_else(|| Error::Coverage(format!("no prices for {c}")))?;
        MonthSeries::from_points(pts.iter().map(|(k, v)| (*k, *v)).collect())
    }

    pub fn price(&self, c: Commodity, stamp: MonthStamp) -> Option<f64> {
        self.prices.get(&c)?.get(&stamp).copied()
    }

    pub fn marketing_pct(&self, c: Commodity, stamp: MonthStamp) -> Option<f64> {
        self.marketing_pct.get(&c)?.get(&stamp).copied()
    }

    pub fn basis(&self, c: Commodity, stamp: MonthStamp) -> Option<f64> {
        self.basis.get(&c)?.get(&stamp).copied()
    }

    pub fn futures(&self, c: Commodity) -> Option<&FuturesBook> {
        self.futures.get(&c)
    }

    /// Actual percentages for one marketing year in marketing order, if all
    /// twelve months are present.
    pub fn year_pct(&self, my: &MarketingYear) -> Option<[f64; 12]> {
        let mut out = [0.0; 12];
        for (i, m) in my.months().enumerate() {
            out[i] = self.marketing_pct(my.commodity, m)?;
        }
        Some(out)
    }

    /// Actual weights of `my` normalized to one.
    pub fn actual_weights(&self, my: &MarketingYear) -> Result<MarketingWeights> {
        let raw = self
            .year_pct(my)
            .ok_or_else(|| Error::Coverage(format!("incomplete marketing percentages for {my}")))?;
        MarketingWeights::from_raw(*my, raw)
    }

    /// Actual MYA from actual prices and actual marketing percentages, falling
    /// back to the published actual when percentages are missing.
    pub fn actual_mya(&self, my: &MarketingYear) -> Result<f64> {
        let prices: Option<Vec<f64>> = my.months().map(|m| self.price(my.commodity, m)).collect();
        match (prices, self.actual_weights(my)) {
            (Some(p), Ok(w)) => Ok(p.iter().zip(w.w.iter()).map(|(a, b)| a * b).sum()),
            _ => self
                .published
                .actual(my.commodity, my.start_year)
                .ok_or_else(|| Error::Coverage(format!("no actual MYA available for {my}"))),
        }
    }

    /// Every record of the dataset in normalized-table order.
    pub fn to_records(&self) -> (Vec<RawInputRecord>, Vec<(MyaKey, f64)>) {
        let mut out = Vec::new();
        let mut push = |map: &BTreeMap<Commodity, BTreeMap<MonthStamp, f64>>, kind| {
            for (c, pts) in map {
                for (s, v) in pts {
                    out.push(RawInputRecord {
                        commodity: *c,
                        stamp: *s,
                        field_kind: kind,
                        value: *v,
                        vintage: None,
                    });
                }
            }
        };
        push(&self.prices, FieldKind::PriceReceived);
        push(&self.marketing_pct, FieldKind::MarketingPct);
        push(&self.basis, FieldKind::Basis);
        for (c, book) in &self.futures {
            for (contract, settles) in book {
                for (d, v) in settles {
                    out.push(RawInputRecord {
                        commodity: *c,
                        stamp: *contract,
                        field_kind: FieldKind::FuturesPrice,
                        value: *v,
                        vintage: Some(*d),
                    });
                }
            }
        }
        let published = self.published.iter().map(|(k, v)| (*k, v)).collect();
        (out, published)
    }

    /// Mutable access for fixtures and repairs.
    pub fn prices_mut(&mut self, c: Commodity) -> &mut BTreeMap<MonthStamp, f64> {
        self.prices.entry(c).or_default()
    }

    pub fn marketing_pct_mut(&mut self, c: Commodity) -> &mut BTreeMap<MonthStamp, f64> {
        self.marketing_pct.entry(c).or_default()
    }

    pub fn basis_mut(&mut self, c: Commodity) -> &mut BTreeMap<MonthStamp, f64> {
        self.basis.entry(c).or_default()
    }

    pub fn futures_mut(&mut self, c: Commodity) -> &mut FuturesBook {
        self.futures.entry(c).or_default()
    }

    pub fn published_mut(&mut self) -> &mut PublishedTable {
        &mut self.published
    }
}

/// Mean after dropping one maximum and one minimum.
pub fn olympic_mean(values: &[f64]) -> f64 {
    assert!(values.len() >= 3, "olympic mean needs at least three values");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let inner = &v[1..v.len() - 1];
    inner.iter().sum::<f64>() / inner.len() as f64
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Number of prior years averaged for weights and basis.
pub fn averaging_window(c: Commodity) -> usize {
    if c.uses_olympic_average() {
        7
    } else {
        5
    }
}

/// Averages one month's history: plain mean (grains) or Olympic mean (cotton).
pub fn historical_average(c: Commodity, values: &[f64]) -> f64 {
    if c.uses_olympic_average() {
        olympic_mean(values)
    } else {
        mean(values)
    }
}

/// Forecast marketing weights for `my`: per-month average of the prior five
/// years' percentages (grains) or the seven-year Olympic average (cotton),
/// renormalized to sum to one.
pub fn forecast_weights(
    ds: &Dataset,
    cal: &CommodityCalendar,
    my: &MarketingYear,
) -> Result<MarketingWeights> {
    if cal.commodity() != my.commodity {
        return Err(Error::Calendar(format!(
            "calendar for {} applied to {my}",
            cal.commodity()
        )));
    }
    let c = my.commodity;
    let window = averaging_window(c) as i32;
    let mut history = Vec::with_capacity(window as usize);
    for y in (my.start_year - window)..my.start_year {
        match ds.year_pct(&cal.marketing_year(y)) {
            Some(p) => history.push(p),
            None => {
                return Err(Error::History {
                    commodity: c,
                    requested: my.start_year,
                    first_usable: first_usable_year(ds, cal, window),
                })
            }
        }
    }
    let mut raw = [0.0; 12];
    for (k, slot) in raw.iter_mut().enumerate() {
        let month: Vec<f64> = history.iter().map(|p| p[k]).collect();
        *slot = historical_average(c, &month);
    }
    MarketingWeights::from_raw(*my, raw)
}

fn first_usable_year(ds: &Dataset, cal: &CommodityCalendar, window: i32) -> i32 {
    let complete: BTreeSet<i32> = ds
        .marketing_pct
        .get(&cal.commodity())
        .map(|m| {
            m.keys()
                .map(|s| cal.marketing_year_of(*s).start_year)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .filter(|y| ds.year_pct(&cal.marketing_year(*y)).is_some())
                .collect()
        })
        .unwrap_or_default();
    complete
        .iter()
        .copied()
        .find(|y| (1..=window).all(|j| complete.contains(&(y + j - 1))))
        .map(|y| y + window)
        .unwrap_or(i32::MAX)
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, PartialEq)]
pub enum ValidationIssue {
    Gap {
        commodity: Commodity,
        stamp: MonthStamp,
    },
    WeightSum {
        commodity: Commodity,
        marketing_year: i32,
        sum: f64,
    },
    NonPositive {
        commodity: Commodity,
        stamp: MonthStamp,
        value: f64,
    },
    Coverage {
        commodity: Commodity,
        message: String,
    },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationIssue::Gap { commodity, stamp } => {
                write!(f, "gap\t{commodity}\t{stamp}")
            }
            ValidationIssue::WeightSum {
                commodity,
                marketing_year,
                sum,
            } => write!(f, "weight_sum\t{commodity}\tMY {marketing_year}\t{sum}"),
            ValidationIssue::NonPositive {
                commodity,
                stamp,
                value,
            } => write!(f, "non_positive\t{commodity}\t{stamp}\t{value}"),
            ValidationIssue::Coverage { commodity, message } => {
                write!(f, "coverage\t{commodity}\t{message}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    /// Line-oriented text, one issue per line.
    pub fn to_text(&self) -> String {
        self.issues.iter().map(|i| format!("{i}\n")).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ValidationRules {
    /// Inclusive marketing-year range every price series must cover.
    pub required_years: Option<(i32, i32)>,
    /// Allowed deviation of a complete year's percentages from 100.
    pub pct_tolerance: f64,
}

impl Default for ValidationRules {
    fn default() -> Self {
        ValidationRules {
            required_years: Some((1997, 2024)),
            pct_tolerance: 0.5,
        }
    }
}

pub fn validate_dataset(ds: &Dataset, rules: &ValidationRules) -> ValidationReport {
    let mut issues = Vec::new();
    for (c, pts) in &ds.prices {
        let (Some(first), Some(last)) = (pts.keys().next(), pts.keys().next_back()) else {
            continue;
        };
        let mut m = *first;
        while m <= *last {
            match pts.get(&m) {
                None => issues.push(ValidationIssue::Gap {
                    commodity: *c,
                    stamp: m,
                }),
                Some(&v) if !(v.is_finite() && v > 0.0) => {
                    issues.push(ValidationIssue::NonPositive {
                        commodity: *c,
                        stamp: m,
                        value: v,
                    })
                }
                _ => {}
            }
            m = m.succ();
        }
        if let Some((lo, hi)) = rules.required_years {
            let cal = c.calendar();
            let need_lo = cal.marketing_year(lo).first_month();
            let need_hi = cal.marketing_year(hi).last_month();
            if *first > need_lo || *last < need_hi {
                issues.push(ValidationIssue::Coverage {
                    commodity: *c,
                    message: format!(
                        "prices span {first}..={last}, need {need_lo}..={need_hi}"
                    ),
                });
            }
        }
    }
    for (c, pcts) in &ds.marketing_pct {
        let cal = c.calendar();
        let years: BTreeSet<i32> = pcts
            .keys()
            .map(|s| cal.marketing_year_of(*s).start_year)
            .collect();
        for y in years {
            if let Some(p) = ds.year_pct(&cal.marketing_year(y)) {
                let sum: f64 = p.iter().sum();
                if (sum - 100.0).abs() > rules.pct_tolerance {
                    issues.push(ValidationIssue::WeightSum {
                        commodity: *c,
                        marketing_year: y,
                        sum,
                    });
                }
            }
        }
    }
    ValidationReport { issues }
}

// ---------------------------------------------------------------------------
// Column mapping and raw parsing

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    #[default]
    Long,
    Wide,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct InputMapping {
    #[serde(default)]
    pub layout: Layout,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    pub commodity_column: String,
    /// A single date column (`YYYY-MM-DD`, `YYYY-MM`, `M/D/YYYY`) ...
    #[serde(default)]
    pub date_column: Option<String>,
    /// ... or separate year and month columns.
    #[serde(default)]
    pub year_column: Option<String>,
    #[serde(default)]
    pub month_column: Option<String>,
    #[serde(default)]
    pub vintage_column: Option<String>,
    #[serde(default)]
    pub field_column: Option<String>,
    #[serde(default)]
    pub value_column: Option<String>,
    /// Long layout: lower-cased label in `field_column` -> field kind.
    #[serde(default)]
    pub field_labels: BTreeMap<String, FieldKind>,
    /// Wide layout: field kind -> column name.
    #[serde(default)]
    pub field_columns: BTreeMap<FieldKind, String>,
    /// Extra commodity spellings (lower-cased) beyond the built-in ones.
    #[serde(default)]
    pub commodity_labels: BTreeMap<String, Commodity>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct OutputMapping {
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    pub commodity_column: String,
    pub marketing_year_column: String,
    #[serde(default)]
    pub vintage_column: Option<String>,
    pub value_column: String,
    #[serde(default)]
    pub kind_column: Option<String>,
    #[serde(default)]
    pub actual_labels: Vec<String>,
    #[serde(default)]
    pub commodity_labels: BTreeMap<String, Commodity>,
}

fn default_delimiter() -> char {
    ','
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct ColumnMapping {
    pub input: InputMapping,
    pub output: OutputMapping,
}

const DEFAULT_MAPPING: &str = include_str!("../config/ers_mapping.toml");

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping::from_toml(DEFAULT_MAPPING).expect("bundled mapping parses")
    }
}

impl ColumnMapping {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn bundled_toml() -> &'static str {
        DEFAULT_MAPPING
    }
}

#[derive(Debug, Clone, Default)]
pub struct RejectedRow {
    pub line: u64,
    pub reason: String,
}

/// Outcome of a raw parse: accepted records plus everything that was skipped.
#[derive(Debug, Clone)]
pub struct ParseReport<T> {
    pub records: Vec<T>,
    pub rejected: Vec<RejectedRow>,
    /// Header columns the mapping never reads.
    pub ignored_columns: Vec<String>,
}

impl<T> Default for ParseReport<T> {
    fn default() -> Self {
        ParseReport {
            records: Vec::new(),
            rejected: Vec::new(),
            ignored_columns: Vec::new(),
        }
    }
}

fn parse_commodity(label: &str, extra: &BTreeMap<String, Commodity>) -> Result<Commodity> {
    let key = label.trim().to_ascii_lowercase();
    if let Some(c) = extra.get(&key) {
        return Ok(*c);
    }
    key.parse()
}

/// Parses `YYYY-MM-DD`, `YYYY/MM/DD`, `M/D/YYYY` and `YYYY-MM` (first of month).
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    for fmt in ["%Y-%m-%d", "%Y/%m/%d", "%m/%d/%Y", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(d) = NaiveDate::parse_from_str(s, fmt) {
            return Some(d);
        }
    }
    let (y, m) = s.split_once(['-', '/'])?;
    NaiveDate::from_ymd_opt(y.parse().ok()?, m.parse().ok()?, 1)
}

fn parse_value(cell: &str) -> std::result::Result<f64, String> {
    let t = cell.trim();
    if t.is_empty() {
        return Err("empty value cell".into());
    }
    t.replace(',', "")
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("malformed numeric cell '{t}'"))
}

struct Header {
    index: HashMap<String, usize>,
    names: Vec<String>,
}

impl Header {
    fn new(rec: &csv::StringRecord) -> Self {
        let names: Vec<String> = rec.iter().map(|s| s.trim().to_string()).collect();
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.to_ascii_lowercase(), i))
            .collect();
        Header { index, names }
    }

    fn col(&self, name: &str, path: &str) -> Result<usize> {
        self.index
            .get(&name.to_ascii_lowercase())
            .copied()
            .ok_or_else(|| Error::Schema {
                locator: path.to_string(),
                message: format!("missing column '{name}'"),
            })
    }

    fn opt(&self, name: Option<&String>, path: &str) -> Result<Option<usize>> {
        name.map(|n| self.col(n, path)).transpose()
    }

    fn ignored(&self, used: &BTreeSet<usize>) -> Vec<String> {
        self.names
            .iter()
            .enumerate()
            .filter(|(i, _)| !used.contains(i))
            .map(|(_, n)| n.clone())
            .collect()
    }
}

fn reader<R: Read>(src: R, delimiter: char) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .delimiter(delimiter as u8)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(src)
}

pub fn parse_input_csv(path: &Path, mapping: &InputMapping) -> Result<ParseReport<RawInputRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_input_reader(f, &path.display().to_string(), mapping)
}

pub fn parse_input_reader<R: Read>(
    src: R,
    name: &str,
    mapping: &InputMapping,
) -> Result<ParseReport<RawInputRecord>> {
    let mut rdr = reader(src, mapping.delimiter);
    let header = Header::new(rdr.headers().map_err(|e| Error::Schema {
        locator: name.to_string(),
        message: e.to_string(),
    })?);
    let commodity_col = header.col(&mapping.commodity_column, name)?;
    let date_col = header.opt(mapping.date_column.as_ref(), name)?;
    let year_col = header.opt(mapping.year_column.as_ref(), name)?;
    let month_col = header.opt(mapping.month_column.as_ref(), name)?;
    if date_col.is_none() && (year_col.is_none() || month_col.is_none()) {
        return Err(Error::Config(
            "input mapping needs date_column or year_column + month_column".into(),
        ));
    }
    let vintage_col = header.opt(mapping.vintage_column.as_ref(), name)?;

    let mut used: BTreeSet<usize> = [Some(commodity_col), date_col, year_col, month_col, vintage_col]
        .into_iter()
        .flatten()
        .collect();

    enum Fields {
        Long { field: usize, value: usize },
        Wide(Vec<(FieldKind, usize)>),
    }
    let fields = match mapping.layout {
        Layout::Long => {
            let field = header.col(
                mapping.field_column.as_deref().ok_or_else(|| {
                    Error::Config("long layout needs field_column".into())
                })?,
                name,
            )?;
            let value = header.col(
                mapping.value_column.as_deref().ok_or_else(|| {
                    Error::Config("long layout needs value_column".into())
                })?,
                name,
            )?;
            used.extend([field, value]);
            Fields::Long { field, value }
        }
        Layout::Wide => {
            let mut cols = Vec::new();
            for (kind, col) in &mapping.field_columns {
                let i = header.col(col, name)?;
                used.insert(i);
                cols.push((*kind, i));
            }
            Fields::Wide(cols)
        }
    };
    let labels: BTreeMap<String, FieldKind> = mapping
        .field_labels
        .iter()
        .map(|(k, v)| (k.to_ascii_lowercase(), *v))
        .collect();

    let mut report = ParseReport {
        ignored_columns: header.ignored(&used),
        ..ParseReport::default()
    };
    for (i, row) in rdr.records().enumerate() {
        // header is line 1
        let line = i as u64 + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                report.rejected.push(RejectedRow {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let cell = |i: usize| row.get(i).unwrap_or("");
        let stamp_and_vintage = || -> std::result::Result<(MonthStamp, Option<NaiveDate>), String> {
            let stamp = match date_col {
                Some(dc) => parse_date(cell(dc))
                    .map(MonthStamp::from_date)
                    .ok_or_else(|| format!("malformed date '{}'", cell(dc)))?,
                None => {
                    let y: i32 = cell(year_col.unwrap())
                        .parse()
                        .map_err(|_| format!("malformed year '{}'", cell(year_col.unwrap())))?;
                    let m: u32 = cell(month_col.unwrap())
                        .parse()
                        .map_err(|_| format!("malformed month '{}'", cell(month_col.unwrap())))?;
                    MonthStamp::new(y, m).map_err(|e| e.to_string())?
                }
            };
            let vintage = match vintage_col.map(cell) {
                None | Some("") => None,
                Some(v) => Some(parse_date(v).ok_or_else(|| format!("malformed vintage '{v}'"))?),
            };
            Ok((stamp, vintage))
        };
        let mut push = |kind: FieldKind, raw: &str| {
            let result = (|| {
                let commodity = parse_commodity(cell(commodity_col), &mapping.commodity_labels)
                    .map_err(|e| e.to_string())?;
                let (stamp, vintage) = stamp_and_vintage()?;
                let value = parse_value(raw)?;
                check_range(kind, value)?;
                Ok::<_, String>(RawInputRecord {
                    commodity,
                    stamp,
                    field_kind: kind,
                    value,
                    vintage,
                })
            })();
            match result {
                Ok(r) => report.records.push(r),
                Err(reason) => report.rejected.push(RejectedRow { line, reason }),
            }
        };
        match &fields {
            Fields::Long { field, value } => {
                let label = cell(*field).to_ascii_lowercase();
                match labels.get(&label) {
                    Some(kind) => push(*kind, cell(*value)),
                    None => report.rejected.push(RejectedRow {
                        line,
                        reason: format!("unmapped field label '{}'", cell(*field)),
                    }),
                }
            }
            Fields::Wide(cols) => {
                for (kind, c) in cols {
                    // blank wide cells mean "not reported", not a bad row
                    if !cell(*c).is_empty() {
                        push(*kind, cell(*c));
                    }
                }
            }
        }
    }
    Ok(report)
}

fn check_range(kind: FieldKind, value: f64) -> std::result::Result<(), String> {
    match kind {
        FieldKind::MarketingPct if !(0.0..=100.0).contains(&value) => {
            Err(format!("marketing percentage {value} outside [0, 100]"))
        }
        FieldKind::PriceReceived | FieldKind::FuturesPrice if value <= 0.0 => {
            Err(format!("non-positive price {value}"))
        }
        _ => Ok(()),
    }
}

/// Leading four-digit year of labels such as `2023`, `2023/24`, `2023-2024`.
fn parse_marketing_year(s: &str) -> Option<i32> {
    let t = s.trim();
    let digits: String = t.chars().take_while(|c| c.is_ascii_digit()).collect();
    (digits.len() == 4).then(|| digits.parse().ok()).flatten()
}

pub fn parse_output_csv(path: &Path, mapping: &OutputMapping) -> Result<ParseReport<(MyaKey, f64)>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_output_reader(f, &path.display().to_string(), mapping)
}

/// Parses published MYA forecasts/actuals. Conflicting duplicate keys abort
/// with an integrity error; an empty input yields an empty table.
pub fn parse_output_reader<R: Read>(
    mut src: R,
    name: &str,
    mapping: &OutputMapping,
) -> Result<ParseReport<(MyaKey, f64)>> {
    let mut text = String::new();
    src.read_to_string(&mut text).map_err(|e| Error::io(name, e))?;
    if text.trim().is_empty() {
        return Ok(ParseReport::default());
    }
    let mut rdr = reader(text.as_bytes(), mapping.delimiter);
    let header = Header::new(rdr.headers().map_err(|e| Error::Schema {
        locator: name.to_string(),
        message: e.to_string(),
    })?);
    let commodity_col = header.col(&mapping.commodity_column, name)?;
    let my_col = header.col(&mapping.marketing_year_column, name)?;
    let value_col = header.col(&mapping.value_column, name)?;
    let vintage_col = header.opt(mapping.vintage_column.as_ref(), name)?;
    let kind_col = header.opt(mapping.kind_column.as_ref(), name)?;
    let used: BTreeSet<usize> = [Some(commodity_col), Some(my_col), Some(value_col), vintage_col, kind_col]
        .into_iter()
        .flatten()
        .collect();
    let actual_labels: BTreeSet<String> = mapping
        .actual_labels
        .iter()
        .map(|s| s.to_ascii_lowercase())
        .collect();

    let mut report = ParseReport {
        ignored_columns: header.ignored(&used),
        ..ParseReport::default()
    };
    let mut table = PublishedTable::default();
    for (i, row) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                report.rejected.push(RejectedRow {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let cell = |i: usize| row.get(i).unwrap_or("");
        let parsed = (|| {
            let commodity = parse_commodity(cell(commodity_col), &mapping.commodity_labels)
                .map_err(|e| e.to_string())?;
            let marketing_year = parse_marketing_year(cell(my_col))
                .ok_or_else(|| format!("malformed marketing year '{}'", cell(my_col)))?;
            let value = parse_value(cell(value_col))?;
            let vintage = match vintage_col.map(cell) {
                None | Some("") => None,
                Some(v) => Some(parse_date(v).ok_or_else(|| format!("malformed vintage '{v}'"))?),
            };
            let kind = match kind_col {
                Some(k) if actual_labels.contains(&cell(k).to_ascii_lowercase()) => MyaKind::Actual,
                Some(_) => MyaKind::Forecast,
                None if vintage.is_none() => MyaKind::Actual,
                None => MyaKind::Forecast,
            };
            Ok::<_, String>((
                MyaKey {
                    commodity,
                    marketing_year,
                    kind,
                    vintage,
                },
                value,
            ))
        })();
        match parsed {
            Ok((key, value)) => {
                table.insert(key, value).map_err(|e| match e {
                    Error::Integrity(m) => Error::Integrity(format!("{name}:{line}: {m}")),
                    other => other,
                })?;
                report.records.push((key, value));
            }
            Err(reason) => report.rejected.push(RejectedRow { line, reason }),
        }
    }
    Ok(report)
}

pub fn published_from(records: &[(MyaKey, f64)]) -> Result<PublishedTable> {
    let mut t = PublishedTable::default();
    for (k, v) in records {
        t.insert(*k, *v)?;
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// Normalized format

const NORMALIZED_HEADER: [&str; 6] = ["commodity", "year", "month", "field_kind", "value", "vintage"];

/// Writes the normalized table: one record per row, fixed columns
/// `commodity,year,month,field_kind,value,vintage`. Published MYA values use
/// field kinds `mya_forecast` / `mya_actual` with the marketing year's start
/// month. Values use the shortest representation that round-trips.
pub fn write_normalized<W: Write>(ds: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Io {
        path: "<normalized>".into(),
        source: std::io::Error::other(e),
    };
    w.write_record(NORMALIZED_HEADER).map_err(err)?;
    let (records, published) = ds.to_records();
    for r in records {
        w.write_record([
            r.commodity.label().to_string(),
            r.stamp.year().to_string(),
            r.stamp.month().to_string(),
            r.field_kind.label().to_string(),
            r.value.to_string(),
            r.vintage.map(|d| d.to_string()).unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    for (k, v) in published {
        let kind = match k.kind {
            MyaKind::Forecast => "mya_forecast",
            MyaKind::Actual => "mya_actual",
        };
        w.write_record([
            k.commodity.label().to_string(),
            k.marketing_year.to_string(),
            k.commodity.calendar().my_start_month().to_string(),
            kind.to_string(),
            v.to_string(),
            k.vintage.map(|d| d.to_string()).unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("<normalized>", e))?;
    Ok(())
}

pub fn read_normalized<R: Read>(src: R) -> Result<Dataset> {
    let mut rdr = csv::Reader::from_reader(src);
    let mut records = Vec::new();
    let mut published = PublishedTable::default();
    for (i, row) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let bad = |m: String| Error::Parse {
            path: "<normalized>".into(),
            line,
            message: m,
        };
        let row = row.map_err(|e| bad(e.to_string()))?;
        if row.len() != 6 {
            return Err(bad(format!("expected 6 columns, found {}", row.len())));
        }
        let commodity: Commodity = row[0].parse().map_err(|e: Error| bad(e.to_string()))?;
        let year: i32 = row[1].parse().map_err(|_| bad(format!("bad year '{}'", &row[1])))?;
        let month: u32 = row[2].parse().map_err(|_| bad(format!("bad month '{}'", &row[2])))?;
        let value: f64 = row[4].parse().map_err(|_| bad(format!("bad value '{}'", &row[4])))?;
        let vintage = match &row[5] {
            "" => None,
            v => Some(
                NaiveDate::parse_from_str(v, "%Y-%m-%d").map_err(|_| bad(format!("bad vintage '{v}'")))?,
            ),
        };
        match &row[3] {
            "mya_forecast" | "mya_actual" => {
                let kind = if &row[3] == "mya_actual" {
                    MyaKind::Actual
                } else {
                    MyaKind::Forecast
                };
                published.insert(
                    MyaKey {
                        commodity,
                        marketing_year: year,
                        kind,
                        vintage,
                    },
                    value,
                )?;
            }
            kind => {
                let field_kind: FieldKind = kind.parse().map_err(|e: Error| bad(e.to_string()))?;
                records.push(RawInputRecord {
                    commodity,
                    stamp: MonthStamp::new(year, month).map_err(|e| bad(e.to_string()))?,
                    field_kind,
                    value,
                    vintage,
                });
            }
        }
    }
    Dataset::from_records(&records, published)
}

pub fn save_normalized(ds: &Dataset, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_normalized(ds, std::io::BufWriter::new(f))
}

pub fn load_normalized(path: &Path) -> Result<Dataset> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_normalized(std::io::BufReader::new(f))
}
