//! Externally produced forecasts and the futures-plus-basis MYA baseline.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::Path;

use chrono::NaiveDate;

use crate::calendar::{Commodity, MarketingYear, MonthStamp, PriceUnit};
use crate::error::{Error, Result};
use crate::ingest::{
    averaging_window, forecast_weights, historical_average, Dataset, FuturesBook,
    MarketingWeights, MyaKind,
};

// ---------------------------------------------------------------------------
// External forecast files

/// Forecasts keyed by `(model, commodity, period)`, where `period` is a split
/// id (1..=16) or a marketing year.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExternalStore {
    entries: BTreeMap<(String, Commodity, i32), [f64; 12]>,
}

impl ExternalStore {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, model: &str, commodity: Commodity, period: i32) -> Option<&[f64; 12]> {
        self.entries.get(&(model.to_string(), commodity, period))
    }

    pub fn models(&self) -> Vec<String> {
        let mut m: Vec<String> = self.entries.keys().map(|k| k.0.clone()).collect();
        m.dedup();
        m
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Commodity, i32, &[f64; 12])> {
        self.entries
            .iter()
            .map(|((m, c, p), v)| (m.as_str(), *c, *p, v))
    }

    pub fn insert(&mut self, model: &str, commodity: Commodity, period: i32, values: [f64; 12]) -> Result<()> {
        let key = (model.to_string(), commodity, period);
        if self.entries.contains_key(&key) {
            return Err(Error::Integrity(format!(
                "duplicate external forecast for ({model}, {commodity}, {period})"
            )));
        }
        self.entries.insert(key, values);
        Ok(())
    }

    /// Adds every entry of `other`; overlapping keys are an integrity error.
    pub fn merge(&mut self, other: ExternalStore) -> Result<()> {
        for ((m, c, p), v) in other.entries {
            self.insert(&m, c, p, v)?;
        }
        Ok(())
    }

    /// One line per entry, `model,commodity,period,v1,…,v12`, sorted by key.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for ((m, c, p), v) in &self.entries {
            let _ = write!(out, "{m},{},{p}", c.label());
            for x in v {
                let _ = write!(out, ",{x}");
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_text().as_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

/// Parses the line-oriented external forecast format. Blank lines, `#`
/// comments and a leading `model,…` header are skipped; fields may be
/// separated by commas or tabs.
pub fn parse_external(text: &str, source: &str) -> Result<ExternalStore> {
    let mut store = ExternalStore::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let sep = if line.contains('\t') { '\t' } else { ',' };
        let fields: Vec<&str> = line.split(sep).map(str::trim).collect();
        if i == 0 && fields[0].eq_ignore_ascii_case("model") {
            continue;
        }
        let locator = format!(
            "{source}:{} ({})",
            i + 1,
            fields.iter().take(3).copied().collect::<Vec<_>>().join(",")
        );
        let schema = |message: String| Error::Schema {
            locator: locator.clone(),
            message,
        };
        if fields.len() < 3 {
            return Err(schema("expected model, commodity, period and 12 values".into()));
        }
        if fields.len() != 15 {
            return Err(schema(format!("expected 12 values, found {}", fields.len() - 3)));
        }
        let commodity: Commodity = fields[1].parse().map_err(|e: Error| schema(e.to_string()))?;
        let period: i32 = fields[2]
            .trim_start_matches(|c: char| c.is_ascii_alphabetic() || c == '_')
            .parse()
            .map_err(|_| schema(format!("bad split or marketing year '{}'", fields[2])))?;
        let mut values = [0.0; 12];
        for (slot, f) in values.iter_mut().zip(&fields[3..]) {
            let v: f64 = f.parse().map_err(|_| schema(format!("bad value '{f}'")))?;
            if !(v.is_finite() && v > 0.0) {
                return Err(schema(format!("forecast {v} is not finite and positive")));
            }
            *slot = v;
        }
        store.insert(fields[0], commodity, period, values).map_err(|e| match e {
            Error::Integrity(m) => Error::Integrity(format!("{locator}: {m}")),
            other => other,
        })?;
    }
    Ok(store)
}

pub fn load_external_forecasts(path: &Path) -> Result<ExternalStore> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_external(&text, &path.display().to_string())
}

// ---------------------------------------------------------------------------
// Futures-plus-basis

/// Listed contract months per commodity; month `k` uses the first contract
/// month strictly after it.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractMapping {
    months: BTreeMap<Commodity, Vec<u32>>,
}

impl Default for ContractMapping {
    fn default() -> Self {
        let months = [
            (Commodity::Corn, vec![3, 5, 7, 9, 12]),
            (Commodity::Soybeans, vec![1, 3, 5, 7, 8, 9, 11]),
            (Commodity::Wheat, vec![3, 5, 7, 9, 12]),
            (Commodity::Cotton, vec![3, 5, 7, 10, 12]),
        ]
        .into_iter()
        .collect();
        ContractMapping { months }
    }
}

impl ContractMapping {
    pub fn with_months(mut self, commodity: Commodity, months: Vec<u32>) -> Result<Self> {
        if months.is_empty() || months.iter().any(|m| !(1..=12).contains(m)) {
            return Err(Error::Config(format!("invalid contract months for {commodity}")));
        }
        let mut months = months;
        months.sort_unstable();
        months.dedup();
        self.months.insert(commodity, months);
        Ok(self)
    }

    /// Nearby contract for prices received in `stamp`.
    pub fn contract_for(&self, commodity: Commodity, stamp: MonthStamp) -> MonthStamp {
        let months = &self.months[&commodity];
        match months.iter().find(|m| **m > stamp.month()) {
            Some(m) => MonthStamp::ym(stamp.year(), *m as u8),
            None => MonthStamp::ym(stamp.year() + 1, months[0] as u8),
        }
    }
}

/// Historical average basis for each month of a target marketing year
/// (marketing order), from the prior five (grains) or seven (cotton, Olympic)
/// years only.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisTable {
    pub my: MarketingYear,
    pub values: [f64; 12],
}

impl BasisTable {
    pub fn build(ds: &Dataset, my: MarketingYear) -> Result<Self> {
        let c = my.commodity;
        let cal = c.calendar();
        let window = averaging_window(c) as i32;
        let mut values = [0.0; 12];
        for (k, slot) in values.iter_mut().enumerate() {
            let mut hist = Vec::with_capacity(window as usize);
            for y in (my.start_year - window)..my.start_year {
                let stamp = cal.marketing_year(y).first_month().add_months(k as i64);
                let b = ds.basis(c, stamp).ok_or_else(|| {
                    Error::Coverage(format!("no basis for {c} {stamp} (needed for {my})"))
                })?;
                hist.push(b);
            }
            *slot = historical_average(c, &hist);
        }
        Ok(BasisTable { my, values })
    }
}

/// Settlement on `vintage` or the nearest earlier date in the book.
fn settlement(book: &FuturesBook, contract: MonthStamp, vintage: NaiveDate) -> Option<f64> {
    book.get(&contract)?
        .range(..=vintage)
        .next_back()
        .map(|(_, v)| *v)
}

/// `P̂_k = F_{h(k)} + B̄_k` for each month of the basis table's marketing year.
pub fn futures_plus_basis_forecast(
    futures: &FuturesBook,
    mapping: &ContractMapping,
    basis: &BasisTable,
    vintage: NaiveDate,
) -> Result<[f64; 12]> {
    let my = basis.my;
    let mut out = [0.0; 12];
    for (k, m) in my.months().enumerate() {
        let contract = mapping.contract_for(my.commodity, m);
        let f = settlement(futures, contract, vintage).ok_or_else(|| {
            Error::Coverage(format!(
                "no {} settlement for contract {contract} on or before {vintage} (month {m})",
                my.commodity
            ))
        })?;
        out[k] = f + basis.values[k];
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeForecast {
    pub mya: f64,
    pub monthly: [f64; 12],
    /// Months filled from published actual prices.
    pub actual: [bool; 12],
    pub weights: MarketingWeights,
}

/// A monthly price counts as published once its month has ended.
pub fn actual_published(stamp: MonthStamp, vintage: NaiveDate) -> bool {
    stamp.succ().first_day() <= vintage
}

/// Composite MYA: actual prices where already published at `vintage`,
/// futures plus basis elsewhere, weighted by forecast marketing percentages.
pub fn composite_mya_forecast(
    ds: &Dataset,
    mapping: &ContractMapping,
    my: MarketingYear,
    vintage: NaiveDate,
) -> Result<CompositeForecast> {
    let c = my.commodity;
    let weights = forecast_weights(ds, &c.calendar(), &my)?;
    let mut monthly = [0.0; 12];
    let mut actual = [false; 12];
    let mut pending = Vec::new();
    for (k, m) in my.months().enumerate() {
        match ds.price(c, m) {
            Some(p) if actual_published(m, vintage) => {
                monthly[k] = p;
                actual[k] = true;
            }
            _ => pending.push(k),
        }
    }
    if !pending.is_empty() {
        let basis = BasisTable::build(ds, my)?;
        let empty = FuturesBook::new();
        let book = ds.futures(c).unwrap_or(&empty);
        let fb = futures_plus_basis_forecast(book, mapping, &basis, vintage)?;
        for k in pending {
            monthly[k] = fb[k];
        }
    }
    let mya = monthly.iter().zip(weights.w.iter()).map(|(p, w)| p * w).sum();
    Ok(CompositeForecast {
        mya,
        monthly,
        actual,
        weights,
    })
}

/// Replication tolerance: one cent for grains ($/bu), 0.1 cents/lb for cotton.
pub fn replication_tolerance(c: Commodity) -> f64 {
    match c.calendar().unit() {
        PriceUnit::DollarsPerBushel => 0.01,
        PriceUnit::CentsPerPound => 0.1,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationCell {
    pub commodity: Commodity,
    pub marketing_year: i32,
    pub vintage: NaiveDate,
    pub published: f64,
    pub computed: Result<f64, String>,
}

impl ReplicationCell {
    pub fn matches(&self) -> bool {
        matches!(&self.computed, Ok(v) if (v - self.published).abs() <= replication_tolerance(self.commodity) + 1e-9)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReplicationReport {
    pub cells: Vec<ReplicationCell>,
}

impl ReplicationReport {
    pub fn match_rate(&self) -> f64 {
        if self.cells.is_empty() {
            return 0.0;
        }
        self.cells.iter().filter(|c| c.matches()).count() as f64 / self.cells.len() as f64
    }

    pub fn mismatches(&self) -> impl Iterator<Item = &ReplicationCell> {
        self.cells.iter().filter(|c| !c.matches())
    }
}

/// Recomputes every published forecast vintage for marketing years in
/// `years` and compares it with the published value.
pub fn replicate_published(
    ds: &Dataset,
    mapping: &ContractMapping,
    years: RangeInclusive<i32>,
) -> ReplicationReport {
    let mut cells = Vec::new();
    for (key, published) in ds.published().iter() {
        if key.kind != MyaKind::Forecast || !years.contains(&key.marketing_year) {
            continue;
        }
        let Some(vintage) = key.vintage else { continue };
        let my = MarketingYear::new(key.commodity, key.marketing_year);
        let computed = composite_mya_forecast(ds, mapping, my, vintage)
            .map(|f| f.mya)
            .map_err(|e| e.to_string());
        cells.push(ReplicationCell {
            commodity: key.commodity,
            marketing_year: key.marketing_year,
            vintage,
            published,
            computed,
        });
    }
    ReplicationReport { cells }
}
