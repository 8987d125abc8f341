use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calendar::{Commodity, MonthSeries};
use crate::error::{Error, Result};
use crate::eval::grid::{grid_search, ModelFamily};
use crate::eval::metrics::{aggregate_mya, score_monthly, MetricBlock};
use crate::eval::splits::EvalSplit;
use crate::external::ExternalStore;
use crate::ingest::{forecast_weights, Dataset};

/// Seed for one (model, commodity, split) cell, derived from the global seed
/// so that results do not depend on scheduling.
pub fn cell_seed(global: u64, model: &str, commodity: Commodity, split: u32) -> u64 {
    let digest = Sha256::digest(format!("{global}/{model}/{commodity}/{split}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Everything persisted for one evaluated cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub model: String,
    pub commodity: Commodity,
    /// Split id, or series id for synthetic runs.
    pub split: u32,
    /// Marketing year (or calendar year for synthetic runs) of the test window.
    pub test_year: i32,
    pub selected: String,
    pub validation_rmse: Option<f64>,
    pub forecast: Vec<f64>,
    pub actual: Vec<f64>,
    pub metrics: MetricBlock,
    pub mya_forecast: Option<f64>,
    pub mya_actual: Option<f64>,
}

impl CellResult {
    pub fn key(&self) -> (String, Commodity, u32) {
        (self.model.clone(), self.commodity, self.split)
    }

    /// Absolute percentage error per month.
    pub fn ape(&self) -> Vec<f64> {
        self.actual
            .iter()
            .zip(&self.forecast)
            .map(|(y, f)| 100.0 * (y - f).abs() / y.abs())
            .collect()
    }
}

fn mya_pair(ds: &Dataset, split: &EvalSplit, forecast: &[f64]) -> (Option<f64>, Option<f64>) {
    let my = split.test_year();
    let model = forecast_weights(ds, &split.commodity.calendar(), &my)
        .ok()
        .map(|w| aggregate_mya(forecast, &w));
    (model, ds.actual_mya(&my).ok())
}

/// Runs the grid protocol for one family on one split.
pub fn run_cell(ds: &Dataset, family: ModelFamily, split: &EvalSplit, global_seed: u64) -> Result<CellResult> {
    let series = ds.price_series(split.commodity)?;
    let train = split.train.slice(&series)?;
    let validation = split.validation.slice(&series)?;
    let seed = cell_seed(global_seed, family.name(), split.commodity, split.id);
    let sel = grid_search(&family.grid(), &train, &validation, 12, seed)?;
    let actual = split.test.slice(&series)?.values().to_vec();
    let metrics = score_monthly(&actual, &sel.forecast)?;
    let (mya_forecast, mya_actual) = mya_pair(ds, split, &sel.forecast);
    Ok(CellResult {
        model: family.name().to_string(),
        commodity: split.commodity,
        split: split.id,
        test_year: split.test.first,
        selected: sel.label,
        validation_rmse: sel.validation_rmse,
        forecast: sel.forecast,
        actual,
        metrics,
        mya_forecast,
        mya_actual,
    })
}

/// Scores an externally produced forecast for one split. The store may key
/// the forecast by split id or by test marketing year.
pub fn external_cell(ds: &Dataset, store: &ExternalStore, model: &str, split: &EvalSplit) -> Result<CellResult> {
    let forecast = store
        .get(model, split.commodity, split.id as i32)
        .or_else(|| store.get(model, split.commodity, split.test.first))
        .ok_or_else(|| {
            Error::Coverage(format!(
                "no external forecast for {model}, {}, split {}",
                split.commodity, split.id
            ))
        })?
        .to_vec();
    let series = ds.price_series(split.commodity)?;
    let actual = split.test.slice(&series)?.values().to_vec();
    let metrics = score_monthly(&actual, &forecast)?;
    let (mya_forecast, mya_actual) = mya_pair(ds, split, &forecast);
    Ok(CellResult {
        model: model.to_string(),
        commodity: split.commodity,
        split: split.id,
        test_year: split.test.first,
        selected: "external".into(),
        validation_rmse: None,
        forecast,
        actual,
        metrics,
        mya_forecast,
        mya_actual,
    })
}

/// Single split on one series: the last `test_len` months are held out and
/// the `val_len` months before them drive grid selection.
pub fn run_single_split(
    family: ModelFamily,
    series: &MonthSeries,
    commodity: Commodity,
    series_id: u32,
    test_len: usize,
    val_len: usize,
    global_seed: u64,
) -> Result<CellResult> {
    let n = series.len();
    if n <= test_len + val_len {
        return Err(Error::Input(format!(
            "series of {n} months too short for {val_len} validation and {test_len} test months"
        )));
    }
    let test_start = series.stamp_at(n - test_len);
    let val_start = series.stamp_at(n - test_len - val_len);
    let train = series.up_to(val_start.pred())?;
    let validation = series.slice_window((val_start, test_start.pred()))?;
    let actual = series.values()[n - test_len..].to_vec();
    let seed = cell_seed(global_seed, family.name(), commodity, series_id);
    let sel = grid_search(&family.grid(), &train, &validation, test_len, seed)?;
    let metrics = score_monthly(&actual, &sel.forecast)?;
    Ok(CellResult {
        model: family.name().to_string(),
        commodity,
        split: series_id,
        test_year: test_start.year(),
        selected: sel.label,
        validation_rmse: sel.validation_rmse,
        forecast: sel.forecast,
        actual,
        metrics,
        mya_forecast: None,
        mya_actual: None,
    })
}

const FIXED_COLUMNS: [&str; 13] = [
    "model",
    "commodity",
    "split",
    "test_year",
    "selected",
    "validation_rmse",
    "mae",
    "rmse",
    "mape",
    "smape",
    "mya_forecast",
    "mya_actual",
    "horizon",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes one row per cell: fixed columns, then `f1..fH` and `a1..aH`.
pub fn write_results<W: Write>(results: &[CellResult], out: W) -> Result<()> {
    let h = results.iter().map(|r| r.forecast.len()).max().unwrap_or(12);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((1..=h).map(|i| format!("f{i}")));
    header.extend((1..=h).map(|i| format!("a{i}")));
    let csv_err = |e: csv::Error| Error::Input(format!("writing results: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for r in results {
        let mut row = vec![
            r.model.clone(),
            r.commodity.label().to_string(),
            r.split.to_string(),
            r.test_year.to_string(),
            r.selected.clone(),
            opt(r.validation_rmse),
            r.metrics.mae.to_string(),
            r.metrics.rmse.to_string(),
            r.metrics.mape.to_string(),
            r.metrics.smape.to_string(),
            opt(r.mya_forecast),
            opt(r.mya_actual),
            r.forecast.len().to_string(),
        ];
        for v in [&r.forecast, &r.actual] {
            row.extend((0..h).map(|i| v.get(i).map(|x| x.to_string()).unwrap_or_default()));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Input(format!("writing results: {e}")))?;
    Ok(())
}

pub fn read_results<R: Read>(src: R, name: &str) -> Result<Vec<CellResult>> {
    let mut rdr = csv::Reader::from_reader(src);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let parse_err = |message: String| Error::Parse {
            path: name.into(),
            line,
            message,
        };
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        let field = |k: usize| rec.get(k).unwrap_or("").trim();
        let num = |k: usize| -> Result<f64> {
            field(k)
                .parse::<f64>()
                .map_err(|_| parse_err(format!("bad number in column {}", k + 1)))
        };
        let opt_num = |k: usize| -> Result<Option<f64>> {
            if field(k).is_empty() {
                Ok(None)
            } else {
                num(k).map(Some)
            }
        };
        let h: usize = field(12).parse().map_err(|_| parse_err("bad horizon".into()))?;
        let width = (rec.len() - FIXED_COLUMNS.len()) / 2;
        if h > width {
            return Err(parse_err(format!("horizon {h} exceeds {width} value columns")));
        }
        let base = FIXED_COLUMNS.len();
        let forecast = (0..h).map(|j| num(base + j)).collect::<Result<Vec<_>>>()?;
        let actual = (0..h).map(|j| num(base + width + j)).collect::<Result<Vec<_>>>()?;
        out.push(CellResult {
            model: field(0).to_string(),
            commodity: field(1).parse().map_err(|e: Error| parse_err(e.to_string()))?,
            split: field(2).parse().map_err(|_| parse_err("bad split".into()))?,
            test_year: field(3).parse().map_err(|_| parse_err("bad test year".into()))?,
            selected: field(4).to_string(),
            validation_rmse: opt_num(5)?,
            metrics: MetricBlock {
                mae: num(6)?,
                rmse: num(7)?,
                mape: num(8)?,
                smape: num(9)?,
            },
            mya_forecast: opt_num(10)?,
            mya_actual: opt_num(11)?,
            forecast,
            actual,
        });
    }
    Ok(out)
}

pub fn save_results(results: &[CellResult], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_results(results, std::io::BufWriter::new(f))
}

pub fn load_results(path: &Path) -> Result<Vec<CellResult>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_results(std::io::BufReader::new(f), &path.display().to_string())
}
