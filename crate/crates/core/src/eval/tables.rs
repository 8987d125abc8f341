use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::calendar::{Commodity, MarketingYear};
use crate::error::{Error, Result};
use crate::eval::dm::{dm_test, DmResult, MONTHLY_BANDWIDTH};
use crate::eval::grid::ModelFamily;
use crate::eval::metrics::{two_step_average, MetricBlock};
use crate::eval::run::CellResult;
use crate::ingest::Dataset;

/// A rendered table: aligned text for people, CSV for machines.
#[derive(Debug, Clone, PartialEq)]
pub struct TextTable {
    pub name: String,
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl TextTable {
    pub fn new(name: &str, title: &str, header: &[&str]) -> Self {
        TextTable {
            name: name.into(),
            title: title.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_text(&self) -> String {
        let ncol = self.header.len();
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (i, c) in r.iter().enumerate().take(ncol) {
                widths[i] = widths[i].max(c.chars().count());
            }
        }
        let mut out = format!("{}\n", self.title);
        let line = |cells: &[String], out: &mut String| {
            let parts: Vec<String> = cells
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if i == 0 {
                        format!("{c:<w$}", w = widths[i])
                    } else {
                        format!("{c:>w$}", w = widths[i])
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&self.header, &mut out);
        let total: usize = widths.iter().sum::<usize>() + 2 * ncol.saturating_sub(1);
        let _ = writeln!(out, "{}", "-".repeat(total));
        for r in &self.rows {
            line(r, &mut out);
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Input(format!("rendering {}: {e}", self.name));
        w.write_record(&self.header).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Input(format!("rendering {}: {e}", self.name)))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn f3(x: f64) -> String {
    format!("{x:.3}")
}

fn f2(x: f64) -> String {
    format!("{x:.2}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankRow {
    pub rank: usize,
    pub model: String,
    pub metrics: MetricBlock,
}

/// Sorts by MAE, then RMSE, then name.
pub fn rank_table(entries: Vec<(String, MetricBlock)>) -> Vec<RankRow> {
    let mut entries = entries;
    entries.sort_by(|a, b| {
        a.1.mae
            .total_cmp(&b.1.mae)
            .then(a.1.rmse.total_cmp(&b.1.rmse))
            .then_with(|| a.0.cmp(&b.0))
    });
    entries
        .into_iter()
        .enumerate()
        .map(|(i, (model, metrics))| RankRow {
            rank: i + 1,
            model,
            metrics,
        })
        .collect()
}

/// Equal-weight mean of the cell metric blocks per model.
pub fn overall_metrics(results: &[CellResult]) -> Vec<(String, MetricBlock)> {
    let mut by_model: BTreeMap<&str, Vec<&MetricBlock>> = BTreeMap::new();
    for r in results {
        by_model.entry(&r.model).or_default().push(&r.metrics);
    }
    by_model
        .into_iter()
        .filter_map(|(m, v)| MetricBlock::mean(v).map(|b| (m.to_string(), b)))
        .collect()
}

/// Mean monthly MAE per model and commodity.
pub fn commodity_mae(results: &[CellResult]) -> BTreeMap<String, BTreeMap<Commodity, f64>> {
    let mut acc: BTreeMap<String, BTreeMap<Commodity, (f64, usize)>> = BTreeMap::new();
    for r in results {
        let e = acc
            .entry(r.model.clone())
            .or_default()
            .entry(r.commodity)
            .or_insert((0.0, 0));
        e.0 += r.metrics.mae;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(m, per)| (m, per.into_iter().map(|(c, (s, n))| (c, s / n as f64)).collect()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub commodity: Commodity,
    pub model_mae: f64,
    pub usda_mae: f64,
    pub ratio: f64,
    /// Ratio below one.
    pub outperforms: bool,
}

/// Model MYA MAE over USDA MYA MAE for every commodity present in both maps.
pub fn ratio_table(model: &BTreeMap<Commodity, f64>, usda: &BTreeMap<Commodity, f64>) -> Result<Vec<RatioRow>> {
    let mut rows = Vec::new();
    for (c, m) in model {
        let Some(u) = usda.get(c) else { continue };
        if *u == 0.0 {
            return Err(Error::Metric(format!("USDA MAE for {c} is zero; ratio undefined")));
        }
        let ratio = m / u;
        rows.push(RatioRow {
            commodity: *c,
            model_mae: *m,
            usda_mae: *u,
            ratio,
            outperforms: ratio < 1.0,
        });
    }
    Ok(rows)
}

/// Marketing years used for the USDA comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsdaWindow {
    pub first: i32,
    pub last: i32,
    #[serde(default)]
    pub exclude: Vec<i32>,
    /// Later first year for individual commodities.
    #[serde(default)]
    pub commodity_first: BTreeMap<Commodity, i32>,
}

impl Default for UsdaWindow {
    fn default() -> Self {
        UsdaWindow {
            first: 2017,
            last: 2024,
            exclude: vec![2020],
            commodity_first: [(Commodity::Cotton, 2019)].into_iter().collect(),
        }
    }
}

impl UsdaWindow {
    pub fn includes(&self, c: Commodity, year: i32) -> bool {
        let first = self.commodity_first.get(&c).copied().unwrap_or(self.first).max(self.first);
        (first..=self.last).contains(&year) && !self.exclude.contains(&year)
    }
}

/// Matched-year absolute MYA errors of one model and of the USDA benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct MyaErrors {
    pub model: String,
    pub commodity: Commodity,
    pub years: Vec<i32>,
    pub model_errors: Vec<f64>,
    pub usda_errors: Vec<f64>,
}

impl MyaErrors {
    pub fn model_mae(&self) -> f64 {
        self.model_errors.iter().sum::<f64>() / self.model_errors.len() as f64
    }

    pub fn usda_mae(&self) -> f64 {
        self.usda_errors.iter().sum::<f64>() / self.usda_errors.len() as f64
    }
}

/// Pairs every model MYA forecast inside `window` with the USDA benchmark
/// vintage for the same marketing year. Years lacking either side are dropped.
pub fn mya_comparison(results: &[CellResult], ds: &Dataset, window: &UsdaWindow) -> Vec<MyaErrors> {
    let mut acc: BTreeMap<(String, Commodity), MyaErrors> = BTreeMap::new();
    let mut sorted: Vec<&CellResult> = results.iter().collect();
    sorted.sort_by_key(|r| (r.model.clone(), r.commodity, r.test_year));
    for r in sorted {
        if !window.includes(r.commodity, r.test_year) {
            continue;
        }
        let (Some(f), Some(a)) = (r.mya_forecast, r.mya_actual) else { continue };
        let my = MarketingYear::new(r.commodity, r.test_year);
        let Some((_, usda)) = ds.published().benchmark_forecast(&my) else { continue };
        let e = acc
            .entry((r.model.clone(), r.commodity))
            .or_insert_with(|| MyaErrors {
                model: r.model.clone(),
                commodity: r.commodity,
                years: Vec::new(),
                model_errors: Vec::new(),
                usda_errors: Vec::new(),
            });
        e.years.push(r.test_year);
        e.model_errors.push((f - a).abs());
        e.usda_errors.push((usda - a).abs());
    }
    acc.into_values().collect()
}

/// APE keyed by (split, commodity, month) for one model, skipping test years
/// listed in `exclude`.
pub fn pooled_losses(results: &[CellResult], model: &str, exclude: &[i32]) -> BTreeMap<(u32, Commodity, usize), f64> {
    let mut out = BTreeMap::new();
    for r in results.iter().filter(|r| r.model == model && !exclude.contains(&r.test_year)) {
        for (k, ape) in r.ape().into_iter().enumerate() {
            out.insert((r.split, r.commodity, k), ape);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseDm {
    pub a: String,
    pub b: String,
    pub result: std::result::Result<DmResult, String>,
}

/// DM tests on pooled monthly APE for every unordered model pair, aligned on
/// the (split, commodity, month) keys both models cover.
pub fn pairwise_dm(results: &[CellResult], models: &[String], exclude: &[i32]) -> Vec<PairwiseDm> {
    let losses: Vec<_> = models.iter().map(|m| pooled_losses(results, m, exclude)).collect();
    let mut out = Vec::new();
    for i in 0..models.len() {
        for j in i + 1..models.len() {
            let (la, lb): (Vec<f64>, Vec<f64>) = losses[i]
                .iter()
                .filter_map(|(k, a)| losses[j].get(k).map(|b| (*a, *b)))
                .unzip();
            out.push(PairwiseDm {
                a: models[i].clone(),
                b: models[j].clone(),
                result: dm_test(&la, &lb, MONTHLY_BANDWIDTH).map_err(|e| e.to_string()),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct WinRateRow {
    pub category: String,
    pub wins: usize,
    pub significant: usize,
    pub total: usize,
}

/// Counts comparisons where a focus model has lower pooled loss than a
/// baseline in each category, and how many of those are significant.
pub fn win_rate_table(
    pairs: &[PairwiseDm],
    focus: &[String],
    categories: &[(String, Vec<String>)],
    alpha: f64,
) -> Vec<WinRateRow> {
    let lookup = |f: &str, b: &str| -> Option<DmResult> {
        pairs.iter().find_map(|p| match &p.result {
            Ok(r) if p.a == b && p.b == f => Some(*r),
            Ok(r) if p.a == f && p.b == b => Some(DmResult {
                statistic: -r.statistic,
                mean_diff: -r.mean_diff,
                ..*r
            }),
            _ => None,
        })
    };
    let mut rows = Vec::new();
    let mut total = WinRateRow {
        category: "Total".into(),
        wins: 0,
        significant: 0,
        total: 0,
    };
    for (name, members) in categories {
        let mut row = WinRateRow {
            category: name.clone(),
            wins: 0,
            significant: 0,
            total: 0,
        };
        for f in focus {
            for b in members {
                let Some(r) = lookup(f, b) else { continue };
                row.total += 1;
                if r.statistic > 0.0 {
                    row.wins += 1;
                    if r.p_value < alpha {
                        row.significant += 1;
                    }
                }
            }
        }
        total.wins += row.wins;
        total.significant += row.significant;
        total.total += row.total;
        rows.push(row);
    }
    rows.push(total);
    rows
}

/// Options for [`build_report`].
#[derive(Debug, Clone, Default)]
pub struct ReportOptions {
    pub window: UsdaWindow,
    /// Test years left out of the pooled DM tests.
    pub dm_exclude: Vec<i32>,
}

fn display_name(model: &str) -> String {
    match model.parse::<ModelFamily>() {
        Ok(ModelFamily::Naive) => "Naive".into(),
        Ok(ModelFamily::SeasonalNaive) => "Seasonal Naive".into(),
        Ok(ModelFamily::Sarima) => "SARIMA".into(),
        Ok(ModelFamily::Ets) => "Exp Smoothing".into(),
        Ok(ModelFamily::Stl) => "STL".into(),
        Ok(ModelFamily::Ptf) => "Piecewise trend".into(),
        Ok(ModelFamily::RandomForest) => "Random Forest".into(),
        Ok(ModelFamily::Gbm) => "Gradient Boosting".into(),
        Err(_) => model.to_string(),
    }
}

/// Every summary table the results support. USDA tables need `ds`.
pub fn build_report(results: &[CellResult], ds: Option<&Dataset>, opts: &ReportOptions) -> Result<Vec<TextTable>> {
    if results.is_empty() {
        return Err(Error::Coverage("no results to report".into()));
    }
    let mut tables = Vec::new();

    let models: BTreeSet<String> = results.iter().map(|r| r.model.clone()).collect();
    let mut counts = TextTable::new("counts", "Evaluated cells", &["Model", "Cells", "Monthly forecasts"]);
    let mut n_cells = 0;
    for m in &models {
        let cells: Vec<&CellResult> = results.iter().filter(|r| &r.model == m).collect();
        let months: usize = cells.iter().map(|r| r.forecast.len()).sum();
        n_cells += cells.len();
        counts.push(vec![display_name(m), cells.len().to_string(), months.to_string()]);
    }
    let total_months: usize = results.iter().map(|r| r.forecast.len()).sum();
    counts.push(vec!["Total".into(), n_cells.to_string(), total_months.to_string()]);
    tables.push(counts);

    let mut rank = TextTable::new(
        "ranking",
        "Monthly forecasting performance, ranked by MAE",
        &["Rank", "Model", "MAE", "RMSE", "MAPE (%)", "SMAPE (%)"],
    );
    for r in rank_table(overall_metrics(results)) {
        rank.push(vec![
            r.rank.to_string(),
            display_name(&r.model),
            f3(r.metrics.mae),
            f3(r.metrics.rmse),
            f2(r.metrics.mape),
            f2(r.metrics.smape),
        ]);
    }
    tables.push(rank);

    let per = commodity_mae(results);
    let mut header = vec!["Model"];
    header.extend(Commodity::ALL.iter().map(|c| c.label()));
    let mut by_comm = TextTable::new("by_commodity", "Monthly MAE by commodity", &header);
    for (m, row) in &per {
        let mut cells = vec![display_name(m)];
        cells.extend(Commodity::ALL.iter().map(|c| row.get(c).map(|v| f3(*v)).unwrap_or_else(|| "-".into())));
        by_comm.push(cells);
    }
    tables.push(by_comm);

    if let Some(ds) = ds {
        let cmp = mya_comparison(results, ds, &opts.window);
        if !cmp.is_empty() {
            let mut ratios = TextTable::new(
                "usda_ratio",
                "MYA MAE relative to the USDA benchmark (ratio < 1 marked *)",
                &["Model", "Commodity", "Years", "Model MAE", "USDA MAE", "Ratio"],
            );
            let mut overall = TextTable::new(
                "mya_overall",
                "Overall MYA MAE (commodity means averaged)",
                &["Model", "MYA MAE", "USDA MAE"],
            );
            let mut by_model: BTreeMap<&str, Vec<&MyaErrors>> = BTreeMap::new();
            for e in &cmp {
                by_model.entry(&e.model).or_default().push(e);
            }
            for (m, errs) in by_model {
                let model_mae: BTreeMap<Commodity, f64> = errs.iter().map(|e| (e.commodity, e.model_mae())).collect();
                let usda_mae: BTreeMap<Commodity, f64> = errs.iter().map(|e| (e.commodity, e.usda_mae())).collect();
                for (row, e) in ratio_table(&model_mae, &usda_mae)?.iter().zip(&errs) {
                    ratios.push(vec![
                        display_name(m),
                        row.commodity.label().into(),
                        e.years.len().to_string(),
                        f3(row.model_mae),
                        f3(row.usda_mae),
                        format!("{}{}", f2(row.ratio), if row.outperforms { "*" } else { "" }),
                    ]);
                }
                let mg: BTreeMap<Commodity, Vec<f64>> =
                    errs.iter().map(|e| (e.commodity, e.model_errors.clone())).collect();
                let ug: BTreeMap<Commodity, Vec<f64>> =
                    errs.iter().map(|e| (e.commodity, e.usda_errors.clone())).collect();
                overall.push(vec![display_name(m), f3(two_step_average(&mg)?), f3(two_step_average(&ug)?)]);
            }
            tables.push(ratios);
            tables.push(overall);
        }
    }

    let model_list: Vec<String> = models.iter().cloned().collect();
    let pairs = pairwise_dm(results, &model_list, &opts.dm_exclude);
    if !pairs.is_empty() {
        let mut dm = TextTable::new(
            "dm_pairwise",
            "Pairwise Diebold-Mariano tests on pooled APE (positive: second model better)",
            &["Model A", "Model B", "n", "Mean diff", "DM stat", "p-value"],
        );
        for p in &pairs {
            let mut row = vec![display_name(&p.a), display_name(&p.b)];
            match &p.result {
                Ok(r) => row.extend([r.n.to_string(), f3(r.mean_diff), f3(r.statistic), format!("{:.4}", r.p_value)]),
                Err(e) => row.extend(["-".into(), "-".into(), "-".into(), e.clone()]),
            }
            dm.push(row);
        }
        tables.push(dm);

        let focus: Vec<String> = model_list
            .iter()
            .filter(|m| m.parse::<ModelFamily>().is_err())
            .cloned()
            .collect();
        if !focus.is_empty() {
            let members = |pred: fn(ModelFamily) -> bool| -> Vec<String> {
                model_list
                    .iter()
                    .filter(|m| m.parse::<ModelFamily>().map(pred).unwrap_or(false))
                    .cloned()
                    .collect()
            };
            let categories = vec![
                ("vs Traditional".to_string(), members(|f| f.is_traditional())),
                ("vs ML".to_string(), members(|f| !f.is_traditional())),
            ];
            let mut wr = TextTable::new(
                "dm_win_rate",
                "External models: DM wins against built-in baselines",
                &["Comparison", "Wins", "p<0.05"],
            );
            for r in win_rate_table(&pairs, &focus, &categories, 0.05) {
                wr.push(vec![
                    r.category,
                    format!("{}/{}", r.wins, r.total),
                    format!("{}/{}", r.significant, r.total),
                ]);
            }
            tables.push(wr);
        }
    }
    Ok(tables)
}
