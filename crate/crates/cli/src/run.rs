use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use cropcast::calendar::{Commodity, MonthSeries};
use cropcast::eval::{
    external_cell, load_results, run_cell, run_single_split, save_results, CellResult, EvalSplit, ModelFamily,
};
use cropcast::external::{load_external_forecasts, ExternalStore};
use cropcast::ingest::load_normalized;
use cropcast::synth::read_series_file;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{
    create_dir, file_digest, out_dir, parse_commodities, parse_models, parse_splits, read_file, write_file,
    ConfigFile, RunConfig, DEFAULT_SEED,
};
use crate::{CmdResult, Failure, RunArgs};

pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SYNTH_RESULTS_FILE: &str = "results_synthetic.csv";
pub const SYNTH_MANIFEST_FILE: &str = "manifest_synthetic.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Cached,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRecord {
    pub model: String,
    pub commodity: Commodity,
    pub split: u32,
    pub status: CellStatus,
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    /// Hash of everything that determines cell results (seed and inputs).
    pub results_key: String,
    pub inputs: BTreeMap<String, String>,
    pub cells: Vec<CellRecord>,
}

pub fn load_manifest(path: &Path) -> Result<RunManifest, Failure> {
    serde_json::from_str(&read_file(path)?)
        .map_err(|e| Failure::Input(format!("manifest {}: {e}", path.display())))
}

fn resolve(args: &RunArgs) -> Result<RunConfig, Failure> {
    let file = ConfigFile::load(args.common.config.as_deref())?;
    let models = match args.models.as_ref().or(file.models.as_ref()) {
        Some(m) => parse_models(m)?,
        None => ModelFamily::ALL.to_vec(),
    };
    let splits = parse_splits(args.splits.as_deref().or(file.splits.as_deref()).unwrap_or("1-16"))?;
    let commodities = match args.commodities.as_ref().or(file.commodities.as_ref()) {
        Some(c) => parse_commodities(c)?,
        None => Commodity::ALL.to_vec(),
    };
    let mut external = file.external.clone();
    external.extend(args.external.iter().cloned());
    Ok(RunConfig {
        data: args.data.clone().or(file.data.clone()),
        models,
        splits,
        commodities,
        external,
        out: out_dir(&args.common, &file),
        seed: args.common.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        workers: args.workers.or(file.workers).unwrap_or(1).max(1),
        usda_window: file.usda_window.clone().unwrap_or_default(),
        dm_exclude: file.dm_exclude.clone(),
    })
}

type Key = (String, Commodity, u32);

enum Job<'a> {
    Family(ModelFamily),
    External(&'a str),
}

fn previous_results(out: &Path, results_file: &str, manifest_file: &str, key: &str) -> Vec<CellResult> {
    let (rp, mp) = (out.join(results_file), out.join(manifest_file));
    match (load_manifest(&mp), load_results(&rp)) {
        (Ok(m), Ok(r)) if m.results_key == key => r,
        _ => Vec::new(),
    }
}

/// Runs `cells` (skipping those already in `previous` unless forced) and
/// writes the merged results and manifest.
#[allow(clippy::too_many_arguments)]
fn execute<F>(
    cfg: &RunConfig,
    cells: Vec<Key>,
    previous: Vec<CellResult>,
    force: bool,
    strict: bool,
    inputs: BTreeMap<String, String>,
    results_key: String,
    files: (&str, &str),
    compute: F,
) -> CmdResult
where
    F: Fn(&Key) -> Result<CellResult, String> + Sync,
{
    let mut kept: BTreeMap<Key, CellResult> = previous.into_iter().map(|r| (r.key(), r)).collect();
    let todo: Vec<&Key> = cells.iter().filter(|k| force || !kept.contains_key(*k)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Failure::Input(format!("thread pool: {e}")))?;
    let fresh: Vec<(Key, Result<CellResult, String>, f64)> = pool.install(|| {
        todo.par_iter()
            .map(|k| {
                let t = Instant::now();
                let r = compute(k);
                ((*k).clone(), r, t.elapsed().as_secs_f64())
            })
            .collect()
    });
    let mut records: BTreeMap<Key, CellRecord> = BTreeMap::new();
    for k in &cells {
        if kept.contains_key(k) && !force {
            records.insert(
                k.clone(),
                CellRecord {
                    model: k.0.clone(),
                    commodity: k.1,
                    split: k.2,
                    status: CellStatus::Cached,
                    seconds: 0.0,
                    error: None,
                },
            );
        }
    }
    let mut failed = 0;
    for (k, r, secs) in fresh {
        let (status, error) = match r {
            Ok(res) => {
                kept.insert(k.clone(), res);
                (CellStatus::Ok, None)
            }
            Err(e) => {
                kept.remove(&k);
                failed += 1;
                (CellStatus::Failed, Some(e))
            }
        };
        records.insert(
            k.clone(),
            CellRecord {
                model: k.0,
                commodity: k.1,
                split: k.2,
                status,
                seconds: secs,
                error,
            },
        );
    }
    create_dir(&cfg.out)?;
    let results: Vec<CellResult> = kept.into_values().collect();
    save_results(&results, &cfg.out.join(files.0))?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash(),
        results_key,
        inputs,
        cells: cells.iter().map(|k| records[k].clone()).collect(),
    };
    write_file(
        &cfg.out.join(files.1),
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    let cached = manifest.cells.iter().filter(|c| c.status == CellStatus::Cached).count();
    println!(
        "{} cells: {} computed, {} cached, {} failed; results in {}",
        cells.len(),
        cells.len() - cached - failed,
        cached,
        failed,
        cfg.out.join(files.0).display()
    );
    for c in manifest.cells.iter().filter(|c| c.status == CellStatus::Failed) {
        eprintln!(
            "failed: {} {} {}: {}",
            c.model,
            c.commodity,
            c.split,
            c.error.as_deref().unwrap_or("")
        );
    }
    if failed > 0 && strict {
        return Err(Failure::Partial(format!("{failed} cells failed")));
    }
    Ok(())
}

fn results_key(seed: u64, inputs: &BTreeMap<String, String>) -> String {
    let mut s = format!("seed={seed}");
    for (k, v) in inputs {
        s.push_str(&format!(";{k}={v}"));
    }
    crate::config::hex(&<sha2::Sha256 as sha2::Digest>::digest(s.as_bytes()))
}

pub fn cmd_run(args: RunArgs) -> CmdResult {
    let cfg = resolve(&args)?;
    if let Some(dir) = &args.synthetic {
        return run_synthetic(&cfg, dir, args.force, args.common.strict);
    }
    let data = cfg
        .data
        .clone()
        .ok_or_else(|| Failure::Input("no dataset given (--data or `data` in the config)".into()))?;
    let ds = load_normalized(&data)?;
    let mut store = ExternalStore::default();
    let mut inputs = BTreeMap::new();
    inputs.insert(data.display().to_string(), file_digest(&data)?);
    for p in &cfg.external {
        store.merge(load_external_forecasts(p)?)?;
        inputs.insert(p.display().to_string(), file_digest(p)?);
    }
    let external_models = store.models();
    let mut names: Vec<String> = cfg.models.iter().map(|m| m.name().to_string()).collect();
    for m in &external_models {
        if names.contains(m) {
            return Err(Failure::Input(format!("external model '{m}' clashes with a built-in name")));
        }
        names.push(m.clone());
    }
    let mut cells = Vec::new();
    for n in &names {
        for c in &cfg.commodities {
            for s in &cfg.splits {
                cells.push((n.clone(), *c, *s));
            }
        }
    }
    let key = results_key(cfg.seed, &inputs);
    let previous = previous_results(&cfg.out, RESULTS_FILE, MANIFEST_FILE, &key);
    let families: BTreeMap<&str, ModelFamily> = cfg.models.iter().map(|m| (m.name(), *m)).collect();
    let seed = cfg.seed;
    execute(
        &cfg,
        cells,
        previous,
        args.force,
        args.common.strict,
        inputs,
        key,
        (RESULTS_FILE, MANIFEST_FILE),
        |(model, c, s)| {
            let split = EvalSplit::new(*c, *s).map_err(|e| e.to_string())?;
            let job = match families.get(model.as_str()) {
                Some(f) => Job::Family(*f),
                None => Job::External(model),
            };
            match job {
                Job::Family(f) => run_cell(&ds, f, &split, seed),
                Job::External(m) => external_cell(&ds, &store, m, &split),
            }
            .map_err(|e| e.to_string())
        },
    )
}

fn synthetic_files(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("synthetic_") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure::Input(format!("no synthetic_*.csv files in {}", dir.display())));
    }
    Ok(files)
}

fn run_synthetic(cfg: &RunConfig, dir: &Path, force: bool, strict: bool) -> CmdResult {
    let mut series: BTreeMap<(Commodity, u32), MonthSeries> = BTreeMap::new();
    let mut inputs = BTreeMap::new();
    for p in synthetic_files(dir)? {
        let f = std::fs::File::open(&p).map_err(|e| Failure::Input(format!("cannot open {}: {e}", p.display())))?;
        for (id, c, s) in read_series_file(f)? {
            series.insert((c, id), s);
        }
        inputs.insert(p.display().to_string(), file_digest(&p)?);
    }
    let wanted: BTreeSet<Commodity> = cfg.commodities.iter().copied().collect();
    let mut cells = Vec::new();
    for m in &cfg.models {
        for (c, id) in series.keys().filter(|(c, _)| wanted.contains(c)) {
            cells.push((m.name().to_string(), *c, *id));
        }
    }
    let key = results_key(cfg.seed, &inputs);
    let previous = previous_results(&cfg.out, SYNTH_RESULTS_FILE, SYNTH_MANIFEST_FILE, &key);
    let seed = cfg.seed;
    execute(
        cfg,
        cells,
        previous,
        force,
        strict,
        inputs,
        key,
        (SYNTH_RESULTS_FILE, SYNTH_MANIFEST_FILE),
        |(model, c, id)| {
            let family: ModelFamily = model.parse().map_err(|e: cropcast::error::Error| e.to_string())?;
            run_single_split(family, &series[&(*c, *id)], *c, *id, 12, 24, seed).map_err(|e| e.to_string())
        },
    )
}
