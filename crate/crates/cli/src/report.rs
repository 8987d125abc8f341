use std::collections::BTreeMap;

use cropcast::calendar::Commodity;
use cropcast::eval::tables::pooled_losses;
use cropcast::eval::{build_report, dm_test, load_results, CellResult, ReportOptions, MONTHLY_BANDWIDTH, MYA_BANDWIDTH};
use cropcast::ingest::load_normalized;

use crate::config::{create_dir, out_dir, write_file, ConfigFile};
use crate::run::{load_manifest, CellStatus, MANIFEST_FILE, RESULTS_FILE, SYNTH_MANIFEST_FILE, SYNTH_RESULTS_FILE};
use crate::{CmdResult, Common, DmArgs, Failure, LossKind, ReportArgs};

fn load(common: &Common, synthetic: bool) -> Result<(ConfigFile, std::path::PathBuf, Vec<CellResult>), Failure> {
    let file = ConfigFile::load(common.config.as_deref())?;
    let out = out_dir(common, &file);
    let name = if synthetic { SYNTH_RESULTS_FILE } else { RESULTS_FILE };
    let path = out.join(name);
    if !path.is_file() {
        return Err(Failure::Input(format!("no results at {}", path.display())));
    }
    let results = load_results(&path)?;
    if results.is_empty() {
        return Err(Failure::Input(format!("results store {} is empty", path.display())));
    }
    Ok((file, out, results))
}

pub fn cmd_report(args: ReportArgs) -> CmdResult {
    let (file, out, results) = load(&args.common, args.synthetic)?;
    let data = args.data.clone().or(file.data.clone());
    let ds = match (&data, args.synthetic) {
        (Some(p), false) => Some(load_normalized(p)?),
        _ => None,
    };
    let opts = ReportOptions {
        window: file.usda_window.clone().unwrap_or_default(),
        dm_exclude: file.dm_exclude.clone(),
    };
    let tables = build_report(&results, ds.as_ref(), &opts)?;

    let manifest_name = if args.synthetic { SYNTH_MANIFEST_FILE } else { MANIFEST_FILE };
    let gaps: Vec<String> = match load_manifest(&out.join(manifest_name)) {
        Ok(m) => m
            .cells
            .iter()
            .filter(|c| c.status == CellStatus::Failed)
            .map(|c| format!("{} {} {}: {}", c.model, c.commodity, c.split, c.error.as_deref().unwrap_or("")))
            .collect(),
        Err(_) => Vec::new(),
    };

    let dir = out.join(if args.synthetic { "report_synthetic" } else { "report" });
    create_dir(&dir)?;
    let mut combined = String::new();
    for t in &tables {
        let text = t.to_text();
        write_file(&dir.join(format!("{}.txt", t.name)), &text)?;
        write_file(&dir.join(format!("{}.csv", t.name)), &t.to_csv()?)?;
        combined.push_str(&text);
        combined.push('\n');
    }
    if !gaps.is_empty() {
        combined.push_str(&format!("Missing cells ({})\n", gaps.len()));
        for g in &gaps {
            combined.push_str(g);
            combined.push('\n');
        }
    }
    write_file(&dir.join("report.txt"), &combined)?;
    print!("{combined}");
    if !gaps.is_empty() && args.common.strict {
        return Err(Failure::Partial(format!("{} cells missing from the tables", gaps.len())));
    }
    Ok(())
}

fn mya_losses(results: &[CellResult], model: &str, exclude: &[i32]) -> BTreeMap<(Commodity, i32), f64> {
    results
        .iter()
        .filter(|r| r.model == model && !exclude.contains(&r.test_year))
        .filter_map(|r| Some(((r.commodity, r.test_year), (r.mya_forecast? - r.mya_actual?).abs())))
        .collect()
}

fn aligned<K: Ord>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> (Vec<f64>, Vec<f64>) {
    a.iter().filter_map(|(k, x)| b.get(k).map(|y| (*x, *y))).unzip()
}

pub fn cmd_dm(args: DmArgs) -> CmdResult {
    let (_, _, results) = load(&args.common, args.synthetic)?;
    for m in [&args.a, &args.b] {
        if !results.iter().any(|r| &r.model == m) {
            return Err(Failure::Input(format!("no results for model '{m}'")));
        }
    }
    let (la, lb, default_bw) = match args.loss {
        LossKind::Ape => {
            let (a, b) = aligned(
                &pooled_losses(&results, &args.a, &args.exclude),
                &pooled_losses(&results, &args.b, &args.exclude),
            );
            (a, b, MONTHLY_BANDWIDTH)
        }
        LossKind::Mya => {
            let (a, b) = aligned(
                &mya_losses(&results, &args.a, &args.exclude),
                &mya_losses(&results, &args.b, &args.exclude),
            );
            (a, b, MYA_BANDWIDTH)
        }
    };
    let r = dm_test(&la, &lb, args.bandwidth.unwrap_or(default_bw))?;
    println!("model_a\tmodel_b\tn\tbandwidth\tmean_diff\tstatistic\tp_value");
    println!(
        "{}\t{}\t{}\t{}\t{:.6}\t{:.4}\t{:.4}",
        args.a, args.b, r.n, r.bandwidth, r.mean_diff, r.statistic, r.p_value
    );
    Ok(())
}
