use std::collections::BTreeMap;

use cropcast::calendar::Commodity;
use cropcast::ingest::load_normalized;
use cropcast::synth::{
    calibrate, default_mean, generate_benchmark, save_series_file, series_seed, write_manifest, CalibrationFit,
    CalibrationTargets,
};

use crate::config::{create_dir, inside_out, out_dir, write_file, ConfigFile, DEFAULT_SEED};
use crate::{CmdResult, Failure, SynthArgs};

pub fn cmd_synth(args: SynthArgs) -> CmdResult {
    let file = ConfigFile::load(args.common.config.as_deref())?;
    let out = out_dir(&args.common, &file);
    let dir = inside_out(&out, &args.synth_out)?;
    let seed = args.common.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    if args.n_series == 0 || args.length < 37 {
        return Err(Failure::Input(
            "need at least one series and 37 months (12 test, 24 validation, 1 train)".into(),
        ));
    }
    let data = args.data.clone().or(file.data.clone());
    let ds = data.as_deref().map(load_normalized).transpose()?;

    let targets = CalibrationTargets {
        length: args.length,
        ..CalibrationTargets::default()
    };
    let mut fits: BTreeMap<Commodity, CalibrationFit> = BTreeMap::new();
    let mut misses = Vec::new();
    for c in Commodity::ALL {
        let mu = ds
            .as_ref()
            .and_then(|d| d.price_points(c))
            .filter(|p| !p.is_empty())
            .map(|p| p.values().sum::<f64>() / p.len() as f64)
            .unwrap_or_else(|| default_mean(c));
        match calibrate(mu, &targets, series_seed(seed, c, 0)) {
            Ok(fit) => {
                fits.insert(c, fit);
            }
            Err(e) => misses.push(format!("{c}: {e}")),
        }
    }
    if !misses.is_empty() {
        return Err(Failure::Validation(misses.join("\n")));
    }
    let specs = fits.iter().map(|(c, f)| (*c, f.spec)).collect();
    let bench = generate_benchmark(&specs, args.n_series, args.length, seed)?;

    create_dir(&dir)?;
    for c in Commodity::ALL {
        let path = dir.join(format!("synthetic_{}.csv", c.label()));
        save_series_file(c, bench.for_commodity(c).map(|(id, s)| (id, &s.values)), &path)?;
    }
    let mut manifest = Vec::new();
    write_manifest(&bench.manifest, &mut manifest)?;
    write_file(&dir.join("manifest.csv"), &String::from_utf8(manifest).expect("csv is utf-8"))?;
    let calib: BTreeMap<&str, &CalibrationFit> = fits.iter().map(|(c, f)| (c.label(), f)).collect();
    write_file(
        &dir.join("calibration.json"),
        &serde_json::to_string_pretty(&calib).expect("calibration serializes"),
    )?;
    println!(
        "wrote {} series ({} per commodity, {} months) to {}",
        bench.series.len(),
        args.n_series,
        args.length,
        dir.display()
    );
    for (c, f) in &fits {
        println!(
            "{c}: median autocorr {:.3}, seasonal {:.3}, volatility {:.3}; joint in-range share {:.2}",
            f.median.autocorr, f.median.seasonal, f.median.volatility, f.joint_rate
        );
    }
    Ok(())
}
