use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const COMMODITIES: [(&str, u32, f64); 4] = [
    ("corn", 9, 4.0),
    ("soybeans", 9, 10.0),
    ("wheat", 6, 5.5),
    ("cotton", 8, 65.0),
];

/// Small deterministic pseudo-noise in [-0.5, 0.5).
fn jitter(i: u64) -> f64 {
    let x = i.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
}

/// Long-layout input CSV: monthly prices and marketing percentages from 1990
/// through August 2025 for all four commodities.
pub fn input_csv() -> String {
    let mut s = String::from("commodity,date,variable,value,forecast_date\n");
    for (ci, (name, my_start, base)) in COMMODITIES.iter().enumerate() {
        for year in 1990..=2025 {
            for month in 1..=12u32 {
                if year == 2025 && month > 8 {
                    break;
                }
                let t = (year - 1990) as f64 * 12.0 + month as f64;
                let i = (ci as u64) << 32 | t as u64;
                let p = base
                    * (1.0 + 0.08 * (2.0 * PI * month as f64 / 12.0).sin() + 0.2 * (2.0 * PI * t / 70.0).sin()
                        + 0.02 * jitter(i));
                let _ = writeln!(s, "{name},{year}-{month:02}-01,price received,{p:.4},");
                // Heavier sales right after harvest.
                let k = (month + 12 - my_start) % 12;
                let my = if month >= *my_start { year } else { year - 1 };
                let w = (12.0 - k as f64 * 0.6 + 0.3 * (2.0 * PI * k as f64 / 12.0 + my as f64).sin()) * 100.0
                    / 104.4;
                let _ = writeln!(s, "{name},{year}-{month:02}-01,marketing percentage,{w:.4},");
            }
        }
    }
    s
}

/// Output CSV with one published actual and two pre-season forecast vintages
/// per marketing year.
pub fn output_csv() -> String {
    let mut s = String::from("commodity,marketing_year,forecast_date,value,type\n");
    for (name, my_start, base) in COMMODITIES {
        for my in 1995..2025 {
            let _ = writeln!(s, "{name},{my},,{:.3},actual", base);
            for (back, scale) in [(2, 1.03), (1, 0.98)] {
                let (y, m) = if my_start > back { (my, my_start - back) } else { (my - 1, my_start + 12 - back) };
                let _ = writeln!(s, "{name},{my},{y}-{m:02}-10,{:.3},forecast", base * scale);
            }
        }
    }
    s
}

pub fn write_inputs(dir: &Path) -> (PathBuf, PathBuf) {
    let i = dir.join("input.csv");
    let o = dir.join("output.csv");
    std::fs::write(&i, input_csv()).unwrap();
    std::fs::write(&o, output_csv()).unwrap();
    (i, o)
}

pub fn cropcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cropcast"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Ingests the fixture into `<dir>/out/normalized.csv`.
pub fn ingest_fixture(dir: &Path) -> PathBuf {
    let (i, o) = write_inputs(dir);
    let out = dir.join("out");
    let r = cropcast(&[
        "ingest",
        "--input-csv",
        i.to_str().unwrap(),
        "--output-csv",
        o.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    out.join("normalized.csv")
}
