use cropcast::ingest::{
    parse_input_csv, parse_output_csv, published_from, save_normalized, validate_dataset, ColumnMapping, Dataset,
    PublishedTable, RejectedRow, ValidationRules,
};

use crate::config::{create_dir, inside_out, out_dir, write_file, ConfigFile};
use crate::{CmdResult, Failure, IngestArgs};

fn parse_required_years(s: &str) -> Result<Option<(i32, i32)>, Failure> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    let bad = || Failure::Input(format!("bad --required-years '{s}'"));
    let (a, b) = s.split_once('-').ok_or_else(bad)?;
    let (a, b): (i32, i32) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if a > b {
        return Err(bad());
    }
    Ok(Some((a, b)))
}

fn rejected_csv(sections: &[(&str, &[RejectedRow])]) -> String {
    let mut s = String::from("file,line,reason\n");
    for (file, rows) in sections {
        for r in *rows {
            s.push_str(&format!("{file},{},\"{}\"\n", r.line, r.reason.replace('"', "'")));
        }
    }
    s
}

pub fn cmd_ingest(args: IngestArgs) -> CmdResult {
    let file = ConfigFile::load(args.common.config.as_deref())?;
    let out = out_dir(&args.common, &file);
    let normalized_path = inside_out(&out, &args.normalized_out)?;
    let required_years = parse_required_years(&args.required_years)?;

    // Fail before touching the output directory.
    for p in std::iter::once(&args.input_csv).chain(args.output_csv.as_ref()) {
        if !p.is_file() {
            return Err(Failure::Input(format!("input file {} not found", p.display())));
        }
    }
    let mapping = match &args.mapping {
        Some(p) => ColumnMapping::load(p)?,
        None => ColumnMapping::default(),
    };
    let input = parse_input_csv(&args.input_csv, &mapping.input)?;
    let output = match &args.output_csv {
        Some(p) => parse_output_csv(p, &mapping.output)?,
        None => Default::default(),
    };
    let published = if output.records.is_empty() {
        PublishedTable::default()
    } else {
        published_from(&output.records)?
    };
    let ds = Dataset::from_records(&input.records, published)?;
    let report = validate_dataset(
        &ds,
        &ValidationRules {
            required_years,
            ..ValidationRules::default()
        },
    );

    create_dir(&out)?;
    if let Some(parent) = normalized_path.parent() {
        create_dir(parent)?;
    }
    save_normalized(&ds, &normalized_path)?;
    let input_name = args.input_csv.display().to_string();
    let output_name = args
        .output_csv
        .as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default();
    let rejected_path = out.join("rejected_rows.csv");
    write_file(
        &rejected_path,
        &rejected_csv(&[(&input_name, &input.rejected), (&output_name, &output.rejected)]),
    )?;
    let report_path = out.join("validation_report.txt");
    write_file(&report_path, &report.to_text())?;

    let total_rows = input.records.len() + input.rejected.len() + output.records.len() + output.rejected.len();
    let rejected = input.rejected.len() + output.rejected.len();
    println!(
        "ingested {} input and {} output records ({} rejected) into {}",
        input.records.len(),
        output.records.len(),
        rejected,
        normalized_path.display()
    );
    if !input.ignored_columns.is_empty() {
        println!("ignored columns: {}", input.ignored_columns.join(", "));
    }
    if total_rows > 0 && rejected as f64 / total_rows as f64 > args.max_rejected {
        return Err(Failure::Validation(format!(
            "{rejected} of {total_rows} rows rejected; see {}",
            rejected_path.display()
        )));
    }
    if !report.is_empty() {
        return Err(Failure::Validation(format!(
            "{} validation issues; see {}",
            report.issues.len(),
            report_path.display()
        )));
    }
    Ok(())
}
