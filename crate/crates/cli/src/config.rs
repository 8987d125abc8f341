//! Declarative run configuration: a TOML file plus flag overrides.

use std::collections::BTreeSet;
use std::path::{Component, Path, PathBuf};

use cropcast::calendar::Commodity;
use cropcast::eval::{ModelFamily, UsdaWindow, N_SPLITS};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Common, Failure};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub data: Option<PathBuf>,
    pub models: Option<Vec<String>>,
    pub splits: Option<String>,
    pub commodities: Option<Vec<String>>,
    pub external: Vec<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub usda_window: Option<UsdaWindow>,
    /// Test years dropped from pooled monthly DM tests.
    pub dm_exclude: Vec<i32>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Input(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::Input(format!("config {}: {e}", path.display())))
    }
}

/// Fully resolved configuration; its JSON form is hashed into the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub models: Vec<ModelFamily>,
    pub splits: Vec<u32>,
    pub commodities: Vec<Commodity>,
    pub external: Vec<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub workers: usize,
    pub usda_window: UsdaWindow,
    pub dm_exclude: Vec<i32>,
}

impl RunConfig {
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_digest(path: &Path) -> Result<String, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

pub fn parse_splits(s: &str) -> Result<Vec<u32>, Failure> {
    let mut out = BTreeSet::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || Failure::Input(format!("bad split selection '{part}'"));
        let (lo, hi) = match part.split_once('-') {
            Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
            None => {
                let v: u32 = part.parse().map_err(|_| bad())?;
                (v, v)
            }
        };
        if lo == 0 || hi > N_SPLITS || lo > hi {
            return Err(Failure::Input(format!("split selection '{part}' outside 1-{N_SPLITS}")));
        }
        out.extend(lo..=hi);
    }
    if out.is_empty() {
        return Err(Failure::Input("empty split selection".into()));
    }
    Ok(out.into_iter().collect())
}

pub fn parse_models(names: &[String]) -> Result<Vec<ModelFamily>, Failure> {
    let mut out = Vec::new();
    for n in names {
        let f: ModelFamily = n.parse().map_err(|e: cropcast::error::Error| Failure::Input(e.to_string()))?;
        if out.contains(&f) {
            return Err(Failure::Input(format!("model '{n}' listed twice")));
        }
        out.push(f);
    }
    Ok(out)
}

pub fn parse_commodities(names: &[String]) -> Result<Vec<Commodity>, Failure> {
    let mut set = BTreeSet::new();
    for n in names {
        set.insert(n.parse().map_err(|e: cropcast::error::Error| Failure::Input(e.to_string()))?);
    }
    Ok(set.into_iter().collect())
}

/// Output directory from flags, then config, then `./out`.
pub fn out_dir(common: &Common, file: &ConfigFile) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| file.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Joins a relative path under the output directory, refusing anything that
/// could escape it.
pub fn inside_out(out: &Path, rel: &Path) -> Result<PathBuf, Failure> {
    let escapes = rel
        .components()
        .any(|c| !matches!(c, Component::Normal(_) | Component::CurDir));
    if escapes {
        return Err(Failure::Input(format!(
            "{} must be a relative path inside the output directory",
            rel.display()
        )));
    }
    Ok(out.join(rel))
}

pub fn create_dir(path: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(path).map_err(|e| Failure::Input(format!("cannot create {}: {e}", path.display())))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))
}

pub fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}
