//! CSV tables and manifests.
//!
//! Every table starts with `# kdvlab-csv v<N> table=<name> config=<sha256>`,
//! followed by a header row. Floats use Rust's shortest round-trip form, so
//! identical inputs give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::{LabError, LabResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn write(&self, dir: &Path, config_hash: &str) -> LabResult<PathBuf> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut buf = format!("# kdvlab-csv v{SCHEMA_VERSION} table={} config={config_hash}\n", self.name).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let csv_err = |source| LabError::Csv { path: path.clone(), source };
            w.write_record(&self.header).map_err(csv_err)?;
            for r in &self.rows {
                w.write_record(r).map_err(csv_err)?;
            }
            w.flush().map_err(LabError::io(&path))?;
        }
        fs::write(&path, buf).map_err(LabError::io(&path))?;
        Ok(path)
    }
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Header comment fields and the table of a CSV written by [`Table::write`].
pub fn read_table(path: &Path) -> LabResult<(String, Table)> {
    let text = fs::read_to_string(path).map_err(LabError::io(path))?;
    let comment = text.lines().next().filter(|l| l.starts_with('#')).unwrap_or("").to_string();
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let csv_err = |source| LabError::Csv { path: path.to_path_buf(), source };
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
        .collect::<Result<Vec<Vec<String>>, _>>()
        .map_err(csv_err)?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok((comment, Table { name, header, rows }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestInfo {
    pub tool: String,
    pub version: String,
    pub schema: u32,
    pub command: String,
    pub config_hash: String,
    pub files: Vec<String>,
}

/// Manifest file: run metadata plus a full echo of the config. It can be
/// passed back as `--config` to repeat the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest: ManifestInfo,
    pub config: ExperimentConfig,
}

pub fn write_manifest(dir: &Path, command: &str, cfg: &ExperimentConfig, files: &[PathBuf]) -> LabResult<PathBuf> {
    let m = Manifest {
        manifest: ManifestInfo {
            tool: "kdvlab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            schema: SCHEMA_VERSION,
            command: command.into(),
            config_hash: cfg.hash(),
            files: files.iter().filter_map(|f| f.file_name()).map(|f| f.to_string_lossy().into_owned()).collect(),
        },
        config: cfg.clone(),
    };
    let path = dir.join("manifest.toml");
    fs::write(&path, toml::to_string(&m).expect("manifest serializes")).map_err(LabError::io(&path))?;
    Ok(path)
}

/// Loads a config file or the config echoed in a manifest.
pub fn load_config(path: &Path) -> LabResult<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(LabError::io(path))?;
    let is_manifest = text.parse::<toml::Table>().map(|t| t.contains_key("manifest")).unwrap_or(false);
    if is_manifest {
        let m: Manifest = toml::from_str(&text).map_err(|e| LabError::config("manifest", e.message().trim()))?;
        m.config.validate()?;
        Ok(m.config)
    } else {
        ExperimentConfig::from_toml_str(&text)
    }
}

pub fn ensure_dir(dir: &Path) -> LabResult<()> {
    fs::create_dir_all(dir).map_err(LabError::io(dir))
}
