//! Artifact writing. Every file carries the resolved config and seed: CSVs as
//! leading `#` comment lines, JSON as top-level fields, SVGs as an XML comment.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::config::ExperimentConfig;
use crate::error::Result;

/// Version of every JSON summary layout written by the runners.
pub const SCHEMA_VERSION: u32 = 1;

/// Writes files into one run directory, stamping each with the provenance
/// header.
#[derive(Debug, Clone)]
pub struct ArtifactWriter {
    dir: PathBuf,
    config_json: String,
    seed: Option<u64>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path, config: &ExperimentConfig, seed: Option<u64>) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let config_json = serde_json::to_string(config)?;
        Ok(Self { dir: dir.to_path_buf(), config_json, seed })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writer for a subdirectory with the same header but another seed.
    pub fn child(&self, name: &str, seed: Option<u64>) -> Result<Self> {
        let dir = self.dir.join(name);
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, config_json: self.config_json.clone(), seed })
    }

    fn seed_text(&self) -> String {
        self.seed.map_or_else(|| "all".to_string(), |s| s.to_string())
    }

    pub fn csv<C: AsRef<str>>(&self, name: &str, columns: &[C], rows: &[Vec<String>]) -> Result<PathBuf> {
        let mut out = format!("# config: {}\n# seed: {}\n", self.config_json, self.seed_text());
        out.push_str(&columns.iter().map(|c| c.as_ref()).collect::<Vec<_>>().join(","));
        out.push('\n');
        for row in rows {
            debug_assert_eq!(row.len(), columns.len());
            out.push_str(&row.join(","));
            out.push('\n');
        }
        self.raw(name, &out)
    }

    /// Writes `body` (an object) with `schema_version`, `seed` and `config`
    /// added at the top level.
    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf> {
        let mut value = serde_json::to_value(body)?;
        if let Value::Object(map) = &mut value {
            map.insert("schema_version".into(), json!(SCHEMA_VERSION));
            map.insert("seed".into(), self.seed.map_or(Value::String("all".into()), |s| json!(s)));
            map.insert("config".into(), serde_json::from_str(&self.config_json)?);
        }
        self.raw(name, &(serde_json::to_string_pretty(&value)? + "\n"))
    }

    pub fn svg(&self, name: &str, svg: &str) -> Result<PathBuf> {
        let note = format!("<!-- seed: {} config: {} -->\n", self.seed_text(), self.config_json.replace("--", "- -"));
        let body = match svg.find('\n') {
            Some(i) => format!("{}{}{}", &svg[..=i], note, &svg[i + 1..]),
            None => format!("{svg}\n{note}"),
        };
        self.raw(name, &body)
    }

    pub fn raw(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        Ok(path)
    }
}

/// Shortest round-trip formatting for CSV cells.
pub fn cell<T: Display>(v: T) -> String {
    v.to_string()
}

/// Joins point coordinates into separate cells.
pub fn coords(x: &[f64]) -> Vec<String> {
    x.iter().map(|v| v.to_string()).collect()
}

/// Column names `x0, x1, …` for a point of dimension `dim`.
pub fn coord_columns(prefix: &str, dim: usize) -> Vec<String> {
    (0..dim).map(|i| format!("{prefix}{i}")).collect()
}

/// One failed seed, collected into `errors.json`.
#[derive(Debug, Clone, Serialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}
