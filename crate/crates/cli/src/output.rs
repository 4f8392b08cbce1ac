use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Artifact sink rooted at the output directory.
pub struct Output {
    dir: PathBuf,
    pub plots: bool,
}

impl Output {
    pub fn new(dir: PathBuf, plots: bool) -> Self {
        Self { dir, plots }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io("json", e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Comma-separated table; empty cells for missing values.
    pub fn csv(&self, name: &str, header: &[String], rows: &[Vec<Option<f64>>]) -> Result<PathBuf, CliError> {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            let cells: Vec<String> = row
                .iter()
                .map(|v| v.map(|x| format!("{x:e}")).unwrap_or_default())
                .collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        self.write(name, &text)
    }

    fn write(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.dir)
            .map_err(|e| CliError::io("create_dir", format!("{}: {e}", self.dir.display())))?;
        let p = self.path(name);
        fs::write(&p, text).map_err(|e| CliError::io("write", format!("{}: {e}", p.display())))?;
        Ok(p)
    }
}

pub fn show(p: &Path) -> String {
    p.display().to_string()
}
