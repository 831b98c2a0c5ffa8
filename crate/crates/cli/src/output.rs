//! Run directories.
//!
//! Layout: `<out>/config.json`, `<out>/report.json`, `<out>/tables/*.csv`
//! and optionally `<out>/models/*.json`. A run that fails before
//! [`RunOutput::commit`] removes the files it wrote, and the directory too
//! if the run created it.

use anyhow::{Context, Result};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

/// Environment variable overriding the default output root (`runs`).
pub const OUTPUT_ROOT_VAR: &str = "SIE_OUTPUT_ROOT";

/// `$SIE_OUTPUT_ROOT/<command>` or `runs/<command>`.
pub fn default_out_dir(command: &str) -> PathBuf {
    let root = std::env::var_os(OUTPUT_ROOT_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    root.join(command)
}

pub struct RunOutput {
    root: PathBuf,
    created: Option<PathBuf>,
    written: Vec<PathBuf>,
    committed: bool,
}

impl RunOutput {
    pub fn create(root: &Path) -> Result<Self> {
        let created = if root.exists() {
            None
        } else {
            // remember the topmost directory we create
            let mut top = root.to_path_buf();
            while let Some(parent) = top.parent() {
                if parent.as_os_str().is_empty() || parent.exists() {
                    break;
                }
                top = parent.to_path_buf();
            }
            Some(top)
        };
        fs::create_dir_all(root.join("tables"))
            .with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            created,
            written: Vec::new(),
            committed: false,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Reserve `relative` for writing and return its full path.
    pub fn path(&mut self, relative: &str) -> Result<PathBuf> {
        let path = self.root.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)
                .with_context(|| format!("cannot create {}", parent.display()))?;
        }
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, relative: &str, value: &T) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(value)?;
        self.write_text(relative, &(text + "\n"))
    }

    pub fn write_text(&mut self, relative: &str, text: &str) -> Result<PathBuf> {
        let path = self.path(relative)?;
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }

    /// Write serializable rows as a CSV table with a header row.
    pub fn write_rows<T: Serialize>(&mut self, relative: &str, rows: &[T]) -> Result<PathBuf> {
        let path = self.path(relative)?;
        let mut w = csv::Writer::from_path(&path)
            .with_context(|| format!("cannot write {}", path.display()))?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(path)
    }

    pub fn commit(mut self) -> PathBuf {
        self.committed = true;
        self.root.clone()
    }
}

impl Drop for RunOutput {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for path in &self.written {
            let _ = fs::remove_file(path);
        }
        match &self.created {
            Some(top) => {
                let _ = fs::remove_dir_all(top);
            }
            None => {
                for sub in ["tables", "models"] {
                    // only succeeds when empty
                    let _ = fs::remove_dir(self.root.join(sub));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncommitted_run_is_removed() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("a/b");
        {
            let mut out = RunOutput::create(&root).unwrap();
            out.write_text("report.json", "{}").unwrap();
        }
        assert!(!dir.path().join("a").exists());

        {
            let mut out = RunOutput::create(&root).unwrap();
            out.write_text("report.json", "{}").unwrap();
            out.commit();
        }
        assert!(root.join("report.json").exists());

        {
            let mut out = RunOutput::create(&root).unwrap();
            out.write_text("tables/x.csv", "a\n").unwrap();
        }
        assert!(!root.join("tables/x.csv").exists());
        assert!(root.join("report.json").exists());
    }
}
