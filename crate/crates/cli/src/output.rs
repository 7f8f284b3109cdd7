//! Output files for one invocation. Everything written is removed again if the
//! invocation fails.

use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
    created_root: bool,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        let created_root = !root.exists();
        fs::create_dir_all(root).map_err(|e| {
            CliError::Config(format!(
                "output directory {} is not writable: {e}",
                root.display()
            ))
        })?;
        if !root.is_dir() {
            return Err(CliError::Config(format!(
                "{} is not a directory",
                root.display()
            )));
        }
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
            created_root,
        })
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        fs::write(&path, contents)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// Deletes every file written so far (and the directory, if this run created it
    /// and it is now empty).
    pub fn discard(self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_root {
            let _ = fs::remove_dir(&self.root);
        }
    }
}

/// File-name-safe version of an index or asset name.
pub fn file_stem_for(name: &str) -> String {
    let stem: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if stem.is_empty() {
        "_".into()
    } else {
        stem
    }
}
