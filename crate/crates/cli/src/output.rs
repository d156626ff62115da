//! Output directory guard: files land only on success, partial outputs are
//! removed when a command fails partway.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;

pub struct OutputGuard {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputGuard {
    pub fn new(dir: &Path) -> anyhow::Result<OutputGuard> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(OutputGuard {
            dir: dir.to_path_buf(),
            created_dir,
            written: Vec::new(),
            committed: false,
        })
    }

    /// Writes string contents to `name` inside the directory.
    pub fn write(&mut self, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
        self.save(name, |path| {
            fs::write(path, contents).map_err(|e| textshift::Error::Io {
                path: path.display().to_string(),
                source: e,
            })
        })
    }

    /// Runs a path-taking writer for `name`, tracking the file on success
    /// and removing any partial file on failure.
    pub fn save<F>(&mut self, name: &str, writer: F) -> anyhow::Result<PathBuf>
    where
        F: FnOnce(&Path) -> textshift::Result<()>,
    {
        let path = self.dir.join(name);
        match writer(&path) {
            Ok(()) => {
                self.written.push(path.clone());
                Ok(path)
            }
            Err(e) => {
                let _ = fs::remove_file(&path);
                Err(e.into())
            }
        }
    }

    /// Keeps everything written so far; without this, drop cleans up.
    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for file in &self.written {
            let _ = fs::remove_file(file);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}
