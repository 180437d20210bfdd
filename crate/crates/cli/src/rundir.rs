//! Run directories: timestamped by default, never silently overwritten.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

use crate::config::ConfigError;

/// Creates the output directory for a command. An explicit `out` is used
/// as-is; otherwise a fresh `<base>/<name>-<timestamp>` directory is made.
/// An existing non-empty directory is only reused with `force`.
pub fn create(out: Option<&Path>, base: &Path, name: &str, force: bool) -> anyhow::Result<PathBuf> {
    let dir = match out {
        Some(p) => p.to_path_buf(),
        None => {
            let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
            let mut dir = base.join(format!("{name}-{stamp}"));
            let mut n = 1;
            while dir.exists() && !force {
                dir = base.join(format!("{name}-{stamp}-{n}"));
                n += 1;
            }
            dir
        }
    };
    if is_non_empty(&dir)? && !force {
        bail!(ConfigError(format!(
            "{} already exists and is not empty; pass --force to overwrite",
            dir.display()
        )));
    }
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn is_non_empty(dir: &Path) -> anyhow::Result<bool> {
    if !dir.exists() {
        return Ok(false);
    }
    if !dir.is_dir() {
        bail!(ConfigError(format!("{} exists and is not a directory", dir.display())));
    }
    Ok(std::fs::read_dir(dir)?.next().is_some())
}

pub fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> anyhow::Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
