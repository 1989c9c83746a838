//! Output-directory helpers: everything lands under `--out`, written
//! atomically (temp file + rename).

use std::fs;
use std::path::{Path, PathBuf};

use vitcod::Result;

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Atomically writes `bytes` to `dir/name`.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let tmp = dir.join(format!(".tmp-{name}"));
    fs::write(&tmp, bytes)?;
    let target = dir.join(name);
    fs::rename(&tmp, &target)?;
    Ok(target)
}
