use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Writes `files` into `dir`, all or nothing: everything is staged in a
/// hidden directory inside `dir` and moved into place only once every file
/// is written. Existing files with other names are left alone.
pub fn write_bundle(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<()> {
    let created = !dir.exists();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let result = stage_and_move(dir, files);
    if result.is_err() && created {
        let _ = fs::remove_dir_all(dir);
    }
    result
}

fn stage_and_move(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<()> {
    let staging = tempfile::Builder::new()
        .prefix(".rolesense-")
        .tempdir_in(dir)
        .map_err(|e| Error::io(dir, e))?;
    for (name, bytes) in files {
        let path = staging.path().join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    for (name, _) in files {
        let to = dir.join(name);
        fs::rename(staging.path().join(name), &to).map_err(|e| Error::io(&to, e))?;
    }
    Ok(())
}
