//! Output files. Each one is written to a temporary name and renamed into
//! place, and carries the config hash: a `# config_sha256=` first line in
//! CSV, a `config_sha256` field in JSON.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub struct OutputDir {
    dir: PathBuf,
    hash: String,
}

#[derive(Serialize)]
struct Stamped<'a, T> {
    config_sha256: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

impl OutputDir {
    pub fn new(dir: PathBuf, hash: String) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir, hash })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Writes raw bytes atomically; `name` may contain subdirectories.
    pub fn write_with(
        &self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
    ) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let parent = path.parent().expect("joined path has a parent");
        fs::create_dir_all(parent)?;
        let file_name = path.file_name().expect("output name").to_string_lossy();
        let tmp = parent.join(format!(".{file_name}.tmp{}", std::process::id()));
        let result = (|| {
            let mut w = BufWriter::new(File::create(&tmp)?);
            f(&mut w)?;
            w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
            fs::rename(&tmp, &path)?;
            Ok(())
        })();
        if result.is_err() {
            let _ = fs::remove_file(&tmp);
        }
        result.map(|()| path)
    }

    pub fn csv(
        &self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
    ) -> Result<PathBuf, CliError> {
        self.write_with(name, |w| {
            writeln!(w, "# config_sha256={}", self.hash)?;
            f(w)
        })
    }

    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf, CliError> {
        self.write_with(name, |w| {
            let stamped = Stamped {
                config_sha256: &self.hash,
                body,
            };
            serde_json::to_writer_pretty(&mut *w, &stamped).map_err(|e| CliError::Runtime(e.to_string()))?;
            writeln!(w)?;
            Ok(())
        })
    }
}
