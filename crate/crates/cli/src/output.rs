//! Artifact writing. Every file lands via a temp file in the target
//! directory followed by a rename, so readers never see a partial file.

use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub struct OutputError {
    pub path: PathBuf,
    pub message: String,
}

impl std::fmt::Display for OutputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "writing {}: {}", self.path.display(), self.message)
    }
}

pub struct OutputDir {
    dir: PathBuf,
    /// `None` suppresses the timestamp comment line.
    stamp: Option<String>,
}

impl OutputDir {
    pub fn create(dir: &Path, timestamp: bool) -> Result<OutputDir, OutputError> {
        std::fs::create_dir_all(dir).map_err(|e| OutputError {
            path: dir.to_path_buf(),
            message: e.to_string(),
        })?;
        let stamp = timestamp.then(|| {
            format!(
                "# tevie {} generated {}",
                env!("CARGO_PKG_VERSION"),
                chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
            )
        });
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            stamp,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn timestamped(&self) -> bool {
        self.stamp.is_some()
    }

    pub fn write_bytes(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, OutputError> {
        let path = self.path(name);
        let err = |e: std::io::Error| OutputError {
            path: path.clone(),
            message: e.to_string(),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(err)?;
        tmp.write_all(bytes).map_err(err)?;
        tmp.as_file().sync_all().map_err(err)?;
        tmp.persist(&path).map_err(|e| err(e.error))?;
        Ok(path)
    }

    /// Header, rows, then `trailer` lines as `#` comments.
    pub fn write_csv(
        &self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
        trailer: &[String],
    ) -> Result<PathBuf, OutputError> {
        let mut buf = Vec::new();
        if let Some(s) = &self.stamp {
            buf.extend_from_slice(s.as_bytes());
            buf.push(b'\n');
        }
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let fail = |e: csv::Error| OutputError {
                path: self.path(name),
                message: e.to_string(),
            };
            w.write_record(header).map_err(fail)?;
            for r in rows {
                w.write_record(r).map_err(fail)?;
            }
            w.flush().map_err(|e| fail(e.into()))?;
        }
        for line in trailer {
            buf.extend_from_slice(format!("# {line}\n").as_bytes());
        }
        self.write_bytes(name, &buf)
    }
}

/// Shortest round-trip decimal, so identical values give identical bytes.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
