//! Atomic file output and the line-oriented run log.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn quote(v: &str) -> String {
    if v.is_empty() || v.contains(char::is_whitespace) || v.contains('"') {
        format!("{v:?}")
    } else {
        v.to_string()
    }
}

/// `event=<name> key=value ...` lines echoed to stdout and kept for `run.log`.
#[derive(Default)]
pub struct Log {
    lines: Vec<String>,
    file: Option<PathBuf>,
}

impl Log {
    pub fn to_file(path: PathBuf) -> Self {
        Self {
            lines: Vec::new(),
            file: Some(path),
        }
    }

    pub fn event(&mut self, name: &str, fields: &[(&str, String)]) {
        let mut line = format!("event={name}");
        for (k, v) in fields {
            line.push_str(&format!(" {k}={}", quote(v)));
        }
        println!("{line}");
        self.lines.push(line);
    }

    pub fn flush(&self) -> Result<()> {
        if let Some(path) = &self.file {
            let mut text = self.lines.join("\n");
            text.push('\n');
            write_atomic(path, text.as_bytes())?;
        }
        Ok(())
    }
}
