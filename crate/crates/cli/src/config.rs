//! Flat TOML config files. Every key is a long flag name (`target-mape`,
//! `sid_start`, ...) and is turned into command-line arguments that are
//! parsed ahead of the real ones, so explicit flags win.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use toml::Value;

fn scalar(key: &str, v: &Value) -> Result<String> {
    Ok(match v {
        Value::String(s) => s.clone(),
        Value::Integer(i) => i.to_string(),
        Value::Float(f) => f.to_string(),
        Value::Datetime(d) => d.to_string(),
        Value::Boolean(b) => b.to_string(),
        _ => bail!("config key '{key}': nested tables are not supported"),
    })
}

/// Arguments equivalent to the config file at `path`.
pub fn config_args(path: &Path) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let mut out = Vec::new();
    for (key, value) in &table {
        let name = key.replace('_', "-");
        if name == "config" {
            bail!("config files cannot include other config files");
        }
        let flag = OsString::from(format!("--{name}"));
        match value {
            Value::Boolean(true) => out.push(flag),
            Value::Boolean(false) => {}
            Value::Array(items) => {
                let parts = items.iter().map(|v| scalar(key, v)).collect::<Result<Vec<_>>>()?;
                out.push(flag);
                out.push(parts.join(",").into());
            }
            other => {
                out.push(flag);
                out.push(scalar(key, other)?.into());
            }
        }
    }
    Ok(out)
}

/// Position right after the subcommand name, where config arguments go.
pub fn insert_config(argv: &[OsString], extra: Vec<OsString>) -> Vec<OsString> {
    let at = 2.min(argv.len());
    let mut out = argv[..at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[at..]);
    out
}

/// Value of `--config` in a raw argument list.
pub fn find_config(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}
