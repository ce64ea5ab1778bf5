//! Flat `key = value` run configuration.
//!
//! One entry per line, `#` or `;` starts a comment line, keys are dotted
//! (`model.source`, `utility.gamma`). Keys under `run.` are ignored so a
//! manifest can be fed back as a config. Every key the run reads, including
//! defaults it falls back to, is recorded and later written to the manifest.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    /// Line in the config file, `None` for flag overrides.
    line: Option<usize>,
}

#[derive(Debug)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
    base_dir: PathBuf,
    source: String,
    used: RefCell<BTreeMap<String, String>>,
}

impl Config {
    pub fn parse(text: &str, base_dir: &Path, source: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') || t.starts_with(';') {
                continue;
            }
            let Some((k, v)) = t.split_once('=') else {
                return Err(CliError::Input(format!("{source}: line {line}: expected `key = value`, found {t:?}")));
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || !k.chars().all(|c| c.is_ascii_alphanumeric() || c == '.' || c == '_') {
                return Err(CliError::Input(format!("{source}: line {line}: invalid key {k:?}")));
            }
            if k.starts_with("run.") {
                continue;
            }
            if let Some(prev) = entries.insert(k.to_string(), Entry { value: v.to_string(), line: Some(line) }) {
                return Err(CliError::Input(format!(
                    "{source}: line {line}: duplicate key {k} (first set on line {})",
                    prev.line.unwrap_or(0)
                )));
            }
        }
        Ok(Config { entries, base_dir: base_dir.to_path_buf(), source: source.to_string(), used: RefCell::default() })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base, &path.display().to_string())
    }

    /// Command-line flags win over the file.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), Entry { value: value.to_string(), line: None });
    }

    fn where_(&self, key: &str) -> String {
        match self.entries.get(key).and_then(|e| e.line) {
            Some(line) => format!("{}: line {line}: {key}", self.source),
            None => format!("{key} (command line)"),
        }
    }

    fn record(&self, key: &str, value: &str) {
        self.used.borrow_mut().insert(key.to_string(), value.to_string());
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn opt_str(&self, key: &str) -> Option<String> {
        let v = self.entries.get(key)?.value.clone();
        self.record(key, &v);
        Some(v)
    }

    pub fn str(&self, key: &str) -> Result<String, CliError> {
        self.opt_str(key).ok_or_else(|| CliError::Input(format!("{}: missing required key {key}", self.source)))
    }

    pub fn str_or(&self, key: &str, default: &str) -> String {
        self.opt_str(key).unwrap_or_else(|| {
            self.record(key, default);
            default.to_string()
        })
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        let Some(raw) = self.opt_str(key) else { return Ok(None) };
        raw.parse()
            .map(Some)
            .map_err(|_| CliError::Input(format!("{}: cannot parse {raw:?} as {}", self.where_(key), std::any::type_name::<T>())))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        self.opt(key)?.ok_or_else(|| CliError::Input(format!("{}: missing required key {key}", self.source)))
    }

    pub fn get_or<T: FromStr + ToString>(&self, key: &str, default: T) -> Result<T, CliError> {
        match self.opt(key)? {
            Some(v) => Ok(v),
            None => {
                self.record(key, &default.to_string());
                Ok(default)
            }
        }
    }

    pub fn finite(&self, key: &str) -> Result<f64, CliError> {
        let v: f64 = self.get(key)?;
        if !v.is_finite() {
            return Err(CliError::Input(format!("{}: value must be finite", self.where_(key))));
        }
        Ok(v)
    }

    /// A file path, relative paths taken from the config's directory. The
    /// file must exist; the recorded value is absolute.
    pub fn path(&self, key: &str) -> Result<PathBuf, CliError> {
        let raw = self.str(key)?;
        let p = Path::new(&raw);
        let p = if p.is_absolute() { p.to_path_buf() } else { self.base_dir.join(p) };
        let abs = p
            .canonicalize()
            .map_err(|e| CliError::Input(format!("{}: {}: {e}", self.where_(key), p.display())))?;
        self.record(key, &abs.display().to_string());
        Ok(abs)
    }

    /// Keys present in the config under `prefix` that the run never read.
    pub fn unused(&self, prefix: &str) -> Vec<String> {
        let used = self.used.borrow();
        self.entries.keys().filter(|k| k.starts_with(prefix) && !used.contains_key(*k)).map(|k| self.where_(k)).collect()
    }

    /// `key = value` lines of everything the run read, sorted by key.
    pub fn resolved(&self) -> String {
        self.used.borrow().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
