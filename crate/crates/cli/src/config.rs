//! Key–value run configuration: defaults, then an optional `key = value`
//! file, then command-line flags. The resolved map doubles as the run
//! manifest.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Bumped whenever a CSV column is added, removed or reordered.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settings {
    command: &'static str,
    values: BTreeMap<&'static str, String>,
}

impl Settings {
    pub fn new(command: &'static str, defaults: &[(&'static str, &str)]) -> Self {
        let values = defaults.iter().map(|(k, v)| (*k, v.to_string())).collect();
        Settings { command, values }
    }

    fn key(&self, key: &str) -> Result<&'static str, CliError> {
        self.values
            .keys()
            .find(|k| **k == key)
            .copied()
            .ok_or_else(|| CliError::Usage(format!("unknown key `{key}` for `{}`", self.command)))
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), CliError> {
        let k = self.key(key)?;
        self.values.insert(k, value.into());
        Ok(())
    }

    /// Apply a `key = value` file. Blank lines and `#` comments are skipped;
    /// `command = …` lines (as written into manifests) must match.
    pub fn load_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        self.load_str(&text)
    }

    pub fn load_str(&mut self, text: &str) -> Result<(), CliError> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "command" if v == self.command => {}
                "command" => return Err(CliError::Usage(format!("config is for `{v}`, not `{}`", self.command))),
                "schema_version" => {}
                _ => self.set(k, v)?,
            }
        }
        Ok(())
    }

    /// Overlay flags given on the command line.
    pub fn apply_flags(&mut self, flags: Vec<(&str, Option<String>)>) -> Result<(), CliError> {
        for (k, v) in flags {
            if let Some(v) = v {
                self.set(k, v)?;
            }
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("no key {key}"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let raw = self.raw(key);
        raw.parse().map_err(|e| CliError::Usage(format!("bad value for `{key}`: `{raw}` ({e})")))
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError>
    where
        T::Err: Display,
    {
        let raw = self.raw(key);
        let out: Result<Vec<T>, _> = raw.split(',').map(|s| s.trim().parse::<T>()).collect();
        let out = out.map_err(|e| CliError::Usage(format!("bad value for `{key}`: `{raw}` ({e})")))?;
        if out.is_empty() {
            return Err(CliError::Usage(format!("`{key}` is empty")));
        }
        Ok(out)
    }

    /// `None` for the literal `auto`.
    pub fn get_auto<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        if self.raw(key) == "auto" {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    pub fn manifest(&self) -> String {
        let mut out = format!("# replay with: l1ksvd {} --config <this file>\ncommand = {}\nschema_version = {SCHEMA_VERSION}\n", self.command, self.command);
        for (k, v) in &self.values {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}
