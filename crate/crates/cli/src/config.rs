//! Optional `key=value` run configuration. Entries use the long flag
//! names and override whatever the command line said, so a checked-in
//! config file pins a reproduction exactly.

use std::path::Path;
use std::str::FromStr;

/// A type whose fields can be overridden by config entries. `set`
/// returns Ok(false) when the key belongs to some other struct.
pub trait Overridable {
    fn set(&mut self, key: &str, value: &str) -> Result<bool, String>;
}

pub fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| format!("config key '{key}': bad value '{value}': {e}"))
}

/// Read `path` and apply every entry to `target`, rejecting unknown keys.
pub fn apply_file(path: &Path, target: &mut dyn Overridable) -> Result<(), String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("reading config {}: {e}", path.display()))?;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            format!(
                "config {} line {}: expected key=value, got '{line}'",
                path.display(),
                idx + 1
            )
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !target.set(key, value)? {
            return Err(format!(
                "config {} line {}: unknown key '{key}'",
                path.display(),
                idx + 1
            ));
        }
    }
    Ok(())
}
