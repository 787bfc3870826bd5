//! Flat `key = value` configuration files with one section per subcommand.
//!
//! Keys before the first `[section]` header apply to every subcommand that
//! understands them; keys inside a section apply to that subcommand only.
//! Command-line flags always win over file values. The writer emits a
//! canonical form (one section, sorted keys) that re-parses to an
//! equivalent invocation, and that same text is what the config hash in
//! output headers is computed over.

use std::collections::BTreeMap;

/// Every key a config file may set, one per command-line flag. The meta
/// flags `--config` and `--emit-config` are deliberately absent: a file
/// cannot pull in another file or ask for itself to be rewritten.
pub const KNOWN_KEYS: [&str; 18] = [
    "M",
    "alpha",
    "b",
    "builder",
    "domain",
    "dump-trials",
    "eps-miss",
    "epsilon",
    "file",
    "format",
    "model",
    "out",
    "rho",
    "rho-grid",
    "seed",
    "sigma",
    "trials",
    "workers",
];

pub const SECTIONS: [&str; 5] = ["chenstein", "simulate", "sweep", "theory", "validate-model"];

/// Parsed form of a configuration file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub global: BTreeMap<String, String>,
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl ConfigFile {
    /// Global keys overlaid by the section for `subcommand`.
    pub fn effective(&self, subcommand: &str) -> BTreeMap<String, String> {
        let mut merged = self.global.clone();
        if let Some(section) = self.sections.get(subcommand) {
            for (k, v) in section {
                merged.insert(k.clone(), v.clone());
            }
        }
        merged
    }
}

/// Parses the flat format. Error strings name the offending line; the
/// caller attaches the file path.
pub fn parse_config(text: &str) -> Result<ConfigFile, String> {
    let mut out = ConfigFile::default();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| format!("line {lineno}: unterminated section header `{line}`"))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(format!(
                    "line {lineno}: unknown section `[{name}]`; sections are {}",
                    SECTIONS.join(", ")
                ));
            }
            out.sections.entry(name.to_string()).or_default();
            current = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {lineno}: expected `key = value`, got `{line}`"))?;
        let key = key.trim();
        let value = value.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(format!("line {lineno}: unknown key `{key}`"));
        }
        if value.is_empty() {
            return Err(format!("line {lineno}: key `{key}` has an empty value"));
        }
        let scope = match &current {
            Some(name) => out.sections.get_mut(name).expect("section exists"),
            None => &mut out.global,
        };
        if scope.insert(key.to_string(), value.to_string()).is_some() {
            return Err(format!("line {lineno}: key `{key}` set twice in one scope"));
        }
    }
    Ok(out)
}

/// Canonical text for one invocation: a single section holding every
/// effective key in sorted order.
pub fn render_config(subcommand: &str, effective: &BTreeMap<String, String>) -> String {
    let mut out = String::from("# effective configuration\n");
    out.push_str(&format!("[{subcommand}]\n"));
    for (k, v) in effective {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}
