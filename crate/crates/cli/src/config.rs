//! Optional `key=value` config files. Keys are long flag names; the values
//! are spliced into the argument list unless the flag was given explicitly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::CliError;

/// Globals that take a value, so the scanner can skip it.
const VALUE_GLOBALS: &[&str] = &["--config", "--threads", "--format", "--manifest"];
const SUBCOMMANDS: &[&str] = &["census", "matrix", "bound", "mc", "decompose"];

pub fn parse(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value, got {line:?}", i + 1)))?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(CliError::Usage(format!("config line {}: bad key {:?}", i + 1, k.trim())));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

/// Value of `--config`, if present.
pub fn config_path(args: &[String]) -> Option<&str> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().map(String::as_str);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p);
        }
    }
    None
}

pub fn load(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    parse(&text)
}

fn given(args: &[String], key: &str) -> bool {
    let flag = format!("--{key}");
    let prefixed = format!("{flag}=");
    args.iter().any(|a| *a == flag || a.starts_with(&prefixed))
}

/// Inserts config entries right after the subcommand name, skipping keys the
/// command line already sets. `true`/`false` values toggle switches.
pub fn merge(args: &[String], config: &BTreeMap<String, String>) -> Vec<String> {
    let mut pos = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].as_str();
        if VALUE_GLOBALS.contains(&a) {
            i += 2;
            continue;
        }
        if SUBCOMMANDS.contains(&a) {
            pos = Some(i + 1);
            break;
        }
        i += 1;
    }
    let Some(pos) = pos else { return args.to_vec() };
    let mut extra = Vec::new();
    for (k, v) in config {
        if given(args, k) {
            continue;
        }
        match v.as_str() {
            "true" => extra.push(format!("--{k}")),
            "false" => {}
            _ => {
                extra.push(format!("--{k}"));
                extra.push(v.clone());
            }
        }
    }
    let mut out = args[..pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[pos..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn parses_comments_and_underscores() {
        let c = parse("# sweep\nmax_size = 4\n\nformat=json\n").unwrap();
        assert_eq!(c["max-size"], "4");
        assert_eq!(c["format"], "json");
        assert!(parse("oops").is_err());
    }

    #[test]
    fn flags_win() {
        let c = parse("c=0.5\ntrials=10\nthreshold-only=true\nverbose=false").unwrap();
        let merged = merge(&argv("hexperc --threads 2 mc --c 0.7"), &c);
        assert_eq!(merged, argv("hexperc --threads 2 mc --threshold-only --trials 10 --c 0.7"));
        let merged = merge(&argv("hexperc mc --c=0.7"), &c);
        assert!(!merged.contains(&"0.5".to_string()));
    }

    #[test]
    fn finds_config_path() {
        assert_eq!(config_path(&argv("hexperc --config a.cfg mc")), Some("a.cfg"));
        assert_eq!(config_path(&argv("hexperc mc --config=b.cfg")), Some("b.cfg"));
        assert_eq!(config_path(&argv("hexperc mc")), None);
    }
}
