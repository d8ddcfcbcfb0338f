//! Config files: a flat JSON or TOML table whose keys are flag names.
//!
//! The file's entries are spliced into the argument list right after the
//! subcommand, so a flag given on the command line replaces the file's.

use std::path::{Path, PathBuf};

use mcdicke::{Error, Result};

/// Flags whose values are paths, resolved against the config file's directory.
const PATH_FLAGS: [&str; 3] = ["model", "out", "input"];

pub const SUBCOMMANDS: [&str; 6] = ["mf-scan", "crit-check", "fluct", "ed", "crit-entropy", "fit"];

fn config_path(args: &[String]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn load(path: &Path) -> Result<serde_json::Map<String, serde_json::Value>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("config {}: {e}", path.display())))?;
    let value: serde_json::Value = match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => {
            let t: toml::Table = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
            serde_json::to_value(t).map_err(|e| Error::Parse(e.to_string()))?
        }
        _ => serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?,
    };
    match value {
        serde_json::Value::Object(m) => Ok(m),
        _ => Err(Error::Parse("config must be a table of flags".into())),
    }
}

fn scalar(key: &str, v: &serde_json::Value, base: &Path) -> Result<String> {
    let s = match v {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Number(n) => n.to_string(),
        _ => return Err(Error::Parse(format!("config key `{key}` has an unsupported value {v}"))),
    };
    if PATH_FLAGS.contains(&key) && Path::new(&s).is_relative() {
        return Ok(base.join(s).to_string_lossy().into_owned());
    }
    Ok(s)
}

/// Expands `--config` into explicit flags.
pub fn expand_args(args: Vec<String>) -> Result<Vec<String>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let table = load(&path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let given = |flag: &str| {
        args.iter()
            .any(|a| a == &format!("--{flag}") || a.starts_with(&format!("--{flag}=")))
    };
    let mut sub_pos = args.iter().position(|a| SUBCOMMANDS.contains(&a.as_str()));
    let mut out = args.clone();
    if sub_pos.is_none() {
        match table.get("subcommand") {
            Some(serde_json::Value::String(s)) if SUBCOMMANDS.contains(&s.as_str()) => {
                out.insert(1, s.clone());
                sub_pos = Some(1);
            }
            Some(v) => return Err(Error::Parse(format!("unknown subcommand {v} in config"))),
            None => return Ok(out),
        }
    }
    let mut extra = Vec::new();
    for (key, v) in &table {
        let flag = key.replace('_', "-");
        if flag == "subcommand" || flag == "config" || given(&flag) {
            continue;
        }
        match v {
            serde_json::Value::Bool(true) => extra.push(format!("--{flag}")),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::Array(items) => {
                for item in items {
                    extra.push(format!("--{flag}"));
                    extra.push(scalar(&flag, item, &base)?);
                }
            }
            _ => {
                extra.push(format!("--{flag}"));
                extra.push(scalar(&flag, v, &base)?);
            }
        }
    }
    let at = sub_pos.expect("subcommand located") + 1;
    out.splice(at..at, extra);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn splices_after_subcommand_and_command_line_wins() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        std::fs::write(&cfg, "model = \"m.json\"\nseed = 7\natoms = [4, 8]\nwant = true\n").unwrap();
        let a = args(&format!("mcdicke ed --config {} --seed 9", cfg.display()));
        let out = expand_args(a).unwrap();
        assert_eq!(out[1], "ed");
        let joined = out.join(" ");
        assert!(joined.contains(&format!("--model {}", dir.path().join("m.json").display())));
        assert!(joined.contains("--atoms 4 --atoms 8"));
        assert!(joined.contains("--want"));
        assert!(!joined.contains("--seed 7"));
        assert!(joined.ends_with("--seed 9"));
    }

    #[test]
    fn subcommand_from_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.json");
        std::fs::write(&cfg, r#"{"subcommand": "fit", "input": ["/abs/a.csv"]}"#).unwrap();
        let out = expand_args(args(&format!("mcdicke --config {}", cfg.display()))).unwrap();
        assert_eq!(&out[1..4], &["fit", "--input", "/abs/a.csv"]);
    }

    #[test]
    fn rejects_non_table() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.json");
        std::fs::write(&cfg, "[1, 2]").unwrap();
        assert!(expand_args(args(&format!("mcdicke ed --config {}", cfg.display()))).is_err());
    }
}
