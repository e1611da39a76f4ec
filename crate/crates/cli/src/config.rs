//! Flat `key = value` configuration files and the persisted run config.

use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::exit::Failure;

const SUBCOMMANDS: [&str; 14] = [
    "model-profile",
    "iso1d",
    "mms",
    "gen",
    "l1ot",
    "solve",
    "needles",
    "run",
    "verify",
    "compare",
    "needle-bound",
    "rigidity",
    "diam-gap",
    "delta-cont",
];

const GLOBAL_WITH_VALUE: [&str; 4] = ["--threads", "--seed", "--format", "--output-dir"];

/// Parses `key = value` lines; `#` starts a comment, keys may carry a
/// leading `--`.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, Failure> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("config line {}: expected key = value", i + 1)))?;
        let key = k.trim().trim_start_matches("--").to_string();
        if key.is_empty() {
            return Err(Failure::Usage(format!("config line {}: empty key", i + 1)));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Splices `--config <file>` entries into `argv` ahead of the user's own
/// options so that explicit flags win.
pub fn expand(argv: Vec<String>) -> Result<Vec<String>, Failure> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut file = None;
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            file = Some(it.next().ok_or_else(|| Failure::Usage("--config needs a file".into()))?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            file = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(file) = file else {
        return Ok(rest);
    };
    let text = fs::read_to_string(&file).map_err(|e| Failure::Usage(format!("cannot read config {file}: {e}")))?;
    let entries = parse(&text)?;
    let mut at = 1;
    let mut has_command = false;
    while at < rest.len() {
        let a = rest[at].as_str();
        if GLOBAL_WITH_VALUE.contains(&a) {
            at += 2;
        } else if a.starts_with("--") && GLOBAL_WITH_VALUE.iter().any(|g| a.starts_with(&format!("{g}="))) {
            at += 1;
        } else if SUBCOMMANDS.contains(&a) {
            has_command = true;
            at += 1;
        } else {
            break;
        }
    }
    let at = at.min(rest.len());
    let mut spliced: Vec<String> = Vec::new();
    for (k, v) in &entries {
        if k == "command" {
            if !has_command {
                spliced.extend(v.split_whitespace().map(str::to_string));
            }
        } else {
            spliced.push(format!("--{k}"));
            spliced.push(v.clone());
        }
    }
    if !has_command {
        let command_words = spliced.iter().take_while(|w| !w.starts_with("--")).count();
        let (cmd, flags) = spliced.split_at(command_words);
        let mut out = rest[..at].to_vec();
        out.extend_from_slice(cmd);
        out.extend_from_slice(flags);
        out.extend_from_slice(&rest[at..]);
        return Ok(out);
    }
    let mut out = rest[..at].to_vec();
    out.extend(spliced);
    out.extend_from_slice(&rest[at..]);
    Ok(out)
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        Value::Array(items) => Some(items.iter().filter_map(scalar).collect::<Vec<_>>().join(",")),
        other => Some(other.to_string()),
    }
}

/// Renders the effective configuration in the same format [`parse`] reads.
pub fn render(command: &str, sections: &[Value]) -> String {
    let mut text = format!("command = {command}\n");
    for section in sections {
        if let Value::Object(map) = section {
            for (k, v) in map {
                if let Some(s) = scalar(v) {
                    text.push_str(&format!("{k} = {s}\n"));
                }
            }
        }
    }
    text
}

pub fn write(dir: &Path, command: &str, sections: &[Value]) -> Result<(), Failure> {
    fs::write(dir.join("run.conf"), render(command, sections)).map_err(Failure::io)
}
