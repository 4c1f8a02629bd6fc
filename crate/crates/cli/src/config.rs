//! Flat `key = value` experiment files, spliced into argv ahead of the
//! command-line flags so that flags win.

use std::collections::BTreeSet;
use std::fmt;

use clap::Command;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
    /// 1-based column of the value.
    pub column: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn fail<T>(line: usize, column: usize, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line,
        column,
        message: message.into(),
    })
}

/// Parses `key = value` lines. `#` starts a comment; keys may use `_` or
/// `-`; repeated keys keep the last value.
pub fn parse(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("");
        if body.trim().is_empty() {
            continue;
        }
        let Some(eq) = body.find('=') else {
            let col = body.len() - body.trim_start().len() + 1;
            return fail(line, col, "expected `key = value`");
        };
        let key_part = &body[..eq];
        let key = key_part.trim();
        let key_col = key_part.len() - key_part.trim_start().len() + 1;
        if key.is_empty() {
            return fail(line, key_col, "missing key before `=`");
        }
        if let Some(bad) = key.char_indices().find(|(_, c)| !(c.is_ascii_alphanumeric() || *c == '-' || *c == '_')) {
            return fail(line, key_col + bad.0, format!("invalid character `{}` in key", bad.1));
        }
        let value_part = &body[eq + 1..];
        let value = value_part.trim();
        let column = eq + 2 + (value_part.len() - value_part.trim_start().len());
        if value.is_empty() {
            return fail(line, column, format!("missing value for `{key}`"));
        }
        let key = key.replace('_', "-");
        out.retain(|e| e.key != key);
        out.push(Entry {
            key,
            value: value.to_string(),
            line,
            column,
        });
    }
    Ok(out)
}

/// How a config entry maps back to its source position.
#[derive(Clone, Debug)]
pub struct Spliced {
    pub argv: Vec<String>,
    pub origins: Vec<Entry>,
}

/// Removes `--config FILE` from `argv` and inserts the file's entries as
/// `--key=value` right after the subcommand path.
pub fn splice(argv: Vec<String>, root: &Command) -> Result<Spliced, SpliceError> {
    let mut args = argv;
    let mut path: Option<String> = None;
    let mut i = 1;
    while i < args.len() {
        if args[i] == "--config" {
            if i + 1 >= args.len() {
                return Err(SpliceError::Usage("--config requires a file".into()));
            }
            path = Some(args.remove(i + 1));
            args.remove(i);
            continue;
        }
        if let Some(p) = args[i].strip_prefix("--config=") {
            path = Some(p.to_string());
            args.remove(i);
            continue;
        }
        i += 1;
    }
    let Some(path) = path else {
        return Ok(Spliced {
            argv: args,
            origins: Vec::new(),
        });
    };
    let text = std::fs::read_to_string(&path).map_err(|e| SpliceError::Usage(format!("cannot read {path}: {e}")))?;
    let entries = parse(&text).map_err(SpliceError::Config)?;

    // Walk subcommand names to find the leaf and the insertion point.
    let mut cmd = root.clone();
    let mut at = 1;
    let mut scan = 1;
    while scan < args.len() && cmd.has_subcommands() {
        let a = &args[scan];
        if a.starts_with('-') {
            scan += 1;
            if !a.contains('=') && takes_value(&cmd, a) {
                scan += 1;
            }
            continue;
        }
        match cmd.find_subcommand(a) {
            Some(sub) => {
                cmd = sub.clone();
                scan += 1;
                at = scan;
            }
            None => break,
        }
    }
    let at = at.min(args.len());
    let allowed: BTreeSet<String> = cmd
        .get_arguments()
        .chain(root.get_arguments())
        .filter_map(|a| a.get_long().map(str::to_string))
        .filter(|l| l != "config" && l != "emit-config" && l != "help" && l != "version")
        .collect();
    let mut inserted = Vec::with_capacity(entries.len());
    for e in &entries {
        if !allowed.contains(&e.key) {
            return Err(SpliceError::Config(ConfigError {
                line: e.line,
                column: 1,
                message: format!("unknown key `{}` for `{}`", e.key, cmd.get_name()),
            }));
        }
        let arg = cmd
            .get_arguments()
            .chain(root.get_arguments())
            .find(|a| a.get_long() == Some(e.key.as_str()))
            .expect("allowed");
        if !arg.get_action().takes_values() {
            match e.value.as_str() {
                "true" => inserted.push(format!("--{}", e.key)),
                "false" => {}
                _ => {
                    return Err(SpliceError::Config(ConfigError {
                        line: e.line,
                        column: e.column,
                        message: format!("`{}` expects true or false", e.key),
                    }))
                }
            }
        } else {
            inserted.push(format!("--{}={}", e.key, e.value));
        }
    }
    // Flags after the subcommand come later in argv and so override.
    args.splice(at..at, inserted);
    Ok(Spliced { argv: args, origins: entries })
}

fn takes_value(cmd: &Command, flag: &str) -> bool {
    let long = flag.trim_start_matches('-');
    cmd.get_arguments()
        .find(|a| a.get_long() == Some(long))
        .is_some_and(|a| a.get_action().takes_values())
}

#[derive(Debug)]
pub enum SpliceError {
    Usage(String),
    Config(ConfigError),
}

/// Renders a resolved argument struct as a config file.
pub fn emit<S: Serialize>(header: &str, args: &S) -> String {
    let mut out = format!("# {header}\n");
    let value = serde_json::to_value(args).expect("plain data");
    if let serde_json::Value::Object(map) = value {
        for (k, v) in map {
            let rendered = match v {
                serde_json::Value::Null => continue,
                serde_json::Value::Bool(b) => b.to_string(),
                serde_json::Value::String(s) => s,
                serde_json::Value::Array(items) => items
                    .iter()
                    .map(|i| match i {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect::<Vec<_>>()
                    .join(","),
                other => other.to_string(),
            };
            out.push_str(&format!("{k} = {rendered}\n"));
        }
    }
    out
}
