//! `--config` files: one `key = value` per line, `#` starts a comment.
//! Keys are long flag names. Entries are spliced in front of the command
//! line so explicit flags, parsed later, win.

use std::path::Path;

use clap::Command;

use crate::CliError;

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", n + 1)))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", n + 1)));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Rewrite `args` so entries from a `--config` file precede the explicit
/// flags of the subcommand.
pub fn expand_args(cmd: &Command, args: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(sub_pos) = args.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 1) else {
        return Ok(args);
    };
    let Some(sub) = cmd.find_subcommand(&args[sub_pos]) else {
        return Ok(args);
    };
    let mut path = None;
    let mut rest = Vec::new();
    let mut it = args[sub_pos + 1..].iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or_else(|| CliError::Usage("--config needs a path".into()))?.clone());
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a.clone());
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| CliError::Runtime(format!("cannot read config {path}: {e}")))?;
    let mut out = args[..=sub_pos].to_vec();
    out.push(format!("--config={path}"));
    for (key, value) in parse_config(&text)? {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && key != "config")
            .ok_or_else(|| CliError::Usage(format!("unknown config key `{key}` for {}", sub.get_name())))?;
        if arg.get_action().takes_values() {
            out.push(format!("--{key}={value}"));
        } else {
            match value.as_str() {
                "true" => out.push(format!("--{key}")),
                "false" => {}
                _ => return Err(CliError::Usage(format!("config key `{key}` expects true or false"))),
            }
        }
    }
    out.extend(rest);
    Ok(out)
}
