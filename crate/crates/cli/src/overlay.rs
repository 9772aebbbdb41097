//! `--config` files: one `flag=value` per line, `#` comments. Flags named
//! on the command line take precedence. `flag=true` sets a switch,
//! `flag=false` leaves it off; repeating a key repeats the flag.

use std::ffi::OsString;
use std::path::PathBuf;

use crate::error::CliError;

fn config_path(argv: &[OsString]) -> Result<Option<PathBuf>, CliError> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let a = a.to_string_lossy();
        if a == "--config" {
            return match it.next() {
                Some(p) => Ok(Some(PathBuf::from(p))),
                None => Err(CliError::usage("--config needs a path")),
            };
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Ok(Some(PathBuf::from(p)));
        }
    }
    Ok(None)
}

pub fn parse(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut entries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::usage(format!("config line {}: expected key=value", n + 1)));
        };
        let k = k.trim();
        if k.is_empty() || !k.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-') || k == "config" {
            return Err(CliError::usage(format!("config line {}: invalid key {k:?}", n + 1)));
        }
        entries.push((k.to_string(), v.trim().to_string()));
    }
    Ok(entries)
}

fn on_command_line(argv: &[OsString], key: &str) -> bool {
    let flag = format!("--{key}");
    let with_value = format!("--{key}=");
    argv.iter().any(|a| {
        let a = a.to_string_lossy();
        a == flag || a.starts_with(&with_value)
    })
}

/// Appends config-file flags that the command line does not already set.
pub fn apply(mut argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&argv)? else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let explicit: Vec<OsString> = argv.clone();
    for (k, v) in parse(&text)? {
        if on_command_line(&explicit, &k) {
            continue;
        }
        match v.as_str() {
            "true" => argv.push(format!("--{k}").into()),
            "false" => {}
            _ => {
                argv.push(format!("--{k}").into());
                argv.push(v.into());
            }
        }
    }
    Ok(argv)
}
