//! `key=value` config files. Blank lines and lines starting with `#` are
//! skipped, so the `# key=value` header of any output file, with the `# `
//! prefix removed, is itself a valid config.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use crate::CliError;

pub fn read(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text).map_err(|msg| CliError::Usage(format!("{}: {msg}", path.display())))
}

pub fn parse(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value, got {line:?}", n + 1))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || k.starts_with('-') {
            return Err(format!("line {}: bad key {k:?}", n + 1));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Insert the config entries as `--key=value` right after the subcommand so
/// that later command-line flags override them. A `command` entry must name
/// the subcommand being run and is otherwise dropped.
pub fn inject(argv: &[OsString], subcommand: &str, entries: &[(String, String)]) -> Result<Vec<OsString>, CliError> {
    let pos = argv
        .iter()
        .skip(1)
        .position(|a| a == subcommand)
        .map(|p| p + 2)
        .ok_or_else(|| CliError::Usage(format!("subcommand {subcommand} not found in arguments")))?;
    let mut extra = Vec::new();
    for (k, v) in entries {
        if k == "command" {
            if v != subcommand {
                return Err(CliError::Usage(format!("config is for `{v}`, not `{subcommand}`")));
            }
            continue;
        }
        if k == "config" {
            return Err(CliError::Usage("config files cannot include other config files".into()));
        }
        extra.push(OsString::from(format!("--{k}={v}")));
    }
    let mut out = argv[..pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[pos..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_skips_comments() {
        let e = parse("# command=simulate\n\ntau = 0.2\nJ=3\n").unwrap();
        assert_eq!(e, vec![("tau".into(), "0.2".into()), ("J".into(), "3".into())]);
        assert!(parse("tau 0.2").is_err());
        assert!(parse("=1").is_err());
    }

    #[test]
    fn injects_after_subcommand() {
        let argv: Vec<OsString> = ["canard", "--config", "c", "simulate", "--tau", "0.1"]
            .iter()
            .map(OsString::from)
            .collect();
        let out = inject(&argv, "simulate", &[("tau".into(), "0.2".into()), ("command".into(), "simulate".into())]).unwrap();
        let s: Vec<_> = out.iter().map(|a| a.to_str().unwrap()).collect();
        assert_eq!(s, ["canard", "--config", "c", "simulate", "--tau=0.2", "--tau", "0.1"]);
        assert!(inject(&argv, "simulate", &[("command".into(), "rates".into())]).is_err());
    }
}
