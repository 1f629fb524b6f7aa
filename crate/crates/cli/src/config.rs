//! `key = value` configuration files. Entries become flags placed right after
//! the subcommand, so flags given on the command line take precedence.

use crate::error::{CliError, CliResult};
use clap::{ArgAction, Command};
use std::ffi::OsString;
use std::path::Path;

pub fn parse_config(text: &str, source: &Path) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("{}:{}: expected key = value", source.display(), i + 1)));
        };
        let key = key.trim().trim_start_matches("--");
        if key.is_empty() {
            return Err(CliError::Usage(format!("{}:{}: empty key", source.display(), i + 1)));
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Removes `--config FILE` from `args` and splices the file's entries in
/// after the subcommand name. Keys unknown to the chosen subcommand are
/// ignored unless no subcommand accepts them.
pub fn expand_args(mut args: Vec<OsString>, cmd: &Command) -> CliResult<Vec<OsString>> {
    let mut path = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy().into_owned();
        if a == "--config" {
            if i + 1 >= args.len() {
                return Err(CliError::Usage("--config needs a file".into()));
            }
            path = Some(OsString::from(args.remove(i + 1)));
            args.remove(i);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(OsString::from(p));
            args.remove(i);
        } else {
            i += 1;
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let entries = parse_config(&text, path)?;
    let Some(pos) = args.iter().position(|a| cmd.find_subcommand(a.to_string_lossy().as_ref()).is_some()) else {
        return Ok(args);
    };
    let sub = cmd.find_subcommand(args[pos].to_string_lossy().as_ref()).expect("found above");
    let mut extra = Vec::new();
    for (key, value) in entries {
        let arg = sub.get_arguments().find(|a| a.get_long() == Some(key.as_str()));
        match arg {
            Some(arg) if matches!(arg.get_action(), ArgAction::SetTrue) => {
                match value.to_ascii_lowercase().as_str() {
                    "true" | "yes" | "1" => extra.push(OsString::from(format!("--{key}"))),
                    "false" | "no" | "0" => {}
                    _ => return Err(CliError::Usage(format!("config key '{key}' expects true or false"))),
                }
            }
            Some(_) => extra.push(OsString::from(format!("--{key}={value}"))),
            None => {
                let known = cmd.get_subcommands().any(|s| s.get_arguments().any(|a| a.get_long() == Some(key.as_str())));
                if !known {
                    return Err(CliError::Usage(format!("unknown config key '{key}'")));
                }
            }
        }
    }
    let tail = args.split_off(pos + 1);
    args.extend(extra);
    args.extend(tail);
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_comments() {
        let entries = parse_config("# run\nfamily = poisson\n\nK=10 # folds\n", Path::new("c")).unwrap();
        assert_eq!(entries, vec![("family".into(), "poisson".into()), ("K".into(), "10".into())]);
        assert!(parse_config("family poisson\n", Path::new("c")).is_err());
    }
}
