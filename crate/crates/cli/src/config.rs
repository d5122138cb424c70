//! `key = value` config files.
//!
//! Entries become `--key value` flags inserted right after the subcommand,
//! ahead of the user's own flags; since later occurrences win, explicit
//! flags override the file.

use std::fs;
use std::path::Path;

use clap::CommandFactory;

use crate::{Cli, Failure};

/// Parse `key = value` lines; `#` starts a comment.
pub fn parse(text: &str, path: &Path) -> Result<Vec<(String, String)>, Failure> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Failure::usage(format!(
                "{}:{}: expected `key = value`",
                path.display(),
                i + 1
            ))
        })?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(Failure::usage(format!(
                "{}:{}: empty key",
                path.display(),
                i + 1
            )));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

fn take_config_flag(argv: &mut Vec<String>) -> Result<Option<String>, Failure> {
    let mut i = 1;
    while i < argv.len() {
        if argv[i] == "--config" {
            if i + 1 >= argv.len() {
                return Err(Failure::usage("--config needs a file path"));
            }
            let path = argv.remove(i + 1);
            argv.remove(i);
            return Ok(Some(path));
        }
        if let Some(path) = argv[i].strip_prefix("--config=") {
            let path = path.to_string();
            argv.remove(i);
            return Ok(Some(path));
        }
        i += 1;
    }
    Ok(None)
}

/// Return `argv` with the config file's entries spliced in as flags.
pub fn expand(mut argv: Vec<String>) -> Result<Vec<String>, Failure> {
    let Some(path) = take_config_flag(&mut argv)? else {
        return Ok(argv);
    };
    let path = Path::new(&path);
    let text =
        fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let entries = parse(&text, path)?;

    let mut cmd = Cli::command();
    // Arity and actions are only resolved once the command is built.
    cmd.build();
    let Some(pos) = argv
        .iter()
        .skip(1)
        .position(|a| cmd.find_subcommand(a).is_some())
        .map(|p| p + 1)
    else {
        // No subcommand: let clap report the usage error.
        return Ok(argv);
    };
    let sub = cmd.find_subcommand(&argv[pos]).expect("found above");
    let all_known: Vec<String> = cmd
        .get_subcommands()
        .flat_map(|s| {
            s.get_arguments()
                .filter_map(|a| a.get_long().map(str::to_owned))
        })
        .collect();

    let mut injected = Vec::new();
    for (key, value) in entries {
        let Some(arg) = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
        else {
            if all_known.contains(&key) {
                continue; // meant for another subcommand
            }
            return Err(Failure::usage(format!(
                "{}: unknown key `{key}`",
                path.display()
            )));
        };
        let takes_value = arg.get_action().takes_values();
        if takes_value {
            injected.push(format!("--{key}={value}"));
        } else {
            match value.as_str() {
                "true" | "yes" | "1" => injected.push(format!("--{key}")),
                "false" | "no" | "0" => {}
                _ => {
                    return Err(Failure::usage(format!(
                        "{}: `{key}` expects true or false, got `{value}`",
                        path.display()
                    )))
                }
            }
        }
    }
    argv.splice(pos + 1..pos + 1, injected);
    Ok(argv)
}
