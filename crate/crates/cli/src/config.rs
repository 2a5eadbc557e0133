//! Config files: TOML whose keys are flag names.
//!
//! Top-level keys apply to every subcommand that accepts the flag; a table
//! named after a subcommand applies to that subcommand only and wins over
//! top-level keys. Flags given on the command line win over both.
//!
//! ```toml
//! seed = 42
//! classifier = "knn"
//!
//! [sweep-k]
//! ks = [1, 3, 5, 9, 14]
//! folds = 5
//! ```
//!
//! Keys are applied in sorted order. Booleans switch a flag on (`true`) or
//! leave it off (`false`); arrays become comma-separated lists. Underscores
//! in keys are read as dashes.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::CommandFactory;

use crate::{Cli, UsageError};

const CONFIG_FLAG: &str = "--config";

/// Removes `--config FILE` from `args` and splices the file's flags in right
/// after the subcommand name.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut path = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == CONFIG_FLAG {
            let v = it
                .next()
                .ok_or_else(|| UsageError(format!("{CONFIG_FLAG} needs a file path")))?;
            path = Some(v);
        } else if let Some(v) = s.strip_prefix("--config=") {
            path = Some(OsString::from(v));
        } else if s == "--" {
            rest.push(a);
            rest.extend(it.by_ref());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else { return Ok(rest) };

    let Some(pos) = subcommand_position(&rest) else {
        return Ok(rest);
    };
    let sub = rest[pos].to_string_lossy().into_owned();
    let Some(known) = known_flags(&sub) else {
        // Let clap report the unknown subcommand.
        return Ok(rest);
    };
    let given = given_flags(&rest[pos + 1..]);
    let injected = flags_from_file(Path::new(&path), &sub, &known, &given)?;
    rest.splice(pos + 1..pos + 1, injected);
    Ok(rest)
}

/// Long flags already on the command line; the file does not repeat them,
/// which also keeps list flags from accumulating.
fn given_flags(args: &[OsString]) -> BTreeSet<String> {
    args.iter()
        .map(|a| a.to_string_lossy())
        .take_while(|a| a != "--")
        .filter_map(|a| {
            a.strip_prefix("--")
                .map(|f| f.split('=').next().unwrap_or(f).to_owned())
        })
        .collect()
}

fn subcommand_position(args: &[OsString]) -> Option<usize> {
    args.iter()
        .enumerate()
        .skip(1)
        .find(|(_, a)| !a.to_string_lossy().starts_with('-'))
        .map(|(i, _)| i)
}

fn known_flags(sub: &str) -> Option<BTreeSet<String>> {
    let cmd = Cli::command();
    let sc = cmd.find_subcommand(sub)?;
    Some(
        sc.get_arguments()
            .filter_map(|a| a.get_long().map(str::to_owned))
            .collect(),
    )
}

fn flags_from_file(
    path: &Path,
    sub: &str,
    known: &BTreeSet<String>,
    given: &BTreeSet<String>,
) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| UsageError(format!("config {}: {e}", path.display())))?;

    let mut out = Vec::new();
    for (key, value) in &table {
        if value.is_table() {
            continue;
        }
        let flag = key.replace('_', "-");
        // Shared keys only reach subcommands that take them.
        if known.contains(&flag) && !given.contains(&flag) {
            push_flag(&mut out, &flag, value, path)?;
        }
    }
    if let Some(section) = table.get(sub) {
        let Some(section) = section.as_table() else {
            bail!(UsageError(format!(
                "config {}: `{sub}` must be a table",
                path.display()
            )));
        };
        for (key, value) in section {
            let flag = key.replace('_', "-");
            if !known.contains(&flag) {
                bail!(UsageError(format!(
                    "config {}: `{sub}` has no flag --{flag}",
                    path.display()
                )));
            }
            if !given.contains(&flag) {
                push_flag(&mut out, &flag, value, path)?;
            }
        }
    }
    Ok(out)
}

fn push_flag(out: &mut Vec<OsString>, flag: &str, value: &toml::Value, path: &Path) -> Result<()> {
    let scalar = |v: &toml::Value| -> Result<String> {
        Ok(match v {
            toml::Value::String(s) => s.clone(),
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => f.to_string(),
            other => bail!(UsageError(format!(
                "config {}: unsupported value for `{flag}`: {other}",
                path.display()
            ))),
        })
    };
    match value {
        toml::Value::Boolean(true) => out.push(format!("--{flag}").into()),
        toml::Value::Boolean(false) => {}
        toml::Value::Array(items) => {
            let parts = items.iter().map(scalar).collect::<Result<Vec<_>>>()?;
            out.push(format!("--{flag}").into());
            out.push(parts.join(",").into());
        }
        v => {
            out.push(format!("--{flag}").into());
            out.push(scalar(v)?.into());
        }
    }
    Ok(())
}
