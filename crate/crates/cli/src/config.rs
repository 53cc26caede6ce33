//! `key=value` configuration files merged into the argument list.
//!
//! Keys are long option names without the leading dashes. File values are
//! inserted right after the subcommand, so flags given on the command line
//! (which come later) override them.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Parses a configuration file body into `--key=value` tokens.
pub fn parse(body: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for (lineno, raw) in body.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected key=value, got `{}`", lineno + 1, raw.trim());
        };
        let key = key.trim().trim_start_matches("--");
        let value = value.trim();
        if key.is_empty() || key == "config" {
            bail!("line {}: invalid key `{key}`", lineno + 1);
        }
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            _ => out.push(format!("--{key}={value}")),
        }
    }
    Ok(out)
}

/// Removes `--config <path>` / `--config=<path>` from `args` and splices the
/// file's options in after the subcommand token.
pub fn expand(args: Vec<String>, subcommands: &[&str]) -> Result<Vec<String>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut path = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().context("--config needs a path")?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let body = fs::read_to_string(Path::new(&path)).with_context(|| format!("reading config file {path}"))?;
    let extra = parse(&body).with_context(|| format!("in config file {path}"))?;
    let at = rest
        .iter()
        .skip(1)
        .position(|a| subcommands.contains(&a.as_str()))
        .map(|i| i + 2)
        .context("a config file needs a subcommand on the command line")?;
    rest.splice(at..at, extra);
    Ok(rest)
}
