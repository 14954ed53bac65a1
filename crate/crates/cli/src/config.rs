//! `key = value` config files, merged into the command line as long flags.
//! Flags given on the command line win.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Command;

pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let Some((k, v)) = t.split_once('=') else {
            bail!("config line {}: expected `key = value`", i + 1);
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            bail!("config line {}: empty key", i + 1);
        }
        out.push((key, v.trim().to_owned()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

/// Long flags of the subcommand selected by `args` (with the globals), and
/// of the whole command tree.
fn accepted_flags(root: &Command, args: &[OsString]) -> (Vec<String>, Vec<String>) {
    let mut cmd = root;
    for a in args.iter().skip(1) {
        let s = a.to_string_lossy();
        if let Some(sub) = cmd.find_subcommand(s.as_ref()) {
            cmd = sub;
        }
    }
    let longs = |c: &Command| -> Vec<String> { c.get_arguments().filter_map(|a| a.get_long().map(str::to_owned)).collect() };
    let mut everywhere = Vec::new();
    let mut stack = vec![root];
    while let Some(c) = stack.pop() {
        everywhere.extend(longs(c));
        stack.extend(c.get_subcommands());
    }
    let mut here = longs(cmd);
    here.extend(longs(root));
    (here, everywhere)
}

/// Appends config entries as flags unless already given. Keys that no
/// subcommand knows are errors; keys for other subcommands are ignored.
pub fn merge(root: &Command, args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else { return Ok(args) };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let entries = parse(&text)?;
    let (here, everywhere) = accepted_flags(root, &args);
    let given = |flag: &str| {
        args.iter().any(|a| {
            let s = a.to_string_lossy();
            s == flag || s.starts_with(&format!("{flag}="))
        })
    };
    let mut out = args.clone();
    for (key, value) in entries {
        if key == "config" {
            continue;
        }
        if !everywhere.contains(&key) {
            bail!("config {}: unknown key `{key}`", path.display());
        }
        let flag = format!("--{key}");
        if !here.contains(&key) || given(&flag) {
            continue;
        }
        match value.as_str() {
            "true" => out.push(flag.into()),
            "false" => {}
            _ => {
                out.push(flag.into());
                out.extend(value.split_whitespace().map(OsString::from));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::args::Cli;
    use clap::CommandFactory;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_pairs_and_comments() {
        let p = parse("# defaults\nruns = 5\n\nmin_count=3\n").unwrap();
        assert_eq!(p, vec![("runs".into(), "5".into()), ("min-count".into(), "3".into())]);
        assert!(parse("runs 5").is_err());
    }

    #[test]
    fn command_line_wins_and_foreign_keys_are_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.conf");
        std::fs::write(&cfg, "runs = 7\nseed = 3\nepochs = 10\nwindow = 2\nweighted = true\n").unwrap();
        let args = os(&["sinr", "--config", cfg.to_str().unwrap(), "eval", "degree", "--graph", "g", "--seed", "9"]);
        let merged = merge(&Cli::command(), args).unwrap();
        let text: Vec<String> = merged.iter().map(|a| a.to_string_lossy().into_owned()).collect();
        assert!(text.ends_with(&["--runs".into(), "7".into(), "--epochs".into(), "10".into(), "--weighted".into()]));
        assert_eq!(text.iter().filter(|a| *a == "--seed").count(), 1);
        assert!(!text.contains(&"--window".to_owned()));
    }

    #[test]
    fn unknown_key_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.conf");
        std::fs::write(&cfg, "bogus = 1\n").unwrap();
        let args = os(&["sinr", "--config", cfg.to_str().unwrap(), "louvain"]);
        assert!(merge(&Cli::command(), args).is_err());
    }
}
