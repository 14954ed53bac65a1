//! Checksum-verified downloads of public datasets from a user-given mirror.

use std::path::{Component, Path};

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

use crate::args::FetchDatasets;

#[derive(Debug, PartialEq)]
pub struct Entry {
    pub path: String,
    pub url: String,
    pub sha256: String,
}

pub fn parse_manifest(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = t.split_whitespace().collect();
        let [path, url, sha] = f[..] else {
            bail!("manifest line {}: expected `path url sha256`", i + 1);
        };
        if sha.len() != 64 || !sha.bytes().all(|b| b.is_ascii_hexdigit()) {
            bail!("manifest line {}: bad sha256 {sha:?}", i + 1);
        }
        if Path::new(path).components().any(|c| !matches!(c, Component::Normal(_))) {
            bail!("manifest line {}: path must be relative without `..`", i + 1);
        }
        out.push(Entry {
            path: path.to_owned(),
            url: url.to_owned(),
            sha256: sha.to_ascii_lowercase(),
        });
    }
    Ok(out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn resolve(url: &str, mirror: Option<&str>) -> Result<String> {
    if url.contains("://") {
        return Ok(url.to_owned());
    }
    match mirror {
        Some(m) => Ok(format!("{}/{}", m.trim_end_matches('/'), url.trim_start_matches('/'))),
        None => bail!("relative url {url:?} needs --mirror"),
    }
}

fn fetch(url: &str) -> Result<Vec<u8>> {
    if let Some(path) = url.strip_prefix("file://") {
        return std::fs::read(path).with_context(|| format!("reading {path}"));
    }
    let resp = reqwest::blocking::get(url).with_context(|| format!("downloading {url}"))?;
    if !resp.status().is_success() {
        bail!("{url}: HTTP {}", resp.status());
    }
    Ok(resp.bytes()?.to_vec())
}

pub fn run(a: &FetchDatasets) -> Result<()> {
    let text = std::fs::read_to_string(&a.manifest).with_context(|| format!("reading {}", a.manifest.display()))?;
    let entries = parse_manifest(&text)?;
    let mut failed = 0;
    for e in &entries {
        let dest = a.dest.join(&e.path);
        if !a.force {
            if let Ok(existing) = std::fs::read(&dest) {
                if sha256_hex(&existing) == e.sha256 {
                    println!("ok      {}", e.path);
                    continue;
                }
            }
        }
        let url = resolve(&e.url, a.mirror.as_deref())?;
        let result = fetch(&url).and_then(|bytes| {
            let got = sha256_hex(&bytes);
            if got != e.sha256 {
                bail!("checksum mismatch for {}: expected {}, got {got}", e.path, e.sha256);
            }
            if let Some(dir) = dest.parent() {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&dest, &bytes).with_context(|| format!("writing {}", dest.display()))
        });
        match result {
            Ok(()) => println!("fetched {}", e.path),
            Err(err) => {
                eprintln!("failed  {}: {err:#}", e.path);
                failed += 1;
            }
        }
    }
    if failed > 0 {
        bail!("{failed} of {} datasets could not be fetched", entries.len());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const EMPTY_SHA: &str = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855";

    #[test]
    fn manifest_parsing() {
        let m = format!("# comment\ncora/edges.txt\tcora.cites\t{EMPTY_SHA}\n");
        let e = parse_manifest(&m).unwrap();
        assert_eq!(e[0].path, "cora/edges.txt");
        assert!(parse_manifest("a b c").is_err());
        assert!(parse_manifest(&format!("../x u {EMPTY_SHA}")).is_err());
        assert!(parse_manifest(&format!("/x u {EMPTY_SHA}")).is_err());
    }

    #[test]
    fn digest_and_urls() {
        assert_eq!(sha256_hex(b""), EMPTY_SHA);
        assert_eq!(resolve("a/b", Some("http://m/")).unwrap(), "http://m/a/b");
        assert_eq!(resolve("https://x/y", None).unwrap(), "https://x/y");
        assert!(resolve("a", None).is_err());
    }
}
