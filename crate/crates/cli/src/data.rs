//! Loading corpora, stores and configuration; writing results.

use std::fs;
use std::path::{Path, PathBuf};

use anaphora::corpus::{parse_corpus, Document};
use anaphora::embeddings::{EmbeddingStore, StoreSet};
use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub fn read_corpus(path: &Path) -> Result<Vec<Document>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let docs = parse_corpus(&text).with_context(|| format!("parsing {}", path.display()))?;
    for d in &docs {
        d.validate().with_context(|| format!("{}: document `{}`", path.display(), d.id))?;
    }
    Ok(docs)
}

pub fn read_stores(paths: &[PathBuf]) -> Result<StoreSet> {
    if paths.is_empty() {
        bail!("no embedding manifests given (use --manifests)");
    }
    StoreSet::load(paths).context("loading embedding manifests")
}

/// Documents paired with their stores, in corpus order.
pub fn pair<'a>(docs: &'a [Document], stores: &'a StoreSet) -> Result<Vec<(&'a Document, &'a EmbeddingStore)>> {
    docs.iter().map(|d| Ok((d, stores.get(&d.id)?))).collect()
}

/// Copies every key of `overrides` that `base` knows onto `base`.
fn overlay(base: &mut Value, overrides: Value) {
    if let (Value::Object(b), Value::Object(o)) = (base, overrides) {
        for (k, v) in o {
            if b.contains_key(&k) {
                b.insert(k, v);
            }
        }
    }
}

pub fn read_overrides(path: Option<&Path>) -> Result<Value> {
    match path {
        None => Ok(Value::Object(Default::default())),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            if !v.is_object() {
                bail!("{}: configuration must be a JSON object", p.display());
            }
            Ok(v)
        }
    }
}

/// `base` with the flat keys of the `--config` file applied.
pub fn configure<T: Serialize + DeserializeOwned>(base: &T, path: Option<&Path>) -> Result<T> {
    let mut v = serde_json::to_value(base)?;
    let overrides = read_overrides(path)?;
    if let (Value::Object(b), Value::Object(o)) = (&v, &overrides) {
        for k in o.keys().filter(|k| !b.contains_key(*k)) {
            log::warn!("configuration key `{k}` does not apply here; ignored");
        }
    }
    overlay(&mut v, overrides);
    serde_json::from_value(v).context("invalid configuration")
}

/// Logs the seed and a digest of the effective configuration.
pub fn header(command: &str, seed: u64, config: &impl Serialize) {
    let text = serde_json::to_string(config).expect("configuration serializes");
    let digest = Sha256::digest(text.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    eprintln!("anaphora {command}: seed {seed}, config sha256 {hex}");
}

pub fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
