// SPDX-License-Identifier: Apache-2.0

//! Role directories and the files each party keeps.
//!
//! The owner, the cloud server and the user only communicate through files
//! placed in each other's directories. Everything secret or linkable (keys,
//! T1, alias and block tables) lives under `owner/` or `user/`, sealed where
//! it rests outside the key directories; `cloud/` only ever receives
//! ciphertext tables, encrypted indexes, encrypted blocks, trapdoors and
//! search responses.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use encsearch::seal::{is_sealed, open_json, seal_json, SealKey};
use rand::{CryptoRng, Rng};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::Config;

pub const CONFIG_FILE: &str = "config.toml";

#[derive(Clone, Debug)]
pub struct Workspace {
    pub root: PathBuf,
    pub owner: PathBuf,
    pub cloud: PathBuf,
    pub user: PathBuf,
}

/// Well-known file names, relative to a role directory.
pub mod files {
    pub const HE_PK: &str = "public/he_pk.json";
    pub const HE_SK: &str = "keys/he_sk.json";
    pub const USER_HE_PK: &str = "keys/he_pk.json";
    pub const SKNN_KEY: &str = "keys/sknn_key.json";
    pub const TABLE_KEY: &str = "keys/table.key";
    pub const BLOCK_KEY: &str = "keys/block.key";
    pub const MANIFEST: &str = "manifest.json";
    pub const ONTOLOGY: &str = "ontology.jsonl";
    pub const TITLES: &str = "concept_titles.sealed";
    pub const SSE_SIDECAR: &str = "sse_sidecar.sealed";
    pub const T1: &str = "t1.sealed";
    pub const ALIASES: &str = "aliases.sealed";
    pub const SIIS_PLAIN: &str = "siis_plain.sealed";
    pub const APH_TABLES: &str = "aph_tables.sealed";
    pub const CORRESPONDENCE: &str = "correspondence.sealed";
    pub const FETCH_STATE: &str = "fetch_state.sealed";
    pub const SSE_INDEX: &str = "sse_index.bin";
    pub const T2: &str = "t2.jsonl";
    pub const I1: &str = "i1.jsonl";
    pub const I2: &str = "i2.jsonl";
    pub const BLOCKS: &str = "blocks";
    pub const SSE_TRAPDOOR: &str = "inbox/trapdoor_sse.json";
    pub const SIIS_TRAPDOOR: &str = "inbox/trapdoor_siis.json";
    pub const FETCH_REQUEST: &str = "inbox/fetch_request.json";
    pub const SSE_RESULT: &str = "outbox/sse_result.json";
    pub const SIIS_RESULT: &str = "outbox/siis_result.json";
    pub const FETCH_RESPONSE: &str = "outbox/fetch";
    pub const DOCS: &str = "docs";
}

impl Workspace {
    pub fn at(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
            owner: root.join("owner"),
            cloud: root.join("cloud"),
            user: root.join("user"),
        }
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join(CONFIG_FILE)
    }

    pub fn is_initialized(&self) -> bool {
        self.config_path().exists() || self.owner.exists() || self.cloud.exists() || self.user.exists()
    }

    pub fn config(&self) -> Result<Config> {
        if !self.config_path().exists() {
            bail!("{} is not an initialized workspace (run `init` first)", self.root.display());
        }
        Config::load(&self.config_path())
    }

    pub fn owner_file(&self, name: &str) -> PathBuf {
        self.owner.join(name)
    }

    pub fn cloud_file(&self, name: &str) -> PathBuf {
        self.cloud.join(name)
    }

    pub fn user_file(&self, name: &str) -> PathBuf {
        self.user.join(name)
    }
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, serde_json::to_vec_pretty(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_sealed<T: Serialize, R: Rng + CryptoRng>(
    path: &Path,
    key: &SealKey,
    value: &T,
    rng: &mut R,
) -> Result<()> {
    write_file(path, seal_json(key, value, rng)?)
}

pub fn read_sealed<T: DeserializeOwned>(path: &Path, key: &SealKey) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    open_json(key, &bytes).with_context(|| format!("opening {}", path.display()))
}

/// Seal keys are stored as 64 hex digits.
pub fn write_seal_key(path: &Path, key: &SealKey) -> Result<()> {
    let hex: String = key.as_bytes().iter().map(|b| format!("{b:02x}")).collect();
    write_file(path, hex + "\n")
}

pub fn read_seal_key(path: &Path) -> Result<SealKey> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_seal_key(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn parse_seal_key(bytes: &[u8]) -> Result<SealKey> {
    let text = std::str::from_utf8(bytes)?.trim();
    if text.len() != 64 {
        bail!("expected 64 hex digits");
    }
    let mut key = [0u8; 32];
    for (i, byte) in key.iter_mut().enumerate() {
        *byte = u8::from_str_radix(&text[2 * i..2 * i + 2], 16)?;
    }
    Ok(SealKey::from_bytes(key))
}

/// Writes a JSONL artifact produced by one of the `write_jsonl` methods.
pub fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> encsearch::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    write_file(path, buf)
}

/// Cloud paths that may legitimately exist.
fn allowed_in_cloud(rel: &str) -> bool {
    const EXACT: [&str; 11] = [
        files::HE_PK,
        files::SSE_INDEX,
        files::T2,
        files::I1,
        files::I2,
        files::SSE_TRAPDOOR,
        files::SIIS_TRAPDOOR,
        files::FETCH_REQUEST,
        files::SSE_RESULT,
        files::SIIS_RESULT,
        "public/params.json",
    ];
    if EXACT.contains(&rel) {
        return true;
    }
    for dir in [files::BLOCKS, files::FETCH_RESPONSE] {
        if let Some(name) = rel.strip_prefix(dir).and_then(|r| r.strip_prefix('/')) {
            if let Some(id) = name.strip_suffix(".blk") {
                return !id.is_empty() && id.bytes().all(|b| b.is_ascii_digit());
            }
        }
    }
    false
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if !dir.exists() {
        return Ok(());
    }
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            walk(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// Secret material whose presence anywhere in `cloud/` is a leak.
fn secret_needles(ws: &Workspace) -> Result<Vec<(String, Vec<u8>)>> {
    let mut needles = Vec::new();
    for role in [&ws.owner, &ws.user] {
        let mut paths = Vec::new();
        walk(&role.join("keys"), &mut paths)?;
        for path in paths {
            if path.file_name().and_then(|n| n.to_str()) == Some("he_pk.json") {
                continue;
            }
            let bytes = fs::read(&path)?;
            let label = path.display().to_string();
            needles.push((label.clone(), bytes.clone()));
            if let Ok(key) = parse_seal_key(&bytes) {
                needles.push((label.clone(), key.as_bytes().to_vec()));
            }
            // Distinctive fragments of the secret values themselves.
            if let Ok(value) = serde_json::from_slice::<serde_json::Value>(&bytes) {
                collect_fragments(&value, &label, &mut needles);
            }
        }
    }
    Ok(needles)
}

fn collect_fragments(value: &serde_json::Value, label: &str, out: &mut Vec<(String, Vec<u8>)>) {
    match value {
        serde_json::Value::String(s) if s.len() >= 8 => out.push((label.to_string(), s.as_bytes().to_vec())),
        serde_json::Value::Array(items) if items.len() >= 3 && items.iter().all(|v| v.is_number()) => {
            let head = items.iter().take(3).map(|v| v.to_string()).collect::<Vec<_>>().join(",");
            // Short runs of small numbers occur naturally in public files.
            if head.len() >= 16 {
                out.push((label.to_string(), head.into_bytes()));
            }
        }
        serde_json::Value::Array(items) => items.iter().for_each(|v| collect_fragments(v, label, out)),
        serde_json::Value::Object(map) => map.values().for_each(|v| collect_fragments(v, label, out)),
        _ => {}
    }
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Walks `cloud/` and reports every file that should not be there or that
/// carries secret material. An empty list means the check passed.
pub fn leak_check(ws: &Workspace) -> Result<Vec<String>> {
    let mut violations = Vec::new();
    let mut paths = Vec::new();
    walk(&ws.cloud, &mut paths)?;
    let needles = secret_needles(ws)?;
    for path in paths {
        let rel = path
            .strip_prefix(&ws.cloud)
            .expect("walked under cloud")
            .to_string_lossy()
            .replace('\\', "/");
        if !allowed_in_cloud(&rel) {
            violations.push(format!("{rel}: not an artifact the server may hold"));
            continue;
        }
        let bytes = fs::read(&path)?;
        let is_block = rel.starts_with(files::BLOCKS) || rel.starts_with(files::FETCH_RESPONSE);
        if is_sealed(&bytes) && !is_block {
            violations.push(format!("{rel}: sealed client table found in cloud"));
        }
        if let Some((label, _)) = needles.iter().find(|(_, n)| contains(&bytes, n)) {
            violations.push(format!("{rel}: contains secret material from {label}"));
        }
    }
    Ok(violations)
}
