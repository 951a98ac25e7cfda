// SPDX-License-Identifier: Apache-2.0

//! Access-pattern hiding for document retrieval.
//!
//! Documents are split into fixed-size blocks and every block is encrypted
//! `V` times, so one document can be fetched through `V^β` different version
//! combinations. A fetch also asks for `λ` dummy versions per true block,
//! taken from the true version's group. Groups have `Sz > y + 1` members and
//! never hold two versions of the same document, so dummies always come
//! from other documents (or from filler versions that pad the last groups).
//!
//! The client keeps the block tables (TB, TV, groups) and the data id →
//! alias correspondence; the server only sees version ids and blobs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use num_bigint::BigUint;
use rand::seq::{index, SliceRandom};
use rand::{CryptoRng, Rng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seal::{open_bytes, seal_bytes, SealKey};
use crate::siis::Alias;

pub type BlockId = u64;
pub type VersionId = u64;
pub type GroupId = u32;

const LEN_FIELD: usize = 4;
pub const MIN_BLOCK_SIZE: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scramble {
    pub x: u32,
    pub y: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AphConfig {
    /// Plaintext block size in bytes, length field included.
    pub block_size: usize,
    pub versions: u32,
    /// Dummy blocks per true block are drawn from `]x, y]`; `None` disables
    /// scrambling.
    pub scramble: Option<Scramble>,
}

impl Default for AphConfig {
    fn default() -> Self {
        Self { block_size: 256, versions: 3, scramble: Some(Scramble { x: 1, y: 3 }) }
    }
}

impl AphConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size < MIN_BLOCK_SIZE {
            return Err(Error::Config(format!("block size must be at least {MIN_BLOCK_SIZE} bytes")));
        }
        if self.block_size > u32::MAX as usize {
            return Err(Error::Config("block size does not fit the length field".into()));
        }
        if self.versions == 0 {
            return Err(Error::Config("at least one version per block is required".into()));
        }
        if let Some(s) = self.scramble {
            if s.x >= s.y {
                return Err(Error::Config(format!("scramble bounds need x < y, got ]{}, {}]", s.x, s.y)));
            }
        }
        Ok(())
    }

    /// Group size: the smallest integer above `y + 1`.
    pub fn group_size(&self) -> usize {
        self.scramble.map_or(0, |s| s.y as usize) + 2
    }

    fn payload_capacity(&self) -> usize {
        self.block_size - LEN_FIELD
    }
}

/// Client-side data id → alias map.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceTable(pub BTreeMap<String, Alias>);

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockTables {
    pub versions: u32,
    pub group_size: usize,
    /// TB: alias → (block id, rank), ranks 1..=β.
    pub tb: BTreeMap<Alias, Vec<(BlockId, u32)>>,
    /// TV: block id → its versions.
    pub tv: BTreeMap<BlockId, Vec<VersionId>>,
    pub groups: BTreeMap<GroupId, BTreeSet<VersionId>>,
    pub group_of: BTreeMap<VersionId, GroupId>,
}

impl BlockTables {
    pub fn block_count(&self, alias: Alias) -> Result<usize> {
        self.blocks(alias).map(<[_]>::len)
    }

    pub fn blocks(&self, alias: Alias) -> Result<&[(BlockId, u32)]> {
        self.tb
            .get(&alias)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownDocument(format!("alias {alias}")))
    }

    /// Largest block count of any document.
    pub fn max_blocks(&self) -> usize {
        self.tb.values().map(Vec::len).max().unwrap_or(0)
    }
}

/// Server-side version id → encrypted block.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BlockStore(pub BTreeMap<VersionId, Vec<u8>>);

impl BlockStore {
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (id, blob) in &self.0 {
            fs::write(dir.join(format!("{id}.blk")), blob)?;
        }
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let mut map = BTreeMap::new();
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("blk") {
                continue;
            }
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .and_then(|s| s.parse::<VersionId>().ok())
                .ok_or_else(|| Error::Format(format!("unexpected block file {}", path.display())))?;
            map.insert(id, fs::read(&path)?);
        }
        Ok(Self(map))
    }
}

/// What the server receives: an unordered set of version ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchRequest(pub BTreeSet<VersionId>);

/// Client view of one fetch.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchPlan {
    pub alias: Alias,
    /// Chosen version of every block, in rank order.
    pub true_versions: Vec<VersionId>,
    pub lambda: u32,
    pub request: FetchRequest,
}

impl FetchPlan {
    pub fn dummies(&self) -> impl Iterator<Item = &VersionId> {
        self.request.0.iter().filter(|v| !self.true_versions.contains(v))
    }
}

/// Combinations already used per document; a combination is not reused
/// before all `V^β` of them have been.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FetchState(pub BTreeMap<Alias, BTreeSet<Vec<VersionId>>>);

fn fresh_id<R: Rng + ?Sized>(used: &mut BTreeSet<u64>, rng: &mut R) -> u64 {
    loop {
        let id = rng.gen::<u64>() >> 1;
        if used.insert(id) {
            return id;
        }
    }
}

fn block_payload(chunk: &[u8], block_size: usize) -> Vec<u8> {
    let mut payload = vec![0u8; block_size];
    payload[..LEN_FIELD].copy_from_slice(&(chunk.len() as u32).to_le_bytes());
    payload[LEN_FIELD..LEN_FIELD + chunk.len()].copy_from_slice(chunk);
    payload
}

/// Splits, encrypts and groups the collection.
pub fn aph_prepare<R: Rng + CryptoRng + ?Sized>(
    docs: &[(String, Vec<u8>)],
    aliases: &BTreeMap<String, Alias>,
    config: &AphConfig,
    key: &SealKey,
    rng: &mut R,
) -> Result<(BlockStore, BlockTables, CorrespondenceTable)> {
    config.validate()?;
    let mut ids = BTreeSet::new();
    let mut store = BTreeMap::new();
    let mut tables = BlockTables {
        versions: config.versions,
        group_size: config.group_size(),
        ..BlockTables::default()
    };
    let mut correspondence = CorrespondenceTable::default();
    // Versions per document, for grouping.
    let mut by_doc: Vec<Vec<VersionId>> = Vec::new();

    for (doc_id, bytes) in docs {
        let alias = *aliases.get(doc_id).ok_or_else(|| Error::UnknownDocument(doc_id.clone()))?;
        if correspondence.0.insert(doc_id.clone(), alias).is_some() {
            return Err(Error::DuplicateDocument(doc_id.clone()));
        }
        let chunks: Vec<&[u8]> = if bytes.is_empty() {
            vec![&[][..]]
        } else {
            bytes.chunks(config.payload_capacity()).collect()
        };
        let mut doc_versions = Vec::new();
        let mut rows = Vec::with_capacity(chunks.len());
        for (i, chunk) in chunks.into_iter().enumerate() {
            let block = fresh_id(&mut ids, rng);
            let payload = block_payload(chunk, config.block_size);
            let mut versions = Vec::with_capacity(config.versions as usize);
            for _ in 0..config.versions {
                let v = fresh_id(&mut ids, rng);
                store.insert(v, seal_bytes(key, &payload, rng)?);
                versions.push(v);
            }
            doc_versions.extend(&versions);
            tables.tv.insert(block, versions);
            rows.push((block, i as u32 + 1));
        }
        tables.tb.insert(alias, rows);
        by_doc.push(doc_versions);
    }
    let distinct: BTreeSet<Alias> = correspondence.0.values().copied().collect();
    if distinct.len() != correspondence.0.len() {
        return Err(Error::Config("aliases must be distinct".into()));
    }

    // Striping consecutive versions of one document over G groups puts them
    // in distinct groups as long as no document has more than G versions.
    let sz = config.group_size();
    let total: usize = by_doc.iter().map(Vec::len).sum();
    let widest = by_doc.iter().map(Vec::len).max().unwrap_or(0);
    let group_count = total.div_ceil(sz).max(widest);
    by_doc.shuffle(rng);
    let mut groups: Vec<BTreeSet<VersionId>> = vec![BTreeSet::new(); group_count];
    let mut i = 0;
    for versions in &mut by_doc {
        versions.shuffle(rng);
        for v in versions.iter() {
            groups[i % group_count].insert(*v);
            i += 1;
        }
    }
    // Fillers: random-content blocks nobody owns, so every group is full.
    let filler = vec![0u8; config.block_size];
    for group in &mut groups {
        while group.len() < sz {
            let v = fresh_id(&mut ids, rng);
            let mut payload = filler.clone();
            rng.fill_bytes(&mut payload[LEN_FIELD..]);
            store.insert(v, seal_bytes(key, &payload, rng)?);
            group.insert(v);
        }
    }
    groups.shuffle(rng);
    for (g, members) in groups.into_iter().enumerate() {
        for v in &members {
            tables.group_of.insert(*v, g as GroupId);
        }
        tables.groups.insert(g as GroupId, members);
    }
    Ok((BlockStore(store), tables, correspondence))
}

/// Number of distinct true-version combinations of a document: `V^β`.
pub fn theta1(tables: &BlockTables, alias: Alias) -> Result<BigUint> {
    let beta = tables.block_count(alias)?;
    Ok(BigUint::from(tables.versions).pow(beta as u32))
}

/// Chooses true versions (never repeating a combination before all of them
/// were used) and `λ` dummies per block from the matching groups.
pub fn build_fetch<R: Rng + ?Sized>(
    alias: Alias,
    tables: &BlockTables,
    scramble: Option<Scramble>,
    state: &mut FetchState,
    rng: &mut R,
) -> Result<FetchPlan> {
    let blocks = tables.blocks(alias)?;
    let theta = theta1(tables, alias)?;
    let used = state.0.entry(alias).or_default();
    if BigUint::from(used.len()) >= theta {
        used.clear();
    }
    let true_versions = loop {
        let pick: Vec<VersionId> = blocks
            .iter()
            .map(|(b, _)| *tables.tv[b].choose(rng).expect("every block has a version"))
            .collect();
        if used.insert(pick.clone()) {
            break pick;
        }
    };

    let lambda = match scramble {
        Some(s) => {
            if s.x >= s.y {
                return Err(Error::Config("scramble bounds need x < y".into()));
            }
            rng.gen_range(s.x + 1..=s.y)
        }
        None => 0,
    };
    let mut request: BTreeSet<VersionId> = true_versions.iter().copied().collect();
    for v in &true_versions {
        let group = &tables.groups[&tables.group_of[v]];
        let others: Vec<VersionId> = group.iter().copied().filter(|o| o != v).collect();
        assert!(
            others.len() >= lambda as usize,
            "group of {} members cannot supply {lambda} dummies",
            group.len()
        );
        for i in index::sample(rng, others.len(), lambda as usize) {
            request.insert(others[i]);
        }
    }
    Ok(FetchPlan { alias, true_versions, lambda, request: FetchRequest(request) })
}

/// Every dummy shares a group with one of the true versions, and the
/// request has exactly `λ · β` dummies.
pub fn request_respects_groups(plan: &FetchPlan, tables: &BlockTables) -> bool {
    let true_groups: BTreeSet<GroupId> =
        plan.true_versions.iter().filter_map(|v| tables.group_of.get(v)).copied().collect();
    let dummies: Vec<&VersionId> = plan.dummies().collect();
    dummies.len() == plan.lambda as usize * plan.true_versions.len()
        && dummies.iter().all(|d| tables.group_of.get(d).is_some_and(|g| true_groups.contains(g)))
}

pub fn serve_fetch(store: &BlockStore, request: &FetchRequest) -> Result<BTreeMap<VersionId, Vec<u8>>> {
    request
        .0
        .iter()
        .map(|v| {
            store
                .0
                .get(v)
                .map(|blob| (*v, blob.clone()))
                .ok_or_else(|| Error::NotFound(format!("version {v}")))
        })
        .collect()
}

/// Same as [`serve_fetch`] against a directory of `<version_id>.blk` files.
pub fn serve_fetch_dir(dir: &Path, request: &FetchRequest) -> Result<BTreeMap<VersionId, Vec<u8>>> {
    request
        .0
        .iter()
        .map(|v| {
            let path = dir.join(format!("{v}.blk"));
            fs::read(&path)
                .map(|blob| (*v, blob))
                .map_err(|_| Error::NotFound(format!("version {v}")))
        })
        .collect()
}

/// Drops dummies, decrypts the true versions and concatenates them by rank.
pub fn reconstruct(
    true_versions: &[VersionId],
    blobs: &BTreeMap<VersionId, Vec<u8>>,
    key: &SealKey,
) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for v in true_versions {
        let blob = blobs.get(v).ok_or_else(|| Error::NotFound(format!("version {v}")))?;
        let payload = open_bytes(key, blob)?;
        let len = u32::from_le_bytes(payload[..LEN_FIELD].try_into().expect("length field")) as usize;
        let data = payload
            .get(LEN_FIELD..LEN_FIELD + len)
            .ok_or_else(|| Error::Format("block length field exceeds payload".into()))?;
        out.extend_from_slice(data);
    }
    Ok(out)
}

/// Public knowledge the simulated server uses to interpret a trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AdversaryModel {
    pub max_beta: usize,
    pub scramble: Option<Scramble>,
}

impl AdversaryModel {
    /// Whether a request of `size` versions can hold `beta` true blocks.
    fn feasible(&self, size: usize, beta: usize) -> bool {
        match self.scramble {
            None => size == beta,
            Some(s) => (s.x + 1..=s.y).any(|l| size == beta * (1 + l as usize)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinkFlag {
    pub first: usize,
    pub second: usize,
    pub common: BTreeSet<VersionId>,
}

/// Exact-repetition matcher: flags a pair of requests whose common version
/// set is small enough to be a document and fits both request sizes.
pub fn adversary_link(trace: &[FetchRequest], model: &AdversaryModel) -> Vec<LinkFlag> {
    let mut flags = Vec::new();
    for j in 1..trace.len() {
        for i in 0..j {
            let common: BTreeSet<VersionId> = trace[i].0.intersection(&trace[j].0).copied().collect();
            let beta = common.len();
            if beta > 0
                && beta <= model.max_beta
                && model.feasible(trace[i].0.len(), beta)
                && model.feasible(trace[j].0.len(), beta)
            {
                flags.push(LinkFlag { first: i, second: j, common });
            }
        }
    }
    flags
}

/// Share of flags whose common set is exactly the true version set of both
/// requests; 0 when nothing was flagged.
pub fn link_precision(flags: &[LinkFlag], plans: &[FetchPlan]) -> f64 {
    if flags.is_empty() {
        return 0.0;
    }
    let correct = flags
        .iter()
        .filter(|f| {
            let a: BTreeSet<VersionId> = plans[f.first].true_versions.iter().copied().collect();
            let b: BTreeSet<VersionId> = plans[f.second].true_versions.iter().copied().collect();
            plans[f.first].alias == plans[f.second].alias && a == b && f.common == a
        })
        .count();
    correct as f64 / flags.len() as f64
}
