// SPDX-License-Identifier: Apache-2.0

//! Secure inverted index scheme.
//!
//! Scores are never encrypted per posting. The owner instead precomputes a
//! fixed pool of homomorphic ciphertexts for every score of the interval
//! `[0, inv_max]` (table T2, addressed by random ids) and keeps the mapping
//! score → ids private (table T1). Index postings only carry ids, so index
//! size depends on the number of postings while ciphertext storage depends
//! only on the table parameters.
//!
//! I1 maps a concept to `(alias, primary id, secondary id)` postings, mixed
//! with dummy documents whose ids point at encryptions of zero. I2 maps a
//! user to `(alias, access id)` postings: accessible documents get a random
//! positive access score, dummies get zero. The server combines both with
//! additive homomorphism and the client drops everything that decrypts to
//! zero.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write};

use num_bigint::BigUint;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::he::{he_add, he_dec_u64, he_enc, he_mul_plain, HeCiphertext, HePublicKey, HeSecretKey};
use crate::ontology::{dsw_concepts, ConceptId, ConceptInvertedIndex, ConceptVector};
use crate::sse::{query_term_vector, IndexSidecar};
use crate::textindex::StopList;

pub type CtId = u64;
pub type Alias = u32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiisConfig {
    /// Upper end of the score interval `[0, inv_max]`.
    pub inv_max: u32,
    /// Ciphertexts per nonzero score.
    pub nc: usize,
    /// Security level, 1 to 10.
    pub k_security: u32,
    /// Concepts kept per document.
    pub x_concepts: usize,
    /// Test hook: build without dummy postings.
    pub dummies_enabled: bool,
}

impl Default for SiisConfig {
    fn default() -> Self {
        Self { inv_max: 100, nc: 20, k_security: 10, x_concepts: 20, dummies_enabled: true }
    }
}

impl SiisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=10).contains(&self.k_security) {
            return Err(Error::Domain(format!("K must lie in [1, 10], got {}", self.k_security)));
        }
        if self.nc == 0 {
            return Err(Error::Config("NC must be at least 1".into()));
        }
        if self.inv_max == 0 {
            return Err(Error::Config("the score interval must contain a positive score".into()));
        }
        if self.x_concepts == 0 {
            return Err(Error::Config("X must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of scores in the interval.
    pub fn ns(&self) -> usize {
        self.inv_max as usize + 1
    }
}

/// Ciphertexts of zero: `floor(NC · NS · K / 20)`.
pub fn zero_pool_size(nc: usize, ns: usize, k: u32) -> usize {
    nc * ns * k as usize / 20
}

/// Owner table: score → ciphertext ids.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTableOwner(pub BTreeMap<u32, Vec<CtId>>);

/// Server table: ciphertext id → ciphertext.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTableServer(pub BTreeMap<CtId, HeCiphertext>);

impl ScoreTableOwner {
    /// A uniformly chosen ciphertext id for `score`.
    pub fn pick<R: Rng + ?Sized>(&self, score: u32, rng: &mut R) -> Result<CtId> {
        self.0
            .get(&score)
            .and_then(|ids| ids.choose(rng))
            .copied()
            .ok_or_else(|| Error::Domain(format!("score {score} is outside the table")))
    }

    pub fn score_of(&self, id: CtId) -> Option<u32> {
        self.0.iter().find(|(_, ids)| ids.contains(&id)).map(|(s, _)| *s)
    }

    pub fn inv_max(&self) -> u32 {
        self.0.keys().next_back().copied().unwrap_or(0)
    }
}

impl ScoreTableServer {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, id: CtId) -> Result<&HeCiphertext> {
        self.0.get(&id).ok_or_else(|| Error::NotFound(format!("ciphertext id {id}")))
    }

    /// Stored size: an 8-byte id plus a fixed-width ciphertext per entry.
    pub fn byte_size(&self, pk: &HePublicKey) -> usize {
        self.0.len() * (8 + pk.ciphertext_bytes())
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for (id, ct) in &self.0 {
            serde_json::to_writer(&mut w, &T2Line { id: *id, ct: ct.clone() })?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: Read>(r: R) -> Result<Self> {
        let mut map = BTreeMap::new();
        for line in nonblank_lines(r) {
            let entry: T2Line = serde_json::from_str(&line?)?;
            map.insert(entry.id, entry.ct);
        }
        Ok(Self(map))
    }
}

#[derive(Serialize, Deserialize)]
struct T2Line {
    id: CtId,
    ct: HeCiphertext,
}

fn nonblank_lines<R: Read>(r: R) -> impl Iterator<Item = std::io::Result<String>> {
    BufReader::new(r)
        .lines()
        .filter(|l| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true))
}

/// Generates both score tables. Ids are a random permutation of
/// `0..total`; ciphertexts are produced in parallel from per-item seeds.
pub fn tabgen<R: Rng + ?Sized>(
    pk: &HePublicKey,
    inv_max: u32,
    nc: usize,
    k: u32,
    rng: &mut R,
) -> Result<(ScoreTableOwner, ScoreTableServer)> {
    SiisConfig { inv_max, nc, k_security: k, ..SiisConfig::default() }.validate()?;
    let ns = inv_max as usize + 1;
    let zeros = zero_pool_size(nc, ns, k);
    let total = zeros + nc * (ns - 1);
    let mut ids: Vec<CtId> = (0..total as CtId).collect();
    ids.shuffle(rng);

    let mut owner = BTreeMap::new();
    let mut jobs: Vec<(CtId, u32, [u8; 32])> = Vec::with_capacity(total);
    let mut next = ids.into_iter();
    for score in 0..=inv_max {
        let count = if score == 0 { zeros } else { nc };
        let owned: Vec<CtId> = next.by_ref().take(count).collect();
        for id in &owned {
            jobs.push((*id, score, rng.gen()));
        }
        owner.insert(score, owned);
    }
    let pk = pk.clone().prepared();
    let cts = exec::map_slice(&jobs, |(id, score, seed)| -> Result<(CtId, HeCiphertext)> {
        let mut item_rng = ChaCha20Rng::from_seed(*seed);
        Ok((*id, he_enc(&pk, &BigUint::from(*score), &mut item_rng)?))
    })
    .into_iter()
    .collect::<Result<BTreeMap<_, _>>>()?;
    Ok((ScoreTableOwner(owner), ScoreTableServer(cts)))
}

/// Dummy postings for an entry of `dn` real postings:
/// `floor(dn · u / 100)` with `u` uniform in `[1, 10·K]`.
pub fn dummy_count<R: Rng + ?Sized>(dn: usize, k: u32, rng: &mut R) -> usize {
    let u = rng.gen_range(1..=10 * k.max(1) as usize);
    dn * u / 100
}

/// Quantized document-side scores `(concept, DP, DS)`.
pub type QuantizedVector = Vec<(ConceptId, u32, u32)>;

/// Largest secondary score of a set of concept vectors.
fn max_secondary<'a>(vectors: impl Iterator<Item = &'a ConceptVector>) -> f64 {
    vectors
        .flat_map(|cv| cv.iter().map(|(_, s)| s.secondary))
        .fold(0.0, f64::max)
}

fn quantize(cv: &ConceptVector, max_s: f64, inv_max: u32) -> QuantizedVector {
    cv.iter()
        .map(|(c, s)| {
            let dp = s.primary.min(inv_max);
            let ds = if max_s > 0.0 { (inv_max as f64 * s.secondary / max_s).round() as u32 } else { 0 };
            (*c, dp, ds.min(inv_max))
        })
        .collect()
}

/// Maps every document's DSW scores into the integer interval: primary
/// scores are capped, secondary scores are scaled by the collection maximum.
pub fn quantize_collection(vectors: &IndexSidecar, inv_max: u32) -> BTreeMap<String, QuantizedVector> {
    let max_s = max_secondary(vectors.0.values());
    vectors
        .0
        .iter()
        .map(|(id, cv)| (id.clone(), quantize(cv, max_s, inv_max)))
        .collect()
}

/// Owner/user-side document id ↔ alias table.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AliasTable(pub BTreeMap<String, Alias>);

impl AliasTable {
    pub fn alias(&self, doc_id: &str) -> Result<Alias> {
        self.0.get(doc_id).copied().ok_or_else(|| Error::UnknownDocument(doc_id.to_string()))
    }

    pub fn doc_id(&self, alias: Alias) -> Option<&str> {
        self.0.iter().find(|(_, a)| **a == alias).map(|(d, _)| d.as_str())
    }

    pub fn inverse(&self) -> BTreeMap<Alias, String> {
        self.0.iter().map(|(d, a)| (*a, d.clone())).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct I1Posting {
    pub alias: Alias,
    pub primary: CtId,
    pub secondary: CtId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct I2Posting {
    pub alias: Alias,
    pub access: CtId,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SecureIndexI1(pub BTreeMap<ConceptId, Vec<I1Posting>>);

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AccessIndexI2(pub BTreeMap<String, Vec<I2Posting>>);

#[derive(Serialize, Deserialize)]
struct I1Line {
    concept: ConceptId,
    postings: Vec<(Alias, CtId, CtId)>,
}

#[derive(Serialize, Deserialize)]
struct I2Line {
    user: String,
    postings: Vec<(Alias, CtId)>,
}

/// Byte accounting of I1: 20 bytes per posting (alias plus two ids) and a
/// 4-byte concept id per entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct I1Size {
    pub entries: usize,
    pub postings: usize,
}

impl I1Size {
    pub const POSTING_BYTES: usize = 4 + 8 + 8;
    pub const ENTRY_BYTES: usize = 4;

    pub fn bytes(&self) -> usize {
        self.postings * Self::POSTING_BYTES + self.entries * Self::ENTRY_BYTES
    }
}

impl SecureIndexI1 {
    pub fn size(&self) -> I1Size {
        I1Size { entries: self.0.len(), postings: self.0.values().map(Vec::len).sum() }
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for (concept, postings) in &self.0 {
            let line = I1Line {
                concept: *concept,
                postings: postings.iter().map(|p| (p.alias, p.primary, p.secondary)).collect(),
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: Read>(r: R) -> Result<Self> {
        let mut map = BTreeMap::new();
        for line in nonblank_lines(r) {
            let entry: I1Line = serde_json::from_str(&line?)?;
            let postings = entry
                .postings
                .into_iter()
                .map(|(alias, primary, secondary)| I1Posting { alias, primary, secondary })
                .collect();
            map.insert(entry.concept, postings);
        }
        Ok(Self(map))
    }
}

impl AccessIndexI2 {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for (user, postings) in &self.0 {
            let line = I2Line {
                user: user.clone(),
                postings: postings.iter().map(|p| (p.alias, p.access)).collect(),
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: Read>(r: R) -> Result<Self> {
        let mut map = BTreeMap::new();
        for line in nonblank_lines(r) {
            let entry: I2Line = serde_json::from_str(&line?)?;
            let postings =
                entry.postings.into_iter().map(|(alias, access)| I2Posting { alias, access }).collect();
            map.insert(entry.user, postings);
        }
        Ok(Self(map))
    }
}

/// Owner-side plaintext view of both indexes, dummies included.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlainIndexes {
    /// concept → (alias, DP, DS); dummies carry (0, 0).
    pub i1: BTreeMap<ConceptId, Vec<(Alias, u32, u32)>>,
    /// user → (alias, access score); dummies carry 0.
    pub i2: BTreeMap<String, Vec<(Alias, u32)>>,
}

#[derive(Clone, Debug)]
pub struct SiisIndexes {
    pub i1: SecureIndexI1,
    pub i2: AccessIndexI2,
    pub aliases: AliasTable,
    pub plain: PlainIndexes,
}

/// User → accessible document ids.
pub type AccessRights = BTreeMap<String, BTreeSet<String>>;

fn sample_dummies<R: Rng + ?Sized>(
    dn: usize,
    pool: &[Alias],
    config: &SiisConfig,
    rng: &mut R,
) -> Vec<Alias> {
    if !config.dummies_enabled {
        return Vec::new();
    }
    let want = dummy_count(dn, config.k_security, rng).min(pool.len());
    index::sample(rng, pool.len(), want).into_iter().map(|i| pool[i]).collect()
}

/// Builds I1 and I2 from the documents' concept vectors.
pub fn build_indexes<R: Rng + ?Sized>(
    vectors: &IndexSidecar,
    users: &AccessRights,
    t1: &ScoreTableOwner,
    config: &SiisConfig,
    rng: &mut R,
) -> Result<SiisIndexes> {
    config.validate()?;
    if vectors.0.is_empty() {
        return Err(Error::Config("empty collection".into()));
    }
    let inv_max = config.inv_max;
    if t1.inv_max() != inv_max {
        return Err(Error::Config(format!(
            "score table covers [0, {}], configuration asks for [0, {inv_max}]",
            t1.inv_max()
        )));
    }
    for (user, docs) in users {
        if let Some(missing) = docs.iter().find(|d| !vectors.0.contains_key(*d)) {
            return Err(Error::UnknownDocument(format!("{missing} (granted to {user})")));
        }
    }

    let mut perm: Vec<Alias> = (0..vectors.0.len() as Alias).collect();
    perm.shuffle(rng);
    let aliases = AliasTable(vectors.0.keys().cloned().zip(perm).collect());
    let all: Vec<Alias> = {
        let mut v: Vec<Alias> = aliases.0.values().copied().collect();
        v.sort_unstable();
        v
    };

    // Concept → real (alias, DP, DS), keeping only the top X per document.
    let mut real: BTreeMap<ConceptId, Vec<(Alias, u32, u32)>> = BTreeMap::new();
    let truncated = IndexSidecar(
        vectors
            .0
            .iter()
            .map(|(id, cv)| (id.clone(), ConceptVector(cv.0.iter().take(config.x_concepts).copied().collect())))
            .collect(),
    );
    for (doc, qv) in quantize_collection(&truncated, inv_max) {
        let alias = aliases.0[&doc];
        for (c, dp, ds) in qv {
            real.entry(c).or_default().push((alias, dp, ds));
        }
    }

    let mut i1 = BTreeMap::new();
    let mut plain_i1 = BTreeMap::new();
    for (concept, entry) in real {
        let present: BTreeSet<Alias> = entry.iter().map(|(a, _, _)| *a).collect();
        let pool: Vec<Alias> = all.iter().copied().filter(|a| !present.contains(a)).collect();
        let mut plain: Vec<(Alias, u32, u32)> = entry;
        for alias in sample_dummies(plain.len(), &pool, config, rng) {
            plain.push((alias, 0, 0));
        }
        plain.sort_unstable_by_key(|(a, _, _)| *a);
        let postings = plain
            .iter()
            .map(|&(alias, dp, ds)| {
                Ok(I1Posting { alias, primary: t1.pick(dp, rng)?, secondary: t1.pick(ds, rng)? })
            })
            .collect::<Result<Vec<_>>>()?;
        i1.insert(concept, postings);
        plain_i1.insert(concept, plain);
    }

    let mut i2 = BTreeMap::new();
    let mut plain_i2 = BTreeMap::new();
    for (user, docs) in users {
        let granted: BTreeSet<Alias> = docs.iter().map(|d| aliases.0[d]).collect();
        let mut plain: Vec<(Alias, u32)> =
            granted.iter().map(|a| (*a, rng.gen_range(1..=inv_max))).collect();
        let pool: Vec<Alias> = all.iter().copied().filter(|a| !granted.contains(a)).collect();
        for alias in sample_dummies(plain.len(), &pool, config, rng) {
            plain.push((alias, 0));
        }
        plain.sort_unstable_by_key(|(a, _)| *a);
        let postings = plain
            .iter()
            .map(|&(alias, score)| Ok(I2Posting { alias, access: t1.pick(score, rng)? }))
            .collect::<Result<Vec<_>>>()?;
        i2.insert(user.clone(), postings);
        plain_i2.insert(user.clone(), plain);
    }

    Ok(SiisIndexes {
        i1: SecureIndexI1(i1),
        i2: AccessIndexI2(i2),
        aliases,
        plain: PlainIndexes { i1: plain_i1, i2: plain_i2 },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrapdoorEntry {
    pub concept: ConceptId,
    pub cp: u32,
    pub cs: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiisTrapdoor(pub Vec<TrapdoorEntry>);

/// Query → DSW top `y` concepts → `x` of them sampled without replacement,
/// with weights quantized into `[0, inv_max]`.
pub fn siis_trapdoor<R: Rng + ?Sized>(
    query: &str,
    stoplist: &StopList,
    onto: &ConceptInvertedIndex,
    inv_max: u32,
    x: usize,
    y: usize,
    rng: &mut R,
) -> Result<SiisTrapdoor> {
    if x == 0 || x > y {
        return Err(Error::Config(format!("need 1 <= x <= y, got x={x}, y={y}")));
    }
    let top = dsw_concepts(&query_term_vector(query, stoplist), onto, y);
    if top.is_empty() {
        return Err(Error::EmptyTrapdoor);
    }
    let weighted = quantize(&top, max_secondary(std::iter::once(&top)), inv_max);
    let take = x.min(weighted.len());
    let mut chosen: Vec<TrapdoorEntry> = index::sample(rng, weighted.len(), take)
        .into_iter()
        .map(|i| {
            let (concept, cp, cs) = weighted[i];
            TrapdoorEntry { concept, cp, cs }
        })
        .collect();
    chosen.sort_by_key(|e| e.concept);
    Ok(SiisTrapdoor(chosen))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub alias: Alias,
    pub x: HeCiphertext,
    pub y: HeCiphertext,
    pub z: HeCiphertext,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SiisResult(pub Vec<ResultEntry>);

struct Match {
    alias: Alias,
    hits: Vec<(CtId, CtId, u32, u32)>,
    access: CtId,
}

/// Server-side search: intersects the selected I1 entries with the user's
/// I2 entry, keeps `k` documents from the highest categories (number of
/// matched entries, then alias), and computes the encrypted scores.
pub fn siis_search(
    i1: &SecureIndexI1,
    i2: &AccessIndexI2,
    t2: &ScoreTableServer,
    pk: &HePublicKey,
    trapdoor: &SiisTrapdoor,
    user: &str,
    k: usize,
) -> Result<SiisResult> {
    let access = i2.0.get(user).ok_or_else(|| Error::UnknownUser(user.to_string()))?;
    let access: BTreeMap<Alias, CtId> = access.iter().map(|p| (p.alias, p.access)).collect();

    let mut matched: BTreeMap<Alias, Vec<(CtId, CtId, u32, u32)>> = BTreeMap::new();
    for entry in &trapdoor.0 {
        // Concepts absent from this collection are skipped.
        let Some(postings) = i1.0.get(&entry.concept) else { continue };
        for p in postings.iter().filter(|p| access.contains_key(&p.alias)) {
            matched.entry(p.alias).or_default().push((p.primary, p.secondary, entry.cp, entry.cs));
        }
    }
    let mut candidates: Vec<Match> = matched
        .into_iter()
        .map(|(alias, hits)| Match { alias, hits, access: access[&alias] })
        .collect();
    candidates.sort_by(|a, b| b.hits.len().cmp(&a.hits.len()).then(a.alias.cmp(&b.alias)));
    candidates.truncate(k);

    let pk = pk.clone().prepared();
    let entries = exec::map_slice(&candidates, |m| -> Result<ResultEntry> {
        let mut x: Option<HeCiphertext> = None;
        let mut y: Option<HeCiphertext> = None;
        for &(p_id, s_id, cp, cs) in &m.hits {
            let px = he_mul_plain(&pk, t2.get(p_id)?, &BigUint::from(cp))?;
            let sy = he_mul_plain(&pk, t2.get(s_id)?, &BigUint::from(cs))?;
            x = Some(match x {
                Some(acc) => he_add(&pk, &acc, &px)?,
                None => px,
            });
            y = Some(match y {
                Some(acc) => he_add(&pk, &acc, &sy)?,
                None => sy,
            });
        }
        Ok(ResultEntry {
            alias: m.alias,
            x: x.expect("candidate has at least one match"),
            y: y.expect("candidate has at least one match"),
            z: t2.get(m.access)?.clone(),
        })
    });
    Ok(SiisResult(entries.into_iter().collect::<Result<Vec<_>>>()?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedAlias {
    pub alias: Alias,
    pub x: u64,
    pub y: u64,
}

/// Client side: decrypts, drops dummies (x = 0) and inaccessible documents
/// (z = 0), and sorts by (x, y) descending with the alias as tie-break.
pub fn client_sort(result: &SiisResult, sk: &HeSecretKey, pk: &HePublicKey) -> Result<Vec<RankedAlias>> {
    let pk = pk.clone().prepared();
    let dec = |c: &HeCiphertext| {
        he_dec_u64(sk, &pk, c).map_err(|e| Error::InvalidResult(format!("cannot decrypt score: {e}")))
    };
    let mut out = Vec::new();
    for e in &result.0 {
        let (x, y, z) = (dec(&e.x)?, dec(&e.y)?, dec(&e.z)?);
        if x != 0 && z != 0 {
            out.push(RankedAlias { alias: e.alias, x, y });
        }
    }
    out.sort_by(|a, b| b.x.cmp(&a.x).then(b.y.cmp(&a.y)).then(a.alias.cmp(&b.alias)));
    Ok(out)
}

/// Smallest modulus that keeps every homomorphic sum exact.
pub fn min_modulus(inv_max: u32, x: usize) -> BigUint {
    BigUint::from(inv_max) * BigUint::from(inv_max) * BigUint::from(x.max(1)) + 1u32
}

pub fn check_modulus(pk: &HePublicKey, inv_max: u32, x: usize) -> Result<()> {
    if pk.n <= min_modulus(inv_max, x) {
        return Err(Error::Config(format!(
            "modulus too small for exact sums of {x} products of scores up to {inv_max}"
        )));
    }
    Ok(())
}
