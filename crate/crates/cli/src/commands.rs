// SPDX-License-Identifier: Apache-2.0

//! One function per subcommand. Each writes its report to the supplied
//! writer so tests can drive the commands in-process.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use encsearch::aph::{aph_prepare, build_fetch, reconstruct, serve_fetch_dir, BlockTables, CorrespondenceTable, FetchRequest, FetchState};
use encsearch::he::{he_keygen, HePublicKey, HeSecretKey};
use encsearch::ontology::{build_onto, ConceptInvertedIndex};
use encsearch::oracle::{oracle_concept_search, OracleMode, OracleParams};
use encsearch::parsearch::{batch_search, batch_search_ranked, QueryBatch, Strategy};
use encsearch::seal::SealKey;
use encsearch::siis::{
    build_indexes, check_modulus, client_sort, siis_search, siis_trapdoor, tabgen, AccessIndexI2, AccessRights, AliasTable,
    ScoreTableServer, SecureIndexI1, SiisResult, SiisTrapdoor,
};
use encsearch::sknn::{sknn_keygen, SknnKey};
use encsearch::sse::{
    concept_vectors, encrypt_concept_vectors, encrypt_query_vector, read_index, sse_search, sse_trapdoor, write_index,
    IndexFormat, SearchHit, VectorTrapdoor,
};
use encsearch::synth::{random_concept_vector, random_sidecar};
use encsearch::textindex::{eval_metrics, load_corpus_dir, Document, StopList};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::config::{parse_strategy, Config};
use crate::workspace::{
    files, leak_check, read_json, read_sealed, read_seal_key, write_file, write_json, write_seal_key, write_sealed,
    write_with, Workspace,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Sse,
    Siis,
}

impl Scheme {
    fn name(self) -> &'static str {
        match self {
            Scheme::Sse => "sse",
            Scheme::Siis => "siis",
        }
    }
}

/// Independent random stream per command: the seed mixed with an FNV-1a
/// hash of the label.
pub fn rng_for(seed: u64, label: &str) -> ChaCha20Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    ChaCha20Rng::seed_from_u64(seed ^ h)
}

/// A workspace with its parameters and the effective seed.
pub struct Ctx {
    pub ws: Workspace,
    pub cfg: Config,
    pub seed: u64,
}

impl Ctx {
    pub fn open(root: &Path, seed: Option<u64>) -> Result<Self> {
        let ws = Workspace::at(root);
        let cfg = ws.config()?;
        let seed = seed.unwrap_or(cfg.seed);
        Ok(Self { ws, cfg, seed })
    }

    fn rng(&self, label: &str) -> ChaCha20Rng {
        rng_for(self.seed, label)
    }

    fn table_key(&self) -> Result<SealKey> {
        read_seal_key(&self.ws.owner_file(files::TABLE_KEY)).context("no keys yet (run `keygen` first)")
    }

    fn user_table_key(&self) -> Result<SealKey> {
        read_seal_key(&self.ws.user_file(files::TABLE_KEY))
    }
}

/// Owner-side record of what was built from where.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct Manifest {
    corpus: Option<PathBuf>,
    onto: Option<PathBuf>,
    users: Option<PathBuf>,
    schemes: BTreeSet<Scheme>,
}

fn read_manifest(ws: &Workspace) -> Result<Manifest> {
    let path = ws.owner_file(files::MANIFEST);
    if path.exists() {
        read_json(&path)
    } else {
        Ok(Manifest::default())
    }
}

fn require_built(ws: &Workspace, scheme: Scheme) -> Result<Manifest> {
    let manifest = read_manifest(ws)?;
    if !manifest.schemes.contains(&scheme) {
        bail!("no {} index in this workspace (run `build --scheme {}` first)", scheme.name(), scheme.name());
    }
    Ok(manifest)
}

// ---------------------------------------------------------------- init, keygen

pub fn cmd_init(root: &Path, force: bool, config: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let ws = Workspace::at(root);
    if ws.is_initialized() {
        if !force {
            bail!("{} already holds a workspace (use --force to replace it)", root.display());
        }
        for dir in [&ws.owner, &ws.cloud, &ws.user] {
            if dir.exists() {
                fs::remove_dir_all(dir).with_context(|| format!("removing {}", dir.display()))?;
            }
        }
    }
    let cfg = match config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    for dir in [&ws.owner, &ws.cloud, &ws.user] {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_file(&ws.config_path(), cfg.to_toml()?)?;
    writeln!(out, "initialized workspace at {}", root.display())?;
    Ok(())
}

pub fn cmd_keygen(ctx: &Ctx, force: bool, out: &mut dyn Write) -> Result<()> {
    let ws = &ctx.ws;
    if ws.owner_file(files::HE_SK).exists() && !force {
        bail!("keys already exist (use --force to replace them and invalidate existing indexes)");
    }
    let mut rng = ctx.rng("keygen");
    let (pk, sk) = he_keygen(ctx.cfg.he_prime_bits, &mut rng)?;
    let table_key = SealKey::generate(&mut rng);
    let block_key = SealKey::generate(&mut rng);
    write_json(&ws.cloud_file(files::HE_PK), &pk)?;
    for role in [&ws.owner, &ws.user] {
        write_json(&role.join(files::USER_HE_PK), &pk)?;
        write_json(&role.join(files::HE_SK), &sk)?;
        write_seal_key(&role.join(files::TABLE_KEY), &table_key)?;
        write_seal_key(&role.join(files::BLOCK_KEY), &block_key)?;
    }
    writeln!(out, "generated keys: modulus of {} bits", pk.n.bits())?;
    Ok(())
}

// ---------------------------------------------------------------- build

/// Reads a `user_id \t doc_id` file.
pub fn read_access_rights(path: &Path) -> Result<AccessRights> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rights = AccessRights::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            [user, doc] if !user.is_empty() && !doc.is_empty() => {
                rights.entry(user.to_string()).or_default().insert(doc.to_string());
            }
            _ => bail!("{}:{}: expected `user_id<TAB>doc_id`", path.display(), n + 1),
        }
    }
    Ok(rights)
}

fn load_nonempty(dir: &Path, what: &str) -> Result<Vec<Document>> {
    let docs = load_corpus_dir(dir).with_context(|| format!("loading {what} from {}", dir.display()))?;
    if docs.is_empty() {
        bail!("{} holds no .txt files", dir.display());
    }
    Ok(docs)
}

pub fn cmd_build(
    ctx: &Ctx,
    scheme: Scheme,
    corpus: &Path,
    onto_dir: &Path,
    users: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    let (ws, cfg) = (&ctx.ws, &ctx.cfg);
    let table_key = ctx.table_key()?;
    let block_key = read_seal_key(&ws.owner_file(files::BLOCK_KEY))?;
    let mut rng = ctx.rng(&format!("build/{}", scheme.name()));
    let stop = StopList::english();

    let pages = load_nonempty(onto_dir, "concept pages")?;
    let (onto, titles) = build_onto(&pages, &stop, &cfg.ontology())?;
    if onto.concept_count() == 0 {
        bail!("no concept page has at least {} terms", cfg.min_page_terms);
    }
    for role in [&ws.owner, &ws.user] {
        write_with(&role.join(files::ONTOLOGY), |buf| onto.write_jsonl(buf))?;
    }
    write_sealed(&ws.owner_file(files::TITLES), &table_key, &titles, &mut rng)?;

    let docs = load_nonempty(corpus, "documents")?;
    let sidecar = concept_vectors(&docs, &stop, &onto, cfg.x)?;
    let aliases = match scheme {
        Scheme::Sse => {
            let key = sknn_keygen(onto.concept_count(), cfg.sknn_u, &mut rng)?;
            let index = encrypt_concept_vectors(&sidecar, &key, &cfg.sknn_params(), &mut rng)?;
            for role in [&ws.owner, &ws.user] {
                write_json(&role.join(files::SKNN_KEY), &key)?;
            }
            write_with(&ws.cloud_file(files::SSE_INDEX), |buf| write_index(&index, IndexFormat::Binary, buf))?;
            write_sealed(&ws.owner_file(files::SSE_SIDECAR), &table_key, &sidecar, &mut rng)?;
            writeln!(out, "sse index: {} documents over {} concepts", index.len(), onto.concept_count())?;
            let mut perm: Vec<u32> = (0..sidecar.0.len() as u32).collect();
            perm.shuffle(&mut rng);
            AliasTable(sidecar.0.keys().cloned().zip(perm).collect())
        }
        Scheme::Siis => {
            let Some(users) = users else { bail!("--users is required for the siis scheme") };
            let access = read_access_rights(users)?;
            let pk: HePublicKey = read_json(&ws.owner_file(files::USER_HE_PK))?;
            check_modulus(&pk, cfg.inv_max, cfg.x_concepts)?;
            let (t1, t2) = tabgen(&pk, cfg.inv_max, cfg.nc, cfg.k, &mut rng)?;
            let built = build_indexes(&sidecar, &access, &t1, &cfg.siis(), &mut rng)?;
            write_with(&ws.cloud_file(files::T2), |buf| t2.write_jsonl(buf))?;
            write_with(&ws.cloud_file(files::I1), |buf| built.i1.write_jsonl(buf))?;
            write_with(&ws.cloud_file(files::I2), |buf| built.i2.write_jsonl(buf))?;
            write_sealed(&ws.owner_file(files::T1), &table_key, &t1, &mut rng)?;
            write_sealed(&ws.owner_file(files::SIIS_PLAIN), &table_key, &built.plain, &mut rng)?;
            let size = built.i1.size();
            writeln!(
                out,
                "siis indexes: T2 {} ciphertexts, I1 {} entries / {} postings, I2 {} users",
                t2.len(),
                size.entries,
                size.postings,
                built.i2.0.len()
            )?;
            built.aliases
        }
    };
    for role in [&ws.owner, &ws.user] {
        write_sealed(&role.join(files::ALIASES), &table_key, &aliases, &mut rng)?;
    }

    // Block store for retrieval, keyed by the aliases of this build.
    let raw: Vec<(String, Vec<u8>)> = docs.iter().map(|d| (d.doc_id.clone(), d.text.clone().into_bytes())).collect();
    let (store, tables, corr) = aph_prepare(&raw, &aliases.0, &cfg.aph(), &block_key, &mut rng)?;
    let blocks = ws.cloud_file(files::BLOCKS);
    if blocks.exists() {
        fs::remove_dir_all(&blocks)?;
    }
    store.write_dir(&blocks)?;
    for role in [&ws.owner, &ws.user] {
        write_sealed(&role.join(files::APH_TABLES), &table_key, &tables, &mut rng)?;
        write_sealed(&role.join(files::CORRESPONDENCE), &table_key, &corr, &mut rng)?;
    }
    let state = ws.user_file(files::FETCH_STATE);
    if state.exists() {
        fs::remove_file(state)?;
    }
    writeln!(out, "block store: {} encrypted versions", store.0.len())?;

    let mut manifest = read_manifest(ws)?;
    manifest.corpus = Some(fs::canonicalize(corpus)?);
    manifest.onto = Some(fs::canonicalize(onto_dir)?);
    if let Some(users) = users {
        manifest.users = Some(fs::canonicalize(users)?);
    }
    manifest.schemes.insert(scheme);
    write_json(&ws.owner_file(files::MANIFEST), &manifest)?;
    Ok(())
}

// ---------------------------------------------------------------- search

/// One line of a ranking as printed by `search`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ranked {
    pub doc_id: String,
    pub primary: f64,
    pub secondary: f64,
}

#[derive(Serialize, Deserialize)]
struct SiisRequest {
    user: String,
    k: usize,
    trapdoor: SiisTrapdoor,
}

#[derive(Serialize, Deserialize)]
struct SseRequest {
    k: usize,
    trapdoor: VectorTrapdoor,
}

fn user_ontology(ws: &Workspace) -> Result<ConceptInvertedIndex> {
    let path = ws.user_file(files::ONTOLOGY);
    let file = fs::File::open(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ConceptInvertedIndex::read_jsonl(file)?)
}

fn owner_ontology(ws: &Workspace) -> Result<ConceptInvertedIndex> {
    let path = ws.owner_file(files::ONTOLOGY);
    Ok(ConceptInvertedIndex::read_jsonl(fs::File::open(&path)?)?)
}

fn read_jsonl_file<T>(path: &Path, read: impl FnOnce(fs::File) -> encsearch::Result<T>) -> Result<T> {
    let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    read(file).with_context(|| format!("parsing {}", path.display()))
}

/// Server side of an SSE search: answers the pending trapdoor.
fn serve_sse(ctx: &Ctx) -> Result<()> {
    let ws = &ctx.ws;
    let request: SseRequest = read_json(&ws.cloud_file(files::SSE_TRAPDOOR))?;
    let index = read_jsonl_file(&ws.cloud_file(files::SSE_INDEX), read_index)?;
    let batch = QueryBatch(vec![request.trapdoor]);
    let mut hits = batch_search(&index, &batch, request.k.max(1), ctx.cfg.strategy()?, ctx.cfg.workers)?;
    write_json(&ws.cloud_file(files::SSE_RESULT), &hits.pop().unwrap_or_default())
}

/// Server side of an SIIS search.
fn serve_siis(ctx: &Ctx) -> Result<()> {
    let ws = &ctx.ws;
    let request: SiisRequest = read_json(&ws.cloud_file(files::SIIS_TRAPDOOR))?;
    let pk: HePublicKey = read_json(&ws.cloud_file(files::HE_PK))?;
    let t2 = read_jsonl_file(&ws.cloud_file(files::T2), ScoreTableServer::read_jsonl)?;
    let i1 = read_jsonl_file(&ws.cloud_file(files::I1), SecureIndexI1::read_jsonl)?;
    let i2 = read_jsonl_file(&ws.cloud_file(files::I2), AccessIndexI2::read_jsonl)?;
    let result = siis_search(&i1, &i2, &t2, &pk, &request.trapdoor, &request.user, request.k)?;
    write_json(&ws.cloud_file(files::SIIS_RESULT), &result)
}

fn sse_user_trapdoor(ctx: &Ctx, query: &str) -> Result<VectorTrapdoor> {
    let ws = &ctx.ws;
    let onto = user_ontology(ws)?;
    let key: SknnKey = read_json(&ws.user_file(files::SKNN_KEY))?;
    let mut rng = ctx.rng(&format!("search/sse/{query}"));
    let (td, _) = sse_trapdoor(query, &StopList::english(), &onto, &key, ctx.cfg.x, &ctx.cfg.sknn_params(), &mut rng)?;
    Ok(td)
}

fn siis_user_trapdoor(ctx: &Ctx, user: &str, query: &str) -> Result<SiisTrapdoor> {
    let onto = user_ontology(&ctx.ws)?;
    let mut rng = ctx.rng(&format!("search/siis/{user}/{query}"));
    let cfg = &ctx.cfg;
    Ok(siis_trapdoor(query, &StopList::english(), &onto, cfg.inv_max, cfg.x_concepts, cfg.y_concepts, &mut rng)?)
}

/// Runs the full user → server → user round trip and returns the ranking.
pub fn search(ctx: &Ctx, scheme: Scheme, user: Option<&str>, k: usize, query: &str) -> Result<Vec<Ranked>> {
    if k == 0 {
        bail!("k must be at least 1");
    }
    let ws = &ctx.ws;
    require_built(ws, scheme)?;
    match scheme {
        Scheme::Sse => {
            let trapdoor = sse_user_trapdoor(ctx, query)?;
            write_json(&ws.cloud_file(files::SSE_TRAPDOOR), &SseRequest { k, trapdoor })?;
            serve_sse(ctx)?;
            let hits: Vec<SearchHit> = read_json(&ws.cloud_file(files::SSE_RESULT))?;
            Ok(hits
                .into_iter()
                .map(|h| Ranked { doc_id: h.doc_id, primary: h.primary, secondary: h.secondary })
                .collect())
        }
        Scheme::Siis => {
            let Some(user) = user else { bail!("--user is required for the siis scheme") };
            let trapdoor = siis_user_trapdoor(ctx, user, query)?;
            let request = SiisRequest { user: user.to_string(), k, trapdoor };
            write_json(&ws.cloud_file(files::SIIS_TRAPDOOR), &request)?;
            serve_siis(ctx)?;
            let result: SiisResult = read_json(&ws.cloud_file(files::SIIS_RESULT))?;
            let pk: HePublicKey = read_json(&ws.user_file(files::USER_HE_PK))?;
            let sk: HeSecretKey = read_json(&ws.user_file(files::HE_SK))?;
            let aliases: AliasTable = read_sealed(&ws.user_file(files::ALIASES), &ctx.user_table_key()?)?;
            let names = aliases.inverse();
            let mut ranked = client_sort(&result, &sk, &pk)?
                .into_iter()
                .map(|r| {
                    let doc_id = names.get(&r.alias).cloned().context("result names an unknown alias")?;
                    Ok(Ranked { doc_id, primary: r.x as f64, secondary: r.y as f64 })
                })
                .collect::<Result<Vec<_>>>()?;
            // Equal scores are listed by document id, as the plaintext
            // reference does; aliases carry no meaning for the reader.
            ranked.sort_by(|a, b| {
                b.primary.total_cmp(&a.primary).then(b.secondary.total_cmp(&a.secondary)).then(a.doc_id.cmp(&b.doc_id))
            });
            Ok(ranked)
        }
    }
}

/// Plaintext reference ranking for the same query, computed owner-side.
pub fn oracle_search(ctx: &Ctx, scheme: Scheme, user: Option<&str>, k: usize, query: &str) -> Result<Vec<Ranked>> {
    let ws = &ctx.ws;
    let manifest = require_built(ws, scheme)?;
    let corpus = manifest.corpus.context("manifest lacks the corpus path")?;
    let docs = load_nonempty(&corpus, "documents")?;
    let onto = owner_ontology(ws)?;
    let stop = StopList::english();
    let cfg = &ctx.cfg;
    let (params, accessible) = match scheme {
        Scheme::Sse => (OracleParams { x_doc: cfg.x, x_query: cfg.x, mode: OracleMode::Vector }, None),
        Scheme::Siis => {
            let Some(user) = user else { bail!("--user is required for the siis scheme") };
            let users = manifest.users.context("manifest lacks the access-rights path")?;
            let access = read_access_rights(&users)?;
            let Some(allowed) = access.get(user).cloned() else { bail!("unknown user `{user}`") };
            // Same concept selection as the encrypted query.
            let selected = siis_user_trapdoor(ctx, user, query)?.0.iter().map(|e| e.concept).collect();
            let mode = OracleMode::Quantized { inv_max: cfg.inv_max, selected: Some(selected) };
            (OracleParams { x_doc: cfg.x, x_query: cfg.y_concepts, mode }, Some(allowed))
        }
    };
    let hits = oracle_concept_search(&docs, &stop, &onto, query, &params, k, accessible.as_ref())?;
    Ok(hits.into_iter().map(|h| Ranked { doc_id: h.doc_id, primary: h.primary, secondary: h.secondary }).collect())
}

fn print_ranking(scheme: Scheme, ranking: &[Ranked], out: &mut dyn Write) -> Result<()> {
    writeln!(out, "rank\tdoc_id\tprimary\tsecondary")?;
    for (i, r) in ranking.iter().enumerate() {
        match scheme {
            Scheme::Sse => writeln!(out, "{}\t{}\t{:.6}\t{:.6}", i + 1, r.doc_id, r.primary, r.secondary)?,
            Scheme::Siis => writeln!(out, "{}\t{}\t{}\t{}", i + 1, r.doc_id, r.primary, r.secondary)?,
        }
    }
    Ok(())
}

pub fn cmd_search(
    ctx: &Ctx,
    scheme: Scheme,
    user: Option<&str>,
    k: usize,
    query: &str,
    oracle: bool,
    out: &mut dyn Write,
) -> Result<()> {
    let ranking =
        if oracle { oracle_search(ctx, scheme, user, k, query)? } else { search(ctx, scheme, user, k, query)? };
    print_ranking(scheme, &ranking, out)
}

// ---------------------------------------------------------------- fetch

/// Retrieves one document through the block protocol and writes it to
/// `user/docs/<doc_id>.txt`.
pub fn fetch(ctx: &Ctx, doc_id: &str) -> Result<(PathBuf, usize)> {
    let ws = &ctx.ws;
    let key = ctx.user_table_key()?;
    let tables: BlockTables = read_sealed(&ws.user_file(files::APH_TABLES), &key)
        .context("no block tables (run `build` first)")?;
    let corr: CorrespondenceTable = read_sealed(&ws.user_file(files::CORRESPONDENCE), &key)?;
    let state_path = ws.user_file(files::FETCH_STATE);
    let mut state: FetchState = if state_path.exists() { read_sealed(&state_path, &key)? } else { FetchState::default() };
    let Some(&alias) = corr.0.get(doc_id) else { bail!("unknown document `{doc_id}`") };

    let used: usize = state.0.values().map(BTreeSet::len).sum();
    let mut rng = ctx.rng(&format!("fetch/{used}"));
    let plan = build_fetch(alias, &tables, ctx.cfg.scramble(), &mut state, &mut rng)?;
    write_json(&ws.cloud_file(files::FETCH_REQUEST), &plan.request)?;

    // Server: reads the request, answers with the listed blocks.
    let request: FetchRequest = read_json(&ws.cloud_file(files::FETCH_REQUEST))?;
    let response = ws.cloud_file(files::FETCH_RESPONSE);
    if response.exists() {
        fs::remove_dir_all(&response)?;
    }
    for (id, blob) in serve_fetch_dir(&ws.cloud_file(files::BLOCKS), &request)? {
        write_file(&response.join(format!("{id}.blk")), blob)?;
    }

    // User: keeps the true versions and decrypts.
    let mut blobs = BTreeMap::new();
    for v in &plan.true_versions {
        blobs.insert(*v, fs::read(response.join(format!("{v}.blk")))?);
    }
    let block_key = read_seal_key(&ws.user_file(files::BLOCK_KEY))?;
    let bytes = reconstruct(&plan.true_versions, &blobs, &block_key)?;
    let path = ws.user_file(files::DOCS).join(format!("{doc_id}.txt"));
    write_file(&path, &bytes)?;
    write_sealed(&state_path, &key, &state, &mut rng)?;
    Ok((path, plan.request.0.len()))
}

pub fn cmd_fetch(ctx: &Ctx, docs: &[String], out: &mut dyn Write) -> Result<()> {
    if docs.is_empty() {
        bail!("name at least one document");
    }
    for doc in docs {
        let (path, requested) = fetch(ctx, doc)?;
        writeln!(out, "{doc}\t{}\t{requested} versions requested", path.display())?;
    }
    Ok(())
}

// ---------------------------------------------------------------- bench

#[derive(Clone, Debug)]
pub struct BenchArgs {
    pub docs: usize,
    pub queries: usize,
    pub concepts: usize,
    pub x: usize,
    pub k: usize,
    pub workers: Vec<usize>,
    pub strategies: Vec<String>,
    pub partitions: Vec<usize>,
    pub seed: u64,
}

/// Times batch search on a synthetic encrypted index for every requested
/// (strategy, W, P) and checks that all runs return the same lists.
pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<()> {
    if args.docs == 0 || args.queries == 0 || args.concepts == 0 || args.k == 0 {
        bail!("docs, queries, concepts and k must be positive");
    }
    let mut rng = rng_for(args.seed, "bench");
    let key = sknn_keygen(args.concepts, 4, &mut rng)?;
    let params = encsearch::sknn::SknnParams::default();
    let sidecar = random_sidecar(args.docs, args.concepts, args.x, &mut rng);
    let index = encrypt_concept_vectors(&sidecar, &key, &params, &mut rng)?;
    let batch = QueryBatch(
        (0..args.queries)
            .map(|_| {
                let cv = random_concept_vector(args.concepts, args.x.min(10), &mut rng);
                encrypt_query_vector(&cv, args.concepts, &key, &params, &mut rng)
            })
            .collect::<encsearch::Result<_>>()?,
    );

    writeln!(out, "strategy,W,P,docs,queries,wall_ms")?;
    let mut reference = None;
    for name in &args.strategies {
        let parts: Vec<Option<usize>> = match name.as_str() {
            "shared" => vec![None],
            _ => args.partitions.iter().map(|p| Some(*p)).collect(),
        };
        for &w in &args.workers {
            for p in &parts {
                let strategy = parse_strategy(name, p.unwrap_or(1))?;
                let start = Instant::now();
                let lists = batch_search_ranked(&index, &batch, args.k, strategy, w)?;
                let ms = start.elapsed().as_secs_f64() * 1e3;
                let p_shown = match strategy {
                    // The shared strategy shards the scoring phase by worker.
                    Strategy::Shared => w,
                    Strategy::Partitioned(p) => p,
                };
                match &reference {
                    None => reference = Some(lists),
                    Some(r) if *r != lists => bail!("{name} W={w} P={p_shown} returned a different ranking"),
                    Some(_) => {}
                }
                writeln!(out, "{name},{w},{p_shown},{},{},{ms:.3}", args.docs, args.queries)?;
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- eval

/// Reads a `query_id \t doc_id` file into query → doc set.
pub fn read_pairs(path: &Path) -> Result<BTreeMap<String, BTreeSet<String>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split('\t').collect::<Vec<_>>().as_slice() {
            [q, d] if !q.is_empty() && !d.is_empty() => {
                map.entry(q.to_string()).or_default().insert(d.to_string());
            }
            _ => bail!("{}:{}: expected `query_id<TAB>doc_id`", path.display(), n + 1),
        }
    }
    Ok(map)
}

/// Reads a `query_id \t query text` file.
pub fn read_queries(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('\t') {
            Some((q, text)) if !q.is_empty() && !text.trim().is_empty() => out.push((q.to_string(), text.to_string())),
            _ => bail!("{}:{}: expected `query_id<TAB>query`", path.display(), n + 1),
        }
    }
    Ok(out)
}

/// Per-query (accuracy, recall) over the queries of `qrels`; a query absent
/// from `run` returned nothing.
pub fn evaluate(
    qrels: &BTreeMap<String, BTreeSet<String>>,
    run: &BTreeMap<String, BTreeSet<String>>,
) -> Vec<(String, f64, f64)> {
    let empty = BTreeSet::new();
    qrels
        .iter()
        .map(|(q, relevant)| {
            let (acc, rec) = eval_metrics(run.get(q).unwrap_or(&empty), relevant);
            (q.clone(), acc, rec)
        })
        .collect()
}

pub fn print_eval(rows: &[(String, f64, f64)], out: &mut dyn Write) -> Result<()> {
    writeln!(out, "query_id\taccuracy\trecall")?;
    for (q, acc, rec) in rows {
        writeln!(out, "{q}\t{acc:.4}\t{rec:.4}")?;
    }
    let n = rows.len().max(1) as f64;
    let mean_acc = rows.iter().map(|r| r.1).sum::<f64>() / n;
    let mean_rec = rows.iter().map(|r| r.2).sum::<f64>() / n;
    writeln!(out, "mean\t{mean_acc:.4}\t{mean_rec:.4}")?;
    Ok(())
}

pub enum EvalSource<'a> {
    Run(&'a Path),
    Queries { path: &'a Path, ctx: &'a Ctx, scheme: Scheme, user: Option<&'a str>, k: usize },
}

pub fn cmd_eval(qrels: &Path, source: EvalSource<'_>, out: &mut dyn Write) -> Result<()> {
    let qrels = read_pairs(qrels)?;
    let run = match source {
        EvalSource::Run(path) => read_pairs(path)?,
        EvalSource::Queries { path, ctx, scheme, user, k } => {
            let mut run = BTreeMap::new();
            for (id, text) in read_queries(path)? {
                let returned = match search(ctx, scheme, user, k, &text) {
                    Ok(r) => r.into_iter().map(|r| r.doc_id).collect(),
                    // A query without any concept retrieves nothing.
                    Err(e) if e.downcast_ref::<encsearch::Error>().is_some_and(|e| matches!(e, encsearch::Error::EmptyTrapdoor)) => {
                        BTreeSet::new()
                    }
                    Err(e) => return Err(e),
                };
                run.insert(id, returned);
            }
            run
        }
    };
    print_eval(&evaluate(&qrels, &run), out)
}

// ---------------------------------------------------------------- leak check

pub fn cmd_leak_check(root: &Path, out: &mut dyn Write) -> Result<usize> {
    let ws = Workspace::at(root);
    if !ws.cloud.exists() {
        bail!("{} has no cloud directory", root.display());
    }
    let violations = leak_check(&ws)?;
    for v in &violations {
        writeln!(out, "LEAK {v}")?;
    }
    if violations.is_empty() {
        writeln!(out, "leak check passed")?;
    }
    Ok(violations.len())
}

// ---------------------------------------------------------------- standalone sse

fn load_ontology_file(path: &Path) -> Result<ConceptInvertedIndex> {
    read_jsonl_file(path, ConceptInvertedIndex::read_jsonl)
}

/// Loads the vector key at `path`, creating it for `n` concepts if absent.
fn load_or_create_key(path: &Path, n: usize, u: usize, seed: u64) -> Result<SknnKey> {
    if path.exists() {
        return read_json(path);
    }
    let key = sknn_keygen(n, u, &mut rng_for(seed, "sse/keygen"))?;
    write_json(path, &key)?;
    Ok(key)
}

pub struct SseBuildArgs<'a> {
    pub corpus: &'a Path,
    pub ontology: &'a Path,
    pub key: &'a Path,
    pub out: &'a Path,
    pub format: IndexFormat,
    pub cfg: &'a Config,
    pub seed: u64,
}

pub fn cmd_sse_build_index(args: &SseBuildArgs<'_>, out: &mut dyn Write) -> Result<()> {
    let onto = load_ontology_file(args.ontology)?;
    let key = load_or_create_key(args.key, onto.concept_count(), args.cfg.sknn_u, args.seed)?;
    let docs = load_nonempty(args.corpus, "documents")?;
    let sidecar = concept_vectors(&docs, &StopList::english(), &onto, args.cfg.x)?;
    let mut rng = rng_for(args.seed, "sse/build-index");
    let index = encrypt_concept_vectors(&sidecar, &key, &args.cfg.sknn_params(), &mut rng)?;
    write_with(args.out, |buf| write_index(&index, args.format, buf))?;
    writeln!(out, "wrote {} rows to {}", index.len(), args.out.display())?;
    Ok(())
}

pub fn cmd_sse_trapdoor(
    ontology: &Path,
    key: &Path,
    query: &str,
    dest: &Path,
    cfg: &Config,
    seed: u64,
    out: &mut dyn Write,
) -> Result<()> {
    let onto = load_ontology_file(ontology)?;
    let key: SknnKey = read_json(key)?;
    let mut rng = rng_for(seed, &format!("sse/trapdoor/{query}"));
    let (td, cv) = sse_trapdoor(query, &StopList::english(), &onto, &key, cfg.x, &cfg.sknn_params(), &mut rng)?;
    write_json(dest, &td)?;
    writeln!(out, "trapdoor over {} concepts written to {}", cv.len(), dest.display())?;
    Ok(())
}

pub fn cmd_sse_search(index: &Path, trapdoor: &Path, k: usize, out: &mut dyn Write) -> Result<()> {
    let index = read_jsonl_file(index, read_index)?;
    let td: VectorTrapdoor = read_json(trapdoor)?;
    let hits = sse_search(&index, &td, k)?;
    let ranking: Vec<Ranked> =
        hits.into_iter().map(|h| Ranked { doc_id: h.doc_id, primary: h.primary, secondary: h.secondary }).collect();
    print_ranking(Scheme::Sse, &ranking, out)
}
