// SPDX-License-Identifier: Apache-2.0

//! Vector-model searchable encryption over concept vectors.
//!
//! Each document becomes a DSW concept vector, expanded into two dense
//! vectors over the concept space (primary scores and secondary scores).
//! Both are SkNN-encrypted, so the server can evaluate the two channels of
//! a query without learning either vector and rank documents by the pair.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::ontology::{dsw_concepts, ConceptInvertedIndex, ConceptVector};
use crate::ranking::{top_k, PairScore, ScoredDoc};
use crate::sknn::{
    sknn_enc_doc, sknn_enc_query_with, sknn_eval, EncryptedDocVector, EncryptedQueryVector,
    SknnKey, SknnParams,
};
use crate::textindex::{analyze_collection, process, tfidf, Document, StopList, TermVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexRow {
    pub doc_id: String,
    pub primary: EncryptedDocVector,
    pub secondary: EncryptedDocVector,
}

/// Server-side encrypted index. Rows are kept sorted by document id, so a
/// row's position doubles as its tie-break rank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorModelIndex {
    concept_dim: usize,
    u: usize,
    rows: Vec<IndexRow>,
}

/// Owner-side plaintext concept vectors, keyed by document id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IndexSidecar(pub BTreeMap<String, ConceptVector>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorTrapdoor {
    pub primary: EncryptedQueryVector,
    pub secondary: EncryptedQueryVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub doc_id: String,
    pub primary: f64,
    pub secondary: f64,
}

impl VectorModelIndex {
    pub fn new(concept_dim: usize, u: usize, mut rows: Vec<IndexRow>) -> Result<Self> {
        let width = concept_dim + 1 + u;
        for row in &rows {
            for v in [&row.primary, &row.secondary] {
                if v.a.len() != width || v.b.len() != width {
                    return Err(Error::DimensionMismatch { expected: width, got: v.a.len() });
                }
            }
        }
        rows.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        if let Some(w) = rows.windows(2).find(|w| w[0].doc_id == w[1].doc_id) {
            return Err(Error::DuplicateDocument(w[0].doc_id.clone()));
        }
        Ok(Self { concept_dim, u, rows })
    }

    pub fn concept_dim(&self) -> usize {
        self.concept_dim
    }

    pub fn dummy_dims(&self) -> usize {
        self.u
    }

    pub fn rows(&self) -> &[IndexRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn width(&self) -> usize {
        self.concept_dim + 1 + self.u
    }
}

/// Primary and secondary dense vectors of a concept vector.
pub fn dense_channels(cv: &ConceptVector, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut p = vec![0.0; n];
    let mut s = vec![0.0; n];
    for (c, score) in cv.iter() {
        let c = *c as usize;
        if c >= n {
            return Err(Error::DimensionMismatch { expected: n, got: c + 1 });
        }
        p[c] = score.primary as f64;
        s[c] = score.secondary;
    }
    Ok((p, s))
}

fn check_key(key: &SknnKey, onto: &ConceptInvertedIndex) -> Result<usize> {
    let n = onto.concept_count();
    if key.plain_dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: key.plain_dim() });
    }
    Ok(n)
}

/// Encrypts already computed concept vectors. Per-row randomness is derived
/// from seeds drawn up front, so the result does not depend on scheduling.
pub fn encrypt_concept_vectors<R: Rng + ?Sized>(
    vectors: &IndexSidecar,
    key: &SknnKey,
    params: &SknnParams,
    rng: &mut R,
) -> Result<VectorModelIndex> {
    params.validate()?;
    let n = key.plain_dim();
    let jobs: Vec<(&String, &ConceptVector, u64)> =
        vectors.0.iter().map(|(id, cv)| (id, cv, rng.gen())).collect();
    let rows = exec::map_slice(&jobs, |(doc_id, cv, seed)| -> Result<IndexRow> {
        let mut row_rng = ChaCha20Rng::seed_from_u64(*seed);
        let (p, s) = dense_channels(cv, n)?;
        Ok(IndexRow {
            doc_id: (*doc_id).clone(),
            primary: sknn_enc_doc(key, &p, params, &mut row_rng)?,
            secondary: sknn_enc_doc(key, &s, params, &mut row_rng)?,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    VectorModelIndex::new(n, key.dummy_dims(), rows)
}

/// DSW concept vector of every document (top `x` concepts each).
pub fn concept_vectors(
    docs: &[Document],
    stoplist: &StopList,
    onto: &ConceptInvertedIndex,
    x: usize,
) -> Result<IndexSidecar> {
    let processed = analyze_collection(docs, stoplist)?;
    let vectors = tfidf(&processed)
        .into_iter()
        .map(|(id, tv)| (id, dsw_concepts(&tv, onto, x)))
        .collect();
    Ok(IndexSidecar(vectors))
}

pub fn sse_build_index<R: Rng + ?Sized>(
    docs: &[Document],
    stoplist: &StopList,
    onto: &ConceptInvertedIndex,
    key: &SknnKey,
    x: usize,
    params: &SknnParams,
    rng: &mut R,
) -> Result<(VectorModelIndex, IndexSidecar)> {
    if docs.is_empty() {
        return Err(Error::Config("empty collection".into()));
    }
    if x == 0 {
        return Err(Error::Config("X must be at least 1".into()));
    }
    check_key(key, onto)?;
    let sidecar = concept_vectors(docs, stoplist, onto, x)?;
    let index = encrypt_concept_vectors(&sidecar, key, params, rng)?;
    Ok((index, sidecar))
}

/// Binary term vector of a free-text query.
pub fn query_term_vector(query: &str, stoplist: &StopList) -> TermVector {
    TermVector::binary(process(query, stoplist))
}

/// Builds a trapdoor and returns the plaintext query concept vector with it.
/// Both channels share one scale `r` and one offset `t`.
pub fn sse_trapdoor<R: Rng + ?Sized>(
    query: &str,
    stoplist: &StopList,
    onto: &ConceptInvertedIndex,
    key: &SknnKey,
    x: usize,
    params: &SknnParams,
    rng: &mut R,
) -> Result<(VectorTrapdoor, ConceptVector)> {
    params.validate()?;
    let n = check_key(key, onto)?;
    let cv = dsw_concepts(&query_term_vector(query, stoplist), onto, x);
    if cv.is_empty() {
        return Err(Error::EmptyTrapdoor);
    }
    let trapdoor = encrypt_query_vector(&cv, n, key, params, rng)?;
    Ok((trapdoor, cv))
}

pub fn encrypt_query_vector<R: Rng + ?Sized>(
    cv: &ConceptVector,
    n: usize,
    key: &SknnKey,
    params: &SknnParams,
    rng: &mut R,
) -> Result<VectorTrapdoor> {
    let (p, s) = dense_channels(cv, n)?;
    let r = params.r.sample(rng);
    let t = params.t.sample(rng);
    let (primary, _) = sknn_enc_query_with(key, &p, r, t, params, rng)?;
    let (secondary, _) = sknn_enc_query_with(key, &s, r, t, params, rng)?;
    Ok(VectorTrapdoor { primary, secondary })
}

/// Both channel scores of one row.
pub fn score_row(row: &IndexRow, trapdoor: &VectorTrapdoor) -> Result<PairScore> {
    Ok(PairScore::new(
        sknn_eval(&row.primary, &trapdoor.primary)?,
        sknn_eval(&row.secondary, &trapdoor.secondary)?,
    ))
}

pub fn check_trapdoor(index: &VectorModelIndex, trapdoor: &VectorTrapdoor) -> Result<()> {
    let width = index.width();
    for q in [&trapdoor.primary, &trapdoor.secondary] {
        if q.a.len() != width || q.b.len() != width {
            return Err(Error::KeyMismatch(format!(
                "trapdoor width {} does not match index width {width}",
                q.a.len()
            )));
        }
    }
    Ok(())
}

/// Linear scan: scores every row and returns the best `k`.
pub fn sse_search(index: &VectorModelIndex, trapdoor: &VectorTrapdoor, k: usize) -> Result<Vec<SearchHit>> {
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    check_trapdoor(index, trapdoor)?;
    let scored = index
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| Ok(ScoredDoc::new(i as u32, score_row(row, trapdoor)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(hits(index, &top_k(scored, k)))
}

pub(crate) fn hits(index: &VectorModelIndex, ranked: &[ScoredDoc<PairScore>]) -> Vec<SearchHit> {
    ranked
        .iter()
        .map(|d| SearchHit {
            doc_id: index.rows[d.doc as usize].doc_id.clone(),
            primary: d.score.primary,
            secondary: d.score.secondary,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexFormat {
    Binary,
    Json,
}

#[derive(Serialize, Deserialize)]
struct IndexHeader {
    format: IndexFormat,
    n: usize,
    u: usize,
    row_count: usize,
}

/// Writes a header line followed by packed little-endian rows or JSON lines.
pub fn write_index<W: Write>(index: &VectorModelIndex, format: IndexFormat, mut w: W) -> Result<()> {
    let header = IndexHeader { format, n: index.concept_dim, u: index.u, row_count: index.rows.len() };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for row in &index.rows {
        match format {
            IndexFormat::Json => {
                serde_json::to_writer(&mut w, row)?;
                w.write_all(b"\n")?;
            }
            IndexFormat::Binary => {
                w.write_all(&(row.doc_id.len() as u32).to_le_bytes())?;
                w.write_all(row.doc_id.as_bytes())?;
                for v in [&row.primary.a, &row.primary.b, &row.secondary.a, &row.secondary.b] {
                    for x in v {
                        w.write_all(&x.to_le_bytes())?;
                    }
                }
            }
        }
    }
    Ok(())
}

pub fn read_index<R: Read>(r: R) -> Result<VectorModelIndex> {
    let mut r = std::io::BufReader::new(r);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: IndexHeader = serde_json::from_str(&line)
        .map_err(|e| Error::Format(format!("bad index header: {e}")))?;
    let width = header.n + 1 + header.u;
    let mut rows = Vec::with_capacity(header.row_count);
    match header.format {
        IndexFormat::Json => {
            for line in r.lines() {
                let line = line?;
                if !line.trim().is_empty() {
                    rows.push(serde_json::from_str::<IndexRow>(&line)?);
                }
            }
        }
        IndexFormat::Binary => {
            let read_vec = |r: &mut dyn Read| -> Result<Vec<f64>> {
                let mut buf = vec![0u8; width * 8];
                r.read_exact(&mut buf)?;
                Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
            };
            for _ in 0..header.row_count {
                let mut len = [0u8; 4];
                r.read_exact(&mut len)?;
                let mut id = vec![0u8; u32::from_le_bytes(len) as usize];
                r.read_exact(&mut id)?;
                let doc_id = String::from_utf8(id).map_err(|e| Error::Format(e.to_string()))?;
                let primary = EncryptedDocVector { a: read_vec(&mut r)?, b: read_vec(&mut r)? };
                let secondary = EncryptedDocVector { a: read_vec(&mut r)?, b: read_vec(&mut r)? };
                rows.push(IndexRow { doc_id, primary, secondary });
            }
        }
    }
    if rows.len() != header.row_count {
        return Err(Error::Format(format!(
            "header announces {} rows, found {}",
            header.row_count,
            rows.len()
        )));
    }
    VectorModelIndex::new(header.n, header.u, rows)
}
