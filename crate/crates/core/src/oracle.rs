// SPDX-License-Identifier: Apache-2.0

//! Plaintext reference implementations.
//!
//! Nothing here calls into the encrypted code paths: concept scoring,
//! quantization and ranking are re-derived by brute force so that equality
//! with the encrypted schemes is a meaningful check. Only text
//! preprocessing and the ontology data itself are shared.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::he::{he_dec, HePublicKey, HeSecretKey};
use crate::ontology::{ConceptId, ConceptInvertedIndex};
use crate::siis::{ScoreTableOwner, ScoreTableServer};
use crate::textindex::{analyze_collection, process, tfidf, Document, StopList, TermVector};

/// One plaintext concept: (id, distinct matching terms, weighted sum).
pub type PlainConcept = (ConceptId, u32, f64);

/// Brute-force DSW: every (term, concept) pair of the ontology is visited.
pub fn oracle_dsw(term_vec: &TermVector, onto: &ConceptInvertedIndex, x: usize) -> Vec<PlainConcept> {
    let mut out: Vec<PlainConcept> = Vec::new();
    for c in 0..onto.concept_count() as ConceptId {
        let mut count = 0u32;
        let mut sum = 0.0;
        for (term, w) in term_vec.iter() {
            if let Some(&(_, s)) = onto.concepts_for(term).iter().find(|(cc, _)| *cc == c) {
                count += 1;
                sum += w * s;
            }
        }
        if count > 0 {
            out.push((c, count, sum));
        }
    }
    out.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then_with(|| b.2.partial_cmp(&a.2).unwrap_or(Ordering::Equal))
            .then(a.0.cmp(&b.0))
    });
    out.truncate(x);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    /// Dot products of the raw (S_p, S_s) vectors; every document is ranked.
    Vector,
    /// Integer-quantized scores restricted to `selected` query concepts
    /// (all top-`x_query` concepts when `None`); unmatched documents dropped.
    Quantized { inv_max: u32, selected: Option<BTreeSet<ConceptId>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleParams {
    /// Concepts kept per document.
    pub x_doc: usize,
    /// Concepts kept for the query.
    pub x_query: usize,
    pub mode: OracleMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleHit {
    pub doc_id: String,
    pub primary: f64,
    pub secondary: f64,
}

fn scale(v: f64, max: f64, inv_max: u32) -> f64 {
    if max > 0.0 {
        (v * inv_max as f64 / max).round().min(inv_max as f64)
    } else {
        0.0
    }
}

/// Plaintext concept search, optionally restricted to `accessible`.
pub fn oracle_concept_search(
    docs: &[Document],
    stoplist: &StopList,
    onto: &ConceptInvertedIndex,
    query: &str,
    params: &OracleParams,
    k: usize,
    accessible: Option<&BTreeSet<String>>,
) -> Result<Vec<OracleHit>> {
    let processed = analyze_collection(docs, stoplist)?;
    let doc_concepts: BTreeMap<String, Vec<PlainConcept>> = tfidf(&processed)
        .into_iter()
        .map(|(id, tv)| (id, oracle_dsw(&tv, onto, params.x_doc)))
        .collect();
    let query_vec = TermVector::binary(process(query, stoplist));
    let mut query_concepts = oracle_dsw(&query_vec, onto, params.x_query);

    let mut hits: Vec<OracleHit> = Vec::new();
    match &params.mode {
        OracleMode::Vector => {
            for (doc_id, concepts) in &doc_concepts {
                let (mut p, mut s) = (0.0, 0.0);
                for (c, dp, ds) in concepts {
                    if let Some((_, qp, qs)) = query_concepts.iter().find(|q| q.0 == *c) {
                        p += *dp as f64 * *qp as f64;
                        s += ds * qs;
                    }
                }
                hits.push(OracleHit { doc_id: doc_id.clone(), primary: p, secondary: s });
            }
        }
        OracleMode::Quantized { inv_max, selected } => {
            let inv = *inv_max;
            let doc_max = doc_concepts.values().flatten().map(|c| c.2).fold(0.0, f64::max);
            let query_max = query_concepts.iter().map(|c| c.2).fold(0.0, f64::max);
            if let Some(sel) = selected {
                query_concepts.retain(|c| sel.contains(&c.0));
            }
            for (doc_id, concepts) in &doc_concepts {
                let (mut x, mut y) = (0.0, 0.0);
                for (c, dp, ds) in concepts {
                    if let Some((_, qp, qs)) = query_concepts.iter().find(|q| q.0 == *c) {
                        x += (*qp).min(inv) as f64 * (*dp).min(inv) as f64;
                        y += scale(*qs, query_max, inv) * scale(*ds, doc_max, inv);
                    }
                }
                if x > 0.0 {
                    hits.push(OracleHit { doc_id: doc_id.clone(), primary: x, secondary: y });
                }
            }
        }
    }
    if let Some(allowed) = accessible {
        hits.retain(|h| allowed.contains(&h.doc_id));
    }
    hits.sort_by(|a, b| {
        b.primary
            .partial_cmp(&a.primary)
            .unwrap_or(Ordering::Equal)
            .then_with(|| b.secondary.partial_cmp(&a.secondary).unwrap_or(Ordering::Equal))
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
    hits.truncate(k);
    Ok(hits)
}

/// Full sort of `(position, score)` pairs, ties by position, truncated at `k`.
pub fn oracle_rank_all(scores: &[f64], k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = scores.iter().copied().enumerate().collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// Concatenates all lists and fully sorts them.
pub fn oracle_merge(lists: &[Vec<(u32, f64)>], k: usize) -> Vec<(u32, f64)> {
    let mut all: Vec<(u32, f64)> = lists.iter().flatten().copied().collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// Decrypts every ciphertext of T2 and checks it against its T1 score.
pub fn oracle_check_tables(
    t1: &ScoreTableOwner,
    t2: &ScoreTableServer,
    sk: &HeSecretKey,
    pk: &HePublicKey,
) -> Result<bool> {
    let owned: usize = t1.0.values().map(Vec::len).sum();
    if owned != t2.0.len() {
        return Ok(false);
    }
    for (score, ids) in &t1.0 {
        for id in ids {
            let Some(ct) = t2.0.get(id) else { return Ok(false) };
            if he_dec(sk, pk, ct)? != (*score).into() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Brute-force transpose of per-page TF-IDF vectors into term → (page, w).
pub fn oracle_transpose(pages: &BTreeMap<String, BTreeMap<String, f64>>) -> BTreeMap<String, BTreeSet<(String, u64)>> {
    let mut out: BTreeMap<String, BTreeSet<(String, u64)>> = BTreeMap::new();
    for (page, row) in pages {
        for (term, w) in row {
            out.entry(term.clone()).or_default().insert((page.clone(), w.to_bits()));
        }
    }
    out
}
