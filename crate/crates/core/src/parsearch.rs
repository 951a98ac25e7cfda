// SPDX-License-Identifier: Apache-2.0

//! Batched top-k search over an encrypted vector index.
//!
//! Two strategies are provided. `Shared` scores disjoint document shards in
//! parallel into one score table, then ranks every document against the
//! whole table after the scoring phase completes. `Partitioned` gives each
//! partition its own local top-k per query and folds the partial lists with
//! [`merge`]. Both use the same total order (score, then document position),
//! which makes their outputs identical for any worker or partition count.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::ranking::{result_order, top_k, PairScore, Score, ScoredDoc};
use crate::sse::{check_trapdoor, hits, score_row, IndexRow, SearchHit, VectorModelIndex, VectorTrapdoor};

pub type TopKList<S> = Vec<ScoredDoc<S>>;

/// Trapdoors answered together, in arrival order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryBatch(pub Vec<VectorTrapdoor>);

impl QueryBatch {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Shared,
    Partitioned(usize),
}

/// Scores of one document row against every query of the batch.
pub fn similarity(row: &IndexRow, batch: &QueryBatch) -> Result<Vec<PairScore>> {
    batch.0.iter().map(|q| score_row(row, q)).collect()
}

/// Number of documents scoring strictly higher, or −1 once it exceeds `k`.
/// Equal scores do not push a document down.
pub fn rank<S: Score>(doc: &ScoredDoc<S>, others: &[ScoredDoc<S>], k: usize) -> i64 {
    count_until(others, k, |x| x.score.cmp_score(&doc.score) == Ordering::Greater)
}

/// Like [`rank`] but under the full result order, so ties on score are
/// separated by document id and every document gets a distinct rank.
pub fn rank_total<S: Score>(doc: &ScoredDoc<S>, others: &[ScoredDoc<S>], k: usize) -> i64 {
    count_until(others, k, |x| x.doc != doc.doc && result_order(x, doc) == Ordering::Less)
}

fn count_until<T>(items: &[T], k: usize, mut above: impl FnMut(&T) -> bool) -> i64 {
    let mut r = 0usize;
    for x in items {
        if above(x) {
            r += 1;
            if r > k {
                return -1;
            }
        }
    }
    r as i64
}

fn check_sorted<S: Score>(list: &[ScoredDoc<S>]) -> Result<()> {
    if cfg!(debug_assertions) && list.windows(2).any(|w| result_order(&w[0], &w[1]) == Ordering::Greater) {
        return Err(Error::Contract("merge input is not sorted".into()));
    }
    Ok(())
}

/// Two-way merge of sorted lists, truncated at `k`. When one list runs out
/// the remainder of the other is drained.
pub fn merge<S: Score>(d1: &[ScoredDoc<S>], d2: &[ScoredDoc<S>], k: usize) -> Result<TopKList<S>> {
    check_sorted(d1)?;
    check_sorted(d2)?;
    let mut out = Vec::with_capacity(k.min(d1.len() + d2.len()));
    let (mut i, mut j) = (0, 0);
    while out.len() < k {
        let next = match (d1.get(i), d2.get(j)) {
            (Some(a), Some(b)) => {
                if result_order(a, b) != Ordering::Greater {
                    i += 1;
                    *a
                } else {
                    j += 1;
                    *b
                }
            }
            (Some(a), None) => {
                i += 1;
                *a
            }
            (None, Some(b)) => {
                j += 1;
                *b
            }
            (None, None) => break,
        };
        out.push(next);
    }
    Ok(out)
}

/// Contiguous, near-equal shards of `0..n`.
pub fn shards(n: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    let parts = parts.max(1);
    (0..parts)
        .map(|p| (p * n / parts)..((p + 1) * n / parts))
        .collect()
}

/// Ranked `(row position, score)` lists, one per query.
pub fn batch_search_ranked(
    index: &VectorModelIndex,
    batch: &QueryBatch,
    k: usize,
    strategy: Strategy,
    workers: usize,
) -> Result<Vec<TopKList<PairScore>>> {
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    for q in &batch.0 {
        check_trapdoor(index, q)?;
    }
    if batch.is_empty() {
        return Ok(Vec::new());
    }
    exec::with_workers(workers, || match strategy {
        Strategy::Shared => shared(index.rows(), batch, k, workers),
        Strategy::Partitioned(p) if p >= 1 => partitioned(index.rows(), batch, k, p),
        Strategy::Partitioned(_) => Err(Error::Config("partition count must be at least 1".into())),
    })?
}

pub fn batch_search(
    index: &VectorModelIndex,
    batch: &QueryBatch,
    k: usize,
    strategy: Strategy,
    workers: usize,
) -> Result<Vec<Vec<SearchHit>>> {
    let ranked = batch_search_ranked(index, batch, k, strategy, workers)?;
    Ok(ranked.iter().map(|list| hits(index, list)).collect())
}

fn shared(rows: &[IndexRow], batch: &QueryBatch, k: usize, workers: usize) -> Result<Vec<TopKList<PairScore>>> {
    // Scoring phase: each shard fills its slice of the table.
    let parts = shards(rows.len(), workers);
    let shard_scores = exec::map_slice(&parts, |range| -> Result<Vec<Vec<PairScore>>> {
        rows[range.clone()].iter().map(|row| similarity(row, batch)).collect()
    });
    let mut table: Vec<Vec<PairScore>> = Vec::with_capacity(rows.len());
    for shard in shard_scores {
        table.extend(shard?);
    }
    // Ranking phase, after every shard has finished.
    let k = k.min(rows.len());
    Ok(exec::map_range(0..batch.len(), |q| {
        let column: Vec<ScoredDoc<(i64, i64)>> = table
            .iter()
            .enumerate()
            .map(|(d, scores)| ScoredDoc::new(d as u32, scores[q].key()))
            .collect();
        let mut slots: Vec<Option<ScoredDoc<PairScore>>> = vec![None; k];
        for doc in &column {
            let r = rank_total(doc, &column, k);
            if r >= 0 && (r as usize) < k {
                slots[r as usize] = Some(ScoredDoc::new(doc.doc, table[doc.doc as usize][q]));
            }
        }
        slots.into_iter().flatten().collect()
    }))
}

fn partitioned(rows: &[IndexRow], batch: &QueryBatch, k: usize, p: usize) -> Result<Vec<TopKList<PairScore>>> {
    let parts = shards(rows.len(), p);
    let locals = exec::map_slice(&parts, |range| -> Result<Vec<TopKList<PairScore>>> {
        let mut per_query: Vec<Vec<ScoredDoc<PairScore>>> =
            vec![Vec::with_capacity(range.len()); batch.len()];
        for d in range.clone() {
            for (q, score) in similarity(&rows[d], batch)?.into_iter().enumerate() {
                per_query[q].push(ScoredDoc::new(d as u32, score));
            }
        }
        Ok(per_query.into_iter().map(|list| top_k(list, k)).collect())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    // Coordinator fold.
    (0..batch.len())
        .map(|q| {
            locals
                .iter()
                .try_fold(Vec::new(), |acc, local| merge(&acc, &local[q], k))
        })
        .collect()
}

impl Score for (i64, i64) {
    fn cmp_score(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }
}
