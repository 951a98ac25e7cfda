// SPDX-License-Identifier: Apache-2.0

//! Score types and the total order shared by every ranking path.
//!
//! Encrypted scores carry floating-point rounding from the matrix transforms,
//! so two documents with equal plaintext scores rarely evaluate to the same
//! bits. [`PairScore`] therefore compares values snapped to a fixed grid of
//! [`SNAP`]; anything finer than that is treated as a tie and falls through
//! to the document-id tie-break.

use std::cmp::Ordering;
use std::fmt::Debug;

use serde::{Deserialize, Serialize};

/// Resolution of encrypted-score comparison.
pub const SNAP: f64 = 1e-6;

pub trait Score: Copy + Debug + Send + Sync {
    /// `Greater` when `self` is the better score.
    fn cmp_score(&self, other: &Self) -> Ordering;
}

impl Score for f64 {
    fn cmp_score(&self, other: &Self) -> Ordering {
        self.total_cmp(other)
    }
}

impl Score for i64 {
    fn cmp_score(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }
}

/// Primary/secondary channel scores of one document for one query.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub primary: f64,
    pub secondary: f64,
}

impl PairScore {
    pub fn new(primary: f64, secondary: f64) -> Self {
        Self { primary, secondary }
    }

    pub fn key(&self) -> (i64, i64) {
        (snap(self.primary), snap(self.secondary))
    }
}

fn snap(v: f64) -> i64 {
    // `as` saturates on overflow and maps NaN to 0.
    (v / SNAP).round() as i64
}

impl Score for PairScore {
    fn cmp_score(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc<S> {
    pub doc: u32,
    pub score: S,
}

impl<S> ScoredDoc<S> {
    pub fn new(doc: u32, score: S) -> Self {
        Self { doc, score }
    }
}

/// Result order: better score first, then lower document id.
pub fn result_order<S: Score>(a: &ScoredDoc<S>, b: &ScoredDoc<S>) -> Ordering {
    b.score.cmp_score(&a.score).then(a.doc.cmp(&b.doc))
}

/// Sorts by [`result_order`] and keeps the first `k`.
pub fn top_k<S: Score>(mut docs: Vec<ScoredDoc<S>>, k: usize) -> Vec<ScoredDoc<S>> {
    if k < docs.len() {
        docs.select_nth_unstable_by(k, result_order);
        docs.truncate(k);
    }
    docs.sort_by(result_order);
    docs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_scores_are_lexicographic() {
        let a = PairScore::new(7.0, 0.20);
        let b = PairScore::new(6.0, 0.41);
        assert_eq!(a.cmp_score(&b), Ordering::Greater);
        assert_eq!(
            PairScore::new(3.0, 0.5).cmp_score(&PairScore::new(3.0 + 1e-12, 0.5 - 1e-12)),
            Ordering::Equal
        );
    }

    #[test]
    fn ties_fall_back_to_doc_id() {
        let docs = vec![
            ScoredDoc::new(3, 1.0),
            ScoredDoc::new(1, 1.0),
            ScoredDoc::new(2, 2.0),
            ScoredDoc::new(0, 0.5),
        ];
        let top: Vec<u32> = top_k(docs, 3).iter().map(|d| d.doc).collect();
        assert_eq!(top, vec![2, 1, 3]);
    }

    #[test]
    fn top_k_larger_than_input() {
        let docs = vec![ScoredDoc::new(0, 1.0), ScoredDoc::new(1, 3.0)];
        assert_eq!(top_k(docs, 10).len(), 2);
        assert!(top_k(Vec::<ScoredDoc<f64>>::new(), 0).is_empty());
    }
}
