// SPDX-License-Identifier: Apache-2.0

//! Concept knowledge base and double score weighting (DSW).
//!
//! Every concept page is indexed with TF-IDF and the page vectors are
//! transposed into a term → weighted concepts index. A term vector is then
//! mapped to concepts with two scores: the primary score counts how many
//! distinct terms of the vector point at the concept, the secondary score
//! sums `w(t) · s(t, c)` over those terms. Concepts rank by primary score
//! first and secondary score second.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textindex::{analyze_collection, tfidf_table, tokenize, Document, StopList, TermVector};

pub type ConceptId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OntologyConfig {
    /// Pages with fewer raw tokens are skipped.
    pub min_page_terms: usize,
    pub max_concepts_per_term: usize,
}

impl Default for OntologyConfig {
    fn default() -> Self {
        Self { min_page_terms: 100, max_concepts_per_term: 5000 }
    }
}

/// Term → `(concept, association score)` lists, best first.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConceptInvertedIndex {
    postings: BTreeMap<String, Vec<(ConceptId, f64)>>,
    concept_count: u32,
}

/// Owner-side concept id → page title table.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConceptTitles(pub Vec<String>);

impl ConceptTitles {
    pub fn title(&self, id: ConceptId) -> Option<&str> {
        self.0.get(id as usize).map(String::as_str)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DswScore {
    pub primary: u32,
    pub secondary: f64,
}

impl DswScore {
    pub fn new(primary: u32, secondary: f64) -> Self {
        Self { primary, secondary }
    }
}

/// Ordering of `a` relative to `b`: `Greater` when `a` ranks above `b`.
pub fn dsw_compare(a: &DswScore, b: &DswScore) -> Ordering {
    a.primary
        .cmp(&b.primary)
        .then_with(|| a.secondary.total_cmp(&b.secondary))
}

/// Concepts with their DSW scores, best first, ties on concept id ascending.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConceptVector(pub Vec<(ConceptId, DswScore)>);

impl ConceptVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(ConceptId, DswScore)> {
        self.0.iter()
    }

    pub fn get(&self, concept: ConceptId) -> Option<DswScore> {
        self.0.iter().find(|(c, _)| *c == concept).map(|(_, s)| *s)
    }
}

#[derive(Serialize, Deserialize)]
struct OntologyLine {
    term: String,
    concepts: Vec<(ConceptId, f64)>,
}

impl ConceptInvertedIndex {
    /// Builds an index directly from postings; lists are re-sorted and the
    /// concept count is derived from the largest id.
    pub fn from_postings(postings: BTreeMap<String, Vec<(ConceptId, f64)>>) -> Self {
        let mut postings = postings;
        for list in postings.values_mut() {
            sort_postings(list);
        }
        let concept_count = postings
            .values()
            .flatten()
            .map(|(c, _)| c + 1)
            .max()
            .unwrap_or(0);
        Self { postings, concept_count }
    }

    /// Size of the dense concept space (largest id + 1).
    pub fn concept_count(&self) -> usize {
        self.concept_count as usize
    }

    pub fn concepts_for(&self, term: &str) -> &[(ConceptId, f64)] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for (term, concepts) in &self.postings {
            let line = OntologyLine { term: term.clone(), concepts: concepts.clone() };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: Read>(r: R) -> Result<Self> {
        let mut postings = BTreeMap::new();
        for line in BufReader::new(r).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: OntologyLine = serde_json::from_str(&line)?;
            postings.insert(entry.term, entry.concepts);
        }
        Ok(Self::from_postings(postings))
    }
}

fn sort_postings(list: &mut [(ConceptId, f64)]) {
    list.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

/// Builds the term → concepts index from concept pages. Concept ids are
/// dense and follow the page-id order of the pages that were kept.
pub fn build_onto(
    pages: &[Document],
    stoplist: &StopList,
    config: &OntologyConfig,
) -> Result<(ConceptInvertedIndex, ConceptTitles)> {
    if config.max_concepts_per_term == 0 {
        return Err(Error::Config("max_concepts_per_term must be at least 1".into()));
    }
    let mut kept: Vec<&Document> = pages
        .iter()
        .filter(|p| tokenize(&p.text).len() >= config.min_page_terms)
        .collect();
    if kept.is_empty() {
        return Err(Error::Config(format!(
            "no concept page has at least {} terms",
            config.min_page_terms
        )));
    }
    kept.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    let kept: Vec<Document> = kept.into_iter().cloned().collect();
    let processed = analyze_collection(&kept, stoplist)?;
    let ids: BTreeMap<&str, ConceptId> = kept
        .iter()
        .enumerate()
        .map(|(i, p)| (p.doc_id.as_str(), i as ConceptId))
        .collect();

    let mut postings: BTreeMap<String, Vec<(ConceptId, f64)>> = BTreeMap::new();
    for (page, row) in tfidf_table(&processed) {
        let cid = ids[page.as_str()];
        for (term, w) in row {
            postings.entry(term).or_default().push((cid, w));
        }
    }
    for list in postings.values_mut() {
        sort_postings(list);
        list.truncate(config.max_concepts_per_term);
    }
    let titles = ConceptTitles(kept.iter().map(|p| p.doc_id.clone()).collect());
    let index = ConceptInvertedIndex {
        postings,
        concept_count: titles.0.len() as u32,
    };
    Ok((index, titles))
}

/// Maps a term vector to its top `x` concepts under DSW.
pub fn dsw_concepts(term_vec: &TermVector, onto: &ConceptInvertedIndex, x: usize) -> ConceptVector {
    let mut acc: BTreeMap<ConceptId, DswScore> = BTreeMap::new();
    for (term, w) in term_vec.iter() {
        for &(concept, s) in onto.concepts_for(term) {
            let entry = acc.entry(concept).or_insert(DswScore::new(0, 0.0));
            entry.primary += 1;
            entry.secondary += w * s;
        }
    }
    let mut ranked: Vec<(ConceptId, DswScore)> = acc.into_iter().collect();
    ranked.sort_by(|a, b| dsw_compare(&b.1, &a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(x);
    ConceptVector(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(prefix: &str, n: usize) -> String {
        (0..n).map(|i| format!("{prefix}{}", alpha(i))).collect::<Vec<_>>().join(" ")
    }

    // Alphabetic suffix so tokens survive tokenization.
    fn alpha(mut i: usize) -> String {
        let mut s = String::new();
        loop {
            s.push((b'a' + (i % 26) as u8) as char);
            i /= 26;
            if i == 0 {
                break s;
            }
        }
    }

    #[test]
    fn single_page_single_mapping() {
        let pages = vec![Document::new("c1", "zorblat")];
        let cfg = OntologyConfig { min_page_terms: 1, ..Default::default() };
        let (idx, titles) = build_onto(&pages, &StopList::empty(), &cfg).unwrap();
        assert_eq!(idx.concepts_for("zorblat"), &[(0, 0.0)]);
        assert_eq!(titles.title(0), Some("c1"));
    }

    #[test]
    fn cap_keeps_highest_scoring_concepts() {
        // "shared" occurs in three pages with counts 1, 2, 3; a fourth page
        // without it keeps its idf positive.
        let pages = vec![
            Document::new("p1", "shared alpha"),
            Document::new("p2", "shared shared beta"),
            Document::new("p3", "shared shared shared gamma"),
            Document::new("p4", "delta"),
        ];
        let cfg = OntologyConfig { min_page_terms: 1, max_concepts_per_term: 2 };
        let (idx, _) = build_onto(&pages, &StopList::empty(), &cfg).unwrap();
        let ids: Vec<_> = idx.concepts_for("share").iter().map(|(c, _)| *c).collect();
        assert_eq!(ids, vec![2, 1]);
    }

    #[test]
    fn short_pages_are_skipped() {
        let pages = vec![
            Document::new("long", words("tok", 120)),
            Document::new("short", words("tok", 5)),
        ];
        let (idx, titles) = build_onto(&pages, &StopList::empty(), &OntologyConfig::default()).unwrap();
        assert_eq!(titles.0, vec!["long".to_string()]);
        assert_eq!(idx.concept_count(), 1);
        let only_short = vec![Document::new("short", words("tok", 5))];
        assert!(build_onto(&only_short, &StopList::empty(), &OntologyConfig::default()).is_err());
    }

    #[test]
    fn dsw_hand_example() {
        let mut postings = BTreeMap::new();
        postings.insert("t1".to_string(), vec![(0, 2.0), (1, 1.0)]);
        postings.insert("t2".to_string(), vec![(0, 3.0)]);
        let onto = ConceptInvertedIndex::from_postings(postings);
        let tv = TermVector::from_weights([("t1", 1.0), ("t2", 1.0)]);
        let cv = dsw_concepts(&tv, &onto, 10);
        assert_eq!(cv.0, vec![(0, DswScore::new(2, 5.0)), (1, DswScore::new(1, 1.0))]);
        assert!(dsw_concepts(&TermVector::default(), &onto, 10).is_empty());
        assert_eq!(dsw_concepts(&tv, &onto, 1).len(), 1);
    }

    #[test]
    fn multi_term_concepts_outrank_single_term_ones() {
        // "estonia" maps strongly to many single-term concepts; one concept
        // is linked to both query terms with a small weight.
        let mut postings = BTreeMap::new();
        postings.insert(
            "estonia".to_string(),
            vec![(1, 0.9), (2, 0.8), (3, 0.7), (0, 0.04)],
        );
        postings.insert("economy".to_string(), vec![(4, 0.6), (0, 0.03)]);
        let onto = ConceptInvertedIndex::from_postings(postings);
        let cv = dsw_concepts(&TermVector::binary(["estonia", "economy"]), &onto, 10);
        assert_eq!(cv.0[0].0, 0);
        assert_eq!(cv.0[0].1.primary, 2);
        assert!(cv.0[1].1.secondary > cv.0[0].1.secondary);
    }

    #[test]
    fn dsw_compare_examples() {
        let cmp = |a: (u32, f64), b: (u32, f64)| {
            dsw_compare(&DswScore::new(a.0, a.1), &DswScore::new(b.0, b.1))
        };
        assert_eq!(cmp((7, 0.20), (6, 0.41)), Ordering::Greater);
        assert_eq!(cmp((2, 0.1), (1, 0.9)), Ordering::Greater);
        assert_eq!(cmp((3, 0.5), (3, 0.5)), Ordering::Equal);
        assert_eq!(cmp((3, 0.4), (3, 0.5)), Ordering::Less);
    }

    #[test]
    fn jsonl_layout() {
        let mut postings = BTreeMap::new();
        postings.insert("t".to_string(), vec![(1, 0.5), (0, 0.25)]);
        let onto = ConceptInvertedIndex::from_postings(postings);
        let mut buf = Vec::new();
        onto.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.trim(), r#"{"term":"t","concepts":[[1,0.5],[0,0.25]]}"#);
        let back = ConceptInvertedIndex::read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, onto);
        assert_eq!(back.concept_count(), 2);
    }
}
