// SPDX-License-Identifier: Apache-2.0

//! Deterministic synthetic corpora for tests, benches and demos.
//!
//! Words are pronounceable syllable strings chosen so that they survive
//! stop-word removal and stemming unchanged. Concept pages and documents are
//! drawn from a small number of topics, each with its own vocabulary, plus a
//! shared pool of filler words.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::ontology::{dsw_compare, ConceptVector, DswScore};
use crate::siis::AccessRights;
use crate::sse::IndexSidecar;
use crate::textindex::{stem, Document, StopList};

const SYLLABLES: [&str; 20] = [
    "ka", "lo", "mi", "nu", "po", "ru", "si", "tu", "va", "zo", "ba", "do", "fu", "gi", "ha", "ji", "ko",
    "mu", "na", "to",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub concepts: usize,
    pub docs: usize,
    pub topics: usize,
    pub words_per_topic: usize,
    pub shared_words: usize,
    pub page_words: usize,
    pub doc_words: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            concepts: 50,
            docs: 200,
            topics: 10,
            words_per_topic: 12,
            shared_words: 40,
            page_words: 120,
            doc_words: 40,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub pages: Vec<Document>,
    pub docs: Vec<Document>,
    pub topic_words: Vec<Vec<String>>,
}

impl Fixture {
    /// Query of 2 to 4 words from one random topic.
    pub fn query<R: Rng + ?Sized>(&self, rng: &mut R) -> String {
        let topic = self.topic_words.choose(rng).expect("at least one topic");
        let n = rng.gen_range(2..=4).min(topic.len());
        topic.choose_multiple(rng, n).cloned().collect::<Vec<_>>().join(" ")
    }

    pub fn queries(&self, count: usize, seed: u64) -> Vec<String> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..count).map(|_| self.query(&mut rng)).collect()
    }
}

/// `count` distinct words, each unchanged by stemming and not a stop word.
pub fn vocabulary<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<String> {
    let stop = StopList::english();
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let len = rng.gen_range(2..=4);
        let word: String = (0..len).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
        if stem(&word) == word && !stop.contains(&word) && seen.insert(word.clone()) {
            out.push(word);
        }
    }
    out
}

pub fn fixture(cfg: &SynthConfig) -> Fixture {
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let topics = cfg.topics.max(1);
    let vocab = vocabulary(topics * cfg.words_per_topic + cfg.shared_words + cfg.concepts * 2, &mut rng);
    let mut words = vocab.into_iter();
    let topic_words: Vec<Vec<String>> =
        (0..topics).map(|_| words.by_ref().take(cfg.words_per_topic).collect()).collect();
    let shared: Vec<String> = words.by_ref().take(cfg.shared_words).collect();
    let signatures: Vec<String> = words.collect();

    let pages = (0..cfg.concepts)
        .map(|i| {
            let topic = &topic_words[i % topics];
            // A page favours a few words of its topic, so concepts of one
            // topic still differ from each other.
            let focus: Vec<&String> = topic.choose_multiple(&mut rng, 4.min(topic.len())).collect();
            let mut text: Vec<&str> = Vec::with_capacity(cfg.page_words);
            for _ in 0..cfg.page_words {
                let roll: f64 = rng.gen();
                let w = if roll < 0.35 {
                    focus.choose(&mut rng).unwrap().as_str()
                } else if roll < 0.7 {
                    topic.choose(&mut rng).unwrap().as_str()
                } else if roll < 0.9 {
                    shared.choose(&mut rng).unwrap().as_str()
                } else {
                    signatures[(2 * i + rng.gen_range(0..2)) % signatures.len()].as_str()
                };
                text.push(w);
            }
            Document::new(format!("concept{i:04}"), text.join(" "))
        })
        .collect();

    let docs = (0..cfg.docs)
        .map(|i| {
            let spread = rng.gen_range(1..=3.min(topics));
            let mix: Vec<&Vec<String>> = topic_words.choose_multiple(&mut rng, spread).collect();
            let text: Vec<&str> = (0..cfg.doc_words)
                .map(|_| {
                    if rng.gen_bool(0.75) {
                        mix.choose(&mut rng).unwrap().choose(&mut rng).unwrap().as_str()
                    } else {
                        shared.choose(&mut rng).unwrap().as_str()
                    }
                })
                .collect();
            Document::new(format!("doc{i:05}"), text.join(" "))
        })
        .collect();
    Fixture { pages, docs, topic_words }
}

/// Random sparse concept vector with `x` nonzero concepts out of `n`.
pub fn random_concept_vector<R: Rng + ?Sized>(n: usize, x: usize, rng: &mut R) -> ConceptVector {
    let mut entries: Vec<(u32, DswScore)> = rand::seq::index::sample(rng, n, x.min(n))
        .into_iter()
        .map(|c| (c as u32, DswScore::new(rng.gen_range(1..=5), rng.gen_range(0.0..10.0))))
        .collect();
    entries.sort_by(|a, b| dsw_compare(&b.1, &a.1).then(a.0.cmp(&b.0)));
    ConceptVector(entries)
}

/// Random plaintext index of `docs` documents, for benches and scale tests.
pub fn random_sidecar<R: Rng + ?Sized>(docs: usize, n: usize, x: usize, rng: &mut R) -> IndexSidecar {
    IndexSidecar((0..docs).map(|i| (format!("d{i:06}"), random_concept_vector(n, x, rng))).collect())
}

/// Each user gets an independent random subset of about `share` of the docs
/// (at least one).
pub fn random_access<R: Rng + ?Sized>(
    doc_ids: &[String],
    users: usize,
    share: f64,
    rng: &mut R,
) -> AccessRights {
    (0..users)
        .map(|u| {
            let mut set: BTreeSet<String> =
                doc_ids.iter().filter(|_| rng.gen_bool(share)).cloned().collect();
            if set.is_empty() {
                if let Some(d) = doc_ids.choose(rng) {
                    set.insert(d.clone());
                }
            }
            (format!("user{u}"), set)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textindex::{process, tokenize};

    #[test]
    fn vocabulary_survives_preprocessing() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let words = vocabulary(300, &mut rng);
        let text = words.join(" ");
        assert_eq!(process(&text, &StopList::english()), words);
    }

    #[test]
    fn fixture_shape_and_determinism() {
        let cfg = SynthConfig::default();
        let f = fixture(&cfg);
        assert_eq!(f.pages.len(), 50);
        assert_eq!(f.docs.len(), 200);
        assert!(f.pages.iter().all(|p| tokenize(&p.text).len() >= 100));
        assert_eq!(f, fixture(&cfg));
        assert_eq!(f.queries(5, 3), f.queries(5, 3));
        let q = f.queries(20, 4);
        assert!(q.iter().all(|q| (2..=4).contains(&q.split(' ').count())));
    }

    #[test]
    fn random_vectors_are_sparse_and_ordered() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let cv = random_concept_vector(50, 10, &mut rng);
        assert_eq!(cv.len(), 10);
        assert!(cv.0.windows(2).all(|w| dsw_compare(&w[0].1, &w[1].1) != std::cmp::Ordering::Less));
        let ids: Vec<String> = (0..10).map(|i| format!("d{i}")).collect();
        let access = random_access(&ids, 3, 0.0, &mut rng);
        assert!(access.values().all(|s| s.len() == 1));
    }
}
