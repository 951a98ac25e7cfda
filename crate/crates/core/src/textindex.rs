// SPDX-License-Identifier: Apache-2.0

//! Plaintext indexing pipeline: tokenization, stop-word removal, stemming,
//! TF-IDF weighting and a plain inverted index.
//!
//! Weights are raw term counts times `ln(N / df)`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ENGLISH_STOPWORDS: &str = include_str!("../data/stopwords.txt");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self { doc_id: doc_id.into(), text: text.into() }
    }
}

/// Sparse term → weight map. Zero weights are never stored.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TermVector(BTreeMap<String, f64>);

impl TermVector {
    pub fn from_weights<I, S>(weights: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        Self(
            weights
                .into_iter()
                .filter(|(_, w)| *w != 0.0)
                .map(|(t, w)| (t.into(), w))
                .collect(),
        )
    }

    /// Binary vector: weight 1 for every distinct term.
    pub fn binary<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self(terms.into_iter().map(|t| (t.into(), 1.0)).collect())
    }

    pub fn get(&self, term: &str) -> Option<f64> {
        self.0.get(term).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(t, w)| (t.as_str(), *w))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StopList {
    words: HashSet<String>,
}

impl StopList {
    /// The bundled English list.
    pub fn english() -> Self {
        Self::parse(ENGLISH_STOPWORDS)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { words: words.into_iter().map(|w| w.into().to_lowercase()).collect() }
    }

    /// One word per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        Self::from_words(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read stop list {}: {e}", path.display()))
        })?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }
}

/// Lowercase alphabetic runs; digits and punctuation separate tokens and
/// are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn drop_stopwords(terms: Vec<String>, stoplist: &StopList) -> Vec<String> {
    terms.into_iter().filter(|t| !stoplist.contains(t)).collect()
}

fn stemmer() -> &'static Stemmer {
    static STEMMER: OnceLock<Stemmer> = OnceLock::new();
    STEMMER.get_or_init(|| Stemmer::create(Algorithm::English))
}

pub fn stem(term: &str) -> String {
    stemmer().stem(term).into_owned()
}

/// Tokenize, drop stop words and stem.
pub fn process(text: &str, stoplist: &StopList) -> Vec<String> {
    drop_stopwords(tokenize(text), stoplist)
        .iter()
        .map(|t| stem(t))
        .collect()
}

/// Processed token streams keyed by document id.
pub type Processed = BTreeMap<String, Vec<String>>;

pub fn analyze_collection(docs: &[Document], stoplist: &StopList) -> Result<Processed> {
    let mut out = BTreeMap::new();
    for doc in docs {
        if out.insert(doc.doc_id.clone(), process(&doc.text, stoplist)).is_some() {
            return Err(Error::DuplicateDocument(doc.doc_id.clone()));
        }
    }
    Ok(out)
}

pub fn term_counts(tokens: &[String]) -> BTreeMap<String, u32> {
    let mut counts = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.clone()).or_insert(0) += 1;
    }
    counts
}

/// Every (doc, term) occurrence with its TF-IDF weight, zeros included.
pub fn tfidf_table(processed: &Processed) -> BTreeMap<String, BTreeMap<String, f64>> {
    let n = processed.len() as f64;
    let counts: BTreeMap<&str, BTreeMap<String, u32>> = processed
        .iter()
        .map(|(id, toks)| (id.as_str(), term_counts(toks)))
        .collect();
    let mut df: BTreeMap<&str, u32> = BTreeMap::new();
    for tc in counts.values() {
        for term in tc.keys() {
            *df.entry(term.as_str()).or_insert(0) += 1;
        }
    }
    counts
        .iter()
        .map(|(id, tc)| {
            let row = tc
                .iter()
                .map(|(term, &c)| {
                    let idf = (n / df[term.as_str()] as f64).ln();
                    (term.clone(), c as f64 * idf)
                })
                .collect();
            (id.to_string(), row)
        })
        .collect()
}

pub fn tfidf(processed: &Processed) -> BTreeMap<String, TermVector> {
    tfidf_table(processed)
        .into_iter()
        .map(|(id, row)| (id, TermVector::from_weights(row)))
        .collect()
}

/// Term → postings of `(doc_id, weight)` sorted by doc id. Terms whose
/// weight is zero (present in every document) keep their postings so the
/// index still records which documents contain them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlainInvertedIndex {
    pub postings: BTreeMap<String, Vec<(String, f64)>>,
}

#[derive(Serialize, Deserialize)]
struct PlainIndexLine {
    term: String,
    postings: Vec<(String, f64)>,
}

impl PlainInvertedIndex {
    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    pub fn postings(&self, term: &str) -> &[(String, f64)] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for (term, postings) in &self.postings {
            let line = PlainIndexLine { term: term.clone(), postings: postings.clone() };
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
            let entry: PlainIndexLine = serde_json::from_str(&line)?;
            postings.insert(entry.term, entry.postings);
        }
        Ok(Self { postings })
    }
}

pub fn build_plain_index(processed: &Processed) -> PlainInvertedIndex {
    let mut postings: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    for (doc_id, row) in tfidf_table(processed) {
        for (term, w) in row {
            postings.entry(term).or_default().push((doc_id.clone(), w));
        }
    }
    PlainInvertedIndex { postings }
}

/// Accuracy (precision) and recall of a returned set against the relevant
/// set; each is 0 when its denominator is 0.
pub fn eval_metrics(returned: &BTreeSet<String>, relevant: &BTreeSet<String>) -> (f64, f64) {
    let hits = returned.intersection(relevant).count() as f64;
    let ratio = |den: usize| if den == 0 { 0.0 } else { hits / den as f64 };
    (ratio(returned.len()), ratio(relevant.len()))
}

/// Loads every `*.txt` file of a directory; the file stem is the doc id.
pub fn load_corpus_dir(dir: &Path) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let text = fs::read_to_string(&path)?;
        docs.push(Document::new(stem, text));
    }
    docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Economy of England!"), strings(&["economy", "of", "england"]));
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("2,000 years"), strings(&["years"]));
    }

    #[test]
    fn stopword_examples() {
        let of = StopList::from_words(["of"]);
        assert_eq!(
            drop_stopwords(strings(&["economy", "of", "england"]), &of),
            strings(&["economy", "england"])
        );
        assert!(drop_stopwords(strings(&["of", "of"]), &of).is_empty());
        let terms = strings(&["economy", "of"]);
        assert_eq!(drop_stopwords(terms.clone(), &StopList::empty()), terms);
    }

    #[test]
    fn missing_stoplist_is_config_error() {
        let err = StopList::load(Path::new("/nonexistent/stop.txt")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn stoplist_file_parsing() {
        let list = StopList::parse("# comment\nThe\n\n of \n");
        assert!(list.contains("the"));
        assert!(list.contains("of"));
        assert!(!list.contains("# comment"));
        assert!(StopList::english().contains("the"));
    }

    #[test]
    fn stem_examples() {
        assert_eq!(stem("develops"), "develop");
        assert_eq!(stem("develop"), "develop");
        assert_eq!(stem("developing"), "develop");
    }

    fn three_docs() -> Processed {
        let mut p = Processed::new();
        p.insert("d1".into(), strings(&["apple", "apple", "pear"]));
        p.insert("d2".into(), strings(&["pear", "plum"]));
        p.insert("d3".into(), strings(&["pear", "fig"]));
        p
    }

    #[test]
    fn tfidf_examples() {
        let weights = tfidf(&three_docs());
        let w = weights["d1"].get("apple").unwrap();
        assert!((w - 2.0 * 3f64.ln()).abs() < 1e-12);
        assert!((w - 2.197).abs() < 1e-3);
        // pear is in every document: idf = ln 1 = 0, so it is not stored.
        assert_eq!(weights["d1"].get("pear"), None);

        let mut single = Processed::new();
        single.insert("only".into(), strings(&["a", "b", "b"]));
        assert!(tfidf(&single)["only"].is_empty());
    }

    #[test]
    fn plain_index_examples() {
        assert_eq!(build_plain_index(&Processed::new()).term_count(), 0);
        let idx = build_plain_index(&three_docs());
        assert_eq!(idx.postings("pear").len(), 3);
        assert_eq!(idx.postings("apple"), &[("d1".to_string(), 2.0 * 3f64.ln())]);

        let mut two = Processed::new();
        two.insert("a".into(), strings(&["x", "shared"]));
        two.insert("b".into(), strings(&["shared", "y"]));
        assert_eq!(build_plain_index(&two).postings("shared").len(), 2);
    }

    #[test]
    fn duplicate_doc_ids_rejected() {
        let docs = vec![Document::new("a", "x"), Document::new("a", "y")];
        assert!(matches!(
            analyze_collection(&docs, &StopList::empty()),
            Err(Error::DuplicateDocument(_))
        ));
    }

    #[test]
    fn metric_examples() {
        let set = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
        assert_eq!(eval_metrics(&set(&["a", "b"]), &set(&["a", "c"])), (0.5, 0.5));
        assert_eq!(eval_metrics(&set(&["a", "b"]), &set(&["a", "b"])), (1.0, 1.0));
        assert_eq!(eval_metrics(&set(&["a"]), &set(&["b"])), (0.0, 0.0));
        assert_eq!(eval_metrics(&set(&[]), &set(&[])), (0.0, 0.0));
    }

    #[test]
    fn plain_index_jsonl_layout() {
        let idx = build_plain_index(&three_docs());
        let mut buf = Vec::new();
        idx.write_jsonl(&mut buf).unwrap();
        let first = String::from_utf8(buf.clone()).unwrap();
        let first = first.lines().next().unwrap();
        let v: serde_json::Value = serde_json::from_str(first).unwrap();
        assert_eq!(v["term"], "apple");
        assert_eq!(v["postings"][0][0], "d1");
        assert_eq!(PlainInvertedIndex::read_jsonl(&buf[..]).unwrap(), idx);
    }
}
