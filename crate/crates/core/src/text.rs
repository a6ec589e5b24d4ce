//! Text preprocessing: tokenization, stop words, stemming, n-gram phrases,
//! high document-frequency pruning and section-weighted term counting.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::DocumentRecord;
use crate::error::{Error, Result};
use crate::partition;
use crate::porter;

/// Weighted term counts for one document. Counts are finite and > 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermCountVector {
    pub doc_id: String,
    pub counts: BTreeMap<String, f64>,
}

impl TermCountVector {
    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Per-section multipliers applied to raw term occurrences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionWeights {
    pub title_w: f64,
    pub abstract_w: f64,
    pub body_w: f64,
    pub keyword_w: f64,
}

impl Default for SectionWeights {
    fn default() -> Self {
        SectionWeights {
            title_w: 3.0,
            abstract_w: 2.0,
            body_w: 1.0,
            keyword_w: 3.0,
        }
    }
}

impl SectionWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.title_w, self.abstract_w, self.body_w, self.keyword_w];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument("section weights must be finite and >= 0".into()));
        }
        if all.iter().all(|w| *w == 0.0) {
            return Err(Error::InvalidArgument("at least one section weight must be > 0".into()));
        }
        Ok(())
    }
}

/// A set of lowercase stop words.
#[derive(Debug, Clone, Default)]
pub struct StopList(HashSet<String>);

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

impl StopList {
    /// Parse the stop-word file format: one word per line, `#` starts a
    /// comment that runs to the end of the line.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(str::to_lowercase)
            .collect();
        StopList(words)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    /// The bundled English list.
    pub fn english() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for StopList {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        StopList(iter.into_iter().map(Into::into).collect())
    }
}

/// Lowercased maximal runs of Unicode letters and digits, in text order.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn remove_stopwords(tokens: Vec<String>, stoplist: &StopList) -> Vec<String> {
    tokens.into_iter().filter(|t| !stoplist.contains(t)).collect()
}

/// Frequent contiguous n-grams, stored as token sequences.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhraseSet {
    phrases: HashSet<Vec<String>>,
    max_len: usize,
}

impl PhraseSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, phrase: Vec<String>) {
        if phrase.len() >= 2 {
            self.max_len = self.max_len.max(phrase.len());
            self.phrases.insert(phrase);
        }
    }

    pub fn contains(&self, tokens: &[String]) -> bool {
        self.phrases.contains(tokens)
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    /// Phrases rendered with single spaces, sorted.
    pub fn to_strings(&self) -> BTreeSet<String> {
        self.phrases.iter().map(|p| p.join(" ")).collect()
    }
}

impl<'a> FromIterator<&'a str> for PhraseSet {
    /// Build from space-separated phrases, e.g. `"machine learning"`.
    fn from_iter<I: IntoIterator<Item = &'a str>>(iter: I) -> Self {
        let mut set = PhraseSet::new();
        for p in iter {
            set.insert(p.split_whitespace().map(str::to_string).collect());
        }
        set
    }
}

/// Document frequencies of all n-grams (2 ≤ n ≤ `max_n`) over a slice of
/// documents. Each document is a list of segments; n-grams never cross a
/// segment boundary.
pub fn ngram_document_frequency<D>(docs: &[D], max_n: usize) -> HashMap<Vec<String>, usize>
where
    D: AsRef<[Vec<String>]>,
{
    let mut df: HashMap<Vec<String>, usize> = HashMap::new();
    for doc in docs {
        let mut seen: HashSet<&[String]> = HashSet::new();
        for seg in doc.as_ref() {
            for n in 2..=max_n {
                for gram in seg.windows(n) {
                    seen.insert(gram);
                }
            }
        }
        for gram in seen {
            *df.entry(gram.to_vec()).or_insert(0) += 1;
        }
    }
    df
}

fn check_phrase_params(min_df: usize, max_n: usize) -> Result<()> {
    if min_df < 2 {
        return Err(Error::InvalidArgument(format!("min_df must be >= 2, got {min_df}")));
    }
    if !(2..=3).contains(&max_n) {
        return Err(Error::InvalidArgument(format!("max_n must be 2 or 3, got {max_n}")));
    }
    Ok(())
}

/// All contiguous n-grams whose document frequency is at least `min_df`.
pub fn detect_phrases<D>(docs: &[D], min_df: usize, max_n: usize) -> Result<PhraseSet>
where
    D: AsRef<[Vec<String>]>,
{
    check_phrase_params(min_df, max_n)?;
    let df = ngram_document_frequency(docs, max_n);
    Ok(phrases_from_df(df, min_df))
}

fn phrases_from_df(df: HashMap<Vec<String>, usize>, min_df: usize) -> PhraseSet {
    let mut set = PhraseSet::new();
    for (gram, count) in df {
        if count >= min_df {
            set.insert(gram);
        }
    }
    set
}

/// Greedy left-to-right longest-match phrase replacement. Matched tokens are
/// joined with `_` and consumed.
pub fn apply_phrases(tokens: &[String], phrases: &PhraseSet) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        let longest = (2..=phrases.max_len.min(tokens.len() - i))
            .rev()
            .find(|&n| phrases.contains(&tokens[i..i + n]));
        match longest {
            Some(n) => {
                out.push(tokens[i..i + n].join("_"));
                i += n;
            }
            None => {
                out.push(tokens[i].clone());
                i += 1;
            }
        }
    }
    out
}

/// Terms whose document frequency ratio exceeds `theta`.
pub fn prune_high_df(df: &BTreeMap<String, usize>, corpus_size: usize, theta: f64) -> Result<BTreeSet<String>> {
    if corpus_size == 0 {
        return Err(Error::InvalidArgument("corpus_size must be >= 1".into()));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidArgument(format!("theta must be in (0, 1], got {theta}")));
    }
    Ok(df
        .iter()
        .filter(|(_, &n)| n as f64 / corpus_size as f64 > theta)
        .map(|(t, _)| t.clone())
        .collect())
}

/// A document reduced to stemmed tokens, before phrase replacement.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDocument {
    pub doc_id: String,
    /// Token stream of every section, title first and body last.
    pub sections: [Vec<String>; 3],
    /// One term per keyword (stemmed tokens joined by `_`).
    pub keywords: Vec<String>,
}

impl AsRef<[Vec<String>]> for PreparedDocument {
    fn as_ref(&self) -> &[Vec<String>] {
        &self.sections
    }
}

fn stem_filtered(text: &str, stoplist: &StopList) -> Vec<String> {
    // Stop words are removed before stemming, and stems that collide with a
    // stop word (e.g. "hers" -> "her") are removed too.
    remove_stopwords(tokenize(text), stoplist)
        .iter()
        .map(|t| porter::stem(t))
        .filter(|t| !stoplist.contains(t))
        .collect()
}

pub fn prepare(doc: &DocumentRecord, stoplist: &StopList) -> PreparedDocument {
    let keywords = doc
        .keywords
        .iter()
        .map(|k| stem_filtered(k, stoplist).join("_"))
        .filter(|k| !k.is_empty())
        .collect();
    PreparedDocument {
        doc_id: doc.doc_id.clone(),
        sections: [
            stem_filtered(&doc.title, stoplist),
            stem_filtered(&doc.r#abstract, stoplist),
            stem_filtered(&doc.body, stoplist),
        ],
        keywords,
    }
}

fn count_prepared(
    doc: &PreparedDocument,
    weights: &SectionWeights,
    phrases: &PhraseSet,
    banned: &BTreeSet<String>,
) -> TermCountVector {
    let section_w = [weights.title_w, weights.abstract_w, weights.body_w];
    let mut raw: [BTreeMap<String, u64>; 4] = Default::default();
    for (s, tokens) in doc.sections.iter().enumerate() {
        for term in apply_phrases(tokens, phrases) {
            if !banned.contains(&term) {
                *raw[s].entry(term).or_insert(0) += 1;
            }
        }
    }
    for kw in &doc.keywords {
        if !banned.contains(kw) {
            *raw[3].entry(kw.clone()).or_insert(0) += 1;
        }
    }
    let all_w = [section_w[0], section_w[1], section_w[2], weights.keyword_w];
    let terms: BTreeSet<&String> = raw.iter().flat_map(|m| m.keys()).collect();
    let mut counts = BTreeMap::new();
    for t in terms {
        // Fixed section order keeps the float sum reproducible.
        let n: f64 = (0..4)
            .map(|s| all_w[s] * raw[s].get(t).copied().unwrap_or(0) as f64)
            .sum();
        if n > 0.0 {
            counts.insert(t.clone(), n);
        }
    }
    TermCountVector {
        doc_id: doc.doc_id.clone(),
        counts,
    }
}

/// Section-weighted term counts for one document.
pub fn extract_terms(
    doc: &DocumentRecord,
    weights: &SectionWeights,
    stoplist: &StopList,
    phrases: &PhraseSet,
    banned: &BTreeSet<String>,
) -> TermCountVector {
    count_prepared(&prepare(doc, stoplist), weights, phrases, banned)
}

/// Corpus-level preprocessing configuration.
#[derive(Debug, Clone)]
pub struct TextPipeline {
    pub weights: SectionWeights,
    pub stoplist: StopList,
    pub min_df: usize,
    pub max_n: usize,
    pub theta: f64,
}

impl Default for TextPipeline {
    fn default() -> Self {
        TextPipeline {
            weights: SectionWeights::default(),
            stoplist: StopList::english(),
            min_df: 5,
            max_n: 3,
            theta: 0.5,
        }
    }
}

/// Output of [`TextPipeline::run`].
#[derive(Debug, Clone)]
pub struct TextPipelineOutput {
    pub vectors: Vec<TermCountVector>,
    pub phrases: PhraseSet,
    pub banned: BTreeSet<String>,
}

impl TextPipeline {
    /// Two corpus passes (phrase detection, then high-df pruning) around the
    /// per-document extraction. Partition-local counts are merged before
    /// each corpus-level decision, so the result does not depend on
    /// `partitions`. Vectors come back in input order.
    pub fn run(&self, docs: &[DocumentRecord], partitions: usize) -> Result<TextPipelineOutput> {
        self.weights.validate()?;
        check_phrase_params(self.min_df, self.max_n)?;
        let parts = partition::split_indices(docs.iter().map(|d| d.doc_id.as_bytes()), partitions);

        let prepared: Vec<Vec<(usize, PreparedDocument)>> = parts
            .par_iter()
            .map(|idx| idx.iter().map(|&i| (i, prepare(&docs[i], &self.stoplist))).collect())
            .collect();

        let ngram_df = prepared
            .par_iter()
            .map(|part| {
                let docs: Vec<&PreparedDocument> = part.iter().map(|(_, d)| d).collect();
                ngram_document_frequency(&docs, self.max_n)
            })
            .reduce(HashMap::new, merge_counts);
        let phrases = phrases_from_df(ngram_df, self.min_df);

        let none = BTreeSet::new();
        let unpruned: Vec<Vec<(usize, TermCountVector)>> = prepared
            .par_iter()
            .map(|part| {
                part.iter()
                    .map(|(i, d)| (*i, count_prepared(d, &self.weights, &phrases, &none)))
                    .collect()
            })
            .collect();

        let df = unpruned
            .par_iter()
            .map(|part| {
                let mut df: HashMap<String, usize> = HashMap::new();
                for (_, v) in part {
                    for t in v.counts.keys() {
                        *df.entry(t.clone()).or_insert(0) += 1;
                    }
                }
                df
            })
            .reduce(HashMap::new, merge_counts);
        let df: BTreeMap<String, usize> = df.into_iter().collect();
        let banned = if docs.is_empty() {
            BTreeSet::new()
        } else {
            prune_high_df(&df, docs.len(), self.theta)?
        };

        let mut vectors: Vec<Option<TermCountVector>> = vec![None; docs.len()];
        for part in unpruned {
            for (i, mut v) in part {
                v.counts.retain(|t, _| !banned.contains(t));
                vectors[i] = Some(v);
            }
        }
        Ok(TextPipelineOutput {
            vectors: vectors.into_iter().map(|v| v.expect("every document is in one partition")).collect(),
            phrases,
            banned,
        })
    }
}

fn merge_counts<K: std::hash::Hash + Eq>(mut a: HashMap<K, usize>, b: HashMap<K, usize>) -> HashMap<K, usize> {
    if a.len() < b.len() {
        return merge_counts(b, a);
    }
    for (k, n) in b {
        *a.entry(k).or_insert(0) += n;
    }
    a
}
