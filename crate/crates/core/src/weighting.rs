//! TFIDF term weighting and corpus statistics.
//!
//! ```text
//! tf(t, d)    = n(t, d) / Σ_k n(k, d)
//! idf(t)      = ln(|D| / |{d : t ∈ d}|)
//! w(t, d)     = tf(t, d) · idf(t)
//! ```
//!
//! Terms whose weight is zero (`idf = 0`, i.e. present in every document)
//! are dropped from the weight vector, so downstream similarity only ever
//! sees non-zero weights.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::text::TermCountVector;

/// Documents plus their document-frequency table.
#[derive(Debug, Clone)]
pub struct Corpus {
    docs: Vec<TermCountVector>,
    df: BTreeMap<String, usize>,
}

impl Corpus {
    pub fn new(docs: Vec<TermCountVector>) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::InvalidArgument("corpus must contain at least one document".into()));
        }
        let mut ids = BTreeSet::new();
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for d in &docs {
            if !ids.insert(d.doc_id.as_str()) {
                return Err(Error::DuplicateDocId(d.doc_id.clone()));
            }
            for t in d.counts.keys() {
                *df.entry(t.clone()).or_insert(0) += 1;
            }
        }
        Ok(Corpus { docs, df })
    }

    pub fn docs(&self) -> &[TermCountVector] {
        &self.docs
    }

    pub fn size(&self) -> usize {
        self.docs.len()
    }

    pub fn df(&self) -> &BTreeMap<String, usize> {
        &self.df
    }
}

/// A document's TFIDF weights, sorted by term.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub doc_id: String,
    pub entries: Vec<(String, f64)>,
    pub norm: f64,
}

impl WeightVector {
    /// Build from entries, sorting by term and computing the L2 norm.
    pub fn new(doc_id: impl Into<String>, mut entries: Vec<(String, f64)>) -> Self {
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let norm = l2_norm(&entries);
        WeightVector {
            doc_id: doc_id.into(),
            entries,
            norm,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<f64> {
        self.entries
            .binary_search_by(|(t, _)| t.as_str().cmp(term))
            .ok()
            .map(|i| self.entries[i].1)
    }
}

pub(crate) fn l2_norm(entries: &[(String, f64)]) -> f64 {
    entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
}

#[derive(Serialize, Deserialize)]
struct WeightVectorJson {
    doc_id: String,
    norm: f64,
    weights: BTreeMap<String, f64>,
}

impl Serialize for WeightVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        WeightVectorJson {
            doc_id: self.doc_id.clone(),
            norm: self.norm,
            weights: self.entries.iter().cloned().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for WeightVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = WeightVectorJson::deserialize(d)?;
        Ok(WeightVector {
            doc_id: j.doc_id,
            entries: j.weights.into_iter().collect(),
            norm: j.norm,
        })
    }
}

pub fn term_frequency(v: &TermCountVector) -> Result<BTreeMap<String, f64>> {
    let total: f64 = v.counts.values().sum();
    if v.counts.is_empty() || total <= 0.0 {
        return Err(Error::EmptyDocument(v.doc_id.clone()));
    }
    Ok(v.counts.iter().map(|(t, n)| (t.clone(), n / total)).collect())
}

/// idf of every term in the corpus, natural log.
pub fn inverse_document_frequency(corpus: &Corpus) -> BTreeMap<String, f64> {
    let size = corpus.size() as f64;
    corpus
        .df
        .iter()
        .map(|(t, &df)| (t.clone(), (size / df as f64).ln()))
        .collect()
}

/// idf of a single term; errors if the term is not in the df table.
pub fn idf_of(corpus: &Corpus, term: &str) -> Result<f64> {
    let df = corpus.df.get(term).ok_or_else(|| Error::UnknownTerm(term.to_string()))?;
    Ok((corpus.size() as f64 / *df as f64).ln())
}

/// Weight vector for one document against a sealed idf table.
pub fn weigh_document(v: &TermCountVector, idf: &BTreeMap<String, f64>) -> Result<WeightVector> {
    let tf = term_frequency(v)?;
    let mut entries = Vec::with_capacity(tf.len());
    for (t, f) in tf {
        let i = *idf.get(&t).ok_or_else(|| Error::UnknownTerm(t.clone()))?;
        let w = f * i;
        if w != 0.0 {
            entries.push((t, w));
        }
    }
    let norm = l2_norm(&entries);
    Ok(WeightVector {
        doc_id: v.doc_id.clone(),
        entries,
        norm,
    })
}

/// TFIDF weight vectors in corpus order.
pub fn tfidf_weights(corpus: &Corpus) -> Result<Vec<WeightVector>> {
    let idf = inverse_document_frequency(corpus);
    corpus.docs.iter().map(|d| weigh_document(d, &idf)).collect()
}

/// The `n` terms with the highest document frequency; ties by term.
pub fn top_frequent_terms(corpus: &Corpus, n: usize) -> Vec<(String, usize)> {
    let mut all: Vec<(String, usize)> = corpus.df.iter().map(|(t, &c)| (t.clone(), c)).collect();
    all.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    all.truncate(n);
    all
}

/// The `n` heaviest terms of a document; ties by term.
pub fn top_important_terms(w: &WeightVector, n: usize) -> Vec<(String, f64)> {
    let mut all = w.entries.clone();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    all.truncate(n);
    all
}

/// `(doc_id, distinct term count)` pairs.
pub type DocSizes = Vec<(String, usize)>;

/// Documents with the fewest and the most distinct terms; ties by doc_id.
pub fn distinct_word_extremes(corpus: &Corpus, n: usize) -> (DocSizes, DocSizes) {
    let mut counts: Vec<(String, usize)> = corpus
        .docs
        .iter()
        .map(|d| (d.doc_id.clone(), d.counts.len()))
        .collect();
    counts.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let lowest = counts.iter().take(n).cloned().collect();
    counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let highest = counts.into_iter().take(n).collect();
    (lowest, highest)
}
