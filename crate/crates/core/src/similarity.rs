//! All-pairs document similarity over common terms.
//!
//! Every document vector is L2-normalised over all of its terms first. After
//! that, the dot product over the terms two documents share is exactly the
//! full cosine similarity, so the similarity function only ever needs the
//! aligned weights of common terms.
//!
//! Pairs are generated from term posting lists: each term emits a partial
//! contribution for every pair of documents in its postings, and the
//! contributions are grouped by pair. Documents sharing no term never meet.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::partition_of;
use crate::weighting::{l2_norm, WeightVector};

/// Scores within this distance below a threshold still pass it, so that
/// threshold 1.0 keeps exact duplicates whose dot product rounds below 1.
pub const SCORE_EPSILON: f64 = 1e-12;

/// `⟨doc_a, doc_b, score⟩` with `doc_a < doc_b` bytewise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTriple {
    #[serde(rename = "a")]
    pub doc_a: String,
    #[serde(rename = "b")]
    pub doc_b: String,
    pub score: f64,
}

impl SimilarityTriple {
    /// Container key: `doc_a 0x00 doc_b`.
    pub fn key(&self) -> Vec<u8> {
        let mut k = Vec::with_capacity(self.doc_a.len() + self.doc_b.len() + 1);
        k.extend_from_slice(self.doc_a.as_bytes());
        k.push(0);
        k.extend_from_slice(self.doc_b.as_bytes());
        k
    }
}

/// A pluggable similarity measure.
///
/// `similarity` receives the weights of the terms two documents have in
/// common, aligned on the same term order. It must be symmetric:
/// `similarity(a, b, u, v) == similarity(b, a, v, u)`.
pub trait SimilarityFunction: Sync {
    /// Per-document preparation applied before pairing. `None` marks the
    /// document as inert; it takes no part in pairing.
    fn normalize(&self, w: &WeightVector) -> Option<WeightVector>;

    fn similarity(&self, id_a: &str, id_b: &str, common_a: &[f64], common_b: &[f64]) -> f64;
}

/// Cosine similarity (default).
#[derive(Debug, Clone, Copy, Default)]
pub struct Cosine;

impl SimilarityFunction for Cosine {
    fn normalize(&self, w: &WeightVector) -> Option<WeightVector> {
        normalize(w)
    }

    fn similarity(&self, _id_a: &str, _id_b: &str, common_a: &[f64], common_b: &[f64]) -> f64 {
        cosine(common_a, common_b)
    }
}

/// Divide each weight by the full-vector L2 norm. Zero-norm vectors are
/// inert and yield `None`.
pub fn normalize(w: &WeightVector) -> Option<WeightVector> {
    let norm = l2_norm(&w.entries);
    if norm == 0.0 || !norm.is_finite() {
        log::debug!("document {:?} has zero norm; excluded from pairing", w.doc_id);
        return None;
    }
    let entries: Vec<(String, f64)> = w
        .entries
        .iter()
        .filter(|(_, x)| *x != 0.0)
        .map(|(t, x)| (t.clone(), x / norm))
        .collect();
    let norm = l2_norm(&entries);
    Some(WeightVector {
        doc_id: w.doc_id.clone(),
        entries,
        norm,
    })
}

/// Dot product of aligned common-term weights of two normalised vectors.
pub fn cosine(common_a: &[f64], common_b: &[f64]) -> f64 {
    debug_assert_eq!(common_a.len(), common_b.len());
    common_a.iter().zip(common_b).map(|(a, b)| a * b).sum()
}

/// The terms two documents share, with aligned weights, sorted by term.
#[derive(Debug, Clone, PartialEq)]
pub struct CommonTerms {
    pub doc_a: String,
    pub doc_b: String,
    pub terms: Vec<String>,
    pub weights_a: Vec<f64>,
    pub weights_b: Vec<f64>,
}

fn check_unique(vectors: &[&WeightVector]) -> Result<()> {
    for w in vectors.windows(2) {
        if w[0].doc_id == w[1].doc_id {
            return Err(Error::DuplicateDocId(w[0].doc_id.clone()));
        }
    }
    Ok(())
}

type TermPostings<'a> = (&'a str, &'a [(u32, f64)]);
type Contribution<'a> = (&'a str, f64, f64);
type Contribs<'a> = HashMap<(u32, u32), Vec<Contribution<'a>>>;

/// One tuple per unordered pair of documents sharing at least one term.
///
/// Terms are split into `partitions` groups by hash; each group emits pair
/// contributions independently, and the per-pair contributions are sorted by
/// term before alignment, so the output does not depend on `partitions`.
/// Output is sorted by `(doc_a, doc_b)`.
pub fn generate_pairs(vectors: &[WeightVector], partitions: usize) -> Result<Vec<CommonTerms>> {
    let mut docs: Vec<&WeightVector> = vectors.iter().collect();
    docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    check_unique(&docs)?;

    // term -> postings of (doc index in id order, weight)
    let mut postings: BTreeMap<&str, Vec<(u32, f64)>> = BTreeMap::new();
    for (i, d) in docs.iter().enumerate() {
        for (t, w) in &d.entries {
            postings.entry(t.as_str()).or_default().push((i as u32, *w));
        }
    }
    let p = partitions.max(1);
    let mut by_partition: Vec<Vec<TermPostings<'_>>> = vec![Vec::new(); p];
    for (t, list) in &postings {
        if list.len() >= 2 {
            by_partition[partition_of(t.as_bytes(), p)].push((t, list.as_slice()));
        }
    }

    let merged: Contribs<'_> = by_partition
        .into_par_iter()
        .map(|terms| {
            let mut acc: Contribs<'_> = HashMap::new();
            for (t, list) in terms {
                for (x, &(a, wa)) in list.iter().enumerate() {
                    for &(b, wb) in &list[x + 1..] {
                        acc.entry((a, b)).or_default().push((t, wa, wb));
                    }
                }
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, mut v) in b {
                a.entry(k).or_default().append(&mut v);
            }
            a
        });

    let mut pairs: Vec<((u32, u32), Vec<Contribution<'_>>)> = merged.into_iter().collect();
    pairs.par_sort_unstable_by_key(|(k, _)| *k);
    Ok(pairs
        .into_par_iter()
        .map(|((a, b), mut contribs)| {
            contribs.sort_unstable_by(|x, y| x.0.cmp(y.0));
            CommonTerms {
                doc_a: docs[a as usize].doc_id.clone(),
                doc_b: docs[b as usize].doc_id.clone(),
                terms: contribs.iter().map(|c| c.0.to_string()).collect(),
                weights_a: contribs.iter().map(|c| c.1).collect(),
                weights_b: contribs.iter().map(|c| c.2).collect(),
            }
        })
        .collect())
}

/// Similarity settings for [`similarity_run`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityOptions {
    pub threshold: f64,
    pub topk: Option<usize>,
    pub partitions: usize,
}

impl Default for SimilarityOptions {
    fn default() -> Self {
        SimilarityOptions {
            threshold: 0.0,
            topk: None,
            partitions: 1,
        }
    }
}

/// Score every pair of raw weight vectors after normalising them.
///
/// Triples scoring below `threshold` are dropped. With `topk`, a triple is
/// kept only if it ranks within the top `k` of both of its documents
/// (descending score, ties to the smaller partner id), so no document
/// appears in more than `k` triples. Output is sorted by `(doc_a, doc_b)`.
pub fn similarity_run<F: SimilarityFunction + ?Sized>(
    vectors: &[WeightVector],
    func: &F,
    opts: SimilarityOptions,
) -> Result<Vec<SimilarityTriple>> {
    if !(0.0..=1.0).contains(&opts.threshold) {
        return Err(Error::InvalidArgument(format!("threshold must be in [0, 1], got {}", opts.threshold)));
    }
    let normalized: Vec<WeightVector> = vectors.iter().filter_map(|w| func.normalize(w)).collect();
    let pairs = generate_pairs(&normalized, opts.partitions)?;
    let mut triples: Vec<SimilarityTriple> = pairs
        .into_par_iter()
        .map(|p| {
            let score = func.similarity(&p.doc_a, &p.doc_b, &p.weights_a, &p.weights_b);
            SimilarityTriple {
                doc_a: p.doc_a,
                doc_b: p.doc_b,
                score,
            }
        })
        .filter(|t| t.score >= opts.threshold - SCORE_EPSILON)
        .collect();
    if let Some(k) = opts.topk {
        triples = keep_topk(triples, k);
    }
    Ok(triples)
}

fn keep_topk(triples: Vec<SimilarityTriple>, k: usize) -> Vec<SimilarityTriple> {
    let mut per_doc: HashMap<&str, Vec<(f64, &str, usize)>> = HashMap::new();
    for (i, t) in triples.iter().enumerate() {
        per_doc.entry(&t.doc_a).or_default().push((t.score, &t.doc_b, i));
        per_doc.entry(&t.doc_b).or_default().push((t.score, &t.doc_a, i));
    }
    let mut rank_ok = vec![0u8; triples.len()];
    for list in per_doc.values_mut() {
        list.sort_by(|x, y| y.0.total_cmp(&x.0).then_with(|| x.1.cmp(y.1)));
        for &(_, _, i) in list.iter().take(k) {
            rank_ok[i] += 1;
        }
    }
    triples
        .into_iter()
        .zip(rank_ok)
        .filter(|(_, r)| *r == 2)
        .map(|(t, _)| t)
        .collect()
}
