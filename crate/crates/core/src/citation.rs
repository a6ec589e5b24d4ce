//! Citation matching against an approximate author index.
//!
//! The index answers "which documents have an author surname within edit
//! distance 1 of `q`". It keys every surname `s` under `s` itself and under
//! each string obtained by deleting one character of `s`. A query looks up
//! `q` and every one-deletion variant of `q`. Two strings are within one
//! edit exactly when one of these holds:
//!
//! * `q == s` (key `q` hits key `s`),
//! * `q` is a deletion of `s` (key `q` hits a deletion key),
//! * `s` is a deletion of `q` (a deletion of `q` hits key `s`),
//! * one substitution apart (a deletion of `q` equals a deletion of `s`).
//!
//! The last case over-generates (`ab`/`ba` share `a`), so every hit is
//! verified against the true distance before it is returned.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::DocumentRecord;
use crate::error::{Error, Result};
use crate::json;
use crate::partition;
use crate::store::{self, SortedContainer};

/// A reference string lifted out of its source document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Citation {
    pub source_doc: String,
    /// Index of the entry in the source document's reference list.
    pub position: u32,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub source_doc: String,
    pub position: u32,
    /// Matched document, or `None` when nothing reached the threshold.
    pub target: Option<String>,
    /// Best score seen for this citation (0 with no candidates).
    pub score: f64,
}

impl MatchResult {
    /// Container key: `source_doc 0x00 position(u32 BE)`.
    pub fn key(&self) -> Vec<u8> {
        let mut k = Vec::with_capacity(self.source_doc.len() + 5);
        k.extend_from_slice(self.source_doc.as_bytes());
        k.push(0);
        k.extend_from_slice(&self.position.to_be_bytes());
        k
    }
}

/// One citation per non-blank reference entry.
pub fn extract_citations(doc: &DocumentRecord) -> Vec<Citation> {
    doc.references
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.trim().is_empty())
        .map(|(i, r)| Citation {
            source_doc: doc.doc_id.clone(),
            position: i as u32,
            raw: r.trim().to_string(),
        })
        .collect()
}

/// ASCII-folded, lowercased runs of letters.
fn alpha_tokens(text: &str) -> Vec<String> {
    deunicode::deunicode(text)
        .to_ascii_lowercase()
        .split(|c: char| !c.is_ascii_lowercase())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// ASCII-folded, lowercased runs of letters and digits.
fn alnum_tokens(text: &str) -> Vec<String> {
    deunicode::deunicode(text)
        .to_ascii_lowercase()
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Surname of an author name: the first token before a comma if there is
/// one ("Kowalski, Jan"), otherwise the last token ("Jan Kowalski").
/// Lowercase ASCII; empty when the name has no letters.
pub fn surname_of(author: &str) -> String {
    match author.split_once(',') {
        Some((before, _)) => alpha_tokens(before).into_iter().next(),
        None => alpha_tokens(author).pop(),
    }
    .unwrap_or_default()
}

/// `s` together with every string obtained by deleting one character.
pub fn deletion_variants(s: &str) -> BTreeSet<String> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = BTreeSet::new();
    out.insert(s.to_string());
    for i in 0..chars.len() {
        let v: String = chars[..i].iter().chain(&chars[i + 1..]).collect();
        out.insert(v);
    }
    out
}

/// Whether two strings are at Levenshtein distance ≤ 1. Linear time.
pub fn within_one_edit(a: &str, b: &str) -> bool {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (short, long) = if a.len() <= b.len() { (&a, &b) } else { (&b, &a) };
    if long.len() - short.len() > 1 {
        return false;
    }
    let prefix = short.iter().zip(long.iter()).take_while(|(x, y)| x == y).count();
    if short.len() == long.len() {
        // At most one substitution.
        prefix == short.len() || short[prefix + 1..] == long[prefix + 1..]
    } else {
        // One insertion into `short`.
        short[prefix..] == long[prefix + 1..]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
struct Posting {
    doc: String,
    surname: String,
}

/// Sorted container of surname-variant keys → (surname, doc) postings.
#[derive(Debug)]
pub struct AuthorIndex {
    store: SortedContainer,
}

/// Build the index from documents and write it to `path`.
///
/// Key/posting pairs are produced per partition and then sorted by
/// `(key, posting)`, so the file bytes do not depend on `partitions`.
pub fn build_author_index(docs: &[DocumentRecord], path: impl AsRef<Path>, partitions: usize) -> Result<AuthorIndex> {
    build_author_index_with_interval(docs, path, partitions, store::DEFAULT_SAMPLING)
}

pub fn build_author_index_with_interval(
    docs: &[DocumentRecord],
    path: impl AsRef<Path>,
    partitions: usize,
    interval: usize,
) -> Result<AuthorIndex> {
    let parts = partition::split_indices(docs.iter().map(|d| d.doc_id.as_bytes()), partitions);
    let mut entries: Vec<(Vec<u8>, Vec<u8>)> = parts
        .par_iter()
        .map(|idx| -> Result<Vec<(Vec<u8>, Vec<u8>)>> {
            let mut out = Vec::new();
            for &i in idx {
                let doc = &docs[i];
                let surnames: BTreeSet<String> = doc
                    .authors
                    .iter()
                    .map(|a| surname_of(a))
                    .filter(|s| !s.is_empty())
                    .collect();
                for s in surnames {
                    let value = json::to_canonical_vec(&Posting {
                        doc: doc.doc_id.clone(),
                        surname: s.clone(),
                    })?;
                    for key in deletion_variants(&s) {
                        out.push((key.into_bytes(), value.clone()));
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    entries.par_sort_unstable();
    entries.dedup();
    let store = store::write_sorted(entries, path, interval)?;
    Ok(AuthorIndex { store })
}

impl AuthorIndex {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Ok(AuthorIndex {
            store: SortedContainer::open(path)?,
        })
    }

    pub fn store(&self) -> &SortedContainer {
        &self.store
    }

    /// Documents with an author surname within edit distance 1 of `q`.
    pub fn query(&self, q: &str) -> Result<BTreeSet<String>> {
        let mut out = BTreeSet::new();
        if q.is_empty() {
            return Ok(out);
        }
        for key in deletion_variants(q) {
            for v in self.store.lookup(key.as_bytes())? {
                let p: Posting = json::from_slice(&v)?;
                if within_one_edit(q, &p.surname) {
                    out.insert(p.doc);
                }
            }
        }
        Ok(out)
    }
}

/// Index tokens of a citation: distinct letter runs of length ≥ 3.
fn citation_query_tokens(raw: &str) -> BTreeSet<String> {
    alpha_tokens(raw).into_iter().filter(|t| t.len() >= 3).collect()
}

fn candidates_with<F>(citation: &Citation, cap: usize, mut query: F) -> Result<Vec<String>>
where
    F: FnMut(&str) -> Result<BTreeSet<String>>,
{
    let mut hits: BTreeMap<String, usize> = BTreeMap::new();
    for tok in citation_query_tokens(&citation.raw) {
        for doc in query(&tok)? {
            *hits.entry(doc).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = hits.into_iter().collect();
    if ranked.len() > cap {
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(cap);
        ranked.sort_by(|a, b| a.0.cmp(&b.0));
    }
    Ok(ranked.into_iter().map(|(d, _)| d).collect())
}

/// Candidate documents for a citation: union of index hits over its tokens
/// of length ≥ 3, capped at `cap` by hit count (ties to the smaller id).
/// Sorted by doc_id.
pub fn candidates(citation: &Citation, index: &AuthorIndex, cap: usize) -> Result<Vec<String>> {
    if cap == 0 {
        return Err(Error::InvalidArgument("candidate cap must be >= 1".into()));
    }
    candidates_with(citation, cap, |t| index.query(t))
}

fn trigrams(tokens: &[String]) -> Vec<[u8; 3]> {
    let mut s = Vec::with_capacity(2 + tokens.iter().map(|t| t.len() + 1).sum::<usize>());
    s.push(b' ');
    for t in tokens {
        s.extend_from_slice(t.as_bytes());
        s.push(b' ');
    }
    let mut grams: Vec<[u8; 3]> = s.windows(3).map(|w| [w[0], w[1], w[2]]).collect();
    grams.sort_unstable();
    grams.dedup();
    grams
}

fn jaccard_sorted(a: &[[u8; 3]], b: &[[u8; 3]]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Character-trigram Jaccard between a title and the best-aligned window of
/// the citation with as many tokens as the title.
pub fn title_trigram_jaccard(raw: &str, title: &str) -> f64 {
    let title_toks = alnum_tokens(title);
    if title_toks.is_empty() {
        return 0.0;
    }
    let cit_toks = alnum_tokens(raw);
    if cit_toks.is_empty() {
        return 0.0;
    }
    let title_grams = trigrams(&title_toks);
    let w = title_toks.len().min(cit_toks.len());
    cit_toks
        .windows(w)
        .map(|win| jaccard_sorted(&trigrams(win), &title_grams))
        .fold(0.0, f64::max)
}

/// Fraction of the document's author surnames that occur as citation tokens.
pub fn author_token_overlap(raw: &str, doc: &DocumentRecord) -> f64 {
    let surnames: BTreeSet<String> = doc
        .authors
        .iter()
        .map(|a| surname_of(a))
        .filter(|s| !s.is_empty())
        .collect();
    if surnames.is_empty() {
        return 0.0;
    }
    let toks: BTreeSet<String> = alpha_tokens(raw).into_iter().collect();
    surnames.iter().filter(|s| toks.contains(*s)).count() as f64 / surnames.len() as f64
}

/// 1 if a four-digit number in the citation equals the document's year.
pub fn year_match(raw: &str, doc: &DocumentRecord) -> f64 {
    let Some(year) = doc.year else { return 0.0 };
    let hit = raw
        .split(|c: char| !c.is_ascii_digit())
        .filter(|t| t.len() == 4)
        .any(|t| t.parse::<u32>() == Ok(year));
    if hit {
        1.0
    } else {
        0.0
    }
}

pub const TITLE_WEIGHT: f64 = 0.5;
pub const AUTHOR_WEIGHT: f64 = 0.3;
pub const YEAR_WEIGHT: f64 = 0.2;

/// Similarity of a citation string to a document, in [0, 1].
pub fn score(citation: &Citation, doc: &DocumentRecord) -> f64 {
    TITLE_WEIGHT * title_trigram_jaccard(&citation.raw, &doc.title)
        + AUTHOR_WEIGHT * author_token_overlap(&citation.raw, doc)
        + YEAR_WEIGHT * year_match(&citation.raw, doc)
}

/// Highest-scoring document among `candidates` (ties to the smaller id),
/// or `None` if the best score is below `threshold`.
pub fn best_match<'a, I>(citation: &Citation, candidates: I, docs: &HashMap<&str, &DocumentRecord>, threshold: f64) -> MatchResult
where
    I: IntoIterator<Item = &'a str>,
{
    let mut best: Option<(&str, f64)> = None;
    for id in candidates {
        let Some(doc) = docs.get(id) else {
            log::warn!("candidate {id:?} is not in the corpus");
            continue;
        };
        let s = score(citation, doc);
        best = match best {
            Some((bid, bs)) if bs > s || (bs == s && bid <= id) => Some((bid, bs)),
            _ => Some((id, s)),
        };
    }
    let (target, score) = match best {
        Some((id, s)) if s >= threshold => (Some(id.to_string()), s),
        Some((_, s)) => (None, s),
        None => (None, 0.0),
    };
    MatchResult {
        source_doc: citation.source_doc.clone(),
        position: citation.position,
        target,
        score,
    }
}

/// Resolution settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolveOptions {
    pub threshold: f64,
    pub cap: usize,
    pub partitions: usize,
}

impl Default for ResolveOptions {
    fn default() -> Self {
        ResolveOptions {
            threshold: 0.5,
            cap: 100,
            partitions: 1,
        }
    }
}

/// Resolve every citation to its best candidate document.
///
/// Citations are partitioned by `(source_doc, position)` key; candidate
/// generation and scoring run per partition against the shared read-only
/// index. Results are sorted by `(source_doc, position)`.
pub fn resolve(
    citations: &[Citation],
    index: &AuthorIndex,
    docs: &[DocumentRecord],
    opts: ResolveOptions,
) -> Result<Vec<MatchResult>> {
    if !(0.0..=1.0).contains(&opts.threshold) {
        return Err(Error::InvalidArgument(format!("threshold must be in [0, 1], got {}", opts.threshold)));
    }
    if opts.cap == 0 {
        return Err(Error::InvalidArgument("candidate cap must be >= 1".into()));
    }
    let by_id: HashMap<&str, &DocumentRecord> = docs.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let keys: Vec<Vec<u8>> = citations
        .iter()
        .map(|c| {
            MatchResult {
                source_doc: c.source_doc.clone(),
                position: c.position,
                target: None,
                score: 0.0,
            }
            .key()
        })
        .collect();
    let parts = partition::split_indices(keys.iter().map(Vec::as_slice), opts.partitions);
    let mut results: Vec<MatchResult> = parts
        .par_iter()
        .map(|idx| -> Result<Vec<MatchResult>> {
            let mut cache: HashMap<String, BTreeSet<String>> = HashMap::new();
            let mut out = Vec::with_capacity(idx.len());
            for &i in idx {
                let c = &citations[i];
                let cands = candidates_with(c, opts.cap, |tok| {
                    if let Some(hit) = cache.get(tok) {
                        return Ok(hit.clone());
                    }
                    let hit = index.query(tok)?;
                    cache.insert(tok.to_string(), hit.clone());
                    Ok(hit)
                })?;
                out.push(best_match(c, cands.iter().map(String::as_str), &by_id, opts.threshold));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    results.sort_by(|a, b| a.source_doc.cmp(&b.source_doc).then(a.position.cmp(&b.position)));
    Ok(results)
}
