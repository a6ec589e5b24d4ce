//! Independent oracles and synthetic-data generators shared by the
//! integration tests. Nothing here calls into the library's algorithms;
//! the oracles are straight-line re-derivations from the definitions.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use docmine::text::TermCountVector;
use docmine::DocumentRecord;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture_corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/sample_corpus.jsonl")
}

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "kr", "pl"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];

/// A pronounceable lowercase word of `syllables` consonant-vowel pairs.
pub fn word(rng: &mut impl Rng, syllables: usize) -> String {
    (0..syllables)
        .map(|_| format!("{}{}", ONSETS.choose(rng).unwrap(), VOWELS.choose(rng).unwrap()))
        .collect()
}

/// `n` distinct words of at least `min_len` characters.
pub fn distinct_words(rng: &mut impl Rng, n: usize, min_len: usize) -> Vec<String> {
    let mut seen = BTreeSet::new();
    while seen.len() < n {
        let syllables = rng.gen_range(2..=4);
        let w = word(rng, syllables);
        if w.len() >= min_len {
            seen.insert(w);
        }
    }
    let mut v: Vec<String> = seen.into_iter().collect();
    v.shuffle(rng);
    v
}

/// Textbook O(|a|·|b|) Levenshtein distance.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for i in 1..=a.len() {
        let mut cur = vec![i; b.len() + 1];
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// One random single-character edit of any kind.
pub fn one_edit(rng: &mut impl Rng, s: &str) -> String {
    let mut c: Vec<char> = s.chars().collect();
    let letter = |rng: &mut dyn rand::RngCore| (b'a' + rng.gen_range(0..26u8)) as char;
    match rng.gen_range(0..3) {
        0 => {
            let i = rng.gen_range(0..c.len());
            let mut x = letter(rng);
            while x == c[i] {
                x = letter(rng);
            }
            c[i] = x;
        }
        1 => {
            let i = rng.gen_range(0..=c.len());
            c.insert(i, letter(rng));
        }
        _ => {
            let i = rng.gen_range(0..c.len());
            c.remove(i);
        }
    }
    c.into_iter().collect()
}

/// Decode a container file directly from its byte layout.
pub fn decode_container(path: &Path) -> Vec<(Vec<u8>, Vec<u8>)> {
    let bytes = std::fs::read(path).unwrap();
    assert_eq!(&bytes[..4], b"SMC1");
    let mut out = Vec::new();
    let mut i = 4;
    let field = |i: &mut usize| {
        let n = u32::from_be_bytes(bytes[*i..*i + 4].try_into().unwrap()) as usize;
        let f = bytes[*i + 4..*i + 4 + n].to_vec();
        *i += 4 + n;
        f
    };
    while i < bytes.len() {
        let k = field(&mut i);
        let v = field(&mut i);
        out.push((k, v));
    }
    out
}

/// Random term-count vectors: `docs` documents over a vocabulary of `terms`
/// words, each document using between 1 and 40 distinct terms.
pub fn random_count_vectors(rng: &mut impl Rng, docs: usize, terms: usize) -> Vec<TermCountVector> {
    let vocab: Vec<String> = (0..terms).map(|i| format!("t{i:03}")).collect();
    (0..docs)
        .map(|d| {
            let k = rng.gen_range(1..=40.min(terms));
            let counts = vocab
                .choose_multiple(rng, k)
                .map(|t| (t.clone(), rng.gen_range(1..=6) as f64))
                .collect();
            TermCountVector {
                doc_id: format!("d{d:04}"),
                counts,
            }
        })
        .collect()
}

/// Dense TFIDF matrix straight from the definitions:
/// tf = n_ij / Σ_k n_kj, idf = ln(|D| / df), w = tf · idf.
/// Returns the sorted vocabulary and one row per document.
pub fn dense_tfidf(docs: &[TermCountVector]) -> (Vec<String>, Vec<Vec<f64>>) {
    let vocab: Vec<String> = docs
        .iter()
        .flat_map(|d| d.counts.keys().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let m: Vec<Vec<f64>> = docs
        .iter()
        .map(|d| vocab.iter().map(|t| d.counts.get(t).copied().unwrap_or(0.0)).collect())
        .collect();
    let n_docs = docs.len() as f64;
    let df: Vec<f64> = (0..vocab.len())
        .map(|j| m.iter().filter(|row| row[j] > 0.0).count() as f64)
        .collect();
    let w = m
        .iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            row.iter()
                .enumerate()
                .map(|(j, &n)| (n / total) * (n_docs / df[j]).ln())
                .collect()
        })
        .collect();
    (vocab, w)
}

pub fn dense_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

// ---- citation scoring, re-derived ----

fn oracle_tokens(s: &str, keep: fn(char) -> bool) -> Vec<String> {
    s.to_lowercase()
        .split(|c: char| !keep(c))
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

fn padded_trigrams(tokens: &[String]) -> HashSet<String> {
    let s: Vec<char> = format!(" {} ", tokens.join(" ")).chars().collect();
    s.windows(3).map(|w| w.iter().collect()).collect()
}

/// Best Jaccard over citation windows as long as the title.
pub fn oracle_title(raw: &str, title: &str) -> f64 {
    let t = oracle_tokens(title, |c| c.is_ascii_alphanumeric());
    let c = oracle_tokens(raw, |c| c.is_ascii_alphanumeric());
    if t.is_empty() || c.is_empty() {
        return 0.0;
    }
    let tg = padded_trigrams(&t);
    let w = t.len().min(c.len());
    let mut best: f64 = 0.0;
    for start in 0..=c.len() - w {
        let cg = padded_trigrams(&c[start..start + w]);
        let inter = cg.intersection(&tg).count() as f64;
        let union = cg.union(&tg).count() as f64;
        best = best.max(inter / union);
    }
    best
}

/// Surname: text before the first comma, else the last word.
pub fn oracle_surname(author: &str) -> String {
    let part = author.split(',').next().unwrap();
    let toks = oracle_tokens(part, |c| c.is_ascii_alphabetic());
    if author.contains(',') {
        toks.first().cloned().unwrap_or_default()
    } else {
        toks.last().cloned().unwrap_or_default()
    }
}

pub fn oracle_score(raw: &str, doc: &DocumentRecord) -> f64 {
    let title = oracle_title(raw, &doc.title);
    let words: HashSet<String> = oracle_tokens(raw, |c| c.is_ascii_alphabetic()).into_iter().collect();
    let surnames: BTreeSet<String> = doc.authors.iter().map(|a| oracle_surname(a)).filter(|s| !s.is_empty()).collect();
    let authors = if surnames.is_empty() {
        0.0
    } else {
        surnames.iter().filter(|s| words.contains(*s)).count() as f64 / surnames.len() as f64
    };
    let year = match doc.year {
        Some(y) => raw
            .split(|c: char| !c.is_ascii_digit())
            .any(|t| t.len() == 4 && t == y.to_string()) as u8 as f64,
        None => 0.0,
    };
    0.5 * title + 0.3 * authors + 0.2 * year
}

/// Exhaustive resolution: score against every document, best score wins
/// (ties to the smaller id), `None` under the threshold.
pub fn oracle_resolve(raw: &str, docs: &[DocumentRecord], threshold: f64) -> (Option<String>, f64) {
    let mut best: Option<(&str, f64)> = None;
    for d in docs {
        let s = oracle_score(raw, d);
        let better = match best {
            None => true,
            Some((id, b)) => s > b || (s == b && d.doc_id.as_str() < id),
        };
        if better {
            best = Some((&d.doc_id, s));
        }
    }
    match best {
        Some((id, s)) if s >= threshold => (Some(id.to_string()), s),
        Some((_, s)) => (None, s),
        None => (None, 0.0),
    }
}

/// A corpus of `n` documents with distinct titles. Each has 1 to 3 authors
/// drawn from `surnames` and a year in 1980..2020.
pub fn citation_corpus(rng: &mut impl Rng, n: usize, surnames: &[String]) -> Vec<DocumentRecord> {
    let title_words = distinct_words(rng, 400, 4);
    let mut titles = BTreeSet::new();
    (0..n)
        .map(|i| {
            let title = loop {
                let k = rng.gen_range(4..=8);
                let t: Vec<&str> = title_words.choose_multiple(rng, k).map(String::as_str).collect();
                let mut t = t.join(" ");
                t[..1].make_ascii_uppercase();
                if titles.insert(t.clone()) {
                    break t;
                }
            };
            let n_authors = rng.gen_range(1..=3);
            let authors = surnames
                .choose_multiple(rng, n_authors)
                .map(|s| {
                    let mut s = s.clone();
                    s[..1].make_ascii_uppercase();
                    format!("{}. {s}", (b'A' + rng.gen_range(0..26u8)) as char)
                })
                .collect();
            DocumentRecord {
                doc_id: format!("doc{i:04}"),
                title,
                authors,
                year: Some(rng.gen_range(1980..2020)),
                ..Default::default()
            }
        })
        .collect()
}

/// A citation string for `doc`; with `typo`, one author surname gets a
/// single-character edit. Returns the string and the surnames it mentions.
pub fn make_citation(rng: &mut impl Rng, doc: &DocumentRecord, typo: bool) -> String {
    let mut names: Vec<String> = doc.authors.iter().map(|a| oracle_surname(a)).collect();
    if typo {
        let i = rng.gen_range(0..names.len());
        names[i] = one_edit(rng, &names[i]);
    }
    let authors: Vec<String> = names
        .iter()
        .map(|s| {
            let mut s = s.clone();
            s[..1].make_ascii_uppercase();
            format!("{s}, {}.", (b'A' + rng.gen_range(0..26u8)) as char)
        })
        .collect();
    format!("{} {}. Proc. of Things, {}, pp. {}-{}.", authors.join(", "), doc.title, doc.year.unwrap(), rng.gen_range(1..50), rng.gen_range(50..99))
}

/// Labeled documents as normalised sparse vectors with strictly positive
/// weights; `codes` per document drawn from `code_pool`.
pub fn labeled_vectors(rng: &mut impl Rng, n: usize, terms: usize, code_pool: &[&str]) -> Vec<(String, BTreeMap<String, f64>, BTreeSet<String>)> {
    let topics = code_pool.len();
    (0..n)
        .map(|i| {
            let topic = i % topics;
            let mut codes = BTreeSet::from([code_pool[topic].to_string()]);
            if rng.gen_bool(0.25) {
                codes.insert(code_pool[rng.gen_range(0..topics)].to_string());
            }
            // Terms cluster by topic with some shared noise.
            let mut w = BTreeMap::new();
            for _ in 0..rng.gen_range(3..10) {
                let t = if rng.gen_bool(0.7) {
                    topic * (terms / topics) + rng.gen_range(0..terms / topics)
                } else {
                    rng.gen_range(0..terms)
                };
                w.insert(format!("w{t:03}"), rng.gen_range(0.1..1.0));
            }
            let norm: f64 = w.values().map(|x: &f64| x * x).sum::<f64>().sqrt();
            for x in w.values_mut() {
                *x /= norm;
            }
            (format!("L{i:03}"), w, codes)
        })
        .collect()
}

/// Cross-validated thresholds by exhaustive search, from dense cosine
/// neighbours. `folds` maps doc id → fold.
pub fn oracle_thresholds(
    docs: &[(String, BTreeMap<String, f64>, BTreeSet<String>)],
    folds: &BTreeMap<String, usize>,
    n: usize,
    criterion: &str,
) -> BTreeMap<String, usize> {
    let vocab: Vec<&String> = docs.iter().flat_map(|d| d.1.keys()).collect::<BTreeSet<_>>().into_iter().collect();
    let dense: Vec<Vec<f64>> = docs
        .iter()
        .map(|d| vocab.iter().map(|t| d.1.get(*t).copied().unwrap_or(0.0)).collect())
        .collect();
    // votes[doc][code]
    let mut votes: Vec<BTreeMap<&str, usize>> = vec![BTreeMap::new(); docs.len()];
    for (i, d) in docs.iter().enumerate() {
        let mut scored: Vec<(f64, &str, usize)> = (0..docs.len())
            .filter(|&j| folds[&docs[j].0] != folds[&d.0])
            .map(|j| (dense_cosine(&dense[i], &dense[j]), docs[j].0.as_str(), j))
            .filter(|(s, _, _)| *s > 0.0)
            .collect();
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
        for (_, _, j) in scored.into_iter().take(n) {
            for c in &docs[j].2 {
                *votes[i].entry(c.as_str()).or_default() += 1;
            }
        }
    }
    let codes: BTreeSet<&str> = docs.iter().flat_map(|d| d.2.iter().map(String::as_str)).collect();
    codes
        .into_iter()
        .map(|code| {
            let mut table = Vec::new();
            for theta in 1..=n {
                let (mut tp, mut fp, mut fn_, mut tn) = (0.0, 0.0, 0.0, 0.0);
                for (i, d) in docs.iter().enumerate() {
                    let pred = votes[i].get(code).copied().unwrap_or(0) >= theta;
                    match (pred, d.2.contains(code)) {
                        (true, true) => tp += 1.0,
                        (true, false) => fp += 1.0,
                        (false, true) => fn_ += 1.0,
                        (false, false) => tn += 1.0,
                    }
                }
                let ratio = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
                let value = match criterion {
                    "accuracy" => ratio(tp + tn, tp + fp + fn_ + tn),
                    "precision" => ratio(tp, tp + fp),
                    _ => ratio(2.0 * tp, 2.0 * tp + fp + fn_),
                };
                table.push((theta, value, tp));
            }
            let theta = if table.iter().all(|r| r.2 == 0.0) {
                n
            } else {
                // max by value, smallest theta on ties
                table.iter().fold((0, f64::NEG_INFINITY), |best, r| if r.1 > best.1 { (r.0, r.1) } else { best }).0
            };
            (code.to_string(), theta)
        })
        .collect()
}
