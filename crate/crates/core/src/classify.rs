//! kNN classification-code assignment.
//!
//! Model creation picks, for every classification code, the integer vote
//! threshold θ ∈ {1..n} that maximises a criterion under k-fold
//! cross-validation. Assignment gives a document code `c` when at least
//! θ(c) of its `n` nearest classified neighbours carry `c`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::DocumentRecord;
use crate::error::{Error, Result};
use crate::hash::stable_hash_seeded;
use crate::similarity::cosine;
use crate::weighting::WeightVector;

pub type Labels = BTreeMap<String, BTreeSet<String>>;

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub doc_id: String,
    /// Descending score, ties by ascending doc_id.
    pub neighbors: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Accuracy,
    Precision,
    F1,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Accuracy => "accuracy",
            Criterion::Precision => "precision",
            Criterion::F1 => "f1",
        })
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(Criterion::Accuracy),
            "precision" => Ok(Criterion::Precision),
            "f1" => Ok(Criterion::F1),
            other => Err(Error::InvalidArgument(format!("unknown criterion {other:?}"))),
        }
    }
}

/// Per-code vote thresholds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationModel {
    pub n: usize,
    pub criterion: Criterion,
    pub thresholds: BTreeMap<String, usize>,
}

/// Confusion counts for one code at one threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    /// Criterion value as an exact fraction (numerator, denominator).
    /// An undefined ratio counts as 0.
    pub fn metric(&self, c: Criterion) -> (u64, u64) {
        let (num, den) = match c {
            Criterion::Accuracy => (self.tp + self.tn, self.tp + self.fp + self.fn_ + self.tn),
            Criterion::Precision => (self.tp, self.tp + self.fp),
            Criterion::F1 => (2 * self.tp, 2 * self.tp + self.fp + self.fn_),
        };
        if den == 0 {
            (0, 1)
        } else {
            (num, den)
        }
    }
}

fn frac_gt(a: (u64, u64), b: (u64, u64)) -> bool {
    u128::from(a.0) * u128::from(b.1) > u128::from(b.0) * u128::from(a.1)
}

/// Split into (classified, unclassified) by whether codes are present.
pub fn split_labeled(corpus: &[DocumentRecord]) -> Result<(Vec<DocumentRecord>, Vec<DocumentRecord>)> {
    let (classified, unclassified): (Vec<_>, Vec<_>) = corpus.iter().cloned().partition(|d| !d.codes.is_empty());
    if classified.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    Ok((classified, unclassified))
}

/// Model-creation split: both groups are the classified documents.
pub fn model_creation_groups(corpus: &[DocumentRecord]) -> Result<(Vec<DocumentRecord>, Vec<DocumentRecord>)> {
    let (classified, _) = split_labeled(corpus)?;
    Ok((classified.clone(), classified))
}

pub fn labels_of(docs: &[DocumentRecord]) -> Labels {
    docs.iter()
        .filter(|d| !d.codes.is_empty())
        .map(|d| (d.doc_id.clone(), d.codes.iter().cloned().collect()))
        .collect()
}

fn sparse_dot(a: &WeightVector, b: &WeightVector) -> f64 {
    // Aligned common weights in term order, the same shape the similarity
    // function receives.
    let (mut i, mut j) = (0, 0);
    let (mut wa, mut wb) = (Vec::new(), Vec::new());
    while i < a.entries.len() && j < b.entries.len() {
        match a.entries[i].0.cmp(&b.entries[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                wa.push(a.entries[i].1);
                wb.push(b.entries[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    cosine(&wa, &wb)
}

/// For every target, the `n` most similar classified documents sharing at
/// least one term, excluding the target itself. Vectors must be normalised.
pub fn nearest_neighbors(targets: &[WeightVector], classified: &[WeightVector], n: usize) -> Vec<NeighborList> {
    let mut postings: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, c) in classified.iter().enumerate() {
        for (t, _) in &c.entries {
            postings.entry(t.as_str()).or_default().push(i);
        }
    }
    targets
        .par_iter()
        .map(|t| {
            let mut cands: Vec<usize> = t
                .entries
                .iter()
                .filter_map(|(term, _)| postings.get(term.as_str()))
                .flatten()
                .copied()
                .collect();
            cands.sort_unstable();
            cands.dedup();
            let mut scored: Vec<(String, f64)> = cands
                .into_iter()
                .filter(|&i| classified[i].doc_id != t.doc_id)
                .map(|i| (classified[i].doc_id.clone(), sparse_dot(t, &classified[i])))
                .collect();
            scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            scored.truncate(n);
            NeighborList {
                doc_id: t.doc_id.clone(),
                neighbors: scored,
            }
        })
        .collect()
}

/// Votes per code: each neighbour votes once for every code it carries.
pub fn count_codes(nl: &NeighborList, labels: &Labels) -> BTreeMap<String, usize> {
    let mut votes = BTreeMap::new();
    for (id, _) in &nl.neighbors {
        if let Some(codes) = labels.get(id) {
            for c in codes {
                *votes.entry(c.clone()).or_insert(0) += 1;
            }
        }
    }
    votes
}

/// Fold of every document: `stable_hash_seeded(doc_id, seed) mod k`.
pub fn kfold_split<'a, I>(doc_ids: I, k: usize, seed: u64) -> Result<BTreeMap<String, usize>>
where
    I: IntoIterator<Item = &'a str>,
{
    if k < 2 {
        return Err(Error::InvalidArgument(format!("fold count must be >= 2, got {k}")));
    }
    Ok(doc_ids
        .into_iter()
        .map(|id| (id.to_string(), (stable_hash_seeded(id.as_bytes(), seed) % k as u64) as usize))
        .collect())
}

/// A classified document's normalised vector and its codes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledVector {
    pub vector: WeightVector,
    pub codes: BTreeSet<String>,
}

/// Training settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub n: usize,
    pub folds: usize,
    pub criterion: Criterion,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            n: 10,
            folds: 5,
            criterion: Criterion::F1,
            seed: 0,
        }
    }
}

/// Held-out votes for every document, one cross-validation round per fold.
/// `fold_order` fixes the order rounds are evaluated in; the result does not
/// depend on it.
pub fn cross_validation_votes(
    docs: &[LabeledVector],
    n: usize,
    folds: usize,
    seed: u64,
    fold_order: &[usize],
) -> Result<BTreeMap<String, BTreeMap<String, usize>>> {
    let assignment = kfold_split(docs.iter().map(|d| d.vector.doc_id.as_str()), folds, seed)?;
    let labels: Labels = docs
        .iter()
        .map(|d| (d.vector.doc_id.clone(), d.codes.clone()))
        .collect();
    let rounds: Vec<Vec<(String, BTreeMap<String, usize>)>> = fold_order
        .par_iter()
        .map(|&f| {
            let (held_out, rest): (Vec<&LabeledVector>, Vec<&LabeledVector>) =
                docs.iter().partition(|d| assignment[&d.vector.doc_id] == f);
            let targets: Vec<WeightVector> = held_out.iter().map(|d| d.vector.clone()).collect();
            let classified: Vec<WeightVector> = rest.iter().map(|d| d.vector.clone()).collect();
            nearest_neighbors(&targets, &classified, n)
                .into_iter()
                .map(|nl| {
                    let v = count_codes(&nl, &labels);
                    (nl.doc_id, v)
                })
                .collect()
        })
        .collect();
    Ok(rounds.into_iter().flatten().collect())
}

/// Confusion counts for code `c` at every θ ∈ {1..n}, micro-aggregated over
/// all held-out documents. Index 0 is θ = 1.
pub fn confusion_by_threshold(
    code: &str,
    n: usize,
    votes: &BTreeMap<String, BTreeMap<String, usize>>,
    labels: &Labels,
) -> Vec<Confusion> {
    (1..=n)
        .map(|theta| {
            let mut m = Confusion::default();
            for (doc, v) in votes {
                let predicted = v.get(code).copied().unwrap_or(0) >= theta;
                let actual = labels.get(doc).is_some_and(|c| c.contains(code));
                match (predicted, actual) {
                    (true, true) => m.tp += 1,
                    (true, false) => m.fp += 1,
                    (false, true) => m.fn_ += 1,
                    (false, false) => m.tn += 1,
                }
            }
            m
        })
        .collect()
}

/// Best threshold for one code: the smallest θ maximising the criterion,
/// or `n` when no θ yields a true positive.
pub fn select_threshold(confusions: &[Confusion], criterion: Criterion) -> usize {
    let n = confusions.len();
    if confusions.iter().all(|m| m.tp == 0) {
        return n;
    }
    let mut best = 1;
    let mut best_val = confusions[0].metric(criterion);
    for (i, m) in confusions.iter().enumerate().skip(1) {
        let v = m.metric(criterion);
        if frac_gt(v, best_val) {
            best = i + 1;
            best_val = v;
        }
    }
    best
}

/// Model creation by k-fold cross-validation over classified documents.
pub fn train_thresholds(docs: &[LabeledVector], opts: TrainOptions) -> Result<ClassificationModel> {
    let order: Vec<usize> = (0..opts.folds).collect();
    train_thresholds_with_fold_order(docs, opts, &order)
}

pub fn train_thresholds_with_fold_order(
    docs: &[LabeledVector],
    opts: TrainOptions,
    fold_order: &[usize],
) -> Result<ClassificationModel> {
    if docs.iter().all(|d| d.codes.is_empty()) {
        return Err(Error::EmptyTrainingSet);
    }
    if opts.n == 0 {
        return Err(Error::InvalidArgument("neighbour count must be >= 1".into()));
    }
    if docs.len() < opts.folds {
        return Err(Error::InvalidArgument(format!(
            "need at least {} labelled documents for {}-fold validation, got {}",
            opts.folds,
            opts.folds,
            docs.len()
        )));
    }
    let mut sorted_order = fold_order.to_vec();
    sorted_order.sort_unstable();
    if sorted_order != (0..opts.folds).collect::<Vec<_>>() {
        return Err(Error::InvalidArgument("fold order must be a permutation of 0..folds".into()));
    }
    let votes = cross_validation_votes(docs, opts.n, opts.folds, opts.seed, fold_order)?;
    let labels: Labels = docs
        .iter()
        .map(|d| (d.vector.doc_id.clone(), d.codes.clone()))
        .collect();
    let codes: BTreeSet<&String> = docs.iter().flat_map(|d| &d.codes).collect();
    let thresholds = codes
        .into_par_iter()
        .map(|c| {
            let conf = confusion_by_threshold(c, opts.n, &votes, &labels);
            (c.clone(), select_threshold(&conf, opts.criterion))
        })
        .collect();
    Ok(ClassificationModel {
        n: opts.n,
        criterion: opts.criterion,
        thresholds,
    })
}

/// Codes whose vote count reaches the model threshold (`votes >= θ`).
/// Codes missing from the model are never assigned.
pub fn assign_codes(votes: &BTreeMap<String, usize>, model: &ClassificationModel) -> BTreeSet<String> {
    votes
        .iter()
        .filter(|(code, &v)| match model.thresholds.get(*code) {
            Some(&theta) => v >= theta,
            None => {
                log::warn!("code {code:?} is not in the model; never assigned");
                false
            }
        })
        .map(|(c, _)| c.clone())
        .collect()
}

/// Assign codes to every target from its neighbour list.
pub fn assign(
    neighbor_lists: &[NeighborList],
    model: &ClassificationModel,
    labels: &Labels,
) -> BTreeMap<String, BTreeSet<String>> {
    neighbor_lists
        .iter()
        .map(|nl| (nl.doc_id.clone(), assign_codes(&count_codes(nl, labels), model)))
        .collect()
}
