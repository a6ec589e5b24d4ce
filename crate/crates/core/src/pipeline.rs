//! Stage implementations: each reads sealed input containers and writes
//! sealed outputs. The CLI subcommands and the workflow runner both call
//! these, so a workflow stage and the matching CLI invocation produce the
//! same bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::citation::{self, ResolveOptions};
use crate::classify::{self, ClassificationModel, LabeledVector, TrainOptions};
use crate::corpus::{self, DocumentRecord};
use crate::error::{Error, Result};
use crate::json;
use crate::partition;
use crate::similarity::{self, Cosine, SimilarityOptions};
use crate::store::{self, atomic_write, RecordContainer};
use crate::weighting::{self, Corpus, WeightVector};

/// Record counts a stage consumed and produced.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub in_count: usize,
    pub out_count: usize,
}

/// Scratch directory, under `SM_TMPDIR` when set.
pub fn scratch_dir() -> Result<tempfile::TempDir> {
    let base = std::env::var_os("SM_TMPDIR")
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir);
    tempfile::Builder::new()
        .prefix("docmine-")
        .tempdir_in(&base)
        .map_err(|e| Error::io(base, e))
}

fn write_sorted_records(mut records: Vec<(Vec<u8>, Vec<u8>)>, path: &Path) -> Result<RecordContainer> {
    records.par_sort_unstable_by(|a, b| a.0.cmp(&b.0));
    store::write_container(records, path)
}

/// TFIDF over a document set, one vector per document in doc_id order.
/// Documents with no surviving terms do not count towards the corpus size
/// and get an empty vector.
pub fn weigh_documents(docs: &[DocumentRecord], params: &crate::params::Params, partitions: usize) -> Result<(Option<Corpus>, Vec<WeightVector>)> {
    let text = params.text_pipeline()?.run(docs, partitions)?;
    let (vectors, empty): (Vec<_>, Vec<_>) = text.vectors.into_iter().partition(|v| !v.is_empty());
    for v in &empty {
        log::warn!("document {:?} has no terms after preprocessing; skipped", v.doc_id);
    }
    let blank: Vec<WeightVector> = empty.into_iter().map(|v| WeightVector::new(v.doc_id, Vec::new())).collect();
    if vectors.is_empty() {
        return Ok((None, blank));
    }
    let corpus = Corpus::new(vectors)?;
    let idf = weighting::inverse_document_frequency(&corpus);
    let parts = partition::split_indices(corpus.docs().iter().map(|d| d.doc_id.as_bytes()), partitions);
    let mut weights: Vec<WeightVector> = parts
        .par_iter()
        .map(|idx| {
            idx.iter()
                .map(|&i| weighting::weigh_document(&corpus.docs()[i], &idf))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .chain(blank)
        .collect();
    weights.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    Ok((Some(corpus), weights))
}

/// `tfidf`: corpus container → container of `doc_id → WeightVector`.
pub fn tfidf_stage(corpus_path: &Path, output: &Path, params: &crate::params::Params, partitions: usize) -> Result<StageCounts> {
    let docs = corpus::load_documents(corpus_path)?;
    let (corpus, weights) = weigh_documents(&docs, params, partitions)?;
    let records = weights
        .iter()
        .map(|w| Ok((w.doc_id.as_bytes().to_vec(), json::to_canonical_vec(w)?)))
        .collect::<Result<Vec<_>>>()?;
    write_sorted_records(records, output)?;
    if let (Some(dir), Some(corpus)) = (&params.aux_dir, &corpus) {
        write_aux(dir, corpus, &weights, params.top_n)?;
    }
    Ok(StageCounts {
        in_count: docs.len(),
        out_count: weights.len(),
    })
}

#[derive(Serialize)]
struct TopTerm<'a> {
    term: &'a str,
    df: usize,
}

#[derive(Serialize)]
struct TopDoc<'a> {
    doc_id: &'a str,
    terms: Vec<(String, f64)>,
}

pub const AUX_TOPTERMS: &str = "tfidf.topterms";
pub const AUX_TOPDOC: &str = "tfidf.topdoc";
pub const AUX_EXTREMES: &str = "tfidf.extremes";

/// Write the three auxiliary statistics containers into `dir`:
///
/// * `tfidf.topterms`: key = rank (u32 BE), value `{"df","term"}`
/// * `tfidf.topdoc`: key = doc_id, value `{"doc_id","terms":[[term, weight]…]}`
/// * `tfidf.extremes`: keys `highest`/`lowest`, value `[[doc_id, distinct]…]`
pub fn write_aux(dir: &Path, corpus: &Corpus, weights: &[WeightVector], top_n: usize) -> Result<usize> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let top = weighting::top_frequent_terms(corpus, top_n);
    let records = top
        .iter()
        .enumerate()
        .map(|(rank, (term, df))| Ok(((rank as u32).to_be_bytes().to_vec(), json::to_canonical_vec(&TopTerm { term, df: *df })?)))
        .collect::<Result<Vec<_>>>()?;
    store::write_container(records, dir.join(AUX_TOPTERMS))?;

    let records = weights
        .iter()
        .map(|w| {
            let v = TopDoc {
                doc_id: &w.doc_id,
                terms: weighting::top_important_terms(w, top_n),
            };
            Ok((w.doc_id.as_bytes().to_vec(), json::to_canonical_vec(&v)?))
        })
        .collect::<Result<Vec<_>>>()?;
    write_sorted_records(records, &dir.join(AUX_TOPDOC))?;

    let (lowest, highest) = weighting::distinct_word_extremes(corpus, top_n);
    store::write_container(
        [
            (b"highest".to_vec(), json::to_canonical_vec(&highest)?),
            (b"lowest".to_vec(), json::to_canonical_vec(&lowest)?),
        ],
        dir.join(AUX_EXTREMES),
    )?;
    Ok(top.len() + weights.len() + 2)
}

/// `top-terms`: corpus → the auxiliary statistics containers in `out_dir`.
pub fn top_terms_stage(corpus_path: &Path, out_dir: &Path, params: &crate::params::Params, partitions: usize) -> Result<StageCounts> {
    let docs = corpus::load_documents(corpus_path)?;
    let (corpus, weights) = weigh_documents(&docs, params, partitions)?;
    let corpus = corpus.ok_or_else(|| Error::InvalidArgument("corpus has no documents with terms".into()))?;
    let out = write_aux(out_dir, &corpus, &weights, params.top_n)?;
    Ok(StageCounts {
        in_count: docs.len(),
        out_count: out,
    })
}

pub fn load_weights(path: &Path) -> Result<Vec<WeightVector>> {
    RecordContainer::open(path)?
        .records()?
        .map(|r| r.and_then(|(_, v)| json::from_slice(&v)))
        .collect()
}

/// `similarity`: weights container → container of similarity triples.
pub fn similarity_stage(weights_path: &Path, output: &Path, threshold: f64, topk: Option<usize>, partitions: usize) -> Result<StageCounts> {
    let weights = load_weights(weights_path)?;
    let triples = similarity::similarity_run(
        &weights,
        &Cosine,
        SimilarityOptions {
            threshold,
            topk,
            partitions,
        },
    )?;
    let records = triples
        .iter()
        .map(|t| Ok((t.key(), json::to_canonical_vec(t)?)))
        .collect::<Result<Vec<_>>>()?;
    write_sorted_records(records, output)?;
    Ok(StageCounts {
        in_count: weights.len(),
        out_count: triples.len(),
    })
}

/// `cite-match`: corpus → container of match results, one per citation.
pub fn cite_match_stage(
    corpus_path: &Path,
    output: &Path,
    threshold: f64,
    cap: usize,
    index_interval: usize,
    partitions: usize,
) -> Result<StageCounts> {
    let docs = corpus::load_documents(corpus_path)?;
    let scratch = scratch_dir()?;
    let index = citation::build_author_index_with_interval(&docs, scratch.path().join("authors"), partitions, index_interval)?;
    let citations: Vec<citation::Citation> = docs.par_iter().flat_map_iter(citation::extract_citations).collect();
    let results = citation::resolve(
        &citations,
        &index,
        &docs,
        ResolveOptions {
            threshold,
            cap,
            partitions,
        },
    )?;
    let records = results
        .iter()
        .map(|m| Ok((m.key(), json::to_canonical_vec(m)?)))
        .collect::<Result<Vec<_>>>()?;
    write_sorted_records(records, output)?;
    Ok(StageCounts {
        in_count: citations.len(),
        out_count: results.len(),
    })
}

fn labeled_vectors(docs: &[DocumentRecord], weights: &[WeightVector]) -> Vec<LabeledVector> {
    let by_id: BTreeMap<&str, &WeightVector> = weights.iter().map(|w| (w.doc_id.as_str(), w)).collect();
    docs.iter()
        .map(|d| {
            let vector = by_id
                .get(d.doc_id.as_str())
                .and_then(|w| similarity::normalize(w))
                .unwrap_or_else(|| WeightVector::new(d.doc_id.clone(), Vec::new()));
            LabeledVector {
                vector,
                codes: d.codes.iter().cloned().collect(),
            }
        })
        .collect()
}

pub fn write_model(model: &ClassificationModel, path: &Path) -> Result<()> {
    let bytes = json::to_canonical_vec(model)?;
    atomic_write(path, |w| w.write_all(&bytes))
}

pub fn read_model(path: &Path) -> Result<ClassificationModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let model: ClassificationModel = json::from_slice(&bytes)?;
    if let Some((code, t)) = model.thresholds.iter().find(|(_, &t)| t == 0 || t > model.n) {
        return Err(Error::InvalidArgument(format!("threshold {t} for code {code:?} is outside [1, {}]", model.n)));
    }
    Ok(model)
}

/// `classify-train`: corpus → model file. TFIDF is computed once over the
/// classified set before any fold split.
pub fn classify_train_stage(corpus_path: &Path, model_path: &Path, opts: TrainOptions, params: &crate::params::Params, partitions: usize) -> Result<StageCounts> {
    let docs = corpus::load_documents(corpus_path)?;
    let (classified, _) = classify::model_creation_groups(&docs)?;
    let (_, weights) = weigh_documents(&classified, params, partitions)?;
    let labeled = labeled_vectors(&classified, &weights);
    let model = classify::train_thresholds(&labeled, opts)?;
    write_model(&model, model_path)?;
    Ok(StageCounts {
        in_count: classified.len(),
        out_count: model.thresholds.len(),
    })
}

#[derive(Serialize)]
struct Assignment<'a> {
    doc_id: &'a str,
    codes: &'a BTreeSet<String>,
}

/// `classify-assign`: corpus + model → container of `doc_id → codes` for
/// every unclassified document.
pub fn classify_assign_stage(corpus_path: &Path, model_path: &Path, output: &Path, params: &crate::params::Params, partitions: usize) -> Result<StageCounts> {
    let docs = corpus::load_documents(corpus_path)?;
    let model = read_model(model_path)?;
    let (classified, unclassified) = classify::split_labeled(&docs)?;
    let (_, weights) = weigh_documents(&docs, params, partitions)?;
    let classified_vecs: Vec<WeightVector> = labeled_vectors(&classified, &weights).into_iter().map(|l| l.vector).collect();
    let targets: Vec<WeightVector> = labeled_vectors(&unclassified, &weights).into_iter().map(|l| l.vector).collect();
    let neighbors = classify::nearest_neighbors(&targets, &classified_vecs, model.n);
    let labels = classify::labels_of(&classified);
    let assigned = classify::assign(&neighbors, &model, &labels);
    let records = assigned
        .iter()
        .map(|(doc_id, codes)| Ok((doc_id.as_bytes().to_vec(), json::to_canonical_vec(&Assignment { doc_id, codes })?)))
        .collect::<Result<Vec<_>>>()?;
    write_sorted_records(records, output)?;
    Ok(StageCounts {
        in_count: unclassified.len(),
        out_count: assigned.len(),
    })
}

/// `import`: JSON lines → corpus container.
pub fn import_stage(input: &Path, output: &Path) -> Result<StageCounts> {
    let docs = corpus::read_jsonl(input)?;
    corpus::write_documents(&docs, output)?;
    Ok(StageCounts {
        in_count: docs.len(),
        out_count: docs.len(),
    })
}

/// `export`: corpus container → JSON lines.
pub fn export_stage(input: &Path, output: &Path) -> Result<StageCounts> {
    let n = corpus::export_corpus(input, output)?;
    Ok(StageCounts {
        in_count: n,
        out_count: n,
    })
}

/// `repartition`: container → `p` containers at `<out_base>.part-NNNNN`.
pub fn repartition_stage(input: &Path, out_base: &Path, p: usize) -> Result<StageCounts> {
    let c = RecordContainer::open(input)?;
    let parts = partition::repartition(&c, p, out_base)?;
    let mut out = 0;
    for part in &parts {
        out += part.records()?.count();
    }
    Ok(StageCounts {
        in_count: c.records()?.count(),
        out_count: out,
    })
}
