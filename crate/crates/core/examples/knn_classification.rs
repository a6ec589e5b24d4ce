//! Learn per-code vote thresholds by cross-validation, then label the
//! unclassified documents by their nearest classified neighbours.

use docmine::classify::{self, Criterion, LabeledVector, TrainOptions};
use docmine::pipeline;
use docmine::{corpus, similarity, Params};

fn main() -> docmine::Result<()> {
    let docs = corpus::read_jsonl(concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample_corpus.jsonl"))?;
    let params = Params {
        min_df: 3,
        ..Params::default()
    };
    let (classified, unclassified) = classify::split_labeled(&docs)?;
    println!("{} classified, {} to label", classified.len(), unclassified.len());

    let (_, weights) = pipeline::weigh_documents(&docs, &params, 4)?;
    let unit = |id: &str| {
        let w = weights.iter().find(|w| w.doc_id == id).expect("every document has a vector");
        similarity::normalize(w).unwrap_or_else(|| docmine::WeightVector::new(id, Vec::new()))
    };
    let labeled: Vec<LabeledVector> = classified
        .iter()
        .map(|d| LabeledVector {
            vector: unit(&d.doc_id),
            codes: d.codes.iter().cloned().collect(),
        })
        .collect();

    let opts = TrainOptions {
        n: 5,
        folds: 4,
        criterion: Criterion::F1,
        seed: 7,
    };
    let model = classify::train_thresholds(&labeled, opts)?;
    println!("thresholds (votes out of {}): {:?}", model.n, model.thresholds);

    let targets: Vec<_> = unclassified.iter().map(|d| unit(&d.doc_id)).collect();
    let known: Vec<_> = labeled.iter().map(|l| l.vector.clone()).collect();
    let neighbours = classify::nearest_neighbors(&targets, &known, model.n);
    for (doc, codes) in classify::assign(&neighbours, &model, &classify::labels_of(&classified)) {
        println!("  {doc}: {codes:?}");
    }
    Ok(())
}
