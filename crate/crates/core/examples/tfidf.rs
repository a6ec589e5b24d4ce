//! TFIDF weights plus corpus statistics: most frequent terms, per-document
//! top terms and the documents with the fewest/most distinct words.

use docmine::corpus;
use docmine::text::TextPipeline;
use docmine::weighting::{self, Corpus};

fn main() -> docmine::Result<()> {
    let docs = corpus::read_jsonl(concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample_corpus.jsonl"))?;
    let pipeline = TextPipeline {
        min_df: 3,
        ..TextPipeline::default()
    };
    let corpus = Corpus::new(pipeline.run(&docs, 2)?.vectors)?;
    let weights = weighting::tfidf_weights(&corpus)?;

    println!("most frequent terms (document frequency):");
    for (t, df) in weighting::top_frequent_terms(&corpus, 5) {
        println!("  {t:<24} {df}");
    }

    let w = &weights[0];
    println!("top terms of {} (norm {:.4}):", w.doc_id, w.norm);
    for (t, x) in weighting::top_important_terms(w, 5) {
        println!("  {t:<24} {x:.5}");
    }

    let (fewest, most) = weighting::distinct_word_extremes(&corpus, 3);
    println!("fewest distinct terms: {fewest:?}");
    println!("most distinct terms:   {most:?}");
    Ok(())
}
