//! All-pairs cosine similarity with a threshold and a mutual top-k filter.

use docmine::corpus;
use docmine::similarity::{self, Cosine, SimilarityOptions};
use docmine::text::TextPipeline;
use docmine::weighting::{self, Corpus};

fn main() -> docmine::Result<()> {
    let docs = corpus::read_jsonl(concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample_corpus.jsonl"))?;
    let pipeline = TextPipeline {
        min_df: 3,
        ..TextPipeline::default()
    };
    let weights = weighting::tfidf_weights(&Corpus::new(pipeline.run(&docs, 4)?.vectors)?)?;

    let opts = SimilarityOptions {
        threshold: 0.3,
        topk: Some(2),
        partitions: 4,
    };
    let triples = similarity::similarity_run(&weights, &Cosine, opts)?;
    println!("{} pairs with cosine >= {} (mutual top-2)", triples.len(), opts.threshold);
    for t in triples.iter().take(10) {
        let title = |id: &str| docs.iter().find(|d| d.doc_id == id).map(|d| d.title.clone()).unwrap_or_default();
        println!("{:.3}  {} | {}", t.score, title(&t.doc_a), title(&t.doc_b));
    }
    Ok(())
}
