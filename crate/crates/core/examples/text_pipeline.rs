//! Turn documents into section-weighted, stemmed, phrase-aware term counts.

use docmine::corpus;
use docmine::text::{self, StopList, TextPipeline};

fn main() -> docmine::Result<()> {
    let docs = corpus::read_jsonl(concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample_corpus.jsonl"))?;

    let tokens = text::tokenize(&docs[0].title);
    println!("tokens:   {tokens:?}");
    let kept = text::remove_stopwords(tokens, &StopList::english());
    let stems: Vec<String> = kept.iter().map(|t| docmine::porter::stem(t)).collect();
    println!("stems:    {stems:?}");

    let pipeline = TextPipeline {
        min_df: 3,
        ..TextPipeline::default()
    };
    let out = pipeline.run(&docs, 4)?;
    println!("{} phrases detected, {} terms pruned as too common", out.phrases.len(), out.banned.len());
    for p in out.phrases.to_strings().iter().take(8) {
        println!("  phrase: {p}");
    }

    let v = &out.vectors[0];
    let mut top: Vec<_> = v.counts.iter().collect();
    top.sort_by(|a, b| b.1.total_cmp(a.1).then(a.0.cmp(b.0)));
    println!("heaviest terms of {}:", v.doc_id);
    for (t, c) in top.into_iter().take(6) {
        println!("  {t:<28} {c}");
    }
    Ok(())
}
