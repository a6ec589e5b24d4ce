//! Resolve free-text references to corpus documents through an approximate
//! (one edit) author index.

use docmine::citation::{self, Citation, ResolveOptions};
use docmine::corpus;

fn main() -> docmine::Result<()> {
    let docs = corpus::read_jsonl(concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample_corpus.jsonl"))?;
    let dir = tempfile::tempdir().expect("temp dir");
    let index = citation::build_author_index(&docs, dir.path().join("authors.smc"), 2)?;

    // "Kowalsky" is one edit away from the indexed "kowalski".
    println!("query kowalsky -> {:?}", index.query("kowalsky")?);

    let mut citations: Vec<Citation> = docs.iter().take(3).flat_map(citation::extract_citations).collect();
    // A citation with the first author's surname misspelled by one dropped letter.
    let target = &docs[5];
    let surname = citation::surname_of(&target.authors[0]);
    citations.push(Citation {
        source_doc: "external".into(),
        position: 0,
        raw: format!("{} et al. {}. Some Proceedings, {}.", &surname[..surname.len() - 1], target.title, target.year.unwrap_or(0)),
    });

    let results = citation::resolve(&citations, &index, &docs, ResolveOptions::default())?;
    for (c, m) in citations.iter().zip(&results) {
        let raw: String = c.raw.chars().take(60).collect();
        println!("{:<62} -> {:<8} ({:.3})", raw, m.target.as_deref().unwrap_or("NONE"), m.score);
    }
    Ok(())
}
