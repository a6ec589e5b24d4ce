//! Write a sorted container with a sparse index, then look keys up and scan a range.

use docmine::store::{self, SortedContainer};

fn main() -> docmine::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("squares.smc");

    let records = (0u32..1000).rev().map(|i| (format!("key-{i:04}"), (i * i).to_string()));
    let written = store::write_sorted(records, &path, 64)?;
    println!("sparse index: {} entries, every {}th record", written.sparse_index().len(), written.sampling().unwrap_or(0));

    // A fresh handle reloads the sidecar index from disk.
    let sc = SortedContainer::open(&path)?;

    let hit = sc.lookup(b"key-0042")?;
    println!("key-0042 -> {}", String::from_utf8_lossy(&hit[0]));
    println!("records decoded for that lookup: {}", sc.decoded_records());
    println!("key-9999 -> {:?}", sc.lookup(b"key-9999")?);

    for rec in sc.scan(b"key-0100", b"key-0104")? {
        let (k, v) = rec?;
        println!("  {} = {}", String::from_utf8_lossy(&k), String::from_utf8_lossy(&v));
    }

    sc.verify()?;
    Ok(())
}
