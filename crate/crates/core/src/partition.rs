//! Hash partitioning of records between stages.
//!
//! A record with key `k` goes to partition `stable_hash(k) mod p`. Within a
//! partition records keep their input order.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::hash::partition_of;
use crate::store::{self, Record, RecordContainer};

/// Group item indices by the partition of their key.
pub fn split_indices<'a, I>(keys: I, partitions: usize) -> Vec<Vec<usize>>
where
    I: IntoIterator<Item = &'a [u8]>,
{
    let p = partitions.max(1);
    let mut parts = vec![Vec::new(); p];
    for (i, key) in keys.into_iter().enumerate() {
        parts[partition_of(key, p)].push(i);
    }
    parts
}

/// Split records into `partitions` groups by key hash.
pub fn split_records(records: Vec<Record>, partitions: usize) -> Vec<Vec<Record>> {
    let p = partitions.max(1);
    let mut parts = vec![Vec::new(); p];
    for r in records {
        let i = partition_of(&r.0, p);
        parts[i].push(r);
    }
    parts
}

/// Path of partition `i` for a base path: `<base>.part-00007`.
pub fn partition_path(base: &Path, i: usize) -> PathBuf {
    let mut s: OsString = base.as_os_str().to_owned();
    s.push(format!(".part-{i:05}"));
    PathBuf::from(s)
}

/// Redistribute a container into `p` containers at `<out_base>.part-NNNNN`.
pub fn repartition(container: &RecordContainer, p: usize, out_base: impl AsRef<Path>) -> Result<Vec<RecordContainer>> {
    if p == 0 {
        return Err(Error::InvalidArgument("partition count must be >= 1".into()));
    }
    let records = container.read_all()?;
    split_records(records, p)
        .into_iter()
        .enumerate()
        .map(|(i, part)| {
            store::write_container(part, partition_path(out_base.as_ref(), i))
                .map(|c| c.with_partition_id(i as u32))
        })
        .collect()
}
