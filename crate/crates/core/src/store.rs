//! Binary key/value record containers.
//!
//! A [`RecordContainer`] is a flat file of length-prefixed records:
//!
//! ```text
//! "SMC1" | key_len: u32 BE | key | val_len: u32 BE | val | key_len | ...
//! ```
//!
//! A [`SortedContainer`] is a record container whose keys are in ascending
//! bytewise order, plus a sidecar at `<path>.idx` holding every k-th key and
//! the byte offset of its record:
//!
//! ```text
//! "SMI1" | key_len: u32 BE | key | offset: u64 BE | key_len | ...
//! ```
//!
//! The sidecar is small enough to hold in memory; a point lookup binary
//! searches it and then decodes at most `k + matches` records from disk.
//!
//! Containers are written once, through a temporary file in the target
//! directory that is renamed into place, so readers never observe a
//! half-written file.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

pub const CONTAINER_MAGIC: &[u8; 4] = b"SMC1";
pub const INDEX_MAGIC: &[u8; 4] = b"SMI1";
/// Default sparse-index sampling interval.
pub const DEFAULT_SAMPLING: usize = 128;

pub type Record = (Vec<u8>, Vec<u8>);

/// Handle to a sealed container file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordContainer {
    path: PathBuf,
    partition_id: u32,
}

impl RecordContainer {
    /// Open an existing container, checking its magic bytes.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut f = File::open(&path).map_err(|e| Error::io(&path, e))?;
        check_magic(&mut f, &path, CONTAINER_MAGIC)?;
        Ok(RecordContainer {
            path,
            partition_id: 0,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn partition_id(&self) -> u32 {
        self.partition_id
    }

    pub fn with_partition_id(mut self, id: u32) -> Self {
        self.partition_id = id;
        self
    }

    /// Stream the records in file order.
    pub fn records(&self) -> Result<RecordReader> {
        RecordReader::open(&self.path)
    }

    pub fn read_all(&self) -> Result<Vec<Record>> {
        self.records()?.collect()
    }
}

/// Write `records` to `path` in order. Replaces any existing file atomically.
pub fn write_container<I, K, V>(records: I, path: impl AsRef<Path>) -> Result<RecordContainer>
where
    I: IntoIterator<Item = (K, V)>,
    K: AsRef<[u8]>,
    V: AsRef<[u8]>,
{
    let path = path.as_ref();
    atomic_write(path, |w| {
        w.write_all(CONTAINER_MAGIC)?;
        for (k, v) in records {
            write_record(w, k.as_ref(), v.as_ref())?;
        }
        Ok(())
    })?;
    Ok(RecordContainer {
        path: path.to_path_buf(),
        partition_id: 0,
    })
}

pub fn read_container(path: impl AsRef<Path>) -> Result<Vec<Record>> {
    RecordReader::open(path.as_ref())?.collect()
}

fn write_record(w: &mut impl Write, key: &[u8], value: &[u8]) -> io::Result<()> {
    w.write_all(&len_prefix(key.len())?)?;
    w.write_all(key)?;
    w.write_all(&len_prefix(value.len())?)?;
    w.write_all(value)
}

fn len_prefix(len: usize) -> io::Result<[u8; 4]> {
    u32::try_from(len)
        .map(u32::to_be_bytes)
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "record field exceeds u32::MAX bytes"))
}

fn check_magic(f: &mut File, path: &Path, magic: &[u8; 4]) -> Result<()> {
    let mut buf = [0u8; 4];
    match f.read_exact(&mut buf) {
        Ok(()) if &buf == magic => Ok(()),
        Ok(()) => Err(Error::Corrupt {
            path: path.to_path_buf(),
            offset: 0,
            reason: format!("bad magic {:?}, expected {:?}", String::from_utf8_lossy(&buf), String::from_utf8_lossy(magic)),
        }),
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => Err(Error::Corrupt {
            path: path.to_path_buf(),
            offset: 0,
            reason: "file shorter than magic header".into(),
        }),
        Err(e) => Err(Error::io(path, e)),
    }
}

/// Run `body` against a buffered temp file next to `path`, then rename the
/// temp file over `path`. On failure the temp file is removed.
pub(crate) fn atomic_write<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<&File>) -> io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    builder.prefix(".docmine-").suffix(".tmp");
    // tempfile creates 0600 files; sealed outputs get ordinary permissions.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(std::fs::Permissions::from_mode(0o644));
    }
    let tmp = builder
        .tempfile_in(dir)
        .map_err(|e| Error::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Streaming decoder over a container file.
pub struct RecordReader {
    path: PathBuf,
    reader: BufReader<File>,
    offset: u64,
    file_len: u64,
}

impl RecordReader {
    pub fn open(path: &Path) -> Result<Self> {
        let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
        let file_len = f.metadata().map_err(|e| Error::io(path, e))?.len();
        check_magic(&mut f, path, CONTAINER_MAGIC)?;
        Ok(RecordReader {
            path: path.to_path_buf(),
            reader: BufReader::new(f),
            offset: CONTAINER_MAGIC.len() as u64,
            file_len,
        })
    }

    fn seek_to(&mut self, offset: u64) -> Result<()> {
        self.reader
            .seek(SeekFrom::Start(offset))
            .map_err(|e| Error::io(&self.path, e))?;
        self.offset = offset;
        Ok(())
    }

    fn corrupt(&self, offset: u64, reason: impl Into<String>) -> Error {
        Error::Corrupt {
            path: self.path.clone(),
            offset,
            reason: reason.into(),
        }
    }

    /// Read one length-prefixed field. `Ok(None)` only at a clean end of
    /// file when `allow_eof` is set.
    fn read_field(&mut self, allow_eof: bool, skip: bool) -> Result<Option<Vec<u8>>> {
        let at = self.offset;
        if at == self.file_len && allow_eof {
            return Ok(None);
        }
        if at + 4 > self.file_len {
            return Err(self.corrupt(at, "truncated length field"));
        }
        let mut len = [0u8; 4];
        self.reader
            .read_exact(&mut len)
            .map_err(|e| Error::io(&self.path, e))?;
        let len = u64::from(u32::from_be_bytes(len));
        if at + 4 + len > self.file_len {
            return Err(self.corrupt(at, format!("length {len} exceeds file bounds ({} bytes)", self.file_len)));
        }
        self.offset = at + 4 + len;
        if skip {
            self.reader
                .seek_relative(len as i64)
                .map_err(|e| Error::io(&self.path, e))?;
            return Ok(Some(Vec::new()));
        }
        let mut buf = vec![0u8; len as usize];
        self.reader
            .read_exact(&mut buf)
            .map_err(|e| Error::io(&self.path, e))?;
        Ok(Some(buf))
    }

    fn next_record(&mut self) -> Result<Option<Record>> {
        let Some(key) = self.read_field(true, false)? else {
            return Ok(None);
        };
        let value = self
            .read_field(false, false)?
            .expect("read_field only returns None when EOF is allowed");
        Ok(Some((key, value)))
    }

    /// Step over one record without materialising it.
    fn skip_record(&mut self) -> Result<bool> {
        if self.read_field(true, true)?.is_none() {
            return Ok(false);
        }
        self.read_field(false, true)?;
        Ok(true)
    }
}

impl Iterator for RecordReader {
    type Item = Result<Record>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_record().transpose()
    }
}

/// A key-sorted container with an in-memory sparse index.
#[derive(Debug)]
pub struct SortedContainer {
    base: RecordContainer,
    index: Vec<(Vec<u8>, u64)>,
    sampling: Option<usize>,
    decoded: AtomicU64,
}

pub fn index_path(path: &Path) -> PathBuf {
    let mut s: OsString = path.as_os_str().to_owned();
    s.push(".idx");
    PathBuf::from(s)
}

/// Sort `records` by key (stable among equal keys), write them to `path`,
/// and write a sparse index sampling every `k`-th record to `<path>.idx`.
pub fn write_sorted<I, K, V>(records: I, path: impl AsRef<Path>, k: usize) -> Result<SortedContainer>
where
    I: IntoIterator<Item = (K, V)>,
    K: AsRef<[u8]>,
    V: AsRef<[u8]>,
{
    if k == 0 {
        return Err(Error::InvalidArgument("sparse index interval must be >= 1".into()));
    }
    let path = path.as_ref();
    let mut sorted: Vec<(K, V)> = records.into_iter().collect();
    sorted.sort_by(|a, b| a.0.as_ref().cmp(b.0.as_ref()));

    let mut index = Vec::with_capacity(sorted.len().div_ceil(k));
    atomic_write(path, |w| {
        w.write_all(CONTAINER_MAGIC)?;
        let mut offset = CONTAINER_MAGIC.len() as u64;
        for (i, (key, value)) in sorted.iter().enumerate() {
            let (key, value) = (key.as_ref(), value.as_ref());
            if i % k == 0 {
                index.push((key.to_vec(), offset));
            }
            write_record(w, key, value)?;
            offset += 8 + key.len() as u64 + value.len() as u64;
        }
        Ok(())
    })?;
    atomic_write(&index_path(path), |w| {
        w.write_all(INDEX_MAGIC)?;
        for (key, offset) in &index {
            w.write_all(&len_prefix(key.len())?)?;
            w.write_all(key)?;
            w.write_all(&offset.to_be_bytes())?;
        }
        Ok(())
    })?;

    Ok(SortedContainer {
        base: RecordContainer {
            path: path.to_path_buf(),
            partition_id: 0,
        },
        index,
        sampling: Some(k),
        decoded: AtomicU64::new(0),
    })
}

impl SortedContainer {
    /// Open a sorted container and load its sidecar index into memory.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let base = RecordContainer::open(path.as_ref())?;
        let idx = index_path(base.path());
        let bytes = std::fs::read(&idx).map_err(|e| Error::io(&idx, e))?;
        let index = decode_index(&idx, &bytes)?;
        Ok(SortedContainer {
            base,
            index,
            sampling: None,
            decoded: AtomicU64::new(0),
        })
    }

    pub fn container(&self) -> &RecordContainer {
        &self.base
    }

    pub fn path(&self) -> &Path {
        self.base.path()
    }

    pub fn sparse_index(&self) -> &[(Vec<u8>, u64)] {
        &self.index
    }

    /// Sampling interval, known only for containers written in this process.
    pub fn sampling(&self) -> Option<usize> {
        self.sampling
    }

    /// Total records decoded by `lookup` and `scan` on this handle.
    pub fn decoded_records(&self) -> u64 {
        self.decoded.load(Ordering::Relaxed)
    }

    /// Open a reader positioned so that the next decoded record is the first
    /// candidate with key >= `key`, minus at most k-1 smaller records.
    fn reader_at(&self, key: &[u8]) -> Result<RecordReader> {
        let mut reader = RecordReader::open(self.base.path())?;
        let first_ge = self.index.partition_point(|(k, _)| k.as_slice() < key);
        if first_ge > 0 {
            // The sampled record is known to be < key from the index alone.
            reader.seek_to(self.index[first_ge - 1].1)?;
            reader.skip_record()?;
        }
        Ok(reader)
    }

    /// All values stored under `key`, in stored order.
    pub fn lookup(&self, key: &[u8]) -> Result<Vec<Vec<u8>>> {
        let mut reader = self.reader_at(key)?;
        let mut out = Vec::new();
        while let Some((k, v)) = reader.next_record()? {
            self.decoded.fetch_add(1, Ordering::Relaxed);
            match k.as_slice().cmp(key) {
                std::cmp::Ordering::Less => continue,
                std::cmp::Ordering::Equal => out.push(v),
                std::cmp::Ordering::Greater => break,
            }
        }
        Ok(out)
    }

    /// Records with `from <= key < to`, ascending. An inverted or empty range
    /// yields nothing.
    pub fn scan(&self, from: &[u8], to: &[u8]) -> Result<Scan<'_>> {
        let reader = if from < to {
            Some(self.reader_at(from)?)
        } else {
            None
        };
        Ok(Scan {
            owner: self,
            reader,
            from: from.to_vec(),
            to: to.to_vec(),
        })
    }

    /// Check that every sparse-index entry points at a record with the same
    /// key and that keys are non-decreasing.
    pub fn verify(&self) -> Result<()> {
        let mut reader = RecordReader::open(self.base.path())?;
        let mut prev: Option<Vec<u8>> = None;
        let mut next_entry = 0;
        loop {
            let at = reader.offset;
            let Some((k, _)) = reader.next_record()? else { break };
            if let Some(p) = &prev {
                if p > &k {
                    return Err(reader.corrupt(at, "keys out of order"));
                }
            }
            if next_entry < self.index.len() && self.index[next_entry].1 == at {
                if self.index[next_entry].0 != k {
                    return Err(reader.corrupt(at, "sparse index key mismatch"));
                }
                next_entry += 1;
            }
            prev = Some(k);
        }
        if next_entry != self.index.len() {
            return Err(Error::Corrupt {
                path: index_path(self.base.path()),
                offset: next_entry as u64,
                reason: "sparse index entry does not point at a record boundary".into(),
            });
        }
        Ok(())
    }
}

fn decode_index(path: &Path, bytes: &[u8]) -> Result<Vec<(Vec<u8>, u64)>> {
    let corrupt = |offset: usize, reason: &str| Error::Corrupt {
        path: path.to_path_buf(),
        offset: offset as u64,
        reason: reason.to_string(),
    };
    if bytes.len() < 4 || &bytes[..4] != INDEX_MAGIC {
        return Err(corrupt(0, "bad index magic"));
    }
    let mut out = Vec::new();
    let mut at = 4;
    while at < bytes.len() {
        let len_end = at + 4;
        if len_end > bytes.len() {
            return Err(corrupt(at, "truncated length field"));
        }
        let len = u32::from_be_bytes(bytes[at..len_end].try_into().unwrap()) as usize;
        let key_end = len_end + len;
        if key_end + 8 > bytes.len() {
            return Err(corrupt(at, "length exceeds file bounds"));
        }
        let offset = u64::from_be_bytes(bytes[key_end..key_end + 8].try_into().unwrap());
        out.push((bytes[len_end..key_end].to_vec(), offset));
        at = key_end + 8;
    }
    Ok(out)
}

/// Ordered stream of records in a half-open key range.
pub struct Scan<'a> {
    owner: &'a SortedContainer,
    reader: Option<RecordReader>,
    from: Vec<u8>,
    to: Vec<u8>,
}

impl Iterator for Scan<'_> {
    type Item = Result<Record>;

    fn next(&mut self) -> Option<Self::Item> {
        let reader = self.reader.as_mut()?;
        loop {
            match reader.next_record() {
                Err(e) => {
                    self.reader = None;
                    return Some(Err(e));
                }
                Ok(None) => {
                    self.reader = None;
                    return None;
                }
                Ok(Some((k, v))) => {
                    self.owner.decoded.fetch_add(1, Ordering::Relaxed);
                    if k < self.from {
                        continue;
                    }
                    if k >= self.to {
                        self.reader = None;
                        return None;
                    }
                    return Some(Ok((k, v)));
                }
            }
        }
    }
}
