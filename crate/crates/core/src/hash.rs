//! Platform-independent 64-bit hashing used for partition and fold assignment.
//!
//! `stable_hash` is FNV-1a (64-bit) over the input bytes followed by the
//! MurmurHash3 `fmix64` finalizer. The finalizer matters: raw FNV-1a has a
//! low bit equal to the parity of the input bytes' low bits, which makes
//! `hash mod 2` badly skewed for ids like `doc0001`.
//!
//! `stable_hash_seeded(bytes, seed)` hashes the 8 little-endian bytes of
//! `seed` followed by `bytes`.
//!
//! Test vectors:
//!
//! | input              | stable_hash           |
//! |--------------------|-----------------------|
//! | `""`               | `0xefd01f60ba992926`  |
//! | `"a"`              | `0x82a2a958a9bece5b`  |
//! | `"doc-1"`          | `0x4874a7cf46898a5e`  |
//!
//! `stable_hash_seeded(b"doc-1", 7)` = `0x2f776e3b6e989e40`.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^= k >> 33;
    k
}

pub fn stable_hash(bytes: &[u8]) -> u64 {
    fmix64(fnv1a(FNV_OFFSET, bytes))
}

pub fn stable_hash_seeded(bytes: &[u8], seed: u64) -> u64 {
    let h = fnv1a(FNV_OFFSET, &seed.to_le_bytes());
    fmix64(fnv1a(h, bytes))
}

/// Partition index of a key among `partitions` buckets.
pub fn partition_of(key: &[u8], partitions: usize) -> usize {
    assert!(partitions >= 1, "partition count must be at least 1");
    (stable_hash(key) % partitions as u64) as usize
}
