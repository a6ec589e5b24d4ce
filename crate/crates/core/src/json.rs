//! Canonical JSON: object keys sorted, no insignificant whitespace, floats
//! as shortest round-trip decimals. Every byte-identity check in the crate
//! relies on this encoding.

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::Result;

/// Encode `value` canonically.
///
/// Going through `serde_json::Value` sorts object keys (its map is a
/// `BTreeMap`), independent of struct field declaration order.
pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string(&v)?)
}

pub fn to_canonical_vec<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    to_canonical_string(value).map(String::into_bytes)
}

pub fn from_slice<T: DeserializeOwned>(bytes: &[u8]) -> Result<T> {
    Ok(serde_json::from_slice(bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Serialize;

    #[derive(Serialize)]
    struct Unsorted {
        zeta: u32,
        alpha: f64,
        mid: Vec<&'static str>,
    }

    #[test]
    fn keys_sorted_and_compact() {
        let s = to_canonical_string(&Unsorted {
            zeta: 1,
            alpha: 0.1,
            mid: vec!["x"],
        })
        .unwrap();
        assert_eq!(s, r#"{"alpha":0.1,"mid":["x"],"zeta":1}"#);
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1f64, 1.0 / 3.0, 1e-300, 123456.789, 0.34657359027997264] {
            let s = to_canonical_string(&x).unwrap();
            let back: f64 = from_slice(s.as_bytes()).unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }
}
