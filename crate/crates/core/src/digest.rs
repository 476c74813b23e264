use alloc::string::String;
use core::fmt::Write;

use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let out = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in out.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Digest of several fields, length-prefixed so that field boundaries matter.
pub fn sha256_fields(fields: &[&str]) -> String {
    let mut h = Sha256::new();
    for f in fields {
        h.update((f.len() as u64).to_le_bytes());
        h.update(f.as_bytes());
    }
    let out = h.finalize();
    let mut s = String::with_capacity(64);
    for b in out.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}
