//! Binary merkle tree over byte-string leaves.
//!
//! Leaves are hashed once (`H(leaf)`), interior nodes are `H(left | right)`,
//! and an odd node at the end of a layer is paired with itself. A single leaf
//! yields `H(leaf)`; an empty list yields `H("")`.

use crate::hash::{sha256, sha256_concat, Digest};

pub fn merkle_root<L: AsRef<[u8]>>(leaves: &[L]) -> Digest {
    if leaves.is_empty() {
        return sha256(b"");
    }
    let mut layer: Vec<Digest> = leaves.iter().map(|l| sha256(l.as_ref())).collect();
    while layer.len() > 1 {
        layer = layer
            .chunks(2)
            .map(|pair| {
                let right = pair.get(1).unwrap_or(&pair[0]);
                sha256_concat(&[pair[0].as_bytes(), right.as_bytes()])
            })
            .collect();
    }
    layer[0]
}
