//! Keyed permutation `E_k` over fixed-width byte blocks.
//!
//! Four-round balanced Feistel network. Block width `w` must be even; the
//! halves are `h = w / 2` bytes. Round `i` (0..4) maps `(L, R)` to
//! `(R, L xor F_i(R))` where
//!
//! ```text
//! F_i(R) = first h bytes of  SHA256(TAG | k | i | 0u32 | R) || SHA256(TAG | k | i | 1u32 | R) || ...
//! TAG    = b"spectrust/feistel"   k = 32-byte key   i = one byte   counters big-endian
//! ```

use crate::hash::{sha256_concat, Digest};

const TAG: &[u8] = b"spectrust/feistel";
const ROUNDS: u8 = 4;

#[derive(Debug, Clone)]
pub struct FeistelCipher {
    key: Digest,
    width: usize,
}

impl FeistelCipher {
    pub fn new(key: Digest, width: usize) -> Self {
        assert!(width >= 2 && width.is_multiple_of(2), "block width must be even");
        FeistelCipher { key, width }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    fn round_fn(&self, round: u8, half: &[u8]) -> Vec<u8> {
        let h = half.len();
        let mut out = Vec::with_capacity(h + 32);
        let mut ctr = 0u32;
        while out.len() < h {
            let block = sha256_concat(&[TAG, self.key.as_bytes(), &[round], &ctr.to_be_bytes(), half]);
            out.extend_from_slice(block.as_bytes());
            ctr += 1;
        }
        out.truncate(h);
        out
    }

    pub fn encrypt(&self, block: &[u8]) -> Vec<u8> {
        assert_eq!(block.len(), self.width);
        let h = self.width / 2;
        let (mut l, mut r) = (block[..h].to_vec(), block[h..].to_vec());
        for i in 0..ROUNDS {
            let f = self.round_fn(i, &r);
            let new_r: Vec<u8> = l.iter().zip(&f).map(|(a, b)| a ^ b).collect();
            l = r;
            r = new_r;
        }
        l.extend_from_slice(&r);
        l
    }

    pub fn decrypt(&self, block: &[u8]) -> Vec<u8> {
        assert_eq!(block.len(), self.width);
        let h = self.width / 2;
        let (mut l, mut r) = (block[..h].to_vec(), block[h..].to_vec());
        for i in (0..ROUNDS).rev() {
            let f = self.round_fn(i, &l);
            let prev_l: Vec<u8> = r.iter().zip(&f).map(|(a, b)| a ^ b).collect();
            r = l;
            l = prev_l;
        }
        l.extend_from_slice(&r);
        l
    }
}

pub(crate) fn xor(a: &[u8], b: &[u8]) -> Vec<u8> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}
