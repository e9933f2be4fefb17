//! Keyed MAC over the detection tuple: `H(outer || H(inner || m))` with a
//! 96-bit hash.
//!
//! [`Mix96`] is a deterministic stand-in for a lightweight embedded hash. It
//! is well mixed but has had no cryptanalysis; swap in a vetted 96-bit hash
//! through [`HashFunction`] before relying on the tag for security.

use crate::model::{MacTag, NodeId, Rank, SecretKey};

pub trait HashFunction {
    fn digest(&self, data: &[u8]) -> [u8; 12];
}

impl<H: HashFunction + ?Sized> HashFunction for &H {
    fn digest(&self, data: &[u8]) -> [u8; 12] {
        (**self).digest(data)
    }
}

/// Three-lane 64-bit sponge with a splitmix64 finalizer as its round function.
#[derive(Debug, Clone, Copy, Default)]
pub struct Mix96;

const IV: [u64; 3] = [0x243f_6a88_85a3_08d3, 0x1319_8a2e_0370_7344, 0xa409_3822_299f_31d0];

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn permute(s: &mut [u64; 3]) {
    for round in 0..3u64 {
        s[0] = mix64(s[0] ^ s[1].rotate_left(17) ^ round);
        s[1] = mix64(s[1] ^ s[2].rotate_left(31));
        s[2] = mix64(s[2] ^ s[0].rotate_left(47));
    }
}

impl HashFunction for Mix96 {
    fn digest(&self, data: &[u8]) -> [u8; 12] {
        let mut s = IV;
        let mut chunks = data.chunks_exact(8);
        for chunk in &mut chunks {
            s[0] ^= u64::from_le_bytes(chunk.try_into().unwrap());
            permute(&mut s);
        }
        let rem = chunks.remainder();
        let mut last = [0u8; 8];
        last[..rem.len()].copy_from_slice(rem);
        // 0x80 marker keeps trailing zero bytes significant.
        last[rem.len()] = 0x80;
        s[0] ^= u64::from_le_bytes(last);
        s[1] ^= data.len() as u64;
        permute(&mut s);
        permute(&mut s);

        let mut out = [0u8; 12];
        out[..8].copy_from_slice(&s[0].to_be_bytes());
        out[8..].copy_from_slice(&(s[1] ^ s[2]).to_be_bytes()[..4]);
        out
    }
}

pub fn hmac_with<H: HashFunction>(hash: &H, message: &[u8], key: &SecretKey) -> MacTag {
    let mut inner = Vec::with_capacity(8 + message.len());
    inner.extend_from_slice(key.inner());
    inner.extend_from_slice(message);
    let inner_digest = hash.digest(&inner);

    let mut outer = Vec::with_capacity(8 + inner_digest.len());
    outer.extend_from_slice(key.outer());
    outer.extend_from_slice(&inner_digest);
    MacTag(hash.digest(&outer))
}

pub fn hmac(message: &[u8], key: &SecretKey) -> MacTag {
    hmac_with(&Mix96, message, key)
}

/// `ID_N || R_N || ID_P || R_P`, big-endian, 8 bytes.
pub fn tuple_bytes(id_n: NodeId, r_n: Rank, id_p: NodeId, r_p: Rank) -> [u8; 8] {
    let mut out = [0u8; 8];
    out[0..2].copy_from_slice(&id_n.0.to_be_bytes());
    out[2..4].copy_from_slice(&r_n.get().to_be_bytes());
    out[4..6].copy_from_slice(&id_p.0.to_be_bytes());
    out[6..8].copy_from_slice(&r_p.get().to_be_bytes());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rank(v: u16) -> Rank {
        Rank::new(v).unwrap()
    }

    #[test]
    fn tuple_layout() {
        let b = tuple_bytes(NodeId(1), rank(256), NodeId(0), rank(256));
        assert_eq!(b, [0x00, 0x01, 0x01, 0x00, 0x00, 0x00, 0x01, 0x00]);
        let swapped = tuple_bytes(NodeId(0), rank(256), NodeId(1), rank(256));
        assert_ne!(b, swapped);
    }

    #[test]
    fn deterministic() {
        let key = SecretKey::default();
        assert_eq!(hmac(b"abc", &key), hmac(b"abc", &key));
    }

    #[test]
    fn bit_flip_changes_tag() {
        let key = SecretKey::default();
        let m = tuple_bytes(NodeId(3), rank(512), NodeId(0), rank(256));
        let base = hmac(&m, &key);
        for byte in 0..m.len() {
            for bit in 0..8 {
                let mut flipped = m;
                flipped[byte] ^= 1 << bit;
                assert_ne!(hmac(&flipped, &key), base, "byte {byte} bit {bit}");
            }
        }
    }

    #[test]
    fn key_changes_tag() {
        let m = b"tuple";
        let k1 = SecretKey::new([1; 16]);
        let k2 = SecretKey::new([2; 16]);
        assert_ne!(hmac(m, &k1), hmac(m, &k2));
        // only the outer half differs
        let mut b = [1u8; 16];
        b[15] = 9;
        assert_ne!(hmac(m, &k1), hmac(m, &SecretKey::new(b)));
    }

    #[test]
    fn trailing_zero_is_significant() {
        assert_ne!(Mix96.digest(b"ab"), Mix96.digest(b"ab\0"));
        assert_ne!(Mix96.digest(b""), Mix96.digest(b"\0"));
        assert_ne!(Mix96.digest(&[0u8; 8]), Mix96.digest(&[0u8; 16]));
    }

    #[test]
    fn matches_hand_composition() {
        let key = SecretKey::new(core::array::from_fn(|i| i as u8));
        let m = [9u8, 8, 7];
        let mut inner = key.inner().to_vec();
        inner.extend_from_slice(&m);
        let mut outer = key.outer().to_vec();
        outer.extend_from_slice(&Mix96.digest(&inner));
        assert_eq!(hmac(&m, &key).0, Mix96.digest(&outer));
    }

    proptest! {
        #[test]
        fn any_field_change_changes_tag(
            a in any::<u16>(), ra in 1u16.., b in any::<u16>(), rb in 1u16..,
            which in 0usize..4, delta in 1u16..,
        ) {
            let key = SecretKey::default();
            let mut f = [a, ra, b, rb];
            f[which] = f[which].wrapping_add(delta);
            prop_assume!(f[1] != 0 && f[3] != 0);
            let orig = tuple_bytes(NodeId(a), rank(ra), NodeId(b), rank(rb));
            let changed = tuple_bytes(NodeId(f[0]), rank(f[1]), NodeId(f[2]), rank(f[3]));
            prop_assert_ne!(hmac(&orig, &key), hmac(&changed, &key));
        }
    }
}
