//! Deterministic seed derivation.
//!
//! Every pipeline stage and every ensemble member gets its own RNG stream
//! derived from one master seed, so runs reproduce bit-for-bit regardless of
//! scheduling or parallelism.

/// Derive a stream seed from a master seed, a stage label and an index.
/// The label is folded with an FNV-1a pass so distinct stages decorrelate
/// even for adjacent indices.
pub fn derive_seed(master: u64, stage: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    // splitmix-style finish over the xor-fold of master, stage hash and index
    let mut z = master ^ h ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
