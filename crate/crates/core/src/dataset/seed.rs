//! Order-independent per-example seeds.

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for example `index` of cell (`scheme`, `snr`), independent of generation order.
pub fn derive_seed(master: u64, scheme: u64, snr: u64, index: u64) -> u64 {
    [scheme, snr, index]
        .iter()
        .fold(mix64(master), |acc, &part| mix64(acc ^ mix64(part)))
}
