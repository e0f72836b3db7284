/// Derive an independent stream seed from a parent seed and a label
/// (splitmix64 finalizer over the combined words).
pub fn mix(seed: u64, label: u64) -> u64 {
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::mix;

    #[test]
    fn distinct_labels_give_distinct_seeds() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|l| mix(7, l)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(mix(1, 2), mix(2, 1));
    }
}
