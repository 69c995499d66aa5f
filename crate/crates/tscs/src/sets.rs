//! Bitmask encoding of buyer subsets. Bit `i` of a [`BuyerSet`] is buyer `i`.

/// Hard bound on the ground-set size; every oracle enumerates 2^n subsets.
pub const MAX_GROUND_SET: usize = 24;

/// Subset of buyers as a bitmask.
pub type BuyerSet = u32;

/// The full ground set `{0, .., n-1}`.
pub fn full_set(n: usize) -> BuyerSet {
    debug_assert!(n <= MAX_GROUND_SET);
    if n == 0 {
        0
    } else {
        (1u32 << n) - 1
    }
}

pub fn size(s: BuyerSet) -> usize {
    s.count_ones() as usize
}

pub fn contains(s: BuyerSet, i: usize) -> bool {
    s & (1 << i) != 0
}

/// Members of `s` in ascending order.
pub fn members(s: BuyerSet) -> impl Iterator<Item = usize> {
    let mut rest = s;
    std::iter::from_fn(move || {
        if rest == 0 {
            None
        } else {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(i)
        }
    })
}

/// All submasks of `s` in ascending numeric order, including 0 and `s`.
pub fn submasks(s: BuyerSet) -> impl Iterator<Item = BuyerSet> {
    let mut next = Some(0u32);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == s {
            None
        } else {
            // Steps through submasks in increasing order.
            Some(cur.wrapping_sub(s) & s)
        };
        Some(cur)
    })
}
