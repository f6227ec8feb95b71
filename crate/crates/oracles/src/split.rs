//! Exhaustive minimal contiguous split.

/// Fewest contiguous parts of `costs` such that every part's
/// `overhead + sum(costs)` is within `budget`, trying all 2^(n-1) cut sets.
pub fn min_parts(costs: &[u64], overhead: u64, budget: u64, max_len: Option<usize>) -> Option<usize> {
    let n = costs.len();
    assert!(n <= 16, "exhaustive search only for tiny inputs");
    if n == 0 {
        return Some(0);
    }
    let mut best: Option<usize> = None;
    for mask in 0u32..(1 << (n - 1)) {
        let mut parts = Vec::new();
        let mut start = 0;
        for i in 0..n - 1 {
            if mask & (1 << i) != 0 {
                parts.push(start..i + 1);
                start = i + 1;
            }
        }
        parts.push(start..n);
        let ok = parts.iter().all(|r| {
            overhead + costs[r.clone()].iter().sum::<u64>() <= budget
                && max_len.is_none_or(|m| r.len() <= m)
        });
        if ok && best.is_none_or(|b| parts.len() < b) {
            best = Some(parts.len());
        }
    }
    best
}
