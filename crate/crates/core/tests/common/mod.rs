//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

/// Saturation ratio by explicit loop-and-compare.
pub fn count_saturated(pressure: &[u32], sat_level: u32) -> f64 {
    let mut hits = 0u64;
    for p in pressure {
        if *p >= sat_level {
            hits += 1;
        }
    }
    hits as f64 / pressure.len() as f64
}

/// Mid-rank of each value as `#smaller + (#equal + 1) / 2`, quadratic time.
pub fn naive_midranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|v| {
            let smaller = values.iter().filter(|w| *w < v).count() as f64;
            let equal = values.iter().filter(|w| *w == v).count() as f64;
            smaller + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Two-sided exact rank-sum p-value by enumerating every subset of size
/// `a.len()` of the pooled sample.
pub fn enumerate_exact_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = naive_midranks(&pooled);
    let n = pooled.len();
    let k = a.len();
    assert!(n <= 24, "enumeration oracle is limited to small samples");
    // Twice the ranks keeps every sum an exact integer.
    let doubled: Vec<u64> = ranks.iter().map(|r| (r * 2.0).round() as u64).collect();
    let observed: u64 = doubled[..k].iter().sum();
    let (mut total, mut lower, mut upper) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let s: u64 = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| doubled[i])
            .sum();
        total += 1;
        if s <= observed {
            lower += 1;
        }
        if s >= observed {
            upper += 1;
        }
    }
    (2.0 * lower.min(upper) as f64 / total as f64).min(1.0)
}

/// Sample standard deviation by the textbook two-pass formula.
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}
