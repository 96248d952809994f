//! Exhaustive check of the pass@k estimator against subset enumeration.

use diagbench_core::metrics::pass_at_k_exact;
use num_bigint::BigInt;
use num_rational::BigRational;

/// Fraction of k-subsets of n samples (the first c passing) that contain a pass.
fn enumerate(n: u32, c: u32, k: u32) -> BigRational {
    let pass_mask: u32 = (1u32 << c) - 1;
    let (mut hits, mut total) = (0u64, 0u64);
    for subset in 0u32..(1 << n) {
        if subset.count_ones() != k {
            continue;
        }
        total += 1;
        if subset & pass_mask != 0 {
            hits += 1;
        }
    }
    BigRational::new(BigInt::from(hits), BigInt::from(total))
}

#[test]
fn matches_enumeration_for_all_small_cases() {
    let mut cases = 0;
    for n in 1..=8u32 {
        for c in 0..=n {
            for k in 1..=n {
                let got = pass_at_k_exact(n.into(), c.into(), k.into()).unwrap();
                assert_eq!(got, enumerate(n, c, k), "n={n} c={c} k={k}");
                cases += 1;
            }
        }
    }
    assert_eq!(cases, 240);
}
