//! Mann-Whitney U tests with Holm-Bonferroni family-wise correction.

use statrs::function::erf::erfc;

use crate::error::{QdError, Result};

/// Largest group size for which p-values come from the exact permutation
/// distribution.
pub const EXACT_LIMIT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// `min(U_a, U_b)`; ties count one half.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub method: PMethod,
}

/// `U_a`: pairs `(x in a, y in b)` with `x > y`, ties counting one half.
pub fn u_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut twice = 0u64;
    for x in a {
        for y in b {
            if x > y {
                twice += 2;
            } else if x == y {
                twice += 1;
            }
        }
    }
    twice as f64 / 2.0
}

fn check_samples(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(QdError::EmptySample);
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(QdError::NotANumber("sample"));
    }
    Ok(())
}

/// Mid-ranks of the pooled sample, doubled so they are integers.
fn doubled_midranks(pooled: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&x, &y| pooled[x].total_cmp(&pooled[y]));
    let mut ranks = vec![0u64; pooled.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their average; doubled: (i + 1) + (j + 1).
        let shared = (i + j + 2) as u64;
        for &k in &order[i..=j] {
            ranks[k] = shared;
        }
        i = j + 1;
    }
    ranks
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.len() <= EXACT_LIMIT && b.len() <= EXACT_LIMIT {
        mann_whitney_u_exact(a, b)
    } else {
        mann_whitney_u_normal(a, b)
    }
}

/// Exact two-sided p-value: the fraction of all ways of splitting the pooled
/// (mid-ranked) sample into groups of the observed sizes whose `min(U_a, U_b)`
/// is at most the observed one.
pub fn mann_whitney_u_exact(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    check_samples(a, b)?;
    let (n, m) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = doubled_midranks(&pooled);
    let total_sum: u64 = ranks.iter().sum();

    // counts[j][s]: subsets of size j with doubled rank sum s.
    let mut counts = vec![vec![0u64; total_sum as usize + 1]; n + 1];
    counts[0][0] = 1;
    for &r in &ranks {
        for j in (1..=n).rev() {
            for s in (r as usize..=total_sum as usize).rev() {
                counts[j][s] += counts[j - 1][s - r as usize];
            }
        }
    }
    // Doubled U for a subset with doubled rank sum s: s - n(n+1); U_b = nm - U_a.
    let offset = (n * (n + 1)) as u64;
    let nm2 = (2 * n * m) as u64;
    let doubled_u = |s: u64| {
        let ua = s - offset;
        ua.min(nm2 - ua)
    };
    let observed: u64 = ranks[..n].iter().sum();
    let observed_u = doubled_u(observed);
    let mut extreme = 0u64;
    let mut all = 0u64;
    for (s, &c) in counts[n].iter().enumerate() {
        if c > 0 {
            all += c;
            if doubled_u(s as u64) <= observed_u {
                extreme += c;
            }
        }
    }
    Ok(MannWhitney { u: observed_u as f64 / 2.0, p: extreme as f64 / all as f64, method: PMethod::Exact })
}

/// Normal approximation with tie and continuity corrections.
pub fn mann_whitney_u_normal(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    check_samples(a, b)?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let ua = u_statistic(a, b);
    let u = ua.min(n * m - ua);

    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let j = pooled[i..].iter().take_while(|&&v| v == pooled[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let total = n + m;
    let variance = n * m / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
    let p = if variance <= 0.0 {
        1.0
    } else {
        let z = ((ua - n * m / 2.0).abs() - 0.5).max(0.0) / variance.sqrt();
        erfc(z / std::f64::consts::SQRT_2).min(1.0)
    };
    Ok(MannWhitney { u, p, method: PMethod::Normal })
}

/// Holm's step-down procedure. Returns reject flags in input order. The
/// boundary is inclusive: `p <= alpha / (m - i)` rejects.
pub fn holm_bonferroni(pvals: &[f64], alpha: f64) -> Result<Vec<bool>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(QdError::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if let Some(&bad) = pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(QdError::InvalidPValue(bad));
    }
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| pvals[x].total_cmp(&pvals[y]));
    let mut reject = vec![false; m];
    for (rank, &i) in order.iter().enumerate() {
        if pvals[i] <= alpha / (m - rank) as f64 {
            reject[i] = true;
        } else {
            break;
        }
    }
    Ok(reject)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonResult {
    pub first: String,
    pub second: String,
    pub u: f64,
    pub p: f64,
    pub reject: bool,
    pub alpha: f64,
}

/// All pairwise tests between labelled groups, corrected as one family.
pub fn compare_groups(groups: &[(String, Vec<f64>)], alpha: f64) -> Result<Vec<ComparisonResult>> {
    let mut results = Vec::new();
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let test = mann_whitney_u(&groups[i].1, &groups[j].1)?;
            results.push(ComparisonResult {
                first: groups[i].0.clone(),
                second: groups[j].0.clone(),
                u: test.u,
                p: test.p,
                reject: false,
                alpha,
            });
        }
    }
    let pvals: Vec<f64> = results.iter().map(|r| r.p).collect();
    for (r, flag) in results.iter_mut().zip(holm_bonferroni(&pvals, alpha)?) {
        r.reject = flag;
    }
    Ok(results)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) { (v[mid - 1] + v[mid]) / 2.0 } else { v[mid] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn separated_samples() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert!((r.p - 0.1).abs() < 1e-15);
        assert_eq!(r.method, PMethod::Exact);
    }

    #[test]
    fn identical_samples() {
        let a = [3.0, 1.0, 4.0, 1.0, 5.0];
        let r = mann_whitney_u(&a, &a).unwrap();
        assert_eq!(r.u, 12.5);
        assert!(r.p >= 0.99);
        let big: Vec<f64> = (0..20).map(|i| (i % 7) as f64).collect();
        let r = mann_whitney_u(&big, &big).unwrap();
        assert_eq!((r.u, r.method), (200.0, PMethod::Normal));
        assert!(r.p >= 0.99);
    }

    #[test]
    fn interleaved_pair() {
        assert_eq!(mann_whitney_u(&[1.0, 3.0], &[2.0, 4.0]).unwrap().u, 1.0);
    }

    #[test]
    fn all_tied_normal() {
        let r = mann_whitney_u_normal(&[1.0; 10], &[1.0; 12]).unwrap();
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn empty_sample_rejected() {
        assert_eq!(mann_whitney_u(&[], &[1.0]).unwrap_err(), QdError::EmptySample);
    }

    #[test]
    fn holm_examples() {
        assert_eq!(holm_bonferroni(&[0.01, 0.04], 0.05).unwrap(), vec![true, true]);
        assert_eq!(holm_bonferroni(&[0.03, 0.04], 0.05).unwrap(), vec![false, false]);
        assert_eq!(holm_bonferroni(&[0.05], 0.05).unwrap(), vec![true]);
        assert_eq!(holm_bonferroni(&[0.04, 0.001, 0.5], 0.05).unwrap(), vec![false, true, false]);
        assert!(holm_bonferroni(&[1.5], 0.05).is_err());
        assert!(holm_bonferroni(&[0.5], 1.0).is_err());
    }

    #[test]
    fn pairwise_family() {
        let groups: Vec<(String, Vec<f64>)> =
            (0..4).map(|g| (format!("g{g}"), (0..5).map(|i| (g * 10 + i) as f64).collect())).collect();
        let res = compare_groups(&groups, 0.05).unwrap();
        assert_eq!(res.len(), 6);
        assert_eq!((res[0].first.as_str(), res[0].second.as_str()), ("g0", "g1"));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    proptest! {
        #[test]
        fn exact_and_normal_agree_at_eight(
            a in proptest::collection::vec(0.0f64..1.0, 8),
            b in proptest::collection::vec(0.0f64..1.0, 8),
        ) {
            let exact = mann_whitney_u_exact(&a, &b).unwrap();
            let normal = mann_whitney_u_normal(&a, &b).unwrap();
            prop_assert_eq!(exact.u, normal.u);
            prop_assert!((exact.p - normal.p).abs() <= 0.05, "{} vs {}", exact.p, normal.p);
        }

        #[test]
        fn u_invariant_under_monotone_transform(
            a in proptest::collection::vec(-3.0f64..3.0, 1..12),
            b in proptest::collection::vec(-3.0f64..3.0, 1..12),
        ) {
            let f = |v: &f64| v.exp() * 2.0 + 1.0;
            let ta: Vec<f64> = a.iter().map(f).collect();
            let tb: Vec<f64> = b.iter().map(f).collect();
            prop_assert_eq!(mann_whitney_u(&a, &b).unwrap(), mann_whitney_u(&ta, &tb).unwrap());
        }

        #[test]
        fn lowering_a_p_value_keeps_other_rejections(
            pvals in proptest::collection::vec(0.0f64..0.2, 1..8),
            which in 0usize..8,
            factor in 0.0f64..1.0,
        ) {
            let which = which % pvals.len();
            let before = holm_bonferroni(&pvals, 0.05).unwrap();
            let mut lowered = pvals.clone();
            lowered[which] *= factor;
            let after = holm_bonferroni(&lowered, 0.05).unwrap();
            for (b, a) in before.iter().zip(&after) {
                prop_assert!(!b || *a);
            }
        }
    }
}
