//! Pass@k and score aggregation.
//!
//! Per-problem pass@k uses the unbiased estimator `1 - C(n-c, k) / C(n, k)`,
//! evaluated exactly as a reduced fraction. A language score is 100 times the
//! mean over its problems; the overall score is the unweighted mean of the
//! language scores; category scores pool problems from every language.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::benchmark::{Category, ProblemId};
use crate::digest::Digest;
use crate::language::Language;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("pass@k domain error: {0}")]
    Domain(String),
    #[error("results mix languages ({0} and {1})")]
    MixedLanguages(Language, Language),
    #[error("no scorable results")]
    NoResults,
}

/// Exact `1 - C(n-c, k) / C(n, k)`.
pub fn pass_at_k_exact(n: u64, c: u64, k: u64) -> Result<BigRational, MetricsError> {
    if n == 0 || k == 0 {
        return Err(MetricsError::Domain(format!("need n >= 1 and k >= 1 (n={n}, k={k})")));
    }
    if k > n {
        return Err(MetricsError::Domain(format!("k={k} exceeds n={n}")));
    }
    if c > n {
        return Err(MetricsError::Domain(format!("c={c} exceeds n={n}")));
    }
    if n - c < k {
        return Ok(BigRational::one());
    }
    // C(n-c, k) / C(n, k) = prod_{i<k} (n-c-i) / (n-i)
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    for i in 0..k {
        num *= n - c - i;
        den *= n - i;
    }
    let miss = BigRational::new(BigInt::from(num), BigInt::from(den));
    Ok(BigRational::one() - miss)
}

/// [`pass_at_k_exact`] converted to a probability in `[0, 1]`.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64, MetricsError> {
    let exact = pass_at_k_exact(n, c, k)?;
    Ok(ratio_to_f64(&exact))
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    r.to_f64().unwrap_or(f64::NAN).clamp(0.0, 1.0)
}

/// Outcome of one sampled completion as far as scoring is concerned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleOutcome {
    Pass,
    Fail,
    /// Sandbox-side failure; excluded from `n` and reported separately.
    Infra,
}

/// Per-problem sample counts before infra exclusion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemTally {
    pub id: ProblemId,
    pub category: Category,
    pub passed: u64,
    pub failed: u64,
    pub infra: u64,
    /// References (e.g. report digests) to the samples behind the counts.
    #[serde(default)]
    pub reports: Vec<String>,
}

impl ProblemTally {
    pub fn new(id: ProblemId, category: Category) -> Self {
        ProblemTally {
            id,
            category,
            passed: 0,
            failed: 0,
            infra: 0,
            reports: Vec::new(),
        }
    }

    pub fn record(&mut self, outcome: SampleOutcome, report: Option<String>) {
        match outcome {
            SampleOutcome::Pass => self.passed += 1,
            SampleOutcome::Fail => self.failed += 1,
            SampleOutcome::Infra => self.infra += 1,
        }
        self.reports.extend(report);
    }

    /// The scorable view, or `None` when every sample was an infra failure.
    pub fn to_result(&self) -> Option<ProblemResult> {
        let n = self.passed + self.failed;
        (n > 0).then(|| ProblemResult {
            id: self.id,
            category: self.category,
            samples_total: n,
            samples_passed: self.passed,
            reports: self.reports.clone(),
        })
    }
}

/// `n` samples with `c` passing, `0 <= c <= n`, `n >= 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemResult {
    pub id: ProblemId,
    pub category: Category,
    pub samples_total: u64,
    pub samples_passed: u64,
    #[serde(default)]
    pub reports: Vec<String>,
}

impl ProblemResult {
    pub fn pass_at(&self, k: u64) -> Result<f64, MetricsError> {
        pass_at_k(self.samples_total, self.samples_passed, k)
    }
}

fn mean_pass_at(results: &[&ProblemResult], k: u64) -> Result<f64, MetricsError> {
    // Sum exactly, divide once.
    let mut sum = BigRational::zero();
    for r in results {
        sum += pass_at_k_exact(r.samples_total, r.samples_passed, k)?;
    }
    let mean = sum / BigRational::from_integer(BigInt::from(results.len()));
    Ok(ratio_to_f64(&mean))
}

/// 100 × mean pass@k over one language's problems.
pub fn score_language(results: &[ProblemResult], k: u64) -> Result<f64, MetricsError> {
    let first = results.first().ok_or(MetricsError::NoResults)?;
    if let Some(other) = results.iter().find(|r| r.id.language != first.id.language) {
        return Err(MetricsError::MixedLanguages(first.id.language, other.id.language));
    }
    let refs: Vec<&ProblemResult> = results.iter().collect();
    Ok(100.0 * mean_pass_at(&refs, k)?)
}

/// Aggregate scores. Percentages are unrounded; see [`display_round`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub k: u64,
    pub per_language: BTreeMap<Language, f64>,
    pub per_category: BTreeMap<Category, f64>,
    pub overall: f64,
    pub problems_scored: usize,
    /// Samples dropped from `n` because the sandbox reported Infra.
    pub infra_excluded_samples: u64,
    /// Problems left out entirely (no non-infra samples, or fewer than k).
    pub excluded_problems: Vec<ProblemId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoding_digest: Option<Digest>,
}

/// Builds the per-language, per-category and overall scores.
pub fn aggregate(tallies: &[ProblemTally], k: u64) -> Result<ScoreTable, MetricsError> {
    if k == 0 {
        return Err(MetricsError::Domain("k must be >= 1".into()));
    }
    let mut infra_excluded_samples = 0;
    let mut excluded_problems = Vec::new();
    let mut scored = Vec::new();
    for t in tallies {
        infra_excluded_samples += t.infra;
        match t.to_result() {
            Some(r) if r.samples_total >= k => scored.push(r),
            _ => excluded_problems.push(t.id),
        }
    }
    if scored.is_empty() {
        return Err(MetricsError::NoResults);
    }

    let mut by_language: BTreeMap<Language, Vec<ProblemResult>> = BTreeMap::new();
    let mut by_category: BTreeMap<Category, Vec<&ProblemResult>> = BTreeMap::new();
    for r in &scored {
        by_language.entry(r.id.language).or_default().push(r.clone());
        by_category.entry(r.category).or_default().push(r);
    }

    let mut per_language = BTreeMap::new();
    for (lang, results) in &by_language {
        per_language.insert(*lang, score_language(results, k)?);
    }
    let mut per_category = BTreeMap::new();
    for (cat, results) in &by_category {
        per_category.insert(*cat, 100.0 * mean_pass_at(results, k)?);
    }
    let overall = language_mean(&per_language);

    Ok(ScoreTable {
        k,
        per_language,
        per_category,
        overall,
        problems_scored: scored.len(),
        infra_excluded_samples,
        excluded_problems,
        decoding_digest: None,
    })
}

/// Unweighted mean of per-language scores.
pub fn language_mean(per_language: &BTreeMap<Language, f64>) -> f64 {
    if per_language.is_empty() {
        return 0.0;
    }
    per_language.values().sum::<f64>() / per_language.len() as f64
}

/// One-decimal display rounding, applied only when rendering.
pub fn display_round(percent: f64) -> f64 {
    (percent * 10.0).round() / 10.0
}

pub fn format_percent(percent: f64) -> String {
    format!("{:.1}", display_round(percent))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tally(concept: u32, lang: Language, cat: Category, passed: u64, failed: u64) -> ProblemTally {
        ProblemTally {
            id: ProblemId {
                concept_id: concept,
                language: lang,
            },
            category: cat,
            passed,
            failed,
            infra: 0,
            reports: vec![],
        }
    }

    fn greedy_language(lang: Language, solved: u32, total: u32) -> Vec<ProblemTally> {
        (1..=total)
            .map(|c| {
                let pass = c <= solved;
                tally(c, lang, Category::Algorithm, pass as u64, (!pass) as u64)
            })
            .collect()
    }

    #[test]
    fn spec_examples() {
        assert_eq!(pass_at_k(1, 1, 1).unwrap(), 1.0);
        assert_eq!(pass_at_k(10, 0, 5).unwrap(), 0.0);
        // 7 of the 10 two-element subsets of 5 samples contain one of 2 passes.
        assert_eq!(pass_at_k_exact(5, 2, 2).unwrap(), BigRational::new(7.into(), 10.into()));
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(pass_at_k(3, 1, 4), Err(MetricsError::Domain(_))));
        assert!(matches!(pass_at_k(3, 4, 1), Err(MetricsError::Domain(_))));
        assert!(matches!(pass_at_k(3, 1, 0), Err(MetricsError::Domain(_))));
        assert!(matches!(pass_at_k(0, 0, 0), Err(MetricsError::Domain(_))));
    }

    #[test]
    fn large_n_is_exact() {
        let p = pass_at_k(10_000, 1, 1).unwrap();
        assert!((p - 1e-4).abs() < 1e-15);
        let p = pass_at_k(10_000, 37, 5_000).unwrap();
        assert!(p > 0.999_999 && p <= 1.0);
        let p = pass_at_k(10_000, 0, 10_000).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn greedy_language_scores() {
        let results = |solved| {
            greedy_language(Language::Python, solved, 30)
                .iter()
                .filter_map(ProblemTally::to_result)
                .collect::<Vec<_>>()
        };
        assert!((score_language(&results(12), 1).unwrap() - 40.0).abs() < 1e-9);
        assert_eq!(format_percent(score_language(&results(14), 1).unwrap()), "46.7");
        assert_eq!(score_language(&results(0), 1).unwrap(), 0.0);
        assert!(matches!(score_language(&[], 1), Err(MetricsError::NoResults)));
    }

    #[test]
    fn mixed_languages_rejected() {
        let mut rs: Vec<_> = greedy_language(Language::Python, 1, 2).iter().filter_map(|t| t.to_result()).collect();
        rs.extend(greedy_language(Language::Ruby, 1, 1).iter().filter_map(|t| t.to_result()));
        assert!(matches!(score_language(&rs, 1), Err(MetricsError::MixedLanguages(..))));
    }

    #[test]
    fn overall_is_unweighted_language_mean() {
        let mut tallies = greedy_language(Language::Python, 0, 30);
        tallies.extend(greedy_language(Language::Cpp, 3, 3));
        let t = aggregate(&tallies, 1).unwrap();
        assert_eq!(t.per_language[&Language::Python], 0.0);
        assert_eq!(t.per_language[&Language::Cpp], 100.0);
        assert_eq!(t.overall, 50.0);
        // Pooled category score is problem-weighted: 3 of 33.
        assert!((t.per_category[&Category::Algorithm] - 300.0 / 33.0).abs() < 1e-9);
    }

    #[test]
    fn single_language_overall_matches() {
        let t = aggregate(&greedy_language(Language::Swift, 13, 30), 1).unwrap();
        assert_eq!(t.overall, t.per_language[&Language::Swift]);
    }

    #[test]
    fn infra_samples_excluded_and_counted() {
        let mut a = tally(1, Language::Python, Category::Simulation, 1, 0);
        a.infra = 2;
        let mut b = tally(2, Language::Python, Category::Simulation, 0, 0);
        b.infra = 1;
        let t = aggregate(&[a, b.clone()], 1).unwrap();
        assert_eq!(t.infra_excluded_samples, 3);
        assert_eq!(t.excluded_problems, vec![b.id]);
        assert_eq!(t.per_language[&Language::Python], 100.0);
        assert_eq!(t.problems_scored, 1);
    }

    #[test]
    fn all_infra_is_no_results() {
        let mut a = tally(1, Language::Python, Category::Simulation, 0, 0);
        a.infra = 1;
        assert!(matches!(aggregate(&[a], 1), Err(MetricsError::NoResults)));
    }

    proptest! {
        #[test]
        fn bounded_and_monotone(n in 1u64..40, c_seed in 0u64..40, k_seed in 1u64..40) {
            let c = c_seed % (n + 1);
            let k = 1 + (k_seed - 1) % n;
            let p = pass_at_k(n, c, k).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            if c < n {
                prop_assert!(pass_at_k_exact(n, c + 1, k).unwrap() >= pass_at_k_exact(n, c, k).unwrap());
            }
            if k < n {
                prop_assert!(pass_at_k_exact(n, c, k + 1).unwrap() >= pass_at_k_exact(n, c, k).unwrap());
            }
            prop_assert_eq!(
                pass_at_k_exact(n, c, 1).unwrap(),
                BigRational::new(BigInt::from(c), BigInt::from(n))
            );
        }
    }
}
