//! Estimators for the number of common stochastic trends from the descending
//! squared canonical correlations: the maximal-gap rule, a product-ratio
//! argmax criterion, and sequential tests against simulated or exact
//! critical values.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::limitdist::{CriticalValueTable, NormKind};

/// π² as used by the test-statistic scale K·π²·‖τ⁽ⁱ⁾‖.
const PI_SQ: f64 = std::f64::consts::PI * std::f64::consts::PI;

/// Which selection rule produced an estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SelectionMethod {
    MaxGap,
    ArgmaxAlt,
    SeqInf,
    SeqOne,
}

impl SelectionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMethod::MaxGap => "max-gap",
            SelectionMethod::ArgmaxAlt => "argmax-alt",
            SelectionMethod::SeqInf => "seq-inf",
            SelectionMethod::SeqOne => "seq-one",
        }
    }

    /// The sequential method that uses the given norm.
    pub fn sequential(norm: NormKind) -> Self {
        match norm {
            NormKind::Inf => SelectionMethod::SeqInf,
            NormKind::One => SelectionMethod::SeqOne,
        }
    }
}

impl std::str::FromStr for SelectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max-gap" => Ok(SelectionMethod::MaxGap),
            "argmax-alt" => Ok(SelectionMethod::ArgmaxAlt),
            "seq-inf" => Ok(SelectionMethod::SeqInf),
            "seq-one" => Ok(SelectionMethod::SeqOne),
            other => Err(Error::Domain(format!(
                "unknown method '{other}' (expected max-gap, argmax-alt, seq-inf, or seq-one)"
            ))),
        }
    }
}

impl std::fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// τ⁽ⁱ⁾ = (1−λ_i, 1−λ_{i−1}, …, 1−λ₁): deviations of the i smallest
/// retained eigenvalues from one, largest deviation first.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TauVector {
    pub i: usize,
    pub values: Vec<f64>,
}

impl TauVector {
    /// ‖τ⁽ⁱ⁾‖ₕ: sum of entries for One, first (largest) entry for Inf.
    pub fn norm(&self, norm: NormKind) -> f64 {
        match norm {
            NormKind::One => self.values.iter().sum(),
            NormKind::Inf => self.values[0],
        }
    }
}

/// Per-order evidence backing an estimate.
#[derive(Clone, Debug, Serialize)]
pub enum EstimateDiagnostics {
    /// Consecutive eigenvalue gaps λ_i − λ_{i+1} for i = 0…p (padded ends).
    Gaps { gaps: Vec<f64> },
    /// Log-scale criterion values for i = 0…p; ±∞ encodes a zero product.
    Scores { scores: Vec<f64> },
    /// Sequential tests in execution order (descending i), stopping at the
    /// first acceptance.
    Tests {
        orders: Vec<usize>,
        stats: Vec<f64>,
        critical: Vec<f64>,
        rejected: Vec<bool>,
    },
}

/// An estimated number of common trends with its supporting evidence.
#[derive(Clone, Debug, Serialize)]
pub struct TrendEstimate {
    pub s_hat: usize,
    pub method: SelectionMethod,
    pub diagnostics: EstimateDiagnostics,
    /// Significance η for sequential methods, absent otherwise.
    pub level: Option<f64>,
}

impl TrendEstimate {
    /// Cointegration rank implied by a p-dimensional panel.
    pub fn r_hat(&self, p: usize) -> usize {
        p - self.s_hat
    }
}

/// Validates a descending eigenvalue slice in [0,1] and returns p.
fn validate_lambdas(lambdas: &[f64]) -> Result<usize> {
    if lambdas.is_empty() {
        return Err(Error::Dimension("eigenvalue list is empty".into()));
    }
    for (i, &l) in lambdas.iter().enumerate() {
        if !l.is_finite() || !(0.0..=1.0).contains(&l) {
            return Err(Error::Domain(format!(
                "eigenvalue {} = {l} outside [0, 1]",
                i + 1
            )));
        }
    }
    if lambdas.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Domain("eigenvalues must be non-increasing".into()));
    }
    Ok(lambdas.len())
}

/// Builds τ⁽ⁱ⁾ from descending eigenvalues, 1 ≤ i ≤ p.
pub fn tau(lambdas: &[f64], i: usize) -> Result<TauVector> {
    let p = validate_lambdas(lambdas)?;
    if i < 1 || i > p {
        return Err(Error::Domain(format!("order i = {i} outside 1..={p}")));
    }
    let values = (0..i).map(|k| 1.0 - lambdas[i - 1 - k]).collect();
    Ok(TauVector { i, values })
}

/// Test statistic K·π²·‖τ⁽ⁱ⁾‖ₕ.
pub fn test_statistic(lambdas: &[f64], i: usize, k: usize, norm: NormKind) -> Result<f64> {
    if k < 1 {
        return Err(Error::Domain("basis size K must be >= 1".into()));
    }
    Ok(k as f64 * PI_SQ * tau(lambdas, i)?.norm(norm))
}

/// Maximal-gap estimator: ŝ = argmaxᵢ (λ_i − λ_{i+1}) over i = 0…p with
/// λ₀ = 1 and λ_{p+1} = 0; ties go to the smallest i.
pub fn estimate_s_maxgap(lambdas: &[f64]) -> Result<TrendEstimate> {
    let p = validate_lambdas(lambdas)?;
    let mut gaps = Vec::with_capacity(p + 1);
    for i in 0..=p {
        let hi = if i == 0 { 1.0 } else { lambdas[i - 1] };
        let lo = if i == p { 0.0 } else { lambdas[i] };
        gaps.push(hi - lo);
    }
    let s_hat = argmax_first(&gaps);
    Ok(TrendEstimate {
        s_hat,
        method: SelectionMethod::MaxGap,
        diagnostics: EstimateDiagnostics::Gaps { gaps },
        level: None,
    })
}

/// Product-ratio argmax estimator: ŝ maximizes
/// ∏_{h≤i} λ_h / ∏_{h>i} ((T/K)·λ_h) over i = 0…p, empty products = 1.
///
/// Evaluated in log space. A zero eigenvalue in the numerator makes the
/// criterion exactly 0 (log = −∞) no matter the denominator; otherwise a
/// zero in the denominator makes it +∞. Ties go to the smallest i.
pub fn estimate_s_argmax_alt(lambdas: &[f64], t_len: usize, k: usize) -> Result<TrendEstimate> {
    let p = validate_lambdas(lambdas)?;
    if k < 1 || t_len < k {
        return Err(Error::Domain(format!(
            "need T >= K >= 1, got T = {t_len}, K = {k}"
        )));
    }
    let log_ratio = (t_len as f64 / k as f64).ln();
    let mut scores = Vec::with_capacity(p + 1);
    for i in 0..=p {
        let num_zero = lambdas[..i].contains(&0.0);
        let den_zero = lambdas[i..].contains(&0.0);
        let score = if num_zero {
            f64::NEG_INFINITY
        } else if den_zero {
            f64::INFINITY
        } else {
            let num: f64 = lambdas[..i].iter().map(|&l| l.ln()).sum();
            let den: f64 = lambdas[i..].iter().map(|&l| log_ratio + l.ln()).sum();
            num - den
        };
        scores.push(score);
    }
    let s_hat = argmax_first(&scores);
    Ok(TrendEstimate {
        s_hat,
        method: SelectionMethod::ArgmaxAlt,
        diagnostics: EstimateDiagnostics::Scores { scores },
        level: None,
    })
}

/// Sequential test-based estimator at significance `level` = η: starting
/// from i = p, test s = i by comparing K·π²·‖τ⁽ⁱ⁾‖ₕ against the
/// (1−η)-quantile c_{i,h,η}; the first non-rejected order is ŝ, and 0 is
/// returned when every order rejects.
pub fn estimate_s_sequence(
    lambdas: &[f64],
    k: usize,
    norm: NormKind,
    level: f64,
    cvs: &CriticalValueTable,
) -> Result<TrendEstimate> {
    let p = validate_lambdas(lambdas)?;
    if !level.is_finite() || level <= 0.0 || level >= 1.0 {
        return Err(Error::Domain(format!(
            "significance must lie strictly inside (0, 1), got {level}"
        )));
    }
    let mut orders = Vec::new();
    let mut stats = Vec::new();
    let mut critical = Vec::new();
    let mut rejected = Vec::new();
    let mut s_hat = 0;
    for i in (1..=p).rev() {
        let stat = test_statistic(lambdas, i, k, norm)?;
        let cv = cvs.get(i, norm, 1.0 - level)?;
        let reject = stat > cv;
        orders.push(i);
        stats.push(stat);
        critical.push(cv);
        rejected.push(reject);
        if !reject {
            s_hat = i;
            break;
        }
    }
    Ok(TrendEstimate {
        s_hat,
        method: SelectionMethod::sequential(norm),
        diagnostics: EstimateDiagnostics::Tests {
            orders,
            stats,
            critical,
            rejected,
        },
        level: Some(level),
    })
}

/// Runs the chosen estimator on a CCA result. `level` is the significance
/// for the sequential methods and is ignored by the others.
pub fn estimate_s(
    cca: &crate::cca::CcaOutput,
    method: SelectionMethod,
    level: f64,
    cvs: &CriticalValueTable,
) -> Result<TrendEstimate> {
    match method {
        SelectionMethod::MaxGap => estimate_s_maxgap(&cca.lambdas),
        SelectionMethod::ArgmaxAlt => estimate_s_argmax_alt(&cca.lambdas, cca.t_len, cca.k),
        SelectionMethod::SeqInf => {
            estimate_s_sequence(&cca.lambdas, cca.k, NormKind::Inf, level, cvs)
        }
        SelectionMethod::SeqOne => {
            estimate_s_sequence(&cca.lambdas, cca.k, NormKind::One, level, cvs)
        }
    }
}

/// Index of the maximum, first occurrence on ties. Inputs never contain NaN.
fn argmax_first(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limitdist::SimSettings;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn tau_examples() {
        assert_eq!(tau(&[1.0, 1.0], 2).unwrap().values, vec![0.0, 0.0]);
        let t = tau(&[0.9, 0.5], 2).unwrap();
        assert_abs_diff_eq!(t.values[0], 0.5);
        assert_abs_diff_eq!(t.values[1], 0.1);
        let t = tau(&[0.9, 0.5], 1).unwrap();
        assert_eq!(t.values.len(), 1);
        assert_abs_diff_eq!(t.values[0], 0.1);
    }

    #[test]
    fn tau_rejects_bad_input() {
        assert!(tau(&[0.9, 0.5], 0).is_err());
        assert!(tau(&[0.9, 0.5], 3).is_err());
        assert!(tau(&[], 1).is_err());
        assert!(tau(&[0.5, 0.9], 1).is_err());
        assert!(tau(&[1.5], 1).is_err());
    }

    #[test]
    fn statistic_examples() {
        assert_abs_diff_eq!(
            test_statistic(&[1.0, 1.0, 1.0], 2, 50, NormKind::One).unwrap(),
            0.0
        );
        let got = test_statistic(&[0.95, 0.9], 2, 100, NormKind::Inf).unwrap();
        assert_abs_diff_eq!(got, 10.0 * PI_SQ, epsilon = 1e-10);
        assert_abs_diff_eq!(got, 98.6960, epsilon = 1e-4);
    }

    #[test]
    fn one_norm_dominates_inf_norm() {
        let lambdas = [0.9, 0.6, 0.3];
        for i in 1..=3 {
            let one = test_statistic(&lambdas, i, 10, NormKind::One).unwrap();
            let inf = test_statistic(&lambdas, i, 10, NormKind::Inf).unwrap();
            assert!(one >= inf);
        }
    }

    #[test]
    fn maxgap_examples() {
        assert_eq!(estimate_s_maxgap(&[1.0, 1.0, 1.0]).unwrap().s_hat, 3);
        assert_eq!(estimate_s_maxgap(&[0.0, 0.0]).unwrap().s_hat, 0);
        let est = estimate_s_maxgap(&[0.9, 0.85, 0.1]).unwrap();
        assert_eq!(est.s_hat, 2);
        assert_eq!(est.method, SelectionMethod::MaxGap);
        match est.diagnostics {
            EstimateDiagnostics::Gaps { gaps } => {
                let want = [0.10, 0.05, 0.75, 0.10];
                for (g, w) in gaps.iter().zip(want) {
                    assert_abs_diff_eq!(*g, w, epsilon = 1e-12);
                }
            }
            other => panic!("unexpected diagnostics {other:?}"),
        }
    }

    #[test]
    fn maxgap_tie_takes_smallest_order() {
        // gaps: (0.5, 0, 0.5) -> orders 0 and 2 tie, pick 0
        assert_eq!(estimate_s_maxgap(&[0.5, 0.5]).unwrap().s_hat, 0);
    }

    #[test]
    fn argmax_alt_examples() {
        let est = estimate_s_argmax_alt(&[0.99, 0.01], 100, 10).unwrap();
        assert_eq!(est.s_hat, 1);
        match &est.diagnostics {
            EstimateDiagnostics::Scores { scores } => {
                let want = [1.0101, 9.9, 0.0099];
                for (s, w) in scores.iter().zip(want) {
                    assert_abs_diff_eq!(s.exp(), w, epsilon = 1e-3);
                }
            }
            other => panic!("unexpected diagnostics {other:?}"),
        }
        assert_eq!(estimate_s_argmax_alt(&[1.0; 4], 100, 10).unwrap().s_hat, 4);
        assert_eq!(estimate_s_argmax_alt(&[0.0; 3], 100, 10).unwrap().s_hat, 0);
    }

    #[test]
    fn argmax_alt_zero_handling_never_yields_nan() {
        // zeros reach both products: numerator zero must dominate
        let est = estimate_s_argmax_alt(&[0.9, 0.0, 0.0], 100, 10).unwrap();
        assert_eq!(est.s_hat, 0);
        match &est.diagnostics {
            EstimateDiagnostics::Scores { scores } => {
                assert!(scores.iter().all(|s| !s.is_nan()));
                assert_eq!(scores[0], f64::INFINITY);
                assert_eq!(scores[1], f64::INFINITY);
                assert_eq!(scores[2], f64::NEG_INFINITY);
                assert_eq!(scores[3], f64::NEG_INFINITY);
            }
            other => panic!("unexpected diagnostics {other:?}"),
        }
    }

    #[test]
    fn argmax_alt_requires_t_at_least_k() {
        assert!(estimate_s_argmax_alt(&[0.5], 5, 10).is_err());
        assert!(estimate_s_argmax_alt(&[0.5], 10, 0).is_err());
    }

    fn table_with(entries: &[(&str, f64)]) -> CriticalValueTable {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cv.json");
        let body: Vec<String> = entries
            .iter()
            .map(|(k, v)| format!("    \"{k}\": {v:?}"))
            .collect();
        std::fs::write(
            &path,
            format!(
                "{{\n  \"format\": \"cotrend-critical-values/1\",\n  \"provenance\": {{\"basis\": \"kl\", \"grid\": 100, \"reps\": 10, \"seed\": 1}},\n  \"values\": {{\n{}\n  }}\n}}\n",
                body.join(",\n")
            ),
        )
        .unwrap();
        CriticalValueTable::load(&path).unwrap()
    }

    #[test]
    fn sequence_stops_at_first_acceptance() {
        // stats: i=2 -> 40 (> 30, reject), i=1 -> 10 (< 17.7118, accept)
        let k = 100;
        let l2 = 1.0 - 40.0 / (k as f64 * PI_SQ);
        let l1 = 1.0 - 10.0 / (k as f64 * PI_SQ);
        let cvs = table_with(&[("002/inf/0.9500", 30.0)]);
        let est = estimate_s_sequence(&[l1, l2], k, NormKind::Inf, 0.05, &cvs).unwrap();
        assert_eq!(est.s_hat, 1);
        assert_eq!(est.method, SelectionMethod::SeqInf);
        assert_eq!(est.level, Some(0.05));
        match &est.diagnostics {
            EstimateDiagnostics::Tests {
                orders,
                stats,
                critical,
                rejected,
            } => {
                assert_eq!(orders, &[2, 1]);
                assert_abs_diff_eq!(stats[0], 40.0, epsilon = 1e-10);
                assert_abs_diff_eq!(stats[1], 10.0, epsilon = 1e-10);
                assert_abs_diff_eq!(critical[0], 30.0);
                assert_abs_diff_eq!(critical[1], 17.71180, epsilon = 1e-4);
                assert_eq!(rejected, &[true, false]);
            }
            other => panic!("unexpected diagnostics {other:?}"),
        }
    }

    #[test]
    fn sequence_boundary_outcomes() {
        let cvs = table_with(&[("002/inf/0.9500", 30.0)]);
        // all statistics zero: accept at i = p immediately
        let est = estimate_s_sequence(&[1.0, 1.0], 100, NormKind::Inf, 0.05, &cvs).unwrap();
        assert_eq!(est.s_hat, 2);
        match &est.diagnostics {
            EstimateDiagnostics::Tests { orders, .. } => assert_eq!(orders, &[2]),
            other => panic!("unexpected diagnostics {other:?}"),
        }
        // all statistics enormous: reject everywhere, return 0
        let est = estimate_s_sequence(&[0.2, 0.1], 100, NormKind::Inf, 0.05, &cvs).unwrap();
        assert_eq!(est.s_hat, 0);
    }

    #[test]
    fn sequence_needs_covered_dims() {
        let cvs = table_with(&[("002/inf/0.9500", 30.0)]);
        let err = estimate_s_sequence(&[0.5, 0.4, 0.3], 100, NormKind::Inf, 0.05, &cvs);
        assert!(matches!(
            err,
            Err(Error::MissingCriticalValue { dim: 3, .. })
        ));
    }

    #[test]
    fn sequence_dim_one_needs_no_table() {
        let cvs = CriticalValueTable::new(SimSettings {
            reps: 10,
            grid: 100,
            seed: 1,
        });
        let est = estimate_s_sequence(&[0.999], 73, NormKind::One, 0.05, &cvs).unwrap();
        assert_eq!(est.s_hat, 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn estimates_stay_in_range(mut raw in proptest::collection::vec(0.0f64..=1.0, 1..8)) {
            raw.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let p = raw.len();
            prop_assert!(estimate_s_maxgap(&raw).unwrap().s_hat <= p);
            prop_assert!(estimate_s_argmax_alt(&raw, 200, 20).unwrap().s_hat <= p);
        }

        #[test]
        fn one_norm_statistic_monotone_in_order(mut raw in proptest::collection::vec(0.0f64..=1.0, 2..8)) {
            raw.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let p = raw.len();
            let mut prev = 0.0;
            for i in 1..=p {
                let s = test_statistic(&raw, i, 10, NormKind::One).unwrap();
                prop_assert!(s >= prev - 1e-12);
                prev = s;
            }
        }

        #[test]
        fn argmax_alt_matches_direct_products(mut raw in proptest::collection::vec(0.01f64..=1.0, 1..6)) {
            raw.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let p = raw.len();
            let (t_len, k) = (300, 30);
            let ratio = t_len as f64 / k as f64;
            let direct: Vec<f64> = (0..=p).map(|i| {
                let num: f64 = raw[..i].iter().product();
                let den: f64 = raw[i..].iter().map(|&l| ratio * l).product();
                num / den
            }).collect();
            let mut best = 0;
            for i in 1..=p {
                if direct[i] > direct[best] {
                    best = i;
                }
            }
            let est = estimate_s_argmax_alt(&raw, t_len, k).unwrap();
            prop_assert_eq!(est.s_hat, best);
        }
    }
}
