//! Action Shapley computation: the exhaustive sum over subsets and the
//! truncated top-down accumulator with failure memoization.
//!
//! Both routes visit subsets in the same canonical order (descending
//! cardinality, lexicographic within a cardinality) and use the same
//! summation expression, so on failure-free valuations they agree bit for
//! bit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subset::{binomial, enumerate_subsets, SubsetMask};

/// Result of valuing one training subset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "score", rename_all = "lowercase")]
pub enum ValuationOutcome {
    Success(f64),
    /// The agent trained on this subset missed its goal.
    Failure,
}

impl ValuationOutcome {
    /// Non-finite scores are treated as failures.
    pub fn from_score(score: f64) -> Self {
        if score.is_finite() {
            ValuationOutcome::Success(score)
        } else {
            ValuationOutcome::Failure
        }
    }

    pub fn score(&self) -> Option<f64> {
        match *self {
            ValuationOutcome::Success(s) => Some(s),
            ValuationOutcome::Failure => None,
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, ValuationOutcome::Failure)
    }
}

/// A function from training subsets to outcomes.
pub trait Valuation: Sync {
    fn evaluate(&self, subset: &SubsetMask) -> ValuationOutcome;

    /// Seed that, together with the subset, identifies an evaluation.
    fn seed(&self) -> u64 {
        0
    }
}

impl<F> Valuation for F
where
    F: Fn(&SubsetMask) -> ValuationOutcome + Sync,
{
    fn evaluate(&self, subset: &SubsetMask) -> ValuationOutcome {
        self(subset)
    }
}

/// Parameters of the truncated algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgoParams {
    /// Failures tolerated per cardinality level before termination.
    pub epsilon: u32,
    /// Scale constant. `None` means `1/n`.
    #[serde(default)]
    pub c_f: Option<f64>,
    #[serde(default = "default_min_cardinality")]
    pub min_cardinality: usize,
}

fn default_min_cardinality() -> usize {
    2
}

impl Default for AlgoParams {
    fn default() -> Self {
        Self {
            epsilon: 1,
            c_f: None,
            min_cardinality: 2,
        }
    }
}

impl AlgoParams {
    pub fn with_epsilon(mut self, epsilon: u32) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_c_f(mut self, c_f: f64) -> Self {
        self.c_f = Some(c_f);
        self
    }

    pub fn with_min_cardinality(mut self, min_cardinality: usize) -> Self {
        self.min_cardinality = min_cardinality;
        self
    }

    /// Effective scale constant for `n` points.
    pub fn scale(&self, n: usize) -> f64 {
        self.c_f.unwrap_or(1.0 / n as f64)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.epsilon < 1 {
            return Err(Error::domain("epsilon must be at least 1"));
        }
        if let Some(c) = self.c_f {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::domain(format!("c_f must be positive, got {c}")));
            }
        }
        if self.min_cardinality >= n {
            return Err(Error::domain(format!(
                "min_cardinality {} must be below n={n}",
                self.min_cardinality
            )));
        }
        Ok(())
    }
}

/// Per-point output of the truncated algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub point_id: usize,
    /// Absent for indispensable points.
    pub phi: Option<f64>,
    pub theta_k: usize,
    pub indispensable: bool,
    /// Inner-loop subset evaluations performed.
    pub evaluations_used: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyReport {
    pub n: usize,
    pub per_point: Vec<PointResult>,
    /// Largest `theta_k` among dispensable points, or `n` if there are none.
    pub global_theta: usize,
    pub p_comp: f64,
}

impl ShapleyReport {
    pub fn total_evaluations(&self) -> u64 {
        self.per_point.iter().map(|p| p.evaluations_used).sum()
    }

    pub fn indispensable(&self) -> Vec<usize> {
        self.per_point
            .iter()
            .filter(|p| p.indispensable)
            .map(|p| p.point_id)
            .collect()
    }
}

/// Computational-effort ratio `1 - 2^theta / 2^n`.
pub fn p_comp(n: usize, global_theta: usize) -> f64 {
    1.0 - 2f64.powi(global_theta as i32) / 2f64.powi(n as i32)
}

fn check_point(n: usize, k: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::domain(format!("need at least 2 points, got {n}")));
    }
    if k >= n {
        return Err(Error::domain(format!("point {k} out of range for n={n}")));
    }
    Ok(())
}

/// Exhaustive Shapley sum for point `k` over every `d ⊆ D \ {k}` with
/// `|d| >= min_cardinality`. Terms where either side fails contribute zero.
pub fn exact_shapley<V: Valuation + ?Sized>(
    valuation: &V,
    n: usize,
    k: usize,
    c_f: f64,
    min_cardinality: usize,
) -> Result<f64> {
    check_point(n, k)?;
    let mut sum = 0.0;
    for i in (min_cardinality..n).rev() {
        let weight = binomial(n as u64 - 1, i as u64) as f64;
        for d in enumerate_subsets(n, i, k)? {
            let with_k = valuation.evaluate(&d.with(k));
            let without_k = valuation.evaluate(&d);
            if let (ValuationOutcome::Success(a), ValuationOutcome::Success(b)) = (with_k, without_k)
            {
                sum += c_f * (a - b) / weight;
            }
        }
    }
    Ok(sum)
}

/// Truncated top-down Action Shapley for point `k`.
///
/// Walks cardinalities from `n-1` down to `params.min_cardinality`. The
/// failure counter resets at every level; once it reaches `epsilon` the
/// walk stops and `theta_k` is one above the failing level.
pub fn truncated_action_shapley<V: Valuation + ?Sized>(
    valuation: &V,
    n: usize,
    k: usize,
    params: &AlgoParams,
) -> Result<PointResult> {
    check_point(n, k)?;
    params.validate(n)?;
    let c_f = params.scale(n);

    let mut sum = 0.0;
    let mut terms = 0u64;
    let mut evaluations = 0u64;
    let mut theta = params.min_cardinality.max(1);
    let mut terminated_at = None;

    'levels: for i in (params.min_cardinality..n).rev() {
        let weight = binomial(n as u64 - 1, i as u64) as f64;
        let mut mem = 0u32;
        for d in enumerate_subsets(n, i, k)? {
            evaluations += 1;
            let with_k = valuation.evaluate(&d.with(k));
            // short-circuit: U(d) is only needed when U(d ∪ {k}) succeeded
            let without_k = match with_k {
                ValuationOutcome::Failure => ValuationOutcome::Failure,
                ValuationOutcome::Success(_) => valuation.evaluate(&d),
            };
            match (with_k, without_k) {
                (ValuationOutcome::Success(a), ValuationOutcome::Success(b)) => {
                    sum += c_f * (a - b) / weight;
                    terms += 1;
                }
                _ => {
                    mem += 1;
                    if mem == params.epsilon {
                        theta = i + 1;
                        terminated_at = Some(i);
                        break 'levels;
                    }
                }
            }
        }
    }

    let indispensable = terminated_at == Some(n - 1) && terms == 0;
    Ok(PointResult {
        point_id: k,
        phi: (!indispensable).then_some(sum),
        theta_k: theta,
        indispensable,
        evaluations_used: evaluations,
    })
}

/// Collects per-point results into a report with the global cut-off
/// cardinality and effort ratio.
pub fn assemble_report(mut results: Vec<PointResult>, n: usize) -> Result<ShapleyReport> {
    if results.is_empty() {
        return Err(Error::domain("no point results to assemble"));
    }
    results.sort_by_key(|p| p.point_id);
    // Indispensable points carry theta_k = n by construction; the target set
    // size is driven by the dispensable ones.
    let global_theta = results
        .iter()
        .filter(|p| !p.indispensable)
        .map(|p| p.theta_k)
        .max()
        .unwrap_or(n);
    if global_theta > n {
        return Err(Error::domain(format!(
            "cut-off cardinality {global_theta} exceeds n={n}"
        )));
    }
    Ok(ShapleyReport {
        n,
        per_point: results,
        global_theta,
        p_comp: p_comp(n, global_theta),
    })
}

/// Runs the truncated algorithm for every point, points in parallel.
///
/// Each point's reduction is sequential, so the report does not depend on
/// scheduling. Pair with a memoizing valuation to share evaluations
/// between points.
pub fn action_shapley_report<V: Valuation + ?Sized>(
    valuation: &V,
    n: usize,
    params: &AlgoParams,
) -> Result<ShapleyReport> {
    params.validate(n)?;
    let results = (0..n)
        .into_par_iter()
        .map(|k| truncated_action_shapley(valuation, n, k, params))
        .collect::<Result<Vec<_>>>()?;
    assemble_report(results, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU64, Ordering};

    fn card(d: &SubsetMask) -> ValuationOutcome {
        ValuationOutcome::Success(d.cardinality() as f64)
    }

    fn planted(pivot: usize) -> impl Fn(&SubsetMask) -> ValuationOutcome + Sync {
        move |d: &SubsetMask| {
            if d.contains(pivot) {
                ValuationOutcome::Success(d.cardinality() as f64)
            } else {
                ValuationOutcome::Failure
            }
        }
    }

    // Hand enumeration for n=4, k=2, pivot 0, min_cardinality 2:
    //   |d|=3: {0,1,3}: U({0,1,2,3}) - U({0,1,3}) = 4 - 3 = 1, weight C(3,3)=1
    //   |d|=2: {0,1}: 3-2 = 1, weight 3; {0,3}: 1/3; {1,3}: null
    const PLANTED_K2: f64 = 1.0 + 1.0 / 3.0 + 1.0 / 3.0;

    #[test]
    fn exact_cardinality_valuation() {
        assert_eq!(exact_shapley(&card, 3, 0, 1.0, 0).unwrap(), 3.0);
    }

    #[test]
    fn exact_constant_is_zero() {
        let c = |_: &SubsetMask| ValuationOutcome::Success(7.25);
        for k in 0..5 {
            assert_eq!(exact_shapley(&c, 5, k, 0.2, 0).unwrap(), 0.0);
        }
    }

    #[test]
    fn exact_planted_null() {
        let phi = exact_shapley(&planted(0), 4, 2, 1.0, 2).unwrap();
        assert!((phi - PLANTED_K2).abs() < 1e-15);
        assert!((phi - 1.6667).abs() < 1e-4);
    }

    #[test]
    fn truncated_pivot_is_indispensable() {
        let r = truncated_action_shapley(
            &planted(0),
            4,
            0,
            &AlgoParams::default().with_c_f(1.0),
        )
        .unwrap();
        assert!(r.indispensable);
        assert_eq!(r.phi, None);
        assert_eq!(r.theta_k, 4);
        assert_eq!(r.evaluations_used, 1);
    }

    #[test]
    fn truncated_planted_non_pivot() {
        let r = truncated_action_shapley(
            &planted(0),
            4,
            2,
            &AlgoParams::default().with_c_f(1.0),
        )
        .unwrap();
        assert!(!r.indispensable);
        assert_eq!(r.theta_k, 3);
        assert_eq!(r.phi, Some(PLANTED_K2));
        // {0,1,3}, then {0,1}, {0,3}, {1,3} at cardinality 2
        assert_eq!(r.evaluations_used, 4);
    }

    #[test]
    fn truncated_matches_exact_without_failures() {
        let params = AlgoParams::default().with_c_f(1.0);
        for k in 0..5 {
            let r = truncated_action_shapley(&card, 5, k, &params).unwrap();
            let exact = exact_shapley(&card, 5, k, 1.0, 2).unwrap();
            assert_eq!(r.phi.unwrap().to_bits(), exact.to_bits());
            assert_eq!(r.theta_k, 2);
        }
    }

    #[test]
    fn failed_with_k_skips_without_k_call() {
        let calls = AtomicU64::new(0);
        let v = |_: &SubsetMask| {
            calls.fetch_add(1, Ordering::Relaxed);
            ValuationOutcome::Failure
        };
        let r = truncated_action_shapley(&v, 6, 3, &AlgoParams::default()).unwrap();
        assert_eq!(r.evaluations_used, 1);
        assert_eq!(calls.load(Ordering::Relaxed), 1);
        assert!(r.indispensable);
    }

    #[test]
    fn report_values() {
        let mk = |thetas: &[usize]| {
            thetas
                .iter()
                .enumerate()
                .map(|(i, &t)| PointResult {
                    point_id: i,
                    phi: Some(0.0),
                    theta_k: t,
                    indispensable: false,
                    evaluations_used: 1,
                })
                .collect::<Vec<_>>()
        };
        let r = assemble_report(mk(&[4, 4, 4, 4, 4]), 5).unwrap();
        assert_eq!(r.global_theta, 4);
        assert_eq!(r.p_comp, 0.5);
        let r = assemble_report(mk(&[2, 3, 5, 1]), 15).unwrap();
        assert_eq!(r.global_theta, 5);
        assert_eq!(r.p_comp, 1.0 - 32.0 / 32768.0);
        assert!((r.p_comp - 0.99902).abs() < 1e-5);
        assert_eq!(p_comp(12, 6), 0.984375);
        assert!(matches!(assemble_report(vec![], 5), Err(Error::Domain(_))));

        // three indispensable points at theta = n do not lift the target size
        let mut pts = mk(&[4, 4, 5, 5, 5]);
        for p in &mut pts[2..] {
            p.indispensable = true;
            p.phi = None;
        }
        let r = assemble_report(pts.clone(), 5).unwrap();
        assert_eq!((r.global_theta, r.p_comp), (4, 0.5));
        for p in &mut pts {
            p.indispensable = true;
        }
        assert_eq!(assemble_report(pts, 5).unwrap().global_theta, 5);
    }

    #[test]
    fn params_validation() {
        assert!(AlgoParams::default().with_epsilon(0).validate(5).is_err());
        assert!(AlgoParams::default().with_c_f(-1.0).validate(5).is_err());
        assert!(AlgoParams::default().with_min_cardinality(5).validate(5).is_err());
        assert_eq!(AlgoParams::default().scale(4), 0.25);
    }

    #[test]
    fn outcome_serde_shape() {
        let s = serde_json::to_string(&ValuationOutcome::Success(1.5)).unwrap();
        assert_eq!(s, r#"{"outcome":"success","score":1.5}"#);
        let f = serde_json::to_string(&ValuationOutcome::Failure).unwrap();
        assert_eq!(f, r#"{"outcome":"failure"}"#);
        assert_eq!(ValuationOutcome::from_score(f64::NAN), ValuationOutcome::Failure);
    }
}
