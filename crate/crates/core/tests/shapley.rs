use action_shapley::shapley::PointResult;
use action_shapley::valuation::SyntheticValuation;
use action_shapley::{
    action_shapley_report, binomial, exact_shapley, p_comp, truncated_action_shapley, AlgoParams, SubsetMask,
    Valuation, ValuationOutcome,
};
use proptest::prelude::*;

/// An arbitrary failure-free game: one score per subset.
#[derive(Debug, Clone)]
struct Table(Vec<f64>);

impl Valuation for Table {
    fn evaluate(&self, d: &SubsetMask) -> ValuationOutcome {
        ValuationOutcome::Success(self.0[d.bits() as usize])
    }
}

fn table(n: usize) -> impl Strategy<Value = Table> {
    prop::collection::vec(-100.0f64..100.0, 1 << n).prop_map(Table)
}

fn swap(d: &SubsetMask, i: usize, j: usize) -> SubsetMask {
    let (a, b) = (d.contains(i), d.contains(j));
    let mut out = d.without(i).without(j);
    if a {
        out = out.with(j);
    }
    if b {
        out = out.with(i);
    }
    out
}

fn phis<V: Valuation>(v: &V, n: usize, params: &AlgoParams) -> Vec<f64> {
    (0..n)
        .map(|k| truncated_action_shapley(v, n, k, params).unwrap().phi.unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn truncated_equals_exact_bit_for_bit((n, t, min) in (4usize..=10).prop_flat_map(|n| (Just(n), table(n), 0..n))) {
        let params = AlgoParams::default().with_min_cardinality(min);
        for k in 0..n {
            let truncated = truncated_action_shapley(&t, n, k, &params).unwrap();
            let exact = exact_shapley(&t, n, k, params.scale(n), min).unwrap();
            prop_assert_eq!(truncated.phi.unwrap().to_bits(), exact.to_bits());
            prop_assert!(!truncated.indispensable);
        }
    }

    #[test]
    fn symmetric_points_get_equal_values((n, t) in (3usize..=8).prop_flat_map(|n| (Just(n), table(n))), pick in any::<(usize, usize)>()) {
        let i = pick.0 % n;
        let j = (i + 1 + pick.1 % (n - 1)) % n;
        let sym = move |d: &SubsetMask| {
            ValuationOutcome::Success(t.0[d.bits() as usize] + t.0[swap(d, i, j).bits() as usize])
        };
        let phi = phis(&sym, n, &AlgoParams::default());
        let scale = phi[i].abs().max(phi[j].abs()).max(1e-300);
        prop_assert!((phi[i] - phi[j]).abs() / scale <= 1e-12, "{} vs {}", phi[i], phi[j]);
    }

    #[test]
    fn null_points_get_exactly_zero((n, t) in (3usize..=8).prop_flat_map(|n| (Just(n), table(n))), p in any::<usize>()) {
        let p = p % n;
        let null = move |d: &SubsetMask| ValuationOutcome::Success(t.0[d.without(p).bits() as usize]);
        let r = truncated_action_shapley(&null, n, p, &AlgoParams::default()).unwrap();
        prop_assert_eq!(r.phi, Some(0.0));
    }

    #[test]
    fn values_are_linear_in_the_game(
        (n, a, b) in (3usize..=8).prop_flat_map(|n| (Just(n), table(n), table(n))),
        alpha in -3.0f64..3.0,
    ) {
        let combined = Table(a.0.iter().zip(&b.0).map(|(x, y)| alpha * x + y).collect());
        let params = AlgoParams::default();
        let (pa, pb, pc) = (phis(&a, n, &params), phis(&b, n, &params), phis(&combined, n, &params));
        let scale = pc.iter().chain(&pa).chain(&pb).fold(1.0f64, |m, x| m.max(x.abs()));
        for k in 0..n {
            let expect = alpha * pa[k] + pb[k];
            prop_assert!((pc[k] - expect).abs() / scale <= 1e-9, "{} vs {}", pc[k], expect);
        }
    }

    #[test]
    fn pivots_are_indispensable(n in 3usize..=12, pivots in prop::collection::btree_set(0usize..12, 1..4)) {
        let pivots: Vec<usize> = pivots.into_iter().filter(|&p| p < n).collect();
        prop_assume!(!pivots.is_empty());
        let v = SyntheticValuation::PlantedNull(pivots.clone());
        for &p in &pivots {
            let r = truncated_action_shapley(&v, n, p, &AlgoParams::default()).unwrap();
            prop_assert!(r.indispensable);
            prop_assert_eq!(r.theta_k, n);
            prop_assert_eq!(r.evaluations_used, 1);
            prop_assert_eq!(r.phi, None);
        }
    }

    #[test]
    fn effort_stays_within_the_levels_above_cut_off(n in 3usize..=12, min_size in 0usize..12, epsilon in 1u32..4) {
        let v = SyntheticValuation::CutOff(min_size);
        let params = AlgoParams::default().with_epsilon(epsilon);
        let report = action_shapley_report(&v, n, &params).unwrap();
        for p in &report.per_point {
            let visited: u64 = (p.theta_k.saturating_sub(1).max(params.min_cardinality)..n)
                .map(|i| binomial(n as u64 - 1, i as u64))
                .sum();
            prop_assert!(p.evaluations_used <= visited, "{p:?}");
            prop_assert!(p.evaluations_used <= 1 << (n - 1));
        }
        prop_assert_eq!(report.p_comp, p_comp(n, report.global_theta));
    }
}

#[test]
fn cardinality_game_values_every_point_alike() {
    let n = 7;
    let report = action_shapley_report(&SyntheticValuation::Cardinality, n, &AlgoParams::default()).unwrap();
    let first = report.per_point[0].phi.unwrap();
    assert!(report.per_point.iter().all(|p| p.phi == Some(first)));
    // every marginal is 1, weighted by 1/C(n-1, i) over C(n-1, i) subsets, for i in 2..n
    assert!((first - (n as f64 - 2.0) / n as f64).abs() < 1e-12);
}

#[test]
fn linear_game_recovers_the_weights() {
    let w = vec![3.0, -1.0, 0.5, 2.0, 0.0, 1.0];
    let n = w.len();
    let report = action_shapley_report(&SyntheticValuation::LinearWeights(w.clone()), n, &AlgoParams::default().with_c_f(1.0)).unwrap();
    let levels = (n - 2) as f64;
    for (p, wk) in report.per_point.iter().zip(&w) {
        assert!((p.phi.unwrap() - wk * levels).abs() < 1e-12, "{p:?}");
    }
}

#[test]
fn planted_cut_off_halves_the_work() {
    for n in 8..=14 {
        let report = action_shapley_report(&SyntheticValuation::CutOff(n - 2), n, &AlgoParams::default()).unwrap();
        assert_eq!(report.global_theta, n - 2);
        assert!(report.per_point.iter().all(|p: &PointResult| p.evaluations_used == n as u64 + 1));
        assert!(report.total_evaluations() < 1 << (n - 1), "n={n}");
    }
}

#[test]
fn failures_short_circuit_the_smaller_side() {
    use std::sync::atomic::{AtomicU64, Ordering};
    let calls = AtomicU64::new(0);
    let v = |d: &SubsetMask| {
        calls.fetch_add(1, Ordering::Relaxed);
        if d.contains(0) && d.cardinality() <= 4 {
            ValuationOutcome::Failure
        } else {
            ValuationOutcome::Success(d.cardinality() as f64)
        }
    };
    let r = truncated_action_shapley(&v, 6, 0, &AlgoParams::default()).unwrap();
    // levels 5 and 4 succeed on both sides; at level 3 the side with k fails
    // first and the side without it is never asked for
    assert_eq!(r.theta_k, 4);
    assert_eq!(r.evaluations_used, 1 + 5 + 1);
    assert_eq!(calls.load(Ordering::Relaxed), 2 * 6 + 1);
}
