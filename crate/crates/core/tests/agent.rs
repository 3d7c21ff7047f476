use action_shapley::agent::{
    maximize, run_episode, train_policy, tune_gains, Anchor, GainBox, OptimizerKind, PidGains, PidPolicy, TrueEnv,
};
use action_shapley::env::{aggregate_percentile, generate_dataset, make_env, training_transitions, EnvParams, Family};
use action_shapley::world_model::{fit, TrainConfig};
use proptest::prelude::*;

const BOX: GainBox = GainBox {
    lo: [0.0, 0.0, 0.0],
    hi: [1.0, 0.1, 2.0],
};
const OPTIMUM: [f64; 3] = [0.62, 0.035, 1.3];

/// Concave bowl peaking at `OPTIMUM`, each axis scaled to its box width.
fn bowl(g: &[f64; 3]) -> f64 {
    -(0..3).map(|j| ((g[j] - OPTIMUM[j]) / BOX.width(j)).powi(2)).sum::<f64>()
}

/// Best point of a dense grid over the box.
fn grid_oracle(steps: usize) -> ([f64; 3], f64, f64) {
    let at = |j: usize, i: usize| BOX.lo[j] + BOX.width(j) * i as f64 / steps as f64;
    let (mut best, mut best_val, mut worst_val) = ([0.0; 3], f64::NEG_INFINITY, f64::INFINITY);
    for a in 0..=steps {
        for b in 0..=steps {
            for c in 0..=steps {
                let g = [at(0, a), at(1, b), at(2, c)];
                let v = bowl(&g);
                worst_val = worst_val.min(v);
                if v > best_val {
                    best = g;
                    best_val = v;
                }
            }
        }
    }
    (best, best_val, worst_val)
}

#[test]
fn both_optimizers_find_an_interior_optimum() {
    let (oracle, _, _) = grid_oracle(100);
    for kind in [OptimizerKind::SacpidLike, OptimizerKind::PpopidLike] {
        for seed in 0..5 {
            let (g, _) = maximize(bowl, &BOX, BOX.center(), kind, 500, seed);
            for j in 0..3 {
                assert!(
                    (g[j] - oracle[j]).abs() <= 0.05 * oracle[j].abs(),
                    "{kind:?} seed {seed}: {g:?} vs {oracle:?}"
                );
            }
        }
    }
}

#[test]
fn optimizers_agree_on_a_well_conditioned_problem() {
    let (_, top, bottom) = grid_oracle(40);
    for seed in 0..5 {
        let (_, sac) = maximize(bowl, &BOX, BOX.center(), OptimizerKind::SacpidLike, 200, seed);
        let (_, ppo) = maximize(bowl, &BOX, BOX.center(), OptimizerKind::PpopidLike, 200, seed);
        assert!((sac - ppo).abs() <= 0.1 * (top - bottom), "seed {seed}: {sac} vs {ppo}");
    }
}

#[test]
fn tuning_on_a_fitted_model_is_boxed_and_seeded() {
    let env = make_env(Family::DbTuning, &EnvParams::default()).unwrap();
    let points = generate_dataset(&env, 128, 3).unwrap();
    let data: Vec<_> = points.iter().flat_map(|p| training_transitions(&env, p).unwrap()).collect();
    let model = fit(&data, &TrainConfig { num_centers: 12, width_scale: 4.0, ..Default::default() }).unwrap();
    let anchors: Vec<Anchor> = points
        .iter()
        .map(|p| Anchor {
            config: p.config.clone(),
            state: vec![aggregate_percentile(&p.series, 50.0).unwrap()],
        })
        .collect();
    let bounds = GainBox { lo: env.gain_min, hi: env.gain_max };
    for kind in [OptimizerKind::SacpidLike, OptimizerKind::PpopidLike] {
        let a = train_policy(&model, &env, &anchors, kind, 24, 5).unwrap();
        assert!(bounds.contains(&a.gains.to_array()), "{a:?}");
        assert_eq!(a, train_policy(&model, &env, &anchors, kind, 24, 5).unwrap());
        let one = tune_gains(&model, &env, &a.direction, kind, 1, 5).unwrap();
        assert_eq!(one.to_array(), bounds.center());
    }
    assert!(tune_gains(&model, &env, &[0.0; 3], OptimizerKind::SacpidLike, 0, 5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn episode_return_is_the_sum_of_its_rewards(
        family in 0usize..5,
        g in (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0),
        steps in 1usize..80,
        seed in any::<u64>(),
    ) {
        let env = make_env(Family::ALL[family], &EnvParams::default()).unwrap();
        let gains = PidGains::new(g.0 * env.gain_max[0], g.1 * env.gain_max[1], g.2 * env.gain_max[2]);
        let policy = PidPolicy::with_true_direction(gains, &env);
        let ep = run_episode(&TrueEnv(&env), &policy, &env, steps, seed).unwrap();
        prop_assert!(!ep.aborted);
        prop_assert_eq!(ep.trajectory.len(), steps + 1);
        let sum: f64 = ep.trajectory.iter().map(|s| s.reward).sum();
        prop_assert_eq!(sum.to_bits(), ep.cumulative_reward.to_bits());
        for step in &ep.trajectory {
            for (j, a) in step.action.iter().enumerate() {
                prop_assert!(*a >= env.action_min[j] && *a <= env.action_max[j]);
            }
        }
        prop_assert_eq!(&ep, &run_episode(&TrueEnv(&env), &policy, &env, steps, seed).unwrap());
    }
}
