//! PID-driven control agent: the incremental action update, episode
//! scoring, and two derivative-free gain tuners.
//!
//! The action update works in normalized action space. A scalar increment
//! is computed from the error `threshold - statistic` and applied along the
//! policy's actuation direction. The direction comes from steady-state
//! slopes read off the world model, so an agent trained on data that never
//! varies a setting does not move it, and one whose model misjudges the
//! slopes over- or under-steers.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::env::{true_step, EnvSpec, StatWindow, STAT_WINDOW};
use crate::error::{Error, Result};
use crate::seed;
use crate::world_model::RbfModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    pub fn new(kp: f64, ki: f64, kd: f64) -> Self {
        Self { kp, ki, kd }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.kp, self.ki, self.kd]
    }

    pub fn from_array(g: [f64; 3]) -> Self {
        Self::new(g[0], g[1], g[2])
    }

    pub fn scaled(self, alpha: f64) -> Self {
        Self::new(alpha * self.kp, alpha * self.ki, alpha * self.kd)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PidState {
    pub prev_action: Vec<f64>,
    pub integral: f64,
    pub prev_error: f64,
    pub dt: f64,
}

impl PidState {
    pub fn new(action: Vec<f64>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::domain(format!("dt must be positive, got {dt}")));
        }
        Ok(Self {
            prev_action: action,
            integral: 0.0,
            prev_error: 0.0,
            dt,
        })
    }
}

/// One PID increment:
/// `kp*e + ki*(integral + e*dt) + kd*(e - prev_error)/dt`.
///
/// The returned state carries the updated integral and error; the action is
/// left for the caller to advance.
pub fn pid_update(gains: &PidGains, state: &PidState, error: f64, dt: f64) -> Result<(f64, PidState)> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("dt must be positive, got {dt}")));
    }
    let integral = state.integral + error * dt;
    let derivative = (error - state.prev_error) / dt;
    let delta = gains.kp * error + gains.ki * integral + gains.kd * derivative;
    Ok((
        delta,
        PidState {
            prev_action: state.prev_action.clone(),
            integral,
            prev_error: error,
            dt,
        },
    ))
}

/// Gains plus the actuation direction: per action dimension, how far a
/// unit increment moves that normalized setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PidPolicy {
    pub gains: PidGains,
    pub direction: Vec<f64>,
}

impl PidPolicy {
    pub fn new(gains: PidGains, direction: Vec<f64>) -> Self {
        Self { gains, direction }
    }

    /// Uses the environment's true sensitivity at the initial action.
    pub fn with_true_direction(gains: PidGains, env: &EnvSpec) -> Self {
        Self::new(gains, direction_from_slopes(&env.sensitivity(&env.a0), env))
    }
}

/// Turns steady-state slopes `b` (observable per normalized setting) into
/// the direction `b / |b|^2`, so a unit increment moves the observable by
/// one unit when the slopes are right. Slopes with norm below
/// `SLOPE_TOLERANCE * threshold` give the zero direction.
pub fn direction_from_slopes(slopes: &[f64], env: &EnvSpec) -> Vec<f64> {
    let norm2: f64 = slopes.iter().map(|b| b * b).sum();
    if !norm2.is_finite() || norm2.sqrt() < SLOPE_TOLERANCE * env.threshold.abs() {
        return vec![0.0; slopes.len()];
    }
    slopes.iter().map(|b| b / norm2).collect()
}

/// Applies a scalar increment along `direction` in normalized action
/// space, clamped to bounds.
pub fn apply_delta(env: &EnvSpec, direction: &[f64], action: &[f64], delta: f64) -> Vec<f64> {
    let u = env.normalize(action);
    let moved: Vec<f64> = u
        .iter()
        .zip(direction)
        .map(|(x, w)| (x + w * delta).clamp(0.0, 1.0))
        .collect();
    env.clamp_action(&env.denormalize(&moved)).0
}

/// A transition function an episode can be run against.
pub trait Dynamics {
    /// Steps from `s` under `a`. `recent` holds observations so far,
    /// including `s`.
    fn step(&self, s: &[f64], a: &[f64], recent: &StatWindow, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, f64)>;
}

/// The ground-truth environment.
pub struct TrueEnv<'a>(pub &'a EnvSpec);

impl Dynamics for TrueEnv<'_> {
    fn step(&self, s: &[f64], a: &[f64], recent: &StatWindow, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, f64)> {
        let out = true_step(self.0, recent, s, a, rng)?;
        Ok((out.state, out.reward))
    }
}

/// A world model used as a simulator, with optional additive state noise.
pub struct ModelEnv<'a> {
    pub model: &'a RbfModel,
    pub noise_scale: f64,
}

impl Dynamics for ModelEnv<'_> {
    fn step(&self, s: &[f64], a: &[f64], _recent: &StatWindow, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, f64)> {
        let (mut next, r) = self.model.predict(s, a)?;
        if self.noise_scale > 0.0 {
            for x in next.iter_mut() {
                *x += self.noise_scale * rng.sample::<f64, _>(StandardNormal);
            }
        }
        Ok((next, r))
    }
}

impl<F> Dynamics for F
where
    F: Fn(&[f64], &[f64]) -> (Vec<f64>, f64),
{
    fn step(&self, s: &[f64], a: &[f64], _recent: &StatWindow, _rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, f64)> {
        Ok(self(s, a))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    /// Sum of every reward in `trajectory`, initial step included.
    pub cumulative_reward: f64,
    pub trajectory: Vec<StepRecord>,
    pub goal_met: bool,
    /// A non-finite state or reward cut the episode short.
    pub aborted: bool,
}

/// Runs the PID agent for `steps` steps from the environment's initial
/// state and action.
///
/// The trajectory has `steps + 1` entries: the initial state, scored with
/// the starting action, then one per step.
pub fn run_episode<D: Dynamics + ?Sized>(
    dynamics: &D,
    policy: &PidPolicy,
    env: &EnvSpec,
    steps: usize,
    seed: u64,
) -> Result<EpisodeResult> {
    let mut trajectory = Vec::with_capacity(steps + 1);
    let (cumulative_reward, stat, aborted) = simulate(dynamics, policy, env, steps, seed, Some(&mut trajectory))?;
    Ok(EpisodeResult {
        cumulative_reward,
        goal_met: !aborted && env.satisfies(stat),
        trajectory,
        aborted,
    })
}

/// Cumulative reward of an episode, or `None` if it was aborted. Same
/// numbers as [`run_episode`] without recording the trajectory.
pub fn episode_return<D: Dynamics + ?Sized>(
    dynamics: &D,
    policy: &PidPolicy,
    env: &EnvSpec,
    steps: usize,
    seed: u64,
) -> Result<Option<f64>> {
    let (total, _, aborted) = simulate(dynamics, policy, env, steps, seed, None)?;
    Ok((!aborted).then_some(total))
}

fn simulate<D: Dynamics + ?Sized>(
    dynamics: &D,
    policy: &PidPolicy,
    env: &EnvSpec,
    steps: usize,
    seed: u64,
    mut trajectory: Option<&mut Vec<StepRecord>>,
) -> Result<(f64, f64, bool)> {
    if steps < 1 {
        return Err(Error::domain("episode needs at least one step"));
    }
    if policy.direction.len() != env.action_dim {
        return Err(Error::DimensionMismatch {
            expected: env.action_dim,
            got: policy.direction.len(),
        });
    }
    let q = env.percentile.q();
    let mut rng = seed::rng(seed);
    let mut window = StatWindow::new(STAT_WINDOW);
    let mut s = env.s0.clone();
    window.push(s[0]);
    let mut stat = window.percentile(q)?;
    let mut pid = PidState::new(env.a0.clone(), 1.0)?;

    let r0 = env.reward(stat, &env.a0);
    let mut total = r0;
    if let Some(t) = trajectory.as_deref_mut() {
        t.push(StepRecord {
            state: s.clone(),
            action: env.a0.clone(),
            reward: r0,
            statistic: stat,
        });
    }

    let mut aborted = false;
    for _ in 0..steps {
        let error = env.threshold - stat;
        let (delta, next_pid) = pid_update(&policy.gains, &pid, error, pid.dt)?;
        let action = apply_delta(env, &policy.direction, &pid.prev_action, delta);
        let (next, r) = dynamics.step(&s, &action, &window, &mut rng)?;
        if !r.is_finite() || next.iter().any(|x| !x.is_finite()) {
            aborted = true;
            break;
        }
        window.push(next[0]);
        stat = window.percentile(q)?;
        total += r;
        if let Some(t) = trajectory.as_deref_mut() {
            t.push(StepRecord {
                state: next.clone(),
                action: action.clone(),
                reward: r,
                statistic: stat,
            });
        }
        pid = PidState {
            prev_action: action,
            ..next_pid
        };
        s = next;
    }
    Ok((total, stat, aborted))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    /// Cross-entropy search over the gain box.
    SacpidLike,
    /// Trust-region-clipped stochastic hill climbing.
    PpopidLike,
}

impl OptimizerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OptimizerKind::SacpidLike => "sacpid_like",
            OptimizerKind::PpopidLike => "ppopid_like",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            OptimizerKind::SacpidLike => "AS SAC-like",
            OptimizerKind::PpopidLike => "AS PPO-like",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sacpid_like" => Ok(OptimizerKind::SacpidLike),
            "ppopid_like" => Ok(OptimizerKind::PpopidLike),
            _ => Err(Error::domain(format!("unknown optimizer {s:?}"))),
        }
    }
}

/// Box-constrained search space for the gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainBox {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl GainBox {
    pub fn center(&self) -> [f64; 3] {
        std::array::from_fn(|j| 0.5 * (self.lo[j] + self.hi[j]))
    }

    pub fn width(&self, j: usize) -> f64 {
        self.hi[j] - self.lo[j]
    }

    pub fn clamp(&self, g: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|j| g[j].clamp(self.lo[j], self.hi[j]))
    }

    pub fn contains(&self, g: &[f64; 3]) -> bool {
        (0..3).all(|j| g[j] >= self.lo[j] && g[j] <= self.hi[j])
    }
}

/// Model rollouts averaged per candidate; common across candidates.
const TUNE_ROLLOUTS: u64 = 4;
const SLOPE_TOLERANCE: f64 = 1e-2;
const PINV_EPS: f64 = 1e-9;
const SETTLE_STEPS: usize = 8;
const CEM_ELITE_FRACTION: f64 = 0.25;
const CEM_STD_FLOOR: f64 = 0.02;
const HILL_TRUST_RATIO: f64 = 0.25;
const HILL_STEP_FLOOR: f64 = 1e-4;

fn better(a: f64, b: f64) -> bool {
    a.total_cmp(&b).is_gt()
}

/// Maximizes `objective` over `bounds` with at most `budget` evaluations.
/// The first evaluation is always `init`. Returns the best point found and
/// its value.
pub fn maximize<F>(
    mut objective: F,
    bounds: &GainBox,
    init: [f64; 3],
    kind: OptimizerKind,
    budget: usize,
    seed: u64,
) -> ([f64; 3], f64)
where
    F: FnMut(&[f64; 3]) -> f64,
{
    let mut rng = seed::rng(seed);
    let init = bounds.clamp(init);
    let mut best = init;
    let mut best_val = objective(&init);
    let mut evals = 1;
    if budget <= 1 {
        return (best, best_val);
    }

    match kind {
        OptimizerKind::SacpidLike => {
            let pop = (budget / 8).clamp(4, 16);
            let mut mean = init;
            let mut std: [f64; 3] = std::array::from_fn(|j| bounds.width(j) / 4.0);
            while evals < budget {
                let count = pop.min(budget - evals);
                let mut scored: Vec<([f64; 3], f64)> = (0..count)
                    .map(|_| {
                        let g = bounds.clamp(std::array::from_fn(|j| {
                            mean[j] + std[j] * rng.sample::<f64, _>(StandardNormal)
                        }));
                        (g, objective(&g))
                    })
                    .collect();
                evals += count;
                // stable: equal scores keep sampling order
                scored.sort_by(|a, b| b.1.total_cmp(&a.1));
                if better(scored[0].1, best_val) {
                    best = scored[0].0;
                    best_val = scored[0].1;
                }
                let elites = ((count as f64 * CEM_ELITE_FRACTION).ceil() as usize).max(1);
                let elite = &scored[..elites];
                for j in 0..3 {
                    let m = elite.iter().map(|e| e.0[j]).sum::<f64>() / elites as f64;
                    let v = elite.iter().map(|e| (e.0[j] - m).powi(2)).sum::<f64>() / elites as f64;
                    mean[j] = m;
                    std[j] = v.sqrt().max(CEM_STD_FLOOR * bounds.width(j));
                }
            }
        }
        OptimizerKind::PpopidLike => {
            let mut current = init;
            let mut current_val = best_val;
            let mut step: [f64; 3] = std::array::from_fn(|j| bounds.width(j) / 4.0);
            while evals < budget {
                let proposal = bounds.clamp(std::array::from_fn(|j| {
                    let raw = step[j] * rng.sample::<f64, _>(StandardNormal);
                    let limit = HILL_TRUST_RATIO * current[j].abs().max(0.1 * bounds.width(j));
                    current[j] + raw.clamp(-limit, limit)
                }));
                let val = objective(&proposal);
                evals += 1;
                if better(val, current_val) {
                    current = proposal;
                    current_val = val;
                    step.iter_mut().for_each(|s| *s *= 1.5);
                } else {
                    for (j, s) in step.iter_mut().enumerate() {
                        *s = (*s * 0.9).max(HILL_STEP_FLOOR * bounds.width(j));
                    }
                }
                if better(current_val, best_val) {
                    best = current;
                    best_val = current_val;
                }
            }
        }
    }
    (best, best_val)
}

/// Tunes PID gains against a world model by maximizing the mean cumulative
/// reward over a fixed set of noisy model rollouts. Any aborted rollout
/// scores the candidate `-inf`.
pub fn tune_gains(
    model: &RbfModel,
    env: &EnvSpec,
    direction: &[f64],
    optimizer: OptimizerKind,
    budget: usize,
    seed: u64,
) -> Result<PidGains> {
    if budget < 1 {
        return Err(Error::domain("tuning budget must be at least 1"));
    }
    let bounds = GainBox {
        lo: env.gain_min,
        hi: env.gain_max,
    };
    let sim = ModelEnv {
        model,
        noise_scale: env.noise_scale,
    };
    let rollout_seeds: Vec<u64> = (0..TUNE_ROLLOUTS).map(|i| seed::derive(seed, 100 + i)).collect();
    let (best, _) = maximize(
        |g| {
            let policy = PidPolicy::new(PidGains::from_array(*g), direction.to_vec());
            let mut total = 0.0;
            for &rs in &rollout_seeds {
                match episode_return(&sim, &policy, env, env.horizon, rs) {
                    Ok(Some(j)) => total += j,
                    _ => return f64::NEG_INFINITY,
                }
            }
            total / TUNE_ROLLOUTS as f64
        },
        &bounds,
        bounds.center(),
        optimizer,
        budget,
        seed::derive(seed, 2),
    );
    Ok(PidGains::from_array(best))
}

/// A logged operating point: a configuration and a state observed under it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub config: Vec<f64>,
    pub state: Vec<f64>,
}

/// State the model settles at under the anchor's configuration: a
/// noiseless rollout of `SETTLE_STEPS` steps from the anchor state.
pub fn settled_state(model: &RbfModel, anchor: &Anchor) -> Result<f64> {
    let mut s = anchor.state.clone();
    for _ in 0..SETTLE_STEPS {
        s = model.predict(&s, &anchor.config)?.0;
    }
    Ok(s[0])
}

/// Steady-state slopes read from the model. Settled states at the anchors
/// are regressed on the normalized settings by minimum-norm least squares,
/// so a setting the anchors never vary gets slope 0.
pub fn estimate_slopes(model: &RbfModel, env: &EnvSpec, anchors: &[Anchor]) -> Result<Vec<f64>> {
    let q = env.action_dim;
    if anchors.is_empty() {
        return Ok(vec![0.0; q]);
    }
    let mut rows = Vec::with_capacity(anchors.len());
    let mut ys = Vec::with_capacity(anchors.len());
    for a in anchors {
        if a.config.len() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                got: a.config.len(),
            });
        }
        rows.push(env.normalize(&a.config));
        ys.push(settled_state(model, a)?);
    }
    let k = rows.len();
    let mean_u: Vec<f64> = (0..q).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / k as f64).collect();
    let mean_y = ys.iter().sum::<f64>() / k as f64;
    let x = DMatrix::from_fn(k, q, |i, j| rows[i][j] - mean_u[j]);
    let y = DVector::from_iterator(k, ys.iter().map(|v| v - mean_y));
    let slopes = x
        .svd(true, true)
        .solve(&y, PINV_EPS)
        .map_err(|e| Error::domain(format!("slope regression failed: {e}")))?;
    Ok(slopes.iter().copied().collect())
}

/// Actuation direction from the model's slopes, then gains tuned against
/// the model.
pub fn train_policy(
    model: &RbfModel,
    env: &EnvSpec,
    anchors: &[Anchor],
    optimizer: OptimizerKind,
    budget: usize,
    seed: u64,
) -> Result<PidPolicy> {
    let direction = direction_from_slopes(&estimate_slopes(model, env, anchors)?, env);
    let gains = tune_gains(model, env, &direction, optimizer, budget, seed)?;
    Ok(PidPolicy::new(gains, direction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_env, EnvParams, Family};
    use proptest::prelude::*;

    fn state() -> PidState {
        PidState::new(vec![1.0, 1.0], 1.0).unwrap()
    }

    #[test]
    fn pid_examples() {
        let (d, _) = pid_update(&PidGains::new(0.7, 0.3, 0.2), &state(), 0.0, 1.0).unwrap();
        assert_eq!(d, 0.0);
        let (d, _) = pid_update(&PidGains::new(1.0, 0.0, 0.0), &state(), 2.0, 1.0).unwrap();
        assert_eq!(d, 2.0);
        let (d, s) = pid_update(&PidGains::new(0.0, 1.0, 0.0), &state(), 3.0, 1.0).unwrap();
        assert_eq!(d, 3.0);
        assert_eq!(s.integral, 3.0);
        assert_eq!(s.prev_error, 3.0);
        assert!(matches!(
            pid_update(&PidGains::new(1.0, 0.0, 0.0), &state(), 1.0, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(PidState::new(vec![], -1.0).is_err());
    }

    #[test]
    fn zero_error_leaves_action() {
        let env = make_env(Family::DbTuning, &EnvParams::default()).unwrap();
        let a = apply_delta(&env, &env.sensitivity(&env.a0), &env.a0, 0.0);
        for (x, y) in a.iter().zip(&env.a0) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn episode_shape_and_sum() {
        let env = make_env(Family::VmRightsizing, &EnvParams::default()).unwrap();
        let zero = |_: &[f64], _: &[f64]| (vec![env.threshold], 0.0);
        let mut env0 = env.clone();
        env0.s0 = vec![env.threshold];
        let ep = run_episode(&zero, &PidPolicy::with_true_direction(PidGains::new(0.01, 0.0, 0.0), &env0), &env0, 5, 1).unwrap();
        assert_eq!(ep.cumulative_reward, 0.0);
        assert_eq!(ep.trajectory.len(), 6);

        let ep = run_episode(&TrueEnv(&env), &PidPolicy::with_true_direction(PidGains::new(0.01, 0.001, 0.0), &env), &env, 1, 3).unwrap();
        assert_eq!(ep.trajectory.len(), 2);
        let ep2 = run_episode(&TrueEnv(&env), &PidPolicy::with_true_direction(PidGains::new(0.01, 0.001, 0.0), &env), &env, 1, 3).unwrap();
        assert_eq!(ep, ep2);

        let ep = run_episode(&TrueEnv(&env), &PidPolicy::with_true_direction(PidGains::new(0.01, 0.001, 0.001), &env), &env, 40, 8).unwrap();
        let mut acc = 0.0;
        for s in &ep.trajectory {
            acc += s.reward;
        }
        assert_eq!(acc, ep.cumulative_reward);
    }

    #[test]
    fn non_finite_state_aborts() {
        let env = make_env(Family::Cooling, &EnvParams::default()).unwrap();
        let bad = |_: &[f64], _: &[f64]| (vec![f64::NAN], -1.0);
        let ep = run_episode(&bad, &PidPolicy::with_true_direction(PidGains::new(0.01, 0.0, 0.0), &env), &env, 10, 0).unwrap();
        assert!(ep.aborted);
        assert!(!ep.goal_met);
        assert_eq!(ep.trajectory.len(), 1);
    }

    #[test]
    fn budget_one_returns_initial() {
        let b = GainBox {
            lo: [0.0; 3],
            hi: [1.0; 3],
        };
        for kind in [OptimizerKind::SacpidLike, OptimizerKind::PpopidLike] {
            let (g, _) = maximize(|g| -g[0], &b, [0.3, 0.4, 0.5], kind, 1, 9);
            assert_eq!(g, [0.3, 0.4, 0.5]);
        }
    }

    #[test]
    fn optimizer_names_parse() {
        assert_eq!("sacpid_like".parse::<OptimizerKind>().unwrap(), OptimizerKind::SacpidLike);
        assert!("sac".parse::<OptimizerKind>().is_err());
    }

    proptest! {
        #[test]
        fn pid_is_linear_in_gains(
            kp in -2.0f64..2.0, ki in -2.0f64..2.0, kd in -2.0f64..2.0,
            alpha in -4.0f64..4.0, e in -50.0f64..50.0, integral in -10.0f64..10.0,
            prev in -50.0f64..50.0,
        ) {
            let st = PidState { prev_action: vec![0.0], integral, prev_error: prev, dt: 1.0 };
            let g = PidGains::new(kp, ki, kd);
            let (d1, _) = pid_update(&g.scaled(alpha), &st, e, 1.0).unwrap();
            let (d0, _) = pid_update(&g, &st, e, 1.0).unwrap();
            prop_assert!((d1 - alpha * d0).abs() <= 1e-9 * (1.0 + d1.abs()));
        }

        #[test]
        fn maximize_stays_in_box(seed in any::<u64>(), budget in 1usize..60, ppo in any::<bool>()) {
            let b = GainBox { lo: [-1.0, 0.0, 0.5], hi: [1.0, 0.1, 2.0] };
            let kind = if ppo { OptimizerKind::PpopidLike } else { OptimizerKind::SacpidLike };
            let (g, _) = maximize(|g| g[0] + 10.0 * g[1] - g[2], &b, b.center(), kind, budget, seed);
            prop_assert!(b.contains(&g));
            let (g1, v1) = maximize(|g| g[0] + 10.0 * g[1] - g[2], &b, b.center(), kind, budget, seed);
            prop_assert_eq!(g, g1);
            prop_assert!(v1.is_finite());
        }
    }
}
