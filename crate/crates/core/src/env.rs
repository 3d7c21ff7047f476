//! Synthetic dynamic-control environments.
//!
//! Each family models one resource-tuning task with a scalar observable
//! (CPU usage, latency, temperature) driven by a two-dimensional
//! configuration. The observable relaxes towards a saturating response
//! surface `g(config)` with AR(1) noise:
//!
//! ```text
//! s[t+1] = g(a) + rho * (s[t] - g(a)) + sigma * w[t],   w ~ N(0, 1)
//! ```

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::world_model::Transition;

/// Default length of a generated training series.
pub const DEFAULT_SERIES_LEN: usize = 256;
/// Longest supported series (one day at one-minute sampling).
pub const MAX_SERIES_LEN: usize = 1440;
/// Sliding window for the aggregated statistic during episodes.
pub const STAT_WINDOW: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    VmRightsizing,
    LoadBalancing,
    DbTuning,
    K8s,
    Cooling,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::VmRightsizing,
        Family::LoadBalancing,
        Family::DbTuning,
        Family::K8s,
        Family::Cooling,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Family::VmRightsizing => "vm_rightsizing",
            Family::LoadBalancing => "load_balancing",
            Family::DbTuning => "db_tuning",
            Family::K8s => "k8s",
            Family::Cooling => "cooling",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::domain(format!("unknown environment family {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Below,
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Percentile {
    #[serde(rename = "p5")]
    P5,
    #[serde(rename = "p50")]
    P50,
    #[serde(rename = "p90")]
    P90,
    #[serde(rename = "p99.9")]
    P99_9,
}

impl Percentile {
    pub fn q(&self) -> f64 {
        match self {
            Percentile::P5 => 5.0,
            Percentile::P50 => 50.0,
            Percentile::P90 => 90.0,
            Percentile::P99_9 => 99.9,
        }
    }
}

/// `g(u) = floor + (ceiling - floor) * logistic(bias + slopes . u)` over the
/// normalized configuration `u` in `[0, 1]^q`. Monotone in every coordinate,
/// increasing where the slope is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseSurface {
    pub floor: f64,
    pub ceiling: f64,
    pub bias: f64,
    pub slopes: Vec<f64>,
}

impl ResponseSurface {
    pub fn eval(&self, u: &[f64]) -> f64 {
        let z = self.bias
            + self
                .slopes
                .iter()
                .zip(u)
                .map(|(s, x)| s * x)
                .sum::<f64>();
        self.floor + (self.ceiling - self.floor) / (1.0 + (-z).exp())
    }
}

/// Full description of one environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSpec {
    pub name: String,
    pub family: Family,
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_labels: Vec<String>,
    pub action_min: Vec<f64>,
    pub action_max: Vec<f64>,
    pub threshold: f64,
    pub unit: String,
    pub percentile: Percentile,
    pub direction: Direction,
    /// Episode length in steps.
    pub horizon: usize,
    pub noise_scale: f64,
    pub ar_coef: f64,
    pub surface: ResponseSurface,
    pub s0: Vec<f64>,
    /// Starting action of the control loop.
    pub a0: Vec<f64>,
    /// Weight of the normalized action cost in the reward.
    pub cost_weight: f64,
    /// Relative slack allowed on the threshold when judging success.
    pub goal_tolerance: f64,
    /// Per action dimension: whether a larger value costs more.
    pub cost_increasing: Vec<bool>,
    /// Box for `[kp, ki, kd]` during gain tuning.
    pub gain_min: [f64; 3],
    pub gain_max: [f64; 3],
    /// Training configurations, one per data point.
    pub grid: Vec<Vec<f64>>,
    /// Prefix for data-point ids (`a1`, `a2`, ...).
    pub point_prefix: String,
}

/// Optional overrides accepted by [`make_env`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvParams {
    pub horizon: Option<usize>,
    pub noise_scale: Option<f64>,
    pub cost_weight: Option<f64>,
    pub threshold: Option<f64>,
    pub goal_tolerance: Option<f64>,
}

/// Builds the synthetic analog of one case study.
pub fn make_env(family: Family, params: &EnvParams) -> Result<EnvSpec> {
    let mut env = match family {
        Family::VmRightsizing => EnvSpec {
            name: "VM right-sizing".into(),
            family,
            state_dim: 1,
            action_dim: 2,
            action_labels: vec!["vcpu".into(), "memory_gb".into()],
            action_min: vec![1.0, 1.0],
            action_max: vec![10.0, 36.0],
            threshold: 90.0,
            unit: "%".into(),
            percentile: Percentile::P50,
            direction: Direction::Below,
            horizon: 64,
            noise_scale: 2.0,
            ar_coef: 0.7,
            surface: ResponseSurface {
                floor: 20.0,
                ceiling: 100.0,
                bias: 4.0,
                slopes: vec![-4.0, -2.0],
            },
            s0: vec![95.0],
            a0: vec![2.0, 6.0],
            cost_weight: 0.0,
            goal_tolerance: 0.02,
            cost_increasing: vec![true, true],
            gain_min: [0.0; 3],
            gain_max: [0.4, 0.04, 0.4],
            grid: vec![
                vec![2.0, 2.0],
                vec![2.0, 4.0],
                vec![2.0, 8.0],
                vec![4.0, 16.0],
                vec![8.0, 32.0],
            ],
            point_prefix: "a".into(),
        },
        Family::LoadBalancing => EnvSpec {
            name: "Load balancing".into(),
            family,
            state_dim: 1,
            action_dim: 2,
            action_labels: vec!["cpu_workers".into(), "memory_workers".into()],
            action_min: vec![1.0, 1.0],
            action_max: vec![10.0, 20.0],
            threshold: 70.0,
            unit: "%".into(),
            percentile: Percentile::P5,
            direction: Direction::Below,
            horizon: 64,
            noise_scale: 2.0,
            ar_coef: 0.7,
            surface: ResponseSurface {
                floor: 10.0,
                ceiling: 100.0,
                bias: -1.0,
                slopes: vec![4.0, 1.0],
            },
            s0: vec![85.0],
            a0: vec![5.5, 13.0],
            cost_weight: 0.0,
            goal_tolerance: 0.05,
            cost_increasing: vec![false, false],
            gain_min: [0.0; 3],
            gain_max: [0.06, 0.006, 0.06],
            grid: vec![
                vec![8.0, 16.0],
                vec![8.0, 12.0],
                vec![8.0, 2.0],
                vec![1.0, 2.0],
                vec![1.0, 16.0],
            ],
            point_prefix: "w".into(),
        },
        Family::DbTuning => EnvSpec {
            name: "Database tuning".into(),
            family,
            state_dim: 1,
            action_dim: 2,
            action_labels: vec!["vcpu".into(), "memory_gb".into()],
            action_min: vec![1.0, 1.0],
            action_max: vec![12.0, 12.0],
            threshold: 25.0,
            unit: "%".into(),
            percentile: Percentile::P90,
            direction: Direction::Below,
            horizon: 64,
            noise_scale: 1.0,
            ar_coef: 0.7,
            surface: ResponseSurface {
                floor: 5.0,
                ceiling: 100.0,
                bias: 1.2,
                slopes: vec![-5.0, -2.0],
            },
            s0: vec![30.0],
            a0: vec![5.0, 2.0],
            cost_weight: 0.0,
            goal_tolerance: 0.02,
            cost_increasing: vec![true, true],
            gain_min: [0.0; 3],
            gain_max: [0.2, 0.01, 0.2],
            grid: vec![
                vec![1.0, 1.0],
                vec![4.0, 4.0],
                vec![6.0, 3.0],
                vec![8.0, 4.0],
                vec![8.0, 8.0],
                vec![10.0, 10.0],
            ],
            point_prefix: "p".into(),
        },
        Family::K8s => EnvSpec {
            name: "Kubernetes management".into(),
            family,
            state_dim: 1,
            action_dim: 2,
            action_labels: vec!["write_rate".into(), "threads".into()],
            action_min: vec![0.5e6, 5.0],
            action_max: vec![3.5e6, 110.0],
            threshold: 100.0,
            unit: "ms".into(),
            percentile: Percentile::P99_9,
            direction: Direction::Below,
            horizon: 64,
            noise_scale: 3.0,
            ar_coef: 0.7,
            surface: ResponseSurface {
                floor: 20.0,
                ceiling: 300.0,
                bias: -2.9,
                slopes: vec![5.0, -2.0],
            },
            s0: vec![80.0],
            a0: vec![2.9e6, 95.0],
            cost_weight: 0.0,
            goal_tolerance: 0.02,
            cost_increasing: vec![false, true],
            gain_min: [0.0; 3],
            gain_max: [0.15, 0.01, 0.15],
            grid: [1.0e6, 2.0e6, 3.0e6]
                .iter()
                .flat_map(|&w| [10.0, 25.0, 50.0, 75.0, 100.0].map(|t| vec![w, t]))
                .collect(),
            point_prefix: "r".into(),
        },
        Family::Cooling => EnvSpec {
            name: "Data center cooling".into(),
            family,
            state_dim: 1,
            action_dim: 2,
            action_labels: vec!["cooler_setpoint_c".into(), "pump_pressure_psi".into()],
            action_min: vec![15.0, 3.0],
            action_max: vec![31.0, 11.0],
            threshold: 65.0,
            unit: "C".into(),
            percentile: Percentile::P99_9,
            direction: Direction::Below,
            horizon: 64,
            noise_scale: 1.0,
            ar_coef: 0.7,
            surface: ResponseSurface {
                floor: 40.0,
                ceiling: 90.0,
                bias: -2.85,
                slopes: vec![4.0, -2.0],
            },
            s0: vec![60.0],
            a0: vec![29.0, 4.0],
            cost_weight: 0.1,
            goal_tolerance: 0.05,
            cost_increasing: vec![false, true],
            gain_min: [0.0; 3],
            gain_max: [0.1, 0.01, 0.1],
            grid: [29.0, 25.0, 21.0, 17.0]
                .iter()
                .flat_map(|&c| [4.0, 7.0, 10.0].map(|p| vec![c, p]))
                .collect(),
            point_prefix: "c".into(),
        },
    };
    if let Some(h) = params.horizon {
        env.horizon = h;
    }
    if let Some(s) = params.noise_scale {
        env.noise_scale = s;
    }
    if let Some(c) = params.cost_weight {
        env.cost_weight = c;
    }
    if let Some(t) = params.threshold {
        env.threshold = t;
    }
    if let Some(t) = params.goal_tolerance {
        env.goal_tolerance = t;
    }
    env.validate()?;
    Ok(env)
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        let q = self.action_dim;
        if self.state_dim != 1 {
            return Err(Error::domain("only scalar observables are supported"));
        }
        if self.action_min.len() != q
            || self.action_max.len() != q
            || self.a0.len() != q
            || self.cost_increasing.len() != q
            || self.surface.slopes.len() != q
        {
            return Err(Error::domain("action-dimension fields disagree in length"));
        }
        if self.s0.len() != self.state_dim {
            return Err(Error::DimensionMismatch {
                expected: self.state_dim,
                got: self.s0.len(),
            });
        }
        for (lo, hi) in self.action_min.iter().zip(&self.action_max) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::domain(format!("bad action bounds [{lo}, {hi}]")));
            }
        }
        let (lo, hi) = (self.surface.floor, self.surface.ceiling);
        if !(self.threshold > lo && self.threshold < hi) {
            return Err(Error::domain(format!(
                "threshold {} outside the observable range ({lo}, {hi})",
                self.threshold
            )));
        }
        if self.horizon < 1 {
            return Err(Error::domain("horizon must be at least 1"));
        }
        if !(self.noise_scale >= 0.0) || !(0.0..1.0).contains(&self.ar_coef) {
            return Err(Error::domain("noise_scale must be >= 0 and ar_coef in [0, 1)"));
        }
        if !(self.goal_tolerance >= 0.0) {
            return Err(Error::domain("goal_tolerance must be non-negative"));
        }
        if self.cost_weight < 0.0 {
            return Err(Error::domain("cost_weight must be non-negative"));
        }
        for j in 0..3 {
            if !(self.gain_min[j] <= self.gain_max[j]) {
                return Err(Error::domain("gain box is empty"));
            }
        }
        for c in &self.grid {
            self.check_in_bounds(c)?;
        }
        self.check_in_bounds(&self.a0)?;
        Ok(())
    }

    pub fn n_points(&self) -> usize {
        self.grid.len()
    }

    pub fn point_id(&self, index: usize) -> String {
        format!("{}{}", self.point_prefix, index + 1)
    }

    fn check_in_bounds(&self, a: &[f64]) -> Result<()> {
        if a.len() != self.action_dim {
            return Err(Error::DimensionMismatch {
                expected: self.action_dim,
                got: a.len(),
            });
        }
        for (j, &x) in a.iter().enumerate() {
            if !(x >= self.action_min[j] && x <= self.action_max[j]) {
                return Err(Error::domain(format!(
                    "{} = {x} outside [{}, {}]",
                    self.action_labels[j], self.action_min[j], self.action_max[j]
                )));
            }
        }
        Ok(())
    }

    pub fn normalize(&self, a: &[f64]) -> Vec<f64> {
        a.iter()
            .enumerate()
            .map(|(j, &x)| (x - self.action_min[j]) / (self.action_max[j] - self.action_min[j]))
            .collect()
    }

    pub fn denormalize(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(j, &x)| self.action_min[j] + x * (self.action_max[j] - self.action_min[j]))
            .collect()
    }

    /// Clamps an action into bounds; the flag reports whether it moved.
    pub fn clamp_action(&self, a: &[f64]) -> (Vec<f64>, bool) {
        let mut clamped = false;
        let out = a
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                let y = x.clamp(self.action_min[j], self.action_max[j]);
                clamped |= y != x;
                y
            })
            .collect();
        (out, clamped)
    }

    /// Steady-state observable under a fixed configuration.
    pub fn steady_state(&self, a: &[f64]) -> f64 {
        self.surface.eval(&self.normalize(a))
    }

    /// Gradient of the steady state with respect to the normalized
    /// configuration.
    pub fn sensitivity(&self, a: &[f64]) -> Vec<f64> {
        let u = self.normalize(a);
        let z = self.surface.bias + self.surface.slopes.iter().zip(&u).map(|(s, x)| s * x).sum::<f64>();
        let sig = 1.0 / (1.0 + (-z).exp());
        let scale = (self.surface.ceiling - self.surface.floor) * sig * (1.0 - sig);
        self.surface.slopes.iter().map(|s| scale * s).collect()
    }

    /// Per action dimension, `+1` if increasing it raises the observable.
    pub fn actuation_signs(&self) -> Vec<f64> {
        self.surface
            .slopes
            .iter()
            .map(|s| if *s >= 0.0 { 1.0 } else { -1.0 })
            .collect()
    }

    /// Action cost in `[0, 1]`: mean over dimensions of the normalized
    /// setting, flipped where smaller settings are the expensive ones.
    pub fn action_cost(&self, a: &[f64]) -> f64 {
        let u = self.normalize(a);
        let total: f64 = u
            .iter()
            .zip(&self.cost_increasing)
            .map(|(&x, &inc)| {
                let x = x.clamp(0.0, 1.0);
                if inc {
                    x
                } else {
                    1.0 - x
                }
            })
            .sum();
        total / u.len() as f64
    }

    /// `-|stat - threshold| / threshold - cost_weight * cost(a)`; never positive.
    pub fn reward(&self, statistic: f64, a: &[f64]) -> f64 {
        -(statistic - self.threshold).abs() / self.threshold - self.cost_weight * self.action_cost(a)
    }

    /// Whether an aggregated statistic is on the goal side of the threshold,
    /// within the relative `goal_tolerance` band.
    pub fn satisfies(&self, statistic: f64) -> bool {
        match self.direction {
            Direction::Below => statistic <= self.threshold * (1.0 + self.goal_tolerance),
            Direction::Above => statistic >= self.threshold * (1.0 - self.goal_tolerance),
        }
    }

    /// One noisy AR(1) step of the observable under action `a`.
    pub fn transition<R: Rng + ?Sized>(&self, s: f64, a: &[f64], rng: &mut R) -> f64 {
        let g = self.steady_state(a);
        let w: f64 = if self.noise_scale > 0.0 {
            rng.sample(StandardNormal)
        } else {
            0.0
        };
        g + self.ar_coef * (s - g) + self.noise_scale * w
    }
}

/// Sliding window of recent observations with a nearest-rank percentile.
#[derive(Debug, Clone)]
pub struct StatWindow {
    cap: usize,
    values: VecDeque<f64>,
    /// The same values in ascending `total_cmp` order.
    sorted: Vec<f64>,
}

impl StatWindow {
    pub fn new(cap: usize) -> Self {
        assert!(cap > 0, "window capacity must be positive");
        Self {
            cap,
            values: VecDeque::with_capacity(cap),
            sorted: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, x: f64) {
        if self.values.len() == self.cap {
            if let Some(old) = self.values.pop_front() {
                let i = self.sorted.partition_point(|v| v.total_cmp(&old).is_lt());
                self.sorted.remove(i);
            }
        }
        self.values.push_back(x);
        let i = self.sorted.partition_point(|v| v.total_cmp(&x).is_lt());
        self.sorted.insert(i, x);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn percentile(&self, q: f64) -> Result<f64> {
        let t = self.sorted.len();
        check_percentile_args(t, q)?;
        Ok(self.sorted[nearest_rank(q, t) - 1])
    }
}

/// Nearest-rank percentile: the value at 1-based rank `ceil(q/100 * T)` of
/// the sorted series.
pub fn aggregate_percentile(series: &[f64], q: f64) -> Result<f64> {
    check_percentile_args(series.len(), q)?;
    let mut values = series.to_vec();
    let rank = nearest_rank(q, values.len());
    Ok(*values.select_nth_unstable_by(rank - 1, f64::total_cmp).1)
}

fn check_percentile_args(t: usize, q: f64) -> Result<()> {
    if t == 0 {
        return Err(Error::domain("percentile of an empty series"));
    }
    if !(q > 0.0 && q <= 100.0) {
        return Err(Error::domain(format!("percentile {q} outside (0, 100]")));
    }
    Ok(())
}

fn nearest_rank(q: f64, t: usize) -> usize {
    // absorb representation error in q/100 * T before taking the ceiling
    ((q * t as f64 / 100.0) - 1e-9).ceil().clamp(1.0, t as f64) as usize
}

/// A logged time series under one fixed configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPoint {
    pub id: String,
    pub config: Vec<f64>,
    pub series: Vec<f64>,
}

/// Simulates `t_len` observations under a fixed configuration, starting
/// from the environment's initial state.
pub fn generate_training_point(
    env: &EnvSpec,
    id: impl Into<String>,
    config: &[f64],
    t_len: usize,
    seed: u64,
) -> Result<TrainingPoint> {
    env.check_in_bounds(config)?;
    if t_len == 0 || t_len > MAX_SERIES_LEN {
        return Err(Error::domain(format!(
            "series length {t_len} outside 1..={MAX_SERIES_LEN}"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut series = Vec::with_capacity(t_len);
    let mut s = env.s0[0];
    series.push(s);
    for _ in 1..t_len {
        s = env.transition(s, config, &mut rng);
        series.push(s);
    }
    Ok(TrainingPoint {
        id: id.into(),
        config: config.to_vec(),
        series,
    })
}

/// Training points for every grid configuration, with per-point seeds
/// derived from `seed`.
pub fn generate_dataset(env: &EnvSpec, t_len: usize, seed: u64) -> Result<Vec<TrainingPoint>> {
    env.grid
        .iter()
        .enumerate()
        .map(|(i, c)| generate_training_point(env, env.point_id(i), c, t_len, seed::derive(seed, i as u64)))
        .collect()
}

/// Logged transitions of one training point. Each transition's reward is
/// scored on the sliding-window statistic that ends at its new observation,
/// the same way episodes are scored.
pub fn training_transitions(env: &EnvSpec, point: &TrainingPoint) -> Result<Vec<Transition>> {
    let q = env.percentile.q();
    let mut window = StatWindow::new(STAT_WINDOW);
    let mut out = Vec::with_capacity(point.series.len().saturating_sub(1));
    let Some(&first) = point.series.first() else {
        return Ok(out);
    };
    window.push(first);
    for pair in point.series.windows(2) {
        window.push(pair[1]);
        let stat = window.percentile(q)?;
        out.push(Transition {
            s_prev: vec![pair[0]],
            a_prev: point.config.clone(),
            s_cur: vec![pair[1]],
            r_cur: env.reward(stat, &point.config),
        });
    }
    Ok(out)
}

/// Result of one ground-truth step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: Vec<f64>,
    pub reward: f64,
    /// The action was outside bounds and got clamped.
    pub clamped: bool,
}

/// Ground-truth transition from `s` under `a`. `recent` holds the
/// observations so far; the reward uses the aggregated statistic over
/// `recent` plus the new observation.
pub fn true_step<R: Rng + ?Sized>(
    env: &EnvSpec,
    recent: &StatWindow,
    s: &[f64],
    a: &[f64],
    rng: &mut R,
) -> Result<StepOutcome> {
    if s.len() != env.state_dim {
        return Err(Error::DimensionMismatch {
            expected: env.state_dim,
            got: s.len(),
        });
    }
    let (a, clamped) = env.clamp_action(a);
    let next = env.transition(s[0], &a, rng);
    let mut window = recent.clone();
    window.push(next);
    let stat = window.percentile(env.percentile.q())?;
    Ok(StepOutcome {
        state: vec![next],
        reward: env.reward(stat, &a),
        clamped,
    })
}

/// Writes a training point as columnar text: a versioned header, metadata
/// comments, then one `t,s0` row per tick.
pub fn write_training_point<W: std::io::Write>(point: &TrainingPoint, mut out: W) -> std::io::Result<()> {
    writeln!(out, "# action-shapley training-point v1")?;
    writeln!(out, "# id={}", point.id)?;
    let cfg: Vec<String> = point.config.iter().map(|c| format!("{c:?}")).collect();
    writeln!(out, "# config={}", cfg.join(","))?;
    writeln!(out, "t,s0")?;
    for (t, s) in point.series.iter().enumerate() {
        writeln!(out, "{t},{s:?}")?;
    }
    Ok(())
}

pub fn read_training_point(text: &str) -> Result<TrainingPoint> {
    let mut lines = text.lines();
    if lines.next() != Some("# action-shapley training-point v1") {
        return Err(Error::Parse("missing training-point v1 header".into()));
    }
    let mut id = None;
    let mut config = None;
    let mut series = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if let Some(rest) = line.strip_prefix("# id=") {
            id = Some(rest.to_string());
        } else if let Some(rest) = line.strip_prefix("# config=") {
            let parsed: std::result::Result<Vec<f64>, _> = rest.split(',').map(str::parse).collect();
            config = Some(parsed.map_err(|e| Error::Parse(format!("bad config {rest:?}: {e}")))?);
        } else if line == "t,s0" || line.is_empty() {
            continue;
        } else {
            let value = line
                .split(',')
                .nth(1)
                .ok_or_else(|| Error::Parse(format!("line {}: expected t,s0", lineno + 2)))?;
            series.push(
                value
                    .parse()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?,
            );
        }
    }
    Ok(TrainingPoint {
        id: id.ok_or_else(|| Error::Parse("missing id".into()))?,
        config: config.ok_or_else(|| Error::Parse("missing config".into()))?,
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn family_constants() {
        let vm = make_env(Family::VmRightsizing, &EnvParams::default()).unwrap();
        assert_eq!((vm.percentile, vm.threshold, vm.direction), (Percentile::P50, 90.0, Direction::Below));
        let lb = make_env(Family::LoadBalancing, &EnvParams::default()).unwrap();
        assert_eq!((lb.percentile, lb.threshold), (Percentile::P5, 70.0));
        let db = make_env(Family::DbTuning, &EnvParams::default()).unwrap();
        assert_eq!((db.percentile, db.threshold), (Percentile::P90, 25.0));
        let k8s = make_env(Family::K8s, &EnvParams::default()).unwrap();
        assert_eq!((k8s.percentile, k8s.threshold), (Percentile::P99_9, 100.0));
        let cool = make_env(Family::Cooling, &EnvParams::default()).unwrap();
        assert_eq!((cool.percentile, cool.threshold), (Percentile::P99_9, 65.0));
        assert!(cool.cost_weight > 0.0);
        let counts: Vec<usize> = Family::ALL
            .iter()
            .map(|f| make_env(*f, &EnvParams::default()).unwrap().n_points())
            .collect();
        assert_eq!(counts, vec![5, 5, 6, 15, 12]);
        assert!("nope".parse::<Family>().is_err());
        assert_eq!("k8s".parse::<Family>().unwrap(), Family::K8s);
    }

    #[test]
    fn percentile_examples() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(aggregate_percentile(&v, 50.0).unwrap(), 50.0);
        assert_eq!(aggregate_percentile(&[3.5; 7], 99.9).unwrap(), 3.5);
        assert_eq!(aggregate_percentile(&[3.5; 7], 5.0).unwrap(), 3.5);
        assert_eq!(aggregate_percentile(&[10.0, 20.0, 30.0, 40.0], 99.9).unwrap(), 40.0);
        assert_eq!(aggregate_percentile(&[10.0, 20.0, 30.0, 40.0], 50.0).unwrap(), 20.0);
        assert!(aggregate_percentile(&[], 50.0).is_err());
        assert!(aggregate_percentile(&[1.0], 0.0).is_err());
    }

    #[test]
    fn generation_is_seeded() {
        let env = make_env(Family::DbTuning, &EnvParams::default()).unwrap();
        let a = generate_training_point(&env, "p1", &env.grid[0], 64, 9).unwrap();
        let b = generate_training_point(&env, "p1", &env.grid[0], 64, 9).unwrap();
        let c = generate_training_point(&env, "p1", &env.grid[0], 64, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.series, c.series);
        let one = generate_training_point(&env, "p1", &env.grid[0], 1, 9).unwrap();
        assert_eq!(one.series.len(), 1);
        assert!(generate_training_point(&env, "x", &[0.0, 1.0], 8, 1).is_err());
    }

    #[test]
    fn noiseless_series_settles_on_surface() {
        let env = make_env(
            Family::VmRightsizing,
            &EnvParams {
                noise_scale: Some(0.0),
                ..Default::default()
            },
        )
        .unwrap();
        for c in &env.grid {
            let p = generate_training_point(&env, "a", c, 256, 1).unwrap();
            // closed form: g + rho^t (s0 - g)
            let u = env.normalize(c);
            let z = env.surface.bias + env.surface.slopes[0] * u[0] + env.surface.slopes[1] * u[1];
            let g = env.surface.floor + (env.surface.ceiling - env.surface.floor) / (1.0 + (-z).exp());
            let tail = &p.series[200..];
            assert!(tail.iter().all(|s| (s - g).abs() < 1e-9), "tail off g={g}");
        }
    }

    #[test]
    fn reward_examples() {
        let mut env = make_env(Family::VmRightsizing, &EnvParams::default()).unwrap();
        env.cost_weight = 0.0;
        assert_eq!(env.reward(90.0, &env.a0.clone()), 0.0);
        assert_eq!(env.reward(180.0, &env.a0.clone()), -1.0);
        let cool = make_env(Family::Cooling, &EnvParams::default()).unwrap();
        assert!(cool.reward(65.0, &[15.0, 11.0]) < 0.0);
    }

    #[test]
    fn true_step_clamps_and_rewards_nonpositive() {
        let env = make_env(Family::K8s, &EnvParams::default()).unwrap();
        let mut rng = seed::rng(3);
        let mut w = StatWindow::new(STAT_WINDOW);
        w.push(env.s0[0]);
        let out = true_step(&env, &w, &env.s0, &[9.9e6, 50.0], &mut rng).unwrap();
        assert!(out.clamped);
        assert!(out.reward <= 0.0);
        let out = true_step(&env, &w, &env.s0, &env.a0, &mut rng).unwrap();
        assert!(!out.clamped);
    }

    #[test]
    fn surface_monotone_on_grid() {
        for family in Family::ALL {
            let env = make_env(family, &EnvParams::default()).unwrap();
            let signs = env.actuation_signs();
            for j in 0..env.action_dim {
                for i in 0..20 {
                    let mut lo = env.a0.clone();
                    let mut hi = env.a0.clone();
                    let span = env.action_max[j] - env.action_min[j];
                    lo[j] = env.action_min[j] + span * i as f64 / 20.0;
                    hi[j] = env.action_min[j] + span * (i + 1) as f64 / 20.0;
                    let d = env.steady_state(&hi) - env.steady_state(&lo);
                    assert!(d * signs[j] >= 0.0, "{family} dim {j} not monotone");
                }
            }
        }
    }

    #[test]
    fn training_point_text_roundtrip() {
        let env = make_env(Family::Cooling, &EnvParams::default()).unwrap();
        let p = generate_training_point(&env, "c3", &env.grid[2], 40, 5).unwrap();
        let mut buf = Vec::new();
        write_training_point(&p, &mut buf).unwrap();
        let back = read_training_point(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    proptest! {
        #[test]
        fn percentile_is_member_and_permutation_invariant(
            mut v in proptest::collection::vec(-1e3f64..1e3, 1..60),
            q in 0.1f64..=100.0,
            rot in 0usize..60,
        ) {
            let p = aggregate_percentile(&v, q).unwrap();
            prop_assert!(v.contains(&p));
            let r = rot % v.len();
            v.rotate_left(r);
            v.reverse();
            prop_assert_eq!(aggregate_percentile(&v, q).unwrap(), p);
        }
    }
}
