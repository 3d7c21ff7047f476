//! RBF-network world model for `(s_prev, a_prev) -> (s_cur, r_cur)`.
//!
//! Inputs are standardized, optionally projected onto their leading
//! principal directions, and expanded in Gaussian features centered on
//! k-means centroids. A single ridge solve fits the next-state and reward
//! heads together.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

const WIDTH_FLOOR: f64 = 1e-6;
const RIDGE_BUMP: f64 = 1e-8;
const MODEL_FORMAT: &str = "action-shapley/rbf-model";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s_prev: Vec<f64>,
    pub a_prev: Vec<f64>,
    pub s_cur: Vec<f64>,
    pub r_cur: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub num_centers: usize,
    /// Multiplier on the mean-distance width of every center.
    pub width_scale: f64,
    pub ridge: f64,
    pub kmeans_iterations: usize,
    pub seed: u64,
    pub pre_encode: bool,
    pub encoder_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            num_centers: 12,
            width_scale: 1.0,
            ridge: 1e-6,
            kmeans_iterations: 25,
            seed: 0,
            pre_encode: false,
            encoder_dim: 2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_centers < 1 {
            return Err(Error::domain("num_centers must be at least 1"));
        }
        if !(self.width_scale > 0.0 && self.width_scale.is_finite()) {
            return Err(Error::domain(format!("width_scale must be > 0, got {}", self.width_scale)));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::domain(format!("ridge must be >= 0, got {}", self.ridge)));
        }
        if self.pre_encode && self.encoder_dim < 1 {
            return Err(Error::domain("encoder_dim must be at least 1"));
        }
        Ok(())
    }
}

/// A fitted RBF network. Immutable after [`fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfModel {
    pub state_dim: usize,
    pub action_dim: usize,
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    /// Rows are principal directions in standardized input space.
    pub encoder: Option<Vec<Vec<f64>>>,
    pub centers: Vec<Vec<f64>>,
    pub widths: Vec<f64>,
    /// `(m + 1) x (p + 1)`: bias row first, then one row per center;
    /// the last column is the reward head.
    pub output_weights: Vec<Vec<f64>>,
    pub ridge_used: f64,
    /// Set when a singular solve at zero ridge forced a small ridge.
    pub ridge_bumped: bool,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: RbfModel,
}

fn check_dataset(transitions: &[Transition]) -> Result<(usize, usize)> {
    let first = transitions
        .first()
        .ok_or_else(|| Error::domain("no transitions to fit"))?;
    let (p, q) = (first.s_prev.len(), first.a_prev.len());
    for t in transitions {
        if t.s_prev.len() != p || t.s_cur.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: t.s_prev.len().max(t.s_cur.len()),
            });
        }
        if t.a_prev.len() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                got: t.a_prev.len(),
            });
        }
        let finite = t
            .s_prev
            .iter()
            .chain(&t.a_prev)
            .chain(&t.s_cur)
            .chain(std::iter::once(&t.r_cur))
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::domain("non-finite value in transitions"));
        }
    }
    Ok((p, q))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded k-means++ initialization followed by Lloyd iterations.
///
/// Ties in assignment go to the lowest-index center. An empty cluster is
/// reseeded at the point farthest from its current center.
pub(crate) fn kmeans(points: &[Vec<f64>], k: usize, iterations: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = seed::rng(seed);
    let n = points.len();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n)].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        } else {
            centers.len() % n
        };
        centers.push(points[pick].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &centers[centers.len() - 1]));
        }
    }

    let dim = points[0].len();
    let flat: Vec<f64> = points.iter().flatten().copied().collect();
    let mut cflat: Vec<f64> = centers.iter().flatten().copied().collect();
    let mut assign = vec![usize::MAX; n];
    for _ in 0..iterations.max(1) {
        let mut changed = false;
        for (i, p) in flat.chunks_exact(dim).enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, c) in cflat.chunks_exact(dim).enumerate() {
                let d = sq_dist(p, c);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (p, &a) in flat.chunks_exact(dim).zip(&assign) {
            counts[a] += 1;
            for (s, x) in sums[a * dim..(a + 1) * dim].iter_mut().zip(p) {
                *s += x;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                for (c, s) in cflat[j * dim..(j + 1) * dim].iter_mut().zip(&sums[j * dim..(j + 1) * dim]) {
                    *c = s / counts[j] as f64;
                }
            } else {
                let far = (0..n)
                    .map(|i| (i, sq_dist(&points[i], &cflat[assign[i] * dim..(assign[i] + 1) * dim])))
                    .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc })
                    .0;
                cflat[j * dim..(j + 1) * dim].copy_from_slice(&points[far]);
                assign[far] = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let centers = cflat.chunks_exact(dim).map(<[f64]>::to_vec).collect();
    (centers, assign)
}

fn principal_directions(z: &[Vec<f64>], e: usize) -> Vec<Vec<f64>> {
    let d = z[0].len();
    let n = z.len() as f64;
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for row in z {
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += row[i] * row[j] / n;
            }
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    order
        .into_iter()
        .take(e.min(d))
        .map(|c| {
            let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
            // fix the sign so the largest-magnitude component is positive
            let lead = v
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if lead < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect()
}

impl RbfModel {
    fn encode(&self, raw: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = raw
            .iter()
            .zip(&self.input_mean)
            .zip(&self.input_scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect();
        match &self.encoder {
            Some(rows) => rows
                .iter()
                .map(|r| r.iter().zip(&z).map(|(a, b)| a * b).sum())
                .collect(),
            None => z,
        }
    }

    pub fn num_centers(&self) -> usize {
        self.centers.len()
    }

    /// Predicts the next state and reward.
    pub fn predict(&self, s: &[f64], a: &[f64]) -> Result<(Vec<f64>, f64)> {
        if s.len() != self.state_dim {
            return Err(Error::DimensionMismatch {
                expected: self.state_dim,
                got: s.len(),
            });
        }
        if a.len() != self.action_dim {
            return Err(Error::DimensionMismatch {
                expected: self.action_dim,
                got: a.len(),
            });
        }
        let raw: Vec<f64> = s.iter().chain(a).copied().collect();
        let z = self.encode(&raw);
        let mut out = self.output_weights[0].clone();
        for ((c, w), row) in self.centers.iter().zip(&self.widths).zip(&self.output_weights[1..]) {
            let f = (-sq_dist(&z, c) / (2.0 * w * w)).exp();
            for (o, wt) in out.iter_mut().zip(row) {
                *o += f * wt;
            }
        }
        let r = out.pop().expect("reward column");
        Ok((out, r))
    }

    /// Upper bound on the Lipschitz constant of `predict` (jointly over
    /// next state and reward) in raw input units.
    pub fn lipschitz_bound(&self) -> f64 {
        let half = (-0.5f64).exp();
        let feature_part: f64 = self
            .output_weights
            .iter()
            .skip(1)
            .zip(&self.widths)
            .map(|(row, w)| row.iter().map(|x| x * x).sum::<f64>().sqrt() * half / w)
            .sum();
        // Frobenius norm of the input map, an upper bound on its operator norm
        let input_norm = match &self.encoder {
            Some(rows) => rows
                .iter()
                .flat_map(|r| r.iter().zip(&self.input_scale).map(|(e, s)| (e / s) * (e / s)))
                .sum::<f64>()
                .sqrt(),
            None => self
                .input_scale
                .iter()
                .map(|s| 1.0 / (s * s))
                .sum::<f64>()
                .sqrt(),
        };
        feature_part * input_norm
    }

    pub fn to_text(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("model file: {e}")))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::Parse(format!(
                "unsupported model format {} v{}",
                file.format, file.version
            )));
        }
        Ok(file.model)
    }
}

/// Fits an RBF world model.
pub fn fit(transitions: &[Transition], config: &TrainConfig) -> Result<RbfModel> {
    config.validate()?;
    let (p, q) = check_dataset(transitions)?;
    let n = transitions.len();
    let m = config.num_centers;
    if n < m {
        return Err(Error::domain(format!(
            "{n} transitions cannot support {m} centers"
        )));
    }
    let d = p + q;

    let raw: Vec<Vec<f64>> = transitions
        .iter()
        .map(|t| t.s_prev.iter().chain(&t.a_prev).copied().collect())
        .collect();
    let mut mean = vec![0.0; d];
    for row in &raw {
        for (m_, x) in mean.iter_mut().zip(row) {
            *m_ += x / n as f64;
        }
    }
    let mut scale = vec![0.0; d];
    for row in &raw {
        for ((s, x), m_) in scale.iter_mut().zip(row).zip(&mean) {
            *s += (x - m_) * (x - m_) / n as f64;
        }
    }
    for s in scale.iter_mut() {
        *s = s.sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }

    let mut model = RbfModel {
        state_dim: p,
        action_dim: q,
        input_mean: mean,
        input_scale: scale,
        encoder: None,
        centers: Vec::new(),
        widths: Vec::new(),
        output_weights: Vec::new(),
        ridge_used: config.ridge,
        ridge_bumped: false,
    };
    let standardized: Vec<Vec<f64>> = raw.iter().map(|r| model.encode(r)).collect();
    let inputs = if config.pre_encode {
        let rows = principal_directions(&standardized, config.encoder_dim);
        model.encoder = Some(rows);
        raw.iter().map(|r| model.encode(r)).collect()
    } else {
        standardized
    };

    let (centers, assign) = kmeans(&inputs, m, config.kmeans_iterations, config.seed);
    let mut dist_sum = vec![0.0; m];
    let mut counts = vec![0usize; m];
    for (x, &a) in inputs.iter().zip(&assign) {
        dist_sum[a] += sq_dist(x, &centers[a]).sqrt();
        counts[a] += 1;
    }
    model.widths = (0..m)
        .map(|j| {
            if counts[j] == 0 {
                WIDTH_FLOOR
            } else {
                (config.width_scale * dist_sum[j] / counts[j] as f64).max(WIDTH_FLOOR)
            }
        })
        .collect();
    model.centers = centers;

    // centered ridge regression; the bias is left unpenalized
    let phi = DMatrix::from_fn(n, m, |i, j| {
        let w = model.widths[j];
        (-sq_dist(&inputs[i], &model.centers[j]) / (2.0 * w * w)).exp()
    });
    let y = DMatrix::from_fn(n, p + 1, |i, j| {
        if j < p {
            transitions[i].s_cur[j]
        } else {
            transitions[i].r_cur
        }
    });
    let phi_mean = phi.row_mean();
    let y_mean = y.row_mean();
    let mut phi_c = phi.clone();
    for mut row in phi_c.row_iter_mut() {
        row -= &phi_mean;
    }
    let mut y_c = y.clone();
    for mut row in y_c.row_iter_mut() {
        row -= &y_mean;
    }
    let gram = phi_c.transpose() * &phi_c;
    let rhs = phi_c.transpose() * &y_c;

    let solve = |lambda: f64| {
        let mut a = gram.clone();
        for i in 0..m {
            a[(i, i)] += lambda;
        }
        a.cholesky().map(|c| c.solve(&rhs))
    };
    let weights = match solve(config.ridge) {
        Some(w) => w,
        None if config.ridge == 0.0 => {
            model.ridge_bumped = true;
            model.ridge_used = RIDGE_BUMP;
            solve(RIDGE_BUMP).ok_or_else(|| Error::domain("singular normal equations"))?
        }
        None => return Err(Error::domain("singular normal equations")),
    };
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::domain("non-finite output weights"));
    }
    let bias = &y_mean - &phi_mean * &weights;

    let mut out = Vec::with_capacity(m + 1);
    out.push(bias.iter().copied().collect());
    for j in 0..m {
        out.push(weights.row(j).iter().copied().collect());
    }
    model.output_weights = out;
    Ok(model)
}

/// Something that picks an action from the current state.
pub trait Policy {
    fn reset(&mut self);
    fn act(&mut self, state: &[f64]) -> Vec<f64>;
}

/// Always plays the same action.
#[derive(Debug, Clone)]
pub struct FixedPolicy(pub Vec<f64>);

impl Policy for FixedPolicy {
    fn reset(&mut self) {}

    fn act(&mut self, _state: &[f64]) -> Vec<f64> {
        self.0.clone()
    }
}

/// Rolls a policy forward through the model for `steps` steps, adding
/// seeded Gaussian noise to each predicted state. Each entry holds the
/// state the action was taken in, the action, and the predicted reward.
pub fn rollout<P: Policy + ?Sized>(
    model: &RbfModel,
    policy: &mut P,
    s0: &[f64],
    steps: usize,
    noise_scale: f64,
    seed: u64,
) -> Result<Vec<(Vec<f64>, Vec<f64>, f64)>> {
    let mut rng = seed::rng(seed);
    let noise = Normal::new(0.0, noise_scale.max(0.0)).map_err(|e| Error::domain(e.to_string()))?;
    let mut s = s0.to_vec();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let a = policy.act(&s);
        let (mut next, r) = model.predict(&s, &a)?;
        if noise_scale > 0.0 {
            for x in next.iter_mut() {
                *x += noise.sample(&mut rng);
            }
        }
        out.push((s, a, r));
        s = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn linear_data(n: usize, seed: u64) -> Vec<Transition> {
        let mut rng = seed::rng(seed);
        (0..n)
            .map(|_| {
                let s: f64 = rng.random_range(-1.0..1.0);
                let a: f64 = rng.random_range(-1.0..1.0);
                let next = 0.9 * s + 0.1 * a;
                Transition {
                    s_prev: vec![s],
                    a_prev: vec![a],
                    s_cur: vec![next],
                    r_cur: -next.abs(),
                }
            })
            .collect()
    }

    #[test]
    fn single_transition_interpolates() {
        let t = Transition {
            s_prev: vec![3.0],
            a_prev: vec![1.0, 2.0],
            s_cur: vec![4.5],
            r_cur: -0.25,
        };
        let cfg = TrainConfig {
            num_centers: 1,
            ridge: 0.0,
            ..Default::default()
        };
        let m = fit(std::slice::from_ref(&t), &cfg).unwrap();
        assert!(m.ridge_bumped);
        let (s, r) = m.predict(&[3.0], &[1.0, 2.0]).unwrap();
        assert_eq!(s, vec![4.5]);
        assert_eq!(r, -0.25);
    }

    #[test]
    fn constant_targets_predict_constant() {
        let mut data = linear_data(200, 1);
        for t in &mut data {
            t.s_cur = vec![2.5];
            t.r_cur = -1.0;
        }
        let m = fit(&data, &TrainConfig::default()).unwrap();
        let mut rng = seed::rng(2);
        for _ in 0..50 {
            let (s, r) = m
                .predict(&[rng.random_range(-3.0..3.0)], &[rng.random_range(-3.0..3.0)])
                .unwrap();
            assert!((s[0] - 2.5).abs() < 1e-9);
            assert!((r + 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn too_few_transitions_is_domain_error() {
        let cfg = TrainConfig {
            num_centers: 10,
            ..Default::default()
        };
        assert!(matches!(fit(&linear_data(5, 0), &cfg), Err(Error::Domain(_))));
    }

    #[test]
    fn predict_checks_dimensions() {
        let m = fit(&linear_data(50, 0), &TrainConfig::default()).unwrap();
        assert!(matches!(
            m.predict(&[0.0, 1.0], &[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(m.predict(&[0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn center_input_single_center() {
        let m = RbfModel {
            state_dim: 1,
            action_dim: 1,
            input_mean: vec![0.0, 0.0],
            input_scale: vec![1.0, 1.0],
            encoder: None,
            centers: vec![vec![0.5, -0.5]],
            widths: vec![1.0],
            output_weights: vec![vec![0.25, -1.0], vec![2.0, 3.0]],
            ridge_used: 0.0,
            ridge_bumped: false,
        };
        let (s, r) = m.predict(&[0.5], &[-0.5]).unwrap();
        assert_eq!(s, vec![2.25]);
        assert_eq!(r, 2.0);
        assert_eq!(m.predict(&[0.5], &[-0.5]).unwrap(), (s, r));
    }

    #[test]
    fn lipschitz_bound_holds() {
        let m = fit(&linear_data(300, 4), &TrainConfig::default()).unwrap();
        let l = m.lipschitz_bound();
        let mut rng = seed::rng(5);
        for _ in 0..100 {
            let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let dx = [rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)];
            let (s1, r1) = m.predict(&x[..1], &x[1..]).unwrap();
            let (s2, r2) = m.predict(&[x[0] + dx[0]], &[x[1] + dx[1]]).unwrap();
            let dy = ((s1[0] - s2[0]).powi(2) + (r1 - r2).powi(2)).sqrt();
            let dn = (dx[0] * dx[0] + dx[1] * dx[1]).sqrt();
            assert!(dy <= l * dn + 1e-12, "{dy} > {l} * {dn}");
        }
    }

    #[test]
    fn pre_encoded_fit_and_serialization_roundtrip() {
        let cfg = TrainConfig {
            pre_encode: true,
            encoder_dim: 2,
            seed: 11,
            ..Default::default()
        };
        let m = fit(&linear_data(300, 9), &cfg).unwrap();
        assert_eq!(m.encoder.as_ref().unwrap().len(), 2);
        let text = m.to_text();
        let back = RbfModel::from_text(&text).unwrap();
        assert_eq!(back, m);
        assert!(RbfModel::from_text("{}").is_err());
    }

    #[test]
    fn rollout_determinism_and_length() {
        let m = fit(&linear_data(300, 3), &TrainConfig::default()).unwrap();
        let mut p = FixedPolicy(vec![0.2]);
        let a = rollout(&m, &mut p, &[0.5], 20, 0.0, 1).unwrap();
        let b = rollout(&m, &mut p, &[0.5], 20, 0.0, 99).unwrap();
        assert_eq!(a, b);
        let c = rollout(&m, &mut p, &[0.5], 20, 0.1, 7).unwrap();
        let d = rollout(&m, &mut p, &[0.5], 20, 0.1, 7).unwrap();
        assert_eq!(c, d);
        assert_ne!(a, c);
        assert_eq!(rollout(&m, &mut p, &[0.5], 1, 0.1, 7).unwrap().len(), 1);
    }

    #[test]
    fn kmeans_is_seeded_and_covers_points() {
        let pts: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 4) as f64 * 10.0, (i / 4) as f64 * 0.01]).collect();
        let (c1, a1) = kmeans(&pts, 4, 20, 3);
        let (c2, a2) = kmeans(&pts, 4, 20, 3);
        assert_eq!((c1.clone(), a1.clone()), (c2, a2));
        let mut xs: Vec<i64> = c1.iter().map(|c| c[0].round() as i64).collect();
        xs.sort();
        assert_eq!(xs, vec![0, 10, 20, 30]);
    }
}
