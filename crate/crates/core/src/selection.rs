//! Training-set selection from a Shapley report, and the best / worst /
//! random agent comparison used to validate it.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::shapley::{ShapleyReport, Valuation, ValuationOutcome};
use crate::subset::{binomial, SubsetMask};
use crate::valuation::EndToEndValuation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub chosen: SubsetMask,
    /// Mean φ over the dispensable members; 0 when there are none.
    pub avg_phi: f64,
    /// Per point: indispensable flag (all of these are in `chosen`).
    pub includes_indispensable: Vec<bool>,
    /// Number of candidate sets the dispensable slots could be filled from.
    pub choice_set_size: u64,
}

/// `C(n_dispensable, slots)`.
pub fn choice_set_size(n_dispensable: usize, slots: usize) -> Result<u64> {
    if slots > n_dispensable {
        return Err(Error::domain(format!(
            "cannot fill {slots} slots from {n_dispensable} dispensable points"
        )));
    }
    Ok(binomial(n_dispensable as u64, slots as u64))
}

struct Plan {
    indispensable: Vec<usize>,
    /// Dispensable points with their φ.
    ranked: Vec<(usize, f64)>,
    slots: usize,
}

fn plan(report: &ShapleyReport) -> Result<Plan> {
    if report.per_point.len() != report.n {
        return Err(Error::domain(format!(
            "report has {} points, expected {}",
            report.per_point.len(),
            report.n
        )));
    }
    let indispensable = report.indispensable();
    let mut ranked = Vec::new();
    for p in &report.per_point {
        if p.indispensable {
            continue;
        }
        match p.phi {
            Some(phi) if phi.is_finite() => ranked.push((p.point_id, phi)),
            _ => return Err(Error::domain(format!("dispensable point {} has no finite phi", p.point_id))),
        }
    }
    let target = report.global_theta.min(report.n);
    if indispensable.len() > target {
        return Err(Error::domain(format!(
            "{} indispensable points exceed the cut-off cardinality {}",
            indispensable.len(),
            target
        )));
    }
    Ok(Plan {
        slots: target - indispensable.len(),
        indispensable,
        ranked,
    })
}

fn pick(report: &ShapleyReport, plan: &Plan, highest: bool) -> Result<SelectionOutcome> {
    let mut order = plan.ranked.clone();
    // stable sort keeps ascending index among equal φ
    if highest {
        order.sort_by(|a, b| b.1.total_cmp(&a.1));
    } else {
        order.sort_by(|a, b| a.1.total_cmp(&b.1));
    }
    let fill = &order[..plan.slots];
    let mut members = plan.indispensable.clone();
    members.extend(fill.iter().map(|&(i, _)| i));
    let avg_phi = if fill.is_empty() {
        0.0
    } else {
        fill.iter().map(|&(_, phi)| phi).sum::<f64>() / fill.len() as f64
    };
    Ok(SelectionOutcome {
        chosen: SubsetMask::from_indices(report.n, &members)?,
        avg_phi,
        includes_indispensable: report.per_point.iter().map(|p| p.indispensable).collect(),
        choice_set_size: choice_set_size(plan.ranked.len(), plan.slots)?,
    })
}

/// Indispensable points plus the highest-φ dispensable points, up to the
/// global cut-off cardinality. Ties go to the lower index.
pub fn select_best(report: &ShapleyReport) -> Result<SelectionOutcome> {
    pick(report, &plan(report)?, true)
}

/// Same cardinality as [`select_best`], filled with the lowest-φ points.
pub fn select_worst(report: &ShapleyReport) -> Result<SelectionOutcome> {
    pick(report, &plan(report)?, false)
}

/// Scores a trained agent for one validation episode.
pub trait EpisodeScorer: Sync {
    fn score(&self, mask: &SubsetMask, episode_seed: u64) -> ValuationOutcome;
}

impl<F> EpisodeScorer for F
where
    F: Fn(&SubsetMask, u64) -> ValuationOutcome + Sync,
{
    fn score(&self, mask: &SubsetMask, episode_seed: u64) -> ValuationOutcome {
        self(mask, episode_seed)
    }
}

/// Ignores the episode seed: every episode sees the same valuation.
pub struct Fixed<'a, V: ?Sized>(pub &'a V);

impl<V: Valuation + ?Sized> EpisodeScorer for Fixed<'_, V> {
    fn score(&self, mask: &SubsetMask, _episode_seed: u64) -> ValuationOutcome {
        self.0.evaluate(mask)
    }
}

/// How validation episodes differ from one another.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpisodeMode {
    /// Agents are trained once; episodes re-roll environment noise.
    #[default]
    RerollNoise,
    /// Agents are retrained and retuned with an episode-specific seed.
    Retune,
}

/// End-to-end scorer in the chosen episode mode.
pub struct EndToEndScorer<'a> {
    pub valuation: &'a EndToEndValuation,
    pub mode: EpisodeMode,
}

impl EpisodeScorer for EndToEndScorer<'_> {
    fn score(&self, mask: &SubsetMask, episode_seed: u64) -> ValuationOutcome {
        match self.mode {
            EpisodeMode::RerollNoise => self.valuation.evaluate_episode(mask, episode_seed),
            EpisodeMode::Retune => self.valuation.evaluate_retuned(mask, episode_seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomDraw {
    pub mask: SubsetMask,
    /// `None` when the agent failed its goal.
    pub j: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub seed: u64,
    pub best_j: Option<f64>,
    pub worst_j: Option<f64>,
    pub randoms: Vec<RandomDraw>,
}

impl EpisodeRecord {
    pub fn best_of_random(&self) -> Option<f64> {
        self.randoms.iter().filter_map(|r| r.j).max_by(f64::total_cmp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub best: SelectionOutcome,
    pub worst: SelectionOutcome,
    /// Mean J of the best agent over the episodes where it met the goal.
    pub best_j: Option<f64>,
    pub worst_j: Option<f64>,
    pub episodes: Vec<EpisodeRecord>,
    /// Share of random agents scoring strictly below the best agent in
    /// the same episode.
    pub fraction_beaten: f64,
    /// Share of random agents scoring strictly above the best agent.
    pub fraction_outperforming: f64,
    /// Episodes where the best agent scored at least as well as the worst.
    pub best_ge_worst: usize,
}

impl ValidationSummary {
    pub fn best_of_random(&self) -> Vec<Option<f64>> {
        self.episodes.iter().map(EpisodeRecord::best_of_random).collect()
    }
}

/// Orders outcomes with failures below every score.
pub fn rank(j: Option<f64>) -> f64 {
    j.unwrap_or(f64::NEG_INFINITY)
}

fn mean(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let ok: Vec<f64> = xs.flatten().collect();
    (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64)
}

/// Draws `count` random training sets of the target cardinality. Each holds
/// every indispensable point; the best set itself is excluded whenever
/// another choice exists.
fn draw_randoms(report: &ShapleyReport, best: &SubsetMask, count: usize, seed: u64) -> Result<Vec<SubsetMask>> {
    let plan = plan(report)?;
    let pool: Vec<usize> = plan.ranked.iter().map(|&(i, _)| i).collect();
    let choices = choice_set_size(pool.len(), plan.slots)?;
    let mut rng = seed::rng(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut members = plan.indispensable.clone();
        members.extend(index::sample(&mut rng, pool.len(), plan.slots).iter().map(|j| pool[j]));
        let mask = SubsetMask::from_indices(report.n, &members)?;
        if choices > 1 && mask == *best {
            continue;
        }
        out.push(mask);
    }
    Ok(out)
}

/// Compares the best, worst and random agents over seeded episodes. All
/// agents in an episode share the episode seed.
pub fn validate<S: EpisodeScorer + ?Sized>(
    report: &ShapleyReport,
    scorer: &S,
    episodes: usize,
    randoms_per_episode: usize,
    seed: u64,
) -> Result<ValidationSummary> {
    if episodes < 1 {
        return Err(Error::domain("episodes must be at least 1"));
    }
    let best = select_best(report)?;
    let worst = select_worst(report)?;
    let records = (0..episodes)
        .into_par_iter()
        .map(|e| {
            let ep_seed = seed::derive(seed, e as u64);
            let masks = draw_randoms(report, &best.chosen, randoms_per_episode, seed::derive(ep_seed, 1))?;
            let randoms = masks
                .into_par_iter()
                .map(|mask| RandomDraw {
                    mask,
                    j: scorer.score(&mask, ep_seed).score(),
                })
                .collect();
            Ok(EpisodeRecord {
                episode: e,
                seed: ep_seed,
                best_j: scorer.score(&best.chosen, ep_seed).score(),
                worst_j: scorer.score(&worst.chosen, ep_seed).score(),
                randoms,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (mut total, mut beaten, mut above, mut best_ge_worst) = (0usize, 0usize, 0usize, 0usize);
    for r in &records {
        let b = rank(r.best_j);
        if b >= rank(r.worst_j) {
            best_ge_worst += 1;
        }
        for d in &r.randoms {
            total += 1;
            let x = rank(d.j);
            beaten += usize::from(x < b);
            above += usize::from(x > b);
        }
    }
    let frac = |c: usize| if total == 0 { 0.0 } else { c as f64 / total as f64 };
    Ok(ValidationSummary {
        best_j: mean(records.iter().map(|r| r.best_j)),
        worst_j: mean(records.iter().map(|r| r.worst_j)),
        fraction_beaten: frac(beaten),
        fraction_outperforming: frac(above),
        best_ge_worst,
        best,
        worst,
        episodes: records,
    })
}
