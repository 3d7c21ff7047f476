use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use action_shapley::agent::OptimizerKind;
use action_shapley::env::{generate_dataset, write_training_point, EnvSpec, TrainingPoint};
use action_shapley::selection::{rank, select_best, select_worst, validate, EndToEndScorer, EpisodeScorer, SelectionOutcome};
use action_shapley::valuation::{cached, EndToEndValuation, EndToEndValuationConfig, ValuationStore};
use action_shapley::{action_shapley_report, seed, ShapleyReport, SubsetMask};

use crate::artifacts::*;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::svg;

/// Everything a command needs: the validated config, its environment and
/// the resolved output directory.
pub struct Context {
    pub config: RunConfig,
    pub env: EnvSpec,
    pub out: PathBuf,
    pub baseline: bool,
}

impl Context {
    pub fn new(config: RunConfig, out: Option<PathBuf>, baseline: bool) -> CliResult<Self> {
        let env = config.validate()?;
        let out = out.unwrap_or_else(|| config.output_dir.clone());
        Ok(Self { config, env, out, baseline })
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }
}

fn note(path: &Path) {
    eprintln!("wrote {}", path.display());
}

pub fn generate(ctx: &Context) -> CliResult<()> {
    let c = &ctx.config;
    let points = generate_dataset(&ctx.env, c.data.series_len, c.seed)?;
    let data_dir = ctx.path(MANIFEST).parent().map(Path::to_path_buf).unwrap_or_default();
    let mut entries = Vec::with_capacity(points.len());
    for p in &points {
        let file = format!("{}.csv", p.id);
        let mut buf = Vec::new();
        write_training_point(p, &mut buf).map_err(|e| CliError::Internal(e.to_string()))?;
        let path = data_dir.join(&file);
        write_file(&path, &buf)?;
        note(&path);
        entries.push(ManifestEntry {
            id: p.id.clone(),
            file,
            config: p.config.clone(),
        });
    }
    let (format, version) = header("action-shapley-dataset");
    let manifest = Manifest {
        format,
        version,
        seed: c.seed,
        series_len: c.data.series_len,
        env: ctx.env.clone(),
        points: entries,
    };
    write_json(&ctx.path(MANIFEST), &manifest)?;
    note(&ctx.path(MANIFEST));
    Ok(())
}

/// Dataset for the current config. A manifest produced under a different
/// environment or seed is stale.
fn dataset(ctx: &Context) -> CliResult<(Manifest, Vec<TrainingPoint>)> {
    let (manifest, points) = read_dataset(&ctx.out)?;
    if manifest.env != ctx.env || manifest.seed != ctx.config.seed || manifest.series_len != ctx.config.data.series_len {
        return Err(CliError::Missing(format!(
            "{} was generated with a different config; rerun `generate`",
            ctx.path(MANIFEST).display()
        )));
    }
    Ok((manifest, points))
}

/// Stable digest of everything an end-to-end valuation depends on, used to
/// keep cache files from different settings apart.
fn fingerprint(env: &EnvSpec, points: &[TrainingPoint], config: &EndToEndValuationConfig) -> u64 {
    let text = serde_json::to_string(&(env, points, config)).expect("fingerprint input serializes");
    text.bytes().fold(0x5eed, |h, b| seed::mix64(h ^ b as u64))
}

fn valuation(ctx: &Context, env: &EnvSpec, points: &[TrainingPoint], optimizer: OptimizerKind) -> CliResult<EndToEndValuation> {
    Ok(EndToEndValuation::new(env.clone(), points, ctx.config.valuation_config(optimizer))?)
}

pub fn shapley(ctx: &Context) -> CliResult<()> {
    let (manifest, points) = dataset(ctx)?;
    let algo = ctx.config.algo_params();
    let mut columns = Vec::new();
    for &optimizer in &ctx.config.shapley.optimizers {
        let inner = valuation(ctx, &manifest.env, &points, optimizer)?;
        let key = fingerprint(&manifest.env, &points, inner.config());
        let store_path = ctx.path(CACHE_DIR).join(format!("{optimizer}-{key:016x}.jsonl"));
        std::fs::create_dir_all(ctx.path(CACHE_DIR)).map_err(|e| CliError::io(&ctx.path(CACHE_DIR), e))?;
        let v = cached(inner, Some(ValuationStore::open(&store_path)?));
        let report = action_shapley_report(&v, points.len(), &algo)?;
        if let Some(e) = v.take_write_error() {
            return Err(e.into());
        }
        eprintln!(
            "{optimizer}: {} subset evaluations ({} computed, rest from cache)",
            report.total_evaluations(),
            v.computed()
        );
        columns.push(ShapleyColumn { optimizer, report });
    }
    let (format, version) = header("action-shapley-shapley");
    let file = ShapleyFile {
        format,
        version,
        seed: ctx.config.seed,
        point_ids: manifest.points.iter().map(|p| p.id.clone()).collect(),
        algo,
        columns,
    };
    write_json(&ctx.path(SHAPLEY), &file)?;
    note(&ctx.path(SHAPLEY));
    let table = shapley_table(&manifest, &file);
    write_file(&ctx.path(SHAPLEY_TABLE), table.as_bytes())?;
    note(&ctx.path(SHAPLEY_TABLE));
    print!("{table}");
    Ok(())
}

fn shapley_file(ctx: &Context) -> CliResult<ShapleyFile> {
    let file: ShapleyFile = read_json(&ctx.out, SHAPLEY, "action-shapley-shapley", "shapley")?;
    if file.point_ids.len() != ctx.env.n_points() || file.seed != ctx.config.seed {
        return Err(CliError::Missing(format!(
            "{} does not match the current config; rerun `shapley`",
            ctx.path(SHAPLEY).display()
        )));
    }
    Ok(file)
}

/// Per-point φ in one column per optimizer, with θ and effort underneath.
pub fn shapley_table(manifest: &Manifest, file: &ShapleyFile) -> String {
    let env = &manifest.env;
    let mut out = String::new();
    let _ = writeln!(out, "Action Shapley values: {} ({})", env.name, env.family);
    let _ = writeln!(
        out,
        "epsilon = {}, min cardinality = {}, seed = {}, series length = {}",
        file.algo.epsilon, file.algo.min_cardinality, file.seed, manifest.series_len
    );
    let _ = writeln!(out);
    let mut head = format!("{:<6}", "id");
    for label in &env.action_labels {
        let _ = write!(head, "{label:>12}");
    }
    for col in &file.columns {
        let _ = write!(head, "{:>16}", col.optimizer.label());
    }
    let _ = writeln!(out, "{head}");
    let _ = writeln!(out, "{}", "-".repeat(head.len()));
    for (i, entry) in manifest.points.iter().enumerate() {
        let _ = write!(out, "{:<6}", entry.id);
        for v in &entry.config {
            let _ = write!(out, "{v:>12}");
        }
        for col in &file.columns {
            let p = &col.report.per_point[i];
            let cell = match p.phi {
                Some(phi) => format!("{phi:.4}"),
                None => "indispensable".to_string(),
            };
            let _ = write!(out, "{cell:>16}");
        }
        let _ = writeln!(out);
    }
    let _ = writeln!(out, "{}", "-".repeat(head.len()));
    let pad = 6 + 12 * env.action_labels.len();
    let rows: [(&str, fn(&ShapleyReport) -> String); 3] = [
        ("global theta", |r| r.global_theta.to_string()),
        ("P_comp", |r| format!("{:.1}%", 100.0 * r.p_comp)),
        ("evaluations", |r| r.total_evaluations().to_string()),
    ];
    for (name, cell) in rows {
        let _ = write!(out, "{name:<pad$}");
        for col in &file.columns {
            let _ = write!(out, "{:>16}", cell(&col.report));
        }
        let _ = writeln!(out);
    }
    out
}

fn members(ids: &[String], mask: &SubsetMask) -> String {
    mask.members().map(|i| ids[i].as_str()).collect::<Vec<_>>().join(",")
}

pub fn select(ctx: &Context) -> CliResult<()> {
    let file = shapley_file(ctx)?;
    let optimizer = ctx.config.validation.optimizer;
    let report = &file.column(optimizer)?.report;
    let (format, version) = header("action-shapley-selection");
    let sel = SelectionFile {
        format,
        version,
        optimizer,
        point_ids: file.point_ids.clone(),
        global_theta: report.global_theta,
        indispensable: report.indispensable(),
        best: select_best(report)?,
        worst: select_worst(report)?,
    };
    write_json(&ctx.path(SELECTION), &sel)?;
    note(&ctx.path(SELECTION));
    print!("{}", selection_text(&sel));
    Ok(())
}

fn selection_text(sel: &SelectionFile) -> String {
    let mut out = String::new();
    let ids = &sel.point_ids;
    let ind: Vec<&str> = sel.indispensable.iter().map(|&i| ids[i].as_str()).collect();
    let _ = writeln!(out, "selection by {} (global theta {})", sel.optimizer.label(), sel.global_theta);
    let _ = writeln!(out, "indispensable: {}", if ind.is_empty() { "none".into() } else { ind.join(",") });
    let row = |out: &mut String, name: &str, s: &SelectionOutcome| {
        let _ = writeln!(
            out,
            "{name:<6} {{{}}}  mean phi {:.4}  candidates {}",
            members(ids, &s.chosen),
            s.avg_phi,
            s.choice_set_size
        );
    };
    row(&mut out, "best", &sel.best);
    row(&mut out, "worst", &sel.worst);
    out
}

/// Share of random agents in one episode scoring strictly below the best.
fn beaten_in(record: &action_shapley::selection::EpisodeRecord) -> Option<f64> {
    if record.randoms.is_empty() {
        return None;
    }
    let b = rank(record.best_j);
    let beaten = record.randoms.iter().filter(|r| rank(r.j) < b).count();
    Some(beaten as f64 / record.randoms.len() as f64)
}

fn cell(j: Option<f64>) -> String {
    j.map_or_else(|| "fail".to_string(), |v| format!("{v:?}"))
}

pub fn run_validation(ctx: &Context) -> CliResult<()> {
    let file = shapley_file(ctx)?;
    let (manifest, points) = dataset(ctx)?;
    let v = &ctx.config.validation;
    let report = &file.column(v.optimizer)?.report;
    let val = valuation(ctx, &manifest.env, &points, v.optimizer)?;
    let scorer = EndToEndScorer { valuation: &val, mode: v.mode };
    let summary = validate(report, &scorer, v.episodes, v.randoms_per_episode, seed::derive(ctx.config.seed, 2))?;
    let baseline = ctx.baseline.then(|| {
        let mask = SubsetMask::full(points.len()).expect("point count checked by config");
        let j: Vec<Option<f64>> = summary.episodes.iter().map(|e| scorer.score(&mask, e.seed).score()).collect();
        let ok: Vec<f64> = j.iter().flatten().copied().collect();
        let mean_j = (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64);
        Baseline { mask, j, mean_j }
    });
    let (format, version) = header("action-shapley-validation");
    let vf = ValidationFile {
        format,
        version,
        optimizer: v.optimizer,
        point_ids: file.point_ids.clone(),
        summary,
        baseline,
    };
    write_json(&ctx.path(VALIDATION), &vf)?;
    note(&ctx.path(VALIDATION));
    write_file(&ctx.path(VALIDATION_TABLE), validation_csv(&vf).as_bytes())?;
    note(&ctx.path(VALIDATION_TABLE));

    let s = &vf.summary;
    let rewards = svg::line_chart(
        &format!("Cumulative reward per episode: {}", manifest.env.name),
        "episode",
        "cumulative reward J",
        &[
            svg::Series { name: "best", color: "#228833", values: s.episodes.iter().map(|e| e.best_j).collect() },
            svg::Series { name: "worst", color: "#cc3311", values: s.episodes.iter().map(|e| e.worst_j).collect() },
            svg::Series { name: "best of random", color: "#777777", values: s.best_of_random() },
        ],
    );
    write_file(&ctx.path(CHART_REWARDS), rewards.as_bytes())?;
    note(&ctx.path(CHART_REWARDS));
    let fractions: Vec<f64> = s.episodes.iter().map(|e| beaten_in(e).unwrap_or(0.0)).collect();
    let beaten = svg::fraction_chart(
        &format!("Random agents beaten by the best agent: {}", manifest.env.name),
        "episode",
        "fraction beaten",
        &fractions,
        0.5,
    );
    write_file(&ctx.path(CHART_BEATEN), beaten.as_bytes())?;
    note(&ctx.path(CHART_BEATEN));

    let text = validation_text(&vf);
    write_file(&ctx.path(VALIDATION_SUMMARY), text.as_bytes())?;
    note(&ctx.path(VALIDATION_SUMMARY));
    print!("{text}");
    Ok(())
}

/// One row per episode. Failed agents are written as `fail`.
pub fn validation_csv(vf: &ValidationFile) -> String {
    let s = &vf.summary;
    let k = s.episodes.first().map_or(0, |e| e.randoms.len());
    let mut out = String::from("# action-shapley validation v1\n");
    out.push_str("episode,seed,best,worst,best_of_random");
    for r in 1..=k {
        let _ = write!(out, ",random_{r}");
    }
    out.push_str(",beaten");
    if vf.baseline.is_some() {
        out.push_str(",baseline");
    }
    out.push('\n');
    for (i, e) in s.episodes.iter().enumerate() {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            e.episode + 1,
            e.seed,
            cell(e.best_j),
            cell(e.worst_j),
            cell(e.best_of_random())
        );
        for r in &e.randoms {
            let _ = write!(out, ",{}", cell(r.j));
        }
        let _ = write!(out, ",{}", beaten_in(e).map_or_else(String::new, |f| format!("{f:?}")));
        if let Some(b) = &vf.baseline {
            let _ = write!(out, ",{}", cell(b.j[i]));
        }
        out.push('\n');
    }
    out
}

fn validation_text(vf: &ValidationFile) -> String {
    let s = &vf.summary;
    let ids = &vf.point_ids;
    let n = s.episodes.len();
    let met = |xs: &mut dyn Iterator<Item = Option<f64>>| xs.filter(Option::is_some).count();
    let fmt_j = |j: Option<f64>| j.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
    let bor = s.best_of_random();
    let bor_ok: Vec<f64> = bor.iter().flatten().copied().collect();
    let bor_mean = (!bor_ok.is_empty()).then(|| bor_ok.iter().sum::<f64>() / bor_ok.len() as f64);

    let mut out = String::new();
    let _ = writeln!(out, "validation over {n} episodes, selection by {}", vf.optimizer.label());
    let _ = writeln!(out, "{:<16}{:<24}{:>12}{:>10}", "agent", "points", "mean J", "goal met");
    let mut row = |name: &str, pts: String, j: Option<f64>, ok: usize| {
        let _ = writeln!(out, "{name:<16}{pts:<24}{:>12}{:>10}", fmt_j(j), format!("{ok}/{n}"));
    };
    row("best", members(ids, &s.best.chosen), s.best_j, met(&mut s.episodes.iter().map(|e| e.best_j)));
    row("worst", members(ids, &s.worst.chosen), s.worst_j, met(&mut s.episodes.iter().map(|e| e.worst_j)));
    row("best of random", "-".into(), bor_mean, met(&mut bor.iter().copied()));
    if let Some(b) = &vf.baseline {
        row("baseline (all)", members(ids, &b.mask), b.mean_j, met(&mut b.j.iter().copied()));
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "best >= worst in {}/{n} episodes", s.best_ge_worst);
    let _ = writeln!(out, "random agents beaten by best: {:.3}", s.fraction_beaten);
    let _ = writeln!(out, "random agents outperforming best: {:.3}", s.fraction_outperforming);
    out
}

pub fn report(ctx: &Context) -> CliResult<()> {
    let file = shapley_file(ctx)?;
    let manifest: Manifest = read_json(&ctx.out, MANIFEST, "action-shapley-dataset", "generate")?;
    let optimizer = ctx.config.validation.optimizer;
    let col = &file.column(optimizer)?.report;
    let (format, version) = header("action-shapley-selection");
    let sel = SelectionFile {
        format,
        version,
        optimizer,
        point_ids: file.point_ids.clone(),
        global_theta: col.global_theta,
        indispensable: col.indispensable(),
        best: select_best(col)?,
        worst: select_worst(col)?,
    };
    let mut out = String::new();
    let _ = writeln!(out, "# Action Shapley report: {}\n", manifest.env.name);
    let _ = writeln!(out, "## Shapley values\n\n```\n{}```\n", shapley_table(&manifest, &file));
    let _ = writeln!(out, "## Selection\n\n```\n{}```\n", selection_text(&sel));
    if ctx.path(VALIDATION).exists() {
        let vf: ValidationFile = read_json(&ctx.out, VALIDATION, "action-shapley-validation", "validate")?;
        let _ = writeln!(out, "## Validation\n\n```\n{}```\n", validation_text(&vf));
        let _ = writeln!(out, "![cumulative reward](validation/rewards.svg)\n");
        let _ = writeln!(out, "![beaten fraction](validation/beaten.svg)");
    } else {
        let _ = writeln!(out, "## Validation\n\nNot run yet.");
    }
    write_file(&ctx.path(REPORT), out.as_bytes())?;
    note(&ctx.path(REPORT));
    print!("{out}");
    Ok(())
}

/// Effective configuration as TOML.
pub fn print_config(config: &RunConfig) -> String {
    config.to_toml()
}
