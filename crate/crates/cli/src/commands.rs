//! Subcommand implementations. Every command is deterministic given its
//! inputs and seeds; all randomness flows through explicitly seeded streams
//! and no report contains wall-clock data.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use selfsort_core::model::{
    generate_world_with, validate_world, ExtremaPolicy, Sampler, SourcePolicy, ValidationReport,
    WorldSpec,
};
use selfsort_core::oracle::{self, reference_sort};
use selfsort_core::outcome::LearnedModel;
use selfsort_core::partition::SampleMatrix;
use selfsort_core::pipeline::{
    learn_model, learn_model_from_instances, LearnConfig, PipelineError, STREAM_EVAL,
};
use selfsort_core::sorter::sort_instance;
use selfsort_core::stats::{
    bucket_occupancy_stats, plugin_entropy, tail_diagnostic, DescentOutcome, RunReport,
};

use crate::formats::{self, FormatError};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    /// Input failed validation (bad file, bad parameters, infeasible
    /// generation, size mismatch). Exit code 2.
    Validation(String),
    /// A sorted instance disagreed with the reference sort. Exit code 3.
    OracleMismatch(String),
    /// Anything else. Exit code 1.
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Other(_) => 1,
            CliError::Validation(_) => 2,
            CliError::OracleMismatch(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage: {msg}"),
            CliError::Validation(msg) => write!(f, "validation: {msg}"),
            CliError::OracleMismatch(msg) => write!(f, "oracle mismatch: {msg}"),
            CliError::Other(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

// ── Run configuration ─────────────────────────────────────────────────

/// Harness configuration; TOML or JSON on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub n: u32,
    pub g: u32,
    pub mu: u32,
    pub sigma: u32,
    /// World-generation seed.
    pub seed: u64,
    /// Source family: `mixed`, `continuous`, `gaussian`, `pointmass`, or
    /// `discrete:<K>`.
    pub sources: String,
    /// `up-to` or `exact` extrema per generated function.
    pub extrema: String,
    /// Outcome-sampling multiplier in (0, 1].
    pub rho: f64,
    /// Fresh instances sorted by `bench`/`diagnose`.
    pub m_eval: u32,
    /// Learning-phase draw seed.
    pub learn_seed: u64,
    /// Evaluation draw seed.
    pub eval_seed: u64,
    pub stat_mu: Option<u32>,
    pub partition_rows: Option<u32>,
    pub t_override: Option<u64>,
    /// Landmark merge width override (default ceil(log2 n)).
    pub lambda: Option<u32>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 16,
            g: 4,
            mu: 1,
            sigma: 2,
            seed: 42,
            sources: "mixed".into(),
            extrema: "up-to".into(),
            rho: 1.0,
            m_eval: 200,
            learn_seed: 1,
            eval_seed: 2,
            stat_mu: None,
            partition_rows: None,
            t_override: None,
            lambda: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config: {e}")))?;
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("bad JSON config: {e}")))
        } else {
            toml::from_str(&text)
                .map_err(|e| CliError::Validation(format!("bad TOML config: {e}")))
        }
    }

    fn source_policy(&self) -> Result<SourcePolicy, CliError> {
        let s = self.sources.as_str();
        if let Some(k) = s.strip_prefix("discrete:") {
            let atoms: u32 = k
                .parse()
                .map_err(|_| CliError::Validation(format!("bad source spec '{s}'")))?;
            return Ok(SourcePolicy::Discrete { atoms });
        }
        match s {
            "mixed" => Ok(SourcePolicy::Mixed),
            "continuous" => Ok(SourcePolicy::Continuous),
            "gaussian" => Ok(SourcePolicy::Gaussian),
            "pointmass" => Ok(SourcePolicy::PointMass),
            _ => Err(CliError::Validation(format!("bad source spec '{s}'"))),
        }
    }

    fn extrema_policy(&self) -> Result<ExtremaPolicy, CliError> {
        match self.extrema.as_str() {
            "up-to" => Ok(ExtremaPolicy::UpTo),
            "exact" => Ok(ExtremaPolicy::Exact),
            other => Err(CliError::Validation(format!("bad extrema policy '{other}'"))),
        }
    }

    fn learn_config(&self) -> LearnConfig {
        LearnConfig {
            stat_mu: self.stat_mu,
            partition_rows: self.partition_rows.map(|r| r as usize),
            lambda_override: self.lambda.map(|l| l as usize),
            rho: self.rho,
            t_override: self.t_override,
            ..LearnConfig::default()
        }
    }
}

// ── generate ──────────────────────────────────────────────────────────

#[derive(Serialize)]
struct ValidationDoc {
    format: &'static str,
    version: u32,
    valid: bool,
    function_extrema: Vec<(usize, u32, u32)>,
    pair_intersections: Vec<(usize, u32, u32, Option<u32>)>,
    violations: Vec<String>,
}

fn validation_doc(report: &ValidationReport) -> ValidationDoc {
    ValidationDoc {
        format: "selfsort-validation",
        version: 1,
        valid: report.is_valid(),
        function_extrema: report
            .function_extrema
            .iter()
            .map(|f| (f.group, f.member, f.extrema))
            .collect(),
        pair_intersections: report
            .pair_intersections
            .iter()
            .map(|p| (p.group, p.member_a, p.member_b, p.count))
            .collect(),
        violations: report.violations.iter().map(|v| v.to_string()).collect(),
    }
}

pub fn cmd_generate(
    config: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let mut spec = WorldSpec::new(cfg.n, cfg.g, cfg.mu, cfg.sigma, seed.unwrap_or(cfg.seed));
    spec.sources = cfg.source_policy()?;
    spec.extrema = cfg.extrema_policy()?;
    let world = generate_world_with(&spec)
        .map_err(|e| CliError::Validation(format!("generation failed: {e}")))?;
    let report = validate_world(&world, world.mu, world.sigma);
    formats::save_world(&out.join("world.json"), &world)?;
    formats::write_json(&out.join("validation.json"), &validation_doc(&report))?;
    if !report.is_valid() {
        return Err(CliError::Validation("generated world failed validation".into()));
    }
    println!("world written to {}", out.join("world.json").display());
    Ok(())
}

// ── learn ─────────────────────────────────────────────────────────────

pub fn cmd_learn(
    world_path: Option<&Path>,
    instances_path: Option<&Path>,
    out: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
    rho: Option<f64>,
) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(rho) = rho {
        cfg.rho = rho;
    }
    let learn_cfg = cfg.learn_config();
    let model = match (world_path, instances_path) {
        (Some(world_path), None) => {
            let world = formats::load_world(world_path)?;
            let report = validate_world(&world, world.mu, world.sigma);
            if !report.is_valid() {
                return Err(CliError::Validation(format!(
                    "world failed validation: {}",
                    report.violations[0]
                )));
            }
            learn_model(&world, seed.unwrap_or(cfg.learn_seed), &learn_cfg)?.0
        }
        (None, Some(instances_path)) => {
            let (n, instances) = formats::load_instances(instances_path)?;
            learn_model_from_instances(n, cfg.mu, cfg.sigma, &instances, &learn_cfg)?.0
        }
        _ => {
            return Err(CliError::Usage(
                "learn needs exactly one of --world or --instances".into(),
            ))
        }
    };
    formats::save_model(out, &model)?;
    println!("model written to {}", out.display());
    Ok(())
}

// ── learn-partition ───────────────────────────────────────────────────

pub fn cmd_learn_partition(
    samples: &Path,
    mu: u32,
    out: Option<&Path>,
    matrix: bool,
) -> Result<(), CliError> {
    let (n, instances) = formats::load_instances(samples)?;
    let rows: Vec<Vec<f64>> = instances.into_iter().map(|i| i.values).collect();
    let row_count = rows.len();
    let matrix_input = SampleMatrix::new(n, rows)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let budget = Default::default();
    let result = if matrix {
        selfsort_core::partition::learn_partition_with_matrix(&matrix_input, mu, &budget)
    } else {
        selfsort_core::partition::learn_partition(&matrix_input, mu, &budget)
    }
    .map_err(|e| CliError::Other(e.to_string()))?;
    let doc = formats::partition_to_doc(&result, mu, row_count);
    match out {
        Some(path) => {
            formats::write_json(path, &doc)?;
            println!("partition written to {}", path.display());
        }
        None => println!("{}", serde_json::to_string_pretty(&doc).map_err(FormatError::from)?),
    }
    Ok(())
}

// ── sort ──────────────────────────────────────────────────────────────

#[derive(Serialize)]
struct RunReportDoc {
    seq: u64,
    total_comparisons: u64,
    descent_comparisons: u64,
    fallback_comparisons: u64,
    merge_comparisons: u64,
    fast_groups: u32,
    fallback_groups: u32,
    bucket_sublists: Vec<u32>,
}

fn report_doc(r: &RunReport) -> RunReportDoc {
    RunReportDoc {
        seq: r.seq,
        total_comparisons: r.total_comparisons(),
        descent_comparisons: r.descent_comparisons,
        fallback_comparisons: r.fallback_comparisons,
        merge_comparisons: r.merge_comparisons,
        fast_groups: r.fast_groups,
        fallback_groups: r.fallback_groups,
        bucket_sublists: r.bucket_sublists.clone(),
    }
}

pub fn cmd_sort(
    model_path: &Path,
    instance_path: &Path,
    report_path: Option<&Path>,
) -> Result<(), CliError> {
    let model = formats::load_model(model_path)?;
    let (n, instances) = formats::load_instances(instance_path)?;
    if n != model.n() {
        return Err(CliError::Validation(format!(
            "instance file is for n={n}, model for n={}",
            model.n()
        )));
    }
    let mut reports = Vec::new();
    let mut out = String::new();
    for (seq, inst) in instances.iter().enumerate() {
        let result = sort_instance(&model, inst, seq as u64)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        if seq > 0 {
            out.push('\n');
        }
        for rank in &result.ranks {
            writeln!(out, "{rank}").expect("string write");
        }
        reports.push(result.report);
    }
    print!("{out}");
    if let Some(path) = report_path {
        let docs: Vec<RunReportDoc> = reports.iter().map(report_doc).collect();
        formats::write_json(path, &docs)?;
    }
    Ok(())
}

// ── bench ─────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Serialize)]
struct BenchSummaryDoc {
    format: &'static str,
    version: u32,
    n: u32,
    runs: u32,
    mean_total_comparisons: f64,
    mean_descent_comparisons: f64,
    mean_fallback_comparisons: f64,
    mean_merge_comparisons: f64,
    fast_rate: f64,
    fallback_rate: f64,
    /// Plug-in entropy of the observed output rankings.
    ranking_entropy_plugin_bits: f64,
    /// Exact ranking entropy when the world is enumerable within budget.
    #[serde(skip_serializing_if = "Option::is_none")]
    ranking_entropy_exact_bits: Option<f64>,
    /// Sum of per-group plug-in outcome entropies from the learned tries.
    outcome_entropy_plugin_sum_bits: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    outcome_entropy_exact_sum_bits: Option<f64>,
    /// Fitted constant: mean comparisons / (plug-in ranking entropy + n).
    cost_constant: f64,
    occupancy_nonempty_mean: f64,
    occupancy_max_sublists: u32,
    /// Max over fast descents of comparisons - (3*(n_k + log2(1/q)) + 8).
    descent_bound_max_slack: f64,
    descent_bound_violations: u64,
}

#[derive(Serialize)]
struct MismatchDoc {
    format: &'static str,
    version: u32,
    seq: u64,
    values: Vec<f64>,
    expected_ranks: Vec<u32>,
    produced_ranks: Vec<u32>,
}

fn runs_csv(reports: &[RunReport]) -> String {
    let mut out = String::from(
        "run,total,descent,fallback,merge,fast_groups,fallback_groups,nonempty_buckets,max_sublists\n",
    );
    for r in reports {
        let nonempty = r.bucket_sublists.iter().filter(|&&c| c > 0).count();
        let max = r.bucket_sublists.iter().max().copied().unwrap_or(0);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.seq,
            r.total_comparisons(),
            r.descent_comparisons,
            r.fallback_comparisons,
            r.merge_comparisons,
            r.fast_groups,
            r.fallback_groups,
            nonempty,
            max
        )
        .expect("string write");
    }
    out
}

/// Shared evaluation loop: draws fresh instances, sorts them, cross-checks
/// every output against the reference sort, and aborts before any report is
/// written when a mismatch appears.
fn evaluate(
    world: &selfsort_core::model::World,
    model: &LearnedModel,
    runs: u32,
    seed: u64,
    out: &Path,
) -> Result<Vec<RunReport>, CliError> {
    let sampler = Sampler::new(world).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_EVAL);
    let mut reports = Vec::with_capacity(runs as usize);
    for seq in 0..runs {
        let inst = sampler.draw(&mut rng);
        let result = sort_instance(model, &inst, seq as u64)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        let expected = reference_sort(&inst.values);
        if result.ranks != expected {
            let doc = MismatchDoc {
                format: "selfsort-mismatch",
                version: 1,
                seq: seq as u64,
                values: inst.values.clone(),
                expected_ranks: expected,
                produced_ranks: result.ranks.clone(),
            };
            formats::write_json(&out.join("mismatch.json"), &doc)?;
            return Err(CliError::OracleMismatch(format!(
                "run {seq} disagreed with the reference sort; instance saved to mismatch.json"
            )));
        }
        reports.push(result.report);
    }
    Ok(reports)
}

pub fn cmd_bench(
    world_path: &Path,
    model_path: &Path,
    out: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
    runs: Option<u32>,
    format: ReportFormat,
) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let world = formats::load_world(world_path)?;
    let model = formats::load_model(model_path)?;
    if model.n() != world.n as usize {
        return Err(CliError::Validation(format!(
            "model is for n={}, world for n={}",
            model.n(),
            world.n
        )));
    }
    let runs = runs.unwrap_or(cfg.m_eval);
    let reports = evaluate(&world, &model, runs, seed.unwrap_or(cfg.eval_seed), out)?;

    // Entropy estimates. Plug-in ranking entropy re-derives the observed
    // permutations from the reports' seeds deterministically? No: recompute
    // from counts collected during evaluation instead.
    let sampler = Sampler::new(&world).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed.unwrap_or(cfg.eval_seed));
    rng.set_stream(STREAM_EVAL);
    let mut perm_counts: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
    for _ in 0..runs {
        let inst = sampler.draw(&mut rng);
        *perm_counts.entry(reference_sort(&inst.values)).or_insert(0) += 1;
    }
    let perm_freq: Vec<u64> = perm_counts.into_values().collect();
    let ranking_plugin = plugin_entropy(&perm_freq)
        .map(|e| e.bits)
        .unwrap_or(0.0);

    let outcome_plugin_sum: f64 = model
        .groups
        .iter()
        .map(|g| {
            let counts: Vec<u64> = g.trie.leaves().iter().map(|(_, c)| *c).collect();
            plugin_entropy(&counts).map(|e| e.bits).unwrap_or(0.0)
        })
        .sum();

    const ENUM_BUDGET: u64 = 1_000_000;
    let ranking_exact = selfsort_core::stats::exact_ranking_entropy(&world, ENUM_BUDGET).ok();
    let outcome_exact_sum = if world.all_discrete() {
        world
            .groups
            .iter()
            .enumerate()
            .map(|(g, _)| selfsort_core::stats::exact_outcome_entropy(&world, g, &model.vlist))
            .collect::<Result<Vec<_>, _>>()
            .ok()
            .map(|v| v.iter().sum())
    } else {
        None
    };

    let total: u64 = reports.iter().map(|r| r.total_comparisons()).sum();
    let mean_total = total as f64 / runs as f64;
    let mean = |f: fn(&RunReport) -> u64| -> f64 {
        reports.iter().map(f).sum::<u64>() as f64 / runs as f64
    };
    let groups_total: u64 = reports
        .iter()
        .map(|r| (r.fast_groups + r.fallback_groups) as u64)
        .sum();
    let fast_total: u64 = reports.iter().map(|r| r.fast_groups as u64).sum();

    let mut bound_violations = 0u64;
    let mut max_slack = f64::NEG_INFINITY;
    for r in &reports {
        for d in &r.descents {
            if let DescentOutcome::Fast { leaf_count, total } = d.outcome {
                let q = leaf_count as f64 / total as f64;
                let bound = 3.0 * (d.group_size as f64 + (1.0 / q).log2()) + 8.0;
                let slack = d.comparisons as f64 - bound;
                max_slack = max_slack.max(slack);
                if slack > 0.0 {
                    bound_violations += 1;
                }
            }
        }
    }

    let occupancy = bucket_occupancy_stats(&reports);
    let summary = BenchSummaryDoc {
        format: "selfsort-bench-summary",
        version: 1,
        n: world.n,
        runs,
        mean_total_comparisons: mean_total,
        mean_descent_comparisons: mean(|r| r.descent_comparisons),
        mean_fallback_comparisons: mean(|r| r.fallback_comparisons),
        mean_merge_comparisons: mean(|r| r.merge_comparisons),
        fast_rate: fast_total as f64 / groups_total.max(1) as f64,
        fallback_rate: 1.0 - fast_total as f64 / groups_total.max(1) as f64,
        ranking_entropy_plugin_bits: ranking_plugin,
        ranking_entropy_exact_bits: ranking_exact,
        outcome_entropy_plugin_sum_bits: outcome_plugin_sum,
        outcome_entropy_exact_sum_bits: outcome_exact_sum,
        cost_constant: mean_total / (ranking_plugin + world.n as f64),
        occupancy_nonempty_mean: occupancy.nonempty_mean,
        occupancy_max_sublists: occupancy.max_sublists,
        descent_bound_max_slack: if max_slack.is_finite() { max_slack } else { 0.0 },
        descent_bound_violations: bound_violations,
    };

    fs::create_dir_all(out)?;
    formats::write_json(&out.join("summary.json"), &summary)?;
    match format {
        ReportFormat::Csv => fs::write(out.join("runs.csv"), runs_csv(&reports))?,
        ReportFormat::Json => {
            let docs: Vec<RunReportDoc> = reports.iter().map(report_doc).collect();
            formats::write_json(&out.join("runs.json"), &docs)?;
        }
    }
    println!(
        "bench: {} runs, mean comparisons {:.1}, fast rate {:.3}, reports in {}",
        runs,
        summary.mean_total_comparisons,
        summary.fast_rate,
        out.display()
    );
    Ok(())
}

// ── diagnose ──────────────────────────────────────────────────────────

#[derive(Serialize)]
struct TailCheckDoc {
    outcome: u32,
    probability: f64,
    bound: f64,
    hits: u32,
    rate: f64,
    margin: f64,
    violated: bool,
}

#[derive(Serialize)]
struct GroupDiagnosticsDoc {
    group: usize,
    enumerable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples_per_rep: Option<u64>,
    checks: Vec<TailCheckDoc>,
}

#[derive(Serialize)]
struct DiagnosticsDoc {
    format: &'static str,
    version: u32,
    reps: u32,
    concentration: Vec<GroupDiagnosticsDoc>,
    occupancy_nonempty_mean: f64,
    occupancy_per_bucket_mean: Vec<f64>,
    occupancy_max_sublists: u32,
    all_within_bound: bool,
}

pub fn cmd_diagnose(
    world_path: &Path,
    model_path: &Path,
    out: &Path,
    config: Option<&Path>,
    reps: Option<u32>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let world = formats::load_world(world_path)?;
    let model = formats::load_model(model_path)?;
    if model.n() != world.n as usize {
        return Err(CliError::Validation(format!(
            "model is for n={}, world for n={}",
            model.n(),
            world.n
        )));
    }
    let reps = reps.unwrap_or(1000);
    let seed = seed.unwrap_or(cfg.eval_seed);
    let t = model.params.t_used;

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(5);
    let mut concentration = Vec::new();
    let mut all_ok = true;
    for (g, _) in world.groups.iter().enumerate() {
        match oracle::enumerate_outcomes(&world, g, &model.vlist) {
            Ok(atlas) => {
                let report = tail_diagnostic(
                    &atlas.atom_outcome,
                    atlas.codes.len(),
                    t,
                    reps,
                    0.05,
                    &mut rng,
                );
                all_ok &= report.all_within_bound();
                concentration.push(GroupDiagnosticsDoc {
                    group: g,
                    enumerable: true,
                    samples_per_rep: Some(report.samples_per_rep),
                    checks: report
                        .checks
                        .iter()
                        .map(|c| TailCheckDoc {
                            outcome: c.outcome,
                            probability: c.probability,
                            bound: c.bound,
                            hits: c.hits,
                            rate: c.rate,
                            margin: c.margin,
                            violated: c.violated,
                        })
                        .collect(),
                });
            }
            Err(_) => concentration.push(GroupDiagnosticsDoc {
                group: g,
                enumerable: false,
                samples_per_rep: None,
                checks: Vec::new(),
            }),
        }
    }

    let reports = evaluate(&world, &model, cfg.m_eval, seed, out)?;
    let occupancy = bucket_occupancy_stats(&reports);
    let doc = DiagnosticsDoc {
        format: "selfsort-diagnostics",
        version: 1,
        reps,
        concentration,
        occupancy_nonempty_mean: occupancy.nonempty_mean,
        occupancy_per_bucket_mean: occupancy.per_bucket_mean,
        occupancy_max_sublists: occupancy.max_sublists,
        all_within_bound: all_ok,
    };
    formats::write_json(&out.join("diagnostics.json"), &doc)?;
    println!(
        "diagnostics in {} (concentration bound {}, mean nonempty occupancy {:.2})",
        out.display(),
        if all_ok { "respected" } else { "VIOLATED" },
        occupancy.nonempty_mean
    );
    Ok(())
}
