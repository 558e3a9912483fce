//! Experiment driver: episodes, suites and reports.
//!
//! A suite runs one episode per (algorithm, agent count, instance, repeat)
//! cell. Every cell derives its own seeds from the master seed, so a cell's
//! metrics do not depend on which other cells are in the suite. Timing is the
//! only nondeterministic column.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_world::World;
use crate::map_forge::{select_hard_instances, Instance, MapGenerator};
use crate::policies::{joint_policy_act, PolicyContext, PolicyKind};
use crate::seeding::{derive_seed, tag};
use crate::tree_search::{MctsConfig, Planner, SearchMode};

pub const DEFAULT_K_MAX: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Joint,
    Mamcts,
    SubgoalMamcts,
    #[serde(rename = "astar")]
    AStar,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Joint,
        Algorithm::Mamcts,
        Algorithm::SubgoalMamcts,
        Algorithm::AStar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Joint => "joint",
            Algorithm::Mamcts => "mamcts",
            Algorithm::SubgoalMamcts => "subgoal_mamcts",
            Algorithm::AStar => "astar",
        }
    }

    pub fn search_mode(self) -> Option<SearchMode> {
        match self {
            Algorithm::Joint => Some(SearchMode::Joint),
            Algorithm::Mamcts => Some(SearchMode::Mamcts),
            Algorithm::SubgoalMamcts => Some(SearchMode::SubgoalMamcts),
            Algorithm::AStar => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == norm || (norm == "a_star" && *a == Algorithm::AStar))
            .ok_or_else(|| Error::Validation(format!("unknown algorithm {s:?}")))
    }
}

/// Partial MCTS settings applied over the per-mode defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MctsOverrides {
    pub iterations: Option<usize>,
    pub exploration_c: Option<f64>,
    pub gamma: Option<f64>,
    /// Rollout limit in joint steps; 0 removes the limit.
    pub sim_depth_limit: Option<u32>,
    pub r_target: Option<f64>,
    pub r_subgoal: Option<f64>,
    pub subgoal_radius: Option<usize>,
}

impl MctsOverrides {
    pub fn apply(&self, mode: SearchMode) -> Result<MctsConfig> {
        let mut cfg = MctsConfig::for_mode(mode);
        if let Some(v) = self.iterations {
            cfg.iterations = v;
        }
        if let Some(v) = self.exploration_c {
            cfg.exploration_c = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.sim_depth_limit {
            cfg.sim_depth_limit = (v > 0).then_some(v);
        }
        if let Some(v) = self.r_target {
            cfg.r_target = v;
        }
        if let Some(v) = self.r_subgoal {
            cfg.r_subgoal = v;
        }
        if let Some(v) = self.subgoal_radius {
            cfg.subgoal_radius = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub k_max: u32,
    pub mcts: MctsOverrides,
    pub env_seed: u64,
    pub search_seed: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            k_max: DEFAULT_K_MAX,
            mcts: MctsOverrides::default(),
            env_seed: 0,
            search_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    /// 1 when every agent reached its goal.
    pub csr: u8,
    pub isr: f64,
    pub episode_length: u32,
    /// Seconds per decision, averaged over the episode.
    pub mean_decision_time: f64,
    pub reached: usize,
    pub n_agents: usize,
}

impl EpisodeMetrics {
    /// Metrics from the number of agents that reached their goal and the step
    /// count at episode end.
    pub fn from_outcome(
        reached: usize,
        n_agents: usize,
        steps: u32,
        k_max: u32,
        mean_decision_time: f64,
    ) -> Self {
        let all = reached == n_agents;
        EpisodeMetrics {
            csr: all as u8,
            isr: reached as f64 / n_agents as f64,
            episode_length: if all { steps } else { k_max },
            mean_decision_time,
            reached,
            n_agents,
        }
    }
}

enum Decider<'w> {
    Search(Box<Planner<'w>>),
    Baseline(PolicyContext),
}

/// Runs one episode to termination.
pub fn run_episode(
    instance: &Instance,
    algorithm: Algorithm,
    cfg: &EpisodeConfig,
) -> Result<EpisodeMetrics> {
    if instance.agents.is_empty() {
        return Err(Error::Validation("instance has no agents".into()));
    }
    let world = World::new(instance.map.clone(), instance.agents.clone(), cfg.k_max)?;
    let mut state = world.reset(cfg.env_seed);
    let mut decider = match algorithm.search_mode() {
        Some(mode) => {
            let mcts = cfg.mcts.apply(mode)?;
            Decider::Search(Box::new(Planner::new(
                &world,
                &state,
                mcts,
                cfg.search_seed,
            )?))
        }
        None => Decider::Baseline(PolicyContext::new(&world, cfg.search_seed)),
    };
    let policies = vec![PolicyKind::AStar; world.num_agents()];

    let mut decisions = 0u32;
    let mut decision_time = 0.0;
    while !world.is_terminal(&state) {
        let started = Instant::now();
        let joint = match &mut decider {
            Decider::Search(p) => p.plan(&state)?,
            Decider::Baseline(ctx) => joint_policy_act(&world, &state, &policies, ctx)?,
        };
        decision_time += started.elapsed().as_secs_f64();
        decisions += 1;
        world.step_mut(&mut state, &joint)?;
        match &mut decider {
            Decider::Search(p) => p.observe(&state),
            Decider::Baseline(ctx) => ctx.record(&joint, &state),
        }
    }

    // Agents are only ever deactivated on their goal.
    let reached = state.active.iter().filter(|a| !**a).count();
    let mean = if decisions == 0 {
        0.0
    } else {
        decision_time / decisions as f64
    };
    Ok(EpisodeMetrics::from_outcome(
        reached,
        world.num_agents(),
        state.step,
        cfg.k_max,
        mean,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSource {
    /// Path to a manifest; relative paths resolve against the config file.
    Manifest { path: PathBuf },
    /// Keep the `n_keep` hardest of seeds `0..n_seeds`. Instances carry
    /// `n_agents` agents (default: the largest agent count of the suite).
    Generate {
        generator: MapGenerator,
        n_seeds: usize,
        n_keep: usize,
        #[serde(default)]
        n_agents: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Jsonl,
    Csv,
    Table,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(ReportFormat::Jsonl),
            "csv" => Ok(ReportFormat::Csv),
            "table" | "text" => Ok(ReportFormat::Table),
            _ => Err(Error::Validation(format!("unknown report format {s:?}"))),
        }
    }
}

fn default_k_max() -> u32 {
    DEFAULT_K_MAX
}

fn default_repeats() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub instances: InstanceSource,
    pub algorithms: Vec<Algorithm>,
    pub agent_counts: Vec<usize>,
    #[serde(default = "default_k_max")]
    pub k_max: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub mcts: MctsOverrides,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: ReportFormat,
}

impl SuiteConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Validation(format!("suite config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Validation("no algorithms configured".into()));
        }
        if self.agent_counts.is_empty() || self.agent_counts.contains(&0) {
            return Err(Error::Validation(
                "agent counts must be non-empty and positive".into(),
            ));
        }
        if self.repeats == 0 || self.k_max == 0 {
            return Err(Error::Validation(
                "repeats and k_max must be positive".into(),
            ));
        }
        if let InstanceSource::Generate {
            n_seeds, n_keep, ..
        } = &self.instances
        {
            if *n_keep == 0 || n_keep > n_seeds {
                return Err(Error::Validation(format!(
                    "cannot keep {n_keep} of {n_seeds} seeds"
                )));
            }
        }
        for a in &self.algorithms {
            if let Some(mode) = a.search_mode() {
                self.mcts.apply(mode)?;
            }
        }
        Ok(())
    }

    /// Resolves the instance list as `(id, instance)` pairs.
    pub fn load_instances(&self) -> Result<Vec<(String, Instance)>> {
        match &self.instances {
            InstanceSource::Manifest { path } => {
                let suite = crate::io::load_suite(path)?;
                Ok(suite)
            }
            InstanceSource::Generate {
                generator,
                n_seeds,
                n_keep,
                n_agents,
            } => {
                let n = n_agents
                    .unwrap_or_else(|| self.agent_counts.iter().copied().max().unwrap_or(1));
                Ok(select_hard_instances(generator, n, *n_seeds, *n_keep)?
                    .into_iter()
                    .map(|inst| (format!("s{:04}", inst.seed), inst))
                    .collect())
            }
        }
    }
}

/// Seeds of one suite cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellSeeds {
    pub cell: u64,
    pub env: u64,
    pub search: u64,
}

impl CellSeeds {
    pub fn derive(
        master: u64,
        instance_id: &str,
        agents: usize,
        repeat: usize,
        algorithm: Algorithm,
    ) -> Self {
        let cell = derive_seed(master, &[tag(instance_id), agents as u64, repeat as u64]);
        CellSeeds {
            cell,
            env: derive_seed(cell, &[tag("env")]),
            search: derive_seed(cell, &[tag(algorithm.name())]),
        }
    }
}

/// One episode of a suite. Metric fields are empty when the episode failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub algorithm: Algorithm,
    pub agents: usize,
    pub instance_id: String,
    pub seed: u64,
    pub repeat: usize,
    pub instance_seed: u64,
    pub env_seed: u64,
    pub search_seed: u64,
    pub isr: Option<f64>,
    pub csr: Option<u8>,
    pub episode_length: Option<u32>,
    pub mean_decision_time_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub algorithm: Algorithm,
    pub agents: usize,
    pub episodes: usize,
    pub failed: usize,
    pub isr: f64,
    pub csr: f64,
    pub episode_length: f64,
    pub mean_decision_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub rows: Vec<Row>,
    pub aggregates: Vec<Aggregate>,
}

/// Per-(algorithm, agents) means over successful rows, in order of first appearance.
pub fn aggregate(rows: &[Row]) -> Vec<Aggregate> {
    let mut order: Vec<(Algorithm, usize)> = Vec::new();
    let mut groups: HashMap<(Algorithm, usize), Vec<&Row>> = HashMap::new();
    for r in rows {
        let key = (r.algorithm, r.agents);
        groups
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let members = &groups[&key];
            let ok: Vec<&&Row> = members.iter().filter(|r| r.error.is_none()).collect();
            let mean = |f: &dyn Fn(&Row) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
                }
            };
            Aggregate {
                algorithm: key.0,
                agents: key.1,
                episodes: ok.len(),
                failed: members.len() - ok.len(),
                isr: mean(&|r| r.isr.unwrap_or(0.0)),
                csr: mean(&|r| r.csr.unwrap_or(0) as f64),
                episode_length: mean(&|r| r.episode_length.unwrap_or(0) as f64),
                mean_decision_time_s: mean(&|r| r.mean_decision_time_s.unwrap_or(0.0)),
            }
        })
        .collect()
}

impl Report {
    pub fn from_rows(rows: Vec<Row>) -> Self {
        let aggregates = aggregate(&rows);
        Report { rows, aggregates }
    }

    pub fn aggregate_for(&self, algorithm: Algorithm, agents: usize) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.algorithm == algorithm && a.agents == agents)
    }
}

fn run_cell(
    instance: &Instance,
    id: &str,
    algorithm: Algorithm,
    agents: usize,
    repeat: usize,
    config: &SuiteConfig,
) -> Row {
    let seeds = CellSeeds::derive(config.seed, id, agents, repeat, algorithm);
    let outcome = instance.with_agents(agents).and_then(|inst| {
        run_episode(
            &inst,
            algorithm,
            &EpisodeConfig {
                k_max: config.k_max,
                mcts: config.mcts.clone(),
                env_seed: seeds.env,
                search_seed: seeds.search,
            },
        )
    });
    let mut row = Row {
        algorithm,
        agents,
        instance_id: id.to_string(),
        seed: seeds.cell,
        repeat,
        instance_seed: instance.seed,
        env_seed: seeds.env,
        search_seed: seeds.search,
        isr: None,
        csr: None,
        episode_length: None,
        mean_decision_time_s: None,
        error: None,
    };
    match outcome {
        Ok(m) => {
            row.isr = Some(m.isr);
            row.csr = Some(m.csr);
            row.episode_length = Some(m.episode_length);
            row.mean_decision_time_s = Some(m.mean_decision_time);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Runs every cell of the suite. `on_row` sees each row as it completes.
/// Failing episodes are recorded in their row and do not stop the suite.
pub fn run_suite(config: &SuiteConfig, mut on_row: impl FnMut(&Row)) -> Result<Report> {
    config.validate()?;
    let instances = config.load_instances()?;
    if instances.is_empty() {
        return Err(Error::Validation("suite has no instances".into()));
    }
    run_suite_on(config, &instances, &mut on_row)
}

/// Like [`run_suite`] with an already loaded instance list.
pub fn run_suite_on(
    config: &SuiteConfig,
    instances: &[(String, Instance)],
    mut on_row: impl FnMut(&Row),
) -> Result<Report> {
    config.validate()?;
    let mut rows = Vec::new();
    for &algorithm in &config.algorithms {
        for &agents in &config.agent_counts {
            for (id, instance) in instances {
                for repeat in 0..config.repeats {
                    let row = run_cell(instance, id, algorithm, agents, repeat, config);
                    on_row(&row);
                    rows.push(row);
                }
            }
        }
    }
    Ok(Report::from_rows(rows))
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum JsonLine {
    Row(Row),
    Aggregate(Aggregate),
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    algorithm: Algorithm,
    agents: usize,
    instance_id: String,
    seed: u64,
    isr: Option<f64>,
    csr: Option<u8>,
    episode_length: Option<u32>,
    mean_decision_time_s: Option<f64>,
}

pub const CSV_COLUMNS: [&str; 8] = [
    "algorithm",
    "agents",
    "instance_id",
    "seed",
    "isr",
    "csr",
    "episode_length",
    "mean_decision_time_s",
];

fn fmt_mean(v: f64, precision: usize) -> String {
    if v.is_nan() {
        "-".into()
    } else {
        format!("{v:.precision$}")
    }
}

/// Renders the report. The output depends only on the report's contents.
pub fn render_report(report: &Report, format: ReportFormat) -> Result<String> {
    if report.rows.is_empty() {
        return Err(Error::Validation("report has no rows".into()));
    }
    match format {
        ReportFormat::Jsonl => {
            let mut out = String::new();
            for r in &report.rows {
                out.push_str(&serde_json::to_string(&JsonLine::Row(r.clone()))?);
                out.push('\n');
            }
            for a in &report.aggregates {
                out.push_str(&serde_json::to_string(&JsonLine::Aggregate(a.clone()))?);
                out.push('\n');
            }
            Ok(out)
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &report.rows {
                w.serialize(CsvRow {
                    algorithm: r.algorithm,
                    agents: r.agents,
                    instance_id: r.instance_id.clone(),
                    seed: r.seed,
                    isr: r.isr,
                    csr: r.csr,
                    episode_length: r.episode_length,
                    mean_decision_time_s: r.mean_decision_time_s,
                })?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Serde(e.to_string()))
        }
        ReportFormat::Table => {
            let header = [
                "algorithm",
                "agents",
                "episodes",
                "failed",
                "ISR",
                "CSR",
                "EL",
                "time/decision (s)",
            ];
            let body: Vec<[String; 8]> = report
                .aggregates
                .iter()
                .map(|a| {
                    [
                        a.algorithm.to_string(),
                        a.agents.to_string(),
                        a.episodes.to_string(),
                        a.failed.to_string(),
                        fmt_mean(a.isr, 3),
                        fmt_mean(a.csr, 3),
                        fmt_mean(a.episode_length, 2),
                        fmt_mean(a.mean_decision_time_s, 4),
                    ]
                })
                .collect();
            let mut widths = header.map(str::len);
            for line in &body {
                for (w, cell) in widths.iter_mut().zip(line) {
                    *w = (*w).max(cell.len());
                }
            }
            let mut out = String::new();
            let mut emit = |cells: &[&str]| {
                let parts: Vec<String> = cells
                    .iter()
                    .zip(widths)
                    .enumerate()
                    .map(|(i, (c, w))| {
                        if i == 0 {
                            format!("{c:<w$}")
                        } else {
                            format!("{c:>w$}")
                        }
                    })
                    .collect();
                let _ = writeln!(out, "{}", parts.join("  ").trim_end());
            };
            emit(&header);
            for line in &body {
                emit(&line.each_ref().map(String::as_str));
            }
            Ok(out)
        }
    }
}

pub fn write_report(report: &Report, format: ReportFormat, path: &Path) -> Result<()> {
    let text = render_report(report, format)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses a JSON-lines report back into rows and stored aggregates.
pub fn parse_jsonl_report(text: &str) -> Result<Report> {
    let mut report = Report::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<JsonLine>(line) {
            Ok(JsonLine::Row(r)) => report.rows.push(r),
            Ok(JsonLine::Aggregate(a)) => report.aggregates.push(a),
            Err(e) => {
                return Err(Error::Parse {
                    line: i + 1,
                    column: e.column(),
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(report)
}

/// Parses the CSV rendering. Only the CSV columns are recovered; the other
/// row fields are zero.
pub fn parse_csv_rows(text: &str) -> Result<Vec<Row>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(Error::Validation(format!(
            "unexpected CSV header {headers:?}"
        )));
    }
    reader
        .deserialize::<CsvRow>()
        .map(|r| {
            let r = r?;
            Ok(Row {
                algorithm: r.algorithm,
                agents: r.agents,
                instance_id: r.instance_id,
                seed: r.seed,
                repeat: 0,
                instance_seed: 0,
                env_seed: 0,
                search_seed: 0,
                error: r.isr.is_none().then(|| "episode failed".to_string()),
                isr: r.isr,
                csr: r.csr,
                episode_length: r.episode_length,
                mean_decision_time_s: r.mean_decision_time_s,
            })
        })
        .collect()
}

fn same(a: f64, b: f64) -> bool {
    a == b || (a.is_nan() && b.is_nan())
}

/// Recomputes the aggregates from the raw rows and checks them against the
/// stored ones, plus the per-row metric invariants.
pub fn verify(report: &Report, k_max: Option<u32>) -> Result<()> {
    if report.rows.is_empty() {
        return Err(Error::Validation("report has no rows".into()));
    }
    for (i, r) in report.rows.iter().enumerate() {
        let (Some(isr), Some(csr), Some(el)) = (r.isr, r.csr, r.episode_length) else {
            if r.error.is_none() {
                return Err(Error::Validation(format!(
                    "row {i}: missing metrics without an error"
                )));
            }
            continue;
        };
        if !(0.0..=1.0).contains(&isr) || csr > 1 || (csr == 1) != (isr == 1.0) {
            return Err(Error::Validation(format!(
                "row {i}: inconsistent isr {isr} / csr {csr}"
            )));
        }
        if let Some(k) = k_max {
            if el > k || (csr == 0 && el != k) {
                return Err(Error::Validation(format!(
                    "row {i}: episode length {el} with k_max {k}"
                )));
            }
        }
    }
    let recomputed = aggregate(&report.rows);
    if recomputed.len() != report.aggregates.len() {
        return Err(Error::Validation(format!(
            "{} aggregate rows stored, {} recomputed",
            report.aggregates.len(),
            recomputed.len()
        )));
    }
    for (stored, fresh) in report.aggregates.iter().zip(&recomputed) {
        let matches = stored.algorithm == fresh.algorithm
            && stored.agents == fresh.agents
            && stored.episodes == fresh.episodes
            && stored.failed == fresh.failed
            && same(stored.isr, fresh.isr)
            && same(stored.csr, fresh.csr)
            && same(stored.episode_length, fresh.episode_length)
            && same(stored.mean_decision_time_s, fresh.mean_decision_time_s);
        if !matches {
            return Err(Error::Validation(format!(
                "aggregate mismatch for {} / {} agents: stored {stored:?}, recomputed {fresh:?}",
                fresh.algorithm, fresh.agents
            )));
        }
    }
    Ok(())
}
