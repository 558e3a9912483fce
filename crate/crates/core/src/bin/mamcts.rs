use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mamcts::bench::{self, Algorithm, ReportFormat, SuiteConfig};
use mamcts::io;
use mamcts::map_forge::{select_hard_instances, MapGenerator, MazeParams, RandomMapParams};
use mamcts::{Error, Result};

#[derive(Parser)]
#[command(
    name = "mamcts",
    version,
    about = "Multi-agent grid pathfinding benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance suite (maps, sidecars, manifest).
    Generate(GenerateArgs),
    /// Run a benchmark suite and write a report.
    Run(RunArgs),
    /// Recompute aggregates of a JSON-lines report and compare.
    Verify(VerifyArgs),
    /// Rank generated instances by difficulty.
    Score(ScoreArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Random,
    Maze,
}

#[derive(Args, Clone)]
struct GeneratorArgs {
    #[arg(long, value_enum, default_value = "random")]
    kind: Kind,
    /// Side length (16 for random maps, odd for mazes).
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    min_component_fill: Option<usize>,
    #[arg(long)]
    max_rooms: Option<usize>,
    #[arg(long)]
    extra_connection_probability: Option<f64>,
    /// Agents placed per instance.
    #[arg(long, default_value_t = 16)]
    n_agents: usize,
    /// Candidate seeds 0..N.
    #[arg(long, default_value_t = 200)]
    n_seeds: usize,
    /// Hardest instances kept.
    #[arg(long, default_value_t = 20)]
    n_keep: usize,
}

impl GeneratorArgs {
    fn generator(&self) -> MapGenerator {
        match self.kind {
            Kind::Random => {
                let mut p = RandomMapParams::cooperative();
                p.size = self.size.unwrap_or(p.size);
                p.density = self.density.unwrap_or(p.density);
                p.min_component_fill = self.min_component_fill.unwrap_or(p.min_component_fill);
                MapGenerator::Random(p)
            }
            Kind::Maze => {
                let mut p = MazeParams::labyrinth(self.size.unwrap_or(15));
                p.max_rooms = self.max_rooms.unwrap_or(p.max_rooms);
                p.extra_connection_probability = self
                    .extra_connection_probability
                    .unwrap_or(p.extra_connection_probability);
                p.min_component_size = self.min_component_fill.unwrap_or(p.min_component_size);
                MapGenerator::Maze(p)
            }
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    generator: GeneratorArgs,
    #[arg(long, default_value_t = bench::DEFAULT_K_MAX)]
    k_max: u32,
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// TOML suite config; its values override the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Suite manifest produced by `generate`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    generator: GeneratorArgs,
    /// Comma-separated: joint, mamcts, subgoal_mamcts, astar.
    #[arg(long, value_delimiter = ',')]
    algorithms: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    agents: Vec<usize>,
    #[arg(long)]
    k_max: Option<u32>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    exploration_c: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Rollout limit in joint steps (0: until the episode ends).
    #[arg(long)]
    sim_depth_limit: Option<u32>,
    /// Master seed; takes precedence over the config file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    /// Suppress per-episode progress on stderr.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct VerifyArgs {
    report: PathBuf,
    /// Also check episode lengths against this step limit.
    #[arg(long)]
    k_max: Option<u32>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    generator: GeneratorArgs,
}

fn toml_err(e: impl std::fmt::Display) -> Error {
    Error::Validation(format!("suite config: {e}"))
}

fn suite_config(args: &RunArgs) -> Result<SuiteConfig> {
    let mut table = toml::Table::new();
    let instances = match &args.manifest {
        Some(path) => toml::Value::try_from(bench::InstanceSource::Manifest { path: path.clone() }),
        None => toml::Value::try_from(bench::InstanceSource::Generate {
            generator: args.generator.generator(),
            n_seeds: args.generator.n_seeds,
            n_keep: args.generator.n_keep,
            n_agents: None,
        }),
    }
    .map_err(toml_err)?;
    table.insert("instances".into(), instances);
    if !args.algorithms.is_empty() {
        let algs = args
            .algorithms
            .iter()
            .map(|a| a.parse::<Algorithm>().map(|a| toml::Value::from(a.name())))
            .collect::<Result<Vec<_>>>()?;
        table.insert("algorithms".into(), algs.into());
    }
    if !args.agents.is_empty() {
        let counts: Vec<toml::Value> = args.agents.iter().map(|&n| (n as i64).into()).collect();
        table.insert("agent_counts".into(), counts.into());
    }
    if let Some(k) = args.k_max {
        table.insert("k_max".into(), (k as i64).into());
    }
    if let Some(r) = args.repeats {
        table.insert("repeats".into(), (r as i64).into());
    }
    if let Some(o) = &args.output {
        table.insert("output".into(), o.display().to_string().into());
    }
    if let Some(f) = &args.format {
        let f: ReportFormat = f.parse()?;
        table.insert("format".into(), toml::Value::try_from(f).map_err(toml_err)?);
    }
    let mut mcts = toml::Table::new();
    if let Some(v) = args.iterations {
        mcts.insert("iterations".into(), (v as i64).into());
    }
    if let Some(v) = args.exploration_c {
        mcts.insert("exploration_c".into(), v.into());
    }
    if let Some(v) = args.gamma {
        mcts.insert("gamma".into(), v.into());
    }
    if let Some(v) = args.sim_depth_limit {
        mcts.insert("sim_depth_limit".into(), (v as i64).into());
    }
    table.insert("mcts".into(), mcts.into());

    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let file: toml::Table = text.parse().map_err(toml_err)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for (key, value) in file {
            match (key.as_str(), value) {
                ("mcts", toml::Value::Table(over)) => {
                    if let Some(toml::Value::Table(m)) = table.get_mut("mcts") {
                        m.extend(over);
                    }
                }
                ("instances", toml::Value::Table(mut inst)) => {
                    if let Some(toml::Value::Table(m)) = inst.get_mut("manifest") {
                        if let Some(toml::Value::String(p)) = m.get_mut("path") {
                            *p = base.join(&*p).display().to_string();
                        }
                    }
                    table.insert(key, toml::Value::Table(inst));
                }
                ("output", toml::Value::String(p)) => {
                    table.insert(key, base.join(p).display().to_string().into());
                }
                (_, value) => {
                    table.insert(key, value);
                }
            }
        }
    }
    if let Some(seed) = args.seed {
        table.insert("seed".into(), (seed as i64).into());
    }
    if !table.contains_key("algorithms") {
        table.insert(
            "algorithms".into(),
            vec![toml::Value::from("subgoal_mamcts")].into(),
        );
    }
    if !table.contains_key("agent_counts") {
        table.insert("agent_counts".into(), vec![toml::Value::from(4)].into());
    }
    let config: SuiteConfig = toml::Value::Table(table).try_into().map_err(toml_err)?;
    config.validate()?;
    Ok(config)
}

fn run(args: RunArgs) -> Result<()> {
    let config = suite_config(&args)?;
    let quiet = args.quiet;
    let report = bench::run_suite(&config, |row| {
        if quiet {
            return;
        }
        match &row.error {
            None => eprintln!(
                "{:<15} agents={:<3} {:<8} isr={:.3} el={:<3} t={:.4}s",
                row.algorithm,
                row.agents,
                row.instance_id,
                row.isr.unwrap_or(0.0),
                row.episode_length.unwrap_or(0),
                row.mean_decision_time_s.unwrap_or(0.0)
            ),
            Some(e) => eprintln!(
                "{:<15} agents={:<3} {:<8} error: {e}",
                row.algorithm, row.agents, row.instance_id
            ),
        }
    })?;
    match &config.output {
        Some(path) => {
            bench::write_report(&report, config.format, path)?;
            print!("{}", bench::render_report(&report, ReportFormat::Table)?);
        }
        None => print!("{}", bench::render_report(&report, config.format)?),
    }
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<()> {
    let g = &args.generator;
    let generator = g.generator();
    let instances = select_hard_instances(&generator, g.n_agents, g.n_seeds, g.n_keep)?;
    let manifest = io::write_suite(
        &args.out,
        &instances,
        args.k_max,
        Some(generator),
        Some(g.n_seeds),
    )?;
    println!(
        "wrote {} instances to {}",
        instances.len(),
        manifest.display()
    );
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.report).map_err(|e| Error::Io {
        path: args.report.display().to_string(),
        source: e,
    })?;
    let report = bench::parse_jsonl_report(&text)?;
    bench::verify(&report, args.k_max)?;
    println!(
        "ok: {} rows, {} aggregates consistent",
        report.rows.len(),
        report.aggregates.len()
    );
    Ok(())
}

fn score(args: ScoreArgs) -> Result<()> {
    let mut ranked: Vec<(String, u64, u64)> = match &args.manifest {
        Some(path) => io::load_suite(path)?
            .into_iter()
            .map(|(id, inst)| (id, inst.seed, inst.difficulty))
            .collect(),
        None => {
            let g = &args.generator;
            select_hard_instances(&g.generator(), g.n_agents, g.n_seeds, g.n_seeds)?
                .into_iter()
                .map(|inst| (format!("s{:04}", inst.seed), inst.seed, inst.difficulty))
                .collect()
        }
    };
    ranked.sort_by(|a, b| b.2.cmp(&a.2).then(a.1.cmp(&b.1)));
    println!(
        "{:<5} {:<10} {:>6} {:>10}",
        "rank", "instance", "seed", "difficulty"
    );
    for (i, (id, seed, d)) in ranked.iter().enumerate() {
        println!("{:<5} {:<10} {:>6} {:>10}", i + 1, id, seed, d);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(a),
        Command::Verify(a) => verify(a),
        Command::Score(a) => score(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
