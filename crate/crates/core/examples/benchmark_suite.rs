//! A small benchmark suite: instances on disk, all four algorithms, reports.

use mamcts::bench::{
    parse_jsonl_report, render_report, run_suite, verify, write_report, Algorithm, InstanceSource,
    MctsOverrides, ReportFormat, SuiteConfig,
};
use mamcts::io::write_suite;
use mamcts::map_forge::{select_hard_instances, MapGenerator, RandomMapParams};

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("mamcts-example-suite");
    let generator = MapGenerator::Random(RandomMapParams::cooperative());
    let instances = select_hard_instances(&generator, 16, 40, 3)?;
    let manifest = write_suite(&dir, &instances, 64, Some(generator), Some(40))?;

    let config = SuiteConfig {
        instances: InstanceSource::Manifest { path: manifest },
        algorithms: Algorithm::ALL.to_vec(),
        agent_counts: vec![2, 4],
        k_max: 64,
        seed: 2024,
        repeats: 1,
        mcts: MctsOverrides {
            iterations: Some(200),
            ..Default::default()
        },
        output: None,
        format: ReportFormat::Csv,
    };
    let report = run_suite(&config, |row| {
        eprintln!(
            "{} {} agents on {}: isr {:?}",
            row.algorithm, row.agents, row.instance_id, row.isr
        );
    })?;
    print!("{}", render_report(&report, ReportFormat::Table)?);

    let out = dir.join("report.jsonl");
    write_report(&report, ReportFormat::Jsonl, &out)?;
    let back = parse_jsonl_report(&std::fs::read_to_string(&out)?)?;
    verify(&back, Some(64))?;
    println!("report written to {} and verified", out.display());
    Ok(())
}
