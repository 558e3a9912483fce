// Acceptance gate: one PASS/FAIL line per criterion. Set MAMCTS_ACCEPTANCE_STRICT=1
// to turn any FAIL into a nonzero exit.

mod common;

use std::time::Instant;

use mamcts::bench::{
    render_report, run_suite_on, Algorithm, InstanceSource, MctsOverrides, Report, ReportFormat,
    SuiteConfig,
};
use mamcts::grid_world::{load_map, restore, snapshot, StepEvents};
use mamcts::map_forge::{
    select_hard_instances, Instance, MapGenerator, MazeParams, RandomMapParams,
};
use mamcts::seeding::rng_from;
use mamcts::shortest_path::find_path;
use mamcts::tree_search::{
    backpropagate, build_tree, discounted_return, reward, uct_score, PathStep, SearchNode,
    SearchTree,
};
use mamcts::{AgentSpec, Cell, MctsConfig, SearchMode, World};
use rand::Rng;

use common::*;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn suite(algorithms: &[Algorithm], agents: usize) -> SuiteConfig {
    SuiteConfig {
        instances: InstanceSource::Manifest {
            path: "unused".into(),
        },
        algorithms: algorithms.to_vec(),
        agent_counts: vec![agents],
        k_max: 64,
        seed: 0,
        repeats: 1,
        mcts: MctsOverrides::default(),
        output: None,
        format: ReportFormat::Csv,
    }
}

fn ids(instances: Vec<Instance>) -> Vec<(String, Instance)> {
    instances
        .into_iter()
        .map(|i| (format!("s{:04}", i.seed), i))
        .collect()
}

fn cooperative_instances() -> Vec<(String, Instance)> {
    let generator = MapGenerator::Random(RandomMapParams::cooperative());
    ids(select_hard_instances(&generator, 16, 200, 20).expect("cooperative instances"))
}

fn mean_time(report: &Report, alg: Algorithm, keep: &[String]) -> f64 {
    let times: Vec<f64> = report
        .rows
        .iter()
        .filter(|r| r.algorithm == alg && keep.contains(&r.instance_id))
        .filter_map(|r| r.mean_decision_time_s)
        .collect();
    times.iter().sum::<f64>() / times.len() as f64
}

fn criterion_1(instances: &[(String, Instance)]) -> Verdict {
    let report = run_suite_on(&suite(&[Algorithm::SubgoalMamcts], 4), instances, |_| {}).unwrap();
    let a = report.aggregate_for(Algorithm::SubgoalMamcts, 4).unwrap();
    verdict(
        a.isr >= 0.95 && a.csr >= 0.8 && a.failed == 0,
        format!("subgoal_mamcts, 4 agents, 20 instances: ISR {:.3} (>= 0.95), CSR {:.3} (>= 0.8), EL {:.2}", a.isr, a.csr, a.episode_length),
    )
}

fn criterion_2(report: &Report) -> Verdict {
    let order = [
        Algorithm::SubgoalMamcts,
        Algorithm::AStar,
        Algorithm::Mamcts,
        Algorithm::Joint,
    ];
    let isr: Vec<f64> = order
        .iter()
        .map(|&a| report.aggregate_for(a, 8).unwrap().isr)
        .collect();
    let ok = isr.windows(2).all(|w| w[0] - w[1] >= 0.05);
    let shown: Vec<String> = order
        .iter()
        .zip(&isr)
        .map(|(a, v)| format!("{a} {v:.3}"))
        .collect();
    verdict(
        ok,
        format!(
            "8 agents, mean ISR {} (need each gap >= 0.05)",
            shown.join(" > ")
        ),
    )
}

fn criterion_3() -> Verdict {
    let generator = MapGenerator::Maze(MazeParams::labyrinth(15));
    let instances = ids(select_hard_instances(&generator, 4, 20, 20).expect("maze instances"));
    let report = run_suite_on(
        &suite(&[Algorithm::SubgoalMamcts, Algorithm::AStar], 4),
        &instances,
        |_| {},
    )
    .unwrap();
    let sub = report
        .aggregate_for(Algorithm::SubgoalMamcts, 4)
        .unwrap()
        .episode_length;
    let astar = report
        .aggregate_for(Algorithm::AStar, 4)
        .unwrap()
        .episode_length;
    verdict(
        sub < astar,
        format!("15x15 mazes, 4 agents: EL subgoal_mamcts {sub:.2} < astar {astar:.2}"),
    )
}

fn criterion_4(report: &Report, instances: &[(String, Instance)]) -> Verdict {
    let first: Vec<String> = instances.iter().take(5).map(|(id, _)| id.clone()).collect();
    let t = |a| mean_time(report, a, &first);
    let (astar, sub, mamcts, joint) = (
        t(Algorithm::AStar),
        t(Algorithm::SubgoalMamcts),
        t(Algorithm::Mamcts),
        t(Algorithm::Joint),
    );
    verdict(
        astar < sub && sub < mamcts && sub < joint,
        format!("8 agents, 5 instances, s/decision: astar {astar:.2e} < subgoal_mamcts {sub:.2e} < mamcts {mamcts:.2e}, joint {joint:.2e}"),
    )
}

fn random_world(seed: u64, max_agents: usize, k_max: u32) -> Option<World> {
    let mut rng = rng_from(seed);
    let (h, w) = (rng.gen_range(3..=16), rng.gen_range(3..=16));
    let density = rng.gen_range(0.0..0.4);
    let map = random_map(&mut rng, h, w, density);
    let n = rng.gen_range(1..=max_agents);
    let agents = random_agents(&mut rng, &map, n);
    (!agents.is_empty()).then(|| World::new(map, agents, k_max).unwrap())
}

fn criterion_5() -> Verdict {
    let (mut steps, mut violations, mut maps) = (0u64, 0u64, 0u64);
    let mut first = None;
    let mut seed = 0;
    while maps < 100 {
        seed += 1;
        let Some(world) = random_world(seed, 16, 64) else {
            continue;
        };
        maps += 1;
        let mut rng = rng_from(seed ^ 0xf00d);
        let mut state = world.reset(seed);
        for _ in 0..1000 {
            if world.is_terminal(&state) {
                state = world.reset(rng.gen());
            }
            let joint = random_joint(&mut rng, &world, &state);
            let (next, _) = world.step(&state, &joint).unwrap();
            if let Some(v) = transition_violation(&world, &state, &joint, &next) {
                violations += 1;
                first.get_or_insert(v);
            }
            steps += 1;
            state = next;
        }
    }
    verdict(
        violations == 0 && steps >= 100_000,
        format!(
            "{steps} random steps on {maps} maps, {violations} violations{}",
            first.map(|v| format!(" (first: {v})")).unwrap_or_default()
        ),
    )
}

fn criterion_6() -> Verdict {
    let mut failures = 0;
    let mut cycles = 0;
    let mut seed = 0;
    while cycles < 1000 {
        seed += 1;
        let Some(world) = random_world(seed, 8, 48) else {
            continue;
        };
        cycles += 1;
        let mut rng = rng_from(seed);
        let mut state = world.reset(rng.gen());
        for _ in 0..rng.gen_range(0..20) {
            if world.is_terminal(&state) {
                break;
            }
            let j = random_joint(&mut rng, &world, &state);
            world.step_mut(&mut state, &j).unwrap();
        }
        let snap = snapshot(&state);
        let bytes = state.to_bytes();
        let mut trajectory = Vec::new();
        while !world.is_terminal(&state) {
            let j = random_joint(&mut rng, &world, &state);
            world.step_mut(&mut state, &j).unwrap();
            trajectory.push((j, state.to_bytes()));
        }
        let mut replay = restore(&snap);
        let mut ok = replay.to_bytes() == bytes;
        for (j, expected) in &trajectory {
            world.step_mut(&mut replay, j).unwrap();
            ok &= &replay.to_bytes() == expected;
        }
        failures += !ok as usize;
    }
    verdict(
        failures == 0,
        format!("{cycles} snapshot/mutate/restore/replay cycles, {failures} mismatches"),
    )
}

fn criterion_7() -> Verdict {
    // One agent, two joint steps, gamma 1: root children against exact enumeration.
    let map = load_map("...\n...\n...").unwrap();
    let (start, goal) = (Cell::new(1, 0), Cell::new(1, 2));
    let world = World::new(map.clone(), vec![AgentSpec { id: 0, start, goal }], 2).unwrap();
    let state = world.reset(0);
    let cfg = MctsConfig {
        iterations: 20_000,
        gamma: 1.0,
        ..MctsConfig::for_mode(SearchMode::Mamcts)
    };
    let mut source = world.map();
    let tree = build_tree(&world, &state, &[None], &mut source, &cfg, &mut rng_from(7)).unwrap();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for &c in tree.root_children() {
        let node = &tree.nodes[c];
        let action = mamcts::tree_search::decode_key(node.key, 1)[0];
        let next = start.offset(action);
        let exact = if next == goal {
            1.0
        } else {
            expectimax_single(&map, next, goal, 1)
        };
        worst = worst.max((node.mean_value() - exact).abs());
        parts.push(format!("{action:?} {:.6}/{exact}", node.mean_value()));
    }
    let values_ok = worst <= 1e-9;

    let mut path_mismatches = 0;
    let mut pairs = 0;
    for seed in 0..20u64 {
        let mut rng = rng_from(1000 + seed);
        let map = random_map(&mut rng, 8, 8, 0.3);
        let free: Vec<Cell> = map.free_cells();
        for &a in &free {
            let field = bfs(&map, a);
            for &b in &free {
                pairs += 1;
                let found = find_path(&map, a, b, &[]).map(|p| p.len_moves() as u32);
                if found != field[b.row as usize * 8 + b.col as usize] {
                    path_mismatches += 1;
                }
            }
        }
    }
    verdict(
        values_ok && path_mismatches == 0,
        format!(
            "root means vs expectimax after {} iterations: max |dev| {worst:.3e} (tol 1e-9) [{}]; find_path vs BFS: {path_mismatches} mismatches over {pairs} pairs",
            cfg.iterations,
            parts.join(", ")
        ),
    )
}

fn criterion_8() -> Verdict {
    let mut rng = rng_from(8);
    let mut worst: f64 = 0.0;
    let cfg = MctsConfig::for_mode(SearchMode::SubgoalMamcts);
    for _ in 0..1000 {
        let v = rng.gen_range(-50.0..50.0);
        let kj = rng.gen_range(1..10_000u64);
        let k = kj + rng.gen_range(0..10_000u64);
        let c = rng.gen_range(0.0..3.0);
        let direct = v / kj as f64 + c * (2.0 * (k as f64).ln() / kj as f64).sqrt();
        worst = worst.max((uct_score(v, kj, k, c) - direct).abs() / direct.abs().max(1.0));

        let n = rng.gen_range(1..=16usize);
        let (goals, subs): (Vec<bool>, Vec<bool>) = (0..n)
            .map(|_| (rng.gen_bool(0.3), rng.gen_bool(0.3)))
            .unzip();
        let events = StepEvents {
            reached_goal: (0..n).filter(|&i| goals[i]).collect(),
            reached_subgoal: (0..n).filter(|&i| subs[i]).collect(),
            blocked_moves: vec![],
        };
        let direct: f64 = (0..n)
            .map(|i| {
                if goals[i] {
                    1.0
                } else if subs[i] {
                    0.1
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            / n as f64;
        worst = worst.max((reward(&events, n, &cfg) - direct).abs());

        let rewards: Vec<f64> = (0..rng.gen_range(0..64)).map(|_| rng.gen()).collect();
        let gamma: f64 = rng.gen();
        let direct: f64 = rewards
            .iter()
            .enumerate()
            .map(|(k, r)| gamma.powi(k as i32) * r)
            .sum();
        worst = worst.max((discounted_return(&rewards, gamma) - direct).abs());
    }
    let formulas_ok = worst <= 1e-12;

    // Path audit: chains of per-agent and boundary nodes, values against the oracle.
    let w = World::new(
        load_map("..").unwrap(),
        vec![AgentSpec {
            id: 0,
            start: Cell::new(0, 0),
            goal: Cell::new(0, 1),
        }],
        8,
    )
    .unwrap();
    let mut audit_worst: f64 = 0.0;
    for _ in 0..1000 {
        let len = rng.gen_range(1..30);
        let mut tree = SearchTree::new(&w, &w.reset(0), SearchMode::Mamcts);
        let template = tree.nodes[0].clone();
        let mut path = vec![PathStep {
            node: 0,
            branch: 0,
            boundary_reward: None,
        }];
        for i in 1..len {
            let boundary = rng.gen_bool(0.4);
            tree.nodes.push(SearchNode {
                parent: Some(i - 1),
                is_boundary: boundary,
                ..template.clone()
            });
            path.push(PathStep {
                node: i,
                branch: 0,
                boundary_reward: boundary.then(|| rng.gen()),
            });
        }
        let (g, gamma) = (rng.gen_range(0.0..5.0), rng.gen_range(0.0..=1.0));
        let expected = backprop_oracle(
            &path.iter().map(|s| s.boundary_reward).collect::<Vec<_>>(),
            g,
            gamma,
        );
        backpropagate(&mut tree, &path, g, gamma);
        for (i, e) in expected.iter().enumerate() {
            audit_worst = audit_worst.max((tree.nodes[i].total_return - e).abs());
        }
    }
    verdict(
        formulas_ok && audit_worst <= 1e-12,
        format!("uct/reward/discounted_return on 1000 inputs each: max err {worst:.1e}; backprop audit on 1000 paths: max err {audit_worst:.1e}"),
    )
}

fn criterion_9() -> Verdict {
    let mut mismatched = 0;
    let mut cases = 0;
    for seed in 0..30u64 {
        let mut rng = rng_from(seed);
        let map = random_map(&mut rng, 7, 7, 0.2);
        let Some(agent) = random_agents(&mut rng, &map, 1).pop() else {
            continue;
        };
        let world = World::new(map, vec![agent], 20).unwrap();
        let state = world.reset(seed);
        if world.is_terminal(&state) {
            continue;
        }
        cases += 1;
        let trees: Vec<SearchTree> = [SearchMode::Joint, SearchMode::Mamcts]
            .into_iter()
            .map(|mode| {
                let cfg = MctsConfig {
                    iterations: 500,
                    ..MctsConfig::for_mode(mode)
                };
                let mut source = world.map();
                build_tree(
                    &world,
                    &state,
                    &[None],
                    &mut source,
                    &cfg,
                    &mut rng_from(seed),
                )
                .unwrap()
            })
            .collect();
        let same_shape = trees[0].nodes.len() == trees[1].nodes.len()
            && trees[0].nodes.iter().zip(&trees[1].nodes).all(|(x, y)| {
                (x.parent, x.key, x.visits, x.is_boundary)
                    == (y.parent, y.key, y.visits, y.is_boundary)
                    && x.branches.len() == y.branches.len()
                    && x.branches
                        .iter()
                        .zip(&y.branches)
                        .all(|(a, b)| a.children == b.children && a.state == b.state)
            });
        if !same_shape || trees[0].best_joint_action() != trees[1].best_joint_action() {
            mismatched += 1;
        }
    }

    // Sixteen agents on open interior cells of a 16x16 map.
    let map = mamcts::grid_world::GridMap::new(16, 16).unwrap();
    let agents: Vec<AgentSpec> = (0..16)
        .map(|i| AgentSpec {
            id: i,
            start: Cell::new(2 + (i / 4) as i32 * 3, 2 + (i % 4) as i32 * 3),
            goal: Cell::new(15 - (i / 4) as i32, 15 - (i % 4) as i32),
        })
        .collect();
    let world = World::new(map, agents, 64).unwrap();
    let state = world.reset(0);
    let theoretical: u128 = (0..16)
        .map(|i| world.legal_actions(&state, i).unwrap().len() as u128)
        .product();
    let cfg = MctsConfig {
        iterations: 1000,
        ..MctsConfig::for_mode(SearchMode::Mamcts)
    };
    let mut source = world.map();
    let tree = build_tree(
        &world,
        &state,
        &vec![None; 16],
        &mut source,
        &cfg,
        &mut rng_from(9),
    )
    .unwrap();
    let root_branching = tree.root_children().len();
    verdict(
        mismatched == 0 && cases > 0 && root_branching <= 5 && theoretical == 5u128.pow(16),
        format!(
            "n=1: {mismatched} of {cases} tree pairs differ; n=16: decomposed root branching {root_branching} (<= 5), joint branching {theoretical} (= 5^16)"
        ),
    )
}

fn criterion_10(instances: &[(String, Instance)]) -> Verdict {
    let mut config = suite(&Algorithm::ALL, 4);
    config.seed = 42;
    config.mcts.iterations = Some(200);
    let few = &instances[..3];
    let csv = |c: &SuiteConfig| {
        render_report(&run_suite_on(c, few, |_| {}).unwrap(), ReportFormat::Csv).unwrap()
    };
    let (a, b) = (csv(&config), csv(&config));
    let same = csv_without_timing(&a) == csv_without_timing(&b);
    config.seed = 43;
    let other = csv_without_timing(&csv(&config));
    verdict(
        same && other != csv_without_timing(&a),
        format!(
            "two runs of a {}-row suite: CSV {} modulo timing; another master seed changes it: {}",
            a.lines().count() - 1,
            if same { "identical" } else { "differs" },
            other != csv_without_timing(&a)
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, started: Instant, v: Verdict| {
        println!(
            "criterion {n:>2}: {} {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            started.elapsed().as_secs_f64()
        );
        failed += !v.pass as usize;
    };

    let t = Instant::now();
    let instances = cooperative_instances();
    report(1, t, criterion_1(&instances));

    let t = Instant::now();
    let eight = run_suite_on(&suite(&Algorithm::ALL, 8), &instances, |_| {}).unwrap();
    report(2, t, criterion_2(&eight));
    let t = Instant::now();
    report(3, t, criterion_3());
    let t = Instant::now();
    report(4, t, criterion_4(&eight, &instances));
    for (n, f) in [
        (5, criterion_5 as fn() -> Verdict),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ] {
        let t = Instant::now();
        report(n, t, f());
    }
    let t = Instant::now();
    report(10, t, criterion_10(&instances));

    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 && std::env::var("MAMCTS_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
