//! Independent oracles shared by the integration and acceptance tests. Nothing
//! here calls the library's own path or value code.

#![allow(dead_code)]

use std::collections::VecDeque;

use mamcts::grid_world::{EnvState, GridMap};
use mamcts::{Action, AgentSpec, Cell, JointAction, World};
use rand::Rng;

pub fn cell_free(map: &GridMap, c: Cell) -> bool {
    c.row >= 0
        && c.col >= 0
        && (c.row as usize) < map.height()
        && (c.col as usize) < map.width()
        && !map.blocked_mask()[c.row as usize * map.width() + c.col as usize]
}

/// Plain BFS distances from `from` over free cells, row-major, `None` when unreachable.
pub fn bfs(map: &GridMap, from: Cell) -> Vec<Option<u32>> {
    let w = map.width();
    let mut dist = vec![None; w * map.height()];
    if !cell_free(map, from) {
        return dist;
    }
    dist[from.row as usize * w + from.col as usize] = Some(0);
    let mut queue = VecDeque::from([from]);
    while let Some(c) = queue.pop_front() {
        let d = dist[c.row as usize * w + c.col as usize].unwrap();
        for (dr, dc) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            let n = Cell::new(c.row + dr, c.col + dc);
            if cell_free(map, n) && dist[n.row as usize * w + n.col as usize].is_none() {
                dist[n.row as usize * w + n.col as usize] = Some(d + 1);
                queue.push_back(n);
            }
        }
    }
    dist
}

pub fn bfs_dist(map: &GridMap, from: Cell, to: Cell) -> Option<u32> {
    bfs(map, from)[to.row as usize * map.width() + to.col as usize]
}

/// Number of 4-connected free components (flood fill).
pub fn component_count(map: &GridMap) -> usize {
    let w = map.width();
    let mut seen = vec![false; w * map.height()];
    let mut count = 0;
    for r in 0..map.height() as i32 {
        for c in 0..w as i32 {
            let cell = Cell::new(r, c);
            let i = r as usize * w + c as usize;
            if !cell_free(map, cell) || seen[i] {
                continue;
            }
            count += 1;
            for (j, d) in bfs(map, cell).iter().enumerate() {
                if d.is_some() {
                    seen[j] = true;
                }
            }
        }
    }
    count
}

/// Random map: each cell blocked with probability `density`.
pub fn random_map(rng: &mut impl Rng, h: usize, w: usize, density: f64) -> GridMap {
    let blocked = (0..h * w).map(|_| rng.gen_bool(density)).collect();
    GridMap::from_blocked(w, h, blocked).unwrap()
}

/// Up to `n` agents with distinct free starts and distinct free goals.
pub fn random_agents(rng: &mut impl Rng, map: &GridMap, n: usize) -> Vec<AgentSpec> {
    let mut free: Vec<Cell> = (0..map.height() as i32)
        .flat_map(|r| (0..map.width() as i32).map(move |c| Cell::new(r, c)))
        .filter(|&c| cell_free(map, c))
        .collect();
    let mut goals = free.clone();
    let n = n.min(free.len());
    let mut agents = Vec::new();
    for id in 0..n {
        let s = free.swap_remove(rng.gen_range(0..free.len()));
        let g = goals.swap_remove(rng.gen_range(0..goals.len()));
        agents.push(AgentSpec {
            id,
            start: s,
            goal: g,
        });
    }
    agents
}

pub fn random_joint(rng: &mut impl Rng, world: &World, state: &EnvState) -> JointAction {
    let mut joint = JointAction::wait(state.num_agents());
    for i in 0..state.num_agents() {
        if !state.active[i] {
            continue;
        }
        let legal: Vec<Action> = Action::ALL
            .into_iter()
            .filter(|&a| cell_free(world.map(), state.positions[i].offset(a)))
            .collect();
        joint.0[i] = legal[rng.gen_range(0..legal.len())];
    }
    joint
}

/// Checks the environment invariants across one transition; returns a description of the first violation.
pub fn transition_violation(
    world: &World,
    before: &EnvState,
    joint: &JointAction,
    after: &EnvState,
) -> Option<String> {
    let n = before.num_agents();
    if after.step != before.step + 1 {
        return Some(format!("step counter {} -> {}", before.step, after.step));
    }
    for i in 0..n {
        if after.active[i] && !before.active[i] {
            return Some(format!("agent {i} reactivated"));
        }
        if !before.active[i] {
            continue;
        }
        let (p, q) = (before.positions[i], after.positions[i]);
        if !cell_free(world.map(), q) {
            return Some(format!("agent {i} on blocked cell {q}"));
        }
        if q != p && q != p.offset(joint[i]) {
            return Some(format!("agent {i} jumped {p} -> {q} with {:?}", joint[i]));
        }
        if !after.active[i] && q != world.goal(i) {
            return Some(format!("agent {i} removed away from its goal"));
        }
        if after.active[i] && q == world.goal(i) {
            return Some(format!("agent {i} on its goal but still active"));
        }
        for j in (i + 1)..n {
            if !before.active[j] {
                continue;
            }
            let (pj, qj) = (before.positions[j], after.positions[j]);
            if q == qj {
                return Some(format!("agents {i} and {j} share {q}"));
            }
            if q == pj && qj == p && p != q {
                return Some(format!("agents {i} and {j} swapped"));
            }
        }
    }
    if after.num_active() > before.num_active() {
        return Some("active count increased".into());
    }
    None
}

/// Exact value of a single-agent state under optimal play, by enumeration:
/// 1 for stepping onto the goal, 0 otherwise, undiscounted, `steps_left` moves.
pub fn expectimax_single(map: &GridMap, pos: Cell, goal: Cell, steps_left: u32) -> f64 {
    if steps_left == 0 {
        return 0.0;
    }
    Action::ALL
        .into_iter()
        .filter(|&a| cell_free(map, pos.offset(a)))
        .map(|a| {
            let next = pos.offset(a);
            if next == goal {
                1.0
            } else {
                expectimax_single(map, next, goal, steps_left - 1)
            }
        })
        .fold(0.0, f64::max)
}

/// Exact expected undiscounted-by-gamma return of a uniform random walk for
/// `steps` joint steps, reward `r` on reaching the goal (walk stops there).
pub fn random_walk_value(
    map: &GridMap,
    pos: Cell,
    goal: Cell,
    steps: u32,
    gamma: f64,
    r: f64,
) -> f64 {
    if steps == 0 {
        return 0.0;
    }
    let legal: Vec<Cell> = Action::ALL
        .into_iter()
        .map(|a| pos.offset(a))
        .filter(|&c| cell_free(map, c))
        .collect();
    legal
        .iter()
        .map(|&next| {
            if next == goal {
                r
            } else {
                gamma * random_walk_value(map, next, goal, steps - 1, gamma, r)
            }
        })
        .sum::<f64>()
        / legal.len() as f64
}

/// Running value each node on a path should receive, computed front to back:
/// node i gets G discounted once per boundary at or after i, plus the boundary
/// rewards discounted by the boundaries strictly between.
pub fn backprop_oracle(boundary_rewards: &[Option<f64>], leaf_return: f64, gamma: f64) -> Vec<f64> {
    (0..boundary_rewards.len())
        .map(|i| {
            let mut value = 0.0;
            let mut discount = 1.0;
            for r in boundary_rewards[i..].iter().flatten() {
                value += discount * r;
                discount *= gamma;
            }
            value + discount * leaf_return
        })
        .collect()
}

/// CSV text with the timing column emptied, for comparisons across runs.
pub fn csv_without_timing(csv: &str) -> String {
    let mut lines = csv.lines();
    let header = lines.next().unwrap_or_default();
    let col = header
        .split(',')
        .position(|h| h == "mean_decision_time_s")
        .expect("timing column");
    let mut out = String::from(header);
    out.push('\n');
    for line in lines {
        let mut cells: Vec<&str> = line.split(',').collect();
        cells[col] = "";
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
