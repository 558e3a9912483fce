//! Benchmark instance generation.
//!
//! Two map families are supported: random obstacle grids (with small free
//! pockets filled in) and rooms-and-corridors mazes on an odd lattice. Agents
//! are placed uniformly at random with connectivity resampling, and instance
//! sets can be ranked by how much the agents' individual shortest paths
//! overlap.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_world::{AgentSpec, Cell, GridMap};
use crate::seeding::{derive_seed, rng_from};
use crate::shortest_path::find_path;

const RANDOM_MAP_RETRIES: usize = 100;
const PLACEMENT_RETRIES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomMapParams {
    pub size: usize,
    pub density: f64,
    /// Free components with fewer cells than this are filled with obstacles.
    pub min_component_fill: usize,
}

impl RandomMapParams {
    /// 16x16, density 0.3, pockets under five cells filled.
    pub fn cooperative() -> Self {
        RandomMapParams {
            size: 16,
            density: 0.3,
            min_component_fill: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 2 {
            return Err(Error::Validation(format!("map size {} < 2", self.size)));
        }
        if !(0.0..1.0).contains(&self.density) {
            return Err(Error::Validation(format!(
                "density {} outside [0, 1)",
                self.density
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MazeParams {
    pub size: usize,
    pub max_rooms: usize,
    pub room_min_size: usize,
    pub room_max_size: usize,
    pub has_doors: bool,
    pub extra_connection_probability: f64,
    pub min_component_size: usize,
    pub retry_count: usize,
}

impl MazeParams {
    /// The parameter set used for the 15x15 maze benchmark.
    pub fn labyrinth(size: usize) -> Self {
        MazeParams {
            size,
            max_rooms: 30,
            room_min_size: 5,
            room_max_size: 5,
            has_doors: true,
            extra_connection_probability: 0.0,
            min_component_size: 4,
            retry_count: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size.is_multiple_of(2) {
            return Err(Error::Validation(format!(
                "maze size must be odd, got {}",
                self.size
            )));
        }
        if self.size < 5 {
            return Err(Error::Validation(format!("maze size {} < 5", self.size)));
        }
        if self.room_min_size > self.room_max_size || self.room_max_size >= self.size {
            return Err(Error::Validation(format!(
                "room sizes [{}, {}] invalid for maze size {}",
                self.room_min_size, self.room_max_size, self.size
            )));
        }
        if self.max_rooms > 0 && odd_sizes(self.room_min_size, self.room_max_size).is_empty() {
            return Err(Error::Validation(format!(
                "no odd room size in [{}, {}]",
                self.room_min_size, self.room_max_size
            )));
        }
        if !(0.0..=1.0).contains(&self.extra_connection_probability) {
            return Err(Error::Validation(format!(
                "extra_connection_probability {} outside [0, 1]",
                self.extra_connection_probability
            )));
        }
        Ok(())
    }
}

/// Map family plus its parameters; recorded in suite manifests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapGenerator {
    Random(RandomMapParams),
    Maze(MazeParams),
}

impl MapGenerator {
    pub fn validate(&self) -> Result<()> {
        match self {
            MapGenerator::Random(p) => p.validate(),
            MapGenerator::Maze(p) => p.validate(),
        }
    }

    pub fn generate(&self, seed: u64) -> Result<GridMap> {
        match self {
            MapGenerator::Random(p) => generate_random_map(p, seed),
            MapGenerator::Maze(p) => generate_maze_map(p, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub map: GridMap,
    pub agents: Vec<AgentSpec>,
    pub seed: u64,
    pub difficulty: u64,
}

impl Instance {
    /// The same instance restricted to its first `n` agents.
    pub fn with_agents(&self, n: usize) -> Result<Instance> {
        if n > self.agents.len() {
            return Err(Error::Validation(format!(
                "instance has {} agents, {n} requested",
                self.agents.len()
            )));
        }
        let agents = self.agents[..n].to_vec();
        let difficulty = difficulty_score(&self.map, &agents)?;
        Ok(Instance {
            map: self.map.clone(),
            agents,
            seed: self.seed,
            difficulty,
        })
    }
}

/// Labels every free cell with its 4-connected component; blocked cells get `usize::MAX`.
/// Returns the labels and the size of each component.
pub fn label_components(map: &GridMap) -> (Vec<usize>, Vec<usize>) {
    let mut labels = vec![usize::MAX; map.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..map.len() {
        if labels[start] != usize::MAX || map.blocked_mask()[start] {
            continue;
        }
        let label = sizes.len();
        labels[start] = label;
        queue.push_back(map.cell_at(start));
        let mut size = 0;
        while let Some(c) = queue.pop_front() {
            size += 1;
            for nb in map.free_neighbors(c) {
                let i = map.index(nb).unwrap();
                if labels[i] == usize::MAX {
                    labels[i] = label;
                    queue.push_back(nb);
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Blocks every free component with fewer than `threshold` cells.
pub fn fill_small_components(map: &GridMap, threshold: usize) -> GridMap {
    let (labels, sizes) = label_components(map);
    let blocked = map
        .blocked_mask()
        .iter()
        .zip(&labels)
        .map(|(&b, &l)| b || sizes[l] < threshold)
        .collect();
    GridMap::from_blocked(map.width(), map.height(), blocked).expect("same dimensions")
}

/// Independent Bernoulli obstacles, before any post-processing.
pub fn sample_obstacles(params: &RandomMapParams, rng: &mut impl Rng) -> GridMap {
    let n = params.size * params.size;
    let blocked = (0..n).map(|_| rng.gen_bool(params.density)).collect();
    GridMap::from_blocked(params.size, params.size, blocked).expect("size validated")
}

pub fn generate_random_map(params: &RandomMapParams, seed: u64) -> Result<GridMap> {
    params.validate()?;
    let mut rng = rng_from(seed);
    for _ in 0..RANDOM_MAP_RETRIES {
        let raw = sample_obstacles(params, &mut rng);
        let map = fill_small_components(&raw, params.min_component_fill);
        if map.blocked_count() < map.len() {
            return Ok(map);
        }
    }
    Err(Error::Generation(format!(
        "random map fully blocked after {RANDOM_MAP_RETRIES} draws (seed {seed})"
    )))
}

/// Samples `n` agents with distinct free starts and distinct free goals, all
/// 2n cells different, each start connected to its goal.
pub fn place_agents(map: &GridMap, n: usize, seed: u64) -> Result<Vec<AgentSpec>> {
    let free = map.free_cells();
    if free.len() < 2 * n {
        return Err(Error::Generation(format!(
            "{} free cells cannot host {n} agents",
            free.len()
        )));
    }
    let (labels, _) = label_components(map);
    let label = |c: Cell| labels[map.index(c).unwrap()];
    let mut rng = rng_from(seed);
    for _ in 0..PLACEMENT_RETRIES {
        let cells: Vec<Cell> = free.choose_multiple(&mut rng, 2 * n).copied().collect();
        let (starts, goals) = cells.split_at(n);
        if starts
            .iter()
            .zip(goals)
            .all(|(s, g)| label(*s) == label(*g))
        {
            return Ok(starts
                .iter()
                .zip(goals)
                .enumerate()
                .map(|(id, (&start, &goal))| AgentSpec { id, start, goal })
                .collect());
        }
    }
    Err(Error::Generation(format!(
        "no connected placement of {n} agents after {PLACEMENT_RETRIES} draws"
    )))
}

/// Sum over agent pairs of the number of cells shared by their individual
/// shortest paths (other agents ignored).
pub fn difficulty_score(map: &GridMap, agents: &[AgentSpec]) -> Result<u64> {
    let masks = agents
        .iter()
        .map(|a| {
            let path = find_path(map, a.start, a.goal, &[]).ok_or_else(|| {
                Error::Validation(format!(
                    "agent {}: goal {} unreachable from {}",
                    a.id, a.goal, a.start
                ))
            })?;
            let mut mask = vec![false; map.len()];
            for c in path.cells {
                mask[map.index(c).unwrap()] = true;
            }
            Ok(mask)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut score = 0u64;
    for i in 0..masks.len() {
        for j in (i + 1)..masks.len() {
            score += masks[i]
                .iter()
                .zip(&masks[j])
                .filter(|(a, b)| **a && **b)
                .count() as u64;
        }
    }
    Ok(score)
}

/// Map plus placed agents for one seed.
pub fn generate_instance(generator: &MapGenerator, n_agents: usize, seed: u64) -> Result<Instance> {
    let map = generator.generate(seed)?;
    let agents = place_agents(&map, n_agents, derive_seed(seed, &[1]))?;
    let difficulty = difficulty_score(&map, &agents)?;
    Ok(Instance {
        map,
        agents,
        seed,
        difficulty,
    })
}

/// Generates instances for seeds `0..n_seeds` and keeps the `n_keep` with the
/// highest difficulty (ties: lower seed first). Seeds that fail to generate
/// are skipped.
pub fn select_hard_instances(
    generator: &MapGenerator,
    n_agents: usize,
    n_seeds: usize,
    n_keep: usize,
) -> Result<Vec<Instance>> {
    if n_keep > n_seeds {
        return Err(Error::Validation(format!(
            "cannot keep {n_keep} of {n_seeds} seeds"
        )));
    }
    generator.validate()?;
    let mut pool: Vec<Instance> = (0..n_seeds as u64)
        .filter_map(|seed| generate_instance(generator, n_agents, seed).ok())
        .collect();
    if pool.len() < n_keep {
        return Err(Error::Generation(format!(
            "only {} of {n_seeds} seeds produced instances, {n_keep} required",
            pool.len()
        )));
    }
    pool.sort_by(|a, b| b.difficulty.cmp(&a.difficulty).then(a.seed.cmp(&b.seed)));
    pool.truncate(n_keep);
    Ok(pool)
}

fn odd_sizes(lo: usize, hi: usize) -> Vec<usize> {
    (lo..=hi).filter(|s| s % 2 == 1).collect()
}

#[derive(Debug, Clone, Copy)]
struct Room {
    top: usize,
    left: usize,
    height: usize,
    width: usize,
}

impl Room {
    fn contains(&self, r: usize, c: usize) -> bool {
        (self.top..self.top + self.height).contains(&r)
            && (self.left..self.left + self.width).contains(&c)
    }

    /// True when the rooms overlap or touch (no wall line between them).
    fn crowds(&self, other: &Room) -> bool {
        self.top <= other.top + other.height
            && other.top <= self.top + self.height
            && self.left <= other.left + other.width
            && other.left <= self.left + self.width
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra] = rb;
        true
    }
}

/// Rooms-and-corridors maze on the odd lattice of a `size` x `size` grid.
///
/// Rooms with odd sides are placed at odd offsets without touching, the
/// remaining lattice cells are carved with a recursive backtracker, each room
/// gets a door, and separate regions are joined through random wall cells
/// until the free space is connected. Extra wall cells between already
/// connected regions are opened with `extra_connection_probability`.
pub fn generate_maze_map(params: &MazeParams, seed: u64) -> Result<GridMap> {
    params.validate()?;
    let mut rng = rng_from(seed);
    for _ in 0..params.retry_count.max(1) {
        let map = carve_maze(params, &mut rng);
        let (_, sizes) = label_components(&map);
        if sizes.len() == 1 && sizes[0] >= 2 {
            return Ok(map);
        }
    }
    Err(Error::Generation(format!(
        "maze constraints unsatisfied after {} attempts (seed {seed})",
        params.retry_count
    )))
}

fn carve_maze(params: &MazeParams, rng: &mut impl Rng) -> GridMap {
    let size = params.size;
    let mut free = vec![false; size * size];
    let idx = |r: usize, c: usize| r * size + c;

    let mut rooms: Vec<Room> = Vec::new();
    let sides = odd_sizes(params.room_min_size, params.room_max_size);
    for _ in 0..params.max_rooms {
        let height = *sides.choose(rng).unwrap();
        let width = *sides.choose(rng).unwrap();
        // Odd offsets with the room ending at or before size - 2.
        let (Some(max_top), Some(max_left)) = (
            (size - 1).checked_sub(height),
            (size - 1).checked_sub(width),
        ) else {
            continue;
        };
        if max_top < 1 || max_left < 1 {
            continue;
        }
        let top = 1 + 2 * rng.gen_range(0..=(max_top - 1) / 2);
        let left = 1 + 2 * rng.gen_range(0..=(max_left - 1) / 2);
        let room = Room {
            top,
            left,
            height,
            width,
        };
        if rooms.iter().any(|r| r.crowds(&room)) {
            continue;
        }
        for r in top..top + height {
            for c in left..left + width {
                free[idx(r, c)] = true;
            }
        }
        rooms.push(room);
    }
    let in_room = |r: usize, c: usize| rooms.iter().any(|room| room.contains(r, c));

    // Perfect maze over lattice cells outside rooms, one backtracker per region.
    let mut lattice: Vec<(usize, usize)> = (1..size - 1)
        .step_by(2)
        .flat_map(|r| (1..size - 1).step_by(2).map(move |c| (r, c)))
        .filter(|&(r, c)| !in_room(r, c))
        .collect();
    lattice.shuffle(rng);
    let mut visited = vec![false; size * size];
    for &origin in &lattice {
        if visited[idx(origin.0, origin.1)] {
            continue;
        }
        visited[idx(origin.0, origin.1)] = true;
        free[idx(origin.0, origin.1)] = true;
        let mut stack = vec![origin];
        while let Some(&(r, c)) = stack.last() {
            let mut options = Vec::with_capacity(4);
            for (dr, dc) in [(-2i64, 0i64), (2, 0), (0, -2), (0, 2)] {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                if nr < 1 || nc < 1 || nr > size as i64 - 2 || nc > size as i64 - 2 {
                    continue;
                }
                let (nr, nc) = (nr as usize, nc as usize);
                if !visited[idx(nr, nc)] && !in_room(nr, nc) {
                    options.push((nr, nc));
                }
            }
            match options.choose(rng) {
                Some(&(nr, nc)) => {
                    visited[idx(nr, nc)] = true;
                    free[idx(nr, nc)] = true;
                    free[idx((r + nr) / 2, (c + nc) / 2)] = true;
                    stack.push((nr, nc));
                }
                None => {
                    stack.pop();
                }
            }
        }
    }

    // Wall cells that separate two free lattice cells along one axis.
    let connectors = |free: &[bool]| -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for r in 1..size - 1 {
            for c in 1..size - 1 {
                if free[idx(r, c)] || (r % 2 == 0) == (c % 2 == 0) {
                    continue;
                }
                let (a, b) = if r % 2 == 0 {
                    (idx(r - 1, c), idx(r + 1, c))
                } else {
                    (idx(r, c - 1), idx(r, c + 1))
                };
                if free[a] && free[b] {
                    out.push((idx(r, c), a, b));
                }
            }
        }
        out
    };

    if params.has_doors {
        for room in &rooms {
            let doors: Vec<usize> = connectors(&free)
                .into_iter()
                .filter(|&(_, a, b)| {
                    let ra = room.contains(a / size, a % size);
                    let rb = room.contains(b / size, b % size);
                    ra != rb
                })
                .map(|(w, _, _)| w)
                .collect();
            if let Some(&door) = doors.choose(rng) {
                free[door] = true;
            }
        }
    }

    let mut uf = UnionFind((0..size * size).collect());
    let join_neighbors = |uf: &mut UnionFind, free: &[bool]| {
        for r in 0..size {
            for c in 0..size {
                if !free[idx(r, c)] {
                    continue;
                }
                if r + 1 < size && free[idx(r + 1, c)] {
                    uf.union(idx(r, c), idx(r + 1, c));
                }
                if c + 1 < size && free[idx(r, c + 1)] {
                    uf.union(idx(r, c), idx(r, c + 1));
                }
            }
        }
    };
    join_neighbors(&mut uf, &free);
    let mut candidates = connectors(&free);
    candidates.shuffle(rng);
    for &(w, a, b) in &candidates {
        if uf.union(a, b) {
            free[w] = true;
            uf.union(w, a);
        }
    }
    for &(w, _, _) in &candidates {
        if !free[w] && rng.gen_bool(params.extra_connection_probability) {
            free[w] = true;
        }
    }

    let map =
        GridMap::from_blocked(size, size, free.iter().map(|f| !f).collect()).expect("square mask");
    fill_small_components(&map, params.min_component_size)
}
