//! Single-agent shortest paths and subgoal tracking.
//!
//! [`find_path`] is A* with the Manhattan heuristic and unit edge costs.
//! Successors are generated in the order up, down, left, right and nodes with
//! equal f-value leave the open list in insertion order, so the returned path
//! is a pure function of its inputs.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};

use crate::grid_world::{Action, Cell, GridMap};

/// Cells from start to goal inclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub cells: Vec<Cell>,
}

impl Path {
    /// Number of moves (cells minus one).
    pub fn len_moves(&self) -> usize {
        self.cells.len() - 1
    }

    pub fn start(&self) -> Cell {
        self.cells[0]
    }

    pub fn goal(&self) -> Cell {
        *self.cells.last().expect("paths are never empty")
    }

    /// First action along the path, `Wait` for a single-cell path.
    pub fn first_action(&self) -> Action {
        match self.cells.get(1) {
            Some(&next) => Action::between(self.cells[0], next).expect("path cells are adjacent"),
            None => Action::Wait,
        }
    }
}

/// Shortest path from `start` to `goal`, treating `occupied` cells as blocked.
///
/// Returns `None` when the goal cannot be reached or an endpoint is blocked.
pub fn find_path(map: &GridMap, start: Cell, goal: Cell, occupied: &[Cell]) -> Option<Path> {
    let blocked = |c: Cell| map.is_blocked(c) || occupied.contains(&c);
    if blocked(start) || blocked(goal) {
        return None;
    }
    let start_i = map.index(start)?;
    let goal_i = map.index(goal)?;

    let mut g = vec![u32::MAX; map.len()];
    let mut parent = vec![usize::MAX; map.len()];
    let mut closed = vec![false; map.len()];
    // Min-heap on (f, insertion order).
    let mut open = BinaryHeap::new();
    let mut counter: u64 = 0;

    g[start_i] = 0;
    open.push(Reverse((start.manhattan(goal), counter, start_i)));

    while let Some(Reverse((_, _, cur_i))) = open.pop() {
        if closed[cur_i] {
            continue;
        }
        closed[cur_i] = true;
        if cur_i == goal_i {
            let mut cells = vec![map.cell_at(goal_i)];
            let mut i = goal_i;
            while i != start_i {
                i = parent[i];
                cells.push(map.cell_at(i));
            }
            cells.reverse();
            return Some(Path { cells });
        }
        let cur = map.cell_at(cur_i);
        let next_g = g[cur_i] + 1;
        for a in Action::MOVES {
            let nb = cur.offset(a);
            if blocked(nb) {
                continue;
            }
            let nb_i = map.index(nb).expect("free cells are in bounds");
            if closed[nb_i] || next_g >= g[nb_i] {
                continue;
            }
            g[nb_i] = next_g;
            parent[nb_i] = cur_i;
            counter += 1;
            open.push(Reverse((next_g + nb.manhattan(goal), counter, nb_i)));
        }
    }
    None
}

/// BFS distances (in moves) from every free cell to a fixed target, ignoring agents.
#[derive(Debug, Clone)]
pub struct DistanceField {
    target: Cell,
    dist: Vec<u32>,
    width: usize,
}

impl DistanceField {
    pub const UNREACHABLE: u32 = u32::MAX;

    pub fn new(map: &GridMap, target: Cell) -> Self {
        let mut dist = vec![Self::UNREACHABLE; map.len()];
        if let Some(t) = map.index(target).filter(|_| map.is_free(target)) {
            dist[t] = 0;
            let mut queue = VecDeque::from([target]);
            while let Some(c) = queue.pop_front() {
                let d = dist[map.index(c).unwrap()];
                for nb in map.free_neighbors(c) {
                    let i = map.index(nb).unwrap();
                    if dist[i] == Self::UNREACHABLE {
                        dist[i] = d + 1;
                        queue.push_back(nb);
                    }
                }
            }
        }
        DistanceField {
            target,
            dist,
            width: map.width(),
        }
    }

    pub fn target(&self) -> Cell {
        self.target
    }

    /// Distance to the target, `None` when unreachable or out of bounds.
    pub fn get(&self, c: Cell) -> Option<u32> {
        if c.row < 0 || c.col < 0 || c.col as usize >= self.width {
            return None;
        }
        let i = c.row as usize * self.width + c.col as usize;
        self.dist
            .get(i)
            .copied()
            .filter(|d| *d != Self::UNREACHABLE)
    }
}

/// Source of subgoal cells: the cell `radius` moves along a shortest path
/// from `from` to `goal`, or the goal itself when it is closer than that.
pub trait SubgoalSource {
    fn subgoal(&mut self, from: Cell, goal: Cell, radius: usize) -> Option<Cell>;
}

fn subgoal_on_path(map: &GridMap, from: Cell, goal: Cell, radius: usize) -> Option<Cell> {
    let path = find_path(map, from, goal, &[])?;
    Some(path.cells[radius.min(path.len_moves())])
}

impl SubgoalSource for &GridMap {
    fn subgoal(&mut self, from: Cell, goal: Cell, radius: usize) -> Option<Cell> {
        subgoal_on_path(self, from, goal, radius)
    }
}

/// Memoizing [`SubgoalSource`] for a fixed map. Results are identical to
/// calling [`find_path`] directly.
#[derive(Debug)]
pub struct SubgoalCache<'m> {
    map: &'m GridMap,
    table: HashMap<(Cell, Cell, usize), Option<Cell>>,
}

impl<'m> SubgoalCache<'m> {
    pub fn new(map: &'m GridMap) -> Self {
        SubgoalCache {
            map,
            table: HashMap::new(),
        }
    }

    pub fn map(&self) -> &'m GridMap {
        self.map
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl SubgoalSource for SubgoalCache<'_> {
    fn subgoal(&mut self, from: Cell, goal: Cell, radius: usize) -> Option<Cell> {
        let map = self.map;
        *self
            .table
            .entry((from, goal, radius))
            .or_insert_with(|| subgoal_on_path(map, from, goal, radius))
    }
}

pub const DEFAULT_SUBGOAL_RADIUS: usize = 2;

/// Per-agent subgoal state. `current_subgoal` is `None` when the goal is
/// unreachable from the position where the subgoal was last computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubgoalTracker {
    pub agent: usize,
    pub goal: Cell,
    pub current_subgoal: Option<Cell>,
    pub radius: usize,
}

impl SubgoalTracker {
    /// Tracker with a freshly computed subgoal (possibly none).
    pub fn new(
        source: &mut impl SubgoalSource,
        agent: usize,
        position: Cell,
        goal: Cell,
        radius: usize,
    ) -> Self {
        SubgoalTracker {
            agent,
            goal,
            current_subgoal: source.subgoal(position, goal, radius),
            radius,
        }
    }

    pub fn has_subgoal(&self) -> bool {
        self.current_subgoal.is_some()
    }

    /// Reports whether `position` is the current subgoal, recomputing the
    /// subgoal when it was reached or the agent drifted farther than the
    /// radius (Manhattan) from it.
    pub fn update(&mut self, source: &mut impl SubgoalSource, position: Cell) -> bool {
        let Some(sub) = self.current_subgoal else {
            return false;
        };
        let reached = position == sub;
        if reached || position.manhattan(sub) as usize > self.radius {
            self.current_subgoal = source.subgoal(position, self.goal, self.radius);
        }
        reached
    }
}

/// Starts tracking; `None` when the goal is unreachable from `position`.
pub fn init_subgoal(
    map: &GridMap,
    agent: usize,
    position: Cell,
    goal: Cell,
    radius: usize,
) -> Option<SubgoalTracker> {
    let tracker = SubgoalTracker::new(&mut &*map, agent, position, goal, radius);
    tracker.has_subgoal().then_some(tracker)
}

pub fn update_subgoal(
    tracker: &SubgoalTracker,
    map: &GridMap,
    position: Cell,
) -> (SubgoalTracker, bool) {
    let mut next = *tracker;
    let reached = next.update(&mut &*map, position);
    (next, reached)
}
