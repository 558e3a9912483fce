//! The multi-agent grid environment.
//!
//! A [`World`] holds the static part of an episode (map, agent starts and
//! goals, episode step limit). The dynamic part is an [`EnvState`] value that
//! carries agent positions, the active flags, the step counter and the
//! pseudo-random stream used to resolve conflicts. States are plain values:
//! cloning one is a snapshot, and replaying the same joint actions from a
//! clone reproduces the same trajectory.
//!
//! Joint transitions resolve collisions as follows:
//!
//! 1. every active agent computes its desired cell (`Wait` keeps the current one);
//! 2. a cell wanted by several agents goes to the agent already standing there
//!    if it waits, otherwise to one mover drawn uniformly at random;
//! 3. two agents trying to exchange cells are both denied;
//! 4. denials cascade until no mover targets a cell that stays occupied;
//! 5. agents that end on their goal are deactivated and leave the grid.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A grid coordinate. Serialized as `[row, col]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct Cell {
    pub row: i32,
    pub col: i32,
}

impl Cell {
    pub const fn new(row: i32, col: i32) -> Self {
        Cell { row, col }
    }

    pub fn offset(self, action: Action) -> Cell {
        let (dr, dc) = action.delta();
        Cell::new(self.row + dr, self.col + dc)
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

impl From<[i32; 2]> for Cell {
    fn from([row, col]: [i32; 2]) -> Self {
        Cell { row, col }
    }
}

impl From<Cell> for [i32; 2] {
    fn from(c: Cell) -> Self {
        [c.row, c.col]
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Individual agent action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Wait = 0,
    Up = 1,
    Down = 2,
    Left = 3,
    Right = 4,
}

impl Action {
    /// All actions in index order.
    pub const ALL: [Action; 5] = [
        Action::Wait,
        Action::Up,
        Action::Down,
        Action::Left,
        Action::Right,
    ];

    /// Moves in the fixed tie-breaking order used by path search.
    pub const MOVES: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    pub fn delta(self) -> (i32, i32) {
        match self {
            Action::Wait => (0, 0),
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
        }
    }

    /// The action that moves `from` to the 4-neighbour (or same cell) `to`.
    pub fn between(from: Cell, to: Cell) -> Option<Action> {
        Action::ALL.into_iter().find(|a| from.offset(*a) == to)
    }
}

/// Static 4-connected grid of free and blocked cells.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridMap {
    width: usize,
    height: usize,
    blocked: Vec<bool>,
}

impl GridMap {
    /// An all-free map.
    pub fn new(width: usize, height: usize) -> Result<Self> {
        Self::from_blocked(width, height, vec![false; width * height])
    }

    /// Builds a map from a row-major blocked mask.
    pub fn from_blocked(width: usize, height: usize, blocked: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Validation(format!(
                "map dimensions must be positive, got {width}x{height}"
            )));
        }
        if blocked.len() != width * height {
            return Err(Error::Validation(format!(
                "mask has {} cells, expected {}",
                blocked.len(),
                width * height
            )));
        }
        Ok(GridMap {
            width,
            height,
            blocked,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.blocked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocked.is_empty()
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.row >= 0 && c.col >= 0 && (c.row as usize) < self.height && (c.col as usize) < self.width
    }

    /// Row-major index of an in-bounds cell.
    pub fn index(&self, c: Cell) -> Option<usize> {
        self.in_bounds(c)
            .then(|| c.row as usize * self.width + c.col as usize)
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new((index / self.width) as i32, (index % self.width) as i32)
    }

    /// Out-of-bounds coordinates count as blocked.
    pub fn is_blocked(&self, c: Cell) -> bool {
        self.index(c).is_none_or(|i| self.blocked[i])
    }

    pub fn is_free(&self, c: Cell) -> bool {
        !self.is_blocked(c)
    }

    pub fn set_blocked(&mut self, c: Cell, blocked: bool) {
        if let Some(i) = self.index(c) {
            self.blocked[i] = blocked;
        }
    }

    pub fn blocked_mask(&self) -> &[bool] {
        &self.blocked
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.len()).map(|i| self.cell_at(i))
    }

    pub fn free_cells(&self) -> Vec<Cell> {
        self.cells().filter(|c| self.is_free(*c)).collect()
    }

    pub fn blocked_count(&self) -> usize {
        self.blocked.iter().filter(|b| **b).count()
    }

    /// Free 4-neighbours in `Action::MOVES` order.
    pub fn free_neighbors(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        Action::MOVES
            .into_iter()
            .map(move |a| c.offset(a))
            .filter(|n| self.is_free(*n))
    }

    /// Parses the `.`/`#` text format. A trailing newline is allowed.
    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text
            .lines()
            .map(|l| l.strip_suffix('\r').unwrap_or(l))
            .collect();
        let lines = match lines.iter().rposition(|l| !l.is_empty()) {
            Some(last) => &lines[..=last],
            None => {
                return Err(Error::Parse {
                    line: 1,
                    column: 1,
                    message: "empty map".into(),
                })
            }
        };
        let width = lines[0].chars().count();
        let mut blocked = Vec::with_capacity(width * lines.len());
        for (r, line) in lines.iter().enumerate() {
            let mut count = 0;
            for (c, ch) in line.chars().enumerate() {
                match ch {
                    '.' => blocked.push(false),
                    '#' => blocked.push(true),
                    other => {
                        return Err(Error::Parse {
                            line: r + 1,
                            column: c + 1,
                            message: format!("illegal character {other:?}"),
                        })
                    }
                }
                count += 1;
            }
            if count != width {
                return Err(Error::Parse {
                    line: r + 1,
                    column: count.min(width) + 1,
                    message: format!("ragged row: {count} cells, expected {width}"),
                });
            }
        }
        if width == 0 {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: "empty row".into(),
            });
        }
        GridMap::from_blocked(width, lines.len(), blocked)
    }
}

impl FromStr for GridMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GridMap::parse(s)
    }
}

impl fmt::Display for GridMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.height {
            for c in 0..self.width {
                let ch = if self.blocked[r * self.width + c] {
                    '#'
                } else {
                    '.'
                };
                write!(f, "{ch}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Parses a map from its text form.
pub fn load_map(text: &str) -> Result<GridMap> {
    GridMap::parse(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: usize,
    pub start: Cell,
    pub goal: Cell,
}

/// Legal individual actions of one agent, in index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LegalActions {
    actions: [Action; 5],
    len: u8,
}

impl LegalActions {
    pub fn for_cell(map: &GridMap, at: Cell) -> Self {
        let mut actions = [Action::Wait; 5];
        let mut len = 1;
        for a in Action::MOVES {
            if map.is_free(at.offset(a)) {
                actions[len] = a;
                len += 1;
            }
        }
        LegalActions {
            actions,
            len: len as u8,
        }
    }

    pub fn as_slice(&self) -> &[Action] {
        &self.actions[..self.len as usize]
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, a: Action) -> bool {
        self.as_slice().contains(&a)
    }

    pub fn iter(&self) -> impl Iterator<Item = Action> + '_ {
        self.as_slice().iter().copied()
    }
}

/// One individual action per agent; entries of inactive agents are ignored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointAction(pub Vec<Action>);

impl JointAction {
    pub fn wait(n: usize) -> Self {
        JointAction(vec![Action::Wait; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for JointAction {
    type Output = Action;

    fn index(&self, i: usize) -> &Action {
        &self.0[i]
    }
}

/// What happened during one joint step. All id lists are ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepEvents {
    pub reached_goal: Vec<usize>,
    /// Left empty by the environment; filled by subgoal trackers.
    pub reached_subgoal: Vec<usize>,
    pub blocked_moves: Vec<usize>,
}

/// Dynamic environment state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub positions: Vec<Cell>,
    pub active: Vec<bool>,
    pub step: u32,
    rng: ChaCha8Rng,
}

impl EnvState {
    pub fn num_agents(&self) -> usize {
        self.positions.len()
    }

    pub fn num_active(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    /// Ids of active agents, ascending.
    pub fn active_agents(&self) -> impl Iterator<Item = usize> + '_ {
        self.active
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.then_some(i))
    }

    /// Replaces the conflict-resolution stream.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot(self.clone())
    }

    /// Stable byte encoding of the full state, rng position included.
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("EnvState is always serializable")
    }
}

/// A saved environment state.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot(EnvState);

impl Snapshot {
    pub fn restore(&self) -> EnvState {
        self.0.clone()
    }
}

pub fn snapshot(state: &EnvState) -> Snapshot {
    state.snapshot()
}

pub fn restore(snapshot: &Snapshot) -> EnvState {
    snapshot.restore()
}

/// True when no agent is active or the step limit has been reached.
pub fn is_terminal(state: &EnvState, k_max: u32) -> bool {
    state.step >= k_max || !state.active.iter().any(|a| *a)
}

/// Static episode definition: map, agents and step limit.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    map: GridMap,
    agents: Vec<AgentSpec>,
    k_max: u32,
}

impl World {
    pub fn new(map: GridMap, agents: Vec<AgentSpec>, k_max: u32) -> Result<Self> {
        validate_agents(&map, &agents)?;
        Ok(World { map, agents, k_max })
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn agents(&self) -> &[AgentSpec] {
        &self.agents
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn k_max(&self) -> u32 {
        self.k_max
    }

    pub fn goal(&self, agent: usize) -> Cell {
        self.agents[agent].goal
    }

    /// Initial state. Agents starting on their goal are inactive from step 0.
    pub fn reset(&self, seed: u64) -> EnvState {
        EnvState {
            positions: self.agents.iter().map(|a| a.start).collect(),
            active: self.agents.iter().map(|a| a.start != a.goal).collect(),
            step: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn is_terminal(&self, state: &EnvState) -> bool {
        is_terminal(state, self.k_max)
    }

    /// Remaining joint steps before the step limit.
    pub fn remaining_steps(&self, state: &EnvState) -> u32 {
        self.k_max.saturating_sub(state.step)
    }

    /// Moves into static obstacles are illegal; other agents never restrict legality.
    pub fn legal_actions(&self, state: &EnvState, agent: usize) -> Result<LegalActions> {
        match state.active.get(agent) {
            Some(true) => Ok(LegalActions::for_cell(&self.map, state.positions[agent])),
            Some(false) => Err(Error::Contract(format!("agent {agent} is not active"))),
            None => Err(Error::Contract(format!("no agent with id {agent}"))),
        }
    }

    pub fn step(&self, state: &EnvState, action: &JointAction) -> Result<(EnvState, StepEvents)> {
        let mut next = state.clone();
        let events = self.step_mut(&mut next, action)?;
        Ok((next, events))
    }

    /// In-place joint transition. On error the state is left untouched.
    pub fn step_mut(&self, state: &mut EnvState, action: &JointAction) -> Result<StepEvents> {
        let n = state.num_agents();
        if action.len() != n {
            return Err(Error::Contract(format!(
                "joint action has {} entries for {n} agents",
                action.len()
            )));
        }
        if self.is_terminal(state) {
            return Err(Error::Contract(format!(
                "step called on terminal state (step {})",
                state.step
            )));
        }

        let active: Vec<usize> = state.active_agents().collect();
        let mut desired = state.positions.clone();
        let mut moving = vec![false; n];
        for &i in &active {
            let a = action[i];
            let target = state.positions[i].offset(a);
            if a != Action::Wait {
                if self.map.is_blocked(target) {
                    return Err(Error::Contract(format!(
                        "agent {i} at {} cannot move {a:?} into a blocked cell",
                        state.positions[i]
                    )));
                }
                desired[i] = target;
                moving[i] = true;
            }
        }

        let mut denied = vec![false; n];

        // Vertex conflicts, grouped by target cell, groups visited by lowest agent id.
        let mut grouped = vec![false; n];
        let mut group = Vec::new();
        for &i in &active {
            if grouped[i] {
                continue;
            }
            group.clear();
            for j in i..n {
                if state.active[j] && desired[j] == desired[i] {
                    grouped[j] = true;
                    group.push(j);
                }
            }
            if group.len() < 2 {
                continue;
            }
            if group.iter().any(|&j| !moving[j]) {
                for &j in &group {
                    denied[j] |= moving[j];
                }
            } else {
                let winner = group[state.rng.gen_range(0..group.len())];
                for &j in &group {
                    denied[j] |= j != winner;
                }
            }
        }

        // Swap conflicts.
        for &i in &active {
            if !moving[i] {
                continue;
            }
            for j in (i + 1)..n {
                if state.active[j]
                    && moving[j]
                    && desired[i] == state.positions[j]
                    && desired[j] == state.positions[i]
                {
                    denied[i] = true;
                    denied[j] = true;
                }
            }
        }

        // Cascade: a mover may not enter a cell whose occupant stays put.
        loop {
            let mut changed = false;
            for i in 0..n {
                if !state.active[i] || !moving[i] || denied[i] {
                    continue;
                }
                let blocked_by_stayer = (0..n).any(|j| {
                    j != i
                        && state.active[j]
                        && (!moving[j] || denied[j])
                        && state.positions[j] == desired[i]
                });
                if blocked_by_stayer {
                    denied[i] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        let mut events = StepEvents::default();
        for i in 0..n {
            if !state.active[i] {
                continue;
            }
            if moving[i] && !denied[i] {
                state.positions[i] = desired[i];
            } else if denied[i] {
                events.blocked_moves.push(i);
            }
            if state.positions[i] == self.agents[i].goal {
                state.active[i] = false;
                events.reached_goal.push(i);
            }
        }
        state.step += 1;
        Ok(events)
    }
}

fn validate_agents(map: &GridMap, agents: &[AgentSpec]) -> Result<()> {
    for (i, a) in agents.iter().enumerate() {
        if a.id != i {
            return Err(Error::Validation(format!(
                "agent at position {i} has id {}",
                a.id
            )));
        }
        if map.is_blocked(a.start) {
            return Err(Error::Validation(format!(
                "agent {i} starts on blocked cell {}",
                a.start
            )));
        }
        if map.is_blocked(a.goal) {
            return Err(Error::Validation(format!(
                "agent {i} has blocked goal {}",
                a.goal
            )));
        }
        for b in &agents[..i] {
            if b.start == a.start {
                return Err(Error::Validation(format!(
                    "agents {} and {i} share start {}",
                    b.id, a.start
                )));
            }
            if b.goal == a.goal {
                return Err(Error::Validation(format!(
                    "agents {} and {i} share goal {}",
                    b.id, a.goal
                )));
            }
        }
    }
    Ok(())
}
