//! Per-step decision rules that do not search: the uniform random policy and
//! the re-planning A* baseline.
//!
//! The A* baseline plans on the full map with every other active agent
//! treated as an obstacle and executes the first move of its plan. When the
//! agent's last two executed steps did not bring it closer to its goal
//! (agent-free shortest-path distance), it takes a random legal action
//! instead and forgets its history.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_world::{Action, Cell, EnvState, JointAction, World};
use crate::seeding::{derive_seed, rng_from};
use crate::shortest_path::{find_path, DistanceField};
use crate::tree_search::random_legal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Random,
    AStar,
}

const POSITION_WINDOW: usize = 3;
const ACTION_WINDOW: usize = 2;

/// Recent trajectory of one agent, oldest first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AgentHistory {
    pub positions: VecDeque<Cell>,
    pub actions: VecDeque<Action>,
}

impl AgentHistory {
    fn push(&mut self, action: Action, position: Cell) {
        if self.actions.len() == ACTION_WINDOW {
            self.actions.pop_front();
        }
        self.actions.push_back(action);
        if self.positions.len() == POSITION_WINDOW {
            self.positions.pop_front();
        }
        self.positions.push_back(position);
    }

    fn reset_to(&mut self, position: Cell) {
        self.actions.clear();
        self.positions.clear();
        self.positions.push_back(position);
    }
}

/// Per-agent memory and randomness for the non-search policies.
#[derive(Debug, Clone)]
pub struct PolicyContext {
    histories: Vec<AgentHistory>,
    rngs: Vec<ChaCha8Rng>,
    distances: Vec<DistanceField>,
}

impl PolicyContext {
    pub fn new(world: &World, seed: u64) -> Self {
        let agents = world.agents();
        PolicyContext {
            histories: agents
                .iter()
                .map(|a| {
                    let mut h = AgentHistory::default();
                    h.reset_to(a.start);
                    h
                })
                .collect(),
            rngs: (0..agents.len())
                .map(|i| rng_from(derive_seed(seed, &[i as u64])))
                .collect(),
            distances: agents
                .iter()
                .map(|a| DistanceField::new(world.map(), a.goal))
                .collect(),
        }
    }

    pub fn history(&self, agent: usize) -> &AgentHistory {
        &self.histories[agent]
    }

    pub fn rng(&mut self, agent: usize) -> &mut ChaCha8Rng {
        &mut self.rngs[agent]
    }

    /// Records the executed joint action and the resulting positions.
    pub fn record(&mut self, executed: &JointAction, after: &EnvState) {
        for (i, h) in self.histories.iter_mut().enumerate() {
            if after.active[i] {
                h.push(executed[i], after.positions[i]);
            }
        }
    }

    /// True when the last two recorded steps brought no net progress toward the goal.
    pub fn fallback_due(&self, agent: usize) -> bool {
        let h = &self.histories[agent];
        if h.positions.len() < POSITION_WINDOW {
            return false;
        }
        let dist = |c: Cell| self.distances[agent].get(c).unwrap_or(u32::MAX);
        dist(h.positions[POSITION_WINDOW - 1]) >= dist(h.positions[0])
    }
}

fn require_active(state: &EnvState, agent: usize) -> Result<()> {
    match state.active.get(agent) {
        Some(true) => Ok(()),
        _ => Err(Error::Contract(format!("agent {agent} is not active"))),
    }
}

/// Uniform over the agent's legal actions.
pub fn random_policy_act(
    world: &World,
    state: &EnvState,
    agent: usize,
    rng: &mut impl Rng,
) -> Result<Action> {
    require_active(state, agent)?;
    Ok(random_legal(world, state.positions[agent], rng))
}

/// First move of a shortest path that treats other active agents as
/// obstacles; waits when no such path exists. Falls back to a random legal
/// action when recent steps made no progress.
pub fn astar_policy_act(
    world: &World,
    state: &EnvState,
    agent: usize,
    ctx: &mut PolicyContext,
) -> Result<Action> {
    require_active(state, agent)?;
    let here = state.positions[agent];
    if ctx.fallback_due(agent) {
        ctx.histories[agent].reset_to(here);
        return Ok(random_legal(world, here, &mut ctx.rngs[agent]));
    }
    let others: Vec<Cell> = state
        .active_agents()
        .filter(|&j| j != agent)
        .map(|j| state.positions[j])
        .collect();
    Ok(find_path(world.map(), here, world.goal(agent), &others)
        .map_or(Action::Wait, |p| p.first_action()))
}

/// Invokes each active agent's policy; inactive agents wait.
pub fn joint_policy_act(
    world: &World,
    state: &EnvState,
    policies: &[PolicyKind],
    ctx: &mut PolicyContext,
) -> Result<JointAction> {
    if world.is_terminal(state) {
        return Err(Error::Contract("no decision in a terminal state".into()));
    }
    if policies.len() != state.num_agents() {
        return Err(Error::Contract(format!(
            "{} policies for {} agents",
            policies.len(),
            state.num_agents()
        )));
    }
    let mut joint = JointAction::wait(state.num_agents());
    let active: Vec<usize> = state.active_agents().collect();
    for i in active {
        joint.0[i] = match policies[i] {
            PolicyKind::Random => random_policy_act(world, state, i, &mut ctx.rngs[i])?,
            PolicyKind::AStar => astar_policy_act(world, state, i, ctx)?,
        };
    }
    Ok(joint)
}
