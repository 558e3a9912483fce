//! Monte-Carlo tree search planners for the grid environment.
//!
//! Three variants share one implementation:
//!
//! * [`SearchMode::Joint`]: every tree edge is a full joint action, so a node
//!   can have up to `5^n` children.
//! * [`SearchMode::Mamcts`]: the joint action is decomposed into a layer of
//!   per-agent decisions. Agents decide in ascending id order; the node
//!   created by the last active agent's choice is a *boundary* node, where the
//!   accumulated joint action is applied to the environment. Each node has at
//!   most five children.
//! * [`SearchMode::SubgoalMamcts`]: the decomposed tree plus a shaped reward
//!   paid when an agent reaches its current subgoal, and rollouts truncated
//!   after a few joint steps.
//!
//! Transitions are stochastic (collision winners are drawn at random), so a
//! boundary node keeps one [`Branch`] per distinct outcome it has produced;
//! the next layer of decisions hangs below the matching branch. Every
//! iteration restores the root state and reseeds the scratch environment's
//! collision stream from the search rng.
//!
//! Returns are discounted once per joint step. During backpropagation the
//! running return `X` starts at the rollout value and is replaced by
//! `r + gamma * X` at each boundary node, so all per-agent nodes of one layer
//! receive the same value as the boundary node that closes the layer.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_world::{Action, Cell, EnvState, JointAction, LegalActions, StepEvents, World};
use crate::shortest_path::{SubgoalCache, SubgoalSource, SubgoalTracker, DEFAULT_SUBGOAL_RADIUS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Joint,
    Mamcts,
    SubgoalMamcts,
}

impl SearchMode {
    pub fn is_decomposed(self) -> bool {
        !matches!(self, SearchMode::Joint)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MctsConfig {
    pub iterations: usize,
    pub exploration_c: f64,
    pub gamma: f64,
    /// Joint steps simulated per rollout; `None` runs until the episode ends.
    pub sim_depth_limit: Option<u32>,
    pub r_target: f64,
    pub r_subgoal: f64,
    pub subgoal_radius: usize,
    pub mode: SearchMode,
}

impl Default for MctsConfig {
    fn default() -> Self {
        MctsConfig::for_mode(SearchMode::SubgoalMamcts)
    }
}

impl MctsConfig {
    /// Benchmark defaults: 1000 iterations, C_p = 1, gamma = 0.9, rewards
    /// 1 / 0.1, rollouts limited to 10 steps in subgoal mode only.
    pub fn for_mode(mode: SearchMode) -> Self {
        MctsConfig {
            iterations: 1000,
            exploration_c: 1.0,
            gamma: 0.9,
            sim_depth_limit: (mode == SearchMode::SubgoalMamcts).then_some(10),
            r_target: 1.0,
            r_subgoal: 0.1,
            subgoal_radius: DEFAULT_SUBGOAL_RADIUS,
            mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Validation("iterations must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Validation(format!(
                "gamma {} outside [0, 1]",
                self.gamma
            )));
        }
        if self.r_subgoal >= self.r_target {
            return Err(Error::Validation(format!(
                "r_subgoal ({}) must be smaller than r_target ({})",
                self.r_subgoal, self.r_target
            )));
        }
        if !self.exploration_c.is_finite() || self.exploration_c < 0.0 {
            return Err(Error::Validation(format!(
                "exploration_c {} must be finite and non-negative",
                self.exploration_c
            )));
        }
        Ok(())
    }
}

/// UCT score of a child; unvisited children score `+inf`.
pub fn uct_score(
    total_return: f64,
    child_visits: u64,
    parent_visits: u64,
    exploration_c: f64,
) -> f64 {
    if child_visits == 0 {
        return f64::INFINITY;
    }
    let kj = child_visits as f64;
    total_return / kj + exploration_c * (2.0 * (parent_visits as f64).ln() / kj).sqrt()
}

/// Shared step reward: per-agent rewards summed and divided by the episode's
/// agent count. A goal arrival pays `r_target`; otherwise, in subgoal mode, a
/// subgoal arrival pays `r_subgoal`.
pub fn reward(events: &StepEvents, n_agents: usize, cfg: &MctsConfig) -> f64 {
    let goals = events.reached_goal.len() as f64 * cfg.r_target;
    let subgoals = if cfg.mode == SearchMode::SubgoalMamcts {
        events
            .reached_subgoal
            .iter()
            .filter(|a| !events.reached_goal.contains(a))
            .count() as f64
            * cfg.r_subgoal
    } else {
        0.0
    };
    (goals + subgoals) / n_agents as f64
}

/// `sum_k gamma^k * rewards[k]`.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc)
}

pub type NodeId = usize;

/// Who chooses at a decision point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decider {
    Agent(usize),
    /// All active agents at once.
    Joint,
    /// The state is terminal; nothing to decide.
    Terminal,
}

/// A decision point below a node. Non-boundary nodes have exactly one; a
/// boundary node has one per distinct outcome of its joint action.
#[derive(Debug, Clone)]
pub struct Branch {
    /// Agent positions at this decision point, `None` for removed agents.
    pub state: Vec<Option<Cell>>,
    pub visits: u64,
    pub decider: Decider,
    pub children: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct SearchNode {
    pub visits: u64,
    pub total_return: f64,
    /// Iterations whose rollout started here (or that stopped here on a terminal state).
    pub leaf_visits: u64,
    pub parent: Option<NodeId>,
    /// Edge label: action index (decomposed) or mixed-radix joint index.
    pub key: u64,
    /// The agent whose choice created this node, `None` for the root and joint edges.
    pub agent: Option<usize>,
    /// Actions chosen earlier in the current layer, in agent order.
    pub pending: Vec<Action>,
    pub is_boundary: bool,
    pub branches: Vec<Branch>,
}

impl SearchNode {
    pub fn mean_value(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.total_return / self.visits as f64
        }
    }
}

/// One node on an iteration's path and the reward paid if it is a boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathStep {
    pub node: NodeId,
    pub branch: usize,
    pub boundary_reward: Option<f64>,
}

/// Walks the path leaf to root, discounting once per boundary node.
pub fn backpropagate(tree: &mut SearchTree, path: &[PathStep], leaf_return: f64, gamma: f64) {
    let mut running = leaf_return;
    for step in path.iter().rev() {
        if let Some(r) = step.boundary_reward {
            running = r + gamma * running;
        }
        let node = &mut tree.nodes[step.node];
        node.visits += 1;
        node.total_return += running;
        if let Some(b) = node.branches.get_mut(step.branch) {
            b.visits += 1;
        }
    }
}

/// Index of the child with the highest UCT score; exact ties are broken
/// uniformly with `rng`. `stats` holds `(total_return, visits)` per child.
pub fn select_child(
    stats: &[(f64, u64)],
    parent_visits: u64,
    exploration_c: f64,
    rng: &mut impl Rng,
) -> usize {
    assert!(!stats.is_empty(), "select_child needs at least one child");
    let scores: Vec<f64> = stats
        .iter()
        .map(|&(v, k)| uct_score(v, k, parent_visits, exploration_c))
        .collect();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] == best).collect();
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.gen_range(0..ties.len())]
    }
}

/// Joint action being assembled within one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialJoint {
    actions: Vec<Action>,
    decided: Vec<bool>,
}

impl PartialJoint {
    pub fn new(n: usize) -> Self {
        PartialJoint {
            actions: vec![Action::Wait; n],
            decided: vec![false; n],
        }
    }

    pub fn set(&mut self, agent: usize, action: Action) {
        self.actions[agent] = action;
        self.decided[agent] = true;
    }

    pub fn get(&self, agent: usize) -> Option<Action> {
        self.decided[agent].then(|| self.actions[agent])
    }

    pub fn clear(&mut self) {
        self.actions.fill(Action::Wait);
        self.decided.fill(false);
    }

    pub fn is_empty(&self) -> bool {
        !self.decided.iter().any(|d| *d)
    }

    /// Decided actions in agent order.
    pub fn decided_actions(&self) -> Vec<Action> {
        (0..self.actions.len())
            .filter_map(|i| self.get(i))
            .collect()
    }

    /// Decided actions, `Wait` elsewhere. At a boundary every active agent has decided.
    pub fn to_joint(&self) -> JointAction {
        JointAction(self.actions.clone())
    }

    /// Fills undecided active agents with uniform random legal actions.
    pub fn complete(&self, world: &World, state: &EnvState, rng: &mut impl Rng) -> JointAction {
        let mut out = JointAction::wait(self.actions.len());
        for i in state.active_agents() {
            out.0[i] = match self.get(i) {
                Some(a) => a,
                None => random_legal(world, state.positions[i], rng),
            };
        }
        out
    }
}

pub(crate) fn random_legal(world: &World, at: Cell, rng: &mut impl Rng) -> Action {
    let legal = LegalActions::for_cell(world.map(), at);
    legal.as_slice()[rng.gen_range(0..legal.len())]
}

/// Applies a joint action and computes the shaped reward, updating subgoal
/// trackers of agents still on the grid when subgoals are enabled.
fn apply_joint(
    world: &World,
    state: &mut EnvState,
    joint: &JointAction,
    trackers: &mut [Option<SubgoalTracker>],
    source: &mut impl SubgoalSource,
    cfg: &MctsConfig,
) -> Result<f64> {
    let mut events = world.step_mut(state, joint)?;
    if cfg.mode == SearchMode::SubgoalMamcts {
        for i in state.active_agents() {
            if let Some(t) = trackers[i].as_mut() {
                if t.update(source, state.positions[i]) {
                    events.reached_subgoal.push(i);
                }
            }
        }
    }
    Ok(reward(&events, world.num_agents(), cfg))
}

/// Random-policy rollout from `state`. The first simulated joint step
/// completes `pending`; the return is discounted from that step on.
pub fn simulate_rollout(
    world: &World,
    state: &mut EnvState,
    pending: &PartialJoint,
    trackers: &mut [Option<SubgoalTracker>],
    source: &mut impl SubgoalSource,
    cfg: &MctsConfig,
    rng: &mut impl Rng,
) -> Result<f64> {
    let limit = cfg.sim_depth_limit.unwrap_or(u32::MAX);
    let mut total = 0.0;
    let mut discount = 1.0;
    let mut first = true;
    for _ in 0..limit {
        if world.is_terminal(state) {
            break;
        }
        let joint = if first {
            first = false;
            pending.complete(world, state, rng)
        } else {
            PartialJoint::new(state.num_agents()).complete(world, state, rng)
        };
        total += discount * apply_joint(world, state, &joint, trackers, source, cfg)?;
        discount *= cfg.gamma;
    }
    Ok(total)
}

fn state_key(state: &EnvState) -> Vec<Option<Cell>> {
    state
        .positions
        .iter()
        .zip(&state.active)
        .map(|(p, a)| a.then_some(*p))
        .collect()
}

fn first_decider(state: &EnvState, world: &World, mode: SearchMode) -> Decider {
    if world.is_terminal(state) {
        Decider::Terminal
    } else if mode.is_decomposed() {
        Decider::Agent(
            state
                .active_agents()
                .next()
                .expect("non-terminal state has active agents"),
        )
    } else {
        Decider::Joint
    }
}

/// Agents deciding at a branch, ascending.
fn deciding_agents(decider: &Decider, state: &EnvState) -> Vec<usize> {
    match decider {
        Decider::Agent(a) => vec![*a],
        Decider::Joint => state.active_agents().collect(),
        Decider::Terminal => Vec::new(),
    }
}

/// Mixed-radix index: first agent most significant, base 5 per agent.
pub fn encode_key(actions: &[Action]) -> u64 {
    actions.iter().fold(0, |k, a| k * 5 + a.index() as u64)
}

pub fn decode_key(mut key: u64, n: usize) -> Vec<Action> {
    let mut out = vec![Action::Wait; n];
    for slot in out.iter_mut().rev() {
        *slot = Action::from_index((key % 5) as usize).unwrap();
        key /= 5;
    }
    out
}

/// Above this many joint combinations untried actions are found by rejection sampling.
const ENUMERATION_LIMIT: u64 = 3125;

/// Uniformly chosen legal key not yet among `tried`, or `None` when every
/// legal combination already has a child.
fn pick_untried(legal: &[LegalActions], tried: &[u64], rng: &mut impl Rng) -> Option<u64> {
    let total: u64 = legal
        .iter()
        .try_fold(1u64, |acc, l| acc.checked_mul(l.len() as u64))
        .unwrap_or(u64::MAX);
    if (tried.len() as u64) >= total {
        return None;
    }
    if total <= ENUMERATION_LIMIT {
        let mut keys = vec![0u64];
        for l in legal {
            keys = keys
                .iter()
                .flat_map(|k| l.iter().map(move |a| k * 5 + a.index() as u64))
                .collect();
        }
        keys.retain(|k| !tried.contains(k));
        return Some(keys[rng.gen_range(0..keys.len())]);
    }
    loop {
        let key = legal.iter().fold(0, |k, l| {
            k * 5 + l.as_slice()[rng.gen_range(0..l.len())].index() as u64
        });
        if !tried.contains(&key) {
            return Some(key);
        }
    }
}

/// A search tree rooted at one environment state.
#[derive(Debug, Clone)]
pub struct SearchTree {
    pub nodes: Vec<SearchNode>,
    pub mode: SearchMode,
    n_agents: usize,
}

impl SearchTree {
    pub fn new(world: &World, root: &EnvState, mode: SearchMode) -> Self {
        let root_node = SearchNode {
            visits: 0,
            total_return: 0.0,
            leaf_visits: 0,
            parent: None,
            key: 0,
            agent: None,
            pending: Vec::new(),
            is_boundary: false,
            branches: vec![Branch {
                state: state_key(root),
                visits: 0,
                decider: first_decider(root, world, mode),
                children: Vec::new(),
            }],
        };
        SearchTree {
            nodes: vec![root_node],
            mode,
            n_agents: root.num_agents(),
        }
    }

    pub fn root(&self) -> &SearchNode {
        &self.nodes[0]
    }

    pub fn root_children(&self) -> &[NodeId] {
        &self.nodes[0].branches[0].children
    }

    fn most_visited(&self, children: &[NodeId]) -> Option<NodeId> {
        children.iter().copied().min_by(|&a, &b| {
            let (na, nb) = (&self.nodes[a], &self.nodes[b]);
            nb.visits.cmp(&na.visits).then(na.key.cmp(&nb.key))
        })
    }

    /// Decisions read off the tree: the most visited root edge (joint mode) or
    /// the most visited chain through the first per-agent layer. Ties go to
    /// the lower action index. Agents the chain does not reach stay undecided.
    pub fn best_decisions(&self) -> PartialJoint {
        let mut decided = PartialJoint::new(self.n_agents);
        let root_branch = &self.nodes[0].branches[0];
        match root_branch.decider {
            Decider::Terminal => {}
            Decider::Joint => {
                let agents: Vec<usize> = (0..self.n_agents)
                    .filter(|&i| root_branch.state[i].is_some())
                    .collect();
                if let Some(best) = self.most_visited(&root_branch.children) {
                    let actions = decode_key(self.nodes[best].key, agents.len());
                    for (a, act) in agents.into_iter().zip(actions) {
                        decided.set(a, act);
                    }
                }
            }
            Decider::Agent(_) => {
                let mut node = 0;
                while let Some(branch) = self.nodes[node].branches.first() {
                    let Decider::Agent(agent) = branch.decider else {
                        break;
                    };
                    let Some(best) = self.most_visited(&branch.children) else {
                        break;
                    };
                    decided.set(agent, decode_key(self.nodes[best].key, 1)[0]);
                    if self.nodes[best].is_boundary {
                        break;
                    }
                    node = best;
                }
            }
        }
        decided
    }

    /// [`best_decisions`](Self::best_decisions) with undecided agents waiting.
    pub fn best_joint_action(&self) -> JointAction {
        self.best_decisions().to_joint()
    }

    /// Checks that every backpropagation updated exactly the nodes on its
    /// path: a node's visits equal its children's visits plus its leaf visits.
    pub fn visit_accounting_holds(&self) -> bool {
        self.nodes.iter().all(|n| {
            let below: u64 = n
                .branches
                .iter()
                .flat_map(|b| &b.children)
                .map(|&c| self.nodes[c].visits)
                .sum();
            n.visits == below + n.leaf_visits
                && n.branches.iter().map(|b| b.visits).sum::<u64>() == n.visits
        })
    }

    /// True when no child edge moves an agent into a blocked cell.
    pub fn respects_obstacles(&self, world: &World) -> bool {
        self.nodes.iter().all(|n| {
            n.branches.iter().all(|b| {
                let agents: Vec<usize> = match b.decider {
                    Decider::Agent(a) => vec![a],
                    Decider::Joint => (0..b.state.len())
                        .filter(|&i| b.state[i].is_some())
                        .collect(),
                    Decider::Terminal => return b.children.is_empty(),
                };
                b.children.iter().all(|&c| {
                    let actions = decode_key(self.nodes[c].key, agents.len());
                    agents
                        .iter()
                        .zip(actions)
                        .all(|(&a, act)| match b.state[a] {
                            Some(pos) => world.map().is_free(pos.offset(act)),
                            None => false,
                        })
                })
            })
        })
    }
}

/// Scratch state of one iteration.
struct Walk {
    env: EnvState,
    trackers: Vec<Option<SubgoalTracker>>,
    pending: PartialJoint,
}

/// Runs `cfg.iterations` select / expand / simulate / backpropagate cycles.
pub fn build_tree(
    world: &World,
    root: &EnvState,
    trackers: &[Option<SubgoalTracker>],
    source: &mut impl SubgoalSource,
    cfg: &MctsConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SearchTree> {
    cfg.validate()?;
    if world.is_terminal(root) {
        return Err(Error::Contract("cannot plan from a terminal state".into()));
    }
    let mut tree = SearchTree::new(world, root, cfg.mode);
    for _ in 0..cfg.iterations {
        run_iteration(&mut tree, world, root, trackers, source, cfg, rng)?;
    }
    Ok(tree)
}

fn run_iteration(
    tree: &mut SearchTree,
    world: &World,
    root: &EnvState,
    trackers: &[Option<SubgoalTracker>],
    source: &mut impl SubgoalSource,
    cfg: &MctsConfig,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let mut walk = Walk {
        env: root.clone(),
        trackers: trackers.to_vec(),
        pending: PartialJoint::new(root.num_agents()),
    };
    walk.env.reseed(rng.gen());

    let mut path = vec![PathStep {
        node: 0,
        branch: 0,
        boundary_reward: None,
    }];
    let (mut node, mut branch) = (0, 0);
    let leaf_return = loop {
        let decider = tree.nodes[node].branches[branch].decider.clone();
        if decider == Decider::Terminal {
            break 0.0;
        }
        let agents = deciding_agents(&decider, &walk.env);
        let legal: Vec<LegalActions> = agents
            .iter()
            .map(|&a| LegalActions::for_cell(world.map(), walk.env.positions[a]))
            .collect();
        let children = tree.nodes[node].branches[branch].children.clone();
        let tried: Vec<u64> = children.iter().map(|&c| tree.nodes[c].key).collect();

        if let Some(key) = pick_untried(&legal, &tried, rng) {
            let child = expand_leaf(tree, node, branch, key, &decider, &walk);
            let step = descend_into(tree, child, &agents, &mut walk, world, source, cfg)?;
            path.push(step);
            node = child;
            break simulate_rollout(
                world,
                &mut walk.env,
                &walk.pending,
                &mut walk.trackers,
                source,
                cfg,
                rng,
            )?;
        }

        let parent_visits = tree.nodes[node].branches[branch].visits;
        let stats: Vec<(f64, u64)> = children
            .iter()
            .map(|&c| (tree.nodes[c].total_return, tree.nodes[c].visits))
            .collect();
        let child = children[select_child(&stats, parent_visits, cfg.exploration_c, rng)];
        let step = descend_into(tree, child, &agents, &mut walk, world, source, cfg)?;
        path.push(step);
        node = child;
        branch = step.branch;
    };

    tree.nodes[node].leaf_visits += 1;
    backpropagate(tree, &path, leaf_return, cfg.gamma);
    Ok(())
}

/// Creates the child for `key` below `(node, branch)`.
fn expand_leaf(
    tree: &mut SearchTree,
    node: NodeId,
    branch: usize,
    key: u64,
    decider: &Decider,
    walk: &Walk,
) -> NodeId {
    let is_boundary = match decider {
        Decider::Joint => true,
        Decider::Agent(a) => walk.env.active_agents().last() == Some(*a),
        Decider::Terminal => unreachable!("terminal branches are never expanded"),
    };
    let id = tree.nodes.len();
    tree.nodes.push(SearchNode {
        visits: 0,
        total_return: 0.0,
        leaf_visits: 0,
        parent: Some(node),
        key,
        agent: match decider {
            Decider::Agent(a) => Some(*a),
            _ => None,
        },
        pending: walk.pending.decided_actions(),
        is_boundary,
        branches: Vec::new(),
    });
    tree.nodes[node].branches[branch].children.push(id);
    id
}

/// Moves the walk into `child`: records its action, applies the joint action
/// at boundary nodes, and resolves (creating if needed) the branch reached.
fn descend_into(
    tree: &mut SearchTree,
    child: NodeId,
    agents: &[usize],
    walk: &mut Walk,
    world: &World,
    source: &mut impl SubgoalSource,
    cfg: &MctsConfig,
) -> Result<PathStep> {
    for (&a, act) in agents
        .iter()
        .zip(decode_key(tree.nodes[child].key, agents.len()))
    {
        walk.pending.set(a, act);
    }
    let mode = tree.mode;
    if tree.nodes[child].is_boundary {
        let joint = walk.pending.to_joint();
        let r = apply_joint(
            world,
            &mut walk.env,
            &joint,
            &mut walk.trackers,
            source,
            cfg,
        )?;
        walk.pending.clear();
        let key = state_key(&walk.env);
        let node = &mut tree.nodes[child];
        let branch = match node.branches.iter().position(|b| b.state == key) {
            Some(b) => b,
            None => {
                node.branches.push(Branch {
                    state: key,
                    visits: 0,
                    decider: first_decider(&walk.env, world, mode),
                    children: Vec::new(),
                });
                node.branches.len() - 1
            }
        };
        Ok(PathStep {
            node: child,
            branch,
            boundary_reward: Some(r),
        })
    } else {
        let node = &mut tree.nodes[child];
        if node.branches.is_empty() {
            let last = *agents.last().expect("decomposed decider");
            let next = walk
                .env
                .active_agents()
                .find(|&i| i > last)
                .expect("non-boundary node has a next agent");
            node.branches.push(Branch {
                state: state_key(&walk.env),
                visits: 0,
                decider: Decider::Agent(next),
                children: Vec::new(),
            });
        }
        Ok(PathStep {
            node: child,
            branch: 0,
            boundary_reward: None,
        })
    }
}

/// Subgoal trackers for every active agent of `state`.
pub fn init_trackers(
    world: &World,
    state: &EnvState,
    source: &mut impl SubgoalSource,
    radius: usize,
) -> Vec<Option<SubgoalTracker>> {
    (0..state.num_agents())
        .map(|i| {
            state.active[i]
                .then(|| SubgoalTracker::new(source, i, state.positions[i], world.goal(i), radius))
        })
        .collect()
}

/// Stateful planner for one episode: owns the search rng and the subgoal
/// trackers that follow the real agents between decisions.
pub struct Planner<'w> {
    world: &'w World,
    cfg: MctsConfig,
    rng: ChaCha8Rng,
    subgoals: SubgoalCache<'w>,
    trackers: Vec<Option<SubgoalTracker>>,
}

impl<'w> Planner<'w> {
    pub fn new(world: &'w World, initial: &EnvState, cfg: MctsConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut subgoals = SubgoalCache::new(world.map());
        let trackers = init_trackers(world, initial, &mut subgoals, cfg.subgoal_radius);
        Ok(Planner {
            world,
            cfg,
            rng: crate::seeding::rng_from(seed),
            subgoals,
            trackers,
        })
    }

    pub fn config(&self) -> &MctsConfig {
        &self.cfg
    }

    pub fn trackers(&self) -> &[Option<SubgoalTracker>] {
        &self.trackers
    }

    /// Builds a fresh tree for `state` and returns it.
    pub fn search(&mut self, state: &EnvState) -> Result<SearchTree> {
        build_tree(
            self.world,
            state,
            &self.trackers,
            &mut self.subgoals,
            &self.cfg,
            &mut self.rng,
        )
    }

    /// Searches and returns the joint action to execute. Active agents the
    /// tree leaves undecided get the default (uniform random) policy.
    pub fn plan(&mut self, state: &EnvState) -> Result<JointAction> {
        let decided = self.search(state)?.best_decisions();
        Ok(decided.complete(self.world, state, &mut self.rng))
    }

    /// Advances the subgoal trackers after a real environment step.
    pub fn observe(&mut self, state: &EnvState) {
        for i in 0..state.num_agents() {
            if !state.active[i] {
                self.trackers[i] = None;
            } else if let Some(t) = self.trackers[i].as_mut() {
                t.update(&mut self.subgoals, state.positions[i]);
            }
        }
    }
}

/// One-shot planning from `state` with fresh subgoal trackers.
pub fn plan_action(
    world: &World,
    state: &EnvState,
    cfg: &MctsConfig,
    rng: &mut ChaCha8Rng,
) -> Result<JointAction> {
    let mut source = SubgoalCache::new(world.map());
    let trackers = init_trackers(world, state, &mut source, cfg.subgoal_radius);
    let decided = build_tree(world, state, &trackers, &mut source, cfg, rng)?.best_decisions();
    Ok(decided.complete(world, state, rng))
}
