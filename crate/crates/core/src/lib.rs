//! Multi-agent pathfinding on 4-connected grids with decomposed Monte-Carlo
//! tree search.
//!
//! * [`grid_world`]: the stochastic multi-agent environment.
//! * [`map_forge`]: random and maze map generators, agent placement, difficulty ranking.
//! * [`shortest_path`]: A*, distance fields and subgoal trackers.
//! * [`tree_search`]: Joint MCTS, MAMCTS and Subgoal MAMCTS planners.
//! * [`policies`]: the A* re-planning baseline and the uniform random policy.
//! * [`bench`]: episode runner, suites, reports.
//! * [`io`]: instance, manifest and suite-config files.
//!
//! ```
//! use mamcts::map_forge::{generate_instance, MapGenerator, RandomMapParams};
//! use mamcts::tree_search::Planner;
//! use mamcts::{MctsConfig, SearchMode, World};
//!
//! let inst = generate_instance(&MapGenerator::Random(RandomMapParams::cooperative()), 2, 0)?;
//! let world = World::new(inst.map, inst.agents, 64)?;
//! let mut state = world.reset(1);
//! let cfg = MctsConfig { iterations: 50, ..MctsConfig::for_mode(SearchMode::SubgoalMamcts) };
//! let mut planner = Planner::new(&world, &state, cfg, 2)?;
//! while !world.is_terminal(&state) {
//!     let joint = planner.plan(&state)?;
//!     world.step_mut(&mut state, &joint)?;
//!     planner.observe(&state);
//! }
//! # Ok::<(), mamcts::Error>(())
//! ```

pub mod bench;
pub mod error;
pub mod grid_world;
pub mod io;
pub mod map_forge;
pub mod policies;
pub mod seeding;
pub mod shortest_path;
pub mod tree_search;

pub use error::{Error, Result};
pub use grid_world::{Action, AgentSpec, Cell, EnvState, GridMap, JointAction, StepEvents, World};
pub use tree_search::{MctsConfig, SearchMode};
