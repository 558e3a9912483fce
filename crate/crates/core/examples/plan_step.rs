//! One planning decision with each tree-search variant.

use mamcts::grid_world::load_map;
use mamcts::seeding::rng_from;
use mamcts::tree_search::{decode_key, plan_action, Planner};
use mamcts::{AgentSpec, Cell, MctsConfig, SearchMode, World};

pub fn main() -> mamcts::Result<()> {
    // Two agents must pass each other through a one-cell gap.
    let map = load_map(
        "\
..#..
.....
..#..
",
    )?;
    let agents = vec![
        AgentSpec {
            id: 0,
            start: Cell::new(1, 0),
            goal: Cell::new(1, 4),
        },
        AgentSpec {
            id: 1,
            start: Cell::new(1, 4),
            goal: Cell::new(1, 0),
        },
    ];
    let world = World::new(map, agents, 32)?;
    let state = world.reset(1);

    for mode in [
        SearchMode::Joint,
        SearchMode::Mamcts,
        SearchMode::SubgoalMamcts,
    ] {
        let cfg = MctsConfig::for_mode(mode);
        let action = plan_action(&world, &state, &cfg, &mut rng_from(5))?;
        println!("{mode:?}: {:?}", action.0);
    }

    // Inspecting the tree behind a decision.
    let mut planner = Planner::new(
        &world,
        &state,
        MctsConfig::for_mode(SearchMode::SubgoalMamcts),
        5,
    )?;
    let tree = planner.search(&state)?;
    println!(
        "{} nodes, root visits {}",
        tree.nodes.len(),
        tree.root().visits
    );
    for &c in tree.root_children() {
        let n = &tree.nodes[c];
        println!(
            "  agent 0 {:?}: visits {:4}, mean {:.4}",
            decode_key(n.key, 1)[0],
            n.visits,
            n.mean_value()
        );
    }
    Ok(())
}
