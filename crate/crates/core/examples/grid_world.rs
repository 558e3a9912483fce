//! Stepping the environment by hand: conflicts, swaps, goal removal, rollback.

use mamcts::grid_world::{load_map, restore, snapshot};
use mamcts::{Action, AgentSpec, Cell, JointAction, World};

pub fn main() -> mamcts::Result<()> {
    let map = load_map(
        "\
.....
.#.#.
.....
",
    )?;
    let agents = vec![
        AgentSpec {
            id: 0,
            start: Cell::new(0, 0),
            goal: Cell::new(0, 4),
        },
        AgentSpec {
            id: 1,
            start: Cell::new(0, 2),
            goal: Cell::new(2, 2),
        },
        AgentSpec {
            id: 2,
            start: Cell::new(2, 0),
            goal: Cell::new(0, 1),
        },
    ];
    let world = World::new(map, agents, 64)?;
    let mut state = world.reset(7);
    println!("{}", world.map());

    for i in 0..world.num_agents() {
        let legal: Vec<Action> = world.legal_actions(&state, i)?.iter().collect();
        println!("agent {i} at {} may take {legal:?}", state.positions[i]);
    }

    // Agents 0 and 1 both want (0, 1): one of them wins by a random draw.
    let before = snapshot(&state);
    let joint = JointAction(vec![Action::Right, Action::Left, Action::Up]);
    let events = world.step_mut(&mut state, &joint)?;
    println!(
        "after {joint:?}: {:?}, blocked {:?}",
        state.positions, events.blocked_moves
    );

    // Rolling back and replaying with the same rng state reproduces the outcome.
    let mut replay = restore(&before);
    world.step_mut(&mut replay, &joint)?;
    assert_eq!(replay, state);

    while !world.is_terminal(&state) {
        let mut joint = JointAction::wait(world.num_agents());
        for i in state.active_agents() {
            let path = mamcts::shortest_path::find_path(
                world.map(),
                state.positions[i],
                world.goal(i),
                &[],
            );
            joint.0[i] = path.map_or(Action::Wait, |p| p.first_action());
        }
        let events = world.step_mut(&mut state, &joint)?;
        if !events.reached_goal.is_empty() {
            println!(
                "step {}: agents {:?} reached their goals",
                state.step, events.reached_goal
            );
        }
    }
    println!(
        "done after {} steps, {} still active",
        state.step,
        state.num_active()
    );
    Ok(())
}
