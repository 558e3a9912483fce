//! The re-planning A* baseline, stepped manually and through the episode runner.

use mamcts::bench::{run_episode, Algorithm, EpisodeConfig};
use mamcts::map_forge::{generate_instance, MapGenerator, RandomMapParams};
use mamcts::policies::{joint_policy_act, PolicyContext, PolicyKind};
use mamcts::World;

pub fn main() -> mamcts::Result<()> {
    let generator = MapGenerator::Random(RandomMapParams::cooperative());
    let inst = generate_instance(&generator, 6, 21)?;
    let world = World::new(inst.map.clone(), inst.agents.clone(), 64)?;

    let policies = vec![PolicyKind::AStar; world.num_agents()];
    let mut ctx = PolicyContext::new(&world, 0);
    let mut state = world.reset(0);
    while !world.is_terminal(&state) {
        let joint = joint_policy_act(&world, &state, &policies, &mut ctx)?;
        world.step_mut(&mut state, &joint)?;
        ctx.record(&joint, &state);
    }
    println!(
        "manual loop: {} steps, {} of {} agents left",
        state.step,
        state.num_active(),
        world.num_agents()
    );

    let m = run_episode(&inst, Algorithm::AStar, &EpisodeConfig::default())?;
    println!(
        "run_episode: ISR {:.3}, CSR {}, EL {}, {:.6} s per decision",
        m.isr, m.csr, m.episode_length, m.mean_decision_time
    );
    Ok(())
}
