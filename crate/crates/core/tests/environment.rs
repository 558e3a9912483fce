mod common;

use mamcts::grid_world::{restore, snapshot};
use mamcts::seeding::rng_from;
use mamcts::World;
use proptest::prelude::*;
use rand::Rng;

use common::*;

fn world_from(seed: u64, size: usize, density: f64, n: usize, k_max: u32) -> Option<World> {
    let mut rng = rng_from(seed);
    let map = random_map(&mut rng, size, size, density);
    let agents = random_agents(&mut rng, &map, n);
    if agents.is_empty() {
        return None;
    }
    Some(World::new(map, agents, k_max).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_walks_keep_invariants(seed in any::<u64>(), size in 3usize..10, density in 0.0f64..0.4, n in 1usize..12) {
        let Some(world) = world_from(seed, size, density, n, 40) else { return Ok(()); };
        let mut rng = rng_from(seed ^ 1);
        let mut state = world.reset(seed);
        while !world.is_terminal(&state) {
            let joint = random_joint(&mut rng, &world, &state);
            let (next, events) = world.step(&state, &joint).unwrap();
            prop_assert_eq!(transition_violation(&world, &state, &joint, &next), None);
            for &i in &events.reached_goal {
                prop_assert!(state.active[i] && !next.active[i]);
            }
            state = next;
        }
        prop_assert!(state.step <= 40);
    }

    #[test]
    fn rollback_replays_exactly(seed in any::<u64>(), split in 0u32..20) {
        let Some(world) = world_from(seed, 8, 0.2, 6, 30) else { return Ok(()); };
        let mut rng = rng_from(seed);
        let mut state = world.reset(seed.rotate_left(7));
        for _ in 0..split {
            if world.is_terminal(&state) { break; }
            let j = random_joint(&mut rng, &world, &state);
            world.step_mut(&mut state, &j).unwrap();
        }
        let snap = snapshot(&state);
        let bytes = state.to_bytes();
        let actions: Vec<_> = {
            let mut s = state.clone();
            let mut out = Vec::new();
            while !world.is_terminal(&s) {
                let j = random_joint(&mut rng, &world, &s);
                world.step_mut(&mut s, &j).unwrap();
                out.push((j, s.clone()));
            }
            out
        };
        let mut replay = restore(&snap);
        prop_assert_eq!(replay.to_bytes(), bytes);
        for (j, expected) in &actions {
            world.step_mut(&mut replay, j).unwrap();
            prop_assert_eq!(&replay, expected);
        }
    }

    #[test]
    fn illegal_moves_are_rejected_without_mutation(seed in any::<u64>()) {
        let Some(world) = world_from(seed, 6, 0.35, 3, 20) else { return Ok(()); };
        let mut state = world.reset(seed);
        let mut rng = rng_from(seed);
        let i = rng.gen_range(0..world.num_agents());
        if !state.active[i] { return Ok(()); }
        let blocked_move = mamcts::Action::MOVES
            .into_iter()
            .find(|&a| !cell_free(world.map(), state.positions[i].offset(a)));
        if let Some(a) = blocked_move {
            let mut joint = mamcts::JointAction::wait(world.num_agents());
            joint.0[i] = a;
            let before = state.clone();
            prop_assert!(world.step_mut(&mut state, &joint).is_err());
            prop_assert_eq!(state, before);
        }
    }
}
