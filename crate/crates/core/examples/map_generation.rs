//! Random and maze maps, agent placement, and hardest-instance selection.

use mamcts::map_forge::{
    generate_instance, generate_maze_map, generate_random_map, label_components,
    select_hard_instances, MapGenerator, MazeParams, RandomMapParams,
};

pub fn main() -> mamcts::Result<()> {
    let params = RandomMapParams::cooperative();
    let map = generate_random_map(&params, 3)?;
    let (_, sizes) = label_components(&map);
    println!(
        "random 16x16, {} blocked, components {sizes:?}\n{map}",
        map.blocked_count()
    );

    let maze = generate_maze_map(&MazeParams::labyrinth(15), 3)?;
    println!(
        "maze 15x15, {} free\n{maze}",
        maze.len() - maze.blocked_count()
    );

    let generator = MapGenerator::Random(params);
    let inst = generate_instance(&generator, 4, 11)?;
    for a in &inst.agents {
        println!("agent {}: {} -> {}", a.id, a.start, a.goal);
    }
    println!("difficulty {}", inst.difficulty);

    let hard = select_hard_instances(&generator, 16, 50, 5)?;
    let ranked: Vec<(u64, u64)> = hard.iter().map(|i| (i.seed, i.difficulty)).collect();
    println!("hardest 5 of 50 seeds (seed, difficulty): {ranked:?}");
    Ok(())
}
