//! A* paths, distance fields and the moving subgoal used for reward shaping.

use mamcts::grid_world::load_map;
use mamcts::shortest_path::{find_path, init_subgoal, update_subgoal, DistanceField};
use mamcts::Cell;

pub fn main() -> mamcts::Result<()> {
    let map = load_map(
        "\
.......
.#####.
.#...#.
.#.#.#.
...#...
",
    )?;
    let (start, goal) = (Cell::new(4, 0), Cell::new(2, 4));
    let path = find_path(&map, start, goal, &[]).expect("goal is reachable");
    println!("path of {} moves: {:?}", path.len_moves(), path.cells);

    // Another agent sitting in the corridor forces a detour.
    let detour = find_path(&map, start, goal, &[Cell::new(2, 2)]);
    println!("with (2, 2) occupied: {:?}", detour.map(|p| p.len_moves()));

    let field = DistanceField::new(&map, goal);
    println!("BFS distance from start: {:?}", field.get(start));

    let mut tracker = init_subgoal(&map, 0, start, goal, 2).expect("reachable");
    println!("first subgoal {:?}", tracker.current_subgoal);
    for cell in path.cells.iter().skip(1) {
        let (next, reached) = update_subgoal(&tracker, &map, *cell);
        if reached {
            println!("reached subgoal at {cell}, next {:?}", next.current_subgoal);
        }
        tracker = next;
    }
    Ok(())
}
