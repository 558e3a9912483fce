// Each example compiled as a module and run to completion.

#[path = "../examples/astar_baseline.rs"]
mod astar_baseline;
#[path = "../examples/grid_world.rs"]
mod grid_world;
#[path = "../examples/map_generation.rs"]
mod map_generation;
#[path = "../examples/plan_step.rs"]
mod plan_step;
#[path = "../examples/subgoals.rs"]
mod subgoals;

#[test]
fn grid_world_runs() {
    grid_world::main().unwrap();
}

#[test]
fn map_generation_runs() {
    map_generation::main().unwrap();
}

#[test]
fn subgoals_runs() {
    subgoals::main().unwrap();
}

#[test]
fn plan_step_runs() {
    plan_step::main().unwrap();
}

#[test]
fn astar_baseline_runs() {
    astar_baseline::main().unwrap();
}
