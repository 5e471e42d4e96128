//! Fixed benchmark inputs, shared so every bench measures the same instance.

use tolrerm_core::tasks::{random_tolerant_task, TaskShape, TolerantTask};
use tolrerm_core::{Ball, LabeledExample, Region, Vector};

pub const BENCH_SEED: u64 = 20261018;

/// The default planar task used by the sweep.
pub fn task() -> TolerantTask {
    random_tolerant_task(&TaskShape::default(), BENCH_SEED).expect("default shape is valid")
}

/// A larger task: more atoms and hypotheses.
pub fn wide_task() -> TolerantTask {
    let shape = TaskShape { atoms: 64, linear_hypotheses: 256, sphere_hypotheses: 64, ..TaskShape::default() };
    random_tolerant_task(&shape, BENCH_SEED).expect("shape is valid")
}

/// Sample of size `n` from a task.
pub fn sample(task: &TolerantTask, n: usize) -> Vec<LabeledExample> {
    task.dist.sample(n, &mut tolrerm_core::rng::rng_from_seed(BENCH_SEED))
}

/// Three overlapping planar balls.
pub fn union_region() -> Region {
    Region::union_of_balls(vec![
        Ball::new(Vector::from([0.0, 0.0]), 1.0).expect("valid ball"),
        Ball::new(Vector::from([1.2, 0.4]), 0.7).expect("valid ball"),
        Ball::new(Vector::from([-0.5, 1.1]), 0.5).expect("valid ball"),
    ])
    .expect("valid union")
}
